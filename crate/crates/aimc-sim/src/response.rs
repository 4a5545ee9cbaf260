//! Response-function models for resistive elements.
//!
//! A resistive element reacts to a positive or negative pulse by changing its
//! conductance-encoded weight `w` by `delta_w_min * q_plus(w)` or
//! `delta_w_min * q_minus(w)`. The pair `(q_plus, q_minus)` is positive and
//! differentiable inside the element's dynamic range and generally
//! asymmetric. This module provides the built-in families (generic linear,
//! power, exponential) plus tabulated curves, the symmetric/asymmetric
//! decomposition
//!
//! ```text
//! F(w) = (q_minus(w) + q_plus(w)) / 2,   G(w) = (q_minus(w) - q_plus(w)) / 2,
//! ```
//!
//! the symmetric point `w◇` where `G(w◇) = 0`, and the accumulated asymmetry
//! `R_c(w) = ∫_{w◇}^{w} G(u)/F(u) du`, which is the penalty an asymmetric
//! element implicitly adds to a noisy training objective.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Tolerance used to certify `G(symmetric_point) ≈ 0` for tabulated curves.
const SYM_POINT_TOL: f64 = 1e-12;
/// Grid resolution for bound scans and root bracketing on tabulated curves.
const SCAN_POINTS: usize = 10_000;

#[derive(Debug, Clone)]
pub enum ResponseKind {
    /// `q+(w) = (1 + c_lin)(1 - w/tau)`, `q-(w) = (1 - c_lin)(1 + w/tau)`.
    GenericLinear { tau: f64, c_lin: f64 },
    /// `q±(w) = (1 ∓ w/tau)^gamma_res`.
    Power { tau: f64, gamma_res: f64 },
    /// `q±(w) = (exp(gamma_res (1 ∓ w/tau)) - 1) / (exp(gamma_res) - 1)`.
    Exponential { tau: f64, gamma_res: f64 },
    /// Measured `(w, q+, q-)` samples, monotone-cubic interpolated.
    Tabulated(Arc<TabulatedCurve>),
}

/// A response-function pair together with its derived bounds.
///
/// Immutable after construction; cheap to clone and safe to share across
/// concurrent evaluators.
#[derive(Debug, Clone)]
pub struct ResponseModel {
    kind: ResponseKind,
    lo: f64,
    hi: f64,
    q_min: f64,
    q_max: f64,
}

impl ResponseModel {
    pub fn generic_linear(tau: f64, c_lin: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::InvalidResponse(format!("tau must be > 0, got {tau}")));
        }
        if !(c_lin.abs() < 1.0) {
            return Err(Error::InvalidResponse(format!(
                "|c_lin| must be < 1 so both response factors stay positive inside the range, got {c_lin}"
            )));
        }
        let kind = ResponseKind::GenericLinear { tau, c_lin };
        // Both factors are monotone on [-tau, tau]: each vanishes at one edge
        // and peaks at the other.
        let q_max = 2.0 * (1.0 + c_lin.abs());
        Ok(ResponseModel {
            kind,
            lo: -tau,
            hi: tau,
            q_min: 0.0,
            q_max,
        })
    }

    pub fn power(tau: f64, gamma_res: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::InvalidResponse(format!("tau must be > 0, got {tau}")));
        }
        if !(gamma_res > 0.0) {
            return Err(Error::InvalidResponse(format!(
                "gamma_res must be > 0, got {gamma_res}"
            )));
        }
        Ok(ResponseModel {
            kind: ResponseKind::Power { tau, gamma_res },
            lo: -tau,
            hi: tau,
            q_min: 0.0,
            q_max: 2f64.powf(gamma_res),
        })
    }

    pub fn exponential(tau: f64, gamma_res: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::InvalidResponse(format!("tau must be > 0, got {tau}")));
        }
        if !(gamma_res > 0.0) {
            return Err(Error::InvalidResponse(format!(
                "gamma_res must be > 0, got {gamma_res}"
            )));
        }
        let q_max = ((2.0 * gamma_res).exp() - 1.0) / (gamma_res.exp() - 1.0);
        Ok(ResponseModel {
            kind: ResponseKind::Exponential { tau, gamma_res },
            lo: -tau,
            hi: tau,
            q_min: 0.0,
            q_max,
        })
    }

    pub fn tabulated(points: Vec<(f64, f64, f64)>) -> Result<Self> {
        let curve = TabulatedCurve::new(points)?;
        let (lo, hi) = (curve.ws[0], *curve.ws.last().unwrap());
        let mut q_min = f64::INFINITY;
        let mut q_max = f64::NEG_INFINITY;
        // Bound scan over a dense grid plus the knots themselves.
        for i in 0..=SCAN_POINTS {
            let w = lo + (hi - lo) * (i as f64) / (SCAN_POINTS as f64);
            let (qp, qm) = (curve.q_plus(w), curve.q_minus(w));
            q_min = q_min.min(qp).min(qm);
            q_max = q_max.max(qp).max(qm);
        }
        if q_min < -SYM_POINT_TOL {
            return Err(Error::InvalidResponse(format!(
                "tabulated response dips negative (min {q_min:.3e})"
            )));
        }
        Ok(ResponseModel {
            kind: ResponseKind::Tabulated(Arc::new(curve)),
            lo,
            hi,
            q_min: q_min.max(0.0),
            q_max,
        })
    }

    /// Loads a tabulated model from a CSV file with header `w,q_plus,q_minus`
    /// and strictly increasing `w`.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if lineno == 0 {
                let header: Vec<&str> = line.split(',').map(str::trim).collect();
                if header != ["w", "q_plus", "q_minus"] {
                    return Err(Error::InvalidResponse(format!(
                        "{}: expected header `w,q_plus,q_minus`, got `{line}`",
                        path.display()
                    )));
                }
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(Error::InvalidResponse(format!(
                    "{}:{}: expected 3 columns, got {}",
                    path.display(),
                    lineno + 1,
                    cols.len()
                )));
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse::<f64>().map_err(|_| {
                    Error::InvalidResponse(format!(
                        "{}:{}: bad number `{s}`",
                        path.display(),
                        lineno + 1
                    ))
                })
            };
            rows.push((parse(cols[0])?, parse(cols[1])?, parse(cols[2])?));
        }
        Self::tabulated(rows)
    }

    pub fn kind(&self) -> &ResponseKind {
        &self.kind
    }

    /// Closed dynamic range `[lo, hi]` of admissible weight states.
    pub fn dynamic_range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Infimum of both response factors over the dynamic range. Zero when the
    /// range touches hard saturation, as it does for all built-in families.
    pub fn q_min(&self) -> f64 {
        self.q_min
    }

    /// Supremum of both response factors over the dynamic range.
    pub fn q_max(&self) -> f64 {
        self.q_max
    }

    /// Upper bound on the symmetric component `F`; equals `q_max`.
    pub fn f_max(&self) -> f64 {
        self.q_max
    }

    pub fn clamp(&self, w: f64) -> f64 {
        w.clamp(self.lo, self.hi)
    }

    /// Positive-direction response factor at `w` (clamped to the range).
    pub fn q_plus(&self, w: f64) -> f64 {
        let w = self.clamp(w);
        match &self.kind {
            ResponseKind::GenericLinear { tau, c_lin } => (1.0 + c_lin) * (1.0 - w / tau),
            ResponseKind::Power { tau, gamma_res } => (1.0 - w / tau).max(0.0).powf(*gamma_res),
            ResponseKind::Exponential { tau, gamma_res } => {
                ((gamma_res * (1.0 - w / tau)).exp() - 1.0) / (gamma_res.exp() - 1.0)
            }
            ResponseKind::Tabulated(t) => t.q_plus(w).max(0.0),
        }
    }

    /// Negative-direction response factor at `w` (clamped to the range).
    pub fn q_minus(&self, w: f64) -> f64 {
        let w = self.clamp(w);
        match &self.kind {
            ResponseKind::GenericLinear { tau, c_lin } => (1.0 - c_lin) * (1.0 + w / tau),
            ResponseKind::Power { tau, gamma_res } => (1.0 + w / tau).max(0.0).powf(*gamma_res),
            ResponseKind::Exponential { tau, gamma_res } => {
                ((gamma_res * (1.0 + w / tau)).exp() - 1.0) / (gamma_res.exp() - 1.0)
            }
            ResponseKind::Tabulated(t) => t.q_minus(w).max(0.0),
        }
    }

    /// Symmetric/asymmetric decomposition `(F, G)` at `w`.
    ///
    /// Exact arithmetic combination of the factors, so `q_plus == F - G` and
    /// `q_minus == F + G` reconstruct to machine precision.
    pub fn decompose(&self, w: f64) -> (f64, f64) {
        let qp = self.q_plus(w);
        let qm = self.q_minus(w);
        ((qm + qp) / 2.0, (qm - qp) / 2.0)
    }

    pub fn f_sym(&self, w: f64) -> f64 {
        self.decompose(w).0
    }

    pub fn g_asym(&self, w: f64) -> f64 {
        self.decompose(w).1
    }

    /// The weight state `w◇` where both directions respond equally.
    ///
    /// Closed form for the built-in families; root of `G` by bisection for
    /// tabulated curves (error if `G` never changes sign on the range).
    pub fn symmetric_point(&self) -> Result<f64> {
        match &self.kind {
            ResponseKind::GenericLinear { tau, c_lin } => Ok(c_lin * tau),
            ResponseKind::Power { .. } | ResponseKind::Exponential { .. } => Ok(0.0),
            ResponseKind::Tabulated(_) => self.bisect_symmetric_point(),
        }
    }

    fn bisect_symmetric_point(&self) -> Result<f64> {
        let g = |w: f64| self.g_asym(w);
        let (lo, hi) = (self.lo, self.hi);
        let mut prev_w = lo;
        let mut prev_g = g(lo);
        let mut bracket = None;
        for i in 1..=SCAN_POINTS {
            let w = lo + (hi - lo) * (i as f64) / (SCAN_POINTS as f64);
            let gw = g(w);
            if prev_g == 0.0 {
                return Ok(prev_w);
            }
            if prev_g * gw <= 0.0 {
                bracket = Some((prev_w, w));
                break;
            }
            prev_w = w;
            prev_g = gw;
        }
        let (mut a, mut b) = bracket.ok_or_else(|| {
            Error::NoSymmetricPoint("asymmetry G has no sign change over the dynamic range".into())
        })?;
        let mut ga = g(a);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            let gm = g(mid);
            if gm == 0.0 || (b - a).abs() < SYM_POINT_TOL * (hi - lo).max(1.0) {
                return Ok(mid);
            }
            if ga * gm < 0.0 {
                b = mid;
            } else {
                a = mid;
                ga = gm;
            }
        }
        Ok(0.5 * (a + b))
    }

    /// Accumulated asymmetry `R_c(w) = ∫_{w◇}^{w} G(u)/F(u) du`.
    ///
    /// Closed form `w²/(2 tau)` for the generic linear family with
    /// `c_lin = 0`; adaptive quadrature otherwise. `R_c(w◇) = 0`, and the
    /// value is non-negative whenever `G/F` is increasing through `w◇`.
    pub fn penalty_rc(&self, w: f64) -> Result<f64> {
        let w = self.clamp(w);
        if let ResponseKind::GenericLinear { tau, c_lin } = &self.kind {
            if *c_lin == 0.0 {
                return Ok(w * w / (2.0 * tau));
            }
        }
        let sp = self.symmetric_point()?;
        if w == sp {
            return Ok(0.0);
        }
        let integrand = |u: f64| {
            let (f, g) = self.decompose(u);
            g / f
        };
        adaptive_simpson(&integrand, sp, w, 1e-10, 48)
    }

    /// Derivative of the asymmetry ratio `R = G/F` at the symmetric point.
    ///
    /// Since `G(w◇) = 0`, this is `G'(w◇)/F(w◇)`: analytic for the built-in
    /// families, centered differences (`h = range / 10⁴`) for tabulated.
    pub fn r_prime_at_symmetric(&self) -> Result<f64> {
        match &self.kind {
            ResponseKind::GenericLinear { tau, c_lin } => {
                // G(w) = w/tau - c_lin, F(w◇) = 1 - c_lin².
                Ok((1.0 / tau) / (1.0 - c_lin * c_lin))
            }
            ResponseKind::Power { tau, gamma_res } => Ok(gamma_res / tau),
            ResponseKind::Exponential { tau, gamma_res } => {
                let eg = gamma_res.exp();
                Ok((gamma_res / tau) * eg / (eg - 1.0))
            }
            ResponseKind::Tabulated(_) => {
                let sp = self.symmetric_point()?;
                let h = (self.hi - self.lo) / (SCAN_POINTS as f64);
                let r = |w: f64| {
                    let (f, g) = self.decompose(w);
                    g / f
                };
                Ok((r(sp + h) - r(sp - h)) / (2.0 * h))
            }
        }
    }

    /// Copy of this model with its scale parameters perturbed, for modeling
    /// fabrication spread across elements. `tau_factor` stretches the dynamic
    /// range (and with it the symmetric point); `gamma_factor` rescales the
    /// shape parameter where one exists.
    pub fn perturbed(&self, tau_factor: f64, gamma_factor: f64) -> Result<Self> {
        if !(tau_factor > 0.0) || !(gamma_factor > 0.0) {
            return Err(Error::InvalidResponse(format!(
                "perturbation factors must be > 0, got ({tau_factor}, {gamma_factor})"
            )));
        }
        match &self.kind {
            ResponseKind::GenericLinear { tau, c_lin } => {
                Self::generic_linear(tau * tau_factor, *c_lin)
            }
            ResponseKind::Power { tau, gamma_res } => {
                Self::power(tau * tau_factor, gamma_res * gamma_factor)
            }
            ResponseKind::Exponential { tau, gamma_res } => {
                Self::exponential(tau * tau_factor, gamma_res * gamma_factor)
            }
            ResponseKind::Tabulated(t) => {
                let pts = t
                    .ws
                    .iter()
                    .zip(t.qp.ys.iter().zip(t.qm.ys.iter()))
                    .map(|(&w, (&qp, &qm))| (w * tau_factor, qp, qm))
                    .collect();
                Self::tabulated(pts)
            }
        }
    }
}

/// Adaptive Simpson quadrature with absolute tolerance.
fn adaptive_simpson(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: u32,
) -> Result<f64> {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), fm)
    }
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        fm: f64,
        tol: f64,
        depth: u32,
        worst: &mut f64,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (left, flm) = simpson(f, a, fa, m, fm);
        let (right, frm) = simpson(f, m, fm, b, fb);
        let err = left + right - whole;
        if err.abs() <= 15.0 * tol || depth == 0 {
            if depth == 0 {
                *worst = worst.max(err.abs() / 15.0);
            }
            return left + right + err / 15.0;
        }
        recurse(f, a, fa, m, fm, left, flm, tol / 2.0, depth - 1, worst)
            + recurse(f, m, fm, b, fb, right, frm, tol / 2.0, depth - 1, worst)
    }

    if a == b {
        return Ok(0.0);
    }
    let (fa, fb) = (f(a), f(b));
    let (whole, fm) = simpson(f, a, fa, b, fb);
    let mut worst = 0.0f64;
    let v = recurse(f, a, fa, b, fb, whole, fm, tol, max_depth, &mut worst);
    if worst > tol {
        return Err(Error::QuadratureNoConvergence {
            requested: tol,
            achieved: worst,
        });
    }
    Ok(v)
}

/// Monotone piecewise-cubic (Fritsch–Carlson) interpolant for one response
/// direction. Cubic Hermite segments keep the curve differentiable at knots.
#[derive(Debug, Clone)]
struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

impl Pchip {
    fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let n = xs.len();
        let mut ds = vec![0.0; n];
        if n == 2 {
            let s = (ys[1] - ys[0]) / (xs[1] - xs[0]);
            ds[0] = s;
            ds[1] = s;
            return Pchip { xs, ys, ds };
        }
        let h: Vec<f64> = (0..n - 1).map(|i| xs[i + 1] - xs[i]).collect();
        let slope: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
        for i in 1..n - 1 {
            if slope[i - 1] * slope[i] <= 0.0 {
                ds[i] = 0.0;
            } else {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                ds[i] = (w1 + w2) / (w1 / slope[i - 1] + w2 / slope[i]);
            }
        }
        ds[0] = pchip_endpoint(h[0], h[1], slope[0], slope[1]);
        ds[n - 1] = pchip_endpoint(h[n - 2], h[n - 3], slope[n - 2], slope[n - 3]);
        Pchip { xs, ys, ds }
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let mut i = match self
            .xs
            .binary_search_by(|probe| probe.partial_cmp(&x).unwrap())
        {
            Ok(k) => return self.ys[k],
            Err(k) => k - 1,
        };
        if i >= n - 1 {
            i = n - 2;
        }
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i] + h10 * h * self.ds[i] + h01 * self.ys[i + 1] + h11 * h * self.ds[i + 1]
    }
}

fn pchip_endpoint(h0: f64, h1: f64, s0: f64, s1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
    if d * s0 <= 0.0 {
        0.0
    } else if s0 * s1 <= 0.0 && d.abs() > 3.0 * s0.abs() {
        3.0 * s0
    } else {
        d
    }
}

/// Sampled response curves for both pulse directions.
#[derive(Debug)]
pub struct TabulatedCurve {
    ws: Vec<f64>,
    qp: Pchip,
    qm: Pchip,
}

impl TabulatedCurve {
    fn new(points: Vec<(f64, f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidResponse(format!(
                "tabulated response needs at least 2 samples, got {}",
                points.len()
            )));
        }
        for pair in points.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(Error::InvalidResponse(format!(
                    "w samples must be strictly increasing ({} then {})",
                    pair[0].0, pair[1].0
                )));
            }
        }
        for (idx, &(w, qp, qm)) in points.iter().enumerate() {
            let interior = idx > 0 && idx + 1 < points.len();
            if interior && (qp <= 0.0 || qm <= 0.0) {
                return Err(Error::InvalidResponse(format!(
                    "response factors must be positive strictly inside the range (w={w}: q+={qp}, q-={qm})"
                )));
            }
            if qp < 0.0 || qm < 0.0 {
                return Err(Error::InvalidResponse(format!(
                    "response factors must be non-negative (w={w}: q+={qp}, q-={qm})"
                )));
            }
        }
        let ws: Vec<f64> = points.iter().map(|p| p.0).collect();
        let qp = Pchip::new(ws.clone(), points.iter().map(|p| p.1).collect());
        let qm = Pchip::new(ws.clone(), points.iter().map(|p| p.2).collect());
        Ok(TabulatedCurve { ws, qp, qm })
    }

    fn q_plus(&self, w: f64) -> f64 {
        self.qp.eval(w)
    }

    fn q_minus(&self, w: f64) -> f64 {
        self.qm.eval(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn builtin_families() -> Vec<(&'static str, ResponseModel)> {
        vec![
            ("linear c=0", ResponseModel::generic_linear(1.0, 0.0).unwrap()),
            ("linear c=0.3", ResponseModel::generic_linear(2.0, 0.3).unwrap()),
            ("linear c=-0.5", ResponseModel::generic_linear(0.7, -0.5).unwrap()),
            ("power g=0.5", ResponseModel::power(1.0, 0.5).unwrap()),
            ("power g=3", ResponseModel::power(0.1, 3.0).unwrap()),
            ("exp g=4", ResponseModel::exponential(1.0, 4.0).unwrap()),
            ("exp g=0.8", ResponseModel::exponential(2.5, 0.8).unwrap()),
        ]
    }

    #[test]
    fn q_plus_examples() {
        let ideal = ResponseModel::generic_linear(1.0, 0.0).unwrap();
        assert!((ideal.q_plus(0.0) - 1.0).abs() < 1e-15);
        assert!((ideal.q_plus(0.5) - 0.5).abs() < 1e-15);
        let pow = ResponseModel::power(1.0, 0.5).unwrap();
        assert!((pow.q_plus(0.0) - 1.0).abs() < 1e-15);
        let exp = ResponseModel::exponential(1.0, 4.0).unwrap();
        assert!((exp.q_plus(0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn q_minus_examples() {
        let ideal = ResponseModel::generic_linear(1.0, 0.0).unwrap();
        assert!((ideal.q_minus(0.5) - 1.5).abs() < 1e-15);
        let skewed = ResponseModel::generic_linear(2.0, 0.3).unwrap();
        assert!((skewed.q_minus(0.0) - 0.7).abs() < 1e-15);
        let pow = ResponseModel::power(1.0, 2.0).unwrap();
        assert_eq!(pow.q_minus(-1.0), 0.0);
    }

    #[test]
    fn construction_rejects_bad_parameters() {
        assert!(ResponseModel::generic_linear(1.0, 1.0).is_err());
        assert!(ResponseModel::generic_linear(1.0, -1.3).is_err());
        assert!(ResponseModel::generic_linear(0.0, 0.0).is_err());
        assert!(ResponseModel::power(1.0, 0.0).is_err());
        assert!(ResponseModel::exponential(-1.0, 2.0).is_err());
    }

    #[test]
    fn decompose_examples() {
        let ideal = ResponseModel::generic_linear(1.0, 0.0).unwrap();
        let (f, g) = ideal.decompose(0.5);
        assert!((f - 1.0).abs() < 1e-15);
        assert!((g - 0.5).abs() < 1e-15);

        for (_, m) in builtin_families() {
            let sp = m.symmetric_point().unwrap();
            let (_, g) = m.decompose(sp);
            assert!(g.abs() < 1e-12);
        }

        // Power with unit shape parameter coincides with the plain linear model.
        let pow = ResponseModel::power(1.0, 1.0).unwrap();
        let (f, g) = pow.decompose(0.2);
        assert!((f - 1.0).abs() < 1e-12);
        assert!((g - 0.2).abs() < 1e-12);
    }

    #[test]
    fn symmetric_point_examples() {
        assert!((ResponseModel::generic_linear(2.0, 0.3).unwrap().symmetric_point().unwrap() - 0.6).abs() < 1e-14);
        assert_eq!(ResponseModel::power(0.1, 3.0).unwrap().symmetric_point().unwrap(), 0.0);
        assert_eq!(ResponseModel::generic_linear(5.0, 0.0).unwrap().symmetric_point().unwrap(), 0.0);
    }

    #[test]
    fn symmetric_point_grid() {
        for tau in [0.1, 0.6, 1.0, 3.5] {
            for c in [-0.6, -0.2, 0.0, 0.1, 0.3] {
                let m = ResponseModel::generic_linear(tau, c).unwrap();
                assert!(m.g_asym(m.symmetric_point().unwrap()).abs() <= 1e-10);
            }
            for g in [0.5, 1.0, 2.0, 4.0] {
                let m = ResponseModel::power(tau, g).unwrap();
                assert!(m.g_asym(m.symmetric_point().unwrap()).abs() <= 1e-10);
                let m = ResponseModel::exponential(tau, g).unwrap();
                assert!(m.g_asym(m.symmetric_point().unwrap()).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn penalty_examples() {
        let m = ResponseModel::generic_linear(2.0, 0.0).unwrap();
        assert!((m.penalty_rc(1.0).unwrap() - 0.25).abs() < 1e-14);
        for (_, m) in builtin_families() {
            let sp = m.symmetric_point().unwrap();
            assert_eq!(m.penalty_rc(sp).unwrap(), 0.0);
        }
    }

    #[test]
    fn penalty_matches_dense_trapezoid_oracle() {
        // Independent oracle: 10⁶-point trapezoid rule on G/F over [0, 0.5].
        let m = ResponseModel::power(1.0, 2.0).unwrap();
        let n = 1_000_000usize;
        let (a, b) = (0.0, 0.5);
        let h = (b - a) / n as f64;
        let r = |w: f64| {
            let (f, g) = m.decompose(w);
            g / f
        };
        let mut acc = 0.5 * (r(a) + r(b));
        for i in 1..n {
            acc += r(a + h * i as f64);
        }
        let oracle = acc * h;
        let got = m.penalty_rc(0.5).unwrap();
        assert!(
            (got - oracle).abs() <= 1e-8,
            "quadrature {got} vs trapezoid oracle {oracle}"
        );
    }

    #[test]
    fn reconstruction_identity_dense() {
        for (name, m) in builtin_families() {
            let (lo, hi) = m.dynamic_range();
            for i in 0..1000 {
                let w = lo + (hi - lo) * (i as f64 + 0.5) / 1000.0;
                let (f, g) = m.decompose(w);
                let (qp, qm) = (m.q_plus(w), m.q_minus(w));
                let scale = qp.abs().max(qm.abs()).max(1e-30);
                assert!(((f - g) - qp).abs() / scale <= 1e-12, "{name} at {w}");
                assert!(((f + g) - qm).abs() / scale <= 1e-12, "{name} at {w}");
            }
        }
    }

    #[test]
    fn positivity_over_interior() {
        for (name, m) in builtin_families() {
            let (lo, hi) = m.dynamic_range();
            let mut min_q = f64::INFINITY;
            for i in 1..1000 {
                let w = lo + (hi - lo) * (i as f64) / 1000.0;
                min_q = min_q.min(m.q_plus(w)).min(m.q_minus(w));
            }
            assert!(min_q >= m.q_min() - 1e-12, "{name}: {min_q} < q_min");
            assert!(min_q > 0.0, "{name}: interior response factor not positive");
        }
    }

    #[test]
    fn penalty_is_minimal_at_symmetric_point() {
        // Families with strictly increasing G/F.
        for (name, m) in builtin_families() {
            let sp = m.symmetric_point().unwrap();
            let (lo, hi) = m.dynamic_range();
            for i in 1..40 {
                let w = lo + (hi - lo) * (i as f64) / 40.0;
                if (w - sp).abs() < 1e-9 {
                    continue;
                }
                assert!(
                    m.penalty_rc(w).unwrap() > 0.0,
                    "{name}: penalty not positive away from symmetric point at {w}"
                );
            }
        }
    }

    #[test]
    fn power_unit_gamma_matches_plain_linear() {
        let pow = ResponseModel::power(0.8, 1.0).unwrap();
        let lin = ResponseModel::generic_linear(0.8, 0.0).unwrap();
        for i in 0..=1000 {
            let w = -0.8 + 1.6 * (i as f64) / 1000.0;
            assert!((pow.q_plus(w) - lin.q_plus(w)).abs() <= 1e-12);
            assert!((pow.q_minus(w) - lin.q_minus(w)).abs() <= 1e-12);
        }
    }

    #[test]
    fn out_of_range_evaluates_at_clamped_boundary() {
        let m = ResponseModel::generic_linear(1.0, 0.0).unwrap();
        assert_eq!(m.q_plus(5.0), m.q_plus(1.0));
        assert_eq!(m.q_plus(5.0), 0.0);
        assert_eq!(m.q_minus(-5.0), 0.0);
    }

    #[test]
    fn tabulated_tracks_sampled_curve() {
        let src = ResponseModel::generic_linear(2.0, 0.25).unwrap();
        let pts: Vec<(f64, f64, f64)> = (0..=80)
            .map(|i| {
                let w = -2.0 + 4.0 * (i as f64) / 80.0;
                (w, src.q_plus(w), src.q_minus(w))
            })
            .collect();
        let tab = ResponseModel::tabulated(pts).unwrap();
        let sp = tab.symmetric_point().unwrap();
        assert!((sp - 0.5).abs() < 1e-6, "symmetric point {sp}");
        for i in 0..50 {
            let w = -1.9 + 3.8 * (i as f64) / 50.0;
            assert!((tab.q_plus(w) - src.q_plus(w)).abs() < 1e-3);
            assert!((tab.q_minus(w) - src.q_minus(w)).abs() < 1e-3);
        }
    }

    #[test]
    fn tabulated_without_sign_change_has_no_symmetric_point() {
        // q- strictly above q+ everywhere: G > 0 on the whole range.
        let pts: Vec<(f64, f64, f64)> = (0..=10)
            .map(|i| {
                let w = i as f64 / 10.0;
                (w, 1.0, 2.0)
            })
            .collect();
        let m = ResponseModel::tabulated(pts).unwrap();
        assert!(matches!(
            m.symmetric_point(),
            Err(Error::NoSymmetricPoint(_))
        ));
    }

    #[test]
    fn csv_round_trip(){
        use std::io::Write;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        let mut fh = std::fs::File::create(&path).unwrap();
        writeln!(fh, "w,q_plus,q_minus").unwrap();
        let src = ResponseModel::power(1.0, 2.0).unwrap();
        for i in 0..=60 {
            let w = -1.0 + 2.0 * (i as f64) / 60.0;
            writeln!(fh, "{},{},{}", w, src.q_plus(w), src.q_minus(w)).unwrap();
        }
        drop(fh);
        let tab = ResponseModel::from_csv(&path).unwrap();
        assert!(tab.symmetric_point().unwrap().abs() < 1e-6);
        assert!((tab.q_plus(0.3) - src.q_plus(0.3)).abs() < 1e-3);

        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "x,y,z\n0,1,1\n").unwrap();
        assert!(ResponseModel::from_csv(&bad).is_err());
    }

    #[test]
    fn perturbed_scales_symmetric_point_with_tau() {
        let m = ResponseModel::generic_linear(2.0, 0.3).unwrap();
        let p = m.perturbed(1.5, 1.0).unwrap();
        assert!((p.symmetric_point().unwrap() - 0.9).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn reconstruction_holds_for_random_params(
            tau in 0.05f64..10.0,
            c in -0.95f64..0.95,
            x in -1.0f64..1.0,
        ) {
            let m = ResponseModel::generic_linear(tau, c).unwrap();
            let w = x * tau;
            let (f, g) = m.decompose(w);
            prop_assert!(((f - g) - m.q_plus(w)).abs() <= 1e-12 * (1.0 + f.abs()));
            prop_assert!(((f + g) - m.q_minus(w)).abs() <= 1e-12 * (1.0 + f.abs()));
            prop_assert!(g.abs() <= f + 1e-12);
        }

        #[test]
        fn asymmetry_bounded_by_symmetric_component(
            tau in 0.05f64..10.0,
            gamma in 0.1f64..5.0,
            x in -1.0f64..1.0,
        ) {
            for m in [ResponseModel::power(tau, gamma).unwrap(),
                      ResponseModel::exponential(tau, gamma).unwrap()] {
                let (f, g) = m.decompose(x * tau);
                prop_assert!(g.abs() <= f + 1e-12);
            }
        }
    }
}
