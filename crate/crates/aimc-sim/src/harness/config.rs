//! Experiment configuration: a versioned TOML schema with dotted-path
//! overrides (`--set optimizer.alpha=0.05`) so sweeps stay scriptable.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::device::{self, AnalogArray, ResponseGrid, UpdateBackend};
use crate::error::{Error, Result};
use crate::optim::{self, HyperParams};
use crate::pulse::PulseConfig;
use crate::response::ResponseModel;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub problem: ProblemSpec,
    pub device: DeviceSpec,
    pub optimizer: OptimizerSpec,
    pub run: RunSpec,
    pub sweep: Vec<SweepPoint>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            problem: ProblemSpec::default(),
            device: DeviceSpec::default(),
            optimizer: OptimizerSpec::default(),
            run: RunSpec::default(),
            sweep: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemSpec {
    /// `least_squares`, `quadratic`, or `mnist_fcn`.
    pub kind: String,
    // least_squares
    pub d: usize,
    pub d_out: usize,
    pub sigma_a: f64,
    pub sigma_w_star: f64,
    pub noise: NoiseSpec,
    // quadratic
    pub curvature: Vec<f64>,
    pub center: Vec<f64>,
    pub sigma: f64,
    // mnist_fcn
    pub data_dir: String,
    pub train_limit: usize,
    pub test_limit: usize,
    pub batch_size: usize,
    pub hidden: Vec<usize>,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        ProblemSpec {
            kind: "least_squares".into(),
            d: 50,
            d_out: 100,
            sigma_a: 1.0,
            sigma_w_star: 0.5,
            noise: NoiseSpec::default(),
            curvature: vec![1.0],
            center: vec![1.0],
            sigma: 0.0,
            data_dir: String::new(),
            train_limit: 10_000,
            test_limit: 2_000,
            batch_size: 10,
            hidden: vec![256, 128],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    /// `none`, `additive`, or `subsample`.
    pub mode: String,
    pub sigma: f64,
    pub batch: usize,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            mode: "subsample".into(),
            sigma: 0.0,
            batch: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceSpec {
    /// `generic_linear`, `power`, `exponential`, or `tabulated`.
    pub family: String,
    pub tau: f64,
    pub c_lin: f64,
    pub gamma_res: f64,
    pub table_path: String,
    pub delta_w_min: f64,
    pub max_bl: u32,
    pub sigma_c: f64,
    /// `closed_form` or `pulse_train`.
    pub backend: String,
    pub sigma_read: f64,
    pub element_spread: f64,
}

impl Default for DeviceSpec {
    fn default() -> Self {
        DeviceSpec {
            family: "generic_linear".into(),
            tau: 1.0,
            c_lin: 0.0,
            gamma_res: 1.0,
            table_path: String::new(),
            delta_w_min: 1e-3,
            max_bl: 32,
            sigma_c: 0.0,
            backend: "closed_form".into(),
            sigma_read: 0.0,
            element_spread: 0.0,
        }
    }
}

impl DeviceSpec {
    pub fn response_model(&self) -> Result<ResponseModel> {
        match self.family.as_str() {
            "generic_linear" => ResponseModel::generic_linear(self.tau, self.c_lin),
            "power" => ResponseModel::power(self.tau, self.gamma_res),
            "exponential" => ResponseModel::exponential(self.tau, self.gamma_res),
            "tabulated" => ResponseModel::from_csv(&self.table_path),
            other => Err(Error::config(
                "device.family",
                format!("unknown response family `{other}`"),
            )),
        }
    }

    pub fn pulse_config(&self) -> Result<PulseConfig> {
        PulseConfig::new(self.delta_w_min, self.max_bl, self.sigma_c)
    }

    pub fn update_backend(&self) -> Result<UpdateBackend> {
        match self.backend.as_str() {
            "closed_form" => Ok(UpdateBackend::ClosedForm),
            "pulse_train" => Ok(UpdateBackend::PulseTrain),
            other => Err(Error::config(
                "device.backend",
                format!("unknown backend `{other}`"),
            )),
        }
    }

    /// Builds an array holding `init`, drawing element variation from
    /// `variation_rng`.
    pub fn make_array(
        &self,
        init: &Array2<f64>,
        variation_rng: &mut ChaCha12Rng,
    ) -> Result<AnalogArray> {
        let base = self.response_model()?;
        let grid = if self.element_spread > 0.0 {
            device::with_element_variation(&base, self.element_spread, init.dim(), variation_rng)?
        } else {
            ResponseGrid::Shared(base)
        };
        AnalogArray::new(
            init.clone(),
            grid,
            self.pulse_config()?,
            self.update_backend()?,
            self.sigma_read,
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSpec {
    pub algorithm: String,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub transfer_columns: usize,
    pub transfer_threshold: Option<f64>,
    pub mixing_read_noisy: bool,
    pub zero_shift_p: bool,
    pub lr_decay_t0: Option<f64>,
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        OptimizerSpec {
            algorithm: "analog_sgd".into(),
            alpha: 1e-3,
            beta: 0.01,
            gamma: 0.0,
            transfer_columns: 1,
            transfer_threshold: None,
            mixing_read_noisy: true,
            zero_shift_p: false,
            lr_decay_t0: None,
        }
    }
}

impl OptimizerSpec {
    pub fn hyper_params(&self) -> HyperParams {
        HyperParams {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            transfer_columns: self.transfer_columns,
            transfer_threshold: self.transfer_threshold,
            mixing_read_noisy: self.mixing_read_noisy,
            zero_shift_p: self.zero_shift_p,
            lr_decay_t0: self.lr_decay_t0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSpec {
    pub iterations: u64,
    /// For dataset problems: when > 0, overrides `iterations`.
    pub epochs: u64,
    pub seed: u64,
    pub repeats: u32,
    /// 0 = auto: `max(1, iterations / 1000)`.
    pub log_interval: u64,
    /// Extra algorithms run alongside `optimizer.algorithm` with the same
    /// hyper-parameters.
    pub compare: Vec<String>,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            iterations: 10_000,
            epochs: 0,
            seed: 1,
            repeats: 1,
            log_interval: 0,
            compare: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SweepPoint {
    pub label: String,
    pub set: Vec<String>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)
            .map_err(|e| Error::config("<config>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Returns a copy with `key=value` overrides applied by dotted path.
    pub fn with_sets(&self, sets: &[String]) -> Result<Self> {
        if sets.is_empty() {
            let out = self.clone();
            out.validate()?;
            return Ok(out);
        }
        let mut value = toml::Value::try_from(self)
            .map_err(|e| Error::config("<config>", e.to_string()))?;
        for spec in sets {
            apply_one_set(&mut value, spec)?;
        }
        let cfg: ExperimentConfig = value
            .try_into()
            .map_err(|e| Error::config("<config>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// All algorithms this config runs, lead algorithm first.
    pub fn algorithms(&self) -> Vec<String> {
        let mut out = vec![self.optimizer.algorithm.clone()];
        for extra in &self.run.compare {
            if !out.contains(extra) {
                out.push(extra.clone());
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        self.validate_problem()?;
        self.validate_device()?;
        self.validate_optimizer()?;
        self.validate_run()?;
        Ok(())
    }

    fn validate_problem(&self) -> Result<()> {
        let p = &self.problem;
        match p.kind.as_str() {
            "least_squares" => {
                if p.d == 0 || p.d_out == 0 {
                    return Err(Error::config("problem.d", "dimensions must be >= 1"));
                }
                if !(p.sigma_a > 0.0) {
                    return Err(Error::config("problem.sigma_a", "must be > 0"));
                }
                if !(p.sigma_w_star >= 0.0) {
                    return Err(Error::config("problem.sigma_w_star", "must be >= 0"));
                }
                match p.noise.mode.as_str() {
                    "none" => {}
                    "additive" => {
                        if !(p.noise.sigma >= 0.0) {
                            return Err(Error::config("problem.noise.sigma", "must be >= 0"));
                        }
                    }
                    "subsample" => {
                        if p.noise.batch == 0 || p.noise.batch > p.d_out {
                            return Err(Error::config(
                                "problem.noise.batch",
                                format!("must be in 1..={}", p.d_out),
                            ));
                        }
                    }
                    other => {
                        return Err(Error::config(
                            "problem.noise.mode",
                            format!("unknown noise mode `{other}`"),
                        ))
                    }
                }
            }
            "quadratic" => {
                if p.curvature.is_empty() || p.curvature.len() != p.center.len() {
                    return Err(Error::config(
                        "problem.curvature",
                        "curvature and center must be non-empty and equal length",
                    ));
                }
                if p.curvature.iter().any(|&h| h <= 0.0) {
                    return Err(Error::config("problem.curvature", "must be positive"));
                }
                if !(p.sigma >= 0.0) {
                    return Err(Error::config("problem.sigma", "must be >= 0"));
                }
            }
            "mnist_fcn" => {
                if p.batch_size == 0 {
                    return Err(Error::config("problem.batch_size", "must be >= 1"));
                }
                if p.hidden.is_empty() {
                    return Err(Error::config("problem.hidden", "needs at least one layer"));
                }
            }
            other => {
                return Err(Error::config(
                    "problem.kind",
                    format!("unknown problem kind `{other}`"),
                ))
            }
        }
        Ok(())
    }

    fn validate_device(&self) -> Result<()> {
        let d = &self.device;
        match d.family.as_str() {
            "generic_linear" | "power" | "exponential" => {
                if !(d.tau > 0.0) {
                    return Err(Error::config("device.tau", "must be > 0"));
                }
                if d.family == "generic_linear" && d.c_lin.abs() >= 1.0 {
                    return Err(Error::config("device.c_lin", "must satisfy |c_lin| < 1"));
                }
                if d.family != "generic_linear" && !(d.gamma_res > 0.0) {
                    return Err(Error::config("device.gamma_res", "must be > 0"));
                }
            }
            "tabulated" => {
                if d.table_path.is_empty() {
                    return Err(Error::config("device.table_path", "required for tabulated"));
                }
            }
            other => {
                return Err(Error::config(
                    "device.family",
                    format!("unknown response family `{other}`"),
                ))
            }
        }
        if !(d.delta_w_min > 0.0) {
            return Err(Error::config("device.delta_w_min", "must be > 0"));
        }
        if d.max_bl == 0 {
            return Err(Error::config("device.max_bl", "must be >= 1"));
        }
        if !(d.sigma_c >= 0.0) {
            return Err(Error::config("device.sigma_c", "must be >= 0"));
        }
        if !(d.sigma_read >= 0.0) {
            return Err(Error::config("device.sigma_read", "must be >= 0"));
        }
        if !(0.0..1.0).contains(&d.element_spread) {
            return Err(Error::config("device.element_spread", "must be in [0, 1)"));
        }
        self.device.update_backend()?;
        Ok(())
    }

    fn validate_optimizer(&self) -> Result<()> {
        let o = &self.optimizer;
        let known = optim::canonical_names().join(", ");
        for (field, name) in std::iter::once(("optimizer.algorithm", &o.algorithm))
            .chain(self.run.compare.iter().map(|n| ("run.compare", n)))
        {
            let resolved = optim::registry().iter().any(|r| {
                r.name == name.to_ascii_lowercase()
                    || r.aliases.contains(&name.to_ascii_lowercase().as_str())
            });
            if !resolved {
                return Err(Error::config(
                    field,
                    format!("unknown algorithm `{name}`; known: {known}"),
                ));
            }
        }
        if !(o.alpha > 0.0) {
            return Err(Error::config("optimizer.alpha", "must be > 0"));
        }
        if !(o.beta > 0.0) {
            return Err(Error::config("optimizer.beta", "must be > 0"));
        }
        if !(o.gamma >= 0.0) {
            return Err(Error::config("optimizer.gamma", "must be >= 0"));
        }
        if o.transfer_columns == 0 {
            return Err(Error::config("optimizer.transfer_columns", "must be >= 1"));
        }
        if let Some(t) = o.transfer_threshold {
            if !(t > 0.0) {
                return Err(Error::config("optimizer.transfer_threshold", "must be > 0"));
            }
        }
        if let Some(t0) = o.lr_decay_t0 {
            if !(t0 > 0.0) {
                return Err(Error::config("optimizer.lr_decay_t0", "must be > 0"));
            }
        }
        Ok(())
    }

    fn validate_run(&self) -> Result<()> {
        let r = &self.run;
        if r.repeats == 0 {
            return Err(Error::config("run.repeats", "must be >= 1"));
        }
        let dataset = self.problem.kind == "mnist_fcn";
        if dataset {
            if r.epochs == 0 && r.iterations == 0 {
                return Err(Error::config("run.epochs", "set epochs or iterations"));
            }
        } else if r.iterations == 0 {
            return Err(Error::config("run.iterations", "must be >= 1"));
        }
        Ok(())
    }
}

fn apply_one_set(root: &mut toml::Value, spec: &str) -> Result<()> {
    let (path, raw) = spec.split_once('=').ok_or_else(|| {
        Error::config(spec, "override must look like `section.field=value`")
    })?;
    let path = path.trim();
    let raw = raw.trim();
    let segments: Vec<&str> = path.split('.').collect();
    if segments.is_empty() || segments.iter().any(|s| s.is_empty()) {
        return Err(Error::config(path, "empty override path"));
    }
    let mut node = root;
    for seg in &segments[..segments.len() - 1] {
        node = match node {
            toml::Value::Table(t) => t.get_mut(*seg).ok_or_else(|| {
                Error::config(path, format!("no such config section `{seg}`"))
            })?,
            _ => return Err(Error::config(path, format!("`{seg}` is not a section"))),
        };
    }
    let last = segments[segments.len() - 1];
    let table = match node {
        toml::Value::Table(t) => t,
        _ => return Err(Error::config(path, "parent is not a table")),
    };
    let parsed = match table.get(last) {
        Some(existing) => parse_like(existing, raw, path)?,
        // Unknown keys are rejected later by the typed deserialize, except
        // optional fields that are simply absent; guess their type here.
        None => parse_guess(raw),
    };
    table.insert(last.to_string(), parsed);
    Ok(())
}

fn parse_like(existing: &toml::Value, raw: &str, path: &str) -> Result<toml::Value> {
    use toml::Value;
    let bad = |want: &str| Error::config(path, format!("cannot parse `{raw}` as {want}"));
    Ok(match existing {
        Value::Integer(_) => Value::Integer(raw.parse::<i64>().map_err(|_| bad("integer"))?),
        Value::Float(_) => Value::Float(raw.parse::<f64>().map_err(|_| bad("float"))?),
        Value::Boolean(_) => Value::Boolean(raw.parse::<bool>().map_err(|_| bad("bool"))?),
        Value::String(_) => Value::String(raw.to_string()),
        Value::Array(prev) => {
            let items: Vec<&str> = if raw.is_empty() {
                Vec::new()
            } else {
                raw.split(',').map(str::trim).collect()
            };
            let template = prev.first();
            let parsed: Result<Vec<Value>> = items
                .into_iter()
                .map(|item| match template {
                    Some(t) => parse_like(t, item, path),
                    None => Ok(parse_guess(item)),
                })
                .collect();
            Value::Array(parsed?)
        }
        _ => return Err(Error::config(path, "unsupported value type for override")),
    })
}

fn parse_guess(raw: &str) -> toml::Value {
    use toml::Value;
    if let Ok(b) = raw.parse::<bool>() {
        return Value::Boolean(b);
    }
    if !raw.contains(['.', 'e', 'E']) {
        if let Ok(i) = raw.parse::<i64>() {
            return Value::Integer(i);
        }
    }
    if let Ok(f) = raw.parse::<f64>() {
        return Value::Float(f);
    }
    Value::String(raw.to_string())
}
