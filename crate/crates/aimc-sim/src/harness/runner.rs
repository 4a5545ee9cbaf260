//! Experiment execution: builds problem + device + algorithm from a config,
//! runs seeded training loops, and writes per-run CSV metrics plus an
//! aggregate summary.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::analysis::MetricsAccumulator;
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, ProblemSpec, SweepPoint};
use crate::optim::{self, Algorithm, BuildArgs};
use crate::problems::{
    load_mnist_idx, make_least_squares, DiagQuadratic, FcnClassifier, FcnProblem, GradNoise,
    LeastSquares, Objective, VectorObjective,
};
use crate::rng::{RunStreams, SeedSplitter};

/// Stable CSV schema, one row per logging interval. Undefined metrics are
/// written as empty cells.
pub const CSV_HEADER: &str =
    "iteration,loss,grad_norm_sq,dist_to_opt_sq,p_residual_sq,s_amp_w,s_amp_p";

#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub iteration: u64,
    pub loss: f64,
    pub grad_norm_sq: Option<f64>,
    pub dist_to_opt_sq: Option<f64>,
    pub p_residual_sq: Option<f64>,
    pub s_amp_w: Option<f64>,
    pub s_amp_p: Option<f64>,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

impl MetricsRow {
    fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.iteration,
            self.loss,
            cell(self.grad_norm_sq),
            cell(self.dist_to_opt_sq),
            cell(self.p_residual_sq),
            cell(self.s_amp_w),
            cell(self.s_amp_p),
        )
    }
}

/// Final metrics of one seeded run. `tail_*` values average the last
/// quarter of logged rows (the plateau estimate).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetrics {
    pub repeat: u32,
    pub iterations: u64,
    pub final_loss: f64,
    pub tail_loss: f64,
    pub tail_grad_norm_sq: Option<f64>,
    pub tail_dist_sq: Option<f64>,
    pub tail_p_residual_sq: Option<f64>,
    pub e_main: Option<f64>,
    pub e_residual: Option<f64>,
    pub s_main: Option<f64>,
    pub s_residual: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub pulses_fired: Option<f64>,
    pub buffer_decrement: Option<f64>,
}

impl RunMetrics {
    fn numeric_fields(&self) -> Vec<(&'static str, Option<f64>)> {
        vec![
            ("final_loss", Some(self.final_loss)),
            ("tail_loss", Some(self.tail_loss)),
            ("tail_grad_norm_sq", self.tail_grad_norm_sq),
            ("tail_dist_sq", self.tail_dist_sq),
            ("tail_p_residual_sq", self.tail_p_residual_sq),
            ("e_main", self.e_main),
            ("e_residual", self.e_residual),
            ("s_main", self.s_main),
            ("s_residual", self.s_residual),
            ("test_accuracy", self.test_accuracy),
        ]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlgoSummary {
    pub algorithm: String,
    pub runs: Vec<RunMetrics>,
    /// Mean over repeats, per metric present in every run.
    pub mean: BTreeMap<String, f64>,
    /// Population standard deviation over repeats.
    pub std: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointSummary {
    pub label: String,
    pub set: Vec<String>,
    pub algorithms: Vec<AlgoSummary>,
}

impl PointSummary {
    pub fn algo(&self, name: &str) -> Option<&AlgoSummary> {
        self.algorithms.iter().find(|a| a.algorithm == name)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub seed: u64,
    pub repeats: u32,
    pub points: Vec<PointSummary>,
}

impl Summary {
    pub fn point(&self, label: &str) -> Option<&PointSummary> {
        self.points.iter().find(|p| p.label == label)
    }
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '-' })
        .collect()
}

/// Runs every sweep point × algorithm × repeat of `cfg`, writing
/// `metrics_<point>_<algo>_r<rep>.csv` files, `summary.json`, and
/// `resolved_config.toml` into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: impl AsRef<Path>) -> Result<Summary> {
    cfg.validate()?;
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("resolved_config.toml"), cfg.to_toml_string())?;

    let points: Vec<SweepPoint> = if cfg.sweep.is_empty() {
        vec![SweepPoint {
            label: "default".into(),
            set: Vec::new(),
        }]
    } else {
        cfg.sweep.clone()
    };

    let mut summary = Summary {
        schema_version: cfg.schema_version,
        seed: cfg.run.seed,
        repeats: cfg.run.repeats,
        points: Vec::new(),
    };

    for point in &points {
        let mut point_cfg = cfg.clone();
        point_cfg.sweep = Vec::new();
        let point_cfg = point_cfg.with_sets(&point.set)?;

        let mut algo_summaries = Vec::new();
        for algo_name in point_cfg.algorithms() {
            let mut runs = Vec::new();
            for rep in 0..point_cfg.run.repeats {
                let csv_path = out_dir.join(format!(
                    "metrics_{}_{}_r{rep}.csv",
                    sanitize(&point.label),
                    sanitize(&algo_name)
                ));
                runs.push(run_single(&point_cfg, &algo_name, rep, &csv_path)?);
            }
            let (mean, std) = aggregate(&runs);
            algo_summaries.push(AlgoSummary {
                algorithm: algo_name,
                runs,
                mean,
                std,
            });
        }
        summary.points.push(PointSummary {
            label: point.label.clone(),
            set: point.set.clone(),
            algorithms: algo_summaries,
        });
    }

    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::Other(format!("summary serialization: {e}")))?;
    fs::write(out_dir.join("summary.json"), json)?;
    Ok(summary)
}

fn aggregate(runs: &[RunMetrics]) -> (BTreeMap<String, f64>, BTreeMap<String, f64>) {
    let mut mean = BTreeMap::new();
    let mut std = BTreeMap::new();
    if runs.is_empty() {
        return (mean, std);
    }
    let template = runs[0].numeric_fields();
    for (name, _) in template {
        let values: Vec<f64> = runs
            .iter()
            .filter_map(|r| {
                r.numeric_fields()
                    .into_iter()
                    .find(|(n, _)| *n == name)
                    .and_then(|(_, v)| v)
            })
            .collect();
        if values.len() != runs.len() {
            continue;
        }
        let m = values.iter().sum::<f64>() / values.len() as f64;
        let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
        mean.insert(name.to_string(), m);
        std.insert(name.to_string(), var.sqrt());
    }
    (mean, std)
}

/// Builds the objective named by the problem spec. The problem instance is
/// derived from the master seed only, so repeats and algorithms share it.
pub fn build_problem(spec: &ProblemSpec, splitter: &SeedSplitter) -> Result<Box<dyn Objective>> {
    match spec.kind.as_str() {
        "least_squares" => {
            let noise = match spec.noise.mode.as_str() {
                "none" => GradNoise::None,
                "additive" => GradNoise::Additive {
                    sigma: spec.noise.sigma,
                },
                "subsample" => GradNoise::Subsample {
                    batch: spec.noise.batch,
                },
                other => {
                    return Err(Error::config(
                        "problem.noise.mode",
                        format!("unknown noise mode `{other}`"),
                    ))
                }
            };
            let mut rng = splitter.stream("problem", 0);
            let ls: LeastSquares = make_least_squares(
                spec.d,
                spec.d_out,
                spec.sigma_a,
                spec.sigma_w_star,
                noise,
                &mut rng,
            )?;
            Ok(Box::new(VectorObjective::new(ls)))
        }
        "quadratic" => {
            let q = DiagQuadratic::new(
                ndarray::Array1::from_vec(spec.curvature.clone()),
                ndarray::Array1::from_vec(spec.center.clone()),
                spec.sigma,
            )?;
            Ok(Box::new(VectorObjective::new(q)))
        }
        "mnist_fcn" => {
            let dir = resolve_mnist_dir(&spec.data_dir)?;
            let train = load_mnist_idx(
                dir.join("train-images-idx3-ubyte"),
                dir.join("train-labels-idx1-ubyte"),
            )?;
            let test = load_mnist_idx(
                dir.join("t10k-images-idx3-ubyte"),
                dir.join("t10k-labels-idx1-ubyte"),
            )?;
            let train = if spec.train_limit > 0 {
                train.take(spec.train_limit)
            } else {
                train
            };
            let test = if spec.test_limit > 0 {
                test.take(spec.test_limit)
            } else {
                test
            };
            let mut sizes = vec![train.pixels()];
            sizes.extend_from_slice(&spec.hidden);
            sizes.push(10);
            let net = FcnClassifier::new(sizes)?;
            Ok(Box::new(FcnProblem::new(net, train, test, spec.batch_size)?))
        }
        other => Err(Error::config(
            "problem.kind",
            format!("unknown problem kind `{other}`"),
        )),
    }
}

/// Dataset directory: explicit config path, else `AIMC_MNIST_DIR`, else
/// `./data/mnist`.
pub fn resolve_mnist_dir(configured: &str) -> Result<PathBuf> {
    let dir = if !configured.is_empty() {
        PathBuf::from(configured)
    } else if let Ok(env_dir) = std::env::var("AIMC_MNIST_DIR") {
        PathBuf::from(env_dir)
    } else {
        PathBuf::from("data/mnist")
    };
    if !dir.join("train-images-idx3-ubyte").exists() {
        return Err(Error::config(
            "problem.data_dir",
            format!(
                "IDX dataset not found under `{}` (expected train-images-idx3-ubyte, \
                 train-labels-idx1-ubyte, t10k-images-idx3-ubyte, t10k-labels-idx1-ubyte); \
                 set problem.data_dir or AIMC_MNIST_DIR",
                dir.display()
            ),
        ));
    }
    Ok(dir)
}

fn resolve_iterations(cfg: &ExperimentConfig, problem: &dyn Objective) -> u64 {
    if cfg.run.epochs > 0 {
        if let Some(spe) = problem.steps_per_epoch() {
            return cfg.run.epochs * spe;
        }
    }
    cfg.run.iterations
}

/// One seeded training run of one algorithm; streams rows to `csv_path`.
pub fn run_single(
    cfg: &ExperimentConfig,
    algo_name: &str,
    rep: u32,
    csv_path: impl AsRef<Path>,
) -> Result<RunMetrics> {
    let splitter = SeedSplitter::new(cfg.run.seed);
    let mut problem = build_problem(&cfg.problem, &splitter)?;
    let mut streams = RunStreams::new(&splitter, rep as u64);
    let init = problem.init_weights(&mut streams.init);

    let hp = cfg.optimizer.hyper_params();
    let device = cfg.device.clone();
    let mut variation_rng = splitter.stream("element", rep as u64);
    let mut make_array = |w: &Array2<f64>| device.make_array(w, &mut variation_rng);
    let mut algo = optim::build(
        algo_name,
        &mut BuildArgs {
            init: &init,
            hp: &hp,
            make_array: &mut make_array,
        },
    )?;

    let iterations = resolve_iterations(cfg, problem.as_ref());
    let log_interval = if cfg.run.log_interval > 0 {
        cfg.run.log_interval
    } else {
        (iterations / 1000).max(1)
    };

    let file = fs::File::create(csv_path.as_ref())?;
    let mut csv = BufWriter::new(file);
    writeln!(csv, "{CSV_HEADER}")?;

    let mut acc = MetricsAccumulator::new();
    let mut rows: Vec<MetricsRow> = Vec::new();
    let optimum = problem.optimum();

    for k in 0..iterations {
        let step_loss = algo.step(problem.as_mut(), &mut streams)?;
        if k % log_interval == 0 || k + 1 == iterations {
            let row = observe(
                k,
                step_loss,
                problem.as_ref(),
                algo.as_ref(),
                optimum.as_deref(),
                hp.gamma,
            );
            acc.record(
                row.grad_norm_sq.unwrap_or(f64::NAN),
                row.grad_norm_sq.unwrap_or(f64::NAN),
                row.p_residual_sq,
                row.dist_to_opt_sq,
                row.s_amp_w,
                row.s_amp_p,
            );
            writeln!(csv, "{}", row.to_csv())?;
            rows.push(row);
        }
    }
    csv.flush()?;

    let tail_start = rows.len().saturating_sub((rows.len() / 4).max(1));
    let tail = &rows[tail_start..];
    let tail_mean = |f: &dyn Fn(&MetricsRow) -> Option<f64>| -> Option<f64> {
        let vals: Vec<f64> = tail.iter().filter_map(|r| f(r)).collect();
        if vals.len() == tail.len() && !vals.is_empty() {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        } else {
            None
        }
    };

    let logical = algo.logical_weights();
    let has_grad_metrics = rows.iter().all(|r| r.grad_norm_sq.is_some());
    Ok(RunMetrics {
        repeat: rep,
        iterations,
        final_loss: rows.last().map(|r| r.loss).unwrap_or(f64::NAN),
        tail_loss: tail_mean(&|r| Some(r.loss)).unwrap_or(f64::NAN),
        tail_grad_norm_sq: tail_mean(&|r| r.grad_norm_sq),
        tail_dist_sq: tail_mean(&|r| r.dist_to_opt_sq),
        tail_p_residual_sq: tail_mean(&|r| r.p_residual_sq),
        e_main: has_grad_metrics.then(|| acc.e_main()),
        e_residual: has_grad_metrics.then(|| acc.e_residual()),
        s_main: rows.iter().all(|r| r.s_amp_w.is_some()).then(|| acc.s_main()),
        s_residual: rows
            .iter()
            .all(|r| r.s_amp_p.is_some())
            .then(|| acc.s_residual()),
        test_accuracy: problem.eval_metric(&logical),
        pulses_fired: algo.transfer_ledger().map(|(f, _)| f),
        buffer_decrement: algo.transfer_ledger().map(|(_, d)| d),
    })
}

fn observe(
    iteration: u64,
    step_loss: f64,
    problem: &dyn Objective,
    algo: &dyn Algorithm,
    optimum: Option<&[Array2<f64>]>,
    gamma: f64,
) -> MetricsRow {
    let logical = algo.logical_weights();
    let (loss, grad_norm_sq) = match problem.full_metrics(&logical) {
        Some((l, g)) => (l, Some(g)),
        None => (step_loss, None),
    };
    let dist_to_opt_sq = problem.dist_to_opt_sq(&logical);
    let p_residual_sq = match (algo.residual_weights(), optimum) {
        (Some(p), Some(star)) if gamma > 0.0 => {
            let main = algo.main_weights();
            let mut acc = 0.0;
            for ((pi, wi), si) in p.iter().zip(main.iter()).zip(star.iter()) {
                let target = (si - wi) / gamma;
                let diff = pi - &target;
                acc += diff.iter().map(|v| v * v).sum::<f64>();
            }
            Some(acc)
        }
        _ => None,
    };
    MetricsRow {
        iteration,
        loss,
        grad_norm_sq,
        dist_to_opt_sq,
        p_residual_sq,
        s_amp_w: algo.amp_w(),
        s_amp_p: algo.amp_p(),
    }
}
