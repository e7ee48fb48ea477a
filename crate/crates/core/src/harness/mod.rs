//! Configuration, dispatch and persistence of experiments.
//!
//! Each run writes `<kind>.csv` and `<kind>.manifest.json` into the output
//! directory and nothing else. CSV rows depend only on the configuration, so
//! reruns are byte-identical; the manifest additionally records timing.
//!
//! CSV columns per kind:
//!
//! | kind | columns |
//! |------|---------|
//! | cost | seed,p,q,lambda,x,cost,log_e,trunc_bound,iters,residual |
//! | lyapunov, sweep | seed,p,q,lambda,x,k,cost,cost_per_k,trunc_bound,iters |
//! | rate | p,q,x,lambda,alpha,alpha_stderr,alpha_minus_lambda,refined,domain_boundary |
//! | rate-sweep | x,p,q,i_hat,i_hat_stderr,lambda_minus,lambda_plus,lambda_at_max,domain_boundary |
//! | timeconst | seed,p,x,k,distance,distance_per_k |
//! | goodbox | seed,p,lambda,ell,epsilon,r,ball_radius,alpha_xi1,cost,good |
//! | selftest | check,case,lambda,value,reference_low,reference_high,error,allowed,passed |

mod config;
mod report;
pub mod selftest;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::asymptotics::{
    continuity_sweep, good_box_density, lyapunov_estimate, monotonicity_violations, rate_continuity_sweep,
    rate_function, LyapunovEstimate, RateCurve, RationalPoint,
};
use crate::error::{Error, Result};
use crate::lattice::Point;
use crate::metrics::{time_constant_estimate, TimeConstantParams};
use crate::solver::{modified_travel_cost, Cost};

pub use config::{default_p_c, BallModeName, ExperimentConfig, ExperimentKind};
pub use report::{emit_report, read_table};

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Seventeen significant digits; `inf` for infinite costs.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn fmt_cost(c: Cost) -> String {
    fmt_f64(c.as_f64())
}

fn fmt_rational(x: &RationalPoint) -> String {
    if x.denom == 1 {
        x.numer.to_string()
    } else {
        format!("{}/{}", x.numer, x.denom)
    }
}

/// Rows destined for one CSV file.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Diagnostics {
    pub solves: usize,
    pub max_truncation_bound: f64,
    pub max_iterations: usize,
    pub max_residual: f64,
}

impl Diagnostics {
    fn record(&mut self, trunc: f64, iters: usize, residual: f64) {
        self.solves += 1;
        self.max_truncation_bound = self.max_truncation_bound.max(trunc);
        self.max_iterations = self.max_iterations.max(iters);
        self.max_residual = self.max_residual.max(residual);
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ResultManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    pub csv: String,
    pub columns: Vec<String>,
    pub records: usize,
    /// How the per-record `seed` column was derived.
    pub seed_rule: String,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
    pub threads: usize,
    pub diagnostics: Diagnostics,
    pub summary: Value,
}

#[derive(Debug)]
pub struct RunOutput {
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
    pub manifest: ResultManifest,
}

pub fn csv_name(kind: ExperimentKind) -> String {
    format!("{kind}.csv")
}

pub fn manifest_name(kind: ExperimentKind) -> String {
    format!("{kind}.manifest.json")
}

/// Validates `config`, runs the named experiment and writes its outputs.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let kind = config.kind()?;
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let clock = Instant::now();
    info!("running {kind} with master seed {}", config.seed()?);

    let mut diag = Diagnostics::default();
    let (table, summary, outcome) = match kind {
        ExperimentKind::Cost => run_cost(config, &mut diag)?,
        ExperimentKind::Lyapunov => run_lyapunov(config, &mut diag)?,
        ExperimentKind::Sweep => run_sweep(config, &mut diag)?,
        ExperimentKind::Rate => run_rate(config)?,
        ExperimentKind::RateSweep => run_rate_sweep(config)?,
        ExperimentKind::Timeconst => run_timeconst(config)?,
        ExperimentKind::Goodbox => run_goodbox(config, &mut diag)?,
        ExperimentKind::Selftest => run_selftest(config)?,
    };

    fs::create_dir_all(&config.output)?;
    let csv_path = config.output.join(csv_name(kind));
    table.write(&csv_path)?;
    let manifest = ResultManifest {
        tool: TOOL,
        version: VERSION,
        kind,
        config: config.clone(),
        csv: csv_name(kind),
        columns: table.columns.clone(),
        records: table.rows.len(),
        seed_rule: "replicate i uses FieldSeed::replicate(seed, i), a SplitMix64 hash of (seed, i)".into(),
        started_unix_seconds: started,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
        threads: rayon::current_num_threads(),
        diagnostics: diag,
        summary,
    };
    let manifest_path = config.output.join(manifest_name(kind));
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    info!("wrote {} records to {}", manifest.records, csv_path.display());
    outcome?;
    Ok(RunOutput {
        csv_path,
        manifest_path,
        manifest,
    })
}

/// Table, manifest summary, and an error to report once outputs are written.
type Outcome = (Table, Value, Result<()>);

fn seeds_of(config: &ExperimentConfig) -> Result<Vec<crate::FieldSeed>> {
    Ok(config.lyapunov_params().seeds())
}

fn run_cost(config: &ExperimentConfig, diag: &mut Diagnostics) -> Result<Outcome> {
    let mut t = Table::new(&["seed", "p", "q", "lambda", "x", "cost", "log_e", "trunc_bound", "iters", "residual"]);
    let q = config.q();
    let opts = config.solver_options();
    let seeds = seeds_of(config)?;
    let origin = Point::origin(config.dimension);
    let mut summary = Vec::new();
    for &p in &config.p {
        for &lambda in &config.lambda {
            for x in config.integer_directions()? {
                let results = seeds
                    .par_iter()
                    .map(|&s| modified_travel_cost(&origin, &x, lambda, p, q, s, &opts))
                    .collect::<Result<Vec<_>>>()?;
                let mut finite = Vec::new();
                for (s, r) in seeds.iter().zip(&results) {
                    diag.record(r.truncation_error_bound, r.iterations, r.residual);
                    finite.extend(r.a_value.finite());
                    t.push(vec![
                        s.0.to_string(),
                        fmt_f64(p),
                        fmt_f64(q),
                        fmt_f64(lambda),
                        x.to_string(),
                        fmt_cost(r.a_value),
                        fmt_f64(r.log_e),
                        fmt_f64(r.truncation_error_bound),
                        r.iterations.to_string(),
                        fmt_f64(r.residual),
                    ]);
                }
                let est = crate::Estimate::from_samples(&finite);
                summary.push(json!({"p": p, "lambda": lambda, "x": x, "mean_cost": est.mean, "stderr": est.stderr,
                    "infinite": results.len() - finite.len()}));
            }
        }
    }
    Ok((t, Value::Array(summary), Ok(())))
}

const LYAPUNOV_COLUMNS: [&str; 10] = ["seed", "p", "q", "lambda", "x", "k", "cost", "cost_per_k", "trunc_bound", "iters"];

fn push_lyapunov_rows(t: &mut Table, est: &LyapunovEstimate, diag: &mut Diagnostics) {
    for (i, s) in est.seeds.iter().enumerate() {
        for (j, (k, _)) in est.per_k.iter().enumerate() {
            let a = est.costs[i][j];
            diag.record(est.truncation_bounds[i][j], est.iterations[i][j], 0.0);
            t.push(vec![
                s.0.to_string(),
                fmt_f64(est.p),
                fmt_f64(est.q),
                fmt_f64(est.lambda),
                est.direction.to_string(),
                k.to_string(),
                fmt_f64(a),
                fmt_f64(a / *k as f64),
                fmt_f64(est.truncation_bounds[i][j]),
                est.iterations[i][j].to_string(),
            ]);
        }
    }
}

fn lyapunov_summary(est: &LyapunovEstimate) -> Value {
    json!({
        "p": est.p, "q": est.q, "lambda": est.lambda, "x": est.direction,
        "alpha_hat": est.alpha_hat, "alpha_hat_stderr": est.alpha_hat_stderr,
        "alpha_upper": est.alpha_upper, "max_a_slack": est.max_slack,
        "per_k": est.per_k.iter().map(|(k, e)| json!({"k": k, "mean": e.mean, "stderr": e.stderr})).collect::<Vec<_>>(),
    })
}

fn run_lyapunov(config: &ExperimentConfig, diag: &mut Diagnostics) -> Result<Outcome> {
    let mut t = Table::new(&LYAPUNOV_COLUMNS);
    let params = config.lyapunov_params();
    let mut summary = Vec::new();
    for &p in &config.p {
        for &lambda in &config.lambda {
            for x in config.integer_directions()? {
                let est = lyapunov_estimate(&x, lambda, p, config.q(), &params)?;
                push_lyapunov_rows(&mut t, &est, diag);
                summary.push(lyapunov_summary(&est));
            }
        }
    }
    Ok((t, Value::Array(summary), Ok(())))
}

fn run_sweep(config: &ExperimentConfig, diag: &mut Diagnostics) -> Result<Outcome> {
    let mut t = Table::new(&LYAPUNOV_COLUMNS);
    let params = config.lyapunov_params();
    let mut summary = Vec::new();
    for &lambda in &config.lambda {
        for x in config.integer_directions()? {
            let sweep = continuity_sweep(&x, lambda, &config.p, config.q(), &params)?;
            for (_, est) in &sweep {
                push_lyapunov_rows(&mut t, est, diag);
            }
            let violations = monotonicity_violations(&sweep, 2.0 * config.tol);
            summary.push(json!({
                "lambda": lambda, "x": x,
                "monotonicity_violations": violations.len(),
                "per_p": sweep.iter().map(|(_, e)| lyapunov_summary(e)).collect::<Vec<_>>(),
            }));
        }
    }
    Ok((t, Value::Array(summary), Ok(())))
}

fn curve_summary(c: &RateCurve) -> Value {
    json!({
        "p": c.p, "q": c.q, "x": c.x.to_f64s(),
        "i_hat": c.i_hat, "i_hat_stderr": c.i_hat_stderr, "lambda_at_max": c.lambda_at_max,
        "lambda_minus_hat": c.lambda_minus_hat, "lambda_plus_hat": c.lambda_plus_hat,
        "domain_boundary": c.domain_boundary,
    })
}

fn run_rate(config: &ExperimentConfig) -> Result<Outcome> {
    let mut t = Table::new(&[
        "p", "q", "x", "lambda", "alpha", "alpha_stderr", "alpha_minus_lambda", "refined", "domain_boundary",
    ]);
    let params = config.lyapunov_params();
    let mut summary = Vec::new();
    for &p in &config.p {
        for x in config.rational_directions()? {
            let curve = match rate_function(&x, p, config.q(), &config.lambda_grid, &params) {
                Ok(c) => c,
                Err(Error::DomainBoundary(c)) => {
                    warn!("x = {} at p = {p}: α̂ − λ still increasing at the grid end", fmt_rational(&x));
                    *c
                }
                Err(e) => return Err(e),
            };
            for (i, &l) in curve.lambda_grid.iter().enumerate() {
                let a = curve.alpha_values[i];
                t.push(vec![
                    fmt_f64(p),
                    fmt_f64(config.q()),
                    fmt_rational(&x),
                    fmt_f64(l),
                    fmt_f64(a),
                    fmt_f64(curve.alpha_stderr[i]),
                    fmt_f64(a - l),
                    curve.refined.contains(&l).to_string(),
                    curve.domain_boundary.to_string(),
                ]);
            }
            summary.push(curve_summary(&curve));
        }
    }
    Ok((t, Value::Array(summary), Ok(())))
}

fn run_rate_sweep(config: &ExperimentConfig) -> Result<Outcome> {
    let mut t = Table::new(&[
        "x", "p", "q", "i_hat", "i_hat_stderr", "lambda_minus", "lambda_plus", "lambda_at_max", "domain_boundary",
    ]);
    let params = config.lyapunov_params();
    let mut summary = Vec::new();
    for x in config.rational_directions()? {
        for r in rate_continuity_sweep(&x, &config.p, config.q(), &config.lambda_grid, &params)? {
            t.push(vec![
                fmt_rational(&x),
                fmt_f64(r.p),
                fmt_f64(config.q()),
                fmt_f64(r.i_hat),
                fmt_f64(r.i_hat_stderr),
                fmt_f64(r.lambda_minus_hat),
                fmt_f64(r.lambda_plus_hat),
                fmt_f64(r.curve.lambda_at_max),
                r.domain_boundary.to_string(),
            ]);
            summary.push(curve_summary(&r.curve));
        }
    }
    Ok((t, Value::Array(summary), Ok(())))
}

fn run_timeconst(config: &ExperimentConfig) -> Result<Outcome> {
    let mut t = Table::new(&["seed", "p", "x", "k", "distance", "distance_per_k"]);
    let params = TimeConstantParams {
        k_max: config.k_max,
        replicates: config.replicates,
        master_seed: config.seed()?,
        pad: config.box_pad,
        max_box_sites: config.max_box_sites,
    };
    let mut summary = Vec::new();
    for &p in &config.p {
        for x in config.integer_directions()? {
            let est = time_constant_estimate(&x, p, &params)?;
            for (s, ds) in est.seeds.iter().zip(&est.distances) {
                for (j, &d) in ds.iter().enumerate() {
                    let k = j + 1;
                    t.push(vec![
                        s.0.to_string(),
                        fmt_f64(p),
                        x.to_string(),
                        k.to_string(),
                        d.to_string(),
                        fmt_f64(d as f64 / k as f64),
                    ]);
                }
            }
            summary.push(json!({"p": p, "x": x, "mu_hat": est.mu_hat, "mu_hat_stderr": est.mu_hat_stderr,
                "mu_upper": est.mu_upper}));
        }
    }
    Ok((t, Value::Array(summary), Ok(())))
}

fn run_goodbox(config: &ExperimentConfig, diag: &mut Diagnostics) -> Result<Outcome> {
    let mut t = Table::new(&[
        "seed", "p", "lambda", "ell", "epsilon", "r", "ball_radius", "alpha_xi1", "cost", "good",
    ]);
    let opts = config.solver_options();
    let params = config.lyapunov_params();
    let xi1 = Point::unit(config.dimension, 0);
    let mut summary = Vec::new();
    for &p in &config.p {
        for &lambda in &config.lambda {
            let alpha_xi1 = match (config.ball_mode, config.alpha_xi1) {
                (BallModeName::Plain, _) => f64::NAN,
                (_, Some(a)) => a,
                (_, None) => lyapunov_estimate(&xi1, lambda, p, config.q(), &params)?.alpha_hat,
            };
            let mode = config.ball_mode(alpha_xi1);
            for &ell in &config.ell {
                let g = good_box_density(
                    ell,
                    lambda,
                    config.epsilon,
                    p,
                    config.r,
                    config.dimension,
                    mode,
                    config.replicates,
                    config.seed()?,
                    &opts,
                )?;
                for (i, s) in g.seeds.iter().enumerate() {
                    diag.solves += 1;
                    t.push(vec![
                        s.0.to_string(),
                        fmt_f64(p),
                        fmt_f64(lambda),
                        ell.to_string(),
                        fmt_f64(config.epsilon),
                        fmt_f64(config.r),
                        g.ball.radius.to_string(),
                        fmt_f64(alpha_xi1),
                        fmt_cost(g.costs[i]),
                        (g.good[i] as u8).to_string(),
                    ]);
                }
                summary.push(json!({"p": p, "lambda": lambda, "ell": ell, "ball_radius": g.ball.radius,
                    "alpha_xi1": alpha_xi1, "density": g.estimate.mean, "stderr": g.estimate.stderr,
                    "ci_low": g.ci.0, "ci_high": g.ci.1, "successes": g.successes, "trials": g.trials}));
            }
        }
    }
    Ok((t, Value::Array(summary), Ok(())))
}

fn run_selftest(config: &ExperimentConfig) -> Result<Outcome> {
    let mut t = Table::new(&[
        "check", "case", "lambda", "value", "reference_low", "reference_high", "error", "allowed", "passed",
    ]);
    let rows = selftest::run_selftest(config.selftest_cases, config.seed()?, &config.solver_options())?;
    let failed = rows.iter().filter(|r| !r.passed).count();
    for r in &rows {
        t.push(vec![
            r.check.to_string(),
            r.case.to_string(),
            fmt_f64(r.lambda),
            fmt_f64(r.value),
            fmt_f64(r.reference_low),
            fmt_f64(r.reference_high),
            fmt_f64(r.error),
            fmt_f64(r.allowed),
            r.passed.to_string(),
        ]);
    }
    let outcome = if failed == 0 { Ok(()) } else { Err(Error::SelfTest(failed)) };
    Ok((t, json!({"checks": rows.len(), "failed": failed}), outcome))
}
