//! Lyapunov exponents, the rate function, continuity sweeps across `p` and
//! good-box densities.

mod goodbox;
mod rate;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::Point;
use crate::percolation::{build_clusters_with_budget, cube_for, FieldSeed, OpenConfig, DEFAULT_MAX_BOX_SITES};
use crate::solver::{check_parameters, modified_travel_cost_in, CostResult, SolverOptions, ANCHOR_PAD};
use crate::stats::Estimate;

pub use goodbox::{good_box_density, paper_sub_box_scale, GoodBoxDensity};
pub use rate::{
    lambda_plus_minus, rate_continuity_sweep, rate_function, LambdaGrid, RateCurve, RateSweepRow,
};

/// A point of `Q^d` stored as `numer / denom`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RationalPoint {
    pub numer: Point,
    pub denom: u32,
}

impl RationalPoint {
    pub fn integer(p: Point) -> Self {
        RationalPoint { numer: p, denom: 1 }
    }

    /// Smallest `M ≤ 1024` with `M·x` integral.
    pub fn from_f64s(x: &[f64]) -> Result<Self> {
        for m in 1..=1024u32 {
            let scaled: Vec<f64> = x.iter().map(|c| c * m as f64).collect();
            if scaled.iter().all(|c| (c - c.round()).abs() < 1e-9) {
                let coords: Vec<i64> = scaled.iter().map(|c| c.round() as i64).collect();
                return Ok(RationalPoint {
                    numer: Point::new(&coords)?,
                    denom: m,
                });
            }
        }
        Err(Error::invalid("x", format!("{x:?} has no denominator up to 1024")))
    }

    pub fn to_f64s(&self) -> Vec<f64> {
        self.numer.coords().iter().map(|&c| c as f64 / self.denom as f64).collect()
    }

    pub fn is_origin(&self) -> bool {
        self.numer.is_origin()
    }

    pub fn dim(&self) -> usize {
        self.numer.dim()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LyapunovParams {
    pub k_max: u32,
    pub replicates: usize,
    pub master_seed: u64,
    pub solver: SolverOptions,
    /// Pad around the anchored points in the `ω_q` box.
    pub anchor_pad: u64,
    pub max_box_sites: u64,
}

impl Default for LyapunovParams {
    fn default() -> Self {
        LyapunovParams {
            k_max: 24,
            replicates: 200,
            master_seed: 0,
            solver: SolverOptions::default(),
            anchor_pad: ANCHOR_PAD,
            max_box_sites: DEFAULT_MAX_BOX_SITES,
        }
    }
}

impl LyapunovParams {
    pub fn seeds(&self) -> Vec<FieldSeed> {
        (0..self.replicates as u64)
            .map(|i| FieldSeed::replicate(self.master_seed, i))
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.k_max == 0 {
            return Err(Error::invalid("k_max", "must be at least 1"));
        }
        if self.replicates == 0 {
            return Err(Error::invalid("replicates", "must be at least 1"));
        }
        Ok(())
    }
}

/// `a_λ^q(0, kx, ω_p)` for each `k` in `ks` and one field.
pub fn lyapunov_sample(
    seed: FieldSeed,
    direction: &Point,
    lambda: f64,
    p: f64,
    q: f64,
    ks: &[u32],
    params: &LyapunovParams,
) -> Result<Vec<CostResult>> {
    let origin = Point::origin(direction.dim());
    let k_far = ks.iter().copied().max().unwrap_or(1) as i64;
    let bx = cube_for(&[origin, k_far * *direction], params.anchor_pad)?;
    let anchors = build_clusters_with_budget(bx, OpenConfig::new(seed, q), params.max_box_sites)?;
    let env = OpenConfig::new(seed, p);
    ks.iter()
        .map(|&k| modified_travel_cost_in(&anchors, &env, &origin, &(k as i64 * *direction), lambda, &params.solver))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct LyapunovEstimate {
    pub direction: Point,
    pub lambda: f64,
    pub p: f64,
    pub q: f64,
    /// `(k, estimate of a_λ^q(0, kx)/k)`.
    pub per_k: Vec<(u32, Estimate)>,
    /// Mean at the largest `k`.
    pub alpha_hat: f64,
    pub alpha_hat_stderr: f64,
    /// Smallest per-`k` mean.
    pub alpha_upper: f64,
    pub seeds: Vec<FieldSeed>,
    /// Raw costs `a_λ^q(0, kx)` per seed, in the order of `per_k`.
    pub costs: Vec<Vec<f64>>,
    pub iterations: Vec<Vec<usize>>,
    pub truncation_bounds: Vec<Vec<f64>>,
    /// Largest `a_slack` over all solves.
    pub max_slack: f64,
}

impl LyapunovEstimate {
    pub fn last(&self) -> Estimate {
        self.per_k.last().expect("k_max ≥ 1").1
    }

    /// Per-seed values of `a/k` at the largest `k`.
    pub fn last_samples(&self) -> Vec<f64> {
        let (k, _) = *self.per_k.last().expect("k_max ≥ 1");
        self.costs.iter().map(|c| c.last().copied().unwrap_or(f64::NAN) / k as f64).collect()
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("lambda", format!("must be positive and finite, got {lambda}")));
    }
    Ok(())
}

/// Monte Carlo estimate of `α_λ^p(x)` from `a_λ^q(0, kx)/k`, `k = 1..=K`.
pub fn lyapunov_estimate(direction: &Point, lambda: f64, p: f64, q: f64, params: &LyapunovParams) -> Result<LyapunovEstimate> {
    let ks: Vec<u32> = (1..=params.k_max).collect();
    lyapunov_estimate_at(direction, lambda, p, q, &ks, params)
}

/// As [`lyapunov_estimate`], restricted to the given multiples.
pub fn lyapunov_estimate_at(
    direction: &Point,
    lambda: f64,
    p: f64,
    q: f64,
    ks: &[u32],
    params: &LyapunovParams,
) -> Result<LyapunovEstimate> {
    params.validate()?;
    check_parameters(p, q)?;
    check_lambda(lambda)?;
    if direction.is_origin() {
        return Err(Error::invalid("direction", "must be nonzero"));
    }
    if ks.is_empty() || ks.windows(2).any(|w| w[0] >= w[1]) || ks[0] == 0 {
        return Err(Error::invalid("k", "multiples must be positive and increasing"));
    }
    let seeds = params.seeds();
    let results = if q == 1.0 {
        // every seed sees the full lattice
        let one = lyapunov_sample(seeds[0], direction, lambda, p, q, ks, params)?;
        vec![one; seeds.len()]
    } else {
        seeds
            .par_iter()
            .map(|&s| lyapunov_sample(s, direction, lambda, p, q, ks, params))
            .collect::<Result<Vec<_>>>()?
    };

    let mut costs = Vec::with_capacity(results.len());
    let mut iterations = Vec::with_capacity(results.len());
    let mut truncation_bounds = Vec::with_capacity(results.len());
    let mut max_slack: f64 = 0.0;
    for rs in &results {
        let mut row = Vec::with_capacity(ks.len());
        for r in rs {
            let a = r.a_value.finite().ok_or_else(|| {
                Error::Resource("anchors of the giant cluster are disconnected in ω_p; enlarge the box".into())
            })?;
            row.push(a);
            max_slack = max_slack.max(r.a_slack());
        }
        costs.push(row);
        iterations.push(rs.iter().map(|r| r.iterations).collect());
        truncation_bounds.push(rs.iter().map(|r| r.truncation_error_bound).collect());
    }
    let per_k: Vec<(u32, Estimate)> = ks
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let xs: Vec<f64> = costs.iter().map(|c| c[j] / k as f64).collect();
            (k, Estimate::from_samples(&xs))
        })
        .collect();
    let last = per_k.last().expect("nonempty").1;
    let alpha_upper = per_k.iter().map(|(_, e)| e.mean).fold(f64::INFINITY, f64::min);
    Ok(LyapunovEstimate {
        direction: *direction,
        lambda,
        p,
        q,
        alpha_hat: last.mean,
        alpha_hat_stderr: last.stderr,
        alpha_upper,
        per_k,
        seeds,
        costs,
        iterations,
        truncation_bounds,
        max_slack,
    })
}

/// `α̂_λ(x)` for rational `x` through `α̂(Mx)/M`, using only `k = K`.
pub fn alpha_at(x: &RationalPoint, lambda: f64, p: f64, q: f64, params: &LyapunovParams) -> Result<Estimate> {
    if x.is_origin() {
        return Ok(Estimate {
            mean: 0.0,
            stderr: 0.0,
            n: params.replicates,
        });
    }
    let est = lyapunov_estimate_at(&x.numer, lambda, p, q, &[params.k_max], params)?;
    Ok(est.last().scaled(1.0 / x.denom as f64))
}

#[derive(Clone, Debug, Serialize)]
pub struct CostTimeConstant {
    pub direction: Point,
    pub p: f64,
    /// `(λ, estimate of α̂_λ(x)/λ)` in increasing `λ`.
    pub per_lambda: Vec<(f64, Estimate)>,
    pub mu_hat: f64,
    pub mu_hat_stderr: f64,
    /// Whether the ratios decrease along the list within two standard errors.
    pub nonincreasing: bool,
}

impl CostTimeConstant {
    /// Agreement with a breadth-first estimate within three pooled standard
    /// errors plus the forced gap `log(2d)·μ̂/λ_max`.
    pub fn agrees_with(&self, bfs: &Estimate) -> bool {
        let lambda_max = self.per_lambda.last().map(|(l, _)| *l).unwrap_or(f64::NAN);
        let d = self.direction.dim() as f64;
        let pooled = self.mu_hat_stderr.hypot(bfs.stderr);
        let gap = self.mu_hat - bfs.mean;
        gap.abs() <= 3.0 * pooled + (2.0 * d).ln() / lambda_max * self.mu_hat
    }
}

/// `μ̂(x)` as `α̂_λ(x)/λ` at the largest `λ` of an increasing list.
pub fn time_constant_from_costs(direction: &Point, p: f64, q: f64, lambdas: &[f64], params: &LyapunovParams) -> Result<CostTimeConstant> {
    if lambdas.is_empty() || lambdas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("lambda", "list must be nonempty and increasing"));
    }
    let lmax = *lambdas.last().expect("nonempty");
    if lmax < 20.0 {
        return Err(Error::invalid("lambda", format!("largest λ must be at least 20, got {lmax}")));
    }
    let per_lambda = lambdas
        .iter()
        .map(|&l| {
            let est = lyapunov_estimate_at(direction, l, p, q, &[params.k_max], params)?;
            Ok((l, est.last().scaled(1.0 / l)))
        })
        .collect::<Result<Vec<_>>>()?;
    let nonincreasing = per_lambda
        .windows(2)
        .all(|w| w[1].1.mean <= w[0].1.mean + 2.0 * w[0].1.pooled_stderr(&w[1].1) + 1e-12);
    let last = per_lambda.last().expect("nonempty").1;
    Ok(CostTimeConstant {
        direction: *direction,
        p,
        mu_hat: last.mean,
        mu_hat_stderr: last.stderr,
        nonincreasing,
        per_lambda,
    })
}

fn check_sweep(p_list: &[f64], q: f64) -> Result<Vec<f64>> {
    if p_list.is_empty() {
        return Err(Error::invalid("p", "sweep needs at least one value"));
    }
    let mut ps = p_list.to_vec();
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    for &p in &ps {
        check_parameters(p, q)?;
    }
    Ok(ps)
}

/// Lyapunov estimates at each `p`, all from the same seeds and `q`-anchors,
/// in increasing `p`.
pub fn continuity_sweep(
    direction: &Point,
    lambda: f64,
    p_list: &[f64],
    q: f64,
    params: &LyapunovParams,
) -> Result<Vec<(f64, LyapunovEstimate)>> {
    check_sweep(p_list, q)?
        .into_iter()
        .map(|p| Ok((p, lyapunov_estimate(direction, lambda, p, q, params)?)))
        .collect()
}

/// Seeds whose cost at the largest `k` rises between consecutive sweep
/// entries by more than `tol`.
pub fn monotonicity_violations(sweep: &[(f64, LyapunovEstimate)], tol: f64) -> Vec<(FieldSeed, f64, f64)> {
    let mut out = Vec::new();
    for w in sweep.windows(2) {
        let (lo, hi) = (&w[0].1, &w[1].1);
        for (i, seed) in lo.seeds.iter().enumerate() {
            let a_lo = *lo.costs[i].last().expect("k ≥ 1");
            let a_hi = *hi.costs[i].last().expect("k ≥ 1");
            if a_hi > a_lo + tol {
                out.push((*seed, w[0].0, w[1].0));
            }
        }
    }
    out
}
