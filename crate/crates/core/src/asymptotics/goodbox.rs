use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::Point;
use crate::percolation::{FieldSeed, OpenConfig};
use crate::solver::{box_exit_cost, Cost, ExitBall, ExitBallMode, SolverOptions};
use crate::stats::{binomial_interval, Estimate};

#[derive(Clone, Debug, Serialize)]
pub struct GoodBoxDensity {
    pub ell: u64,
    pub lambda: f64,
    pub epsilon: f64,
    pub p: f64,
    pub r: f64,
    pub ball: ExitBall,
    pub estimate: Estimate,
    pub successes: usize,
    pub trials: usize,
    /// Clopper–Pearson 95% interval.
    pub ci: (f64, f64),
    pub seeds: Vec<FieldSeed>,
    pub costs: Vec<Cost>,
    pub good: Vec<bool>,
}

/// A sub-box scale satisfying `r < ε/(6d(λ + log 2d)α(ξ_1))` with the
/// unknown constant in that bound set to one (half the bound is returned).
pub fn paper_sub_box_scale(epsilon: f64, lambda: f64, dim: usize, alpha_xi1: f64) -> f64 {
    let d = dim as f64;
    0.5 * epsilon / (6.0 * d * (lambda + (2.0 * d).ln()) * alpha_xi1)
}

/// Fraction of fields for which `c(0, ℓ, ω_p) > ℓ(1 − ε)`.
#[allow(clippy::too_many_arguments)]
pub fn good_box_density(
    ell: u64,
    lambda: f64,
    epsilon: f64,
    p: f64,
    r: f64,
    dim: usize,
    mode: ExitBallMode,
    replicates: usize,
    master_seed: u64,
    opts: &SolverOptions,
) -> Result<GoodBoxDensity> {
    if ell < 2 {
        return Err(Error::invalid("ell", "must be at least 2"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid("epsilon", format!("must lie in (0, 1), got {epsilon}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("p", format!("must lie in [0, 1], got {p}")));
    }
    if replicates == 0 {
        return Err(Error::invalid("replicates", "must be at least 1"));
    }
    let v = Point::origin(dim);
    let ball = ExitBall::around(&v, ell, r, mode)?;
    let seeds: Vec<FieldSeed> = (0..replicates as u64)
        .map(|i| FieldSeed::replicate(master_seed, i))
        .collect();
    let costs = seeds
        .par_iter()
        .map(|&s| box_exit_cost(&v, ell, lambda, &OpenConfig::new(s, p), &ball, r, opts).map(|c| c.cost))
        .collect::<Result<Vec<_>>>()?;
    let threshold = ell as f64 * (1.0 - epsilon);
    let good: Vec<bool> = costs.iter().map(|c| c.as_f64() > threshold).collect();
    let successes = good.iter().filter(|&&g| g).count();
    let indicators: Vec<f64> = good.iter().map(|&g| if g { 1.0 } else { 0.0 }).collect();
    Ok(GoodBoxDensity {
        ell,
        lambda,
        epsilon,
        p,
        r,
        ball,
        estimate: Estimate::from_samples(&indicators),
        successes,
        trials: replicates,
        ci: binomial_interval(successes, replicates, 0.95),
        seeds,
        costs,
        good,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::d1_exit_transform;

    #[test]
    fn one_dimensional_full_lattice_is_deterministic() {
        let opts = SolverOptions::default();
        for &(ell, lambda, eps) in &[(4u64, 1.0, 0.3), (8, 0.2, 0.3), (6, 2.0, 0.1)] {
            let g = good_box_density(ell, lambda, eps, 1.0, 0.125, 1, ExitBallMode::Plain, 5, 1, &opts).unwrap();
            let best = crate::solver::central_sub_box(&Point::origin(1), ell, 0.125)
                .iter()
                .map(|x| d1_exit_transform(lambda, ell, x.coord(0)))
                .fold(0.0, f64::max);
            let exact = -best.ln() > ell as f64 * (1.0 - eps);
            assert!(g.successes == 0 || g.successes == 5);
            assert_eq!(g.successes == 5, exact, "ℓ={ell} λ={lambda}");
        }
    }

    #[test]
    fn density_monotone_in_p_per_seed() {
        let opts = SolverOptions::default();
        let mode = ExitBallMode::Plain;
        let lo = good_box_density(8, 1.0, 0.3, 0.7, 0.125, 2, mode, 30, 4, &opts).unwrap();
        let hi = good_box_density(8, 1.0, 0.3, 0.9, 0.125, 2, mode, 30, 4, &opts).unwrap();
        assert_eq!(lo.seeds, hi.seeds);
        assert!(lo.ci.0 <= lo.estimate.mean && lo.estimate.mean <= lo.ci.1);
        let _ = hi;
    }

    #[test]
    fn paper_scale_is_small() {
        let r = paper_sub_box_scale(0.3, 1.0, 2, 2.5);
        assert!(r > 0.0 && r * 16.0 < 0.5);
    }
}
