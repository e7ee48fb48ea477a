use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{l1_sphere, NormKind, Point};
use crate::percolation::Environment;

use super::layered::LayeredSystem;
use super::{Cost, SolverOptions};

/// How the exit ball's radius was chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ExitBallMode {
    /// Radius `⌈ℓ/α̂(ξ_1)⌉` from an estimated Lyapunov norm.
    Calibrated { alpha_xi1: f64 },
    /// Radius `ℓ`.
    Plain,
}

impl ExitBallMode {
    pub fn radius(&self, ell: u64) -> Result<u64> {
        match *self {
            ExitBallMode::Plain => Ok(ell),
            ExitBallMode::Calibrated { alpha_xi1 } => {
                if !(alpha_xi1 > 0.0 && alpha_xi1.is_finite()) {
                    return Err(Error::invalid("alpha_xi1", format!("must be positive, got {alpha_xi1}")));
                }
                Ok(((ell as f64 / alpha_xi1).ceil() as u64).max(1))
            }
        }
    }
}

/// An `ℓ1` ball outside which the exit time is reached.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExitBall {
    pub center: Point,
    pub radius: u64,
    pub mode: ExitBallMode,
}

impl ExitBall {
    /// Ball of scale `ℓ` centred at `2rℓv`, which must be a lattice point.
    pub fn around(v: &Point, ell: u64, r: f64, mode: ExitBallMode) -> Result<Self> {
        let scale = 2.0 * r * ell as f64;
        let coords = v
            .coords()
            .iter()
            .map(|&vi| {
                let c = scale * vi as f64;
                if (c - c.round()).abs() > 1e-9 {
                    Err(Error::invalid("v", format!("ball centre 2rℓv is not a lattice point for v = {v}")))
                } else {
                    Ok(c.round() as i64)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ExitBall {
            center: Point::new(&coords)?,
            radius: mode.radius(ell)?,
            mode,
        })
    }

    pub fn contains(&self, x: &Point) -> bool {
        (*x - self.center).norm(NormKind::L1) as u64 <= self.radius
    }
}

/// Lattice points of `2rℓv + [−rℓ, rℓ)^d`, in lexicographic order.
pub fn central_sub_box(v: &Point, ell: u64, r: f64) -> Vec<Point> {
    let half = r * ell as f64;
    let ranges: Vec<(i64, i64)> = v
        .coords()
        .iter()
        .map(|&vi| {
            let c = 2.0 * half * vi as f64;
            let lo = (c - half - 1e-9).ceil() as i64;
            // the interval is half-open on the right
            let hi = (c + half - 1e-9).ceil() as i64 - 1;
            (lo, hi)
        })
        .collect();
    let mut out = Vec::new();
    let mut cur: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    if ranges.iter().any(|&(lo, hi)| lo > hi) {
        return out;
    }
    loop {
        out.push(Point::new(&cur).expect("bounded coordinates"));
        let mut axis = cur.len();
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            if cur[axis] < ranges[axis].1 {
                cur[axis] += 1;
                for a in axis + 1..cur.len() {
                    cur[a] = ranges[a].0;
                }
                break;
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExitCost {
    /// `inf_x −log E^x[e^{−λT}]` over open sites of the central sub-box.
    pub cost: Cost,
    /// The sub-box site attaining the infimum.
    pub argmin: Option<Point>,
    pub ball: ExitBall,
    /// Smallest `ℓ1` distance from the sub-box to the outside of the ball.
    pub exit_distance: u64,
    pub iterations: usize,
    pub residual: f64,
    pub sources: usize,
}

/// Box-exit cost `c(v, ℓ)` for the walk on `env` leaving `ball`.
pub fn box_exit_cost<E: Environment>(
    v: &Point,
    ell: u64,
    lambda: f64,
    env: &E,
    ball: &ExitBall,
    r: f64,
    opts: &SolverOptions,
) -> Result<ExitCost> {
    opts.validate(lambda)?;
    if ell == 0 {
        return Err(Error::invalid("ell", "must be at least 1"));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid("r", format!("must be positive, got {r}")));
    }
    let sub = central_sub_box(v, ell, r);
    if sub.is_empty() {
        return Err(Error::invalid("r", "central sub-box contains no lattice point"));
    }
    if let Some(x) = sub.iter().find(|x| !ball.contains(x)) {
        return Err(Error::invalid("ball", format!("sub-box site {x} lies outside the exit ball")));
    }
    let exit_distance = sub
        .iter()
        .map(|x| ball.radius + 1 - (*x - ball.center).norm(NormKind::L1) as u64)
        .min()
        .expect("nonempty");
    let sources: Vec<Point> = sub.into_iter().filter(|x| env.in_open_set(x)).collect();
    let mut out = ExitCost {
        cost: Cost::Infinite,
        argmin: None,
        ball: *ball,
        exit_distance,
        iterations: 0,
        residual: 0.0,
        sources: sources.len(),
    };
    if sources.is_empty() {
        return Ok(out);
    }

    let seeds = l1_sphere(&ball.center, ball.radius + 1);
    let mut sys = LayeredSystem::new(env, &seeds, |y: &Point| ball.contains(y), true, lambda, opts.max_sites);
    let log_tol = opts.tol.ln();
    let mut n = 0usize;
    loop {
        n += 1;
        if n > opts.max_iterations {
            return Err(Error::NotConverged(opts.max_iterations));
        }
        sys.sweep(n)?;
        let best = sources
            .iter()
            .filter_map(|x| sys.lookup(x).map(|i| (sys.log_value(i), *x)))
            .filter(|(lf, _)| lf.is_finite())
            .max_by(|a, b| a.0.total_cmp(&b.0).then_with(|| b.1.cmp(&a.1)));
        let Some((log_f, x)) = best else {
            if sys.exhausted() {
                out.iterations = n;
                return Ok(out);
            }
            continue;
        };
        let log_rel = sys.log_tail(n) - log_f;
        if log_rel <= log_tol {
            out.cost = Cost::Finite((-log_f).max(0.0));
            out.argmin = Some(x);
            out.iterations = n;
            out.residual = log_rel.exp();
            return Ok(out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::percolation::{EdgeSet, FieldSeed, FullLattice, OpenConfig};
    use crate::solver::oracle::{d1_exit_transform, dense_solve};

    fn pt(c: &[i64]) -> Point {
        Point::new(c).unwrap()
    }

    #[test]
    fn sub_box_shapes() {
        let o = pt(&[0, 0]);
        assert_eq!(central_sub_box(&o, 4, 0.125), vec![o]);
        assert_eq!(central_sub_box(&o, 8, 0.125).len(), 4);
        let s = central_sub_box(&o, 16, 0.125);
        assert_eq!(s.len(), 16);
        assert_eq!(s[0], pt(&[-2, -2]));
        assert_eq!(*s.last().unwrap(), pt(&[1, 1]));
        assert_eq!(central_sub_box(&pt(&[1, 0]), 8, 0.125)[0], pt(&[1, -1]));
    }

    #[test]
    fn one_dimensional_exit_matches_cosh_ratio() {
        let opts = SolverOptions::default();
        for &ell in &[1u64, 3, 6] {
            for &lambda in &[0.3, 1.0, 2.5] {
                let ball = ExitBall::around(&pt(&[0]), ell, 0.125, ExitBallMode::Plain).unwrap();
                let c = box_exit_cost(&pt(&[0]), ell, lambda, &FullLattice, &ball, 0.125, &opts).unwrap();
                let exact = d1_exit_transform(lambda, ell, 0);
                let got = (-c.cost.finite().unwrap()).exp();
                assert!((got - exact).abs() <= 1e-10 * exact, "ℓ={ell} λ={lambda}");
                let r = ell as i64;
                let dense = dense_solve(
                    &FullLattice,
                    &[pt(&[0])],
                    |y| y.coord(0).abs() <= r,
                    |y| y.coord(0).abs() == r + 1,
                    lambda,
                    true,
                )
                .unwrap();
                assert!((dense[&pt(&[0])] - exact).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn trapped_cluster_is_infinite() {
        let mut env = EdgeSet::new();
        env.open_path(&[pt(&[-1, 0]), pt(&[1, 0])]);
        let ball = ExitBall::around(&pt(&[0, 0]), 4, 0.125, ExitBallMode::Plain).unwrap();
        let c = box_exit_cost(&pt(&[0, 0]), 4, 1.0, &env, &ball, 0.125, &SolverOptions::default()).unwrap();
        assert_eq!(c.cost, Cost::Infinite);
        let empty = box_exit_cost(&pt(&[0, 0]), 4, 1.0, &EdgeSet::new(), &ball, 0.125, &SolverOptions::default()).unwrap();
        assert_eq!(empty.cost, Cost::Infinite);
        assert_eq!(empty.sources, 0);
    }

    #[test]
    fn exit_cost_exceeds_lambda_times_distance() {
        let opts = SolverOptions::default();
        for seed in 0..20 {
            let env = OpenConfig::new(FieldSeed(seed), 0.8);
            for &ell in &[4u64, 8] {
                let ball = ExitBall::around(&pt(&[0, 0]), ell, 0.125, ExitBallMode::Plain).unwrap();
                let c = box_exit_cost(&pt(&[0, 0]), ell, 1.0, &env, &ball, 0.125, &opts).unwrap();
                assert!(c.cost.as_f64() >= c.exit_distance as f64 - 1e-9);
            }
        }
    }

    #[test]
    fn calibrated_radius() {
        let m = ExitBallMode::Calibrated { alpha_xi1: 1.5 };
        assert_eq!(m.radius(16).unwrap(), 11);
        assert!(ExitBallMode::Calibrated { alpha_xi1: 0.0 }.radius(4).is_err());
        assert!(ExitBall::around(&pt(&[1, 0]), 2, 0.125, ExitBallMode::Plain).is_err());
    }
}
