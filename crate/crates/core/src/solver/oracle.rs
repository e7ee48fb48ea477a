//! Independent reference computations: dense linear solves, path sums and
//! one-dimensional closed forms.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::Point;
use crate::percolation::Environment;

use super::SolverDomain;

/// Largest system handed to the dense solver.
pub const DENSE_MAX_SITES: usize = 2000;

/// Solves `f = 1` on `is_one`, `f = e^{−λ} P f` on the live sites reachable
/// from `starts`, `f = 0` elsewhere, by LU factorisation.
pub fn dense_solve<E, L, O>(
    env: &E,
    starts: &[Point],
    is_live: L,
    is_one: O,
    lambda: f64,
    kill_outside: bool,
) -> Result<FxHashMap<Point, f64>>
where
    E: Environment,
    L: Fn(&Point) -> bool,
    O: Fn(&Point) -> bool,
{
    let mut index: FxHashMap<Point, usize> = FxHashMap::default();
    let mut sites = Vec::new();
    let mut queue = VecDeque::new();
    for s in starts {
        if is_live(s) && !is_one(s) && !index.contains_key(s) {
            index.insert(*s, sites.len());
            sites.push(*s);
            queue.push_back(*s);
        }
    }
    while let Some(x) = queue.pop_front() {
        for axis in 0..x.dim() {
            for pos in [true, false] {
                if !env.is_open_step(&x, axis, pos) {
                    continue;
                }
                let y = x.step(axis, pos);
                if !is_one(&y) && is_live(&y) && !index.contains_key(&y) {
                    if sites.len() == DENSE_MAX_SITES {
                        return Err(Error::Resource(format!("dense solve limited to {DENSE_MAX_SITES} sites")));
                    }
                    index.insert(y, sites.len());
                    sites.push(y);
                    queue.push_back(y);
                }
            }
        }
    }

    let n = sites.len();
    let c = (-lambda).exp();
    let mut a = DMatrix::<f64>::identity(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for (i, x) in sites.iter().enumerate() {
        let mut deg = 0usize;
        let mut row: Vec<(Option<usize>, bool)> = Vec::new();
        for axis in 0..x.dim() {
            for pos in [true, false] {
                if !env.is_open_step(x, axis, pos) {
                    continue;
                }
                let y = x.step(axis, pos);
                if is_one(&y) {
                    row.push((None, true));
                    deg += 1;
                } else if let Some(&j) = index.get(&y) {
                    row.push((Some(j), false));
                    deg += 1;
                } else if kill_outside {
                    deg += 1;
                }
            }
        }
        let w = c / deg as f64;
        for (j, one) in row {
            match j {
                Some(j) => a[(i, j)] -= w,
                None if one => b[i] += w,
                None => {}
            }
        }
    }
    let f = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Resource("singular dense system".into()))?;
    Ok(sites.into_iter().zip(f.iter().copied()).collect())
}

/// Dense-solve value of the passage transform on a solver domain.
pub fn dense_passage<E: Environment>(domain: &SolverDomain<'_, E>, lambda: f64) -> Result<f64> {
    let (s, t) = (domain.source, domain.target);
    if s == t {
        return Ok(1.0);
    }
    let values = dense_solve(
        domain.env,
        &[s],
        |y| domain.contains(y),
        |y| *y == t,
        lambda,
        domain.kill_outside,
    )?;
    Ok(values.get(&s).copied().unwrap_or(0.0))
}

/// Two-sided bracket of a transform value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OracleInterval {
    pub lower: f64,
    pub upper: f64,
}

impl OracleInterval {
    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

fn cluster_size_capped<E: Environment>(env: &E, x: &Point, cap: usize) -> usize {
    let mut seen = vec![*x];
    let mut i = 0;
    while i < seen.len() && seen.len() <= cap {
        let v = seen[i];
        i += 1;
        for axis in 0..v.dim() {
            for pos in [true, false] {
                let y = v.step(axis, pos);
                if env.is_open_step(&v, axis, pos) && !seen.contains(&y) {
                    seen.push(y);
                }
            }
        }
    }
    seen.len()
}

/// Sums `e^{−λ·len}·Π π` over every walk from `source` that first hits
/// `target` after at most `max_len` steps. The remaining walks carry total
/// probability at most one and discount at most `e^{−λ·max_len}`.
pub fn brute_force_transform<E: Environment>(
    env: &E,
    source: &Point,
    target: &Point,
    lambda: f64,
    max_len: usize,
) -> Result<OracleInterval> {
    if source == target {
        return Ok(OracleInterval { lower: 1.0, upper: 1.0 });
    }
    if max_len > 20 && cluster_size_capped(env, source, 12) > 12 {
        return Err(Error::Resource(
            "path enumeration needs a cluster of at most 12 sites or max_len ≤ 20".into(),
        ));
    }
    let c = (-lambda).exp();
    let mut mass: FxHashMap<Point, f64> = FxHashMap::default();
    mass.insert(*source, 1.0);
    let mut lower = 0.0;
    let mut discount = 1.0;
    for _ in 0..max_len {
        discount *= c;
        let mut next: FxHashMap<Point, f64> = FxHashMap::default();
        for (x, m) in &mass {
            let deg = env.degree(x);
            if deg == 0 {
                continue;
            }
            let w = m / deg as f64;
            for axis in 0..x.dim() {
                for pos in [true, false] {
                    if env.is_open_step(x, axis, pos) {
                        *next.entry(x.step(axis, pos)).or_insert(0.0) += w;
                    }
                }
            }
        }
        if let Some(hit) = next.remove(target) {
            lower += discount * hit;
        }
        mass = next;
    }
    Ok(OracleInterval {
        lower,
        upper: lower + (-lambda * max_len as f64).exp(),
    })
}

/// `E^0[e^{−λH(1)}]` for the walk on `Z`: the root of `φ = e^{−λ}(1 + φ²)/2`
/// in `(0, 1)`.
pub fn d1_passage_ratio(lambda: f64) -> f64 {
    // 1 − √(1 − u) in a cancellation-free form
    let u = (-2.0 * lambda).exp();
    lambda.exp() * u / (1.0 + (1.0 - u).sqrt())
}

/// `E^x[e^{−λT}]` for the walk on `Z` leaving `[−R, R]`:
/// `cosh(xθ)/cosh((R+1)θ)` with `cosh θ = e^λ`.
pub fn d1_exit_transform(lambda: f64, radius: u64, x: i64) -> f64 {
    let theta = lambda.exp().acosh();
    (x as f64 * theta).cosh() / ((radius + 1) as f64 * theta).cosh()
}
