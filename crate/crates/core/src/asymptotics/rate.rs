use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::check_parameters;
use crate::stats::Estimate;

use super::{alpha_at, LyapunovParams, RationalPoint};

/// Geometric `λ`-grid followed by golden-section refinement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LambdaGrid {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub points: usize,
    pub refine_rounds: usize,
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid {
            lambda_min: 0.05,
            lambda_max: 8.0,
            points: 16,
            refine_rounds: 3,
        }
    }
}

impl LambdaGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_min > 0.0 && self.lambda_max > self.lambda_min && self.lambda_max.is_finite()) {
            return Err(Error::invalid("lambda_grid", "need 0 < lambda_min < lambda_max < ∞"));
        }
        if self.points < 8 {
            return Err(Error::invalid("lambda_grid.points", "need at least 8 grid points"));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let ratio = (self.lambda_max / self.lambda_min).powf(1.0 / (self.points - 1) as f64);
        let mut v: Vec<f64> = (0..self.points)
            .map(|i| self.lambda_min * ratio.powi(i as i32))
            .collect();
        v[self.points - 1] = self.lambda_max;
        v
    }
}

/// Tabulated `λ ↦ α̂_λ(x)` and the quantities read off it.
#[derive(Clone, Debug, Serialize)]
pub struct RateCurve {
    pub x: RationalPoint,
    pub p: f64,
    pub q: f64,
    /// Increasing; includes the refinement points.
    pub lambda_grid: Vec<f64>,
    pub alpha_values: Vec<f64>,
    pub alpha_stderr: Vec<f64>,
    /// `max(0, max_i α̂_i − λ_i)`; the `0` is the exact value at `λ = 0`.
    pub i_hat: f64,
    pub i_hat_stderr: f64,
    pub lambda_at_max: f64,
    pub lambda_minus_hat: f64,
    pub lambda_plus_hat: f64,
    /// Points added by the golden-section search.
    pub refined: Vec<f64>,
    pub domain_boundary: bool,
}

impl RateCurve {
    /// Builds the curve from `(λ, α̂_λ)` pairs in any order.
    pub fn from_points(x: RationalPoint, p: f64, q: f64, mut pts: Vec<(f64, Estimate)>, refined: Vec<f64>) -> Self {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.dedup_by(|a, b| a.0 == b.0);
        let mut curve = RateCurve {
            x,
            p,
            q,
            lambda_grid: pts.iter().map(|(l, _)| *l).collect(),
            alpha_values: pts.iter().map(|(_, e)| e.mean).collect(),
            alpha_stderr: pts.iter().map(|(_, e)| e.stderr).collect(),
            i_hat: 0.0,
            i_hat_stderr: 0.0,
            lambda_at_max: 0.0,
            lambda_minus_hat: 0.0,
            lambda_plus_hat: 0.0,
            refined,
            domain_boundary: false,
        };
        for (i, (l, e)) in pts.iter().enumerate() {
            let h = e.mean - l;
            if h > curve.i_hat {
                curve.i_hat = h;
                curve.i_hat_stderr = e.stderr;
                curve.lambda_at_max = *l;
                let _ = i;
            }
        }
        match plus_minus(&curve) {
            Some((lm, lp)) => {
                curve.lambda_minus_hat = lm;
                curve.lambda_plus_hat = lp;
            }
            None => {
                curve.domain_boundary = true;
                let last = curve.lambda_grid.last().copied().unwrap_or(0.0);
                curve.lambda_minus_hat = last;
                curve.lambda_plus_hat = last;
            }
        }
        curve
    }

    /// Left secant slopes, the first one from the exact point `(0, 0)`.
    pub fn slopes(&self) -> Vec<f64> {
        let mut prev = (0.0, 0.0);
        self.lambda_grid
            .iter()
            .zip(&self.alpha_values)
            .map(|(&l, &a)| {
                let s = (a - prev.1) / (l - prev.0);
                prev = (l, a);
                s
            })
            .collect()
    }

    /// `α̂ − λ` at the grid point nearest `lambda`.
    pub fn h_at(&self, lambda: f64) -> f64 {
        if lambda == 0.0 {
            return 0.0;
        }
        let i = self
            .lambda_grid
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - lambda).abs().total_cmp(&(b.1 - lambda).abs()))
            .map(|(i, _)| i)
            .expect("nonempty grid");
        self.alpha_values[i] - self.lambda_grid[i]
    }

    pub fn stderr_at(&self, lambda: f64) -> f64 {
        self.lambda_grid
            .iter()
            .position(|&l| l == lambda)
            .map(|i| self.alpha_stderr[i])
            .unwrap_or(0.0)
    }
}

fn plus_minus(curve: &RateCurve) -> Option<(f64, f64)> {
    let s = curve.slopes();
    let left = |i: usize| if i == 0 { 0.0 } else { curve.lambda_grid[i - 1] };
    let first_flat = s.iter().position(|&v| v <= 1.0)?;
    let minus = left(first_flat);
    let plus = s
        .iter()
        .rposition(|&v| v >= 1.0)
        .map(|i| curve.lambda_grid[i])
        .unwrap_or(0.0);
    Some((minus, plus))
}

/// `(λ̂_−, λ̂_+)`: the left end of the first secant interval whose slope is
/// at most one, and the right end of the last one whose slope is at least one.
pub fn lambda_plus_minus(curve: &RateCurve) -> Result<(f64, f64)> {
    if curve.lambda_grid.len() < 8 {
        return Err(Error::invalid("lambda_grid", "need at least 8 grid points"));
    }
    plus_minus(curve).ok_or_else(|| Error::DomainBoundary(Box::new(curve.clone())))
}

/// `Î(x) = sup_λ (α̂_λ(x) − λ)` over a geometric grid refined by golden-section
/// search around the discrete maximiser.
pub fn rate_function(x: &RationalPoint, p: f64, q: f64, grid: &LambdaGrid, params: &LyapunovParams) -> Result<RateCurve> {
    grid.validate()?;
    check_parameters(p, q)?;
    let eval = |l: f64| alpha_at(x, l, p, q, params).map(|e| (l, e));
    let mut pts = grid.values().into_iter().map(eval).collect::<Result<Vec<_>>>()?;

    let h = |pt: &(f64, Estimate)| pt.1.mean - pt.0;
    let n = pts.len();
    let i_star = (0..n)
        .max_by(|&a, &b| h(&pts[a]).total_cmp(&h(&pts[b])).then(b.cmp(&a)))
        .expect("nonempty grid");
    let last_slope = (pts[n - 1].1.mean - pts[n - 2].1.mean) / (pts[n - 1].0 - pts[n - 2].0);
    if i_star == n - 1 || last_slope > 1.0 {
        let curve = RateCurve::from_points(*x, p, q, pts, Vec::new());
        return Err(Error::DomainBoundary(Box::new(curve)));
    }

    let mut refined = Vec::new();
    if !x.is_origin() && grid.refine_rounds > 0 {
        let ratio = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (pts[i_star.saturating_sub(1)].0, pts[i_star + 1].0);
        let mut c = b - ratio * (b - a);
        let mut d = a + ratio * (b - a);
        let mut fc = eval(c)?;
        let mut fd = eval(d)?;
        refined.extend([c, d]);
        pts.extend([fc, fd]);
        for _ in 1..grid.refine_rounds {
            if h(&fc) >= h(&fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - ratio * (b - a);
                fc = eval(c)?;
                refined.push(c);
                pts.push(fc);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + ratio * (b - a);
                fd = eval(d)?;
                refined.push(d);
                pts.push(fd);
            }
        }
    }
    Ok(RateCurve::from_points(*x, p, q, pts, refined))
}

#[derive(Clone, Debug, Serialize)]
pub struct RateSweepRow {
    pub p: f64,
    pub i_hat: f64,
    pub i_hat_stderr: f64,
    pub lambda_minus_hat: f64,
    pub lambda_plus_hat: f64,
    pub domain_boundary: bool,
    pub curve: RateCurve,
}

/// Rate function at each `p` with shared seeds, in increasing `p`. A domain
/// boundary is reported as a flagged row.
pub fn rate_continuity_sweep(
    x: &RationalPoint,
    p_list: &[f64],
    q: f64,
    grid: &LambdaGrid,
    params: &LyapunovParams,
) -> Result<Vec<RateSweepRow>> {
    super::check_sweep(p_list, q)?
        .into_iter()
        .map(|p| {
            let curve = match rate_function(x, p, q, grid, params) {
                Ok(c) => c,
                Err(Error::DomainBoundary(c)) => *c,
                Err(e) => return Err(e),
            };
            Ok(RateSweepRow {
                p,
                i_hat: curve.i_hat,
                i_hat_stderr: curve.i_hat_stderr,
                lambda_minus_hat: curve.lambda_minus_hat,
                lambda_plus_hat: curve.lambda_plus_hat,
                domain_boundary: curve.domain_boundary,
                curve,
            })
        })
        .collect()
}
