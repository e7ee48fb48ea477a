//! Travel costs `a_λ = −log E[e^{−λH}]` and box-exit costs, computed by
//! fixed-point iteration of the killed equations on finite domains.

mod exit;
mod layered;
mod oracle;

use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lattice::{LatticeBox, NormKind, Point};
use crate::percolation::{build_clusters_with_budget, cube_for, ClusterIndex, Environment, FieldSeed, OpenConfig};

pub use exit::{box_exit_cost, central_sub_box, ExitBall, ExitBallMode, ExitCost};
pub use oracle::{brute_force_transform, d1_exit_transform, d1_passage_ratio, dense_passage, dense_solve, OracleInterval};

use layered::LayeredSystem;

/// A nonnegative cost that may be infinite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cost {
    Finite(f64),
    Infinite,
}

impl Cost {
    pub fn finite(self) -> Option<f64> {
        match self {
            Cost::Finite(a) => Some(a),
            Cost::Infinite => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Cost::Finite(_))
    }

    /// Finite value or `+∞` as a float, for arithmetic in checks.
    pub fn as_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cost::Finite(a) => write!(f, "{a:.16e}"),
            Cost::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Cost {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Cost::Finite(a) => s.serialize_f64(*a),
            Cost::Infinite => s.serialize_str("inf"),
        }
    }
}

/// One row of the walk's transition kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionRow {
    pub vertex: Point,
    pub open_neighbors: Vec<Point>,
    pub weight: f64,
}

/// Transition row at `x`, or `None` when `x` has no open edge.
pub fn transition_row<E: Environment>(env: &E, x: &Point) -> Option<TransitionRow> {
    let open_neighbors: Vec<Point> = (0..x.dim())
        .flat_map(|a| [(a, true), (a, false)])
        .filter(|&(a, s)| env.is_open_step(x, a, s))
        .map(|(a, s)| x.step(a, s))
        .collect();
    if open_neighbors.is_empty() {
        return None;
    }
    let weight = 1.0 / open_neighbors.len() as f64;
    Some(TransitionRow {
        vertex: *x,
        open_neighbors,
        weight,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SolverOptions {
    /// Relative accuracy of the fixed-point iteration at the source.
    pub tol: f64,
    /// Truncation multiplier; `None` picks `max(4(λ + log 2d)/λ, 3)`.
    pub rho: Option<f64>,
    /// Sites added to the truncation radius beyond `ρ·‖x − y‖_1`.
    pub pad: u64,
    /// Fixed truncation radius, overriding `rho` and `pad`.
    pub radius: Option<u64>,
    pub max_iterations: usize,
    pub max_sites: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            rho: None,
            pad: 8,
            radius: None,
            max_iterations: 2_000_000,
            max_sites: 1 << 24,
        }
    }
}

pub fn default_rho(lambda: f64, dim: usize) -> f64 {
    (4.0 * (lambda + (2.0 * dim as f64).ln()) / lambda).max(3.0)
}

impl SolverOptions {
    pub fn truncation_radius(&self, lambda: f64, dim: usize, distance: u64) -> u64 {
        if let Some(r) = self.radius {
            return r.max(distance);
        }
        let rho = self.rho.unwrap_or_else(|| default_rho(lambda, dim));
        (rho * distance as f64).ceil() as u64 + self.pad
    }

    fn validate(&self, lambda: f64) -> Result<()> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid("lambda", format!("must be positive and finite, got {lambda}")));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::invalid("tol", format!("must lie in (0, 1), got {}", self.tol)));
        }
        if let Some(rho) = self.rho {
            if !(rho >= 1.0 && rho.is_finite()) {
                return Err(Error::invalid("rho", format!("must be at least 1, got {rho}")));
            }
        }
        Ok(())
    }
}

/// A passage problem: the walk starts at `source`, is stopped at `target`,
/// and is killed on leaving the `ℓ1` ball of `truncation_radius` around the
/// source (and the bounding box, if any).
#[derive(Clone, Debug)]
pub struct SolverDomain<'a, E> {
    pub env: &'a E,
    pub source: Point,
    pub target: Point,
    pub truncation_radius: u64,
    /// With `false` the walk is reflected instead: edges leaving the domain
    /// are dropped from the degree.
    pub kill_outside: bool,
    pub bounding_box: Option<LatticeBox>,
}

impl<'a, E: Environment> SolverDomain<'a, E> {
    pub fn new(env: &'a E, source: Point, target: Point, truncation_radius: u64) -> Self {
        SolverDomain {
            env,
            source,
            target,
            truncation_radius,
            kill_outside: true,
            bounding_box: None,
        }
    }

    pub fn within(mut self, bx: LatticeBox) -> Self {
        self.bounding_box = Some(bx);
        self
    }

    fn contains(&self, y: &Point) -> bool {
        (*y - self.source).norm(NormKind::L1) as u64 <= self.truncation_radius
            && self.bounding_box.is_none_or(|b| b.contains(y))
    }

    /// `ℓ1` distance from `x` to the nearest site outside the domain.
    fn distance_to_exterior(&self, x: &Point) -> i64 {
        let ball = self.truncation_radius as i64 + 1 - (*x - self.source).norm(NormKind::L1);
        match &self.bounding_box {
            Some(b) => ball.min(b.l1_distance_to_exterior(x)),
            None => ball,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CostResult {
    pub e_value: f64,
    pub a_value: Cost,
    /// `ln e_value`, finite even where `e_value` underflows.
    pub log_e: f64,
    /// Bound on the mass of walks discarded by the truncation.
    pub truncation_error_bound: f64,
    pub log_truncation_bound: f64,
    pub iterations: usize,
    /// Certified relative gap between `e_value` and the truncated solution.
    pub residual: f64,
    pub domain_sites: usize,
}

impl CostResult {
    fn exact_one() -> Self {
        CostResult {
            e_value: 1.0,
            a_value: Cost::Finite(0.0),
            log_e: 0.0,
            truncation_error_bound: 0.0,
            log_truncation_bound: f64::NEG_INFINITY,
            iterations: 0,
            residual: 0.0,
            domain_sites: 1,
        }
    }

    fn zero(log_truncation_bound: f64, iterations: usize, domain_sites: usize) -> Self {
        CostResult {
            e_value: 0.0,
            a_value: Cost::Infinite,
            log_e: f64::NEG_INFINITY,
            truncation_error_bound: log_truncation_bound.exp(),
            log_truncation_bound,
            iterations,
            residual: 0.0,
            domain_sites,
        }
    }

    /// Largest amount by which `a_value` may exceed the cost on the
    /// untruncated configuration: `ln(1 + residual + bound/e)`.
    pub fn a_slack(&self) -> f64 {
        match self.a_value {
            Cost::Infinite => f64::INFINITY,
            Cost::Finite(a) => {
                let t = self.log_truncation_bound + a;
                if t > 30.0 {
                    t + (1.0 + self.residual).ln()
                } else {
                    (self.residual + t.exp()).ln_1p()
                }
            }
        }
    }

    /// `a_value − a_slack()`, a lower bound on the untruncated cost.
    pub fn a_lower(&self) -> f64 {
        match self.a_value {
            Cost::Infinite => f64::INFINITY,
            Cost::Finite(a) => (a - self.a_slack()).max(0.0),
        }
    }
}

/// `E^source[e^{−λH(target)}]` on the domain, iterating until the relative
/// tail bound at the source drops below `tol`.
pub fn passage_transform<E: Environment>(domain: &SolverDomain<'_, E>, lambda: f64, opts: &SolverOptions) -> Result<CostResult> {
    opts.validate(lambda)?;
    let (s, t) = (domain.source, domain.target);
    if s.dim() != t.dim() {
        return Err(Error::invalid("target", "dimension differs from the source"));
    }
    if s == t {
        return Ok(CostResult::exact_one());
    }
    if !domain.env.in_open_set(&s) {
        return Err(Error::DisconnectedSource(s));
    }
    let dist = (s - t).norm(NormKind::L1) as u64;
    if dist > domain.truncation_radius || !domain.contains(&s) || !domain.contains(&t) {
        return Err(Error::invalid(
            "truncation_radius",
            format!("source {s} and target {t} must both lie in the domain"),
        ));
    }
    let log_bound = {
        let gap = domain.distance_to_exterior(&s) + domain.distance_to_exterior(&t);
        let gap = if domain.kill_outside { gap } else { gap - 2 };
        -lambda * gap.max(0) as f64
    };

    let live = |y: &Point| *y != t && domain.contains(y);
    let mut sys = LayeredSystem::new(domain.env, &[t], live, domain.kill_outside, lambda, opts.max_sites);
    let log_tol = opts.tol.ln();
    let mut n = 0usize;
    loop {
        n += 1;
        if n > opts.max_iterations {
            return Err(Error::NotConverged(opts.max_iterations));
        }
        sys.sweep(n)?;
        let Some(si) = sys.lookup(&s) else {
            if sys.exhausted() {
                return Ok(CostResult::zero(log_bound, n, sys.len()));
            }
            continue;
        };
        let ls = sys.layer_of(si);
        if n == ls {
            sys.set_horizon(s, last_sweep_bound(lambda, s.dim(), ls, opts.tol));
        }
        if n < ls || (n - ls) % 2 != 0 {
            continue;
        }
        let log_f = sys.log_value(si);
        let log_rel = sys.log_tail_same_parity(n) - log_f;
        if log_rel > log_tol && n >= last_sweep_bound(lambda, s.dim(), ls, opts.tol) {
            return Err(Error::NotConverged(n));
        }
        if log_rel <= log_tol {
            return Ok(CostResult {
                e_value: log_f.exp(),
                a_value: Cost::Finite((-log_f).max(0.0)),
                log_e: log_f,
                truncation_error_bound: log_bound.exp(),
                log_truncation_bound: log_bound,
                iterations: n,
                residual: log_rel.exp(),
                domain_sites: sys.len(),
            });
        }
    }
}

/// A sweep by which the stopping rule must have fired once the source sits
/// in layer `ls`: the geodesic alone gives `f ≥ ((2d)e^λ)^{−ls}`.
fn last_sweep_bound(lambda: f64, dim: usize, ls: usize, tol: f64) -> usize {
    let log_f_min = -(lambda + (2.0 * dim as f64).ln()) * ls as f64;
    let log_tail0 = -(-(-2.0 * lambda).exp()).ln_1p();
    let n = (log_tail0 - log_f_min - tol.ln()) / lambda - 2.0;
    n.ceil().max(ls as f64) as usize + 3
}

/// `a_λ(x, y)` on the open subgraph of the cluster box, truncated to an
/// `ℓ1` ball around `x` of radius `ρ̂·‖x − y‖_1 + pad`.
pub fn travel_cost<E: Environment>(clusters: &ClusterIndex<E>, x: &Point, y: &Point, lambda: f64, opts: &SolverOptions) -> Result<CostResult> {
    opts.validate(lambda)?;
    clusters.check_interior(x)?;
    clusters.check_interior(y)?;
    let env = clusters.environment();
    if !env.in_open_set(x) {
        return Err(Error::DisconnectedSource(*x));
    }
    let dist = (*x - *y).norm(NormKind::L1) as u64;
    let radius = opts.truncation_radius(lambda, x.dim(), dist);
    let domain = SolverDomain::new(env, *x, *y, radius).within(*clusters.bounding_box());
    if x != y && !clusters.same_cluster(x, y) {
        let log_bound = -lambda * (domain.distance_to_exterior(x) + domain.distance_to_exterior(y)) as f64;
        return Ok(CostResult::zero(log_bound, 0, 0));
    }
    passage_transform(&domain, lambda, opts)
}

/// `a_λ([x]_q, [y]_q)` in `ω_p`, with anchors taken from the giant cluster of
/// `anchors` (built for `ω_q`). The solve itself is not confined to that box.
pub fn modified_travel_cost_in<E: Environment>(
    anchors: &ClusterIndex<OpenConfig>,
    env_p: &E,
    x: &Point,
    y: &Point,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<CostResult> {
    let ax = anchors.anchor(x)?;
    let ay = anchors.anchor(y)?;
    anchored_cost(env_p, &ax, &ay, lambda, opts)
}

/// Passage cost between two given sites on an unbounded configuration.
pub fn anchored_cost<E: Environment>(env: &E, x: &Point, y: &Point, lambda: f64, opts: &SolverOptions) -> Result<CostResult> {
    opts.validate(lambda)?;
    let dist = (*x - *y).norm(NormKind::L1) as u64;
    let radius = opts.truncation_radius(lambda, x.dim(), dist);
    passage_transform(&SolverDomain::new(env, *x, *y, radius), lambda, opts)
}

/// Pad used around the anchored points when building the `ω_q` box.
pub const ANCHOR_PAD: u64 = 12;

pub fn check_parameters(p: f64, q: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("p", format!("must lie in [0, 1], got {p}")));
    }
    if !(q > 0.0 && q <= p) {
        return Err(Error::invalid("q", format!("must satisfy 0 < q ≤ p, got q = {q}, p = {p}")));
    }
    Ok(())
}

/// `a_λ^q(x, y, ω_p)` for the field `field`.
pub fn modified_travel_cost(
    x: &Point,
    y: &Point,
    lambda: f64,
    p: f64,
    q: f64,
    field: FieldSeed,
    opts: &SolverOptions,
) -> Result<CostResult> {
    check_parameters(p, q)?;
    let bx = cube_for(&[*x, *y], ANCHOR_PAD)?;
    let anchors = build_clusters_with_budget(bx, OpenConfig::new(field, q), opts.max_sites as u64)?;
    modified_travel_cost_in(&anchors, &OpenConfig::new(field, p), x, y, lambda, opts)
}
