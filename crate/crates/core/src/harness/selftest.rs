//! Oracle-equivalence checks run by the `selftest` experiment.

use serde::Serialize;

use crate::error::Result;
use crate::lattice::{LatticeBox, Point};
use crate::percolation::{build_clusters, FieldSeed, FullLattice, OpenConfig};
use crate::solver::{
    box_exit_cost, brute_force_transform, d1_exit_transform, d1_passage_ratio, dense_passage, passage_transform,
    ExitBall, ExitBallMode, SolverDomain, SolverOptions,
};

/// Path length of the enumeration oracle.
pub const BRUTE_FORCE_MAX_LEN: usize = 40;
/// Agreement required between the iterative and dense solves.
pub const DENSE_AGREEMENT: f64 = 1e-10;
/// Relative agreement required against closed forms.
pub const CLOSED_FORM_AGREEMENT: f64 = 1e-8;

const CASE_BOX: u64 = 10;
const CASE_RADIUS: u64 = 40;
const MAX_CASE_SITES: usize = 12;
const CASE_LAMBDAS: [f64; 4] = [0.25, 0.5, 1.0, 2.0];

/// A passage problem on a small finite cluster of `Z^2`.
#[derive(Clone, Debug, Serialize)]
pub struct OracleCase {
    pub seed: FieldSeed,
    pub p: f64,
    pub lambda: f64,
    pub source: Point,
    pub target: Point,
    pub cluster_size: usize,
}

fn unit(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// The first `count` seeds under `master` whose origin cluster has between 2
/// and 12 sites, with `p` spread over `[0.25, 0.55)`.
pub fn oracle_cases(count: usize, master: u64) -> Result<Vec<OracleCase>> {
    let mut out = Vec::with_capacity(count);
    let origin = Point::origin(2);
    let mut i = 0u64;
    while out.len() < count {
        let seed = FieldSeed::replicate(master, i);
        i += 1;
        let h = FieldSeed::replicate(seed.0, 0).0;
        let p = 0.25 + 0.3 * unit(h);
        let clusters = build_clusters(LatticeBox::cube(2, CASE_BOX)?, OpenConfig::new(seed, p))?;
        let Some(id) = clusters.cluster_of(&origin) else {
            continue;
        };
        let members = clusters.members(id);
        let inside = members.iter().all(|m| m.coords().iter().all(|c| c.unsigned_abs() < CASE_BOX));
        if members.len() < 2 || members.len() > MAX_CASE_SITES || !inside {
            continue;
        }
        let others: Vec<Point> = members.into_iter().filter(|m| !m.is_origin()).collect();
        let target = others[(h % others.len() as u64) as usize];
        out.push(OracleCase {
            seed,
            p,
            lambda: CASE_LAMBDAS[((h >> 8) % 4) as usize],
            source: origin,
            target,
            cluster_size: others.len() + 1,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct SelfTestRow {
    pub check: &'static str,
    pub case: usize,
    pub lambda: f64,
    pub value: f64,
    pub reference_low: f64,
    pub reference_high: f64,
    /// Distance from `value` to the reference interval.
    pub error: f64,
    pub allowed: f64,
    pub passed: bool,
}

fn row(check: &'static str, case: usize, lambda: f64, value: f64, lo: f64, hi: f64, allowed: f64) -> SelfTestRow {
    let error = if value < lo { lo - value } else if value > hi { value - hi } else { 0.0 };
    SelfTestRow {
        check,
        case,
        lambda,
        value,
        reference_low: lo,
        reference_high: hi,
        error,
        allowed,
        passed: error <= allowed,
    }
}

/// Iterative solve against the dense solve and the path-enumeration bracket.
pub fn check_case(index: usize, case: &OracleCase, opts: &SolverOptions) -> Result<[SelfTestRow; 2]> {
    let env = OpenConfig::new(case.seed, case.p);
    let domain = SolverDomain::new(&env, case.source, case.target, CASE_RADIUS);
    let it = passage_transform(&domain, case.lambda, opts)?;
    let dense = dense_passage(&domain, case.lambda)?;
    let bf = brute_force_transform(&env, &case.source, &case.target, case.lambda, BRUTE_FORCE_MAX_LEN)?;
    // the iteration approaches from below with a certified relative residual
    let slack = it.residual * it.e_value + 1e-15 * it.e_value.max(f64::MIN_POSITIVE);
    Ok([
        row("dense", index, case.lambda, it.e_value, dense, dense, DENSE_AGREEMENT),
        row("paths", index, case.lambda, it.e_value, bf.lower, bf.upper, slack),
    ])
}

/// `e_λ(0, n) = φ(λ)^n` on `Z` for `n ≤ 10`.
pub fn closed_form_rows(opts: &SolverOptions) -> Result<Vec<SelfTestRow>> {
    let mut rows = Vec::new();
    for &lambda in &[0.5, 1.0, 2.0] {
        let phi = d1_passage_ratio(lambda);
        for n in 1..=10i64 {
            let target = Point::new(&[n])?;
            let radius = opts.truncation_radius(lambda, 1, n as u64);
            let domain = SolverDomain::new(&FullLattice, Point::origin(1), target, radius);
            let r = passage_transform(&domain, lambda, opts)?;
            let exact = phi.powi(n as i32);
            let rel = r.e_value / exact;
            rows.push(row("d1-passage", n as usize, lambda, rel, 1.0, 1.0, CLOSED_FORM_AGREEMENT));
        }
    }
    Ok(rows)
}

/// Exit transform of `[−R, R] ⊂ Z` against `cosh(xθ)/cosh((R+1)θ)`.
pub fn exit_rows(opts: &SolverOptions) -> Result<Vec<SelfTestRow>> {
    let mut rows = Vec::new();
    let o = Point::origin(1);
    for &lambda in &[0.5, 1.0, 2.0] {
        for ell in [2u64, 5, 9] {
            let ball = ExitBall::around(&o, ell, 0.125, ExitBallMode::Plain)?;
            let c = box_exit_cost(&o, ell, lambda, &FullLattice, &ball, 0.125, opts)?;
            let best = crate::solver::central_sub_box(&o, ell, 0.125)
                .iter()
                .map(|x| d1_exit_transform(lambda, ell, x.coord(0)))
                .fold(0.0, f64::max);
            let rel = (-c.cost.as_f64()).exp() / best;
            rows.push(row("d1-exit", ell as usize, lambda, rel, 1.0, 1.0, CLOSED_FORM_AGREEMENT));
        }
    }
    Ok(rows)
}

/// The full suite: closed forms on `Z` and `cases` random small clusters.
pub fn run_selftest(cases: usize, master: u64, opts: &SolverOptions) -> Result<Vec<SelfTestRow>> {
    let mut rows = closed_form_rows(opts)?;
    rows.extend(exit_rows(opts)?);
    for (i, c) in oracle_cases(cases, master)?.iter().enumerate() {
        rows.extend(check_case(i, c, opts)?);
    }
    Ok(rows)
}

/// Open degree sum of a case, a quick sanity measure of its size.
pub fn case_edges(case: &OracleCase) -> usize {
    let env = OpenConfig::new(case.seed, case.p);
    let clusters = build_clusters(LatticeBox::cube(2, CASE_BOX).expect("valid box"), env).expect("small box");
    let id = clusters.cluster_of(&case.source).expect("case has a cluster");
    clusters.members(id).iter().map(|m| env.degree(m)).sum::<usize>() / 2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cases_are_small_and_reproducible() {
        let a = oracle_cases(10, 3).unwrap();
        let b = oracle_cases(10, 3).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.seed, y.seed);
            assert_eq!(x.target, y.target);
            assert!((2..=12).contains(&x.cluster_size));
            assert!(case_edges(x) >= x.cluster_size - 1);
        }
    }

    #[test]
    fn short_suite_passes() {
        let rows = run_selftest(10, 1, &SolverOptions::default()).unwrap();
        assert!(rows.iter().all(|r| r.passed), "{:?}", rows.iter().find(|r| !r.passed));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn iterative_matches_oracles(master in any::<u64>()) {
                let case = &oracle_cases(1, master).unwrap()[0];
                for r in check_case(0, case, &SolverOptions::default()).unwrap() {
                    prop_assert!(r.passed, "{:?} {:?}", case, r);
                }
            }
        }
    }
}
