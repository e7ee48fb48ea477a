//! Chemical distance on the open subgraph of a box, and Monte Carlo
//! estimates of its linear growth rate (the time constant).

use std::collections::VecDeque;
use std::fmt;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeBox, NormKind, Point};
use crate::percolation::{build_clusters, cube_for, ClusterIndex, Environment, FieldSeed, OpenConfig};
use crate::stats::Estimate;

/// Graph distance in the open subgraph, `Infinite` across clusters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ChemDistance {
    Finite(u64),
    Infinite,
}

impl ChemDistance {
    pub fn finite(self) -> Option<u64> {
        match self {
            ChemDistance::Finite(d) => Some(d),
            ChemDistance::Infinite => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ChemDistance::Finite(_))
    }
}

impl fmt::Display for ChemDistance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChemDistance::Finite(d) => write!(f, "{d}"),
            ChemDistance::Infinite => f.write_str("inf"),
        }
    }
}

const UNSEEN: u32 = u32::MAX;

/// Breadth-first distances from `source` to each target, restricted to open
/// edges inside the box. Stops as soon as every reachable target is settled.
pub fn bfs_distances<E: Environment>(
    clusters: &ClusterIndex<E>,
    source: &Point,
    targets: &[Point],
) -> Result<Vec<ChemDistance>> {
    clusters.check_interior(source)?;
    for t in targets {
        clusters.check_interior(t)?;
    }
    let bx = *clusters.bounding_box();
    let env = clusters.environment();
    let mut out = vec![ChemDistance::Infinite; targets.len()];
    let mut pending: Vec<usize> = Vec::new();
    for (i, t) in targets.iter().enumerate() {
        if t == source {
            out[i] = ChemDistance::Finite(0);
        } else if clusters.same_cluster(source, t) {
            pending.push(i);
        }
    }
    if pending.is_empty() {
        return Ok(out);
    }

    let volume = bx.cube_volume().expect("box already indexed") as usize;
    let mut dist = vec![UNSEEN; volume];
    let mut parent = vec![UNSEEN; volume];
    let mut queue = VecDeque::new();
    let s = bx.linear_index(source);
    dist[s] = 0;
    queue.push_back(*source);
    let mut remaining = pending.len();
    let mut wanted: rustc_hash::FxHashMap<usize, Vec<usize>> = Default::default();
    for &i in &pending {
        wanted.entry(bx.linear_index(&targets[i])).or_default().push(i);
    }

    while let Some(x) = queue.pop_front() {
        let xi = bx.linear_index(&x);
        let dx = dist[xi];
        for axis in 0..x.dim() {
            for pos in [true, false] {
                let y = x.step(axis, pos);
                if !bx.contains(&y) || !env.is_open_step(&x, axis, pos) {
                    continue;
                }
                let yi = bx.linear_index(&y);
                if dist[yi] != UNSEEN {
                    continue;
                }
                dist[yi] = dx + 1;
                parent[yi] = xi as u32;
                if let Some(ids) = wanted.get(&yi) {
                    for &i in ids {
                        out[i] = ChemDistance::Finite(dx as u64 + 1);
                    }
                    remaining -= ids.len();
                    warn_if_geodesic_leaves_interior(clusters, &parent, yi);
                }
                queue.push_back(y);
            }
        }
        if remaining == 0 {
            break;
        }
    }
    Ok(out)
}

fn warn_if_geodesic_leaves_interior<E: Environment>(clusters: &ClusterIndex<E>, parent: &[u32], mut v: usize) {
    let bx = clusters.bounding_box();
    while v as u32 != UNSEEN {
        let p = bx.point_at(v);
        if !clusters.in_interior(&p) {
            warn!("geodesic passes through {p}, inside the boundary margin; in-box distance may exceed the infinite-volume one");
            return;
        }
        v = parent[v] as usize;
    }
}

pub fn chemical_distance<E: Environment>(clusters: &ClusterIndex<E>, x: &Point, y: &Point) -> Result<ChemDistance> {
    Ok(bfs_distances(clusters, x, std::slice::from_ref(y))?[0])
}

#[derive(Clone, Debug)]
pub struct TimeConstantParams {
    pub k_max: u32,
    pub replicates: usize,
    pub master_seed: u64,
    /// Extra sites between the farthest query and the usable interior edge.
    pub pad: u64,
    pub max_box_sites: u64,
}

impl Default for TimeConstantParams {
    fn default() -> Self {
        TimeConstantParams {
            k_max: 24,
            replicates: 200,
            master_seed: 0,
            pad: 16,
            max_box_sites: crate::percolation::DEFAULT_MAX_BOX_SITES,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TimeConstantEstimate {
    pub direction: Point,
    pub p: f64,
    /// `(k, estimate of d([0]_p, [kx]_p) / k)`.
    pub per_k: Vec<(u32, Estimate)>,
    /// Mean at the largest `k`.
    pub mu_hat: f64,
    pub mu_hat_stderr: f64,
    /// Smallest per-`k` mean.
    pub mu_upper: f64,
    /// Replicate seeds in order, and their raw distances indexed by `k − 1`.
    pub seeds: Vec<FieldSeed>,
    pub distances: Vec<Vec<u64>>,
}

/// Box used for anchoring the points `0, x, 2x, …, k_max·x`.
pub fn box_for_multiples(direction: &Point, k_max: u32, pad: u64) -> Result<LatticeBox> {
    let far = k_max as i64 * *direction;
    cube_for(&[Point::origin(direction.dim()), far], pad)
}

/// Distances `d([0]_p, [kx]_p)` for `k = 1..=k_max` in one configuration.
pub fn time_constant_sample(seed: FieldSeed, direction: &Point, p: f64, params: &TimeConstantParams) -> Result<Vec<u64>> {
    let bx = box_for_multiples(direction, params.k_max, params.pad)?;
    let clusters = crate::percolation::build_clusters_with_budget(bx, OpenConfig::new(seed, p), params.max_box_sites)?;
    distances_along(&clusters, direction, params.k_max)
}

pub(crate) fn distances_along<E: Environment>(clusters: &ClusterIndex<E>, direction: &Point, k_max: u32) -> Result<Vec<u64>> {
    let origin = clusters.anchor(&Point::origin(direction.dim()))?;
    let targets = (1..=k_max as i64)
        .map(|k| clusters.anchor(&(k * *direction)))
        .collect::<Result<Vec<_>>>()?;
    bfs_distances(clusters, &origin, &targets)?
        .into_iter()
        .map(|d| {
            d.finite()
                .ok_or_else(|| Error::Resource("anchors of the giant cluster disconnected inside the box".into()))
        })
        .collect()
}

pub fn time_constant_estimate(direction: &Point, p: f64, params: &TimeConstantParams) -> Result<TimeConstantEstimate> {
    if direction.is_origin() {
        return Err(Error::invalid("direction", "must be nonzero"));
    }
    if params.k_max == 0 || params.replicates == 0 {
        return Err(Error::invalid("k_max/replicates", "must be positive"));
    }
    let seeds: Vec<FieldSeed> = (0..params.replicates as u64)
        .map(|i| FieldSeed::replicate(params.master_seed, i))
        .collect();
    let distances = seeds
        .par_iter()
        .map(|&s| time_constant_sample(s, direction, p, params))
        .collect::<Result<Vec<_>>>()?;
    let per_k: Vec<(u32, Estimate)> = (1..=params.k_max)
        .map(|k| {
            let xs: Vec<f64> = distances.iter().map(|d| d[k as usize - 1] as f64 / k as f64).collect();
            (k, Estimate::from_samples(&xs))
        })
        .collect();
    let last = per_k.last().expect("k_max ≥ 1").1;
    let mu_upper = per_k.iter().map(|(_, e)| e.mean).fold(f64::INFINITY, f64::min);
    Ok(TimeConstantEstimate {
        direction: *direction,
        p,
        mu_hat: last.mean,
        mu_hat_stderr: last.stderr,
        mu_upper,
        per_k,
        seeds,
        distances,
    })
}

/// Open-subgraph cluster index for `ω_p` in a cube of the given radius.
pub fn clusters_in_cube(seed: FieldSeed, p: f64, dim: usize, radius: u64) -> Result<ClusterIndex> {
    build_clusters(LatticeBox::cube(dim, radius)?, OpenConfig::new(seed, p))
}

/// `ℓ1` norm, the `p = 1` time constant.
pub fn lattice_distance(x: &Point, y: &Point) -> u64 {
    (*x - *y).norm(NormKind::L1) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Edge;
    use crate::percolation::{EdgeSet, FullLattice};

    fn pt(c: &[i64]) -> Point {
        Point::new(c).unwrap()
    }

    #[test]
    fn full_lattice_distance_is_l1() {
        let c = crate::percolation::build_clusters(LatticeBox::cube(2, 10).unwrap(), FullLattice).unwrap();
        assert_eq!(chemical_distance(&c, &pt(&[0, 0]), &pt(&[3, 4])).unwrap(), ChemDistance::Finite(7));
        assert_eq!(chemical_distance(&c, &pt(&[2, 2]), &pt(&[2, 2])).unwrap(), ChemDistance::Finite(0));
    }

    #[test]
    fn different_clusters_are_infinitely_far() {
        let mut open = EdgeSet::new();
        open.open_path(&[pt(&[0, 0]), pt(&[1, 0])]);
        open.open_path(&[pt(&[0, 2]), pt(&[1, 2])]);
        let c = crate::percolation::build_clusters(LatticeBox::cube(2, 6).unwrap(), open).unwrap();
        assert_eq!(chemical_distance(&c, &pt(&[0, 0]), &pt(&[1, 2])).unwrap(), ChemDistance::Infinite);
    }

    #[test]
    fn forced_detour() {
        // 5x5 box with every edge open except the wall between columns 0 and 1
        // at heights -2..=1; the only crossing is at the top row.
        let bx = LatticeBox::cube(2, 2).unwrap();
        let mut open: EdgeSet = bx
            .points()
            .flat_map(|x| (0..2).map(move |a| Edge::from_step(x, a)))
            .filter(|e| bx.contains(&e.endpoints().1))
            .collect();
        for y in -2..=1 {
            open.remove(&Edge::from_step(pt(&[0, y]), 0));
        }
        let c = crate::percolation::build_clusters(bx, open).unwrap().with_margin(0);
        let (x, y) = (pt(&[-2, -2]), pt(&[2, 1]));
        assert_eq!(lattice_distance(&x, &y), 7);
        // up to (0,2): 6, across: 1, down-right to (2,1): 2
        assert_eq!(chemical_distance(&c, &x, &y).unwrap(), ChemDistance::Finite(9));
    }

    #[test]
    fn margin_is_enforced() {
        let c = crate::percolation::build_clusters(LatticeBox::cube(2, 10).unwrap(), FullLattice).unwrap();
        assert!(matches!(
            chemical_distance(&c, &pt(&[0, 0]), &pt(&[6, 0])),
            Err(Error::Margin { .. })
        ));
    }

    #[test]
    fn p_one_time_constant_is_l1() {
        let params = TimeConstantParams {
            k_max: 6,
            replicates: 3,
            ..Default::default()
        };
        for x in [pt(&[1, 0]), pt(&[1, 1]), pt(&[2, 1])] {
            let est = time_constant_estimate(&x, 1.0, &params).unwrap();
            for (_, e) in &est.per_k {
                assert_eq!(e.mean, x.norm(NormKind::L1) as f64);
                assert_eq!(e.stderr, 0.0);
            }
        }
    }

    #[test]
    fn distance_dominates_l1_between_anchors() {
        let params = TimeConstantParams {
            k_max: 8,
            replicates: 10,
            master_seed: 3,
            ..Default::default()
        };
        let x = pt(&[1, 0]);
        let est = time_constant_estimate(&x, 0.7, &params).unwrap();
        for (seed, d) in est.seeds.iter().zip(&est.distances) {
            let bx = box_for_multiples(&x, params.k_max, params.pad).unwrap();
            let c = crate::percolation::build_clusters(bx, OpenConfig::new(*seed, 0.7)).unwrap();
            let a0 = c.anchor(&Point::origin(2)).unwrap();
            for (k, &dk) in d.iter().enumerate() {
                let ak = c.anchor(&((k as i64 + 1) * x)).unwrap();
                assert!(dk >= lattice_distance(&a0, &ak));
            }
        }
        assert!(est.mu_upper >= 0.5);
    }

    mod props {
        use super::*;
        use crate::percolation::{build_clusters, FieldSeed};
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn chemical_distance_shrinks_with_p(seed in any::<u64>(), p1 in 0.55f64..1.0, dp in 0.0f64..0.45,
                                                tx in -8i64..=8, ty in -8i64..=8) {
                let p2 = (p1 + dp).min(1.0);
                let bx = LatticeBox::cube(2, 20).unwrap();
                let lo = build_clusters(bx, OpenConfig::new(FieldSeed(seed), p1)).unwrap();
                let hi = build_clusters(bx, OpenConfig::new(FieldSeed(seed), p2)).unwrap();
                let (x, y) = (pt(&[0, 0]), pt(&[tx, ty]));
                if let ChemDistance::Finite(d1) = chemical_distance(&lo, &x, &y).unwrap() {
                    let d2 = chemical_distance(&hi, &x, &y).unwrap().finite().expect("edges only added");
                    prop_assert!(d2 <= d1);
                    prop_assert!(d2 >= lattice_distance(&x, &y));
                }
            }
        }
    }
}
