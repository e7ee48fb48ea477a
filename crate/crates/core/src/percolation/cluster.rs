//! Finite-box cluster structure: union–find over the open subgraph of a box,
//! the largest cluster as a stand-in for the infinite cluster, and the anchor
//! map onto it.

use crate::error::{Error, Result};
use crate::lattice::{l1_sphere, LatticeBox, NormKind, Point};
use crate::percolation::{Environment, OpenConfig};

/// Default cap on box sites (12 bytes of working memory each).
pub const DEFAULT_MAX_BOX_SITES: u64 = 1 << 26;

const NOT_IN_BOX: u32 = u32::MAX;

/// Identifies a cluster by the linear index of its lexicographically smallest site.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClusterId(pub u32);

#[derive(Clone, Debug)]
pub struct ClusterIndex<E = OpenConfig> {
    bx: LatticeBox,
    env: E,
    labels: Vec<u32>,
    sizes: Vec<u32>,
    giant: ClusterId,
    usable: i64,
}

fn find(parent: &mut [u32], mut v: u32) -> u32 {
    while parent[v as usize] != v {
        let gp = parent[parent[v as usize] as usize];
        parent[v as usize] = gp;
        v = gp;
    }
    v
}

pub fn build_clusters<E: Environment>(bx: LatticeBox, env: E) -> Result<ClusterIndex<E>> {
    build_clusters_with_budget(bx, env, DEFAULT_MAX_BOX_SITES)
}

pub fn build_clusters_with_budget<E: Environment>(
    bx: LatticeBox,
    env: E,
    max_sites: u64,
) -> Result<ClusterIndex<E>> {
    let volume = bx
        .cube_volume()
        .filter(|&v| v <= max_sites && v < u32::MAX as u64)
        .ok_or_else(|| {
            Error::Resource(format!(
                "box of radius {} in d={} exceeds the budget of {max_sites} sites",
                bx.radius(),
                bx.dim()
            ))
        })? as usize;

    let dim = bx.dim();
    let side = bx.side() as usize;
    let mut strides = vec![1usize; dim];
    for i in (0..dim.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * side;
    }

    let mut parent: Vec<u32> = (0..volume as u32).collect();
    let mut size = vec![1u32; volume];
    let mut inside = vec![true; volume];
    for (v, slot) in inside.iter_mut().enumerate() {
        *slot = bx.contains(&bx.point_at(v));
    }

    for v in 0..volume {
        if !inside[v] {
            continue;
        }
        let x = bx.point_at(v);
        for axis in 0..dim {
            let w = v + strides[axis];
            let rel = x.coord(axis) - bx.center().coord(axis) + bx.radius() as i64;
            if rel as usize + 1 >= side || !inside[w] {
                continue;
            }
            if !env.is_open_step(&x, axis, true) {
                continue;
            }
            let (a, b) = (find(&mut parent, v as u32), find(&mut parent, w as u32));
            if a == b {
                continue;
            }
            let (big, small) = if size[a as usize] >= size[b as usize] { (a, b) } else { (b, a) };
            parent[small as usize] = big;
            size[big as usize] += size[small as usize];
        }
    }

    // canonical labels: smallest member, found first in lexicographic order
    let mut canon = vec![NOT_IN_BOX; volume];
    let mut labels = vec![NOT_IN_BOX; volume];
    for v in 0..volume {
        if !inside[v] {
            continue;
        }
        let r = find(&mut parent, v as u32) as usize;
        if canon[r] == NOT_IN_BOX {
            canon[r] = v as u32;
        }
        labels[v] = canon[r];
    }
    drop(canon);
    drop(parent);
    let mut sizes = vec![0u32; volume];
    for &l in labels.iter().filter(|&&l| l != NOT_IN_BOX) {
        sizes[l as usize] += 1;
    }
    drop(size);

    // largest cluster; ties go to the smaller label, i.e. the first one met
    let mut giant = 0u32;
    let mut best = 0u32;
    for (l, &s) in sizes.iter().enumerate() {
        if s > best {
            best = s;
            giant = l as u32;
        }
    }

    let usable = (bx.radius() / 2) as i64;
    Ok(ClusterIndex {
        bx,
        env,
        labels,
        sizes,
        giant: ClusterId(giant),
        usable,
    })
}

impl<E: Environment> ClusterIndex<E> {
    pub fn bounding_box(&self) -> &LatticeBox {
        &self.bx
    }

    pub fn environment(&self) -> &E {
        &self.env
    }

    pub fn dim(&self) -> usize {
        self.bx.dim()
    }

    /// Sets the boundary margin; queries must lie within `radius − margin` of the centre.
    pub fn with_margin(mut self, margin: u64) -> Self {
        self.usable = self.bx.radius().saturating_sub(margin) as i64;
        self
    }

    /// Largest distance from the centre (in the box norm) at which queries are accepted.
    pub fn usable_radius(&self) -> i64 {
        self.usable
    }

    pub fn in_interior(&self, x: &Point) -> bool {
        x.dim() == self.dim() && self.bx.distance_from_center(x) <= self.usable
    }

    pub fn check_interior(&self, x: &Point) -> Result<()> {
        if self.in_interior(x) {
            Ok(())
        } else {
            Err(Error::Margin {
                point: *x,
                usable: self.usable,
            })
        }
    }

    pub fn cluster_of(&self, x: &Point) -> Option<ClusterId> {
        if !self.bx.contains(x) {
            return None;
        }
        match self.labels[self.bx.linear_index(x)] {
            NOT_IN_BOX => None,
            l => Some(ClusterId(l)),
        }
    }

    pub fn same_cluster(&self, x: &Point, y: &Point) -> bool {
        matches!((self.cluster_of(x), self.cluster_of(y)), (Some(a), Some(b)) if a == b)
    }

    pub fn cluster_size(&self, id: ClusterId) -> u32 {
        self.sizes[id.0 as usize]
    }

    pub fn giant_id(&self) -> ClusterId {
        self.giant
    }

    pub fn giant_size(&self) -> u32 {
        self.cluster_size(self.giant)
    }

    pub fn in_giant(&self, x: &Point) -> bool {
        self.cluster_of(x) == Some(self.giant)
    }

    /// Fraction of box sites in the giant cluster.
    pub fn giant_density(&self) -> f64 {
        let n = self.sizes.iter().map(|&s| s as u64).sum::<u64>();
        self.giant_size() as f64 / n as f64
    }

    /// Cluster sizes in decreasing order (singletons included).
    pub fn cluster_sizes(&self) -> Vec<u32> {
        let mut s: Vec<u32> = self.sizes.iter().copied().filter(|&s| s > 0).collect();
        s.sort_unstable_by(|a, b| b.cmp(a));
        s
    }

    /// Sites of one cluster in lexicographic order.
    pub fn members(&self, id: ClusterId) -> Vec<Point> {
        self.labels
            .iter()
            .enumerate()
            .filter(|&(_, &l)| l == id.0)
            .map(|(v, _)| self.bx.point_at(v))
            .collect()
    }

    /// The giant-cluster site closest to `x` in `ℓ1`, ties broken by
    /// lexicographic order.
    pub fn anchor(&self, x: &Point) -> Result<Point> {
        self.check_interior(x)?;
        if self.giant_size() == 0 {
            return Err(Error::NoAnchor { point: *x, radius: 0 });
        }
        let max_r = self.bx.radius() as i64 - self.usable;
        for r in 0..=max_r.max(0) as u64 {
            let hit = l1_sphere(x, r).into_iter().find(|y| self.in_giant(y));
            if let Some(y) = hit {
                return Ok(y);
            }
        }
        Err(Error::NoAnchor {
            point: *x,
            radius: max_r as u64,
        })
    }
}

/// Same as [`ClusterIndex::anchor`].
pub fn anchor<E: Environment>(x: &Point, clusters: &ClusterIndex<E>) -> Result<Point> {
    clusters.anchor(x)
}

impl ClusterIndex<OpenConfig> {
    pub fn config(&self) -> &OpenConfig {
        &self.env
    }
}

/// Smallest cube around the origin whose interior (under the default
/// half-radius margin) holds every given point with `pad` sites to spare.
pub fn cube_for(points: &[Point], pad: u64) -> Result<LatticeBox> {
    let dim = points.first().map(|p| p.dim()).unwrap_or(2);
    let reach = points
        .iter()
        .map(|p| p.norm(NormKind::LInf) as u64)
        .max()
        .unwrap_or(0);
    Ok(LatticeBox::cube(dim, 2 * (reach + pad).max(1))?)
}
