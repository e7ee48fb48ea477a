use rustc_hash::FxHashSet;

use crate::lattice::{Edge, Point};
use crate::percolation::OpenConfig;

/// Read access to a bond configuration on `Z^d`.
pub trait Environment: Sync {
    /// Whether the edge between `x` and `x ± ξ_axis` is open.
    fn is_open_step(&self, x: &Point, axis: usize, positive: bool) -> bool;

    fn is_open(&self, e: &Edge) -> bool {
        self.is_open_step(&e.lower(), e.axis(), true)
    }

    fn degree(&self, x: &Point) -> usize {
        (0..x.dim())
            .flat_map(|a| [(a, true), (a, false)])
            .filter(|&(a, s)| self.is_open_step(x, a, s))
            .count()
    }

    fn in_open_set(&self, x: &Point) -> bool {
        self.degree(x) > 0
    }
}

impl Environment for OpenConfig {
    #[inline]
    fn is_open_step(&self, x: &Point, axis: usize, positive: bool) -> bool {
        OpenConfig::is_open_step(self, x, axis, positive)
    }
}

/// An explicitly listed set of open edges; every other edge is closed.
#[derive(Clone, Debug, Default)]
pub struct EdgeSet {
    open: FxHashSet<Edge>,
}

impl EdgeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, e: Edge) {
        self.open.insert(e);
    }

    pub fn remove(&mut self, e: &Edge) {
        self.open.remove(e);
    }

    pub fn len(&self) -> usize {
        self.open.len()
    }

    pub fn is_empty(&self) -> bool {
        self.open.is_empty()
    }

    /// Opens every edge along the straight segments joining consecutive points.
    pub fn open_path(&mut self, corners: &[Point]) {
        for w in corners.windows(2) {
            let (mut cur, end) = (w[0], w[1]);
            while cur != end {
                let axis = (0..cur.dim())
                    .find(|&a| cur.coord(a) != end.coord(a))
                    .expect("points differ");
                let next = cur.step(axis, end.coord(axis) > cur.coord(axis));
                self.insert(Edge::new(cur, next).expect("unit step"));
                cur = next;
            }
        }
    }
}

impl FromIterator<Edge> for EdgeSet {
    fn from_iter<I: IntoIterator<Item = Edge>>(iter: I) -> Self {
        EdgeSet {
            open: iter.into_iter().collect(),
        }
    }
}

impl Environment for EdgeSet {
    fn is_open_step(&self, x: &Point, axis: usize, positive: bool) -> bool {
        self.open.contains(&Edge::incident(*x, axis, positive))
    }
}

/// Every edge open (`p = 1`).
#[derive(Clone, Copy, Debug, Default)]
pub struct FullLattice;

impl Environment for FullLattice {
    fn is_open_step(&self, _: &Point, _: usize, _: bool) -> bool {
        true
    }
}
