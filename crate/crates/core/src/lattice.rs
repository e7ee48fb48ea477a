//! Geometry of the cubic lattice: points, canonical nearest-neighbour edges,
//! `ℓ1`/`ℓ∞` norms, boxes and the hyperoctahedral symmetry group.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::LatticeError;

/// Largest supported dimension.
pub const MAX_DIM: usize = 4;

/// Coordinates are kept well inside `i64` so sums of a few of them never overflow.
pub const MAX_COORD: i64 = 1 << 40;

/// A site of `Z^d`. Unused trailing coordinates are always zero, so the
/// derived ordering is lexicographic among points of the same dimension.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    dim: u8,
    coords: [i64; MAX_DIM],
}

impl Point {
    pub fn new(coords: &[i64]) -> Result<Self, LatticeError> {
        let d = coords.len();
        if d == 0 || d > MAX_DIM {
            return Err(LatticeError::Dimension(d));
        }
        if let Some(&c) = coords.iter().find(|c| c.abs() > MAX_COORD) {
            return Err(LatticeError::CoordinateOverflow(c));
        }
        let mut out = [0; MAX_DIM];
        out[..d].copy_from_slice(coords);
        Ok(Point {
            dim: d as u8,
            coords: out,
        })
    }

    pub fn origin(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} unsupported");
        Point {
            dim: dim as u8,
            coords: [0; MAX_DIM],
        }
    }

    /// The coordinate vector `ξ_axis`.
    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut p = Point::origin(dim);
        p.coords[axis] = 1;
        p
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn coords(&self) -> &[i64] {
        &self.coords[..self.dim as usize]
    }

    #[inline]
    pub fn coord(&self, axis: usize) -> i64 {
        self.coords[axis]
    }

    /// `self ± ξ_axis`.
    #[inline]
    pub fn step(&self, axis: usize, positive: bool) -> Point {
        let mut p = *self;
        if positive {
            p.coords[axis] += 1;
        } else {
            p.coords[axis] -= 1;
        }
        p
    }

    #[inline]
    pub fn norm(&self, kind: NormKind) -> i64 {
        norm(self, kind)
    }

    pub fn is_origin(&self) -> bool {
        self.coords.iter().all(|&c| c == 0)
    }

    pub fn with_coord(&self, axis: usize, value: i64) -> Point {
        let mut p = *self;
        p.coords[axis] = value;
        p
    }
}

impl Serialize for Point {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<i64>::deserialize(d)?;
        Point::new(&v).map_err(serde::de::Error::custom)
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.coords().iter().join(","))
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        debug_assert_eq!(self.dim, rhs.dim);
        let mut p = self;
        for i in 0..MAX_DIM {
            p.coords[i] += rhs.coords[i];
        }
        p
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        debug_assert_eq!(self.dim, rhs.dim);
        let mut p = self;
        for i in 0..MAX_DIM {
            p.coords[i] -= rhs.coords[i];
        }
        p
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        let mut p = self;
        for c in p.coords.iter_mut() {
            *c = -*c;
        }
        p
    }
}

impl Mul<Point> for i64 {
    type Output = Point;
    fn mul(self, rhs: Point) -> Point {
        let mut p = rhs;
        for c in p.coords.iter_mut() {
            *c *= self;
        }
        p
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormKind {
    #[serde(rename = "l1")]
    L1,
    #[serde(rename = "linf")]
    LInf,
}

pub fn norm(x: &Point, kind: NormKind) -> i64 {
    let it = x.coords().iter().map(|c| c.abs());
    match kind {
        NormKind::L1 => it.sum(),
        NormKind::LInf => it.max().unwrap_or(0),
    }
}

/// The `2d` nearest neighbours, ordered `+ξ_1, −ξ_1, +ξ_2, −ξ_2, …`.
pub fn neighbors(x: &Point) -> Vec<Point> {
    (0..x.dim())
        .flat_map(|axis| [x.step(axis, true), x.step(axis, false)])
        .collect()
}

/// Orbit of `x` under coordinate permutations and reflections.
pub fn symmetry_orbit(x: &Point) -> BTreeSet<Point> {
    let d = x.dim();
    let mut orbit = BTreeSet::new();
    for perm in (0..d).permutations(d) {
        for signs in 0u32..(1 << d) {
            let coords: Vec<i64> = perm
                .iter()
                .enumerate()
                .map(|(i, &src)| {
                    let c = x.coord(src);
                    if signs & (1 << i) != 0 {
                        -c
                    } else {
                        c
                    }
                })
                .collect();
            orbit.insert(Point::new(&coords).expect("orbit stays in range"));
        }
    }
    orbit
}

/// A nearest-neighbour edge, stored with its lexicographically smaller endpoint
/// first. For lattice edges that endpoint is always the one from which the edge
/// points in a positive coordinate direction.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Edge {
    lo: Point,
    hi: Point,
}

impl Edge {
    pub fn new(a: Point, b: Point) -> Result<Self, LatticeError> {
        if a.dim() != b.dim() || norm(&(a - b), NormKind::L1) != 1 {
            return Err(LatticeError::NotAnEdge(a, b));
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        Ok(Edge { lo, hi })
    }

    /// The edge `{x, x + ξ_axis}`.
    #[inline]
    pub fn from_step(x: Point, axis: usize) -> Self {
        Edge {
            lo: x,
            hi: x.step(axis, true),
        }
    }

    /// The edge between `x` and `x ± ξ_axis`.
    #[inline]
    pub fn incident(x: Point, axis: usize, positive: bool) -> Self {
        if positive {
            Edge::from_step(x, axis)
        } else {
            Edge::from_step(x.step(axis, false), axis)
        }
    }

    pub fn endpoints(&self) -> (Point, Point) {
        (self.lo, self.hi)
    }

    #[inline]
    pub fn lower(&self) -> Point {
        self.lo
    }

    /// The coordinate along which the edge runs.
    #[inline]
    pub fn axis(&self) -> usize {
        (0..self.lo.dim())
            .find(|&i| self.lo.coords[i] != self.hi.coords[i])
            .expect("edge endpoints differ")
    }
}

/// `{x : ‖x − center‖ ≤ radius}` for the chosen norm.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct LatticeBox {
    center: Point,
    radius: u64,
    kind: NormKind,
}

impl LatticeBox {
    pub fn new(center: Point, radius: u64, kind: NormKind) -> Result<Self, LatticeError> {
        if radius == 0 {
            return Err(LatticeError::EmptyBox);
        }
        let r = i64::try_from(radius).map_err(|_| LatticeError::CoordinateOverflow(i64::MAX))?;
        for &c in center.coords() {
            if c.abs().checked_add(r).is_none_or(|m| m > MAX_COORD) {
                return Err(LatticeError::CoordinateOverflow(c));
            }
        }
        Ok(LatticeBox {
            center,
            radius,
            kind,
        })
    }

    /// Cube `[-radius, radius]^d` around the origin.
    pub fn cube(dim: usize, radius: u64) -> Result<Self, LatticeError> {
        LatticeBox::new(Point::origin(dim), radius, NormKind::LInf)
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn radius(&self) -> u64 {
        self.radius
    }

    pub fn kind(&self) -> NormKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    #[inline]
    pub fn distance_from_center(&self, x: &Point) -> i64 {
        norm(&(*x - self.center), self.kind)
    }

    #[inline]
    pub fn contains(&self, x: &Point) -> bool {
        x.dim() == self.dim() && self.distance_from_center(x) <= self.radius as i64
    }

    /// `ℓ1` distance from `x` (inside the box) to the nearest site outside it.
    pub fn l1_distance_to_exterior(&self, x: &Point) -> i64 {
        let r = self.radius as i64;
        match self.kind {
            NormKind::L1 => r - self.distance_from_center(x) + 1,
            NormKind::LInf => {
                let off = *x - self.center;
                off.coords().iter().map(|c| r - c.abs()).min().unwrap_or(r) + 1
            }
        }
    }

    /// Number of sites of the bounding cube; the box sites are a subset.
    pub fn cube_volume(&self) -> Option<u64> {
        let side = 2 * self.radius + 1;
        (0..self.dim()).try_fold(1u64, |acc, _| acc.checked_mul(side))
    }

    pub fn side(&self) -> u64 {
        2 * self.radius + 1
    }

    /// Row-major index in the bounding cube (first coordinate most significant),
    /// so index order is lexicographic order of points.
    #[inline]
    pub fn linear_index(&self, x: &Point) -> usize {
        let side = self.side() as i64;
        let r = self.radius as i64;
        let mut idx = 0i64;
        for i in 0..self.dim() {
            idx = idx * side + (x.coords[i] - self.center.coords[i] + r);
        }
        idx as usize
    }

    pub fn point_at(&self, mut idx: usize) -> Point {
        let side = self.side() as usize;
        let r = self.radius as i64;
        let mut p = self.center;
        for i in (0..self.dim()).rev() {
            p.coords[i] = self.center.coords[i] + (idx % side) as i64 - r;
            idx /= side;
        }
        p
    }

    /// All box sites in lexicographic order.
    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        let vol = self.cube_volume().unwrap_or(0) as usize;
        (0..vol)
            .map(move |i| self.point_at(i))
            .filter(move |p| self.contains(p))
    }
}

/// Sites at exact `ℓ1` distance `r` from `x`, in lexicographic order.
pub fn l1_sphere(x: &Point, r: u64) -> Vec<Point> {
    fn rec(prefix: &mut Vec<i64>, d: usize, remaining: i64, out: &mut Vec<Vec<i64>>) {
        if prefix.len() + 1 == d {
            if remaining == 0 {
                prefix.push(0);
                out.push(prefix.clone());
                prefix.pop();
            } else {
                for v in [-remaining, remaining] {
                    prefix.push(v);
                    out.push(prefix.clone());
                    prefix.pop();
                }
            }
            return;
        }
        for v in -remaining..=remaining {
            prefix.push(v);
            rec(prefix, d, remaining - v.abs(), out);
            prefix.pop();
        }
    }
    let d = x.dim();
    let mut offsets = Vec::new();
    rec(&mut Vec::with_capacity(d), d, r as i64, &mut offsets);
    offsets
        .into_iter()
        .map(|o| {
            let mut p = *x;
            for (i, v) in o.into_iter().enumerate() {
                p.coords[i] += v;
            }
            p
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(c: &[i64]) -> Point {
        Point::new(c).unwrap()
    }

    #[test]
    fn neighbors_in_fixed_order() {
        assert_eq!(
            neighbors(&pt(&[0, 0])),
            vec![pt(&[1, 0]), pt(&[-1, 0]), pt(&[0, 1]), pt(&[0, -1])]
        );
        assert_eq!(neighbors(&pt(&[5])), vec![pt(&[6]), pt(&[4])]);
        assert_eq!(neighbors(&pt(&[3, -2, 7])).len(), 6);
    }

    #[test]
    fn norms() {
        assert_eq!(norm(&pt(&[3, -4]), NormKind::L1), 7);
        assert_eq!(norm(&pt(&[3, -4]), NormKind::LInf), 4);
        assert_eq!(norm(&pt(&[0, 0]), NormKind::L1), 0);
        assert_eq!(norm(&pt(&[0, 0]), NormKind::LInf), 0);
    }

    #[test]
    fn orbits() {
        let o = symmetry_orbit(&pt(&[1, 0]));
        let want: BTreeSet<_> = [pt(&[1, 0]), pt(&[-1, 0]), pt(&[0, 1]), pt(&[0, -1])].into();
        assert_eq!(o, want);
        assert_eq!(symmetry_orbit(&pt(&[0, 0])).len(), 1);
        assert_eq!(symmetry_orbit(&pt(&[2, 1])).len(), 8);
        assert_eq!(symmetry_orbit(&pt(&[1, 2, 3])).len(), 48);
    }

    #[test]
    fn edges_are_canonical() {
        let a = pt(&[1, 2]);
        let b = pt(&[1, 1]);
        let e = Edge::new(a, b).unwrap();
        assert_eq!(e.endpoints(), (b, a));
        assert_eq!(e, Edge::new(b, a).unwrap());
        assert_eq!(e.axis(), 1);
        assert_eq!(Edge::incident(a, 1, false), e);
        assert!(Edge::new(pt(&[0, 0]), pt(&[1, 1])).is_err());
    }

    #[test]
    fn box_indexing_is_lexicographic() {
        let b = LatticeBox::new(pt(&[3, -1]), 2, NormKind::LInf).unwrap();
        let pts: Vec<_> = b.points().collect();
        assert_eq!(pts.len(), 25);
        assert!(pts.windows(2).all(|w| w[0] < w[1]));
        for (i, p) in pts.iter().enumerate() {
            assert_eq!(b.linear_index(p), i);
        }
        assert!(b.contains(&b.center()));
        assert_eq!(b.l1_distance_to_exterior(&pt(&[3, -1])), 3);
        assert_eq!(b.l1_distance_to_exterior(&pt(&[5, -1])), 1);
    }

    #[test]
    fn l1_box_membership() {
        let b = LatticeBox::new(pt(&[0, 0]), 2, NormKind::L1).unwrap();
        assert_eq!(b.points().count(), 13);
        assert!(!b.contains(&pt(&[2, 1])));
    }

    #[test]
    fn box_construction_rejects_overflow() {
        assert!(LatticeBox::new(pt(&[MAX_COORD]), 1, NormKind::LInf).is_err());
        assert!(LatticeBox::cube(2, 0).is_err());
    }

    #[test]
    fn sphere_enumeration() {
        let x = pt(&[0, 0]);
        assert_eq!(l1_sphere(&x, 0), vec![x]);
        let s = l1_sphere(&x, 2);
        assert_eq!(s.len(), 8);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert!(s.iter().all(|p| p.norm(NormKind::L1) == 2));
        assert_eq!(l1_sphere(&pt(&[0, 0, 0]), 1).len(), 6);
        assert_eq!(l1_sphere(&pt(&[4]), 3), vec![pt(&[1]), pt(&[7])]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn point() -> impl Strategy<Value = Point> {
            prop::collection::vec(-50i64..50, 1..=3).prop_map(|c| Point::new(&c).unwrap())
        }

        proptest! {
            #[test]
            fn neighbors_are_distinct_unit_steps(x in point()) {
                let n = neighbors(&x);
                prop_assert_eq!(n.len(), 2 * x.dim());
                let set: BTreeSet<_> = n.iter().copied().collect();
                prop_assert_eq!(set.len(), n.len());
                for y in n {
                    prop_assert_eq!(norm(&(x - y), NormKind::L1), 1);
                }
            }

            #[test]
            fn orbit_is_closed(x in point()) {
                let orbit = symmetry_orbit(&x);
                prop_assert!(orbit.contains(&x));
                for y in &orbit {
                    prop_assert_eq!(y.norm(NormKind::L1), x.norm(NormKind::L1));
                    // generators: one reflection, one transposition
                    let refl = y.with_coord(0, -y.coord(0));
                    prop_assert!(orbit.contains(&refl));
                    if x.dim() > 1 {
                        let swapped = y.with_coord(0, y.coord(1)).with_coord(1, y.coord(0));
                        prop_assert!(orbit.contains(&swapped));
                    }
                }
            }
        }
    }
}
