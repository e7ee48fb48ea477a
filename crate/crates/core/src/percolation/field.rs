//! The uniform edge field `U(e)` and the monotone family of bond
//! configurations obtained by thresholding it.
//!
//! `U(e)` is a counter-based hash of the seed and the canonical edge, so the
//! field on all of `Z^d` is available lazily, in any order, without storage.
//! Every configuration `ω_p` is read off the same field, which gives the
//! standard monotone coupling across `p`.

use serde::{Deserialize, Serialize};

use crate::lattice::{Edge, Point};

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const AXIS_SALT: u64 = 0xd1b5_4a32_d192_ed03;
const COORD_SALT: u64 = 0x8cb9_2ba7_2f3d_8dd7;

/// SplitMix64 output function.
#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldSeed(pub u64);

impl FieldSeed {
    /// Seed of replicate `index` under `master`. Replicate sets can be
    /// extended without changing earlier members.
    pub fn replicate(master: u64, index: u64) -> FieldSeed {
        FieldSeed(mix64(mix64(master ^ GOLDEN).wrapping_add(index.wrapping_mul(GOLDEN))))
    }

    #[inline]
    fn edge_hash(self, lower: &Point, axis: usize) -> u64 {
        let mut h = mix64(self.0.wrapping_add(GOLDEN));
        h = mix64(h ^ (axis as u64 + 1).wrapping_mul(AXIS_SALT));
        for &c in lower.coords() {
            h = mix64(h.wrapping_add(GOLDEN) ^ (c as u64).wrapping_mul(COORD_SALT));
        }
        h
    }

    /// `U(e)` for the edge `{lower, lower + ξ_axis}`.
    #[inline]
    pub fn uniform_at(self, lower: &Point, axis: usize) -> f64 {
        let h = self.edge_hash(lower, axis);
        // 53 random bits, offset by half a unit so 0 and 1 are unreachable
        ((h >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }
}

pub fn edge_uniform(field: FieldSeed, e: &Edge) -> f64 {
    field.uniform_at(&e.lower(), e.axis())
}

pub fn is_open(field: FieldSeed, e: &Edge, p: f64) -> bool {
    edge_uniform(field, e) > 1.0 - p
}

/// `ω_p` realised from a field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpenConfig {
    pub field: FieldSeed,
    pub p: f64,
}

impl OpenConfig {
    pub fn new(field: FieldSeed, p: f64) -> Self {
        debug_assert!((0.0..=1.0).contains(&p));
        OpenConfig { field, p }
    }

    pub fn with_p(&self, p: f64) -> Self {
        OpenConfig { field: self.field, p }
    }

    #[inline]
    pub fn is_open(&self, e: &Edge) -> bool {
        is_open(self.field, e, self.p)
    }

    /// Whether the edge between `x` and `x ± ξ_axis` is open.
    #[inline]
    pub fn is_open_step(&self, x: &Point, axis: usize, positive: bool) -> bool {
        let lower = if positive { *x } else { x.step(axis, false) };
        self.field.uniform_at(&lower, axis) > 1.0 - self.p
    }

    /// Number of open edges at `x` in the infinite lattice.
    pub fn degree(&self, x: &Point) -> usize {
        (0..x.dim())
            .flat_map(|a| [(a, true), (a, false)])
            .filter(|&(a, s)| self.is_open_step(x, a, s))
            .count()
    }

    /// Membership in `O`, the endpoints of open edges.
    pub fn in_open_set(&self, x: &Point) -> bool {
        self.degree(x) > 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeBox;

    fn edges(dim: usize, radius: u64) -> Vec<Edge> {
        let b = LatticeBox::cube(dim, radius).unwrap();
        b.points()
            .flat_map(|x| (0..dim).map(move |a| Edge::from_step(x, a)))
            .collect()
    }

    #[test]
    fn uniform_is_deterministic_and_interior() {
        let f = FieldSeed(42);
        for e in edges(2, 5) {
            let u = edge_uniform(f, &e);
            assert_eq!(u, edge_uniform(f, &e));
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn extreme_probabilities() {
        let f = FieldSeed(7);
        for e in edges(3, 2) {
            assert!(is_open(f, &e, 1.0));
            assert!(!is_open(f, &e, 0.0));
        }
    }

    #[test]
    fn kolmogorov_smirnov_band() {
        // 10^6 distinct edges of a 2-d box
        let f = FieldSeed(0x5eed);
        let mut u: Vec<f64> = edges(2, 354).into_iter().take(1_000_000).map(|e| edge_uniform(f, &e)).collect();
        assert_eq!(u.len(), 1_000_000);
        u.sort_by(f64::total_cmp);
        let n = u.len() as f64;
        let ks = u
            .iter()
            .enumerate()
            .map(|(i, &x)| ((i as f64 + 1.0) / n - x).max(x - i as f64 / n))
            .fold(0.0, f64::max);
        // asymptotic 99% critical value
        assert!(ks < 1.6276 / n.sqrt(), "KS statistic {ks}");
    }

    #[test]
    fn single_bit_seed_change_decorrelates() {
        let es = edges(2, 50);
        let es = &es[..10_000];
        for bit in [0, 17, 63] {
            let a = FieldSeed(123);
            let b = FieldSeed(123 ^ (1 << bit));
            let differ = es.iter().filter(|e| edge_uniform(a, e) != edge_uniform(b, e)).count();
            assert!(differ as f64 >= 0.99 * es.len() as f64);
        }
    }

    #[test]
    fn open_fraction_matches_p() {
        let f = FieldSeed(99);
        let es = edges(2, 100);
        for p in [0.3, 0.6, 0.9] {
            let open = es.iter().filter(|e| is_open(f, e, p)).count() as f64 / es.len() as f64;
            let sd = (p * (1.0 - p) / es.len() as f64).sqrt();
            assert!((open - p).abs() < 5.0 * sd, "p={p} got {open}");
        }
    }

    #[test]
    fn replicate_seeds_are_distinct() {
        let seeds: std::collections::HashSet<_> = (0..1000).map(|i| FieldSeed::replicate(1, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(FieldSeed::replicate(1, 0), FieldSeed::replicate(2, 0));
    }

    #[test]
    fn step_openness_matches_edges() {
        let c = OpenConfig::new(FieldSeed(3), 0.6);
        let x = Point::new(&[2, -3]).unwrap();
        for a in 0..2 {
            for s in [true, false] {
                assert_eq!(c.is_open_step(&x, a, s), c.is_open(&Edge::incident(x, a, s)));
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn threshold_is_monotone(seed in any::<u64>(), x in -1000i64..1000, y in -1000i64..1000,
                                     axis in 0usize..2, q in 0.0f64..1.0, dp in 0.0f64..1.0) {
                let p = (q + dp).min(1.0);
                let e = Edge::from_step(Point::new(&[x, y]).unwrap(), axis);
                let f = FieldSeed(seed);
                if is_open(f, &e, q) {
                    prop_assert!(is_open(f, &e, p));
                }
            }
        }
    }
}
