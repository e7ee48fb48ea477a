//! Fixed-point iteration for killed, discounted hitting transforms.
//!
//! Solves `f = 1` on a seed set and `f(v) = e^{−λ} Σ_u π(v,u) f(u)` on live
//! sites, `f = 0` elsewhere, by iterating from `f ≡ 0` away from the seeds.
//! After `n` sweeps `f_n(v)` is the sum over walks of length `≤ n`, so the
//! iterates increase to the minimal nonnegative solution and the tail after
//! `n` sweeps is at most `e^{−λ(n+1)}/(1 − e^{−λ})`.
//!
//! Sites are discovered breadth-first from the seeds, one layer per sweep;
//! `f_n` vanishes beyond layer `n`, so only discovered sites are touched. On
//! the bipartite lattice neighbours sit in adjacent layers, which gives two
//! savings. Values are stored as `g = f·e^{λL}` (`L` the layer), keeping
//! them representable when `f` itself would underflow. And only the sites whose
//! layer has the parity of the sweep change, so updates run in place.
//!
//! With a single source `s` and a known last sweep `N`, a site `y` can only
//! influence `f_N(s)` through walks of length `≥ |y − s|_1 + L(y)`, and its
//! value at sweep `m` only matters if `|y − s|_1 ≤ N − m`. Sites and updates
//! outside these cones are skipped without changing `f_m(s)` for `m ≤ N`.

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::lattice::{NormKind, Point};
use crate::percolation::Environment;

const NONE: u32 = u32::MAX;

pub(crate) struct LayeredSystem<'a, E, F> {
    env: &'a E,
    live: F,
    kill_outside: bool,
    lambda: f64,
    /// `e^{−2λ}`, the weight of a neighbour one layer farther out.
    c2: f64,
    stride: usize,
    max_sites: usize,

    index: FxHashMap<Point, u32>,
    points: Vec<Point>,
    layer_start: Vec<usize>,
    nbrs: Vec<u32>,
    n_down: Vec<u8>,
    n_nbrs: Vec<u8>,
    inv_deg: Vec<f64>,
    pub(crate) g: Vec<f64>,
    expanded: usize,
    exhausted: bool,
    horizon: Option<Horizon>,
}

struct Horizon {
    source: Point,
    last_sweep: usize,
    /// `ℓ1` distance of each site to the source.
    dist: Vec<u32>,
}

impl<'a, E, F> LayeredSystem<'a, E, F>
where
    E: Environment,
    F: Fn(&Point) -> bool,
{
    /// `seeds` must all share one lattice parity.
    pub(crate) fn new(env: &'a E, seeds: &[Point], live: F, kill_outside: bool, lambda: f64, max_sites: usize) -> Self {
        let dim = seeds.first().map(|p| p.dim()).unwrap_or(1);
        let stride = 2 * dim;
        let mut sys = LayeredSystem {
            env,
            live,
            kill_outside,
            lambda,
            c2: (-2.0 * lambda).exp(),
            stride,
            max_sites,
            index: FxHashMap::default(),
            points: Vec::new(),
            layer_start: vec![0],
            nbrs: Vec::new(),
            n_down: Vec::new(),
            n_nbrs: Vec::new(),
            inv_deg: Vec::new(),
            g: Vec::new(),
            expanded: 0,
            exhausted: false,
            horizon: None,
        };
        for s in seeds {
            if !sys.index.contains_key(s) {
                sys.push(*s, 1.0);
            }
        }
        sys.layer_start.push(sys.points.len());
        sys
    }

    fn push(&mut self, p: Point, g: f64) -> u32 {
        let i = self.points.len() as u32;
        self.index.insert(p, i);
        self.points.push(p);
        self.nbrs.extend(std::iter::repeat_n(NONE, self.stride));
        self.n_down.push(0);
        self.n_nbrs.push(0);
        self.inv_deg.push(0.0);
        self.g.push(g);
        if let Some(h) = &mut self.horizon {
            h.dist.push((p - h.source).norm(NormKind::L1) as u32);
        }
        i
    }

    /// Restricts all further work to what `f_m(source)`, `m ≤ last_sweep`,
    /// depends on.
    pub(crate) fn set_horizon(&mut self, source: Point, last_sweep: usize) {
        let dist = self
            .points
            .iter()
            .map(|y| (*y - source).norm(NormKind::L1) as u32)
            .collect();
        self.horizon = Some(Horizon {
            source,
            last_sweep,
            dist,
        });
    }

    pub(crate) fn lookup(&self, p: &Point) -> Option<usize> {
        self.index.get(p).map(|&i| i as usize)
    }

    pub(crate) fn len(&self) -> usize {
        self.points.len()
    }

    pub(crate) fn layer_count(&self) -> usize {
        self.layer_start.len() - 1
    }

    pub(crate) fn layer_of(&self, i: usize) -> usize {
        self.layer_start.partition_point(|&s| s <= i) - 1
    }

    pub(crate) fn exhausted(&self) -> bool {
        self.exhausted
    }

    /// `ln f(i)`, or `−∞` while the site is still unreached.
    pub(crate) fn log_value(&self, i: usize) -> f64 {
        self.g[i].ln() - self.lambda * self.layer_of(i) as f64
    }

    /// Discovers layer `l + 1` by expanding layer `l`.
    fn expand_next(&mut self) -> Result<()> {
        let l = self.expanded;
        let (lo, hi) = (self.layer_start[l], self.layer_start[l + 1]);
        let is_seed_layer = l == 0;
        for v in lo..hi {
            let x = self.points[v];
            let mut down = [NONE; 8];
            let mut up = [NONE; 8];
            let (mut nd, mut nu) = (0usize, 0usize);
            let mut deg = 0u32;
            for axis in 0..x.dim() {
                for pos in [true, false] {
                    if !self.env.is_open_step(&x, axis, pos) {
                        continue;
                    }
                    let y = x.step(axis, pos);
                    let j = match self.index.get(&y) {
                        Some(&j) => j,
                        None if (self.live)(&y) => {
                            if self.beyond_horizon(&y, l + 1) {
                                deg += 1;
                                continue;
                            }
                            self.push(y, 0.0)
                        }
                        None => {
                            if self.kill_outside {
                                deg += 1;
                            }
                            continue;
                        }
                    };
                    deg += 1;
                    let lj = if (j as usize) < hi { self.layer_of(j as usize) } else { l + 1 };
                    if lj < l {
                        down[nd] = j;
                        nd += 1;
                    } else {
                        debug_assert_eq!(lj, l + 1, "neighbours must sit in adjacent layers");
                        up[nu] = j;
                        nu += 1;
                    }
                }
            }
            if is_seed_layer {
                continue;
            }
            let base = v * self.stride;
            self.nbrs[base..base + nd].copy_from_slice(&down[..nd]);
            self.nbrs[base + nd..base + nd + nu].copy_from_slice(&up[..nu]);
            self.n_down[v] = nd as u8;
            self.n_nbrs[v] = (nd + nu) as u8;
            self.inv_deg[v] = if deg > 0 { 1.0 / deg as f64 } else { 0.0 };
        }
        if self.points.len() > self.max_sites {
            return Err(Error::Resource(format!(
                "solver domain exceeds {} sites",
                self.max_sites
            )));
        }
        if self.points.len() == hi {
            self.exhausted = true;
        }
        self.layer_start.push(self.points.len());
        self.expanded += 1;
        Ok(())
    }

    fn beyond_horizon(&self, y: &Point, layer: usize) -> bool {
        self.horizon
            .as_ref()
            .is_some_and(|h| (*y - h.source).norm(NormKind::L1) as usize + layer > h.last_sweep)
    }

    /// Sweep `n ≥ 1`: updates every site of layer `≤ n` with the parity of `n`.
    pub(crate) fn sweep(&mut self, n: usize) -> Result<()> {
        while self.expanded <= n && !self.exhausted {
            self.expand_next()?;
        }
        let top = n.min(self.layer_count() - 1);
        let reach = self.horizon.as_ref().map(|h| h.last_sweep.saturating_sub(n) as u32);
        let mut l = if n % 2 == 0 { 2 } else { 1 };
        while l <= top {
            let (lo, hi) = (self.layer_start[l], self.layer_start[l + 1]);
            for v in lo..hi {
                if let (Some(r), Some(h)) = (reach, &self.horizon) {
                    if h.dist[v] > r {
                        continue;
                    }
                }
                let base = v * self.stride;
                let nd = self.n_down[v] as usize;
                let nn = self.n_nbrs[v] as usize;
                let mut down = 0.0;
                for &u in &self.nbrs[base..base + nd] {
                    down += self.g[u as usize];
                }
                let mut up = 0.0;
                for &u in &self.nbrs[base + nd..base + nn] {
                    up += self.g[u as usize];
                }
                self.g[v] = self.inv_deg[v] * (down + self.c2 * up);
            }
            l += 2;
        }
        Ok(())
    }

    /// `ln` of the bound on the mass still missing after sweep `n`, for
    /// walks whose length has a fixed parity.
    pub(crate) fn log_tail_same_parity(&self, n: usize) -> f64 {
        -self.lambda * (n + 2) as f64 - (-(-2.0 * self.lambda).exp()).ln_1p()
    }

    /// Same, without the parity restriction.
    pub(crate) fn log_tail(&self, n: usize) -> f64 {
        -self.lambda * (n + 1) as f64 - (-(-self.lambda).exp()).ln_1p()
    }
}
