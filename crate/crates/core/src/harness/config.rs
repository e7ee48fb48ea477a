use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{LambdaGrid, LyapunovParams, RationalPoint};
use crate::error::{Error, Result};
use crate::lattice::Point;
use crate::percolation::DEFAULT_MAX_BOX_SITES;
use crate::solver::{ExitBallMode, SolverOptions, ANCHOR_PAD};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Cost,
    Lyapunov,
    Rate,
    Sweep,
    RateSweep,
    Timeconst,
    Goodbox,
    Selftest,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::Cost,
        ExperimentKind::Lyapunov,
        ExperimentKind::Rate,
        ExperimentKind::Sweep,
        ExperimentKind::RateSweep,
        ExperimentKind::Timeconst,
        ExperimentKind::Goodbox,
        ExperimentKind::Selftest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Cost => "cost",
            ExperimentKind::Lyapunov => "lyapunov",
            ExperimentKind::Rate => "rate",
            ExperimentKind::Sweep => "sweep",
            ExperimentKind::RateSweep => "rate-sweep",
            ExperimentKind::Timeconst => "timeconst",
            ExperimentKind::Goodbox => "goodbox",
            ExperimentKind::Selftest => "selftest",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid("kind", format!("unknown experiment kind `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BallModeName {
    Calibrated,
    Plain,
}

/// Every key except `kind` and `seed` has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Option<ExperimentKind>,
    pub seed: Option<u64>,
    #[serde(default = "defaults::dimension")]
    pub dimension: usize,
    #[serde(default = "defaults::p")]
    pub p: Vec<f64>,
    /// Anchor parameter; defaults to the smallest `p`.
    #[serde(default)]
    pub q: Option<f64>,
    /// Validation threshold; defaults to a literature value for `d = 2, 3`.
    #[serde(default)]
    pub p_c: Option<f64>,
    #[serde(default = "defaults::lambda")]
    pub lambda: Vec<f64>,
    #[serde(default)]
    pub lambda_grid: LambdaGrid,
    /// Directions `x`; rational entries are allowed for `rate` runs.
    #[serde(default)]
    pub directions: Option<Vec<Vec<f64>>>,
    #[serde(default = "defaults::k_max")]
    pub k_max: u32,
    #[serde(default = "defaults::replicates")]
    pub replicates: usize,
    /// Pad of the `ω_q` anchor box (and of the distance box for `timeconst`).
    #[serde(default = "defaults::box_pad")]
    pub box_pad: u64,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default = "defaults::solver_pad")]
    pub solver_pad: u64,
    /// Fixed truncation radius instead of `rho`.
    #[serde(default)]
    pub truncation_radius: Option<u64>,
    #[serde(default = "defaults::tol")]
    pub tol: f64,
    #[serde(default = "defaults::max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "defaults::max_sites")]
    pub max_sites: usize,
    #[serde(default = "defaults::max_box_sites")]
    pub max_box_sites: u64,
    #[serde(default = "defaults::r")]
    pub r: f64,
    #[serde(default = "defaults::ell")]
    pub ell: Vec<u64>,
    #[serde(default = "defaults::epsilon")]
    pub epsilon: f64,
    #[serde(default = "defaults::ball_mode")]
    pub ball_mode: BallModeName,
    /// Lyapunov norm of `ξ_1` for the calibrated ball; estimated when absent.
    #[serde(default)]
    pub alpha_xi1: Option<f64>,
    #[serde(default = "defaults::output")]
    pub output: PathBuf,
    /// Cases generated by `selftest`.
    #[serde(default = "defaults::selftest_cases")]
    pub selftest_cases: usize,
}

mod defaults {
    use std::path::PathBuf;

    pub fn dimension() -> usize {
        2
    }
    pub fn p() -> Vec<f64> {
        vec![0.8]
    }
    pub fn lambda() -> Vec<f64> {
        vec![1.0]
    }
    pub fn k_max() -> u32 {
        24
    }
    pub fn replicates() -> usize {
        200
    }
    pub fn box_pad() -> u64 {
        super::ANCHOR_PAD
    }
    pub fn solver_pad() -> u64 {
        8
    }
    pub fn tol() -> f64 {
        1e-10
    }
    pub fn max_iterations() -> usize {
        2_000_000
    }
    pub fn max_sites() -> usize {
        1 << 24
    }
    pub fn max_box_sites() -> u64 {
        super::DEFAULT_MAX_BOX_SITES
    }
    pub fn r() -> f64 {
        0.125
    }
    pub fn ell() -> Vec<u64> {
        vec![4, 8, 16]
    }
    pub fn epsilon() -> f64 {
        0.3
    }
    pub fn ball_mode() -> super::BallModeName {
        super::BallModeName::Calibrated
    }
    pub fn output() -> PathBuf {
        PathBuf::from("results")
    }
    pub fn selftest_cases() -> usize {
        100
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

/// Literature estimate of the bond percolation threshold.
pub fn default_p_c(dim: usize) -> Option<f64> {
    match dim {
        1 => Some(1.0 - 1e-12),
        2 => Some(0.5),
        3 => Some(0.2488),
        _ => None,
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn kind(&self) -> Result<ExperimentKind> {
        self.kind.ok_or_else(|| Error::invalid("kind", "no experiment kind given"))
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::invalid("seed", "no master seed given"))
    }

    pub fn q(&self) -> f64 {
        self.q.unwrap_or_else(|| self.p.iter().copied().fold(f64::INFINITY, f64::min))
    }

    pub fn p_c(&self) -> Option<f64> {
        self.p_c.or_else(|| default_p_c(self.dimension))
    }

    pub fn validate(&self) -> Result<()> {
        let kind = self.kind()?;
        self.seed()?;
        if !(1..=4).contains(&self.dimension) {
            return Err(Error::invalid("dimension", format!("must lie in 1..=4, got {}", self.dimension)));
        }
        if kind == ExperimentKind::Selftest {
            return Ok(());
        }
        if self.p.is_empty() {
            return Err(Error::invalid("p", "at least one value is required"));
        }
        let p_c = self.p_c().ok_or_else(|| Error::invalid("p_c", format!("no default for dimension {}", self.dimension)))?;
        if !(0.0..1.0).contains(&p_c) {
            return Err(Error::invalid("p_c", format!("must lie in [0, 1), got {p_c}")));
        }
        for &p in &self.p {
            if !(p > p_c && p <= 1.0) {
                return Err(Error::invalid("p", format!("{p} is outside (p_c, 1] with p_c = {p_c}")));
            }
        }
        let q = self.q();
        let p_min = self.p.iter().copied().fold(f64::INFINITY, f64::min);
        if !(q > p_c && q <= 1.0) {
            return Err(Error::invalid("q", format!("{q} is outside (p_c, 1] with p_c = {p_c}")));
        }
        if q > p_min {
            return Err(Error::invalid("q", format!("q = {q} exceeds the smallest p = {p_min}")));
        }
        if kind != ExperimentKind::Rate && kind != ExperimentKind::RateSweep {
            if self.lambda.is_empty() {
                return Err(Error::invalid("lambda", "at least one value is required"));
            }
            for &l in &self.lambda {
                if !(l > 0.0 && l.is_finite()) {
                    return Err(Error::invalid("lambda", format!("must be positive and finite, got {l}")));
                }
            }
        } else {
            self.lambda_grid.validate()?;
        }
        if self.replicates == 0 {
            return Err(Error::invalid("replicates", "must be at least 1"));
        }
        if self.k_max == 0 {
            return Err(Error::invalid("k_max", "must be at least 1"));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::invalid("tol", format!("must lie in (0, 1), got {}", self.tol)));
        }
        if let Some(rho) = self.rho {
            if !(rho >= 1.0 && rho.is_finite()) {
                return Err(Error::invalid("rho", format!("must be at least 1, got {rho}")));
            }
        }
        if !(self.r > 0.0 && self.r < 0.5) {
            return Err(Error::invalid("r", format!("must lie in (0, 1/2), got {}", self.r)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::invalid("epsilon", format!("must lie in (0, 1), got {}", self.epsilon)));
        }
        if self.ell.iter().any(|&l| l < 2) {
            return Err(Error::invalid("ell", "every scale must be at least 2"));
        }
        if let Some(a) = self.alpha_xi1 {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::invalid("alpha_xi1", format!("must be positive, got {a}")));
            }
        }
        let dirs = self.rational_directions()?;
        if dirs.iter().any(|d| d.dim() != self.dimension) {
            return Err(Error::invalid("directions", format!("every direction needs {} coordinates", self.dimension)));
        }
        let needs_nonzero = !matches!(kind, ExperimentKind::Rate | ExperimentKind::RateSweep);
        if needs_nonzero && dirs.iter().any(|d| d.is_origin()) {
            return Err(Error::invalid("directions", "must be nonzero"));
        }
        if needs_nonzero && dirs.iter().any(|d| d.denom != 1) {
            return Err(Error::invalid("directions", "must be integer points for this experiment"));
        }
        Ok(())
    }

    /// Configured directions, `ξ_1` by default.
    pub fn rational_directions(&self) -> Result<Vec<RationalPoint>> {
        match &self.directions {
            None => Ok(vec![RationalPoint::integer(Point::unit(self.dimension, 0))]),
            Some(ds) if ds.is_empty() => Err(Error::invalid("directions", "list is empty")),
            Some(ds) => ds.iter().map(|d| RationalPoint::from_f64s(d)).collect(),
        }
    }

    pub fn integer_directions(&self) -> Result<Vec<Point>> {
        Ok(self.rational_directions()?.into_iter().map(|d| d.numer).collect())
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            rho: self.rho,
            pad: self.solver_pad,
            radius: self.truncation_radius,
            max_iterations: self.max_iterations,
            max_sites: self.max_sites,
        }
    }

    pub fn lyapunov_params(&self) -> LyapunovParams {
        LyapunovParams {
            k_max: self.k_max,
            replicates: self.replicates,
            master_seed: self.seed.unwrap_or(0),
            solver: self.solver_options(),
            anchor_pad: self.box_pad,
            max_box_sites: self.max_box_sites,
        }
    }

    pub fn ball_mode(&self, alpha_xi1: f64) -> ExitBallMode {
        match self.ball_mode {
            BallModeName::Plain => ExitBallMode::Plain,
            BallModeName::Calibrated => ExitBallMode::Calibrated { alpha_xi1 },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(extra: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml_str(&format!("kind = \"lyapunov\"\nseed = 7\n{extra}")).unwrap()
    }

    #[test]
    fn defaults_validate() {
        let c = cfg("");
        c.validate().unwrap();
        assert_eq!(c.q(), 0.8);
        assert_eq!(c.k_max, 24);
        assert_eq!(c.integer_directions().unwrap(), vec![Point::unit(2, 0)]);
    }

    #[test]
    fn q_above_p_names_the_field() {
        let e = cfg("p = [0.7, 0.9]\nq = 0.8").validate().unwrap_err();
        assert!(matches!(e, Error::Invalid { ref field, .. } if field == "q"), "{e}");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn subcritical_p_rejected() {
        let e = cfg("p = [0.4]").validate().unwrap_err();
        assert!(matches!(e, Error::Invalid { ref field, .. } if field == "p"));
        cfg("p = [0.4]\np_c = 0.3").validate().unwrap();
    }

    #[test]
    fn missing_kind_and_seed() {
        let c = ExperimentConfig::default();
        assert!(matches!(c.validate(), Err(Error::Invalid { ref field, .. }) if field == "kind"));
        let c = ExperimentConfig {
            kind: Some(ExperimentKind::Cost),
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(Error::Invalid { ref field, .. }) if field == "seed"));
    }

    #[test]
    fn unknown_keys_and_kinds_rejected() {
        assert!(ExperimentConfig::from_toml_str("kind = \"cost\"\nseed = 1\nbogus = 3").is_err());
        assert!(ExperimentConfig::from_toml_str("kind = \"walk\"\nseed = 1").is_err());
        assert!("walk".parse::<ExperimentKind>().is_err());
        assert_eq!("rate-sweep".parse::<ExperimentKind>().unwrap(), ExperimentKind::RateSweep);
    }

    #[test]
    fn toml_round_trip() {
        let c = cfg("p = [0.7, 0.75]\ndirections = [[1.0, 1.0]]\n[lambda_grid]\npoints = 10");
        let back = ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn rational_directions_only_for_rates() {
        let c = cfg("directions = [[0.5, 0.0]]");
        assert!(c.validate().is_err());
        let mut r = c.clone();
        r.kind = Some(ExperimentKind::Rate);
        r.validate().unwrap();
        assert_eq!(r.rational_directions().unwrap()[0].denom, 2);
    }
}
