//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use lqg_latent_core::corel::{CorelConfig, Threshold, DEFAULT_THRESHOLD_MULTIPLIER};
use lqg_latent_core::linalg::DEFAULT_REL_TOL;
use lqg_latent_core::quadreg::{QuadRegOptions, DEFAULT_FEATURE_CAP};
use lqg_latent_core::system::{random_system, FixtureMode, LqgSystem, RandomSystemSpec};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, HarnessResult};
use crate::formats::read_system_json;

/// Parameters of a randomly generated fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomFixture {
    pub state_dim: usize,
    pub obs_dim: usize,
    pub control_dim: usize,
    pub horizon: usize,
    #[serde(default = "defaults::rho")]
    pub rho: f64,
    #[serde(default = "defaults::noise")]
    pub process_noise: f64,
    #[serde(default = "defaults::noise")]
    pub obs_noise: f64,
    #[serde(default = "defaults::one")]
    pub init_scale: f64,
    #[serde(default = "defaults::one")]
    pub cost_scale: f64,
    #[serde(default = "defaults::half")]
    pub q_floor: f64,
    #[serde(default = "defaults::half")]
    pub r_floor: f64,
    #[serde(default = "defaults::half")]
    pub control_cost_scale: f64,
    #[serde(default)]
    pub interior_cost_rank: Option<usize>,
    #[serde(default)]
    pub rank_deficient_early: bool,
    /// Bound on the condition number of every random factor; Gaussian factors when absent.
    #[serde(default)]
    pub max_condition: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl RandomFixture {
    pub fn to_spec(&self, ell: usize) -> RandomSystemSpec {
        RandomSystemSpec {
            state_dim: self.state_dim,
            obs_dim: self.obs_dim,
            control_dim: self.control_dim,
            horizon: self.horizon,
            rho: self.rho,
            process_noise: self.process_noise,
            obs_noise: self.obs_noise,
            init_scale: self.init_scale,
            cost_scale: self.cost_scale,
            q_floor: self.q_floor,
            r_floor: self.r_floor,
            control_cost_scale: self.control_cost_scale,
            ell,
            interior_cost_rank: self.interior_cost_rank,
            mode: if self.rank_deficient_early {
                FixtureMode::RankDeficientEarly
            } else {
                FixtureMode::Generic
            },
            max_condition: self.max_condition,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FixtureSource {
    Random(RandomFixture),
    /// Path to a system JSON file, relative to the config file.
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ThresholdConfig {
    /// Multiplier of the sample-size dependent default threshold.
    Auto(f64),
    Fixed(f64),
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig::Auto(DEFAULT_THRESHOLD_MULTIPLIER)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Toggles {
    #[serde(default = "defaults::yes")]
    pub corel: bool,
    #[serde(default = "defaults::yes")]
    pub sysid: bool,
    #[serde(default = "defaults::yes")]
    pub eval: bool,
    #[serde(default = "defaults::yes")]
    pub e2e: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Self {
            corel: true,
            sysid: true,
            eval: true,
            e2e: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    #[serde(default = "defaults::one")]
    pub alpha: f64,
    #[serde(default = "defaults::check_rho")]
    pub rho: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            rho: defaults::check_rho(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub tag: String,
    pub fixture: FixtureSource,
    #[serde(default = "defaults::one")]
    pub sigma_u: f64,
    pub n_grid: Vec<usize>,
    pub seeds: Vec<u64>,
    pub ell: usize,
    pub m: usize,
    /// Latent dimension; defaults to the fixture's state dimension.
    #[serde(default)]
    pub latent_dim: Option<usize>,
    #[serde(default)]
    pub threshold: ThresholdConfig,
    #[serde(default = "defaults::rel_tol")]
    pub rel_tol: f64,
    #[serde(default)]
    pub ridge: f64,
    #[serde(default = "defaults::feature_cap")]
    pub feature_cap: usize,
    #[serde(default = "defaults::n_mc")]
    pub n_mc: usize,
    #[serde(default = "defaults::out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub toggles: Toggles,
    #[serde(default)]
    pub check: CheckConfig,
    /// Directory relative paths are resolved against (the config's directory).
    #[serde(skip)]
    pub base_dir: PathBuf,
}

mod defaults {
    use std::path::PathBuf;

    pub fn rho() -> f64 {
        0.8
    }
    pub fn noise() -> f64 {
        0.3
    }
    pub fn one() -> f64 {
        1.0
    }
    pub fn half() -> f64 {
        0.5
    }
    pub fn yes() -> bool {
        true
    }
    pub fn check_rho() -> f64 {
        0.9
    }
    pub fn rel_tol() -> f64 {
        super::DEFAULT_REL_TOL
    }
    pub fn feature_cap() -> usize {
        super::DEFAULT_FEATURE_CAP
    }
    pub fn n_mc() -> usize {
        2000
    }
    pub fn out_dir() -> PathBuf {
        PathBuf::from("out")
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> HarnessResult<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| HarnessError::Validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> HarnessResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn validate(&self) -> HarnessResult<()> {
        let bad = |msg: &str| Err(HarnessError::Validation(msg.to_string()));
        if self.tag.is_empty() || self.tag.contains([',', '\n', '"']) {
            return bad("tag must be nonempty and free of commas, quotes and newlines");
        }
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("n_grid must be nonempty and strictly increasing");
        }
        if self.n_grid[0] < 1 {
            return bad("n_grid entries must be positive");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if !(self.sigma_u > 0.0) {
            return bad("sigma_u must be positive");
        }
        if self.ell < 1 || self.m < 1 {
            return bad("ell and m must be at least 1");
        }
        if self.toggles.e2e && self.n_mc < 100 {
            return bad("n_mc must be at least 100 when end-to-end evaluation is enabled");
        }
        if !(self.ridge >= 0.0) {
            return bad("ridge must be nonnegative");
        }
        match self.threshold {
            ThresholdConfig::Auto(c) | ThresholdConfig::Fixed(c) if !(c >= 0.0) || !c.is_finite() => {
                return bad("threshold must be finite and nonnegative");
            }
            _ => {}
        }
        Ok(())
    }

    /// Builds or loads the ground-truth system.
    pub fn system(&self) -> HarnessResult<LqgSystem> {
        match &self.fixture {
            FixtureSource::Random(f) => Ok(random_system(&f.to_spec(self.ell), f.seed)?),
            FixtureSource::File(path) => read_system_json(&self.base_dir.join(path)),
        }
    }

    pub fn corel_config(&self, state_dim: usize) -> CorelConfig {
        CorelConfig {
            latent_dim: self.latent_dim.unwrap_or(state_dim),
            ell: self.ell,
            m: self.m,
            threshold: match self.threshold {
                ThresholdConfig::Auto(multiplier) => Threshold::Auto { multiplier },
                ThresholdConfig::Fixed(theta) => Threshold::Fixed(theta),
            },
            regression: self.regression_options(),
        }
    }

    pub fn regression_options(&self) -> QuadRegOptions {
        QuadRegOptions {
            rel_tol: self.rel_tol,
            ridge: self.ridge,
            feature_cap: self.feature_cap,
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.base_dir.join(&self.out_dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "tag": "fx",
        "fixture": {"random": {"state_dim": 2, "obs_dim": 2, "control_dim": 2, "horizon": 3}},
        "n_grid": [64, 128],
        "seeds": [1],
        "ell": 1,
        "m": 2
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.threshold, ThresholdConfig::Auto(0.5));
        assert!(cfg.toggles.e2e);
        assert_eq!(cfg.n_mc, 2000);
        assert_eq!(cfg.system().unwrap().horizon(), 3);
    }

    #[test]
    fn rejects_non_increasing_grid_and_unknown_fields() {
        let bad = MINIMAL.replace("[64, 128]", "[128, 64]");
        assert!(ExperimentConfig::from_json(&bad).is_err());
        let bad = MINIMAL.replace("\"m\": 2", "\"m\": 2, \"bogus\": 1");
        assert!(ExperimentConfig::from_json(&bad).is_err());
        let bad = MINIMAL.replace("[1]", "[]");
        assert!(ExperimentConfig::from_json(&bad).is_err());
    }
}
