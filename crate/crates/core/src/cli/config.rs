//! Declarative experiment file (TOML).
//!
//! ```toml
//! command = "simulate"          # accuracy | efficiency | simulate | predict
//! output = "out/table1"         # directory, optional
//! snr_scale = "amplitude"       # dB convention, optional
//!
//! [scenario]
//! kind = "superheterodyne"      # sampling | superheterodyne | homodyne_array
//! k0 = 5
//! kappa = 5.92
//!
//! [hypothesis]
//! center_db = -9.0              # or theta0_db / theta1_db
//! offset_db = 1.5
//!
//! [test]
//! trials = 2000
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::expfam::HyperplaneMode;
use crate::montecarlo::Frontend;
use crate::scenario::{CovarianceScenario, ScenarioKind, SnrScale};
use crate::sequential::{wald_design, TestConfig};
use crate::tuner::TunerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Accuracy,
    Efficiency,
    Simulate,
    Predict,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Accuracy => "accuracy",
            Command::Efficiency => "efficiency",
            Command::Simulate => "simulate",
            Command::Predict => "predict",
        }
    }

    fn legal_sweeps(self) -> &'static [SweepVariable] {
        match self {
            Command::Accuracy => &[SweepVariable::Theta1Db, SweepVariable::CenterDb],
            Command::Efficiency => &[
                SweepVariable::Kappa,
                SweepVariable::Antennas,
                SweepVariable::CenterDb,
            ],
            Command::Simulate | Command::Predict => &[],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub snr_scale: SnrScale,
    pub scenario: CovarianceScenario,
    pub hypothesis: HypothesisBlock,
    #[serde(default)]
    pub sweep: Option<SweepBlock>,
    #[serde(default)]
    pub test: TestBlock,
    #[serde(default)]
    pub efficiency: EfficiencyBlock,
}

/// Either `center_db ± offset_db` or explicit `theta0_db` / `theta1_db`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesisBlock {
    pub center_db: Option<f64>,
    pub offset_db: Option<f64>,
    pub theta0_db: Option<f64>,
    pub theta1_db: Option<f64>,
}

impl HypothesisBlock {
    /// `(θ0, θ1)` in dB, optionally overriding one sweep variable.
    pub fn resolve(&self, sweep: Option<(SweepVariable, f64)>) -> Result<(f64, f64)> {
        match sweep {
            Some((SweepVariable::Theta1Db, v)) => {
                let t0 = self.theta0_db.ok_or_else(|| {
                    Error::Config("a theta1_db sweep needs hypothesis.theta0_db".into())
                })?;
                Ok((t0, v))
            }
            Some((SweepVariable::CenterDb, c)) => {
                let d = self.offset_db.ok_or_else(|| {
                    Error::Config("a center_db sweep needs hypothesis.offset_db".into())
                })?;
                Ok((c - d, c + d))
            }
            _ => match (
                self.center_db,
                self.offset_db,
                self.theta0_db,
                self.theta1_db,
            ) {
                (Some(c), Some(d), None, None) => Ok((c - d, c + d)),
                (None, None, Some(t0), Some(t1)) => Ok((t0, t1)),
                _ => Err(Error::Config(
                    "hypothesis needs either center_db and offset_db or theta0_db and theta1_db"
                        .into(),
                )),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    Theta1Db,
    CenterDb,
    Kappa,
    Antennas,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::Theta1Db => "theta1_db",
            SweepVariable::CenterDb => "center_db",
            SweepVariable::Kappa => "kappa",
            SweepVariable::Antennas => "antennas",
        }
    }
}

/// `steps` evenly spaced values from `start` to `stop` inclusive.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub variable: SweepVariable,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl SweepBlock {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.steps == 0 || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(Error::validation(
                "sweep needs finite bounds and steps >= 1",
            ));
        }
        if self.stop < self.start {
            return Err(Error::validation("sweep stop must not be below start"));
        }
        if self.steps == 1 {
            return Ok(vec![self.start]);
        }
        let h = (self.stop - self.start) / (self.steps - 1) as f64;
        let mut values: Vec<f64> = (0..self.steps).map(|i| self.start + h * i as f64).collect();
        if self.variable == SweepVariable::Antennas {
            values = values.iter().map(|v| v.round()).collect();
            values.dedup();
            if values[0] < 1.0 {
                return Err(Error::validation("antenna sweep must start at >= 1"));
            }
        }
        Ok(values)
    }
}

fn default_alpha() -> f64 {
    0.001
}
fn default_rho() -> f64 {
    2.0 / 3.0
}
fn default_grid() -> usize {
    101
}
fn default_refine() -> f64 {
    1e-4
}
fn default_trials() -> usize {
    2000
}
fn default_seed() -> u64 {
    1
}
fn default_frontends() -> Vec<Frontend> {
    vec![Frontend::OneBit, Frontend::InfiniteBit]
}
fn default_mode() -> HyperplaneMode {
    HyperplaneMode::Difference
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestBlock {
    #[serde(default = "default_alpha")]
    pub alpha0: f64,
    #[serde(default = "default_alpha")]
    pub alpha1: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_grid")]
    pub grid_points: usize,
    #[serde(default = "default_refine")]
    pub refine_tol: f64,
    #[serde(default = "default_mode")]
    pub hyperplane: HyperplaneMode,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    #[serde(default)]
    pub max_samples: Option<usize>,
    #[serde(default = "default_frontends")]
    pub frontends: Vec<Frontend>,
    #[serde(default)]
    pub workers: usize,
}

impl Default for TestBlock {
    fn default() -> Self {
        TestBlock {
            alpha0: default_alpha(),
            alpha1: default_alpha(),
            rho: default_rho(),
            grid_points: default_grid(),
            refine_tol: default_refine(),
            hyperplane: default_mode(),
            trials: default_trials(),
            master_seed: default_seed(),
            max_samples: None,
            frontends: default_frontends(),
            workers: 0,
        }
    }
}

impl TestBlock {
    pub fn wald(&self) -> Result<TestConfig> {
        wald_design(self.alpha0, self.alpha1)
    }

    pub fn tuner(&self) -> Result<TunerConfig> {
        let t = TunerConfig {
            rho: self.rho,
            grid_points: self.grid_points,
            refine_tol: self.refine_tol,
            mode: self.hyperplane,
        };
        t.validate()?;
        Ok(t)
    }
}

fn default_bits() -> Vec<u32> {
    vec![2, 3, 4]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EfficiencyBlock {
    #[serde(default = "default_bits")]
    pub bits: Vec<u32>,
    /// Antenna counts of ideal benchmark arrays (homodyne only).
    #[serde(default)]
    pub benchmark_antennas: Vec<usize>,
}

impl Default for EfficiencyBlock {
    fn default() -> Self {
        EfficiencyBlock {
            bits: default_bits(),
            benchmark_antennas: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.test.wald()?;
        self.test.tuner()?;
        match (&self.sweep, self.command.legal_sweeps()) {
            (Some(s), legal) if !legal.contains(&s.variable) => {
                return Err(Error::Config(format!(
                    "sweep variable `{}` is not valid for `{}`",
                    s.variable.name(),
                    self.command.name()
                )))
            }
            (None, legal) if !legal.is_empty() => {
                return Err(Error::Config(format!(
                    "`{}` needs a [sweep] block",
                    self.command.name()
                )))
            }
            (Some(s), _) => {
                s.values()?;
            }
            _ => {}
        }
        if let Some(s) = &self.sweep {
            let homodyne = matches!(self.scenario.kind(), ScenarioKind::HomodyneArray { .. });
            if s.variable == SweepVariable::Antennas && !homodyne {
                return Err(Error::Config(
                    "an antenna sweep needs a homodyne_array scenario".into(),
                ));
            }
        }
        if !self.efficiency.benchmark_antennas.is_empty()
            && !matches!(self.scenario.kind(), ScenarioKind::HomodyneArray { .. })
        {
            return Err(Error::Config(
                "benchmark_antennas only apply to homodyne_array scenarios".into(),
            ));
        }
        if self.test.frontends.is_empty() {
            return Err(Error::Config("test.frontends must not be empty".into()));
        }
        if self.command == Command::Simulate && self.test.trials < 100 {
            return Err(Error::Config("simulate needs trials >= 100".into()));
        }
        // sweeps resolve their own pair per point
        if self.sweep.is_none() {
            self.hypothesis.resolve(None)?;
        }
        Ok(())
    }
}
