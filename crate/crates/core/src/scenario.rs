//! Front-end covariance models `R_y(θ)` for band-limited noise sources.
//!
//! Every model is affine in the linear SNR: `R_y(θ) = N + θ·S`, with `N`
//! the receiver noise covariance and `S` the source pattern.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalized sinc, `sin(πx)/(πx)` with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Conversion between decibel and linear SNR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrScale {
    /// `θ = 10^(dB/20)`.
    #[default]
    Amplitude,
    /// `θ = 10^(dB/10)`.
    Power,
}

impl SnrScale {
    pub fn to_linear(self, db: f64) -> f64 {
        match self {
            SnrScale::Amplitude => 10f64.powf(db / 20.0),
            SnrScale::Power => 10f64.powf(db / 10.0),
        }
    }

    pub fn to_db(self, linear: f64) -> f64 {
        match self {
            SnrScale::Amplitude => 20.0 * linear.log10(),
            SnrScale::Power => 10.0 * linear.log10(),
        }
    }
}

/// `[Σ]_ij = sinc(|i − j| / κ)`.
pub fn sinc_covariance(k: usize, kappa: f64) -> Result<DMatrix<f64>> {
    check_samples(k)?;
    check_kappa(kappa, 1.0)?;
    Ok(DMatrix::from_fn(k, k, |i, j| {
        sinc(i.abs_diff(j) as f64 / kappa)
    }))
}

/// `[W]_ij = cos(π/2·(i − j))`: intermediate-frequency mixing at a quarter of
/// the sampling rate.
pub fn mixing_matrix(k: usize) -> Result<DMatrix<f64>> {
    check_samples(k)?;
    Ok(DMatrix::from_fn(k, k, |i, j| {
        // exact values; cos of multiples of π/2 cycles through 1, 0, -1, 0
        match (i as i64 - j as i64).rem_euclid(4) {
            0 => 1.0,
            2 => -1.0,
            _ => 0.0,
        }
    }))
}

/// `(θ/κ)·(Σ(κ) ⊙ pattern) + I`.
pub fn patterned_covariance(
    theta: f64,
    kappa: f64,
    pattern: &DMatrix<f64>,
) -> Result<SpaceTimeCovariance> {
    check_theta(theta)?;
    let k = pattern.nrows();
    if !pattern.is_square() {
        return Err(Error::validation("covariance pattern must be square"));
    }
    let sigma = sinc_covariance(k, kappa)?;
    let matrix = sigma.component_mul(pattern) * (theta / kappa) + DMatrix::identity(k, k);
    SpaceTimeCovariance::new(matrix, 1, k)
}

/// `R_y = (θ/κ)·Σ(κ) + I`.
pub fn sampling_covariance(theta: f64, k: usize, kappa: f64) -> Result<SpaceTimeCovariance> {
    check_samples(k)?;
    patterned_covariance(theta, kappa, &DMatrix::from_element(k, k, 1.0))
}

/// `R_y = (θ/κ)·(Σ(κ) ⊙ 2W) + I`; needs `κ ≥ 2`.
pub fn superheterodyne_covariance(theta: f64, k: usize, kappa: f64) -> Result<SpaceTimeCovariance> {
    check_kappa(kappa, 2.0)?;
    patterned_covariance(theta, kappa, &(mixing_matrix(k)? * 2.0))
}

/// In-phase rows `[cos ψ_m, sin ψ_m]` stacked over quadrature rows
/// `[−sin ψ_m, cos ψ_m]`, with `ψ_m = (m − 1)·π·sin φ`.
pub fn steering_matrix(antennas: usize, phi_deg: f64) -> Result<DMatrix<f64>> {
    check_antennas(antennas, phi_deg)?;
    let s = PI * phi_deg.to_radians().sin();
    let mut a = DMatrix::zeros(2 * antennas, 2);
    for m in 0..antennas {
        let (sin, cos) = (m as f64 * s).sin_cos();
        a[(m, 0)] = cos;
        a[(m, 1)] = sin;
        a[(antennas + m, 0)] = -sin;
        a[(antennas + m, 1)] = cos;
    }
    Ok(a)
}

/// `R_y = (θ·AAᵀ + I) ⊗ Σ(κ)`, of size `2M_A·K`.
pub fn homodyne_covariance(
    theta: f64,
    antennas: usize,
    k: usize,
    kappa: f64,
    phi_deg: f64,
) -> Result<SpaceTimeCovariance> {
    check_theta(theta)?;
    let a = steering_matrix(antennas, phi_deg)?;
    let sigma = sinc_covariance(k, kappa)?;
    let m = 2 * antennas;
    let spatial = &a * a.transpose() * theta + DMatrix::identity(m, m);
    SpaceTimeCovariance::new(spatial.kronecker(&sigma), m, k)
}

/// Symmetric space-time covariance of one observation block, `M` channels by
/// `K` samples (channel-major).
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeCovariance {
    matrix: DMatrix<f64>,
    channels: usize,
    samples: usize,
}

impl SpaceTimeCovariance {
    pub fn new(matrix: DMatrix<f64>, channels: usize, samples: usize) -> Result<Self> {
        if matrix.nrows() != channels * samples || !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                context: "space-time covariance",
                expected: channels * samples,
                actual: matrix.nrows(),
            });
        }
        Ok(SpaceTimeCovariance {
            matrix,
            channels,
            samples,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Which receiver front-end produces the block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Sampling,
    Superheterodyne,
    HomodyneArray { antennas: usize, phi_deg: f64 },
}

/// Validated scenario definition. `K = round(κ·K0)` unless overridden.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioSpec", into = "ScenarioSpec")]
pub struct CovarianceScenario {
    kind: ScenarioKind,
    k0: usize,
    kappa: f64,
    samples_override: Option<usize>,
}

impl CovarianceScenario {
    pub fn new(kind: ScenarioKind, k0: usize, kappa: f64) -> Result<Self> {
        if k0 == 0 {
            return Err(Error::validation("K0 must be >= 1"));
        }
        match kind {
            ScenarioKind::Superheterodyne => check_kappa(kappa, 2.0)?,
            ScenarioKind::HomodyneArray { antennas, phi_deg } => {
                check_kappa(kappa, 1.0)?;
                check_antennas(antennas, phi_deg)?;
            }
            ScenarioKind::Sampling => check_kappa(kappa, 1.0)?,
        }
        let scenario = CovarianceScenario {
            kind,
            k0,
            kappa,
            samples_override: None,
        };
        check_samples(scenario.samples())?;
        Ok(scenario)
    }

    pub fn sampling(k0: usize, kappa: f64) -> Result<Self> {
        Self::new(ScenarioKind::Sampling, k0, kappa)
    }

    pub fn superheterodyne(k0: usize, kappa: f64) -> Result<Self> {
        Self::new(ScenarioKind::Superheterodyne, k0, kappa)
    }

    pub fn homodyne(antennas: usize, phi_deg: f64, k0: usize, kappa: f64) -> Result<Self> {
        Self::new(ScenarioKind::HomodyneArray { antennas, phi_deg }, k0, kappa)
    }

    /// Fixes the block length instead of deriving it from `κ·K0`.
    pub fn with_samples(mut self, samples: usize) -> Result<Self> {
        check_samples(samples)?;
        self.samples_override = Some(samples);
        Ok(self)
    }

    pub fn kind(&self) -> ScenarioKind {
        self.kind
    }

    pub fn k0(&self) -> usize {
        self.k0
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// `K`, samples per channel and block.
    pub fn samples(&self) -> usize {
        self.samples_override
            .unwrap_or_else(|| (self.kappa * self.k0 as f64).round() as usize)
    }

    /// `M`, number of receiver outputs.
    pub fn channels(&self) -> usize {
        match self.kind {
            ScenarioKind::HomodyneArray { antennas, .. } => 2 * antennas,
            _ => 1,
        }
    }

    pub fn antennas(&self) -> Option<usize> {
        match self.kind {
            ScenarioKind::HomodyneArray { antennas, .. } => Some(antennas),
            _ => None,
        }
    }

    /// `MK`, the block dimension.
    pub fn dim(&self) -> usize {
        self.channels() * self.samples()
    }

    pub fn covariance(&self, theta: f64) -> Result<SpaceTimeCovariance> {
        let k = self.samples();
        match self.kind {
            ScenarioKind::Sampling => sampling_covariance(theta, k, self.kappa),
            ScenarioKind::Superheterodyne => superheterodyne_covariance(theta, k, self.kappa),
            ScenarioKind::HomodyneArray { antennas, phi_deg } => {
                homodyne_covariance(theta, antennas, k, self.kappa, phi_deg)
            }
        }
    }

    /// Splits `R_y(θ) = noise + θ·source` into its two constant parts.
    pub fn affine(&self) -> Result<AffineCovariance> {
        let noise = self.covariance(0.0)?.into_matrix();
        let source = self.covariance(1.0)?.into_matrix() - &noise;
        Ok(AffineCovariance { noise, source })
    }
}

/// `R(θ) = noise + θ·source`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineCovariance {
    pub noise: DMatrix<f64>,
    pub source: DMatrix<f64>,
}

impl AffineCovariance {
    pub fn at(&self, theta: f64) -> DMatrix<f64> {
        &self.noise + &self.source * theta
    }

    pub fn dim(&self) -> usize {
        self.noise.nrows()
    }
}

/// Flat on-disk form of a scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSpec {
    kind: SpecKind,
    k0: usize,
    kappa: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    antennas: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phi_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum SpecKind {
    Sampling,
    Superheterodyne,
    HomodyneArray,
}

impl TryFrom<ScenarioSpec> for CovarianceScenario {
    type Error = Error;

    fn try_from(spec: ScenarioSpec) -> Result<Self> {
        let kind = match spec.kind {
            SpecKind::Sampling => ScenarioKind::Sampling,
            SpecKind::Superheterodyne => ScenarioKind::Superheterodyne,
            SpecKind::HomodyneArray => ScenarioKind::HomodyneArray {
                antennas: spec
                    .antennas
                    .ok_or_else(|| Error::Config("homodyne_array needs `antennas`".into()))?,
                phi_deg: spec.phi_deg.unwrap_or(0.0),
            },
        };
        let scenario = CovarianceScenario::new(kind, spec.k0, spec.kappa)?;
        match spec.samples {
            Some(k) => scenario.with_samples(k),
            None => Ok(scenario),
        }
    }
}

impl From<CovarianceScenario> for ScenarioSpec {
    fn from(s: CovarianceScenario) -> Self {
        let (kind, antennas, phi_deg) = match s.kind {
            ScenarioKind::Sampling => (SpecKind::Sampling, None, None),
            ScenarioKind::Superheterodyne => (SpecKind::Superheterodyne, None, None),
            ScenarioKind::HomodyneArray { antennas, phi_deg } => {
                (SpecKind::HomodyneArray, Some(antennas), Some(phi_deg))
            }
        };
        ScenarioSpec {
            kind,
            k0: s.k0,
            kappa: s.kappa,
            antennas,
            phi_deg,
            samples: s.samples_override,
        }
    }
}

fn check_samples(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::validation("block length K must be >= 1"));
    }
    Ok(())
}

fn check_kappa(kappa: f64, min: f64) -> Result<()> {
    if !kappa.is_finite() || kappa < min {
        return Err(Error::Scenario(format!(
            "oversampling factor must be >= {min}, got {kappa}"
        )));
    }
    Ok(())
}

fn check_theta(theta: f64) -> Result<()> {
    if !theta.is_finite() || theta < 0.0 {
        return Err(Error::validation(format!(
            "linear SNR must be finite and >= 0, got {theta}"
        )));
    }
    Ok(())
}

fn check_antennas(antennas: usize, phi_deg: f64) -> Result<()> {
    if antennas == 0 {
        return Err(Error::Scenario("array needs at least one antenna".into()));
    }
    if !(phi_deg > -90.0 && phi_deg < 90.0) {
        return Err(Error::Scenario(format!(
            "arrival angle must lie in (-90, 90) degrees, got {phi_deg}"
        )));
    }
    Ok(())
}
