//! Wald's sequential probability ratio test, its ASN approximation and
//! digitization-cost metrics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scenario::{CovarianceScenario, ScenarioKind};

/// Safety cap used before a predicted ASN is known.
pub const DEFAULT_MAX_SAMPLES: usize = 5_000;

/// Thresholds and ASN constants for target error rates `α0`, `α1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestConfig {
    pub alpha0: f64,
    pub alpha1: f64,
    /// Lower threshold `ln(α1/(1−α0))`; crossing decides H0.
    pub l0: f64,
    /// Upper threshold `ln((1−α1)/α0)`; crossing decides H1.
    pub l1: f64,
    pub n0: f64,
    pub n1: f64,
    pub max_samples: usize,
}

impl TestConfig {
    pub fn with_max_samples(mut self, max_samples: usize) -> Result<Self> {
        if max_samples == 0 {
            return Err(Error::validation("max_samples must be >= 1"));
        }
        self.max_samples = max_samples;
        Ok(self)
    }

    /// `50·max(ASN, 100)` blocks.
    pub fn with_asn_cap(self, predicted_asn: f64) -> Result<Self> {
        let base = if predicted_asn.is_finite() {
            predicted_asn.max(100.0)
        } else {
            100.0
        };
        self.with_max_samples((50.0 * base).ceil() as usize)
    }
}

pub fn wald_design(alpha0: f64, alpha1: f64) -> Result<TestConfig> {
    for (name, a) in [("alpha0", alpha0), ("alpha1", alpha1)] {
        if !(a > 0.0 && a < 0.5) {
            return Err(Error::validation(format!(
                "{name} must lie in (0, 0.5), got {a}"
            )));
        }
    }
    let l0 = (alpha1 / (1.0 - alpha0)).ln();
    let l1 = ((1.0 - alpha1) / alpha0).ln();
    Ok(TestConfig {
        alpha0,
        alpha1,
        l0,
        l1,
        n0: (1.0 - alpha0) * l0 + alpha0 * l1,
        n1: alpha1 * l0 + (1.0 - alpha1) * l1,
        max_samples: DEFAULT_MAX_SAMPLES,
    })
}

/// `(N0/μ0, N1/μ1)`.
pub fn predict_asn(config: &TestConfig, mu0: f64, mu1: f64) -> Result<(f64, f64)> {
    if !(mu0 < 0.0 && mu1 > 0.0) {
        return Err(Error::Degenerate(format!(
            "per-block means must satisfy mu0 < 0 < mu1, got ({mu0}, {mu1})"
        )));
    }
    Ok((config.n0 / mu0, config.n1 / mu1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Decision {
    H0,
    H1,
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub decision: Decision,
    /// Number of blocks consumed.
    pub n_d: usize,
    pub final_sum: f64,
}

/// Running state of one sequential test.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SprtState {
    pub n: usize,
    pub sum: f64,
}

impl SprtState {
    /// Adds one block increment and reports a decision once a threshold is crossed.
    pub fn ingest(&mut self, config: &TestConfig, increment: f64) -> Option<Decision> {
        self.n += 1;
        self.sum += increment;
        if self.sum >= config.l1 {
            Some(Decision::H1)
        } else if self.sum <= config.l0 {
            Some(Decision::H0)
        } else {
            None
        }
    }
}

/// Runs the test on a stream of per-block (A)LLR increments. A stream that
/// ends early, or reaching `max_samples`, yields `Truncated`.
pub fn sprt_run<I>(config: &TestConfig, stream: I) -> TrialOutcome
where
    I: IntoIterator<Item = f64>,
{
    let mut state = SprtState::default();
    for increment in stream.into_iter().take(config.max_samples) {
        if let Some(decision) = state.ingest(config, increment) {
            return TrialOutcome {
                decision,
                n_d: state.n,
                final_sum: state.sum,
            };
        }
    }
    TrialOutcome {
        decision: Decision::Truncated,
        n_d: state.n,
        final_sum: state.sum,
    }
}

/// `SC^(b)(M, K) = M·K·(2^b − 1)` comparator operations per block.
pub fn sampling_cost(channels: usize, samples: f64, bits: u32) -> f64 {
    channels as f64 * samples * ((1u64 << bits) - 1) as f64
}

/// Latency and digitization-cost comparison of a binary receiver against
/// an ideal reference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyReport {
    /// `μ̃_i(ξ*) / μ_i` (against the benchmark array when one is given).
    pub chi: [f64; 2],
    /// Efficiency a binary receiver must exceed to beat `b` bits.
    pub threshold: f64,
    pub bits: u32,
    pub benchmark_antennas: Option<usize>,
    pub sc_binary: f64,
    pub sc_reference: f64,
    pub asn_binary: [f64; 2],
    pub asn_reference: [f64; 2],
    pub asc_binary: [f64; 2],
    pub asc_reference: [f64; 2],
}

impl EfficiencyReport {
    pub fn binary_superior(&self, hypothesis: usize) -> bool {
        self.chi[hypothesis] > self.threshold
    }
}

/// Efficiency threshold `χ^(b)` (or `χ^(b,m)` with a benchmark array of `m`
/// antennas) for a binary receiver on `scenario`.
pub fn efficiency_threshold(
    scenario: &CovarianceScenario,
    bits: u32,
    benchmark_antennas: Option<usize>,
) -> Result<f64> {
    if bits == 0 || bits > 32 {
        return Err(Error::validation(format!(
            "bit depth must lie in 1..=32, got {bits}"
        )));
    }
    let levels = ((1u64 << bits) - 1) as f64;
    let kappa = scenario.kappa();
    Ok(match (scenario.kind(), benchmark_antennas) {
        (ScenarioKind::Superheterodyne, None) => kappa / (2.0 * levels),
        (ScenarioKind::HomodyneArray { antennas, .. }, Some(m)) => {
            if m == 0 {
                return Err(Error::validation(
                    "benchmark array needs at least one antenna",
                ));
            }
            antennas as f64 / m as f64 * kappa / levels
        }
        (ScenarioKind::HomodyneArray { .. } | ScenarioKind::Sampling, None) => kappa / levels,
        (_, Some(_)) => {
            return Err(Error::validation(
                "benchmark antennas only apply to the homodyne array scenario",
            ))
        }
    })
}

/// `χ_i`, thresholds and costs. `mu_exact` holds the ideal reference means
/// (of the `m`-antenna benchmark when `benchmark_antennas` is set).
pub fn efficiency_metrics(
    mu_tilde: (f64, f64),
    mu_exact: (f64, f64),
    scenario: &CovarianceScenario,
    bits: u32,
    benchmark_antennas: Option<usize>,
    test: &TestConfig,
) -> Result<EfficiencyReport> {
    if mu_exact.0 == 0.0 || mu_exact.1 == 0.0 {
        return Err(Error::Degenerate("ideal reference mean is zero".into()));
    }
    let threshold = efficiency_threshold(scenario, bits, benchmark_antennas)?;
    let m = scenario.channels();
    let sc_binary = sampling_cost(m, scenario.samples() as f64, 1);
    // The reference samples at the source Nyquist rate over the same window.
    let reference_samples = match scenario.kind() {
        ScenarioKind::Superheterodyne => 2.0 * scenario.k0() as f64,
        _ => scenario.k0() as f64,
    };
    let reference_channels = benchmark_antennas.map_or(m, |a| 2 * a);
    let sc_reference = sampling_cost(reference_channels, reference_samples, bits);
    let ratio = |num: f64, den: f64| if den == 0.0 { f64::INFINITY } else { num / den };
    let asn_binary = [ratio(test.n0, mu_tilde.0), ratio(test.n1, mu_tilde.1)];
    let asn_reference = [test.n0 / mu_exact.0, test.n1 / mu_exact.1];
    Ok(EfficiencyReport {
        chi: [mu_tilde.0 / mu_exact.0, mu_tilde.1 / mu_exact.1],
        threshold,
        bits,
        benchmark_antennas,
        sc_binary,
        sc_reference,
        asn_binary,
        asn_reference,
        asc_binary: asn_binary.map(|a| a * sc_binary),
        asc_reference: asn_reference.map(|a| a * sc_reference),
    })
}
