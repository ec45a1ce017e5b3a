//! Reproducible Monte-Carlo campaigns of sequential tests on simulated
//! receiver blocks.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binary::BinaryPairwiseModel;
use crate::error::{check_len, Error, Result};
use crate::expfam::{AllrPlan, HypothesisPair, ParameterPoint, PreparedPair};
use crate::gaussian::{gaussian_llr_means, ExactGaussianLlr};
use crate::linalg::SpdFactor;
use crate::scenario::{CovarianceScenario, SnrScale};
use crate::sequential::{predict_asn, Decision, SprtState, TestConfig, TrialOutcome};
use crate::tuner::{tune_prepared, TunerConfig};

/// Independent generator for trial `index`: the master seed keys the
/// ChaCha stream and the trial index selects the stream number.
pub fn trial_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Draws `y = L·w`, `w ~ N(0, I)`, for a fixed covariance `R = LLᵀ`.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    /// Lower-triangular factor stored row by row (`i(i+1)/2 + j`).
    lower: Vec<f64>,
    dim: usize,
}

impl GaussianSampler {
    pub fn new(covariance: &DMatrix<f64>) -> Result<Self> {
        Self::scaled(covariance, 1.0)
    }

    /// Sampler for `gain · covariance`.
    pub fn scaled(covariance: &DMatrix<f64>, gain: f64) -> Result<Self> {
        if !(gain > 0.0) || !gain.is_finite() {
            return Err(Error::validation(format!(
                "input gain must be > 0, got {gain}"
            )));
        }
        let l = SpdFactor::new(covariance)?.lower();
        let dim = l.nrows();
        let amplitude = gain.sqrt();
        let mut lower = Vec::with_capacity(dim * (dim + 1) / 2);
        for i in 0..dim {
            for j in 0..=i {
                lower.push(amplitude * l[(i, j)]);
            }
        }
        Ok(GaussianSampler { lower, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, white: &mut [f64], out: &mut [f64]) {
        for w in white.iter_mut() {
            *w = rng.sample(StandardNormal);
        }
        let mut offset = 0;
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.lower[offset..offset + i + 1];
            *o = row.iter().zip(white.iter()).map(|(a, b)| a * b).sum();
            offset += i + 1;
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut white = vec![0.0; self.dim];
        let mut out = vec![0.0; self.dim];
        self.sample_into(rng, &mut white, &mut out);
        out
    }
}

/// Per-block test statistic.
#[derive(Debug, Clone)]
pub enum Detector {
    /// ALLR on hard-limited blocks: `Σ_{i<j} b_ij z_i z_j − bᵀμ_ref`.
    PairwiseAllr {
        weights: Vec<f64>,
        offset: f64,
        dim: usize,
    },
    /// Exact LLR on unquantized blocks.
    ExactGaussian(ExactGaussianLlr),
}

impl Detector {
    /// Wraps a design for [`BinaryPairwiseModel`] (pairs in row-major order).
    pub fn pairwise(plan: &AllrPlan, dim: usize) -> Result<Self> {
        check_len(
            "pairwise ALLR weights",
            dim * dim.saturating_sub(1) / 2,
            plan.b.len(),
        )?;
        Ok(Detector::PairwiseAllr {
            weights: plan.b.iter().copied().collect(),
            offset: plan.offset(),
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Detector::PairwiseAllr { dim, .. } => *dim,
            Detector::ExactGaussian(llr) => llr.dim(),
        }
    }

    /// Statistic for one unquantized block `y`.
    pub fn increment(&self, y: &[f64], signs: &mut Vec<f64>) -> Result<f64> {
        match self {
            Detector::PairwiseAllr {
                weights, offset, ..
            } => {
                signs.clear();
                for &v in y {
                    if !v.is_finite() {
                        return Err(Error::NonFinite("hard-limiter input".into()));
                    }
                    signs.push(if v >= 0.0 { 1.0 } else { -1.0 });
                }
                Ok(pairwise_form(weights, signs) - offset)
            }
            Detector::ExactGaussian(llr) => llr.evaluate(y),
        }
    }
}

/// `Σ_{i<j} w_ij z_i z_j` with `w` in row-major pair order.
fn pairwise_form(weights: &[f64], z: &[f64]) -> f64 {
    let n = z.len();
    let mut total = 0.0;
    let mut p = 0;
    for i in 0..n {
        let row = &weights[p..p + n - i - 1];
        let s: f64 = row.iter().zip(&z[i + 1..]).map(|(w, zj)| w * zj).sum();
        total += z[i] * s;
        p += n - i - 1;
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frontend {
    OneBit,
    InfiniteBit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
}

impl Hypothesis {
    pub fn index(self) -> usize {
        match self {
            Hypothesis::H0 => 0,
            Hypothesis::H1 => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CampaignConfig {
    pub scenario: CovarianceScenario,
    pub theta0_db: f64,
    pub theta1_db: f64,
    pub snr_scale: SnrScale,
    pub truth: Hypothesis,
    pub trials: usize,
    pub master_seed: u64,
    pub test: TestConfig,
    /// Explicit cap; `None` uses `50·max(ASN, 100)`.
    pub max_samples: Option<usize>,
    pub frontend: Frontend,
    pub tuner: TunerConfig,
    /// Worker threads; 0 lets the pool decide.
    pub workers: usize,
    /// Scales the simulated input covariance; the detector is unchanged.
    pub input_gain: f64,
}

impl CampaignConfig {
    pub fn hypotheses(&self) -> Result<HypothesisPair> {
        HypothesisPair::new(
            ParameterPoint::snr(self.snr_scale.to_linear(self.theta0_db))?,
            ParameterPoint::snr(self.snr_scale.to_linear(self.theta1_db))?,
        )
    }
}

/// Detector and analytic predictions for one hypothesis pair.
#[derive(Debug, Clone)]
pub struct PreparedDetector {
    pub detector: Detector,
    pub frontend: Frontend,
    /// Per-block statistic means under H0 and H1.
    pub means: (f64, f64),
    pub asn_predicted: (f64, f64),
    /// Linearization design (one-bit front-end only).
    pub plan: Option<AllrPlan>,
    pub covariances: (DMatrix<f64>, DMatrix<f64>),
}

pub fn prepare_detector(config: &CampaignConfig) -> Result<PreparedDetector> {
    let pair = config.hypotheses()?;
    let r0 = config
        .scenario
        .covariance(pair.theta0().value())?
        .into_matrix();
    let r1 = config
        .scenario
        .covariance(pair.theta1().value())?
        .into_matrix();
    match config.frontend {
        Frontend::OneBit => {
            let model = BinaryPairwiseModel::new(config.scenario.clone())?;
            let prepared = PreparedPair::new(&model, &pair)?;
            let tuned = tune_prepared(&prepared, &config.tuner)?;
            let means = (tuned.plan.mu_tilde_0, tuned.plan.mu_tilde_1);
            Ok(PreparedDetector {
                detector: Detector::pairwise(&tuned.plan, model.block_dim())?,
                frontend: Frontend::OneBit,
                means,
                asn_predicted: predict_asn(&config.test, means.0, means.1)?,
                plan: Some(tuned.plan),
                covariances: (r0, r1),
            })
        }
        Frontend::InfiniteBit => {
            let means = gaussian_llr_means(&r0, &r1)?;
            Ok(PreparedDetector {
                detector: Detector::ExactGaussian(ExactGaussianLlr::new(&r0, &r1)?),
                frontend: Frontend::InfiniteBit,
                means,
                asn_predicted: predict_asn(&config.test, means.0, means.1)?,
                plan: None,
                covariances: (r0, r1),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignSummary {
    pub truth: Hypothesis,
    pub frontend: Frontend,
    pub trials: usize,
    pub master_seed: u64,
    pub max_samples: usize,
    pub decided_h0: usize,
    pub decided_h1: usize,
    pub truncated_count: usize,
    /// Fraction of all trials deciding against the truth.
    pub empirical_alpha: f64,
    /// Mean stopping time over trials that reached a decision.
    pub asn_empirical: f64,
    pub asn_std_error: f64,
    pub asn_predicted: f64,
    /// Stopping time → number of trials (truncated trials included).
    pub histogram: BTreeMap<usize, usize>,
}

impl CampaignSummary {
    /// Histogram rebinned with width `max(1, round(range/200))`, as
    /// `(lower, upper_inclusive, count)`.
    pub fn binned_histogram(&self) -> Vec<(usize, usize, usize)> {
        let (Some((&lo, _)), Some((&hi, _))) = (
            self.histogram.first_key_value(),
            self.histogram.last_key_value(),
        ) else {
            return Vec::new();
        };
        let width = (((hi - lo) as f64 / 200.0).round() as usize).max(1);
        let mut bins: BTreeMap<usize, usize> = BTreeMap::new();
        for (&n, &c) in &self.histogram {
            *bins.entry(lo + (n - lo) / width * width).or_default() += c;
        }
        bins.into_iter()
            .map(|(b, c)| (b, b + width - 1, c))
            .collect()
    }
}

/// Tunes (when needed) and runs a campaign.
pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignSummary> {
    let prepared = prepare_detector(config)?;
    run_campaign_with(config, &prepared)
}

/// Runs a campaign with an already prepared detector.
pub fn run_campaign_with(
    config: &CampaignConfig,
    prepared: &PreparedDetector,
) -> Result<CampaignSummary> {
    if config.trials == 0 {
        return Err(Error::validation("a campaign needs at least one trial"));
    }
    if prepared.frontend != config.frontend {
        return Err(Error::validation(
            "prepared detector belongs to another front-end",
        ));
    }
    let asn_predicted = match config.truth {
        Hypothesis::H0 => prepared.asn_predicted.0,
        Hypothesis::H1 => prepared.asn_predicted.1,
    };
    let test = match config.max_samples {
        Some(cap) => config.test.with_max_samples(cap)?,
        None => config.test.with_asn_cap(asn_predicted)?,
    };
    let covariance = match config.truth {
        Hypothesis::H0 => &prepared.covariances.0,
        Hypothesis::H1 => &prepared.covariances.1,
    };
    let sampler = GaussianSampler::scaled(covariance, config.input_gain)?;
    check_len("detector dimension", sampler.dim(), prepared.detector.dim())?;

    let run = || -> Result<Vec<TrialOutcome>> {
        (0..config.trials as u64)
            .into_par_iter()
            .map(|index| {
                run_trial(
                    &sampler,
                    &prepared.detector,
                    &test,
                    config.master_seed,
                    index,
                )
            })
            .collect()
    };
    let outcomes = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?
        .install(run)?;
    Ok(summarize(config, &test, asn_predicted, &outcomes))
}

/// One sequential test on freshly simulated blocks.
pub fn run_trial(
    sampler: &GaussianSampler,
    detector: &Detector,
    test: &TestConfig,
    master_seed: u64,
    index: u64,
) -> Result<TrialOutcome> {
    let mut rng = trial_rng(master_seed, index);
    let dim = sampler.dim();
    let mut white = vec![0.0; dim];
    let mut y = vec![0.0; dim];
    let mut signs = Vec::with_capacity(dim);
    let mut state = SprtState::default();
    while state.n < test.max_samples {
        sampler.sample_into(&mut rng, &mut white, &mut y);
        let increment = detector.increment(&y, &mut signs)?;
        if let Some(decision) = state.ingest(test, increment) {
            return Ok(TrialOutcome {
                decision,
                n_d: state.n,
                final_sum: state.sum,
            });
        }
    }
    Ok(TrialOutcome {
        decision: Decision::Truncated,
        n_d: state.n,
        final_sum: state.sum,
    })
}

fn summarize(
    config: &CampaignConfig,
    test: &TestConfig,
    asn_predicted: f64,
    outcomes: &[TrialOutcome],
) -> CampaignSummary {
    let mut histogram = BTreeMap::new();
    let (mut h0, mut h1, mut truncated) = (0, 0, 0);
    let mut decided_n = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        *histogram.entry(o.n_d).or_insert(0) += 1;
        match o.decision {
            Decision::H0 => h0 += 1,
            Decision::H1 => h1 += 1,
            Decision::Truncated => truncated += 1,
        }
        if o.decision != Decision::Truncated {
            decided_n.push(o.n_d as f64);
        }
    }
    let wrong = match config.truth {
        Hypothesis::H0 => h1,
        Hypothesis::H1 => h0,
    };
    let count = decided_n.len() as f64;
    let (mean, se) = if decided_n.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        let mean = decided_n.iter().sum::<f64>() / count;
        let var = if decided_n.len() > 1 {
            decided_n.iter().map(|n| (n - mean).powi(2)).sum::<f64>() / (count - 1.0)
        } else {
            0.0
        };
        (mean, (var / count).sqrt())
    };
    CampaignSummary {
        truth: config.truth,
        frontend: config.frontend,
        trials: outcomes.len(),
        master_seed: config.master_seed,
        max_samples: test.max_samples,
        decided_h0: h0,
        decided_h1: h1,
        truncated_count: truncated,
        empirical_alpha: wrong as f64 / outcomes.len() as f64,
        asn_empirical: mean,
        asn_std_error: se,
        asn_predicted,
        histogram,
    }
}
