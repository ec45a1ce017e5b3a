//! The four experiment commands.

use std::path::Path;

use serde::Serialize;

use super::config::{Command, ExperimentConfig, SweepVariable};
use super::output::{histogram_csv, to_json, write_file, Table, SCHEMA_VERSION};
use crate::binary::BinaryPairwiseModel;
use crate::error::{Error, Result};
use crate::expfam::{
    kl_estimates, AllrMoments, HyperplaneMode, HypothesisPair, KlEstimates, KlPair,
    LinearizationCoefficient, ParameterPoint, PreparedPair,
};
use crate::gaussian::{errors_from_parts, gaussian_llr_means, GaussianQuadraticModel};
use crate::montecarlo::{
    prepare_detector, run_campaign_with, CampaignConfig, CampaignSummary, Frontend, Hypothesis,
};
use crate::scenario::{CovarianceScenario, ScenarioKind, SnrScale};
use crate::sequential::{efficiency_threshold, predict_asn, TestConfig};
use crate::tuner::tune_prepared;

pub const ACCURACY_COLUMNS: [&str; 8] = [
    "value",
    "eps0_half",
    "eps1_half",
    "eps0_star",
    "eps1_star",
    "eps0_hat",
    "eps1_hat",
    "xi_star",
];

/// A named file produced by a command.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

fn artifact(name: impl Into<String>, contents: String) -> Artifact {
    Artifact {
        name: name.into(),
        contents,
    }
}

fn pair_from_db(scale: SnrScale, theta0_db: f64, theta1_db: f64) -> Result<HypothesisPair> {
    HypothesisPair::new(
        ParameterPoint::snr(scale.to_linear(theta0_db))?,
        ParameterPoint::snr(scale.to_linear(theta1_db))?,
    )
}

fn sweep_points(config: &ExperimentConfig) -> Result<(SweepVariable, Vec<f64>)> {
    let sweep = config.sweep.as_ref().ok_or_else(|| {
        Error::Config(format!("`{}` needs a [sweep] block", config.command.name()))
    })?;
    Ok((sweep.variable, sweep.values()?))
}

/// Relative ALLR and KL errors against the exact Gaussian LLR means, one row
/// per sweep value. Sweep points with `θ0 = θ1` are skipped.
pub fn accuracy_table(config: &ExperimentConfig) -> Result<Table> {
    let (variable, values) = sweep_points(config)?;
    let tuner = config.test.tuner()?;
    let model = GaussianQuadraticModel::new(config.scenario.clone())?;
    let mut table = Table::new(ACCURACY_COLUMNS.iter().map(|s| s.to_string()).collect());
    for value in values {
        let (t0, t1) = config.hypothesis.resolve(Some((variable, value)))?;
        let (l0, l1) = (
            config.snr_scale.to_linear(t0),
            config.snr_scale.to_linear(t1),
        );
        if l0 == l1 {
            continue;
        }
        let pair = pair_from_db(config.snr_scale, t0, t1)?;
        let r0 = model.block_covariance(pair.theta0())?;
        let r1 = model.block_covariance(pair.theta1())?;
        let exact = gaussian_llr_means(&r0, &r1)?;
        let prepared = PreparedPair::new(&model, &pair)?;
        let half = prepared.design(LinearizationCoefficient::HALF, tuner.mode)?;
        let tuned = tune_prepared(&prepared, &tuner)?;
        let kl = kl_estimates(&model, &pair, LinearizationCoefficient::HALF)?;
        let literature = (kl.literature.d01, kl.literature.d10);
        let at_half = errors_from_parts((half.mu_tilde_0, half.mu_tilde_1), exact, literature)?;
        let at_star = errors_from_parts(
            (tuned.plan.mu_tilde_0, tuned.plan.mu_tilde_1),
            exact,
            literature,
        )?;
        table.rows.push(vec![
            value,
            at_half.eps0_tilde,
            at_half.eps1_tilde,
            at_star.eps0_tilde,
            at_star.eps1_tilde,
            at_star.eps0_hat,
            at_star.eps1_hat,
            tuned.xi.value(),
        ]);
    }
    Ok(table)
}

fn swept_scenario(
    base: &CovarianceScenario,
    variable: SweepVariable,
    value: f64,
) -> Result<CovarianceScenario> {
    match variable {
        SweepVariable::Kappa => CovarianceScenario::new(base.kind(), base.k0(), value),
        SweepVariable::Antennas => match base.kind() {
            ScenarioKind::HomodyneArray { phi_deg, .. } => {
                CovarianceScenario::homodyne(value as usize, phi_deg, base.k0(), base.kappa())
            }
            _ => Err(Error::Config(
                "an antenna sweep needs a homodyne_array scenario".into(),
            )),
        },
        SweepVariable::Theta1Db | SweepVariable::CenterDb => Ok(base.clone()),
    }
}

/// ALLR means of the tuned one-bit detector; `(0, 0)` when the binary
/// statistic cannot separate the hypotheses at all.
fn one_bit_means(
    scenario: &CovarianceScenario,
    pair: &HypothesisPair,
    config: &ExperimentConfig,
) -> Result<(f64, f64)> {
    let model = BinaryPairwiseModel::new(scenario.clone())?;
    let prepared = PreparedPair::new(&model, pair)?;
    match tune_prepared(&prepared, &config.test.tuner()?) {
        Ok(t) => Ok((t.plan.mu_tilde_0, t.plan.mu_tilde_1)),
        Err(Error::Degenerate(_)) => Ok((0.0, 0.0)),
        Err(e) => Err(e),
    }
}

fn exact_means(scenario: &CovarianceScenario, pair: &HypothesisPair) -> Result<(f64, f64)> {
    let r0 = scenario.covariance(pair.theta0().value())?.into_matrix();
    let r1 = scenario.covariance(pair.theta1().value())?.into_matrix();
    gaussian_llr_means(&r0, &r1)
}

/// Efficiency `χ_i` of the one-bit receiver against the ideal receiver on
/// the same scenario, the bit-depth thresholds and, for homodyne arrays,
/// the efficiency against ideal benchmark arrays.
pub fn efficiency_table(config: &ExperimentConfig) -> Result<Table> {
    let (variable, values) = sweep_points(config)?;
    let bits = &config.efficiency.bits;
    let bench = &config.efficiency.benchmark_antennas;
    let mut header: Vec<String> = vec!["value".into(), "chi0".into(), "chi1".into()];
    header.extend(bits.iter().map(|b| format!("threshold_b{b}")));
    for m in bench {
        header.push(format!("chi0_m{m}"));
        header.push(format!("chi1_m{m}"));
        header.extend(bits.iter().map(|b| format!("threshold_b{b}_m{m}")));
    }
    let mut table = Table::new(header);

    for value in values {
        let scenario = swept_scenario(&config.scenario, variable, value)?;
        let (t0, t1) = config.hypothesis.resolve(Some((variable, value)))?;
        let pair = pair_from_db(config.snr_scale, t0, t1)?;
        let mu_tilde = one_bit_means(&scenario, &pair, config)?;
        let mu_exact = exact_means(&scenario, &pair)?;

        let mut row = vec![value, mu_tilde.0 / mu_exact.0, mu_tilde.1 / mu_exact.1];
        for &b in bits {
            row.push(efficiency_threshold(&scenario, b, None)?);
        }
        for &m in bench {
            let ScenarioKind::HomodyneArray { phi_deg, .. } = scenario.kind() else {
                return Err(Error::Config(
                    "benchmark_antennas only apply to homodyne_array scenarios".into(),
                ));
            };
            let reference =
                CovarianceScenario::homodyne(m, phi_deg, scenario.k0(), scenario.kappa())?;
            let mu_ref = exact_means(&reference, &pair)?;
            row.extend([mu_tilde.0 / mu_ref.0, mu_tilde.1 / mu_ref.1]);
            for &b in bits {
                row.push(efficiency_threshold(&scenario, b, Some(m))?);
            }
        }
        table.rows.push(row);
    }
    Ok(table)
}

#[derive(Debug, Clone, Serialize)]
pub struct FrontendResult {
    pub frontend: Frontend,
    /// Tuned linearization coefficient (one-bit only).
    pub xi_star: Option<f64>,
    /// Per-block statistic means under H0 and H1.
    pub means: [f64; 2],
    pub asn_predicted: [f64; 2],
    pub alpha_target: [f64; 2],
    pub campaigns: Vec<CampaignSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub scenario: CovarianceScenario,
    pub snr_scale: SnrScale,
    pub theta0_db: f64,
    pub theta1_db: f64,
    pub test: TestConfig,
    pub results: Vec<FrontendResult>,
}

fn campaign_config(
    config: &ExperimentConfig,
    frontend: Frontend,
    truth: Hypothesis,
    theta_db: (f64, f64),
) -> Result<CampaignConfig> {
    Ok(CampaignConfig {
        scenario: config.scenario.clone(),
        theta0_db: theta_db.0,
        theta1_db: theta_db.1,
        snr_scale: config.snr_scale,
        truth,
        trials: config.test.trials,
        master_seed: config.test.master_seed.wrapping_add(truth.index() as u64),
        test: config.test.wald()?,
        max_samples: config.test.max_samples,
        frontend,
        tuner: config.test.tuner()?,
        workers: config.test.workers,
        input_gain: 1.0,
    })
}

/// Monte-Carlo campaigns under both hypotheses for every configured
/// front-end. H1 campaigns use `master_seed + 1`.
pub fn simulate(config: &ExperimentConfig) -> Result<SimulateReport> {
    let theta_db = config.hypothesis.resolve(None)?;
    let test = config.test.wald()?;
    let mut results = Vec::new();
    for &frontend in &config.test.frontends {
        let h0 = campaign_config(config, frontend, Hypothesis::H0, theta_db)?;
        let prepared = prepare_detector(&h0)?;
        let h1 = campaign_config(config, frontend, Hypothesis::H1, theta_db)?;
        let campaigns = vec![
            run_campaign_with(&h0, &prepared)?,
            run_campaign_with(&h1, &prepared)?,
        ];
        results.push(FrontendResult {
            frontend,
            xi_star: prepared.plan.as_ref().map(|p| p.xi.value()),
            means: [prepared.means.0, prepared.means.1],
            asn_predicted: [prepared.asn_predicted.0, prepared.asn_predicted.1],
            alpha_target: [test.alpha0, test.alpha1],
            campaigns,
        });
    }
    Ok(SimulateReport {
        schema_version: SCHEMA_VERSION,
        command: Command::Simulate.name(),
        scenario: config.scenario.clone(),
        snr_scale: config.snr_scale,
        theta0_db: theta_db.0,
        theta1_db: theta_db.1,
        test,
        results,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OneBitPrediction {
    pub xi_star: f64,
    pub hyperplane: HyperplaneMode,
    pub moments: AllrMoments,
    pub kl: KlEstimates,
    pub asn_predicted: [f64; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct InfiniteBitPrediction {
    /// Exact per-block LLR means under H0 and H1.
    pub means: [f64; 2],
    pub kl: KlPair,
    pub asn_predicted: [f64; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub scenario: CovarianceScenario,
    pub snr_scale: SnrScale,
    pub theta0_db: f64,
    pub theta1_db: f64,
    pub theta0_linear: f64,
    pub theta1_linear: f64,
    pub test: TestConfig,
    pub one_bit: Option<OneBitPrediction>,
    pub infinite_bit: Option<InfiniteBitPrediction>,
}

/// Analytic predictions without simulation.
pub fn predict(config: &ExperimentConfig) -> Result<PredictReport> {
    let (t0, t1) = config.hypothesis.resolve(None)?;
    let pair = pair_from_db(config.snr_scale, t0, t1)?;
    let test = config.test.wald()?;
    let tuner = config.test.tuner()?;

    let one_bit = if config.test.frontends.contains(&Frontend::OneBit) {
        let model = BinaryPairwiseModel::new(config.scenario.clone())?;
        let prepared = PreparedPair::new(&model, &pair)?;
        let tuned = tune_prepared(&prepared, &tuner)?;
        let (a0, a1) = predict_asn(&test, tuned.plan.mu_tilde_0, tuned.plan.mu_tilde_1)?;
        Some(OneBitPrediction {
            xi_star: tuned.xi.value(),
            hyperplane: tuner.mode,
            moments: tuned.plan.moments(),
            kl: kl_estimates(&model, &pair, tuned.xi)?,
            asn_predicted: [a0, a1],
        })
    } else {
        None
    };
    let infinite_bit = if config.test.frontends.contains(&Frontend::InfiniteBit) {
        let (m0, m1) = exact_means(&config.scenario, &pair)?;
        let (a0, a1) = predict_asn(&test, m0, m1)?;
        Some(InfiniteBitPrediction {
            means: [m0, m1],
            kl: KlPair { d01: -m0, d10: m1 },
            asn_predicted: [a0, a1],
        })
    } else {
        None
    };
    Ok(PredictReport {
        schema_version: SCHEMA_VERSION,
        command: Command::Predict.name(),
        scenario: config.scenario.clone(),
        snr_scale: config.snr_scale,
        theta0_db: t0,
        theta1_db: t1,
        theta0_linear: pair.theta0().value(),
        theta1_linear: pair.theta1().value(),
        test,
        one_bit,
        infinite_bit,
    })
}

fn frontend_tag(f: Frontend) -> &'static str {
    match f {
        Frontend::OneBit => "one_bit",
        Frontend::InfiniteBit => "infinite_bit",
    }
}

/// Runs the configured command. The first artifact is the primary result.
pub fn execute(config: &ExperimentConfig) -> Result<Vec<Artifact>> {
    Ok(match config.command {
        Command::Accuracy => vec![artifact("accuracy.csv", accuracy_table(config)?.to_csv())],
        Command::Efficiency => vec![artifact(
            "efficiency.csv",
            efficiency_table(config)?.to_csv(),
        )],
        Command::Predict => vec![artifact("predict.json", to_json(&predict(config)?)?)],
        Command::Simulate => {
            let report = simulate(config)?;
            let mut files = vec![artifact("simulate.json", to_json(&report)?)];
            for result in &report.results {
                for summary in &result.campaigns {
                    let truth = match summary.truth {
                        Hypothesis::H0 => "h0",
                        Hypothesis::H1 => "h1",
                    };
                    files.push(artifact(
                        format!("histogram_{}_{truth}.csv", frontend_tag(result.frontend)),
                        histogram_csv(&summary.binned_histogram()),
                    ));
                }
            }
            files
        }
    })
}

/// Writes every artifact into `dir`, or prints the primary one when no
/// directory is given.
pub fn emit(artifacts: &[Artifact], dir: Option<&Path>) -> Result<()> {
    match dir {
        Some(dir) => {
            for a in artifacts {
                write_file(dir, &a.name, &a.contents)?;
            }
        }
        None => {
            if let Some(a) = artifacts.first() {
                print!("{}", a.contents);
            }
        }
    }
    Ok(())
}
