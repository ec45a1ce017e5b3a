//! Choice of the linearization coefficient by balancing standardized drifts.

use crate::error::{Error, Result};
use crate::expfam::{
    AllrMoments, AllrPlan, HyperplaneMode, HypothesisPair, LinearizationCoefficient, PreparedPair,
    StatisticModel,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunerConfig {
    /// Exponent applied to the ALLR standard deviation.
    pub rho: f64,
    pub grid_points: usize,
    pub refine_tol: f64,
    pub mode: HyperplaneMode,
}

impl Default for TunerConfig {
    fn default() -> Self {
        TunerConfig {
            rho: 2.0 / 3.0,
            grid_points: 101,
            refine_tol: 1e-4,
            mode: HyperplaneMode::Difference,
        }
    }
}

impl TunerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::validation(format!(
                "rho must be > 0, got {}",
                self.rho
            )));
        }
        if self.grid_points < 3 {
            return Err(Error::validation("tuner grid needs at least 3 points"));
        }
        if !(self.refine_tol > 0.0) {
            return Err(Error::validation("refine_tol must be > 0"));
        }
        Ok(())
    }
}

/// `d̃_i = |μ̃_i| / σ̃_i^ρ`.
pub fn standardized_drift(moments: &AllrMoments, hypothesis: usize, rho: f64) -> f64 {
    moments.mean(hypothesis).abs() / moments.variance(hypothesis).powf(0.5 * rho)
}

/// `ν̃ = |μ̃1|·σ̃0^ρ / (|μ̃0|·σ̃1^ρ)` from precomputed moments.
pub fn drift_ratio_of(moments: &AllrMoments, rho: f64) -> Result<f64> {
    if moments.mu_tilde_0 == 0.0 || moments.sigma2_tilde_1 <= 0.0 {
        return Err(Error::Degenerate(
            "drift ratio undefined: zero H0 mean or zero H1 variance".into(),
        ));
    }
    let ratio = moments.mu_tilde_1.abs() / moments.mu_tilde_0.abs()
        * (moments.sigma2_tilde_0 / moments.sigma2_tilde_1).powf(0.5 * rho);
    if !ratio.is_finite() {
        return Err(Error::NonFinite("drift ratio".into()));
    }
    Ok(ratio)
}

pub fn drift_ratio<M: StatisticModel + ?Sized>(
    model: &M,
    pair: &HypothesisPair,
    xi: LinearizationCoefficient,
    rho: f64,
) -> Result<f64> {
    let plan = PreparedPair::new(model, pair)?.design(xi, HyperplaneMode::Difference)?;
    drift_ratio_of(&plan.moments(), rho)
}

/// Result of a tuning run: the coefficient, the design built at it and the
/// objective `(ν̃ − 1)²` there.
#[derive(Debug, Clone)]
pub struct TunedDesign {
    pub xi: LinearizationCoefficient,
    pub plan: AllrPlan,
    pub objective: f64,
}

pub fn tune_xi<M: StatisticModel + ?Sized>(
    model: &M,
    pair: &HypothesisPair,
    config: &TunerConfig,
) -> Result<LinearizationCoefficient> {
    Ok(tune_prepared(&PreparedPair::new(model, pair)?, config)?.xi)
}

/// Grid search over `[0, 1]` followed by golden-section refinement around
/// the best grid point. Degenerate grid points are skipped.
pub fn tune_prepared<M: StatisticModel + ?Sized>(
    prepared: &PreparedPair<'_, M>,
    config: &TunerConfig,
) -> Result<TunedDesign> {
    config.validate()?;
    let evaluate = |x: f64| -> Result<Option<(f64, AllrPlan)>> {
        let xi = LinearizationCoefficient::new(x.clamp(0.0, 1.0))?;
        let plan = match prepared.design(xi, config.mode) {
            Ok(plan) => plan,
            Err(Error::Degenerate(_) | Error::NonFinite(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        match drift_ratio_of(&plan.moments(), config.rho) {
            Ok(nu) => Ok(Some(((nu - 1.0).powi(2), plan))),
            Err(Error::Degenerate(_) | Error::NonFinite(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };

    let n = config.grid_points;
    let step = 1.0 / (n - 1) as f64;
    let mut best: Option<(usize, f64, AllrPlan)> = None;
    for i in 0..n {
        if let Some((obj, plan)) = evaluate(i as f64 * step)? {
            if best.as_ref().is_none_or(|b| obj < b.1) {
                best = Some((i, obj, plan));
            }
        }
    }
    let (index, grid_obj, grid_plan) = best.ok_or_else(|| {
        Error::Degenerate("every grid point of the xi search is degenerate".into())
    })?;

    let mut lo = index.saturating_sub(1) as f64 * step;
    let mut hi = ((index + 1).min(n - 1)) as f64 * step;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let objective =
        |x: f64| -> Result<f64> { Ok(evaluate(x)?.map_or(f64::INFINITY, |(obj, _)| obj)) };
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = objective(x1)?;
    let mut f2 = objective(x2)?;
    while hi - lo > config.refine_tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = objective(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = objective(x2)?;
        }
    }
    if let Some((obj, plan)) = evaluate(0.5 * (lo + hi))? {
        if obj < grid_obj {
            return Ok(TunedDesign {
                xi: plan.xi,
                plan,
                objective: obj,
            });
        }
    }
    Ok(TunedDesign {
        xi: grid_plan.xi,
        plan: grid_plan,
        objective: grid_obj,
    })
}
