//! Exponential-family LLR linearization.
//!
//! A model only has to expose the mean `μ(θ)` and covariance `R(θ)` of its
//! sufficient statistics. From these the approximate log-likelihood ratio
//! (ALLR) `bᵀ(φ(u) − μ(θ̃))` is built around a reference parameter
//!
//! ```text
//! θ̃(ξ) = ξ·θ0 + (1 − ξ)·θ1
//! ```
//!
//! Note the orientation: `ξ = 1` selects `θ0` and `ξ = 0` selects `θ1`,
//! which is the reverse of the usual convex-combination convention.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::linalg::SpdFactor;

/// Physical parameter vector `θ ∈ R^D`. The scenarios in this crate use
/// `D = 1` (linear-scale SNR).
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterPoint(Vec<f64>);

impl ParameterPoint {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::validation(
                "parameter point must have at least one entry",
            ));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("parameter entry {v}")));
        }
        Ok(ParameterPoint(values))
    }

    pub fn scalar(value: f64) -> Result<Self> {
        Self::new(vec![value])
    }

    /// Linear-scale SNR; must be non-negative.
    pub fn snr(value: f64) -> Result<Self> {
        if !(value >= 0.0) {
            return Err(Error::validation(format!(
                "linear SNR must be >= 0, got {value}"
            )));
        }
        Self::scalar(value)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// First coordinate; the scalar parameter for `D = 1` models.
    pub fn value(&self) -> f64 {
        self.0[0]
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }

    fn from_dvector(v: &DVector<f64>) -> Self {
        ParameterPoint(v.iter().copied().collect())
    }
}

/// The two simple hypotheses `θ0` (H0) and `θ1` (H1).
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisPair {
    theta0: ParameterPoint,
    theta1: ParameterPoint,
}

impl HypothesisPair {
    pub fn new(theta0: ParameterPoint, theta1: ParameterPoint) -> Result<Self> {
        let pair = Self::new_unchecked(theta0, theta1)?;
        if pair.theta0 == pair.theta1 {
            return Err(Error::validation("hypotheses theta0 and theta1 coincide"));
        }
        Ok(pair)
    }

    /// Like [`HypothesisPair::new`] but admits `θ0 = θ1`. Only the dimension
    /// check is kept; useful for probing degenerate designs.
    pub fn new_unchecked(theta0: ParameterPoint, theta1: ParameterPoint) -> Result<Self> {
        check_len("hypothesis pair", theta0.dim(), theta1.dim())?;
        Ok(HypothesisPair { theta0, theta1 })
    }

    pub fn scalar(theta0: f64, theta1: f64) -> Result<Self> {
        Self::new(
            ParameterPoint::scalar(theta0)?,
            ParameterPoint::scalar(theta1)?,
        )
    }

    pub fn theta0(&self) -> &ParameterPoint {
        &self.theta0
    }

    pub fn theta1(&self) -> &ParameterPoint {
        &self.theta1
    }

    pub fn theta(&self, hypothesis: usize) -> &ParameterPoint {
        if hypothesis == 0 {
            &self.theta0
        } else {
            &self.theta1
        }
    }

    pub fn dim(&self) -> usize {
        self.theta0.dim()
    }

    /// `θ1 − θ0`.
    pub fn step(&self) -> DVector<f64> {
        self.theta1.to_dvector() - self.theta0.to_dvector()
    }
}

/// Convex weight `ξ ∈ [0, 1]` selecting the linearization reference.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LinearizationCoefficient(f64);

impl LinearizationCoefficient {
    pub const HALF: LinearizationCoefficient = LinearizationCoefficient(0.5);

    pub fn new(xi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&xi) {
            return Err(Error::validation(format!(
                "xi must lie in [0, 1], got {xi}"
            )));
        }
        Ok(LinearizationCoefficient(xi))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Covariance of the sufficient statistics, either dense or as `scale·(B ⊗ B)`.
#[derive(Debug, Clone)]
pub enum CovarianceForm {
    Dense(DMatrix<f64>),
    /// `scale · (base ⊗ base)` with symmetric positive-definite `base`.
    ScaledKronecker {
        scale: f64,
        base: DMatrix<f64>,
    },
}

impl CovarianceForm {
    pub fn dim(&self) -> usize {
        match self {
            CovarianceForm::Dense(m) => m.nrows(),
            CovarianceForm::ScaledKronecker { base, .. } => base.nrows() * base.nrows(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            CovarianceForm::Dense(m) => m.clone(),
            CovarianceForm::ScaledKronecker { scale, base } => base.kronecker(base) * *scale,
        }
    }

    /// Solves `R x = rhs` through a Cholesky factorization (one jitter retry).
    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("covariance solve", self.dim(), rhs.len())?;
        match self {
            CovarianceForm::Dense(m) => Ok(SpdFactor::new(m)?.solve(rhs)),
            CovarianceForm::ScaledKronecker { scale, base } => {
                // (B ⊗ B)^{-1} vec(X) = vec(B^{-1} X B^{-1}) for symmetric B
                let n = base.nrows();
                let factor = SpdFactor::new(base)?;
                let x = DMatrix::from_column_slice(n, n, rhs.as_slice());
                let left = factor.solve_matrix(&x);
                let both = factor.solve_matrix(&left.transpose()).transpose();
                Ok(DVector::from_column_slice(both.as_slice()) / *scale)
            }
        }
    }

    /// `bᵀ R b`.
    pub fn quadratic(&self, b: &DVector<f64>) -> Result<f64> {
        check_len("covariance quadratic form", self.dim(), b.len())?;
        Ok(match self {
            CovarianceForm::Dense(m) => b.dot(&(m * b)),
            CovarianceForm::ScaledKronecker { scale, base } => {
                // vec(B)ᵀ (R ⊗ R) vec(B) = tr(Bᵀ R B R)
                let n = base.nrows();
                let bm = DMatrix::from_column_slice(n, n, b.as_slice());
                let rb = base * &bm;
                let brb = bm.transpose() * rb;
                scale * (brb * base).trace()
            }
        })
    }
}

/// Exponential-family model described by the first two moments of its
/// sufficient statistics.
pub trait StatisticModel: Sync {
    /// One observation block as fed to [`StatisticModel::statistic`].
    type Sample: ?Sized;

    /// `D`, the parameter dimension.
    fn dim_params(&self) -> usize;

    /// `C`, the number of sufficient statistics.
    fn dim_stats(&self) -> usize;

    fn mean(&self, theta: &ParameterPoint) -> Result<DVector<f64>>;

    fn covariance(&self, theta: &ParameterPoint) -> Result<DMatrix<f64>>;

    fn statistic(&self, sample: &Self::Sample) -> Result<DVector<f64>>;

    /// Structured covariance used for solves and quadratic forms.
    fn covariance_form(&self, theta: &ParameterPoint) -> Result<CovarianceForm> {
        Ok(CovarianceForm::Dense(self.covariance(theta)?))
    }

    /// Analytic `∂μ/∂θ` (`C x D`), when the model has one.
    fn mean_jacobian(&self, _theta: &ParameterPoint) -> Option<Result<DMatrix<f64>>> {
        None
    }
}

/// Which LLR hyperplane to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HyperplaneMode {
    /// `R(θ̃)⁻¹ (μ(θ1) − μ(θ0))`
    Difference,
    /// `R(θ̃)⁻¹ ∂μ(θ̃)/∂θ (θ1 − θ0)`
    Derivative,
}

/// Frozen ALLR design: hyperplane, reference mean and predicted moments.
#[derive(Debug, Clone)]
pub struct AllrPlan {
    pub b: DVector<f64>,
    pub mu_ref: DVector<f64>,
    pub xi: LinearizationCoefficient,
    pub mode: HyperplaneMode,
    pub mu_tilde_0: f64,
    pub mu_tilde_1: f64,
    pub sigma2_tilde_0: f64,
    pub sigma2_tilde_1: f64,
}

impl AllrPlan {
    pub fn moments(&self) -> AllrMoments {
        AllrMoments {
            mu_tilde_0: self.mu_tilde_0,
            mu_tilde_1: self.mu_tilde_1,
            sigma2_tilde_0: self.sigma2_tilde_0,
            sigma2_tilde_1: self.sigma2_tilde_1,
        }
    }

    /// `bᵀ μ_ref`, the constant subtracted per block.
    pub fn offset(&self) -> f64 {
        self.b.dot(&self.mu_ref)
    }
}

/// Per-block ALLR means and variances under H0 and H1.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct AllrMoments {
    pub mu_tilde_0: f64,
    pub mu_tilde_1: f64,
    pub sigma2_tilde_0: f64,
    pub sigma2_tilde_1: f64,
}

impl AllrMoments {
    pub fn mean(&self, hypothesis: usize) -> f64 {
        if hypothesis == 0 {
            self.mu_tilde_0
        } else {
            self.mu_tilde_1
        }
    }

    pub fn variance(&self, hypothesis: usize) -> f64 {
        if hypothesis == 0 {
            self.sigma2_tilde_0
        } else {
            self.sigma2_tilde_1
        }
    }
}

/// Endpoint moments of a model under both hypotheses, computed once and
/// reused while scanning over `ξ`.
pub struct PreparedPair<'m, M: StatisticModel + ?Sized> {
    model: &'m M,
    pair: HypothesisPair,
    mean0: DVector<f64>,
    mean1: DVector<f64>,
    cov0: CovarianceForm,
    cov1: CovarianceForm,
}

impl<'m, M: StatisticModel + ?Sized> PreparedPair<'m, M> {
    pub fn new(model: &'m M, pair: &HypothesisPair) -> Result<Self> {
        check_len("hypothesis dimension", model.dim_params(), pair.dim())?;
        let mean0 = model.mean(pair.theta0())?;
        let mean1 = model.mean(pair.theta1())?;
        let cov0 = model.covariance_form(pair.theta0())?;
        let cov1 = model.covariance_form(pair.theta1())?;
        Ok(PreparedPair {
            model,
            pair: pair.clone(),
            mean0,
            mean1,
            cov0,
            cov1,
        })
    }

    pub fn model(&self) -> &M {
        self.model
    }

    pub fn pair(&self) -> &HypothesisPair {
        &self.pair
    }

    pub fn mean(&self, hypothesis: usize) -> &DVector<f64> {
        if hypothesis == 0 {
            &self.mean0
        } else {
            &self.mean1
        }
    }

    pub fn covariance_form(&self, hypothesis: usize) -> &CovarianceForm {
        if hypothesis == 0 {
            &self.cov0
        } else {
            &self.cov1
        }
    }

    /// `μ(θ1) − μ(θ0)`.
    pub fn mean_difference(&self) -> DVector<f64> {
        &self.mean1 - &self.mean0
    }

    /// Builds the full ALLR design at `xi`.
    pub fn design(&self, xi: LinearizationCoefficient, mode: HyperplaneMode) -> Result<AllrPlan> {
        let reference = linearization_point(&self.pair, xi);
        let mu_ref = self.model.mean(&reference)?;
        let cov_ref = self.model.covariance_form(&reference)?;
        let direction = match mode {
            HyperplaneMode::Difference => self.mean_difference(),
            HyperplaneMode::Derivative => {
                resolve_jacobian(self.model, &reference)? * self.pair.step()
            }
        };
        let b = cov_ref.solve(&direction)?;
        let mu_tilde_0 = b.dot(&(&self.mean0 - &mu_ref));
        let mu_tilde_1 = b.dot(&(&self.mean1 - &mu_ref));
        let sigma2_tilde_0 = self.cov0.quadratic(&b)?;
        let sigma2_tilde_1 = self.cov1.quadratic(&b)?;
        let plan = AllrPlan {
            b,
            mu_ref,
            xi,
            mode,
            mu_tilde_0,
            mu_tilde_1,
            sigma2_tilde_0,
            sigma2_tilde_1,
        };
        if [mu_tilde_0, mu_tilde_1, sigma2_tilde_0, sigma2_tilde_1]
            .iter()
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("ALLR moments".into()));
        }
        Ok(plan)
    }
}

/// `θ̃(ξ) = ξ·θ0 + (1 − ξ)·θ1`.
pub fn linearization_point(pair: &HypothesisPair, xi: LinearizationCoefficient) -> ParameterPoint {
    let x = xi.value();
    let values = pair
        .theta0()
        .as_slice()
        .iter()
        .zip(pair.theta1().as_slice())
        .map(|(t0, t1)| x * t0 + (1.0 - x) * t1)
        .collect();
    ParameterPoint(values)
}

pub fn llr_hyperplane<M: StatisticModel + ?Sized>(
    model: &M,
    pair: &HypothesisPair,
    xi: LinearizationCoefficient,
    mode: HyperplaneMode,
) -> Result<DVector<f64>> {
    Ok(PreparedPair::new(model, pair)?.design(xi, mode)?.b)
}

/// `bᵀ(stat − μ_ref)`.
pub fn allr_evaluate(plan: &AllrPlan, stat: &DVector<f64>) -> Result<f64> {
    check_len("ALLR statistic", plan.b.len(), stat.len())?;
    Ok(plan.b.dot(&(stat - &plan.mu_ref)))
}

pub fn allr_design<M: StatisticModel + ?Sized>(
    model: &M,
    pair: &HypothesisPair,
    xi: LinearizationCoefficient,
    mode: HyperplaneMode,
) -> Result<AllrPlan> {
    PreparedPair::new(model, pair)?.design(xi, mode)
}

pub fn allr_moments<M: StatisticModel + ?Sized>(
    model: &M,
    pair: &HypothesisPair,
    xi: LinearizationCoefficient,
    mode: HyperplaneMode,
) -> Result<AllrMoments> {
    Ok(allr_design(model, pair, xi, mode)?.moments())
}

/// `(D(p0‖p1), D(p1‖p0))` estimate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct KlPair {
    pub d01: f64,
    pub d10: f64,
}

/// The four Kullback–Leibler approximations. Values are signed; a negative
/// entry means the linearization point is badly placed.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct KlEstimates {
    /// From the mean-difference hyperplane.
    pub difference: KlPair,
    /// From the mean-derivative hyperplane.
    pub derivative: KlPair,
    /// Fisher information at `θ̃(ξ)`.
    pub fisher: KlPair,
    /// `½ Δθᵀ F(θ_i) Δθ`, Fisher information at the respective hypothesis.
    pub literature: KlPair,
}

pub fn kl_estimates<M: StatisticModel + ?Sized>(
    model: &M,
    pair: &HypothesisPair,
    xi: LinearizationCoefficient,
) -> Result<KlEstimates> {
    let prepared = PreparedPair::new(model, pair)?;
    let diff = prepared.design(xi, HyperplaneMode::Difference)?;
    let der = prepared.design(xi, HyperplaneMode::Derivative)?;

    let step = pair.step();
    let reference = linearization_point(pair, xi).to_dvector();
    let f_ref = fisher_matrix(model, &ParameterPoint::from_dvector(&reference))?;
    let to_ref = &reference - pair.theta0().to_dvector();
    let from_ref = pair.theta1().to_dvector() - &reference;
    let f0 = fisher_matrix(model, pair.theta0())?;
    let f1 = fisher_matrix(model, pair.theta1())?;

    Ok(KlEstimates {
        difference: KlPair {
            d01: -diff.mu_tilde_0,
            d10: diff.mu_tilde_1,
        },
        derivative: KlPair {
            d01: -der.mu_tilde_0,
            d10: der.mu_tilde_1,
        },
        fisher: KlPair {
            d01: step.dot(&(&f_ref * to_ref)),
            d10: step.dot(&(&f_ref * from_ref)),
        },
        literature: KlPair {
            d01: 0.5 * step.dot(&(&f0 * &step)),
            d10: 0.5 * step.dot(&(&f1 * &step)),
        },
    })
}

/// `F(θ) = (∂μ/∂θ)ᵀ R(θ)⁻¹ (∂μ/∂θ)`.
pub fn fisher_matrix<M: StatisticModel + ?Sized>(
    model: &M,
    theta: &ParameterPoint,
) -> Result<DMatrix<f64>> {
    let jac = resolve_jacobian(model, theta)?;
    fisher_from_jacobian(model, theta, &jac)
}

/// Fisher matrix for an externally supplied mean Jacobian.
pub fn fisher_from_jacobian<M: StatisticModel + ?Sized>(
    model: &M,
    theta: &ParameterPoint,
    jacobian: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_len("mean jacobian rows", model.dim_stats(), jacobian.nrows())?;
    let cov = model.covariance_form(theta)?;
    let d = jacobian.ncols();
    let mut solved = DMatrix::zeros(jacobian.nrows(), d);
    for c in 0..d {
        let col = cov.solve(&jacobian.column(c).into_owned())?;
        solved.set_column(c, &col);
    }
    let f = jacobian.transpose() * solved;
    Ok((&f + f.transpose()) * 0.5)
}

/// Analytic mean Jacobian if the model has one, otherwise central finite
/// differences with the default step rule.
pub fn resolve_jacobian<M: StatisticModel + ?Sized>(
    model: &M,
    theta: &ParameterPoint,
) -> Result<DMatrix<f64>> {
    match model.mean_jacobian(theta) {
        Some(jac) => jac,
        None => finite_difference_jacobian(
            |u: &DVector<f64>| model.mean(&ParameterPoint::from_dvector(u)),
            &theta.to_dvector(),
            &theta.to_dvector(),
            LinearizationCoefficient::HALF,
            FiniteDifference::default(),
        ),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DifferenceScheme {
    #[default]
    Central,
    Forward,
    Backward,
}

/// Finite-difference settings. Without an explicit `step`, coordinate `k`
/// uses `h = max(1e-6, 1e-6·|u_k|)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FiniteDifference {
    pub scheme: DifferenceScheme,
    pub step: Option<f64>,
}

impl FiniteDifference {
    pub fn central(step: f64) -> Self {
        FiniteDifference {
            scheme: DifferenceScheme::Central,
            step: Some(step),
        }
    }

    fn step_for(&self, coordinate: f64) -> f64 {
        self.step
            .unwrap_or_else(|| (1e-6 * coordinate.abs()).max(1e-6))
    }
}

/// Jacobian of `f` at `ξ·u0 + (1 − ξ)·u1`.
pub fn finite_difference_jacobian<F>(
    f: F,
    u0: &DVector<f64>,
    u1: &DVector<f64>,
    xi: LinearizationCoefficient,
    settings: FiniteDifference,
) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    check_len("finite difference endpoints", u0.len(), u1.len())?;
    let at = u0 * xi.value() + u1 * (1.0 - xi.value());
    let centre = f(&at)?;
    ensure_finite(&centre)?;
    let mut jac = DMatrix::zeros(centre.len(), at.len());
    for k in 0..at.len() {
        let h = settings.step_for(at[k]);
        if !(h > 0.0) {
            return Err(Error::validation(format!(
                "finite difference step must be > 0, got {h}"
            )));
        }
        let shifted = |delta: f64| {
            let mut u = at.clone();
            u[k] += delta;
            f(&u).and_then(|v| ensure_finite(&v).map(|_| v))
        };
        let column = match settings.scheme {
            DifferenceScheme::Central => (shifted(h)? - shifted(-h)?) / (2.0 * h),
            DifferenceScheme::Forward => (shifted(h)? - &centre) / h,
            DifferenceScheme::Backward => (&centre - shifted(-h)?) / h,
        };
        check_len("finite difference output", centre.len(), column.len())?;
        jac.set_column(k, &column);
    }
    Ok(jac)
}

fn ensure_finite(v: &DVector<f64>) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(
            "function evaluation in finite differences".into(),
        ))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// `μ(θ) = θ`, `R = 1`.
    pub(crate) struct IdentityModel;

    impl StatisticModel for IdentityModel {
        type Sample = [f64];
        fn dim_params(&self) -> usize {
            1
        }
        fn dim_stats(&self) -> usize {
            1
        }
        fn mean(&self, theta: &ParameterPoint) -> Result<DVector<f64>> {
            Ok(DVector::from_element(1, theta.value()))
        }
        fn covariance(&self, _theta: &ParameterPoint) -> Result<DMatrix<f64>> {
            Ok(DMatrix::identity(1, 1))
        }
        fn statistic(&self, sample: &[f64]) -> Result<DVector<f64>> {
            Ok(DVector::from_column_slice(sample))
        }
    }

    /// Scalar zero-mean Gaussian with variance `1 + θ`: `φ(y) = y²`,
    /// `μ = 1 + θ`, `R = 2(1 + θ)²`.
    pub(crate) struct ScalarVarianceModel;

    impl StatisticModel for ScalarVarianceModel {
        type Sample = f64;
        fn dim_params(&self) -> usize {
            1
        }
        fn dim_stats(&self) -> usize {
            1
        }
        fn mean(&self, theta: &ParameterPoint) -> Result<DVector<f64>> {
            Ok(DVector::from_element(1, 1.0 + theta.value()))
        }
        fn covariance(&self, theta: &ParameterPoint) -> Result<DMatrix<f64>> {
            let v = 1.0 + theta.value();
            Ok(DMatrix::from_element(1, 1, 2.0 * v * v))
        }
        fn statistic(&self, sample: &f64) -> Result<DVector<f64>> {
            Ok(DVector::from_element(1, sample * sample))
        }
    }

    fn xi(v: f64) -> LinearizationCoefficient {
        LinearizationCoefficient::new(v).unwrap()
    }

    #[test]
    fn linearization_point_examples() {
        let pair = HypothesisPair::scalar(0.0, 1.0).unwrap();
        assert_eq!(linearization_point(&pair, xi(0.5)).value(), 0.5);
        let equal = HypothesisPair::new_unchecked(
            ParameterPoint::scalar(2.0).unwrap(),
            ParameterPoint::scalar(2.0).unwrap(),
        )
        .unwrap();
        assert_eq!(linearization_point(&equal, xi(0.3)).value(), 2.0);
        let pair = HypothesisPair::scalar(0.1, 0.4).unwrap();
        assert_eq!(linearization_point(&pair, xi(1.0)).value(), 0.1);
    }

    #[test]
    fn coefficient_and_pair_validation() {
        assert!(LinearizationCoefficient::new(-0.01).is_err());
        assert!(LinearizationCoefficient::new(1.01).is_err());
        assert!(HypothesisPair::scalar(0.3, 0.3).is_err());
        let err = HypothesisPair::new(
            ParameterPoint::new(vec![0.0, 1.0]).unwrap(),
            ParameterPoint::scalar(1.0).unwrap(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
        assert!(ParameterPoint::snr(-1.0).is_err());
        assert!(ParameterPoint::scalar(f64::NAN).is_err());
    }

    #[test]
    fn identity_model_hyperplane_is_parameter_step() {
        let pair = HypothesisPair::scalar(0.2, 0.9).unwrap();
        for mode in [HyperplaneMode::Difference, HyperplaneMode::Derivative] {
            let b = llr_hyperplane(&IdentityModel, &pair, xi(0.4), mode).unwrap();
            assert!((b[0] - 0.7).abs() < 1e-9, "{mode:?}: {}", b[0]);
        }
    }

    #[test]
    fn scalar_gaussian_hyperplane_and_allr() {
        let pair = HypothesisPair::scalar(0.0, 1.0).unwrap();
        let plan = allr_design(
            &ScalarVarianceModel,
            &pair,
            xi(0.5),
            HyperplaneMode::Difference,
        )
        .unwrap();
        // b = 1 / (2 * 1.5^2)
        assert!((plan.b[0] - 1.0 / 4.5).abs() < 1e-12);
        assert!((plan.mu_ref[0] - 1.5).abs() < 1e-12);
        let v = allr_evaluate(&plan, &DVector::from_element(1, 4.0)).unwrap();
        assert!((v - 2.5 / 4.5).abs() < 1e-12);
        assert!((v - 0.55556).abs() < 1e-5);
        assert_eq!(allr_evaluate(&plan, &plan.mu_ref.clone()).unwrap(), 0.0);
        assert!(allr_evaluate(&plan, &DVector::zeros(2)).is_err());
    }

    #[test]
    fn zero_hyperplane_gives_zero_allr() {
        let plan = AllrPlan {
            b: DVector::zeros(3),
            mu_ref: DVector::from_column_slice(&[1.0, 2.0, 3.0]),
            xi: LinearizationCoefficient::HALF,
            mode: HyperplaneMode::Difference,
            mu_tilde_0: 0.0,
            mu_tilde_1: 0.0,
            sigma2_tilde_0: 0.0,
            sigma2_tilde_1: 0.0,
        };
        let stat = DVector::from_column_slice(&[-4.0, 7.0, 0.5]);
        assert_eq!(allr_evaluate(&plan, &stat).unwrap(), 0.0);
    }

    #[test]
    fn scalar_gaussian_allr_moments() {
        let pair = HypothesisPair::scalar(0.0, 1.0).unwrap();
        let m = allr_moments(
            &ScalarVarianceModel,
            &pair,
            xi(0.5),
            HyperplaneMode::Difference,
        )
        .unwrap();
        assert!((m.mu_tilde_1 - 0.5 / 4.5).abs() < 1e-12);
        assert!((m.mu_tilde_0 + 0.5 / 4.5).abs() < 1e-12);
        let b = 1.0 / 4.5;
        assert!((m.sigma2_tilde_1 - b * b * 8.0).abs() < 1e-12);
        assert!((m.sigma2_tilde_1 - 0.39506).abs() < 1e-5);
        assert!((m.sigma2_tilde_0 - b * b * 2.0).abs() < 1e-12);
    }

    #[test]
    fn endpoint_xi_zeroes_the_matching_mean() {
        let pair = HypothesisPair::scalar(0.3, 1.7).unwrap();
        for mode in [HyperplaneMode::Difference, HyperplaneMode::Derivative] {
            let at0 = allr_moments(&ScalarVarianceModel, &pair, xi(1.0), mode).unwrap();
            assert!(at0.mu_tilde_0.abs() < 1e-14);
            let at1 = allr_moments(&ScalarVarianceModel, &pair, xi(0.0), mode).unwrap();
            assert!(at1.mu_tilde_1.abs() < 1e-14);
        }
    }

    #[test]
    fn forced_equal_hypotheses_zero_everything() {
        let p = ParameterPoint::scalar(0.4).unwrap();
        let pair = HypothesisPair::new_unchecked(p.clone(), p).unwrap();
        let b = llr_hyperplane(
            &ScalarVarianceModel,
            &pair,
            xi(0.5),
            HyperplaneMode::Difference,
        )
        .unwrap();
        assert_eq!(b[0], 0.0);
        let kl = kl_estimates(&ScalarVarianceModel, &pair, xi(0.5)).unwrap();
        for v in [
            kl.difference.d01,
            kl.difference.d10,
            kl.derivative.d01,
            kl.derivative.d10,
            kl.fisher.d01,
            kl.fisher.d10,
            kl.literature.d01,
            kl.literature.d10,
        ] {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn scalar_gaussian_fisher() {
        // F = 1 / (2 (1 + θ)^2)
        let f0 =
            fisher_matrix(&ScalarVarianceModel, &ParameterPoint::scalar(0.0).unwrap()).unwrap();
        assert!((f0[(0, 0)] - 0.5).abs() < 1e-9);
        let f1 =
            fisher_matrix(&ScalarVarianceModel, &ParameterPoint::scalar(1.0).unwrap()).unwrap();
        assert!((f1[(0, 0)] - 0.125).abs() < 1e-9);
    }

    #[test]
    fn literature_kl_restates_fisher_formula() {
        let pair = HypothesisPair::scalar(0.0, 1.0).unwrap();
        let kl = kl_estimates(&ScalarVarianceModel, &pair, xi(0.5)).unwrap();
        assert!((kl.literature.d10 - 0.5 * 1.0 * 0.125).abs() < 1e-9);
        assert!((kl.literature.d01 - 0.5 * 1.0 * 0.5).abs() < 1e-9);
        assert!((kl.difference.d10 - 0.11111).abs() < 1e-5);
    }

    #[test]
    fn zero_jacobian_gives_zero_fisher() {
        struct Flat;
        impl StatisticModel for Flat {
            type Sample = [f64];
            fn dim_params(&self) -> usize {
                1
            }
            fn dim_stats(&self) -> usize {
                2
            }
            fn mean(&self, _t: &ParameterPoint) -> Result<DVector<f64>> {
                Ok(DVector::from_column_slice(&[1.0, -1.0]))
            }
            fn covariance(&self, _t: &ParameterPoint) -> Result<DMatrix<f64>> {
                Ok(DMatrix::identity(2, 2))
            }
            fn statistic(&self, s: &[f64]) -> Result<DVector<f64>> {
                Ok(DVector::from_column_slice(s))
            }
        }
        let f = fisher_matrix(&Flat, &ParameterPoint::scalar(3.0).unwrap()).unwrap();
        assert_eq!(f[(0, 0)], 0.0);
    }

    #[test]
    fn finite_difference_examples() {
        let square = |u: &DVector<f64>| Ok(u.map(|x| x * x));
        let u0 = DVector::from_element(1, 1.0);
        let u1 = DVector::from_element(1, 2.0);
        let j = finite_difference_jacobian(square, &u0, &u1, xi(0.5), FiniteDifference::default())
            .unwrap();
        assert!((j[(0, 0)] - 3.0).abs() < 1e-8);

        let constant = |_: &DVector<f64>| Ok(DVector::from_element(2, 7.0));
        let j =
            finite_difference_jacobian(constant, &u0, &u1, xi(0.2), FiniteDifference::default())
                .unwrap();
        assert!(j.iter().all(|v| *v == 0.0));

        let sine = |u: &DVector<f64>| Ok(u.map(f64::sin));
        let zero = DVector::zeros(1);
        let j = finite_difference_jacobian(
            sine,
            &zero,
            &zero,
            xi(0.5),
            FiniteDifference::central(1e-5),
        )
        .unwrap();
        assert!((j[(0, 0)] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn one_sided_schemes_recover_endpoint_slopes() {
        let square = |u: &DVector<f64>| Ok(u.map(|x| x * x));
        let u0 = DVector::from_element(1, 1.0);
        let u1 = DVector::from_element(1, 2.0);
        let forward = FiniteDifference {
            scheme: DifferenceScheme::Forward,
            step: Some(1e-7),
        };
        let j = finite_difference_jacobian(square, &u0, &u1, xi(1.0), forward).unwrap();
        assert!((j[(0, 0)] - 2.0).abs() < 1e-5);
        let backward = FiniteDifference {
            scheme: DifferenceScheme::Backward,
            step: Some(1e-7),
        };
        let j = finite_difference_jacobian(square, &u0, &u1, xi(0.0), backward).unwrap();
        assert!((j[(0, 0)] - 4.0).abs() < 1e-5);
    }

    #[test]
    fn non_finite_function_values_are_rejected() {
        let bad = |u: &DVector<f64>| Ok(u.map(|x| if x > 0.0 { f64::NAN } else { x }));
        let u = DVector::zeros(1);
        let err = finite_difference_jacobian(bad, &u, &u, xi(0.5), FiniteDifference::default())
            .unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn kronecker_form_matches_dense() {
        let base = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let form = CovarianceForm::ScaledKronecker {
            scale: 2.0,
            base: base.clone(),
        };
        let dense = CovarianceForm::Dense(form.to_dense());
        let rhs = DVector::from_column_slice(&[1.0, -0.5, -0.5, 2.0]);
        let a = form.solve(&rhs).unwrap();
        let b = dense.solve(&rhs).unwrap();
        assert!((a - b).norm() < 1e-12);
        let v = DVector::from_column_slice(&[0.3, 1.0, -2.0, 0.7]);
        assert!((form.quadratic(&v).unwrap() - dense.quadratic(&v).unwrap()).abs() < 1e-12);
    }
}
