//! Unquantized zero-mean Gaussian blocks as an exponential family with
//! quadratic sufficient statistics `φ(y) = vec(yyᵀ)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::expfam::{
    CovarianceForm, HyperplaneMode, HypothesisPair, LinearizationCoefficient, ParameterPoint,
    PreparedPair, StatisticModel,
};
use crate::linalg::{vec_of, SpdFactor};
use crate::scenario::{AffineCovariance, CovarianceScenario};

/// `μ_φ(θ) = vec(R_y(θ))`, `R_φ(θ) = 2(R_y ⊗ R_y)`.
#[derive(Debug, Clone)]
pub struct GaussianQuadraticModel {
    scenario: CovarianceScenario,
    affine: AffineCovariance,
}

impl GaussianQuadraticModel {
    pub fn new(scenario: CovarianceScenario) -> Result<Self> {
        let affine = scenario.affine()?;
        Ok(GaussianQuadraticModel { scenario, affine })
    }

    pub fn scenario(&self) -> &CovarianceScenario {
        &self.scenario
    }

    /// Block dimension `MK`.
    pub fn block_dim(&self) -> usize {
        self.affine.dim()
    }

    /// `R_y(θ)`.
    pub fn block_covariance(&self, theta: &ParameterPoint) -> Result<DMatrix<f64>> {
        check_len("gaussian model parameter", 1, theta.dim())?;
        let t = theta.value();
        if t < 0.0 {
            return Err(Error::validation(format!(
                "linear SNR must be >= 0, got {t}"
            )));
        }
        Ok(self.affine.at(t))
    }
}

impl StatisticModel for GaussianQuadraticModel {
    type Sample = [f64];

    fn dim_params(&self) -> usize {
        1
    }

    fn dim_stats(&self) -> usize {
        self.block_dim() * self.block_dim()
    }

    fn mean(&self, theta: &ParameterPoint) -> Result<DVector<f64>> {
        Ok(vec_of(&self.block_covariance(theta)?))
    }

    fn covariance(&self, theta: &ParameterPoint) -> Result<DMatrix<f64>> {
        Ok(self.covariance_form(theta)?.to_dense())
    }

    fn covariance_form(&self, theta: &ParameterPoint) -> Result<CovarianceForm> {
        Ok(CovarianceForm::ScaledKronecker {
            scale: 2.0,
            base: self.block_covariance(theta)?,
        })
    }

    fn statistic(&self, y: &[f64]) -> Result<DVector<f64>> {
        check_len("gaussian block", self.block_dim(), y.len())?;
        let y = DVector::from_column_slice(y);
        Ok(vec_of(&(&y * y.transpose())))
    }

    fn mean_jacobian(&self, _theta: &ParameterPoint) -> Option<Result<DMatrix<f64>>> {
        let d = self.affine.source.as_slice();
        Some(Ok(DMatrix::from_column_slice(d.len(), 1, d)))
    }
}

/// Exact Gaussian LLR `ln p1(y) − ln p0(y)` with precomputed factorizations.
#[derive(Debug, Clone)]
pub struct ExactGaussianLlr {
    /// `½(R0⁻¹ − R1⁻¹)`
    quadratic: DMatrix<f64>,
    /// `½ ln(det R0 / det R1)`
    offset: f64,
}

impl ExactGaussianLlr {
    pub fn new(r0: &DMatrix<f64>, r1: &DMatrix<f64>) -> Result<Self> {
        check_len("exact LLR covariances", r0.nrows(), r1.nrows())?;
        let f0 = SpdFactor::new(r0)?;
        let f1 = SpdFactor::new(r1)?;
        let q = (f0.inverse() - f1.inverse()) * 0.5;
        Ok(ExactGaussianLlr {
            quadratic: (&q + q.transpose()) * 0.5,
            offset: 0.5 * (f0.ln_determinant() - f1.ln_determinant()),
        })
    }

    pub fn dim(&self) -> usize {
        self.quadratic.nrows()
    }

    pub fn evaluate(&self, y: &[f64]) -> Result<f64> {
        check_len("exact LLR sample", self.dim(), y.len())?;
        let n = y.len();
        let mut acc = 0.0;
        for j in 0..n {
            let col = self.quadratic.column(j);
            let mut s = 0.0;
            for i in 0..n {
                s += col[i] * y[i];
            }
            acc += s * y[j];
        }
        Ok(acc + self.offset)
    }
}

/// `½yᵀ(R0⁻¹ − R1⁻¹)y + ½ln(det R0 / det R1)`.
pub fn gaussian_exact_llr(y: &[f64], r0: &DMatrix<f64>, r1: &DMatrix<f64>) -> Result<f64> {
    ExactGaussianLlr::new(r0, r1)?.evaluate(y)
}

/// Expected exact LLR per block under H0 and H1; `μ0 = −D(p0‖p1)`,
/// `μ1 = D(p1‖p0)`.
///
/// Both are evaluated as `½Σ(λ − ln(1 + λ))` over the eigenvalues of the
/// whitened covariance difference, which stays accurate when the two
/// covariances nearly coincide.
pub fn gaussian_llr_means(r0: &DMatrix<f64>, r1: &DMatrix<f64>) -> Result<(f64, f64)> {
    check_len("LLR mean covariances", r0.nrows(), r1.nrows())?;
    let d01 = gaussian_kl(r0, r1)?;
    let d10 = gaussian_kl(r1, r0)?;
    Ok((-d01, d10))
}

/// `D(N(0, p) ‖ N(0, q))`.
fn gaussian_kl(p: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<f64> {
    let l = SpdFactor::new(q)?.lower();
    let diff = p - q;
    let x = l
        .solve_lower_triangular(&diff)
        .ok_or_else(|| Error::Conditioning("singular covariance factor".into()))?;
    let a = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::Conditioning("singular covariance factor".into()))?;
    let a = (&a + a.transpose()) * 0.5;
    let mut kl = 0.0;
    for lambda in a.symmetric_eigenvalues().iter() {
        if *lambda <= -1.0 {
            return Err(Error::Conditioning(
                "covariance ratio is not positive definite".into(),
            ));
        }
        kl += lambda_minus_log1p(*lambda);
    }
    let kl = 0.5 * kl;
    if !kl.is_finite() {
        return Err(Error::NonFinite("Gaussian KL divergence".into()));
    }
    Ok(kl)
}

/// `λ − ln(1 + λ)`, with a series near zero.
fn lambda_minus_log1p(lambda: f64) -> f64 {
    if lambda.abs() < 1e-3 {
        let l2 = lambda * lambda;
        l2 * (0.5 - lambda / 3.0 + l2 / 4.0 - l2 * lambda / 5.0)
    } else {
        lambda - lambda.ln_1p()
    }
}

/// Relative errors of the ALLR means (`tilde`) and of the Fisher-at-endpoint
/// KL approximation (`hat`) against the exact LLR means.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ApproximationErrors {
    pub eps0_tilde: f64,
    pub eps1_tilde: f64,
    pub eps0_hat: f64,
    pub eps1_hat: f64,
}

pub fn approximation_errors(
    model: &GaussianQuadraticModel,
    pair: &HypothesisPair,
    xi: LinearizationCoefficient,
) -> Result<ApproximationErrors> {
    let r0 = model.block_covariance(pair.theta0())?;
    let r1 = model.block_covariance(pair.theta1())?;
    let exact = gaussian_llr_means(&r0, &r1)?;
    let prepared = PreparedPair::new(model, pair)?;
    let plan = prepared.design(xi, HyperplaneMode::Difference)?;
    let kl = crate::expfam::kl_estimates(model, pair, xi)?;
    errors_from_parts(
        (plan.mu_tilde_0, plan.mu_tilde_1),
        exact,
        (kl.literature.d01, kl.literature.d10),
    )
}

/// Assembles [`ApproximationErrors`] from ALLR means, exact LLR means and the
/// literature KL pair.
pub fn errors_from_parts(
    mu_tilde: (f64, f64),
    mu_exact: (f64, f64),
    kl_literature: (f64, f64),
) -> Result<ApproximationErrors> {
    let (mu0, mu1) = mu_exact;
    if mu0 == 0.0 || mu1 == 0.0 {
        return Err(Error::Degenerate("exact LLR mean is zero".into()));
    }
    let (d01, d10) = (-mu0, mu1);
    Ok(ApproximationErrors {
        eps0_tilde: (mu_tilde.0.abs() - mu0.abs()) / mu0.abs(),
        eps1_tilde: (mu_tilde.1.abs() - mu1.abs()) / mu1.abs(),
        eps0_hat: (kl_literature.0 - d01) / d01,
        eps1_hat: (kl_literature.1 - d10) / d10,
    })
}
