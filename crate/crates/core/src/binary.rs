//! One-bit (hard-limited) observations modelled through their pairwise sign
//! products.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::expfam::{ParameterPoint, StatisticModel};
use crate::orthant::{arcsine_law, clamp_correlation, fourth_sign_moment};
use crate::scenario::{AffineCovariance, CovarianceScenario};

/// Eigenvalues below this are a hard error in the moment covariance.
pub const PSD_REPAIR_LIMIT: f64 = 1e-8;

/// A vector with entries in `{−1, +1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignVector(Vec<i8>);

impl SignVector {
    pub fn new(entries: Vec<i8>) -> Result<Self> {
        if entries.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::validation("sign vector entries must be -1 or +1"));
        }
        Ok(SignVector(entries))
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn negated(&self) -> SignVector {
        SignVector(self.0.iter().map(|s| -s).collect())
    }
}

/// `+1` where `y ≥ 0`, `−1` otherwise.
pub fn hard_limit(y: &[f64]) -> Result<SignVector> {
    let mut out = Vec::with_capacity(y.len());
    hard_limit_into(y, &mut out)?;
    Ok(SignVector(out))
}

/// Allocation-free variant of [`hard_limit`] writing into `out`.
pub fn hard_limit_into(y: &[f64], out: &mut Vec<i8>) -> Result<()> {
    out.clear();
    for &v in y {
        if !v.is_finite() {
            return Err(Error::NonFinite("hard-limiter input".into()));
        }
        out.push(if v >= 0.0 { 1 } else { -1 });
    }
    Ok(())
}

/// Index pairs `(i, j)`, `i < j`, in row-major order.
pub fn pair_index(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect()
}

/// `z_i z_j` for every `i < j`.
pub fn pair_statistics(z: &SignVector) -> DVector<f64> {
    let n = z.len();
    let s = z.as_slice();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            out.push(f64::from(s[i] * s[j]));
        }
    }
    DVector::from_vec(out)
}

/// Normalizes a covariance to unit diagonal.
pub fn correlation_of(r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = r.nrows();
    let d: Vec<f64> = (0..n).map(|i| r[(i, i)]).collect();
    if d.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::validation("covariance diagonal must be positive"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            r[(i, j)] / (d[i] * d[j]).sqrt()
        }
    }))
}

/// Mean and covariance of the pairwise sign products.
#[derive(Debug, Clone)]
pub struct BinaryMoments {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    /// Diagonal shift applied by the PSD repair (0 when none was needed).
    pub psd_shift: f64,
}

/// Pairwise arcsine means of a correlation matrix in [`pair_index`] order.
pub fn pair_means(corr: &DMatrix<f64>) -> DVector<f64> {
    let n = corr.nrows();
    DVector::from_iterator(
        n * n.saturating_sub(1) / 2,
        pair_index(n)
            .into_iter()
            .map(|(i, j)| arcsine_law(corr[(i, j)])),
    )
}

/// `C(n, k)` for small `k`.
fn choose(n: usize, k: usize) -> usize {
    if n < k {
        return 0;
    }
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Colex rank of a sorted 4-set `a < b < c < d`.
fn quad_rank(q: [usize; 4]) -> usize {
    choose(q[0], 1) + choose(q[1], 2) + choose(q[2], 3) + choose(q[3], 4)
}

/// Fourth-order sign moments for every 4-subset, indexed by colex rank.
fn all_fourth_moments(corr: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = corr.nrows();
    let mut quads = Vec::with_capacity(choose(n, 4));
    for d in 3..n {
        for c in 2..d {
            for b in 1..c {
                for a in 0..b {
                    quads.push([a, b, c, d]);
                }
            }
        }
    }
    quads
        .par_iter()
        .map(|q| {
            let mut m = [[1.0; 4]; 4];
            for x in 0..4 {
                for y in 0..4 {
                    if x != y {
                        m[x][y] = corr[(q[x], q[y])];
                    }
                }
            }
            fourth_sign_moment(&m)
        })
        .collect()
}

/// Mean `(2/π)arcsin ρ_ij` and covariance `E[z_i z_j z_k z_l] − m_ij m_kl`
/// of the pair statistics of hard-limited `N(0, R_y)` blocks.
pub fn binary_suffstat_moments(r_y: &DMatrix<f64>) -> Result<BinaryMoments> {
    let corr = correlation_of(r_y)?;
    let n = corr.nrows();
    let pairs = pair_index(n);
    let mean = pair_means(&corr);
    let fourth = all_fourth_moments(&corr)?;
    let second = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            arcsine_law(corr[(i, j)])
        }
    });

    let c = pairs.len();
    let mut cov = DMatrix::zeros(c, c);
    for p in 0..c {
        let (i, j) = pairs[p];
        cov[(p, p)] = 1.0 - mean[p] * mean[p];
        for q in (p + 1)..c {
            let (k, l) = pairs[q];
            let moment = if i == k {
                second[(j, l)]
            } else if j == l {
                second[(i, k)]
            } else if j == k {
                second[(i, l)]
            } else if i == l {
                second[(j, k)]
            } else {
                let mut s = [i, j, k, l];
                s.sort_unstable();
                fourth[quad_rank(s)]
            };
            let v = moment - mean[p] * mean[q];
            cov[(p, q)] = v;
            cov[(q, p)] = v;
        }
    }
    let psd_shift = repair_psd(&mut cov)?;
    Ok(BinaryMoments {
        mean,
        covariance: cov,
        psd_shift,
    })
}

/// Lifts the diagonal when the smallest eigenvalue is slightly negative.
fn repair_psd(cov: &mut DMatrix<f64>) -> Result<f64> {
    if cov.nrows() == 0 || cov.clone().cholesky().is_some() {
        return Ok(0.0);
    }
    let min = cov.clone().symmetric_eigenvalues().min();
    if min >= 0.0 {
        return Ok(0.0);
    }
    if min <= -PSD_REPAIR_LIMIT {
        return Err(Error::Conditioning(format!(
            "sign-product covariance has eigenvalue {min:.3e}"
        )));
    }
    let shift = min.abs() + 1e-12;
    for i in 0..cov.nrows() {
        cov[(i, i)] += shift;
    }
    Ok(shift)
}

/// Exponential-family surrogate for hard-limited scenario data: statistics
/// `z_i z_j` (`i < j`) with Gaussian-orthant moments.
#[derive(Debug, Clone)]
pub struct BinaryPairwiseModel {
    scenario: CovarianceScenario,
    affine: AffineCovariance,
    pairs: Vec<(usize, usize)>,
}

impl BinaryPairwiseModel {
    pub fn new(scenario: CovarianceScenario) -> Result<Self> {
        let affine = scenario.affine()?;
        let pairs = pair_index(affine.dim());
        Ok(BinaryPairwiseModel {
            scenario,
            affine,
            pairs,
        })
    }

    pub fn scenario(&self) -> &CovarianceScenario {
        &self.scenario
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn block_dim(&self) -> usize {
        self.affine.dim()
    }

    pub fn block_covariance(&self, theta: &ParameterPoint) -> Result<DMatrix<f64>> {
        check_len("binary model parameter", 1, theta.dim())?;
        let t = theta.value();
        if t < 0.0 {
            return Err(Error::validation(format!(
                "linear SNR must be >= 0, got {t}"
            )));
        }
        Ok(self.affine.at(t))
    }

    pub fn moments(&self, theta: &ParameterPoint) -> Result<BinaryMoments> {
        binary_suffstat_moments(&self.block_covariance(theta)?)
    }
}

impl StatisticModel for BinaryPairwiseModel {
    type Sample = SignVector;

    fn dim_params(&self) -> usize {
        1
    }

    fn dim_stats(&self) -> usize {
        self.pairs.len()
    }

    fn mean(&self, theta: &ParameterPoint) -> Result<DVector<f64>> {
        Ok(pair_means(&correlation_of(&self.block_covariance(theta)?)?))
    }

    fn covariance(&self, theta: &ParameterPoint) -> Result<DMatrix<f64>> {
        Ok(self.moments(theta)?.covariance)
    }

    fn statistic(&self, z: &SignVector) -> Result<DVector<f64>> {
        check_len("sign vector", self.block_dim(), z.len())?;
        Ok(pair_statistics(z))
    }

    /// `(2/π) ρ'_ij / √(1 − ρ_ij²)` with
    /// `ρ'_ij = S_ij/√(R_ii R_jj) − ½ρ_ij (S_ii/R_ii + S_jj/R_jj)`.
    fn mean_jacobian(&self, theta: &ParameterPoint) -> Option<Result<DMatrix<f64>>> {
        let r = match self.block_covariance(theta) {
            Ok(r) => r,
            Err(e) => return Some(Err(e)),
        };
        let s = &self.affine.source;
        let col = self.pairs.iter().map(|&(i, j)| {
            let scale = (r[(i, i)] * r[(j, j)]).sqrt();
            let rho = clamp_correlation(r[(i, j)] / scale);
            let drho =
                s[(i, j)] / scale - 0.5 * rho * (s[(i, i)] / r[(i, i)] + s[(j, j)] / r[(j, j)]);
            2.0 / PI * drho / (1.0 - rho * rho).sqrt()
        });
        Some(Ok(DMatrix::from_iterator(self.pairs.len(), 1, col)))
    }
}
