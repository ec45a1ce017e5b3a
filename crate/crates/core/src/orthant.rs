//! Orthant probabilities and sign-product moments of zero-mean Gaussian
//! vectors up to dimension four.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::quadrature::integrate;

/// Correlations are clamped to `±(1 − CLAMP)` before any arcsine.
pub const CORRELATION_CLAMP: f64 = 1e-12;

/// Absolute tolerance of the fourth-order path integral.
pub const QUADRATURE_TOL: f64 = 1e-8;

/// Pairs this close to `|ρ| = 1` are treated as perfectly coupled.
const COLLAPSE_TOL: f64 = 1e-9;

pub fn clamp_correlation(rho: f64) -> f64 {
    rho.clamp(-1.0 + CORRELATION_CLAMP, 1.0 - CORRELATION_CLAMP)
}

/// `E[sign(x) sign(y)] = (2/π) arcsin ρ`.
pub fn arcsine_law(rho: f64) -> f64 {
    2.0 / PI * clamp_correlation(rho).asin()
}

/// `E[s1 s2 s3 s4]` for a unit-diagonal correlation matrix.
///
/// The fourth variable is coupled in along `ρ_{j4} → t·ρ_{j4}`, `t ∈ [0, 1]`.
/// At `t = 0` the moment vanishes, and its derivative follows from Price's
/// theorem as a sum of conditional arcsine terms.
pub fn fourth_sign_moment(c: &[[f64; 4]; 4]) -> Result<f64> {
    let mut r = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            r[i][j] = if i == j {
                1.0
            } else {
                clamp_correlation(c[i][j])
            };
        }
    }
    if (0..3).all(|j| r[j][3] == 0.0) {
        return Ok(0.0);
    }
    // A (nearly) deterministic pair s_b = ±s_a leaves E[s_c s_d].
    for a in 0..4 {
        for b in (a + 1)..4 {
            if r[a][b].abs() >= 1.0 - COLLAPSE_TOL {
                let mut rest = (0..4).filter(|&x| x != a && x != b);
                let (c, d) = (rest.next().unwrap_or(0), rest.next().unwrap_or(0));
                return Ok(r[a][b].signum() * arcsine_law(r[c][d]));
            }
        }
    }
    let integrand = |t: f64| -> f64 {
        let mut s = 0.0;
        for j in 0..3 {
            let rj4 = r[j][3];
            if rj4 == 0.0 {
                continue;
            }
            let (a, b) = match j {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let tj = t * rj4;
            let ta = t * r[a][3];
            let tb = t * r[b][3];
            let d = 1.0 - tj * tj;
            let (raj, rbj) = (r[a][j], r[b][j]);
            let caa = 1.0 - (raj * raj - 2.0 * tj * raj * ta + ta * ta) / d;
            let cbb = 1.0 - (rbj * rbj - 2.0 * tj * rbj * tb + tb * tb) / d;
            let cab = r[a][b] - (raj * rbj - tj * (raj * tb + ta * rbj) + ta * tb) / d;
            let denom = (caa * cbb).max(0.0).sqrt();
            let partial = if denom > 0.0 {
                (cab / denom).clamp(-1.0, 1.0)
            } else {
                cab.signum()
            };
            s += rj4 * 4.0 * partial.asin() / (PI * PI * d.sqrt());
        }
        s
    };
    // t = 1 − s² removes the inverse-square-root endpoint behaviour of
    // strongly coupled columns.
    integrate(
        |s| 2.0 * s * integrand(1.0 - s * s),
        0.0,
        1.0,
        QUADRATURE_TOL,
    )
}

/// `P(x ≥ 0)` for `x ~ N(0, R)`, `R` a correlation matrix of dimension 2–4.
pub fn orthant_probability(r: &DMatrix<f64>) -> Result<f64> {
    let n = r.nrows();
    if !(2..=4).contains(&n) {
        return Err(Error::validation(format!(
            "orthant probability supports dimensions 2..=4, got {n}"
        )));
    }
    validate_correlation(r)?;
    let pair_sum: f64 = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| arcsine_law(r[(i, j)]))
        .sum();
    // P(all ≥ 0) = 2^-n Σ_S E[Π_{i∈S} s_i]; odd-order moments vanish.
    Ok(match n {
        2 => 0.25 + clamp_correlation(r[(0, 1)]).asin() / (2.0 * PI),
        3 => (1.0 + pair_sum) / 8.0,
        _ => {
            let c = to_array4(r);
            (1.0 + pair_sum + fourth_sign_moment(&c)?) / 16.0
        }
    })
}

/// `E[z_i z_j z_k z_l]` for hard-limited `y ~ N(0, R_y)`. Repeated indices
/// cancel pairwise; an odd number of distinct survivors gives zero.
pub fn sign_product_moment(r_y: &DMatrix<f64>, indices: [usize; 4]) -> Result<f64> {
    let n = r_y.nrows();
    if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
        return Err(Error::validation(format!(
            "index {bad} out of range for dimension {n}"
        )));
    }
    let mut odd: Vec<usize> = Vec::with_capacity(4);
    for &i in &indices {
        match odd.iter().position(|&x| x == i) {
            Some(p) => {
                odd.remove(p);
            }
            None => odd.push(i),
        }
    }
    let corr = |a: usize, b: usize| r_y[(a, b)] / (r_y[(a, a)] * r_y[(b, b)]).sqrt();
    match odd.len() {
        0 => Ok(1.0),
        2 => Ok(arcsine_law(corr(odd[0], odd[1]))),
        4 => {
            let mut c = [[1.0; 4]; 4];
            for a in 0..4 {
                for b in 0..4 {
                    if a != b {
                        c[a][b] = corr(odd[a], odd[b]);
                    }
                }
            }
            fourth_sign_moment(&c)
        }
        _ => Ok(0.0),
    }
}

fn to_array4(r: &DMatrix<f64>) -> [[f64; 4]; 4] {
    let mut c = [[0.0; 4]; 4];
    for (i, row) in c.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = r[(i, j)];
        }
    }
    c
}

fn validate_correlation(r: &DMatrix<f64>) -> Result<()> {
    let n = r.nrows();
    if !r.is_square() {
        return Err(Error::validation("correlation matrix must be square"));
    }
    for i in 0..n {
        if (r[(i, i)] - 1.0).abs() > 1e-12 {
            return Err(Error::validation(
                "correlation matrix needs a unit diagonal",
            ));
        }
        for j in 0..n {
            let v = r[(i, j)];
            if !v.is_finite() || v.abs() > 1.0 + 1e-12 || (v - r[(j, i)]).abs() > 1e-12 {
                return Err(Error::validation("invalid correlation matrix entry"));
            }
        }
    }
    if r.clone().symmetric_eigenvalues().min() < -1e-10 {
        return Err(Error::validation(
            "correlation matrix is not positive semidefinite",
        ));
    }
    Ok(())
}
