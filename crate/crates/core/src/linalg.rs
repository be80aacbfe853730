//! Structured complex linear algebra shared by the channel model and the
//! estimators.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`; storage is column-major, so
//! [`vec`] is a plain copy of the backing slice.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Relative threshold used by [`numerical_rank`] and the pseudo-inverse.
pub const RANK_TOL: f64 = 1e-10;

const HERMITIAN_TOL: f64 = 1e-8;
const PSD_CLAMP: f64 = 1e-10;
const INV_COND: f64 = 1e-12;

pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Column-major vectorization.
pub fn vec(m: &ComplexMatrix) -> ComplexVector {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`].
pub fn unvec(v: &ComplexVector, rows: usize, cols: usize) -> Result<ComplexMatrix> {
    if v.len() != rows * cols {
        return Err(Error::DimensionMismatch {
            op: "unvec",
            detail: format!("length {} is not {rows}x{cols}", v.len()),
        });
    }
    Ok(DMatrix::from_column_slice(rows, cols, v.as_slice()))
}

pub fn all_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn kronecker(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (br, bc) = b.shape();
    let mut out = DMatrix::zeros(a.nrows() * br, a.ncols() * bc);
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let aij = a[(i, j)];
            if aij == Complex64::ZERO {
                continue;
            }
            for l in 0..bc {
                for k in 0..br {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Column-wise Kronecker product.
pub fn khatri_rao(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            op: "khatri_rao",
            detail: format!("column counts {} and {}", a.ncols(), b.ncols()),
        });
    }
    let (ar, br) = (a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(ar * br, a.ncols());
    for j in 0..a.ncols() {
        for i in 0..ar {
            let aij = a[(i, j)];
            for k in 0..br {
                out[(i * br + k, j)] = aij * b[(k, j)];
            }
        }
    }
    Ok(out)
}

pub fn identity(n: usize) -> ComplexMatrix {
    DMatrix::identity(n, n)
}

fn frob(m: &ComplexMatrix) -> f64 {
    m.norm()
}

fn check_hermitian(a: &ComplexMatrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            op: "hermitian",
            detail: format!("{}x{} is not square", a.nrows(), a.ncols()),
        });
    }
    let scale = frob(a);
    if scale == 0.0 {
        return Ok(());
    }
    let asym = frob(&(a - a.adjoint())) / scale;
    if asym > HERMITIAN_TOL {
        return Err(Error::NotHermitian(asym));
    }
    Ok(())
}

/// Eigen-decomposition of a Hermitian PSD matrix with round-off clamping.
/// Eigenvalues are returned clamped at zero, in nalgebra's (unsorted) order.
fn psd_eigen(a: &ComplexMatrix) -> Result<(DVector<f64>, ComplexMatrix)> {
    check_hermitian(a)?;
    let sym = (a + a.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        if *v < 0.0 {
            if *v < -PSD_CLAMP * lmax.max(f64::MIN_POSITIVE) {
                return Err(Error::NotPsd(*v));
            }
            *v = 0.0;
        }
    }
    Ok((vals, eig.eigenvectors))
}

/// Eigen-decomposition of a Hermitian PSD matrix, eigenvalues in descending
/// order (clamped at zero) with matching eigenvector columns.
pub fn psd_eigen_desc(a: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    let (vals, vecs) = psd_eigen(a)?;
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
    let sorted_vals = order.iter().map(|&i| vals[i]).collect();
    let cols: Vec<ComplexVector> = order.iter().map(|&i| vecs.column(i).into_owned()).collect();
    let sorted_vecs = if cols.is_empty() {
        vecs
    } else {
        DMatrix::from_columns(&cols)
    };
    Ok((sorted_vals, sorted_vecs))
}

/// Thin SVD `a = U diag(s) V^H`: singular values in descending order and
/// the matching right singular vectors as columns of `V`.
pub fn right_singular_desc(a: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^H");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let vals = order.iter().map(|&i| svd.singular_values[i]).collect();
    let cols: Vec<ComplexVector> = order.iter().map(|&i| v_t.row(i).adjoint()).collect();
    let v = if cols.is_empty() {
        DMatrix::zeros(a.ncols(), 0)
    } else {
        DMatrix::from_columns(&cols)
    };
    (vals, v)
}

fn spectral_fn(vecs: &ComplexMatrix, vals: &DVector<f64>, f: impl Fn(f64) -> f64) -> ComplexMatrix {
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        let s = f(v);
        scaled.column_mut(j).scale_mut(s);
    }
    scaled * vecs.adjoint()
}

pub fn hermitian_sqrt(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (vals, vecs) = psd_eigen(a)?;
    Ok(spectral_fn(&vecs, &vals, f64::sqrt))
}

pub fn hermitian_inv_sqrt(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (vals, vecs) = psd_eigen(a)?;
    let lmax = vals.iter().cloned().fold(0.0_f64, f64::max);
    let lmin = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    if lmax <= 0.0 || lmin <= INV_COND * lmax {
        return Err(Error::Singular);
    }
    Ok(spectral_fn(&vecs, &vals, |v| 1.0 / v.sqrt()))
}

/// Square root and inverse square root from one decomposition.
pub fn hermitian_sqrt_pair(a: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let (vals, vecs) = psd_eigen(a)?;
    let lmax = vals.iter().cloned().fold(0.0_f64, f64::max);
    let lmin = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    if lmax <= 0.0 || lmin <= INV_COND * lmax {
        return Err(Error::Singular);
    }
    Ok((
        spectral_fn(&vecs, &vals, f64::sqrt),
        spectral_fn(&vecs, &vals, |v| 1.0 / v.sqrt()),
    ))
}

/// Singular values in descending order.
pub fn singular_values(a: &ComplexMatrix) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = a
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

pub fn numerical_rank(a: &ComplexMatrix, rel_tol: f64) -> usize {
    let sv = singular_values(a);
    let smax = sv.first().cloned().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Result of [`water_fill`].
#[derive(Debug, Clone, PartialEq)]
pub struct WaterFill {
    /// Squared branch gains, same order as the input.
    pub squared: Vec<f64>,
    pub zeta: f64,
}

/// Solves `coefficient * sum_g (zeta*lambda_g - 1)^+ = 1` exactly by testing
/// every active-set size over the descending singular values.
pub fn water_fill(singular_values: &[f64], coefficient: f64) -> Result<WaterFill> {
    if singular_values.is_empty() || singular_values.iter().all(|&s| s <= 0.0) {
        return Err(Error::Infeasible);
    }
    if !(coefficient > 0.0) || !coefficient.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "water-filling coefficient must be positive, got {coefficient}"
        )));
    }
    if singular_values.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidConfig(
            "singular values must be sorted descending".into(),
        ));
    }
    let mut best = None;
    let mut partial = 0.0;
    for (m, &lam) in singular_values.iter().enumerate() {
        if lam <= 0.0 {
            break;
        }
        partial += lam;
        let active = (m + 1) as f64;
        let zeta = (1.0 / coefficient + active) / partial;
        let last_active = zeta * lam - 1.0 > 0.0;
        let next_inactive = singular_values
            .get(m + 1)
            .map_or(true, |&nl| zeta * nl <= 1.0 + 1e-12);
        if last_active && next_inactive {
            best = Some(zeta);
            break;
        }
    }
    let zeta = best.ok_or(Error::Infeasible)?;
    let mut squared: Vec<f64> = singular_values
        .iter()
        .map(|&l| coefficient * (zeta * l - 1.0).max(0.0))
        .collect();
    let total: f64 = squared.iter().sum();
    squared.iter_mut().for_each(|s| *s /= total);
    Ok(WaterFill { squared, zeta })
}

/// Unitary `U` such that `U h U^H` has all diagonal entries equal to
/// `trace(h)/G`, built from pairwise Givens-type reflections applied to the
/// current largest and smallest diagonal entries.
pub fn equalizing_unitary(h: &ComplexMatrix) -> ComplexMatrix {
    let g = h.nrows();
    let mut u = identity(g);
    if g <= 1 {
        return u;
    }
    let mut m = h.clone();
    let target = m.trace().re / g as f64;
    let tol = 1e-9 * target.abs().max(f64::MIN_POSITIVE);
    let max_steps = 100 * g * g;
    let half = std::f64::consts::FRAC_1_SQRT_2;
    for _ in 0..max_steps {
        let (mut imax, mut imin) = (0, 0);
        for k in 1..g {
            if m[(k, k)].re > m[(imax, imax)].re {
                imax = k;
            }
            if m[(k, k)].re < m[(imin, imin)].re {
                imin = k;
            }
        }
        if m[(imax, imax)].re - m[(imin, imin)].re <= tol {
            break;
        }
        let b = m[(imax, imin)];
        let s = if b.norm() > 0.0 {
            Complex64::i() * b / b.norm() * half
        } else {
            c64(half, 0.0)
        };
        // rows (imax, imin) <- [[c, s], [conj(s), -c]] * rows
        let c = c64(half, 0.0);
        let sc = s.conj();
        apply_rows(&mut m, imax, imin, c, s, sc, -c);
        apply_rows(&mut u, imax, imin, c, s, sc, -c);
        // columns: M <- M R^H
        apply_cols_adjoint(&mut m, imax, imin, c, s, sc, -c);
    }
    u
}

fn apply_rows(
    m: &mut ComplexMatrix,
    i: usize,
    j: usize,
    r00: Complex64,
    r01: Complex64,
    r10: Complex64,
    r11: Complex64,
) {
    for col in 0..m.ncols() {
        let (a, b) = (m[(i, col)], m[(j, col)]);
        m[(i, col)] = r00 * a + r01 * b;
        m[(j, col)] = r10 * a + r11 * b;
    }
}

fn apply_cols_adjoint(
    m: &mut ComplexMatrix,
    i: usize,
    j: usize,
    r00: Complex64,
    r01: Complex64,
    r10: Complex64,
    r11: Complex64,
) {
    for row in 0..m.nrows() {
        let (a, b) = (m[(row, i)], m[(row, j)]);
        m[(row, i)] = a * r00.conj() + b * r01.conj();
        m[(row, j)] = a * r10.conj() + b * r11.conj();
    }
}

/// Solves `a x = b` for Hermitian positive-definite `a`.
pub fn solve_hermitian(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.nrows() != b.nrows() || !a.is_square() {
        return Err(Error::DimensionMismatch {
            op: "solve_hermitian",
            detail: format!(
                "{}x{} against {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            ),
        });
    }
    let sym = (a + a.adjoint()).scale(0.5);
    let chol = sym.cholesky().ok_or(Error::Singular)?;
    Ok(chol.solve(b))
}

/// Linear MMSE matrix `sigma_x W^H (W sigma_x W^H + noise I)^{-1}`.
pub fn lmmse_matrix(
    sigma_x: &ComplexMatrix,
    w: &ComplexMatrix,
    noise_var: f64,
) -> Result<ComplexMatrix> {
    if w.ncols() != sigma_x.nrows() || !sigma_x.is_square() {
        return Err(Error::DimensionMismatch {
            op: "lmmse_matrix",
            detail: format!(
                "operator {}x{} against covariance {}x{}",
                w.nrows(),
                w.ncols(),
                sigma_x.nrows(),
                sigma_x.ncols()
            ),
        });
    }
    if !(noise_var > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "noise variance must be positive, got {noise_var}"
        )));
    }
    let w_sigma = w * sigma_x;
    let cov_y = observation_covariance(sigma_x, w, noise_var);
    // Gamma^H = cov_y^{-1} W sigma_x
    Ok(solve_hermitian(&cov_y, &w_sigma)?.adjoint())
}

/// `W sigma_x W^H + noise I`.
pub fn observation_covariance(
    sigma_x: &ComplexMatrix,
    w: &ComplexMatrix,
    noise_var: f64,
) -> ComplexMatrix {
    let mut cov = w * sigma_x * w.adjoint();
    for i in 0..cov.nrows() {
        cov[(i, i)] += noise_var;
    }
    cov
}

/// Moore-Penrose pseudo-inverse with relative singular-value cut-off.
pub fn pinv(a: &ComplexMatrix, rel_tol: f64) -> ComplexMatrix {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let mut out = DMatrix::zeros(a.ncols(), a.nrows());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if smax > 0.0 && s > rel_tol * smax {
            out += vt.row(k).adjoint() * u.column(k).adjoint() * c64(1.0 / s, 0.0);
        }
    }
    out
}

pub fn trace_re(m: &ComplexMatrix) -> f64 {
    m.trace().re
}
