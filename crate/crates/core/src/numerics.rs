//! Dense real and complex matrix kernels.
//!
//! Thin contracts over nalgebra: general eigenvalues come from a real Schur
//! form (Hessenberg reduction followed by shifted QR), symmetric and
//! Hermitian eigenvalues from tridiagonalization with implicit QR, and
//! singular values from the Golub-Kahan SVD. Every entry point validates
//! finiteness and shape before handing the matrix to the decomposition.

use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{dim_err, Error, Result};

pub type Mat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;

/// Relative asymmetry accepted by [`eig_symmetric`] before symmetrization.
pub const SYM_TOL: f64 = 1e-8;
/// 2-norm condition number above which [`solve`] refuses to answer.
pub const COND_LIMIT: f64 = 1e12;
/// Absolute floor applied to every norm-relative tolerance.
pub const ABS_FLOOR: f64 = 1e-12;

const SCHUR_MAX_ITER_PER_DIM: usize = 1000;

pub(crate) mod fm {
    //! libm shims so the crate stays `no_std`.
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }
    pub fn abs(x: f64) -> f64 {
        libm::fabs(x)
    }
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }
    pub fn log10(x: f64) -> f64 {
        libm::log10(x)
    }
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }
    pub fn powf(x: f64, y: f64) -> f64 {
        libm::pow(x, y)
    }
    pub fn atan2(y: f64, x: f64) -> f64 {
        libm::atan2(y, x)
    }
    pub fn ceil(x: f64) -> f64 {
        libm::ceil(x)
    }
}

/// Builds a matrix from row-major data, rejecting NaN and infinities.
pub fn matrix(rows: usize, cols: usize, row_major: &[f64]) -> Result<Mat> {
    if row_major.len() != rows * cols {
        return Err(dim_err("row-major data length does not match rows*cols"));
    }
    let m = Mat::from_row_slice(rows, cols, row_major);
    ensure_finite(&m)?;
    Ok(m)
}

/// Builds a matrix from a list of rows. All rows must have equal length.
pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Mat> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.as_ref().len());
    if rows.iter().any(|r| r.as_ref().len() != ncols) {
        return Err(Error::Ragged);
    }
    let data: Vec<f64> = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
    matrix(nrows, ncols, &data)
}

pub fn ensure_finite(m: &Mat) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

pub fn ensure_square(m: &Mat) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() })
    }
}

pub fn to_complex(m: &Mat) -> CMat {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Eigenvalues of a general real square matrix, sorted by real then
/// imaginary part. Complex eigenvalues come in exact conjugate pairs.
pub fn eig_general(a: &Mat) -> Result<Vec<Complex64>> {
    ensure_square(a)?;
    ensure_finite(a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let schur = a
        .clone()
        .try_schur(f64::EPSILON, SCHUR_MAX_ITER_PER_DIM * n)
        .ok_or(Error::NoConvergence("Schur QR iteration"))?;
    let mut eig: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    eig.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    Ok(eig)
}

/// Power-of-two diagonal `d` such that `diag(d)^-1 A diag(d)` has comparable
/// row and column norms (off-diagonal part). Scaling by powers of two is exact.
pub fn balance(a: &Mat) -> Vec<f64> {
    let n = a.nrows();
    let mut d = alloc::vec![1.0; n];
    let mut b = a.clone();
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += fm::abs(b[(j, i)]);
                    r += fm::abs(b[(i, j)]);
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            while c < r / 2.0 {
                c *= 2.0;
                r /= 2.0;
                f *= 2.0;
            }
            while c >= r * 2.0 {
                c /= 2.0;
                r *= 2.0;
                f /= 2.0;
            }
            if c + r < 0.95 * s {
                converged = false;
                d[i] *= f;
                for j in 0..n {
                    b[(i, j)] /= f;
                    b[(j, i)] *= f;
                }
            }
        }
    }
    d
}

fn relative_asymmetry(s: &Mat) -> f64 {
    let scale = s.norm().max(ABS_FLOOR);
    (s - s.transpose()).norm() / scale
}

/// Ascending eigenvalues of a real symmetric matrix.
pub fn eig_symmetric(s: &Mat) -> Result<Vec<f64>> {
    Ok(eig_symmetric_vectors(s)?.0)
}

/// Ascending eigenvalues and matching orthonormal eigenvectors (as columns).
pub fn eig_symmetric_vectors(s: &Mat) -> Result<(Vec<f64>, Mat)> {
    ensure_square(s)?;
    ensure_finite(s)?;
    let n = s.nrows();
    if n == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    let asym = relative_asymmetry(s);
    if asym > SYM_TOL {
        return Err(Error::Asymmetric(asym));
    }
    let sym = (s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, SCHUR_MAX_ITER_PER_DIM * n)
        .ok_or(Error::NoConvergence("symmetric QR iteration"))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Mat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Ascending (real) eigenvalues of a Hermitian matrix.
pub fn eig_hermitian(h: &CMat) -> Result<Vec<f64>> {
    let n = h.nrows();
    if !h.is_square() {
        return Err(Error::NotSquare { rows: h.nrows(), cols: h.ncols() });
    }
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let scale = h.norm().max(ABS_FLOOR);
    let asym = (h - h.adjoint()).norm() / scale;
    if asym > SYM_TOL {
        return Err(Error::Asymmetric(asym));
    }
    // Real embedding [[Re, -Im], [Im, Re]] doubles every eigenvalue.
    let mut emb = Mat::zeros(2 * n, 2 * n);
    for r in 0..n {
        for c in 0..n {
            let z = (h[(r, c)] + h[(c, r)].conj()) * 0.5;
            emb[(r, c)] = z.re;
            emb[(r + n, c + n)] = z.re;
            emb[(r, c + n)] = -z.im;
            emb[(r + n, c)] = z.im;
        }
    }
    let doubled = eig_symmetric(&emb)?;
    Ok(doubled.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect())
}

/// Singular values in descending order.
pub fn singular_values(a: &Mat) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = SVD::new(a.clone(), false, false).singular_values.iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

pub fn sigma_max(a: &Mat) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Largest singular value of a complex matrix, via the real embedding.
pub fn csigma_max(a: &CMat) -> f64 {
    let (r, c) = a.shape();
    let mut emb = Mat::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let z = a[(i, j)];
            emb[(i, j)] = z.re;
            emb[(i + r, j + c)] = z.re;
            emb[(i, j + c)] = -z.im;
            emb[(i + r, j)] = z.im;
        }
    }
    sigma_max(&emb)
}

/// 2-norm condition number; infinite for singular input.
pub fn condition_number(a: &Mat) -> f64 {
    let sv = singular_values(a);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

/// Solves `A X = B` for square `A`, refusing condition numbers above [`COND_LIMIT`].
pub fn solve(a: &Mat, b: &Mat) -> Result<Mat> {
    ensure_square(a)?;
    ensure_finite(a)?;
    ensure_finite(b)?;
    if a.nrows() != b.nrows() {
        return Err(dim_err("solve: row count of B differs from A"));
    }
    let cond = condition_number(a);
    if !(cond <= COND_LIMIT) {
        return Err(Error::IllConditioned(cond));
    }
    a.clone().lu().solve(b).ok_or(Error::IllConditioned(cond))
}

pub fn inverse(a: &Mat) -> Result<Mat> {
    solve(a, &Mat::identity(a.nrows(), a.nrows()))
}

/// Numerical rank: singular values above `rel_tol * sigma_max` (and above the absolute floor).
pub fn rank(a: &Mat, rel_tol: f64) -> usize {
    let sv = singular_values(a);
    let Some(&top) = sv.first() else { return 0 };
    if top <= f64::MIN_POSITIVE {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

/// Orthonormal bases of the column space of `a` and of its orthogonal
/// complement, using `rel_tol` for the rank decision.
pub fn range_and_complement(a: &Mat, rel_tol: f64) -> (Mat, Mat) {
    let rows = a.nrows();
    if rows == 0 {
        return (Mat::zeros(0, 0), Mat::zeros(0, 0));
    }
    // Pad with zero columns so the SVD yields a full set of left vectors.
    let cols = a.ncols().max(rows);
    let mut padded = Mat::zeros(rows, cols);
    padded.view_mut((0, 0), (rows, a.ncols())).copy_from(a);
    let svd = SVD::new(padded, true, false);
    let u = svd.u.expect("requested U");
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
    let top = sv.iter().copied().fold(0.0, f64::max);
    let r = if top <= f64::MIN_POSITIVE {
        0
    } else {
        order.iter().filter(|&&i| sv[i] > rel_tol * top).count()
    };
    let range = Mat::from_fn(rows, r, |i, j| u[(i, order[j])]);
    let comp = Mat::from_fn(rows, rows - r, |i, j| u[(i, order[r + j])]);
    (range, comp)
}

/// Orthonormal basis (columns) of the null space of `a`.
pub fn null_space(a: &Mat, rel_tol: f64) -> Mat {
    let (_, comp) = range_and_complement(&a.transpose(), rel_tol);
    if a.ncols() == 0 {
        return Mat::zeros(0, 0);
    }
    comp
}

pub fn is_symmetric(a: &Mat, rel_tol: f64) -> bool {
    a.is_square() && relative_asymmetry(a) <= rel_tol
}

pub fn symmetrize(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

/// Smallest eigenvalue of a symmetric matrix (`+inf` for the empty matrix).
pub fn lambda_min(s: &Mat) -> Result<f64> {
    Ok(eig_symmetric(s)?.first().copied().unwrap_or(f64::INFINITY))
}

pub fn lambda_max(s: &Mat) -> Result<f64> {
    Ok(eig_symmetric(s)?.last().copied().unwrap_or(f64::NEG_INFINITY))
}

/// Block-diagonal concatenation of two (possibly rectangular) matrices.
pub fn block_diag(a: &Mat, b: &Mat) -> Mat {
    let mut out = Mat::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

pub fn hstack(a: &Mat, b: &Mat) -> Result<Mat> {
    if a.nrows() != b.nrows() {
        return Err(dim_err("hstack: row counts differ"));
    }
    let mut out = Mat::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    Ok(out)
}

pub fn vstack(a: &Mat, b: &Mat) -> Result<Mat> {
    if a.ncols() != b.ncols() {
        return Err(dim_err("vstack: column counts differ"));
    }
    let mut out = Mat::zeros(a.nrows() + b.nrows(), a.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    Ok(out)
}
