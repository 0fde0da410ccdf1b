//! Invariant zeros of a square system by orthogonal pencil deflation.
//!
//! Each pass row-compresses `D`; the rows with zero feedthrough force the
//! state into `ker C2`, which is eliminated by a column compression of `C2`.
//! The result is a smaller system with the same finite zeros. The loop ends
//! when `D` is invertible, where the zeros are `eig(A - B D^{-1} C)`.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lti::StateSpace;
use crate::numerics::{self, Mat};

/// Rank decisions use singular values above this fraction of the data norm.
const RANK_TOL: f64 = 1e-10;

/// Finite invariant zeros of `sys`, sorted by (re, im).
///
/// Fails with [`Error::DegeneratePencil`] when the system matrix pencil is
/// rank deficient for every `s`.
pub fn invariant_zeros(sys: &StateSpace) -> Result<Vec<Complex64>> {
    let scale = [sys.a(), sys.b(), sys.c(), sys.d()]
        .iter()
        .map(|m| m.norm())
        .fold(numerics::ABS_FLOOR, f64::max);
    let tol = RANK_TOL * scale;
    let (mut a, mut b, mut c, mut d) =
        (sys.a().clone(), sys.b().clone(), sys.c().clone(), sys.d().clone());
    if c.nrows() != b.ncols() {
        return Err(Error::DegeneratePencil);
    }
    loop {
        let n = a.nrows();
        let p = c.nrows();
        let (range, comp) = split_range(&d, tol);
        let r = range.ncols();
        if r == p {
            if n == 0 {
                return Ok(Vec::new());
            }
            let closed = &a - &b * numerics::solve(&d, &c)?;
            let mut z = numerics::eig_general(&closed)?;
            sort(&mut z);
            return Ok(z);
        }
        if n == 0 {
            return Err(Error::DegeneratePencil);
        }
        let c1 = range.transpose() * &c;
        let d1 = range.transpose() * &d;
        let c2 = comp.transpose() * &c;
        // Columns spanning ker C2 first, then its row space.
        let (row_space, kernel) = split_range(&c2.transpose(), tol);
        let rho = row_space.ncols();
        if rho < p - r {
            return Err(Error::DegeneratePencil);
        }
        let v = numerics::hstack(&kernel, &row_space)?;
        let k = kernel.ncols();
        let at = v.transpose() * &a * &v;
        let bt = v.transpose() * &b;
        let a11 = at.view((0, 0), (k, k)).into_owned();
        let a21 = at.view((k, 0), (n - k, k)).into_owned();
        let b1 = bt.rows(0, k).into_owned();
        let b2 = bt.rows(k, n - k).into_owned();
        a = a11;
        b = b1;
        c = numerics::vstack(&a21, &(c1 * &kernel))?;
        d = numerics::vstack(&b2, &d1)?;
    }
}

fn split_range(m: &Mat, tol: f64) -> (Mat, Mat) {
    let rows = m.nrows();
    if rows == 0 {
        return (Mat::zeros(0, 0), Mat::zeros(0, 0));
    }
    let top = numerics::sigma_max(m);
    if top <= tol {
        return (Mat::zeros(rows, 0), Mat::identity(rows, rows));
    }
    numerics::range_and_complement(m, tol / top)
}

fn sort(z: &mut [Complex64]) {
    z.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
}
