//! Dense complex linear algebra helpers on top of faer.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::{Accum, Mat, MatRef, Par};
use num_complex::Complex64;

use crate::error::{PmlError, Result};

/// Dense complex matrix.
pub type CMat = Mat<Complex64>;

/// Pivot ratio below which a factorization is reported as singular.
const SINGULAR_RATIO: f64 = 1e-14;

/// LU factorization with partial pivoting and a singularity check.
pub struct Lu {
    lu: PartialPivLu<Complex64>,
    n: usize,
}

impl Lu {
    /// Factors a square matrix. `context` names the system in diagnostics.
    pub fn new(a: MatRef<'_, Complex64>, context: &str) -> Result<Self> {
        assert_eq!(a.nrows(), a.ncols(), "LU of a non-square matrix");
        let n = a.nrows();
        if n == 0 {
            return Ok(Lu { lu: a.partial_piv_lu(), n });
        }
        let lu = a.partial_piv_lu();
        let u = lu.U();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            let v = u[(i, i)].norm();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !(lo > SINGULAR_RATIO * hi) || !hi.is_finite() {
            return Err(PmlError::singular(
                context,
                format!("pivot ratio {:.2e}; change the resolution or the PML profile, or perturb k", lo / hi),
            ));
        }
        Ok(Lu { lu, n })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves A X = B.
    pub fn solve(&self, b: MatRef<'_, Complex64>) -> CMat {
        if self.n == 0 {
            return Mat::zeros(0, b.ncols());
        }
        self.lu.solve(b)
    }

    /// Solves A x = b for a vector.
    pub fn solve_vec(&self, b: &[Complex64]) -> Vec<Complex64> {
        let col = MatRef::from_column_major_slice(b, b.len(), 1);
        let x = self.solve(col);
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }
}

/// C = A·B.
pub fn mul(a: MatRef<'_, Complex64>, b: MatRef<'_, Complex64>) -> CMat {
    let mut c = Mat::zeros(a.nrows(), b.ncols());
    if a.ncols() > 0 {
        faer::linalg::matmul::matmul(c.as_mut(), Accum::Replace, a, b, Complex64::new(1.0, 0.0), Par::Seq);
    }
    c
}

/// C += alpha·A·B.
pub fn mul_add(c: &mut CMat, a: MatRef<'_, Complex64>, b: MatRef<'_, Complex64>, alpha: Complex64) {
    if a.ncols() > 0 {
        faer::linalg::matmul::matmul(c.as_mut(), Accum::Add, a, b, alpha, Par::Seq);
    }
}

/// A·x for a vector.
pub fn mul_vec(a: MatRef<'_, Complex64>, x: &[Complex64]) -> Vec<Complex64> {
    let col = MatRef::from_column_major_slice(x, x.len(), 1);
    let y = mul(a, col);
    (0..a.nrows()).map(|i| y[(i, 0)]).collect()
}

/// Frobenius norm.
pub fn frobenius(a: MatRef<'_, Complex64>) -> f64 {
    a.norm_l2()
}

/// Largest singular value.
pub fn operator_norm(a: MatRef<'_, Complex64>) -> Result<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(0.0);
    }
    let s = a.singular_values().map_err(|e| PmlError::singular("singular values", format!("{e:?}")))?;
    Ok(s.into_iter().fold(0.0, f64::max))
}

/// Eigenvalues of a square matrix.
pub fn eigenvalues(a: MatRef<'_, Complex64>) -> Result<Vec<Complex64>> {
    a.eigenvalues().map_err(|e| PmlError::singular("eigenvalues", format!("{e:?}")))
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(a: MatRef<'_, Complex64>) -> Result<f64> {
    Ok(eigenvalues(a)?.into_iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Dense matrix from a closure.
pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> Complex64) -> CMat {
    Mat::from_fn(rows, cols, f)
}

/// Square diagonal matrix.
pub fn diag(d: &[Complex64]) -> CMat {
    Mat::from_fn(d.len(), d.len(), |i, j| if i == j { d[i] } else { Complex64::new(0.0, 0.0) })
}

/// Largest entrywise modulus of A − B relative to the largest modulus of B; NaN if
/// either matrix has a non-finite entry.
pub fn rel_max_diff(a: MatRef<'_, Complex64>, b: MatRef<'_, Complex64>) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if !(a[(i, j)].is_finite() && b[(i, j)].is_finite()) {
                return f64::NAN;
            }
            num = num.max((a[(i, j)] - b[(i, j)]).norm());
            den = den.max(b[(i, j)].norm());
        }
    }
    if den == 0.0 {
        num
    } else {
        num / den
    }
}
