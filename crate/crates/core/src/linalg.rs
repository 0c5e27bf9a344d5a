//! Small dense complex linear algebra helpers shared across modules.
//!
//! All capacity/detector matrices here are tiny (tens of rows), so dense
//! factorizations are the right tool. Determinants of `I + c·G` are always
//! evaluated through a Cholesky factorization, never by cofactor expansion.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Gram matrix `H^H H`.
pub fn gram(h: &CMatrix) -> CMatrix {
    h.adjoint() * h
}

/// Forces exact Hermitian symmetry, averaging roundoff in off-diagonal pairs.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    let mut out = m.clone();
    for i in 0..n {
        out[(i, i)] = Complex64::new(out[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let avg = 0.5 * (out[(i, j)] + out[(j, i)].conj());
            out[(i, j)] = avg;
            out[(j, i)] = avg.conj();
        }
    }
    out
}

/// Cholesky of a Hermitian positive definite matrix.
pub fn cholesky(m: &CMatrix) -> Option<Cholesky<Complex64, Dyn>> {
    Cholesky::new(hermitize(m))
}

/// log2 det of a Hermitian positive definite matrix.
pub fn logdet2(m: &CMatrix) -> f64 {
    let chol = cholesky(m).expect("matrix must be positive definite");
    let l = chol.l();
    let mut acc = 0.0;
    for i in 0..l.nrows() {
        acc += l[(i, i)].re.ln();
    }
    2.0 * acc / std::f64::consts::LN_2
}

/// log2 |I + c · H^H H|, evaluated through whichever Gram side is smaller.
///
/// Uses the Sylvester identity |I + c H^H H| = |I + c H H^H|.
pub fn logdet2_eye_plus_gram(h: &CMatrix, c: f64) -> f64 {
    let (nr, nu) = (h.nrows(), h.ncols());
    let g = if nu <= nr { h.adjoint() * h } else { h * h.adjoint() };
    let n = g.nrows();
    let m = CMatrix::identity(n, n) + g * Complex64::new(c, 0.0);
    logdet2(&m)
}

/// Eigendecomposition of a Hermitian matrix: returns (eigenvalues, Q) with
/// `m = Q diag(w) Q^H`, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMatrix) -> (DVector<f64>, CMatrix) {
    let se = hermitize(m).symmetric_eigen();
    let mut idx: Vec<usize> = (0..se.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let n = se.eigenvalues.len();
    let mut w = DVector::zeros(n);
    let mut q = CMatrix::zeros(n, n);
    for (k, &j) in idx.iter().enumerate() {
        w[k] = se.eigenvalues[j];
        q.set_column(k, &se.eigenvectors.column(j));
    }
    (w, q)
}

/// Real parts of the diagonal.
pub fn real_diag(m: &CMatrix) -> Vec<f64> {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)].re).collect()
}
