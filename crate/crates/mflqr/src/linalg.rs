//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{Complex, DMatrix, DVector};

use crate::{Error, Result};

/// Condition-number ceiling above which a symmetric solve is refused.
pub const MAX_SPD_CONDITION: f64 = 1e14;

/// Relative threshold below which a singular value counts as zero in rank
/// decisions.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Force exact symmetry by averaging with the transpose. Riccati updates are
/// symmetric in exact arithmetic; this keeps rounding from accumulating into
/// a systematic asymmetry over long recursions.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest entry magnitude; zero for empty matrices.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        0.0
    } else {
        m.amax()
    }
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    let mut ev = m.clone().symmetric_eigenvalues();
    let mut v: Vec<f64> = ev.iter().copied().collect();
    v.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"));
    for (slot, val) in ev.iter_mut().zip(v) {
        *slot = val;
    }
    ev
}

/// Solve `m x = rhs` for symmetric positive-definite `m`, refusing matrices
/// that are singular or conditioned worse than [`MAX_SPD_CONDITION`]. The
/// solve goes through a Cholesky factorization, never an explicit inverse.
pub fn spd_solve(m: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eigs = sym_eigenvalues(m);
    let min = eigs[0];
    let max = eigs[eigs.len() - 1];
    let cond = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(min > 0.0) || cond > MAX_SPD_CONDITION {
        return Err(Error::SingularInnerMatrix { cond });
    }
    let chol = nalgebra::Cholesky::new(m.clone())
        .ok_or(Error::SingularInnerMatrix { cond })?;
    Ok(chol.solve(rhs))
}

/// Rank of a complex matrix via its singular values, treating anything below
/// `RANK_TOLERANCE * max_sv` as zero.
pub fn rank_complex(m: &DMatrix<Complex<f64>>) -> usize {
    let sv = m.clone().singular_values();
    if sv.is_empty() {
        return 0;
    }
    let max_sv = sv.max();
    if max_sv == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOLERANCE * max_sv).count()
}

/// Reciprocal condition number (smallest over largest singular value) of a
/// real matrix; zero for rank-deficient input.
pub fn rcond(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    if sv.is_empty() {
        return 0.0;
    }
    let max_sv = sv.max();
    if max_sv == 0.0 {
        return 0.0;
    }
    sv.min() / max_sv
}

/// Lift a real matrix into the complex field (for eigenstructure tests).
pub fn complexify(m: &DMatrix<f64>) -> DMatrix<Complex<f64>> {
    m.map(|x| Complex::new(x, 0.0))
}

/// Row-major nested representation, the interchange format used by the JSON
/// surfaces.
pub fn to_nested(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Build a matrix from row-major nested data, checking that rows are even.
pub fn from_nested(name: &'static str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Err(Error::DimensionMismatch {
            name,
            expected: "at least one row".into(),
            got: "0 rows".into(),
        });
    }
    let ncols = rows[0].len();
    if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch {
            name,
            expected: format!("rectangular rows of width {ncols}"),
            got: "ragged or empty rows".into(),
        });
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), ncols, &flat))
}
