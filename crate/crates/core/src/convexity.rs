//! Null spaces and the strong-convexity constant of the smoothing cost on
//! `{b : Hb = 0}`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Result, SplineError};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone)]
pub struct NullSpace {
    /// Orthonormal columns spanning `null(E)`.
    pub basis: DMatrix<f64>,
    /// Numerical rank of `E`.
    pub rank: usize,
    /// `rank < rows(E)`.
    pub rank_deficient: bool,
}

/// Orthonormal basis of `null(E)` from a full SVD. Singular values below
/// `max(rows, cols) · ε · σ_max` count as zero.
pub fn null_space_basis(e: &SparseMatrix) -> NullSpace {
    let n = e.ncols();
    let rows = e.nrows();
    if rows == 0 || n == 0 {
        return NullSpace {
            basis: DMatrix::identity(n, n),
            rank: 0,
            rank_deficient: false,
        };
    }
    // pad to at least n rows so that V is complete
    let mut dense = DMatrix::zeros(rows.max(n), n);
    dense.rows_mut(0, rows).copy_from(&e.to_dense());
    let svd = dense.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let sigma_max = svd.singular_values.max();
    let tol = rows.max(n) as f64 * f64::EPSILON * sigma_max.max(f64::MIN_POSITIVE);
    let null_rows: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] <= tol)
        .collect();
    let rank = n - null_rows.len();
    let mut basis = DMatrix::zeros(n, null_rows.len());
    for (j, &k) in null_rows.iter().enumerate() {
        basis.set_column(j, &v_t.row(k).transpose());
    }
    NullSpace {
        basis,
        rank,
        rank_deficient: rank < rows,
    }
}

/// `γ = 2 λ_min(Vᵀ(AᵀA + λQ)V)` with `V` a basis of `null(H)`.
pub fn strong_convexity_gamma(
    a: &SparseMatrix,
    q: &SparseMatrix,
    lambda: f64,
    h: &SparseMatrix,
) -> Result<f64> {
    let n = a.ncols();
    if q.nrows() != n || q.ncols() != n || h.ncols() != n {
        return Err(SplineError::Dimension(
            "A, Q and H must share the column count".into(),
        ));
    }
    let ns = null_space_basis(h);
    if ns.rank_deficient {
        log::warn!("continuity matrix is rank deficient (rank {})", ns.rank);
    }
    let v = &ns.basis;
    if v.ncols() == 0 {
        return Err(SplineError::Degenerate("null space is trivial".into()));
    }
    let ad = a.to_dense();
    let av = &ad * v;
    let qv = q.to_dense() * v;
    let mut reduced = av.transpose() * av + (v.transpose() * qv) * lambda;
    // symmetrise rounding
    let sym = (&reduced + reduced.transpose()) * 0.5;
    reduced = sym;
    let eig = SymmetricEigen::new(reduced);
    let gamma = 2.0 * eig.eigenvalues.min();
    if gamma <= 1e-10 {
        return Err(SplineError::Degenerate(format!(
            "cost is not strongly convex on null(H): γ = {gamma:e}"
        )));
    }
    Ok(gamma)
}
