//! Dense linear algebra on `ndarray` types: Householder QR, orthonormal
//! null-space bases, and Cholesky-based SPD solves.
//!
//! Everything here targets desk-scale problems (N up to a few hundred), so
//! the factorizations are plain unblocked loops. Determinism matters more
//! than speed: given identical inputs the outputs are bit-identical across
//! runs and platforms.

use ndarray::{s, Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::numerics::rng::RngStream;

/// Relative threshold below which an R diagonal counts as zero.
const RANK_TOL: f64 = 1e-12;
/// Relative pivot threshold for the Cholesky factorization.
const PIVOT_TOL: f64 = 1e-12;

pub fn inf_norm(v: &ArrayView1<f64>) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn max_abs(m: &Array2<f64>) -> f64 {
    m.iter().fold(0.0, |acc: f64, x| acc.max(x.abs()))
}

pub fn is_finite_vec(v: &ArrayView1<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

pub fn is_finite_mat(m: &Array2<f64>) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Householder QR of an N x M matrix with N >= M; returns (Q, R) with Q
/// square N x N orthogonal and R upper triangular in the leading M columns.
fn householder_qr(a: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let (n, m) = a.dim();
    debug_assert!(n >= m);
    let mut r = a.clone();
    let mut q = Array2::<f64>::eye(n);
    let mut v = vec![0.0; n];

    for j in 0..m {
        let len = n - j;
        let mut norm2 = 0.0;
        for i in 0..len {
            v[i] = r[[j + i, j]];
            norm2 += v[i] * v[i];
        }
        let norm = norm2.sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if v[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vnorm2: f64 = v[..len].iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm2;

        // R[j.., j..m] <- H R
        for c in j..m {
            let mut dot = 0.0;
            for i in 0..len {
                dot += v[i] * r[[j + i, c]];
            }
            let f = beta * dot;
            for i in 0..len {
                r[[j + i, c]] -= f * v[i];
            }
        }
        r[[j, j]] = alpha;
        for i in 1..len {
            r[[j + i, j]] = 0.0;
        }

        // Q <- Q H (acting on columns j..)
        for row in 0..n {
            let mut dot = 0.0;
            for i in 0..len {
                dot += q[[row, j + i]] * v[i];
            }
            let f = beta * dot;
            for i in 0..len {
                q[[row, j + i]] -= f * v[i];
            }
        }
    }
    (q, r)
}

fn numerical_rank(r: &Array2<f64>, cols: usize) -> usize {
    let max_diag = (0..cols).fold(0.0, |acc: f64, j| acc.max(r[[j, j]].abs()));
    if max_diag == 0.0 {
        return 0;
    }
    (0..cols)
        .filter(|&j| r[[j, j]].abs() > RANK_TOL * max_diag)
        .count()
}

/// Orthonormal basis of the subspace orthogonal to the columns of `w`.
///
/// For a full-column-rank N x M input the result B is N x (N-M) with
/// B'B = I and W'B = 0 to working precision. The sign of each basis column
/// is normalized so that its first non-negligible entry is positive, which
/// makes the basis a deterministic function of `w`.
pub fn null_space_basis(w: &Array2<f64>) -> Result<Array2<f64>> {
    let (n, m) = w.dim();
    if n < m {
        return Err(Error::InvalidInput(format!(
            "design matrix must have rows >= cols, got {n} x {m}"
        )));
    }
    let (q, r) = householder_qr(w);
    let rank = numerical_rank(&r, m);
    if rank < m {
        return Err(Error::RankDeficient { rank, cols: m });
    }
    let mut b = q.slice(s![.., m..]).to_owned();
    for mut col in b.columns_mut() {
        let col_max = inf_norm(&col.view());
        if let Some(first) = col.iter().find(|x| x.abs() > 1e-12 * col_max) {
            if *first < 0.0 {
                col.mapv_inplace(|x| -x);
            }
        }
    }
    Ok(b)
}

/// Check that `w` has full column rank, returning its numerical rank on failure.
pub fn ensure_full_column_rank(w: &Array2<f64>) -> Result<()> {
    let (n, m) = w.dim();
    if n < m {
        return Err(Error::RankDeficient { rank: n, cols: m });
    }
    let (_, r) = householder_qr(w);
    let rank = numerical_rank(&r, m);
    if rank < m {
        return Err(Error::RankDeficient { rank, cols: m });
    }
    Ok(())
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    l: Array2<f64>,
}

/// Factor a symmetric positive definite matrix, failing when any pivot drops
/// below `1e-12 * max(diagonal)`.
pub fn cholesky(a: &Array2<f64>) -> Result<CholeskyFactor> {
    let (n, nc) = a.dim();
    debug_assert_eq!(n, nc, "cholesky expects a square matrix");
    let max_diag = (0..n).fold(0.0, |acc: f64, i| acc.max(a[[i, i]]));
    let threshold = PIVOT_TOL * max_diag.max(0.0);
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if d <= threshold {
            return Err(Error::NotPositiveDefinite { index: j, pivot: d });
        }
        let ljj = d.sqrt();
        l[[j, j]] = ljj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / ljj;
        }
    }
    Ok(CholeskyFactor { l })
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Solve A x = rhs given A = L L'.
    pub fn solve(&self, rhs: &ArrayView1<f64>) -> Array1<f64> {
        let n = self.dim();
        let mut y = rhs.to_owned();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[[i, k]] * y[k];
            }
            y[i] = s / self.l[[i, i]];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l[[k, i]] * y[k];
            }
            y[i] = s / self.l[[i, i]];
        }
        y
    }

    /// Dense inverse of A, column by column.
    pub fn inverse(&self) -> Array2<f64> {
        let n = self.dim();
        let mut inv = Array2::<f64>::zeros((n, n));
        let mut e = Array1::<f64>::zeros(n);
        for j in 0..n {
            e.fill(0.0);
            e[j] = 1.0;
            let col = self.solve(&e.view());
            inv.column_mut(j).assign(&col);
        }
        inv
    }
}

/// Solve A v = rhs for symmetric positive definite A with one step of
/// iterative refinement, keeping the backward error near roundoff.
pub fn spd_solve(a: &Array2<f64>, rhs: &ArrayView1<f64>) -> Result<Array1<f64>> {
    let factor = cholesky(a)?;
    let mut v = factor.solve(rhs);
    let residual = rhs - &a.dot(&v);
    v += &factor.solve(&residual.view());
    Ok(v)
}

/// W'W of a design matrix.
pub fn gram_matrix(w: &Array2<f64>) -> Array2<f64> {
    w.t().dot(w)
}

/// Solve the Gram system (W'W) x = rhs.
pub fn gram_solve(w: &Array2<f64>, rhs: &ArrayView1<f64>) -> Result<Array1<f64>> {
    spd_solve(&gram_matrix(w), rhs)
}

/// Matrix with independent standard normal entries.
pub fn random_gaussian_matrix(rows: usize, cols: usize, rng: &mut RngStream) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.standard_normal())
}

/// Random N x M matrix with orthonormal columns (thin Q of a Gaussian draw).
pub fn random_orthonormal_columns(rows: usize, cols: usize, rng: &mut RngStream) -> Array2<f64> {
    assert!(rows >= cols);
    let g = random_gaussian_matrix(rows, cols, rng);
    let (q, _) = householder_qr(&g);
    q.slice(s![.., ..cols]).to_owned()
}
