//! Small dense linear-algebra kernels.
//!
//! Two solvers live here: a partial-pivoting LU used for one-off systems, and
//! [`BorderedLu`], which factors a matrix that grows by one row and one column
//! at a time. The bordered factorization is what makes the continuation-index
//! stage cubic rather than quartic.

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {c}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: r,
            cols: c,
            data,
        })
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `y = self * x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| dot(self.row(i), x))
            .collect()
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// LU factorization with partial pivoting, `P A = L U`, stored in place.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(a: &Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension(format!(
                "LU of a {}x{} matrix",
                a.rows(),
                a.cols()
            )));
        }
        let n = a.rows();
        let mut lu = a.as_slice().to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax == 0.0 || !pmax.is_finite() {
                return Err(Error::Singular("LU factorization"));
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let factor = lu[i * n + k] / pivot;
                lu[i * n + k] = factor;
                if factor != 0.0 {
                    let (upper, lower) = lu.split_at_mut(i * n);
                    let krow = &upper[k * n + k + 1..k * n + n];
                    let irow = &mut lower[k + 1..n];
                    for (x, u) in irow.iter_mut().zip(krow) {
                        *x -= factor * u;
                    }
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            x[i] -= dot(row, &x[..i]);
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n + i + 1..(i + 1) * n];
            let s = dot(row, &x[i + 1..]);
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        x
    }
}

/// Solve `a x = rhs` and reject the answer if `‖a x − rhs‖∞ > rel_tol · max(‖rhs‖∞, 1)`.
pub fn solve_checked(a: &Matrix, rhs: &[f64], rel_tol: f64, context: &'static str) -> Result<Vec<f64>> {
    let lu = Lu::factor(a)?;
    let x = lu.solve(rhs);
    check_residual(a, &x, rhs, rel_tol, context)?;
    Ok(x)
}

pub fn check_residual(
    a: &Matrix,
    x: &[f64],
    rhs: &[f64],
    rel_tol: f64,
    context: &'static str,
) -> Result<()> {
    let ax = a.mul_vec(x);
    let residual = ax
        .iter()
        .zip(rhs)
        .fold(0.0_f64, |m, (l, r)| m.max((l - r).abs()));
    let bound = rel_tol * norm_inf(rhs).max(1.0);
    if residual.is_finite() && residual <= bound {
        Ok(())
    } else {
        Err(Error::NumericalQuality {
            context,
            residual,
            bound,
        })
    }
}

/// LU factors of a matrix grown by bordering.
///
/// After `k` pushes the factored matrix is
///
/// ```text
/// A_k = | A_{k-1}  b |     L_k = | L_{k-1} 0 |     U_k = | U_{k-1} u |
///       | c^T      d |           | l^T     1 |           | 0       δ |
/// ```
///
/// with `L_{k-1} u = b`, `U_{k-1}^T l = c` and `δ = d − l·u`. No pivoting is
/// done, so the caller must only border matrices whose leading principal
/// minors are safely nonsingular (row diagonally dominant matrices qualify).
/// `L` is kept by rows and `U` by columns, so every step touches contiguous
/// memory only.
#[derive(Debug, Clone, Default)]
pub struct BorderedLu {
    /// Strict lower part of L, row `i` has `i` entries.
    l_rows: Vec<Vec<f64>>,
    /// Upper part of U including the diagonal, column `j` has `j + 1` entries.
    u_cols: Vec<Vec<f64>>,
    ops: u64,
}

impl BorderedLu {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            l_rows: Vec::with_capacity(n),
            u_cols: Vec::with_capacity(n),
            ops: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.l_rows.len()
    }

    /// Arithmetic operations spent so far in pushes and solves.
    pub fn op_count(&self) -> u64 {
        self.ops
    }

    /// Append one row and column. `col` holds the new column above the
    /// diagonal, `row` the new row left of it, `corner` the diagonal entry.
    pub fn push(&mut self, col: &[f64], row: &[f64], corner: f64) -> Result<()> {
        let k = self.dim();
        if col.len() != k || row.len() != k {
            return Err(Error::Dimension(format!(
                "border of length {}/{} for a {k}x{k} factor",
                col.len(),
                row.len()
            )));
        }
        // u = L^{-1} col, unit lower triangular forward solve.
        let mut u = Vec::with_capacity(k + 1);
        for i in 0..k {
            let s = dot(&self.l_rows[i], &u[..i]);
            u.push(col[i] - s);
        }
        // l = U^{-T} row, forward solve with the columns of U.
        let mut l = Vec::with_capacity(k);
        for j in 0..k {
            let ucol = &self.u_cols[j];
            let s = dot(&ucol[..j], &l[..j]);
            l.push((row[j] - s) / ucol[j]);
        }
        let delta = corner - dot(&l, &u);
        if delta == 0.0 || !delta.is_finite() {
            return Err(Error::Singular("bordered factorization"));
        }
        u.push(delta);
        let kk = k as u64;
        // k(k-1) for each triangular solve, k divisions, 2k for the Schur complement.
        self.ops += 2 * kk * kk.saturating_sub(1) + kk + 2 * kk + 1;
        self.l_rows.push(l);
        self.u_cols.push(u);
        Ok(())
    }

    /// Solve `A_k x = rhs`.
    pub fn solve(&mut self, rhs: &[f64]) -> Vec<f64> {
        let k = self.dim();
        debug_assert_eq!(rhs.len(), k);
        let mut x = Vec::with_capacity(k);
        for i in 0..k {
            let s = dot(&self.l_rows[i], &x[..i]);
            x.push(rhs[i] - s);
        }
        // Column-oriented back substitution.
        for j in (0..k).rev() {
            let ucol = &self.u_cols[j];
            x[j] /= ucol[j];
            let xj = x[j];
            for (xi, uij) in x[..j].iter_mut().zip(&ucol[..j]) {
                *xi -= uij * xj;
            }
        }
        let kk = k as u64;
        self.ops += 2 * kk * kk;
        x
    }
}
