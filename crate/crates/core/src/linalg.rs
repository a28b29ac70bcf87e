//! Dense complex linear algebra helpers shared by the solvers.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::Operator;

/// Condition numbers above this abort a resolvent computation.
pub const MAX_CONDITION: f64 = 1e12;

pub fn identity(d: usize) -> Operator {
    DMatrix::identity(d, d)
}

pub fn scalar_identity(d: usize, s: Complex64) -> Operator {
    DMatrix::from_diagonal_element(d, d, s)
}

pub fn diagonal(entries: &[Complex64]) -> Operator {
    let d = entries.len();
    DMatrix::from_fn(d, d, |i, j| if i == j { entries[i] } else { Complex64::new(0.0, 0.0) })
}

/// Induced 1-norm (max column sum of moduli).
pub fn norm_one(m: &Operator) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Induced sup-norm (max row sum of moduli).
pub fn norm_inf(m: &Operator) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest singular value.
pub fn norm_two(m: &Operator) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Inverse by LU with partial pivoting, rejecting matrices whose 1-norm
/// condition number exceeds [`MAX_CONDITION`].
pub fn inverse_checked(m: &Operator, what: &str) -> Result<Operator> {
    if m.nrows() != m.ncols() {
        return Err(Error::shape(
            "square matrix",
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    let inv = m
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Numeric(format!("{what} is singular")))?;
    let cond = norm_one(m) * norm_one(&inv);
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(Error::Numeric(format!(
            "{what} is ill-conditioned (cond_1 = {cond:.3e})"
        )));
    }
    Ok(inv)
}

/// Solves `m · X = rhs` for a matrix right-hand side, with the same
/// conditioning gate as [`inverse_checked`].
pub fn solve_checked(m: &Operator, rhs: &Operator, what: &str) -> Result<Operator> {
    let inv = inverse_checked(m, what)?;
    if inv.ncols() != rhs.nrows() {
        return Err(Error::shape(
            format!("{} rows", inv.ncols()),
            format!("{} rows", rhs.nrows()),
        ));
    }
    Ok(inv * rhs)
}

/// True when every off-diagonal entry is exactly zero.
pub fn is_diagonal(m: &Operator) -> bool {
    m.nrows() == m.ncols()
        && (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)] == Complex64::new(0.0, 0.0)))
}

/// Extracts block `(bi, bj)` of size `d × d`.
pub fn block(m: &Operator, bi: usize, bj: usize, d: usize) -> Operator {
    m.view((bi * d, bj * d), (d, d)).into_owned()
}

pub fn set_block(m: &mut Operator, bi: usize, bj: usize, b: &Operator) {
    let d = b.nrows();
    m.view_mut((bi * d, bj * d), (d, d)).copy_from(b);
}
