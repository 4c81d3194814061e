//! Tridiagonal (Thomas) solver, generic over real and complex scalars.

use crate::error::{Error, Result};
use crate::num::Scalar;

/// Solve `A x = rhs` in place for tridiagonal `A`.
///
/// `lower[i]` multiplies `x[i-1]` in row `i` (`lower[0]` unused),
/// `upper[i]` multiplies `x[i+1]` (`upper[n-1]` unused). `scratch` must hold
/// at least `n` values. No pivoting: intended for diagonally dominant
/// systems such as Crank-Nicolson operators.
pub fn solve_tridiagonal<S: Scalar>(
    lower: &[S],
    diag: &[S],
    upper: &[S],
    rhs: &mut [S],
    scratch: &mut [S],
) -> Result<()> {
    let n = rhs.len();
    debug_assert!(lower.len() >= n && diag.len() >= n && upper.len() >= n && scratch.len() >= n);
    if n == 0 {
        return Ok(());
    }
    let mut beta = diag[0];
    if beta.modulus() == S::Real::default() {
        return Err(Error::Singular(0));
    }
    rhs[0] = rhs[0] / beta;
    for i in 1..n {
        scratch[i] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * scratch[i];
        if beta.modulus() == S::Real::default() || !beta.is_finite() {
            return Err(Error::Singular(i));
        }
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        let next = rhs[i + 1];
        rhs[i] = rhs[i] - scratch[i + 1] * next;
    }
    Ok(())
}

/// `y = A x` for tridiagonal `A` with the same band layout.
pub fn tridiagonal_apply<S: Scalar>(lower: &[S], diag: &[S], upper: &[S], x: &[S], y: &mut [S]) {
    let n = x.len();
    for i in 0..n {
        let mut acc = diag[i] * x[i];
        if i > 0 {
            acc = acc + lower[i] * x[i - 1];
        }
        if i + 1 < n {
            acc = acc + upper[i] * x[i + 1];
        }
        y[i] = acc;
    }
}
