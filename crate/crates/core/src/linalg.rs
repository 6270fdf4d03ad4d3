//! Small dense linear-algebra kernels: Cholesky factorization and triangular
//! solves. Everything here operates on symmetric positive definite systems of
//! modest size (coefficient blocks, VAR residual covariances), so a plain
//! `O(n^3)` factorization is all that is needed.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor `L` with `L L' = a`.
///
/// Fails when a pivot is not strictly positive; the failing column index is
/// reported so callers can name the offending variable.
pub fn cholesky_lower(a: ArrayView2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::invalid_input(format!(
            "cholesky: matrix must be square, got {}x{}",
            n,
            a.ncols()
        )));
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::numeric(format!(
                "cholesky: non-positive pivot {d:.3e} at column {j}"
            )));
        }
        let dj = d.sqrt();
        l[[j, j]] = dj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / dj;
        }
    }
    Ok(l)
}

/// Solve `L x = b` for lower-triangular `L` by forward substitution.
pub fn solve_lower(l: ArrayView2<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut x = b.to_owned();
    for i in 0..n {
        for k in 0..i {
            let t = l[[i, k]] * x[k];
            x[i] -= t;
        }
        x[i] /= l[[i, i]];
    }
    x
}

/// Solve `L' x = b` for lower-triangular `L` by back substitution.
pub fn solve_lower_transpose(l: ArrayView2<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut x = b.to_owned();
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let t = l[[k, i]] * x[k];
            x[i] -= t;
        }
        x[i] /= l[[i, i]];
    }
    x
}

/// Solve the SPD system `a x = b` via Cholesky.
pub fn solve_spd(a: ArrayView2<f64>, b: ArrayView1<f64>) -> Result<Array1<f64>> {
    let l = cholesky_lower(a)?;
    let y = solve_lower(l.view(), b);
    Ok(solve_lower_transpose(l.view(), y.view()))
}

/// Solve `a X = B` column by column for SPD `a`.
pub fn solve_spd_multi(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<Array2<f64>> {
    let l = cholesky_lower(a)?;
    let mut x = Array2::<f64>::zeros(b.raw_dim());
    for (j, col) in b.columns().into_iter().enumerate() {
        let y = solve_lower(l.view(), col);
        let s = solve_lower_transpose(l.view(), y.view());
        x.column_mut(j).assign(&s);
    }
    Ok(x)
}
