//! Joint conjugate draw of the linear coefficients and the output-layer
//! weights from their Gaussian conditional posterior.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, solve_lower, solve_lower_transpose};

/// Draw the stacked coefficient vector `(gamma', w_out')'` of the model
/// `y_t = x_t' gamma + w_out' h_t + e_t`, `e_t ~ N(0, noise_var[t])`, under
/// independent `N(0, prior_var[i])` priors.
///
/// `hidden` may have zero columns (no network), in which case only `gamma`
/// is drawn. A failed factorization is retried once with a diagonal jitter
/// before reporting a numeric failure.
pub fn draw_linear_and_output<R: Rng>(
    y: ArrayView1<f64>,
    x_linear: ArrayView2<f64>,
    hidden: ArrayView2<f64>,
    prior_var: &[f64],
    noise_var: &[f64],
    rng: &mut R,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let t_len = y.len();
    if x_linear.nrows() != t_len || (hidden.ncols() > 0 && hidden.nrows() != t_len) {
        return Err(Error::invalid_input(
            "linear block: X and hidden rows must align with y",
        ));
    }
    if noise_var.len() != t_len {
        return Err(Error::invalid_input(
            "linear block: one noise variance per observation required",
        ));
    }
    let k = x_linear.ncols();
    let q = hidden.ncols();
    let p = k + q;
    if prior_var.len() != p {
        return Err(Error::invalid_input(format!(
            "linear block: {p} prior variances required, got {}",
            prior_var.len()
        )));
    }
    if prior_var.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::invalid_input(
            "linear block: prior variances must be positive and finite",
        ));
    }

    // Posterior precision A = Z' D^-1 Z + diag(1/v), b = Z' D^-1 y.
    let mut a = Array2::<f64>::zeros((p, p));
    let mut b = Array1::<f64>::zeros(p);
    let mut z_row = vec![0.0; p];
    for t in 0..t_len {
        for j in 0..k {
            z_row[j] = x_linear[[t, j]];
        }
        for j in 0..q {
            z_row[k + j] = hidden[[t, j]];
        }
        let w = 1.0 / noise_var[t];
        for i in 0..p {
            let zi = z_row[i] * w;
            if zi != 0.0 {
                for j in i..p {
                    a[[i, j]] += zi * z_row[j];
                }
            }
            b[i] += zi * y[t];
        }
    }
    for i in 0..p {
        for j in 0..i {
            a[[i, j]] = a[[j, i]];
        }
        a[[i, i]] += 1.0 / prior_var[i];
    }

    let chol = match cholesky_lower(a.view()) {
        Ok(l) => l,
        Err(_) => {
            let jitter = 1e-8 * (1.0 + a.diag().iter().fold(0.0f64, |m, &d| m.max(d.abs())));
            for i in 0..p {
                a[[i, i]] += jitter;
            }
            cholesky_lower(a.view()).map_err(|_| {
                Error::numeric("linear block: posterior precision not positive definite")
            })?
        }
    };

    // Mean m solves A m = b; the draw adds L^-T eta.
    let half = solve_lower(chol.view(), b.view());
    let mean = solve_lower_transpose(chol.view(), half.view());
    let eta = Array1::from_shape_fn(p, |_| {
        let e: f64 = StandardNormal.sample(rng);
        e
    });
    let perturb = solve_lower_transpose(chol.view(), eta.view());
    let draw = &mean + &perturb;

    let gamma = draw.slice(ndarray::s![..k]).to_owned();
    let w_out = draw.slice(ndarray::s![k..]).to_owned();
    Ok((gamma, w_out))
}
