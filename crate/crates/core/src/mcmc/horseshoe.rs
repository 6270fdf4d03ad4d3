//! Horseshoe shrinkage hierarchy and its Gibbs sweep.
//!
//! Each coefficient row `w_i.` carries a row-global scale `lambda_i^2` and
//! element-wise local scales `varphi_ij^2`, both with half-Cauchy priors.
//! The half-Cauchy is decomposed through auxiliary inverse-Gamma variables so
//! every conditional in the sweep is inverse-Gamma:
//!
//! ```text
//! w_ij            ~ N(0, lambda_i^2 varphi_ij^2)
//! varphi_ij^2 | nu_ij ~ IG(1/2, 1/nu_ij),   nu_ij ~ IG(1/2, 1)
//! lambda_i^2  | xi_i  ~ IG(1/2, 1/xi_i),    xi_i  ~ IG(1/2, 1)
//! ```

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::bnn::NetworkShape;
use crate::error::{Error, Result};

/// Scales are clamped to this range to prevent under/overflow in later
/// blocks; hitting either bound is logged.
pub const SCALE_MIN: f64 = 1e-12;
pub const SCALE_MAX: f64 = 1e12;

/// Draw from an inverse-Gamma with the given shape and rate.
pub fn draw_inverse_gamma<R: Rng>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    let g = Gamma::new(shape, 1.0).expect("inverse-gamma shape must be positive");
    rate / g.sample(rng)
}

fn clamp_scale(v: f64) -> f64 {
    if !(SCALE_MIN..=SCALE_MAX).contains(&v) {
        log::warn!("horseshoe scale {v:.3e} clamped to [{SCALE_MIN:.0e}, {SCALE_MAX:.0e}]");
        v.clamp(SCALE_MIN, SCALE_MAX)
    } else {
        v
    }
}

/// Scales and auxiliaries for one shrunk coefficient block (`rows x cols`).
#[derive(Debug, Clone, PartialEq)]
pub struct HorseshoeBlock {
    /// Row-global scales `lambda_i^2`.
    pub lambda_sq: Array1<f64>,
    /// Auxiliary for each row-global scale.
    pub xi: Array1<f64>,
    /// Element-wise local scales `varphi_ij^2`.
    pub varphi_sq: Array2<f64>,
    /// Auxiliary for each local scale.
    pub nu: Array2<f64>,
}

impl HorseshoeBlock {
    /// Unit initialization: all scales and auxiliaries 1.
    pub fn ones(rows: usize, cols: usize) -> Self {
        HorseshoeBlock {
            lambda_sq: Array1::ones(rows),
            xi: Array1::ones(rows),
            varphi_sq: Array2::ones((rows, cols)),
            nu: Array2::ones((rows, cols)),
        }
    }

    pub fn rows(&self) -> usize {
        self.lambda_sq.len()
    }

    pub fn cols(&self) -> usize {
        self.varphi_sq.ncols()
    }

    /// Implied prior variance of coefficient `(i, j)`.
    pub fn prior_variance(&self, i: usize, j: usize) -> f64 {
        (self.lambda_sq[i] * self.varphi_sq[[i, j]]).clamp(SCALE_MIN, SCALE_MAX)
    }

    pub fn validate(&self) -> Result<()> {
        let all_pos = self.lambda_sq.iter().all(|&v| v > 0.0 && v.is_finite())
            && self.xi.iter().all(|&v| v > 0.0 && v.is_finite())
            && self.varphi_sq.iter().all(|&v| v > 0.0 && v.is_finite())
            && self.nu.iter().all(|&v| v > 0.0 && v.is_finite());
        if all_pos {
            Ok(())
        } else {
            Err(Error::invalid_state(
                "horseshoe scales must be strictly positive and finite",
            ))
        }
    }
}

/// One Gibbs sweep over a single coefficient row: local scales, their
/// auxiliaries, the row-global scale, and its auxiliary.
pub fn horseshoe_update_row<R: Rng>(
    coeffs: ArrayView1<f64>,
    lambda_sq: &mut f64,
    xi: &mut f64,
    varphi_sq: &mut [f64],
    nu: &mut [f64],
    rng: &mut R,
) -> Result<()> {
    let n = coeffs.len();
    if varphi_sq.len() != n || nu.len() != n {
        return Err(Error::invalid_input(
            "horseshoe row update: scale lengths must match coefficient count",
        ));
    }
    if coeffs.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid_input(
            "horseshoe row update: coefficients must be finite",
        ));
    }

    for j in 0..n {
        let w2 = coeffs[j] * coeffs[j];
        let rate = 1.0 / nu[j] + w2 / (2.0 * *lambda_sq);
        varphi_sq[j] = clamp_scale(draw_inverse_gamma(1.0, rate, rng));
        nu[j] = clamp_scale(draw_inverse_gamma(1.0, 1.0 + 1.0 / varphi_sq[j], rng));
    }

    let mut quad = 0.0;
    for j in 0..n {
        quad += coeffs[j] * coeffs[j] / varphi_sq[j];
    }
    let shape = 0.5 * (n as f64 + 1.0);
    let rate = 1.0 / *xi + 0.5 * quad;
    *lambda_sq = clamp_scale(draw_inverse_gamma(shape, rate, rng));
    *xi = clamp_scale(draw_inverse_gamma(1.0, 1.0 + 1.0 / *lambda_sq, rng));
    Ok(())
}

/// Sweep every row of a coefficient block.
pub fn horseshoe_update<R: Rng>(
    coeffs: ArrayView2<f64>,
    block: &mut HorseshoeBlock,
    rng: &mut R,
) -> Result<()> {
    if coeffs.nrows() != block.rows() || coeffs.ncols() != block.cols() {
        return Err(Error::invalid_input(format!(
            "horseshoe update: coefficient block {}x{} vs scale block {}x{}",
            coeffs.nrows(),
            coeffs.ncols(),
            block.rows(),
            block.cols()
        )));
    }
    for i in 0..block.rows() {
        let lambda_sq = &mut block.lambda_sq[i];
        let xi = &mut block.xi[i];
        let mut varphi_row = block.varphi_sq.row_mut(i);
        let mut nu_row = block.nu.row_mut(i);
        horseshoe_update_row(
            coeffs.row(i),
            lambda_sq,
            xi,
            varphi_row.as_slice_mut().unwrap(),
            nu_row.as_slice_mut().unwrap(),
            rng,
        )?;
    }
    Ok(())
}

/// Scale blocks for every shrunk coefficient group of one regression: the
/// hidden layers (bias treated as an extra trailing column of its layer),
/// the output layer, and the linear coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct HorseshoeState {
    /// One block per hidden layer; `widths[l] x (fan_in + 1)`.
    pub inner: Vec<HorseshoeBlock>,
    /// Output layer block, `1 x Q_L`.
    pub output: HorseshoeBlock,
    /// Linear coefficient block, `1 x K`.
    pub gamma: HorseshoeBlock,
}

impl HorseshoeState {
    pub fn ones(shape: &NetworkShape) -> Self {
        let n_layers = shape.n_hidden_layers();
        let inner = (0..n_layers)
            .map(|l| {
                let (rows, cols) = shape.weight_dims(l);
                HorseshoeBlock::ones(rows, cols + 1)
            })
            .collect();
        HorseshoeState {
            inner,
            output: HorseshoeBlock::ones(1, shape.widths[n_layers - 1]),
            gamma: HorseshoeBlock::ones(1, shape.n_inputs),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for b in &self.inner {
            b.validate()?;
        }
        self.output.validate()?;
        self.gamma.validate()
    }
}
