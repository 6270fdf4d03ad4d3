//! Multi-block MCMC sampler for the horseshoe-regularized nonlinear
//! regression. One iteration sweeps, in order: the joint Gaussian draw of the
//! linear and output-layer coefficients, an HMC update of the hidden-layer
//! weights and biases, the horseshoe scale sweep for every coefficient block,
//! the activation-indicator draws, and the volatility block.

mod hmc;
mod horseshoe;
mod indicators;
mod linear_block;
mod sv;

pub use hmc::{
    flatten_inner, hmc_step, hmc_update_inner, inner_prior_variances, leapfrog, unflatten_inner,
    HmcStep, HmcTarget, InnerWeightsTarget, DIVERGENCE_ENERGY,
};
pub use horseshoe::{
    draw_inverse_gamma, horseshoe_update, horseshoe_update_row, HorseshoeBlock, HorseshoeState,
    SCALE_MAX, SCALE_MIN,
};
pub use indicators::draw_activation_indicators;
pub use linear_block::draw_linear_and_output;
pub use sv::{sv_update, SvState, LOG_VOL_MAX, LOG_VOL_MIN};

use std::sync::Arc;
use std::time::Instant;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bnn::{forward, predict_mean, NetworkParams, NetworkShape, DEFAULT_LEAKY_ALPHA};
use crate::error::{Error, Result};

/// Initial scale of the hidden and output weights.
const INIT_WEIGHT_SD: f64 = 0.1;

/// Acceptance-rate band outside of which a warning is recorded.
const HMC_ACCEPT_LOW: f64 = 0.4;
const HMC_ACCEPT_HIGH: f64 = 0.95;

/// Sampler settings for one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub n_iter: usize,
    pub n_burn: usize,
    /// Leapfrog step size.
    pub hmc_step_size: f64,
    /// Leapfrog steps per proposal.
    pub hmc_n_steps: usize,
    pub seed: u64,
    /// Time-varying variances when true; a single homoskedastic variance
    /// otherwise.
    pub sv_enabled: bool,
    /// With the network disabled the model reduces to the shrunk linear
    /// regression; the HMC and indicator blocks are skipped.
    pub network_enabled: bool,
    /// Negative slope of the leaky ReLU activation.
    pub leaky_alpha: f64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            n_iter: 20_000,
            n_burn: 10_000,
            hmc_step_size: 0.01,
            hmc_n_steps: 10,
            seed: 0,
            sv_enabled: true,
            network_enabled: true,
            leaky_alpha: DEFAULT_LEAKY_ALPHA,
        }
    }
}

impl ChainConfig {
    /// Short chain with the given iteration split; used by desk-scale runs
    /// and tests.
    pub fn quick(n_iter: usize, n_burn: usize, seed: u64) -> Self {
        ChainConfig {
            n_iter,
            n_burn,
            seed,
            ..ChainConfig::default()
        }
    }

    pub fn n_retained(&self) -> usize {
        self.n_iter - self.n_burn
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_burn >= self.n_iter {
            return Err(Error::config(format!(
                "burn-in ({}) must be smaller than total iterations ({})",
                self.n_burn, self.n_iter
            )));
        }
        if !(self.hmc_step_size > 0.0) {
            return Err(Error::config("HMC step size must be positive"));
        }
        if self.hmc_n_steps == 0 {
            return Err(Error::config("at least one leapfrog step required"));
        }
        Ok(())
    }
}

/// Provider of per-iteration values for the lagged-shock regressor columns.
pub trait SlotFeed {
    fn n_slots(&self) -> usize;
    /// Write the slot values for `iteration` into `out` (rows x n_slots).
    fn fill(&self, iteration: usize, out: ArrayViewMut2<f64>);
}

/// Wall-clock seconds spent in each block.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BlockTiming {
    pub linear: f64,
    pub hmc: f64,
    pub horseshoe: f64,
    pub indicators: f64,
    pub sv: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    /// HMC acceptance rate over all iterations; absent when the network (and
    /// with it the HMC block) is disabled.
    pub hmc_accept_rate: Option<f64>,
    pub hmc_divergences: usize,
    pub warnings: Vec<String>,
    /// Timing is informational only and excluded from determinism checks.
    pub timing: BlockTiming,
}

/// Retained posterior draws of one chain.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    /// Retained parameter draws, one per post-burn-in iteration.
    pub params: Vec<NetworkParams>,
    /// Retained horseshoe scale states.
    pub horseshoe: Vec<HorseshoeState>,
    /// Retained volatility states.
    pub sv: Vec<SvState>,
    /// Residual draws for every iteration including burn-in
    /// (`n_iter x T`); later horizons consume these row by row.
    pub residuals_full: Arc<Array2<f64>>,
    pub n_burn: usize,
    pub diagnostics: ChainDiagnostics,
}

impl ChainOutput {
    pub fn n_retained(&self) -> usize {
        self.params.len()
    }

    /// Post-burn-in residual draws (`n_retained x T`).
    pub fn residual_draws(&self) -> ArrayView2<'_, f64> {
        self.residuals_full.slice(s![self.n_burn.., ..])
    }
}

/// Run one chain on `(y, x)`. When `slots` is given, the trailing
/// `slots.n_slots()` columns of `x` are refreshed from it at the start of
/// every iteration.
pub fn run_chain(
    y: ArrayView1<f64>,
    x: ArrayView2<f64>,
    shape: &NetworkShape,
    cfg: &ChainConfig,
    slots: Option<&dyn SlotFeed>,
) -> Result<ChainOutput> {
    cfg.validate()?;
    let t_len = y.len();
    if x.nrows() != t_len {
        return Err(Error::invalid_input(format!(
            "chain: y has {} observations but X has {} rows",
            t_len,
            x.nrows()
        )));
    }
    if t_len == 0 {
        return Err(Error::invalid_input("chain: empty sample"));
    }
    if shape.n_inputs != x.ncols() {
        return Err(Error::invalid_input(format!(
            "chain: network expects {} inputs but X has {} columns",
            shape.n_inputs,
            x.ncols()
        )));
    }
    if let Some(feed) = slots {
        if feed.n_slots() > x.ncols() {
            return Err(Error::invalid_input(
                "chain: more slot columns than design columns",
            ));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x_work = x.to_owned();
    let n_layers = shape.n_hidden_layers();
    let q_last = shape.widths[n_layers - 1];
    let k = shape.n_inputs;

    // Diffuse start: zero linear coefficients, small random weights, unit
    // horseshoe scales, flat volatility at the sample variance.
    let mut params = if cfg.network_enabled {
        NetworkParams::random_init(shape, INIT_WEIGHT_SD, cfg.leaky_alpha, &mut rng)
    } else {
        NetworkParams::zeros(shape, cfg.leaky_alpha)
    };
    let mut scales = HorseshoeState::ones(shape);
    let y_mean = y.sum() / t_len as f64;
    let y_var = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum::<f64>() / t_len as f64;
    let mut sv = SvState::constant(t_len, y_var.max(1e-8).ln());

    let n_keep = cfg.n_retained();
    let mut out_params = Vec::with_capacity(n_keep);
    let mut out_scales = Vec::with_capacity(n_keep);
    let mut out_sv = Vec::with_capacity(n_keep);
    let mut residuals_full = Array2::<f64>::zeros((cfg.n_iter, t_len));
    let mut diagnostics = ChainDiagnostics::default();
    let mut accepted = 0usize;

    let mut hidden = Array2::<f64>::zeros((t_len, q_last));
    let slot_start = slots.map(|f| k - f.n_slots());

    for iter in 0..cfg.n_iter {
        let stage = |e: Error| match e {
            Error::Numeric(msg) => Error::Numeric(format!("iteration {iter}: {msg}")),
            other => other,
        };

        if let (Some(feed), Some(start)) = (slots, slot_start) {
            feed.fill(iter, x_work.slice_mut(s![.., start..]));
        }
        let noise_var = sv.variances();

        // Joint Gaussian draw of (gamma, W_{L+1}).
        let t0 = Instant::now();
        let n_out = if cfg.network_enabled { q_last } else { 0 };
        if cfg.network_enabled {
            for (t, row) in x_work.rows().into_iter().enumerate() {
                let fwd = forward(&params, row).map_err(stage)?;
                hidden.row_mut(t).assign(&fwd.hidden[n_layers - 1]);
            }
        }
        let mut prior_var = Vec::with_capacity(k + n_out);
        for j in 0..k {
            prior_var.push(scales.gamma.prior_variance(0, j));
        }
        for j in 0..n_out {
            prior_var.push(scales.output.prior_variance(0, j));
        }
        let hidden_view = if cfg.network_enabled {
            hidden.view()
        } else {
            hidden.slice(s![.., ..0])
        };
        let (gamma, w_out) = draw_linear_and_output(
            y,
            x_work.view(),
            hidden_view,
            &prior_var,
            &noise_var,
            &mut rng,
        )
        .map_err(stage)?;
        params.linear_coef = gamma;
        if cfg.network_enabled {
            params.weights[n_layers].row_mut(0).assign(&w_out);
        }
        diagnostics.timing.linear += t0.elapsed().as_secs_f64();

        // HMC step on the hidden weights and biases.
        if cfg.network_enabled {
            let t0 = Instant::now();
            let outcome = hmc_update_inner(
                &mut params,
                y,
                x_work.view(),
                &scales,
                &noise_var,
                cfg.hmc_step_size,
                cfg.hmc_n_steps,
                &mut rng,
            )
            .map_err(stage)?;
            if outcome.accepted {
                accepted += 1;
            }
            if outcome.divergent {
                diagnostics.hmc_divergences += 1;
            }
            diagnostics.timing.hmc += t0.elapsed().as_secs_f64();
        }

        // Horseshoe sweep over every coefficient block.
        let t0 = Instant::now();
        horseshoe_update(
            params.linear_coef.view().insert_axis(ndarray::Axis(0)),
            &mut scales.gamma,
            &mut rng,
        )
        .map_err(stage)?;
        if cfg.network_enabled {
            horseshoe_update(
                params.weights[n_layers].view(),
                &mut scales.output,
                &mut rng,
            )
            .map_err(stage)?;
            for l in 0..n_layers {
                let rows = params.weights[l].nrows();
                let cols = params.weights[l].ncols();
                let mut block = Array2::<f64>::zeros((rows, cols + 1));
                block.slice_mut(s![.., ..cols]).assign(&params.weights[l]);
                block.column_mut(cols).assign(&params.biases[l]);
                horseshoe_update(block.view(), &mut scales.inner[l], &mut rng).map_err(stage)?;
            }
        }
        diagnostics.timing.horseshoe += t0.elapsed().as_secs_f64();

        // Activation indicators.
        if cfg.network_enabled {
            let t0 = Instant::now();
            draw_activation_indicators(&mut params, y, x_work.view(), &noise_var, &mut rng)
                .map_err(stage)?;
            diagnostics.timing.indicators += t0.elapsed().as_secs_f64();
        }

        // Residuals under the iteration's final parameters feed the
        // volatility block and the sequential-horizon store.
        let mut resid = Array1::<f64>::zeros(t_len);
        for (t, row) in x_work.rows().into_iter().enumerate() {
            resid[t] = y[t] - predict_mean(&params, row).map_err(stage)?;
        }

        let t0 = Instant::now();
        sv_update(resid.view(), &mut sv, cfg.sv_enabled, &mut rng).map_err(stage)?;
        diagnostics.timing.sv += t0.elapsed().as_secs_f64();

        residuals_full.row_mut(iter).assign(&resid);
        if iter >= cfg.n_burn {
            out_params.push(params.clone());
            out_scales.push(scales.clone());
            out_sv.push(sv.clone());
        }
    }

    if cfg.network_enabled {
        let rate = accepted as f64 / cfg.n_iter as f64;
        diagnostics.hmc_accept_rate = Some(rate);
        if !(HMC_ACCEPT_LOW..=HMC_ACCEPT_HIGH).contains(&rate) {
            diagnostics.warnings.push(format!(
                "HMC acceptance rate {rate:.3} outside [{HMC_ACCEPT_LOW}, {HMC_ACCEPT_HIGH}]; \
                 consider adjusting hmc_step_size"
            ));
        }
    }

    Ok(ChainOutput {
        params: out_params,
        horseshoe: out_scales,
        sv: out_sv,
        residuals_full: Arc::new(residuals_full),
        n_burn: cfg.n_burn,
        diagnostics,
    })
}

/// Derive an independent ChaCha stream for a sub-task of a seeded run.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand_distr::{Distribution, StandardNormal};

    fn linear_data(t_len: usize, seed: u64) -> (Array1<f64>, Array2<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = 3;
        let truth = vec![1.5, -0.8, 0.0];
        let x = Array2::from_shape_fn((t_len, k), |_| {
            let e: f64 = StandardNormal.sample(&mut rng);
            e
        });
        let y = Array1::from_shape_fn(t_len, |t| {
            let e: f64 = StandardNormal.sample(&mut rng);
            truth
                .iter()
                .enumerate()
                .map(|(j, b)| b * x[[t, j]])
                .sum::<f64>()
                + 0.3 * e
        });
        (y, x, truth)
    }

    #[test]
    fn retained_draw_count_matches_split() {
        let (y, x, _) = linear_data(30, 1);
        let shape = NetworkShape::new(3, vec![2]).unwrap();
        let mut cfg = ChainConfig::quick(10, 5, 7);
        cfg.sv_enabled = false;
        let out = run_chain(y.view(), x.view(), &shape, &cfg, None).unwrap();
        assert_eq!(out.n_retained(), 5);
        assert_eq!(out.residual_draws().nrows(), 5);
        assert_eq!(out.residuals_full.nrows(), 10);
    }

    #[test]
    fn default_config_matches_paper_scale() {
        let cfg = ChainConfig::default();
        assert_eq!(cfg.n_iter, 20_000);
        assert_eq!(cfg.n_burn, 10_000);
    }

    #[test]
    fn config_validation() {
        let mut cfg = ChainConfig::quick(10, 10, 0);
        assert!(cfg.validate().is_err());
        cfg.n_burn = 5;
        cfg.hmc_step_size = 0.0;
        assert!(cfg.validate().is_err());
        cfg.hmc_step_size = 0.1;
        cfg.hmc_n_steps = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let (y, x, _) = linear_data(40, 2);
        let shape = NetworkShape::new(3, vec![2]).unwrap();
        let cfg = ChainConfig::quick(30, 10, 11);
        let a = run_chain(y.view(), x.view(), &shape, &cfg, None).unwrap();
        let b = run_chain(y.view(), x.view(), &shape, &cfg, None).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.horseshoe, b.horseshoe);
        assert_eq!(a.sv, b.sv);
        assert_eq!(a.residuals_full, b.residuals_full);
    }

    #[test]
    fn linear_dgp_recovers_ols() {
        let (y, x, _) = linear_data(300, 3);
        let shape = NetworkShape::new(3, vec![3]).unwrap();
        let mut cfg = ChainConfig::quick(1200, 400, 5);
        cfg.sv_enabled = false;
        cfg.hmc_step_size = 0.05;
        let out = run_chain(y.view(), x.view(), &shape, &cfg, None).unwrap();

        // OLS oracle.
        let xtx = x.t().dot(&x);
        let xty = x.t().dot(&y);
        let ols = crate::linalg::solve_spd(xtx.view(), xty.view()).unwrap();

        for j in 0..3 {
            let post_mean: f64 =
                out.params.iter().map(|p| p.linear_coef[j]).sum::<f64>() / out.n_retained() as f64;
            assert!(
                (post_mean - ols[j]).abs() < 0.1,
                "gamma[{j}] posterior mean {post_mean} vs OLS {}",
                ols[j]
            );
        }

        // The network term should be negligible on a purely linear DGP:
        // pointwise 68% bands of f(x_t) should cover zero for most t.
        let mut covered = 0usize;
        let t_check = 60;
        for t in 0..t_check {
            let mut vals: Vec<f64> = out
                .params
                .iter()
                .map(|p| forward(p, x.row(t)).unwrap().value)
                .collect();
            vals.sort_by(f64::total_cmp);
            let lo = vals[(0.16 * vals.len() as f64) as usize];
            let hi = vals[(0.84 * vals.len() as f64) as usize];
            if lo <= 0.0 && 0.0 <= hi {
                covered += 1;
            }
        }
        assert!(
            covered as f64 >= 0.6 * t_check as f64,
            "zero covered in only {covered}/{t_check} bands"
        );
    }

    #[test]
    fn horseshoe_shrinks_null_coefficients() {
        // 5 strong and 15 null coefficients; the null block should end up
        // much smaller in posterior mean magnitude.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t_len = 300;
        let k = 20;
        let x = Array2::from_shape_fn((t_len, k), |_| {
            let e: f64 = StandardNormal.sample(&mut rng);
            e
        });
        let y = Array1::from_shape_fn(t_len, |t| {
            let signal: f64 = (0..5).map(|j| 1.5 * x[[t, j]]).sum();
            let e: f64 = StandardNormal.sample(&mut rng);
            signal + 0.5 * e
        });
        let shape = NetworkShape::new(k, vec![1]).unwrap();
        let mut cfg = ChainConfig::quick(800, 300, 13);
        cfg.sv_enabled = false;
        cfg.network_enabled = false;
        let out = run_chain(y.view(), x.view(), &shape, &cfg, None).unwrap();
        let mean_abs = |idx: &[usize]| -> f64 {
            idx.iter()
                .map(|&j| {
                    (out.params.iter().map(|p| p.linear_coef[j]).sum::<f64>()
                        / out.n_retained() as f64)
                        .abs()
                })
                .sum::<f64>()
                / idx.len() as f64
        };
        let strong: Vec<usize> = (0..5).collect();
        let null: Vec<usize> = (5..20).collect();
        let strong_mean = mean_abs(&strong);
        let null_mean = mean_abs(&null);
        assert!(
            null_mean <= 0.5 * strong_mean,
            "null mean |gamma| {null_mean} vs strong {strong_mean}"
        );
    }

    #[test]
    fn scale_draws_strictly_positive() {
        let (y, x, _) = linear_data(50, 8);
        let shape = NetworkShape::new(3, vec![2]).unwrap();
        let cfg = ChainConfig::quick(40, 20, 3);
        let out = run_chain(y.view(), x.view(), &shape, &cfg, None).unwrap();
        for state in &out.horseshoe {
            state.validate().unwrap();
        }
        for sv in &out.sv {
            assert!(sv.log_vol.iter().all(|h| h.exp() > 0.0));
        }
    }

    #[test]
    fn pathological_step_size_flags_warning() {
        let (y, x, _) = linear_data(60, 4);
        let shape = NetworkShape::new(3, vec![2]).unwrap();
        let mut cfg = ChainConfig::quick(60, 30, 21);
        cfg.hmc_step_size = 50.0;
        let out = run_chain(y.view(), x.view(), &shape, &cfg, None).unwrap();
        let rate = out.diagnostics.hmc_accept_rate.unwrap();
        assert!(rate < HMC_ACCEPT_LOW);
        assert!(!out.diagnostics.warnings.is_empty());
    }
}
