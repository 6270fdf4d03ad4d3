//! Stochastic volatility block: latent AR(1) log-variances updated by
//! single-site Metropolis, with a conjugate draw for the level and
//! random-walk Metropolis for persistence and innovation scale. When SV is
//! disabled the block collapses to one inverse-Gamma draw of a homoskedastic
//! variance.

use ndarray::ArrayView1;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::mcmc::horseshoe::draw_inverse_gamma;

/// Log-variances are kept inside this band.
pub const LOG_VOL_MIN: f64 = -20.0;
pub const LOG_VOL_MAX: f64 = 20.0;

/// Homoskedastic fallback prior: `sigma^2 ~ IG(0.01, 0.01)`.
const HOMOSKEDASTIC_PRIOR_SHAPE: f64 = 0.01;
const HOMOSKEDASTIC_PRIOR_RATE: f64 = 0.01;

// Weakly informative priors for the SV parameters.
const MU_PRIOR_VAR: f64 = 10.0;
const PHI_BETA_A: f64 = 20.0;
const PHI_BETA_B: f64 = 1.5;
const SIGMA_ETA_GAMMA_SHAPE: f64 = 0.5;
const SIGMA_ETA_GAMMA_RATE: f64 = 0.5;

const PHI_PROPOSAL_SD: f64 = 0.05;
const LOG_SIGMA_ETA_PROPOSAL_SD: f64 = 0.3;

/// Latent log-variance path and its AR(1) parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SvState {
    /// `h_t`, so the observation variance at `t` is `exp(h_t)`.
    pub log_vol: Vec<f64>,
    pub mu: f64,
    pub phi_ar: f64,
    pub sigma_eta: f64,
}

impl SvState {
    /// Flat start at a common log-variance.
    pub fn constant(n: usize, log_var: f64) -> Self {
        let lv = log_var.clamp(LOG_VOL_MIN, LOG_VOL_MAX);
        SvState {
            log_vol: vec![lv; n],
            mu: lv,
            phi_ar: 0.9,
            sigma_eta: 0.2,
        }
    }

    pub fn len(&self) -> usize {
        self.log_vol.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_vol.is_empty()
    }

    pub fn variance(&self, t: usize) -> f64 {
        self.log_vol[t].exp()
    }

    pub fn variances(&self) -> Vec<f64> {
        self.log_vol.iter().map(|h| h.exp()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.phi_ar.abs() >= 1.0 {
            return Err(Error::invalid_state(format!(
                "SV persistence must satisfy |phi| < 1, got {}",
                self.phi_ar
            )));
        }
        if !(self.sigma_eta > 0.0) {
            return Err(Error::invalid_state(format!(
                "SV innovation sd must be positive, got {}",
                self.sigma_eta
            )));
        }
        if self.log_vol.iter().any(|h| !h.is_finite()) {
            return Err(Error::invalid_state("SV log-variances must be finite"));
        }
        Ok(())
    }
}

/// One sweep of the volatility block given the current residuals. With
/// `enabled = false` only a common variance is drawn.
pub fn sv_update<R: Rng>(
    residuals: ArrayView1<f64>,
    sv: &mut SvState,
    enabled: bool,
    rng: &mut R,
) -> Result<()> {
    let n = residuals.len();
    if n != sv.len() {
        return Err(Error::invalid_input(format!(
            "sv update: {} residuals vs {} latent states",
            n,
            sv.len()
        )));
    }
    if n == 0 {
        return Ok(());
    }

    if !enabled {
        let ssr: f64 = residuals.iter().map(|r| r * r).sum();
        let shape = HOMOSKEDASTIC_PRIOR_SHAPE + 0.5 * n as f64;
        let rate = HOMOSKEDASTIC_PRIOR_RATE + 0.5 * ssr;
        let sigma2 = draw_inverse_gamma(shape, rate, rng);
        let h = sigma2.ln().clamp(LOG_VOL_MIN, LOG_VOL_MAX);
        sv.log_vol.fill(h);
        sv.mu = h;
        return Ok(());
    }

    update_log_vol(residuals, sv, rng);
    update_mu(sv, rng);
    update_phi(sv, rng);
    update_sigma_eta(sv, rng);
    Ok(())
}

/// Observation log density of one residual at log-variance `h`, dropping
/// constants.
fn obs_loglik(r: f64, h: f64) -> f64 {
    -0.5 * h - 0.5 * r * r * (-h).exp()
}

/// Single-site Metropolis: propose from the AR(1) conditional prior of each
/// `h_t`, accept with the observation likelihood ratio.
fn update_log_vol<R: Rng>(residuals: ArrayView1<f64>, sv: &mut SvState, rng: &mut R) {
    let n = sv.len();
    let phi = sv.phi_ar;
    let mu = sv.mu;
    let s2 = sv.sigma_eta * sv.sigma_eta;
    for t in 0..n {
        let (prior_mean, prior_var) = if n == 1 {
            (mu, s2 / (1.0 - phi * phi))
        } else if t == 0 {
            // Stationary marginal combined with the transition to h_1.
            (mu * (1.0 - phi) + phi * sv.log_vol[1], s2)
        } else if t == n - 1 {
            (mu + phi * (sv.log_vol[t - 1] - mu), s2)
        } else {
            let m = mu + phi * ((sv.log_vol[t - 1] - mu) + (sv.log_vol[t + 1] - mu))
                / (1.0 + phi * phi);
            (m, s2 / (1.0 + phi * phi))
        };
        let noise: f64 = StandardNormal.sample(rng);
        let proposal = prior_mean + prior_var.sqrt() * noise;
        if !(LOG_VOL_MIN..=LOG_VOL_MAX).contains(&proposal) {
            continue;
        }
        let log_ratio = obs_loglik(residuals[t], proposal) - obs_loglik(residuals[t], sv.log_vol[t]);
        if rng.gen::<f64>().ln() < log_ratio {
            sv.log_vol[t] = proposal;
        }
    }
}

/// Conjugate Gaussian update of the level given the path.
fn update_mu<R: Rng>(sv: &mut SvState, rng: &mut R) {
    let n = sv.len();
    let phi = sv.phi_ar;
    let s2 = sv.sigma_eta * sv.sigma_eta;
    let mut precision = 1.0 / MU_PRIOR_VAR + (1.0 - phi * phi) / s2;
    let mut mean_num = sv.log_vol[0] * (1.0 - phi * phi) / s2;
    let c = 1.0 - phi;
    for t in 1..n {
        let s = sv.log_vol[t] - phi * sv.log_vol[t - 1];
        mean_num += c * s / s2;
        precision += c * c / s2;
    }
    let mean = mean_num / precision;
    let sd = (1.0 / precision).sqrt();
    let noise: f64 = StandardNormal.sample(rng);
    sv.mu = mean + sd * noise;
}

/// Log prior + AR(1) log likelihood of the path as a function of `(phi, s2)`,
/// including the stationary initial density.
fn path_loglik(sv: &SvState, phi: f64, s2: f64) -> f64 {
    let n = sv.len();
    let var0 = s2 / (1.0 - phi * phi);
    let d0 = sv.log_vol[0] - sv.mu;
    let mut ll = -0.5 * var0.ln() - 0.5 * d0 * d0 / var0;
    for t in 1..n {
        let e = sv.log_vol[t] - sv.mu - phi * (sv.log_vol[t - 1] - sv.mu);
        ll += -0.5 * s2.ln() - 0.5 * e * e / s2;
    }
    ll
}

fn phi_log_prior(phi: f64) -> f64 {
    // (phi + 1) / 2 ~ Beta(20, 1.5).
    let u = 0.5 * (phi + 1.0);
    (PHI_BETA_A - 1.0) * u.ln() + (PHI_BETA_B - 1.0) * (1.0 - u).ln()
}

fn update_phi<R: Rng>(sv: &mut SvState, rng: &mut R) {
    let s2 = sv.sigma_eta * sv.sigma_eta;
    let proposal_dist = Normal::new(0.0, PHI_PROPOSAL_SD).unwrap();
    let proposal = sv.phi_ar + proposal_dist.sample(rng);
    if proposal.abs() >= 0.995 {
        return;
    }
    let log_ratio = path_loglik(sv, proposal, s2) + phi_log_prior(proposal)
        - path_loglik(sv, sv.phi_ar, s2)
        - phi_log_prior(sv.phi_ar);
    if rng.gen::<f64>().ln() < log_ratio {
        sv.phi_ar = proposal;
    }
}

fn update_sigma_eta<R: Rng>(sv: &mut SvState, rng: &mut R) {
    // Random walk on log(sigma_eta^2); Gamma(1/2, 1/2) prior on sigma_eta^2
    // is not conjugate under the AR likelihood.
    let s2 = sv.sigma_eta * sv.sigma_eta;
    let log_s2 = s2.ln();
    let proposal_dist = Normal::new(0.0, LOG_SIGMA_ETA_PROPOSAL_SD).unwrap();
    let log_s2_new = log_s2 + proposal_dist.sample(rng);
    let s2_new = log_s2_new.exp();
    if !(1e-12..=1e6).contains(&s2_new) {
        return;
    }
    let log_prior = |v: f64| (SIGMA_ETA_GAMMA_SHAPE - 1.0) * v.ln() - SIGMA_ETA_GAMMA_RATE * v;
    // Jacobian of the log transform adds one power of the variance.
    let log_ratio = path_loglik(sv, sv.phi_ar, s2_new) + log_prior(s2_new) + log_s2_new
        - path_loglik(sv, sv.phi_ar, s2)
        - log_prior(s2)
        - log_s2;
    if rng.gen::<f64>().ln() < log_ratio {
        sv.sigma_eta = s2_new.sqrt();
    }
}
