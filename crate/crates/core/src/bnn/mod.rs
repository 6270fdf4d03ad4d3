//! Deterministic building blocks of the nonlinear regression term: network
//! parameter containers, the four base activations and their per-neuron
//! mixture, forward evaluation, and the reverse-mode gradient consumed by the
//! HMC block.

mod activation;
mod forward;
mod network;

pub use activation::{
    base_activation, base_activation_alpha, mixture_activation, Activation, ActivationMixture,
    DEFAULT_LEAKY_ALPHA, N_ACTIVATIONS, SIMPLEX_TOL,
};
pub use forward::{
    forward, forward_gradient, forward_gradient_from, predict_mean, ForwardPass, InnerGradient,
};
pub use network::{NetworkParams, NetworkShape};
