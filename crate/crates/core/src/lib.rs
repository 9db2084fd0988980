//! Ruin probabilities with a Parisian delay for spectrally negative Lévy
//! surplus processes.
//!
//! The probability that the process spends a consecutive stretch of length
//! greater than `r` strictly below zero reduces, under positive mean drift,
//! to a ratio of two integrals against the positive part of the law of X_r,
//! weighted by the scale function W:
//!
//! ```text
//! P_x(ruin with delay r) = 1 - E[X_1] · ∫_0^∞ W(x+z) z P(X_r ∈ dz)
//!                                       ─────────────────────────────
//!                                           ∫_0^∞ z P(X_r ∈ dz)
//! ```
//!
//! The crate provides:
//! - [`levy_model`]: the model families, ψ, E[X_1] and the inverse Φ;
//! - [`special_functions`]: normal CDF/quantile, incomplete gamma,
//!   Mittag-Leffler of order 1/2, Whittaker W;
//! - [`scale_function`]: W and W', closed form or Talbot-inverted;
//! - [`time_r_law`]: atom + density of the positive part of X_r, partial
//!   moments and first-passage distributions;
//! - [`parisian`]: the ruin probability itself, classical ruin, and the
//!   identity checks backing them;
//! - [`monte_carlo`]: an independent path-simulation oracle;
//! - [`numerics`]: quadrature, root finding and Laplace inversion kernels.

// `!(x > 0.0)` deliberately rejects NaN along with nonpositive values, and
// published quadrature constants are quoted at their full printed precision.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::excessive_precision)]

pub mod error;
pub mod levy_model;
pub mod monte_carlo;
pub mod numerics;
pub mod parisian;
pub mod scale_function;
pub mod special_functions;
pub mod time_r_law;

pub use error::{Error, Result};
pub use levy_model::LevyModel;
pub use monte_carlo::{McEstimate, SimConfig};
pub use numerics::NumericsConfig;
pub use parisian::{RuinMethod, RuinQuery, RuinResult};
pub use scale_function::{ScaleFunction, ScaleMethod};
pub use special_functions::SpecialFnConfig;
pub use time_r_law::{Atom, PositiveLaw, StableScaling};
