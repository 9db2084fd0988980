//! The scale function W and its density W', evaluated in closed form for
//! the three concrete model families and by numerical Laplace inversion of
//! `1/ψ` otherwise.
//!
//! W is the strictly increasing continuous function on [0,∞) with
//! `∫_0^∞ e^{-θx} W(x) dx = 1/ψ(θ)`, extended by W(x) = 0 for x < 0.
//! Under positive mean drift it is bounded by `1/E[X_1]`, which it
//! approaches as x → ∞; W(0) > 0 exactly for bounded-variation paths.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::levy_model::LevyModel;
use crate::numerics::{integrate, talbot_inverse, NumericsConfig};
use crate::special_functions::{mittag_leffler_half, SpecialFnConfig};

/// How W is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleMethod {
    /// Analytic formula (Brownian, Cramér–Lundberg, stable-3/2).
    ClosedForm,
    /// Fixed-Talbot inversion of 1/ψ (any model with a complex ψ).
    LaplaceInversion,
}

// Below this x the inversion returns the initial-value limit
// W(0+) = lim θ/ψ(θ) instead of running the contour. The threshold must be
// small: W can have a sqrt-cusp at 0 (unbounded variation), so a plateau of
// width d injects O(d^{3/2}) error into Laplace round trips.
const INVERSION_X_MIN: f64 = 1e-6;
// Beyond this x the inversion result is clamped into the monotone envelope
// [W(50), 1/E[X_1]] so the far tail stays monotone.
const INVERSION_X_CLAMP: f64 = 50.0;

/// Evaluator for W and W', immutable after construction (all limits and
/// probe values are precomputed, so concurrent evaluation is bitwise equal
/// to sequential evaluation).
#[derive(Debug, Clone)]
pub struct ScaleFunction {
    model: LevyModel,
    method: ScaleMethod,
    inversion_nodes: usize,
    sf_cfg: SpecialFnConfig,
    w_inf: f64,
    w_zero: f64,
    w_clamp_ref: f64,
}

impl ScaleFunction {
    /// Closed form where available, Laplace inversion for `GenericPsi`.
    pub fn new(model: LevyModel, cfg: &NumericsConfig) -> Result<Self> {
        match model {
            LevyModel::GenericPsi { .. } => Self::laplace_inversion(model, cfg),
            _ => Self::closed_form(model),
        }
    }

    /// Analytic evaluator; rejects `GenericPsi`.
    pub fn closed_form(model: LevyModel) -> Result<Self> {
        if matches!(model, LevyModel::GenericPsi { .. }) {
            return Err(Error::Unsupported("no closed-form scale function for a generic psi".into()));
        }
        let w_inf = 1.0 / model.mean_drift()?;
        let w_zero = model.scale_at_zero();
        Ok(Self {
            model,
            method: ScaleMethod::ClosedForm,
            inversion_nodes: 0,
            sf_cfg: SpecialFnConfig::default(),
            w_inf,
            w_zero,
            w_clamp_ref: 0.0,
        })
    }

    /// Talbot-inversion evaluator with `cfg.talbot_nodes` contour nodes.
    ///
    /// Construction probes a small x-grid with the node-count self-check, so
    /// a ψ the contour cannot handle fails fast here rather than mid-sweep.
    pub fn laplace_inversion(model: LevyModel, cfg: &NumericsConfig) -> Result<Self> {
        let w_inf = 1.0 / model.mean_drift()?;
        let w_zero = model.scale_at_zero();
        let mut sf = Self {
            model,
            method: ScaleMethod::LaplaceInversion,
            inversion_nodes: cfg.talbot_nodes.max(8),
            sf_cfg: cfg.special.clone(),
            w_inf,
            w_zero,
            w_clamp_ref: 0.0,
        };
        for &x in &[1e-5, 1e-3, 0.1, 1.0, 10.0, INVERSION_X_CLAMP] {
            sf.invert_checked(x)?;
        }
        sf.w_clamp_ref = sf.invert_checked(INVERSION_X_CLAMP)?.min(sf.w_inf);
        Ok(sf)
    }

    pub fn model(&self) -> &LevyModel {
        &self.model
    }

    pub fn method(&self) -> ScaleMethod {
        self.method
    }

    /// The saturation value 1/E[X_1].
    pub fn w_inf(&self) -> f64 {
        self.w_inf
    }

    /// W(x); zero for x < 0.
    pub fn w(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match self.method {
            ScaleMethod::ClosedForm => self.w_closed(x),
            ScaleMethod::LaplaceInversion => {
                if x < INVERSION_X_MIN {
                    return self.w_zero;
                }
                let v = self.invert(x, self.inversion_nodes);
                if x > INVERSION_X_CLAMP {
                    v.clamp(self.w_clamp_ref, self.w_inf)
                } else {
                    v.min(self.w_inf)
                }
            }
        }
    }

    /// W(x) with the node-doubling self-check on the inversion path;
    /// identical to [`Self::w`] for closed forms.
    pub fn w_checked(&self, x: f64) -> Result<f64> {
        if x < 0.0 {
            return Ok(0.0);
        }
        match self.method {
            ScaleMethod::ClosedForm => Ok(self.w_closed(x)),
            ScaleMethod::LaplaceInversion => {
                if x < INVERSION_X_MIN {
                    return Ok(self.w_zero);
                }
                let v = self.invert_checked(x)?;
                Ok(if x > INVERSION_X_CLAMP { v.clamp(self.w_clamp_ref, self.w_inf) } else { v.min(self.w_inf) })
            }
        }
    }

    fn w_closed(&self, x: f64) -> f64 {
        match &self.model {
            LevyModel::BrownianDrift { mu, sigma } => {
                (1.0 - (-2.0 * mu / (sigma * sigma) * x).exp()) / mu
            }
            LevyModel::CramerLundbergExp { c, eta, alpha } => {
                let load = c - eta / alpha;
                (1.0 - eta / (c * alpha) * ((eta / c - alpha) * x).exp()) / load
            }
            LevyModel::StableDrift { c } => {
                // W(x) = (1/c)(1 - E_{1/2}(-c sqrt x)); argument is <= 0 so
                // the evaluation cannot fail
                let e = mittag_leffler_half(-c * x.sqrt(), &self.sf_cfg).expect("nonpositive argument");
                (1.0 - e) / c
            }
            LevyModel::GenericPsi { .. } => unreachable!("closed form rejected at construction"),
        }
    }

    fn invert(&self, x: f64, nodes: usize) -> f64 {
        let model = &self.model;
        talbot_inverse(|s| self.reciprocal_psi(model, s), x, nodes)
    }

    fn reciprocal_psi(&self, model: &LevyModel, s: Complex64) -> Complex64 {
        let psi = model.psi_complex(s);
        if psi.norm() == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            psi.inv()
        }
    }

    fn invert_checked(&self, x: f64) -> Result<f64> {
        let v1 = self.invert(x, self.inversion_nodes);
        let v2 = self.invert(x, (3 * self.inversion_nodes / 4).max(8));
        let scale = v1.abs().max(1e-3 * self.w_inf);
        if (v1 - v2).abs() > 1e-6 * scale {
            return Err(Error::Inversion(format!(
                "node counts {} and {} disagree at x={x}: {v1} vs {v2}",
                self.inversion_nodes,
                3 * self.inversion_nodes / 4
            )));
        }
        Ok(v1)
    }

    /// W'(x) for x > 0: analytic derivative of the closed form, central
    /// finite difference (step 1e-6 max(1,x)) on the inversion path.
    ///
    /// W' may blow up as x → 0+ for unbounded-variation paths, so x ≤ 0 is a
    /// domain error rather than a limit.
    pub fn w_prime(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Err(Error::Domain(format!("w_prime needs x > 0, got {x}")));
        }
        match (&self.method, &self.model) {
            (ScaleMethod::ClosedForm, LevyModel::BrownianDrift { mu, sigma }) => {
                Ok(2.0 / (sigma * sigma) * (-2.0 * mu / (sigma * sigma) * x).exp())
            }
            (ScaleMethod::ClosedForm, LevyModel::CramerLundbergExp { c, eta, alpha }) => {
                let load = c - eta / alpha;
                Ok(eta / (c * alpha) * (alpha - eta / c) / load * ((eta / c - alpha) * x).exp())
            }
            (ScaleMethod::ClosedForm, LevyModel::StableDrift { c }) => {
                // d/dx (1/c)(1 - E_{1/2}(-c sqrt x)) = 1/sqrt(pi x) - c E_{1/2}(-c sqrt x)
                let e = mittag_leffler_half(-c * x.sqrt(), &self.sf_cfg)?;
                Ok(1.0 / (std::f64::consts::PI * x).sqrt() - c * e)
            }
            _ => {
                // the contour noise is ~1e-11 absolute; a 1e-6 step would
                // amplify it to ~1e-5 on the difference quotient
                let h = 1e-4 * x.max(1.0);
                Ok((self.w(x + h) - self.w(x - h)) / (2.0 * h))
            }
        }
    }

    /// Numerically integrated `∫_0^∞ e^{-θx} W(x) dx`, for comparison with
    /// `1/ψ(θ)`. Truncates once the integrand envelope `e^{-θx}/E[X_1]`
    /// falls below 1e-16 of the observed peak.
    pub fn laplace_transform_check(&self, theta: f64) -> Result<f64> {
        if theta <= 0.0 {
            return Err(Error::Domain(format!("laplace_transform_check needs theta > 0, got {theta}")));
        }
        let g = |x: f64| (-theta * x).exp() * self.w(x);
        let peak = g(0.25 / theta).max(g(1.0 / theta)).max(g(3.0 / theta)).max(1e-300);
        let mut acc = integrate(g, 0.0, 1.0_f64.min(10.0 / theta), 1e-13, 1e-11)?;
        let mut lo = 1.0_f64.min(10.0 / theta);
        let mut w = lo;
        loop {
            let hi = lo + w;
            acc += integrate(g, lo, hi, 1e-13, 1e-11)?;
            if (-theta * hi).exp() * self.w_inf < 1e-16 * peak {
                // remainder is below 1e-16 * peak / theta
                return Ok(acc);
            }
            lo = hi;
            w *= 2.0;
            if w > 1e12 {
                return Err(Error::Quadrature("laplace_transform_check: tail never truncated".into()));
            }
        }
    }
}
