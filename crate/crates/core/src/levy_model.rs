//! Model families of spectrally negative Lévy processes: the Laplace
//! exponent ψ, its derivative at zero (the mean drift) and the right
//! inverse Φ.
//!
//! Three concrete families carry closed forms:
//! - Brownian motion with drift: ψ(θ) = μθ + σ²θ²/2
//! - Cramér–Lundberg with exponential claims: ψ(θ) = cθ - η + ηα/(θ+α)
//! - Stable(3/2) with drift: ψ(θ) = cθ + θ^{3/2}
//!
//! A fourth, `GenericPsi`, wraps a caller-supplied Laplace exponent. The
//! closure takes a *complex* argument so numerical Laplace inversion of the
//! scale function works; Laplace exponents of spectrally negative processes
//! extend analytically to the right half plane, and the caller supplies the
//! principal branch. Callers must also certify the process does not have
//! monotone paths; the library checks parameter positivity only.

use num_complex::Complex64;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::solve_increasing;

/// Caller-supplied Laplace exponent for [`LevyModel::GenericPsi`].
pub type PsiFn = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;

/// A spectrally negative Lévy model, immutable after construction.
#[derive(Clone)]
pub enum LevyModel {
    /// X_t = μt + σB_t with μ, σ > 0.
    BrownianDrift { mu: f64, sigma: f64 },
    /// X_t = ct - Σ_{i<=N_t} C_i; Poisson rate η, claims Exp(α),
    /// positive safety loading c > η/α.
    CramerLundbergExp { c: f64, eta: f64, alpha: f64 },
    /// X_t = ct + Z_t with Z spectrally negative 3/2-stable (ψ_Z(θ)=θ^{3/2}).
    /// The stability index is fixed at 3/2; other indices are out of scope.
    StableDrift { c: f64 },
    /// User-supplied ψ with explicitly supplied ψ'(0) = E[X_1]. The drift is
    /// taken as given rather than differenced numerically: it multiplies the
    /// whole ruin formula, so its accuracy must not be differentiation noise.
    GenericPsi { psi: PsiFn, psi_prime0: f64 },
}

impl fmt::Debug for LevyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BrownianDrift { mu, sigma } => {
                write!(f, "BrownianDrift {{ mu: {mu}, sigma: {sigma} }}")
            }
            Self::CramerLundbergExp { c, eta, alpha } => {
                write!(f, "CramerLundbergExp {{ c: {c}, eta: {eta}, alpha: {alpha} }}")
            }
            Self::StableDrift { c } => write!(f, "StableDrift {{ c: {c} }}"),
            Self::GenericPsi { psi_prime0, .. } => {
                write!(f, "GenericPsi {{ psi: <fn>, psi_prime0: {psi_prime0} }}")
            }
        }
    }
}

impl LevyModel {
    /// Brownian motion with drift; requires μ > 0 and σ > 0.
    pub fn brownian(mu: f64, sigma: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::ModelInvalid(format!("brownian drift mu must be > 0, got {mu}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::ModelInvalid(format!("brownian volatility sigma must be > 0, got {sigma}")));
        }
        Ok(Self::BrownianDrift { mu, sigma })
    }

    /// Cramér–Lundberg with exponential claims; requires c, η, α > 0 and the
    /// positive safety loading c > η/α.
    pub fn cramer_lundberg(c: f64, eta: f64, alpha: f64) -> Result<Self> {
        for (name, v) in [("c", c), ("eta", eta), ("alpha", alpha)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::ModelInvalid(format!("{name} must be > 0, got {v}")));
            }
        }
        if c <= eta / alpha {
            return Err(Error::ModelInvalid(format!(
                "positive safety loading requires c > eta/alpha (c={c}, eta/alpha={})",
                eta / alpha
            )));
        }
        Ok(Self::CramerLundbergExp { c, eta, alpha })
    }

    /// Stable(3/2) plus drift; requires c > 0.
    pub fn stable32(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::ModelInvalid(format!("stable drift c must be > 0, got {c}")));
        }
        Ok(Self::StableDrift { c })
    }

    /// Generic model from a complex-analytic Laplace exponent and its known
    /// derivative at zero. `psi_prime0 <= 0` is accepted here (the ruin
    /// formula then degenerates to probability one); operations that need a
    /// positive drift reject it at call time.
    pub fn generic<F>(psi: F, psi_prime0: f64) -> Result<Self>
    where
        F: Fn(Complex64) -> Complex64 + Send + Sync + 'static,
    {
        if !psi_prime0.is_finite() {
            return Err(Error::ModelInvalid("psi_prime0 must be finite".into()));
        }
        let psi: PsiFn = Arc::new(psi);
        let at0 = psi(Complex64::new(0.0, 0.0));
        if at0.norm() > 1e-9 {
            return Err(Error::ModelInvalid(format!("psi(0) must be 0, got {at0}")));
        }
        Ok(Self::GenericPsi { psi, psi_prime0 })
    }

    /// Short kind tag, matching the CLI/config `model.kind` values.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::BrownianDrift { .. } => "bm",
            Self::CramerLundbergExp { .. } => "cl-exp",
            Self::StableDrift { .. } => "stable32",
            Self::GenericPsi { .. } => "generic",
        }
    }

    /// Laplace exponent ψ(θ) = log E[e^{θX_1}], θ ≥ 0; ψ(0) = 0 exactly.
    pub fn laplace_exponent(&self, theta: f64) -> Result<f64> {
        if theta < 0.0 || !theta.is_finite() {
            return Err(Error::Domain(format!("laplace_exponent needs theta >= 0, got {theta}")));
        }
        if theta == 0.0 {
            return Ok(0.0);
        }
        Ok(self.psi_complex(Complex64::new(theta, 0.0)).re)
    }

    /// ψ continued to the complex plane (principal branch for the stable
    /// variant); used by the Talbot inversion contour.
    pub fn psi_complex(&self, s: Complex64) -> Complex64 {
        match self {
            Self::BrownianDrift { mu, sigma } => s * *mu + s * s * (0.5 * sigma * sigma),
            Self::CramerLundbergExp { c, eta, alpha } => {
                s * *c - *eta + *eta * *alpha / (s + *alpha)
            }
            Self::StableDrift { c } => s * *c + s.powf(1.5),
            Self::GenericPsi { psi, .. } => psi(s),
        }
    }

    /// ψ'(0) = E[X_1]; errors if the result is not strictly positive
    /// (the standing assumption of every ruin identity here).
    pub fn mean_drift(&self) -> Result<f64> {
        let d = self.mean_drift_raw();
        if d > 0.0 {
            Ok(d)
        } else {
            Err(Error::ModelInvalid(format!("mean drift E[X_1] = {d} must be > 0")))
        }
    }

    /// ψ'(0) without the positivity gate (only `GenericPsi` can be ≤ 0;
    /// the named families enforce positivity at construction).
    pub fn mean_drift_raw(&self) -> f64 {
        match self {
            Self::BrownianDrift { mu, .. } => *mu,
            Self::CramerLundbergExp { c, eta, alpha } => c - eta / alpha,
            // d/dθ θ^{3/2} vanishes at 0, so ψ'(0) = c
            Self::StableDrift { c } => *c,
            Self::GenericPsi { psi_prime0, .. } => *psi_prime0,
        }
    }

    /// Right inverse Φ(q) = sup{λ ≥ 0 : ψ(λ) = q}; with ψ'(0) > 0 this is
    /// the increasing inverse of ψ on [0,∞) and Φ(0) = 0.
    ///
    /// Bracketed bisection/secant hybrid on [0, λ_hi] with λ_hi doubled
    /// until ψ(λ_hi) ≥ q; accepts at |ψ(Φ(q)) - q| ≤ 1e-12 max(1,q).
    pub fn phi(&self, q: f64) -> Result<f64> {
        if q < 0.0 || !q.is_finite() {
            return Err(Error::Domain(format!("phi needs q >= 0, got {q}")));
        }
        if q == 0.0 {
            return Ok(0.0);
        }
        let psi = |lam: f64| self.psi_complex(Complex64::new(lam, 0.0)).re;
        solve_increasing(psi, q, 0.0, 1.0)
    }

    /// W(0+): 1/c for bounded-variation paths (compound Poisson drift),
    /// 0 for unbounded variation. For generic models the limit
    /// `lim_{θ→∞} θ/ψ(θ)` is probed numerically.
    pub fn scale_at_zero(&self) -> f64 {
        match self {
            Self::BrownianDrift { .. } | Self::StableDrift { .. } => 0.0,
            Self::CramerLundbergExp { c, .. } => 1.0 / c,
            Self::GenericPsi { psi, .. } => {
                let theta = 1e12;
                let v = theta / psi(Complex64::new(theta, 0.0)).re;
                if v.is_finite() && v > 1e-9 {
                    v
                } else {
                    0.0
                }
            }
        }
    }

    /// Whether the paths have bounded variation (equivalently W(0) > 0).
    pub fn has_bounded_variation(&self) -> bool {
        self.scale_at_zero() > 0.0
    }
}
