//! The positive part of the law of X_r (atom plus density), its partial
//! moments, and first-passage-time distributions through Kendall's identity
//! `r P(τ_z⁺ ∈ dr) dz = z P(X_r ∈ dz) dr`.
//!
//! Per model family:
//! - Brownian: X_r ~ Normal(μr, σ²r), no atom; the partial moment has a
//!   closed form.
//! - Cramér–Lundberg: X_r = cr - S_r with S_r compound Poisson; the positive
//!   part carries an atom of mass e^{-ηr} at z = cr (no claims by time r)
//!   and the density `e^{-ηr} e^{-α(cr-z)} Σ_m (αηr)^{m+1} (cr-z)^m / (m!(m+1)!)`
//!   supported on (0, cr).
//! - Stable-3/2 drift: X_r = cr + Z_r where Z_r has the Whittaker-form
//!   density below; no atom.
//!
//! The stable marginal is pinned by self-similarity: with
//! `u = (4/27)|y|³/r²`,
//!
//! ```text
//! P(Z_r ∈ dy) =  √(3/π) y⁻¹ e^{-u/2} W_{1/2,1/6}(u)  dy   (y > 0)
//!             = -(2√(3π))⁻¹ y⁻¹ e^{u/2} W_{-1/2,1/6}(u) dy  (y < 0)
//! ```
//!
//! so that P(Z_r ∈ dy) = P(r^{2/3} Z_1 ∈ dy). An alternative parameterization
//! with `u = (4/27) r^{9/2}|y|³` and an r^{2/3} prefactor circulates in the
//! literature; it integrates to r^{2/3}, not 1, for r ≠ 1, and is retained
//! here only so the normalization test can document its rejection.

use crate::error::{Error, Result};
use crate::levy_model::LevyModel;
use crate::numerics::{integrate_with_splits, NumericsConfig};
use crate::scale_function::ScaleFunction;
use crate::special_functions::{
    gamma, hyperu, normal_cdf, normal_pdf, regularized_lower_gamma, SpecialFnConfig,
};

/// Point mass of a [`PositiveLaw`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

/// Time-scaling variant of the stable-3/2 marginal density.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StableScaling {
    /// `u = (4/27)|y|³/r²`, no r prefactor — the self-similar law. This is
    /// the production scaling; its total mass is 1 for every r.
    SelfSimilar,
    /// `u = (4/27) r^{9/2}|y|³` with an `r^{2/3}` prefactor. Normalizes only
    /// at r = 1; kept for the regression test that rejects it.
    PrintedExponent,
}

/// Restriction to (0,∞) of the law of X_r: optional atom, density, a tail
/// bound used for truncation, and precomputed metadata (closed-form partial
/// mean where one exists, split points for quadrature).
pub struct PositiveLaw {
    r: f64,
    drift: f64,
    atom: Option<Atom>,
    density: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    tail_bound: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    support_upper: Option<f64>,
    split_hints: Vec<f64>,
    closed_mean: Option<f64>,
}

impl std::fmt::Debug for PositiveLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PositiveLaw")
            .field("r", &self.r)
            .field("drift", &self.drift)
            .field("atom", &self.atom)
            .field("support_upper", &self.support_upper)
            .field("closed_mean", &self.closed_mean)
            .finish()
    }
}

impl PositiveLaw {
    /// Assembles a law from user-supplied parts (the route generic-ψ models
    /// take: the library does not invert characteristic functions).
    ///
    /// `tail_bound(z)` must bound `∫_z^∞ t f(t) dt` from above.
    pub fn from_parts(
        r: f64,
        drift: f64,
        atom: Option<Atom>,
        density: impl Fn(f64) -> f64 + Send + Sync + 'static,
        tail_bound: impl Fn(f64) -> f64 + Send + Sync + 'static,
        support_upper: Option<f64>,
        split_hints: Vec<f64>,
    ) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!("positive law needs r > 0, got {r}")));
        }
        if let Some(a) = atom {
            if !(a.mass > 0.0 && a.mass <= 1.0 && a.location > 0.0) {
                return Err(Error::Domain(format!("atom must have mass in (0,1] at a positive location, got {a:?}")));
            }
        }
        Ok(Self {
            r,
            drift,
            atom,
            density: Box::new(density),
            tail_bound: Box::new(tail_bound),
            support_upper,
            split_hints,
            closed_mean: None,
        })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// E[X_1] of the generating model, used as the truncation scale.
    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn atom(&self) -> Option<Atom> {
        self.atom
    }

    /// Density of the absolutely continuous part at z; zero off (0,∞) and
    /// beyond the support boundary.
    pub fn density_at(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        if let Some(hi) = self.support_upper {
            if z >= hi {
                return 0.0;
            }
        }
        (self.density)(z)
    }

    /// Upper bound on `∫_z^∞ t f(t) dt`.
    pub fn tail_bound_at(&self, z: f64) -> f64 {
        if let Some(hi) = self.support_upper {
            if z >= hi {
                return 0.0;
            }
        }
        (self.tail_bound)(z)
    }

    /// Partial mean via closed form when the family has one.
    pub fn closed_mean(&self) -> Option<f64> {
        self.closed_mean
    }

    /// Smallest truncation point Z with `tail_bound(Z) < eps`; the exact
    /// support end for compactly supported laws.
    pub fn truncation_point(&self, eps: f64) -> Result<f64> {
        if let Some(hi) = self.support_upper {
            return Ok(hi);
        }
        let mut z = self.split_hints.iter().cloned().fold(1.0f64, f64::max);
        for _ in 0..60 {
            if self.tail_bound_at(z) < eps {
                return Ok(z);
            }
            z *= 2.0;
        }
        Err(Error::Quadrature("tail bound never fell below the truncation threshold".into()))
    }

    fn quadrature_points(&self, upper: f64) -> Vec<f64> {
        let mut pts = vec![0.0];
        for &s in &self.split_hints {
            if s > 0.0 && s < upper {
                pts.push(s);
            }
        }
        pts.push(upper);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }
}

/// Density of the compound Poisson claim sum `S_r = Σ_{i<=N_r} C_i` at y > 0
/// (rate η, claim sizes Exp(α)): `e^{-ηr} e^{-αy} Σ_m (αηr)^{m+1} y^m / (m!(m+1)!)`.
///
/// The atom of S_r at 0 (mass e^{-ηr}) is *not* part of this density.
pub fn compound_poisson_density(eta: f64, alpha: f64, r: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let a = alpha * eta * r;
    let w = 2.0 * (a * y).sqrt();
    if w > 600.0 {
        // Bessel form e^{-ηr-αy} sqrt(a/y) I_1(2 sqrt(a y)) with the I_1
        // asymptotic, in log space to dodge overflow
        let ln = -eta * r - alpha * y + w + 0.5 * (a / y).ln()
            - 0.5 * (2.0 * std::f64::consts::PI * w).ln()
            + (1.0 - 3.0 / (8.0 * w)).ln();
        return ln.exp();
    }
    let mut term = a;
    let mut sum = a;
    let mut m = 1.0;
    loop {
        term *= a * y / (m * (m + 1.0));
        sum += term;
        if term < 1e-17 * sum && m > w {
            break;
        }
        m += 1.0;
        if m > 1e4 {
            break;
        }
    }
    (-eta * r - alpha * y).exp() * sum
}

// e^{-u/2} W_{1/2,1/6}(u) expressed through U so the exponentials cancel
// analytically instead of overflowing.
fn stable_g_plus(u: f64, cfg: &SpecialFnConfig) -> Result<f64> {
    if u > 700.0 {
        return Ok(0.0); // e^{-u} underflow: the right tail is dead
    }
    Ok((-u).exp() * u.powf(2.0 / 3.0) * hyperu(1.0 / 6.0, 4.0 / 3.0, u, cfg)?)
}

// e^{u/2} W_{-1/2,1/6}(u); the growing and decaying exponentials cancel to
// u^{2/3} U(7/6, 4/3, u), finite for every u.
fn stable_g_minus(u: f64, cfg: &SpecialFnConfig) -> Result<f64> {
    Ok(u.powf(2.0 / 3.0) * hyperu(7.0 / 6.0, 4.0 / 3.0, u, cfg)?)
}

/// Marginal density of Z_r (the driftless spectrally negative 3/2-stable
/// part) at y, under the chosen time scaling.
pub fn stable_z_density(r: f64, y: f64, scaling: StableScaling, cfg: &SpecialFnConfig) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("stable_z_density needs r > 0, got {r}")));
    }
    let sqrt_3_pi = (3.0 / std::f64::consts::PI).sqrt();
    let half_inv_sqrt_3pi = 0.5 / (3.0 * std::f64::consts::PI).sqrt();
    let (u, pref) = match scaling {
        StableScaling::SelfSimilar => ((4.0 / 27.0) * y.abs().powi(3) / (r * r), 1.0),
        StableScaling::PrintedExponent => {
            ((4.0 / 27.0) * r.powf(4.5) * y.abs().powi(3), r.powf(2.0 / 3.0))
        }
    };
    if y == 0.0 || u < 1e-250 {
        // continuous limit at the origin: both branches meet at
        // sqrt(3/pi) Γ(1/3)/Γ(1/6) (4/27)^{1/3} r^{-2/3}
        let p0 = sqrt_3_pi * gamma(1.0 / 3.0) / gamma(1.0 / 6.0) * (4.0f64 / 27.0).powf(1.0 / 3.0);
        return Ok(match scaling {
            StableScaling::SelfSimilar => p0 / r.powf(2.0 / 3.0),
            StableScaling::PrintedExponent => p0 * r.powf(2.0 / 3.0) * r.powf(1.5),
        });
    }
    if y > 0.0 {
        Ok(pref * sqrt_3_pi / y * stable_g_plus(u, cfg)?)
    } else {
        Ok(pref * half_inv_sqrt_3pi / y.abs() * stable_g_minus(u, cfg)?)
    }
}

/// Builds the positive-part law of X_r for the three concrete families.
/// Generic-ψ models must supply their own law via [`PositiveLaw::from_parts`].
pub fn positive_law(model: &LevyModel, r: f64, cfg: &NumericsConfig) -> Result<PositiveLaw> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("positive_law needs r > 0, got {r}")));
    }
    let drift = model.mean_drift()?;
    match model {
        LevyModel::BrownianDrift { mu, sigma } => {
            let (m, s) = (mu * r, sigma * r.sqrt());
            let density = move |z: f64| normal_pdf((z - m) / s) / s;
            // exact Gaussian upper partial moment as the tail bound
            let tail = move |z: f64| m * normal_cdf((m - z) / s) + s * normal_pdf((z - m) / s);
            let closed_mean = m * normal_cdf(m / s) + s * normal_pdf(m / s);
            let mut law = PositiveLaw::from_parts(r, drift, None, density, tail, None, vec![m])?;
            law.closed_mean = Some(closed_mean);
            Ok(law)
        }
        LevyModel::CramerLundbergExp { c, eta, alpha } => {
            if eta * r > 700.0 {
                return Err(Error::Domain(format!(
                    "eta*r = {} too large: the no-claim mass e^(-eta r) underflows",
                    eta * r
                )));
            }
            let (c, eta, alpha) = (*c, *eta, *alpha);
            let cr = c * r;
            let atom = Atom { location: cr, mass: (-eta * r).exp() };
            let density = move |z: f64| compound_poisson_density(eta, alpha, r, cr - z);
            let closed_mean = Some(cl_partial_mean(c, eta, alpha, r, &cfg.special)?);
            let mut law =
                PositiveLaw::from_parts(r, drift, Some(atom), density, move |_| 0.0, Some(cr), vec![])?;
            law.closed_mean = closed_mean;
            Ok(law)
        }
        LevyModel::StableDrift { c } => {
            let c = *c;
            let cr = c * r;
            let sf_cfg = cfg.special.clone();
            let density = move |z: f64| {
                stable_z_density(r, z - cr, StableScaling::SelfSimilar, &sf_cfg).unwrap_or(f64::NAN)
            };
            // Chernoff-style bound with theta = 2:
            // ∫_Z^∞ z f dz <= e^{-2Z} sup(z e^{-z/2}) E[e^{2.5 X_r}]
            let psi25 = c * 2.5 + 2.5f64.powf(1.5);
            let tail = move |z: f64| (2.0 / std::f64::consts::E) * (r * psi25 - 2.0 * z).exp();
            PositiveLaw::from_parts(r, drift, None, density, tail, None, vec![cr])
        }
        LevyModel::GenericPsi { .. } => Err(Error::Unsupported(
            "no marginal law for a generic psi; build one with PositiveLaw::from_parts".into(),
        )),
    }
}

/// Closed-form partial mean for the Cramér–Lundberg family,
/// `e^{-ηr} ( cr + Σ_m (ηr)^{m+1}/(m!(m+1)!) [ cr γ(m+1, crα) - γ(m+2, crα)/α ] )`,
/// evaluated through regularized gammas so large ηr cannot overflow.
fn cl_partial_mean(c: f64, eta: f64, alpha: f64, r: f64, cfg: &SpecialFnConfig) -> Result<f64> {
    let x = alpha * c * r;
    let cr = c * r;
    // d_m = e^{-ηr} (ηr)^{m+1} / m!
    let mut d = eta * r * (-eta * r).exp();
    let mut total = (-eta * r).exp() * cr;
    // the terms grow before they decay (mode near m ~ ηr), so the relative
    // stop is armed only past the dominant mode
    let m_floor = (alpha * eta * c * r * r).min(2000.0);
    let cap = cfg.max_terms.max(2 * m_floor as usize + 256);
    let mut small_streak = 0;
    for m in 0..cap {
        let mf = m as f64;
        let p1 = regularized_lower_gamma(mf + 1.0, x, cfg)?;
        let p2 = regularized_lower_gamma(mf + 2.0, x, cfg)?;
        let term = d * (cr * p1 / (mf + 1.0) - p2 / alpha);
        total += term;
        if d == 0.0 {
            return Ok(total); // remaining terms underflowed to exact zero
        }
        if term.abs() < 1e-16 * total.abs() && mf > m_floor {
            small_streak += 1;
            if small_streak >= 3 {
                return Ok(total);
            }
        } else {
            small_streak = 0;
        }
        d *= eta * r / (mf + 1.0);
    }
    Err(Error::Convergence("compound Poisson partial-mean series did not converge".into()))
}

/// `∫_0^∞ z P(X_r ∈ dz)`: atom contribution plus the density integral,
/// via the family's closed form when one exists.
pub fn partial_mean(law: &PositiveLaw, cfg: &NumericsConfig) -> Result<f64> {
    match law.closed_mean {
        Some(v) => Ok(v),
        None => partial_mean_quadrature(law, cfg),
    }
}

/// Pure-quadrature route for the partial mean (the independent cross-check
/// of the closed forms, and the only route for user-supplied laws).
pub fn partial_mean_quadrature(law: &PositiveLaw, cfg: &NumericsConfig) -> Result<f64> {
    let eps = cfg.tail_rel * law.r * law.drift.max(1e-6);
    let upper = law.truncation_point(eps)?;
    let pts = law.quadrature_points(upper);
    let integral = integrate_with_splits(
        |z| z * law.density_at(z),
        &pts,
        cfg.quad_abs_tol,
        cfg.quad_rel_tol,
    )?;
    Ok(integral + law.atom.map_or(0.0, |a| a.location * a.mass))
}

/// `∫_0^∞ W(x+z) z P(X_r ∈ dz)` for x ≥ 0: the numerator of the delayed-ruin
/// ratio. Shares the truncation point of [`partial_mean_quadrature`] so the
/// two integrals' truncation errors partially cancel in the ratio
/// (W ≤ 1/E[X_1] makes the shared bound valid for the weighted integrand).
pub fn weighted_scale_integral(
    law: &PositiveLaw,
    sf: &ScaleFunction,
    x: f64,
    cfg: &NumericsConfig,
) -> Result<f64> {
    if x < 0.0 {
        return Err(Error::Domain(format!("weighted_scale_integral needs x >= 0, got {x}")));
    }
    let eps = cfg.tail_rel * law.r * law.drift.max(1e-6);
    let upper = law.truncation_point(eps)?;
    let pts = law.quadrature_points(upper);
    let integral = integrate_with_splits(
        |z| sf.w(x + z) * z * law.density_at(z),
        &pts,
        cfg.quad_abs_tol,
        cfg.quad_rel_tol,
    )?;
    Ok(integral + law.atom.map_or(0.0, |a| sf.w(x + a.location) * a.location * a.mass))
}

/// `∫_{max(y,0)}^∞ z P(X_r ∈ dz)` — the inner integral of the first-passage
/// Laplace identity. Closed form for Brownian, atom + series for
/// Cramér–Lundberg, truncated quadrature for the stable family.
pub fn tail_partial_mean(model: &LevyModel, r: f64, y: f64, cfg: &NumericsConfig) -> Result<f64> {
    let y = y.max(0.0);
    match model {
        LevyModel::BrownianDrift { mu, sigma } => {
            let (m, s) = (mu * r, sigma * r.sqrt());
            Ok(m * normal_cdf((m - y) / s) + s * normal_pdf((y - m) / s))
        }
        LevyModel::CramerLundbergExp { c, eta, alpha } => {
            // atom + series density directly; this runs inside nested
            // quadratures, so the closed-mean series is deliberately skipped
            let (c, eta, alpha) = (*c, *eta, *alpha);
            let cr = c * r;
            let atom_part = if cr >= y { cr * (-eta * r).exp() } else { 0.0 };
            if y >= cr {
                return Ok(atom_part);
            }
            let integral = integrate_with_splits(
                |z| z * compound_poisson_density(eta, alpha, r, cr - z),
                &[y, 0.5 * (y + cr), cr],
                cfg.quad_abs_tol,
                cfg.quad_rel_tol,
            )?;
            Ok(atom_part + integral)
        }
        _ => {
            let law = positive_law(model, r, cfg)?;
            let atom_part = law
                .atom
                .filter(|a| a.location >= y)
                .map_or(0.0, |a| a.location * a.mass);
            let eps = cfg.tail_rel * law.r * law.drift.max(1e-6);
            let upper = law.truncation_point(eps)?;
            if y >= upper {
                return Ok(atom_part);
            }
            let mut pts: Vec<f64> = law.quadrature_points(upper).into_iter().filter(|&p| p > y).collect();
            pts.insert(0, y);
            let integral = integrate_with_splits(
                |z| z * law.density_at(z),
                &pts,
                cfg.quad_abs_tol,
                cfg.quad_rel_tol,
            )?;
            Ok(atom_part + integral)
        }
    }
}

/// `P(τ_depth⁺ ≤ r)` for the process started at 0: closed inverse-Gaussian
/// formula for Brownian, Kendall quadrature otherwise.
pub fn first_passage_cdf(model: &LevyModel, depth: f64, r: f64, cfg: &NumericsConfig) -> Result<f64> {
    if let LevyModel::BrownianDrift { mu, sigma } = model {
        if !(depth > 0.0 && r > 0.0) {
            return Err(Error::Domain("first_passage_cdf needs depth > 0 and r > 0".into()));
        }
        let s = sigma * r.sqrt();
        let n1 = normal_cdf((mu * r - depth) / s);
        let n2 = normal_cdf((-mu * r - depth) / s);
        let reflected = if n2 > 0.0 { (2.0 * mu * depth / (sigma * sigma) + n2.ln()).exp() } else { 0.0 };
        return Ok((n1 + reflected).min(1.0));
    }
    first_passage_cdf_kendall(model, depth, r, cfg)
}

/// `P(τ_depth⁺ ≤ r)` by integrating Kendall's identity in time:
/// `∫_0^r (depth/s) f_{X_s}(depth) ds`, plus (for compound Poisson drift)
/// the no-jump atom `e^{-η depth/c}` at s = depth/c.
pub fn first_passage_cdf_kendall(
    model: &LevyModel,
    depth: f64,
    r: f64,
    cfg: &NumericsConfig,
) -> Result<f64> {
    if !(depth > 0.0 && r > 0.0) {
        return Err(Error::Domain("first_passage_cdf needs depth > 0 and r > 0".into()));
    }
    match model {
        LevyModel::BrownianDrift { mu, sigma } => {
            let (mu, sigma) = (*mu, *sigma);
            let integrand = move |s: f64| {
                if s <= 0.0 {
                    return 0.0;
                }
                let sd = sigma * s.sqrt();
                let pdf = normal_pdf((depth - mu * s) / sd);
                if pdf == 0.0 {
                    0.0
                } else {
                    depth / s * pdf / sd
                }
            };
            let pts = [0.0, 0.25 * r, 0.5 * r, r];
            Ok(integrate_with_splits(integrand, &pts, cfg.quad_abs_tol, cfg.quad_rel_tol)?.min(1.0))
        }
        LevyModel::CramerLundbergExp { c, eta, alpha } => {
            let (c, eta, alpha) = (*c, *eta, *alpha);
            let s0 = depth / c;
            if r < s0 {
                return Ok(0.0); // the drift line has not yet reached the level
            }
            let atom = (-eta * s0).exp();
            if r == s0 {
                return Ok(atom);
            }
            let integrand = move |s: f64| {
                if s <= s0 {
                    return 0.0;
                }
                depth / s * compound_poisson_density(eta, alpha, s, c * s - depth)
            };
            let pts = [s0, 0.5 * (s0 + r), r];
            let dens = integrate_with_splits(integrand, &pts, cfg.quad_abs_tol, cfg.quad_rel_tol)?;
            Ok((atom + dens).min(1.0))
        }
        LevyModel::StableDrift { c } => {
            let c = *c;
            let sf_cfg = cfg.special.clone();
            let integrand = move |s: f64| {
                if s <= 0.0 {
                    return 0.0;
                }
                let p = stable_z_density(s, depth - c * s, StableScaling::SelfSimilar, &sf_cfg)
                    .unwrap_or(f64::NAN);
                if p == 0.0 {
                    0.0
                } else {
                    depth / s * p
                }
            };
            let s0 = depth / c;
            let mut pts = vec![0.0];
            if s0 < r {
                pts.push(s0);
            }
            pts.push(r);
            Ok(integrate_with_splits(integrand, &pts, cfg.quad_abs_tol, cfg.quad_rel_tol)?.min(1.0))
        }
        LevyModel::GenericPsi { .. } => Err(Error::Unsupported(
            "first passage for generic psi requires a user-supplied marginal law".into(),
        )),
    }
}
