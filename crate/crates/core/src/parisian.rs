//! Ruin probabilities: classical ruin `1 - E[X_1] W(x)` and ruin with a
//! Parisian delay r via the ratio formula
//!
//! ```text
//! P_x(κ_r < ∞) = 1 - E[X_1] ∫_0^∞ W(x+z) z P(X_r ∈ dz) / ∫_0^∞ z P(X_r ∈ dz),   x ≥ 0,
//! P_x(κ_r < ∞) = 1 - E[X_1] · r · P_x(τ_0⁺ ≤ r) / ∫_0^∞ z P(X_r ∈ dz),           x < 0,
//! ```
//!
//! plus the closed forms for the Brownian and Cramér–Lundberg families and
//! a verification harness for the identities the formula rests on.
//!
//! The x < 0 branch follows from conditioning at the recovery time τ_0⁺ and
//! the x = 0 value `1 - E[X_1] r / ∫ z P(X_r ∈ dz)`; the factor r is forced
//! by the Kendall normalization `∫ W(z)(z/r) P(X_r ∈ dz) = 1` (it makes the
//! formula continuous at x = 0 and sends it to 0 as r → ∞).

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::levy_model::LevyModel;
use crate::monte_carlo::{self, SimConfig};
use crate::numerics::{integrate, integrate_with_splits, NumericsConfig};
use crate::scale_function::ScaleFunction;
use crate::special_functions::{normal_cdf, normal_pdf};
use crate::time_r_law::{
    first_passage_cdf, partial_mean, positive_law, tail_partial_mean, weighted_scale_integral,
    PositiveLaw,
};

/// Evaluation route requested in a [`RuinQuery`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuinMethod {
    /// Closed form for Brownian / Cramér–Lundberg, quadrature otherwise.
    /// Never Monte Carlo: simulation is an oracle, not a production path.
    Auto,
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

/// Route actually taken, recorded on the result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodTag {
    ClosedForm,
    Quadrature,
    MonteCarlo,
    /// E[X_1] ≤ 0: ruin is certain, no integral was evaluated.
    DegenerateDrift,
}

impl std::fmt::Display for MethodTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::ClosedForm => "closed-form",
            Self::Quadrature => "quadrature",
            Self::MonteCarlo => "monte-carlo",
            Self::DegenerateDrift => "degenerate-drift",
        })
    }
}

/// One ruin-probability request.
#[derive(Debug, Clone)]
pub struct RuinQuery {
    pub model: LevyModel,
    /// Initial capital; any sign.
    pub x: f64,
    /// Parisian delay; must be strictly positive.
    pub r: f64,
    pub method: RuinMethod,
    pub numerics: NumericsConfig,
    /// Monte Carlo settings, used only when `method == MonteCarlo`.
    pub sim: Option<SimConfig>,
}

impl RuinQuery {
    pub fn new(model: LevyModel, x: f64, r: f64) -> Self {
        Self { model, x, r, method: RuinMethod::Auto, numerics: NumericsConfig::default(), sim: None }
    }

    pub fn with_method(mut self, method: RuinMethod) -> Self {
        self.method = method;
        self
    }
}

/// Ruin probability with provenance and an error estimate (quadrature
/// refinement gap, or the Monte Carlo confidence half-width).
#[derive(Debug, Clone)]
pub struct RuinResult {
    pub probability: f64,
    pub method: MethodTag,
    pub error_estimate: f64,
    /// Intermediate values (partial mean, numerator, mean drift, ...).
    pub diagnostics: BTreeMap<String, f64>,
}

fn clamp_probability(raw: f64, err: f64, what: &str) -> Result<f64> {
    let slack = err + 1e-12;
    if raw < -slack || raw > 1.0 + slack {
        return Err(Error::Numerics(format!(
            "{what} produced {raw}, outside [0,1] by more than its error estimate {err:.3e}"
        )));
    }
    Ok(raw.clamp(0.0, 1.0))
}

/// Parisian ruin probability for a query; see the module doc for the
/// formulas per sign of x.
pub fn parisian_ruin(query: &RuinQuery) -> Result<RuinResult> {
    if !(query.r > 0.0 && query.r.is_finite()) {
        return Err(Error::Domain(format!("delay r must be > 0, got {}", query.r)));
    }
    if !query.x.is_finite() {
        return Err(Error::Domain("initial capital x must be finite".into()));
    }
    let drift = query.model.mean_drift_raw();
    if drift <= 0.0 {
        // with nonpositive drift every excursion below zero eventually
        // exceeds any delay, so ruin is certain
        let mut diagnostics = BTreeMap::new();
        diagnostics.insert("mean_drift".into(), drift);
        return Ok(RuinResult {
            probability: 1.0,
            method: MethodTag::DegenerateDrift,
            error_estimate: 0.0,
            diagnostics,
        });
    }

    let method = match query.method {
        RuinMethod::Auto => match query.model {
            LevyModel::BrownianDrift { .. } | LevyModel::CramerLundbergExp { .. } => {
                RuinMethod::ClosedForm
            }
            _ => RuinMethod::Quadrature,
        },
        m => m,
    };

    if method == RuinMethod::MonteCarlo {
        let sim = match &query.sim {
            Some(s) => s.clone(),
            None => SimConfig::defaults_for(&query.model, query.r, &query.numerics)?,
        };
        let est = monte_carlo::simulate_parisian(&query.model, query.x, query.r, &sim)?;
        let mut diagnostics = BTreeMap::new();
        diagnostics.insert("mean_drift".into(), drift);
        diagnostics.insert("n_paths".into(), est.n_paths as f64);
        return Ok(RuinResult {
            probability: est.p_hat,
            method: MethodTag::MonteCarlo,
            error_estimate: est.half_width,
            diagnostics,
        });
    }

    if query.x < 0.0 {
        return ruin_below_zero(query, drift);
    }

    match method {
        RuinMethod::ClosedForm => ruin_closed_form(query, drift),
        RuinMethod::Quadrature => {
            let law = positive_law(&query.model, query.r, &query.numerics)?;
            let sf = ScaleFunction::new(query.model.clone(), &query.numerics)?;
            ruin_quadrature(&law, &sf, query.x, drift, &query.numerics)
        }
        _ => unreachable!(),
    }
}

/// Quadrature evaluation of the ratio formula against any positive-part law
/// (the entry point for generic-ψ models with user-supplied densities).
pub fn parisian_ruin_with_law(
    law: &PositiveLaw,
    sf: &ScaleFunction,
    x: f64,
    cfg: &NumericsConfig,
) -> Result<RuinResult> {
    if x < 0.0 {
        return Err(Error::Domain(
            "parisian_ruin_with_law handles x >= 0; the x < 0 branch needs the first-passage law".into(),
        ));
    }
    ruin_quadrature(law, sf, x, law.drift(), cfg)
}

fn ruin_quadrature(
    law: &PositiveLaw,
    sf: &ScaleFunction,
    x: f64,
    drift: f64,
    cfg: &NumericsConfig,
) -> Result<RuinResult> {
    let pm = partial_mean(law, cfg)?;
    let num = weighted_scale_integral(law, sf, x, cfg)?;
    let raw = 1.0 - drift * num / pm;

    // one refinement level: everything re-evaluated at tighter tolerances
    let mut fine = cfg.clone();
    fine.quad_abs_tol = cfg.quad_abs_tol / 32.0;
    fine.quad_rel_tol = cfg.quad_rel_tol / 32.0;
    fine.tail_rel = cfg.tail_rel / 32.0;
    let pm_f = partial_mean(law, &fine)?;
    let num_f = weighted_scale_integral(law, sf, x, &fine)?;
    let raw_f = 1.0 - drift * num_f / pm_f;

    let err = (raw - raw_f).abs().max(1e-14);
    if err > 1e-6 {
        return Err(Error::Numerics(format!(
            "quadrature refinement moved the probability by {err:.3e} at x={x}"
        )));
    }
    let probability = clamp_probability(raw_f, err, "delayed-ruin quadrature")?;
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("partial_mean".into(), pm_f);
    diagnostics.insert("numerator".into(), num_f);
    diagnostics.insert("mean_drift".into(), drift);
    Ok(RuinResult { probability, method: MethodTag::Quadrature, error_estimate: err, diagnostics })
}

fn ruin_closed_form(query: &RuinQuery, drift: f64) -> Result<RuinResult> {
    let (p, pm) = match &query.model {
        LevyModel::BrownianDrift { mu, sigma } => {
            let p = parisian_ruin_bm_closed(*mu, *sigma, query.x, query.r)?;
            let m = mu * query.r;
            let s = sigma * query.r.sqrt();
            (p, m * normal_cdf(m / s) + s * normal_pdf(m / s))
        }
        LevyModel::CramerLundbergExp { c, eta, alpha } => {
            let p = parisian_ruin_cl_closed(*c, *eta, *alpha, query.x, query.r)?;
            let law = positive_law(&query.model, query.r, &query.numerics)?;
            (p, law.closed_mean().expect("compound Poisson law has a closed mean"))
        }
        _ => {
            return Err(Error::Unsupported(format!(
                "no closed-form delayed-ruin probability for model kind '{}'",
                query.model.kind()
            )))
        }
    };
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("partial_mean".into(), pm);
    diagnostics.insert("mean_drift".into(), drift);
    diagnostics.insert("numerator".into(), pm * (1.0 - p) / drift);
    Ok(RuinResult {
        probability: p,
        method: MethodTag::ClosedForm,
        error_estimate: 1e-12,
        diagnostics,
    })
}

fn ruin_below_zero(query: &RuinQuery, drift: f64) -> Result<RuinResult> {
    let depth = -query.x;
    let cfg = &query.numerics;
    let fp = first_passage_cdf(&query.model, depth, query.r, cfg)?;
    let law = positive_law(&query.model, query.r, cfg)?;
    let pm = partial_mean(&law, cfg)?;
    let raw = 1.0 - drift * query.r * fp / pm;

    let mut fine = cfg.clone();
    fine.quad_abs_tol = cfg.quad_abs_tol / 32.0;
    fine.quad_rel_tol = cfg.quad_rel_tol / 32.0;
    let fp_f = first_passage_cdf(&query.model, depth, query.r, &fine)?;
    let pm_f = partial_mean(&law, &fine)?;
    let raw_f = 1.0 - drift * query.r * fp_f / pm_f;

    let err = (raw - raw_f).abs().max(1e-14);
    let probability = clamp_probability(raw_f, err.max(1e-9), "below-zero ruin formula")?;
    let tag = if matches!(query.model, LevyModel::BrownianDrift { .. }) {
        MethodTag::ClosedForm // inverse-Gaussian CDF and Gaussian partial mean
    } else {
        MethodTag::Quadrature
    };
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("partial_mean".into(), pm_f);
    diagnostics.insert("first_passage_cdf".into(), fp_f);
    diagnostics.insert("mean_drift".into(), drift);
    Ok(RuinResult { probability, method: tag, error_estimate: err.max(1e-9), diagnostics })
}

/// Closed form for Brownian motion with drift, x ≥ 0:
///
/// ```text
/// e^{-2μx/σ²} · [ σ√r φ(μ√r/σ) - μr N(-μ√r/σ) ] / [ σ√r φ(μ√r/σ) + μr N(μ√r/σ) ]
/// ```
///
/// with φ, N the standard normal density and CDF.
pub fn parisian_ruin_bm_closed(mu: f64, sigma: f64, x: f64, r: f64) -> Result<f64> {
    if !(mu > 0.0) || !(sigma > 0.0) {
        return Err(Error::Domain(format!("need mu > 0 and sigma > 0, got mu={mu}, sigma={sigma}")));
    }
    if x < 0.0 {
        return Err(Error::Domain(format!("closed form needs x >= 0, got {x}")));
    }
    if !(r > 0.0) {
        return Err(Error::Domain(format!("delay r must be > 0, got {r}")));
    }
    let s = sigma * r.sqrt();
    let gauss = s * normal_pdf(mu * r.sqrt() / sigma);
    let num = gauss - mu * r * normal_cdf(-mu * r.sqrt() / sigma);
    let den = gauss + mu * r * normal_cdf(mu * r.sqrt() / sigma);
    Ok(((-2.0 * mu * x / (sigma * sigma)).exp() * num / den).max(0.0))
}

/// Closed form for the Cramér–Lundberg family, x ≥ 0:
/// `e^{(η/c-α)x} (1 - (c-η/α) r / pm(r))` with pm the compound-Poisson
/// partial mean (incomplete-gamma series). The x-dependence is the pure
/// factor `e^{(η/c-α)x}`.
pub fn parisian_ruin_cl_closed(c: f64, eta: f64, alpha: f64, x: f64, r: f64) -> Result<f64> {
    if x < 0.0 {
        return Err(Error::Domain(format!("closed form needs x >= 0, got {x}")));
    }
    let model = LevyModel::cramer_lundberg(c, eta, alpha)?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("delay r must be > 0, got {r}")));
    }
    let cfg = NumericsConfig::default();
    let law = positive_law(&model, r, &cfg)?;
    let pm = law.closed_mean().expect("compound Poisson law has a closed mean");
    let p0 = (1.0 - (c - eta / alpha) * r / pm).max(0.0);
    Ok(((eta / c - alpha) * x).exp() * p0)
}

/// Classical ruin probability `1 - E[X_1] W(x)` for x ≥ 0.
pub fn classical_ruin(model: &LevyModel, x: f64, cfg: &NumericsConfig) -> Result<f64> {
    let sf = ScaleFunction::new(model.clone(), cfg)?;
    classical_ruin_sf(&sf, x)
}

/// Classical ruin against an already-built scale function (cheaper in sweeps).
pub fn classical_ruin_sf(sf: &ScaleFunction, x: f64) -> Result<f64> {
    if x < 0.0 {
        return Err(Error::Domain(format!("classical_ruin needs x >= 0, got {x}")));
    }
    let drift = sf.model().mean_drift()?;
    Ok((1.0 - drift * sf.w(x)).clamp(0.0, 1.0))
}

/// One residual row of an identity verification run.
#[derive(Debug, Clone)]
pub struct IdentityResidual {
    /// Which identity: "kendall-normalization", "first-passage-laplace" or
    /// "overshoot-integration-by-parts".
    pub identity: &'static str,
    /// Parameter point, e.g. "r=0.5" or "theta=1, y=0".
    pub params: String,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Outcome of [`verify_lemma_identities`]: every residual, never an error —
/// failures are rows with `pass == false`.
#[derive(Debug, Clone, Default)]
pub struct IdentityReport {
    pub entries: Vec<IdentityResidual>,
}

impl IdentityReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn max_residual(&self) -> f64 {
        self.entries.iter().map(|e| e.residual).fold(0.0, f64::max)
    }
}

const KENDALL_TOL: f64 = 1e-6;
const OVERSHOOT_TOL: f64 = 1e-6;
// the outer time integral is quadrature-on-quadrature, so its gate is looser
const FIRST_PASSAGE_LAPLACE_TOL: f64 = 1e-4;

/// Verifies the three identities backing the ruin formula on the given
/// parameter grids:
///
/// 1. Kendall normalization `∫ W(z)(z/r) P(X_r ∈ dz) = 1` at each r;
/// 2. `∫_0^∞ e^{-θr} ∫_y^∞ (z/r) P(X_r ∈ dz) dr = e^{-Φ(θ)y}/Φ(θ)` at each
///    (θ, y) with y drawn from `xs`;
/// 3. the integration-by-parts step
///    `(θ/Φ)∫ e^{-Φy}W'(x+y)dy = θ∫ e^{-Φy}W(x+y)dy - (θ/Φ)W(x)` at each (θ, x).
pub fn verify_lemma_identities(
    model: &LevyModel,
    thetas: &[f64],
    rs: &[f64],
    xs: &[f64],
    cfg: &NumericsConfig,
) -> Result<IdentityReport> {
    if thetas.is_empty() || rs.is_empty() || xs.is_empty() {
        return Err(Error::Domain("verify_lemma_identities needs non-empty grids".into()));
    }
    let sf = ScaleFunction::new(model.clone(), cfg)?;
    let mut report = IdentityReport::default();

    for &r in rs {
        let law = positive_law(model, r, cfg)?;
        let lhs = weighted_scale_integral(&law, &sf, 0.0, cfg)? / r;
        let residual = (lhs - 1.0).abs();
        report.entries.push(IdentityResidual {
            identity: "kendall-normalization",
            params: format!("r={r}"),
            lhs,
            rhs: 1.0,
            residual,
            tol: KENDALL_TOL,
            pass: residual <= KENDALL_TOL,
        });
    }

    // the time-integral identity is nested quadrature; it is checked on the
    // families whose inner integral is cheap (closed-form or compact support)
    let check_time_integral = !matches!(model, LevyModel::StableDrift { .. });
    for &theta in thetas.iter().filter(|_| check_time_integral) {
        for &y in xs {
            if y < 0.0 {
                continue;
            }
            let lhs = first_passage_laplace_lhs(model, theta, y, cfg)?;
            let phi = model.phi(theta)?;
            let rhs = (-phi * y).exp() / phi;
            let residual = (lhs - rhs).abs();
            report.entries.push(IdentityResidual {
                identity: "first-passage-laplace",
                params: format!("theta={theta}, y={y}"),
                lhs,
                rhs,
                residual,
                tol: FIRST_PASSAGE_LAPLACE_TOL,
                pass: residual <= FIRST_PASSAGE_LAPLACE_TOL,
            });
        }
    }

    for &theta in thetas {
        for &x in xs {
            if x < 0.0 {
                continue;
            }
            let (lhs, rhs) = overshoot_identity_sides(&sf, model, theta, x, cfg)?;
            let residual = (lhs - rhs).abs();
            report.entries.push(IdentityResidual {
                identity: "overshoot-integration-by-parts",
                params: format!("theta={theta}, x={x}"),
                lhs,
                rhs,
                residual,
                tol: OVERSHOOT_TOL,
                pass: residual <= OVERSHOOT_TOL,
            });
        }
    }

    Ok(report)
}

// ∫_0^∞ e^{-θr} (1/r) ∫_{y∨0}^∞ z P(X_r ∈ dz) dr, evaluated with a √r
// substitution near the origin and geometric panels beyond.
fn first_passage_laplace_lhs(model: &LevyModel, theta: f64, y: f64, cfg: &NumericsConfig) -> Result<f64> {
    // the inner integral only needs ~1e-8: it is averaged by the outer one
    let mut inner_cfg = cfg.clone();
    inner_cfg.quad_abs_tol = 1e-9;
    inner_cfg.quad_rel_tol = 1e-8;
    let inner = move |r: f64| -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        tail_partial_mean(model, r, y, &inner_cfg).map(|v| v / r).unwrap_or(f64::NAN)
    };
    // [0,1]: r = v^2 tames the 1/sqrt(r) behaviour of the y=0 integrand
    let head = integrate(
        |v: f64| 2.0 * v * (-theta * v * v).exp() * inner(v * v),
        0.0,
        1.0,
        1e-8,
        1e-8,
    )?;
    // kink in r where the compound Poisson atom crosses the threshold y
    let mut splits = vec![1.0f64];
    if let LevyModel::CramerLundbergExp { c, .. } = model {
        let s = y / c;
        if s > 1.0 {
            splits.push(s);
        }
    }
    splits.sort_by(f64::total_cmp);
    let mut acc = head;
    let mut lo = 1.0;
    for &s in &splits[1..] {
        acc += integrate(|r: f64| (-theta * r).exp() * inner(r), lo, s, 1e-9, 1e-8)?;
        lo = s;
    }
    let mut w = 1.0;
    let mut quiet = 0;
    for _ in 0..60 {
        let hi = lo + w;
        let piece = integrate(|r: f64| (-theta * r).exp() * inner(r), lo, hi, 1e-9, 1e-8)?;
        acc += piece;
        if piece.abs() < 1e-9 * acc.abs().max(1e-3) {
            quiet += 1;
            if quiet >= 2 {
                return Ok(acc);
            }
        } else {
            quiet = 0;
        }
        lo = hi;
        w *= 2.0;
    }
    Err(Error::Quadrature("first-passage Laplace integral: tail never settled".into()))
}

// both sides of the integration-by-parts identity; shared truncation so the
// truncation errors cancel in the residual
fn overshoot_identity_sides(
    sf: &ScaleFunction,
    model: &LevyModel,
    theta: f64,
    x: f64,
    cfg: &NumericsConfig,
) -> Result<(f64, f64)> {
    let phi = model.phi(theta)?;
    let horizon = 45.0 / phi + 5.0;
    // W' can blow up like y^{-1/2} at y -> 0 when x = 0; y = v^2 smooths it
    let head_wp = integrate(
        |v: f64| {
            let y = v * v;
            2.0 * v * (-phi * y).exp() * sf.w_prime((x + y).max(1e-300)).unwrap_or(0.0)
        },
        0.0,
        1.0,
        cfg.quad_abs_tol,
        cfg.quad_rel_tol,
    )?;
    let tail_wp = integrate_with_splits(
        |y: f64| (-phi * y).exp() * sf.w_prime(x + y).unwrap_or(0.0),
        &[1.0, 4.0, horizon],
        cfg.quad_abs_tol,
        cfg.quad_rel_tol,
    )?;
    let lhs = theta / phi * (head_wp + tail_wp);

    let int_w = integrate_with_splits(
        |y: f64| (-phi * y).exp() * sf.w(x + y),
        &[0.0, 1.0, 4.0, horizon],
        cfg.quad_abs_tol,
        cfg.quad_rel_tol,
    )?;
    // truncation remainders: beyond the horizon W has saturated, so the
    // W-integral tail is W_inf e^{-Φ·horizon}/Φ while the W'-integral tail
    // is negligible against it
    let tail_w = sf.w_inf() * (-phi * horizon).exp() / phi;
    let rhs = theta * (int_w + tail_w) - theta / phi * sf.w(x);
    Ok((lhs, rhs))
}
