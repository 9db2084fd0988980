//! Command-line front end: model construction from flags or a key=value
//! config file, six subcommands (`ruin`, `scale-fn`, `law`, `simulate`,
//! `verify`, `compare`), CSV for grids and JSON for scalar results.
//!
//! Exit codes: 0 success, 1 verify found residuals above tolerance,
//! 2 usage/configuration error, 3 numerical failure.

// `!(r > 0.0)` deliberately rejects NaN along with nonpositive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::io::Write;

use clap::{Args, Parser, Subcommand, ValueEnum};
use parisian_core::error::Error as CoreError;
use parisian_core::monte_carlo::{simulate_classical, simulate_parisian, SimConfig};
use parisian_core::parisian::{parisian_ruin, verify_lemma_identities, RuinMethod, RuinQuery};
use parisian_core::scale_function::{ScaleFunction, ScaleMethod};
use parisian_core::time_r_law::{partial_mean, positive_law};
use parisian_core::{LevyModel, NumericsConfig};

const EXIT_OK: i32 = 0;
const EXIT_VERIFY_FAILED: i32 = 1;
const EXIT_USAGE: i32 = 2;
const EXIT_NUMERICS: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "parisian",
    about = "Ruin probabilities with a Parisian delay for spectrally negative Lévy surplus processes",
    version,
    disable_help_subcommand = true
)]
struct Cli {
    /// key=value file supplying defaults; explicit flags override it
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<String>,

    /// Output format (grids default to csv, scalars to json)
    #[arg(long = "out-format", visible_alias = "out", global = true, value_enum)]
    out_format: Option<OutFormat>,

    /// Suppress informational notes on stderr
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Auto,
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

impl From<MethodArg> for RuinMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Auto => RuinMethod::Auto,
            MethodArg::ClosedForm => RuinMethod::ClosedForm,
            MethodArg::Quadrature => RuinMethod::Quadrature,
            MethodArg::MonteCarlo => RuinMethod::MonteCarlo,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ScaleMethodArg {
    Auto,
    ClosedForm,
    LaplaceInversion,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SimTarget {
    Parisian,
    Classical,
}

/// Model parameters; `model.kind` selects the family.
#[derive(Args, Debug, Clone, Default)]
struct ModelArgs {
    /// Model family: bm | cl-exp | stable32 (generic is library-only)
    #[arg(long)]
    model: Option<String>,
    /// Drift of the Brownian family
    #[arg(long, allow_negative_numbers = true)]
    mu: Option<f64>,
    /// Volatility of the Brownian family
    #[arg(long, allow_negative_numbers = true)]
    sigma: Option<f64>,
    /// Premium rate (cl-exp) or drift (stable32)
    #[arg(long, allow_negative_numbers = true)]
    c: Option<f64>,
    /// Claim arrival rate (cl-exp)
    #[arg(long, allow_negative_numbers = true)]
    eta: Option<f64>,
    /// Exponential claim-size parameter (cl-exp)
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
struct ToleranceArgs {
    /// Absolute quadrature tolerance
    #[arg(long)]
    quad_abs_tol: Option<f64>,
    /// Relative quadrature tolerance
    #[arg(long)]
    quad_rel_tol: Option<f64>,
    /// Tail-truncation threshold relative to the integral scale
    #[arg(long)]
    tail_rel: Option<f64>,
    /// Talbot contour node count for Laplace inversion
    #[arg(long)]
    talbot_nodes: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
struct SimArgs {
    /// Number of Monte Carlo paths
    #[arg(long)]
    paths: Option<u64>,
    /// RNG seed (path i uses substream i)
    #[arg(long)]
    seed: Option<u64>,
    /// Survival-declaration barrier (default: solved from the truncation budget)
    #[arg(long)]
    barrier: Option<f64>,
    /// Time step of the grid simulators
    #[arg(long)]
    step: Option<f64>,
    /// Confidence level for the half-width
    #[arg(long)]
    confidence: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parisian ruin probability at a point or over grids
    Ruin {
        #[command(flatten)]
        model: ModelArgs,
        /// Initial capital (any sign)
        #[arg(long, allow_negative_numbers = true)]
        x: Option<f64>,
        /// Delay r > 0
        #[arg(long, allow_negative_numbers = true)]
        r: Option<f64>,
        /// Grid a:b:n over initial capital (conflicts with --x)
        #[arg(long, value_name = "A:B:N")]
        x_grid: Option<String>,
        /// Grid a:b:n over the delay (conflicts with --r)
        #[arg(long, value_name = "A:B:N")]
        r_grid: Option<String>,
        /// Evaluation method
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        #[command(flatten)]
        tol: ToleranceArgs,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Dump (x, W(x), W'(x)) over a grid as CSV
    ScaleFn {
        #[command(flatten)]
        model: ModelArgs,
        /// Grid a:b:n (default 0:10:201)
        #[arg(long, value_name = "A:B:N")]
        x_grid: Option<String>,
        /// closed-form | laplace-inversion | auto
        #[arg(long, value_enum)]
        method: Option<ScaleMethodArg>,
        #[command(flatten)]
        tol: ToleranceArgs,
    },
    /// Dump the positive-part law of X_r: JSON atom header plus (z, density) CSV
    Law {
        #[command(flatten)]
        model: ModelArgs,
        /// Time horizon r > 0
        #[arg(long, allow_negative_numbers = true)]
        r: Option<f64>,
        /// Grid a:b:n (default 0 to the truncation point, 201 points)
        #[arg(long, value_name = "A:B:N")]
        z_grid: Option<String>,
        #[command(flatten)]
        tol: ToleranceArgs,
    },
    /// Monte Carlo estimate of the Parisian or classical ruin probability
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        /// parisian | classical
        #[arg(long, value_enum)]
        target: Option<SimTarget>,
        /// Initial capital
        #[arg(long, allow_negative_numbers = true)]
        x: Option<f64>,
        /// Delay r (required for the parisian target)
        #[arg(long, allow_negative_numbers = true)]
        r: Option<f64>,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Verify the scale-function/first-passage identities; exit 1 on residual failure
    Verify {
        #[command(flatten)]
        model: ModelArgs,
        /// Comma-separated Laplace arguments
        #[arg(long, value_name = "LIST")]
        thetas: Option<String>,
        /// Comma-separated time horizons
        #[arg(long, value_name = "LIST")]
        rs: Option<String>,
        /// Comma-separated capital levels
        #[arg(long, value_name = "LIST")]
        xs: Option<String>,
        #[command(flatten)]
        tol: ToleranceArgs,
    },
    /// Closed-form vs quadrature (vs optional Monte Carlo) at one query
    Compare {
        #[command(flatten)]
        model: ModelArgs,
        /// Initial capital
        #[arg(long, allow_negative_numbers = true)]
        x: Option<f64>,
        /// Delay r > 0
        #[arg(long, allow_negative_numbers = true)]
        r: Option<f64>,
        /// Also run the Monte Carlo oracle
        #[arg(long)]
        with_mc: bool,
        #[command(flatten)]
        tol: ToleranceArgs,
        #[command(flatten)]
        sim: SimArgs,
    },
}

/// Errors carrying their process exit code.
struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: msg.into() }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let code = match e {
            CoreError::Domain(_)
            | CoreError::ModelInvalid(_)
            | CoreError::Config(_)
            | CoreError::Unsupported(_) => EXIT_USAGE,
            _ => EXIT_NUMERICS,
        };
        Self { code, message: e.to_string() }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Entry point used by both `main` and the tests; writes data to `out`,
/// human-readable notes and errors to `err`, and returns the exit code.
pub fn run<W: Write, E: Write>(argv: &[String], out: &mut W, err: &mut E) -> i32 {
    configure_threads();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            // clap renders its own help/version on stdout with exit 0
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return EXIT_USAGE;
            }
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
    };
    let config = match cli.config.as_deref().map(read_config_file).transpose() {
        Ok(map) => map.unwrap_or_default(),
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            return e.code;
        }
    };
    match dispatch(cli, &config, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

fn configure_threads() {
    if let Ok(v) = std::env::var("PARISIAN_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n > 0 {
                // ignore the error if a pool already exists (tests, reruns)
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn read_config_file(path: &str) -> CliResult<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config file '{path}': {e}")))?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("{path}:{}: expected key=value", lineno + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

/// Fills an unset flag from the config map, tracking consumed keys.
fn merge<T: std::str::FromStr>(
    slot: &mut Option<T>,
    map: &BTreeMap<String, String>,
    used: &mut Vec<String>,
    key: &str,
) -> CliResult<()> {
    if let Some(raw) = map.get(key) {
        used.push(key.to_string());
        if slot.is_none() {
            let parsed = raw
                .parse::<T>()
                .map_err(|_| CliError::usage(format!("config key '{key}': cannot parse '{raw}'")))?;
            *slot = Some(parsed);
        }
    }
    Ok(())
}

fn reject_unknown_keys(map: &BTreeMap<String, String>, used: &[String]) -> CliResult<()> {
    for k in map.keys() {
        if !used.iter().any(|u| u == k) {
            return Err(CliError::usage(format!("config file: unknown key '{k}' for this subcommand")));
        }
    }
    Ok(())
}

fn merge_model(
    m: &mut ModelArgs,
    map: &BTreeMap<String, String>,
    used: &mut Vec<String>,
) -> CliResult<()> {
    // both `model` and the dotted `model.kind` spelling are accepted
    if let Some(raw) = map.get("model.kind") {
        used.push("model.kind".to_string());
        if m.model.is_none() {
            m.model = Some(raw.clone());
        }
    }
    merge(&mut m.model, map, used, "model")?;
    merge(&mut m.mu, map, used, "mu")?;
    merge(&mut m.sigma, map, used, "sigma")?;
    merge(&mut m.c, map, used, "c")?;
    merge(&mut m.eta, map, used, "eta")?;
    merge(&mut m.alpha, map, used, "alpha")?;
    Ok(())
}

fn merge_tol(
    t: &mut ToleranceArgs,
    map: &BTreeMap<String, String>,
    used: &mut Vec<String>,
) -> CliResult<()> {
    merge(&mut t.quad_abs_tol, map, used, "quad-abs-tol")?;
    merge(&mut t.quad_rel_tol, map, used, "quad-rel-tol")?;
    merge(&mut t.tail_rel, map, used, "tail-rel")?;
    merge(&mut t.talbot_nodes, map, used, "talbot-nodes")?;
    Ok(())
}

fn merge_sim(s: &mut SimArgs, map: &BTreeMap<String, String>, used: &mut Vec<String>) -> CliResult<()> {
    merge(&mut s.paths, map, used, "paths")?;
    merge(&mut s.seed, map, used, "seed")?;
    merge(&mut s.barrier, map, used, "barrier")?;
    merge(&mut s.step, map, used, "step")?;
    merge(&mut s.confidence, map, used, "confidence")?;
    Ok(())
}

fn build_model(m: &ModelArgs) -> CliResult<LevyModel> {
    let kind = m.model.as_deref().ok_or_else(|| CliError::usage("missing --model (bm | cl-exp | stable32)"))?;
    let need = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| CliError::usage(format!("model '{kind}' requires --{name}")))
    };
    let model = match kind {
        "bm" => LevyModel::brownian(need(m.mu, "mu")?, need(m.sigma, "sigma")?)?,
        "cl-exp" => LevyModel::cramer_lundberg(need(m.c, "c")?, need(m.eta, "eta")?, need(m.alpha, "alpha")?)?,
        "stable32" => LevyModel::stable32(need(m.c, "c")?)?,
        "generic" => {
            return Err(CliError::usage(
                "generic-psi models are constructible only through the library API, not the CLI",
            ))
        }
        other => return Err(CliError::usage(format!("unknown model kind '{other}'"))),
    };
    Ok(model)
}

fn build_numerics(t: &ToleranceArgs) -> NumericsConfig {
    let mut cfg = NumericsConfig::default();
    if let Some(v) = t.quad_abs_tol {
        cfg.quad_abs_tol = v;
    }
    if let Some(v) = t.quad_rel_tol {
        cfg.quad_rel_tol = v;
    }
    if let Some(v) = t.tail_rel {
        cfg.tail_rel = v;
    }
    if let Some(v) = t.talbot_nodes {
        cfg.talbot_nodes = v;
    }
    cfg
}

fn build_sim(s: &SimArgs, model: &LevyModel, r: f64, cfg: &NumericsConfig) -> CliResult<SimConfig> {
    let mut sim = SimConfig::defaults_for(model, r, cfg)?;
    if let Some(v) = s.paths {
        sim.n_paths = v;
    }
    if let Some(v) = s.seed {
        sim.seed = v;
    }
    if let Some(v) = s.barrier {
        sim.barrier = v;
    }
    if let Some(v) = s.step {
        sim.step = v;
    }
    if let Some(v) = s.confidence {
        sim.confidence = v;
    }
    Ok(sim)
}

fn parse_grid(spec: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::usage(format!("grid '{spec}' must have the form a:b:n")));
    }
    let a: f64 = parts[0].parse().map_err(|_| CliError::usage(format!("grid start '{}' is not a number", parts[0])))?;
    let b: f64 = parts[1].parse().map_err(|_| CliError::usage(format!("grid end '{}' is not a number", parts[1])))?;
    let n: usize = parts[2].parse().map_err(|_| CliError::usage(format!("grid count '{}' is not an integer", parts[2])))?;
    if n == 0 {
        return Err(CliError::usage("grid count must be at least 1"));
    }
    if n > 10_000_000 {
        return Err(CliError::usage(format!("grid count {n} is unreasonably large")));
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
}

fn json_f64(v: f64) -> serde_json::Value {
    serde_json::Number::from_f64(v)
        .map(serde_json::Value::Number)
        .unwrap_or(serde_json::Value::Null)
}

fn dispatch<W: Write, E: Write>(
    cli: Cli,
    config: &BTreeMap<String, String>,
    out: &mut W,
    err: &mut E,
) -> CliResult<i32> {
    let out_format = cli.out_format;
    let quiet = cli.quiet;
    match cli.command {
        Command::Ruin { mut model, mut x, mut r, mut x_grid, mut r_grid, mut method, mut tol, mut sim } => {
            let mut used = Vec::new();
            merge_model(&mut model, config, &mut used)?;
            merge_tol(&mut tol, config, &mut used)?;
            merge_sim(&mut sim, config, &mut used)?;
            merge(&mut x, config, &mut used, "x")?;
            merge(&mut r, config, &mut used, "r")?;
            merge(&mut x_grid, config, &mut used, "x-grid")?;
            merge(&mut r_grid, config, &mut used, "r-grid")?;
            let mut method_name: Option<String> = None;
            merge(&mut method_name, config, &mut used, "method")?;
            reject_unknown_keys(config, &used)?;
            if method.is_none() {
                if let Some(name) = method_name {
                    method = Some(
                        MethodArg::from_str(&name, true)
                            .map_err(|_| CliError::usage(format!("unknown method '{name}'")))?,
                    );
                }
            }
            cmd_ruin(model, x, r, x_grid, r_grid, method, tol, sim, out_format, quiet, out, err)
        }
        Command::ScaleFn { mut model, mut x_grid, method, mut tol } => {
            let mut used = Vec::new();
            merge_model(&mut model, config, &mut used)?;
            merge_tol(&mut tol, config, &mut used)?;
            merge(&mut x_grid, config, &mut used, "x-grid")?;
            reject_unknown_keys(config, &used)?;
            cmd_scale_fn(model, x_grid, method, tol, out)
        }
        Command::Law { mut model, mut r, mut z_grid, mut tol } => {
            let mut used = Vec::new();
            merge_model(&mut model, config, &mut used)?;
            merge_tol(&mut tol, config, &mut used)?;
            merge(&mut r, config, &mut used, "r")?;
            merge(&mut z_grid, config, &mut used, "z-grid")?;
            reject_unknown_keys(config, &used)?;
            cmd_law(model, r, z_grid, tol, out)
        }
        Command::Simulate { mut model, target, mut x, mut r, mut sim } => {
            let mut used = Vec::new();
            merge_model(&mut model, config, &mut used)?;
            merge_sim(&mut sim, config, &mut used)?;
            merge(&mut x, config, &mut used, "x")?;
            merge(&mut r, config, &mut used, "r")?;
            reject_unknown_keys(config, &used)?;
            cmd_simulate(model, target, x, r, sim, quiet, out, err)
        }
        Command::Verify { mut model, mut thetas, mut rs, mut xs, mut tol } => {
            let mut used = Vec::new();
            merge_model(&mut model, config, &mut used)?;
            merge_tol(&mut tol, config, &mut used)?;
            merge(&mut thetas, config, &mut used, "thetas")?;
            merge(&mut rs, config, &mut used, "rs")?;
            merge(&mut xs, config, &mut used, "xs")?;
            reject_unknown_keys(config, &used)?;
            cmd_verify(model, thetas, rs, xs, tol, out_format, out)
        }
        Command::Compare { mut model, mut x, mut r, with_mc, mut tol, mut sim } => {
            let mut used = Vec::new();
            merge_model(&mut model, config, &mut used)?;
            merge_tol(&mut tol, config, &mut used)?;
            merge_sim(&mut sim, config, &mut used)?;
            merge(&mut x, config, &mut used, "x")?;
            merge(&mut r, config, &mut used, "r")?;
            reject_unknown_keys(config, &used)?;
            cmd_compare(model, x, r, with_mc, tol, sim, out)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_ruin<W: Write, E: Write>(
    model_args: ModelArgs,
    x: Option<f64>,
    r: Option<f64>,
    x_grid: Option<String>,
    r_grid: Option<String>,
    method: Option<MethodArg>,
    tol: ToleranceArgs,
    sim: SimArgs,
    out_format: Option<OutFormat>,
    quiet: bool,
    out: &mut W,
    err: &mut E,
) -> CliResult<i32> {
    let model = build_model(&model_args)?;
    let numerics = build_numerics(&tol);
    if x.is_some() && x_grid.is_some() {
        return Err(CliError::usage("--x and --x-grid are mutually exclusive"));
    }
    if r.is_some() && r_grid.is_some() {
        return Err(CliError::usage("--r and --r-grid are mutually exclusive"));
    }
    let xs = match (&x_grid, x) {
        (Some(g), _) => parse_grid(g)?,
        (None, Some(v)) => vec![v],
        (None, None) => return Err(CliError::usage("missing --x or --x-grid")),
    };
    let rs = match (&r_grid, r) {
        (Some(g), _) => parse_grid(g)?,
        (None, Some(v)) => vec![v],
        (None, None) => return Err(CliError::usage("missing --r or --r-grid")),
    };
    for &rv in &rs {
        if !(rv > 0.0) {
            return Err(CliError::usage("delay r must be > 0"));
        }
    }
    let method = method.unwrap_or(MethodArg::Auto);
    let sim_cfg = if method == MethodArg::MonteCarlo {
        let r_min = rs.iter().cloned().fold(f64::INFINITY, f64::min);
        Some(build_sim(&sim, &model, r_min, &numerics)?)
    } else {
        None
    };

    let queries: Vec<(f64, f64)> =
        xs.iter().flat_map(|&xv| rs.iter().map(move |&rv| (xv, rv))).collect();
    let evaluate = |&(xv, rv): &(f64, f64)| {
        let query = RuinQuery {
            model: model.clone(),
            x: xv,
            r: rv,
            method: method.into(),
            numerics: numerics.clone(),
            sim: sim_cfg.clone(),
        };
        parisian_ruin(&query)
    };
    // sweeps are order-deterministic regardless of scheduling
    let results: Vec<_> = {
        use rayon::prelude::*;
        queries.par_iter().map(evaluate).collect()
    };

    let grid_mode = queries.len() > 1 || x_grid.is_some() || r_grid.is_some();
    let format = out_format.unwrap_or(if grid_mode { OutFormat::Csv } else { OutFormat::Json });
    match format {
        OutFormat::Csv => {
            writeln!(out, "x,r,probability,method,error_estimate").ok();
            for ((xv, rv), res) in queries.iter().zip(results) {
                let res = res.map_err(CliError::from)?;
                writeln!(out, "{xv},{rv},{},{},{}", res.probability, res.method, res.error_estimate).ok();
            }
        }
        OutFormat::Json => {
            let mut rows = Vec::new();
            for ((xv, rv), res) in queries.iter().zip(results) {
                let res = res.map_err(CliError::from)?;
                let diagnostics: serde_json::Map<String, serde_json::Value> = res
                    .diagnostics
                    .iter()
                    .map(|(k, v)| (k.clone(), json_f64(*v)))
                    .collect();
                rows.push(serde_json::json!({
                    "x": xv,
                    "r": rv,
                    "probability": res.probability,
                    "method": res.method.to_string(),
                    "error_estimate": res.error_estimate,
                    "diagnostics": diagnostics,
                }));
                if !quiet && !grid_mode {
                    writeln!(err, "note: method={}, error_estimate={}", res.method, res.error_estimate).ok();
                }
            }
            if grid_mode {
                writeln!(out, "{}", serde_json::Value::Array(rows)).ok();
            } else {
                writeln!(out, "{}", rows.remove(0)).ok();
            }
        }
    }
    Ok(EXIT_OK)
}

fn cmd_scale_fn<W: Write>(
    model_args: ModelArgs,
    x_grid: Option<String>,
    method: Option<ScaleMethodArg>,
    tol: ToleranceArgs,
    out: &mut W,
) -> CliResult<i32> {
    let model = build_model(&model_args)?;
    let numerics = build_numerics(&tol);
    let xs = parse_grid(x_grid.as_deref().unwrap_or("0:10:201"))?;
    let sf = match method.unwrap_or(ScaleMethodArg::Auto) {
        ScaleMethodArg::Auto => ScaleFunction::new(model, &numerics)?,
        ScaleMethodArg::ClosedForm => ScaleFunction::closed_form(model)?,
        ScaleMethodArg::LaplaceInversion => ScaleFunction::laplace_inversion(model, &numerics)?,
    };
    writeln!(out, "x,w,w_prime").ok();
    for &x in &xs {
        let w = match sf.method() {
            ScaleMethod::ClosedForm => sf.w(x),
            ScaleMethod::LaplaceInversion => sf.w_checked(x)?,
        };
        let wp = if x > 0.0 { sf.w_prime(x)? } else { f64::NAN };
        writeln!(out, "{x},{w},{wp}").ok();
    }
    Ok(EXIT_OK)
}

fn cmd_law<W: Write>(
    model_args: ModelArgs,
    r: Option<f64>,
    z_grid: Option<String>,
    tol: ToleranceArgs,
    out: &mut W,
) -> CliResult<i32> {
    let model = build_model(&model_args)?;
    let numerics = build_numerics(&tol);
    let r = r.ok_or_else(|| CliError::usage("missing --r"))?;
    if !(r > 0.0) {
        return Err(CliError::usage("delay r must be > 0"));
    }
    let law = positive_law(&model, r, &numerics)?;
    let zs = match z_grid {
        Some(g) => parse_grid(&g)?,
        None => {
            let hi = law.truncation_point(numerics.tail_rel * r * law.drift())?;
            (0..201).map(|i| hi * i as f64 / 200.0).collect()
        }
    };
    let header = serde_json::json!({
        "kind": model.kind(),
        "r": r,
        "atom_location": law.atom().map(|a| a.location),
        "atom_mass": law.atom().map(|a| a.mass),
        "partial_mean": partial_mean(&law, &numerics)?,
    });
    writeln!(out, "{header}").ok();
    writeln!(out, "z,density").ok();
    for &z in &zs {
        writeln!(out, "{z},{}", law.density_at(z)).ok();
    }
    Ok(EXIT_OK)
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate<W: Write, E: Write>(
    model_args: ModelArgs,
    target: Option<SimTarget>,
    x: Option<f64>,
    r: Option<f64>,
    sim: SimArgs,
    quiet: bool,
    out: &mut W,
    err: &mut E,
) -> CliResult<i32> {
    let model = build_model(&model_args)?;
    let numerics = NumericsConfig::default();
    let x = x.ok_or_else(|| CliError::usage("missing --x"))?;
    let target = target.unwrap_or(SimTarget::Parisian);
    let est = match target {
        SimTarget::Parisian => {
            let r = r.ok_or_else(|| CliError::usage("missing --r (parisian target)"))?;
            if !(r > 0.0) {
                return Err(CliError::usage("delay r must be > 0"));
            }
            let cfg = build_sim(&sim, &model, r, &numerics)?;
            simulate_parisian(&model, x, r, &cfg)?
        }
        SimTarget::Classical => {
            let cfg = build_sim(&sim, &model, 1.0, &numerics)?;
            simulate_classical(&model, x, &cfg)?
        }
    };
    if !quiet {
        writeln!(err, "note: {}", est.bias_note).ok();
    }
    writeln!(
        out,
        "{}",
        serde_json::json!({
            "p_hat": est.p_hat,
            "half_width": est.half_width,
            "n_paths": est.n_paths,
            "bias_note": est.bias_note,
        })
    )
    .ok();
    Ok(EXIT_OK)
}

fn parse_list(raw: Option<String>, default: &[f64], what: &str) -> CliResult<Vec<f64>> {
    match raw {
        None => Ok(default.to_vec()),
        Some(s) => s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::usage(format!("{what}: cannot parse '{p}' as a number")))
            })
            .collect(),
    }
}

fn cmd_verify<W: Write>(
    model_args: ModelArgs,
    thetas: Option<String>,
    rs: Option<String>,
    xs: Option<String>,
    tol: ToleranceArgs,
    out_format: Option<OutFormat>,
    out: &mut W,
) -> CliResult<i32> {
    let model = build_model(&model_args)?;
    let numerics = build_numerics(&tol);
    let thetas = parse_list(thetas, &[0.5, 1.0, 2.0], "--thetas")?;
    let rs = parse_list(rs, &[0.1, 0.5, 1.0, 2.0, 5.0], "--rs")?;
    let xs = parse_list(xs, &[0.0, 0.5, 1.0], "--xs")?;
    let report = verify_lemma_identities(&model, &thetas, &rs, &xs, &numerics)?;
    match out_format.unwrap_or(OutFormat::Csv) {
        OutFormat::Csv => {
            writeln!(out, "identity,params,lhs,rhs,residual,tol,pass").ok();
            for e in &report.entries {
                writeln!(
                    out,
                    "{},\"{}\",{},{},{},{},{}",
                    e.identity, e.params, e.lhs, e.rhs, e.residual, e.tol, e.pass
                )
                .ok();
            }
        }
        OutFormat::Json => {
            let rows: Vec<_> = report
                .entries
                .iter()
                .map(|e| {
                    serde_json::json!({
                        "identity": e.identity,
                        "params": e.params,
                        "lhs": e.lhs,
                        "rhs": e.rhs,
                        "residual": e.residual,
                        "tol": e.tol,
                        "pass": e.pass,
                    })
                })
                .collect();
            writeln!(out, "{}", serde_json::Value::Array(rows)).ok();
        }
    }
    Ok(if report.all_pass() { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

fn cmd_compare<W: Write>(
    model_args: ModelArgs,
    x: Option<f64>,
    r: Option<f64>,
    with_mc: bool,
    tol: ToleranceArgs,
    sim: SimArgs,
    out: &mut W,
) -> CliResult<i32> {
    let model = build_model(&model_args)?;
    let numerics = build_numerics(&tol);
    let x = x.ok_or_else(|| CliError::usage("missing --x"))?;
    let r = r.ok_or_else(|| CliError::usage("missing --r"))?;
    if !(r > 0.0) {
        return Err(CliError::usage("delay r must be > 0"));
    }
    writeln!(out, "method,probability,error_estimate").ok();
    let mut row = |method: RuinMethod, sim_cfg: Option<SimConfig>| -> CliResult<()> {
        let query = RuinQuery {
            model: model.clone(),
            x,
            r,
            method,
            numerics: numerics.clone(),
            sim: sim_cfg,
        };
        match parisian_ruin(&query) {
            Ok(res) => {
                writeln!(out, "{},{},{}", res.method, res.probability, res.error_estimate).ok();
                Ok(())
            }
            // closed form legitimately absent for some families
            Err(CoreError::Unsupported(_)) if method == RuinMethod::ClosedForm => {
                writeln!(out, "closed-form,,").ok();
                Ok(())
            }
            Err(e) => Err(e.into()),
        }
    };
    row(RuinMethod::ClosedForm, None)?;
    row(RuinMethod::Quadrature, None)?;
    if with_mc {
        let cfg = build_sim(&sim, &model, r, &numerics)?;
        row(RuinMethod::MonteCarlo, Some(cfg))?;
    }
    Ok(EXIT_OK)
}

// clap's ValueEnum gives us from_str for the config-file method key
impl MethodArg {
    fn from_str(s: &str, ignore_case: bool) -> Result<Self, String> {
        <Self as ValueEnum>::from_str(s, ignore_case)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_vec(args: &[&str]) -> (i32, String, String) {
        let argv: Vec<String> = std::iter::once("parisian".to_string())
            .chain(args.iter().map(|s| s.to_string()))
            .collect();
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(&argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn ruin_scalar_reference_value() {
        let (code, out, _) = run_vec(&[
            "ruin", "--model", "bm", "--mu", "1", "--sigma", "1", "--x", "0", "--r", "1",
        ]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
        let p = v["probability"].as_f64().unwrap();
        assert!((p - 0.0769078563444576).abs() < 1e-10, "{p}");
        assert_eq!(v["method"], "closed-form");
    }

    #[test]
    fn ruin_rejects_nonpositive_delay_with_exit_2() {
        let (code, _, err) = run_vec(&[
            "ruin", "--model", "bm", "--mu", "1", "--sigma", "1", "--x", "0", "--r", "-1",
        ]);
        assert_eq!(code, 2);
        assert!(err.contains("delay r must be > 0"), "{err}");
    }

    #[test]
    fn ruin_grid_emits_csv() {
        let (code, out, _) = run_vec(&[
            "ruin", "--model", "cl-exp", "--c", "2", "--eta", "1", "--alpha", "1",
            "--x-grid", "0:1:3", "--r", "1",
        ]);
        assert_eq!(code, 0);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "x,r,probability,method,error_estimate");
        assert_eq!(lines.len(), 4);
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields[0], "0");
        assert_eq!(fields[1], "1");
        let p: f64 = fields[2].parse().unwrap();
        assert!((p - 0.21110184658718783).abs() < 1e-12, "{p}");
        assert_eq!(fields[3], "closed-form");
    }

    #[test]
    fn ruin_monotone_across_grid_rows() {
        let (_, out, _) = run_vec(&[
            "ruin", "--model", "bm", "--mu", "1", "--sigma", "1", "--x-grid", "0:2:5", "--r", "1",
        ]);
        let ps: Vec<f64> = out
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
            .collect();
        assert!(ps.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn scale_fn_dumps_csv_with_nan_derivative_at_origin() {
        let (code, out, _) = run_vec(&[
            "scale-fn", "--model", "stable32", "--c", "1", "--x-grid", "0:1:3",
        ]);
        assert_eq!(code, 0);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "x,w,w_prime");
        assert!(lines[1].starts_with("0,0,NaN"));
        let w_mid: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
        let want = 1.0 - parisian_core::special_functions::erfcx(0.5f64.sqrt());
        assert!((w_mid - want).abs() < 1e-13, "{w_mid} vs {want}");
    }

    #[test]
    fn law_emits_json_header_then_csv() {
        let (code, out, _) = run_vec(&[
            "law", "--model", "cl-exp", "--c", "2", "--eta", "1", "--alpha", "1", "--r", "1",
            "--z-grid", "0:2:5",
        ]);
        assert_eq!(code, 0);
        let mut lines = out.lines();
        let header: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
        assert_eq!(header["atom_location"].as_f64().unwrap(), 2.0);
        assert!((header["atom_mass"].as_f64().unwrap() - (-1.0f64).exp()).abs() < 1e-12);
        assert_eq!(lines.next().unwrap(), "z,density");
        assert_eq!(lines.count(), 5);
    }

    #[test]
    fn simulate_emits_exact_json_fields() {
        let (code, out, _) = run_vec(&[
            "simulate", "--model", "cl-exp", "--c", "2", "--eta", "1", "--alpha", "1",
            "--x", "0", "--r", "1", "--paths", "5000", "--seed", "7",
        ]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
        for key in ["p_hat", "half_width", "n_paths", "bias_note"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["n_paths"].as_u64().unwrap(), 5000);
    }

    #[test]
    fn simulate_is_byte_deterministic_given_seed() {
        let args = [
            "simulate", "--model", "cl-exp", "--c", "2", "--eta", "1", "--alpha", "1",
            "--x", "0", "--r", "1", "--paths", "3000", "--seed", "123",
        ];
        let (_, out1, _) = run_vec(&args);
        let (_, out2, _) = run_vec(&args);
        assert_eq!(out1, out2);
    }

    #[test]
    fn verify_passes_for_cl_model() {
        let (code, out, _) = run_vec(&[
            "verify", "--model", "cl-exp", "--c", "2", "--eta", "1", "--alpha", "1",
            "--rs", "0.5,1", "--thetas", "1", "--xs", "0,1",
        ]);
        assert_eq!(code, 0, "{out}");
        assert!(out.lines().skip(1).all(|l| l.ends_with("true")));
        // all residuals comfortably below 1e-6 for this model; the params
        // field is quoted and may contain commas, so count from the right
        for line in out.lines().skip(1) {
            let resid: f64 = line.rsplit(',').nth(2).unwrap().parse().unwrap();
            assert!(resid <= 1e-6, "{line}");
        }
    }

    #[test]
    fn compare_prints_three_rows_with_mc() {
        let (code, out, _) = run_vec(&[
            "compare", "--model", "cl-exp", "--c", "2", "--eta", "1", "--alpha", "1",
            "--x", "0", "--r", "1", "--with-mc", "--paths", "5000", "--seed", "3",
        ]);
        assert_eq!(code, 0);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "method,probability,error_estimate");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("closed-form,"));
        assert!(lines[2].starts_with("quadrature,"));
        assert!(lines[3].starts_with("monte-carlo,"));
    }

    #[test]
    fn config_file_supplies_defaults_and_flags_override() {
        let dir = std::env::temp_dir().join(format!("parisian-cli-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.conf");
        std::fs::write(&path, "model = bm\nmu = 1\nsigma = 1\nx = 0\nr = 1\n").unwrap();
        let (code, out, _) = run_vec(&["ruin", "--config", path.to_str().unwrap()]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
        assert!((v["probability"].as_f64().unwrap() - 0.0769078563444576).abs() < 1e-10);
        // flag overrides the file
        let (code, out, _) = run_vec(&["ruin", "--config", path.to_str().unwrap(), "--x", "1"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
        assert!((v["probability"].as_f64().unwrap() - 0.0104083465214979).abs() < 1e-10);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn config_file_rejects_unknown_keys() {
        let dir = std::env::temp_dir().join(format!("parisian-cli-test2-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.conf");
        std::fs::write(&path, "model = bm\nmu = 1\nsigma = 1\nbogus = 3\n").unwrap();
        let (code, _, err) = run_vec(&["ruin", "--config", path.to_str().unwrap(), "--x", "0", "--r", "1"]);
        assert_eq!(code, 2);
        assert!(err.contains("unknown key 'bogus'"), "{err}");
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn generic_model_is_rejected_by_the_cli() {
        let (code, _, err) = run_vec(&["ruin", "--model", "generic", "--x", "0", "--r", "1"]);
        assert_eq!(code, 2);
        assert!(err.contains("library API"), "{err}");
    }

    #[test]
    fn usage_error_when_model_parameters_missing() {
        let (code, _, err) = run_vec(&["ruin", "--model", "bm", "--x", "0", "--r", "1"]);
        assert_eq!(code, 2);
        assert!(err.contains("requires --mu"), "{err}");
    }

    #[test]
    fn identical_invocations_are_byte_identical() {
        let args = [
            "ruin", "--model", "stable32", "--c", "1", "--x-grid", "0:1:3", "--r-grid", "0.5:1:2",
        ];
        let (c1, out1, _) = run_vec(&args);
        let (c2, out2, _) = run_vec(&args);
        assert_eq!(c1, 0);
        assert_eq!(c1, c2);
        assert_eq!(out1, out2);
    }
}
