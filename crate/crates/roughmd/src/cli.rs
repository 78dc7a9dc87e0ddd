//! Subcommand dispatch: configuration, orchestration and emission.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use roughmd_core::asymptotics::{
    gao_lee_iv, implied_variance_series, implied_vol_first_order, log_call_md, log_strike, MDQuery,
};
use roughmd_core::energy::{
    energy_coefficients, energy_taylor, minimize_rate, EnergyCoefficients, MinimizerConfig,
};
use roughmd_core::simulation::{
    build_covariance, cholesky_factor, mc_smile_with, JitterPolicy, MonteCarloPricer, SmilePoint,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::exec::RayonExecutor;
use crate::output::{fmt_num, fmt_opt, fmt_sci, Table};

#[derive(Debug, Parser)]
#[command(
    name = "roughmd",
    version,
    about = "Rough volatility smiles: Monte Carlo against moderate-deviation asymptotics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Joint covariance of (Z, B̂) on the configured grid.
    Covmat {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Monte Carlo call price as JSON.
    Price {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        strike: Option<f64>,
    },
    /// Monte Carlo smile along k_t = k·t^{1/2-H+β}.
    Smile {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        md: MdArgs,
    },
    /// Asymptotic log-prices and implied volatilities.
    Asymptote {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        md: MdArgs,
        #[arg(long)]
        order: Option<u8>,
    },
    /// Numerical rate function against its cubic Taylor polynomial.
    EnergyFit {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x_list: Option<Vec<f64>>,
        #[arg(long)]
        grid_size: Option<usize>,
    },
    /// Monte Carlo smile joined with the asymptotic columns.
    Compare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        md: MdArgs,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Flat JSON configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "hurst", visible_alias = "H")]
    hurst: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    rho: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    sigma0: Option<f64>,
    #[arg(long)]
    kernel_normalization: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct SimArgs {
    #[arg(long)]
    paths: Option<usize>,
    /// Draw antithetic pairs.
    #[arg(long)]
    antithetic: bool,
}

#[derive(Debug, Args)]
struct MdArgs {
    #[arg(long, value_delimiter = ',')]
    t_list: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    k: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
}

/// Failure classes and their exit codes.
#[derive(Debug)]
enum Failure {
    Validation(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<roughmd_core::Error> for Failure {
    fn from(e: roughmd_core::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Validation(e.to_string())
        }
    }
}

type Outcome<T> = Result<T, Failure>;

/// Runs the command line `argv` (program name first) against the process
/// standard streams and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run`] with explicit streams: data goes to `out`, diagnostics to `err`.
/// Exit codes: 0 success, 1 usage or validation error, 2 numerical failure.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                1
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    match dispatch(cli.command) {
        Ok(Emit { text, path }) => match write_output(&text, path.as_deref(), out) {
            Ok(()) => 0,
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                1
            }
        },
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message());
            f.code()
        }
    }
}

struct Emit {
    text: String,
    path: Option<PathBuf>,
}

fn write_output(text: &str, path: Option<&Path>, out: &mut dyn Write) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text),
        None => out.write_all(text.as_bytes()),
    }
}

fn dispatch(command: Command) -> Outcome<Emit> {
    match command {
        Command::Covmat { common, horizon } => {
            let mut cfg = resolve(&common)?;
            if let Some(h) = horizon {
                cfg.horizon = h;
            }
            emit(&common, covmat(&cfg)?)
        }
        Command::Price {
            common,
            sim,
            t,
            strike,
        } => {
            let mut cfg = resolve(&common)?;
            apply_sim(&mut cfg, &sim);
            if let Some(t) = t {
                cfg.t = t;
            }
            if let Some(k) = strike {
                cfg.strike = k;
            }
            emit(&common, price(&cfg)?)
        }
        Command::Smile { common, sim, md } => {
            let mut cfg = resolve(&common)?;
            apply_sim(&mut cfg, &sim);
            apply_md(&mut cfg, &md);
            emit(&common, smile(&cfg)?)
        }
        Command::Asymptote { common, md, order } => {
            let mut cfg = resolve(&common)?;
            apply_md(&mut cfg, &md);
            if let Some(o) = order {
                cfg.order = o;
            }
            emit(&common, asymptote(&cfg)?)
        }
        Command::EnergyFit {
            common,
            x_list,
            grid_size,
        } => {
            let mut cfg = resolve(&common)?;
            if let Some(x) = x_list {
                cfg.x_list = x;
            }
            if let Some(m) = grid_size {
                cfg.grid_size = m;
            }
            emit(&common, energy_fit(&cfg)?)
        }
        Command::Compare { common, sim, md } => {
            let mut cfg = resolve(&common)?;
            apply_sim(&mut cfg, &sim);
            apply_md(&mut cfg, &md);
            emit(&common, compare(&cfg)?)
        }
    }
}

fn emit(common: &Common, text: String) -> Outcome<Emit> {
    Ok(Emit {
        text,
        path: common.out.clone(),
    })
}

fn resolve(common: &Common) -> Outcome<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path).map_err(Failure::Validation)?,
        None => RunConfig::default(),
    };
    let overrides = [
        (common.hurst, &mut cfg.hurst),
        (common.rho, &mut cfg.rho),
        (common.eta, &mut cfg.eta),
        (common.sigma0, &mut cfg.sigma0),
    ];
    for (flag, slot) in overrides {
        if let Some(v) = flag {
            *slot = v;
        }
    }
    if common.kernel_normalization.is_some() {
        cfg.kernel_normalization = common.kernel_normalization;
    }
    if let Some(n) = common.steps {
        cfg.n_steps = n;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn apply_sim(cfg: &mut RunConfig, sim: &SimArgs) {
    if let Some(n) = sim.paths {
        cfg.n_paths = n;
    }
    cfg.antithetic |= sim.antithetic;
}

fn apply_md(cfg: &mut RunConfig, md: &MdArgs) {
    if let Some(t) = &md.t_list {
        cfg.t_list = t.clone();
    }
    if let Some(k) = md.k {
        cfg.k = k;
    }
    if md.beta.is_some() {
        cfg.beta = md.beta;
    }
}

fn executor() -> Outcome<RayonExecutor> {
    RayonExecutor::from_env().map_err(Failure::Validation)
}

fn covmat(cfg: &RunConfig) -> Outcome<String> {
    let params = cfg.model()?;
    let grid = cfg.grid(cfg.horizon)?;
    let cov = cholesky_factor(build_covariance(&params, &grid)?, &JitterPolicy::default())?;
    let n = grid.n_steps;
    let header: Vec<String> = (1..=n)
        .map(|i| format!("z{i}"))
        .chain((1..=n).map(|i| format!("bhat{i}")))
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = Table::new(&cfg.hash(), cfg.seed, &header);
    for i in 0..cov.dim() {
        let row: Vec<String> = (0..cov.dim()).map(|j| fmt_sci(cov.get(i, j))).collect();
        table.row(&row);
    }
    Ok(table.into_string())
}

#[derive(Serialize)]
struct PriceReport {
    price: f64,
    stderr: f64,
    implied_vol: Option<f64>,
    iv_failure: Option<&'static str>,
    n_samples: usize,
    seed: u64,
    config_hash: String,
}

fn price(cfg: &RunConfig) -> Outcome<String> {
    let params = cfg.model()?;
    let pricer = MonteCarloPricer::new(params, cfg.grid(cfg.t)?)?;
    let est = pricer
        .price_strikes(
            &[cfg.strike],
            cfg.n_paths,
            cfg.seed,
            cfg.antithetic,
            &executor()?,
        )?
        .remove(0);
    let report = PriceReport {
        price: est.price,
        stderr: est.stderr,
        implied_vol: est.implied_vol,
        iv_failure: est.iv_failure.map(|f| f.as_str()),
        n_samples: est.n_samples,
        seed: est.seed,
        config_hash: cfg.hash(),
    };
    let mut text = serde_json::to_string(&report).expect("report serialises");
    text.push('\n');
    Ok(text)
}

fn simulate(cfg: &RunConfig) -> Outcome<Vec<SmilePoint>> {
    let params = cfg.model()?;
    Ok(mc_smile_with(
        &executor()?,
        &params,
        &cfg.t_list,
        cfg.k,
        cfg.beta(),
        cfg.n_paths,
        cfg.n_steps,
        cfg.seed,
        cfg.antithetic,
    )?)
}

fn status(p: &SmilePoint) -> &'static str {
    p.failure.map_or("ok", |f| f.as_str())
}

fn smile(cfg: &RunConfig) -> Outcome<String> {
    let points = simulate(cfg)?;
    let mut table = Table::new(
        &cfg.hash(),
        cfg.seed,
        &[
            "t", "k_t", "iv_mc", "iv_lo", "iv_hi", "iv_asym", "price", "stderr", "status",
        ],
    );
    for p in &points {
        table.row(&[
            fmt_num(p.t),
            fmt_num(p.k_t),
            fmt_opt(p.iv_mc),
            fmt_opt(p.iv_lo),
            fmt_opt(p.iv_hi),
            fmt_num(p.iv_asym),
            fmt_num(p.price),
            fmt_num(p.stderr),
            status(p).to_string(),
        ]);
    }
    Ok(table.into_string())
}

/// Asymptotic columns at one maturity.
struct AsymptoteRow {
    k_t: f64,
    log_call: f64,
    iv_gao_lee: Option<f64>,
    iv_first_order: Option<f64>,
    iv_series: f64,
}

fn asymptote_row(cfg: &RunConfig, coeffs: &EnergyCoefficients, t: f64) -> Outcome<AsymptoteRow> {
    let params = cfg.model()?;
    let beta = cfg.beta();
    let query = MDQuery::new(cfg.k, beta, t, cfg.order, cfg.hurst)?;
    let k_t = log_strike(&query, cfg.hurst);
    let log_call = log_call_md(coeffs, &query, cfg.hurst);
    let derivs = [coeffs.i2, coeffs.i3];
    let variance = implied_variance_series(&derivs, cfg.k, t, beta, cfg.hurst, cfg.order as usize)?;
    Ok(AsymptoteRow {
        k_t,
        log_call,
        iv_gao_lee: gao_lee_iv(k_t, t, log_call).ok(),
        // first order needs β < 2H/3, which order 2 does not guarantee
        iv_first_order: implied_vol_first_order(
            &params.vol(),
            cfg.rho,
            &params.kernel(),
            cfg.k,
            t,
            beta,
        )
        .ok(),
        iv_series: variance.sqrt(),
    })
}

fn coefficients(cfg: &RunConfig) -> Outcome<EnergyCoefficients> {
    let params = cfg.model()?;
    Ok(energy_coefficients(
        &params.vol(),
        cfg.rho,
        &params.kernel(),
    )?)
}

fn asymptote(cfg: &RunConfig) -> Outcome<String> {
    let coeffs = coefficients(cfg)?;
    let mut table = Table::new(
        &cfg.hash(),
        cfg.seed,
        &[
            "t",
            "k_t",
            "log_call",
            "iv_gao_lee",
            "iv_first_order",
            "iv_series",
        ],
    );
    for &t in &cfg.t_list {
        let r = asymptote_row(cfg, &coeffs, t)?;
        table.row(&[
            fmt_num(t),
            fmt_num(r.k_t),
            fmt_num(r.log_call),
            fmt_opt(r.iv_gao_lee),
            fmt_opt(r.iv_first_order),
            fmt_num(r.iv_series),
        ]);
    }
    Ok(table.into_string())
}

fn energy_fit(cfg: &RunConfig) -> Outcome<String> {
    let params = cfg.model()?;
    let (vol, kernel) = (params.vol(), params.kernel());
    let coeffs = energy_coefficients(&vol, cfg.rho, &kernel)?;
    let minimizer = MinimizerConfig::default();
    let mut table = Table::new(
        &cfg.hash(),
        cfg.seed,
        &["x", "I_numeric", "I_taylor", "residual", "converged"],
    );
    for &x in &cfg.x_list {
        let r = minimize_rate(&vol, cfg.rho, &kernel, x, cfg.grid_size, &minimizer)?;
        let taylor = energy_taylor(&coeffs, x);
        table.row(&[
            fmt_num(x),
            fmt_num(r.value),
            fmt_num(taylor),
            fmt_num(r.value - taylor),
            r.converged.to_string(),
        ]);
    }
    Ok(table.into_string())
}

fn compare(cfg: &RunConfig) -> Outcome<String> {
    let coeffs = coefficients(cfg)?;
    // validate the asymptotic side before the expensive simulation
    let rows: Vec<AsymptoteRow> = cfg
        .t_list
        .iter()
        .map(|&t| asymptote_row(cfg, &coeffs, t))
        .collect::<Outcome<_>>()?;
    let points = simulate(cfg)?;
    let mut table = Table::new(
        &cfg.hash(),
        cfg.seed,
        &[
            "t",
            "k_t",
            "iv_mc",
            "iv_lo",
            "iv_hi",
            "iv_asym",
            "iv_series",
            "log_call",
            "gap",
            "status",
        ],
    );
    for (p, r) in points.iter().zip(&rows) {
        table.row(&[
            fmt_num(p.t),
            fmt_num(p.k_t),
            fmt_opt(p.iv_mc),
            fmt_opt(p.iv_lo),
            fmt_opt(p.iv_hi),
            fmt_num(p.iv_asym),
            fmt_num(r.iv_series),
            fmt_num(r.log_call),
            fmt_opt(p.iv_mc.map(|v| (v - p.iv_asym).abs())),
            status(p).to_string(),
        ]);
    }
    Ok(table.into_string())
}
