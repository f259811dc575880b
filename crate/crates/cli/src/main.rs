use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use latelump::checks;
use latelump::closedloop::FeedbackVariant;
use latelump::config::{ConfigError, RunConfig};
use latelump::design::{convergence_study, labelled_spectrum, normalize_orders, Design};
use latelump::simulator::{run_closed_loop, ObserverStart, PlantGrid, SimError, SimOptions};
use latelump::spectral::RootOptions;
use latelump::{GainMethod, Plant, Rect};

mod output;

use output::{Manifest, OutDir};

const DEFAULT_REGION: &str = "-60,5,-250,250";

#[derive(Parser, Debug)]
#[command(name = "latelump", version, about = "Late-lumping observer-based feedback for a boundary-controlled hyperbolic system")]
struct Cli {
    /// TOML run configuration; the built-in reference parameters when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for random test vectors.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-loop spectrum for one approximation order, with the desired spectra.
    Spectrum(SpectrumArgs),
    /// Distance to the desired spectra over several orders.
    Converge(ConvergeArgs),
    /// Closed-loop time-domain simulation.
    Simulate(SimulateArgs),
    /// Structural, oracle and end-to-end checks.
    Selftest,
}

#[derive(Args, Debug, Clone)]
struct ScanArgs {
    /// Scan rectangle `re_min,re_max,im_min,im_max`.
    #[arg(long, default_value = DEFAULT_REGION, allow_hyphen_values = true)]
    region: Rect<f64>,
    /// Grid spacing of the root scan.
    #[arg(long, default_value_t = 0.5)]
    step: f64,
    /// Newton residual tolerance.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Gain formula; the config value when omitted.
    #[arg(long)]
    method: Option<MethodArg>,
}

impl ScanArgs {
    fn options(&self) -> RootOptions<f64> {
        RootOptions::for_region(&self.region, self.step, self.step).with_tol(self.tol)
    }
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    /// Approximation order.
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[command(flatten)]
    scan: ScanArgs,
    #[arg(long, value_enum, default_value_t = VariantArg::Homogeneous)]
    variant: VariantArg,
    /// Also emit the intermediate and open-loop spectra.
    #[arg(long)]
    overlays: bool,
}

#[derive(Args, Debug)]
struct ConvergeArgs {
    /// Comma-separated orders.
    #[arg(long, value_delimiter = ',', default_value = "4,8,16")]
    orders: Vec<usize>,
    #[command(flatten)]
    scan: ScanArgs,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Duration, either in time units or as a multiple of tau (`40tau`).
    #[arg(long = "T", default_value = "40tau")]
    duration: Duration,
    /// Number of spatial cells.
    #[arg(long = "grid-N", default_value_t = 200)]
    grid_n: usize,
    #[arg(long, value_enum, default_value_t = InitialArg::Bump)]
    ic: InitialArg,
    /// Scale of the initial state.
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
    #[arg(long, value_enum, default_value_t = StartArg::Zero)]
    start: StartArg,
    #[arg(long, value_enum, default_value_t = VariantArg::Homogeneous)]
    variant: VariantArg,
    #[arg(long)]
    method: Option<MethodArg>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum MethodArg {
    Paper,
    PolePlacement,
}

impl From<MethodArg> for GainMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Paper => GainMethod::Paper,
            MethodArg::PolePlacement => GainMethod::PolePlacement,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum VariantArg {
    Homogeneous,
    Inhomogeneous,
}

impl From<VariantArg> for FeedbackVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Homogeneous => FeedbackVariant::Homogeneous,
            VariantArg::Inhomogeneous => FeedbackVariant::Inhomogeneous,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum InitialArg {
    Zero,
    Bump,
    SineVelocity,
    PlantMode,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum StartArg {
    Zero,
    Projection,
}

#[derive(Debug, Clone, Copy)]
enum Duration {
    Absolute(f64),
    Tau(f64),
}

impl Duration {
    fn seconds(self, tau: f64) -> f64 {
        match self {
            Duration::Absolute(t) => t,
            Duration::Tau(k) => k * tau,
        }
    }
}

impl FromStr for Duration {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (num, tau) = match s.strip_suffix("tau") {
            Some(head) => (head.trim(), true),
            None => (s, false),
        };
        let v: f64 = num.parse().map_err(|_| format!("not a duration: `{s}`"))?;
        if !(v.is_finite() && v > 0.0) {
            return Err(format!("duration must be positive: `{s}`"));
        }
        Ok(if tau { Duration::Tau(v) } else { Duration::Absolute(v) })
    }
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(e: ConfigError) -> Self {
        let mut message = String::from("invalid configuration:");
        for v in e.violations() {
            message.push_str("\n  - ");
            message.push_str(&v);
        }
        Failure { code: 2, message }
    }

    fn numerical(e: impl std::fmt::Display) -> Self {
        Failure {
            code: 3,
            message: format!("numerical failure: {e}"),
        }
    }

    fn io(e: impl std::fmt::Display) -> Self {
        Failure {
            code: 1,
            message: format!("i/o error: {e}"),
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<(RunConfig, String), Failure> {
    match path {
        Some(p) => Ok((RunConfig::from_path(p).map_err(Failure::config)?, p.display().to_string())),
        None => Ok((RunConfig::reference(), "builtin".into())),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("latelump: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    let (cfg, source) = load_config(cli.config.as_deref())?;
    let plant = Plant::new(cfg.params).map_err(|e| Failure::config(e.into()))?;
    let out = OutDir::create(&cli.out).map_err(Failure::io)?;
    let mut manifest = Manifest::new(&cfg, &source, cli.seed);
    let code = match &cli.command {
        Command::Spectrum(a) => spectrum(&plant, &cfg, a, &out, &mut manifest)?,
        Command::Converge(a) => converge(&plant, &cfg, a, &out, &mut manifest)?,
        Command::Simulate(a) => simulate(&plant, &cfg, a, &out, &mut manifest)?,
        Command::Selftest => selftest(&plant, cli.seed, &out, &mut manifest)?,
    };
    out.write_manifest(&manifest).map_err(Failure::io)?;
    Ok(code)
}

fn method_of(cfg: &RunConfig, m: Option<MethodArg>) -> GainMethod {
    m.map(Into::into).unwrap_or(cfg.gains.method)
}

fn spectrum(plant: &Plant, cfg: &RunConfig, a: &SpectrumArgs, out: &OutDir, man: &mut Manifest) -> Result<u8, Failure> {
    if a.n == 0 {
        return Err(Failure::numerical("order must be at least 1"));
    }
    let method = method_of(cfg, a.scan.method);
    let d = Design::build(plant, a.n, method, cfg.gains.theta_minus, a.variant.into()).map_err(Failure::numerical)?;
    let s = d.spectrum(a.scan.region, &a.scan.options()).map_err(Failure::numerical)?;
    let rows = labelled_spectrum(&d, &s, &a.scan.region, a.overlays).map_err(Failure::numerical)?;
    let name = format!("spectrum_n{}.csv", a.n);
    out.write(&name, &output::spectrum_csv(&rows)).map_err(Failure::io)?;
    out.write("plot.gp", &output::spectrum_plot(&name, &a.scan.region)).map_err(Failure::io)?;
    man.command("spectrum", serde_json::json!({
        "n": a.n,
        "modes": d.order(),
        "region": a.scan.region.to_string(),
        "step": a.scan.step,
        "tol": a.scan.tol,
        "method": method.to_string(),
        "variant": format!("{:?}", a.variant).to_lowercase(),
        "overlays": a.overlays,
    }));
    man.outputs(&[&name, "plot.gp"]);
    let absc = s.abscissa().unwrap_or(f64::NEG_INFINITY);
    println!("{} closed-loop eigenvalues, spectral abscissa {absc:.6}", s.spectrum.len());
    Ok(0)
}

fn converge(plant: &Plant, cfg: &RunConfig, a: &ConvergeArgs, out: &OutDir, man: &mut Manifest) -> Result<u8, Failure> {
    let orders = normalize_orders(&a.orders);
    if orders.is_empty() || orders[0] == 0 {
        return Err(Failure::numerical("orders must be positive"));
    }
    let method = method_of(cfg, a.scan.method);
    let rows = convergence_study(plant, &orders, method, cfg.gains.theta_minus, a.scan.region, Some(a.scan.options()))
        .map_err(Failure::numerical)?;
    out.write("convergence.csv", &output::convergence_csv(&rows)).map_err(Failure::io)?;
    out.write("plot.gp", &output::convergence_plot("convergence.csv")).map_err(Failure::io)?;
    man.command("converge", serde_json::json!({
        "orders": orders,
        "region": a.scan.region.to_string(),
        "step": a.scan.step,
        "tol": a.scan.tol,
        "method": method.to_string(),
    }));
    man.outputs(&["convergence.csv", "plot.gp"]);
    for r in &rows {
        println!("n={:<3} d_ctrl={:.6} d_obs={:.6} abscissa={:.6}", r.n, r.d_ctrl, r.d_obs, r.abscissa);
    }
    Ok(0)
}

fn simulate(plant: &Plant, cfg: &RunConfig, a: &SimulateArgs, out: &OutDir, man: &mut Manifest) -> Result<u8, Failure> {
    let method = method_of(cfg, a.method);
    let d = Design::build(plant, a.n, method, cfg.gains.theta_minus, a.variant.into()).map_err(Failure::numerical)?;
    let ics = checks::initial_conditions(plant);
    let pick = |name: &str| ics.iter().find(|(n, _)| *n == name).map(|(_, x)| x.clone());
    let x0 = match a.ic {
        InitialArg::Zero => Some(latelump::StateFunction::zero()),
        InitialArg::Bump => pick("bump"),
        InitialArg::SineVelocity => pick("sine-velocity"),
        InitialArg::PlantMode => pick("plant-mode"),
    }
    .ok_or_else(|| Failure::numerical("initial condition unavailable"))?
    .scale(a.amplitude.into());
    let p = &plant.params;
    let mut grid = PlantGrid::new(p.alpha, p.beta, p.gamma, a.grid_n).map_err(Failure::numerical)?;
    let duration = a.duration.seconds(plant.tau());
    let opts = SimOptions {
        duration,
        start: match a.start {
            StartArg::Zero => ObserverStart::Zero,
            StartArg::Projection => ObserverStart::Projection,
        },
    };
    man.command("simulate", serde_json::json!({
        "n": a.n,
        "modes": d.order(),
        "T": duration,
        "grid_N": a.grid_n,
        "dt": grid.dt,
        "ic": format!("{:?}", a.ic).to_lowercase(),
        "amplitude": a.amplitude,
        "start": format!("{:?}", a.start).to_lowercase(),
        "variant": format!("{:?}", a.variant).to_lowercase(),
        "method": method.to_string(),
    }));
    let trace = match run_closed_loop(&mut grid, &d.realization, &d.blocks, &x0, &opts) {
        Ok(t) => t,
        Err(e @ SimError::NonFinite { .. }) => {
            man.outputs(&[]);
            out.write_manifest(man).map_err(Failure::io)?;
            return Err(Failure::numerical(e));
        }
        Err(e) => return Err(Failure::numerical(e)),
    };
    out.write("trace.csv", &output::trace_csv(&trace)).map_err(Failure::io)?;
    out.write("plot.gp", &output::trace_plot("trace.csv")).map_err(Failure::io)?;
    man.outputs(&["trace.csv", "plot.gp"]);
    let last = trace.rows.last().map(|r| r.state_norm).unwrap_or(0.0);
    println!("{} samples, final state norm {last:.6e}", trace.rows.len());
    Ok(0)
}

fn selftest(plant: &Plant, seed: u64, out: &OutDir, man: &mut Manifest) -> Result<u8, Failure> {
    let results = checks::run_all(plant, seed);
    for r in &results {
        println!("{r}");
    }
    let passed = results.iter().filter(|r| r.passed).count();
    println!("{passed}/{} checks passed", results.len());
    let json = serde_json::to_string_pretty(&results).map_err(Failure::io)?;
    out.write("selftest.json", &(json + "\n")).map_err(Failure::io)?;
    man.command("selftest", serde_json::json!({ "seed": seed }));
    man.outputs(&["selftest.json"]);
    Ok(if passed == results.len() { 0 } else { 3 })
}
