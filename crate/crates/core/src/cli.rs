//! Command-line front end. Every subcommand writes CSV (or TOML for fit reports) to stdout
//! unless `--out DIR` is given.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use crate::charfn::{JointCf, OdeOptions};
use crate::cir::{simulate, write_paths_csv, Measure, SimConfig};
use crate::config::{config_hash, load_params, provenance_line};
use crate::data::{ingest, summarize, to_constant_maturity, to_log_prices, to_returns, FuturesPanel, ObservationSeries};
use crate::error::{Error, Result};
use crate::estimation::{fit, lr_tests, rank_models, write_ranking_csv, FitOptions, FitReport, ModelSpec};
use crate::kalman::{filter, smooth, write_states_csv, FilterOptions};
use crate::params::ModelParams;
use crate::pricing::{price_calendar_spread_with, price_strikes, OptionKind, PricingOptions, SpreadSpec, VanillaSpec};
use crate::seasonality::Pattern;

#[derive(Debug, Parser)]
#[command(name = "seasonvol", version, about = "Seasonal stochastic volatility for commodity futures")]
pub struct Cli {
    /// Worker threads (falls back to SEASONVOL_THREADS, then all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate variance and log-futures paths.
    Simulate(SimulateArgs),
    /// Price European options or a calendar spread.
    Price(PriceArgs),
    /// Evaluate the characteristic function of ln F(T, T_m) on a grid.
    Cf(CfArgs),
    /// Fit one model family to a futures panel.
    Estimate(EstimateArgs),
    /// Likelihood-ratio tests from three fit reports.
    Test(TestArgs),
    /// Rank fit reports by AIC.
    Rank(RankArgs),
    /// Descriptive tables of a futures panel.
    Summarize(SummarizeArgs),
    /// Filtered or smoothed states with the seasonal level alongside.
    ExportStates(ExportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MeasureArg {
    Q,
    P,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Parameter file or fit report
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long)]
    pub horizon: f64,
    #[arg(long, default_value_t = 252)]
    pub steps: usize,
    #[arg(long, default_value_t = 10)]
    pub paths: usize,
    /// Contract maturities (years), comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub maturities: Vec<f64>,
    #[arg(long, value_enum, default_value = "q")]
    pub measure: MeasureArg,
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Call,
    Put,
    Spread,
}

#[derive(Debug, Args)]
pub struct PriceArgs {
    /// Parameter file or fit report
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long, value_enum, default_value = "call")]
    pub kind: KindArg,
    #[arg(long)]
    pub expiry: f64,
    /// Futures maturity; for spreads the first (long) leg.
    #[arg(long)]
    pub maturity: f64,
    /// Second leg maturity (spreads).
    #[arg(long)]
    pub maturity2: Option<f64>,
    #[arg(long)]
    pub f0: f64,
    #[arg(long)]
    pub f0_2: Option<f64>,
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    pub strikes: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub rate: f64,
    /// Riccati grid size; defaults to 2048 for vanillas and 512 for spreads.
    #[arg(long)]
    pub ode_steps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CfArgs {
    /// Parameter file or fit report
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long)]
    pub horizon: f64,
    #[arg(long)]
    pub maturity: f64,
    #[arg(long, default_value_t = 10.0)]
    pub u_max: f64,
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    #[arg(long, default_value_t = 2048)]
    pub ode_steps: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SeriesArg {
    Returns,
    Prices,
    ConstantMaturity,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Panel CSV with columns date,slot,price,maturity.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "returns")]
    pub series: SeriesArg,
    /// Target times to maturity (years) for constant-maturity series.
    #[arg(long, value_delimiter = ',')]
    pub targets: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub pattern: Pattern,
    /// Hold λ at zero.
    #[arg(long)]
    pub no_lambda: bool,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub restarts: usize,
    #[arg(long, default_value_t = 120)]
    pub max_stages: usize,
    /// Starting parameters: a parameter file or a previous fit report. A data-driven
    /// guess otherwise.
    #[arg(long)]
    pub start: Option<PathBuf>,
    #[arg(long)]
    pub no_polish: bool,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// Seasonal fit report (free λ).
    #[arg(long)]
    pub seasonal: PathBuf,
    /// Constant-level fit report.
    #[arg(long)]
    pub constant: PathBuf,
    /// Seasonal fit report with λ = 0.
    #[arg(long)]
    pub no_lambda: PathBuf,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "panel")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Parameter file or fit report
    #[arg(long)]
    pub params: PathBuf,
    /// Filtered instead of smoothed states.
    #[arg(long)]
    pub filtered: bool,
}

/// Exit code for an error: 1 configuration or input, 2 numerical, 3 non-convergence.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numerical { .. } => 2,
        Error::NonConvergence(_) => 3,
        _ => 1,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Constraint(_) => "constraint",
        Error::Domain(_) => "domain",
        Error::Contract(_) => "contract",
        Error::Numerical { .. } => "numerical",
        Error::NonConvergence(_) => "non_convergence",
        Error::Config(_) => "config",
        Error::Data { .. } => "data",
        Error::Io(_) => "io",
        Error::Csv(_) => "csv",
    }
}

/// Machine-readable one-line error description.
pub fn error_line(e: &Error) -> String {
    let msg = e.to_string().replace('"', "'");
    format!("error kind={} code={} message=\"{msg}\"", error_kind(e), exit_code(e))
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            exit_code(&e)
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var("SEASONVOL_THREADS") {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("SEASONVOL_THREADS must be a positive integer, got '{s}'"))),
        Err(_) => Ok(None),
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    match thread_count(cli.threads)? {
        Some(0) => Err(Error::Config("thread count must be >= 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(|| dispatch(cli)),
        None => dispatch(cli),
    }
}

/// Where a subcommand's artifacts go.
struct Sink<'a> {
    dir: Option<&'a Path>,
}

impl Sink<'_> {
    fn open(&self, name: &str) -> Result<Box<dyn Write>> {
        match self.dir {
            Some(d) => {
                std::fs::create_dir_all(d)?;
                Ok(Box::new(BufWriter::new(File::create(d.join(name))?)))
            }
            None => Ok(Box::new(io::stdout().lock())),
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let sink = Sink { dir: cli.out.as_deref() };
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, &sink),
        Command::Price(a) => cmd_price(a, &sink),
        Command::Cf(a) => cmd_cf(a, &sink),
        Command::Estimate(a) => cmd_estimate(a, &sink),
        Command::Test(a) => cmd_test(a, &sink),
        Command::Rank(a) => cmd_rank(a, &sink),
        Command::Summarize(a) => cmd_summarize(a, &sink),
        Command::ExportStates(a) => cmd_export(a, &sink),
    }
}

fn read_file(p: &Path) -> Result<Vec<u8>> {
    std::fs::read(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))
}

fn cmd_simulate(a: &SimulateArgs, sink: &Sink) -> Result<()> {
    let params = load_model(&a.params)?;
    let raw = read_file(&a.params)?;
    let desc = format!("{a:?}");
    let hash = config_hash(&[&raw, desc.as_bytes()]);
    let cfg = SimConfig {
        horizon: a.horizon,
        steps: a.steps,
        n_paths: a.paths,
        measure: match a.measure {
            MeasureArg::Q => Measure::RiskNeutral,
            MeasureArg::P => Measure::Physical,
        },
        seed: a.seed,
    };
    let paths = simulate(&params.factors, &a.maturities, &vec![0.0; a.maturities.len()], &cfg)?;
    let mut w = sink.open("paths.csv")?;
    writeln!(w, "{}", provenance_line(a.seed, &hash))?;
    write_paths_csv(&mut w, &paths)?;
    w.flush()?;
    Ok(())
}

fn cmd_price(a: &PriceArgs, sink: &Sink) -> Result<()> {
    let params = load_model(&a.params)?;
    let mut opts = PricingOptions::default();
    if let Some(steps) = a.ode_steps {
        opts.ode = OdeOptions { steps };
        opts.spread_ode = OdeOptions { steps };
    }
    let mut w = csv::Writer::from_writer(sink.open("prices.csv")?);
    match a.kind {
        KindArg::Call | KindArg::Put => {
            let spec = VanillaSpec {
                strike: a.strikes[0],
                expiry: a.expiry,
                maturity: a.maturity,
                rate: a.rate,
                kind: if matches!(a.kind, KindArg::Call) { OptionKind::Call } else { OptionKind::Put },
            };
            let prices = price_strikes(&spec, &a.strikes, &params.factors, a.f0, &opts)?;
            w.write_record(["kind", "strike", "expiry", "maturity", "price"])?;
            for (k, p) in a.strikes.iter().zip(prices) {
                w.write_record([
                    format!("{:?}", spec.kind).to_lowercase(),
                    k.to_string(),
                    a.expiry.to_string(),
                    a.maturity.to_string(),
                    format!("{p:.10}"),
                ])?;
            }
        }
        KindArg::Spread => {
            let (m2, f2) = match (a.maturity2, a.f0_2) {
                (Some(m), Some(f)) => (m, f),
                _ => return Err(Error::Config("spreads need --maturity2 and --f0-2".into())),
            };
            w.write_record(["kind", "strike", "expiry", "maturity", "maturity2", "price", "method", "std_error"])?;
            for &k in &a.strikes {
                let spec = SpreadSpec {
                    strike: k,
                    expiry: a.expiry,
                    maturities: [a.maturity, m2],
                    rate: a.rate,
                };
                let p = price_calendar_spread_with(&spec, &params.factors, a.f0, f2, &opts)?;
                w.write_record([
                    "spread".to_string(),
                    k.to_string(),
                    a.expiry.to_string(),
                    a.maturity.to_string(),
                    m2.to_string(),
                    format!("{:.10}", p.price),
                    format!("{:?}", p.method).to_lowercase(),
                    p.std_error.map_or_else(String::new, |s| format!("{s:.10}")),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_cf(a: &CfArgs, sink: &Sink) -> Result<()> {
    let params = load_model(&a.params)?;
    if a.points < 2 {
        return Err(Error::Config("--points must be >= 2".into()));
    }
    let engine = JointCf::new(&params.factors, a.horizon, [a.maturity, a.maturity], OdeOptions { steps: a.ode_steps })?;
    let zero = Complex64::new(0.0, 0.0);
    let mut w = csv::Writer::from_writer(sink.open("cf.csv")?);
    w.write_record(["u", "re", "im", "abs"])?;
    for i in 0..a.points {
        let u = a.u_max * i as f64 / (a.points - 1) as f64;
        let phi = engine.eval([Complex64::new(u, 0.0), zero])?;
        w.write_record([u.to_string(), format!("{:.12e}", phi.re), format!("{:.12e}", phi.im), format!("{:.12e}", phi.norm())])?;
    }
    w.flush()?;
    Ok(())
}

fn load_series(d: &DataArgs) -> Result<(FuturesPanel, ObservationSeries)> {
    let panel = ingest(&d.data)?;
    let series = match d.series {
        SeriesArg::Returns => to_returns(&panel)?,
        SeriesArg::Prices => to_log_prices(&panel)?,
        SeriesArg::ConstantMaturity => {
            if d.targets.is_empty() {
                return Err(Error::Config("constant-maturity series need --targets".into()));
            }
            to_constant_maturity(&panel, &d.targets)?
        }
    };
    for w in &series.warnings {
        eprintln!("warning: {w}");
    }
    Ok((panel, series))
}

fn cmd_estimate(a: &EstimateArgs, sink: &Sink) -> Result<()> {
    let (_, series) = load_series(&a.data)?;
    let mut spec = ModelSpec::new(a.pattern, series.n_series());
    if a.no_lambda {
        spec = spec.without_lambda();
    }
    let mut opts = FitOptions::default();
    opts.anneal.seed = a.seed;
    opts.anneal.restarts = a.restarts;
    opts.anneal.max_stages = a.max_stages;
    opts.anneal.polish = !a.no_polish;
    if let Some(p) = &a.start {
        opts.start = Some(load_model(p)?);
    }
    let report = fit(&series, &spec, &opts)?;
    let raw = read_file(&a.data.data)?;
    let desc = format!("{a:?}");
    let hash = config_hash(&[&raw, desc.as_bytes()]);
    let mut w = sink.open("report.toml")?;
    writeln!(w, "{}", provenance_line(a.seed, &hash))?;
    w.write_all(report.to_toml()?.as_bytes())?;
    w.flush()?;
    if sink.dir.is_some() {
        report.write_estimates_csv(sink.open("estimates.csv")?)?;
    }
    Ok(())
}

/// Model parameters from a parameter file or from the parameters of a fit report.
fn load_model(p: &Path) -> Result<ModelParams> {
    load_params(p).or_else(|e| match load_report(p).ok().and_then(|r| r.params) {
        Some(params) => Ok(params),
        None => Err(e),
    })
}

fn load_report(p: &Path) -> Result<FitReport> {
    let text = String::from_utf8(read_file(p)?).map_err(|e| Error::Config(e.to_string()))?;
    FitReport::from_toml(&text)
}

fn cmd_test(a: &TestArgs, sink: &Sink) -> Result<()> {
    let s = load_report(&a.seasonal)?;
    let c = load_report(&a.constant)?;
    let n = load_report(&a.no_lambda)?;
    let t = lr_tests(&s, &c, &n)?;
    let mut w = csv::Writer::from_writer(sink.open("lr_tests.csv")?);
    w.write_record(["model", "LL", "LL w/o lambda", "D1", "p-value (D1)", "D2", "p-value (D2)"])?;
    w.write_record([
        s.model.clone(),
        format!("{:.2}", s.loglik),
        format!("{:.2}", n.loglik),
        format!("{:.2}", t.seasonality.statistic),
        format!("{:.4}", t.seasonality.p_value),
        format!("{:.2}", t.samuelson.statistic),
        format!("{:.4}", t.samuelson.p_value),
    ])?;
    w.flush()?;
    Ok(())
}

fn cmd_rank(a: &RankArgs, sink: &Sink) -> Result<()> {
    let reports = a.reports.iter().map(|p| load_report(p)).collect::<Result<Vec<_>>>()?;
    let dates: Vec<usize> = reports.iter().map(|r| r.n_dates).collect();
    if dates.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::Contract("reports come from panels of different length".into()));
    }
    write_ranking_csv(sink.open("ranking.csv")?, &rank_models(&reports))
}

fn cmd_summarize(a: &SummarizeArgs, sink: &Sink) -> Result<()> {
    let panel = ingest(&a.data)?;
    let s = summarize(&panel, &a.name)?;
    s.write_description(sink.open("description.csv")?)?;
    if sink.dir.is_none() {
        println!();
    }
    s.write_slot_vols(sink.open("slot_vols.csv")?)?;
    if sink.dir.is_none() {
        println!();
    }
    s.write_month_vols(sink.open("month_vols.csv")?)?;
    Ok(())
}

fn cmd_export(a: &ExportArgs, sink: &Sink) -> Result<()> {
    let (_, series) = load_series(&a.data)?;
    let params = load_model(&a.params)?;
    let out = filter(&series, &params, &FilterOptions::default())?;
    let means = if a.filtered {
        out.steps.iter().map(|s| s.filtered_mean.clone()).collect()
    } else {
        smooth(&out)?.means
    };
    write_states_csv(sink.open("states.csv")?, &series, &params, &means, 0)
}
