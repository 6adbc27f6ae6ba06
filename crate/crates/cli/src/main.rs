use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use hetcache::bounds::full_report;
use hetcache::optimizer::{optimize_x_avg, worst_alpha, XSearch};
use hetcache::ratecalc::{
    peak_reports, scheme1_peak, scheme2_rate, scheme3_peak, uniform_avg_report, DemandAverages, RateReport, ReportKind,
};
use hetcache::sweep::{self, SweepSpec};
use hetcache::{AvgMode, DemandProfile, Error, Scheme, SystemConfig};

mod verify;

#[derive(Parser)]
#[command(
    name = "hetcache",
    version,
    about = "Coded caching rates for heterogeneous user classes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Peak rates, cut-set bound and optional averages for one configuration.
    Rate(RateArgs),
    /// Rates over a range of cache sizes or class counts.
    Sweep(SweepArgs),
    /// Run the built-in consistency suites and print a JSON summary.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct AvgArgs {
    /// Also compute uniform-demand averages.
    #[arg(long)]
    avg: bool,
    /// Average by enumerating every demand vector.
    #[arg(long, conflicts_with = "mc")]
    exact: bool,
    /// Average over N sampled demand vectors.
    #[arg(long, value_name = "N")]
    mc: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl AvgArgs {
    fn mode(&self) -> Result<Option<AvgMode>, CliError> {
        if !self.avg {
            if self.exact || self.mc.is_some() {
                return Err(CliError::Usage("--exact and --mc require --avg".into()));
            }
            return Ok(None);
        }
        Ok(Some(match (self.exact, self.mc) {
            (true, _) => AvgMode::Exact,
            (false, Some(0)) => return Err(CliError::Usage("--mc needs at least one sample".into())),
            (false, Some(samples)) => AvgMode::MonteCarlo {
                samples,
                seed: self.seed,
            },
            (false, None) => AvgMode::Occupancy,
        }))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct RateArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[command(flatten)]
    avg: AvgArgs,
    /// Report a single scheme (1, 2 or 3).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    scheme: Option<u8>,
    /// Cache split for Scheme 2.
    #[arg(long, requires = "scheme")]
    x: Option<f64>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// `M:start:stop:step` or `G:g1,g2,...`.
    #[arg(long, value_name = "SPEC")]
    sweep: String,
    #[command(flatten)]
    avg: AvgArgs,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Random cases per randomized suite.
    #[arg(long, default_value_t = 300)]
    trials: usize,
    /// Drop one message from every delivery before decoding.
    #[arg(long)]
    mutate_delivery: bool,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Compute(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Compute(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig { .. } | Error::InvalidProfile(_) | Error::Parse { .. } => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Compute(other.to_string()),
        }
    }
}

fn load_config(path: &Path) -> Result<SystemConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let cfg = SystemConfig::from_json_str(&text)?;
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Compute(e.to_string())),
    }
}

fn kind_label(kind: ReportKind) -> String {
    match kind {
        ReportKind::Scheme(s) => format!("scheme{}", s.number()),
        ReportKind::Oracle => "oracle".into(),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn reports_csv(reports: &[RateReport], cutset: f64) -> String {
    let mut s = String::from("kind,x,peak,avg,std_err\n");
    for r in reports {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            kind_label(r.kind),
            opt(r.x),
            opt(r.peak),
            opt(r.avg.map(|a| a.mean)),
            opt(r.avg.and_then(|a| a.std_err))
        ));
    }
    s.push_str(&format!("cutset,,{cutset},,\n"));
    s
}

fn cmd_rate(args: &RateArgs) -> Result<String, CliError> {
    let cfg = load_config(&args.config)?;
    let mode = args.avg.mode()?;
    let search = XSearch::default();
    if let Some(n) = args.scheme {
        return single_scheme(
            &cfg,
            Scheme::from_number(n).expect("range checked"),
            args.x,
            mode,
            args.format,
        );
    }
    let bound = full_report(&cfg, &search);
    let reports = match mode {
        Some(m) => uniform_avg_report(&cfg, m)?,
        None => peak_reports(&cfg, &search),
    };
    Ok(match args.format {
        Format::Csv => reports_csv(&reports, bound.bound_value),
        Format::Json => {
            let mut v = json!({
                "config": cfg,
                "warnings": cfg.warnings(),
                "peak_optimal": peak_reports(&cfg, &search),
                "cutset": bound,
            });
            if let Some(m) = mode {
                v["average"] = json!({ "mode": m.label(), "reports": reports });
            }
            serde_json::to_string_pretty(&v).expect("report serializes") + "\n"
        }
    })
}

fn single_scheme(
    cfg: &SystemConfig,
    scheme: Scheme,
    x: Option<f64>,
    mode: Option<AvgMode>,
    format: Format,
) -> Result<String, CliError> {
    if x.is_some() && scheme != Scheme::Split {
        return Err(CliError::Usage("--x applies to scheme 2 only".into()));
    }
    if let Some(x) = x {
        if !(0.0..=1.0).contains(&x) {
            return Err(CliError::Usage(format!("--x must lie in [0, 1], got {x}")));
        }
    }
    let averages = match mode {
        Some(m) => Some(DemandAverages::new(&DemandProfile::uniform(cfg), m)?),
        None => None,
    };
    let mut v = json!({ "config": cfg, "scheme": scheme.number() });
    match scheme {
        Scheme::AllCommon => {
            v["peak"] = json!(scheme1_peak(cfg));
            v["avg"] = json!(averages.map(|a| a.scheme1()));
        }
        Scheme::AllUnique => {
            v["peak"] = json!(scheme3_peak(cfg));
            v["avg"] = json!(averages.map(|a| a.scheme3()));
        }
        Scheme::Split => {
            let x = match x {
                Some(x) => x,
                None => hetcache::optimizer::optimize_x_peak(cfg).x_star,
            };
            let (alpha, peak) = worst_alpha(cfg, x);
            v["x"] = json!(x);
            v["peak"] = json!(peak);
            v["worst_alpha"] = json!(alpha);
            v["breakdown"] = json!(scheme2_rate(cfg, x, alpha));
            v["avg"] = json!(averages.as_ref().map(|a| a.scheme2(x)));
            if let Some(m) = mode {
                let split = optimize_x_avg(&DemandProfile::uniform(cfg), m)?;
                v["avg_optimal"] = json!(split);
            }
        }
    }
    if let Some(m) = mode {
        v["mode"] = json!(m.label());
    }
    Ok(match format {
        Format::Json => serde_json::to_string_pretty(&v).expect("report serializes") + "\n",
        Format::Csv => {
            let field = |k: &str| v.get(k).and_then(|x| x.as_f64());
            let avg = v.get("avg").and_then(|a| a.get("mean")).and_then(|m| m.as_f64());
            let se = v.get("avg").and_then(|a| a.get("std_err")).and_then(|m| m.as_f64());
            format!(
                "kind,x,peak,avg,std_err\nscheme{},{},{},{},{}\n",
                scheme.number(),
                opt(field("x")),
                opt(field("peak")),
                opt(avg),
                opt(se)
            )
        }
    })
}

fn cmd_sweep(args: &SweepArgs) -> Result<String, CliError> {
    let cfg = load_config(&args.config)?;
    let spec = SweepSpec::parse(&args.sweep)?;
    let mode = args.avg.mode()?;
    let rows = sweep::run(&cfg, &spec, mode, &XSearch::default());
    Ok(match args.format {
        Format::Csv => sweep::to_csv(&rows),
        Format::Json => sweep::to_json(&rows),
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Rate(a) => emit(a.out.as_deref(), &cmd_rate(&a)?),
        Command::Sweep(a) => emit(a.out.as_deref(), &cmd_sweep(&a)?),
        Command::Verify(a) => {
            let summary = verify::run(a.seed, a.trials, a.mutate_delivery);
            let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
            emit(a.out.as_deref(), &text)?;
            match summary.first_failure() {
                None => Ok(()),
                Some((suite, example)) => Err(CliError::Compute(format!("suite {suite} failed: {example}"))),
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Usage(m) | CliError::Compute(m) => eprintln!("error: {m}"),
            }
            ExitCode::from(e.code())
        }
    }
}
