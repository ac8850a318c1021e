//! `contra`: analyze study tables, run threshold tests, draw contra plots and
//! serve the HTTP API.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input or arguments,
//! 3 internal error.

use std::fs;
use std::io::{self, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use contra_core::analysis::{DEFAULT_SAMPLES, MIN_SAMPLES};
use contra_core::data::PLAQUE_ROW_24_NOTE;
use contra_core::render::{
    render_contra_plot, render_supplement_table, Column, PlotOptions, TableFormat,
};
use contra_core::report::{entries_csv, Precision, Report};
use contra_core::{
    analyze, bundled_dataset, parse_csv, validate_dataset, AnalysisConfig, AnalysisResult, Dataset,
    SignView, ThresholdSpec,
};
use contra_service::{AppState, ServeOptions};
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Invalid(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Invalid(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<contra_core::Error> for CliError {
    fn from(e: contra_core::Error) -> Self {
        use contra_core::Error::*;
        match e {
            Render(_) => CliError::Internal(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "contra",
    version,
    about = "Contra-analysis of two-group study tables"
)]
struct Cli {
    /// Worker threads for per-study sampling (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Credible intervals, scores and ranks for every study.
    Analyze(AnalyzeArgs),
    /// Studies whose interval lies entirely beyond a threshold.
    Test(TestArgs),
    /// Contra plot as SVG.
    Plot(PlotArgs),
    /// Check a study table and report problems.
    Validate(InputArgs),
    /// Run the HTTP API.
    Serve(ServeArgs),
}

#[derive(Args, Clone)]
#[group(required = true, multiple = false)]
struct InputArgs {
    /// Bundled dataset: tpc or plaque.
    #[arg(long)]
    dataset: Option<String>,
    /// Study table as CSV.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct RunArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Posterior draws per study.
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    /// Global seed; a random one is drawn and printed when absent.
    #[arg(long)]
    seed: Option<u64>,
    /// Keep only one sign of effect (null results appear in both).
    #[arg(long, value_parser = parse_sign)]
    sign: Option<SignView>,
    /// Write here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Emit numbers at full precision instead of six significant digits.
    #[arg(long)]
    full_precision: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Svg,
    Json,
    Csv,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(flatten)]
    plot: PlotStyle,
}

#[derive(Clone, Copy, ValueEnum)]
enum TestFormat {
    Text,
    Json,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Minimum meaningful effect as a signed fraction, e.g. -0.10 or 0.5.
    #[arg(long, allow_hyphen_values = true)]
    threshold: f64,
    #[arg(long, value_enum, default_value_t = TestFormat::Text)]
    format: TestFormat,
}

#[derive(Args, Clone)]
struct PlotStyle {
    /// Illustrative threshold line.
    #[arg(long, allow_hyphen_values = true)]
    threshold: Option<f64>,
    /// Comma-separated metadata columns, e.g. id,study,species.
    #[arg(long, value_delimiter = ',')]
    columns: Option<Vec<String>>,
    /// Decimal places of the Ls% column.
    #[arg(long, default_value_t = 0)]
    percent_decimals: usize,
    /// Also write the full metadata table (CSV, or HTML for a .html path).
    #[arg(long)]
    supplement: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    style: PlotStyle,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    /// Static UI bundle served at `/`.
    #[arg(long)]
    static_dir: Option<PathBuf>,
    /// Allowed CORS origin (any when absent).
    #[arg(long)]
    cors_origin: Option<String>,
}

fn parse_sign(s: &str) -> Result<SignView, String> {
    s.parse().map_err(|e: contra_core::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    let outcome = match cli.command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Test(a) => cmd_test(a),
        Command::Plot(a) => cmd_plot(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Serve(a) => cmd_serve(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn load(input: &InputArgs) -> CliResult<Dataset> {
    match (&input.dataset, &input.input) {
        (Some(name), _) => Ok(bundled_dataset(name)?),
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
            let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("input");
            parse_csv(name, &text).map_err(|r| CliError::Invalid(r.to_string()))
        }
        (None, None) => Err(CliError::Invalid(
            "one of --dataset or --input is required".into(),
        )),
    }
}

fn write_output(path: Option<&Path>, text: &str) -> CliResult {
    match path {
        Some(p) => fs::write(p, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
        None => io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(e.to_string())),
    }
}

fn run(args: &RunArgs) -> CliResult<AnalysisResult> {
    if args.samples < MIN_SAMPLES {
        return Err(CliError::Invalid(format!(
            "K below minimum: --samples {} is less than {MIN_SAMPLES}",
            args.samples
        )));
    }
    let dataset = load(&args.input)?;
    let seed = args.seed.unwrap_or_else(|| {
        let s = rand::random();
        eprintln!("seed: {s}");
        s
    });
    let mut config = AnalysisConfig::new(args.samples, seed);
    config.sign_view = args.sign;
    let result = analyze(&dataset, &config)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    Ok(result)
}

fn precision(args: &RunArgs) -> Precision {
    if args.full_precision {
        Precision::Full
    } else {
        Precision::Significant6
    }
}

fn cmd_analyze(args: AnalyzeArgs) -> CliResult {
    let result = run(&args.run)?;
    let text = match args.format {
        Format::Json => Report::new(&result, precision(&args.run)).to_json(),
        Format::Csv => entries_csv(&result, precision(&args.run)),
        Format::Svg => plot(&result, args.run.sign, &args.plot)?,
    };
    write_output(args.run.output.as_deref(), &text)
}

#[derive(Serialize)]
struct Passing {
    id: u32,
    rank: usize,
    delta_l: f64,
}

#[derive(Serialize)]
struct TestReport {
    dataset: String,
    seed: u64,
    samples: usize,
    sign: SignView,
    threshold: f64,
    passing: Vec<Passing>,
}

fn cmd_test(args: TestArgs) -> CliResult {
    let threshold = ThresholdSpec::from_signed(args.threshold)?;
    let sign = if args.threshold < 0.0 {
        SignView::Decrease
    } else {
        SignView::Increase
    };
    if let Some(s) = args.run.sign {
        if s != sign {
            return Err(CliError::Invalid(format!(
                "threshold {} does not match --sign {s}",
                args.threshold
            )));
        }
    }
    let mut run_args = args.run.clone();
    run_args.sign = Some(sign);
    let result = run(&run_args)?;
    let p = precision(&args.run);
    let passing: Vec<Passing> = result
        .passing(&threshold)
        .into_iter()
        .map(|e| Passing {
            id: e.record.id,
            rank: e.rank,
            delta_l: p.apply(e.delta_l),
        })
        .collect();
    let text = match args.format {
        TestFormat::Json => {
            let report = TestReport {
                dataset: result.dataset.clone(),
                seed: result.seed,
                samples: result.samples,
                sign,
                threshold: args.threshold,
                passing,
            };
            let mut s = serde_json::to_string_pretty(&report)
                .map_err(|e| CliError::Internal(e.to_string()))?;
            s.push('\n');
            s
        }
        TestFormat::Text => {
            let mut s = format!(
                "# {} {sign} threshold {} samples {} seed {}: {} of {} studies pass\nid\trank\tdelta_l\n",
                result.dataset,
                args.threshold,
                result.samples,
                result.seed,
                passing.len(),
                result.entries.len()
            );
            for p in &passing {
                s.push_str(&format!("{}\t{}\t{}\n", p.id, p.rank, p.delta_l));
            }
            s
        }
    };
    write_output(args.run.output.as_deref(), &text)
}

fn plot(result: &AnalysisResult, sign: Option<SignView>, style: &PlotStyle) -> CliResult<String> {
    let view = sign.unwrap_or(SignView::Decrease);
    let shown = if result.sign_view == Some(view) {
        result.clone()
    } else {
        result.view(view)
    };
    let mut opts = PlotOptions::new(view);
    opts.threshold = style.threshold;
    opts.percent_format = style.percent_decimals;
    if let Some(cols) = &style.columns {
        opts.columns = cols
            .iter()
            .map(|c| c.parse::<Column>())
            .collect::<Result<_, _>>()?;
    }
    if shown.entries.is_empty() {
        return Err(CliError::Invalid(format!("no studies in the {view} view")));
    }
    let svg = render_contra_plot(&shown.entries, &opts).map_err(|e| match e {
        contra_core::Error::Render(m) => CliError::Invalid(m),
        other => other.into(),
    })?;
    if let Some(path) = &style.supplement {
        let html = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("html") || e.eq_ignore_ascii_case("htm"));
        let table = render_supplement_table(
            &shown.entries,
            if html {
                TableFormat::Html
            } else {
                TableFormat::Csv
            },
        );
        write_output(Some(path), &table)?;
    }
    Ok(svg)
}

fn cmd_plot(args: PlotArgs) -> CliResult {
    let result = run(&args.run)?;
    let svg = plot(&result, args.run.sign, &args.style)?;
    write_output(args.run.output.as_deref(), &svg)
}

fn cmd_validate(args: InputArgs) -> CliResult {
    let dataset = load(&args)?;
    if args.dataset.as_deref() == Some("plaque") {
        eprintln!("note: {PLAQUE_ROW_24_NOTE}");
    }
    for w in validate_dataset(&dataset) {
        println!("warning: {w}");
    }
    println!("ok: {} records, 0 errors", dataset.len());
    Ok(())
}

fn cmd_serve(args: ServeArgs) -> CliResult {
    let addr = SocketAddr::new(args.host, args.port);
    let opts = ServeOptions {
        cors_origin: args.cors_origin,
        static_dir: args.static_dir,
    };
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Internal(e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| CliError::Io(format!("cannot bind {addr}: {e}")))?;
        let local = listener
            .local_addr()
            .map_err(|e| CliError::Io(e.to_string()))?;
        eprintln!("listening on http://{local}");
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        contra_service::serve(listener, AppState::bundled(), opts, shutdown)
            .await
            .map_err(|e| CliError::Io(e.to_string()))
    })
}
