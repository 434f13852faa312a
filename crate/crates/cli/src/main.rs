//! Command-line interface: ingest a CSV series, run the classical and
//! relevant change-point tests, locate breaks, select bandwidths, simulate
//! the study models and reproduce the simulation study.
//!
//! Exit codes: 0 completed (whatever the test decided), 2 usage error,
//! 3 data error.

// Guards of the form `!(x > 0.0)` deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod ingest;
mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use secondchange::bandwidth::{gcv_select, gcv_select_variance, mv_default_grid, mv_select};
use secondchange::cusum::{
    classical_correlation_test, classical_variance_test, cusum_variance_statistic, BootstrapConfig,
    CorrelationTestSettings, VarianceTestSettings, DEFAULT_ZETA,
};
use secondchange::kernel::{KernelId, KernelSpec};
use secondchange::montecarlo::{run_study, BandwidthRule, StudyConfig, TestKind};
use secondchange::relevant::{
    correlation_cp_argmax, relevant_correlation_test, relevant_variance_test, variance_cp_argmax,
    RelevantTestSettings,
};
use secondchange::report::ChangePointSummary;
use secondchange::sim::{simulate, ModelId, PlsModelSpec};
use secondchange::smoothing::{
    clamp_piecewise_bandwidth, local_linear_fit, residuals, variance_break_locate,
    variance_fit_piecewise, VarianceVariant,
};
use secondchange::TimeSeries;

use ingest::ingest;
use output::{
    envelope_to_tsv, study_to_tsv, to_json, write_output, DeltaCurvePoint, Provenance,
    ReportEnvelope, StudyEnvelope, SCHEMA_VERSION,
};

// ---------------------------------------------------------------------------
// Errors and exit codes
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct CliError {
    usage: bool,
    message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            usage: true,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            usage: false,
            message: message.into(),
        }
    }

    fn code(&self) -> i32 {
        if self.usage {
            2
        } else {
            3
        }
    }
}

fn data_err(e: secondchange::Error) -> CliError {
    CliError::data(e.to_string())
}

// ---------------------------------------------------------------------------
// Argument groups
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Tsv,
}

#[derive(Debug, Args)]
struct IoArgs {
    /// CSV file with a header row; observations in time order.
    #[arg(long)]
    input: PathBuf,
    /// Column name, or zero-based column index.
    #[arg(long, default_value = "0")]
    column: String,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Worker threads; results do not depend on this.
    #[arg(long, env = "SECONDCHANGE_THREADS")]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct BootstrapArgs {
    /// Bootstrap replicates.
    #[arg(long = "B", default_value_t = 2000)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Block window m; floor(n^(1/3)) when omitted.
    #[arg(long = "window-m")]
    window_m: Option<usize>,
    /// Test levels.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.05, 0.10])]
    alpha: Vec<f64>,
}

impl BootstrapArgs {
    fn to_config(&self) -> Result<BootstrapConfig, CliError> {
        for &a in &self.alpha {
            if !(a > 0.0 && a < 1.0) {
                return Err(CliError::usage(format!("--alpha {a} must lie in (0, 1)")));
            }
        }
        if self.alpha.is_empty() {
            return Err(CliError::usage("--alpha needs at least one level"));
        }
        Ok(BootstrapConfig {
            window: self.window_m,
            replicates: self.replicates,
            seed: self.seed,
            alphas: self.alpha.clone(),
        })
    }
}

#[derive(Debug, Args)]
struct LocatorArgs {
    /// Window of the variance-break locator; floor(n^(1/3)) when omitted.
    #[arg(long = "L")]
    locator_window: Option<usize>,
    /// Trim fraction of the locator search range.
    #[arg(long, default_value_t = DEFAULT_ZETA)]
    zeta: f64,
}

#[derive(Debug, Clone, Copy)]
enum Source {
    Mv,
    Gcv,
    Fixed(f64),
}

impl Source {
    fn parse(s: &str, flag: &str) -> Result<Self, CliError> {
        match s.to_ascii_lowercase().as_str() {
            "mv" => Ok(Source::Mv),
            "gcv" | "cv" => Ok(Source::Gcv),
            other => other.parse::<f64>().map(Source::Fixed).map_err(|_| {
                CliError::usage(format!("{flag} must be mv, gcv or a number, got '{s}'"))
            }),
        }
    }

    fn label(&self) -> String {
        match self {
            Source::Mv => "mv".into(),
            Source::Gcv => "gcv".into(),
            Source::Fixed(_) => "fixed".into(),
        }
    }

    fn to_rule(self) -> BandwidthRule {
        match self {
            Source::Mv => BandwidthRule::MinimalVolatility,
            Source::Gcv => BandwidthRule::CrossValidation,
            Source::Fixed(b) => BandwidthRule::Fixed(b),
        }
    }
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "secondchange",
    version,
    about = "Change-point tests for the variance and lag-k correlation of non-stationary time series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classical test of a constant variance.
    TestVariance {
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        bootstrap: BootstrapArgs,
        /// Mean bandwidth: mv, gcv or a number.
        #[arg(long, default_value = "mv")]
        bandwidth: String,
    },
    /// Classical test of a constant lag-k correlation.
    TestCorrelation {
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        bootstrap: BootstrapArgs,
        #[command(flatten)]
        locator: LocatorArgs,
        #[arg(long, default_value_t = 1)]
        lag: usize,
        /// Mean bandwidth: mv, gcv or a number.
        #[arg(long, default_value = "gcv")]
        bandwidth: String,
        /// Variance bandwidth: gcv or a number.
        #[arg(long = "variance-bandwidth", default_value = "gcv")]
        variance_bandwidth: String,
        /// Use the single smooth variance fit (no variance break assumed).
        #[arg(long)]
        assume_no_variance_break: bool,
    },
    /// Relevant-change test for the variance: H0 |jump| <= delta.
    TestRelevantVariance {
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        bootstrap: BootstrapArgs,
        /// Relevance margin(s); several values emit a delta/p-value curve.
        #[arg(long, value_delimiter = ',', required = true)]
        delta: Vec<f64>,
        #[arg(long, default_value = "mv")]
        bandwidth: String,
    },
    /// Relevant-change test for the lag-k correlation.
    TestRelevantCorrelation {
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        bootstrap: BootstrapArgs,
        #[command(flatten)]
        locator: LocatorArgs,
        #[arg(long, default_value_t = 1)]
        lag: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        delta: Vec<f64>,
        #[arg(long, default_value = "gcv")]
        bandwidth: String,
        #[arg(long = "variance-bandwidth", default_value = "gcv")]
        variance_bandwidth: String,
        #[arg(long)]
        assume_no_variance_break: bool,
    },
    /// Report all change-point locators without running a test.
    Locate {
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        locator: LocatorArgs,
        /// Also locate the lag-k correlation break.
        #[arg(long)]
        lag: Option<usize>,
        #[arg(long, default_value = "gcv")]
        bandwidth: String,
        #[arg(long = "variance-bandwidth", default_value = "gcv")]
        variance_bandwidth: String,
    },
    /// Data-driven bandwidth selection.
    Bandwidth {
        #[command(flatten)]
        io: IoArgs,
        /// mv (statistic volatility) or gcv (cross validation).
        #[arg(long, default_value = "mv")]
        method: String,
        /// mean or variance smoother (gcv only).
        #[arg(long, default_value = "mean")]
        target: String,
        /// Mean bandwidth used to form residuals for --target variance.
        #[arg(long, default_value = "gcv")]
        bandwidth: String,
    },
    /// Draw one path of a study model and write it as CSV.
    Simulate {
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Level parameter of the primed models.
        #[arg(long)]
        lambda: Option<f64>,
        /// Omit the quadratic trend.
        #[arg(long)]
        no_mean: bool,
        /// Retained terms of the moving-average filters.
        #[arg(long, default_value_t = 100)]
        ma_truncation: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo rejection rates of a test on a study model.
    Simstudy {
        #[arg(long)]
        model: String,
        #[arg(long)]
        test: Option<String>,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 2000)]
        runs: usize,
        #[arg(long = "B", default_value_t = 2000)]
        replicates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        lambda: Option<f64>,
        /// Relevance margin for the relevant tests.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, default_value_t = 1)]
        lag: usize,
        /// Mean bandwidth rule: mv, gcv or a number.
        #[arg(long)]
        bandwidth: Option<String>,
        #[arg(long = "variance-bandwidth", default_value = "gcv")]
        variance_bandwidth: String,
        #[arg(long = "window-m")]
        window_m: Option<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.05, 0.10])]
        alpha: Vec<f64>,
        #[arg(long)]
        no_mean: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long, env = "SECONDCHANGE_THREADS")]
        threads: Option<usize>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code());
    }
}

fn init_threads(threads: Option<usize>) -> Result<(), CliError> {
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::data(format!("thread pool: {e}")))?;
    }
    Ok(())
}

/// Mean bandwidth from its source; the label goes into the report.
fn resolve_mean_bandwidth(
    series: &TimeSeries,
    source: Source,
    kernel: &KernelSpec,
) -> Result<f64, CliError> {
    match source {
        Source::Fixed(b) => Ok(b),
        Source::Mv => {
            let sel = mv_select(&mv_default_grid(), |b| {
                let fit = local_linear_fit(series, b, kernel)?;
                let res = residuals(series, &fit)?;
                Ok(cusum_variance_statistic(&res))
            })
            .map_err(data_err)?;
            Ok(sel.bandwidth)
        }
        Source::Gcv => Ok(gcv_select(series, kernel).map_err(data_err)?.bandwidth),
    }
}

fn resolve_var_bandwidth(
    series: &TimeSeries,
    mean_bandwidth: f64,
    source: Source,
    kernel: &KernelSpec,
) -> Result<f64, CliError> {
    match source {
        Source::Fixed(c) => Ok(c),
        Source::Gcv => {
            let fit = local_linear_fit(series, mean_bandwidth, kernel).map_err(data_err)?;
            let res = residuals(series, &fit).map_err(data_err)?;
            Ok(gcv_select_variance(&res, kernel)
                .map_err(data_err)?
                .bandwidth)
        }
        Source::Mv => Err(CliError::usage(
            "--variance-bandwidth supports gcv or a number",
        )),
    }
}

fn check_deltas(deltas: &[f64]) -> Result<(), CliError> {
    for &d in deltas {
        if !(d > 0.0) {
            return Err(CliError::usage(format!("--delta {d} must be positive")));
        }
    }
    Ok(())
}

fn emit_report(io: &IoArgs, envelope: &ReportEnvelope) -> Result<(), CliError> {
    let content = match io.format {
        Format::Json => to_json(envelope),
        Format::Tsv => envelope_to_tsv(envelope),
    };
    write_output(io.out.as_ref(), &content)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::TestVariance {
            io,
            bootstrap,
            bandwidth,
        } => {
            init_threads(io.threads)?;
            let source = Source::parse(&bandwidth, "--bandwidth")?;
            let cfg = bootstrap.to_config()?;
            let (series, column) = ingest(&io.input, &io.column)?;
            let kernel = KernelSpec::new(KernelId::Epanechnikov);
            let b = resolve_mean_bandwidth(&series, source, &kernel)?;
            let settings = VarianceTestSettings {
                mean_bandwidth: b,
                kernel: KernelId::Epanechnikov,
                bootstrap: cfg,
            };
            let mut report = classical_variance_test(&series, &settings).map_err(data_err)?;
            report.tuning.mean_bandwidth_source = source.label();
            let provenance = Provenance::new("test-variance")
                .with_input(&io.input, &column, series.len())?
                .threads(io.threads);
            emit_report(&io, &ReportEnvelope::classical(provenance, report))
        }
        Command::TestCorrelation {
            io,
            bootstrap,
            locator,
            lag,
            bandwidth,
            variance_bandwidth,
            assume_no_variance_break,
        } => {
            init_threads(io.threads)?;
            let b_source = Source::parse(&bandwidth, "--bandwidth")?;
            let c_source = Source::parse(&variance_bandwidth, "--variance-bandwidth")?;
            let cfg = bootstrap.to_config()?;
            if !(locator.zeta > 0.0 && locator.zeta < 0.5) {
                return Err(CliError::usage("--zeta must lie in (0, 0.5)"));
            }
            let (series, column) = ingest(&io.input, &io.column)?;
            let kernel = KernelSpec::new(KernelId::Epanechnikov);
            let b = resolve_mean_bandwidth(&series, b_source, &kernel)?;
            let c = resolve_var_bandwidth(&series, b, c_source, &kernel)?;
            let settings = CorrelationTestSettings {
                lag,
                mean_bandwidth: b,
                var_bandwidth: c,
                variant: if assume_no_variance_break {
                    VarianceVariant::Smooth
                } else {
                    VarianceVariant::Piecewise
                },
                locator_window: locator.locator_window,
                zeta: locator.zeta,
                kernel: KernelId::Epanechnikov,
                bootstrap: cfg,
            };
            let mut report = classical_correlation_test(&series, &settings).map_err(data_err)?;
            report.tuning.mean_bandwidth_source = b_source.label();
            report.tuning.var_bandwidth_source = Some(c_source.label());
            let provenance = Provenance::new("test-correlation")
                .with_input(&io.input, &column, series.len())?
                .threads(io.threads);
            emit_report(&io, &ReportEnvelope::classical(provenance, report))
        }
        Command::TestRelevantVariance {
            io,
            bootstrap,
            delta,
            bandwidth,
        } => {
            init_threads(io.threads)?;
            check_deltas(&delta)?;
            let source = Source::parse(&bandwidth, "--bandwidth")?;
            let cfg = bootstrap.to_config()?;
            let (series, column) = ingest(&io.input, &io.column)?;
            let kernel = KernelSpec::new(KernelId::Epanechnikov);
            let b = resolve_mean_bandwidth(&series, source, &kernel)?;
            let mut settings = RelevantTestSettings::variance(b);
            settings.bootstrap = cfg;
            let mut first = None;
            let mut curve = Vec::new();
            for &d in &delta {
                let mut report = relevant_variance_test(&series, d, &settings).map_err(data_err)?;
                report.tuning.mean_bandwidth_source = source.label();
                curve.push(DeltaCurvePoint {
                    delta: d,
                    p_value: report.p_value,
                    reject: report.decisions.iter().map(|x| x.reject).collect(),
                });
                if first.is_none() {
                    first = Some(report);
                }
            }
            let provenance = Provenance::new("test-relevant-variance")
                .with_input(&io.input, &column, series.len())?
                .threads(io.threads);
            let envelope = ReportEnvelope::relevant(
                provenance,
                first.expect("at least one delta"),
                (delta.len() > 1).then_some(curve),
            );
            emit_report(&io, &envelope)
        }
        Command::TestRelevantCorrelation {
            io,
            bootstrap,
            locator,
            lag,
            delta,
            bandwidth,
            variance_bandwidth,
            assume_no_variance_break,
        } => {
            init_threads(io.threads)?;
            check_deltas(&delta)?;
            let b_source = Source::parse(&bandwidth, "--bandwidth")?;
            let c_source = Source::parse(&variance_bandwidth, "--variance-bandwidth")?;
            let cfg = bootstrap.to_config()?;
            if !(locator.zeta > 0.0 && locator.zeta < 0.5) {
                return Err(CliError::usage("--zeta must lie in (0, 0.5)"));
            }
            let (series, column) = ingest(&io.input, &io.column)?;
            let kernel = KernelSpec::new(KernelId::Epanechnikov);
            let b = resolve_mean_bandwidth(&series, b_source, &kernel)?;
            let c = resolve_var_bandwidth(&series, b, c_source, &kernel)?;
            let mut settings = RelevantTestSettings::correlation(b, c);
            settings.variant = if assume_no_variance_break {
                VarianceVariant::Smooth
            } else {
                VarianceVariant::Piecewise
            };
            settings.locator_window = locator.locator_window;
            settings.zeta = locator.zeta;
            settings.bootstrap = cfg;
            let mut first = None;
            let mut curve = Vec::new();
            for &d in &delta {
                let mut report =
                    relevant_correlation_test(&series, lag, d, &settings).map_err(data_err)?;
                report.tuning.mean_bandwidth_source = b_source.label();
                report.tuning.var_bandwidth_source = Some(c_source.label());
                curve.push(DeltaCurvePoint {
                    delta: d,
                    p_value: report.p_value,
                    reject: report.decisions.iter().map(|x| x.reject).collect(),
                });
                if first.is_none() {
                    first = Some(report);
                }
            }
            let provenance = Provenance::new("test-relevant-correlation")
                .with_input(&io.input, &column, series.len())?
                .threads(io.threads);
            let envelope = ReportEnvelope::relevant(
                provenance,
                first.expect("at least one delta"),
                (delta.len() > 1).then_some(curve),
            );
            emit_report(&io, &envelope)
        }
        Command::Locate {
            io,
            locator,
            lag,
            bandwidth,
            variance_bandwidth,
        } => {
            init_threads(io.threads)?;
            let b_source = Source::parse(&bandwidth, "--bandwidth")?;
            let c_source = Source::parse(&variance_bandwidth, "--variance-bandwidth")?;
            if !(locator.zeta > 0.0 && locator.zeta < 0.5) {
                return Err(CliError::usage("--zeta must lie in (0, 0.5)"));
            }
            let (series, column) = ingest(&io.input, &io.column)?;
            let kernel = KernelSpec::new(KernelId::Epanechnikov);
            let b = resolve_mean_bandwidth(&series, b_source, &kernel)?;
            let fit = local_linear_fit(&series, b, &kernel).map_err(data_err)?;
            let res = residuals(&series, &fit).map_err(data_err)?;
            let n = series.len();
            let window = locator
                .locator_window
                .unwrap_or_else(|| secondchange::cusum::default_cube_root_window(n));
            let loc = variance_break_locate(&res, window, locator.zeta).map_err(data_err)?;
            let cp_var = variance_cp_argmax(&res);
            let correlation = match lag {
                None => None,
                Some(k) => {
                    let c = resolve_var_bandwidth(&series, b, c_source, &kernel)?;
                    let c = clamp_piecewise_bandwidth(n, loc.fraction, c);
                    let vf =
                        variance_fit_piecewise(&res, loc.fraction, c, &kernel).map_err(data_err)?;
                    let cp = correlation_cp_argmax(&res, &vf, k);
                    Some(ChangePointSummary {
                        method: "correlation-cusum-argmax".into(),
                        index: cp.index,
                        fraction: cp.fraction,
                        objective: cp.objective,
                    })
                }
            };
            #[derive(serde::Serialize)]
            struct LocateEnvelope {
                schema_version: u32,
                provenance: Provenance,
                mean_bandwidth: f64,
                locator_window: usize,
                zeta: f64,
                lag: Option<usize>,
                variance_window_contrast: ChangePointSummary,
                variance_cusum_argmax: ChangePointSummary,
                correlation_cusum_argmax: Option<ChangePointSummary>,
            }
            let envelope = LocateEnvelope {
                schema_version: SCHEMA_VERSION,
                provenance: Provenance::new("locate")
                    .with_input(&io.input, &column, n)?
                    .threads(io.threads),
                mean_bandwidth: b,
                locator_window: window,
                zeta: locator.zeta,
                lag,
                variance_window_contrast: ChangePointSummary {
                    method: "variance-window-contrast".into(),
                    index: loc.index,
                    fraction: loc.fraction,
                    objective: loc.contrast,
                },
                variance_cusum_argmax: ChangePointSummary {
                    method: "variance-cusum-argmax".into(),
                    index: cp_var.index,
                    fraction: cp_var.fraction,
                    objective: cp_var.objective,
                },
                correlation_cusum_argmax: correlation,
            };
            let content = match io.format {
                Format::Json => to_json(&envelope),
                Format::Tsv => {
                    let mut s = String::from("method\tindex\tfraction\tobjective\n");
                    for cp in [
                        &envelope.variance_window_contrast,
                        &envelope.variance_cusum_argmax,
                    ]
                    .into_iter()
                    .chain(envelope.correlation_cusum_argmax.iter())
                    {
                        s.push_str(&format!(
                            "{}\t{}\t{}\t{}\n",
                            cp.method, cp.index, cp.fraction, cp.objective
                        ));
                    }
                    s
                }
            };
            write_output(io.out.as_ref(), &content)
        }
        Command::Bandwidth {
            io,
            method,
            target,
            bandwidth,
        } => {
            init_threads(io.threads)?;
            let (series, column) = ingest(&io.input, &io.column)?;
            let kernel = KernelSpec::new(KernelId::Epanechnikov);
            #[derive(serde::Serialize)]
            struct BandwidthEnvelope {
                schema_version: u32,
                provenance: Provenance,
                method: String,
                target: String,
                selected: f64,
                #[serde(skip_serializing_if = "Option::is_none")]
                mv: Option<secondchange::bandwidth::MvSelection>,
                #[serde(skip_serializing_if = "Option::is_none")]
                gcv: Option<secondchange::bandwidth::GcvSelection>,
            }
            let provenance = Provenance::new("bandwidth")
                .with_input(&io.input, &column, series.len())?
                .threads(io.threads);
            let envelope = match (method.as_str(), target.as_str()) {
                ("mv", "mean") => {
                    let sel = mv_select(&mv_default_grid(), |b| {
                        let fit = local_linear_fit(&series, b, &kernel)?;
                        let res = residuals(&series, &fit)?;
                        Ok(cusum_variance_statistic(&res))
                    })
                    .map_err(data_err)?;
                    BandwidthEnvelope {
                        schema_version: SCHEMA_VERSION,
                        provenance,
                        method,
                        target,
                        selected: sel.bandwidth,
                        mv: Some(sel),
                        gcv: None,
                    }
                }
                ("gcv", "mean") => {
                    let sel = gcv_select(&series, &kernel).map_err(data_err)?;
                    BandwidthEnvelope {
                        schema_version: SCHEMA_VERSION,
                        provenance,
                        method,
                        target,
                        selected: sel.bandwidth,
                        mv: None,
                        gcv: Some(sel),
                    }
                }
                ("gcv", "variance") => {
                    let b_source = Source::parse(&bandwidth, "--bandwidth")?;
                    let b = resolve_mean_bandwidth(&series, b_source, &kernel)?;
                    let fit = local_linear_fit(&series, b, &kernel).map_err(data_err)?;
                    let res = residuals(&series, &fit).map_err(data_err)?;
                    let sel = gcv_select_variance(&res, &kernel).map_err(data_err)?;
                    BandwidthEnvelope {
                        schema_version: SCHEMA_VERSION,
                        provenance,
                        method,
                        target,
                        selected: sel.bandwidth,
                        mv: None,
                        gcv: Some(sel),
                    }
                }
                ("mv", "variance") => {
                    return Err(CliError::usage(
                        "minimal volatility applies to the mean smoother only",
                    ))
                }
                _ => {
                    return Err(CliError::usage(
                        "--method must be mv or gcv; --target must be mean or variance",
                    ))
                }
            };
            let content = match io.format {
                Format::Json => to_json(&envelope),
                Format::Tsv => format!(
                    "method\ttarget\tselected\n{}\t{}\t{}\n",
                    envelope.method, envelope.target, envelope.selected
                ),
            };
            write_output(io.out.as_ref(), &content)
        }
        Command::Simulate {
            model,
            n,
            seed,
            lambda,
            no_mean,
            ma_truncation,
            out,
        } => {
            let model = ModelId::parse(&model)
                .ok_or_else(|| CliError::usage(format!("unknown model '{model}'")))?;
            let spec = PlsModelSpec::new(model, lambda)
                .map_err(|e| CliError::usage(e.to_string()))?
                .with_mean(!no_mean)
                .with_ma_truncation(ma_truncation);
            if ma_truncation < 1 {
                return Err(CliError::usage("--ma-truncation must be at least 1"));
            }
            let series = simulate(&spec, n, seed).map_err(|e| CliError::usage(e.to_string()))?;
            let mut content = String::from("y\n");
            for v in series.values() {
                content.push_str(&format!("{v}\n"));
            }
            write_output(out.as_ref(), &content)
        }
        Command::Simstudy {
            model,
            test,
            n,
            runs,
            replicates,
            seed,
            lambda,
            delta,
            lag,
            bandwidth,
            variance_bandwidth,
            window_m,
            alpha,
            no_mean,
            out,
            format,
            threads,
        } => {
            init_threads(threads)?;
            let model = ModelId::parse(&model)
                .ok_or_else(|| CliError::usage(format!("unknown model '{model}'")))?;
            let spec = PlsModelSpec::new(model, lambda)
                .map_err(|e| CliError::usage(e.to_string()))?
                .with_mean(!no_mean);
            if runs < 100 {
                return Err(CliError::usage("--runs must be at least 100"));
            }
            for &a in &alpha {
                if !(a > 0.0 && a < 1.0) {
                    return Err(CliError::usage(format!("--alpha {a} must lie in (0, 1)")));
                }
            }
            let mut cfg = StudyConfig::new(spec, n, runs, replicates, seed);
            if let Some(t) = test {
                cfg.test = TestKind::parse(&t)
                    .ok_or_else(|| CliError::usage(format!("unknown test '{t}'")))?;
                cfg.delta = secondchange::montecarlo::default_delta(cfg.test);
                cfg.mean_rule = if cfg.test.is_correlation() {
                    BandwidthRule::CrossValidation
                } else {
                    BandwidthRule::MinimalVolatility
                };
            }
            if let Some(d) = delta {
                if !(d > 0.0) {
                    return Err(CliError::usage("--delta must be positive"));
                }
                cfg.delta = d;
            }
            if cfg.test.is_relevant() && !(cfg.delta > 0.0) {
                return Err(CliError::usage("relevant tests need --delta > 0"));
            }
            cfg.lag = lag;
            if let Some(b) = bandwidth {
                cfg.mean_rule = Source::parse(&b, "--bandwidth")?.to_rule();
            }
            cfg.var_rule = Source::parse(&variance_bandwidth, "--variance-bandwidth")?.to_rule();
            cfg.window = window_m;
            cfg.alphas = alpha;
            let study = run_study(&cfg).map_err(data_err)?;
            let envelope = StudyEnvelope {
                schema_version: SCHEMA_VERSION,
                provenance: Provenance::new("simstudy").threads(threads),
                study,
            };
            let content = match format {
                Format::Json => to_json(&envelope),
                Format::Tsv => study_to_tsv(&envelope),
            };
            write_output(out.as_ref(), &content)
        }
    }
}
