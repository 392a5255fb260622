//! Command-line front end: parses arguments into a validated [`RunConfig`]
//! and runs it, writing CSV or JSON in the shared output schema.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use clickspace::phasespace::{format_float, CSV_HEADER};
use clickspace::{
    d_symbol_table, replication_study, scan_line, significance_vs_s, ClickError, DetectorArray, ExperimentConfig,
    LineGrid, OrderingParam, PhasePoint, ScanRecord, StateSpec,
};
use serde::{Deserialize, Serialize};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "CLICKSPACE_THREADS";

/// Range of `s` accepted without `--unrestricted-s`.
pub const S_RANGE: (f64, f64) = (-1.0, 0.95);

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Engine(#[from] ClickError),
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("invalid configuration file: {0}")]
    Config(#[from] serde_json::Error),
}

impl CliError {
    /// Machine-readable category printed as `error[category]`.
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Engine(e) => e.category(),
            CliError::Io(_) => "io",
            CliError::Config(_) => "config",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "usage" => 2,
            "domain" => 3,
            "cutoff" => 4,
            "precision" => 5,
            "io" => 6,
            _ => 7,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Scan,
    SignificanceVsS,
    Simulate,
    Dsymbols,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Fully validated description of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    /// State in the `kind:key=value,...` grammar.
    #[serde(default)]
    pub state: Option<String>,
    pub detectors: usize,
    pub eta: f64,
    #[serde(default)]
    pub s: Option<f64>,
    #[serde(default)]
    pub unrestricted_s: bool,
    pub nu: u64,
    #[serde(default)]
    pub seed: u64,
    pub replications: usize,
    /// Re alpha grid of `scan`.
    #[serde(default)]
    pub re: Option<LineGrid>,
    /// Im alpha of `scan`.
    #[serde(default)]
    pub im: f64,
    /// Fixed point of `significance-vs-s` and `simulate`.
    #[serde(default)]
    pub alpha: Option<[f64; 2]>,
    #[serde(default)]
    pub s_grid: Option<LineGrid>,
    #[serde(default)]
    pub max_m: Option<usize>,
    pub tail_eps: f64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub summary: bool,
}

#[derive(Debug, Parser)]
#[command(
    name = "clickspace",
    version,
    about = "Click-counting phase-space functions for on-off detector arrays",
    args_conflicts_with_subcommands = true
)]
struct Cli {
    /// Load the whole run configuration from a JSON file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Print the resolved configuration as JSON instead of running.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Option<SubCommand>,
}

#[derive(Debug, Subcommand)]
enum SubCommand {
    /// P_N along a line of constant Im alpha.
    Scan(Opts),
    /// Significance as a function of s at a fixed point.
    SignificanceVsS(Opts),
    /// Simulated finite-nu experiments with per-replication rows.
    Simulate(Opts),
    /// Tabulated D-symbols of the detector array.
    Dsymbols(Opts),
}

#[derive(Debug, Args)]
struct Opts {
    /// State, e.g. `squeezed:r=1`, `fock:n=1`, `coherent:beta_re=1,beta_im=0`, `thermal:mean=0.5`.
    #[arg(long)]
    state: Option<String>,
    /// Number of on-off detectors N.
    #[arg(long, short = 'N')]
    detectors: usize,
    /// Quantum efficiency in (0, 1].
    #[arg(long)]
    eta: f64,
    /// Ordering parameter.
    #[arg(long, allow_hyphen_values = true)]
    s: Option<f64>,
    /// Accept any s < 1 instead of [-1, 0.95].
    #[arg(long)]
    unrestricted_s: bool,
    /// Number of measurement repetitions per estimate.
    #[arg(long, default_value_t = 10_000)]
    nu: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    replications: usize,
    /// Re alpha grid `start:stop:steps` (inclusive, steps = point count).
    #[arg(long, allow_hyphen_values = true)]
    re: Option<String>,
    /// Im alpha of the scan line.
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    im: f64,
    /// Phase-space point `re` or `re,im`.
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    /// Grid of s values `start:stop:steps`.
    #[arg(long, allow_hyphen_values = true)]
    s_grid: Option<String>,
    /// Largest photon number of the D-symbol table.
    #[arg(long)]
    max_m: Option<usize>,
    /// Truncation tolerance.
    #[arg(long, default_value_t = clickspace::DEFAULT_TAIL_EPS)]
    tail_eps: f64,
    /// Output file (stdout when absent).
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Print extrema of the value and of the significance to stderr.
    #[arg(long)]
    summary: bool,
}

/// What `parse_args` asks the caller to do.
#[derive(Debug, Clone, PartialEq)]
pub enum Invocation {
    Run(RunConfig),
    PrintConfig(RunConfig),
    /// Help or version text requested explicitly.
    Info(String),
}

/// Parses `argv` (including the program name) into a validated config.
pub fn parse_args<I, T>(argv: I) -> Result<Invocation>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            return Ok(Invocation::Info(e.render().to_string()));
        }
        Err(e) => return Err(CliError::Usage(e.render().to_string())),
    };
    let config = match (cli.config, cli.command) {
        (Some(path), _) => serde_json::from_str(&fs::read_to_string(path)?)?,
        (None, Some(sub)) => from_opts(sub)?,
        (None, None) => return Err(CliError::Usage("a subcommand or --config is required".into())),
    };
    config.validate()?;
    Ok(if cli.print_config {
        Invocation::PrintConfig(config)
    } else {
        Invocation::Run(config)
    })
}

fn from_opts(sub: SubCommand) -> Result<RunConfig> {
    let (command, o) = match sub {
        SubCommand::Scan(o) => (Command::Scan, o),
        SubCommand::SignificanceVsS(o) => (Command::SignificanceVsS, o),
        SubCommand::Simulate(o) => (Command::Simulate, o),
        SubCommand::Dsymbols(o) => (Command::Dsymbols, o),
    };
    Ok(RunConfig {
        command,
        state: o.state,
        detectors: o.detectors,
        eta: o.eta,
        s: o.s,
        unrestricted_s: o.unrestricted_s,
        nu: o.nu,
        seed: o.seed,
        replications: o.replications,
        re: o.re.as_deref().map(str::parse).transpose()?,
        im: o.im,
        alpha: o.alpha.as_deref().map(parse_alpha).transpose()?,
        s_grid: o.s_grid.as_deref().map(str::parse).transpose()?,
        max_m: o.max_m,
        tail_eps: o.tail_eps,
        output: o.output,
        format: o.format,
        summary: o.summary,
    })
}

fn parse_alpha(text: &str) -> Result<[f64; 2]> {
    let bad = || {
        CliError::Engine(ClickError::Domain(format!(
            "invalid --alpha `{text}` (expected re or re,im)"
        )))
    };
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    match parts[..] {
        [re] => Ok([re.parse().map_err(|_| bad())?, 0.0]),
        [re, im] => Ok([re.parse().map_err(|_| bad())?, im.parse().map_err(|_| bad())?]),
        _ => Err(bad()),
    }
}

fn domain(msg: impl Into<String>) -> CliError {
    CliError::Engine(ClickError::Domain(msg.into()))
}

fn missing(flag: &str, command: Command) -> CliError {
    domain(format!("--{flag} is required for {}", command_name(command)))
}

fn command_name(command: Command) -> &'static str {
    match command {
        Command::Scan => "scan",
        Command::SignificanceVsS => "significance-vs-s",
        Command::Simulate => "simulate",
        Command::Dsymbols => "dsymbols",
    }
}

impl RunConfig {
    /// Enforces every numeric constraint before any work starts.
    pub fn validate(&self) -> Result<()> {
        self.detector()?;
        if self.nu == 0 {
            return Err(domain("--nu must be at least 1"));
        }
        if !(self.tail_eps > 0.0 && self.tail_eps <= 1e-6) {
            return Err(domain(format!("--tail-eps {} must lie in (0, 1e-6]", self.tail_eps)));
        }
        if self.command != Command::Dsymbols {
            self.state_spec()?;
        }
        match self.command {
            Command::Scan => {
                self.ordering(self.s.ok_or_else(|| missing("s", self.command))?)?;
                self.re.ok_or_else(|| missing("re", self.command))?;
                PhasePoint::new(0.0, self.im).checked()?;
            }
            Command::SignificanceVsS => {
                self.point()?;
                let grid = self.s_grid.ok_or_else(|| missing("s-grid", self.command))?;
                for s in grid.points() {
                    self.ordering(s)?;
                }
            }
            Command::Simulate => {
                self.point()?;
                self.ordering(self.s.ok_or_else(|| missing("s", self.command))?)?;
                ExperimentConfig::new(self.nu, self.seed, self.replications)?;
                if self.replications < clickspace::experiment::MIN_REPLICATIONS {
                    return Err(domain(format!(
                        "--replications must be at least {}",
                        clickspace::experiment::MIN_REPLICATIONS
                    )));
                }
            }
            Command::Dsymbols => {
                self.max_m.ok_or_else(|| missing("max-m", self.command))?;
            }
        }
        Ok(())
    }

    fn detector(&self) -> Result<DetectorArray> {
        Ok(DetectorArray::new(self.detectors, self.eta)?)
    }

    fn state_spec(&self) -> Result<StateSpec> {
        let text = self.state.as_deref().ok_or_else(|| missing("state", self.command))?;
        let spec: StateSpec = text.parse()?;
        spec.validate()?;
        Ok(spec)
    }

    fn point(&self) -> Result<PhasePoint> {
        let [re, im] = self.alpha.ok_or_else(|| missing("alpha", self.command))?;
        Ok(PhasePoint::new(re, im).checked()?)
    }

    fn ordering(&self, s: f64) -> Result<OrderingParam> {
        let param = OrderingParam::new(s)?;
        if !self.unrestricted_s && !(S_RANGE.0..=S_RANGE.1).contains(&s) {
            return Err(domain(format!(
                "s = {s} lies outside [{}, {}]; pass --unrestricted-s to allow any s < 1",
                S_RANGE.0, S_RANGE.1
            )));
        }
        Ok(param)
    }
}

/// Reads the thread cap from `CLICKSPACE_THREADS`, if set.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(domain(format!("{THREADS_ENV}={v} must be a positive integer"))),
        },
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(domain(format!("{THREADS_ENV}: {e}"))),
    }
}

/// Result of a run: the rendered artifact and the optional summary.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub body: String,
    pub summary: Option<String>,
}

/// Runs the configuration on a pool capped by `CLICKSPACE_THREADS`.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Io(io::Error::other(e)))?;
    pool.install(|| execute(config))
}

/// Runs and writes the artifact to `--output` or stdout, the summary to stderr.
pub fn run_and_write(config: &RunConfig) -> Result<()> {
    let out = run(config)?;
    match &config.output {
        Some(path) => fs::write(path, &out.body)?,
        None => io::stdout().lock().write_all(out.body.as_bytes())?,
    }
    if let Some(summary) = out.summary {
        io::stderr().lock().write_all(summary.as_bytes())?;
    }
    Ok(())
}

fn execute(config: &RunConfig) -> Result<RunOutput> {
    let detector = config.detector()?;
    match config.command {
        Command::Scan => {
            let state = config.state_spec()?;
            let s = config.ordering(config.s.expect("validated"))?;
            let rows = scan_line(
                &state,
                detector,
                s,
                config.nu,
                config.re.expect("validated"),
                config.im,
                config.tail_eps,
            )?;
            let summary = config.summary.then(|| summarize(&rows, "re_alpha", |r| r.re_alpha));
            Ok(RunOutput {
                body: render_records(&rows, config.format)?,
                summary,
            })
        }
        Command::SignificanceVsS => {
            let state = config.state_spec()?;
            let s_grid = config.s_grid.expect("validated").points();
            let rows = significance_vs_s(&state, detector, config.point()?, config.nu, &s_grid, config.tail_eps)?;
            let summary = config.summary.then(|| summarize(&rows, "s", |r| r.s));
            Ok(RunOutput {
                body: render_records(&rows, config.format)?,
                summary,
            })
        }
        Command::Simulate => simulate(config, detector),
        Command::Dsymbols => dsymbols(config, detector),
    }
}

fn summarize(rows: &[ScanRecord], axis: &str, coord: impl Fn(&ScanRecord) -> f64) -> String {
    let mut out = String::new();
    if let Some(r) = rows.iter().min_by(|a, b| a.p_value.total_cmp(&b.p_value)) {
        let _ = writeln!(
            out,
            "min p_value: {} at {axis} = {}",
            format_float(r.p_value),
            format_float(coord(r))
        );
    }
    let best = rows
        .iter()
        .filter_map(|r| r.significance.map(|z| (z, r)))
        .min_by(|a, b| a.0.total_cmp(&b.0));
    match best {
        Some((z, r)) => {
            let _ = writeln!(
                out,
                "min significance: {} at {axis} = {}",
                format_float(z),
                format_float(coord(r))
            );
        }
        None => {
            let _ = writeln!(out, "min significance: NA (zero standard error everywhere)");
        }
    }
    out
}

fn render_records(rows: &[ScanRecord], format: Format) -> Result<String> {
    match format {
        Format::Csv => {
            let mut out = String::with_capacity(64 * (rows.len() + 1));
            out.push_str(CSV_HEADER);
            out.push('\n');
            for r in rows {
                out.push_str(&r.to_csv());
                out.push('\n');
            }
            Ok(out)
        }
        Format::Json => Ok(serde_json::to_string_pretty(rows)? + "\n"),
    }
}

/// Replication label of a `simulate` row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
enum Replication {
    Index(usize),
    Aggregate(&'static str),
}

#[derive(Debug, Serialize)]
struct SimulationRow {
    #[serde(flatten)]
    record: ScanRecord,
    replication: Replication,
    seed: u64,
}

fn simulate(config: &RunConfig, detector: DetectorArray) -> Result<RunOutput> {
    let state = config.state_spec()?;
    let alpha = config.point()?;
    let s = config.ordering(config.s.expect("validated"))?;
    let experiment = ExperimentConfig::new(config.nu, config.seed, config.replications)?;
    let study = replication_study(&state, detector, alpha, s, &experiment, config.tail_eps)?;

    let mut rows: Vec<SimulationRow> = study
        .replications
        .iter()
        .enumerate()
        .map(|(i, est)| SimulationRow {
            record: ScanRecord::new(alpha, s, detector, est),
            replication: Replication::Index(i),
            seed: experiment.replication_seed(i),
        })
        .collect();
    let mut aggregate = ScanRecord::new(alpha, s, detector, &study.replications[0]);
    aggregate.p_value = study.mean_estimate;
    aggregate.stderr_paper = study.stderr_paper_mean;
    aggregate.stderr_exact = study.stderr_exact_analytic;
    aggregate.significance = study.mean_significance();
    rows.push(SimulationRow {
        record: aggregate,
        replication: Replication::Aggregate("aggregate"),
        seed: config.seed,
    });

    let body = match config.format {
        Format::Csv => {
            let mut out = format!("{CSV_HEADER},replication,seed\n");
            for row in &rows {
                let label = match row.replication {
                    Replication::Index(i) => i.to_string(),
                    Replication::Aggregate(tag) => tag.to_string(),
                };
                let _ = writeln!(out, "{},{label},{}", row.record.to_csv(), row.seed);
            }
            out
        }
        Format::Json => serde_json::to_string_pretty(&rows)? + "\n",
    };
    let summary = config.summary.then(|| {
        let mut out = String::new();
        let _ = writeln!(out, "exact p_value: {}", format_float(study.exact_value));
        let _ = writeln!(out, "mean estimate: {}", format_float(study.mean_estimate));
        let _ = writeln!(out, "empirical std: {}", format_float(study.empirical_std));
        let _ = writeln!(
            out,
            "stderr_exact (analytic): {}",
            format_float(study.stderr_exact_analytic)
        );
        let _ = writeln!(
            out,
            "stderr_paper (mean plug-in): {}",
            format_float(study.stderr_paper_mean)
        );
        match study.mean_significance() {
            Some(z) => {
                let _ = writeln!(out, "mean significance: {}", format_float(z));
            }
            None => {
                let _ = writeln!(out, "mean significance: NA");
            }
        }
        out
    });
    Ok(RunOutput { body, summary })
}

#[derive(Debug, Serialize)]
struct DSymbolRow {
    k: usize,
    m: usize,
    value: f64,
}

fn dsymbols(config: &RunConfig, detector: DetectorArray) -> Result<RunOutput> {
    let max_m = config.max_m.expect("validated");
    let table = d_symbol_table(detector, max_m)?;
    let rows: Vec<DSymbolRow> = (0..=detector.n_detectors())
        .flat_map(|k| (0..=max_m).map(move |m| (k, m)))
        .map(|(k, m)| DSymbolRow {
            k,
            m,
            value: table.get(k, m),
        })
        .collect();
    let body = match config.format {
        Format::Csv => {
            let mut out = String::from("k,m,value\n");
            for r in &rows {
                let _ = writeln!(out, "{},{},{}", r.k, r.m, format_float(r.value));
            }
            out
        }
        Format::Json => serde_json::to_string_pretty(&rows)? + "\n",
    };
    Ok(RunOutput { body, summary: None })
}
