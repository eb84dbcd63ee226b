//! Command-line surface: argument definitions and thin handlers over the
//! library operations.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use propa::diagnostics::{all_pairs, format_float, uniform_profile_pruned, CSV_HEADER};
use propa::io::{read_json, witness_to_file, KernelFile, SpaceFile};
use propa::mixture::{assemble, Schedule};
use propa::{
    cesaro_profile, collapse_kernel, collapse_power_oracle, DiagnosticsReport, Kernel, MetricSpace,
    WitnessSequence,
};

use crate::config::{ExperimentConfig, WitnessSpec};
use crate::error::{CliError, EXIT_ASSERTION, EXIT_EXHAUSTED, EXIT_OK};
use crate::output::{emit, read_text, to_json_bytes, write_atomic};
use crate::run::{build_witnesses, run};

#[derive(Debug, Parser)]
#[command(
    name = "propa",
    version,
    about = "Exact Markov-kernel experiments on finite metric spaces"
)]
pub struct Cli {
    /// Worker threads (default: rayon's choice).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate metric spaces.
    #[command(subcommand)]
    Space(SpaceCommand),
    /// Build witness sequences.
    #[command(subcommand)]
    Witness(WitnessCommand),
    /// Construct mixture kernels.
    #[command(subcommand)]
    Mixture(MixtureCommand),
    /// Mixing diagnostics.
    #[command(subcommand)]
    Diag(DiagCommand),
    /// Closed-form oracles.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Run a full experiment from a JSON config.
    Run(RunArgs),
}

#[derive(Debug, Subcommand)]
pub enum SpaceCommand {
    Gen(SpaceGenArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SpaceKind {
    Path,
    Grid,
    Tree,
}

#[derive(Debug, Args)]
pub struct SpaceGenArgs {
    #[arg(long, value_enum)]
    pub kind: SpaceKind,
    /// Path length L (points 0..=L).
    #[arg(long)]
    pub length: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub side: Option<usize>,
    /// Free-group rank.
    #[arg(long)]
    pub rank: Option<usize>,
    /// Word-length radius of the free-group ball.
    #[arg(long)]
    pub radius: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub margin: u32,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum WitnessCommand {
    Build(WitnessBuildArgs),
}

#[derive(Debug, Args)]
pub struct WitnessBuildArgs {
    #[arg(long)]
    pub space: PathBuf,
    /// Ball radii: `a..b` (inclusive) or a comma list.
    #[arg(long)]
    pub radii: String,
    /// Windows K for the variation table.
    #[arg(long = "K", value_delimiter = ',', default_value = "2")]
    pub windows: Vec<u64>,
    /// Witness JSON output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Variation table CSV (default: stdout).
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum MixtureCommand {
    Construct(MixtureConstructArgs),
}

#[derive(Debug, Args)]
pub struct MixtureConstructArgs {
    #[arg(long)]
    pub space: PathBuf,
    /// Witness JSON; ball witnesses from `--radii` otherwise.
    #[arg(long, conflicts_with = "radii")]
    pub witness: Option<PathBuf>,
    #[arg(long, default_value = "1..40")]
    pub radii: String,
    #[arg(long = "I", default_value_t = 3)]
    pub terms: usize,
    /// `dyadic` or a comma list.
    #[arg(long, default_value = "dyadic")]
    pub t: String,
    #[arg(long, default_value = "dyadic")]
    pub eps: String,
    /// Recipe JSON output (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub kernel_out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum DiagCommand {
    Uniform(DiagUniformArgs),
    Cesaro(DiagCesaroArgs),
}

#[derive(Debug, Args)]
pub struct DiagUniformArgs {
    #[arg(long)]
    pub space: PathBuf,
    #[arg(long)]
    pub kernel: PathBuf,
    #[arg(long = "K")]
    pub window: u32,
    #[arg(long = "nmax")]
    pub n_max: u64,
    #[arg(long)]
    pub prune: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiagCesaroArgs {
    #[arg(long)]
    pub kernel: PathBuf,
    /// Pairs `x:y`, comma separated.
    #[arg(long, value_delimiter = ',', required_unless_present = "all_pairs")]
    pub pairs: Vec<String>,
    /// Every pair of the space (at most 300 points).
    #[arg(long, requires = "space")]
    pub all_pairs: bool,
    #[arg(long)]
    pub space: Option<PathBuf>,
    #[arg(long = "nmax")]
    pub n_max: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum OracleCommand {
    Collapse(OracleCollapseArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Emit {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct OracleCollapseArgs {
    #[arg(long)]
    pub space: PathBuf,
    #[arg(long)]
    pub x0: usize,
    #[arg(long)]
    pub n: u64,
    #[arg(long, value_enum, default_value = "csv")]
    pub emit: Emit,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, overriding the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for the randomized checks, overriding the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Exit status plus messages for stderr.
#[derive(Debug, Default)]
pub struct Report {
    pub exit_code: i32,
    pub messages: Vec<String>,
}

impl Report {
    fn ok() -> Self {
        Self::default()
    }
}

pub fn parse_schedule(text: &str) -> Result<Schedule, CliError> {
    if text.trim() == "dyadic" {
        return Ok(Schedule::DYADIC);
    }
    text.split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map(Schedule::Explicit)
        .map_err(|_| {
            CliError::Config(format!(
                "schedule {text:?} is neither `dyadic` nor a number list"
            ))
        })
}

pub fn parse_radii(text: &str) -> Result<Vec<u32>, CliError> {
    let bad = || CliError::Config(format!("radii {text:?}: expected `a..b` or a comma list"));
    let radii = if let Some((a, b)) = text.split_once("..") {
        let a: u32 = a.trim().parse().map_err(|_| bad())?;
        let b: u32 = b
            .trim()
            .trim_start_matches('=')
            .parse()
            .map_err(|_| bad())?;
        (a..=b).collect()
    } else {
        text.split(',')
            .map(|v| v.trim().parse())
            .collect::<Result<Vec<u32>, _>>()
            .map_err(|_| bad())?
    };
    if radii.is_empty() {
        return Err(bad());
    }
    Ok(radii)
}

fn parse_pair(text: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Config(format!("pair {text:?}: expected `x:y`"));
    let (x, y) = text.split_once(':').ok_or_else(bad)?;
    Ok((
        x.trim().parse().map_err(|_| bad())?,
        y.trim().parse().map_err(|_| bad())?,
    ))
}

pub fn load_space(path: &Path) -> Result<MetricSpace, CliError> {
    let file: SpaceFile = read_json(&read_text(path)?)?;
    Ok(file.into_space()?)
}

pub fn load_kernel(path: &Path) -> Result<Kernel, CliError> {
    let file: KernelFile = read_json(&read_text(path)?)?;
    Ok(file.into_kernel()?)
}

fn uniform_csv(report: &DiagnosticsReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push_str(&report.csv_rows());
    out
}

pub fn execute(cli: Cli) -> Result<Report, CliError> {
    let threads = cli.threads;
    let command = cli.command;
    if let Command::Run(args) = command {
        return run_command(args, threads);
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n < 1 {
            return Err(CliError::Config("--threads must be >= 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| match command {
        Command::Space(SpaceCommand::Gen(a)) => space_gen(a),
        Command::Witness(WitnessCommand::Build(a)) => witness_build(a),
        Command::Mixture(MixtureCommand::Construct(a)) => mixture_construct(a),
        Command::Diag(DiagCommand::Uniform(a)) => diag_uniform(a),
        Command::Diag(DiagCommand::Cesaro(a)) => diag_cesaro(a),
        Command::Oracle(OracleCommand::Collapse(a)) => oracle_collapse(a),
        Command::Run(_) => unreachable!("handled above"),
    })
}

fn space_gen(a: SpaceGenArgs) -> Result<Report, CliError> {
    let need = |v: Option<usize>, flag: &str| {
        v.ok_or_else(|| CliError::Config(format!("--kind {:?} needs --{flag}", a.kind)))
    };
    let space = match a.kind {
        SpaceKind::Path => MetricSpace::path(need(a.length, "length")?)?,
        SpaceKind::Grid => MetricSpace::grid(need(a.dim, "dim")?, need(a.side, "side")?)?,
        SpaceKind::Tree => {
            MetricSpace::free_group_ball(need(a.rank, "rank")?, need(a.radius, "radius")?)?
        }
    }
    .with_margin(a.margin);
    emit(
        a.out.as_deref(),
        &to_json_bytes(&SpaceFile::from_space(&space)),
    )?;
    Ok(Report {
        exit_code: EXIT_OK,
        messages: vec![format!(
            "{} points, {} core points at margin {}",
            space.len(),
            space.core().len(),
            space.margin()
        )],
    })
}

fn witness_build(a: WitnessBuildArgs) -> Result<Report, CliError> {
    let space = load_space(&a.space)?;
    let radii = parse_radii(&a.radii)?;
    let mut ws = WitnessSequence::balls(&space, &radii);
    let mut table = String::from("level,K,sup_variation\n");
    for &k in &a.windows {
        ws.record_variation(&space, k)?;
    }
    for (level, w) in ws.levels().iter().enumerate() {
        for (k, v) in &w.variation {
            writeln!(table, "{level},{k},{}", format_float(*v)).expect("writing to a String");
        }
    }
    if let Some(out) = &a.out {
        write_atomic(out, &to_json_bytes(&witness_to_file(&ws)))?;
    }
    emit(a.csv.as_deref(), table.as_bytes())?;
    Ok(Report::ok())
}

fn mixture_construct(a: MixtureConstructArgs) -> Result<Report, CliError> {
    let space = load_space(&a.space)?;
    let spec = match &a.witness {
        Some(path) => WitnessSpec::File { path: path.clone() },
        None => WitnessSpec::Balls {
            radii: parse_radii(&a.radii)?,
        },
    };
    let ws = build_witnesses(&spec, &space)?;
    let t = parse_schedule(&a.t)?;
    let eps = parse_schedule(&a.eps)?;
    let mk = match assemble(&ws, &space, &t, &eps, a.terms) {
        Ok(mk) => mk,
        Err(e @ propa::Error::SelectionExhausted { window, .. }) => {
            let mut messages = Vec::new();
            if window.saturating_sub(1) > space.margin() as u64 {
                messages.push(format!(
                    "warning: comparison window {} exceeds the core margin {}",
                    window - 1,
                    space.margin()
                ));
            }
            messages.push(e.to_string());
            return Ok(Report {
                exit_code: EXIT_EXHAUSTED,
                messages,
            });
        }
        Err(e) => return Err(e.into()),
    };
    let messages = mk
        .recipe
        .windows_beyond(space.margin())
        .into_iter()
        .map(|(i, w)| {
            format!(
                "warning: comparison window for i = {i} is {w}, beyond the core margin {}",
                space.margin()
            )
        })
        .collect();
    emit(a.out.as_deref(), &to_json_bytes(&mk.recipe.to_file()))?;
    if let Some(path) = &a.kernel_out {
        write_atomic(path, &to_json_bytes(&KernelFile::from_kernel(&mk.kernel)))?;
    }
    Ok(Report {
        exit_code: EXIT_OK,
        messages,
    })
}

fn diag_uniform(a: DiagUniformArgs) -> Result<Report, CliError> {
    let space = load_space(&a.space)?;
    let kernel = load_kernel(&a.kernel)?;
    let report = uniform_profile_pruned(&kernel, &space, a.window, a.n_max, a.prune)?;
    emit(a.out.as_deref(), uniform_csv(&report).as_bytes())?;
    let mut out = Report::ok();
    if report.prune_bound > 0.0 {
        out.messages.push(format!(
            "pruning perturbed rows by at most {:e} in L1",
            report.prune_bound
        ));
    }
    if !report.monotone {
        out.exit_code = EXIT_ASSERTION;
        out.messages.push("uniform series increased in n".into());
    }
    Ok(out)
}

fn diag_cesaro(a: DiagCesaroArgs) -> Result<Report, CliError> {
    let kernel = load_kernel(&a.kernel)?;
    let pairs = if a.all_pairs {
        let space = load_space(a.space.as_deref().expect("clap requires --space"))?;
        if space.len() != kernel.dim() {
            return Err(CliError::Config("space and kernel sizes differ".into()));
        }
        all_pairs(&space)?
    } else {
        a.pairs
            .iter()
            .map(|p| parse_pair(p))
            .collect::<Result<Vec<_>, _>>()?
    };
    let report = cesaro_profile(&kernel, &pairs, a.n_max)?;
    emit(a.out.as_deref(), uniform_csv(&report).as_bytes())?;
    Ok(Report::ok())
}

/// One row per point: the closed-form masses of `Pⁿ(x, ·)` at `x₀` and at `x`
/// next to the values obtained by powering the kernel.
pub fn collapse_table(space: &MetricSpace, x0: usize, n: u64) -> Result<(String, f64), CliError> {
    let p = collapse_kernel(space, x0)?;
    let points: Vec<usize> = (0..space.len()).collect();
    let powered = p.power_rows(&points, n)?;
    let mut out = String::from("x,d,n,closed_x0,closed_x,power_x0,power_x\n");
    let mut gap = 0.0f64;
    for (x, row) in powered.iter().enumerate() {
        let closed = collapse_power_oracle(space, x0, x, n)?;
        let values = [closed.get(x0), closed.get(x), row.get(x0), row.get(x)];
        gap = gap
            .max((values[0] - values[2]).abs())
            .max((values[1] - values[3]).abs());
        writeln!(
            out,
            "{x},{},{n},{},{},{},{}",
            space.distance(x, x0),
            format_float(values[0]),
            format_float(values[1]),
            format_float(values[2]),
            format_float(values[3])
        )
        .expect("writing to a String");
    }
    Ok((out, gap))
}

fn oracle_collapse(a: OracleCollapseArgs) -> Result<Report, CliError> {
    let space = load_space(&a.space)?;
    let (table, gap) = collapse_table(&space, a.x0, a.n)?;
    let bytes = match a.emit {
        Emit::Csv => table.into_bytes(),
        Emit::Json => {
            let mut lines = table.lines();
            let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
            let rows: Vec<serde_json::Map<String, serde_json::Value>> = lines
                .map(|line| {
                    header
                        .iter()
                        .zip(line.split(','))
                        .map(|(k, v)| {
                            let value = v
                                .parse::<u64>()
                                .map(serde_json::Value::from)
                                .or_else(|_| v.parse::<f64>().map(serde_json::Value::from))
                                .unwrap_or_else(|_| v.into());
                            (k.to_string(), value)
                        })
                        .collect()
                })
                .collect();
            to_json_bytes(&rows)
        }
    };
    emit(a.out.as_deref(), &bytes)?;
    let mut report = Report::ok();
    if gap > 1e-12 {
        report.exit_code = EXIT_ASSERTION;
        report
            .messages
            .push(format!("powering differs from the closed form by {gap:e}"));
    }
    Ok(report)
}

fn run_command(a: RunArgs, threads: Option<usize>) -> Result<Report, CliError> {
    let mut config = ExperimentConfig::load(&a.config)?;
    let base = a
        .config
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    if let Some(out) = a.out {
        config.output.dir = out;
    }
    if let Some(seed) = a.seed {
        config.checks.seed = seed;
    }
    if let Some(n) = threads {
        config.threads = n;
    }
    let outcome = run(&config, &base)?;
    let mut messages: Vec<String> = outcome
        .summary
        .warnings
        .iter()
        .map(|w| format!("warning: {w}"))
        .collect();
    if let Some(e) = &outcome.summary.error {
        messages.push(e.clone());
    }
    for c in outcome.summary.failed() {
        messages.push(format!(
            "FAILED {}: lhs = {:e}, rhs = {:e}",
            c.name, c.lhs, c.rhs
        ));
    }
    messages.push(format!(
        "{}: {} ({} inequalities) -> {}",
        outcome.summary.name,
        outcome.summary.status,
        outcome.summary.inequalities.len(),
        outcome.out_dir.display()
    ));
    Ok(Report {
        exit_code: outcome.exit_code,
        messages,
    })
}
