//! The configuration-driven pipeline: space, witnesses, mixture, checks and
//! diagnostics, ending in a summary of every asserted inequality.

use std::path::{Path, PathBuf};

use propa::diagnostics::{collapse_sweep, uniform_profile_pruned, CSV_HEADER, MONOTONE_SLACK};
use propa::io::{witness_from_file, KernelFile, SpaceFile, WitnessLevelFile};
use propa::mixture::{assemble, verify_nstep_tail, verify_tail, verify_uniform_bound, RecipeFile};
use propa::properties::{
    local_uniformity_trials, non_expansion_trials, truncation_trials, TrialSummary,
};
use propa::{
    cesaro_profile, collapse_kernel, DiagnosticsReport, Inequality, MetricSpace, WitnessSequence,
};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, SpaceSpec, WitnessSpec};
use crate::error::{CliError, EXIT_ASSERTION, EXIT_EXHAUSTED, EXIT_OK};
use crate::output::{read_text, write_atomic, write_json};

pub const SUMMARY_FILE: &str = "summary.json";
pub const RECIPE_FILE: &str = "recipe.json";
pub const KERNEL_FILE: &str = "kernel.json";
pub const UNIFORM_FILE: &str = "uniform.csv";
pub const CESARO_FILE: &str = "cesaro.csv";
pub const COLLAPSE_FILE: &str = "collapse_uniform.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceSummary {
    pub points: usize,
    pub margin: u32,
    pub core_points: usize,
    pub diameter: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub kernel: String,
    pub criterion: String,
    pub key: String,
    pub final_value: f64,
    pub monotone: bool,
    pub prune_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub status: String,
    pub exit_code: i32,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub space: SpaceSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recipe: Option<RecipeFile>,
    pub profiles: Vec<ProfileSummary>,
    pub inequalities: Vec<Inequality>,
    pub files: Vec<String>,
}

impl Summary {
    pub fn failed(&self) -> Vec<&Inequality> {
        self.inequalities.iter().filter(|c| !c.pass).collect()
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub summary: Summary,
    pub out_dir: PathBuf,
}

pub fn build_space(spec: &SpaceSpec) -> Result<MetricSpace, CliError> {
    let space = match spec {
        SpaceSpec::Path { length, margin } => MetricSpace::path(*length)?.with_margin(*margin),
        SpaceSpec::Grid { dim, side, margin } => {
            MetricSpace::grid(*dim, *side)?.with_margin(*margin)
        }
        SpaceSpec::Tree {
            rank,
            radius,
            margin,
        } => MetricSpace::free_group_ball(*rank, *radius)?.with_margin(*margin),
        SpaceSpec::File { path, margin } => {
            let file: SpaceFile = propa::io::read_json(&read_text(path)?)?;
            let space = file.into_space()?;
            match margin {
                Some(m) => space.with_margin(*m),
                None => space,
            }
        }
    };
    Ok(space)
}

pub fn build_witnesses(
    spec: &WitnessSpec,
    space: &MetricSpace,
) -> Result<WitnessSequence, CliError> {
    match spec {
        WitnessSpec::File { path } => {
            let levels: Vec<WitnessLevelFile> = propa::io::read_json(&read_text(path)?)?;
            Ok(witness_from_file(space, levels)?)
        }
        other => Ok(WitnessSequence::balls(
            space,
            &other.radii().expect("ball witness spec"),
        )),
    }
}

fn trial_checks(summary: TrialSummary) -> Inequality {
    let mut check = summary.worst;
    let detail = check.detail.take().unwrap_or_default();
    check.detail = Some(format!(
        "{} trials, {} violations; tightest: {detail}",
        summary.trials, summary.violations
    ));
    check
}

fn monotone_check(label: &str, report: &DiagnosticsReport) -> Inequality {
    let rise = report
        .series
        .windows(2)
        .map(|w| w[1].value - w[0].value)
        .fold(f64::NEG_INFINITY, f64::max);
    let rise = if rise.is_finite() { rise } else { 0.0 };
    Inequality::le(
        format!("uniform_monotone[{label}]"),
        rise,
        0.0,
        MONOTONE_SLACK,
    )
    .with_detail("largest increase between consecutive n")
}

fn profile_summary(kernel: &str, report: &DiagnosticsReport) -> ProfileSummary {
    let key = match report.window {
        Some(k) => format!("K={k}"),
        None => format!("{} pairs", report.pairs.len()),
    };
    ProfileSummary {
        kernel: kernel.to_string(),
        criterion: report.criterion.as_str().to_string(),
        key,
        final_value: report.final_value,
        monotone: report.monotone,
        prune_bound: report.prune_bound,
    }
}

fn csv(reports: &[DiagnosticsReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    for r in reports {
        out.push_str(&r.csv_rows());
    }
    out
}

/// Runs `config` with relative paths resolved against `base`. A validation
/// failure returns `Err` before any computation; every later outcome writes
/// a summary and is reported through [`RunOutcome::exit_code`].
pub fn run(config: &ExperimentConfig, base: &Path) -> Result<RunOutcome, CliError> {
    let mut config = config.clone();
    config.resolve_paths(base);
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_validated(&config))
}

fn run_validated(config: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    let out_dir = config.output.dir.clone();
    let space = build_space(&config.space)?;
    let witnesses = build_witnesses(&config.witness, &space)?;
    let mut summary = Summary {
        name: config.name.clone(),
        status: String::new(),
        exit_code: EXIT_OK,
        warnings: Vec::new(),
        error: None,
        space: SpaceSummary {
            points: space.len(),
            margin: space.margin(),
            core_points: space.core().len(),
            diameter: space.diameter(),
        },
        recipe: None,
        profiles: Vec::new(),
        inequalities: Vec::new(),
        files: Vec::new(),
    };
    if space.core().is_empty() {
        return Err(CliError::Config(format!(
            "core margin {} leaves no core points",
            space.margin()
        )));
    }

    let recipe = &config.recipe;
    let mixture = match assemble(&witnesses, &space, &recipe.t, &recipe.eps, recipe.terms) {
        Ok(mk) => mk,
        Err(e @ propa::Error::SelectionExhausted { window, .. }) => {
            if window.saturating_sub(1) > space.margin() as u64 {
                summary.warnings.push(format!(
                    "comparison window {} exceeds the core margin {}",
                    window - 1,
                    space.margin()
                ));
            }
            summary.status = "selection_exhausted".into();
            summary.exit_code = EXIT_EXHAUSTED;
            summary.error = Some(e.to_string());
            summary.files.push(SUMMARY_FILE.into());
            write_json(&out_dir.join(SUMMARY_FILE), &summary)?;
            return Ok(RunOutcome {
                exit_code: EXIT_EXHAUSTED,
                summary,
                out_dir,
            });
        }
        Err(e) => return Err(e.into()),
    };
    for (i, w) in mixture.recipe.windows_beyond(space.margin()) {
        summary.warnings.push(format!(
            "comparison window n_{i}*R_{} = {w} exceeds the core margin {}",
            i - 1,
            space.margin()
        ));
    }
    summary.recipe = Some(mixture.recipe.to_file());
    write_json(&out_dir.join(RECIPE_FILE), &mixture.recipe.to_file())?;
    write_json(
        &out_dir.join(KERNEL_FILE),
        &KernelFile::from_kernel(&mixture.kernel),
    )?;
    summary
        .files
        .extend([RECIPE_FILE.to_string(), KERNEL_FILE.to_string()]);

    let checks = &config.checks;
    summary.inequalities.push(trial_checks(non_expansion_trials(
        checks.seed,
        checks.non_expansion_trials,
        checks.max_points,
    )));
    summary
        .inequalities
        .push(trial_checks(local_uniformity_trials(
            checks.seed,
            checks.local_uniformity_trials,
            checks.max_points,
        )));
    if checks.truncation_radius > 0 {
        let (lo, hi) = checks.truncation_levels;
        let (change, inflation) = truncation_trials(
            &space,
            checks.truncation_radius,
            lo..=hi,
            checks.truncation_window,
        )?;
        summary.inequalities.push(trial_checks(change));
        summary.inequalities.push(trial_checks(inflation));
    }

    for i in 2..=mixture.recipe.terms() {
        summary
            .inequalities
            .push(verify_uniform_bound(&mixture, &space, i)?.check);
    }
    let diag = &config.diagnostics;
    for &delta in &diag.deltas {
        summary
            .inequalities
            .push(verify_tail(&mixture, &space, delta)?.check);
    }
    for &(n, delta) in &diag.nstep {
        summary
            .inequalities
            .push(verify_nstep_tail(&mixture, &space, n, delta)?.check);
    }

    let mut uniform = Vec::new();
    for &k in &diag.windows {
        let report = uniform_profile_pruned(&mixture.kernel, &space, k, diag.n_max, config.prune)?;
        summary
            .inequalities
            .push(monotone_check(&format!("mixture,K={k}"), &report));
        summary.profiles.push(profile_summary("mixture", &report));
        uniform.push(report);
    }
    if !uniform.is_empty() {
        write_atomic(&out_dir.join(UNIFORM_FILE), csv(&uniform).as_bytes())?;
        summary.files.push(UNIFORM_FILE.into());
    }
    if !diag.cesaro_pairs.is_empty() {
        let report = cesaro_profile(&mixture.kernel, &diag.cesaro_pairs, diag.cesaro_n_max)?;
        summary.profiles.push(profile_summary("mixture", &report));
        write_atomic(&out_dir.join(CESARO_FILE), csv(&[report]).as_bytes())?;
        summary.files.push(CESARO_FILE.into());
    }
    if let Some(c) = &diag.collapse {
        let sweep = collapse_sweep(&space, c.x0, c.n_max)?;
        summary.inequalities.push(sweep.oracle);
        let mut pairwise = sweep.pairwise;
        pairwise.detail = Some(format!(
            "{} adjacent pairs, n <= {}, {} violations; tightest: {}",
            sweep.checked_pairs,
            c.n_max,
            sweep.pairwise_violations,
            pairwise.detail.unwrap_or_default()
        ));
        summary.inequalities.push(pairwise);
        let p = collapse_kernel(&space, c.x0)?;
        let report = uniform_profile_pruned(&p, &space, 2, c.n_max, config.prune)?;
        summary
            .inequalities
            .push(monotone_check("collapse,K=2", &report));
        summary.profiles.push(profile_summary("collapse", &report));
        write_atomic(&out_dir.join(COLLAPSE_FILE), csv(&[report]).as_bytes())?;
        summary.files.push(COLLAPSE_FILE.into());
    }

    let failed = summary.failed().len();
    summary.exit_code = if failed == 0 { EXIT_OK } else { EXIT_ASSERTION };
    summary.status = if failed == 0 {
        "pass".into()
    } else {
        format!("{failed} assertion(s) failed")
    };
    summary.files.push(SUMMARY_FILE.into());
    write_json(&out_dir.join(SUMMARY_FILE), &summary)?;
    Ok(RunOutcome {
        exit_code: summary.exit_code,
        summary,
        out_dir,
    })
}
