//! Experiment configuration files.

use std::path::{Path, PathBuf};

use propa::mixture::Schedule;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub space: SpaceSpec,
    pub witness: WitnessSpec,
    pub recipe: RecipeSpec,
    pub diagnostics: DiagnosticsSpec,
    #[serde(default)]
    pub checks: CheckSpec,
    pub output: OutputSpec,
    /// Drop kernel entries below this threshold while propagating rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prune: Option<f64>,
    #[serde(default = "default_threads")]
    pub threads: usize,
}

fn default_threads() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceSpec {
    Path {
        length: usize,
        #[serde(default)]
        margin: u32,
    },
    Grid {
        dim: usize,
        side: usize,
        #[serde(default)]
        margin: u32,
    },
    Tree {
        rank: usize,
        radius: usize,
        #[serde(default)]
        margin: u32,
    },
    /// A space file; `margin` overrides the one stored in the file.
    File {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        margin: Option<u32>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WitnessSpec {
    Balls { radii: Vec<u32> },
    BallRange { from: u32, to: u32 },
    File { path: PathBuf },
}

impl WitnessSpec {
    pub fn radii(&self) -> Option<Vec<u32>> {
        match self {
            WitnessSpec::Balls { radii } => Some(radii.clone()),
            WitnessSpec::BallRange { from, to } => Some((*from..=*to).collect()),
            WitnessSpec::File { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecipeSpec {
    pub t: Schedule,
    pub eps: Schedule,
    #[serde(rename = "I")]
    pub terms: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSpec {
    /// Windows `K` for the uniform criterion.
    #[serde(rename = "K")]
    pub windows: Vec<u32>,
    pub n_max: u64,
    /// `δ` values for the one-step tail radius.
    pub deltas: Vec<f64>,
    /// `(n, δ)` pairs for the n-step tail radius.
    #[serde(default)]
    pub nstep: Vec<(u64, f64)>,
    /// Pairs for the Cesàro criterion; empty means no Cesàro profile.
    #[serde(default)]
    pub cesaro_pairs: Vec<(usize, usize)>,
    #[serde(default = "default_cesaro_n_max")]
    pub cesaro_n_max: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collapse: Option<CollapseSpec>,
}

fn default_cesaro_n_max() -> u64 {
    50
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollapseSpec {
    pub x0: usize,
    pub n_max: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    pub seed: u64,
    pub non_expansion_trials: usize,
    pub local_uniformity_trials: usize,
    pub max_points: usize,
    /// Ball radius for the truncation checks; `0` skips them.
    pub truncation_radius: u32,
    pub truncation_levels: (u32, u32),
    pub truncation_window: u64,
}

impl Default for CheckSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            non_expansion_trials: 1000,
            local_uniformity_trials: 200,
            max_points: 50,
            truncation_radius: 3,
            truncation_levels: (2, 50),
            truncation_window: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| invalid(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Resolves relative input files against `base`; the output directory
    /// stays relative to the working directory.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let SpaceSpec::File { path, .. } = &mut self.space {
            fix(path);
        }
        if let WitnessSpec::File { path } = &mut self.witness {
            fix(path);
        }
    }

    /// Range and existence checks; nothing is computed before this passes.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(invalid("name must be a nonempty plain file stem"));
        }
        match &self.space {
            SpaceSpec::Path { length, .. } if *length < 1 => {
                return Err(invalid("path length must be >= 1"))
            }
            SpaceSpec::Grid { dim, side, .. } if !(1..=3).contains(dim) || *side < 1 => {
                return Err(invalid("grid needs dim in 1..=3 and side >= 1"))
            }
            SpaceSpec::Tree { rank, .. } if *rank < 1 => {
                return Err(invalid("tree rank must be >= 1"))
            }
            SpaceSpec::File { path, .. } if !path.is_file() => {
                return Err(invalid(format!(
                    "space file {} does not exist",
                    path.display()
                )))
            }
            _ => {}
        }
        match &self.witness {
            WitnessSpec::Balls { radii } if radii.is_empty() => {
                return Err(invalid("witness radii list is empty"))
            }
            WitnessSpec::BallRange { from, to } if from > to => {
                return Err(invalid("witness radius range is empty"))
            }
            WitnessSpec::File { path } if !path.is_file() => {
                return Err(invalid(format!(
                    "witness file {} does not exist",
                    path.display()
                )))
            }
            _ => {}
        }
        if self.recipe.terms < 1 {
            return Err(invalid("I must be >= 1"));
        }
        let t = self
            .recipe
            .t
            .terms(self.recipe.terms)
            .map_err(|e| invalid(e.to_string()))?;
        let eps = self
            .recipe
            .eps
            .terms(self.recipe.terms)
            .map_err(|e| invalid(e.to_string()))?;
        if t.iter().chain(&eps).any(|&v| !(v > 0.0 && v <= 1.0)) {
            return Err(invalid("t and eps terms must lie in (0, 1]"));
        }
        if t[..t.len() - 1].iter().sum::<f64>() >= 1.0 {
            return Err(invalid("all but the last weight must sum below 1"));
        }
        let d = &self.diagnostics;
        if d.windows.contains(&0) {
            return Err(invalid("uniform windows K must be >= 1"));
        }
        if d.n_max < 1 || d.cesaro_n_max < 1 {
            return Err(invalid("n_max must be >= 1"));
        }
        let bad_delta = |v: f64| !(v > 0.0 && v < 1.0);
        if d.deltas.iter().copied().any(bad_delta) || d.nstep.iter().any(|&(_, v)| bad_delta(v)) {
            return Err(invalid("every delta must lie in (0, 1)"));
        }
        if d.nstep.iter().any(|&(n, _)| n < 1) {
            return Err(invalid("n-step tail counts must be >= 1"));
        }
        if let Some(c) = &d.collapse {
            if c.n_max < 1 {
                return Err(invalid("collapse n_max must be >= 1"));
            }
        }
        let c = &self.checks;
        if c.max_points < 2 {
            return Err(invalid("checks.max_points must be >= 2"));
        }
        if c.truncation_levels.0 < 2 || c.truncation_levels.0 > c.truncation_levels.1 {
            return Err(invalid("truncation levels must satisfy 2 <= from <= to"));
        }
        if c.truncation_window < 1 {
            return Err(invalid("truncation window must be >= 1"));
        }
        if let Some(p) = self.prune {
            if !(p > 0.0 && p < 1.0) {
                return Err(invalid("prune threshold must lie in (0, 1)"));
            }
        }
        if self.threads < 1 {
            return Err(invalid("threads must be >= 1"));
        }
        Ok(())
    }
}
