//! JSON file formats for spaces, kernels, witness sequences and recipes.
//!
//! * space: `{ "points": N, "labels": [...], "edges": [[i, j], ...] }` with the
//!   metric derived by BFS, or `{ "metric": [[...], ...] }`. Optional
//!   `"boundary": [...]` lists truncation-boundary points and `"margin": m`
//!   sets the core margin.
//! * kernel: `{ "n": N, "entries": [[row, col, p], ...] }` sorted by `(row, col)`.
//! * witness: `[ { "radius": R, "kernel": <kernel> }, ... ]`.
//! * recipe: see [`crate::mixture::RecipeFile`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{Kernel, Measure};
use crate::space::MetricSpace;
use crate::witness::WitnessSequence;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<(usize, usize)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Vec<Vec<u32>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<u32>,
}

impl SpaceFile {
    pub fn from_space(space: &MetricSpace) -> Self {
        let (points, edges, metric) = match space.edges() {
            Some(edges) => (Some(space.len()), Some(edges.to_vec()), None),
            None => {
                let metric = (0..space.len())
                    .map(|x| (0..space.len()).map(|y| space.distance(x, y)).collect())
                    .collect();
                (None, None, Some(metric))
            }
        };
        Self {
            points,
            labels: Some(space.labels().to_vec()),
            edges,
            metric,
            boundary: Some(space.boundary().to_vec()),
            margin: Some(space.margin()),
        }
    }

    pub fn into_space(self) -> Result<MetricSpace> {
        let boundary = self.boundary.unwrap_or_default();
        let space = match (self.edges, self.metric) {
            (Some(edges), None) => {
                let points = self
                    .points
                    .ok_or_else(|| Error::Format("edge-list space needs \"points\"".into()))?;
                MetricSpace::from_edges(points, edges, self.labels, boundary)?
            }
            (None, Some(metric)) => {
                if let Some(p) = self.points {
                    if p != metric.len() {
                        return Err(Error::Format(format!(
                            "\"points\" = {p} but the metric has {} rows",
                            metric.len()
                        )));
                    }
                }
                MetricSpace::from_metric(metric, self.labels, boundary)?
            }
            _ => {
                return Err(Error::Format(
                    "space file needs exactly one of \"edges\" or \"metric\"".into(),
                ))
            }
        };
        Ok(space.with_margin(self.margin.unwrap_or(0)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelFile {
    pub n: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl KernelFile {
    pub fn from_kernel(kernel: &Kernel) -> Self {
        let entries = kernel
            .rows()
            .iter()
            .enumerate()
            .flat_map(|(x, row)| row.entries().iter().map(move |&(y, p)| (x, y, p)))
            .collect();
        Self {
            n: kernel.dim(),
            entries,
        }
    }

    /// Requires strictly increasing `(row, col)` and row sums within `1e-9`.
    pub fn into_kernel(self) -> Result<Kernel> {
        let n = self.n;
        if n == 0 {
            return Err(Error::Format("kernel with n = 0".into()));
        }
        if let Some(w) = self
            .entries
            .windows(2)
            .find(|w| (w[0].0, w[0].1) >= (w[1].0, w[1].1))
        {
            return Err(Error::Format(format!(
                "entries not sorted by (row, col) at ({}, {})",
                w[1].0, w[1].1
            )));
        }
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (r, c, p) in self.entries {
            if r >= n {
                return Err(Error::PointOutOfRange { point: r, len: n });
            }
            rows[r].push((c, p));
        }
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(r, entries)| {
                Measure::new(n, entries).map_err(|e| Error::Format(format!("row {r}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Kernel::from_rows(rows)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessLevelFile {
    pub radius: u32,
    pub kernel: KernelFile,
}

pub fn witness_to_file(ws: &WitnessSequence) -> Vec<WitnessLevelFile> {
    ws.levels()
        .iter()
        .map(|l| WitnessLevelFile {
            radius: l.support_radius,
            kernel: KernelFile::from_kernel(&l.kernel),
        })
        .collect()
}

pub fn witness_from_file(
    space: &MetricSpace,
    levels: Vec<WitnessLevelFile>,
) -> Result<WitnessSequence> {
    let kernels = levels
        .into_iter()
        .map(|l| Ok((l.radius, l.kernel.into_kernel()?)))
        .collect::<Result<Vec<_>>>()?;
    WitnessSequence::from_kernels(space, kernels)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}
