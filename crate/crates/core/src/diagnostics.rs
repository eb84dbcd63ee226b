//! L1 mixing criteria for a kernel `P`.
//!
//! * uniform: `sup_{d(x,y) < K} ‖Pⁿ(x, ·) − Pⁿ(y, ·)‖₁` over core pairs, as a
//!   function of `n`. It never increases, since convolution is non-expanding.
//! * Cesàro: `(1/n)·‖Σ_{i≤n} Pⁱ(x, ·) − Σ_{i≤n} Pⁱ(y, ·)‖₁` on given pairs.
//!
//! The collapse kernel (`x ↦ mass drifting to a basepoint x₀`) has a closed
//! form for every power; it is pointwise trivial in the Cesàro sense on any
//! space while its uniform profile stays close to 2.

use std::fmt::Write as _;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::check::Inequality;
use crate::error::{Error, Result};
use crate::measure::{l1_distance, Kernel, Measure};
use crate::space::MetricSpace;
use crate::witness::sup_over_pairs;

/// Slack on the monotonicity of the uniform series.
pub const MONOTONE_SLACK: f64 = 1e-12;

/// Exhaustive Cesàro pairs are only offered up to this many points.
pub const EXHAUSTIVE_PAIR_LIMIT: usize = 300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Uniform,
    Cesaro,
}

impl Criterion {
    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Uniform => "uniform",
            Criterion::Cesaro => "cesaro",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesPoint {
    pub n: u64,
    pub value: f64,
    /// First pair attaining the value.
    pub pair: Option<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsReport {
    pub criterion: Criterion,
    /// Distance window `K` (uniform only).
    pub window: Option<u32>,
    /// Pairs the sup ranges over.
    pub pairs: Vec<(usize, usize)>,
    pub series: Vec<SeriesPoint>,
    /// Whether the series never increases by more than [`MONOTONE_SLACK`].
    pub monotone: bool,
    pub final_value: f64,
    /// Accumulated L1 perturbation from pruning (0 without pruning).
    pub prune_bound: f64,
}

impl DiagnosticsReport {
    fn new(
        criterion: Criterion,
        window: Option<u32>,
        pairs: Vec<(usize, usize)>,
        series: Vec<SeriesPoint>,
        prune_bound: f64,
    ) -> Self {
        let monotone = series
            .windows(2)
            .all(|w| w[1].value <= w[0].value + MONOTONE_SLACK);
        let final_value = series.last().map_or(0.0, |p| p.value);
        Self {
            criterion,
            window,
            pairs,
            series,
            monotone,
            final_value,
            prune_bound,
        }
    }

    pub fn value_at(&self, n: u64) -> Option<f64> {
        self.series.iter().find(|p| p.n == n).map(|p| p.value)
    }

    /// Rows `criterion,n,K_or_pair,value` (no header).
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for p in &self.series {
            let key = match (self.criterion, self.window, p.pair) {
                (Criterion::Uniform, Some(k), _) => k.to_string(),
                (_, _, Some((x, y))) => format!("{x}:{y}"),
                _ => String::new(),
            };
            writeln!(
                out,
                "{},{},{},{}",
                self.criterion.as_str(),
                p.n,
                key,
                format_float(p.value)
            )
            .expect("writing to a String");
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(CSV_HEADER.as_bytes())?;
        w.write_all(self.csv_rows().as_bytes())
    }
}

pub const CSV_HEADER: &str = "criterion,n,K_or_pair,value\n";

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn check_n_max(n_max: u64) -> Result<()> {
    if n_max < 1 {
        return Err(Error::InvalidParameter("n_max must be >= 1".into()));
    }
    Ok(())
}

fn tracked_points(pairs: &[(usize, usize)]) -> Vec<usize> {
    let mut points: Vec<usize> = pairs.iter().flat_map(|&(x, y)| [x, y]).collect();
    points.sort_unstable();
    points.dedup();
    points
}

/// Uniform criterion for `n = 1..=n_max`.
pub fn uniform_profile(
    p: &Kernel,
    space: &MetricSpace,
    window: u32,
    n_max: u64,
) -> Result<DiagnosticsReport> {
    uniform_profile_pruned(p, space, window, n_max, None)
}

/// [`uniform_profile`] with optional pruning of the propagated rows.
pub fn uniform_profile_pruned(
    p: &Kernel,
    space: &MetricSpace,
    window: u32,
    n_max: u64,
    prune: Option<f64>,
) -> Result<DiagnosticsReport> {
    if window < 1 {
        return Err(Error::InvalidParameter("window K must be >= 1".into()));
    }
    check_n_max(n_max)?;
    if p.dim() != space.len() {
        return Err(Error::DimensionMismatch {
            left: p.dim(),
            right: space.len(),
        });
    }
    if space.core().is_empty() {
        return Err(Error::EmptyCore {
            margin: space.margin(),
        });
    }
    let pairs = space.core_pairs_within(window as u64);
    if pairs.is_empty() {
        return Err(Error::EmptyPairSet { window });
    }
    let points = tracked_points(&pairs);
    let slot = |q: usize| points.binary_search(&q).expect("tracked point");

    let mut prune_bound = 0.0;
    let mut rows: Vec<Measure> = points.iter().map(|&x| p.row(x).clone()).collect();
    let mut series = Vec::with_capacity(n_max as usize);
    for n in 1..=n_max {
        if n > 1 {
            rows = p.step_rows(&rows)?;
        }
        if let Some(threshold) = prune {
            let mut worst = 0.0f64;
            for row in &mut rows {
                let (pruned, delta) = row.pruned(threshold);
                *row = pruned;
                worst = worst.max(delta);
            }
            prune_bound += worst;
        }
        let sup = sup_over_pairs(&pairs, |x, y| {
            l1_distance(&rows[slot(x)], &rows[slot(y)]).expect("same space")
        });
        series.push(SeriesPoint {
            n,
            value: sup.value,
            pair: sup.pair,
        });
    }
    Ok(DiagnosticsReport::new(
        Criterion::Uniform,
        Some(window),
        pairs,
        series,
        prune_bound,
    ))
}

/// Every unordered pair `x < y`; refused above [`EXHAUSTIVE_PAIR_LIMIT`] points.
pub fn all_pairs(space: &MetricSpace) -> Result<Vec<(usize, usize)>> {
    if space.len() > EXHAUSTIVE_PAIR_LIMIT {
        return Err(Error::InvalidParameter(format!(
            "exhaustive pairs need at most {EXHAUSTIVE_PAIR_LIMIT} points, space has {}",
            space.len()
        )));
    }
    Ok((0..space.len())
        .flat_map(|x| ((x + 1)..space.len()).map(move |y| (x, y)))
        .collect())
}

/// Cesàro criterion for `n = 1..=n_max`, maximized over `pairs`.
pub fn cesaro_profile(
    p: &Kernel,
    pairs: &[(usize, usize)],
    n_max: u64,
) -> Result<DiagnosticsReport> {
    check_n_max(n_max)?;
    if pairs.is_empty() {
        return Err(Error::InvalidParameter(
            "cesaro criterion needs at least one pair".into(),
        ));
    }
    let dim = p.dim();
    for &(x, y) in pairs {
        for q in [x, y] {
            if q >= dim {
                return Err(Error::PointOutOfRange { point: q, len: dim });
            }
        }
    }
    let points = tracked_points(pairs);
    let slot = |q: usize| points.binary_search(&q).expect("tracked point");

    let mut rows: Vec<Measure> = points.iter().map(|&x| p.row(x).clone()).collect();
    let mut sums = vec![vec![0.0f64; dim]; points.len()];
    let mut series = Vec::with_capacity(n_max as usize);
    for n in 1..=n_max {
        if n > 1 {
            rows = p.step_rows(&rows)?;
        }
        for (sum, row) in sums.iter_mut().zip(&rows) {
            for &(y, v) in row.entries() {
                sum[y] += v;
            }
        }
        let sup = sup_over_pairs(pairs, |x, y| {
            let (a, b) = (&sums[slot(x)], &sums[slot(y)]);
            let total: f64 = a.iter().zip(b).map(|(u, v)| (u - v).abs()).sum();
            total / n as f64
        });
        series.push(SeriesPoint {
            n,
            value: sup.value,
            pair: sup.pair,
        });
    }
    Ok(DiagnosticsReport::new(
        Criterion::Cesaro,
        None,
        pairs.to_vec(),
        series,
        0.0,
    ))
}

fn drift_ratio(space: &MetricSpace, x0: usize, x: usize) -> f64 {
    let d = space.distance(x, x0) as f64;
    d / (1.0 + d)
}

/// `P(x₀, ·) = δ_{x₀}` and, for `x ≠ x₀` at distance `d` from `x₀`,
/// `P(x, ·) = 1/(1+d) δ_{x₀} + d/(1+d) δ_x`.
///
/// The kernel is flagged as having unbounded support: on the infinite space
/// its row radius `d(x, x₀)` is not bounded.
pub fn collapse_kernel(space: &MetricSpace, x0: usize) -> Result<Kernel> {
    space.check_point(x0)?;
    let n = space.len();
    let rows = (0..n)
        .map(|x| {
            if x == x0 {
                return Measure::dirac(n, x0);
            }
            let d = space.distance(x, x0) as f64;
            let stay = d / (1.0 + d);
            let leave = 1.0 / (1.0 + d);
            let entries = if x < x0 {
                vec![(x, stay), (x0, leave)]
            } else {
                vec![(x0, leave), (x, stay)]
            };
            Measure::from_sorted_unchecked(n, entries)
        })
        .collect();
    Ok(Kernel::from_rows(rows)?.mark_unbounded())
}

/// `Pⁿ(x, ·) = (1 − qⁿ) δ_{x₀} + qⁿ δ_x` with `q = d(x,x₀)/(1+d(x,x₀))`,
/// evaluated directly.
pub fn collapse_power_oracle(space: &MetricSpace, x0: usize, x: usize, n: u64) -> Result<Measure> {
    space.check_point(x0)?;
    space.check_point(x)?;
    if n < 1 {
        return Err(Error::InvalidParameter(
            "power exponent must be >= 1".into(),
        ));
    }
    let dim = space.len();
    if x == x0 {
        return Ok(Measure::dirac(dim, x0));
    }
    let stay = drift_ratio(space, x0, x).powi(n as i32);
    let entries = if x < x0 {
        vec![(x, stay), (x0, 1.0 - stay)]
    } else {
        vec![(x0, 1.0 - stay), (x, stay)]
    };
    Ok(Measure::from_sorted_unchecked(
        dim,
        entries.into_iter().filter(|&(_, v)| v > 0.0).collect(),
    ))
}

/// `‖Pⁿ(x,·) − Pⁿ(y,·)‖₁ ≤ 2qₓⁿ + 2q_yⁿ` for a collapse kernel `p` with
/// basepoint `x0`. The left side is computed by powering `p`.
pub fn pairwise_l1_bound_check(
    p: &Kernel,
    space: &MetricSpace,
    x0: usize,
    x: usize,
    y: usize,
    n: u64,
) -> Result<Inequality> {
    space.check_point(x0)?;
    space.check_point(x)?;
    space.check_point(y)?;
    let rows = p.power_rows(&[x, y], n)?;
    let lhs = l1_distance(&rows[0], &rows[1])?;
    let rhs = 2.0 * drift_ratio(space, x0, x).powi(n as i32)
        + 2.0 * drift_ratio(space, x0, y).powi(n as i32);
    Ok(Inequality::le(
        format!("collapse_pairwise_bound[x={x},y={y},n={n}]"),
        lhs,
        rhs,
        1e-12,
    ))
}

/// Largest entrywise difference between two measures.
pub fn max_entry_difference(a: &Measure, b: &Measure) -> f64 {
    let (mut i, mut j) = (0, 0);
    let (ea, eb) = (a.entries(), b.entries());
    let mut worst = 0.0f64;
    while i < ea.len() || j < eb.len() {
        let diff = match (ea.get(i), eb.get(j)) {
            (Some(&(x, u)), Some(&(y, v))) if x == y => {
                i += 1;
                j += 1;
                u - v
            }
            (Some(&(x, u)), Some(&(y, _))) if x < y => {
                i += 1;
                u
            }
            (Some(&(_, u)), None) => {
                i += 1;
                u
            }
            (_, Some(&(_, v))) => {
                j += 1;
                v
            }
            (None, None) => unreachable!(),
        };
        worst = worst.max(diff.abs());
    }
    worst
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollapseSweep {
    /// Largest entrywise gap between powering and the closed form, over all
    /// points and `n ≤ n_max`, against `1e-12`.
    pub oracle: Inequality,
    /// The pairwise bound with the smallest margin over all adjacent pairs
    /// and `n ≤ n_max`.
    pub pairwise: Inequality,
    pub pairwise_violations: usize,
    pub checked_pairs: usize,
}

/// Powers the collapse kernel on every point up to `n_max`, comparing each
/// row with [`collapse_power_oracle`] and each pair at distance 1 with the
/// bound of [`pairwise_l1_bound_check`].
pub fn collapse_sweep(space: &MetricSpace, x0: usize, n_max: u64) -> Result<CollapseSweep> {
    check_n_max(n_max)?;
    let p = collapse_kernel(space, x0)?;
    let adjacent: Vec<(usize, usize)> = (0..space.len())
        .flat_map(|x| ((x + 1)..space.len()).map(move |y| (x, y)))
        .filter(|&(x, y)| space.distance(x, y) == 1)
        .collect();
    let mut rows: Vec<Measure> = p.rows().to_vec();
    let mut oracle_gap = (0.0f64, 0usize, 1u64);
    let mut worst: Option<Inequality> = None;
    let mut violations = 0;
    for n in 1..=n_max {
        if n > 1 {
            rows = p.step_rows(&rows)?;
        }
        for (x, row) in rows.iter().enumerate() {
            let gap = max_entry_difference(row, &collapse_power_oracle(space, x0, x, n)?);
            if gap > oracle_gap.0 {
                oracle_gap = (gap, x, n);
            }
        }
        for &(x, y) in &adjacent {
            let lhs = l1_distance(&rows[x], &rows[y])?;
            let rhs = 2.0 * drift_ratio(space, x0, x).powi(n as i32)
                + 2.0 * drift_ratio(space, x0, y).powi(n as i32);
            let check = Inequality::le("collapse_pairwise_bound", lhs, rhs, 1e-12)
                .with_detail(format!("x = {x}, y = {y}, n = {n}"));
            if !check.pass {
                violations += 1;
            }
            if worst.as_ref().is_none_or(|w| check.margin() < w.margin()) {
                worst = Some(check);
            }
        }
    }
    let (gap, x, n) = oracle_gap;
    let mut pairwise =
        worst.unwrap_or_else(|| Inequality::le("collapse_pairwise_bound", 0.0, 0.0, 1e-12));
    pairwise.pass = violations == 0;
    Ok(CollapseSweep {
        oracle: Inequality::le("collapse_oracle_agreement", gap, 1e-12, 0.0)
            .with_detail(format!("largest gap at x = {x}, n = {n}")),
        pairwise,
        pairwise_violations: violations,
        checked_pairs: adjacent.len(),
    })
}
