//! Seeded randomized and constructive checks of the convolution and
//! truncation inequalities. Each runner reports the number of violations and
//! the instance with the smallest margin.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::check::Inequality;
use crate::error::{Error, Result};
use crate::measure::{convolve, l1_distance, Kernel, Measure};
use crate::space::MetricSpace;
use crate::witness::{build_ball_witness, truncate_renormalize};

/// Slack on the convolution inequalities.
pub const CONVOLUTION_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct TrialSummary {
    pub trials: usize,
    pub violations: usize,
    /// The instance with the smallest `rhs + slack − lhs`.
    pub worst: Inequality,
}

impl TrialSummary {
    pub fn pass(&self) -> bool {
        self.violations == 0
    }
}

struct Tally {
    name: String,
    trials: usize,
    violations: usize,
    worst: Option<Inequality>,
}

impl Tally {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            trials: 0,
            violations: 0,
            worst: None,
        }
    }

    fn record(&mut self, check: Inequality) {
        self.trials += 1;
        if !check.pass {
            self.violations += 1;
        }
        if self
            .worst
            .as_ref()
            .is_none_or(|w| check.margin() < w.margin())
        {
            self.worst = Some(check);
        }
    }

    fn finish(self) -> TrialSummary {
        let mut worst = self
            .worst
            .unwrap_or_else(|| Inequality::le(self.name.clone(), 0.0, 0.0, 0.0));
        worst.name = self.name;
        worst.pass = self.violations == 0;
        TrialSummary {
            trials: self.trials,
            violations: self.violations,
            worst,
        }
    }
}

/// Random probability vector on a random subset of at most `max_support` points.
pub fn random_measure<R: Rng>(rng: &mut R, dim: usize, max_support: usize) -> Measure {
    let size = rng.gen_range(1..=max_support.clamp(1, dim));
    let mut points: Vec<usize> = (0..dim).collect();
    points.shuffle(rng);
    points.truncate(size);
    let weights: Vec<f64> = (0..size).map(|_| rng.gen_range(0.01..1.0)).collect();
    let total: f64 = weights.iter().sum();
    Measure::new(
        dim,
        points
            .into_iter()
            .zip(weights.into_iter().map(|w| w / total)),
    )
    .expect("normalized weights")
}

pub fn random_kernel<R: Rng>(rng: &mut R, dim: usize, max_row_support: usize) -> Kernel {
    Kernel::from_rows(
        (0..dim)
            .map(|_| random_measure(rng, dim, max_row_support))
            .collect(),
    )
    .expect("square kernel")
}

/// `‖μ∗φ − ν∗φ‖₁ ≤ ‖μ − ν‖₁` on random triples over spaces of up to `max_points` points.
pub fn non_expansion_trials(seed: u64, trials: usize, max_points: usize) -> TrialSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::new("non_expansion");
    for t in 0..trials {
        let dim = rng.gen_range(2..=max_points.max(2));
        let mu = random_measure(&mut rng, dim, dim);
        let nu = random_measure(&mut rng, dim, dim);
        let phi = random_kernel(&mut rng, dim, dim);
        let lhs =
            l1_distance(&convolve(&mu, &phi).unwrap(), &convolve(&nu, &phi).unwrap()).unwrap();
        let rhs = l1_distance(&mu, &nu).unwrap();
        tally.record(
            Inequality::le("non_expansion", lhs, rhs, CONVOLUTION_SLACK)
                .with_detail(format!("trial {t}, {dim} points")),
        );
    }
    tally.finish()
}

/// Constructive check of `‖μ∗φ − ν∗φ‖₁ < 2ε` when every row of `φ` on
/// `Supp μ ∪ Supp ν` is within `ε` of a reference row `φ(x₀, ·)`.
pub fn local_uniformity_trials(seed: u64, trials: usize, max_points: usize) -> TrialSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::new("local_uniformity_contraction");
    for t in 0..trials {
        let dim = rng.gen_range(2..=max_points.max(2));
        let eps: f64 = rng.gen_range(0.02..0.5);
        let mu = random_measure(&mut rng, dim, dim.min(8));
        let nu = random_measure(&mut rng, dim, dim.min(8));
        let anchor = rng.gen_range(0..dim);
        let reference = random_measure(&mut rng, dim, dim);

        let mut rows: Vec<Measure> = (0..dim)
            .map(|_| random_measure(&mut rng, dim, dim))
            .collect();
        rows[anchor] = reference.clone();
        let mut near: Vec<usize> = mu.support().chain(nu.support()).collect();
        near.sort_unstable();
        near.dedup();
        for &x in &near {
            if x == anchor {
                continue;
            }
            // (1 − s)·ref + s·q is within 2s < ε of ref.
            let s: f64 = rng.gen_range(0.0..eps / 2.0);
            let q = random_measure(&mut rng, dim, dim);
            let mixed = reference
                .entries()
                .iter()
                .map(|&(y, v)| (y, (1.0 - s) * v))
                .chain(q.entries().iter().map(|&(y, v)| (y, s * v)));
            rows[x] = Measure::new(dim, mixed).expect("convex combination");
        }
        let phi = Kernel::from_rows(rows).unwrap();
        let spread = near
            .iter()
            .map(|&x| l1_distance(phi.row(x), phi.row(anchor)).unwrap())
            .fold(0.0, f64::max);
        debug_assert!(spread < eps);

        let lhs =
            l1_distance(&convolve(&mu, &phi).unwrap(), &convolve(&nu, &phi).unwrap()).unwrap();
        tally.record(
            Inequality::lt(
                "local_uniformity_contraction",
                lhs,
                2.0 * eps,
                CONVOLUTION_SLACK,
            )
            .with_detail(format!(
                "trial {t}, {dim} points, eps = {eps}, row spread {spread}"
            )),
        );
    }
    tally.finish()
}

/// Ball witness of radius `radius` carrying an extra tail of mass exactly
/// `1/n` at a point outside the ball: row `x` is
/// `(1 − 1/n)·unif B(x, radius) + (1/n)·δ_{z(x)}` with `z(x)` the smallest
/// point at distance exactly `radius + 1` from `x` (or, failing that, the
/// smallest point farther than `radius`).
pub fn ball_witness_with_tail(space: &MetricSpace, radius: u32, n: u32) -> Result<Kernel> {
    if n < 2 {
        return Err(Error::InvalidParameter("tail level n must be >= 2".into()));
    }
    let dim = space.len();
    let ball = build_ball_witness(space, radius);
    let tail = 1.0 / n as f64;
    let rows = (0..dim)
        .map(|x| {
            let z = (0..dim)
                .find(|&y| space.distance(x, y) == radius + 1)
                .or_else(|| (0..dim).find(|&y| space.distance(x, y) > radius))
                .ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "no point farther than {radius} from {x}; space too small"
                    ))
                })?;
            let entries = ball
                .row(x)
                .entries()
                .iter()
                .map(|&(y, v)| (y, (1.0 - tail) * v))
                .chain(std::iter::once((z, tail)));
            Measure::new(dim, entries)
        })
        .collect::<Result<Vec<_>>>()?;
    Kernel::from_rows(rows)
}

/// Truncation at `radius` of the tailed witnesses for every `n` in `levels`:
/// per-row change `≤ 3/n`, and pairwise variation over core pairs with
/// `d(x, y) < window` inflated by at most `6/n`.
pub fn truncation_trials(
    space: &MetricSpace,
    radius: u32,
    levels: impl IntoIterator<Item = u32>,
    window: u64,
) -> Result<(TrialSummary, TrialSummary)> {
    let mut change = Tally::new("truncation_row_change");
    let mut inflation = Tally::new("truncation_variation_inflation");
    let pairs = space.core_pairs_within(window);
    for n in levels {
        let phi = ball_witness_with_tail(space, radius, n)?;
        let cut = truncate_renormalize(&phi, space, radius)?;
        let bound = 3.0 / n as f64;
        let (worst_x, worst) = (0..space.len())
            .map(|x| (x, l1_distance(phi.row(x), cut.row(x)).unwrap()))
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (x, v)| if v > acc.1 { (x, v) } else { acc },
            );
        change.record(
            Inequality::le("truncation_row_change", worst, bound, 0.0)
                .with_detail(format!("n = {n}, worst row {worst_x}")),
        );
        let bound = 6.0 / n as f64;
        let mut excess = f64::NEG_INFINITY;
        let mut at = None;
        for &(x, y) in &pairs {
            let before = l1_distance(phi.row(x), phi.row(y)).unwrap();
            let after = l1_distance(cut.row(x), cut.row(y)).unwrap();
            if after - before > excess {
                excess = after - before;
                at = Some((x, y));
            }
        }
        if let Some((x, y)) = at {
            inflation.record(
                Inequality::le("truncation_variation_inflation", excess, bound, 0.0)
                    .with_detail(format!("n = {n}, pair ({x},{y})")),
            );
        }
    }
    Ok((change.finish(), inflation.finish()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_objects_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let m = random_measure(&mut rng, 9, 4);
            assert!(m.support_len() >= 1 && m.support_len() <= 4);
            assert!((m.total_mass() - 1.0).abs() < 1e-12);
        }
        let k = random_kernel(&mut rng, 6, 6);
        assert_eq!(k.dim(), 6);
    }

    #[test]
    fn small_runs_pass() {
        assert!(non_expansion_trials(3, 50, 12).pass());
        assert!(local_uniformity_trials(3, 50, 12).pass());
        let s = MetricSpace::path(60).unwrap().with_margin(10);
        let (change, inflation) = truncation_trials(&s, 3, 2..=6, 4).unwrap();
        assert!(change.pass() && inflation.pass());
        assert_eq!(change.trials, 5);
        // The row change is exactly 2/n; the tightest margin is at n = 6.
        assert!((change.worst.lhs - 2.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn tailed_witness_row_shape() {
        let s = MetricSpace::path(20).unwrap();
        let k = ball_witness_with_tail(&s, 2, 4).unwrap();
        let row = k.row(10);
        assert!((row.get(7) - 0.25).abs() < 1e-15);
        assert!((row.get(10) - 0.75 / 5.0).abs() < 1e-15);
        assert!(ball_witness_with_tail(&s, 2, 1).is_err());
        assert!(ball_witness_with_tail(&MetricSpace::path(3).unwrap(), 5, 4).is_err());
    }
}
