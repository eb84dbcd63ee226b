//! Mixture kernels `P = Σ tᵢ φᵢ` built from a witness sequence.
//!
//! Construction order:
//!
//! 1. weights `tᵢ` and tolerances `εᵢ` come from a [`Schedule`];
//! 2. step counts: `nᵢ` is the smallest integer above `n_{i−1}` with
//!    `(t₁ + … + t_{i−1})^{nᵢ} < εᵢ` (decided in exact rational arithmetic);
//! 3. witness selection: `φᵢ` is the first level with support radius
//!    `Rᵢ > max(R_{i−1}, i)` whose variation over the window
//!    `d(x, y) < nᵢ·R_{i−1} + 1` is below `εᵢ` (`R₀ = 0`);
//! 4. the infinite sum is truncated after `I` terms and the residual weight
//!    `Σ_{i>I} tᵢ` is folded into `t_I`.
//!
//! The resulting kernel satisfies, for every `i ≥ 2`,
//! `‖P^{nᵢ}(x, ·) − P^{nᵢ}(y, ·)‖₁ ≤ 4εᵢ` whenever `d(x, y) < R_{i−1}`, and has
//! tail radii `R_δ = R_{i₀}` for the smallest `i₀` with `Σ_{i≥i₀} tᵢ < δ`.

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::check::Inequality;
use crate::error::{Error, Result};
use crate::measure::{l1_distance, tail_mass, Kernel};
use crate::space::MetricSpace;
use crate::witness::{sup_over_pairs, variation_profile, PairSup, WitnessSequence};

/// Slack allowed on L1 assertions.
pub const L1_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedSchedule {
    /// `2^{-i}`
    Dyadic,
}

/// A sequence indexed from 1, either named or given explicitly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Schedule {
    Named(NamedSchedule),
    Explicit(Vec<f64>),
}

impl Schedule {
    pub const DYADIC: Schedule = Schedule::Named(NamedSchedule::Dyadic);

    /// The first `count` terms.
    pub fn terms(&self, count: usize) -> Result<Vec<f64>> {
        match self {
            Schedule::Named(NamedSchedule::Dyadic) => {
                Ok((1..=count).map(|i| 0.5f64.powi(i as i32)).collect())
            }
            Schedule::Explicit(values) => {
                if values.len() < count {
                    return Err(Error::InvalidParameter(format!(
                        "explicit schedule has {} terms, {count} needed",
                        values.len()
                    )));
                }
                Ok(values[..count].to_vec())
            }
        }
    }
}

fn exact(x: f64) -> Result<BigRational> {
    BigRational::from_float(x)
        .ok_or_else(|| Error::InvalidParameter(format!("{x} is not a finite number")))
}

/// Exact `base^n < bound` for nonnegative rationals.
fn power_below(base: &BigRational, n: u64, bound: &BigRational) -> bool {
    let n = u32::try_from(n).expect("step count fits in u32");
    let lhs = base.numer().pow(n) * bound.denom();
    let rhs = bound.numer() * base.denom().pow(n);
    lhs < rhs
}

/// Smallest `n > previous` with `(t₁ + … + t_{i−1})^n < ε` (1-based `i`;
/// the empty sum is 0 and `0^n = 0`).
pub fn select_step_count(weights: &[f64], eps: f64, i: usize, previous: u64) -> Result<u64> {
    if i < 1 {
        return Err(Error::InvalidParameter("term index starts at 1".into()));
    }
    if i - 1 > weights.len() {
        return Err(Error::InvalidParameter(format!(
            "term {i} needs {} weights, got {}",
            i - 1,
            weights.len()
        )));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "tolerance {eps} must be positive"
        )));
    }
    let mut partial = BigRational::zero();
    for &w in &weights[..i - 1] {
        partial += exact(w)?;
    }
    if partial >= BigRational::one() {
        return Err(Error::InvalidParameter(format!(
            "partial weight sum before term {i} is not below 1"
        )));
    }
    let bound = exact(eps)?;
    let n = if partial.is_zero() {
        1
    } else {
        // Start near the floating-point estimate, then settle exactly.
        let s = partial.to_f64().unwrap_or(0.0);
        let estimate = (eps.ln() / s.ln()).floor();
        let mut n = if estimate.is_finite() && estimate >= 1.0 {
            estimate as u64
        } else {
            1
        };
        while n > 1 && power_below(&partial, n - 1, &bound) {
            n -= 1;
        }
        while !power_below(&partial, n, &bound) {
            n += 1;
        }
        n
    };
    Ok(n.max(previous + 1))
}

/// Outcome of choosing `φᵢ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub index: usize,
    pub level: usize,
    pub radius: u32,
    /// `K = nᵢ·R_{i−1} + 1`; pairs with `d(x, y) < K` were compared.
    pub window: u64,
    pub variation: f64,
}

/// Picks `φ₁, …, φ_I` from `witnesses` given step counts and tolerances.
pub fn select_subsequence(
    witnesses: &WitnessSequence,
    space: &MetricSpace,
    step_counts: &[u64],
    tolerances: &[f64],
) -> Result<Vec<Selection>> {
    if step_counts.len() != tolerances.len() {
        return Err(Error::InvalidParameter(
            "step counts and tolerances differ in length".into(),
        ));
    }
    let mut previous_radius = 0u32;
    let mut chosen = Vec::with_capacity(step_counts.len());
    for (k, (&steps, &eps)) in step_counts.iter().zip(tolerances).enumerate() {
        let index = k + 1;
        let window = steps * previous_radius as u64 + 1;
        let min_radius = previous_radius.max(index as u32);
        let mut best = f64::INFINITY;
        let mut found = None;
        for (level, w) in witnesses.levels().iter().enumerate() {
            if w.support_radius <= min_radius {
                continue;
            }
            let v = variation_profile(&w.kernel, space, window)?.value;
            best = best.min(v);
            if v < eps {
                found = Some(Selection {
                    index,
                    level,
                    radius: w.support_radius,
                    window,
                    variation: v,
                });
                break;
            }
        }
        let Some(sel) = found else {
            return Err(Error::SelectionExhausted {
                index,
                window,
                tolerance: eps,
                min_radius,
                best,
            });
        };
        previous_radius = sel.radius;
        chosen.push(sel);
    }
    Ok(chosen)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixtureRecipe {
    /// Weights actually used (tail folded into the last one).
    pub weights: Vec<f64>,
    pub tolerances: Vec<f64>,
    pub step_counts: Vec<u64>,
    pub levels: Vec<usize>,
    pub radii: Vec<u32>,
    pub windows: Vec<u64>,
}

/// `(distance bound R_{i−1}, L1 bound 4εᵢ)` for term `i ≥ 2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictedBound {
    pub index: usize,
    pub distance_bound: u32,
    pub l1_bound: f64,
}

/// On-disk recipe: `{ "t", "eps", "n", "levels", "R" }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecipeFile {
    pub t: Vec<f64>,
    pub eps: Vec<f64>,
    pub n: Vec<u64>,
    pub levels: Vec<usize>,
    #[serde(rename = "R")]
    pub radii: Vec<u32>,
}

impl MixtureRecipe {
    pub fn terms(&self) -> usize {
        self.weights.len()
    }

    pub fn predicted_bounds(&self) -> Vec<PredictedBound> {
        (2..=self.terms())
            .map(|i| PredictedBound {
                index: i,
                distance_bound: self.radii[i - 2],
                l1_bound: 4.0 * self.tolerances[i - 1],
            })
            .collect()
    }

    /// Terms whose comparison window `nᵢ·R_{i−1}` exceeds `margin`.
    pub fn windows_beyond(&self, margin: u32) -> Vec<(usize, u64)> {
        self.windows
            .iter()
            .enumerate()
            .map(|(k, &w)| (k + 1, w - 1))
            .filter(|&(_, w)| w > margin as u64)
            .collect()
    }

    pub fn check_invariants(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParameter(format!("recipe invariant: {msg}")));
        let count = self.weights.len();
        if [
            self.tolerances.len(),
            self.step_counts.len(),
            self.levels.len(),
            self.radii.len(),
            self.windows.len(),
        ]
        .iter()
        .any(|&l| l != count)
        {
            return fail("sequence lengths differ".into());
        }
        if self.weights.iter().any(|&t| t <= 0.0) {
            return fail("weights must be positive".into());
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return fail(format!("weights sum to {total}"));
        }
        if self.tolerances.iter().any(|&e| e <= 0.0) {
            return fail("tolerances must be positive".into());
        }
        if self.tolerances.windows(2).any(|w| w[1] > w[0]) {
            return fail("tolerances must be nonincreasing".into());
        }
        if self.step_counts.windows(2).any(|w| w[1] <= w[0]) {
            return fail("step counts must increase".into());
        }
        for (k, &r) in self.radii.iter().enumerate() {
            let i = k + 1;
            if r as usize <= i {
                return fail(format!("R_{i} = {r} is not above {i}"));
            }
            if k > 0 && r <= self.radii[k - 1] {
                return fail(format!("R_{i} = {r} does not increase"));
            }
        }
        let mut partial = BigRational::zero();
        for k in 0..count {
            if k > 0 {
                partial += exact(self.weights[k - 1])?;
                let bound = exact(self.tolerances[k])?;
                if !power_below(&partial, self.step_counts[k], &bound) {
                    return fail(format!("step count n_{} too small", k + 1));
                }
            }
        }
        Ok(())
    }

    pub fn to_file(&self) -> RecipeFile {
        RecipeFile {
            t: self.weights.clone(),
            eps: self.tolerances.clone(),
            n: self.step_counts.clone(),
            levels: self.levels.clone(),
            radii: self.radii.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixtureKernel {
    pub kernel: Kernel,
    pub recipe: MixtureRecipe,
    pub components: Vec<Kernel>,
}

/// Builds the mixture kernel from `terms` weights and tolerances.
pub fn assemble(
    witnesses: &WitnessSequence,
    space: &MetricSpace,
    weights: &Schedule,
    tolerances: &Schedule,
    terms: usize,
) -> Result<MixtureKernel> {
    if terms < 1 {
        return Err(Error::InvalidParameter(
            "need at least one mixture term".into(),
        ));
    }
    let t = weights.terms(terms)?;
    let eps = tolerances.terms(terms)?;
    if t.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidParameter("weights must be positive".into()));
    }
    if eps.iter().any(|&e| !(e > 0.0 && e.is_finite())) || eps.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidParameter(
            "tolerances must be positive and nonincreasing".into(),
        ));
    }
    let head: f64 = t[..terms - 1].iter().sum();
    if head >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "the first {} weights already sum to {head}",
            terms - 1
        )));
    }

    let mut step_counts = Vec::with_capacity(terms);
    let mut previous = 0;
    for i in 1..=terms {
        let n = select_step_count(&t, eps[i - 1], i, previous)?;
        step_counts.push(n);
        previous = n;
    }
    let selections = select_subsequence(witnesses, space, &step_counts, &eps)?;

    let mut folded = t.clone();
    folded[terms - 1] = 1.0 - head;
    let components: Vec<Kernel> = selections
        .iter()
        .map(|s| witnesses.levels()[s.level].kernel.clone())
        .collect();
    let weighted: Vec<(f64, &Kernel)> = folded.iter().copied().zip(&components).collect();
    let kernel = Kernel::mixture(&weighted)?;

    let recipe = MixtureRecipe {
        weights: folded,
        tolerances: eps,
        step_counts,
        levels: selections.iter().map(|s| s.level).collect(),
        radii: selections.iter().map(|s| s.radius).collect(),
        windows: selections.iter().map(|s| s.window).collect(),
    };
    recipe.check_invariants()?;
    Ok(MixtureKernel {
        kernel,
        recipe,
        components,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TailCheck {
    /// Index `i₀` whose radius was used; `None` when no suffix weight is
    /// below `δ` and the largest radius (zero tail) was used instead.
    pub cutoff: Option<usize>,
    pub radius: u64,
    pub worst_tail: f64,
    pub worst_point: usize,
    pub check: Inequality,
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "δ = {delta} must lie in (0, 1)"
        )));
    }
    Ok(())
}

/// `(i₀, R_{i₀})` for the smallest `i₀` with `Σ_{i≥i₀} tᵢ < δ`, falling back
/// to `(None, R_I)`.
pub fn tail_radius(recipe: &MixtureRecipe, delta: f64) -> (Option<usize>, u32) {
    let count = recipe.terms();
    for i0 in 1..=count {
        let suffix: f64 = recipe.weights[i0 - 1..].iter().sum();
        if suffix < delta {
            return (Some(i0), recipe.radii[i0 - 1]);
        }
    }
    (None, recipe.radii[count - 1])
}

fn worst_core_tail(
    space: &MetricSpace,
    rows: impl Iterator<Item = (usize, f64)>,
) -> Result<(usize, f64)> {
    let mut worst: Option<(usize, f64)> = None;
    for (x, t) in rows {
        if worst.is_none_or(|(_, w)| t > w) {
            worst = Some((x, t));
        }
    }
    worst.ok_or(Error::EmptyCore {
        margin: space.margin(),
    })
}

/// Checks `Σ_{y ∈ B(x, R_δ)} P(x, y) > 1 − δ` on every core point.
pub fn verify_tail(mk: &MixtureKernel, space: &MetricSpace, delta: f64) -> Result<TailCheck> {
    check_delta(delta)?;
    let (cutoff, radius) = tail_radius(&mk.recipe, delta);
    let tails = space
        .core()
        .iter()
        .map(|&x| tail_mass(&mk.kernel, space, x, radius).map(|t| (x, t)))
        .collect::<Result<Vec<_>>>()?;
    let (worst_point, worst_tail) = worst_core_tail(space, tails.into_iter())?;
    Ok(TailCheck {
        cutoff,
        radius: radius as u64,
        worst_tail,
        worst_point,
        check: Inequality::lt(
            format!("tail_radius[delta={delta}]"),
            worst_tail,
            delta,
            0.0,
        )
        .with_detail(format!("R = {radius}, worst at point {worst_point}")),
    })
}

/// Checks that `P^n` keeps mass `≥ 1 − δ` inside `B(x, n·R_{δ/n})`.
pub fn verify_nstep_tail(
    mk: &MixtureKernel,
    space: &MetricSpace,
    steps: u64,
    delta: f64,
) -> Result<TailCheck> {
    check_delta(delta)?;
    if steps < 1 {
        return Err(Error::InvalidParameter("step count must be >= 1".into()));
    }
    if steps == 1 {
        return verify_tail(mk, space, delta);
    }
    let (cutoff, base) = tail_radius(&mk.recipe, delta / steps as f64);
    let radius = steps * base as u64;
    let core = space.core();
    let rows = mk.kernel.power_rows(core, steps)?;
    let tails = core.iter().zip(&rows).map(|(&x, row)| {
        let t: f64 = row
            .entries()
            .iter()
            .filter(|&&(y, _)| space.distance(x, y) as u64 > radius)
            .fold(0.0, |acc, &(_, v)| acc + v);
        (x, t)
    });
    let (worst_point, worst_tail) = worst_core_tail(space, tails)?;
    Ok(TailCheck {
        cutoff,
        radius,
        worst_tail,
        worst_point,
        check: Inequality::le(
            format!("nstep_tail[n={steps},delta={delta}]"),
            worst_tail,
            delta,
            0.0,
        )
        .with_detail(format!(
            "R = {steps}*{base} = {radius}, worst at point {worst_point}"
        )),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct UniformCheck {
    pub index: usize,
    pub steps: u64,
    pub distance_bound: u32,
    pub observed: PairSup,
    pub bound: f64,
    pub check: Inequality,
}

/// `sup_{d(x,y) < R_{i−1}} ‖P^{nᵢ}(x, ·) − P^{nᵢ}(y, ·)‖₁ ≤ 4εᵢ` over core pairs.
pub fn verify_uniform_bound(
    mk: &MixtureKernel,
    space: &MetricSpace,
    index: usize,
) -> Result<UniformCheck> {
    let recipe = &mk.recipe;
    if index < 2 || index > recipe.terms() {
        return Err(Error::InvalidParameter(format!(
            "uniform bound index {index} outside 2..={}",
            recipe.terms()
        )));
    }
    let distance_bound = recipe.radii[index - 2];
    let steps = recipe.step_counts[index - 1];
    let bound = 4.0 * recipe.tolerances[index - 1];
    let pairs = space.core_pairs_within(distance_bound as u64);
    if pairs.is_empty() {
        return Err(Error::EmptyPairSet {
            window: distance_bound,
        });
    }
    let mut points: Vec<usize> = pairs.iter().flat_map(|&(x, y)| [x, y]).collect();
    points.sort_unstable();
    points.dedup();
    let rows = mk.kernel.power_rows(&points, steps)?;
    let slot = |p: usize| points.binary_search(&p).expect("pair point is tracked");
    let observed = sup_over_pairs(&pairs, |x, y| {
        l1_distance(&rows[slot(x)], &rows[slot(y)]).expect("same space")
    });
    let detail = match observed.pair {
        Some((x, y)) => format!("n = {steps}, d < {distance_bound}, sup at ({x},{y})"),
        None => format!("n = {steps}, d < {distance_bound}"),
    };
    Ok(UniformCheck {
        index,
        steps,
        distance_bound,
        observed,
        bound,
        check: Inequality::le(
            format!("mixture_uniform_bound[i={index}]"),
            observed.value,
            bound,
            L1_SLACK,
        )
        .with_detail(detail),
    })
}
