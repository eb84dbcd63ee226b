//! Sparse probability measures and transition kernels.
//!
//! A [`Measure`] is a sorted list of `(point, probability)` pairs with strictly
//! positive probabilities. A [`Kernel`] is one measure per point, i.e. a
//! row-stochastic sparse matrix.
//!
//! All accumulations run in ascending index order: the value of
//! `(μ ∗ φ)(y)` is `Σ_x μ(x) φ(x, y)` summed over `x` ascending. Composition
//! computes every row with exactly that convolution, so row `x` of
//! `power(k, n)` is bit-identical to convolving `δ_x` through `k` `n` times,
//! and results do not depend on the rayon thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::space::MetricSpace;
use crate::ROW_SUM_TOLERANCE;

#[derive(Clone, Debug, PartialEq)]
pub struct Measure {
    dim: usize,
    entries: Vec<(usize, f64)>,
}

impl Measure {
    /// Validating constructor: merges duplicate points, drops zeros, rejects
    /// negative or non-finite mass, and requires a total of 1 within `1e-9`.
    /// The result is rescaled so that it sums to 1 to machine precision.
    pub fn new(dim: usize, entries: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut raw: Vec<(usize, f64)> = entries.into_iter().collect();
        for &(p, v) in &raw {
            if p >= dim {
                return Err(Error::PointOutOfRange { point: p, len: dim });
            }
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidMeasure(format!("mass {v} at point {p}")));
            }
        }
        raw.sort_by_key(|&(p, _)| p);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(raw.len());
        for (p, v) in raw {
            match merged.last_mut() {
                Some((q, acc)) if *q == p => *acc += v,
                _ => merged.push((p, v)),
            }
        }
        merged.retain(|&(_, v)| v > 0.0);
        let total: f64 = merged.iter().map(|&(_, v)| v).sum();
        if (total - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(Error::InvalidMeasure(format!(
                "total mass {total} is not 1"
            )));
        }
        let mut m = Self {
            dim,
            entries: merged,
        };
        // Rescale unless already at rounding level, so that re-validating a
        // stored measure is the identity.
        if (total - 1.0).abs() > m.entries.len() as f64 * f64::EPSILON {
            m.scale(1.0 / total);
        }
        Ok(m)
    }

    pub fn dirac(dim: usize, x: usize) -> Self {
        assert!(x < dim, "dirac point {x} outside a space of {dim} points");
        Self {
            dim,
            entries: vec![(x, 1.0)],
        }
    }

    /// Uniform measure on a nonempty set of points.
    pub fn uniform(dim: usize, support: &[usize]) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidMeasure(
                "uniform measure on an empty set".into(),
            ));
        }
        let w = 1.0 / support.len() as f64;
        Self::new(dim, support.iter().map(|&p| (p, w)))
    }

    /// Trusted constructor for already sorted, strictly positive entries.
    pub(crate) fn from_sorted_unchecked(dim: usize, entries: Vec<(usize, f64)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        Self { dim, entries }
    }

    fn scale(&mut self, factor: f64) {
        for (_, v) in &mut self.entries {
            *v *= factor;
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Sorted `(point, probability)` pairs.
    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|&(p, _)| p)
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, x: usize) -> f64 {
        match self.entries.binary_search_by_key(&x, |&(p, _)| p) {
            Ok(i) => self.entries[i].1,
            Err(_) => 0.0,
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(p, v) in &self.entries {
            out[p] = v;
        }
        out
    }

    /// Drops entries below `threshold` and renormalizes; returns the pruned
    /// measure and `‖self − pruned‖₁`. A measure that would lose all of its
    /// mass is returned unchanged.
    pub fn pruned(&self, threshold: f64) -> (Measure, f64) {
        let kept: Vec<(usize, f64)> = self
            .entries
            .iter()
            .copied()
            .filter(|&(_, v)| v >= threshold)
            .collect();
        if kept.len() == self.entries.len() || kept.is_empty() {
            return (self.clone(), 0.0);
        }
        let total: f64 = kept.iter().map(|&(_, v)| v).sum();
        let pruned = Measure::from_sorted_unchecked(
            self.dim,
            kept.into_iter().map(|(p, v)| (p, v / total)).collect(),
        );
        let delta = l1_merge(self, &pruned);
        (pruned, delta)
    }

    pub fn l1_distance(&self, other: &Measure) -> Result<f64> {
        l1_distance(self, other)
    }

    pub fn convolve(&self, kernel: &Kernel) -> Result<Measure> {
        convolve(self, kernel)
    }
}

/// Support radius of a kernel: the smallest `R` with
/// `Supp(φ(x, ·)) ⊆ B(x, R)` for every `x`, or unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SupportRadius {
    Bounded(u32),
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    dim: usize,
    rows: Vec<Measure>,
    unbounded: bool,
    drift: f64,
}

impl Kernel {
    pub fn from_rows(rows: Vec<Measure>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "kernel needs at least one row".into(),
            ));
        }
        if let Some(r) = rows.iter().find(|r| r.dim() != dim) {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: r.dim(),
            });
        }
        Ok(Self {
            dim,
            rows,
            unbounded: false,
            drift: 0.0,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            rows: (0..dim).map(|x| Measure::dirac(dim, x)).collect(),
            unbounded: false,
            drift: 0.0,
        }
    }

    /// Every row equal to `row`.
    pub fn constant(row: Measure) -> Self {
        let dim = row.dim();
        Self {
            dim,
            rows: vec![row; dim],
            unbounded: false,
            drift: 0.0,
        }
    }

    /// Builds a kernel from a dense row-stochastic matrix.
    pub fn from_dense(matrix: &[Vec<f64>]) -> Result<Self> {
        let dim = matrix.len();
        let rows = matrix
            .iter()
            .map(|row| {
                if row.len() != dim {
                    return Err(Error::DimensionMismatch {
                        left: dim,
                        right: row.len(),
                    });
                }
                Measure::new(dim, row.iter().copied().enumerate())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(rows)
    }

    /// Marks the kernel as a truncation of a kernel with unbounded support.
    pub fn mark_unbounded(mut self) -> Self {
        self.unbounded = true;
        self
    }

    pub fn is_unbounded(&self) -> bool {
        self.unbounded
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, x: usize) -> &Measure {
        &self.rows[x]
    }

    pub fn rows(&self) -> &[Measure] {
        &self.rows
    }

    /// Largest per-row drift from total mass 1 that forced a renormalization
    /// while this kernel was computed (0 when none was needed).
    pub fn renormalization_drift(&self) -> f64 {
        self.drift
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Measure::support_len).sum()
    }

    /// Tight support radius on `space`; `Unbounded` for kernels marked so.
    pub fn support_radius(&self, space: &MetricSpace) -> Result<SupportRadius> {
        check_dims(self.dim, space.len())?;
        if self.unbounded {
            return Ok(SupportRadius::Unbounded);
        }
        Ok(SupportRadius::Bounded(self.row_support_radius(space)))
    }

    /// `max_x max_{y ∈ Supp φ(x,·)} d(x, y)` regardless of the unbounded flag.
    pub fn row_support_radius(&self, space: &MetricSpace) -> u32 {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(x, row)| row.support().map(move |y| space.distance(x, y)))
            .max()
            .unwrap_or(0)
    }

    /// Convex combination `Σ wᵢ kᵢ`, accumulated per entry in component
    /// order. Weights must be positive and sum to 1 within `1e-9`.
    pub fn mixture(components: &[(f64, &Kernel)]) -> Result<Kernel> {
        let Some(&(_, first)) = components.first() else {
            return Err(Error::InvalidParameter("empty mixture".into()));
        };
        let dim = first.dim;
        for &(w, k) in components {
            check_dims(dim, k.dim)?;
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidParameter(format!("mixture weight {w}")));
            }
        }
        let total: f64 = components.iter().map(|&(w, _)| w).sum();
        if (total - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "mixture weights sum to {total}"
            )));
        }
        let results: Vec<(Measure, f64)> = (0..dim)
            .into_par_iter()
            .map_init(
                || Accumulator::new(dim),
                |acc, x| {
                    for &(w, k) in components {
                        acc.add_scaled(k.row(x), w);
                    }
                    acc.finish(dim)
                },
            )
            .collect();
        Ok(Self::collect_rows(
            dim,
            results,
            components.iter().any(|(_, k)| k.unbounded),
        ))
    }

    fn collect_rows(dim: usize, results: Vec<(Measure, f64)>, unbounded: bool) -> Kernel {
        let drift = results.iter().map(|&(_, d)| d).fold(0.0, f64::max);
        Kernel {
            dim,
            rows: results.into_iter().map(|(m, _)| m).collect(),
            unbounded,
            drift,
        }
    }

    /// Drops entries below `threshold` and renormalizes each row. Returns the
    /// pruned kernel and the largest per-row L1 perturbation it introduced.
    pub fn prune(&self, threshold: f64) -> (Kernel, f64) {
        let mut worst = 0.0f64;
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let (pruned, delta) = row.pruned(threshold);
                worst = worst.max(delta);
                pruned
            })
            .collect();
        (
            Kernel {
                dim: self.dim,
                rows,
                unbounded: self.unbounded,
                drift: self.drift,
            },
            worst,
        )
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(Measure::to_dense).collect()
    }

    /// Rows `x` of `self^n` for the given points, each obtained by convolving
    /// `δ_x` through `self` `n` times. Identical to the corresponding rows of
    /// [`power`].
    pub fn power_rows(&self, points: &[usize], n: u64) -> Result<Vec<Measure>> {
        if n < 1 {
            return Err(Error::InvalidParameter(
                "power exponent must be >= 1".into(),
            ));
        }
        let mut rows: Vec<Measure> = points.iter().map(|&x| self.rows[x].clone()).collect();
        for _ in 1..n {
            rows = self.step_rows(&rows)?;
        }
        Ok(rows)
    }

    /// One more step for every measure: `μ ↦ μ ∗ self`, in parallel.
    pub fn step_rows(&self, measures: &[Measure]) -> Result<Vec<Measure>> {
        for m in measures {
            check_dims(m.dim, self.dim)?;
        }
        let dim = self.dim;
        Ok(measures
            .par_iter()
            .map_init(
                || Accumulator::new(dim),
                |acc, m| {
                    acc.add_convolution(m, self);
                    acc.finish(dim).0
                },
            )
            .collect())
    }
}

/// Dense scratch row that remembers which slots were touched.
struct Accumulator {
    values: Vec<f64>,
    seen: Vec<bool>,
    touched: Vec<usize>,
}

impl Accumulator {
    fn new(dim: usize) -> Self {
        Self {
            values: vec![0.0; dim],
            seen: vec![false; dim],
            touched: Vec::new(),
        }
    }

    #[inline]
    fn add(&mut self, y: usize, v: f64) {
        if !self.seen[y] {
            self.seen[y] = true;
            self.touched.push(y);
        }
        self.values[y] += v;
    }

    fn add_scaled(&mut self, m: &Measure, w: f64) {
        for &(y, p) in &m.entries {
            self.add(y, w * p);
        }
    }

    fn add_convolution(&mut self, m: &Measure, k: &Kernel) {
        for &(x, mx) in &m.entries {
            for &(y, p) in &k.rows[x].entries {
                self.add(y, mx * p);
            }
        }
    }

    /// Emits the accumulated measure and clears the scratch space. Rows whose
    /// mass drifted more than `1e-9` from 1 are renormalized; the drift is
    /// returned (0 otherwise).
    fn finish(&mut self, dim: usize) -> (Measure, f64) {
        self.touched.sort_unstable();
        let mut entries = Vec::with_capacity(self.touched.len());
        for &y in &self.touched {
            let v = self.values[y];
            if v > 0.0 {
                entries.push((y, v));
            }
            self.values[y] = 0.0;
            self.seen[y] = false;
        }
        self.touched.clear();
        let mut m = Measure::from_sorted_unchecked(dim, entries);
        let total = m.total_mass();
        let drift = (total - 1.0).abs();
        if drift > ROW_SUM_TOLERANCE && total > 0.0 {
            m.scale(1.0 / total);
            (m, drift)
        } else {
            (m, 0.0)
        }
    }
}

fn check_dims(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::DimensionMismatch { left, right });
    }
    Ok(())
}

fn l1_merge(a: &Measure, b: &Measure) -> f64 {
    let (ea, eb) = (&a.entries, &b.entries);
    let (mut i, mut j) = (0, 0);
    let mut total = 0.0;
    while i < ea.len() || j < eb.len() {
        let pa = ea.get(i).map_or(usize::MAX, |e| e.0);
        let pb = eb.get(j).map_or(usize::MAX, |e| e.0);
        if pa == pb {
            total += (ea[i].1 - eb[j].1).abs();
            i += 1;
            j += 1;
        } else if pa < pb {
            total += ea[i].1;
            i += 1;
        } else {
            total += eb[j].1;
            j += 1;
        }
    }
    total
}

/// `‖a − b‖₁ = Σ_x |a(x) − b(x)|` by a sorted merge.
pub fn l1_distance(a: &Measure, b: &Measure) -> Result<f64> {
    check_dims(a.dim, b.dim)?;
    Ok(l1_merge(a, b))
}

/// `(m ∗ k)(y) = Σ_x m(x) k(x, y)`.
pub fn convolve(m: &Measure, k: &Kernel) -> Result<Measure> {
    check_dims(m.dim, k.dim)?;
    let mut acc = Accumulator::new(k.dim);
    acc.add_convolution(m, k);
    Ok(acc.finish(k.dim).0)
}

/// `(k1 ∗ k2)(x, y) = Σ_z k1(x, z) k2(z, y)`; row `x` is `convolve(k1(x,·), k2)`.
pub fn compose(k1: &Kernel, k2: &Kernel) -> Result<Kernel> {
    check_dims(k1.dim, k2.dim)?;
    let dim = k1.dim;
    let results: Vec<(Measure, f64)> = k1
        .rows
        .par_iter()
        .map_init(
            || Accumulator::new(dim),
            |acc, row| {
                acc.add_convolution(row, k2);
                acc.finish(dim)
            },
        )
        .collect();
    let mut out = Kernel::collect_rows(dim, results, k1.unbounded || k2.unbounded);
    out.drift = out.drift.max(k1.drift).max(k2.drift);
    Ok(out)
}

/// `k^n` by iterated right multiplication: `k^{m+1} = k^m ∗ k`.
pub fn power(k: &Kernel, n: u64) -> Result<Kernel> {
    if n < 1 {
        return Err(Error::InvalidParameter(
            "power exponent must be >= 1".into(),
        ));
    }
    let mut acc = k.clone();
    for _ in 1..n {
        acc = compose(&acc, k)?;
    }
    Ok(acc)
}

/// Like [`power`], pruning entries below `threshold` after every step.
/// Returns the kernel and an upper bound on the accumulated per-row L1
/// perturbation (the sum of the per-step perturbations, by non-expansion).
pub fn power_pruned(k: &Kernel, n: u64, threshold: f64) -> Result<(Kernel, f64)> {
    if n < 1 {
        return Err(Error::InvalidParameter(
            "power exponent must be >= 1".into(),
        ));
    }
    let (mut acc, mut bound) = k.prune(threshold);
    for _ in 1..n {
        let (next, step) = compose(&acc, k)?.prune(threshold);
        acc = next;
        bound += step;
    }
    Ok((acc, bound))
}

/// Mass of row `x` strictly outside the closed ball `B(x, radius)`.
pub fn tail_mass(k: &Kernel, space: &MetricSpace, x: usize, radius: u32) -> Result<f64> {
    check_dims(k.dim, space.len())?;
    space.check_point(x)?;
    Ok(k.rows[x]
        .entries
        .iter()
        .filter(|&&(y, _)| space.distance(x, y) > radius)
        .fold(0.0, |acc, &(_, v)| acc + v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dense(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                let raw: Vec<f64> = (0..n)
                    .map(|_| {
                        if rng.gen_bool(0.6) {
                            rng.gen::<f64>()
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let mut raw = raw;
                if raw.iter().all(|&v| v == 0.0) {
                    raw[0] = 1.0;
                }
                let s: f64 = raw.iter().sum();
                raw.iter().map(|v| v / s).collect()
            })
            .collect()
    }

    fn dense_product(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = a.len();
        let mut c = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    c[i][j] += a[i][k] * b[k][j];
                }
            }
        }
        c
    }

    #[test]
    fn l1_examples() {
        let dx = Measure::dirac(3, 0);
        let dy = Measure::dirac(3, 1);
        assert_eq!(l1_distance(&dx, &dx).unwrap(), 0.0);
        assert_eq!(l1_distance(&dx, &dy).unwrap(), 2.0);
        let a = Measure::uniform(3, &[0, 1]).unwrap();
        let b = Measure::uniform(3, &[1, 2]).unwrap();
        assert_eq!(l1_distance(&a, &b).unwrap(), 1.0);
        assert!(l1_distance(&a, &Measure::dirac(4, 0)).is_err());
    }

    #[test]
    fn measure_validation() {
        assert!(Measure::new(3, [(0, 0.5), (1, 0.6)]).is_err());
        assert!(Measure::new(3, [(0, -0.5), (1, 1.5)]).is_err());
        assert!(Measure::new(3, [(5, 1.0)]).is_err());
        assert!(Measure::new(3, [(0, f64::NAN)]).is_err());
        let m = Measure::new(3, [(2, 0.25), (0, 0.5), (2, 0.25), (1, 0.0)]).unwrap();
        assert_eq!(m.entries(), &[(0, 0.5), (2, 0.5)]);
        assert!(Measure::uniform(3, &[]).is_err());
    }

    #[test]
    fn convolve_examples() {
        let k = Kernel::from_dense(&[
            vec![0.2, 0.3, 0.5],
            vec![0.0, 1.0, 0.0],
            vec![0.6, 0.0, 0.4],
        ])
        .unwrap();
        assert_eq!(convolve(&Measure::dirac(3, 0), &k).unwrap(), *k.row(0));
        let m = Measure::uniform(3, &[0, 2]).unwrap();
        assert_eq!(convolve(&m, &Kernel::identity(3)).unwrap(), m);
        // ½k(0,·) + ½k(2,·) = (0.4, 0.15, 0.45)
        let c = convolve(&m, &k).unwrap().to_dense();
        assert_relative_eq!(c[0], 0.4, epsilon = 1e-15);
        assert_relative_eq!(c[1], 0.15, epsilon = 1e-15);
        assert_relative_eq!(c[2], 0.45, epsilon = 1e-15);
    }

    #[test]
    fn compose_matches_dense_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let a = random_dense(&mut rng, 6);
            let b = random_dense(&mut rng, 6);
            let ka = Kernel::from_dense(&a).unwrap();
            let kb = Kernel::from_dense(&b).unwrap();
            let got = compose(&ka, &kb).unwrap().to_dense();
            let want = dense_product(&a, &b);
            for i in 0..6 {
                for j in 0..6 {
                    assert!((got[i][j] - want[i][j]).abs() <= 1e-12);
                }
            }
        }
        let ka = Kernel::from_dense(&random_dense(&mut rng, 5)).unwrap();
        assert_eq!(compose(&ka, &Kernel::identity(5)).unwrap(), ka);
        assert!(compose(&ka, &Kernel::identity(4)).is_err());
    }

    #[test]
    fn power_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let k = Kernel::from_dense(&random_dense(&mut rng, 8)).unwrap();
        assert_eq!(power(&k, 1).unwrap(), k);
        assert!(power(&k, 0).is_err());
        let p2 = power(&k, 2).unwrap();
        let p4 = power(&k, 4).unwrap().to_dense();
        let p22 = compose(&p2, &p2).unwrap().to_dense();
        for i in 0..8 {
            for j in 0..8 {
                assert!((p4[i][j] - p22[i][j]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn power_rows_are_iterated_convolutions() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let k = Kernel::from_dense(&random_dense(&mut rng, 7)).unwrap();
        let p5 = power(&k, 5).unwrap();
        for x in 0..7 {
            let mut m = Measure::dirac(7, x);
            for _ in 0..5 {
                m = convolve(&m, &k).unwrap();
            }
            assert_eq!(&m, p5.row(x));
        }
        let rows = k.power_rows(&[3, 1], 5).unwrap();
        assert_eq!(&rows[0], p5.row(3));
        assert_eq!(&rows[1], p5.row(1));
    }

    #[test]
    fn support_radius_of_compositions() {
        let space = MetricSpace::path(12).unwrap();
        let ball = |r: u32| {
            Kernel::from_rows(
                (0..space.len())
                    .map(|x| Measure::uniform(space.len(), &space.ball(x, r)).unwrap())
                    .collect(),
            )
            .unwrap()
        };
        let k1 = ball(1);
        assert_eq!(
            k1.support_radius(&space).unwrap(),
            SupportRadius::Bounded(1)
        );
        let k2 = compose(&k1, &k1).unwrap();
        assert_eq!(
            k2.support_radius(&space).unwrap(),
            SupportRadius::Bounded(2)
        );
        let k3 = compose(&ball(2), &ball(3)).unwrap();
        assert_eq!(
            k3.support_radius(&space).unwrap(),
            SupportRadius::Bounded(5)
        );
        assert_eq!(
            k1.clone().mark_unbounded().support_radius(&space).unwrap(),
            SupportRadius::Unbounded
        );
    }

    #[test]
    fn tail_mass_examples() {
        let space = MetricSpace::path(10).unwrap();
        let id = Kernel::identity(space.len());
        assert_eq!(tail_mass(&id, &space, 4, 0).unwrap(), 0.0);
        let row = Measure::new(space.len(), [(5, 0.5), (6, 0.25), (9, 0.25)]).unwrap();
        let k = Kernel::constant(row);
        assert_eq!(tail_mass(&k, &space, 5, 1).unwrap(), 0.25);
        assert_eq!(tail_mass(&k, &space, 5, 0).unwrap(), 0.5);
        assert_eq!(tail_mass(&k, &space, 5, 4).unwrap(), 0.0);
    }

    #[test]
    fn mixture_is_rowwise_convex_combination() {
        let a = Kernel::identity(3);
        let b = Kernel::constant(Measure::dirac(3, 0));
        let m = Kernel::mixture(&[(0.5, &a), (0.5, &b)]).unwrap();
        assert_eq!(m.row(0).entries(), &[(0, 1.0)]);
        assert_eq!(m.row(2).entries(), &[(0, 0.5), (2, 0.5)]);
        assert!(Kernel::mixture(&[(0.4, &a), (0.4, &b)]).is_err());
        assert!(Kernel::mixture(&[]).is_err());
    }

    #[test]
    fn pruning_reports_perturbation() {
        let row = Measure::new(4, [(0, 0.5), (1, 0.5 - 1e-16), (2, 1e-16)]).unwrap();
        let k = Kernel::constant(row);
        let (pruned, bound) = k.prune(1e-15);
        assert_eq!(pruned.row(0).support_len(), 2);
        assert!(bound > 0.0 && bound < 1e-15);
        let (same, zero) = Kernel::identity(4).prune(1e-15);
        assert_eq!(same, Kernel::identity(4));
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn compose_is_thread_count_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let k = Kernel::from_dense(&random_dense(&mut rng, 40)).unwrap();
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let many = rayon::ThreadPoolBuilder::new()
            .num_threads(8)
            .build()
            .unwrap();
        let a = one.install(|| power(&k, 6).unwrap());
        let b = many.install(|| power(&k, 6).unwrap());
        assert_eq!(a, b);
    }
}
