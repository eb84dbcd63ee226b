//! Property A witnesses.
//!
//! Set form: for every point `x` and level `n` a finite subset `A_x^n` of
//! `X × ℕ` inside `B(x, R_n) × ℕ`, stored as a multiset over `X` (the fibre
//! over `y` is the initial segment `{1, …, m}` of length `m = mult(y)`).
//!
//! Measure form: kernels `φ_n` with `Supp φ_n(x, ·) ⊆ B(x, R_n)` whose rows
//! vary little between nearby points. The variation of a kernel over a
//! window `K` is `sup ‖φ(x, ·) − φ(y, ·)‖₁` over core pairs with `d(x, y) < K`.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measure::{l1_distance, Kernel, Measure};
use crate::space::MetricSpace;

/// A supremum over pairs together with the first pair attaining it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairSup {
    pub value: f64,
    pub pair: Option<(usize, usize)>,
}

/// `sup` of `f` over `pairs`, evaluated in parallel and reduced in pair order.
/// An empty pair list gives 0 (the sup over the diagonal only).
pub(crate) fn sup_over_pairs<F>(pairs: &[(usize, usize)], f: F) -> PairSup
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let values: Vec<f64> = pairs.par_iter().map(|&(x, y)| f(x, y)).collect();
    let mut best = PairSup {
        value: 0.0,
        pair: None,
    };
    for (&pair, &v) in pairs.iter().zip(&values) {
        if best.pair.is_none() || v > best.value {
            best = PairSup {
                value: v,
                pair: Some(pair),
            };
        }
    }
    best
}

/// Row `x` uniform on the closed ball `B(x, radius)`.
pub fn build_ball_witness(space: &MetricSpace, radius: u32) -> Kernel {
    let n = space.len();
    let rows = (0..n)
        .map(|x| Measure::uniform(n, &space.ball(x, radius)).expect("balls are nonempty"))
        .collect();
    Kernel::from_rows(rows).expect("rows match the space")
}

/// `sup_{d(x,y) < window, x,y ∈ core} ‖k(x,·) − k(y,·)‖₁`.
pub fn variation_profile(k: &Kernel, space: &MetricSpace, window: u64) -> Result<PairSup> {
    if window < 1 {
        return Err(Error::InvalidParameter(
            "variation window must be >= 1".into(),
        ));
    }
    if k.dim() != space.len() {
        return Err(Error::DimensionMismatch {
            left: k.dim(),
            right: space.len(),
        });
    }
    if space.core().is_empty() {
        return Err(Error::EmptyCore {
            margin: space.margin(),
        });
    }
    let pairs = space.core_pairs_within(window);
    Ok(sup_over_pairs(&pairs, |x, y| {
        l1_distance(k.row(x), k.row(y)).expect("same kernel")
    }))
}

/// Restricts every row to `B(x, radius)` and renormalizes it.
pub fn truncate_renormalize(k: &Kernel, space: &MetricSpace, radius: u32) -> Result<Kernel> {
    if k.dim() != space.len() {
        return Err(Error::DimensionMismatch {
            left: k.dim(),
            right: space.len(),
        });
    }
    let rows = k
        .rows()
        .iter()
        .enumerate()
        .map(|(x, row)| {
            let inside: Vec<(usize, f64)> = row
                .entries()
                .iter()
                .copied()
                .filter(|&(y, _)| space.distance(x, y) <= radius)
                .collect();
            if inside.len() == row.support_len() {
                return Ok(row.clone());
            }
            let mass: f64 = inside.iter().map(|&(_, v)| v).sum();
            if mass <= 0.0 {
                return Err(Error::NoMassInside { row: x, radius });
            }
            Measure::new(k.dim(), inside.into_iter().map(|(y, v)| (y, v / mass)))
        })
        .collect::<Result<Vec<_>>>()?;
    Kernel::from_rows(rows)
}

/// One level of a set witness: `A_x` for every point, plus the radius bound.
#[derive(Clone, Debug, PartialEq)]
pub struct SetLevel {
    pub radius_bound: u32,
    pub sets: Vec<BTreeMap<usize, u64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SetWitness {
    levels: Vec<SetLevel>,
}

impl SetWitness {
    /// Checks `A_x^n ⊆ B(x, R_n) × ℕ` for every level and point.
    pub fn new(space: &MetricSpace, levels: Vec<SetLevel>) -> Result<Self> {
        for level in &levels {
            if level.sets.len() != space.len() {
                return Err(Error::DimensionMismatch {
                    left: level.sets.len(),
                    right: space.len(),
                });
            }
            for (x, set) in level.sets.iter().enumerate() {
                for &y in set.keys() {
                    space.check_point(y)?;
                    if space.distance(x, y) > level.radius_bound {
                        return Err(Error::InvalidParameter(format!(
                            "set at {x} contains {y}, outside radius {}",
                            level.radius_bound
                        )));
                    }
                }
            }
        }
        Ok(Self { levels })
    }

    /// `A_x^n = B(x, r_n) × {1}` for each radius.
    pub fn balls(space: &MetricSpace, radii: &[u32]) -> Self {
        let levels = radii
            .iter()
            .map(|&r| SetLevel {
                radius_bound: r,
                sets: (0..space.len())
                    .map(|x| space.ball(x, r).into_iter().map(|y| (y, 1)).collect())
                    .collect(),
            })
            .collect();
        Self { levels }
    }

    pub fn levels(&self) -> &[SetLevel] {
        &self.levels
    }

    fn level(&self, level: usize) -> Result<&SetLevel> {
        self.levels.get(level).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "level {level} does not exist ({} levels)",
                self.levels.len()
            ))
        })
    }
}

/// `φ(x, y) = mult_x(y) / |A_x|`.
pub fn set_witness_to_kernel(w: &SetWitness, level: usize) -> Result<Kernel> {
    let lvl = w.level(level)?;
    let dim = lvl.sets.len();
    let rows = lvl
        .sets
        .iter()
        .enumerate()
        .map(|(x, set)| {
            let size: u64 = set.values().sum();
            if size == 0 {
                return Err(Error::EmptySet { point: x, level });
            }
            let size = size as f64;
            Measure::new(
                dim,
                set.iter()
                    .filter(|(_, &m)| m > 0)
                    .map(|(&y, &m)| (y, m as f64 / size)),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Kernel::from_rows(rows)
}

/// `(|A_x △ A_y|, |A_x ∩ A_y|)` for multisets read as initial-segment fibres.
pub fn set_overlap(a: &BTreeMap<usize, u64>, b: &BTreeMap<usize, u64>) -> (u64, u64) {
    let mut sym = 0;
    let mut inter = 0;
    for (y, &ma) in a {
        let mb = b.get(y).copied().unwrap_or(0);
        sym += ma.abs_diff(mb);
        inter += ma.min(mb);
    }
    for (y, &mb) in b {
        if !a.contains_key(y) {
            sym += mb;
        }
    }
    (sym, inter)
}

/// `sup |A_x △ A_y| / |A_x ∩ A_y|` over core pairs with `d(x, y) < window`.
/// A pair with empty intersection yields `+∞`.
pub fn set_ratio_profile(
    w: &SetWitness,
    level: usize,
    space: &MetricSpace,
    window: u64,
) -> Result<PairSup> {
    let lvl = w.level(level)?;
    if space.core().is_empty() {
        return Err(Error::EmptyCore {
            margin: space.margin(),
        });
    }
    let pairs = space.core_pairs_within(window);
    Ok(sup_over_pairs(&pairs, |x, y| {
        let (sym, inter) = set_overlap(&lvl.sets[x], &lvl.sets[y]);
        if inter == 0 {
            f64::INFINITY
        } else {
            sym as f64 / inter as f64
        }
    }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct WitnessLevel {
    pub kernel: Kernel,
    pub support_radius: u32,
    /// Recorded variations, keyed by window `K`.
    pub variation: BTreeMap<u64, f64>,
}

/// Ordered list of measure witnesses `φ_1, φ_2, …` with their support radii.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct WitnessSequence {
    levels: Vec<WitnessLevel>,
}

impl WitnessSequence {
    pub fn balls(space: &MetricSpace, radii: &[u32]) -> Self {
        Self {
            levels: radii
                .iter()
                .map(|&r| WitnessLevel {
                    kernel: build_ball_witness(space, r),
                    support_radius: r,
                    variation: BTreeMap::new(),
                })
                .collect(),
        }
    }

    /// Levels from explicit kernels; each must be supported in its radius.
    pub fn from_kernels(space: &MetricSpace, levels: Vec<(u32, Kernel)>) -> Result<Self> {
        let levels = levels
            .into_iter()
            .enumerate()
            .map(|(i, (radius, kernel))| {
                if kernel.dim() != space.len() {
                    return Err(Error::DimensionMismatch {
                        left: kernel.dim(),
                        right: space.len(),
                    });
                }
                let actual = kernel.row_support_radius(space);
                if actual > radius {
                    return Err(Error::InvalidParameter(format!(
                        "witness level {i} declares radius {radius} but has support radius {actual}"
                    )));
                }
                Ok(WitnessLevel {
                    kernel,
                    support_radius: radius,
                    variation: BTreeMap::new(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { levels })
    }

    pub fn levels(&self) -> &[WitnessLevel] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Computes and stores the variation of every level at `window`.
    pub fn record_variation(&mut self, space: &MetricSpace, window: u64) -> Result<()> {
        for level in &mut self.levels {
            let v = variation_profile(&level.kernel, space, window)?.value;
            level.variation.insert(window, v);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_zero_ball_is_identity() {
        let s = MetricSpace::grid(2, 4).unwrap();
        assert_eq!(build_ball_witness(&s, 0), Kernel::identity(s.len()));
    }

    #[test]
    fn ball_witness_variation_on_path() {
        // Interior rows: ‖φ(x) − φ(y)‖₁ = 2k / (2r + 1) for d(x, y) = k ≤ 2r + 1.
        let s = MetricSpace::path(60).unwrap().with_margin(12);
        for r in 1..=5u32 {
            let k = build_ball_witness(&s, r);
            for d in 1..=(2 * r + 1) as usize {
                let got = l1_distance(k.row(30), k.row(30 + d)).unwrap();
                let want = 2.0 * d as f64 / (2 * r + 1) as f64;
                assert!((got - want).abs() < 1e-12, "r={r} d={d}");
            }
        }
        let v = variation_profile(&build_ball_witness(&s, 1), &s, 2).unwrap();
        assert!((v.value - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn variation_edge_cases() {
        let s = MetricSpace::path(20).unwrap().with_margin(2);
        let id = Kernel::identity(s.len());
        assert_eq!(variation_profile(&id, &s, 2).unwrap().value, 2.0);
        let c = Kernel::constant(Measure::dirac(s.len(), 0));
        assert_eq!(variation_profile(&c, &s, 5).unwrap().value, 0.0);
        // K = 1 only compares a point with itself.
        let v = variation_profile(&id, &s, 1).unwrap();
        assert_eq!((v.value, v.pair), (0.0, None));
        let empty = MetricSpace::path(4).unwrap().with_margin(5);
        assert!(matches!(
            variation_profile(&Kernel::identity(empty.len()), &empty, 2),
            Err(Error::EmptyCore { .. })
        ));
        assert!(variation_profile(&id, &s, 0).is_err());
    }

    #[test]
    fn set_witness_conversions() {
        let s = MetricSpace::path(10).unwrap();
        let singletons = SetWitness::new(
            &s,
            vec![SetLevel {
                radius_bound: 0,
                sets: (0..s.len()).map(|x| BTreeMap::from([(x, 1)])).collect(),
            }],
        )
        .unwrap();
        assert_eq!(
            set_witness_to_kernel(&singletons, 0).unwrap(),
            Kernel::identity(s.len())
        );

        let balls = SetWitness::balls(&s, &[1, 3]);
        assert_eq!(
            set_witness_to_kernel(&balls, 1).unwrap(),
            build_ball_witness(&s, 3)
        );
        assert!(set_witness_to_kernel(&balls, 2).is_err());

        let mut sets: Vec<BTreeMap<usize, u64>> =
            (0..s.len()).map(|x| BTreeMap::from([(x, 1)])).collect();
        sets[4] = BTreeMap::from([(4, 2), (5, 1)]);
        let w = SetWitness::new(
            &s,
            vec![SetLevel {
                radius_bound: 1,
                sets,
            }],
        )
        .unwrap();
        let k = set_witness_to_kernel(&w, 0).unwrap();
        assert!((k.row(4).get(4) - 2.0 / 3.0).abs() < 1e-15);
        assert!((k.row(4).get(5) - 1.0 / 3.0).abs() < 1e-15);

        let mut sets: Vec<BTreeMap<usize, u64>> =
            (0..s.len()).map(|x| BTreeMap::from([(x, 1)])).collect();
        sets[2] = BTreeMap::new();
        let w = SetWitness::new(
            &s,
            vec![SetLevel {
                radius_bound: 0,
                sets,
            }],
        )
        .unwrap();
        assert!(matches!(
            set_witness_to_kernel(&w, 0),
            Err(Error::EmptySet { point: 2, level: 0 })
        ));
    }

    #[test]
    fn set_witness_rejects_sets_outside_radius() {
        let s = MetricSpace::path(5).unwrap();
        let mut sets: Vec<BTreeMap<usize, u64>> =
            (0..s.len()).map(|x| BTreeMap::from([(x, 1)])).collect();
        sets[0].insert(3, 1);
        assert!(SetWitness::new(
            &s,
            vec![SetLevel {
                radius_bound: 2,
                sets
            }]
        )
        .is_err());
    }

    #[test]
    fn set_ratio_edge_cases() {
        let s = MetricSpace::path(12).unwrap().with_margin(1);
        let constant = SetWitness::new(
            &s,
            vec![SetLevel {
                radius_bound: 12,
                sets: vec![BTreeMap::from([(0, 3)]); s.len()],
            }],
        )
        .unwrap();
        assert_eq!(set_ratio_profile(&constant, 0, &s, 4).unwrap().value, 0.0);
        let singletons = SetWitness::balls(&s, &[0]);
        assert_eq!(
            set_ratio_profile(&singletons, 0, &s, 2).unwrap().value,
            f64::INFINITY
        );
    }

    #[test]
    fn truncation_examples() {
        let s = MetricSpace::path(30).unwrap();
        let k = build_ball_witness(&s, 2);
        assert_eq!(truncate_renormalize(&k, &s, 2).unwrap(), k);
        assert_eq!(truncate_renormalize(&k, &s, 7).unwrap(), k);

        // 0.9 · uniform B(x,1) + 0.1 · δ_{x+5}; truncating at 2 moves 0.2 of mass.
        let n = s.len();
        let x = 10;
        let mut entries: Vec<(usize, f64)> = s.ball(x, 1).into_iter().map(|y| (y, 0.3)).collect();
        entries.push((x + 5, 0.1));
        let mut rows: Vec<Measure> = (0..n).map(|p| Measure::dirac(n, p)).collect();
        rows[x] = Measure::new(n, entries).unwrap();
        let k = Kernel::from_rows(rows).unwrap();
        let t = truncate_renormalize(&k, &s, 2).unwrap();
        let change = l1_distance(k.row(x), t.row(x)).unwrap();
        assert!((change - 0.2).abs() < 1e-12);

        let far = Kernel::constant(Measure::dirac(n, 0));
        assert!(matches!(
            truncate_renormalize(&far, &s, 3),
            Err(Error::NoMassInside { row: 4, radius: 3 })
        ));
    }

    #[test]
    fn witness_sequence_validation() {
        let s = MetricSpace::path(10).unwrap();
        let ok = WitnessSequence::from_kernels(&s, vec![(2, build_ball_witness(&s, 2))]);
        assert!(ok.is_ok());
        let bad = WitnessSequence::from_kernels(&s, vec![(1, build_ball_witness(&s, 2))]);
        assert!(bad.is_err());
        let mut seq = WitnessSequence::balls(&s.clone().with_margin(3), &[1, 2]);
        seq.record_variation(&s.with_margin(3), 2).unwrap();
        assert!((seq.levels()[0].variation[&2] - 2.0 / 3.0).abs() < 1e-12);
        assert!((seq.levels()[1].variation[&2] - 0.4).abs() < 1e-12);
    }
}
