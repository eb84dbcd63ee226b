//! Acceptance criteria 1 to 10. Each criterion prints one PASS/FAIL line;
//! the binary exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use propa::diagnostics::uniform_profile;
use propa::mixture::{assemble, verify_nstep_tail, verify_tail, verify_uniform_bound, Schedule};
use propa::properties::{local_uniformity_trials, truncation_trials};
use propa::{
    cesaro_profile, collapse_kernel, collapse_power_oracle, compose, convolve, l1_distance, power,
    Error, Kernel, Measure, MetricSpace, WitnessSequence,
};
use propa_cli::{run, ExperimentConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_240_601;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn dense_measure(m: &Measure) -> Vec<f64> {
    m.to_dense()
}

fn random_stochastic(rng: &mut ChaCha8Rng, dim: usize) -> Vec<Vec<f64>> {
    (0..dim)
        .map(|_| {
            let keep: Vec<bool> = (0..dim).map(|_| rng.gen_bool(0.6)).collect();
            let mut row: Vec<f64> = keep
                .iter()
                .map(|&k| if k { rng.gen_range(0.01..1.0) } else { 0.0 })
                .collect();
            if row.iter().all(|&v| v == 0.0) {
                row[rng.gen_range(0..dim)] = 1.0;
            }
            let total: f64 = row.iter().sum();
            row.iter().map(|v| v / total).collect()
        })
        .collect()
}

fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim)
        .map(|_| {
            if rng.gen_bool(0.7) {
                rng.gen_range(0.01..1.0)
            } else {
                0.0
            }
        })
        .collect();
    if v.iter().all(|&x| x == 0.0) {
        v[0] = 1.0;
    }
    let total: f64 = v.iter().sum();
    v.iter().map(|x| x / total).collect()
}

fn sparse(v: &[f64]) -> Measure {
    Measure::new(
        v.len(),
        v.iter().copied().enumerate().filter(|&(_, p)| p > 0.0),
    )
    .unwrap()
}

fn dense_product(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

fn vec_times(v: &[f64], m: &[Vec<f64>]) -> Vec<f64> {
    (0..v.len())
        .map(|j| (0..v.len()).map(|k| v[k] * m[k][j]).sum())
        .collect()
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn max_gap(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(r, s)| r.iter().zip(s).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

fn path400() -> MetricSpace {
    MetricSpace::path(400).unwrap().with_margin(60)
}

fn path400_witnesses(space: &MetricSpace) -> WitnessSequence {
    WitnessSequence::balls(space, &(1..=40).collect::<Vec<u32>>())
}

/// Power of the collapse kernel on gen_path(200) against `(d/(1+d))ⁿ`.
fn criterion_1() -> Outcome {
    let space = MetricSpace::path(200).unwrap();
    let k = collapse_kernel(&space, 0).unwrap();
    let mut worst = 0.0f64;
    let mut library_oracle = 0.0f64;
    for n in 1..=30u64 {
        let pn = power(&k, n).unwrap();
        for x in 0..space.len() {
            let d = x as f64;
            let stay = (d / (1.0 + d)).powi(n as i32);
            let mut expected = vec![0.0; space.len()];
            expected[0] += 1.0 - stay;
            expected[x] += stay;
            worst = worst.max(l1_max(&dense_measure(pn.row(x)), &expected));
            let closed = collapse_power_oracle(&space, 0, x, n).unwrap();
            library_oracle = library_oracle.max(l1_max(&closed.to_dense(), &expected));
        }
    }
    outcome(
        worst <= 1e-12 && library_oracle <= 1e-12,
        format!("max entry gap {worst:.3e} (closed-form helper {library_oracle:.3e}), tol 1e-12"),
    )
}

fn l1_max(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// 1000 seeded triples on up to 50 points, densely recomputed.
fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut violations = 0;
    let mut tightest = f64::INFINITY;
    let mut agreement = 0.0f64;
    for _ in 0..1000 {
        let dim = rng.gen_range(2..=50);
        let mu = random_vector(&mut rng, dim);
        let nu = random_vector(&mut rng, dim);
        let phi = random_stochastic(&mut rng, dim);
        let kernel = Kernel::from_dense(&phi).unwrap();
        let (m, n) = (sparse(&mu), sparse(&nu));
        let lhs = l1_distance(
            &convolve(&m, &kernel).unwrap(),
            &convolve(&n, &kernel).unwrap(),
        )
        .unwrap();
        let rhs = l1_distance(&m, &n).unwrap();
        let dense_lhs = l1(&vec_times(&mu, &phi), &vec_times(&nu, &phi));
        agreement = agreement.max((lhs - dense_lhs).abs());
        if lhs > rhs + 1e-12 {
            violations += 1;
        }
        tightest = tightest.min(rhs - lhs);
    }
    outcome(
        violations == 0 && agreement <= 1e-12,
        format!(
            "1000 triples, {violations} violations, smallest rhs - lhs {tightest:.3e}, dense agreement {agreement:.3e}"
        ),
    )
}

fn criterion_3() -> Outcome {
    let s = local_uniformity_trials(SEED, 200, 50);
    outcome(
        s.pass() && s.trials == 200,
        format!(
            "{} constructions, {} violations, tightest lhs {:.6} vs 2eps {:.6}",
            s.trials, s.violations, s.worst.lhs, s.worst.rhs
        ),
    )
}

/// Tailed ball witnesses on a path: the row change is exactly `2/n`.
fn criterion_4() -> Outcome {
    let space = MetricSpace::path(120).unwrap().with_margin(12);
    let (change, inflation) = truncation_trials(&space, 4, 2..=50, 6).unwrap();
    let mut exact = 0.0f64;
    for n in [2u32, 7, 50] {
        let phi = propa::properties::ball_witness_with_tail(&space, 4, n).unwrap();
        let cut = propa::truncate_renormalize(&phi, &space, 4).unwrap();
        for x in 0..space.len() {
            let gap = l1_distance(phi.row(x), cut.row(x)).unwrap();
            exact = exact.max((gap - 2.0 / n as f64).abs());
        }
    }
    outcome(
        change.pass() && inflation.pass() && change.trials == 49 && exact <= 1e-12,
        format!(
            "row change: {} levels, {} violations (tightest {:.4} <= {:.4}); inflation: {} violations (tightest {:.4} <= {:.4}); |change - 2/n| <= {exact:.1e}",
            change.trials,
            change.violations,
            change.worst.lhs,
            change.worst.rhs,
            inflation.violations,
            inflation.worst.lhs,
            inflation.worst.rhs
        ),
    )
}

/// `I = 3` on gen_path(400) with ball radii 1..40.
fn criterion_5() -> Outcome {
    let space = path400();
    let ws = path400_witnesses(&space);
    match assemble(&ws, &space, &Schedule::DYADIC, &Schedule::DYADIC, 3) {
        Ok(mk) => {
            let mut parts = Vec::new();
            let mut pass = true;
            for i in 2..=3 {
                let c = verify_uniform_bound(&mk, &space, i).unwrap();
                pass &= c.check.pass;
                parts.push(format!(
                    "i={i}: {:.6} <= {:.6} at n={}",
                    c.observed.value, c.bound, c.steps
                ));
            }
            outcome(pass, parts.join("; "))
        }
        Err(Error::SelectionExhausted {
            index,
            window,
            tolerance,
            best,
            ..
        }) => {
            let i2 = assemble(&ws, &space, &Schedule::DYADIC, &Schedule::DYADIC, 2)
                .ok()
                .and_then(|mk| verify_uniform_bound(&mk, &space, 2).ok())
                .map(|c| {
                    format!(
                        "i=2 alone: {:.6} <= {:.6} at n={} ({})",
                        c.observed.value,
                        c.bound,
                        c.steps,
                        if c.check.pass { "holds" } else { "violated" }
                    )
                })
                .unwrap_or_else(|| "i=2 unavailable".into());
            outcome(
                false,
                format!(
                    "witness selection exhausted at i={index}: window K={window} needs variation < {tolerance}, best among radii <= 40 is {best:.4}; {i2}"
                ),
            )
        }
        Err(e) => outcome(false, format!("unexpected error: {e}")),
    }
}

/// Tail radii on the two-term path400 mixture.
fn criterion_6() -> Outcome {
    let space = path400();
    let ws = path400_witnesses(&space);
    let mk = assemble(&ws, &space, &Schedule::DYADIC, &Schedule::DYADIC, 2).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for delta in [0.3, 0.1, 0.05] {
        let t = verify_tail(&mk, &space, delta).unwrap();
        pass &= t.check.pass && t.worst_tail < delta;
        parts.push(format!(
            "delta={delta}: R={} tail {:.3e}",
            t.radius, t.worst_tail
        ));
    }
    for n in [2, 3] {
        let t = verify_nstep_tail(&mk, &space, n, 0.3).unwrap();
        pass &= t.check.pass && t.worst_tail <= 0.3;
        parts.push(format!("n={n}: R={} tail {:.3e}", t.radius, t.worst_tail));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_7() -> Outcome {
    let mut failures = Vec::new();
    let space = path400();
    let ws = path400_witnesses(&space);
    let mk = assemble(&ws, &space, &Schedule::DYADIC, &Schedule::DYADIC, 2).unwrap();
    for k in [2, 24] {
        if !uniform_profile(&mk.kernel, &space, k, 20).unwrap().monotone {
            failures.push(format!("mixture K={k}"));
        }
    }
    let path = MetricSpace::path(100).unwrap();
    let collapse = collapse_kernel(&path, 0).unwrap();
    if !uniform_profile(&collapse, &path, 2, 20).unwrap().monotone {
        failures.push("collapse".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for trial in 0..20 {
        let len = rng.gen_range(6..=30);
        let space = MetricSpace::path(len).unwrap().with_margin(1);
        let k = Kernel::from_dense(&random_stochastic(&mut rng, space.len())).unwrap();
        let window = rng.gen_range(2..=4);
        if !uniform_profile(&k, &space, window, 20).unwrap().monotone {
            failures.push(format!("random kernel {trial}"));
        }
    }
    let detail = if failures.is_empty() {
        "mixture (K=2, 24), collapse, 20 random kernels: nonincreasing for n <= 20".to_string()
    } else {
        format!("increasing series: {}", failures.join(", "))
    };
    outcome(failures.is_empty(), detail)
}

fn criterion_8() -> Outcome {
    let space = MetricSpace::path(100).unwrap();
    let k = collapse_kernel(&space, 0).unwrap();
    let report = uniform_profile(&k, &space, 2, 10).unwrap();
    let expected = 2.0 * (99.0f64 / 100.0).powi(10);
    let at10 = report.series[9];
    let uniform_ok = (at10.value - expected).abs() <= 1e-9 && at10.pair == Some((98, 99));
    let cesaro = cesaro_profile(&k, &[(1, 2)], 200).unwrap();
    let value = cesaro.value_at(200).unwrap();
    // (1/n)·2·Σ_{i≤n} (2/3)^i = 4(1 − (2/3)^n)/n.
    let closed = 4.0 * (1.0 - (2.0f64 / 3.0).powi(200)) / 200.0;
    let cesaro_ok = value < 0.05 && (value - closed).abs() <= 1e-12;
    outcome(
        uniform_ok && cesaro_ok,
        format!(
            "uniform[10] = {:.12} vs {expected:.12} at {:?}; cesaro[200] = {value:.6} (closed form {closed:.6}) < 0.05",
            at10.value, at10.pair
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let dim = rng.gen_range(1..=8);
        let a = random_stochastic(&mut rng, dim);
        let b = random_stochastic(&mut rng, dim);
        let (ka, kb) = (
            Kernel::from_dense(&a).unwrap(),
            Kernel::from_dense(&b).unwrap(),
        );
        worst = worst.max(max_gap(
            &compose(&ka, &kb).unwrap().to_dense(),
            &dense_product(&a, &b),
        ));
        let mut dense = a.clone();
        for n in 1..=6u64 {
            if n > 1 {
                dense = dense_product(&dense, &a);
            }
            worst = worst.max(max_gap(&power(&ka, n).unwrap().to_dense(), &dense));
        }
    }
    outcome(
        worst <= 1e-12,
        format!("20 kernels, max entry gap {worst:.3e}"),
    )
}

fn read_dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn criterion_10() -> Outcome {
    let config_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let base = ExperimentConfig::load(&config_dir.join("path400-mixture.json")).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (label, threads) in [("a", 1), ("b", 1), ("c", 8)] {
        let mut config = base.clone();
        config.threads = threads;
        config.output.dir = tmp.path().join(label);
        let outcome = run(&config, &config_dir).unwrap();
        if outcome.exit_code != 0 {
            return self::outcome(
                false,
                format!("run {label} exited with {}", outcome.exit_code),
            );
        }
        outputs.push(read_dir_bytes(&config.output.dir));
    }
    let same = outputs[0] == outputs[1] && outputs[0] == outputs[2];
    outcome(
        same && outputs[0].len() >= 5,
        format!(
            "{} files ({}); reruns {}, 1 vs 8 workers {}",
            outputs[0].len(),
            outputs[0].keys().cloned().collect::<Vec<_>>().join(", "),
            if outputs[0] == outputs[1] {
                "identical"
            } else {
                "differ"
            },
            if outputs[0] == outputs[2] {
                "identical"
            } else {
                "differ"
            }
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("collapse oracle", criterion_1),
        ("non-expansion", criterion_2),
        ("local uniformity", criterion_3),
        ("truncation bound", criterion_4),
        ("mixture 4eps bound, I = 3", criterion_5),
        ("tail radii", criterion_6),
        ("monotonicity", criterion_7),
        ("non-uniformity exhibit", criterion_8),
        ("cross-oracle", criterion_9),
        ("determinism", criterion_10),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} [{}] {name}: {}",
            k + 1,
            if result.pass { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
