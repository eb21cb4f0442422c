//! Built-in verification: finite-difference gradient checks and brute-force
//! oracles for the clustering and statistics code.

mod gradients;
mod oracles;

use std::fmt;

use crate::analysis::{agglomerative_ward, fisher_exact, kmeans, ContingencyTable};
use crate::nn::Matrix;
use crate::rng::Rng;

pub use gradients::{GradCase, GRAD_TOLERANCE};
pub use oracles::{
    best_two_partition, binomial, brute_force_ward, fisher_enumeration, is_lloyd_fixed_point, OracleMerge,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: String,
    pub passed: bool,
    pub checks: usize,
    pub summary: String,
    pub failures: Vec<String>,
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {} ({} checks): {}", self.name, self.checks, self.summary)?;
        for line in self.failures.iter().take(5) {
            write!(f, "\n    {line}")?;
        }
        Ok(())
    }
}

/// `instances` random draws of every [`GradCase`].
pub fn gradient_suite(seed: u64, instances: usize) -> SuiteReport {
    let root = Rng::new(seed).derive("gradients");
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    let cases = GradCase::all();
    for (c, case) in cases.iter().enumerate() {
        let mut rng = root.derive_index("case", c as u64);
        for i in 0..instances {
            let r = case.check(&mut rng);
            worst = worst.max(r.max_rel_error);
            if !r.passed {
                failures.push(format!(
                    "{} instance {i}: relative error {:.3e} at parameter {}",
                    case.name(),
                    r.max_rel_error,
                    r.worst_index
                ));
            }
        }
    }
    SuiteReport {
        name: "gradient checks".into(),
        passed: failures.is_empty(),
        checks: cases.len() * instances,
        summary: format!(
            "{} pairings x {instances} instances, worst relative error {worst:.2e} (tolerance {GRAD_TOLERANCE:.0e})",
            cases.len()
        ),
        failures,
    }
}

fn random_points(n: usize, dims: usize, rng: &mut Rng) -> Matrix {
    Matrix::from_vec(n, dims, (0..n * dims).map(|_| rng.uniform_range(-1.0, 1.0)).collect()).expect("sized")
}

/// Ward merge order and heights against the exhaustive greedy oracle, n ≤ 7.
pub fn ward_oracle_suite(seed: u64, trials: usize) -> SuiteReport {
    let mut rng = Rng::new(seed).derive("ward");
    let mut failures = Vec::new();
    for t in 0..trials {
        let n = 2 + rng.below(6);
        let dims = 1 + rng.below(3);
        let points = random_points(n, dims, &mut rng);
        let tree = match agglomerative_ward(&points) {
            Ok(tree) => tree,
            Err(e) => {
                failures.push(format!("trial {t}: {e}"));
                continue;
            }
        };
        let members = tree.node_members();
        let oracle = brute_force_ward(&points);
        for (step, (m, o)) in tree.merges.iter().zip(&oracle).enumerate() {
            let l: std::collections::BTreeSet<usize> = members[m.left].iter().copied().collect();
            let r: std::collections::BTreeSet<usize> = members[m.right].iter().copied().collect();
            let same_sets = (l == o.left && r == o.right) || (l == o.right && r == o.left);
            let height_err = (m.distance - o.distance).abs() / o.distance.max(1e-12);
            if !same_sets || height_err > 1e-9 {
                failures.push(format!(
                    "trial {t} (n={n}) step {step}: got {l:?}+{r:?} at {:.12}, oracle {:?}+{:?} at {:.12}",
                    m.distance, o.left, o.right, o.distance
                ));
                break;
            }
        }
    }
    SuiteReport {
        name: "ward vs brute-force greedy".into(),
        passed: failures.is_empty(),
        checks: trials,
        summary: format!(
            "{} of {trials} random instances (n <= 7) match exactly",
            trials - failures.len()
        ),
        failures,
    }
}

/// k = 2 inertia against exhaustive enumeration of 2-partitions, n ≤ 8. Up to
/// `max_miss_fraction` of trials may settle in a local optimum, provided each
/// one is a genuine Lloyd fixed point.
pub fn kmeans_oracle_suite(seed: u64, trials: usize, max_miss_fraction: f64) -> SuiteReport {
    let mut rng = Rng::new(seed).derive("kmeans");
    let mut failures = Vec::new();
    let mut misses = 0;
    for t in 0..trials {
        let n = 2 + rng.below(7);
        let points = random_points(n, 2, &mut rng);
        let (best, _) = best_two_partition(&points);
        let fit = match kmeans(&points, 2, &mut rng.derive_index("fit", t as u64)) {
            Ok(f) => f,
            Err(e) => {
                failures.push(format!("trial {t}: {e}"));
                continue;
            }
        };
        if fit.inertia > best * (1.0 + 1e-9) + 1e-12 {
            misses += 1;
            if !is_lloyd_fixed_point(&points, &fit, 1e-9) {
                failures.push(format!(
                    "trial {t} (n={n}): inertia {:.9} > optimum {best:.9} and not a Lloyd fixed point",
                    fit.inertia
                ));
            }
        }
    }
    let allowed = (max_miss_fraction * trials as f64).floor() as usize;
    if misses > allowed {
        failures.push(format!(
            "{misses} local-optimum misses exceed the allowance of {allowed}"
        ));
    }
    SuiteReport {
        name: "k-means vs exhaustive 2-partitions".into(),
        passed: failures.is_empty(),
        checks: trials,
        summary: format!("{misses} of {trials} trials (n <= 8) above the global optimum, allowance {allowed}"),
        failures,
    }
}

/// Fisher p-values against exact enumeration on random tables with every
/// margin ≤ 50, plus the symmetric-table identities.
pub fn fisher_oracle_suite(seed: u64, tables: usize) -> SuiteReport {
    let mut rng = Rng::new(seed).derive("fisher");
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    let mut checked = 0;
    while checked < tables {
        let t = ContingencyTable::new(
            rng.below(26) as u64,
            rng.below(26) as u64,
            rng.below(26) as u64,
            rng.below(26) as u64,
        );
        if t.a + t.b == 0 || t.c + t.d == 0 {
            continue;
        }
        checked += 1;
        let expected = fisher_enumeration(&t);
        match fisher_exact(&t) {
            Ok((_, p)) => {
                let err = (p - expected).abs();
                worst = worst.max(err);
                if err > 1e-12 {
                    failures.push(format!("{t:?}: p = {p:e}, enumeration {expected:e}"));
                }
            }
            Err(e) => failures.push(format!("{t:?}: {e}")),
        }
    }
    let mut symmetric = 0;
    for k in 1..=25u64 {
        for t in [
            ContingencyTable::new(k, k, k, k),
            ContingencyTable::new(k, 26 - k, k, 26 - k),
        ] {
            symmetric += 1;
            match fisher_exact(&t) {
                Ok((or, p)) if or == 1.0 && p == 1.0 => {}
                Ok((or, p)) => failures.push(format!("symmetric {t:?}: OR = {or}, p = {p}")),
                Err(e) => failures.push(format!("symmetric {t:?}: {e}")),
            }
        }
    }
    SuiteReport {
        name: "fisher vs hypergeometric enumeration".into(),
        passed: failures.is_empty(),
        checks: tables + symmetric,
        summary: format!(
            "{tables} random tables (margins <= 50), worst |dp| {worst:.1e}; {symmetric} symmetric tables give OR = 1, p = 1"
        ),
        failures,
    }
}

/// Every suite at its standard size.
pub fn run_all(seed: u64) -> Vec<SuiteReport> {
    vec![
        gradient_suite(seed, 20),
        ward_oracle_suite(seed, 100),
        kmeans_oracle_suite(seed, 100, 0.05),
        fisher_oracle_suite(seed, 1000),
    ]
}
