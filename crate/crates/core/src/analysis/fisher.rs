//! Two-sided Fisher exact test on a 2×2 table.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack when comparing table probabilities to the observed one, so
/// tables equal in exact arithmetic are not split by rounding.
const MASS_TIE_TOL: f64 = 1e-7;

/// Counts for one code across two clusters:
///
/// |           | present | absent |
/// |-----------|---------|--------|
/// | cluster A | `a`     | `b`    |
/// | cluster B | `c`     | `d`    |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl ContingencyTable {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        Self { a, b, c, d }
    }

    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    /// Odds ratio `ad / bc`; every cell gets +0.5 when any cell is zero.
    pub fn odds_ratio(&self) -> f64 {
        let (a, b, c, d) = (self.a as f64, self.b as f64, self.c as f64, self.d as f64);
        if self.a == 0 || self.b == 0 || self.c == 0 || self.d == 0 {
            ((a + 0.5) * (d + 0.5)) / ((b + 0.5) * (c + 0.5))
        } else {
            (a * d) / (b * c)
        }
    }

    pub fn log_odds(&self) -> f64 {
        self.odds_ratio().ln()
    }

    /// Swap the two clusters.
    pub fn swapped(&self) -> Self {
        Self::new(self.c, self.d, self.a, self.b)
    }
}

fn ln_factorials(n: u64) -> Vec<f64> {
    let mut t = Vec::with_capacity(n as usize + 1);
    t.push(0.0);
    let mut acc = 0.0;
    for i in 1..=n {
        acc += (i as f64).ln();
        t.push(acc);
    }
    t
}

/// Returns `(odds_ratio, p_value)`. The p-value sums the hypergeometric mass of
/// every table with the observed margins whose probability does not exceed the
/// observed table's.
pub fn fisher_exact(table: &ContingencyTable) -> Result<(f64, f64)> {
    let row_a = table.a + table.b;
    let row_b = table.c + table.d;
    if row_a == 0 || row_b == 0 {
        return Err(Error::invalid(format!(
            "contingency table {table:?} has an empty cluster"
        )));
    }
    let n = row_a + row_b;
    let col_present = table.a + table.c;
    let lf = ln_factorials(n);
    let lf = |k: u64| lf[k as usize];
    let log_weight = |x: u64| {
        // ln of C(row_a, x) · C(row_b, col_present − x) without the shared denominator
        -(lf(x) + lf(row_a - x) + lf(col_present - x) + lf(row_b + x - col_present))
    };
    let lo = col_present.saturating_sub(row_b);
    let hi = row_a.min(col_present);
    let logs: Vec<f64> = (lo..=hi).map(log_weight).collect();
    let max_log = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|l| (l - max_log).exp()).collect();
    let observed = weights[(table.a - lo) as usize];
    let cutoff = observed * (1.0 + MASS_TIE_TOL);

    let total: f64 = weights.iter().sum();
    let (mut included, mut excluded) = (0.0, 0.0);
    for &w in &weights {
        if w <= cutoff {
            included += w;
        } else {
            excluded += w;
        }
    }
    // sum whichever side is smaller to keep precision at both ends
    let p = if included <= excluded {
        included / total
    } else {
        1.0 - excluded / total
    };
    Ok((table.odds_ratio(), p.clamp(0.0, 1.0)))
}
