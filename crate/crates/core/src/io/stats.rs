//! Rank statistics for comparing algorithms over matched runs.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::domain::ObjectiveSense;
use crate::error::{Error, Result};

/// Ranks within each row, 1 = best, ties receive the average rank.
pub fn rank_rows(values: &[Vec<f64>], sense: ObjectiveSense) -> Vec<Vec<f64>> {
    values
        .iter()
        .map(|row| {
            let internal: Vec<f64> = row.iter().map(|&v| sense.to_internal(v)).collect();
            let mut order: Vec<usize> = (0..row.len()).collect();
            order.sort_by(|&a, &b| internal[a].total_cmp(&internal[b]));
            let mut ranks = vec![0.0; row.len()];
            let mut i = 0;
            while i < order.len() {
                let mut j = i;
                while j + 1 < order.len() && internal[order[j + 1]] == internal[order[i]] {
                    j += 1;
                }
                let avg = (i + j) as f64 / 2.0 + 1.0;
                for &o in &order[i..=j] {
                    ranks[o] = avg;
                }
                i = j + 1;
            }
            ranks
        })
        .collect()
}

/// 95% critical value of the chi-square distribution.
pub fn chi2_critical_95(df: usize) -> f64 {
    ChiSquared::new(df as f64).expect("df >= 1").inverse_cdf(0.95)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FriedmanResult {
    pub statistic: f64,
    pub significant_95: bool,
}

/// Friedman test on a runs × algorithms table of within-run ranks.
pub fn friedman(ranks: &[Vec<f64>]) -> Result<FriedmanResult> {
    let n = ranks.len();
    let k = ranks.first().map_or(0, Vec::len);
    if n < 2 || k < 2 {
        return Err(Error::Contract(format!("friedman needs at least 2 runs and 2 algorithms, got {n}x{k}")));
    }
    if ranks.iter().any(|r| r.len() != k || r.iter().any(|v| !v.is_finite())) {
        return Err(Error::Contract("friedman table is ragged or non-finite".into()));
    }
    let (nf, kf) = (n as f64, k as f64);
    let sum_sq: f64 = (0..k)
        .map(|j| {
            let mean = ranks.iter().map(|r| r[j]).sum::<f64>() / nf;
            mean * mean
        })
        .sum();
    let statistic = 12.0 * nf / (kf * (kf + 1.0)) * sum_sq - 3.0 * nf * (kf + 1.0);
    // Rounding can leave -1e-14 for an all-ties table.
    let statistic = if statistic.abs() < 1e-9 { 0.0 } else { statistic };
    Ok(FriedmanResult { statistic, significant_95: statistic > chi2_critical_95(k - 1) })
}

/// Entry (i, j) counts runs where algorithm i is at least as good as j.
pub fn count_better_matrix(values: &[Vec<f64>], sense: ObjectiveSense) -> Vec<Vec<usize>> {
    let k = values.first().map_or(0, Vec::len);
    let mut m = vec![vec![0; k]; k];
    for row in values {
        for i in 0..k {
            for j in 0..k {
                if sense.at_least_as_good(row[i], row[j]) {
                    m[i][j] += 1;
                }
            }
        }
    }
    m
}

/// Direction marker for a pair: `>` if `a` beat `b` more often, `<` if less, `=` otherwise.
pub fn marker(m: &[Vec<usize>], a: usize, b: usize) -> char {
    match m[a][b].cmp(&m[b][a]) {
        std::cmp::Ordering::Greater => '>',
        std::cmp::Ordering::Less => '<',
        std::cmp::Ordering::Equal => '=',
    }
}
