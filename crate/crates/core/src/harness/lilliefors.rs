//! Kolmogorov-Smirnov statistic against a fitted normal law and its
//! Lilliefors null distribution.
//!
//! Critical values come from a Monte Carlo table (see the
//! `lilliefors_table` example) of `√n·D` at upper-tail probabilities on a
//! grid of sample sizes. Between grid points the table is interpolated
//! linearly in `ln n` and in `ln p`; beyond its smallest probability the
//! Dallal-Wilkinson approximation is used.

use std::sync::OnceLock;

use statrs::distribution::{ContinuousCDF, Normal};

const TABLE_CSV: &str = include_str!("../../data/lilliefors.csv");

/// Sample sizes of the shipped table.
pub const TABLE_SIZES: [usize; 8] = [50, 100, 200, 500, 1000, 2000, 5000, 10_000];

/// Upper-tail probabilities of the shipped table, decreasing.
pub const TABLE_PROBS: [f64; 18] = [
    0.99, 0.95, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.15, 0.1, 0.05, 0.025, 0.01, 0.005,
    0.0025, 0.001,
];

struct Table {
    /// `rows[i][j]`: `√n·D` quantile for `TABLE_SIZES[i]` at `TABLE_PROBS[j]`.
    rows: Vec<Vec<f64>>,
}

fn table() -> &'static Table {
    static TABLE: OnceLock<Table> = OnceLock::new();
    TABLE.get_or_init(|| parse_table(TABLE_CSV))
}

fn parse_table(text: &str) -> Table {
    let mut rows = vec![vec![f64::NAN; TABLE_PROBS.len()]; TABLE_SIZES.len()];
    for line in text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#') && !l.starts_with('n'))
    {
        let f: Vec<&str> = line.split(',').collect();
        let n: usize = f[0].parse().expect("table sample size");
        let p: f64 = f[1].parse().expect("table probability");
        let v: f64 = f[2].parse().expect("table value");
        let i = TABLE_SIZES
            .iter()
            .position(|s| *s == n)
            .expect("sample size on grid");
        let j = TABLE_PROBS
            .iter()
            .position(|q| (q - p).abs() < 1e-12)
            .expect("probability on grid");
        rows[i][j] = v;
    }
    assert!(
        rows.iter().flatten().all(|v| v.is_finite()),
        "incomplete Lilliefors table"
    );
    Table { rows }
}

/// Standardised sample `(x - mean)/sd` with the unbiased `sd`, or `None` if
/// the sample is constant.
fn standardise(samples: &[f64]) -> Option<Vec<f64>> {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if !(var > 0.0) || !var.is_finite() {
        return None;
    }
    let sd = var.sqrt();
    let mut z: Vec<f64> = samples.iter().map(|x| (x - mean) / sd).collect();
    z.sort_by(f64::total_cmp);
    Some(z)
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// `sup_x |F_n(x) - Φ((x - x̄)/s)|`, `None` for constant samples.
pub fn ks_statistic_normal(samples: &[f64]) -> Option<f64> {
    if samples.len() < 2 {
        return None;
    }
    let z = standardise(samples)?;
    let n = z.len() as f64;
    let phi = std_normal();
    let mut d = 0.0f64;
    for (i, zi) in z.iter().enumerate() {
        let f = phi.cdf(*zi);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Some(d)
}

/// Anderson-Darling `A²` against the fitted normal law, `None` for constant
/// samples.
pub fn anderson_darling_normal(samples: &[f64]) -> Option<f64> {
    if samples.len() < 2 {
        return None;
    }
    let z = standardise(samples)?;
    let n = z.len();
    let phi = std_normal();
    let mut s = 0.0;
    for i in 0..n {
        let lo = phi.cdf(z[i]).max(1e-300);
        let hi = phi.sf(z[n - 1 - i]).max(1e-300);
        s += (2 * i + 1) as f64 * (lo.ln() + hi.ln());
    }
    Some(-(n as f64) - s / n as f64)
}

/// Approximate p-value of the modified statistic `A²(1 + 0.75/n + 2.25/n²)`
/// (D'Agostino and Stephens).
pub fn anderson_darling_p_value(a2: f64, n: usize) -> f64 {
    let n = n as f64;
    let a = a2 * (1.0 + 0.75 / n + 2.25 / (n * n));
    // the quadratic in the upper branch turns back up past its minimum at a ≈ 153
    let p = if a >= 153.0 {
        0.0
    } else if a >= 0.6 {
        (1.2937 - 5.709 * a + 0.0186 * a * a).exp()
    } else if a >= 0.34 {
        (0.9177 - 4.279 * a - 1.38 * a * a).exp()
    } else if a >= 0.2 {
        1.0 - (-8.318 + 42.796 * a - 59.938 * a * a).exp()
    } else {
        1.0 - (-13.436 + 101.14 * a - 223.73 * a * a).exp()
    };
    p.clamp(0.0, 1.0)
}

/// Dallal-Wilkinson approximation of the upper tail, accurate below `0.1`.
pub fn dallal_wilkinson(d: f64, n: usize) -> f64 {
    let n = n as f64;
    let m = n + 2.78019;
    let p = (-7.01256 * d * d * m + 2.99587 * d * m.sqrt() - 0.122119
        + 0.974598 / n.sqrt()
        + 1.67997 / n)
        .exp();
    p.clamp(0.0, 1.0)
}

/// Row of `√n·D` quantiles for sample size `n`.
fn quantile_row(n: usize) -> Vec<f64> {
    let t = table();
    let first = TABLE_SIZES[0];
    let last = TABLE_SIZES[TABLE_SIZES.len() - 1];
    if n <= first {
        return t.rows[0].clone();
    }
    if n >= last {
        return t.rows[TABLE_SIZES.len() - 1].clone();
    }
    let i = TABLE_SIZES.partition_point(|s| *s <= n) - 1;
    let (a, b) = (
        (TABLE_SIZES[i] as f64).ln(),
        (TABLE_SIZES[i + 1] as f64).ln(),
    );
    let w = ((n as f64).ln() - a) / (b - a);
    t.rows[i]
        .iter()
        .zip(&t.rows[i + 1])
        .map(|(x, y)| x + w * (y - x))
        .collect()
}

/// Critical value of `D` at upper-tail probability `p` on the table grid.
pub fn critical_value(n: usize, p: f64) -> Option<f64> {
    let j = TABLE_PROBS.iter().position(|q| (q - p).abs() < 1e-12)?;
    Some(quantile_row(n)[j] / (n as f64).sqrt())
}

/// Upper-tail probability of the Lilliefors statistic `d` at sample size
/// `n`. Values below the table's range report its largest probability.
pub fn lilliefors_p_value(d: f64, n: usize) -> f64 {
    let row = quantile_row(n);
    let s = d * (n as f64).sqrt();
    if s <= row[0] {
        return TABLE_PROBS[0];
    }
    let last = row.len() - 1;
    if s >= row[last] {
        return dallal_wilkinson(d, n).min(TABLE_PROBS[last]);
    }
    let j = row.partition_point(|v| *v <= s) - 1;
    let w = (s - row[j]) / (row[j + 1] - row[j]);
    let (lp, lq) = (TABLE_PROBS[j].ln(), TABLE_PROBS[j + 1].ln());
    (lp + w * (lq - lp)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_is_monotone() {
        for row in &table().rows {
            assert!(row.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn matches_stephens_modified_points() {
        // Stephens: D(√n - 0.01 + 0.85/√n) has upper 5% and 1% points 0.895 and 1.035.
        for n in [50usize, 100, 200] {
            let r = (n as f64).sqrt();
            let scale = r - 0.01 + 0.85 / r;
            let c05 = critical_value(n, 0.05).unwrap() * scale;
            let c01 = critical_value(n, 0.01).unwrap() * scale;
            assert!((c05 - 0.895).abs() < 0.01, "n = {n}: {c05}");
            assert!((c01 - 1.035).abs() < 0.015, "n = {n}: {c01}");
        }
    }

    #[test]
    fn p_value_is_decreasing_and_bounded() {
        let mut last = 1.0;
        for i in 1..200 {
            let d = i as f64 * 0.0005;
            let p = lilliefors_p_value(d, 1000);
            assert!(p <= last + 1e-15 && (0.0..=1.0).contains(&p));
            last = p;
        }
    }

    #[test]
    fn dallal_wilkinson_agrees_with_table_near_its_edge() {
        for n in [100, 1000, 10_000] {
            let d = critical_value(n, 0.01).unwrap();
            let p = dallal_wilkinson(d, n);
            assert!((p / 0.01 - 1.0).abs() < 0.25, "n = {n}: {p}");
        }
    }

    #[test]
    fn anderson_darling_p_is_monotone() {
        let mut last = 1.0;
        for i in 0..2000 {
            let p = anderson_darling_p_value(i as f64 * 0.25, 1000);
            assert!(p <= last + 1e-12, "{i}");
            last = p;
        }
        assert_eq!(anderson_darling_p_value(400.0, 1000), 0.0);
    }

    #[test]
    fn constant_sample_is_degenerate() {
        assert_eq!(ks_statistic_normal(&[1.0; 200]), None);
        assert_eq!(anderson_darling_normal(&[1.0; 200]), None);
    }
}
