//! Regenerates `data/lilliefors.csv`: Monte Carlo quantiles of `√n·D` for
//! the KS statistic against a normal law with fitted mean and variance.
//!
//! cargo run --release -p levymlmc --example lilliefors_table [batches] [out]

use std::fmt::Write as _;

use levymlmc::harness::lilliefors::{ks_statistic_normal, TABLE_PROBS, TABLE_SIZES};
use levymlmc::RandomStream;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

fn main() {
    let mut args = std::env::args().skip(1);
    let batches: u64 = args
        .next()
        .map(|a| a.parse().expect("batch count"))
        .unwrap_or(100_000);
    let out = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/lilliefors.csv").to_string());

    let mut csv =
        format!("# sqrt(n)*D quantiles, {batches} batches per n, seed 20240601\nn,p,sqrt_n_d\n");
    for (i, &n) in TABLE_SIZES.iter().enumerate() {
        let root = RandomStream::new(20_240_601).derive(i as u64, n as u64);
        let mut stats: Vec<f64> = (0..batches)
            .into_par_iter()
            .map(|b| {
                let mut rng = root.child(b).rng();
                let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                ks_statistic_normal(&x).expect("non-degenerate sample") * (n as f64).sqrt()
            })
            .collect();
        stats.sort_by(f64::total_cmp);
        for p in TABLE_PROBS {
            // empirical (1 - p) quantile, linear between order statistics
            let pos = (1.0 - p) * (batches - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(stats.len() - 1);
            let q = stats[lo] + (pos - lo as f64) * (stats[hi] - stats[lo]);
            writeln!(csv, "{n},{p},{q:.6}").unwrap();
        }
        eprintln!("n = {n} done");
    }
    std::fs::write(&out, csv).expect("write table");
}
