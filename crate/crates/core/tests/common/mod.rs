#![allow(dead_code)]

use levymlmc::{Coefficient, JumpDistribution, LevyMeasure, LevyTriplet, SdeModel};

pub const B: f64 = 0.05;
pub const SIGMA: f64 = 0.2;

pub fn gbm() -> (SdeModel, LevyTriplet) {
    (
        SdeModel::new(Coefficient::Linear, 1.0, 1.0).unwrap(),
        LevyTriplet::new(B, SIGMA, LevyMeasure::Zero).unwrap(),
    )
}

pub fn gbm_cp() -> (SdeModel, LevyTriplet) {
    let cp = LevyMeasure::CompoundPoisson {
        rate: 1.0,
        jumps: JumpDistribution::Constant { value: 0.1 },
    };
    (
        SdeModel::new(Coefficient::Linear, 1.0, 1.0).unwrap(),
        LevyTriplet::new(B, SIGMA, cp).unwrap(),
    )
}

pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// `sup |F_n - F|` for a continuous reference cdf.
pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, x)| {
            let f = cdf(*x);
            ((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Two-sample KS distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}
