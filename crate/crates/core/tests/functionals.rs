mod common;

use common::gbm_cp;
use levymlmc::functionals::{eval_functional, eval_linear, eval_supremum, DensityPiece};
use levymlmc::schemes::simulate_level;
use levymlmc::{
    FunctionalSpec, LevelParams, LinearMap, MapComponent, Payoff, RandomStream, Scheme,
    SignedMeasure,
};
use proptest::prelude::*;
use rand::Rng;

fn path(seed: u64) -> levymlmc::PathSkeleton {
    let (model, levy) = gbm_cp();
    simulate_level(
        &model,
        &levy,
        &LevelParams::new(1.0 / 32.0, 0.05),
        Scheme::ShotContinuous,
        &RandomStream::new(seed),
    )
    .unwrap()
}

fn measure() -> impl Strategy<Value = SignedMeasure> {
    (
        prop::collection::vec((0.0f64..=1.0, -2.0f64..2.0), 0..4),
        prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, -2.0f64..2.0), 0..3),
    )
        .prop_map(|(atoms, pieces)| SignedMeasure {
            atoms,
            density: pieces
                .into_iter()
                .map(|(a, b, value)| DensityPiece {
                    from: a.min(b),
                    to: a.max(b),
                    value,
                })
                .collect(),
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn integral_is_linear_in_the_path(mu in measure(), a in -3.0f64..3.0, b in -3.0f64..3.0, s1 in 0u64..1000, s2 in 0u64..1000) {
        let (p, q) = (path(s1), path(s2));
        // both on the union grid would need resampling; use p's grid with q's values interpolated as held
        let qv: Vec<f64> = p.times.iter().map(|t| q.value_at(*t).unwrap()).collect();
        let combo: Vec<f64> = p.post.iter().zip(&qv).map(|(x, y)| a * x + b * y).collect();
        let lhs = mu.integrate(&p.times, &combo);
        let rhs = a * mu.integrate(&p.times, &p.post) + b * mu.integrate(&p.times, &qv);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn integral_is_linear_in_the_measure(m1 in measure(), m2 in measure(), s in 0u64..1000) {
        let p = path(s);
        let mut sum = m1.clone();
        sum.atoms.extend(m2.atoms.iter().copied());
        sum.density.extend(m2.density.iter().cloned());
        let lhs = sum.integrate(&p.times, &p.post);
        let rhs = m1.integrate(&p.times, &p.post) + m2.integrate(&p.times, &p.post);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn constant_paths_integrate_to_total_mass(mu in measure(), c in -5.0f64..5.0, s in 0u64..1000) {
        let p = path(s);
        let values = vec![c; p.len()];
        let mass: f64 = mu.atoms.iter().map(|a| a.1).sum::<f64>() + mu.density.iter().map(|d| d.value * (d.to - d.from)).sum::<f64>();
        prop_assert!((mu.integrate(&p.times, &values) - c * mass).abs() <= 1e-10 * (1.0 + (c * mass).abs()));
    }

    #[test]
    fn supremum_dominates_every_marginal(s in 0u64..10_000, t in 0.0f64..=1.0) {
        let p = path(s);
        let sup = eval_supremum(&p);
        prop_assert!(p.post.iter().chain(&p.pre).all(|x| *x <= sup.value));
        prop_assert!(p.value_at(t).unwrap() <= sup.value);
        let term = eval_functional(&FunctionalSpec::terminal(1.0, 1.0), &p).unwrap();
        prop_assert!(term <= eval_functional(&FunctionalSpec::lookback(Payoff::Identity, 1.0), &p).unwrap());
    }
}

#[test]
fn payoff_gradients_match_finite_differences() {
    let mut rng = RandomStream::new(99).rng();
    let payoffs = [
        Payoff::Identity,
        Payoff::Square,
        Payoff::Call { strike: 1.0 },
        Payoff::WeightedSum {
            weights: vec![0.5, -1.5, 2.0],
        },
    ];
    for payoff in &payoffs {
        let dim = payoff.dim().unwrap_or(1);
        let mut checked = 0;
        for _ in 0..100 {
            let z: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..2.0)).collect();
            if let Some(ok) = payoff
                .check_gradient(&z, levymlmc::tolerances::GRADIENT_REL)
                .unwrap()
            {
                assert!(ok, "{payoff:?} at {z:?}");
                checked += 1;
            }
        }
        assert!(
            checked >= 95,
            "{payoff:?}: only {checked} differentiable points"
        );
    }
}

#[test]
fn asian_average_lies_between_path_extremes() {
    for s in 0..200 {
        let p = path(s);
        let map = LinearMap {
            components: vec![MapComponent::Integral {
                measure: SignedMeasure::average(1.0),
            }],
        };
        let avg = eval_linear(&map, &p)[0];
        let lo = p.post.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p.post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(avg >= lo - 1e-12 && avg <= hi + 1e-12);
    }
}
