//! End-to-end checks against closed forms computed independently of the
//! library's summation routes.

use num_rational::Ratio;
use pairjensen_core::degree::DEFAULT_COLUMN_TOL;
use pairjensen_core::inequalities::{entropy_check, main_inequality};
use pairjensen_core::measure::{random_instance, ValueParts};
use pairjensen_core::{characterize, random_hypergraph, Hypergraph, Instance, PhiSpec, Status, Tolerance};
use proptest::prelude::*;

/// Degrees straight from the definition, one atom at a time.
fn naive_degrees(inst: &Instance) -> Vec<f64> {
    (0..inst.v_count())
        .map(|v| {
            (0..inst.e_count())
                .map(|e| inst.kernel(v, e) * inst.weights()[e] * inst.e_masses()[e])
                .sum()
        })
        .collect()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn integer_instance_matches_rational_arithmetic() {
    // Columns of the kernel sum to 6 against unit v-masses.
    let kernel = [vec![1, 2, 3], vec![2, 2, 2], vec![3, 2, 1]];
    let weights = [1i64, 3, 5];
    let tau = [2i64, 1, 1];
    let inst = Instance::new(
        pairjensen_core::AtomicSpace::unit(3),
        pairjensen_core::AtomicSpace::new(tau.iter().map(|&t| t as f64).collect(), "tau").unwrap(),
        kernel.iter().map(|r| r.iter().map(|&m| m as f64).collect()).collect(),
        weights.iter().map(|&w| w as f64).collect(),
    )
    .unwrap();

    let delta: Vec<Ratio<i64>> = kernel
        .iter()
        .map(|row| {
            row.iter()
                .zip(weights.iter().zip(&tau))
                .map(|(&m, (&w, &t))| Ratio::from_integer(m * w * t))
                .sum()
        })
        .collect();
    let s: Ratio<i64> = weights.iter().zip(&tau).map(|(&w, &t)| Ratio::from_integer(w * t)).sum();
    let mean = delta.iter().sum::<Ratio<i64>>() / 3;
    // phi = id: lhs = (1/s) sum delta^2, rhs = c * mean.
    let lhs = delta.iter().map(|d| d * d).sum::<Ratio<i64>>() / s;
    let rhs = mean * 6;

    let profile = characterize(&inst, DEFAULT_COLUMN_TOL).unwrap();
    assert_eq!(profile.c, 6.0);
    let r = main_inequality(&profile, &PhiSpec::identity(), &Tolerance::default()).unwrap();
    let as_f64 = |x: Ratio<i64>| *x.numer() as f64 / *x.denom() as f64;
    assert!(close(r.lhs, as_f64(lhs), 1e-14), "{} vs {lhs}", r.lhs);
    assert!(close(r.rhs, as_f64(rhs), 1e-14), "{} vs {rhs}", r.rhs);
    assert_eq!(r.status, Status::Holds);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    /// With phi = id the gap is the mu-variance of the degrees divided by s.
    #[test]
    fn identity_gap_is_degree_variance(seed in any::<u64>(), p in 1usize..7, q in 1usize..7, c in 0.5f64..4.0) {
        let inst = random_instance(p, q, c, seed, (0.1, 3.0)).unwrap();
        let profile = characterize(&inst, DEFAULT_COLUMN_TOL).unwrap();
        let delta = naive_degrees(&inst);
        for (a, b) in delta.iter().zip(&profile.delta) {
            prop_assert!(close(*a, *b, 1e-12));
        }
        let mu = inst.v_masses();
        let s: f64 = inst.weights().iter().zip(inst.e_masses()).map(|(w, t)| w * t).sum();
        let mean = delta.iter().zip(mu).map(|(d, m)| d * m).sum::<f64>() / mu.iter().sum::<f64>();
        let variance: f64 = delta.iter().zip(mu).map(|(d, m)| (d - mean).powi(2) * m).sum();
        let r = main_inequality(&profile, &PhiSpec::identity(), &Tolerance::default()).unwrap();
        prop_assert!((r.gap - variance / s).abs() <= 1e-9 * r.lhs.abs().max(1.0), "{} vs {}", r.gap, variance / s);
        prop_assert!(!r.is_violated());
    }

    /// The entropy side equals minus the relative entropy of rho against mu/mu(V).
    #[test]
    fn entropy_is_relative_entropy(seed in any::<u64>(), p in 1usize..6, q in 1usize..6) {
        let inst = random_instance(p, q, 1.5, seed, (0.2, 2.0)).unwrap();
        let profile = characterize(&inst, DEFAULT_COLUMN_TOL).unwrap();
        let delta = naive_degrees(&inst);
        prop_assume!(delta.iter().all(|&d| d > 0.0));
        let mu = inst.v_masses();
        let mu_total: f64 = mu.iter().sum();
        let total: f64 = delta.iter().zip(mu).map(|(d, m)| d * m).sum();
        let kl: f64 = delta
            .iter()
            .zip(mu)
            .map(|(d, m)| {
                let rho = d * m / total;
                rho * (rho / (m / mu_total)).ln()
            })
            .sum();
        let r = entropy_check(&profile, &Tolerance::default()).unwrap();
        prop_assert!((r.lhs + kl).abs() <= 1e-12, "{} vs {}", r.lhs, -kl);
        prop_assert!(!r.is_violated());
    }

    /// Scaling every weight by lambda shifts both sides of the log check by
    /// c ln lambda, so the gap is unchanged.
    #[test]
    fn log_gap_is_invariant_under_weight_scaling(seed in any::<u64>(), p in 1usize..8, q in 1usize..8, lambda in 0.01f64..100.0) {
        let inst = random_instance(p, q, 2.5, seed, (0.2, 2.0)).unwrap();
        prop_assume!(naive_degrees(&inst).iter().all(|&d| d > 0.0));
        let scaled = inst
            .map_values(ValueParts { weights: true, ..Default::default() }, |w| w * lambda)
            .unwrap();
        let tol = Tolerance::default();
        let a = characterize(&inst, DEFAULT_COLUMN_TOL).unwrap();
        let b = characterize(&scaled, DEFAULT_COLUMN_TOL).unwrap();
        let ra = main_inequality(&a, &PhiSpec::log(), &tol).unwrap();
        let rb = main_inequality(&b, &PhiSpec::log(), &tol).unwrap();
        prop_assert!((ra.gap - rb.gap).abs() <= 1e-10, "{} vs {}", ra.gap, rb.gap);
        prop_assert!((rb.rhs - ra.rhs - a.c * lambda.ln()).abs() <= 1e-10 * rb.rhs.abs().max(1.0));
    }

    /// Regular hypergraphs have every degree equal to kq/p and meet the
    /// geometric-mean bound with equality.
    #[test]
    fn regular_hypergraph_is_an_equality_case(p in 2usize..8, mult in 1usize..4, k in 2u32..4, seed in any::<u64>()) {
        let q = p * mult;
        let h = random_hypergraph(p, q, k, seed, true).unwrap();
        let summary = h.validate_and_degrees().unwrap();
        prop_assert!(summary.degrees.iter().all(|&d| d as usize == k as usize * mult));
        prop_assert_eq!(summary.d_bar, Ratio::new((k as usize * q) as u64, p as u64));
        let r = h.gm_of_gms_check(&Tolerance::default()).unwrap();
        prop_assert_eq!(r.status, Status::Equality);
    }
}

#[test]
fn path_hypergraph_geometric_mean() {
    // Degrees 1, 2, 1 over two edges of size 2: lhs = (1/4) ln 4, d_bar = 4/3.
    let h = Hypergraph::new(2, vec![vec![1, 0], vec![1, 1], vec![0, 1]], None).unwrap();
    let r = h.gm_of_gms_check(&Tolerance::default()).unwrap();
    assert!((r.lhs - 4f64.ln() / 4.0).abs() < 1e-15);
    assert!((r.rhs - (4.0f64 / 3.0).ln()).abs() < 1e-15);
    assert!((r.get_extra("gm_lhs").unwrap() - 2f64.sqrt()).abs() < 1e-15);
    assert_eq!(r.status, Status::Holds);
}

#[test]
fn instance_json_round_trip_preserves_results() {
    let inst = random_instance(4, 5, 2.0, 77, (0.5, 1.5)).unwrap();
    let back = Instance::from_json(&inst.to_json().unwrap()).unwrap();
    let a = characterize(&inst, DEFAULT_COLUMN_TOL).unwrap();
    let b = characterize(&back, DEFAULT_COLUMN_TOL).unwrap();
    assert_eq!(a.delta, b.delta);
    let phi = PhiSpec::log();
    let ra = main_inequality(&a, &phi, &Tolerance::default()).unwrap();
    let rb = main_inequality(&b, &phi, &Tolerance::default()).unwrap();
    assert_eq!(ra.lhs, rb.lhs);
    assert_eq!(ra.rhs, rb.rhs);
}
