use itertools::Itertools;
use num_complex::Complex64;
use proptest::prelude::*;
use sparse_beam::admm::{AdmmConfig, RhoChoice, Variant};
use sparse_beam::selection::{
    enumerate_all, fixed_geometry, tune_lambda, FixedGeometry, SupportScorer, DEFAULT_ENUMERATION_CAP,
};
use sparse_beam::signal_model::{data_covariance_true, interference_noise_covariance, linear_to_db, Scenario};

/// Max SINR of a two-sensor subarray, `σ_s² bᴴ Q⁻¹ b` with the 2×2 inverse
/// written out.
fn pair_sinr(s: &Scenario, i: usize, j: usize) -> f64 {
    let r = interference_noise_covariance(s);
    let a0 = s.soi_steering();
    let (p, q, x) = (r.get(i, i).re, r.get(j, j).re, r.get(i, j));
    let det = p * q - x.norm_sqr();
    let (bi, bj) = (a0[i], a0[j]);
    let quad: Complex64 = bi.conj() * (q * bi - x * bj) + bj.conj() * (-x.conj() * bi + p * bj);
    linear_to_db(s.soi_power() * quad.re / det)
}

#[test]
fn pair_enumeration_matches_closed_form() {
    let s = Scenario::from_db(6, 10.0, 0.0, &[(-20.0, 20.0), (45.0, 25.0)]).unwrap();
    let rx = data_covariance_true(&s);
    let e = enumerate_all(&s, &rx, 2, DEFAULT_ENUMERATION_CAP).unwrap();
    assert_eq!(e.evaluated, 15);
    let scored: Vec<(Vec<usize>, f64)> = (0..6)
        .combinations(2)
        .map(|p| {
            let v = pair_sinr(&s, p[0], p[1]);
            (p, v)
        })
        .collect();
    let best = scored.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    let worst = scored.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    assert_eq!(e.best.support, best.0);
    assert_eq!(e.worst.support, worst.0);
    assert!((e.best.sinr_db - best.1).abs() < 1e-9);
    assert!((e.worst.sinr_db - worst.1).abs() < 1e-9);

    // the scorer gives the same numbers support by support
    let scorer = SupportScorer::new(&s, &rx).unwrap();
    for (sup, v) in &scored {
        assert!((scorer.score(sup).unwrap().1 - v).abs() < 1e-9);
    }
}

#[test]
fn admm_selection_is_sandwiched_by_enumeration() {
    let cfg = AdmmConfig {
        rho: RhoChoice::Fixed(1e3),
        variant: Variant::Reweighted,
        ..Default::default()
    };
    for (doa, i1, i2) in [(0.0, -40.0, 30.0), (20.0, 5.0, 50.0), (-35.0, -10.0, 0.0)] {
        let s = Scenario::from_db(10, doa, 0.0, &[(i1, 20.0), (i2, 20.0)]).unwrap();
        let rx = data_covariance_true(&s);
        let e = enumerate_all(&s, &rx, 4, DEFAULT_ENUMERATION_CAP).unwrap();
        let r = tune_lambda(4, None, &cfg, &s, &rx).unwrap();
        assert_eq!(r.support.len(), 4);
        assert!(r.sinr_db <= e.best.sinr_db + 1e-9);
        assert!(r.sinr_db >= e.worst.sinr_db - 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_geometry_lies_between_worst_and_best(
        doa in -50.0f64..50.0,
        off in 5.0f64..40.0,
        seed in 0u64..1000,
    ) {
        let s = Scenario::from_db(9, doa, 0.0, &[(doa - off, 20.0), (doa + off, 15.0)]).unwrap();
        let rx = data_covariance_true(&s);
        let e = enumerate_all(&s, &rx, 4, DEFAULT_ENUMERATION_CAP).unwrap();
        let scorer = SupportScorer::new(&s, &rx).unwrap();
        for g in [
            FixedGeometry::CompactUla,
            FixedGeometry::SparseUla,
            FixedGeometry::Nested,
            FixedGeometry::Coprime,
            FixedGeometry::Random(seed),
        ] {
            let sup = fixed_geometry(g, 9, 4).unwrap();
            let v = scorer.score(&sup).unwrap().1;
            prop_assert!(v <= e.best.sinr_db + 1e-9 && v >= e.worst.sinr_db - 1e-9, "{g}: {v}");
        }
    }

    #[test]
    fn best_enumeration_grows_with_l(doa in -50.0f64..50.0, off in 5.0f64..40.0) {
        let s = Scenario::from_db(8, doa, 0.0, &[(doa - off, 20.0), (doa + off, 20.0)]).unwrap();
        let rx = data_covariance_true(&s);
        let best: Vec<f64> = (1..=8)
            .map(|l| enumerate_all(&s, &rx, l, DEFAULT_ENUMERATION_CAP).unwrap().best.sinr_db)
            .collect();
        prop_assert!(best.windows(2).all(|p| p[1] >= p[0] - 1e-9), "{best:?}");
    }
}
