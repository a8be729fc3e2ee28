use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use starlike::boundary::{analyze, EpsLadder, Limit};
use starlike::classification::{classify_model, ClassifyConfig, SliceStatus};
use starlike::config::ModelConfig;
use starlike::graph::validate;
use starlike::halfline::{detect_subordinate, jl_theta_from_m, DetectConfig, MBoundary, Verdict};
use starlike::measure::{cached_prefix, measure_branch, Density, MeasureSpec};
use starlike::mfunction::{constant_tail_m, MFunctionEvaluator};
use starlike::mmatrix::{assemble, direct_oracle, CompactModel};
use starlike::multiplicity::{omega_matrix, omega_matrix_with_pivot, OMEGA_RANK_THRESHOLD};
use starlike::random::{starlike as random_starlike, z_type};
use starlike::sequence::{HalfLineData, HalfLineOperator, Tail};

fn max_abs(m: &nalgebra::DMatrix<Complex64>) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn schur_identity(seed in any::<u64>(), re in -3.0f64..3.0, im in 0.1f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g, c) = random_starlike(&mut rng, 6, 4);
        let z = Complex64::new(re, im);
        let m = assemble(&g, &c, z).unwrap();
        let d = direct_oracle(&g, &c, z, 64).unwrap();
        prop_assert!(max_abs(&(&m.entries - d)) < 1e-6);
    }

    #[test]
    fn herglotz_and_symmetric(seed in any::<u64>(), re in -4.0f64..4.0, im in 1e-4f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g, c) = random_starlike(&mut rng, 6, 4);
        let m = assemble(&g, &c, Complex64::new(re, im)).unwrap();
        prop_assert!(m.min_imaginary_eigenvalue() >= -1e-10);
        prop_assert!(m.symmetry_defect() < 1e-10);
    }

    #[test]
    fn config_roundtrip_preserves_m(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g, c) = random_starlike(&mut rng, 6, 4);
        let text = ModelConfig::from_model(&g, &c).unwrap().to_toml_string().unwrap();
        let (g2, c2) = ModelConfig::from_toml_str(&text).unwrap().build().unwrap();
        prop_assert_eq!(&g2, &g);
        let z = Complex64::new(0.3, 0.7);
        let d = &assemble(&g, &c, z).unwrap().entries - assemble(&g2, &c2, z).unwrap().entries;
        prop_assert_eq!(max_abs(&d), 0.0);
    }

    #[test]
    fn shifting_the_origin_shifts_the_reciprocal(a in 0.2f64..2.0, b in -1.0f64..1.0, s in -3.0f64..3.0, re in -3.0f64..3.0, im in 1e-3f64..2.0) {
        let op = HalfLineOperator::from_prefix(&[0.4, b], &[1.3], Tail::Constant { a, b });
        let mut shifted = op.clone();
        shifted.origin_b += s;
        let z = Complex64::new(re, im);
        let r0 = MFunctionEvaluator::new(op).reciprocal(z).unwrap();
        let r1 = MFunctionEvaluator::new(shifted).reciprocal(z).unwrap();
        prop_assert!((r1 - (r0 + s)).norm() < 1e-9 * (1.0 + r0.norm()));
    }

    #[test]
    fn constant_tail_root_solves_quadratic(a in 0.1f64..2.0, b in -2.0f64..2.0, re in -5.0f64..5.0, im in 1e-6f64..3.0) {
        let z = Complex64::new(re, im);
        let m = constant_tail_m(z, a, b);
        prop_assert!(m.im > 0.0);
        prop_assert!((a * a * m * m - (b - z) * m + 1.0).norm() < 1e-9 * (1.0 + m.norm()).powi(2));
    }

    #[test]
    fn ladder_reads_power_approach(c in -2.0f64..2.0, d in -1.0f64..1.0, p in 0.5f64..2.0) {
        let l = EpsLadder::default();
        let v: Vec<Complex64> = l.eps.iter().map(|e| Complex64::new(c + d * e.powf(p), 0.0)).collect();
        match analyze(&l.eps, &v) {
            Limit::Finite { value, .. } => prop_assert!((value.re - c).abs() < 1e-6),
            other => prop_assert!(false, "{other:?}"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn omega_rank_is_pivot_invariant(seed in any::<u64>(), e in -1.5f64..1.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g, mut c) = z_type(&mut rng, 4);
        for r in g.roots.clone() {
            c.set_halfline(&r, HalfLineData::free());
        }
        let model = CompactModel::new(&g, &c).unwrap();
        let ladder = EpsLadder::default();
        let o = omega_matrix(&model, e, &ladder).unwrap();
        let rank = o.rank(OMEGA_RANK_THRESHOLD);
        prop_assume!(rank.is_some());
        for p in o.valid_pivots() {
            let q = omega_matrix_with_pivot(&model, e, &ladder, p).unwrap();
            prop_assert_eq!(q.rank(OMEGA_RANK_THRESHOLD), rank);
        }
    }

    #[test]
    fn off_band_subordinate_angle_matches_m(b in -1.0f64..1.0, gap in 0.2f64..2.0, above in any::<bool>()) {
        let e = if above { 2.0 + b + gap } else { -2.0 + b - gap };
        let op = HalfLineOperator::from_prefix(&[b], &[], Tail::Constant { a: 1.0, b });
        let m = MFunctionEvaluator::new(op.clone()).m(Complex64::new(e, 1e-12)).unwrap();
        let v = detect_subordinate(&op, e, &DetectConfig::default()).unwrap();
        prop_assert_eq!(v.verdict, Verdict::SubordinateExists);
        let want = jl_theta_from_m(MBoundary::Value(Complex64::new(m.re, 0.0))).unwrap().theta();
        let got = v.theta.unwrap();
        let d = (got - want).rem_euclid(std::f64::consts::PI);
        prop_assert!(d.min(std::f64::consts::PI - d) < 1e-6, "{got} vs {want}");
    }

    #[test]
    fn band_energies_are_ac_for_random_compact_parts(seed in any::<u64>(), e in -1.9f64..1.9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g, mut c) = random_starlike(&mut rng, 5, 3);
        for r in g.roots.clone() {
            c.set_halfline(&r, HalfLineData::free());
        }
        prop_assert!(validate(&g, &c).is_valid());
        let model = CompactModel::new(&g, &c).unwrap();
        let cl = classify_model(&model, e, &ClassifyConfig::default()).unwrap();
        if cl.is_conclusive() {
            prop_assert!(cl.ac_support_member);
            let positive = cl.records.iter().any(|r| matches!(r.status, SliceStatus::FinitePositive { .. }));
            prop_assert!(positive);
        }
    }
}

#[test]
fn measure_branch_is_a_rank_one_shift() {
    let spec = MeasureSpec::from_density(Density::Semicircle {
        center: 0.2,
        radius: 1.0,
    });
    for theta in [0.3, 1.0, 2.5] {
        let (b, data) = measure_branch(&spec, 256, theta).unwrap();
        let op = HalfLineOperator::new(b, data);
        let prefix = cached_prefix(&spec, 256).unwrap();
        for z in [Complex64::new(0.1, 0.5), Complex64::new(-1.5, 0.05)] {
            let r = MFunctionEvaluator::new(op.clone()).reciprocal(z).unwrap();
            let want = 1.0 / prefix.m(z) + theta.tan();
            assert!(
                (r - want).norm() < 1e-9 * (1.0 + want.norm()),
                "{r} vs {want}"
            );
        }
    }
}
