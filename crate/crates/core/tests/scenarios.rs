//! Worked examples with known answers, through the public API.

use std::f64::consts::PI;

use num_complex::Complex64;

use starlike::boundary::{EpsLadder, Limit};
use starlike::classification::{
    classify_energy, extend_compact_solution, sample_ladder, scan, stieltjes_invert,
    ClassifyConfig, CompactSolutionCandidate, Status,
};
use starlike::graph::{
    apply_operator, shapes, truncate, validate, JacobiCoefficients, StarLikeGraph, Vector, VertexId,
};
use starlike::halfline::{
    detect_subordinate, iterate_solution, jl_theta_from_m, truncated_norm, BoundaryCondition,
    DetectConfig, MBoundary, Verdict,
};
use starlike::linalg::tridiagonal_eigenvalues_in;
use starlike::measure::{jacobi_from_measure, moments, roundtrip_check, Density, MeasureSpec};
use starlike::mfunction::{m_function, MFunctionEvaluator};
use starlike::mmatrix::{assemble, boundary_value, direct_oracle, m_k, CompactModel};
use starlike::multiplicity::{
    multiplicity_bound, star_overlap_classify, subordinate_space, OverlapClass, SpaceConfig,
};
use starlike::sequence::{HalfLineData, HalfLineOperator};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn golden() -> f64 {
    (5f64.sqrt() - 1.0) / 2.0
}

fn near(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn operator_on_indicator_of_triangle() {
    let (g, k) = shapes::triangle();
    let mut phi = Vector::new();
    let mut window = Vec::new();
    for v in &g.compact {
        phi.set(VertexId::compact(v), c(1.0, 0.0));
        phi.set(VertexId::site(v, 1), c(0.0, 0.0));
        phi.set(VertexId::site(v, 2), c(0.0, 0.0));
        window.push(VertexId::compact(v));
        window.push(VertexId::site(v, 1));
    }
    let out = apply_operator(&g, &k, &phi, &window).unwrap();
    for v in &g.compact {
        assert_eq!(out.at(&VertexId::compact(v)), c(2.0, 0.0));
        assert_eq!(out.at(&VertexId::site(v, 1)), c(1.0, 0.0));
    }
}

#[test]
fn free_half_line_section_has_chebyshev_eigenvalues() {
    let (g, k) = shapes::half_line();
    let n = 40;
    let t = truncate(&g, &k, n - 1);
    let mut eig: Vec<f64> = t.matrix.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for (j, e) in eig.iter().enumerate() {
        let want = 2.0 * (PI * (n - j) as f64 / (n + 1) as f64).cos();
        assert!(near(*e, want, 1e-12), "{e} vs {want}");
    }
}

#[test]
fn free_solutions_by_hand() {
    let op = HalfLineOperator::free();
    let u = iterate_solution(&op, 0.0, BoundaryCondition::dirichlet(), 8);
    let want = [1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0];
    for (n, w) in want.iter().enumerate() {
        assert_eq!(u.value(n + 1), *w);
    }
    assert!(near(truncated_norm(&u, 4.0).unwrap(), 2f64.sqrt(), 1e-14));

    let grow = (3.0 + 5f64.sqrt()) / 2.0;
    let u = iterate_solution(&op, 3.0, BoundaryCondition::dirichlet(), 60);
    assert!(near(u.value(60) / u.value(59), grow, 1e-12));
}

#[test]
fn free_half_line_subordinacy() {
    let op = HalfLineOperator::free();
    let cfg = DetectConfig::default();
    assert_eq!(
        detect_subordinate(&op, 0.0, &cfg).unwrap().verdict,
        Verdict::NoSubordinate
    );
    let off = detect_subordinate(&op, 3.0, &cfg).unwrap();
    assert_eq!(off.verdict, Verdict::SubordinateExists);
    let edge = detect_subordinate(&op, 2.0, &cfg).unwrap();
    assert_eq!(edge.verdict, Verdict::SubordinateExists);
    // the subordinate solution at the band edge is the bounded one, u_n = 1; the norm-ratio
    // minimizer at finite L mixes in a linear part of relative size O(1/L)
    let u = iterate_solution(&op, 2.0, BoundaryCondition::new(edge.theta.unwrap()), 20);
    assert!(near(u.value(20) / u.value(1), 1.0, 20.0 * 5.0 / cfg.l_max));
}

#[test]
fn free_m_values() {
    let ev = MFunctionEvaluator::new(HalfLineOperator::free());
    let m = m_function(&ev, c(0.0, 1.0)).unwrap();
    assert!((m - c(0.0, golden())).norm() < 1e-12);
    let cf = MFunctionEvaluator::new(HalfLineOperator::free()).continued_fraction_only();
    assert!((cf.m(c(0.0, 1.0)).unwrap() - m).norm() < 1e-10);
    // off the spectrum the boundary value is real and negative
    let m3 = ev.m(c(3.0, 1e-6)).unwrap();
    assert!(near(m3.re, -(3.0 - 5f64.sqrt()) / 2.0, 1e-6));
    assert!(m3.im.abs() < 1e-6);
}

#[test]
fn boundary_angles() {
    assert!(near(
        jl_theta_from_m(MBoundary::Value(c(0.0, 0.0)))
            .unwrap()
            .theta(),
        PI / 2.0,
        1e-15
    ));
    assert_eq!(jl_theta_from_m(MBoundary::Infinity).unwrap().theta(), 0.0);
    assert!(jl_theta_from_m(MBoundary::Value(c(1.0, 0.5))).is_none());
}

#[test]
fn singleton_reciprocal_limit() {
    let g = StarLikeGraph::new(&["a", "b"], &[("a", "b")], &["b"]);
    let mut k = JacobiCoefficients::uniform(&g, 1.0, 0.0);
    k.set_b("a", 0.7);
    let model = CompactModel::new(&g, &k).unwrap();
    let s = model.slice(0);
    assert!(s.is_singleton());
    let r = s.reciprocal(c(0.2, 1e-9)).unwrap();
    assert!(near(r.re, 0.5, 1e-12) && r.im.abs() < 1e-8);
    assert!((1.0 / m_k(s, c(0.2, 1e-9)).unwrap() - r).norm() < 1e-9);
}

#[test]
fn m_matrix_of_n_and_z() {
    let (g, k) = shapes::half_line();
    let m = assemble(&g, &k, c(0.0, 1.0)).unwrap();
    assert!((m.entries[(0, 0)] - c(0.0, golden())).norm() < 1e-12);
    let d = direct_oracle(&g, &k, c(0.0, 1.0), 2000).unwrap();
    assert!((d[(0, 0)] - c(0.0, golden())).norm() < 1e-8);

    let (g, k) = shapes::line();
    let z = c(0.0, 1.0);
    let r = 1.0 / c(0.0, golden());
    let det = r * r - 1.0;
    let m = assemble(&g, &k, z).unwrap();
    assert!((m.entries[(0, 0)] - r / det).norm() < 1e-12);
    assert!((m.entries[(0, 1)] + 1.0 / det).norm() < 1e-12);

    let (g, k) = shapes::triangle();
    let z = c(0.0, 2.0);
    let d = direct_oracle(&g, &k, z, 64).unwrap();
    let m = assemble(&g, &k, z).unwrap();
    assert!(m
        .entries
        .iter()
        .zip(d.iter())
        .all(|(a, b)| (a - b).norm() < 1e-8));
}

#[test]
fn boundary_values_of_free_n() {
    let (g, k) = shapes::half_line();
    let l = EpsLadder::default();
    let b0 = boundary_value(&g, &k, 0.0, &l).unwrap();
    assert!(near(b0.im_trace.value().unwrap().re, 1.0, 1e-8));
    let b3 = boundary_value(&g, &k, 3.0, &l).unwrap();
    let v = b3.entry(0, 0).value().unwrap();
    assert!(near(v.re, -(3.0 - 5f64.sqrt()) / 2.0, 1e-8) && b3.entry(0, 0).is_real());
}

#[test]
fn raised_origin_gives_a_point_mass() {
    let g = StarLikeGraph::new(&["v"], &[], &["v"]);
    let mut k = JacobiCoefficients::uniform(&g, 1.0, 0.0);
    k.set_b("v", 5.0);
    let e = 5.2;
    let b = boundary_value(&g, &k, e, &EpsLadder::default()).unwrap();
    assert!(matches!(b.im_trace, Limit::Divergent { exponent } if near(exponent, 1.0, 1e-3)));
    assert!(matches!(
        boundary_value(&g, &k, 5.0, &EpsLadder::default())
            .unwrap()
            .im_trace,
        Limit::Finite { .. }
    ));
}

#[test]
fn free_star_classification() {
    let (g, k) = shapes::star(3);
    let cfg = ClassifyConfig::default();
    let band = classify_energy(&g, &k, 0.7, &cfg).unwrap();
    assert!(band.ac_support_member && !band.singular_candidate);
    // off the spectrum each branch has a decaying solution but no combination satisfies
    // the equation at the center
    let off = classify_energy(&g, &k, 3.0, &cfg).unwrap();
    assert_eq!(off.status, Status::Neither);
    assert_eq!(off.kernel_dim, 0);
    // at the eigenvalues +-3/sqrt2 it does
    let e = 3.0 / 2f64.sqrt();
    let eig = classify_energy(&g, &k, e, &cfg).unwrap();
    assert!(eig.singular_candidate && eig.kernel_dim == 1);
    let sp = subordinate_space(
        &CompactModel::new(&g, &k).unwrap(),
        3.0,
        &SpaceConfig::default(),
    )
    .unwrap();
    assert_eq!(sp.dim_upper, 0);
}

#[test]
fn free_n_and_z_scans() {
    let (g, k) = shapes::half_line();
    let r = scan(
        &g,
        &k,
        &[-3.0, -1.0, 0.0, 1.0, 3.0],
        &ClassifyConfig::default(),
    )
    .unwrap();
    let st: Vec<Status> = r
        .points
        .iter()
        .map(|p| p.1.as_ref().unwrap().status)
        .collect();
    assert_eq!(
        st,
        [
            Status::Neither,
            Status::Ac,
            Status::Ac,
            Status::Ac,
            Status::Neither
        ]
    );
    let (g, k) = shapes::line();
    let r = scan(&g, &k, &[0.0], &ClassifyConfig::default()).unwrap();
    assert_eq!(r.points[0].1.as_ref().unwrap().status, Status::Ac);
}

#[test]
fn free_density_from_the_ladder() {
    let (g, k) = shapes::half_line();
    let model = CompactModel::new(&g, &k).unwrap();
    let es: Vec<f64> = (0..=38).map(|i| -1.9 + 0.1 * i as f64).collect();
    let ladder = EpsLadder::geometric(0.1, 1e-4, 12).unwrap();
    let samples = sample_ladder(&es, &ladder, |z| Ok(model.assemble(z)?.entries[(0, 0)])).unwrap();
    for p in stieltjes_invert(&samples).points {
        let want = (4.0 - p.energy * p.energy).sqrt() / (2.0 * PI);
        assert!(near(p.density.unwrap(), want, 1e-3), "{p:?}");
    }
}

#[test]
fn bound_state_on_z() {
    let g = StarLikeGraph::new(&["l", "r"], &[("l", "r")], &["l", "r"]);
    let mut k = JacobiCoefficients::uniform(&g, 1.0, 0.0);
    k.set_b("l", 5.0);
    let e = 29f64.sqrt();
    let rep = multiplicity_bound(&g, &k, e, &SpaceConfig::default()).unwrap();
    assert_eq!(rep.omega_rank, Some(1));
    assert_eq!((rep.dim_lower, rep.dim_upper, rep.bound), (1, 1, Some(1)));
    assert!(rep.eigenvalue);

    // the extension of the compact solution matches the dense section's eigenvalue
    let c0 = classify_energy(&g, &k, e, &ClassifyConfig::default()).unwrap();
    let cand: &CompactSolutionCandidate = &c0.candidates[0];
    let x = extend_compact_solution(&CompactModel::new(&g, &k).unwrap(), cand, 200).unwrap();
    assert!(x.residual < 1e-10);
    let t = truncate(&g, &k, 300);
    let eig = t.matrix.symmetric_eigenvalues();
    assert!(eig.iter().any(|x| near(*x, e, 1e-10)));
}

#[test]
fn z_energies_have_simple_subordinate_space() {
    let g = StarLikeGraph::new(&["l", "r"], &[("l", "r")], &["l", "r"]);
    let mut k = JacobiCoefficients::uniform(&g, 0.8, 0.0);
    k.set_b("r", -0.4);
    k.set_halfline("l", HalfLineData::constant(1.0, 0.3));
    let model = CompactModel::new(&g, &k).unwrap();
    for e in [-3.0, -2.0, -0.5, 0.0, 1.1, 2.4, 3.0] {
        let s = subordinate_space(&model, e, &SpaceConfig::default()).unwrap();
        assert!(s.dim_upper <= 1, "E = {e}: {}", s.dim_upper);
    }
}

#[test]
fn star_overlap_examples() {
    let (g, k) = shapes::star(3);
    let cfg = ClassifyConfig::default();
    // identical free branches at E = 3: m(3) is finite on every leaf slice
    let s = star_overlap_classify(&g, &k, 3.0, &cfg).unwrap();
    assert_eq!(s.class, OverlapClass::Neither);
    assert!(s.memberships.iter().all(|m| !m.1));
    // a pole of one branch only
    let mut k2 = k.clone();
    k2.set_b("l2", 5.0);
    let s = star_overlap_classify(&g, &k2, 5.2, &cfg).unwrap();
    assert_eq!(s.memberships.iter().filter(|m| m.1).count(), 1);
    assert_eq!(s.class, OverlapClass::Neither);
    // identical bumped branches share the pole
    let mut k3 = k.clone();
    for l in ["l1", "l2", "l3"] {
        k3.set_b(l, 5.0);
    }
    let s = star_overlap_classify(&g, &k3, 5.2, &cfg).unwrap();
    assert_eq!(s.class, OverlapClass::Multiple);
    assert_eq!(s.bound, Some(2));
    assert!(validate(&g, &k3).is_valid());
}

#[test]
fn measure_moments_and_coefficients() {
    let mu2 = MeasureSpec::inverse_sqrt();
    let m = moments(&mu2, 12).unwrap();
    for (k, v) in m.moments.iter().enumerate() {
        assert!(near(*v, 1.0 / (2 * k + 1) as f64, 1e-13));
    }
    let mu1 = MeasureSpec::half_atom_half_uniform();
    let m = moments(&mu1, 12).unwrap();
    assert!(near(m.moments[0], 1.0, 1e-14));
    for k in 1..12 {
        assert!(near(m.moments[k], 1.0 / (2.0 * (k + 1) as f64), 1e-13));
    }

    let semi = MeasureSpec::from_density(Density::Semicircle {
        center: 0.0,
        radius: 2.0,
    });
    let p = jacobi_from_measure(&semi, 30).unwrap();
    assert!(p.a.iter().all(|a| near(*a, 1.0, 1e-8)) && p.b.iter().all(|b| near(*b, 0.0, 1e-8)));

    let p = jacobi_from_measure(&semi, 60).unwrap();
    assert!(roundtrip_check(&p, &semi, &[c(0.0, 1.0)]).unwrap() <= 1e-6);
    let p = jacobi_from_measure(&mu1, 60).unwrap();
    assert!(roundtrip_check(&p, &mu1, &[c(0.0, 2.0)]).unwrap() <= 1e-5);
}

#[test]
fn sturm_count_matches_dense() {
    let d = vec![0.0; 50];
    let e = vec![1.0; 49];
    let all = tridiagonal_eigenvalues_in(&d, &e, -3.0, 3.0, 1e-13);
    assert_eq!(all.len(), 50);
    assert!(
        near(all[0], -2.0 * (PI / 51.0).cos(), 1e-12)
            || near(all[49], -2.0 * (PI / 51.0).cos(), 1e-12)
    );
}
