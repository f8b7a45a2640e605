mod common;

use common::*;
use mleig::adaptivity::{adaptive_multilevel, cluster_estimate};
use mleig::baseline::direct_solve;
use mleig::correction::CorrectionOptions;
use mleig::fem::{build_space, default_error_quadrature};
use mleig::mesh::{generate_unit_square, refine_red};
use mleig::metrics::align_to_exact;
use mleig::model;
use mleig::smalleig::ClusterSelector;
use proptest::prelude::*;

proptest! {
    #![proptest_config(config())]

    #[test]
    fn assembly_matches_quadrature(seed in any::<u64>(), p in degree(), n in 1usize..=3, l_shape in any::<bool>()) {
        check_assembly(seed, p, n, l_shape)?;
    }

    #[test]
    fn prolongation_is_exact(seed in any::<u64>(), pc in degree(), dp in 0usize..=2, l_shape in any::<bool>()) {
        check_prolongation(seed, pc, dp, l_shape)?;
    }

    #[test]
    fn left_and_right_problems_agree(seed in any::<u64>(), n in 2usize..=8, hermitian_b in any::<bool>()) {
        check_left_right(seed, n, hermitian_b)?;
    }

    #[test]
    fn gap_axioms(seed in any::<u64>(), n in 4usize..=10, k in 1usize..=3, l in 1usize..=3) {
        check_gap(seed, n, k, l)?;
    }

    #[test]
    fn normalization_and_phase(seed in any::<u64>(), p in degree(), n in 2usize..=4) {
        check_normalization(seed, p, n)?;
    }

    #[test]
    fn dorfler_is_monotone(ind in prop::collection::vec(0.0f64..10.0, 1..60), t1 in 0.01f64..=1.0, t2 in 0.01f64..=1.0) {
        check_dorfler(ind, t1, t2)?;
    }

    #[test]
    fn estimator_total_is_l2_norm(primal in prop::collection::vec(0.0f64..3.0, 1..60), seed in any::<u64>()) {
        check_estimator_total(primal, seed)?;
    }

    #[test]
    fn bisection_keeps_meshes_conforming(seed in any::<u64>(), l_shape in any::<bool>(), rounds in 1usize..=5) {
        check_bisection_conformity(seed, l_shape, rounds)?;
    }
}

#[test]
fn adaptive_meshes_stay_quasi_uniform_for_smooth_problems() {
    let b = model::real_b();
    let initial = generate_unit_square(4).unwrap();
    let history = adaptive_multilevel(&model::square_coefficients(b), &initial, &ClusterSelector::new(1, 1), 0.4, 6, &CorrectionOptions::default()).unwrap();
    for rec in &history {
        let mesh = rec.mesh();
        mesh.validate().unwrap();
        let areas: Vec<f64> = (0..mesh.num_triangles()).map(|t| mesh.signed_area(t)).collect();
        let ratio = areas.iter().cloned().fold(0.0, f64::max) / areas.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(ratio <= 8.0, "iteration {}: area ratio {ratio}", rec.iteration);
    }
}

#[test]
fn estimator_tracks_the_h1_error() {
    let b = model::real_b();
    let coeffs = model::square_coefficients(b);
    let exact = [model::eigenfunction(b, 1, 1)];
    let exact_adj = [model::adjoint_eigenfunction(b, 1, 1)];
    let mut mesh = generate_unit_square(4).unwrap();
    for _ in 0..4 {
        mesh = refine_red(&mesh);
        let space = build_space(&mesh, 1).unwrap();
        let c = direct_solve(&space, &coeffs, &ClusterSelector::new(1, 1), None).unwrap();
        let q = default_error_quadrature(1);
        let e = align_to_exact(&space, &c.primal, &exact, q).unwrap()[0].h1;
        let ea = align_to_exact(&space, &c.adjoint, &exact_adj, q).unwrap()[0].h1;
        let est = cluster_estimate(&c).unwrap().total;
        let ratio = est / (e * e + ea * ea).sqrt();
        assert!((0.2..=5.0).contains(&ratio), "h = {}: estimator {est}, error {e}/{ea}, ratio {ratio}", mesh.h());
    }
}
