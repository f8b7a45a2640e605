use std::sync::Arc;

use mleig::baseline::direct_solve;
use mleig::correction::{multilevel_solve, CorrectionOptions};
use mleig::fem::{build_space, default_error_quadrature};
use mleig::mesh::{generate_unit_square, refine_red, Mesh};
use mleig::metrics::{align_to_exact, fit_order};
use mleig::model;
use mleig::smalleig::ClusterSelector;

fn ladder(n0: usize, levels: usize) -> Vec<(Arc<Mesh>, usize)> {
    let mut plan = vec![(generate_unit_square(n0).unwrap(), 1)];
    for _ in 1..levels {
        let next = refine_red(&plan.last().unwrap().0);
        plan.push((next, 1));
    }
    plan
}

#[test]
fn corrected_eigenfunction_error_matches_direct_galerkin() {
    let b = model::real_b();
    let coeffs = model::square_coefficients(b);
    let exact = [model::eigenfunction(b, 1, 1)];
    let exact_adj = [model::adjoint_eigenfunction(b, 1, 1)];
    let q = default_error_quadrature(1);
    let sel = ClusterSelector::new(1, 1);
    // H = 1/4 corrected up to h = 1/16
    let plan = ladder(4, 3);
    let (cluster, _) = multilevel_solve(&coeffs, &plan, &sel, 0, &CorrectionOptions::default()).unwrap();
    let direct = direct_solve(&cluster.space, &coeffs, &sel, None).unwrap();
    for (computed, oracle, f) in [(&cluster.primal, &direct.primal, &exact), (&cluster.adjoint, &direct.adjoint, &exact_adj)] {
        let e = align_to_exact(&cluster.space, computed, f, q).unwrap()[0].h1;
        let d = align_to_exact(&cluster.space, oracle, f, q).unwrap()[0].h1;
        assert!(e <= 2.0 * d && d <= 2.0 * e, "corrected {e} vs direct {d}");
    }
}

#[test]
fn aligned_h1_error_is_first_order() {
    let b = model::real_b();
    let coeffs = model::square_coefficients(b);
    let exact = [model::eigenfunction(b, 1, 1)];
    let (mut hs, mut errs) = (Vec::new(), Vec::new());
    for n in [8, 16, 32] {
        let space = build_space(&generate_unit_square(n).unwrap(), 1).unwrap();
        let c = direct_solve(&space, &coeffs, &ClusterSelector::new(1, 1), None).unwrap();
        hs.push(1.0 / n as f64);
        errs.push(align_to_exact(&space, &c.primal, &exact, default_error_quadrature(1)).unwrap()[0].h1);
    }
    let order = fit_order(&hs, &errs).unwrap();
    assert!((order - 1.0).abs() < 0.15, "order {order}, errors {errs:?}");
}
