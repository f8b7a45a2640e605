use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use super::lagrange::barycentric_gradients;
use super::quadrature::TriangleRule;
use super::{Coefficients, FeSpace, FemError};
use crate::sparse::CsrMatrix;

/// Discrete pencil on the interior DOFs:
/// `a[i][j] = a(phi_j, phi_i)` and `b[i][j] = b(phi_j, phi_i)`,
/// so that `a(u, v) = vᴴ A u` for coefficient vectors.
#[derive(Debug, Clone)]
pub struct FormPencil {
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    pub space: Arc<FeSpace>,
}

impl FormPencil {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }
}

/// Reference basis data tabulated at the quadrature points.
struct Tabulation {
    rule: TriangleRule,
    values: Vec<Vec<f64>>,
    bary_ders: Vec<Vec<[f64; 3]>>,
}

impl Tabulation {
    fn new(space: &FeSpace, quad_degree: usize) -> Self {
        let rule = TriangleRule::new(quad_degree);
        let values = rule.points.iter().map(|&b| space.element().values(b)).collect();
        let bary_ders = rule.points.iter().map(|&b| space.element().bary_derivatives(b)).collect();
        Self { rule, values, bary_ders }
    }
}

type LocalPair = (Vec<Complex64>, Vec<Complex64>);

fn local_matrices(
    space: &FeSpace,
    coeffs: &Coefficients,
    tab: &Tabulation,
    t: usize,
) -> Result<LocalPair, FemError> {
    let coords = space.mesh().triangle_coords(t);
    let area = space.mesh().signed_area(t);
    let grads = barycentric_gradients(coords);
    let n = space.element().num_nodes();
    let mut a_loc = vec![Complex64::new(0.0, 0.0); n * n];
    let mut b_loc = vec![Complex64::new(0.0, 0.0); n * n];
    let mut dphi = vec![[0.0f64; 2]; n];
    for (q, (bary, w)) in tab.rule.points.iter().zip(&tab.rule.weights).enumerate() {
        let x = [
            bary[0] * coords[0][0] + bary[1] * coords[1][0] + bary[2] * coords[2][0],
            bary[0] * coords[0][1] + bary[1] * coords[1][1] + bary[2] * coords[2][1],
        ];
        let diff = (coeffs.diffusion)(x);
        let conv = (coeffs.convection)(x);
        let react = (coeffs.reaction)(x);
        let weight = (coeffs.weight)(x);
        if weight.is_nan() || weight <= 0.0 {
            return Err(FemError::CoefficientViolation(format!(
                "varphi = {weight} at ({:.6}, {:.6}) in triangle {t}",
                x[0], x[1]
            )));
        }
        let wq = w * area;
        let phi = &tab.values[q];
        for (k, d) in dphi.iter_mut().enumerate() {
            let der = tab.bary_ders[q][k];
            *d = [
                der[0] * grads[0][0] + der[1] * grads[1][0] + der[2] * grads[2][0],
                der[0] * grads[0][1] + der[1] * grads[1][1] + der[2] * grads[2][1],
            ];
        }
        for j in 0..n {
            // A grad(phi_j) and b . grad(phi_j)
            let ag = [
                diff[0][0] * dphi[j][0] + diff[0][1] * dphi[j][1],
                diff[1][0] * dphi[j][0] + diff[1][1] * dphi[j][1],
            ];
            let bg = conv[0] * dphi[j][0] + conv[1] * dphi[j][1];
            for i in 0..n {
                let val = ag[0] * dphi[i][0] + ag[1] * dphi[i][1] + bg * phi[i] + react * (phi[j] * phi[i]);
                a_loc[i * n + j] += val * wq;
                b_loc[i * n + j] += Complex64::new(weight * phi[j] * phi[i] * wq, 0.0);
            }
        }
    }
    Ok((a_loc, b_loc))
}

/// Assemble both forms over all DOFs (boundary included).
///
/// Element contributions are computed in parallel and merged in element
/// order, so the result does not depend on the thread count.
pub fn assemble_full(
    space: &FeSpace,
    coeffs: &Coefficients,
    quad_degree: usize,
) -> Result<(CsrMatrix, CsrMatrix), FemError> {
    let tab = Tabulation::new(space, quad_degree);
    let locals: Vec<LocalPair> = (0..space.mesh().num_triangles())
        .into_par_iter()
        .map(|t| local_matrices(space, coeffs, &tab, t))
        .collect::<Result<_, _>>()?;
    let n = space.element().num_nodes();
    let mut ta = Vec::with_capacity(locals.len() * n * n);
    let mut tb = Vec::with_capacity(locals.len() * n * n);
    for (t, (a_loc, b_loc)) in locals.iter().enumerate() {
        let dofs = space.cell_dofs(t);
        for i in 0..n {
            for j in 0..n {
                ta.push((dofs[i], dofs[j], a_loc[i * n + j]));
                tb.push((dofs[i], dofs[j], b_loc[i * n + j]));
            }
        }
    }
    let nd = space.dof_count();
    Ok((CsrMatrix::from_triplets(nd, nd, ta), CsrMatrix::from_triplets(nd, nd, tb)))
}

/// Restrict a full-DOF matrix to the interior DOFs.
pub(crate) fn restrict_interior(space: &FeSpace, m: &CsrMatrix) -> CsrMatrix {
    let map = space.interior_index();
    m.select(map, map, space.num_interior(), space.num_interior())
}

/// Assemble the interior-DOF pencil (Dirichlet DOFs eliminated).
pub fn assemble_pencil(
    space: &Arc<FeSpace>,
    coeffs: &Coefficients,
    quad_degree: usize,
) -> Result<FormPencil, FemError> {
    let (a, b) = assemble_full(space, coeffs, quad_degree)?;
    Ok(FormPencil {
        a: restrict_interior(space, &a),
        b: restrict_interior(space, &b),
        space: Arc::clone(space),
    })
}

/// Interior Gram matrix of the full H1 inner product (u, v)_1 = (grad u, grad v) + (u, v).
pub fn assemble_h1_gram(space: &Arc<FeSpace>, quad_degree: usize) -> Result<CsrMatrix, FemError> {
    Ok(assemble_pencil(space, &Coefficients::h1_inner_product(), quad_degree)?.a)
}

/// Load vector `L_i = ∫ f phi_i` over all DOFs.
pub fn assemble_load(
    space: &FeSpace,
    f: &(dyn Fn([f64; 2]) -> Complex64 + Sync),
    quad_degree: usize,
) -> Vec<Complex64> {
    let rule = TriangleRule::new(quad_degree);
    let values: Vec<Vec<f64>> = rule.points.iter().map(|&b| space.element().values(b)).collect();
    let mut load = vec![Complex64::new(0.0, 0.0); space.dof_count()];
    for t in 0..space.mesh().num_triangles() {
        let coords = space.mesh().triangle_coords(t);
        let area = space.mesh().signed_area(t);
        let dofs = space.cell_dofs(t);
        for (q, (bary, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let x = [
                bary[0] * coords[0][0] + bary[1] * coords[1][0] + bary[2] * coords[2][0],
                bary[0] * coords[0][1] + bary[1] * coords[1][1] + bary[2] * coords[2][1],
            ];
            let fx = f(x) * (w * area);
            for (k, &g) in dofs.iter().enumerate() {
                load[g] += fx * values[q][k];
            }
        }
    }
    load
}
