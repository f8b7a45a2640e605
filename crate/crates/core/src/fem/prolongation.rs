use num_complex::Complex64;

use super::{FeSpace, FemError};
use crate::mesh::barycentric;
use crate::sparse::CsrMatrix;

const DROP_TOL: f64 = 1e-14;

/// Embedding of a coarse space into a nested fine space over all DOFs:
/// `(P c)_g` is the coarse function with coefficients `c` evaluated at fine
/// node `g`. Since the coarse function lies in the fine space, nodal
/// interpolation reproduces it exactly.
pub fn build_prolongation_full(coarse: &FeSpace, fine: &FeSpace) -> Result<CsrMatrix, FemError> {
    if fine.degree() < coarse.degree() {
        return Err(FemError::NestingViolation(format!(
            "fine degree {} is below coarse degree {}",
            fine.degree(),
            coarse.degree()
        )));
    }
    let ancestors = fine.mesh().ancestor_triangles(coarse.mesh().id()).ok_or_else(|| {
        FemError::NestingViolation(format!(
            "mesh {} is not a refinement of mesh {}",
            fine.mesh().id(),
            coarse.mesh().id()
        ))
    })?;
    if coarse.same_as(fine) {
        return Ok(CsrMatrix::identity(fine.dof_count()));
    }
    let nloc = fine.element().num_nodes();
    let mut done = vec![false; fine.dof_count()];
    let mut triplets = Vec::new();
    for t in 0..fine.mesh().num_triangles() {
        let parent = ancestors[t];
        let coarse_coords = coarse.mesh().triangle_coords(parent);
        let coarse_dofs = coarse.cell_dofs(parent);
        for k in 0..nloc {
            let g = fine.cell_dofs(t)[k];
            if done[g] {
                continue;
            }
            done[g] = true;
            let bary = barycentric(coarse_coords, fine.dof_coordinates()[g]);
            for (phi, &c) in coarse.element().values(bary).iter().zip(coarse_dofs) {
                if phi.abs() >= DROP_TOL {
                    triplets.push((g, c, Complex64::new(*phi, 0.0)));
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(fine.dof_count(), coarse.dof_count(), triplets))
}

/// Prolongation restricted to interior DOFs on both sides. Boundary coarse
/// DOFs vanish for Dirichlet functions, and interior coarse functions vanish
/// at boundary fine nodes, so nothing is lost by the restriction.
pub fn build_prolongation(coarse: &FeSpace, fine: &FeSpace) -> Result<CsrMatrix, FemError> {
    let full = build_prolongation_full(coarse, fine)?;
    Ok(full.select(fine.interior_index(), coarse.interior_index(), fine.num_interior(), coarse.num_interior()))
}
