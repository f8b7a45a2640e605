use std::sync::Arc;

use num_complex::Complex64;

use super::lagrange::{barycentric_gradients, LagrangeElement};
use super::FemError;
use crate::mesh::Mesh;

/// Continuous Lagrange space of degree 1..=4 with homogeneous Dirichlet
/// degrees of freedom separated out.
///
/// Global numbering: vertices first, then `p - 1` nodes per edge ordered from
/// the lower-numbered endpoint, then the cell-interior nodes.
#[derive(Debug)]
pub struct FeSpace {
    mesh: Arc<Mesh>,
    degree: usize,
    element: LagrangeElement,
    cell_dofs: Vec<usize>,
    dof_coords: Vec<[f64; 2]>,
    boundary: Vec<bool>,
    interior: Vec<usize>,
    interior_index: Vec<Option<usize>>,
}

pub fn build_space(mesh: &Arc<Mesh>, degree: usize) -> Result<Arc<FeSpace>, FemError> {
    if !(1..=4).contains(&degree) {
        return Err(FemError::UnsupportedDegree(degree));
    }
    let element = LagrangeElement::new(degree);
    let topo = mesh.topology();
    let nv = mesh.num_vertices();
    let ne = topo.len();
    let per_edge = degree - 1;
    let per_cell = (degree.saturating_sub(1)) * (degree.saturating_sub(2)) / 2;
    let dof_count = nv + per_edge * ne + per_cell * mesh.num_triangles();
    let nloc = element.num_nodes();

    let mut cell_dofs = Vec::with_capacity(nloc * mesh.num_triangles());
    let mut dof_coords = vec![[f64::NAN; 2]; dof_count];
    let mut boundary = vec![false; dof_count];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let coords = mesh.triangle_coords(t);
        let mut interior_counter = 0;
        for (k, idx) in element.lattice.iter().enumerate() {
            let zeros: Vec<usize> = (0..3).filter(|&v| idx[v] == 0).collect();
            let global = if let Some(v) = (0..3).find(|&v| idx[v] == degree) {
                boundary[tri[v]] = mesh.boundary_flags()[tri[v]];
                tri[v]
            } else if zeros.len() == 1 {
                let c = zeros[0];
                let e = topo.triangle_edges[t][c];
                let (a, b) = ((c + 1) % 3, (c + 2) % 3);
                // step count from the lower-numbered endpoint
                let steps = if tri[a] > tri[b] { idx[a] } else { idx[b] };
                let g = nv + e * per_edge + steps - 1;
                boundary[g] = topo.is_boundary_edge(e);
                g
            } else {
                let g = nv + ne * per_edge + t * per_cell + interior_counter;
                interior_counter += 1;
                g
            };
            let bary = element.node_barycentric(k);
            dof_coords[global] = [
                bary[0] * coords[0][0] + bary[1] * coords[1][0] + bary[2] * coords[2][0],
                bary[0] * coords[0][1] + bary[1] * coords[1][1] + bary[2] * coords[2][1],
            ];
            cell_dofs.push(global);
        }
    }
    let mut interior = Vec::new();
    let mut interior_index = vec![None; dof_count];
    for g in 0..dof_count {
        if !boundary[g] {
            interior_index[g] = Some(interior.len());
            interior.push(g);
        }
    }
    Ok(Arc::new(FeSpace {
        mesh: Arc::clone(mesh),
        degree,
        element,
        cell_dofs,
        dof_coords,
        boundary,
        interior,
        interior_index,
    }))
}

impl FeSpace {
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn element(&self) -> &LagrangeElement {
        &self.element
    }

    pub fn dof_count(&self) -> usize {
        self.dof_coords.len()
    }

    pub fn num_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn interior_dofs(&self) -> &[usize] {
        &self.interior
    }

    pub fn interior_index(&self) -> &[Option<usize>] {
        &self.interior_index
    }

    pub fn dof_coordinates(&self) -> &[[f64; 2]] {
        &self.dof_coords
    }

    pub fn is_boundary_dof(&self, g: usize) -> bool {
        self.boundary[g]
    }

    pub fn cell_dofs(&self, t: usize) -> &[usize] {
        let n = self.element.num_nodes();
        &self.cell_dofs[t * n..(t + 1) * n]
    }

    /// Same mesh and same degree.
    pub fn same_as(&self, other: &FeSpace) -> bool {
        self.mesh.id() == other.mesh.id() && self.degree == other.degree
    }

    /// Lift an interior coefficient vector to all DOFs (zeros on the boundary).
    pub fn expand(&self, interior: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(interior.len(), self.num_interior());
        let mut full = vec![Complex64::new(0.0, 0.0); self.dof_count()];
        for (k, &g) in self.interior.iter().enumerate() {
            full[g] = interior[k];
        }
        full
    }

    pub fn restrict(&self, full: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(full.len(), self.dof_count());
        self.interior.iter().map(|&g| full[g]).collect()
    }

    /// Accept either an interior or a full coefficient vector and return the
    /// full one.
    pub fn to_full(&self, u: &[Complex64]) -> Result<Vec<Complex64>, FemError> {
        if u.len() == self.dof_count() {
            Ok(u.to_vec())
        } else if u.len() == self.num_interior() {
            Ok(self.expand(u))
        } else {
            Err(FemError::InvalidArgument(format!(
                "coefficient vector of length {} matches neither {} DOFs nor {} interior DOFs",
                u.len(),
                self.dof_count(),
                self.num_interior()
            )))
        }
    }

    /// Nodal interpolant of `f` over all DOFs.
    pub fn interpolate(&self, f: impl Fn([f64; 2]) -> Complex64) -> Vec<Complex64> {
        self.dof_coords.iter().map(|&p| f(p)).collect()
    }

    /// Value of the finite element function at a point of triangle `t`.
    pub fn evaluate_in(&self, full: &[Complex64], t: usize, bary: [f64; 3]) -> Complex64 {
        self.element
            .values(bary)
            .iter()
            .zip(self.cell_dofs(t))
            .map(|(phi, &g)| full[g] * phi)
            .sum()
    }

    /// Value and gradient at a point of triangle `t`.
    pub fn evaluate_with_gradient(&self, full: &[Complex64], t: usize, bary: [f64; 3]) -> (Complex64, [Complex64; 2]) {
        let grads = barycentric_gradients(self.mesh.triangle_coords(t));
        let vals = self.element.values(bary);
        let ders = self.element.bary_derivatives(bary);
        let mut u = Complex64::new(0.0, 0.0);
        let mut du = [Complex64::new(0.0, 0.0); 2];
        for (k, &g) in self.cell_dofs(t).iter().enumerate() {
            u += full[g] * vals[k];
            for (d, du_d) in du.iter_mut().enumerate() {
                let dphi: f64 = (0..3).map(|v| ders[k][v] * grads[v][d]).sum();
                *du_d += full[g] * dphi;
            }
        }
        (u, du)
    }

    /// Point evaluation anywhere in the domain. `None` outside the mesh.
    pub fn evaluate(&self, full: &[Complex64], p: [f64; 2]) -> Option<Complex64> {
        let (t, bary) = self.mesh.locate(p)?;
        Some(self.evaluate_in(full, t, bary))
    }
}
