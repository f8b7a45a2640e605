//! Gradient-recovery error indicators, Dörfler marking and the adaptive
//! multilevel loop.

use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::correction::{initial_solve, CorrectionError, CorrectionOptions, EigenCluster, FineLevel};
use crate::fem::{barycentric_gradients, build_space, Coefficients, FeSpace};
use crate::mesh::{refine_bisection, Mesh, MeshError};
use crate::smalleig::ClusterSelector;

#[derive(Debug, Error)]
pub enum AdaptivityError {
    #[error("gradient recovery is implemented for degree 1 only, got degree {0}")]
    UnsupportedDegree(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Correction(#[from] CorrectionError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Per-triangle indicators with `total = √(Σ η_K²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateField {
    pub indicators: Vec<f64>,
    pub total: f64,
}

impl EstimateField {
    /// Fails on negative or non-finite indicators.
    pub fn new(indicators: Vec<f64>) -> Result<Self, AdaptivityError> {
        if let Some(k) = indicators.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(AdaptivityError::InvalidArgument(format!("indicator {k} is {}", indicators[k])));
        }
        let total = indicators.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(Self { indicators, total })
    }
}

/// Constant gradient of a P1 function on triangle `t`.
fn p1_gradient(space: &FeSpace, full: &[Complex64], t: usize) -> [Complex64; 2] {
    let grads = barycentric_gradients(space.mesh().triangle_coords(t));
    let dofs = space.cell_dofs(t);
    let mut g = [Complex64::new(0.0, 0.0); 2];
    for (k, &d) in dofs.iter().enumerate() {
        g[0] += full[d] * grads[k][0];
        g[1] += full[d] * grads[k][1];
    }
    g
}

/// ZZ indicators `η_K = ‖∇u_h − G(u_h)‖_{L2(K)}`, where `G` is the continuous
/// P1 field of area-weighted averages of the adjacent element gradients.
pub fn zz_recover(space: &FeSpace, u_vec: &[Complex64]) -> Result<Vec<f64>, AdaptivityError> {
    if space.degree() != 1 {
        return Err(AdaptivityError::UnsupportedDegree(space.degree()));
    }
    let full = space.to_full(u_vec).map_err(|e| AdaptivityError::InvalidArgument(e.to_string()))?;
    let mesh = space.mesh();
    let nt = mesh.num_triangles();
    let elem_grads: Vec<[Complex64; 2]> = (0..nt).into_par_iter().map(|t| p1_gradient(space, &full, t)).collect();
    let mut nodal = vec![[Complex64::new(0.0, 0.0); 2]; mesh.num_vertices()];
    let mut weight = vec![0.0; mesh.num_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.signed_area(t);
        for &v in tri {
            nodal[v][0] += area * elem_grads[t][0];
            nodal[v][1] += area * elem_grads[t][1];
            weight[v] += area;
        }
    }
    for (g, w) in nodal.iter_mut().zip(&weight) {
        g[0] /= *w;
        g[1] /= *w;
    }
    Ok((0..nt)
        .into_par_iter()
        .map(|t| {
            let area = mesh.signed_area(t);
            let tri = mesh.triangles()[t];
            // ∫_K |f|² for linear f with vertex values f_i is |K|/12 (Σ|f_i|² + |Σ f_i|²)
            let mut s = 0.0;
            for d in 0..2 {
                let f: Vec<Complex64> = tri.iter().map(|&v| elem_grads[t][d] - nodal[v][d]).collect();
                let sum: Complex64 = f.iter().sum();
                s += f.iter().map(|z| z.norm_sqr()).sum::<f64>() + sum.norm_sqr();
            }
            (area * s / 12.0).max(0.0).sqrt()
        })
        .collect())
}

/// `η_K = √(η_K(u)² + η_K(u*)²)`.
pub fn combine_estimators(primal: &[f64], adjoint: &[f64]) -> Result<EstimateField, AdaptivityError> {
    if primal.len() != adjoint.len() {
        return Err(AdaptivityError::InvalidArgument(format!("{} primal against {} adjoint indicators", primal.len(), adjoint.len())));
    }
    EstimateField::new(primal.iter().zip(adjoint).map(|(p, a)| p.hypot(*a)).collect())
}

/// Indicators of a whole cluster: every primal and adjoint member contributes.
pub fn cluster_estimate(c: &EigenCluster) -> Result<EstimateField, AdaptivityError> {
    let mut sq = vec![0.0; c.space.mesh().num_triangles()];
    for v in c.primal.iter().chain(&c.adjoint) {
        for (s, e) in sq.iter_mut().zip(zz_recover(&c.space, v)?) {
            *s += e * e;
        }
    }
    EstimateField::new(sq.into_iter().map(f64::sqrt).collect())
}

/// Greedy Dörfler marking: the largest indicators (ties by lower index) until
/// the marked share of `total²` reaches `theta²`.
pub fn mark_dorfler(field: &EstimateField, theta: f64) -> Result<Vec<usize>, AdaptivityError> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(AdaptivityError::InvalidArgument(format!("theta {theta} outside (0, 1]")));
    }
    let eta = &field.indicators;
    if theta == 1.0 {
        return Ok((0..eta.len()).filter(|&k| eta[k] > 0.0).collect());
    }
    let mut order: Vec<usize> = (0..eta.len()).collect();
    order.sort_by(|&a, &b| eta[b].total_cmp(&eta[a]).then(a.cmp(&b)));
    // slack absorbs summation-order rounding against total²
    let target = theta * theta * field.total * field.total * (1.0 - 1e-12);
    let mut acc = 0.0;
    let mut marked = Vec::new();
    for k in order {
        if acc >= target {
            break;
        }
        acc += eta[k] * eta[k];
        marked.push(k);
    }
    Ok(marked)
}

/// One iteration of the adaptive loop. Iteration 0 is the direct solve on the
/// initial mesh.
#[derive(Debug, Clone)]
pub struct AdaptiveRecord {
    pub iteration: usize,
    pub dofs: usize,
    pub dofs_small: usize,
    pub cluster: EigenCluster,
    pub estimate: f64,
    pub wall_ms: f64,
    pub warnings: Vec<String>,
}

impl AdaptiveRecord {
    pub fn mesh(&self) -> &Arc<Mesh> {
        self.cluster.space.mesh()
    }
}

/// Solve, estimate, mark, bisect, correct; repeated `max_iters` times. Every
/// correction step uses the P1 space of `initial` as coarse space and treats
/// the newly refined mesh as the next fine level.
pub fn adaptive_multilevel(
    coeffs: &Coefficients,
    initial: &Arc<Mesh>,
    sel: &ClusterSelector,
    theta: f64,
    max_iters: usize,
    opts: &CorrectionOptions,
) -> Result<Vec<AdaptiveRecord>, AdaptivityError> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(AdaptivityError::InvalidArgument(format!("theta {theta} outside (0, 1]")));
    }
    let coarse = build_space(initial, 1).map_err(CorrectionError::from)?;
    let start = Instant::now();
    let mut cluster = initial_solve(&coarse, coeffs, sel, opts)?;
    let mut estimate = cluster_estimate(&cluster)?;
    let mut history = vec![AdaptiveRecord {
        iteration: 0,
        dofs: coarse.num_interior(),
        dofs_small: coarse.num_interior(),
        cluster: cluster.clone(),
        estimate: estimate.total,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        warnings: Vec::new(),
    }];
    for iteration in 1..=max_iters {
        let start = Instant::now();
        let marked = mark_dorfler(&estimate, theta)?;
        let mesh = refine_bisection(cluster.space.mesh(), &marked)?;
        let space = build_space(&mesh, 1).map_err(CorrectionError::from)?;
        let level = FineLevel::new(&space, coeffs, opts)?;
        let (next, info) = crate::correction::correct_on(&coarse, &cluster, &level, opts)?;
        cluster = next;
        estimate = cluster_estimate(&cluster)?;
        history.push(AdaptiveRecord {
            iteration,
            dofs: space.num_interior(),
            dofs_small: info.dofs_small,
            cluster: cluster.clone(),
            estimate: estimate.total,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            warnings: info.warnings,
        });
    }
    Ok(history)
}
