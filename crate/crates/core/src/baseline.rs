//! Direct Galerkin eigensolves on fine spaces by shift-invert Arnoldi.
//!
//! These are the oracles the correction scheme is compared against; the
//! pencils are too large for the dense solver.

use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64;

use crate::correction::{normalize_b, CorrectionError, EigenCluster};
use crate::fem::{self, Coefficients, FeSpace, FemError, FormPencil, SourceSolver};
use crate::smalleig::{self, dense, eigenvalue_groups, group_geometric_multiplicity, select_cluster, ClusterSelector};
use crate::sparse::{dot, norm2, CsrMatrix};

const INITIAL_KRYLOV: usize = 40;
const MAX_KRYLOV: usize = 320;
const RESIDUAL_TOL: f64 = 1e-10;

struct RitzPairs {
    lambdas: Vec<Complex64>,
    vectors: Vec<Vec<Complex64>>,
}

fn start_vector(n: usize) -> Vec<Complex64> {
    // deterministic, smooth and nonzero on every mode of interest
    (0..n).map(|i| Complex64::new(1.0 + 0.5 * ((i as f64) * 0.37).sin(), 0.25 * ((i as f64) * 0.11).cos())).collect()
}

/// Ritz pairs of `(A, B)` (or of `(Aᴴ, Bᴴ)` when `adjoint`) from a `k`-step
/// Arnoldi process on `A⁻¹B`, with eigenvalues `λ = 1/θ`.
fn arnoldi(solver: &SourceSolver, b: &CsrMatrix, k: usize, adjoint: bool) -> Result<RitzPairs, FemError> {
    let n = solver.dim();
    let k = k.min(n);
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(k + 1);
    let mut h = Mat::<Complex64>::zeros(k + 1, k);
    let mut v = start_vector(n);
    let nrm = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nrm);
    basis.push(v);
    let mut steps = k;
    for j in 0..k {
        let bv = if adjoint { b.adjoint_matvec(&basis[j]) } else { b.matvec(&basis[j]) };
        let mut w = solver.solve(&bv, adjoint)?;
        // two passes of classical Gram–Schmidt
        for _ in 0..2 {
            for (i, vi) in basis.iter().enumerate() {
                let c = dot(vi, &w);
                h[(i, j)] += c;
                w.iter_mut().zip(vi).for_each(|(x, y)| *x -= c * y);
            }
        }
        let beta = norm2(&w);
        h[(j + 1, j)] = Complex64::new(beta, 0.0);
        if beta <= 1e-14 * norm2(&bv).max(f64::MIN_POSITIVE) {
            steps = j + 1;
            break;
        }
        w.iter_mut().for_each(|x| *x /= beta);
        basis.push(w);
    }
    let hk = h.as_ref().submatrix(0, 0, steps, steps).to_owned();
    let ritz = smalleig::solve_dense_pencil(hk.as_ref(), dense::identity(steps).as_ref(), 1e-8)
        .map_err(|e| FemError::SolverFailure(format!("Arnoldi Hessenberg eigensolve: {e}")))?;
    let mut lambdas = Vec::new();
    let mut vectors = Vec::new();
    for t in ritz {
        if t.lambda.norm() == 0.0 {
            continue;
        }
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for (i, yi) in t.right.iter().enumerate() {
            x.iter_mut().zip(&basis[i]).for_each(|(a, b)| *a += yi * b);
        }
        lambdas.push(Complex64::new(1.0, 0.0) / t.lambda);
        vectors.push(x);
    }
    Ok(RitzPairs { lambdas, vectors })
}

fn relative_residual(p: &FormPencil, lambda: Complex64, x: &[Complex64], adjoint: bool) -> f64 {
    let (ax, bx) = if adjoint { (p.a.adjoint_matvec(x), p.b.adjoint_matvec(x)) } else { (p.a.matvec(x), p.b.matvec(x)) };
    let r: Vec<Complex64> = ax.iter().zip(&bx).map(|(a, b)| a - lambda * b).collect();
    norm2(&r) / (norm2(&ax) + lambda.norm() * norm2(&bx))
}

/// Eigenvalue cluster of a (large, sparse) pencil with primal and adjoint
/// eigenvectors, selected like the dense solver would select it from the
/// full spectrum. Valid for clusters among the eigenvalues of smallest
/// modulus, which shift-invert about zero resolves first.
pub fn direct_cluster(pencil: &FormPencil, sel: &ClusterSelector) -> Result<EigenCluster, CorrectionError> {
    let solver = SourceSolver::new(&pencil.a)?;
    let n = pencil.dim();
    let mut k = INITIAL_KRYLOV.max(4 * (sel.index + sel.count));
    loop {
        let primal = arnoldi(&solver, &pencil.b, k, false)?;
        let picked = select_cluster(&primal.lambdas, sel)?;
        let lambdas: Vec<Complex64> = picked.iter().map(|&i| primal.lambdas[i]).collect();
        let right: Vec<Vec<Complex64>> = picked.iter().map(|&i| primal.vectors[i].clone()).collect();
        let converged = lambdas.iter().zip(&right).all(|(l, x)| relative_residual(pencil, *l, x, false) <= RESIDUAL_TOL);
        if converged {
            let dual = arnoldi(&solver, &pencil.b, k, true)?;
            // adjoint vectors: nearest conjugate Ritz values, one per member
            let mut used = vec![false; dual.lambdas.len()];
            let mut left = Vec::with_capacity(lambdas.len());
            for l in &lambdas {
                let best = (0..dual.lambdas.len())
                    .filter(|&j| !used[j])
                    .min_by(|&a, &b| (dual.lambdas[a] - l.conj()).norm().total_cmp(&(dual.lambdas[b] - l.conj()).norm()))
                    .ok_or_else(|| FemError::SolverFailure("adjoint Arnoldi produced too few Ritz pairs".into()))?;
                used[best] = true;
                left.push(dual.vectors[best].clone());
            }
            let adj_ok = lambdas.iter().zip(&left).all(|(l, w)| relative_residual(pencil, l.conj(), w, true) <= RESIDUAL_TOL);
            if adj_ok {
                let q = eigenvalue_groups(&lambdas)
                    .iter()
                    .map(|g| group_geometric_multiplicity(&g.iter().map(|&i| right[i].clone()).collect::<Vec<_>>()))
                    .sum();
                let mut primal_vecs = right;
                let mut adjoint_vecs = left;
                primal_vecs.iter_mut().for_each(|v| normalize_b(v, &pencil.b));
                let bh = pencil.b.adjoint();
                adjoint_vecs.iter_mut().for_each(|v| normalize_b(v, &bh));
                return Ok(EigenCluster {
                    lambda_hat: smalleig::mean(&lambdas),
                    lambdas,
                    primal: primal_vecs,
                    adjoint: adjoint_vecs,
                    space: Arc::clone(&pencil.space),
                    q,
                    ascent: 1,
                });
            }
        }
        if k >= MAX_KRYLOV.min(n) {
            return Err(FemError::SolverFailure(format!("shift-invert Arnoldi did not converge with {k} vectors")).into());
        }
        k = (2 * k).min(MAX_KRYLOV).min(n);
    }
}

/// Assemble on `space` and compute the cluster directly.
pub fn direct_solve(space: &Arc<FeSpace>, coeffs: &Coefficients, sel: &ClusterSelector, quad_degree: Option<usize>) -> Result<EigenCluster, CorrectionError> {
    let q = quad_degree.unwrap_or_else(|| fem::default_assembly_quadrature(space.degree()));
    let pencil = fem::assemble_pencil(space, coeffs, q)?;
    direct_cluster(&pencil, sel)
}
