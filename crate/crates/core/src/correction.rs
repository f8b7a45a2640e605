//! One correction step and the multilevel driver.
//!
//! A correction step lifts the current cluster to a finer space by two
//! families of source solves and then solves a small Petrov–Galerkin
//! eigenproblem on the coarse space augmented by the solutions.

use std::sync::Arc;
use std::time::Instant;

use faer::{Mat, MatRef};
use num_complex::Complex64;
use thiserror::Error;

use crate::fem::{self, build_prolongation, build_space, Coefficients, FeSpace, FemError, FormPencil, SourceSolver};
use crate::mesh::Mesh;
use crate::smalleig::{
    self, compute_generalized_chain, dense, eigenvalue_groups, group_geometric_multiplicity, select_cluster,
    solve_dense_pencil, ClusterSelector, SmallEigError,
};
use crate::sparse::{dot, CsrMatrix};

pub const DEFAULT_DENSE_LIMIT: usize = 3000;
/// Relative singular value cutoff for the augmented basis rank check.
const AUGMENT_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum CorrectionError {
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    SmallEig(#[from] SmallEigError),
    #[error("coarse space has {dofs} interior DOFs, dense limit is {limit}")]
    CoarseSpaceTooLarge { dofs: usize, limit: usize },
    #[error("augmented basis collapsed: rank {rank} of {expected}")]
    AugmentationCollapse { rank: usize, expected: usize },
    #[error("invalid level plan: {0}")]
    InvalidPlan(String),
}

#[derive(Debug, Clone)]
pub struct CorrectionOptions {
    /// Assembly quadrature degree; `None` uses the default for each degree.
    pub quad_degree: Option<usize>,
    pub dense_limit: usize,
    pub tol: f64,
}

impl Default for CorrectionOptions {
    fn default() -> Self {
        Self { quad_degree: None, dense_limit: DEFAULT_DENSE_LIMIT, tol: smalleig::DEFAULT_TOL }
    }
}

impl CorrectionOptions {
    pub fn quad_for(&self, degree: usize) -> usize {
        self.quad_degree.unwrap_or_else(|| fem::default_assembly_quadrature(degree))
    }
}

/// Approximations of one eigenvalue cluster: `m` eigenvalues with primal and
/// adjoint interior coefficient vectors in `space`, each normalized to
/// `b(u, u) = 1` with its largest-magnitude coefficient real and positive.
#[derive(Debug, Clone)]
pub struct EigenCluster {
    pub lambdas: Vec<Complex64>,
    pub lambda_hat: Complex64,
    pub primal: Vec<Vec<Complex64>>,
    pub adjoint: Vec<Vec<Complex64>>,
    pub space: Arc<FeSpace>,
    pub q: usize,
    pub ascent: usize,
}

impl EigenCluster {
    pub fn m(&self) -> usize {
        self.lambdas.len()
    }
}

/// Trial and test bases of the augmented spaces in fine-space interior
/// coefficients: `[P | X̃]` and `[P | X̃*]`.
#[derive(Debug, Clone)]
pub struct AugmentedBasis {
    pub trial: Mat<Complex64>,
    pub test: Mat<Complex64>,
    pub fine_space: Arc<FeSpace>,
    pub coarse_space: Arc<FeSpace>,
}

/// Scale to `vᴴ B v = 1` and rotate the largest entry onto the positive
/// real axis.
pub fn normalize_b(v: &mut [Complex64], b: &CsrMatrix) {
    let nrm = dot(v, &b.matvec(v)).re.max(0.0).sqrt();
    if nrm > 0.0 {
        v.iter_mut().for_each(|x| *x /= nrm);
    }
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.norm() > v[best].norm() {
            best = i;
        }
    }
    if let Some(&pivot) = v.get(best) {
        if pivot.norm() > 0.0 {
            let phase = pivot.conj() / pivot.norm();
            v.iter_mut().for_each(|x| *x *= phase);
        }
    }
}

fn to_mat(v: &[Vec<Complex64>]) -> Mat<Complex64> {
    dense::from_columns(v.first().map_or(0, |c| c.len()), v)
}

fn sparse_sandwich(test: MatRef<'_, Complex64>, m: &CsrMatrix, trial: MatRef<'_, Complex64>) -> Mat<Complex64> {
    test.adjoint() * m.mul_dense(trial)
}

/// Eigenpairs selected from a small pencil, expanded through `trial`/`test`.
struct Selected {
    lambdas: Vec<Complex64>,
    right: Vec<Vec<Complex64>>,
    left: Vec<Vec<Complex64>>,
    q: usize,
    ascent: usize,
}

/// Solve `(a, b)` densely, pick the cluster, and complete defective groups to
/// chains. `gram_right`/`gram_left` are the inner products the chain
/// constraints are measured in.
fn solve_and_select(
    a: MatRef<'_, Complex64>,
    b: MatRef<'_, Complex64>,
    sel: &ClusterSelector,
    tol: f64,
    gram_right: MatRef<'_, Complex64>,
    gram_left: MatRef<'_, Complex64>,
) -> Result<Selected, CorrectionError> {
    let triples = solve_dense_pencil(a, b, tol)?;
    let all: Vec<Complex64> = triples.iter().map(|t| t.lambda).collect();
    let picked = select_cluster(&all, sel)?;
    let lambdas: Vec<Complex64> = picked.iter().map(|&k| all[k]).collect();
    let mut right = Vec::with_capacity(picked.len());
    let mut left = Vec::with_capacity(picked.len());
    let mut q_total = 0;
    let mut ascent = 1;
    for group in eigenvalue_groups(&lambdas) {
        let rv: Vec<Vec<Complex64>> = group.iter().map(|&g| triples[picked[g]].right.clone()).collect();
        let lv: Vec<Vec<Complex64>> = group.iter().map(|&g| triples[picked[g]].left.clone()).collect();
        let q = group_geometric_multiplicity(&rv);
        q_total += q;
        if q == group.len() {
            for g in 0..group.len() {
                right.push((group[g], rv[g].clone()));
                left.push((group[g], lv[g].clone()));
            }
            continue;
        }
        let mu = smalleig::mean(&group.iter().map(|&g| lambdas[g]).collect::<Vec<_>>());
        let ah = a.adjoint().to_owned();
        let bh = b.adjoint().to_owned();
        let rchain = compute_generalized_chain(a, b, mu, to_mat(&rv).as_ref(), group.len(), tol, Some(gram_right))?;
        let lchain = compute_generalized_chain(ah.as_ref(), bh.as_ref(), mu.conj(), to_mat(&lv).as_ref(), group.len(), tol, Some(gram_left))?;
        ascent = ascent.max(rchain.ascent).max(lchain.ascent);
        for (k, &g) in group.iter().enumerate() {
            right.push((g, dense::column(rchain.vectors.as_ref(), k)));
            left.push((g, dense::column(lchain.vectors.as_ref(), k)));
        }
    }
    right.sort_by_key(|(g, _)| *g);
    left.sort_by_key(|(g, _)| *g);
    Ok(Selected {
        lambdas,
        right: right.into_iter().map(|(_, v)| v).collect(),
        left: left.into_iter().map(|(_, v)| v).collect(),
        q: q_total,
        ascent,
    })
}

fn finish_cluster(sel: Selected, space: &Arc<FeSpace>, b: &CsrMatrix) -> EigenCluster {
    let mut primal = sel.right;
    let mut adjoint = sel.left;
    primal.iter_mut().for_each(|v| normalize_b(v, b));
    adjoint.iter_mut().for_each(|v| normalize_b(v, &b.adjoint()));
    EigenCluster {
        lambda_hat: smalleig::mean(&sel.lambdas),
        lambdas: sel.lambdas,
        primal,
        adjoint,
        space: Arc::clone(space),
        q: sel.q,
        ascent: sel.ascent,
    }
}

/// Direct Galerkin solve on a pencil small enough for the dense solver.
pub fn initial_solve_pencil(pencil: &FormPencil, sel: &ClusterSelector, opts: &CorrectionOptions) -> Result<EigenCluster, CorrectionError> {
    let n = pencil.dim();
    if n > opts.dense_limit {
        return Err(CorrectionError::CoarseSpaceTooLarge { dofs: n, limit: opts.dense_limit });
    }
    let a = pencil.a.to_dense();
    let b = pencil.b.to_dense();
    let bh = b.adjoint().to_owned();
    let selected = solve_and_select(a.as_ref(), b.as_ref(), sel, opts.tol, b.as_ref(), bh.as_ref())?;
    Ok(finish_cluster(selected, &pencil.space, &pencil.b))
}

/// Assemble the pencil on `space` and solve it densely.
pub fn initial_solve(space: &Arc<FeSpace>, coeffs: &Coefficients, sel: &ClusterSelector, opts: &CorrectionOptions) -> Result<EigenCluster, CorrectionError> {
    let pencil = fem::assemble_pencil(space, coeffs, opts.quad_for(space.degree()))?;
    initial_solve_pencil(&pencil, sel, opts)
}

/// Fine-level data reused by a correction step: the pencil and a factorization
/// of its operator.
pub struct FineLevel {
    pub pencil: FormPencil,
    pub solver: SourceSolver,
}

impl FineLevel {
    pub fn new(space: &Arc<FeSpace>, coeffs: &Coefficients, opts: &CorrectionOptions) -> Result<Self, CorrectionError> {
        let pencil = fem::assemble_pencil(space, coeffs, opts.quad_for(space.degree()))?;
        let solver = SourceSolver::new(&pencil.a)?;
        Ok(Self { pencil, solver })
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.pencil.space
    }
}

/// Diagnostics of one correction step.
#[derive(Debug, Clone)]
pub struct StepInfo {
    pub dofs_small: usize,
    pub warnings: Vec<String>,
}

/// Build the augmented trial and test bases for a cluster on a fine level.
pub fn augment(coarse: &Arc<FeSpace>, cluster: &EigenCluster, fine: &FineLevel) -> Result<AugmentedBasis, CorrectionError> {
    let fine_space = fine.space();
    let lift = build_prolongation(&cluster.space, fine_space)?;
    let embed = build_prolongation(coarse, fine_space)?;
    let b = &fine.pencil.b;
    let rhs: Vec<Vec<Complex64>> = cluster.primal.iter().map(|u| b.matvec(&lift.matvec(u))).collect();
    let rhs_adj: Vec<Vec<Complex64>> = cluster.adjoint.iter().map(|u| b.adjoint_matvec(&lift.matvec(u))).collect();
    let (x, x_adj) = rayon::join(|| fine.solver.solve_block(&rhs, false), || fine.solver.solve_block(&rhs_adj, true));
    let (mut x, mut x_adj) = (x?, x_adj?);
    for v in x.iter_mut() {
        let nrm = dot(v, &b.matvec(v)).re.max(0.0).sqrt();
        v.iter_mut().for_each(|z| *z /= nrm);
    }
    for v in x_adj.iter_mut() {
        let nrm = dot(v, &b.adjoint_matvec(v)).re.max(0.0).sqrt();
        v.iter_mut().for_each(|z| *z /= nrm);
    }
    let p = embed.to_dense();
    let nh = p.ncols();
    let nf = p.nrows();
    let m = x.len();
    let trial = Mat::from_fn(nf, nh + m, |i, j| if j < nh { p[(i, j)] } else { x[j - nh][i] });
    let test = Mat::from_fn(nf, nh + m, |i, j| if j < nh { p[(i, j)] } else { x_adj[j - nh][i] });
    for basis in [&trial, &test] {
        let rank = dense::numerical_rank(basis.as_ref(), AUGMENT_RANK_TOL);
        if rank < nh + m {
            return Err(CorrectionError::AugmentationCollapse { rank, expected: nh + m });
        }
    }
    Ok(AugmentedBasis { trial, test, fine_space: Arc::clone(fine_space), coarse_space: Arc::clone(coarse) })
}

/// One correction step on a prepared fine level.
pub fn correct_on(
    coarse: &Arc<FeSpace>,
    cluster: &EigenCluster,
    fine: &FineLevel,
    opts: &CorrectionOptions,
) -> Result<(EigenCluster, StepInfo), CorrectionError> {
    let sel = ClusterSelector::new(1, cluster.m()).near(cluster.lambda_hat);
    let mut warnings = Vec::new();
    if coarse.same_as(fine.space()) {
        // the augmented space is V_H itself
        let out = initial_solve_pencil(&fine.pencil, &sel, opts)?;
        return Ok((out, StepInfo { dofs_small: fine.pencil.dim(), warnings }));
    }
    let basis = augment(coarse, cluster, fine)?;
    let a_hat = sparse_sandwich(basis.test.as_ref(), &fine.pencil.a, basis.trial.as_ref());
    let b_hat = sparse_sandwich(basis.test.as_ref(), &fine.pencil.b, basis.trial.as_ref());
    let gram_trial = sparse_sandwich(basis.trial.as_ref(), &fine.pencil.b, basis.trial.as_ref());
    let gram_test = sparse_sandwich(basis.test.as_ref(), &fine.pencil.b.adjoint(), basis.test.as_ref());
    let small = solve_and_select(a_hat.as_ref(), b_hat.as_ref(), &sel, opts.tol, gram_trial.as_ref(), gram_test.as_ref())?;
    if small.q != cluster.q {
        warnings.push(format!("geometric multiplicity changed from {} to {}", cluster.q, small.q));
    }
    let expand = |basis: &Mat<Complex64>, coeffs: &[Vec<Complex64>]| -> Vec<Vec<Complex64>> {
        let c = to_mat(coeffs);
        let full = basis * &c;
        (0..full.ncols()).map(|j| dense::column(full.as_ref(), j)).collect()
    };
    let selected = Selected {
        right: expand(&basis.trial, &small.right),
        left: expand(&basis.test, &small.left),
        lambdas: small.lambdas,
        // q and m are held fixed across levels
        q: cluster.q,
        ascent: small.ascent.max(cluster.ascent),
    };
    let dofs_small = basis.trial.ncols();
    Ok((finish_cluster(selected, fine.space(), &fine.pencil.b), StepInfo { dofs_small, warnings }))
}

/// One correction step from `cluster` (on a space nested in `fine`) with
/// coarse space `coarse`.
pub fn one_correction_step(
    coarse: &Arc<FeSpace>,
    cluster: &EigenCluster,
    fine: &Arc<FeSpace>,
    coeffs: &Coefficients,
    opts: &CorrectionOptions,
) -> Result<EigenCluster, CorrectionError> {
    let level = FineLevel::new(fine, coeffs, opts)?;
    Ok(correct_on(coarse, cluster, &level, opts)?.0)
}

/// Per-level record of a multilevel run.
#[derive(Debug, Clone)]
pub struct LevelRecord {
    pub level: usize,
    pub degree: usize,
    pub h: f64,
    pub dofs_fine: usize,
    pub dofs_small: usize,
    pub cluster: EigenCluster,
    pub wall_ms: f64,
    pub warnings: Vec<String>,
}

/// The multilevel scheme over a plan of `(mesh, degree)` levels. Level 0 is
/// solved directly; every later level is one correction step with coarse
/// space `plan[coarse_index]`.
pub fn multilevel_solve(
    coeffs: &Coefficients,
    plan: &[(Arc<Mesh>, usize)],
    sel: &ClusterSelector,
    coarse_index: usize,
    opts: &CorrectionOptions,
) -> Result<(EigenCluster, Vec<LevelRecord>), CorrectionError> {
    if plan.is_empty() {
        return Err(CorrectionError::InvalidPlan("empty plan".into()));
    }
    if coarse_index >= plan.len() {
        return Err(CorrectionError::InvalidPlan(format!("coarse index {coarse_index} outside plan of {} levels", plan.len())));
    }
    let spaces: Vec<Arc<FeSpace>> = plan.iter().map(|(m, p)| build_space(m, *p)).collect::<Result<_, _>>()?;
    let coarse = Arc::clone(&spaces[coarse_index]);
    let start = Instant::now();
    let mut cluster = initial_solve(&spaces[0], coeffs, sel, opts)?;
    let mut history = vec![LevelRecord {
        level: 1,
        degree: spaces[0].degree(),
        h: spaces[0].mesh().h(),
        dofs_fine: spaces[0].num_interior(),
        dofs_small: spaces[0].num_interior(),
        cluster: cluster.clone(),
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        warnings: Vec::new(),
    }];
    for (k, space) in spaces.iter().enumerate().skip(1) {
        let start = Instant::now();
        let level = FineLevel::new(space, coeffs, opts)?;
        let (next, info) = correct_on(&coarse, &cluster, &level, opts)?;
        cluster = next;
        history.push(LevelRecord {
            level: k + 1,
            degree: space.degree(),
            h: space.mesh().h(),
            dofs_fine: space.num_interior(),
            dofs_small: info.dofs_small,
            cluster: cluster.clone(),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            warnings: info.warnings,
        });
    }
    Ok((cluster, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_unit_square, refine_red};
    use crate::model;

    fn opts() -> CorrectionOptions {
        CorrectionOptions::default()
    }

    #[test]
    fn laplace_initial_solve_matches_independent_assembly() {
        // reference from an independent dense P1 assembly of the same mesh
        let exact = 2.0 * std::f64::consts::PI.powi(2);
        for (n, reference) in [(4, 22.865775936771882), (8, 20.505544897707985)] {
            let s = build_space(&generate_unit_square(n).unwrap(), 1).unwrap();
            let c = initial_solve(&s, &Coefficients::laplace(), &ClusterSelector::new(1, 1), &opts()).unwrap();
            assert!((c.lambda_hat.re - reference).abs() < 1e-10, "{}", c.lambda_hat);
            assert!(c.lambda_hat.im.abs() < 1e-10 && c.lambda_hat.re > exact);
        }
    }

    #[test]
    fn normalization_and_phase() {
        let s = build_space(&generate_unit_square(4).unwrap(), 2).unwrap();
        let coeffs = model::square_coefficients(model::real_b());
        let pencil = fem::assemble_pencil(&s, &coeffs, 6).unwrap();
        let c = initial_solve_pencil(&pencil, &ClusterSelector::new(2, 2), &opts()).unwrap();
        for (v, adj) in c.primal.iter().zip(&c.adjoint) {
            for (w, m) in [(v, &pencil.b), (adj, &pencil.b)] {
                let n = dot(w, &m.matvec(w));
                assert!((n.re - 1.0).abs() < 1e-10 && n.im.abs() < 1e-10);
                let big = w.iter().cloned().fold(Complex64::new(0.0, 0.0), |a, x| if x.norm() > a.norm() { x } else { a });
                assert!(big.im.abs() < 1e-12 && big.re > 0.0);
            }
        }
        assert_eq!(c.q, 2);
    }

    #[test]
    fn fine_equal_coarse_reproduces_initial_solve() {
        let s = build_space(&generate_unit_square(4).unwrap(), 1).unwrap();
        let coeffs = model::square_coefficients(model::real_b());
        let sel = ClusterSelector::new(1, 1);
        let c0 = initial_solve(&s, &coeffs, &sel, &opts()).unwrap();
        let c1 = one_correction_step(&s, &c0, &s, &coeffs, &opts()).unwrap();
        assert!((c1.lambda_hat - c0.lambda_hat).norm() < 1e-10);
    }

    #[test]
    fn correction_beats_twice_direct_error() {
        let m0 = generate_unit_square(4).unwrap();
        let m2 = refine_red(&refine_red(&m0));
        let coarse = build_space(&m0, 1).unwrap();
        let fine = build_space(&m2, 1).unwrap();
        let coeffs = model::square_coefficients(model::real_b());
        let exact = model::first_eigenvalues(model::real_b(), 1)[0];
        let sel = ClusterSelector::new(1, 1);
        let c0 = initial_solve(&coarse, &coeffs, &sel, &opts()).unwrap();
        let c1 = one_correction_step(&coarse, &c0, &fine, &coeffs, &opts()).unwrap();
        let direct = initial_solve(&fine, &coeffs, &sel, &opts()).unwrap();
        let e_corr = (c1.lambda_hat - exact).norm();
        let e_direct = (direct.lambda_hat - exact).norm();
        assert!(e_corr <= 2.0 * e_direct, "{e_corr} vs {e_direct}");
    }

    #[test]
    fn multi_space_step_gains_factor_four() {
        let m = generate_unit_square(8).unwrap();
        let p1 = build_space(&m, 1).unwrap();
        let p2 = build_space(&m, 2).unwrap();
        let coeffs = model::square_coefficients(model::real_b());
        let exact = model::first_eigenvalues(model::real_b(), 1)[0];
        let sel = ClusterSelector::new(1, 1);
        let c1 = initial_solve(&p1, &coeffs, &sel, &opts()).unwrap();
        let c2 = one_correction_step(&p1, &c1, &p2, &coeffs, &opts()).unwrap();
        let direct = initial_solve(&p2, &coeffs, &sel, &opts()).unwrap();
        let (e1, e2) = ((c1.lambda_hat - exact).norm(), (c2.lambda_hat - exact).norm());
        let ed = (direct.lambda_hat - exact).norm();
        assert!(e2 * 4.0 <= e1, "{e1} -> {e2}");
        assert!(e2 <= 2.0 * ed, "{e2} vs direct {ed}");
    }

    #[test]
    fn single_level_plan_is_initial_solve() {
        let m = generate_unit_square(4).unwrap();
        let coeffs = model::square_coefficients(model::real_b());
        let sel = ClusterSelector::new(1, 1);
        let (c, hist) = multilevel_solve(&coeffs, &[(m.clone(), 1)], &sel, 0, &opts()).unwrap();
        let d = initial_solve(&build_space(&m, 1).unwrap(), &coeffs, &sel, &opts()).unwrap();
        assert_eq!(hist.len(), 1);
        assert_eq!(c.lambda_hat, d.lambda_hat);
    }

    #[test]
    fn too_large_coarse_space() {
        let s = build_space(&generate_unit_square(8).unwrap(), 1).unwrap();
        let o = CorrectionOptions { dense_limit: 10, ..opts() };
        let r = initial_solve(&s, &Coefficients::laplace(), &ClusterSelector::new(1, 1), &o);
        assert!(matches!(r, Err(CorrectionError::CoarseSpaceTooLarge { dofs: 49, limit: 10 })));
    }
}
