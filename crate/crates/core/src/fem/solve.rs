use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::Mat;
use num_complex::Complex64;

use super::{FemError, FormPencil};
use crate::sparse::{norm2, CsrMatrix};

const RESIDUAL_TOL: f64 = 1e-10;
const REFINEMENT_STEPS: usize = 3;

/// Sparse LU factorization of a square operator, reusable for primal
/// (`A x = r`) and adjoint (`Aᴴ x = r`) solves. Read-only after
/// construction, so one factorization serves concurrent solves.
pub struct SourceSolver {
    matrix: CsrMatrix,
    lu: Lu<usize, Complex64>,
}

impl std::fmt::Debug for SourceSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SourceSolver").field("n", &self.matrix.nrows()).finish()
    }
}

impl SourceSolver {
    pub fn new(matrix: &CsrMatrix) -> Result<Self, FemError> {
        if matrix.nrows() != matrix.ncols() {
            return Err(FemError::InvalidArgument(format!(
                "operator is {}x{}, expected square",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let lu = matrix
            .to_faer()
            .sp_lu()
            .map_err(|e| FemError::SolverFailure(format!("sparse LU failed: {e:?}")))?;
        Ok(Self { matrix: matrix.clone(), lu })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    fn apply(&self, x: &[Complex64], adjoint: bool) -> Vec<Complex64> {
        if adjoint {
            self.matrix.adjoint_matvec(x)
        } else {
            self.matrix.matvec(x)
        }
    }

    fn raw_solve(&self, rhs: &[Complex64], adjoint: bool) -> Vec<Complex64> {
        let b = Mat::<Complex64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        let x = if adjoint { self.lu.solve_adjoint(&b) } else { self.lu.solve(&b) };
        (0..rhs.len()).map(|i| x[(i, 0)]).collect()
    }

    /// Solve `A x = rhs` (or `Aᴴ x = rhs`) with a residual guarantee
    /// `‖rhs − A x‖ ≤ 1e-10 ‖rhs‖`, using a few steps of iterative
    /// refinement when the first solve falls short.
    pub fn solve(&self, rhs: &[Complex64], adjoint: bool) -> Result<Vec<Complex64>, FemError> {
        if rhs.len() != self.dim() {
            return Err(FemError::InvalidArgument(format!(
                "rhs has length {}, operator has dimension {}",
                rhs.len(),
                self.dim()
            )));
        }
        let rhs_norm = norm2(rhs);
        if rhs_norm == 0.0 {
            return Ok(vec![Complex64::new(0.0, 0.0); rhs.len()]);
        }
        let mut x = self.raw_solve(rhs, adjoint);
        for step in 0..=REFINEMENT_STEPS {
            let ax = self.apply(&x, adjoint);
            let r: Vec<Complex64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
            let res = norm2(&r);
            if !res.is_finite() {
                break;
            }
            if res <= RESIDUAL_TOL * rhs_norm {
                return Ok(x);
            }
            if step == REFINEMENT_STEPS {
                return Err(FemError::SolverFailure(format!(
                    "relative residual {:.3e} after refinement (operator numerically singular)",
                    res / rhs_norm
                )));
            }
            let dx = self.raw_solve(&r, adjoint);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
        }
        Err(FemError::SolverFailure("non-finite solution (singular factorization)".into()))
    }

    /// Solve for several right-hand sides; independent solves run in parallel
    /// against the shared factorization.
    pub fn solve_block(&self, rhs: &[Vec<Complex64>], adjoint: bool) -> Result<Vec<Vec<Complex64>>, FemError> {
        use rayon::prelude::*;
        rhs.par_iter().map(|r| self.solve(r, adjoint)).collect()
    }
}

/// One-shot source solve with the operator matrix of a pencil:
/// `A x = rhs`, or `Aᴴ x = rhs` when `adjoint` is set.
pub fn solve_source(p: &FormPencil, rhs: &[Complex64], adjoint: bool) -> Result<Vec<Complex64>, FemError> {
    SourceSolver::new(&p.a)?.solve(rhs, adjoint)
}
