use faer::{Mat, MatRef};
use num_complex::Complex64;

use super::dense::{self, czero};
use super::SmallEigError;

/// Relative singular value cutoff for rank decisions in the recursion.
const RANK_TOL: f64 = 1e-8;

/// Generalized eigenvectors ordered by order `1..=ascent`. Column `k` of
/// `vectors` has order `orders[k]`.
#[derive(Debug, Clone)]
pub struct ChainBasis {
    pub vectors: Mat<Complex64>,
    pub orders: Vec<usize>,
    pub ascent: usize,
    /// Largest relative residual of the bordered systems solved.
    pub residual: f64,
}

impl ChainBasis {
    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    /// Number of vectors of order `l`.
    pub fn count_of_order(&self, l: usize) -> usize {
        self.orders.iter().filter(|&&o| o == l).count()
    }
}

fn hstack(a: MatRef<'_, Complex64>, b: MatRef<'_, Complex64>) -> Mat<Complex64> {
    Mat::from_fn(a.nrows(), a.ncols() + b.ncols(), |i, j| if j < a.ncols() { a[(i, j)] } else { b[(i, j - a.ncols())] })
}

/// Complete the geometric eigenspace `Q` of `λ` to `m_target` generalized
/// eigenvectors of `(A, B)`.
///
/// Order `l ≥ 2` vectors solve `(A − λB) u^l = λ A u^{l−1}` subject to
/// `Qᴴ M u^l = 0`, where `M` is the inner product Gram matrix (`B` when
/// `m` is `None`). The system is bordered by an orthonormal basis `P` of the
/// left null space of `A − λB`, so it is uniquely solvable; a predecessor
/// admits a successor exactly when `Pᴴ A u^{l−1} = 0`, and the consistent
/// combinations of each order are taken from the null space of that map.
pub fn compute_generalized_chain(
    a: MatRef<'_, Complex64>,
    b: MatRef<'_, Complex64>,
    lambda: Complex64,
    q: MatRef<'_, Complex64>,
    m_target: usize,
    tol: f64,
    m: Option<MatRef<'_, Complex64>>,
) -> Result<ChainBasis, SmallEigError> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n || q.nrows() != n {
        return Err(SmallEigError::InvalidArgument("chain inputs have inconsistent shapes".into()));
    }
    let gram = m.unwrap_or(b);
    let q_rank = dense::numerical_rank(q, RANK_TOL);
    if q_rank == 0 {
        return Err(SmallEigError::InvalidArgument("geometric eigenvector block is empty".into()));
    }
    if m_target < q_rank {
        return Err(SmallEigError::InvalidArgument(format!("m_target {m_target} below geometric multiplicity {q_rank}")));
    }
    let q_basis = if q_rank == q.ncols() { q.to_owned() } else { dense::range_basis(q, RANK_TOL) };
    if m_target == q_rank {
        return Ok(ChainBasis { vectors: q_basis, orders: vec![1; q_rank], ascent: 1, residual: 0.0 });
    }

    let s = Mat::from_fn(n, n, |i, j| a[(i, j)] - lambda * b[(i, j)]);
    let svd = dense::full_svd(s.as_ref());
    // left singular vectors of the q smallest singular values
    let p = svd.u.as_ref().subcols(n - q_rank, q_rank).to_owned();

    // bordered matrix [[S, P], [Qᴴ M, 0]]
    let qm = q_basis.adjoint() * gram;
    let k = n + q_rank;
    let border = Mat::from_fn(k, k, |i, j| match (i < n, j < n) {
        (true, true) => s[(i, j)],
        (true, false) => p[(i, j - n)],
        (false, true) => qm[(i - n, j)],
        (false, false) => czero(),
    });
    let border_lu = border.as_ref().partial_piv_lu();
    let border_scale = dense::frobenius(border.as_ref());

    let a_norm = dense::frobenius(a);
    let mut vectors = q_basis.clone();
    let mut orders = vec![1; q_rank];
    let mut frontier = q_basis;
    let mut residual = 0.0f64;
    let mut order = 1;
    while vectors.ncols() < m_target {
        // consistent combinations: null space of Pᴴ A F
        let af = a * &frontier;
        let consistency = p.adjoint() * &af;
        let fnorm = (0..frontier.ncols()).map(|j| dense::col_norm(frontier.as_ref(), j)).fold(0.0, f64::max);
        let combos = dense::null_basis(consistency.as_ref(), RANK_TOL * a_norm * fnorm);
        if combos.ncols() == 0 {
            let found = vectors.ncols();
            return Err(SmallEigError::AscentExhausted {
                requested: m_target,
                found,
                partial: Box::new(ChainBasis { vectors, orders, ascent: order, residual }),
            });
        }
        let mut rhs_top = &af * &combos;
        dense::scale_in_place(&mut rhs_top, lambda);
        let rhs = Mat::from_fn(k, rhs_top.ncols(), |i, j| if i < n { rhs_top[(i, j)] } else { czero() });
        let sol = faer::linalg::solvers::Solve::solve(&border_lu, &rhs);
        let chk = &border * &sol - &rhs;
        for j in 0..sol.ncols() {
            let denom = border_scale * dense::col_norm(sol.as_ref(), j) + dense::col_norm(rhs.as_ref(), j);
            if denom > 0.0 {
                residual = residual.max(dense::col_norm(chk.as_ref(), j) / denom);
            }
        }
        let next = sol.as_ref().subrows(0, n).to_owned();
        order += 1;
        let take = next.ncols().min(m_target - vectors.ncols());
        vectors = hstack(vectors.as_ref(), next.as_ref().subcols(0, take));
        orders.extend(std::iter::repeat_n(order, take));
        frontier = next;
    }
    if residual > tol {
        return Err(SmallEigError::Inaccurate { residual, tol });
    }
    Ok(ChainBasis { vectors, orders, ascent: order, residual })
}
