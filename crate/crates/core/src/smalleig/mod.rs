//! Dense generalized eigensolver for small nonsymmetric pencils, cluster
//! selection and generalized eigenvector chains.

mod chain;
pub mod dense;
mod schur;

use faer::{Mat, MatRef};
use num_complex::Complex64;
use thiserror::Error;

pub use chain::{compute_generalized_chain, ChainBasis};
pub use schur::{schur, Schur};

use dense::{czero, frobenius, max_abs};

pub const DEFAULT_TOL: f64 = 1e-9;
/// Relative distance under which eigenvalues count as one cluster.
pub const CLUSTER_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SmallEigError {
    #[error("pencil is degenerate: {0}")]
    PencilDegenerate(String),
    #[error("QR iteration did not converge (active block ending at row {0})")]
    NoConvergence(usize),
    #[error("eigenpair residual {residual:.3e} exceeds tolerance {tol:.1e}")]
    Inaccurate { residual: f64, tol: f64 },
    #[error("invalid cluster selection: {0}")]
    InvalidSelection(String),
    #[error("ascent exhausted: requested {requested} vectors, chain ends after {found}")]
    AscentExhausted { requested: usize, found: usize, partial: Box<ChainBasis> },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Eigenvalue with unit-norm right and left eigenvectors of `(A, B)`:
/// `A x = λ B x` and `wᴴ A = λ wᴴ B`.
#[derive(Debug, Clone)]
pub struct EigenTriple {
    pub lambda: Complex64,
    pub right: Vec<Complex64>,
    pub left: Vec<Complex64>,
}

fn normalize_columns(m: &mut Mat<Complex64>) {
    for j in 0..m.ncols() {
        let nrm = dense::col_norm(m.as_ref(), j);
        if nrm > 0.0 {
            for i in 0..m.nrows() {
                m[(i, j)] /= nrm;
            }
        }
    }
}

/// Order indices by real part, then imaginary part. Real parts closer than
/// `1e-9 · max(1, |a|, |b|)` are considered equal; the grouping is built on
/// the exact real-part order so the result is a total order.
pub fn lexicographic_order(values: &[Complex64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].re.total_cmp(&values[b].re).then(a.cmp(&b)));
    let mut out = Vec::with_capacity(idx.len());
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() {
            let (a, b) = (values[idx[end - 1]], values[idx[end]]);
            let tol = 1e-9 * 1f64.max(a.norm()).max(b.norm());
            if (b.re - a.re).abs() > tol {
                break;
            }
            end += 1;
        }
        let mut group = idx[start..end].to_vec();
        group.sort_by(|&a, &b| {
            values[a]
                .im
                .total_cmp(&values[b].im)
                .then(values[a].norm().total_cmp(&values[b].norm()))
                .then(a.cmp(&b))
        });
        out.extend(group);
        start = end;
    }
    out
}

/// All eigentriples of the dense pencil `(A, B)` sorted lexicographically by
/// `(Re λ, Im λ)`.
///
/// `B` is factored by Cholesky when it is Hermitian positive definite and by
/// LU otherwise. Every triple is checked against
/// `‖A x − λ B x‖ ≤ tol (‖A‖ + |λ| ‖B‖)` and likewise for the left vector.
pub fn solve_dense_pencil(a: MatRef<'_, Complex64>, b: MatRef<'_, Complex64>, tol: f64) -> Result<Vec<EigenTriple>, SmallEigError> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(SmallEigError::InvalidArgument(format!(
            "pencil shapes {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let sv = dense::singular_values(b);
    let smax = sv[0];
    let smin = *sv.last().unwrap();
    if smax == 0.0 || !smin.is_finite() || smin <= 1e-13 * smax {
        return Err(SmallEigError::PencilDegenerate(format!("B has condition estimate {:.3e}", smax / smin)));
    }

    // Reduce to a standard problem C y = λ y; recover right x = R y and
    // left w = L z from left vectors z of C.
    let cholesky = if dense::is_hermitian(b, 1e-13) { dense::cholesky(b) } else { None };
    let (c, right_map, left_map): (Mat<Complex64>, Box<dyn Fn(Mat<Complex64>) -> Mat<Complex64>>, Box<dyn Fn(Mat<Complex64>) -> Mat<Complex64>>) =
        match cholesky {
            Some(l) => {
                let linv_a = dense::solve_lower(l.as_ref(), a);
                let c = dense::solve_lower(l.as_ref(), linv_a.adjoint().to_owned().as_ref()).adjoint().to_owned();
                let l1 = l.clone();
                let l2 = l;
                (
                    c,
                    Box::new(move |y| dense::solve_lower_adjoint(l1.as_ref(), y.as_ref())),
                    Box::new(move |z| dense::solve_lower_adjoint(l2.as_ref(), z.as_ref())),
                )
            }
            None => {
                let c = dense::lu_solve(b, a);
                let bo = b.to_owned();
                (c, Box::new(|y| y), Box::new(move |z| dense::lu_solve_adjoint(bo.as_ref(), z.as_ref())))
            }
        };

    let s = schur(c.as_ref()).map_err(SmallEigError::NoConvergence)?;
    let vt = schur::triangular_right_vectors(s.t.as_ref());
    let wt = schur::triangular_left_vectors(s.t.as_ref());
    let mut right = right_map(&s.z * &vt);
    let mut left = left_map(&s.z * &wt);
    normalize_columns(&mut right);
    normalize_columns(&mut left);

    let lambdas: Vec<Complex64> = (0..n).map(|k| s.t[(k, k)]).collect();
    let na = frobenius(a);
    let nb = frobenius(b);
    let ar = a * &right;
    let br = b * &right;
    let la = left.adjoint() * a;
    let lb = left.adjoint() * b;
    let mut worst = 0.0f64;
    for k in 0..n {
        let lam = lambdas[k];
        let scale = na + lam.norm() * nb;
        let rr: f64 = (0..n).map(|i| (ar[(i, k)] - lam * br[(i, k)]).norm_sqr()).sum::<f64>().sqrt();
        let rl: f64 = (0..n).map(|i| (la[(k, i)] - lam * lb[(k, i)]).norm_sqr()).sum::<f64>().sqrt();
        worst = worst.max(rr.max(rl) / scale);
    }
    if !(worst <= tol) {
        return Err(SmallEigError::Inaccurate { residual: worst, tol });
    }

    Ok(lexicographic_order(&lambdas)
        .into_iter()
        .map(|k| EigenTriple {
            lambda: lambdas[k],
            right: dense::column(right.as_ref(), k),
            left: dense::column(left.as_ref(), k),
        })
        .collect())
}

/// Which eigenvalues form the requested cluster: 1-based position `index` in
/// the sorted spectrum and `count` members, or the `count` eigenvalues
/// nearest to `previous` when it is given.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterSelector {
    pub index: usize,
    pub count: usize,
    pub previous: Option<Complex64>,
}

impl ClusterSelector {
    pub fn new(index: usize, count: usize) -> Self {
        Self { index, count, previous: None }
    }

    pub fn near(self, previous: Complex64) -> Self {
        Self { previous: Some(previous), ..self }
    }
}

/// Indices (into `lambdas`) of the selected cluster, in lexicographic order.
pub fn select_cluster(lambdas: &[Complex64], sel: &ClusterSelector) -> Result<Vec<usize>, SmallEigError> {
    let m = sel.count;
    if m == 0 {
        return Err(SmallEigError::InvalidSelection("cluster count must be at least 1".into()));
    }
    if m > lambdas.len() {
        return Err(SmallEigError::InvalidSelection(format!("{m} eigenvalues requested, {} available", lambdas.len())));
    }
    let order = lexicographic_order(lambdas);
    let mut picked: Vec<usize> = match sel.previous {
        None => {
            if sel.index == 0 || sel.index + m - 1 > lambdas.len() {
                return Err(SmallEigError::InvalidSelection(format!(
                    "positions {}..{} outside 1..{}",
                    sel.index,
                    sel.index + m - 1,
                    lambdas.len()
                )));
            }
            order[sel.index - 1..sel.index - 1 + m].to_vec()
        }
        Some(target) => {
            let mut by_dist = order.clone();
            // stable: equal distances keep lexicographic order
            by_dist.sort_by(|&a, &b| (lambdas[a] - target).norm().total_cmp(&(lambdas[b] - target).norm()));
            by_dist.truncate(m);
            by_dist
        }
    };
    let rank: Vec<usize> = {
        let mut r = vec![0; lambdas.len()];
        for (pos, &k) in order.iter().enumerate() {
            r[k] = pos;
        }
        r
    };
    picked.sort_by_key(|&k| rank[k]);
    Ok(picked)
}

/// Split a (sorted) cluster into groups of numerically equal eigenvalues:
/// consecutive members within `1e-6 (1 + |λ|)` share a group.
pub fn eigenvalue_groups(lambdas: &[Complex64]) -> Vec<Vec<usize>> {
    let order = lexicographic_order(lambdas);
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for k in order {
        if let Some(g) = groups.last_mut() {
            let prev = lambdas[*g.last().unwrap()];
            if (lambdas[k] - prev).norm() <= CLUSTER_TOL * (1.0 + prev.norm()) {
                g.push(k);
                continue;
            }
        }
        groups.push(vec![k]);
    }
    groups
}

/// Geometric multiplicity estimate of a group: numerical rank of its unit
/// eigenvectors with cutoff `1e-6 σ_max`.
pub fn group_geometric_multiplicity(vectors: &[Vec<Complex64>]) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let m = dense::from_columns(vectors[0].len(), vectors);
    dense::numerical_rank(m.as_ref(), CLUSTER_TOL)
}

/// Mean of a set of eigenvalues.
pub fn mean(lambdas: &[Complex64]) -> Complex64 {
    lambdas.iter().fold(czero(), |s, l| s + l) / lambdas.len() as f64
}

#[doc(hidden)]
pub fn residual_scale(a: MatRef<'_, Complex64>) -> f64 {
    max_abs(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn diag(v: &[f64]) -> Mat<Complex64> {
        Mat::from_fn(v.len(), v.len(), |i, j| if i == j { c(v[i], 0.0) } else { czero() })
    }

    #[test]
    fn diagonal_examples() {
        let t = solve_dense_pencil(diag(&[2.0, 3.0]).as_ref(), diag(&[1.0, 1.0]).as_ref(), DEFAULT_TOL).unwrap();
        assert!((t[0].lambda - c(2.0, 0.0)).norm() < 1e-14);
        assert!((t[1].lambda - c(3.0, 0.0)).norm() < 1e-14);
        assert!((t[0].right[0].norm() - 1.0).abs() < 1e-14 && t[0].right[1].norm() < 1e-14);
        assert!((t[1].left[1].norm() - 1.0).abs() < 1e-14 && t[1].left[0].norm() < 1e-14);

        let t = solve_dense_pencil(diag(&[2.0, 2.0]).as_ref(), diag(&[1.0, 2.0]).as_ref(), DEFAULT_TOL).unwrap();
        assert!((t[0].lambda - c(1.0, 0.0)).norm() < 1e-14);
        assert!((t[1].lambda - c(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn jordan_block_has_one_eigenvector_direction() {
        let a = Mat::from_fn(2, 2, |i, j| c([[2.0, 1.0], [0.0, 2.0]][i][j], 0.0));
        let t = solve_dense_pencil(a.as_ref(), diag(&[1.0, 1.0]).as_ref(), DEFAULT_TOL).unwrap();
        for e in &t {
            assert!((e.lambda - c(2.0, 0.0)).norm() < 1e-7);
        }
        let groups = eigenvalue_groups(&[t[0].lambda, t[1].lambda]);
        assert_eq!(groups.len(), 1);
        let q = group_geometric_multiplicity(&[t[0].right.clone(), t[1].right.clone()]);
        assert_eq!(q, 1);
        assert!(t[0].right[1].norm() < 1e-7);
    }

    #[test]
    fn singular_b_is_degenerate() {
        let r = solve_dense_pencil(diag(&[1.0, 2.0]).as_ref(), diag(&[1.0, 0.0]).as_ref(), DEFAULT_TOL);
        assert!(matches!(r, Err(SmallEigError::PencilDegenerate(_))));
    }

    #[test]
    fn selection_examples() {
        let l: Vec<Complex64> = [1.0, 5.0, 5.0, 9.0].iter().map(|&x| c(x, 0.0)).collect();
        assert_eq!(select_cluster(&l, &ClusterSelector::new(2, 2)).unwrap(), vec![1, 2]);
        let l = vec![c(19.9, 0.0), c(20.1, 0.0), c(49.6, 0.0)];
        assert_eq!(select_cluster(&l, &ClusterSelector::new(1, 1).near(c(20.05, 0.0))).unwrap(), vec![1]);
        let l = vec![c(4.0, 0.0), c(3.0, 1.0), c(3.0, -1.0)];
        assert_eq!(select_cluster(&l, &ClusterSelector::new(1, 2)).unwrap(), vec![2, 1]);
        assert!(matches!(select_cluster(&l, &ClusterSelector::new(1, 4)), Err(SmallEigError::InvalidSelection(_))));
        assert!(matches!(select_cluster(&l, &ClusterSelector::new(3, 2)), Err(SmallEigError::InvalidSelection(_))));
    }

    #[test]
    fn non_hermitian_b_uses_lu_path() {
        let a = Mat::from_fn(3, 3, |i, j| c((i * 3 + j) as f64 + 1.0, (i as f64) - (j as f64)));
        let b = Mat::from_fn(3, 3, |i, j| if i == j { c(2.0, 0.0) } else { c(0.3 * (i as f64), 0.1) });
        let t = solve_dense_pencil(a.as_ref(), b.as_ref(), DEFAULT_TOL).unwrap();
        assert_eq!(t.len(), 3);
    }
}
