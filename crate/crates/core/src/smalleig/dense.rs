//! Small dense helpers over `faer::Mat<Complex64>`.

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef};
use num_complex::Complex64;

pub(crate) fn czero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

pub fn max_abs(a: MatRef<'_, Complex64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

pub fn frobenius(a: MatRef<'_, Complex64>) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

pub fn col_norm(a: MatRef<'_, Complex64>, j: usize) -> f64 {
    (0..a.nrows()).map(|i| a[(i, j)].norm_sqr()).sum::<f64>().sqrt()
}

pub fn column(a: MatRef<'_, Complex64>, j: usize) -> Vec<Complex64> {
    (0..a.nrows()).map(|i| a[(i, j)]).collect()
}

pub fn from_columns(n: usize, cols: &[Vec<Complex64>]) -> Mat<Complex64> {
    Mat::from_fn(n, cols.len(), |i, j| cols[j][i])
}

pub fn is_hermitian(a: MatRef<'_, Complex64>, rel: f64) -> bool {
    if a.nrows() != a.ncols() {
        return false;
    }
    let scale = max_abs(a);
    for j in 0..a.ncols() {
        for i in 0..=j {
            if (a[(i, j)] - a[(j, i)].conj()).norm() > rel * scale {
                return false;
            }
        }
    }
    true
}

/// Lower Cholesky factor of a Hermitian matrix; `None` if a pivot is not
/// positive.
pub fn cholesky(a: MatRef<'_, Complex64>) -> Option<Mat<Complex64>> {
    let n = a.nrows();
    let mut l = Mat::<Complex64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d.is_nan() || d <= 0.0 {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = Complex64::new(d, 0.0);
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / d;
        }
    }
    Some(l)
}

/// Solve `L X = B` for lower triangular `L`.
pub fn solve_lower(l: MatRef<'_, Complex64>, b: MatRef<'_, Complex64>) -> Mat<Complex64> {
    let n = l.nrows();
    let mut x = b.to_owned();
    for c in 0..x.ncols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// Solve `Lᴴ X = B` for lower triangular `L`.
pub fn solve_lower_adjoint(l: MatRef<'_, Complex64>, b: MatRef<'_, Complex64>) -> Mat<Complex64> {
    let n = l.nrows();
    let mut x = b.to_owned();
    for c in 0..x.ncols() {
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in i + 1..n {
                s -= l[(k, i)].conj() * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)].conj();
        }
    }
    x
}

/// Solve the square system `A X = B` with partial-pivot LU.
pub fn lu_solve(a: MatRef<'_, Complex64>, b: MatRef<'_, Complex64>) -> Mat<Complex64> {
    a.partial_piv_lu().solve(b)
}

/// Solve `Aᴴ X = B` with partial-pivot LU.
pub fn lu_solve_adjoint(a: MatRef<'_, Complex64>, b: MatRef<'_, Complex64>) -> Mat<Complex64> {
    a.partial_piv_lu().solve_adjoint(b)
}

/// Singular values in nonincreasing order.
pub fn singular_values(a: MatRef<'_, Complex64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s = a.singular_values().expect("SVD converges for finite input");
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Numerical rank with cutoff `rel · σ_max`.
pub fn numerical_rank(a: MatRef<'_, Complex64>, rel: f64) -> usize {
    let s = singular_values(a);
    match s.first() {
        Some(&smax) if smax > 0.0 => s.iter().filter(|&&v| v > rel * smax).count(),
        _ => 0,
    }
}

/// Full SVD `A = U Σ Vᴴ` with singular values sorted nonincreasing.
pub struct FullSvd {
    pub u: Mat<Complex64>,
    pub s: Vec<f64>,
    pub v: Mat<Complex64>,
}

pub fn full_svd(a: MatRef<'_, Complex64>) -> FullSvd {
    let svd = a.svd().expect("SVD converges for finite input");
    let k = a.nrows().min(a.ncols());
    let sv = svd.S().column_vector();
    let s: Vec<f64> = (0..k).map(|i| sv[i].re).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| s[y].total_cmp(&s[x]).then(x.cmp(&y)));
    let u0 = svd.U();
    let v0 = svd.V();
    // permute the leading k columns, keep the rest
    let u = Mat::from_fn(u0.nrows(), u0.ncols(), |i, j| if j < k { u0[(i, order[j])] } else { u0[(i, j)] });
    let v = Mat::from_fn(v0.nrows(), v0.ncols(), |i, j| if j < k { v0[(i, order[j])] } else { v0[(i, j)] });
    let s = order.iter().map(|&i| s[i]).collect();
    FullSvd { u, s, v }
}

/// Orthonormal basis of the range with cutoff `rel · σ_max`.
pub fn range_basis(a: MatRef<'_, Complex64>, rel: f64) -> Mat<Complex64> {
    let svd = full_svd(a);
    let smax = svd.s.first().copied().unwrap_or(0.0);
    let r = svd.s.iter().filter(|&&v| smax > 0.0 && v > rel * smax).count();
    svd.u.as_ref().subcols(0, r).to_owned()
}

/// Orthonormal basis of the nullspace: right singular vectors whose singular
/// value is at most `abs_cutoff`.
pub fn null_basis(a: MatRef<'_, Complex64>, abs_cutoff: f64) -> Mat<Complex64> {
    let n = a.ncols();
    if a.nrows() == 0 {
        return Mat::identity(n, n);
    }
    let svd = full_svd(a);
    let r = svd.s.iter().filter(|&&v| v > abs_cutoff).count();
    svd.v.as_ref().subcols(r, n - r).to_owned()
}

pub fn scale_in_place(m: &mut Mat<Complex64>, s: Complex64) {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            m[(i, j)] *= s;
        }
    }
}

pub fn identity(n: usize) -> Mat<Complex64> {
    Mat::identity(n, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn cholesky_and_triangular_solves() {
        let a = Mat::from_fn(3, 3, |i, j| {
            if i == j {
                c(4.0 + i as f64, 0.0)
            } else if i < j {
                c(0.5, 0.25 * (i + j) as f64)
            } else {
                c(0.5, -0.25 * (i + j) as f64)
            }
        });
        assert!(is_hermitian(a.as_ref(), 1e-15));
        let l = cholesky(a.as_ref()).unwrap();
        let llh = &l * l.adjoint();
        assert!(max_abs((&llh - &a).as_ref()) < 1e-14);
        let b = Mat::from_fn(3, 2, |i, j| c(i as f64 + 1.0, j as f64));
        let x = solve_lower_adjoint(l.as_ref(), solve_lower(l.as_ref(), b.as_ref()).as_ref());
        assert!(max_abs((&a * &x - &b).as_ref()) < 1e-13);
    }

    #[test]
    fn indefinite_has_no_cholesky() {
        let a = Mat::from_fn(2, 2, |i, j| if i == j { c(1.0 - 2.0 * i as f64, 0.0) } else { c(0.0, 0.0) });
        assert!(cholesky(a.as_ref()).is_none());
    }

    #[test]
    fn rank_and_null_space() {
        // rank-2 3x3
        let a = Mat::from_fn(3, 3, |i, j| c((i + 1) as f64 * (j + 1) as f64 + if i == j && i == 0 { 1.0 } else { 0.0 }, 0.0));
        assert_eq!(numerical_rank(a.as_ref(), 1e-10), 2);
        let n = null_basis(a.as_ref(), 1e-10 * singular_values(a.as_ref())[0]);
        assert_eq!(n.ncols(), 1);
        assert!(max_abs((&a * &n).as_ref()) < 1e-12);
        let r = range_basis(a.as_ref(), 1e-10);
        assert_eq!(r.ncols(), 2);
    }
}
