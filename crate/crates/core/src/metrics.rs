//! Eigenvalue and eigenfunction errors, subspace gaps and fitted orders.

use faer::{Mat, MatRef};
use num_complex::Complex64;
use thiserror::Error;

use crate::correction::EigenCluster;
use crate::fem::{quadrature_points, ExactFn, FeSpace, FemError};
use crate::smalleig::{self, dense};
use crate::sparse::CsrMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("degenerate subspace: column {column} is dependent on the preceding ones")]
    DegenerateSubspace { column: usize },
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error(transparent)]
    Fem(#[from] FemError),
}

/// Relative cutoff of the G-orthonormalization.
const GAP_RANK_TOL: f64 = 1e-10;

/// Symmetric gaps in the H1 norm (`theta`) and in the b-norm (`phi`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport {
    pub theta: f64,
    pub phi: f64,
}

/// Mean of the cluster eigenvalues.
pub fn mean_eigenvalue(c: &EigenCluster) -> Complex64 {
    smalleig::mean(&c.lambdas)
}

fn g_dot(g: &CsrMatrix, x: &[Complex64], y: &[Complex64]) -> Complex64 {
    // xᴴ G y
    crate::sparse::dot(x, &g.matvec(y))
}

/// G-orthonormal basis of span(U) by two-pass classical Gram–Schmidt.
fn g_orthonormalize(u: MatRef<'_, Complex64>, g: &CsrMatrix) -> Result<Vec<Vec<Complex64>>, MetricsError> {
    let mut q: Vec<Vec<Complex64>> = Vec::with_capacity(u.ncols());
    for j in 0..u.ncols() {
        let mut v = dense::column(u, j);
        let orig = g_dot(g, &v, &v).re.max(0.0).sqrt();
        for _ in 0..2 {
            for qi in &q {
                let c = g_dot(g, qi, &v);
                v.iter_mut().zip(qi).for_each(|(a, b)| *a -= c * b);
            }
        }
        let nrm = g_dot(g, &v, &v).re.max(0.0).sqrt();
        if !(nrm > GAP_RANK_TOL * orig) {
            return Err(MetricsError::DegenerateSubspace { column: j });
        }
        v.iter_mut().for_each(|a| *a /= nrm);
        q.push(v);
    }
    Ok(q)
}

/// `sup_{u ∈ U, ‖u‖ = 1} inf_{w ∈ W} ‖u − w‖` from G-orthonormal bases.
fn directed_gap(qu: &[Vec<Complex64>], qw: &[Vec<Complex64>], g: &CsrMatrix) -> f64 {
    if qu.is_empty() {
        return 0.0;
    }
    // residuals of G-projecting each basis vector of U onto W
    let r: Vec<Vec<Complex64>> = qu
        .iter()
        .map(|u| {
            let mut v = u.clone();
            for w in qw {
                let c = g_dot(g, w, u);
                v.iter_mut().zip(w).for_each(|(a, b)| *a -= c * b);
            }
            v
        })
        .collect();
    let gr: Vec<Vec<Complex64>> = r.iter().map(|v| g.matvec(v)).collect();
    let k = r.len();
    let m = Mat::from_fn(k, k, |i, j| crate::sparse::dot(&r[i], &gr[j]));
    // Hermitian positive semidefinite: largest singular value is λmax
    dense::singular_values(m.as_ref()).first().copied().unwrap_or(0.0).max(0.0).sqrt()
}

/// Symmetric gap `max{Θ̂(U, W), Θ̂(W, U)}` between the column spans of `u`
/// and `w` in the norm `‖v‖² = vᴴ G v`.
pub fn subspace_gap(u: MatRef<'_, Complex64>, w: MatRef<'_, Complex64>, g: &CsrMatrix) -> Result<f64, MetricsError> {
    if u.nrows() != g.nrows() || w.nrows() != g.nrows() {
        return Err(MetricsError::InvalidData(format!(
            "basis lengths {} and {} do not match Gram dimension {}",
            u.nrows(),
            w.nrows(),
            g.nrows()
        )));
    }
    let qu = g_orthonormalize(u, g)?;
    let qw = g_orthonormalize(w, g)?;
    Ok(directed_gap(&qu, &qw, g).max(directed_gap(&qw, &qu, g)))
}

/// Both gaps between two coefficient spans of the same space.
pub fn gap_report(u: MatRef<'_, Complex64>, w: MatRef<'_, Complex64>, h1_gram: &CsrMatrix, b_gram: &CsrMatrix) -> Result<GapReport, MetricsError> {
    Ok(GapReport { theta: subspace_gap(u, w, h1_gram)?, phi: subspace_gap(u, w, b_gram)? })
}

/// Error of one exact function after alignment, in the b-norm and full H1 norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignedError {
    pub b: f64,
    pub h1: f64,
}

/// Distance of each exact function, scaled to unit b-norm, to the span of
/// `computed` (interior or full coefficient vectors of `space`).
///
/// The b-orthogonal projection onto the computed span removes the phase,
/// scale and in-cluster mixing of the discrete eigenvectors. Integrals use
/// quadrature of the given degree.
pub fn align_to_exact(space: &FeSpace, computed: &[Vec<Complex64>], exact: &[ExactFn], quad_degree: usize) -> Result<Vec<AlignedError>, MetricsError> {
    if computed.len() != exact.len() || computed.is_empty() {
        return Err(MetricsError::InvalidData(format!("{} computed vectors against {} exact functions", computed.len(), exact.len())));
    }
    let fulls = computed.iter().map(|u| space.to_full(u)).collect::<Result<Vec<_>, _>>()?;
    let qps = quadrature_points(space, quad_degree);
    let k = fulls.len();
    // values and gradients of the computed vectors at every point
    let samples: Vec<Vec<(Complex64, [Complex64; 2])>> = fulls
        .iter()
        .map(|f| qps.iter().map(|q| space.evaluate_with_gradient(f, q.triangle, q.bary)).collect())
        .collect();
    let gram = Mat::from_fn(k, k, |i, j| qps.iter().enumerate().map(|(p, q)| q.weight * samples[j][p].0 * samples[i][p].0.conj()).sum::<Complex64>());
    let mut out = Vec::with_capacity(k);
    for e in exact {
        let vals: Vec<(Complex64, [Complex64; 2])> = qps.iter().map(|q| e.eval(q.x)).collect();
        let unorm = qps.iter().zip(&vals).map(|(q, v)| q.weight * v.0.norm_sqr()).sum::<f64>().sqrt();
        if !(unorm > 0.0) {
            return Err(MetricsError::InvalidData("exact function has zero b-norm".into()));
        }
        let rhs = Mat::from_fn(k, 1, |i, _| qps.iter().enumerate().map(|(p, q)| q.weight * vals[p].0 * samples[i][p].0.conj()).sum::<Complex64>() / unorm);
        let c = dense::lu_solve(gram.as_ref(), rhs.as_ref());
        let mut eb = 0.0;
        let mut semi = 0.0;
        for (p, q) in qps.iter().enumerate() {
            let mut r = vals[p].0 / unorm;
            let mut dr = [vals[p].1[0] / unorm, vals[p].1[1] / unorm];
            for j in 0..k {
                let (v, dv) = samples[j][p];
                r -= c[(j, 0)] * v;
                dr[0] -= c[(j, 0)] * dv[0];
                dr[1] -= c[(j, 0)] * dv[1];
            }
            eb += q.weight * r.norm_sqr();
            semi += q.weight * (dr[0].norm_sqr() + dr[1].norm_sqr());
        }
        out.push(AlignedError { b: eb.sqrt(), h1: (eb + semi).sqrt() });
    }
    Ok(out)
}

/// Least-squares slope of `log(err)` against `log(h)`.
pub fn fit_order(hs: &[f64], errs: &[f64]) -> Result<f64, MetricsError> {
    if hs.len() != errs.len() {
        return Err(MetricsError::InvalidData(format!("{} abscissae against {} errors", hs.len(), errs.len())));
    }
    if hs.len() < 2 {
        return Err(MetricsError::InvalidData("at least two data points are needed".into()));
    }
    if hs.iter().chain(errs).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(MetricsError::InvalidData("all data must be positive and finite".into()));
    }
    let x: Vec<f64> = hs.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = errs.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(MetricsError::InvalidData("abscissae are all equal".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::build_space;
    use crate::mesh::generate_unit_square;
    use crate::model::c64;

    fn col(v: &[Complex64]) -> Mat<Complex64> {
        Mat::from_fn(v.len(), 1, |i, _| v[i])
    }

    #[test]
    fn mean_examples() {
        assert_eq!(smalleig::mean(&[c64(20.0, 0.0)]), c64(20.0, 0.0));
        assert!((smalleig::mean(&[c64(49.6, 0.0), c64(49.7, 0.0)]) - c64(49.65, 0.0)).norm() < 1e-12);
        assert_eq!(smalleig::mean(&[c64(3.0, 1.0), c64(3.0, -1.0)]), c64(3.0, 0.0));
    }

    #[test]
    fn gap_examples() {
        let g = CsrMatrix::identity(2);
        let e1 = col(&[c64(1.0, 0.0), c64(0.0, 0.0)]);
        let e2 = col(&[c64(0.0, 0.0), c64(1.0, 0.0)]);
        assert!((subspace_gap(e1.as_ref(), e2.as_ref(), &g).unwrap() - 1.0).abs() < 1e-14);
        let t = std::f64::consts::PI / 6.0;
        let w = col(&[c64(t.cos(), 0.0), c64(t.sin(), 0.0)]);
        assert!((subspace_gap(e1.as_ref(), w.as_ref(), &g).unwrap() - 0.5).abs() < 1e-14);
        let u = Mat::from_fn(3, 2, |i, j| c64((i + 2 * j) as f64, (i * i * j) as f64 - 1.0));
        let m = Mat::from_fn(2, 2, |i, j| c64([[2.0, 1.0], [0.5, -3.0]][i][j], 0.3));
        let um = &u * &m;
        assert!(subspace_gap(u.as_ref(), um.as_ref(), &CsrMatrix::identity(3)).unwrap() < 1e-10);
    }

    #[test]
    fn degenerate_basis_rejected() {
        let u = Mat::from_fn(3, 2, |i, _| c64(i as f64 + 1.0, 0.0));
        let r = subspace_gap(u.as_ref(), u.as_ref(), &CsrMatrix::identity(3));
        assert!(matches!(r, Err(MetricsError::DegenerateSubspace { column: 1 })));
    }

    #[test]
    fn fit_order_examples() {
        let hs = [0.5, 0.25, 0.125, 0.0625];
        for p in [2.0, 4.0] {
            let e: Vec<f64> = hs.iter().map(|h: &f64| 3.7 * h.powf(p)).collect();
            assert!((fit_order(&hs, &e).unwrap() - p).abs() < 1e-12);
        }
        assert!((fit_order(&[0.1, 0.05], &[1.0, 0.25]).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(fit_order(&[0.1], &[1.0]), Err(MetricsError::InvalidData(_))));
        assert!(matches!(fit_order(&[0.1, 0.0], &[1.0, 2.0]), Err(MetricsError::InvalidData(_))));
        assert!(matches!(fit_order(&[0.1, 0.2], &[1.0, -2.0]), Err(MetricsError::InvalidData(_))));
    }

    fn bubble() -> ExactFn {
        // x(1−x)y(1−y), inside every P4 space
        ExactFn::new(
            |x| c64(x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]), 0.0),
            |x| [c64((1.0 - 2.0 * x[0]) * x[1] * (1.0 - x[1]), 0.0), c64(x[0] * (1.0 - x[0]) * (1.0 - 2.0 * x[1]), 0.0)],
        )
    }

    #[test]
    fn scale_and_phase_are_removed() {
        let s = build_space(&generate_unit_square(4).unwrap(), 4).unwrap();
        let f = bubble();
        let u: Vec<Complex64> = s.interpolate(|x| (f.value)(x)).into_iter().map(|v| v * c64(0.0, 3.0)).collect();
        let e = align_to_exact(&s, &[u], &[f], 12).unwrap();
        assert!(e[0].b < 1e-12 && e[0].h1 < 1e-12, "{e:?}");
    }

    #[test]
    fn projection_is_no_worse_than_interpolation() {
        let s = build_space(&generate_unit_square(8).unwrap(), 1).unwrap();
        let f = crate::model::eigenfunction(crate::model::real_b(), 1, 1);
        let interp = s.interpolate(|x| (f.value)(x));
        let unorm = crate::fem::error_norms(&s, &vec![c64(0.0, 0.0); s.dof_count()], &f, 8).unwrap().0;
        let scaled: Vec<Complex64> = interp.iter().map(|v| v / unorm).collect();
        let (ib, _) = crate::fem::error_norms(&s, &scaled, &ExactFn::new({ let f = f.clone(); move |x| (f.value)(x) / unorm }, { let f = f.clone(); move |x| { let g = (f.gradient)(x); [g[0] / unorm, g[1] / unorm] } }), 8).unwrap();
        let e = align_to_exact(&s, &[interp], &[f], 8).unwrap();
        assert!(e[0].b <= ib * (1.0 + 1e-12));
    }
}
