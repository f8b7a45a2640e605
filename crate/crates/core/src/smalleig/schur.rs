//! Complex Schur decomposition `C = Z T Zᴴ` by Householder reduction to
//! Hessenberg form and single-shift QR iteration, plus eigenvectors of the
//! triangular factor.

use faer::{Mat, MatRef};
use num_complex::Complex64;

use super::dense::czero;

const EPS: f64 = f64::EPSILON;
const MAX_SWEEPS_PER_EIGENVALUE: usize = 30;

pub struct Schur {
    pub t: Mat<Complex64>,
    pub z: Mat<Complex64>,
}

/// Reduce to upper Hessenberg form `C = Q H Qᴴ`, returning `(H, Q)`.
fn hessenberg(c: MatRef<'_, Complex64>) -> (Mat<Complex64>, Mat<Complex64>) {
    let n = c.nrows();
    let mut h = c.to_owned();
    let mut q = Mat::<Complex64>::identity(n, n);
    for k in 0..n.saturating_sub(2) {
        let alpha_norm: f64 = (k + 1..n).map(|i| h[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if alpha_norm == 0.0 {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let phase = if x0.norm() == 0.0 { Complex64::new(1.0, 0.0) } else { x0 / x0.norm() };
        // v = x + phase |x| e1, reflector I - 2 v vᴴ / (vᴴ v)
        let mut v: Vec<Complex64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        v[0] += phase * alpha_norm;
        let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm2;
        // H <- (I - beta v vᴴ) H
        for j in 0..n {
            let mut s = czero();
            for (r, vi) in v.iter().enumerate() {
                s += vi.conj() * h[(k + 1 + r, j)];
            }
            s *= beta;
            for (r, vi) in v.iter().enumerate() {
                h[(k + 1 + r, j)] -= vi * s;
            }
        }
        // H <- H (I - beta v vᴴ), Q <- Q (I - beta v vᴴ)
        for m in [&mut h, &mut q] {
            for i in 0..n {
                let mut s = czero();
                for (r, vi) in v.iter().enumerate() {
                    s += m[(i, k + 1 + r)] * vi;
                }
                s *= beta;
                for (r, vi) in v.iter().enumerate() {
                    m[(i, k + 1 + r)] -= s * vi.conj();
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = czero();
        }
    }
    (h, q)
}

/// Rotation `G = [[c, s], [-s̄, c]]` with `G [x; y] = [r; 0]`.
fn givens(x: Complex64, y: Complex64) -> (f64, Complex64) {
    let ax = x.norm();
    let ay = y.norm();
    if ay == 0.0 {
        return (1.0, czero());
    }
    if ax == 0.0 {
        return (0.0, y.conj() / ay);
    }
    let r = ax.hypot(ay);
    (ax / r, (x / ax) * y.conj() / r)
}

/// Eigenvalue of the 2x2 block `[[a, b], [c, d]]` closest to `d`.
fn wilkinson(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let p = (a - d) * 0.5;
    let disc = (p * p + b * c).sqrt();
    let m = (a + d) * 0.5;
    let (l1, l2) = (m + disc, m - disc);
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// Complex Schur form of a square matrix.
pub fn schur(c: MatRef<'_, Complex64>) -> Result<Schur, usize> {
    let n = c.nrows();
    let (mut h, mut z) = hessenberg(c);
    if n <= 1 {
        return Ok(Schur { t: h, z });
    }
    let norm = super::dense::max_abs(h.as_ref()).max(f64::MIN_POSITIVE);
    let mut hi = n - 1;
    let mut iter = 0usize;
    while hi > 0 {
        // locate the active unreduced block l..=hi
        let mut l = hi;
        while l > 0 {
            let mut s = h[(l - 1, l - 1)].norm() + h[(l, l)].norm();
            if s == 0.0 {
                s = norm;
            }
            if h[(l, l - 1)].norm() <= EPS * s {
                h[(l, l - 1)] = czero();
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        if iter > MAX_SWEEPS_PER_EIGENVALUE {
            return Err(hi);
        }
        let mu = if iter.is_multiple_of(10) {
            // exceptional shift to break cycles
            h[(hi, hi)] + h[(hi, hi - 1)].norm() * 0.75
        } else {
            wilkinson(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };
        let mut x = h[(l, l)] - mu;
        let mut y = h[(l + 1, l)];
        for k in l..hi {
            if k > l {
                x = h[(k, k - 1)];
                y = h[(k + 1, k - 1)];
            }
            let (cs, sn) = givens(x, y);
            let start = if k > l { k - 1 } else { k };
            for j in start..n {
                let (h1, h2) = (h[(k, j)], h[(k + 1, j)]);
                h[(k, j)] = h1 * cs + sn * h2;
                h[(k + 1, j)] = -sn.conj() * h1 + h2 * cs;
            }
            let end = (k + 2).min(hi);
            for i in 0..=end {
                let (h1, h2) = (h[(i, k)], h[(i, k + 1)]);
                h[(i, k)] = h1 * cs + h2 * sn.conj();
                h[(i, k + 1)] = -h1 * sn + h2 * cs;
            }
            for i in 0..n {
                let (z1, z2) = (z[(i, k)], z[(i, k + 1)]);
                z[(i, k)] = z1 * cs + z2 * sn.conj();
                z[(i, k + 1)] = -z1 * sn + z2 * cs;
            }
            if k > l {
                h[(k + 1, k - 1)] = czero();
            }
        }
    }
    for j in 0..n {
        for i in j + 1..n {
            h[(i, j)] = czero();
        }
    }
    Ok(Schur { t: h, z })
}

fn guard(d: Complex64, smin: f64) -> Complex64 {
    if d.norm() < smin {
        Complex64::new(smin, 0.0)
    } else {
        d
    }
}

const BIG: f64 = 1e100;

/// Right eigenvectors of upper triangular `T`, one column per diagonal entry.
pub fn triangular_right_vectors(t: MatRef<'_, Complex64>) -> Mat<Complex64> {
    let n = t.nrows();
    let smin = (EPS * super::dense::max_abs(t)).max(f64::MIN_POSITIVE * 1e10);
    let mut v = Mat::<Complex64>::zeros(n, n);
    for k in 0..n {
        let tkk = t[(k, k)];
        let mut x = vec![czero(); k + 1];
        x[k] = Complex64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut s = czero();
            for j in i + 1..=k {
                s += t[(i, j)] * x[j];
            }
            x[i] = -s / guard(t[(i, i)] - tkk, smin);
            if x[i].norm() > BIG {
                let scale = 1.0 / x[i].norm();
                for xj in x.iter_mut() {
                    *xj *= scale;
                }
            }
        }
        for (i, xi) in x.into_iter().enumerate() {
            v[(i, k)] = xi;
        }
    }
    v
}

/// Left eigenvectors of upper triangular `T` (`wᴴ T = t_kk wᴴ`), by forward
/// substitution on `Tᴴ`.
pub fn triangular_left_vectors(t: MatRef<'_, Complex64>) -> Mat<Complex64> {
    let n = t.nrows();
    let smin = (EPS * super::dense::max_abs(t)).max(f64::MIN_POSITIVE * 1e10);
    let mut w = Mat::<Complex64>::zeros(n, n);
    for k in 0..n {
        let tkk = t[(k, k)].conj();
        let mut x = vec![czero(); n];
        x[k] = Complex64::new(1.0, 0.0);
        for j in k + 1..n {
            let mut s = czero();
            for l in k..j {
                s += t[(l, j)].conj() * x[l];
            }
            x[j] = -s / guard(t[(j, j)].conj() - tkk, smin);
            if x[j].norm() > BIG {
                let scale = 1.0 / x[j].norm();
                for xl in x.iter_mut() {
                    *xl *= scale;
                }
            }
        }
        for (j, xj) in x.into_iter().enumerate() {
            w[(j, k)] = xj;
        }
    }
    w
}
