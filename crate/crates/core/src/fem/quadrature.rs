//! Quadrature on the reference triangle.
//!
//! Rules are collapsed Gauss–Legendre products (Duffy map of the square onto
//! the triangle). They are generated on demand, so any polynomial degree is
//! integrated exactly without tabulated coefficients.

use std::f64::consts::PI;

/// Quadrature rule on the reference triangle in barycentric coordinates.
/// Weights sum to one, so `|K| * sum(w f(x))` integrates over a triangle K.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub degree: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

/// Gauss–Legendre nodes and weights on [0, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

impl TriangleRule {
    /// A rule exact for polynomials of total degree `degree`.
    pub fn new(degree: usize) -> Self {
        // In collapsed coordinates the integrand gains one power of (1 - s).
        let n = (degree + 3) / 2;
        let (x, w) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (s, ws) in x.iter().zip(&w) {
            for (t, wt) in x.iter().zip(&w) {
                let l1 = *s;
                let l2 = t * (1.0 - s);
                points.push([1.0 - l1 - l2, l1, l2]);
                // reference area is 1/2; normalise to unit total weight
                weights.push(2.0 * ws * wt * (1.0 - s));
            }
        }
        Self { degree, points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
