//! Model problems: `-Δu + b·∇u = λu` with constant `b` on the unit square
//! (known spectrum) and on the L-shape, plus a divergence-free rotating flow.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::fem::{Coefficients, ExactFn};

/// Reference first eigenvalue of the L-shape problem with `b = (1, 1/2)`.
/// The exact value is `5/16` plus the first Dirichlet Laplace eigenvalue
/// of the L-shape, `9.6397238440219…`, so this reference carries an error
/// of about `1.8e-4`.
pub const LSHAPE_REFERENCE: f64 = 9.95240442893276;

pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// The real convection vector `b = (1, 1/2)`.
pub fn real_b() -> [Complex64; 2] {
    [c64(1.0, 0.0), c64(0.5, 0.0)]
}

/// The complex convection vector `b = (1 + 2i, 1/2 − i)`.
pub fn complex_b() -> [Complex64; 2] {
    [c64(1.0, 2.0), c64(0.5, -1.0)]
}

/// `λ_{k,l} = (b₁² + b₂²)/4 + (k² + l²)π²` for constant `b` on the unit
/// square (the squares are complex squares, not moduli).
pub fn exact_eigenvalue(b: [Complex64; 2], k: usize, l: usize) -> Complex64 {
    (b[0] * b[0] + b[1] * b[1]) / 4.0 + ((k * k + l * l) as f64) * PI * PI
}

/// Mode pairs `(k, l)` of the first `count` eigenvalues in increasing order,
/// ties ordered by `k`.
pub fn mode_pairs(count: usize) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let lim = count + 1;
    for k in 1..=lim {
        for l in 1..=lim {
            pairs.push((k, l));
        }
    }
    pairs.sort_by_key(|&(k, l)| (k * k + l * l, k));
    pairs.truncate(count);
    pairs
}

/// Exact eigenvalues of the first `count` modes.
pub fn first_eigenvalues(b: [Complex64; 2], count: usize) -> Vec<Complex64> {
    mode_pairs(count).into_iter().map(|(k, l)| exact_eigenvalue(b, k, l)).collect()
}

/// `exp(β·x) sin(kπx) sin(lπy)` with its gradient.
fn modulated_sine(beta: [Complex64; 2], k: usize, l: usize) -> ExactFn {
    let (kp, lp) = (k as f64 * PI, l as f64 * PI);
    ExactFn::new(
        move |x| (beta[0] * x[0] + beta[1] * x[1]).exp() * ((kp * x[0]).sin() * (lp * x[1]).sin()),
        move |x| {
            let e = (beta[0] * x[0] + beta[1] * x[1]).exp();
            let (sx, cx) = (kp * x[0]).sin_cos();
            let (sy, cy) = (lp * x[1]).sin_cos();
            [e * (beta[0] * sx + kp * cx) * sy, e * sx * (beta[1] * sy + lp * cy)]
        },
    )
}

/// Primal eigenfunction `exp(b·x/2) sin(kπx) sin(lπy)`.
pub fn eigenfunction(b: [Complex64; 2], k: usize, l: usize) -> ExactFn {
    modulated_sine([b[0] / 2.0, b[1] / 2.0], k, l)
}

/// Adjoint eigenfunction `exp(−b̄·x/2) sin(kπx) sin(lπy)`.
pub fn adjoint_eigenfunction(b: [Complex64; 2], k: usize, l: usize) -> ExactFn {
    modulated_sine([-b[0].conj() / 2.0, -b[1].conj() / 2.0], k, l)
}

/// Coefficients for a constant convection vector.
pub fn square_coefficients(b: [Complex64; 2]) -> Coefficients {
    Coefficients::constant_convection(b)
}

/// Rotating field `b = (cos πx sin πy, −sin πx cos πy)`, divergence free.
pub fn rotating_field(x: [f64; 2]) -> [Complex64; 2] {
    let (sx, cx) = (PI * x[0]).sin_cos();
    let (sy, cy) = (PI * x[1]).sin_cos();
    [c64(cx * sy, 0.0), c64(-sx * cy, 0.0)]
}

/// Coefficients matching [`LSHAPE_REFERENCE`].
pub fn lshape_coefficients() -> Coefficients {
    square_coefficients(real_b())
}

pub fn rotating_coefficients() -> Coefficients {
    Coefficients::with_convection(rotating_field)
}
