use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use super::quadrature::TriangleRule;
use super::{FeSpace, FemError};

type ValueFn = Arc<dyn Fn([f64; 2]) -> Complex64 + Send + Sync>;
type GradientFn = Arc<dyn Fn([f64; 2]) -> [Complex64; 2] + Send + Sync>;

/// Analytic function together with its gradient.
#[derive(Clone)]
pub struct ExactFn {
    pub value: ValueFn,
    pub gradient: GradientFn,
}

impl fmt::Debug for ExactFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExactFn").finish_non_exhaustive()
    }
}

impl ExactFn {
    pub fn new(
        value: impl Fn([f64; 2]) -> Complex64 + Send + Sync + 'static,
        gradient: impl Fn([f64; 2]) -> [Complex64; 2] + Send + Sync + 'static,
    ) -> Self {
        Self { value: Arc::new(value), gradient: Arc::new(gradient) }
    }

    pub fn zero() -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self::new(move |_| z, move |_| [z, z])
    }

    pub fn eval(&self, x: [f64; 2]) -> (Complex64, [Complex64; 2]) {
        ((self.value)(x), (self.gradient)(x))
    }
}

/// A quadrature point of a triangulation with its physical weight.
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    pub triangle: usize,
    pub bary: [f64; 3],
    pub x: [f64; 2],
    pub weight: f64,
}

/// All quadrature points of the space's mesh for a rule of the given degree.
pub fn quadrature_points(space: &FeSpace, degree: usize) -> Vec<QuadPoint> {
    let rule = TriangleRule::new(degree);
    let mesh = space.mesh();
    let mut out = Vec::with_capacity(rule.len() * mesh.num_triangles());
    for t in 0..mesh.num_triangles() {
        let c = mesh.triangle_coords(t);
        let area = mesh.signed_area(t);
        for (bary, w) in rule.points.iter().zip(&rule.weights) {
            let x = [
                bary[0] * c[0][0] + bary[1] * c[1][0] + bary[2] * c[2][0],
                bary[0] * c[0][1] + bary[1] * c[1][1] + bary[2] * c[2][1],
            ];
            out.push(QuadPoint { triangle: t, bary: *bary, x, weight: w * area });
        }
    }
    out
}

/// `(‖u_h − u‖_b, ‖u_h − u‖_1)` by quadrature, with `b(v, v) = ∫|v|²` and the
/// full H1 norm `‖v‖_1² = ∫|∇v|² + |v|²`. `u_vec` may hold interior or all
/// DOFs.
pub fn error_norms(space: &FeSpace, u_vec: &[Complex64], exact: &ExactFn, quad_degree: usize) -> Result<(f64, f64), FemError> {
    let full = space.to_full(u_vec)?;
    let mut l2 = 0.0;
    let mut semi = 0.0;
    for q in quadrature_points(space, quad_degree) {
        let (uh, duh) = space.evaluate_with_gradient(&full, q.triangle, q.bary);
        let (u, du) = exact.eval(q.x);
        l2 += q.weight * (uh - u).norm_sqr();
        semi += q.weight * ((duh[0] - du[0]).norm_sqr() + (duh[1] - du[1]).norm_sqr());
    }
    Ok((l2.sqrt(), (l2 + semi).sqrt()))
}
