use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

type MatrixField = Arc<dyn Fn([f64; 2]) -> [[Complex64; 2]; 2] + Send + Sync>;
type VectorField = Arc<dyn Fn([f64; 2]) -> [Complex64; 2] + Send + Sync>;
type ScalarField = Arc<dyn Fn([f64; 2]) -> Complex64 + Send + Sync>;
type WeightField = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;

/// Coefficients of `-div(A grad u) + b . grad u + phi u = lambda varphi u`.
///
/// `diffusion` should be Hermitian positive definite pointwise for the
/// problem to be elliptic; this is not enforced. `weight` must be strictly
/// positive, which assembly checks at every quadrature point.
#[derive(Clone)]
pub struct Coefficients {
    pub diffusion: MatrixField,
    pub convection: VectorField,
    pub reaction: ScalarField,
    pub weight: WeightField,
}

impl fmt::Debug for Coefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Coefficients").finish_non_exhaustive()
    }
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

impl Coefficients {
    /// `-Δu + b·∇u = λu` with a constant (possibly complex) convection vector.
    pub fn constant_convection(b: [Complex64; 2]) -> Self {
        Self::with_convection(move |_| b)
    }

    /// `-Δu + b(x)·∇u = λu`.
    pub fn with_convection(b: impl Fn([f64; 2]) -> [Complex64; 2] + Send + Sync + 'static) -> Self {
        Self {
            diffusion: Arc::new(|_| [[one(), zero()], [zero(), one()]]),
            convection: Arc::new(b),
            reaction: Arc::new(|_| zero()),
            weight: Arc::new(|_| 1.0),
        }
    }

    /// The Laplacian: A = I, b = 0, phi = 0, varphi = 1.
    pub fn laplace() -> Self {
        Self::constant_convection([zero(), zero()])
    }

    /// A = I, b = 0, phi = 1, varphi = 1: the operator matrix is the H1 Gram
    /// matrix.
    pub fn h1_inner_product() -> Self {
        let mut c = Self::laplace();
        c.reaction = Arc::new(|_| one());
        c
    }

    /// Only the convection term: A = 0, phi = 0, varphi = 1.
    pub fn convection_only(&self) -> Self {
        Self {
            diffusion: Arc::new(|_| [[zero(), zero()], [zero(), zero()]]),
            convection: Arc::clone(&self.convection),
            reaction: Arc::new(|_| zero()),
            weight: Arc::new(|_| 1.0),
        }
    }
}
