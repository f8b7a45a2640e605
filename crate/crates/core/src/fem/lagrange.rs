//! Lagrange basis of degree 1..=4 on a triangle, written in barycentric
//! coordinates.

/// Nodal lattice of the degree-p Lagrange element. Node `k` sits at the
/// barycentric point `lattice[k] / p`.
#[derive(Debug, Clone)]
pub struct LagrangeElement {
    pub degree: usize,
    pub lattice: Vec<[usize; 3]>,
}

/// One-dimensional factor P_i(t) = prod_{s<i} (p t - s) / (s + 1) and its
/// derivative.
fn factor(p: usize, i: usize, t: f64) -> (f64, f64) {
    let pf = p as f64;
    let mut value = 1.0;
    let mut deriv = 0.0;
    for s in 0..i {
        let a = (pf * t - s as f64) / (s + 1) as f64;
        let da = pf / (s + 1) as f64;
        deriv = deriv * a + value * da;
        value *= a;
    }
    (value, deriv)
}

impl LagrangeElement {
    pub fn new(degree: usize) -> Self {
        let p = degree;
        let mut lattice = vec![[p, 0, 0], [0, p, 0], [0, 0, p]];
        // edge e lies opposite local vertex e
        for s in 1..p {
            lattice.push([0, p - s, s]);
        }
        for s in 1..p {
            lattice.push([s, 0, p - s]);
        }
        for s in 1..p {
            lattice.push([p - s, s, 0]);
        }
        for i in 1..p {
            for j in 1..p - i {
                let k = p - i - j;
                if k >= 1 {
                    lattice.push([i, j, k]);
                }
            }
        }
        Self { degree, lattice }
    }

    pub fn num_nodes(&self) -> usize {
        self.lattice.len()
    }

    pub fn node_barycentric(&self, k: usize) -> [f64; 3] {
        let p = self.degree as f64;
        let [a, b, c] = self.lattice[k];
        [a as f64 / p, b as f64 / p, c as f64 / p]
    }

    /// Values of all basis functions at a barycentric point.
    pub fn values(&self, bary: [f64; 3]) -> Vec<f64> {
        self.lattice
            .iter()
            .map(|idx| (0..3).map(|v| factor(self.degree, idx[v], bary[v]).0).product())
            .collect()
    }

    /// Partial derivatives with respect to each barycentric coordinate
    /// (treated as independent variables).
    pub fn bary_derivatives(&self, bary: [f64; 3]) -> Vec<[f64; 3]> {
        self.lattice
            .iter()
            .map(|idx| {
                let f: Vec<(f64, f64)> = (0..3).map(|v| factor(self.degree, idx[v], bary[v])).collect();
                [
                    f[0].1 * f[1].0 * f[2].0,
                    f[0].0 * f[1].1 * f[2].0,
                    f[0].0 * f[1].0 * f[2].1,
                ]
            })
            .collect()
    }
}

/// Gradients of the three barycentric coordinates of a triangle.
pub fn barycentric_gradients([p0, p1, p2]: [[f64; 2]; 3]) -> [[f64; 2]; 3] {
    let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    let g1 = [(p2[1] - p0[1]) / det, -(p2[0] - p0[0]) / det];
    let g2 = [-(p1[1] - p0[1]) / det, (p1[0] - p0[0]) / det];
    [[-g1[0] - g2[0], -g1[1] - g2[1]], g1, g2]
}

pub fn lagrange_dimension(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_counts() {
        for p in 1..=4 {
            let e = LagrangeElement::new(p);
            assert_eq!(e.num_nodes(), lagrange_dimension(p));
            let mut sorted = e.lattice.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted.len(), e.num_nodes());
        }
    }

    #[test]
    fn nodal_basis_property() {
        for p in 1..=4 {
            let e = LagrangeElement::new(p);
            for k in 0..e.num_nodes() {
                let vals = e.values(e.node_barycentric(k));
                for (j, v) in vals.iter().enumerate() {
                    let expect = if j == k { 1.0 } else { 0.0 };
                    assert!((v - expect).abs() < 1e-12, "p={p} node {k} basis {j}: {v}");
                }
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let e = LagrangeElement::new(4);
        let b = [0.2, 0.3, 0.5];
        let d = e.bary_derivatives(b);
        let h = 1e-6;
        for v in 0..3 {
            let mut bp = b;
            let mut bm = b;
            bp[v] += h;
            bm[v] -= h;
            let (fp, fm) = (e.values(bp), e.values(bm));
            for k in 0..e.num_nodes() {
                let fd = (fp[k] - fm[k]) / (2.0 * h);
                assert!((fd - d[k][v]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn partition_of_unity() {
        for p in 1..=4 {
            let e = LagrangeElement::new(p);
            let s: f64 = e.values([0.1, 0.7, 0.2]).iter().sum();
            assert!((s - 1.0).abs() < 1e-13);
        }
    }
}
