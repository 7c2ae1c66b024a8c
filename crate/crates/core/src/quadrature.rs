//! Quadrature rules over the phase-space plane.
//!
//! Two rules are provided: a tensor-product Gauss-Hermite rule in the
//! whitened coordinates of a Gaussian weight (exact for polynomial times
//! Gaussian integrands), and a midpoint rule on a square grid for arbitrary
//! integrands.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::gaussian::{CovarianceMatrix, PhasePoint};

/// Nodes and weights of the `n`-point Gauss-Hermite rule for the weight
/// `e^{-t²}` on the real line.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Nodes from the eigenvalues of the Jacobi matrix (Golub-Welsch),
    /// polished by Newton iteration; weights from the Christoffel formula
    /// `w = 1/(n p_{n-1}(t)²)` in log scale so that tiny outer weights keep
    /// full relative accuracy.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
        let jacobi = DMatrix::from_fn(n, n, |i, j| {
            if i + 1 == j || j + 1 == i {
                (i.max(j) as f64 / 2.0).sqrt()
            } else {
                0.0
            }
        });
        let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
        nodes.sort_by(f64::total_cmp);
        let nf = n as f64;
        let mut weights = Vec::with_capacity(n);
        for z in nodes.iter_mut() {
            for _ in 0..8 {
                let (pn, pn1, _) = scaled_hermite(n, *z);
                let dz = pn / ((2.0 * nf).sqrt() * pn1);
                *z -= dz;
                if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            let (_, pn1, log_scale) = scaled_hermite(n, *z);
            weights.push((-nf.ln() - 2.0 * (pn1.abs().ln() + log_scale)).exp());
        }
        // symmetrize against round-off
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let z = 0.5 * (nodes[j] - nodes[i]);
            let w = 0.5 * (weights[i] + weights[j]);
            nodes[i] = -z;
            nodes[j] = z;
            weights[i] = w;
            weights[j] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussHermite { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫ e^{-t²} f(t) dt`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }

    /// Nodes and weights for expectations under a 2-D normal distribution
    /// with the given mean and covariance: `E[f] ≈ Σ w_k f(ξ_k)`.
    pub fn normal_2d(&self, mean: PhasePoint, cov: &CovarianceMatrix) -> Vec<(PhasePoint, f64)> {
        // Cholesky factor L with L Lᵀ = V.
        let l11 = cov.vxx().sqrt();
        let l21 = cov.vxp() / l11;
        let l22 = (cov.vpp() - l21 * l21).max(0.0).sqrt();
        let scale = std::f64::consts::SQRT_2;
        let mut out = Vec::with_capacity(self.len() * self.len());
        for (&ti, &wi) in self.nodes.iter().zip(&self.weights) {
            let z1 = scale * ti;
            for (&tj, &wj) in self.nodes.iter().zip(&self.weights) {
                let z2 = scale * tj;
                out.push((
                    PhasePoint::new(mean.x + l11 * z1, mean.p + l21 * z1 + l22 * z2),
                    wi * wj / PI,
                ));
            }
        }
        out
    }
}

/// Orthonormal Hermite values `(p_n, p_{n-1})` scaled by `e^{-log_scale}`,
/// with `log_scale` returned alongside.
fn scaled_hermite(n: usize, z: f64) -> (f64, f64, f64) {
    const PIM4: f64 = 0.751_125_544_464_942_5; // π^{-1/4}
    const BIG: f64 = 1e100;
    let mut p = PIM4;
    let mut prev = 0.0;
    let mut log_scale = 0.0;
    for j in 0..n {
        let jf = j as f64;
        let next = z * (2.0 / (jf + 1.0)).sqrt() * p - (jf / (jf + 1.0)).sqrt() * prev;
        prev = p;
        p = next;
        if p.abs() > BIG {
            p /= BIG;
            prev /= BIG;
            log_scale += BIG.ln();
        }
    }
    (p, prev, log_scale)
}

/// Midpoint rule on the square `[cx − h, cx + h] × [cp − h, cp + h]` with
/// `nodes` cells per axis.
///
/// Rows are summed in a fixed order and combined pairwise so the result does
/// not depend on how rows are distributed.
pub fn midpoint_2d<F>(center: PhasePoint, half_width: f64, nodes: usize, f: F) -> f64
where
    F: Fn(PhasePoint) -> f64 + Sync,
{
    use rayon::prelude::*;
    let h = 2.0 * half_width / nodes as f64;
    let rows: Vec<f64> = (0..nodes)
        .into_par_iter()
        .map(|i| {
            let x = center.x - half_width + (i as f64 + 0.5) * h;
            let mut acc = 0.0;
            for j in 0..nodes {
                let p = center.p - half_width + (j as f64 + 0.5) * h;
                acc += f(PhasePoint::new(x, p));
            }
            acc
        })
        .collect();
    pairwise_sum(&rows) * h * h
}

/// Pairwise (cascade) summation.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n if n <= 8 => v.iter().sum(),
        n => {
            let (a, b) = v.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hermite_low_order_moments() {
        let gh = GaussHermite::new(10);
        assert_relative_eq!(gh.integrate(|_| 1.0), PI.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(gh.integrate(|x| x * x), PI.sqrt() / 2.0, epsilon = 1e-14);
        assert_relative_eq!(gh.integrate(|x| x.powi(4)), 0.75 * PI.sqrt(), epsilon = 1e-13);
        assert_relative_eq!(
            gh.integrate(|x| x.cos()),
            PI.sqrt() * (-0.25f64).exp(),
            epsilon = 1e-13
        );
    }

    #[test]
    fn hermite_large_rule_is_exact_for_high_degree() {
        // ∫ t^{2k} e^{-t²} = Γ(k + 1/2)
        let gh = GaussHermite::new(120);
        assert!(gh.nodes().windows(2).all(|w| w[0] < w[1]));
        let mut gamma = PI.sqrt();
        for k in 0..60 {
            let got = gh.integrate(|t| t.powi(2 * k));
            assert_relative_eq!(got, gamma, max_relative = 1e-10);
            gamma *= k as f64 + 0.5;
        }
    }

    #[test]
    fn normal_2d_expectations() {
        let cov = CovarianceMatrix::new(0.7, 0.2, 1.3).unwrap();
        let mean = PhasePoint::new(0.4, -1.0);
        let pts = GaussHermite::new(8).normal_2d(mean, &cov);
        let e = |f: &dyn Fn(PhasePoint) -> f64| pts.iter().map(|(q, w)| w * f(*q)).sum::<f64>();
        assert_relative_eq!(e(&|_| 1.0), 1.0, epsilon = 1e-14);
        assert_relative_eq!(e(&|q| q.x), 0.4, epsilon = 1e-14);
        assert_relative_eq!(e(&|q| (q.x - 0.4) * (q.p + 1.0)), 0.2, epsilon = 1e-14);
        assert_relative_eq!(e(&|q| (q.p + 1.0).powi(2)), 1.3, epsilon = 1e-14);
    }

    #[test]
    fn midpoint_gaussian_mass() {
        let f = |q: PhasePoint| (-q.norm_sqr()).exp() / PI;
        let m = midpoint_2d(PhasePoint::ORIGIN, 6.0, 128, f);
        assert_relative_eq!(m, 1.0, epsilon = 1e-12);
    }
}
