//! Photon-number statistics of Gaussian states through Wigner overlaps with
//! Fock states, `p(n) = 2π ∫ W_ρ W_n dx dp`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::gaussian::{GaussianState, PhasePoint};
use crate::quadrature::{pairwise_sum, GaussHermite};

/// Quadrature round-off below this magnitude is clamped to zero.
const NEGATIVE_CLAMP: f64 = 1e-12;

/// `L_0(x), …, L_n(x)` by the three-term recurrence.
pub fn laguerre_sequence(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    if n >= 1 {
        out.push(1.0 - x);
    }
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - x) * out[k] - kf * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
    out
}

/// Wigner function of the Fock state `|n⟩`:
/// `(−1)ⁿ/π · e^{−(x²+p²)} · L_n(2(x²+p²))`.
pub fn fock_wigner(n: usize, at: PhasePoint) -> f64 {
    let r2 = at.norm_sqr();
    let l = laguerre_sequence(n, 2.0 * r2)[n];
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign / PI * (-r2).exp() * l
}

/// Photon-number probabilities `p(0..=n_max)` with the unaccounted mass.
#[derive(Clone, Debug, PartialEq)]
pub struct PhotonNumberDistribution {
    probs: Vec<f64>,
    tail_mass: f64,
}

impl PhotonNumberDistribution {
    /// Wraps explicit probabilities; the tail is whatever is missing from one.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Domain("distribution needs at least one entry".into()));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Domain("probabilities must be finite and non-negative".into()));
        }
        let tail_mass = 1.0 - pairwise_sum(&probs);
        Ok(PhotonNumberDistribution { probs, tail_mass })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// `Σ n p(n)`.
    pub fn mean(&self) -> f64 {
        pairwise_sum(&self.weighted(|n| n))
    }

    /// `Σ n(n−1) p(n)`.
    pub fn factorial_moment2(&self) -> f64 {
        pairwise_sum(&self.weighted(|n| n * (n - 1.0)))
    }

    /// Cumulative sums, used for inverse-CDF sampling.
    pub fn cdf(&self) -> Vec<f64> {
        self.probs
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect()
    }

    fn weighted(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| p * f(n as f64))
            .collect()
    }
}

/// Photon-number distribution of a Gaussian state up to `n_max`.
///
/// The product `W_ρ(ξ) e^{−|ξ|²}` is itself Gaussian, so each overlap is the
/// expectation of the polynomial `L_n(2|ξ|²)` under that Gaussian and a
/// Gauss-Hermite rule of order `n_max + 1` per axis integrates all of them
/// exactly. Fails with [`Error::Truncation`] when more than `tol` of the
/// probability lies above `n_max`.
pub fn photon_number_distribution(
    state: &GaussianState,
    n_max: usize,
    tol: f64,
) -> Result<PhotonNumberDistribution> {
    let cov = state.cov();
    let mu = state.mean();
    let (ixx, ixp, ipp) = cov.inverse();

    // precision of the product Gaussian: V⁻¹ + 2I
    let (axx, axp, app) = (ixx + 2.0, ixp, ipp + 2.0);
    let adet = axx * app - axp * axp;
    let (cxx, cxp, cpp) = (app / adet, -axp / adet, axx / adet);
    // centre C V⁻¹ μ
    let bx = ixx * mu.x + ixp * mu.p;
    let bp = ixp * mu.x + ipp * mu.p;
    let m = PhasePoint::new(cxx * bx + cxp * bp, cxp * bx + cpp * bp);

    // ∫ W_ρ e^{−|ξ|²} = exp(−½ μᵀ(V + I/2)⁻¹μ) / (2 √det(V + I/2))
    let (sxx, sxp, spp) = (cov.vxx() + 0.5, cov.vxp(), cov.vpp() + 0.5);
    let sdet = sxx * spp - sxp * sxp;
    let q = (spp * mu.x * mu.x - 2.0 * sxp * mu.x * mu.p + sxx * mu.p * mu.p) / sdet;
    let mass = (-0.5 * q).exp() / (2.0 * sdet.sqrt());

    let combined = crate::gaussian::CovarianceMatrix::new(cxx, cxp, cpp)?;
    let rule = GaussHermite::new(n_max + 1);
    let points = rule.normal_2d(m, &combined);

    let mut acc = vec![0.0; n_max + 1];
    for (xi, w) in &points {
        let l = laguerre_sequence(n_max, 2.0 * xi.norm_sqr());
        for (a, ln) in acc.iter_mut().zip(&l) {
            *a += w * ln;
        }
    }

    let mut probs = Vec::with_capacity(n_max + 1);
    for (n, e) in acc.into_iter().enumerate() {
        let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
        let mut p = 2.0 * sign * mass * e;
        if p < 0.0 {
            if p < -NEGATIVE_CLAMP {
                return Err(Error::Domain(format!(
                    "overlap quadrature gave p({n}) = {p:e}"
                )));
            }
            p = 0.0;
        }
        probs.push(p);
    }
    let tail_mass = 1.0 - pairwise_sum(&probs);
    if tail_mass > tol {
        return Err(Error::Truncation {
            tail_mass,
            tol,
            suggested_n_max: suggest_n_max(&probs, tol),
        });
    }
    Ok(PhotonNumberDistribution { probs, tail_mass })
}

/// Grows `n_max` until the tail drops below `tol`.
pub fn photon_number_distribution_auto(
    state: &GaussianState,
    tol: f64,
) -> Result<PhotonNumberDistribution> {
    let mut n_max = (4.0 * state.mean_photon()).ceil() as usize + 16;
    for _ in 0..16 {
        match photon_number_distribution(state, n_max, tol) {
            Err(Error::Truncation { suggested_n_max, .. }) => {
                n_max = suggested_n_max.max(n_max + 8);
            }
            other => return other,
        }
    }
    photon_number_distribution(state, n_max, tol)
}

/// Geometric extrapolation of the last even-step decay ratio.
fn suggest_n_max(probs: &[f64], tol: f64) -> usize {
    let n = probs.len() - 1;
    let fallback = 2 * n + 8;
    if n < 4 {
        return fallback;
    }
    let last = probs[n].max(probs[n - 1]);
    let prev = probs[n - 2].max(probs[n - 3]);
    if !(prev > 0.0 && last > 0.0) {
        return fallback;
    }
    let ratio = (last / prev).sqrt();
    if ratio >= 0.999 {
        return fallback;
    }
    // tail after k more steps ≈ last · ratio^k / (1 − ratio)
    let k = ((tol * (1.0 - ratio) / last).ln() / ratio.ln()).ceil().max(1.0);
    (n + k as usize + 2).min(100_000)
}

/// `g2 = Σ n(n−1) p(n) / (Σ n p(n))²`.
pub fn g2_from_pn(dist: &PhotonNumberDistribution) -> Result<f64> {
    let mean = dist.mean();
    if !(mean > 0.0) {
        return Err(Error::NearVacuum {
            mean_photon: mean,
            epsilon: 0.0,
        });
    }
    Ok(dist.factorial_moment2() / (mean * mean))
}
