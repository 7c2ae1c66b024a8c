//! Single- and two-mode Gaussian states in phase space.
//!
//! Conventions used everywhere in this crate (ħ = 1):
//!
//! * `a = (x + i p) / √2`, so the vacuum has `Var(x) = Var(p) = 1/2`;
//! * Wigner functions integrate to one over the `(x, p)` plane;
//! * state overlaps carry the explicit factor, `Tr(ρ ρ') = 2π ∫ W W' dx dp`;
//! * a thermal state with mean photon number `n̄` has variances `n̄ + 1/2`;
//! * a squeezed vacuum with variance ratio `s` has principal variances
//!   `(s/2, 1/(2s))`, i.e. `s = e^{-2r}` for squeezing parameter `r`.
//!
//! With these choices the symmetric-order identities `n_W = n + 1/2`
//! and `n_W² = n² + n + 1/2` hold exactly and the closed forms
//! `g2 = 1, 2, 3 + 1/<n>` for coherent, thermal and squeezed light follow
//! from the Weyl moments without extra factors.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Quadrature variance of the vacuum.
pub const VACUUM_VARIANCE: f64 = 0.5;

/// Factor relating the phase-space integral of two Wigner functions to the
/// trace of the product of their density operators.
pub const OVERLAP_CONSTANT: f64 = 2.0 * PI;

/// Tolerance on `det V >= 1/4` accepted by [`GaussianState::new`].
pub const HEISENBERG_TOL: f64 = 1e-12;

/// Smallest determinant treated as invertible.
const MIN_DET: f64 = 1e-300;

/// A point `(x, p)` in phase space.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: f64,
    pub p: f64,
}

impl PhasePoint {
    pub const ORIGIN: PhasePoint = PhasePoint { x: 0.0, p: 0.0 };

    pub fn new(x: f64, p: f64) -> Self {
        PhasePoint { x, p }
    }

    /// Squared distance from the origin, `x² + p²`.
    pub fn norm_sqr(&self) -> f64 {
        self.x * self.x + self.p * self.p
    }

    /// Coordinates in a frame rotated by `angle`: the first component is
    /// `x cos θ + p sin θ`.
    pub fn rotated(&self, angle: f64) -> PhasePoint {
        let (s, c) = angle.sin_cos();
        PhasePoint {
            x: c * self.x + s * self.p,
            p: -s * self.x + c * self.p,
        }
    }
}

/// Symmetrized second central moments of `(x, p)`.
///
/// Only positive definiteness is enforced here. Sample covariances from
/// tomography may fall below the Heisenberg bound; that bound is checked by
/// [`GaussianState::new`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CovarianceMatrix {
    vxx: f64,
    vxp: f64,
    vpp: f64,
}

impl CovarianceMatrix {
    pub fn new(vxx: f64, vxp: f64, vpp: f64) -> Result<Self> {
        if !(vxx.is_finite() && vxp.is_finite() && vpp.is_finite()) {
            return domain("covariance entries must be finite");
        }
        let det = vxx * vpp - vxp * vxp;
        if vxx <= 0.0 || vpp <= 0.0 || det <= MIN_DET {
            return domain(format!(
                "covariance is not positive definite (vxx={vxx}, vxp={vxp}, vpp={vpp})"
            ));
        }
        Ok(CovarianceMatrix { vxx, vxp, vpp })
    }

    /// Vacuum covariance, `I/2`.
    pub fn vacuum() -> Self {
        CovarianceMatrix {
            vxx: VACUUM_VARIANCE,
            vxp: 0.0,
            vpp: VACUUM_VARIANCE,
        }
    }

    pub fn vxx(&self) -> f64 {
        self.vxx
    }

    pub fn vxp(&self) -> f64 {
        self.vxp
    }

    pub fn vpp(&self) -> f64 {
        self.vpp
    }

    pub fn det(&self) -> f64 {
        self.vxx * self.vpp - self.vxp * self.vxp
    }

    pub fn trace(&self) -> f64 {
        self.vxx + self.vpp
    }

    /// Inverse as `(ixx, ixp, ipp)`.
    pub fn inverse(&self) -> (f64, f64, f64) {
        let det = self.det();
        (self.vpp / det, -self.vxp / det, self.vxx / det)
    }

    /// Variance of `x cos θ + p sin θ`.
    pub fn rotated_variance(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        self.vxx * c * c + self.vpp * s * s + self.vxp * (2.0 * theta).sin()
    }

    /// Covariance of the state rotated by `angle` in phase space.
    pub fn rotated(&self, angle: f64) -> CovarianceMatrix {
        let (s, c) = angle.sin_cos();
        let r = Matrix2::new(c, -s, s, c);
        let v = r * self.to_matrix() * r.transpose();
        CovarianceMatrix {
            vxx: v[(0, 0)],
            vxp: 0.5 * (v[(0, 1)] + v[(1, 0)]),
            vpp: v[(1, 1)],
        }
    }

    /// Principal-axis decomposition `(a, b, φ)`: `a` is the variance along
    /// `(cos φ, sin φ)` and `b` the variance along the orthogonal axis.
    pub fn principal_axes(&self) -> (f64, f64, f64) {
        let phi = 0.5 * (2.0 * self.vxp).atan2(self.vxx - self.vpp);
        let a = self.rotated_variance(phi);
        let b = self.rotated_variance(phi + 0.5 * PI);
        (a, b, phi)
    }

    pub fn to_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.vxx, self.vxp, self.vxp, self.vpp)
    }

    pub(crate) fn from_parts_unchecked(vxx: f64, vxp: f64, vpp: f64) -> Self {
        CovarianceMatrix { vxx, vxp, vpp }
    }
}

/// A single-mode Gaussian state: mean `(x₀, p₀)` and covariance `V`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianState {
    mean: PhasePoint,
    cov: CovarianceMatrix,
}

impl GaussianState {
    /// Builds a state, rejecting non-finite means and covariances below the
    /// Heisenberg bound `det V >= 1/4`.
    pub fn new(mean: PhasePoint, cov: CovarianceMatrix) -> Result<Self> {
        if !(mean.x.is_finite() && mean.p.is_finite()) {
            return domain("mean must be finite");
        }
        if cov.det() < 0.25 - HEISENBERG_TOL {
            return domain(format!(
                "covariance violates the uncertainty bound: det V = {} < 1/4",
                cov.det()
            ));
        }
        Ok(GaussianState { mean, cov })
    }

    pub fn vacuum() -> Self {
        GaussianState {
            mean: PhasePoint::ORIGIN,
            cov: CovarianceMatrix::vacuum(),
        }
    }

    /// Displaced vacuum centred at `(x0, p0)`; mean photon number
    /// `(x0² + p0²)/2`.
    pub fn coherent(x0: f64, p0: f64) -> Result<Self> {
        GaussianState::new(PhasePoint::new(x0, p0), CovarianceMatrix::vacuum())
    }

    /// Thermal state with mean photon number `nbar`.
    pub fn thermal(nbar: f64) -> Result<Self> {
        if !(nbar >= 0.0) || !nbar.is_finite() {
            return domain(format!("thermal occupation must be >= 0, got {nbar}"));
        }
        let v = nbar + VACUUM_VARIANCE;
        Ok(GaussianState {
            mean: PhasePoint::ORIGIN,
            cov: CovarianceMatrix::from_parts_unchecked(v, 0.0, v),
        })
    }

    /// Pure squeezed vacuum with variance `s/2` along the axis at `angle`
    /// and `1/(2s)` along the orthogonal one.
    pub fn squeezed_vacuum(s: f64, angle: f64) -> Result<Self> {
        if !(s > 0.0) || !s.is_finite() {
            return domain(format!("squeezing ratio must be > 0, got {s}"));
        }
        let diag = CovarianceMatrix::from_parts_unchecked(0.5 * s, 0.0, 0.5 / s);
        Ok(GaussianState {
            mean: PhasePoint::ORIGIN,
            cov: diag.rotated(angle),
        })
    }

    /// Squeezed vacuum parametrized by the squeezing parameter `r >= 0`
    /// (`s = e^{-2r}`, mean photon number `sinh² r`).
    pub fn squeezed_vacuum_r(r: f64, angle: f64) -> Result<Self> {
        GaussianState::squeezed_vacuum((-2.0 * r).exp(), angle)
    }

    pub fn mean(&self) -> PhasePoint {
        self.mean
    }

    pub fn cov(&self) -> CovarianceMatrix {
        self.cov
    }

    /// Mean photon number `<n> = (x0² + p0² + vxx + vpp)/2 − 1/2`.
    pub fn mean_photon(&self) -> f64 {
        0.5 * (self.mean.norm_sqr() + self.cov.trace()) - 0.5
    }

    /// Wigner function at `at`:
    /// `(2π √det V)⁻¹ exp[−½ (ξ−ξ̄)ᵀ V⁻¹ (ξ−ξ̄)]`.
    pub fn wigner(&self, at: PhasePoint) -> f64 {
        let dx = at.x - self.mean.x;
        let dp = at.p - self.mean.p;
        let (ixx, ixp, ipp) = self.cov.inverse();
        let q = ixx * dx * dx + 2.0 * ixp * dx * dp + ipp * dp * dp;
        (-0.5 * q).exp() / (2.0 * PI * self.cov.det().sqrt())
    }

    /// Variance of the rotated quadrature `x_θ = x cos θ + p sin θ`.
    pub fn rotated_variance(&self, theta: f64) -> f64 {
        self.cov.rotated_variance(theta)
    }

    /// Mean and variance of the Gaussian marginal of `x_θ`.
    pub fn marginal(&self, theta: f64) -> (f64, f64) {
        let (s, c) = theta.sin_cos();
        (
            self.mean.x * c + self.mean.p * s,
            self.cov.rotated_variance(theta),
        )
    }

    pub fn displace(&self, dx: f64, dp: f64) -> GaussianState {
        GaussianState {
            mean: PhasePoint::new(self.mean.x + dx, self.mean.p + dp),
            cov: self.cov,
        }
    }

    /// Phase-space rotation by `angle` (a free phase shift of the mode).
    pub fn rotate(&self, angle: f64) -> GaussianState {
        let (s, c) = angle.sin_cos();
        GaussianState {
            mean: PhasePoint::new(c * self.mean.x - s * self.mean.p, s * self.mean.x + c * self.mean.p),
            cov: self.cov.rotated(angle),
        }
    }

    /// Pure-loss channel with transmissivity `eta`:
    /// mean → √η·mean, V → ηV + (1−η)I/2.
    pub fn attenuate(&self, eta: f64) -> Result<GaussianState> {
        if !(0.0..=1.0).contains(&eta) {
            return domain(format!("transmissivity must lie in [0, 1], got {eta}"));
        }
        let t = eta.sqrt();
        let mix = (1.0 - eta) * VACUUM_VARIANCE;
        Ok(GaussianState {
            mean: PhasePoint::new(t * self.mean.x, t * self.mean.p),
            cov: CovarianceMatrix::from_parts_unchecked(
                eta * self.cov.vxx + mix,
                eta * self.cov.vxp,
                eta * self.cov.vpp + mix,
            ),
        })
    }

    /// `Tr(ρ_a ρ_b) = det(V_a + V_b)^{-1/2} exp[−½ δᵀ (V_a + V_b)⁻¹ δ]`.
    pub fn overlap(&self, other: &GaussianState) -> f64 {
        let sxx = self.cov.vxx + other.cov.vxx;
        let sxp = self.cov.vxp + other.cov.vxp;
        let spp = self.cov.vpp + other.cov.vpp;
        let det = sxx * spp - sxp * sxp;
        let dx = self.mean.x - other.mean.x;
        let dp = self.mean.p - other.mean.p;
        let q = (spp * dx * dx - 2.0 * sxp * dx * dp + sxx * dp * dp) / det;
        (-0.5 * q).exp() / det.sqrt()
    }

    /// `Tr ρ² = 1/(2 √det V)`.
    pub fn purity(&self) -> f64 {
        0.5 / self.cov.det().sqrt()
    }

    /// Largest principal standard deviation.
    pub fn max_sigma(&self) -> f64 {
        let (a, b, _) = self.cov.principal_axes();
        a.max(b).sqrt()
    }
}

#[derive(Serialize, Deserialize)]
struct StateRepr {
    mean: [f64; 2],
    cov: [f64; 3],
}

impl Serialize for GaussianState {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        StateRepr {
            mean: [self.mean.x, self.mean.p],
            cov: [self.cov.vxx, self.cov.vxp, self.cov.vpp],
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for GaussianState {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let r = StateRepr::deserialize(de)?;
        CovarianceMatrix::new(r.cov[0], r.cov[1], r.cov[2])
            .and_then(|cov| GaussianState::new(PhasePoint::new(r.mean[0], r.mean[1]), cov))
            .map_err(serde::de::Error::custom)
    }
}

/// One of the two modes of a [`TwoModeGaussianState`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Signal, or the first output after mixing.
    One,
    /// Idler, or the second output after mixing.
    Two,
}

/// Two-mode Gaussian state with quadratures ordered `(x₁, p₁, x₂, p₂)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoModeGaussianState {
    mean: Vector4<f64>,
    cov: Matrix4<f64>,
}

impl TwoModeGaussianState {
    /// Validates symmetry, positive definiteness and `det V >= 1/16`.
    pub fn new(mean: [f64; 4], cov: Matrix4<f64>) -> Result<Self> {
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return domain("two-mode state entries must be finite");
        }
        let asym = (cov - cov.transpose()).abs().max();
        if asym > 1e-12 * cov.abs().max().max(1.0) {
            return domain("two-mode covariance is not symmetric");
        }
        if cov.cholesky().is_none() {
            return domain("two-mode covariance is not positive definite");
        }
        if cov.determinant() < 1.0 / 16.0 - HEISENBERG_TOL {
            return domain("two-mode covariance violates det V >= 1/16");
        }
        Ok(TwoModeGaussianState {
            mean: Vector4::from(mean),
            cov,
        })
    }

    /// Twin beam with squeezing `r`: each mode is thermal with `sinh² r`
    /// photons, `x` quadratures correlated and `p` anticorrelated.
    pub fn two_mode_squeezed_vacuum(r: f64) -> Result<Self> {
        if !(r >= 0.0) || !r.is_finite() {
            return domain(format!("two-mode squeezing must be >= 0, got {r}"));
        }
        let c = 0.5 * (2.0 * r).cosh();
        let s = 0.5 * (2.0 * r).sinh();
        #[rustfmt::skip]
        let cov = Matrix4::new(
            c,   0.0, s,   0.0,
            0.0, c,   0.0, -s,
            s,   0.0, c,   0.0,
            0.0, -s,  0.0, c,
        );
        Ok(TwoModeGaussianState {
            mean: Vector4::zeros(),
            cov,
        })
    }

    /// Passive mixing of the two modes by a half-wave plate at
    /// `theta_hwp_deg` degrees (mixing angle twice the plate angle):
    /// `a₁' = cos 2θ a₁ − sin 2θ a₂`, `a₂' = sin 2θ a₁ + cos 2θ a₂`.
    ///
    /// At 22.5° the twin beam splits into two squeezed vacua, the first
    /// squeezed along `x`.
    pub fn hwp_mix(&self, theta_hwp_deg: f64) -> TwoModeGaussianState {
        let (s, c) = (2.0 * theta_hwp_deg.to_radians()).sin_cos();
        #[rustfmt::skip]
        let m = Matrix4::new(
            c,   0.0, -s,  0.0,
            0.0, c,   0.0, -s,
            s,   0.0, c,   0.0,
            0.0, s,   0.0, c,
        );
        let cov = m * self.cov * m.transpose();
        TwoModeGaussianState {
            mean: m * self.mean,
            cov: 0.5 * (cov + cov.transpose()),
        }
    }

    /// Partial trace: the 2×2 principal block of `mode`.
    pub fn reduce(&self, mode: Mode) -> GaussianState {
        let o = match mode {
            Mode::One => 0,
            Mode::Two => 2,
        };
        GaussianState {
            mean: PhasePoint::new(self.mean[o], self.mean[o + 1]),
            cov: CovarianceMatrix::from_parts_unchecked(
                self.cov[(o, o)],
                0.5 * (self.cov[(o, o + 1)] + self.cov[(o + 1, o)]),
                self.cov[(o + 1, o + 1)],
            ),
        }
    }

    pub fn mean(&self) -> [f64; 4] {
        [self.mean[0], self.mean[1], self.mean[2], self.mean[3]]
    }

    pub fn cov(&self) -> &Matrix4<f64> {
        &self.cov
    }
}

const UPPER: [(usize, usize); 10] = [
    (0, 0),
    (0, 1),
    (0, 2),
    (0, 3),
    (1, 1),
    (1, 2),
    (1, 3),
    (2, 2),
    (2, 3),
    (3, 3),
];

#[derive(Serialize, Deserialize)]
struct TwoModeRepr {
    mean: [f64; 4],
    cov: [f64; 10],
}

impl Serialize for TwoModeGaussianState {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let mut cov = [0.0; 10];
        for (k, &(i, j)) in UPPER.iter().enumerate() {
            cov[k] = self.cov[(i, j)];
        }
        TwoModeRepr {
            mean: self.mean(),
            cov,
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for TwoModeGaussianState {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let r = TwoModeRepr::deserialize(de)?;
        let mut cov = Matrix4::zeros();
        for (k, &(i, j)) in UPPER.iter().enumerate() {
            cov[(i, j)] = r.cov[k];
            cov[(j, i)] = r.cov[k];
        }
        TwoModeGaussianState::new(r.mean, cov).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use approx::assert_abs_diff_eq;

    #[test]
    fn vacuum_definition() {
        let v = GaussianState::vacuum();
        assert_eq!(v.mean(), PhasePoint::ORIGIN);
        assert_eq!(v.cov().vxx(), 0.5);
        assert_eq!(v.cov().vpp(), 0.5);
        assert_eq!(v.cov().vxp(), 0.0);
        assert_abs_diff_eq!(v.purity(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.wigner(PhasePoint::ORIGIN), 1.0 / PI, epsilon = 1e-15);
    }

    #[test]
    fn coherent_and_thermal_constructors() {
        assert_eq!(GaussianState::coherent(0.0, 0.0).unwrap(), GaussianState::vacuum());
        let c = GaussianState::coherent(1.0, 2.0).unwrap();
        assert_eq!(c.mean(), PhasePoint::new(1.0, 2.0));
        assert_eq!(c.cov(), CovarianceMatrix::vacuum());

        assert_eq!(GaussianState::thermal(0.0).unwrap(), GaussianState::vacuum());
        let t = GaussianState::thermal(1.0).unwrap();
        assert_eq!(t.cov().vxx(), 1.5);
        assert_eq!(t.cov().vpp(), 1.5);
        assert!(matches!(GaussianState::thermal(-0.1), Err(Error::Domain(_))));
        assert!(GaussianState::thermal(f64::NAN).is_err());
    }

    #[test]
    fn squeezed_vacuum_constructor() {
        for angle in [0.0, 0.3, 2.0] {
            let s = GaussianState::squeezed_vacuum(1.0, angle).unwrap();
            assert_abs_diff_eq!(s.cov().vxx(), 0.5, epsilon = 1e-15);
            assert_abs_diff_eq!(s.cov().vxp(), 0.0, epsilon = 1e-15);
        }
        let s = GaussianState::squeezed_vacuum(0.5, 0.0).unwrap();
        assert_abs_diff_eq!(s.cov().vxx(), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(s.cov().vpp(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.cov().det(), 0.25, epsilon = 1e-15);
        let rotated = GaussianState::squeezed_vacuum(0.3, 0.7).unwrap();
        assert_abs_diff_eq!(rotated.cov().det(), 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(rotated.rotated_variance(0.7), 0.15, epsilon = 1e-14);
        assert!(GaussianState::squeezed_vacuum(0.0, 0.0).is_err());
        assert!(GaussianState::squeezed_vacuum(-1.0, 0.0).is_err());
    }

    #[test]
    fn wigner_peak_values() {
        let t = GaussianState::thermal(1.0).unwrap();
        assert_abs_diff_eq!(t.wigner(PhasePoint::ORIGIN), 1.0 / (3.0 * PI), epsilon = 1e-15);
        let c = GaussianState::coherent(2.0, 0.0).unwrap();
        assert_abs_diff_eq!(c.wigner(PhasePoint::new(2.0, 0.0)), 1.0 / PI, epsilon = 1e-15);
    }

    #[test]
    fn rotated_variance_and_marginals() {
        let v = GaussianState::vacuum();
        for th in [0.0, 0.4, 1.3, 3.0] {
            assert_abs_diff_eq!(v.rotated_variance(th), 0.5, epsilon = 1e-15);
        }
        let s = GaussianState::squeezed_vacuum(0.5, 0.0).unwrap();
        assert_abs_diff_eq!(s.rotated_variance(0.0), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(s.rotated_variance(PI / 4.0), 0.625, epsilon = 1e-15);

        assert_eq!(v.marginal(0.0), (0.0, 0.5));
        let (m, var) = GaussianState::coherent(1.0, 2.0).unwrap().marginal(PI / 2.0);
        assert_abs_diff_eq!(m, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(var, 0.5, epsilon = 1e-15);
        let (m, var) = GaussianState::thermal(1.0).unwrap().marginal(1.0);
        assert_abs_diff_eq!(m, 0.0);
        assert_abs_diff_eq!(var, 1.5, epsilon = 1e-15);
    }

    #[test]
    fn displacement() {
        let v = GaussianState::vacuum();
        assert_eq!(v.displace(1.0, 0.0), GaussianState::coherent(1.0, 0.0).unwrap());
        let s = GaussianState::squeezed_vacuum(0.3, 0.2).unwrap();
        let back = s.displace(0.7, -1.1).displace(-0.7, 1.1);
        assert_abs_diff_eq!(back.mean().x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(back.mean().p, 0.0, epsilon = 1e-15);
        assert_eq!(back.cov(), s.cov());
    }

    #[test]
    fn attenuation_limits() {
        let s = GaussianState::squeezed_vacuum(0.2, 0.4).unwrap().displace(1.0, -2.0);
        assert_eq!(s.attenuate(1.0).unwrap(), s);
        let gone = s.attenuate(0.0).unwrap();
        assert_eq!(gone, GaussianState::vacuum());
        assert!(s.attenuate(1.5).is_err());
        assert!(s.attenuate(-0.1).is_err());
    }

    #[test]
    fn overlap_and_purity() {
        let v = GaussianState::vacuum();
        assert_abs_diff_eq!(v.overlap(&v), 1.0, epsilon = 1e-15);
        let c = GaussianState::coherent(1.0, 0.0).unwrap();
        assert_abs_diff_eq!(v.overlap(&c), (-0.5f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(v.overlap(&c), 0.60653, epsilon = 1e-5);
        assert_abs_diff_eq!(GaussianState::thermal(1.0).unwrap().purity(), 1.0 / 3.0, epsilon = 1e-15);
        let mixed = GaussianState::squeezed_vacuum(0.25, 0.0)
            .unwrap()
            .attenuate(0.5)
            .unwrap();
        assert!(mixed.purity() < 1.0);
    }

    #[test]
    fn heisenberg_bound_is_enforced() {
        let cov = CovarianceMatrix::new(0.2, 0.0, 0.5).unwrap();
        assert!(GaussianState::new(PhasePoint::ORIGIN, cov).is_err());
        assert!(CovarianceMatrix::new(1.0, 2.0, 1.0).is_err());
        assert!(CovarianceMatrix::new(-1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn twin_beam_structure() {
        let z = TwoModeGaussianState::two_mode_squeezed_vacuum(0.0).unwrap();
        assert_eq!(z.reduce(Mode::One), GaussianState::vacuum());
        assert_eq!(z.reduce(Mode::Two), GaussianState::vacuum());
        assert!(TwoModeGaussianState::two_mode_squeezed_vacuum(-0.1).is_err());

        let t = TwoModeGaussianState::two_mode_squeezed_vacuum(0.5).unwrap();
        assert_abs_diff_eq!(t.cov()[(0, 0)], 0.77154, epsilon = 1e-5);
        assert_abs_diff_eq!(t.cov().determinant(), 1.0 / 16.0, epsilon = 1e-12);
        let expected = GaussianState::thermal(0.5f64.sinh().powi(2)).unwrap();
        for mode in [Mode::One, Mode::Two] {
            let red = t.reduce(mode);
            assert_abs_diff_eq!(red.cov().vxx(), expected.cov().vxx(), epsilon = 1e-14);
            assert_abs_diff_eq!(red.cov().vpp(), expected.cov().vpp(), epsilon = 1e-14);
            assert_abs_diff_eq!(red.cov().vxp(), 0.0);
        }
    }

    #[test]
    fn hwp_mixing() {
        let t = TwoModeGaussianState::two_mode_squeezed_vacuum(0.4).unwrap();
        assert_eq!(t.hwp_mix(0.0), t);
        let r = 0.2f64;
        let sq = TwoModeGaussianState::two_mode_squeezed_vacuum(r)
            .unwrap()
            .hwp_mix(22.5)
            .reduce(Mode::One);
        assert_abs_diff_eq!(sq.cov().vxx(), (-2.0 * r).exp() / 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(sq.cov().vpp(), (2.0 * r).exp() / 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(sq.cov().vxx(), 0.3352, epsilon = 1e-4);
        assert_abs_diff_eq!(sq.cov().vpp(), 0.7459, epsilon = 1e-4);
        assert_abs_diff_eq!(sq.cov().det(), 0.25, epsilon = 1e-14);
        for th in [0.0, 7.0, 13.0, 22.5, 40.0] {
            let red = t.hwp_mix(th).reduce(Mode::One);
            assert_abs_diff_eq!(red.cov().trace(), (0.8f64).cosh(), epsilon = 1e-14);
        }
    }

    #[test]
    fn json_layout() {
        let s = GaussianState::new(
            PhasePoint::new(1.0, -2.0),
            CovarianceMatrix::new(0.75, 0.1, 0.5).unwrap(),
        )
        .unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"mean":[1.0,-2.0],"cov":[0.75,0.1,0.5]}"#);
        let back: GaussianState = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<GaussianState>(r#"{"mean":[0,0],"cov":[0.1,0,0.1]}"#).is_err());

        let t = TwoModeGaussianState::two_mode_squeezed_vacuum(0.3).unwrap();
        let j = serde_json::to_value(&t).unwrap();
        assert_eq!(j["mean"].as_array().unwrap().len(), 4);
        assert_eq!(j["cov"].as_array().unwrap().len(), 10);
        let back: TwoModeGaussianState = serde_json::from_value(j).unwrap();
        assert_eq!(back, t);
    }
}
