//! Symmetrically ordered (Weyl) photon-number moments and g2(0).
//!
//! The symmetric number operator satisfies `n_W = (x² + p²)/2 = n + 1/2` and
//! `n_W² = (x² + p²)²/4 = n² + n + 1/2`, so both moments are plain phase-space
//! integrals against the Wigner function, and
//!
//! ```text
//! g2(0) = (<n_W²> − 2<n_W> + 1/2) / (<n_W> − 1/2)²
//! ```

use crate::error::{Error, Result};
use crate::format::fmt_sig;
use crate::gaussian::{GaussianState, PhasePoint};
use crate::quadrature::{midpoint_2d, pairwise_sum, GaussHermite};

/// Default near-vacuum guard on the mean photon number.
pub const DEFAULT_EPSILON: f64 = 1e-9;

/// Allowed normalization deficit of a numerically integrated Wigner function.
pub const NORMALIZATION_TOL: f64 = 1e-6;

/// Gauss-Hermite order used for evaluators that declare themselves Gaussian.
const GAUSSIAN_RULE_ORDER: usize = 16;

/// First and second symmetric-order moments `(<n_W>, <n_W²>)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeylMoments {
    pub nw: f64,
    pub nw2: f64,
}

impl WeylMoments {
    pub fn new(nw: f64, nw2: f64) -> Self {
        WeylMoments { nw, nw2 }
    }

    /// `<n> = <n_W> − 1/2`.
    pub fn mean_photon(&self) -> f64 {
        self.nw - 0.5
    }

    /// Moments of a photon-number distribution: `<n_W> = <n> + 1/2` and
    /// `<n_W²> = <n²> + <n> + 1/2`.
    pub fn from_photon_numbers(probs: &[f64]) -> Self {
        let n1 = pairwise_sum(&probs.iter().enumerate().map(|(n, p)| p * n as f64).collect::<Vec<_>>());
        let n2 = pairwise_sum(
            &probs
                .iter()
                .enumerate()
                .map(|(n, p)| p * (n * n) as f64)
                .collect::<Vec<_>>(),
        );
        WeylMoments {
            nw: n1 + 0.5,
            nw2: n2 + n1 + 0.5,
        }
    }
}

/// Midpoint grid for numerical moments: the square extends `half_width`
/// times the evaluator's largest standard deviation on each side of its
/// centre, with `nodes` cells per axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureGrid {
    half_width: f64,
    nodes: usize,
}

impl QuadratureGrid {
    pub fn new(half_width: f64, nodes: usize) -> Result<Self> {
        if !(half_width >= 6.0) || !half_width.is_finite() {
            return Err(Error::Domain(format!(
                "grid half-width must be >= 6 standard deviations, got {half_width}"
            )));
        }
        if nodes < 64 {
            return Err(Error::Domain(format!("grid needs >= 64 nodes per axis, got {nodes}")));
        }
        Ok(QuadratureGrid { half_width, nodes })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        QuadratureGrid {
            half_width: 8.0,
            nodes: 256,
        }
    }
}

/// Something that can be evaluated as a Wigner function.
pub trait PhaseSpaceDensity: Sync {
    fn density(&self, at: PhasePoint) -> f64;

    /// Centre of the region carrying the mass.
    fn center(&self) -> PhasePoint {
        PhasePoint::ORIGIN
    }

    /// Largest standard deviation; sets the scale of the integration grid.
    fn sigma(&self) -> f64;

    /// Evaluators that are Gaussian may expose their parameters so that
    /// integration can use a Gauss-Hermite rule in whitened coordinates.
    fn as_gaussian(&self) -> Option<GaussianState> {
        None
    }
}

impl PhaseSpaceDensity for GaussianState {
    fn density(&self, at: PhasePoint) -> f64 {
        self.wigner(at)
    }

    fn center(&self) -> PhasePoint {
        self.mean()
    }

    fn sigma(&self) -> f64 {
        self.max_sigma()
    }

    fn as_gaussian(&self) -> Option<GaussianState> {
        Some(*self)
    }
}

/// Wraps a closure as a [`PhaseSpaceDensity`] with a declared centre and
/// scale. Always integrated with the midpoint rule.
pub struct FnDensity<F> {
    f: F,
    center: PhasePoint,
    sigma: f64,
}

impl<F: Fn(PhasePoint) -> f64 + Sync> FnDensity<F> {
    pub fn new(f: F, center: PhasePoint, sigma: f64) -> Self {
        FnDensity { f, center, sigma }
    }
}

impl<F: Fn(PhasePoint) -> f64 + Sync> PhaseSpaceDensity for FnDensity<F> {
    fn density(&self, at: PhasePoint) -> f64 {
        (self.f)(at)
    }

    fn center(&self) -> PhasePoint {
        self.center
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Closed-form Weyl moments of a Gaussian state.
///
/// The covariance is first diagonalized; in principal axes with variances
/// `a`, `b` and mean `(x₀, p₀)`,
///
/// ```text
/// <n_W>  = ½ (x₀² + p₀² + a + b)
/// <n_W²> = ¼ (x₀⁴ + p₀⁴ + 2x₀²p₀² + 3a² + 3b² + 2ab + 2x₀²(b + 3a) + 2p₀²(a + 3b))
/// ```
pub fn weyl_moments_analytic(state: &GaussianState) -> WeylMoments {
    let (a, b, phi) = state.cov().principal_axes();
    let m = state.mean().rotated(phi);
    let x2 = m.x * m.x;
    let p2 = m.p * m.p;
    let nw = 0.5 * (x2 + p2 + a + b);
    let nw2 = 0.25
        * (x2 * x2
            + p2 * p2
            + 2.0 * x2 * p2
            + 3.0 * a * a
            + 3.0 * b * b
            + 2.0 * a * b
            + 2.0 * x2 * (b + 3.0 * a)
            + 2.0 * p2 * (a + 3.0 * b));
    WeylMoments { nw, nw2 }
}

/// Weyl moments by numerical integration of `½(x²+p²) W` and `¼(x²+p²)² W`.
///
/// Gaussian evaluators use a tensor Gauss-Hermite rule in whitened
/// coordinates; everything else uses the midpoint rule on `grid`. Fails if
/// the integrated density deviates from one by more than
/// [`NORMALIZATION_TOL`].
pub fn weyl_moments_numeric<D: PhaseSpaceDensity + ?Sized>(
    evaluator: &D,
    grid: &QuadratureGrid,
) -> Result<WeylMoments> {
    let (norm, m1, m2) = match evaluator.as_gaussian() {
        Some(g) => {
            let rule = GaussHermite::new(GAUSSIAN_RULE_ORDER);
            let pts = rule.normal_2d(g.mean(), &g.cov());
            let (mut z, mut s1, mut s2) = (0.0, 0.0, 0.0);
            for (q, w) in pts {
                // weight relative to the whitened normal density
                let ratio = evaluator.density(q) / g.wigner(q);
                let r2 = q.norm_sqr();
                z += w * ratio;
                s1 += w * ratio * 0.5 * r2;
                s2 += w * ratio * 0.25 * r2 * r2;
            }
            (z, s1, s2)
        }
        None => {
            let h = grid.half_width * evaluator.sigma();
            let c = evaluator.center();
            let n = grid.nodes;
            let z = midpoint_2d(c, h, n, |q| evaluator.density(q));
            let s1 = midpoint_2d(c, h, n, |q| 0.5 * q.norm_sqr() * evaluator.density(q));
            let s2 = midpoint_2d(c, h, n, |q| {
                let r2 = q.norm_sqr();
                0.25 * r2 * r2 * evaluator.density(q)
            });
            (z, s1, s2)
        }
    };
    let deficit = 1.0 - norm;
    if !(deficit.abs() <= NORMALIZATION_TOL) {
        return Err(Error::GridTooSmall { deficit });
    }
    Ok(WeylMoments { nw: m1, nw2: m2 })
}

/// g2(0) together with the mean photon number it was computed at.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct G2Value {
    pub value: f64,
    pub mean_photon: f64,
}

impl G2Value {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// `g2 = (nw2 − 2 nw + ½)/(nw − ½)²`.
///
/// Errors when the mean photon number falls below `epsilon`, where numerator
/// and denominator both vanish. With `epsilon = 0` the raw ratio is
/// returned, possibly non-finite.
pub fn g2_from_moments(m: WeylMoments, epsilon: f64) -> Result<G2Value> {
    let mean_photon = m.mean_photon();
    if mean_photon < epsilon || mean_photon.is_nan() {
        return Err(Error::NearVacuum { mean_photon, epsilon });
    }
    let value = (m.nw2 - 2.0 * m.nw + 0.5) / (mean_photon * mean_photon);
    Ok(G2Value { value, mean_photon })
}

/// g2(0) of a Gaussian state from its closed-form Weyl moments.
pub fn g2_gaussian(state: &GaussianState) -> Result<G2Value> {
    g2_gaussian_with(state, DEFAULT_EPSILON)
}

pub fn g2_gaussian_with(state: &GaussianState, epsilon: f64) -> Result<G2Value> {
    g2_from_moments(weyl_moments_analytic(state), epsilon)
}

/// One row of the coherent/thermal/squeezed comparison at equal mean photon
/// number.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fig1Row {
    pub n: f64,
    pub g2_coherent: f64,
    pub g2_thermal: f64,
    pub g2_squeezed: f64,
}

/// g2(0) of a coherent state, a thermal state and a pure squeezed vacuum
/// with mean photon number `n`, for each `n` in `n_grid`.
pub fn fig1_table(n_grid: &[f64]) -> Result<Vec<Fig1Row>> {
    n_grid
        .iter()
        .map(|&n| {
            if !(n > 0.0) || !n.is_finite() {
                return Err(Error::Domain(format!("mean photon number must be > 0, got {n}")));
            }
            let coh = GaussianState::coherent((2.0 * n).sqrt(), 0.0)?;
            let th = GaussianState::thermal(n)?;
            let sq = GaussianState::squeezed_vacuum_r(n.sqrt().asinh(), 0.0)?;
            Ok(Fig1Row {
                n,
                g2_coherent: g2_gaussian_with(&coh, 0.0)?.value,
                g2_thermal: g2_gaussian_with(&th, 0.0)?.value,
                g2_squeezed: g2_gaussian_with(&sq, 0.0)?.value,
            })
        })
        .collect()
}

pub const FIG1_HEADER: &str = "n,g2_coherent,g2_thermal,g2_squeezed";

/// CSV body (header plus rows) with 12 significant digits.
pub fn fig1_csv(rows: &[Fig1Row]) -> String {
    let mut out = String::from(FIG1_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_sig(r.n),
            fmt_sig(r.g2_coherent),
            fmt_sig(r.g2_thermal),
            fmt_sig(r.g2_squeezed)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn vacuum_and_coherent_moments() {
        let v = weyl_moments_analytic(&GaussianState::vacuum());
        assert_abs_diff_eq!(v.nw, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(v.nw2, 0.5, epsilon = 1e-15);

        let c = weyl_moments_analytic(&GaussianState::coherent(1.0, 1.0).unwrap());
        assert_abs_diff_eq!(c.nw, 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(c.nw2, 3.5, epsilon = 1e-14);
        assert_abs_diff_eq!(c.mean_photon(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn closed_form_moment_relations() {
        for nbar in [0.1, 1.0, 4.0] {
            let m = weyl_moments_analytic(&GaussianState::thermal(nbar).unwrap());
            assert_relative_eq!(m.nw2, 2.0 * m.nw * m.nw, max_relative = 1e-14);
        }
        for r in [0.1f64, 0.5, 1.2] {
            let m = weyl_moments_analytic(&GaussianState::squeezed_vacuum_r(r, 0.3).unwrap());
            assert_relative_eq!(m.nw, 0.5 * (2.0 * r).cosh(), max_relative = 1e-14);
            assert_relative_eq!(m.nw2, 3.0 * m.nw * m.nw - 0.25, max_relative = 1e-13);
        }
    }

    #[test]
    fn squeezed_moment_in_squeezing_ratio() {
        // s = e^{-r'}: <n_W> = (e^{r'} + e^{-r'})/4
        let rp = 0.8f64;
        let m = weyl_moments_analytic(&GaussianState::squeezed_vacuum((-rp).exp(), 0.0).unwrap());
        assert_relative_eq!(m.nw, 0.25 * (rp.exp() + (-rp).exp()), max_relative = 1e-15);
    }

    #[test]
    fn closed_form_g2() {
        for (x, p) in [(1.0, 0.0), (0.3, -2.0), (5.0, 5.0)] {
            let g = g2_gaussian(&GaussianState::coherent(x, p).unwrap()).unwrap();
            assert_relative_eq!(g.value, 1.0, max_relative = 1e-12);
        }
        let g = g2_gaussian(&GaussianState::thermal(0.3).unwrap()).unwrap();
        assert_relative_eq!(g.value, 2.0, max_relative = 1e-12);
        let sq = GaussianState::squeezed_vacuum_r(0.0115f64.sqrt().asinh(), 0.0).unwrap();
        let g = g2_gaussian(&sq).unwrap();
        assert_relative_eq!(g.value, 3.0 + 1.0 / 0.0115, max_relative = 1e-10);
        assert_abs_diff_eq!(g.value, 89.96, epsilon = 0.01);
    }

    #[test]
    fn near_vacuum_guard() {
        let err = g2_gaussian(&GaussianState::vacuum()).unwrap_err();
        assert!(matches!(err, Error::NearVacuum { .. }));
        let raw = g2_gaussian_with(&GaussianState::vacuum(), 0.0).unwrap();
        assert!(!raw.is_finite());
    }

    #[test]
    fn attenuated_squeezing_keeps_g2() {
        let sq = GaussianState::squeezed_vacuum(0.5, 0.0).unwrap();
        let g0 = g2_gaussian(&sq).unwrap().value;
        let g1 = g2_gaussian(&sq.attenuate(0.3).unwrap()).unwrap().value;
        assert_abs_diff_eq!(g0, g1, epsilon = 1e-10);
    }

    #[test]
    fn numeric_moments_match_analytic() {
        let grid = QuadratureGrid::default();
        let v = weyl_moments_numeric(&GaussianState::vacuum(), &grid).unwrap();
        assert_abs_diff_eq!(v.nw, 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(v.nw2, 0.5, epsilon = 1e-9);

        let t = GaussianState::thermal(2.0).unwrap();
        let a = weyl_moments_analytic(&t);
        let n = weyl_moments_numeric(&t, &grid).unwrap();
        assert_relative_eq!(n.nw, a.nw, max_relative = 1e-8);
        assert_relative_eq!(n.nw2, a.nw2, max_relative = 1e-8);

        // same state through the generic midpoint path
        let f = FnDensity::new(|q| t.wigner(q), PhasePoint::ORIGIN, t.max_sigma());
        let n = weyl_moments_numeric(&f, &grid).unwrap();
        assert_relative_eq!(n.nw, a.nw, max_relative = 1e-8);
        assert_relative_eq!(n.nw2, a.nw2, max_relative = 1e-8);
    }

    #[test]
    fn truncated_grid_is_reported() {
        // Declared scale of 1/3 puts the grid edge at |x| = 2 for a state
        // whose standard deviation is about 2.3.
        let t = GaussianState::thermal(5.0).unwrap();
        let f = FnDensity::new(|q| t.wigner(q), PhasePoint::ORIGIN, 1.0 / 3.0);
        let err = weyl_moments_numeric(&f, &QuadratureGrid::new(6.0, 64).unwrap()).unwrap_err();
        match err {
            Error::GridTooSmall { deficit } => assert!(deficit > 0.1),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn grid_invariants() {
        assert!(QuadratureGrid::new(5.9, 128).is_err());
        assert!(QuadratureGrid::new(8.0, 63).is_err());
        assert!(QuadratureGrid::new(6.0, 64).is_ok());
    }

    #[test]
    fn fig1_rows() {
        let rows = fig1_table(&[1.0, 0.5, 1e6]).unwrap();
        assert_relative_eq!(rows[0].g2_coherent, 1.0, max_relative = 1e-12);
        assert_relative_eq!(rows[0].g2_thermal, 2.0, max_relative = 1e-12);
        assert_relative_eq!(rows[0].g2_squeezed, 4.0, max_relative = 1e-12);
        assert_relative_eq!(rows[1].g2_squeezed, 5.0, max_relative = 1e-12);
        assert_relative_eq!(rows[2].g2_squeezed, 3.0, max_relative = 1e-5);
        assert!(fig1_table(&[0.0]).is_err());
        assert!(fig1_table(&[-1.0]).is_err());
        let csv = fig1_csv(&rows[..1]);
        assert_eq!(csv, "n,g2_coherent,g2_thermal,g2_squeezed\n1,1,2,4\n");
    }
}
