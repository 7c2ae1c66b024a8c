//! Simulated homodyne detection and Gaussian state reconstruction.
//!
//! Quadrature samples `x_θ` are drawn from the rotated marginals of the
//! (loss-attenuated) state. The reconstruction fits the rotated-Gaussian
//! model `V(θ) = vxx cos²θ + vpp sin²θ + vxp sin 2θ` to the per-angle sample
//! variances by least squares, and the mean from `m(θ) = x₀ cos θ + p₀ sin θ`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal};
use rayon::prelude::*;

use crate::counting::{g2_estimate_clicks, simulate_hbt, CountingConfig, CountingRecord};
use crate::error::{Error, Result};
use crate::format::fmt_sig;
use crate::gaussian::{CovarianceMatrix, GaussianState, Mode, PhasePoint, TwoModeGaussianState};
use crate::moments::{g2_gaussian, g2_gaussian_with, DEFAULT_EPSILON};
use crate::rng::{substream, Purpose};

/// Bootstrap resamples per reconstruction.
pub const BOOTSTRAP_SIZE: usize = 200;

/// Histogram bins per angle used to draw bootstrap resamples.
const BOOTSTRAP_BINS: usize = 512;

/// Angles closer than this (mod π) count as the same setting.
const ANGLE_TOL: f64 = 1e-9;

/// `count` local-oscillator phases spread uniformly over `[0, π)`.
pub fn uniform_angles(count: usize) -> Vec<f64> {
    (0..count).map(|k| PI * k as f64 / count as f64).collect()
}

/// Quadrature samples grouped by local-oscillator phase.
#[derive(Clone, Debug, PartialEq)]
pub struct HomodyneDataset {
    pub angles: Vec<f64>,
    pub samples: Vec<Vec<f64>>,
    pub seed: u64,
    pub eta: f64,
}

impl HomodyneDataset {
    /// Flat `(θ, x)` records in angle order.
    pub fn records(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.angles
            .iter()
            .zip(&self.samples)
            .flat_map(|(&t, xs)| xs.iter().map(move |&x| (t, x)))
    }

    pub fn per_angle_counts(&self) -> Vec<usize> {
        self.samples.iter().map(Vec::len).collect()
    }

    /// `theta_rad,x` CSV with a `# seed=…, eta=…` comment header. Values
    /// are written in shortest round-trip form so a reloaded dataset
    /// reconstructs bit-identically.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# seed={}, eta={}\ntheta_rad,x\n", self.seed, fmt_sig(self.eta));
        for (t, x) in self.records() {
            let _ = writeln!(out, "{t},{x}");
        }
        out
    }

    /// Parses the format written by [`HomodyneDataset::to_csv`]. Records
    /// with equal angles are grouped in order of first appearance.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut seed = 0;
        let mut eta = 1.0;
        let mut angles: Vec<f64> = Vec::new();
        let mut samples: Vec<Vec<f64>> = Vec::new();
        let mut header_seen = false;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                for part in comment.split(',') {
                    if let Some((k, v)) = part.split_once('=') {
                        match k.trim() {
                            "seed" => seed = v.trim().parse().map_err(|_| bad_line(i, line))?,
                            "eta" => eta = v.trim().parse().map_err(|_| bad_line(i, line))?,
                            _ => {}
                        }
                    }
                }
                continue;
            }
            if !header_seen {
                if line != "theta_rad,x" {
                    return Err(Error::Usage(format!("expected header theta_rad,x, got {line:?}")));
                }
                header_seen = true;
                continue;
            }
            let (t, x) = line.split_once(',').ok_or_else(|| bad_line(i, line))?;
            let t: f64 = t.trim().parse().map_err(|_| bad_line(i, line))?;
            let x: f64 = x.trim().parse().map_err(|_| bad_line(i, line))?;
            match angles.iter().position(|&a| a == t) {
                Some(k) => samples[k].push(x),
                None => {
                    angles.push(t);
                    samples.push(vec![x]);
                }
            }
        }
        Ok(HomodyneDataset { angles, samples, seed, eta })
    }
}

fn bad_line(i: usize, line: &str) -> Error {
    Error::Usage(format!("homodyne file line {}: cannot parse {line:?}", i + 1))
}

/// Draws `per_angle` samples of `x_θ` at each angle from the state after a
/// pure loss of transmissivity `eta_hd`.
pub fn simulate_homodyne(
    state: &GaussianState,
    angles: &[f64],
    per_angle: usize,
    eta_hd: f64,
    seed: u64,
) -> Result<HomodyneDataset> {
    if angles.is_empty() {
        return Err(Error::Domain("at least one angle is required".into()));
    }
    if let Some(a) = angles.iter().find(|a| !(0.0..PI).contains(*a)) {
        return Err(Error::Domain(format!("angles must lie in [0, π), got {a}")));
    }
    if per_angle < 2 {
        return Err(Error::Domain("need at least two samples per angle".into()));
    }
    let detected = state.attenuate(eta_hd)?;
    let samples = angles
        .par_iter()
        .enumerate()
        .map(|(k, &theta)| {
            let (m, v) = detected.marginal(theta);
            let normal = Normal::new(m, v.sqrt()).expect("finite marginal");
            let mut rng = substream(seed, Purpose::Homodyne, k as u64);
            (0..per_angle).map(|_| normal.sample(&mut rng)).collect()
        })
        .collect();
    Ok(HomodyneDataset {
        angles: angles.to_vec(),
        samples,
        seed,
        eta: eta_hd,
    })
}

/// Per-angle sample moments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AngleMoments {
    pub theta: f64,
    pub count: f64,
    pub mean: f64,
    pub variance: f64,
}

impl AngleMoments {
    fn from_sums(theta: f64, n: f64, s1: f64, s2: f64) -> Self {
        let mean = s1 / n;
        let variance = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
        AngleMoments { theta, count: n, mean, variance }
    }

    fn from_samples(theta: f64, xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let variance = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        AngleMoments { theta, count: n, mean, variance }
    }
}

/// Estimated Gaussian state with diagnostics and bootstrap replicas.
#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionResult {
    /// Estimate after the physicality projection.
    pub state: GaussianState,
    /// Least-squares covariance before projection.
    pub raw_cov: CovarianceMatrix,
    pub mean: PhasePoint,
    pub per_angle: Vec<AngleMoments>,
    /// Norm of the variance-fit residual.
    pub residual_norm: f64,
    /// Projected bootstrap estimates.
    pub bootstrap: Vec<GaussianState>,
    /// Bootstrap `(mean, covariance)` fits before projection.
    pub bootstrap_raw: Vec<(PhasePoint, CovarianceMatrix)>,
    /// Bootstrap members whose covariance estimate was not positive definite.
    pub bootstrap_failures: usize,
}

/// Fits `(vxx, vpp, vxp)` and `(x₀, p₀)` to per-angle moments.
///
/// Returns the raw covariance, mean and variance residual norm.
pub fn fit_moments(moments: &[AngleMoments]) -> Result<(CovarianceMatrix, PhasePoint, f64)> {
    let distinct = distinct_angles(moments.iter().map(|m| m.theta));
    let full = match distinct.len() {
        0 | 1 => {
            return Err(Error::Identifiability(format!(
                "{} distinct angle(s); need three, or two orthogonal ones",
                distinct.len()
            )))
        }
        2 => {
            let d = (distinct[1] - distinct[0]).rem_euclid(PI);
            if (d - PI / 2.0).abs() > ANGLE_TOL {
                return Err(Error::Identifiability(
                    "two angles must be orthogonal (vxp is then fixed to zero)".into(),
                ));
            }
            false
        }
        _ => true,
    };

    let cols = if full { 3 } else { 2 };
    let n = moments.len();
    let mut a = DMatrix::zeros(n, cols);
    let mut y = DVector::zeros(n);
    let mut am = DMatrix::zeros(n, 2);
    let mut ym = DVector::zeros(n);
    for (i, m) in moments.iter().enumerate() {
        let (s, c) = m.theta.sin_cos();
        a[(i, 0)] = c * c;
        a[(i, 1)] = s * s;
        if full {
            a[(i, 2)] = (2.0 * m.theta).sin();
        }
        y[i] = m.variance;
        am[(i, 0)] = c;
        am[(i, 1)] = s;
        ym[i] = m.mean;
    }
    let v = least_squares(&a, &y)?;
    let mu = least_squares(&am, &ym)?;
    let residual_norm = (&a * &v - &y).norm();
    let vxp = if full { v[2] } else { 0.0 };
    let cov = CovarianceMatrix::new(v[0], vxp, v[1]).map_err(|_| {
        Error::Inconsistent(format!(
            "fitted covariance is not positive definite (vxx={}, vxp={vxp}, vpp={})",
            v[0], v[1]
        ))
    })?;
    Ok((cov, PhasePoint::new(mu[0], mu[1]), residual_norm))
}

fn least_squares(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::Identifiability("rank-deficient angle design".into()));
    }
    svd.solve(y, 0.0)
        .map_err(|e| Error::Identifiability(e.to_string()))
}

fn distinct_angles(angles: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for t in angles {
        let t = t.rem_euclid(PI);
        let same = |u: &f64| {
            let d = (t - u).rem_euclid(PI);
            d < ANGLE_TOL || PI - d < ANGLE_TOL
        };
        if !out.iter().any(same) {
            out.push(t);
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Restores `det V = 1/4` for covariances that violate the uncertainty
/// bound; physical covariances are returned unchanged.
///
/// The anisotropic part `V − (tr V/2) I` is stretched until the bound is
/// met, keeping the trace (hence the mean photon number) and the principal
/// axes. When the trace is below that of the vacuum no such stretch exists
/// and `V` is instead scaled by the smallest common factor.
pub fn project_physical(cov: &CovarianceMatrix) -> CovarianceMatrix {
    let det = cov.det();
    if det >= 0.25 {
        return *cov;
    }
    let half_trace = 0.5 * cov.trace();
    let dev_sq = (0.5 * (cov.vxx() - cov.vpp())).powi(2) + cov.vxp().powi(2);
    let scaled = if half_trace >= 0.5 && dev_sq > 0.0 {
        let k = ((half_trace * half_trace - 0.25) / dev_sq).sqrt();
        CovarianceMatrix::new(
            half_trace + k * (cov.vxx() - half_trace),
            k * cov.vxp(),
            half_trace + k * (cov.vpp() - half_trace),
        )
    } else {
        let k = (0.25 / det).sqrt();
        CovarianceMatrix::new(k * cov.vxx(), k * cov.vxp(), k * cov.vpp())
    };
    let out = scaled.expect("projection preserves positive definiteness");
    // round-off can leave det a hair below 1/4; nudge the trace up
    if out.det() < 0.25 {
        let k = (0.25 / out.det()).sqrt();
        return CovarianceMatrix::new(k * out.vxx(), k * out.vxp(), k * out.vpp())
            .expect("scaling preserves positive definiteness");
    }
    out
}

fn projected_state(cov: &CovarianceMatrix, mean: PhasePoint) -> GaussianState {
    let proj = project_physical(cov);
    GaussianState::new(mean, proj).expect("projected covariance satisfies the bound")
}

/// Per-angle histogram of samples: `(count, Σx, Σx²)` per occupied bin.
struct BinnedAngle {
    theta: f64,
    total: u64,
    bins: Vec<(u64, f64, f64)>,
}

impl BinnedAngle {
    fn new(theta: f64, xs: &[f64]) -> Self {
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = ((hi - lo) / BOOTSTRAP_BINS as f64).max(f64::MIN_POSITIVE);
        let mut bins = vec![(0u64, 0.0, 0.0); BOOTSTRAP_BINS];
        for &x in xs {
            let k = (((x - lo) / width) as usize).min(BOOTSTRAP_BINS - 1);
            let b = &mut bins[k];
            b.0 += 1;
            b.1 += x;
            b.2 += x * x;
        }
        bins.retain(|b| b.0 > 0);
        BinnedAngle { theta, total: xs.len() as u64, bins }
    }

    /// Moments of a resample of `total` draws. Draws land in bins by a
    /// multinomial over bin occupancies; each draw carries its bin's mean
    /// `x` and `x²` (exact whenever a bin holds a single sample).
    fn resample<R: Rng>(&self, rng: &mut R) -> AngleMoments {
        let mut left = self.total;
        let mut mass_left = self.total as f64;
        let (mut s1, mut s2) = (0.0, 0.0);
        for (i, &(c, b1, b2)) in self.bins.iter().enumerate() {
            if left == 0 {
                break;
            }
            let k = if i + 1 == self.bins.len() {
                left
            } else {
                let p = (c as f64 / mass_left).clamp(0.0, 1.0);
                Binomial::new(left, p).expect("valid binomial").sample(rng)
            };
            let w = k as f64 / c as f64;
            s1 += w * b1;
            s2 += w * b2;
            left -= k;
            mass_left -= c as f64;
        }
        AngleMoments::from_sums(self.theta, self.total as f64, s1, s2)
    }
}

/// Least-squares Gaussian reconstruction with [`BOOTSTRAP_SIZE`] bootstrap
/// replicas (samples resampled independently within each angle).
pub fn estimate_covariance(data: &HomodyneDataset) -> Result<ReconstructionResult> {
    if data.angles.len() != data.samples.len() {
        return Err(Error::Domain("angles and sample groups differ in length".into()));
    }
    if data.samples.iter().any(|s| s.len() < 2) {
        return Err(Error::Domain("need at least two samples per angle".into()));
    }
    let per_angle: Vec<AngleMoments> = data
        .angles
        .iter()
        .zip(&data.samples)
        .map(|(&t, xs)| AngleMoments::from_samples(t, xs))
        .collect();
    let (raw_cov, mean, residual_norm) = fit_moments(&per_angle)?;
    let state = projected_state(&raw_cov, mean);

    let binned: Vec<BinnedAngle> = data
        .angles
        .iter()
        .zip(&data.samples)
        .map(|(&t, xs)| BinnedAngle::new(t, xs))
        .collect();
    let replicas: Vec<Option<(PhasePoint, CovarianceMatrix)>> = (0..BOOTSTRAP_SIZE)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(data.seed, Purpose::Bootstrap, (1 << 40) | i as u64);
            let m: Vec<AngleMoments> = binned.iter().map(|b| b.resample(&mut rng)).collect();
            fit_moments(&m).ok().map(|(c, mu, _)| (mu, c))
        })
        .collect();
    let bootstrap_failures = replicas.iter().filter(|r| r.is_none()).count();
    let bootstrap_raw: Vec<(PhasePoint, CovarianceMatrix)> = replicas.into_iter().flatten().collect();
    let bootstrap = bootstrap_raw.iter().map(|(mu, c)| projected_state(c, *mu)).collect();

    Ok(ReconstructionResult {
        state,
        raw_cov,
        mean,
        per_angle,
        residual_norm,
        bootstrap,
        bootstrap_raw,
        bootstrap_failures,
    })
}

/// Point value and 95% bootstrap interval of the inferred g2(0).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct G2Interval {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Bootstrap members rejected by the near-vacuum guard (or failed fits).
    pub guarded: usize,
    pub members: usize,
}

impl G2Interval {
    pub fn width(&self) -> f64 {
        self.ci_high - self.ci_low
    }

    pub fn contains(&self, g2: f64) -> bool {
        self.ci_low <= g2 && g2 <= self.ci_high
    }
}

/// g2(0) of the reconstructed state with a 95% basic bootstrap interval
/// `[2ĝ − q₉₇.₅, 2ĝ − q₂.₅]`, where `q` are percentiles of the bootstrap g2
/// values.
///
/// The reflection corrects the bias a plain percentile interval inherits
/// near a boundary: a zero-mean isotropic state (g2 = 2) is always
/// estimated slightly anisotropic, so every bootstrap g2 exceeds 2.
///
/// Fails with [`Error::UnstableInference`] when the point estimate or the
/// majority of bootstrap members sits below the near-vacuum guard.
pub fn g2_from_reconstruction(rec: &ReconstructionResult) -> Result<G2Interval> {
    let members = rec.bootstrap.len() + rec.bootstrap_failures;
    let mut values: Vec<f64> = rec
        .bootstrap
        .iter()
        .filter_map(|s| g2_gaussian_with(s, DEFAULT_EPSILON).ok())
        .map(|g| g.value)
        .collect();
    let guarded = members - values.len();
    let point = g2_gaussian(&rec.state);
    if guarded * 2 > members || point.is_err() || values.len() < 2 {
        return Err(Error::UnstableInference {
            guarded: guarded + point.is_err() as usize,
            total: members + 1,
        });
    }
    values.sort_by(f64::total_cmp);
    let value = point?.value;
    let (q_low, q_high) = (percentile(&values, 0.025), percentile(&values, 0.975));
    Ok(G2Interval {
        value,
        ci_low: 2.0 * value - q_high,
        ci_high: 2.0 * value - q_low,
        guarded,
        members,
    })
}

/// Bootstrap percentile of sorted replicates: the `(B + 1)·q`-th order
/// statistic, interpolated linearly and clamped to the sample range.
///
/// The k-th of B order statistics sits at quantile `k/(B + 1)` on average,
/// so this reads tail quantiles without the inward bias of the `(B − 1)·q`
/// convention (which puts a 2.5% tail of 200 replicates at ≈3%).
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let h = ((n + 1) as f64 * q).clamp(1.0, n as f64);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo - 1] + (h - lo as f64) * (sorted[hi - 1] - sorted[lo - 1])
}

/// Settings of the simulated homodyne arm.
#[derive(Clone, Debug, PartialEq)]
pub struct HomodyneParams {
    pub n_angles: usize,
    pub per_angle: usize,
    pub eta_hd: f64,
    pub seed: u64,
}

impl Default for HomodyneParams {
    fn default() -> Self {
        HomodyneParams {
            n_angles: 12,
            per_angle: 100_000,
            eta_hd: 1.0,
            seed: 0,
        }
    }
}

impl HomodyneParams {
    pub fn to_key_values(&self) -> Vec<(&'static str, String)> {
        vec![
            ("n_angles", self.n_angles.to_string()),
            ("per_angle", self.per_angle.to_string()),
            ("eta_hd", fmt_sig(self.eta_hd)),
            ("hd_seed", self.seed.to_string()),
        ]
    }

    pub fn apply_key_values(&mut self, kv: &std::collections::BTreeMap<String, String>) -> Result<()> {
        fn parse<T: std::str::FromStr>(k: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Usage(format!("invalid value for {k}: {v:?}")))
        }
        for (k, v) in kv {
            match k.as_str() {
                "n_angles" => self.n_angles = parse(k, v)?,
                "per_angle" => self.per_angle = parse::<f64>(k, v)? as usize,
                "eta_hd" => self.eta_hd = parse(k, v)?,
                "hd_seed" => self.seed = parse(k, v)?,
                _ => {}
            }
        }
        Ok(())
    }
}

/// One wave-plate setting of the sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub theta_deg: f64,
    pub g2_analytic: f64,
    pub g2_direct: f64,
    pub g2_direct_err: f64,
    /// Homodyne-inferred g2; NaN when the inference was unstable.
    pub g2_homodyne: f64,
    pub g2_ci_low: f64,
    pub g2_ci_high: f64,
    /// Reconstructed (raw) quadrature variances.
    pub vx: f64,
    pub vp: f64,
    pub counting: CountingRecord,
    pub reconstruction: ReconstructionResult,
}

/// Derives a per-row seed so each wave-plate setting gets its own streams.
pub fn row_seed(seed: u64, row: usize) -> u64 {
    seed.wrapping_add((row as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Signal-side output of the twin beam after the half-wave plate.
pub fn hwp_output(r: f64, theta_deg: f64) -> Result<GaussianState> {
    Ok(TwoModeGaussianState::two_mode_squeezed_vacuum(r)?
        .hwp_mix(theta_deg)
        .reduce(Mode::One))
}

/// Runs the analytic, direct-counting and homodyne routes for each
/// wave-plate angle.
pub fn hwp_sweep(
    r: f64,
    thetas_deg: &[f64],
    counting: &CountingConfig,
    homodyne: &HomodyneParams,
) -> Result<Vec<SweepRow>> {
    let angles = uniform_angles(homodyne.n_angles);
    thetas_deg
        .iter()
        .enumerate()
        .map(|(i, &theta)| {
            let state = hwp_output(r, theta)?;
            let g2_analytic = g2_gaussian(&state)?.value;

            let cfg = CountingConfig {
                seed: row_seed(counting.seed, i),
                ..counting.clone()
            };
            let rec = simulate_hbt(&state, &cfg)?;
            let (g2_direct, g2_direct_err) = g2_estimate_clicks(&rec).unwrap_or((f64::NAN, f64::NAN));

            let data = simulate_homodyne(
                &state,
                &angles,
                homodyne.per_angle,
                homodyne.eta_hd,
                row_seed(homodyne.seed, i),
            )?;
            let recon = estimate_covariance(&data)?;
            let (g2_homodyne, g2_ci_low, g2_ci_high) = match g2_from_reconstruction(&recon) {
                Ok(iv) => (iv.value, iv.ci_low, iv.ci_high),
                Err(Error::UnstableInference { .. }) => (f64::NAN, f64::NAN, f64::NAN),
                Err(e) => return Err(e),
            };
            Ok(SweepRow {
                theta_deg: theta,
                g2_analytic,
                g2_direct,
                g2_direct_err,
                g2_homodyne,
                g2_ci_low,
                g2_ci_high,
                vx: recon.raw_cov.vxx(),
                vp: recon.raw_cov.vpp(),
                counting: rec,
                reconstruction: recon,
            })
        })
        .collect()
}

pub const SWEEP_HEADER: &str =
    "theta_deg,g2_analytic,g2_direct,g2_direct_err,g2_homodyne,g2_ci_low,g2_ci_high,vx,vp";

pub fn sweep_csv_row(row: &SweepRow) -> String {
    [
        row.theta_deg,
        row.g2_analytic,
        row.g2_direct,
        row.g2_direct_err,
        row.g2_homodyne,
        row.g2_ci_low,
        row.g2_ci_high,
        row.vx,
        row.vp,
    ]
    .iter()
    .map(|&v| fmt_sig(v))
    .collect::<Vec<_>>()
    .join(",")
}

/// Closed form of the sweep: `2 + sin²(4θ)(1 + 1/sinh² r)`.
pub fn sweep_closed_form(r: f64, theta_deg: f64) -> f64 {
    2.0 + (4.0 * theta_deg.to_radians()).sin().powi(2) * (1.0 + 1.0 / r.sinh().powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn percentile_uses_order_statistic_positions() {
        let v: Vec<f64> = (1..=199).map(f64::from).collect();
        // (B + 1)·q lands exactly on order statistics for B = 199
        assert_eq!(percentile(&v, 0.025), 5.0);
        assert_eq!(percentile(&v, 0.975), 195.0);
        assert_eq!(percentile(&v, 0.5), 100.0);
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 1.0), 199.0);
        assert_eq!(percentile(&[1.0, 3.0], 0.5), 2.0);
    }

    fn exact_moments(state: &GaussianState, angles: &[f64]) -> Vec<AngleMoments> {
        angles
            .iter()
            .map(|&t| {
                let (m, v) = state.marginal(t);
                AngleMoments { theta: t, count: 1e5, mean: m, variance: v }
            })
            .collect()
    }

    #[test]
    fn noiseless_moments_are_recovered_exactly() {
        let t = GaussianState::thermal(1.0).unwrap();
        let (cov, mu, res) = fit_moments(&exact_moments(&t, &uniform_angles(12))).unwrap();
        assert_abs_diff_eq!(cov.vxx(), 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(cov.vpp(), 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(cov.vxp(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mu.x, 0.0, epsilon = 1e-12);
        assert!(res < 1e-12);

        let s = GaussianState::squeezed_vacuum(0.3, 0.4).unwrap().displace(1.0, -0.5);
        let (cov, mu, _) = fit_moments(&exact_moments(&s, &[0.0, 1.0, 2.0])).unwrap();
        assert_abs_diff_eq!(cov.vxp(), s.cov().vxp(), epsilon = 1e-12);
        assert_abs_diff_eq!(mu.p, -0.5, epsilon = 1e-12);
    }

    #[test]
    fn identifiability() {
        let v = GaussianState::vacuum();
        assert!(matches!(
            fit_moments(&exact_moments(&v, &[0.0])),
            Err(Error::Identifiability(_))
        ));
        assert!(matches!(
            fit_moments(&exact_moments(&v, &[0.0, 0.0, 0.0])),
            Err(Error::Identifiability(_))
        ));
        assert!(matches!(
            fit_moments(&exact_moments(&v, &[0.0, 0.5])),
            Err(Error::Identifiability(_))
        ));
        let t = GaussianState::thermal(0.5).unwrap();
        let (cov, _, _) = fit_moments(&exact_moments(&t, &[0.0, PI / 2.0])).unwrap();
        assert_abs_diff_eq!(cov.vxx(), 1.0, epsilon = 1e-12);
        assert_eq!(cov.vxp(), 0.0);
    }

    #[test]
    fn sampled_variances() {
        let v = GaussianState::vacuum();
        let data = simulate_homodyne(&v, &uniform_angles(4), 100_000, 1.0, 1).unwrap();
        for xs in &data.samples {
            let m = AngleMoments::from_samples(0.0, xs);
            let se = 0.5 * (2.0 / 1e5f64).sqrt();
            assert!((m.variance - 0.5).abs() < 5.0 * se, "{}", m.variance);
        }
        let sq = GaussianState::squeezed_vacuum(0.5, 0.0).unwrap();
        let data = simulate_homodyne(&sq, &[0.0], 100_000, 1.0, 2).unwrap();
        let m = AngleMoments::from_samples(0.0, &data.samples[0]);
        assert!((m.variance - 0.25).abs() < 5.0 * 0.25 * (2.0 / 1e5f64).sqrt());

        let lost = simulate_homodyne(&sq, &uniform_angles(3), 50_000, 0.0, 3).unwrap();
        for xs in &lost.samples {
            let m = AngleMoments::from_samples(0.0, xs);
            assert!((m.variance - 0.5).abs() < 5.0 * 0.5 * (2.0 / 5e4f64).sqrt());
        }
        assert!(simulate_homodyne(&v, &[PI], 10, 1.0, 0).is_err());
        assert!(simulate_homodyne(&v, &[0.0], 1, 1.0, 0).is_err());
    }

    #[test]
    fn projection_restores_the_uncertainty_bound() {
        // trace and principal axes kept
        let raw = CovarianceMatrix::new(0.24, 0.01, 0.98).unwrap();
        let p = project_physical(&raw);
        assert!(p.det() >= 0.25);
        assert_abs_diff_eq!(p.det(), 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(p.trace(), raw.trace(), epsilon = 1e-14);
        assert_abs_diff_eq!(p.principal_axes().2, raw.principal_axes().2, epsilon = 1e-12);
        // sub-vacuum trace: common scaling
        let small = CovarianceMatrix::new(0.3, 0.0, 0.6).unwrap();
        let q = project_physical(&small);
        assert_abs_diff_eq!(q.det(), 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(q.vxx() / q.vpp(), 0.5, epsilon = 1e-14);
        let iso = CovarianceMatrix::new(0.4, 0.0, 0.4).unwrap();
        assert_abs_diff_eq!(project_physical(&iso).vxx(), 0.5, epsilon = 1e-14);
        let ok = CovarianceMatrix::new(1.0, 0.0, 1.0).unwrap();
        assert_eq!(project_physical(&ok), ok);
    }

    #[test]
    fn thermal_pipeline_interval_contains_two() {
        let t = GaussianState::thermal(0.5).unwrap();
        let data = simulate_homodyne(&t, &uniform_angles(12), 100_000, 1.0, 9).unwrap();
        let rec = estimate_covariance(&data).unwrap();
        assert_eq!(rec.bootstrap.len() + rec.bootstrap_failures, BOOTSTRAP_SIZE);
        let iv = g2_from_reconstruction(&rec).unwrap();
        assert!(iv.contains(2.0), "{iv:?}");
    }

    #[test]
    fn csv_roundtrip() {
        let data = simulate_homodyne(&GaussianState::vacuum(), &[0.0, 1.0], 3, 0.8, 4).unwrap();
        let text = data.to_csv();
        assert!(text.starts_with("# seed=4, eta=0.8\ntheta_rad,x\n"));
        let back = HomodyneDataset::from_csv(&text).unwrap();
        assert_eq!(back.angles, data.angles);
        assert_eq!(back.per_angle_counts(), vec![3, 3]);
        assert_eq!(back.seed, 4);
        for (a, b) in back.samples.iter().flatten().zip(data.samples.iter().flatten()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-11 * b.abs().max(1.0));
        }
        assert!(HomodyneDataset::from_csv("x,y\n1,2\n").is_err());
    }

    #[test]
    fn sweep_closed_form_endpoints() {
        let r = 0.3f64;
        assert_abs_diff_eq!(sweep_closed_form(r, 0.0), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sweep_closed_form(r, 22.5), 3.0 + 1.0 / r.sinh().powi(2), epsilon = 1e-12);
        for th in [0.0, 10.0, 22.5, 33.0] {
            let g = g2_gaussian(&hwp_output(r, th).unwrap()).unwrap().value;
            assert_abs_diff_eq!(g, sweep_closed_form(r, th), epsilon = 1e-10);
        }
    }
}
