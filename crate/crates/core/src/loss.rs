//! Optical loss from a loss-immune g2(0) and a loss-affected squeezed
//! quadrature variance.
//!
//! A pure squeezed vacuum keeps its g2(0) under attenuation, so
//! `<n_W> = 1/(g2 − 3) + 1/2` recovers the symmetric mean photon number of
//! the unattenuated state. That fixes its squeezed variance `v` through
//! `<n_W> = (v + 1/(4v))/2`, and the measured variance follows
//! `v_meas = η v + (1 − η)/2`.

use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::counting::{bootstrap_clicks, g2_estimate_clicks, CountingRecord, BOOTSTRAP_SIZE};
use crate::error::{Error, Result};
use crate::gaussian::CovarianceMatrix;
use crate::rng::{substream, Purpose};
use crate::tomography::ReconstructionResult;

/// How far outside `[0, 1]` an inferred transmissivity may fall before a
/// warning is attached.
pub const ETA_TOLERANCE: f64 = 0.02;

/// `<n_W> = 1/(g2 − 3) + 1/2` of the unattenuated squeezed vacuum.
pub fn infer_nw_pure(g2: f64) -> Result<f64> {
    if !(g2 > 3.0) || !g2.is_finite() {
        return Err(Error::NotSqueezed(format!("g2 = {g2} is not above 3")));
    }
    Ok(1.0 / (g2 - 3.0) + 0.5)
}

/// Squeezed root `v = nw − √(nw² − 1/4)` of `(v + 1/(4v))/2 = nw`.
pub fn infer_pure_variance(nw_pure: f64) -> Result<f64> {
    if !(nw_pure >= 0.5) || !nw_pure.is_finite() {
        return Err(Error::Domain(format!("<n_W> = {nw_pure} is below the vacuum value 1/2")));
    }
    // 1/4 / (nw + √(nw² − 1/4)), free of cancellation for large nw
    Ok(0.25 / (nw_pure + (nw_pure * nw_pure - 0.25).sqrt()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LossInference {
    pub nw_pure: f64,
    pub vx_pure: f64,
    /// Inferred transmissivity (not clipped).
    pub eta: f64,
    pub warnings: Vec<String>,
}

/// Transmissivity `η = (v_meas − 1/2)/(v_pure − 1/2)`.
pub fn infer_loss(g2_measured: f64, vx_measured: f64) -> Result<LossInference> {
    if !(vx_measured > 0.0) || !vx_measured.is_finite() {
        return Err(Error::Domain(format!("measured variance must be > 0, got {vx_measured}")));
    }
    let nw_pure = infer_nw_pure(g2_measured)?;
    if vx_measured >= 0.5 {
        return Err(Error::Inconsistent(format!(
            "measured variance {vx_measured} is not squeezed while g2 = {g2_measured} indicates squeezing"
        )));
    }
    let vx_pure = infer_pure_variance(nw_pure)?;
    let eta = (vx_measured - 0.5) / (vx_pure - 0.5);
    let mut warnings = Vec::new();
    if !(-ETA_TOLERANCE..=1.0 + ETA_TOLERANCE).contains(&eta) {
        warnings.push(format!(
            "inferred transmissivity {eta} lies outside [0, 1] by more than {ETA_TOLERANCE}"
        ));
    }
    Ok(LossInference {
        nw_pure,
        vx_pure,
        eta,
        warnings,
    })
}

/// Percentile interval of `η` from paired resamples of `(g2, vx)`.
///
/// Pairs for which the inference fails are skipped and counted in the
/// returned tally.
pub fn eta_interval(pairs: &[(f64, f64)], level: f64) -> Result<((f64, f64), usize)> {
    let mut etas: Vec<f64> = pairs
        .iter()
        .filter_map(|&(g, v)| infer_loss(g, v).ok().map(|l| l.eta))
        .collect();
    let skipped = pairs.len() - etas.len();
    if etas.len() < 2 || skipped * 2 > pairs.len() {
        return Err(Error::UnstableInference {
            guarded: skipped,
            total: pairs.len(),
        });
    }
    etas.sort_by(f64::total_cmp);
    let tail = 0.5 * (1.0 - level);
    Ok((
        (
            crate::tomography::percentile(&etas, tail),
            crate::tomography::percentile(&etas, 1.0 - tail),
        ),
        skipped,
    ))
}

/// Loss inference with its measured inputs and a resampled interval.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LossReport {
    pub g2: f64,
    pub vx_measured: f64,
    pub nw_pure: f64,
    pub vx_pure: f64,
    pub eta: f64,
    /// 95% percentile interval of `η` over paired resamples; `None` when no
    /// resamples were supplied.
    pub eta_ci: Option<[f64; 2]>,
    /// Resampled pairs for which the inference failed.
    pub skipped_resamples: usize,
    pub warnings: Vec<String>,
}

/// Smaller principal variance: the squeezed-quadrature variance whatever
/// the orientation of the reconstructed state.
pub fn squeezed_variance(cov: &CovarianceMatrix) -> f64 {
    let (a, b, _) = cov.principal_axes();
    a.min(b)
}

/// Point inference plus the `η` interval over resampled `(g2, vx)` pairs.
pub fn loss_report(g2: f64, vx_measured: f64, resamples: &[(f64, f64)]) -> Result<LossReport> {
    let inf = infer_loss(g2, vx_measured)?;
    let (eta_ci, skipped) = if resamples.is_empty() {
        (None, 0)
    } else {
        let ((lo, hi), skipped) = eta_interval(resamples, 0.95)?;
        (Some([lo, hi]), skipped)
    };
    let mut warnings = inf.warnings;
    if skipped > 0 {
        warnings.push(format!(
            "{skipped} of {} resamples fell outside the inference domain",
            resamples.len()
        ));
    }
    Ok(LossReport {
        g2,
        vx_measured,
        nw_pure: inf.nw_pure,
        vx_pure: inf.vx_pure,
        eta: inf.eta,
        eta_ci,
        skipped_resamples: skipped,
        warnings,
    })
}

/// The two-arm procedure: g2 from the click record (loss-immune), the
/// squeezed variance from the homodyne reconstruction (loss-affected).
/// Bootstrap replicas of both arms are paired to propagate uncertainty.
pub fn loss_from_measurements(
    counting: &CountingRecord,
    reconstruction: &ReconstructionResult,
    seed: u64,
) -> Result<LossReport> {
    let (g2, _) = g2_estimate_clicks(counting)?;
    let vx = squeezed_variance(&reconstruction.raw_cov);
    let g2s = bootstrap_clicks(counting, BOOTSTRAP_SIZE, seed)?;
    let pairs: Vec<(f64, f64)> = g2s
        .iter()
        .zip(&reconstruction.bootstrap_raw)
        .map(|(&g, (_, cov))| (g, squeezed_variance(cov)))
        .collect();
    loss_report(g2, vx, &pairs)
}

/// Resamples `(g2, vx)` from independent normals with the given standard
/// errors, for inputs that come without bootstrap replicas.
pub fn normal_resamples(
    g2: (f64, f64),
    vx: (f64, f64),
    count: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let dist = |(m, s): (f64, f64)| {
        if !(s >= 0.0 && s.is_finite() && m.is_finite()) {
            return Err(Error::Domain(format!("invalid value {m} ± {s}")));
        }
        Normal::new(m, s).map_err(|_| Error::Domain(format!("invalid standard error {s}")))
    };
    let (dg, dv) = (dist(g2)?, dist(vx)?);
    let mut rng = substream(seed, Purpose::Bootstrap, 2 << 40);
    Ok((0..count).map(|_| (dg.sample(&mut rng), dv.sample(&mut rng))).collect())
}
