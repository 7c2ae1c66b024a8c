//! Nonlinear least-squares fit of the wave-plate sweep model
//! `f(θ) = a sin²((b + θ)π/45) + c`, with `θ` and `b` in degrees.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 100;
const GRADIENT_TOL: f64 = 1e-10;
const MAX_HALVINGS: usize = 40;

/// Fitted `(a, b, c)` with diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepFit {
    /// Modulation depth, `a >= 0`.
    pub a: f64,
    /// Phase offset in degrees, reduced to `(−22.5, 22.5]`.
    pub b: f64,
    /// Baseline.
    pub c: f64,
    pub residual_norm: f64,
    /// Standard errors of `(a, b, c)` from the Gauss-Newton curvature.
    pub std_err: [f64; 3],
    pub iterations: usize,
}

impl SweepFit {
    pub fn eval(&self, theta_deg: f64) -> f64 {
        model(&Vector3::new(self.a, self.b, self.c), theta_deg)
    }
}

fn phase(b: f64, theta: f64) -> f64 {
    (b + theta) * std::f64::consts::PI / 45.0
}

fn model(p: &Vector3<f64>, theta: f64) -> f64 {
    p[0] * phase(p[1], theta).sin().powi(2) + p[2]
}

fn jacobian_row(p: &Vector3<f64>, theta: f64) -> Vector3<f64> {
    let u = phase(p[1], theta);
    Vector3::new(
        u.sin().powi(2),
        p[0] * (2.0 * u).sin() * std::f64::consts::PI / 45.0,
        1.0,
    )
}

/// Unweighted fit to `(theta_deg, g2)` points.
pub fn fit_sweep_model(points: &[(f64, f64)]) -> Result<SweepFit> {
    fit_sweep_model_weighted(points, None)
}

/// Weighted fit; `sigmas[i]` is the standard error of point `i`.
///
/// Gauss-Newton from `a = max − min`, `b = 0`, `c = min`, with step halving
/// until the weighted cost decreases.
pub fn fit_sweep_model_weighted(points: &[(f64, f64)], sigmas: Option<&[f64]>) -> Result<SweepFit> {
    if points.len() < 3 {
        return Err(Error::Domain(format!("need at least 3 points, got {}", points.len())));
    }
    if let Some(s) = sigmas {
        if s.len() != points.len() || s.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Domain("sigmas must be positive and match the points".into()));
        }
    }
    if points.iter().any(|(t, y)| !(t.is_finite() && y.is_finite())) {
        return Err(Error::Domain("sweep points must be finite".into()));
    }
    let weight = |i: usize| sigmas.map_or(1.0, |s| 1.0 / s[i]);
    let lo = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);

    // flat data: b is unidentifiable, reported as 0
    if hi - lo <= 1e-12 * hi.abs().max(1.0) {
        let n = points.len() as f64;
        let c = points.iter().map(|p| p.1).sum::<f64>() / n;
        let residual_norm = points.iter().map(|p| (p.1 - c).powi(2)).sum::<f64>().sqrt();
        return Ok(SweepFit {
            a: 0.0,
            b: 0.0,
            c,
            residual_norm,
            std_err: [f64::NAN, f64::NAN, f64::NAN],
            iterations: 0,
        });
    }

    let cost = |p: &Vector3<f64>| -> f64 {
        points
            .iter()
            .enumerate()
            .map(|(i, &(t, y))| (weight(i) * (model(p, t) - y)).powi(2))
            .sum()
    };
    let normal_eqs = |p: &Vector3<f64>| -> (Matrix3<f64>, Vector3<f64>) {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (i, &(t, y)) in points.iter().enumerate() {
            let w = weight(i);
            let j = jacobian_row(p, t) * w;
            let r = w * (model(p, t) - y);
            jtj += j * j.transpose();
            jtr += j * r;
        }
        (jtj, jtr)
    };

    let mut p = Vector3::new(hi - lo, 0.0, lo);
    let mut current = cost(&p);
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=MAX_ITERATIONS {
        iterations = it;
        let (jtj, jtr) = normal_eqs(&p);
        if jtr.amax() <= GRADIENT_TOL * (1.0 + current) {
            converged = true;
            break;
        }
        let Some(step) = jtj.cholesky().map(|ch| -ch.solve(&jtr)) else {
            break;
        };
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let trial = p + step * lambda;
            let c = cost(&trial);
            if c <= current {
                let tiny = (trial - p).amax() <= 1e-15 * (1.0 + p.amax());
                p = trial;
                current = c;
                accepted = true;
                if tiny {
                    converged = true;
                }
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            // no descent along the Gauss-Newton direction: stationary to
            // working precision
            converged = jtr.amax() <= 1e-6 * (1.0 + current);
            break;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::FitDivergence {
            iterations,
            residual: current.sqrt(),
        });
    }

    let (jtj, _) = normal_eqs(&p);
    let dof = (points.len() as f64 - 3.0).max(1.0);
    let scale = if sigmas.is_some() { 1.0 } else { current / dof };
    let std_err = jtj
        .try_inverse()
        .map(|inv| [(inv[(0, 0)] * scale).sqrt(), (inv[(1, 1)] * scale).sqrt(), (inv[(2, 2)] * scale).sqrt()])
        .unwrap_or([f64::NAN; 3]);

    let (mut a, mut b, mut c) = (p[0], p[1], p[2]);
    if a < 0.0 {
        // a sin²u + c = |a| sin²(u + π/2) + (c + a)
        c += a;
        a = -a;
        b += 22.5;
    }
    b = (b + 22.5).rem_euclid(45.0) - 22.5;
    if b <= -22.5 {
        b += 45.0;
    }
    Ok(SweepFit {
        a,
        b,
        c,
        residual_norm: points
            .iter()
            .map(|&(t, y)| (model(&Vector3::new(a, b, c), t) - y).powi(2))
            .sum::<f64>()
            .sqrt(),
        std_err,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tomography::sweep_closed_form;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_sweep_is_recovered() {
        let r = 0.3f64;
        let pts: Vec<(f64, f64)> = (0..10)
            .map(|k| {
                let t = 5.0 * k as f64;
                (t, sweep_closed_form(r, t))
            })
            .collect();
        let fit = fit_sweep_model(&pts).unwrap();
        assert_abs_diff_eq!(fit.a, 1.0 + 1.0 / r.sinh().powi(2), epsilon = 1e-9);
        assert_abs_diff_eq!(fit.b, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.c, 2.0, epsilon = 1e-9);
        assert!(fit.residual_norm <= 1e-9);
    }

    #[test]
    fn shifted_and_inverted_model() {
        let truth = |t: f64| -3.0 * phase(4.0, t).sin().powi(2) + 7.0;
        let pts: Vec<(f64, f64)> = (0..16).map(|k| (3.0 * k as f64, truth(3.0 * k as f64))).collect();
        let fit = fit_sweep_model(&pts).unwrap();
        assert!(fit.a >= 0.0);
        for &(t, y) in &pts {
            assert_abs_diff_eq!(fit.eval(t), y, epsilon = 1e-8);
        }
    }

    #[test]
    fn constant_data() {
        let pts = [(0.0, 2.0), (10.0, 2.0), (20.0, 2.0), (30.0, 2.0)];
        let fit = fit_sweep_model(&pts).unwrap();
        assert_eq!((fit.a, fit.b, fit.c), (0.0, 0.0, 2.0));
    }

    #[test]
    fn too_few_points() {
        assert!(fit_sweep_model(&[(0.0, 1.0), (1.0, 2.0)]).is_err());
        assert!(fit_sweep_model_weighted(&[(0.0, 1.0), (1.0, 2.0), (2.0, 3.0)], Some(&[1.0, 0.0, 1.0])).is_err());
    }
}
