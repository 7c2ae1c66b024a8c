//! Simulated homodyne tomography: quadrature samples at 12 phases, Gaussian
//! reconstruction, and g2(0) with a bootstrap interval. Ends with the
//! near-vacuum case where the inference becomes unstable.
//!
//! ```bash
//! cargo run --release --example homodyne_reconstruction
//! ```

use wigner_g2::error::Error;
use wigner_g2::gaussian::GaussianState;
use wigner_g2::moments::g2_gaussian;
use wigner_g2::tomography::{estimate_covariance, g2_from_reconstruction, simulate_homodyne, uniform_angles};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let angles = uniform_angles(12);
    let truth = GaussianState::squeezed_vacuum(0.5, 0.0)?;
    let data = simulate_homodyne(&truth, &angles, 100_000, 1.0, 21)?;
    let rec = estimate_covariance(&data)?;
    let c = rec.state.cov();
    println!("reconstructed V = [[{:.5}, {:.5}], [{:.5}, {:.5}]]", c.vxx(), c.vxp(), c.vxp(), c.vpp());
    println!("fit residual norm {:.2e}, {} bootstrap members", rec.residual_norm, rec.bootstrap.len());
    let iv = g2_from_reconstruction(&rec)?;
    println!(
        "g2 = {:.3}, 95% CI [{:.3}, {:.3}]; true value {:.3}",
        iv.value,
        iv.ci_low,
        iv.ci_high,
        g2_gaussian(&truth)?.value
    );

    // <n> = 0.001: sampling noise dominates the tiny excess over vacuum
    let faint = GaussianState::squeezed_vacuum_r(0.001f64.sqrt().asinh(), 0.0)?;
    let data = simulate_homodyne(&faint, &angles, 100_000, 0.9, 22)?;
    match g2_from_reconstruction(&estimate_covariance(&data)?) {
        Ok(iv) => println!(
            "near vacuum: g2 = {:.1}, CI [{:.1}, {:.1}] (width {:.0}% of the value)",
            iv.value,
            iv.ci_low,
            iv.ci_high,
            100.0 * iv.width() / iv.value.abs()
        ),
        Err(e @ Error::UnstableInference { .. }) => println!("near vacuum: {e}"),
        Err(e) => return Err(e.into()),
    }
    Ok(())
}
