//! Optical loss from a loss-immune g2(0) and a loss-affected squeezed
//! variance: first the exact relations, then the full simulated procedure
//! with bootstrap-propagated uncertainty.
//!
//! ```bash
//! cargo run --release --example loss_inference
//! ```

use wigner_g2::counting::{simulate_hbt, CountingConfig};
use wigner_g2::gaussian::GaussianState;
use wigner_g2::loss::{infer_loss, loss_from_measurements};
use wigner_g2::moments::g2_gaussian;
use wigner_g2::tomography::{estimate_covariance, simulate_homodyne, uniform_angles};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pure = GaussianState::squeezed_vacuum_r(0.5, 0.0)?;
    let eta = 0.7;
    let lossy = pure.attenuate(eta)?;

    let exact = infer_loss(g2_gaussian(&lossy)?.value, lossy.cov().vxx())?;
    println!(
        "exact inputs: <n_W>_pure = {:.6}, v_pure = {:.6}, eta = {:.9}",
        exact.nw_pure, exact.vx_pure, exact.eta
    );

    let counting = CountingConfig {
        n_windows: 10_000_000,
        eta_det: 0.02,
        seed: 31,
        ..CountingConfig::default()
    };
    let rec = simulate_hbt(&lossy, &counting)?;
    let data = simulate_homodyne(&lossy, &uniform_angles(12), 100_000, 1.0, 32)?;
    let recon = estimate_covariance(&data)?;
    let report = loss_from_measurements(&rec, &recon, 33)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
