//! Photon-number distributions of Gaussian states from phase-space overlaps
//! with Fock-state Wigner functions.
//!
//! ```bash
//! cargo run --example photon_statistics
//! ```

use wigner_g2::fock::{g2_from_pn, photon_number_distribution_auto};
use wigner_g2::gaussian::GaussianState;
use wigner_g2::moments::{g2_gaussian, WeylMoments};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let states = [
        ("thermal n=1", GaussianState::thermal(1.0)?),
        ("coherent |a|^2=1", GaussianState::coherent(2f64.sqrt(), 0.0)?),
        ("squeezed r=0.5", GaussianState::squeezed_vacuum_r(0.5, 0.0)?),
    ];
    for (name, s) in &states {
        let dist = photon_number_distribution_auto(s, 1e-12)?;
        let head: Vec<String> = dist.probs().iter().take(6).map(|p| format!("{p:.5}")).collect();
        println!("{name:<18} p(0..5) = [{}]", head.join(", "));
        // moments of p(n) reproduce the Weyl moments and g2
        let m = WeylMoments::from_photon_numbers(dist.probs());
        println!(
            "{:<18} n_max = {}, tail = {:.1e}, <n_W> = {:.8}, g2(p) = {:.8}, g2(W) = {:.8}",
            "",
            dist.n_max(),
            dist.tail_mass(),
            m.nw,
            g2_from_pn(&dist)?,
            g2_gaussian(s)?.value
        );
    }
    Ok(())
}
