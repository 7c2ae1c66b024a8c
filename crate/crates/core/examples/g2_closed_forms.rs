//! Symmetrically ordered moments of Gaussian states, g2(0) from them, and
//! the numerical Wigner-quadrature cross-check.
//!
//! ```bash
//! cargo run --example g2_closed_forms
//! ```

use wigner_g2::gaussian::GaussianState;
use wigner_g2::moments::{g2_from_moments, g2_gaussian, weyl_moments_analytic, weyl_moments_numeric, QuadratureGrid, DEFAULT_EPSILON};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let states = [
        ("coherent (1, -0.5)", GaussianState::coherent(1.0, -0.5)?),
        ("thermal n=0.7", GaussianState::thermal(0.7)?),
        ("squeezed s=0.5", GaussianState::squeezed_vacuum(0.5, 0.0)?),
        ("squeezed s=0.5, 60% loss", GaussianState::squeezed_vacuum(0.5, 0.0)?.attenuate(0.4)?),
        ("displaced squeezed", GaussianState::squeezed_vacuum(0.3, 0.4)?.displace(0.8, 0.2)),
    ];
    println!("{:<26} {:>10} {:>12} {:>12} {:>14}", "state", "<n>", "<n_W>", "<n_W^2>", "g2");
    for (name, s) in &states {
        let m = weyl_moments_analytic(s);
        let g2 = g2_gaussian(s)?;
        println!("{name:<26} {:>10.5} {:>12.6} {:>12.6} {:>14.10}", g2.mean_photon, m.nw, m.nw2, g2.value);
    }

    // the same moments from a quadrature of the Wigner function
    let s = &states[4].1;
    let numeric = weyl_moments_numeric(s, &QuadratureGrid::default())?;
    let g2 = g2_from_moments(numeric, DEFAULT_EPSILON)?;
    println!("\nnumeric route for the displaced squeezed state: g2 = {:.10}", g2.value);

    // vacuum: g2 is 0/0 and is reported as an error, not a number
    match g2_gaussian(&GaussianState::vacuum()) {
        Ok(v) => println!("vacuum: {v:?}"),
        Err(e) => println!("vacuum: {e}"),
    }
    Ok(())
}
