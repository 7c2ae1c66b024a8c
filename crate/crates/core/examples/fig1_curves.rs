//! g2(0) of coherent, thermal and squeezed light as a function of the mean
//! photon number, computed through the Weyl-moment route.
//!
//! ```bash
//! cargo run --example fig1_curves
//! ```

use wigner_g2::cli::log_grid;
use wigner_g2::moments::{fig1_csv, fig1_table};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rows = fig1_table(&log_grid(0.01, 10.0, 13))?;
    print!("{}", fig1_csv(&rows));

    // squeezed vacuum approaches 3 from above for bright states
    let bright = fig1_table(&[10.0])?[0];
    println!("\nsqueezed g2 at <n> = 10: {:.4}", bright.g2_squeezed);
    Ok(())
}
