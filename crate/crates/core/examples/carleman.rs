//! Weighted-energy (Carleman) estimate suite: fits the constants of the
//! convexified, boundary-weighted, and resolvent inequalities on a random
//! family of test functions and reports their drift across the ladder.
//!
//! Usage: `cargo run --release --example carleman [count]`

use cgo_waveguide::carleman::CarlemanSuite;
use cgo_waveguide::fields::{PotentialSpec, ScalarSpec};
use cgo_waveguide::geometry::CrossSection;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let count: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(20);

    let section = CrossSection::disk(1.0, 64)?;
    let a_spec = PotentialSpec::GaussianBump {
        center: [0.15, 0.0, 0.0],
        radius_plane: 0.45,
        radius_axial: 0.55,
        amplitude: [0.4, 0.3, 0.2],
    };
    let q_spec = ScalarSpec::Bump {
        center: [0.0, 0.0, 0.1],
        radius_plane: 0.5,
        radius_axial: 0.6,
        amplitude: 0.35,
    };
    let suite = CarlemanSuite::new(section, [1.0, 0.0], a_spec, q_spec, 0.1, 11, count)?;
    let ladder = [16.0, 32.0, 64.0];
    let report = suite.report(&ladder)?;

    println!(
        "{count} members, convexity parameter s = {:.2}",
        report.s_convexity
    );
    for (name, fits, drift) in [
        ("convexified", &report.convexified, report.drift_convexified),
        ("weighted", &report.weighted, report.drift_weighted),
        ("resolvent", &report.resolvent, report.drift_resolvent),
    ] {
        let cs: Vec<String> = fits.iter().map(|f| format!("{:.4e}", f.c_fit)).collect();
        println!("{name:12} C_fit per rho: {cs:?}  drift x{drift:.3}");
    }
    println!(
        "q inflation x{:.3}  homogeneity exact: {}  theta-reversal exact: {}",
        report.q_inflation, report.homogeneity_exact, report.reversal_exact
    );
    Ok(())
}
