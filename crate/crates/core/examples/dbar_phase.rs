//! Phase corrector diagnostics: directional ∂̄ residuals of `b = e^Φ`
//! against the mollified and the exact potential, the radial decay of `Φ`
//! far from the support, and the uniform sup bound across the ladder.
//!
//! Usage: `cargo run --release --example dbar_phase`

use std::sync::Arc;

use cgo_waveguide::cauchy::{cauchy_phase, dbar_residual, phase_decay, phase_ladder};
use cgo_waveguide::fields::{mollify, Mollifier, PotentialSpec};
use cgo_waveguide::geometry::{CrossSection, CylinderGrid, DirectionFrame};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let section = CrossSection::disk(1.0, 64)?;
    let frame = DirectionFrame::build(&section, [1.0, 0.0], [0.0, 1.0], 1.0)?;
    let grid = Arc::new(CylinderGrid::build(section, 0.08, 0.08, 1.5)?);
    let spec = PotentialSpec::GaussianBump {
        center: [0.15, 0.0, 0.0],
        radius_plane: 0.45,
        radius_axial: 0.55,
        amplitude: [0.4, 0.3, 0.2],
    };
    let a = spec.sample(&grid)?;

    let ladder = [4.0, 8.0, 16.0];
    let mut phases = Vec::new();
    for &rho in &ladder {
        let a_rho = mollify(&a, &Mollifier::new(rho)?).field;
        let phase = cauchy_phase(&a_rho, &frame, 1.0)?;
        let res = dbar_residual(&phase, &a, &a_rho)?;
        println!(
            "rho {rho:5.1}  dbar sup {:.3e}  L2 {:.3e}  exact-A L2 {:.3e} (ceiling {:.3e})  |A-A_rho| {:.3e}",
            res.moll_sup, res.moll_l2, res.exact_l2, res.exact_l2_bound, res.moll_gap_l2
        );
        phases.push(phase);
    }

    let decay = phase_decay(&phases[0])?;
    if let Some(slope) = decay.slope {
        println!(
            "radial decay of |Phi| over [2R1, 4R1]: slope {slope:.3} (continuum bound -1)"
        );
    }

    let ladder_rep = phase_ladder(&ladder, &phases.iter().collect::<Vec<_>>())?;
    println!(
        "sup|Phi| per rho: {:?}  uniform bound {:.4e}",
        ladder_rep
            .sup
            .iter()
            .map(|v| format!("{v:.3e}"))
            .collect::<Vec<_>>(),
        ladder_rep.uniform_bound
    );
    Ok(())
}
