//! Builds oscillating solutions along a scale ladder and prints remainder
//! decay plus solver statistics per rung.
//!
//! Usage: `cargo run --release --example cgo_build [rho...]`

use std::sync::Arc;
use std::time::Instant;

use cgo_waveguide::cgo::{build_cgo, cgo_grid, decay_report, verify_pde, AxialCutoff, CgoParams};
use cgo_waveguide::fields::{mollify, Mollifier, PotentialSpec, ScalarSpec};
use cgo_waveguide::geometry::{CrossSection, CylinderGrid, DirectionFrame};
use cgo_waveguide::solver::SolveParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rhos: Vec<f64> = std::env::args()
        .skip(1)
        .map(|s| s.parse::<f64>())
        .collect::<Result<_, _>>()?;
    let rhos = if rhos.is_empty() {
        vec![8.0, 16.0, 32.0]
    } else {
        rhos
    };

    let section = CrossSection::disk(1.0, 64)?;
    let frame = DirectionFrame::build(&section, [1.0, 0.0], [0.0, 1.0], 1.0)?;
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
    let cutoff = AxialCutoff::default();
    let solve = SolveParams::default();
    let carrier = Arc::new(CylinderGrid::build(section, 0.08, 0.08, 1.5)?);

    let mut builds = Vec::new();
    for &rho in &rhos {
        let params = CgoParams {
            frame: frame.clone(),
            sigma: 1.0,
            rho,
            cutoff: cutoff.clone(),
        };
        let grid = cgo_grid(&carrier, &params)?;
        let a = a_spec.sample(&grid)?;
        let q = q_spec.sample(&grid)?;
        let a_rho = mollify(&a, &Mollifier::new(rho)?).field;
        let t0 = Instant::now();
        let build = build_cgo(&grid, &a, &q, &a_rho, &params, &solve, None)?;
        let dt = t0.elapsed().as_secs_f64();
        let r = &build.report;
        println!(
            "rho {:5.1}  h {:.4}  L {:.2}  unknowns {:8}  iters {:5}  rel_res {:.2e}  decay {:.4e}  [{dt:.1} s]",
            rho, r.h, r.half_length, r.unknowns, r.solve.iterations, r.solve.rel_residual, r.decay_quantity
        );
        let pde = verify_pde(&build);
        println!(
            "           pde residual {:.3e}  budget {:.3e}  ratio {:.3}",
            pde.residual_l2, pde.budget, pde.ratio
        );
        builds.push(build);
    }
    if builds.len() >= 2 {
        let rep = decay_report(&builds.iter().collect::<Vec<_>>())?;
        println!(
            "ladder slope {:.3}  decay quantities {:?}",
            rep.slope, rep.quantity
        );
    }
    Ok(())
}
