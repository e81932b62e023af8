//! Checks the restricted-boundary estimate chain: verifies the measured
//! segment set covers every shadowed segment for directions near the design
//! direction, then runs the boundary-pairing ladder and prints the fitted
//! constants per rung.
//!
//! Usage: `cargo run --release --example partial_data [rho...]`

use cgo_waveguide::fields::{PotentialSpec, ScalarSpec};
use cgo_waveguide::geometry::{boundary_partition, CrossSection};
use cgo_waveguide::recovery::{coverage_check, partial_data_check, PartialDataSpec};
use cgo_waveguide::solver::SolveParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rhos: Vec<f64> = std::env::args()
        .skip(1)
        .map(|s| s.parse::<f64>())
        .collect::<Result<_, _>>()?;
    let rhos = if rhos.is_empty() { vec![4.0, 8.0] } else { rhos };

    let section = CrossSection::disk(1.0, 64)?;
    let theta0 = [1.0, 0.0];
    let eps = 0.5;

    // measured set: shadowed part for the design direction, widened by a
    // 2-segment margin on each side
    let part = boundary_partition(&section, theta0, eps)?;
    let n = section.num_segments();
    let mut measured: Vec<usize> = Vec::new();
    for &s in &part.shadowed {
        for d in -2i64..=2 {
            let idx = ((s as i64 + d).rem_euclid(n as i64)) as usize;
            if !measured.contains(&idx) {
                measured.push(idx);
            }
        }
    }
    measured.sort_unstable();
    let spec = PartialDataSpec {
        measured,
        theta0,
        eps,
    };
    println!(
        "segments {}  measured {}  probes {}",
        n,
        spec.measured.len(),
        coverage_check(&section, &spec, 7)?
    );

    let a2 = PotentialSpec::GaussianBump {
        center: [0.15, 0.0, 0.0],
        radius_plane: 0.45,
        radius_axial: 0.55,
        amplitude: [0.4, 0.3, 0.2],
    };
    let q = ScalarSpec::Bump {
        center: [0.0, 0.0, 0.1],
        radius_plane: 0.5,
        radius_axial: 0.6,
        amplitude: 0.35,
    };
    let rep = partial_data_check(
        &section,
        &spec,
        &a2,
        &q,
        [0.0, 1.0, 1.0],
        0.1,
        1.5,
        &rhos,
        &SolveParams::default(),
    )?;
    for r in &rep.rungs {
        println!(
            "rho {:5.1}  complement {:.4e}  measured {:.4e}  illuminated {:.4e}  pairing/rho {:.4e}  moll_err {:.3e}  c_fit {:.4e}  iters {}/{}/{}",
            r.rho,
            r.complement,
            r.measured,
            r.illuminated,
            r.pairing_over_rho,
            r.moll_err,
            r.c_fit,
            r.u1_iters,
            r.u2_iters,
            r.v_iters
        );
    }
    println!(
        "complement with full measurement {:.3e}  c_fit drift {:.3}",
        rep.complement_full, rep.fit_drift
    );

    // a measured set missing part of the shadow must be rejected
    let bad = PartialDataSpec {
        measured: spec.measured[..spec.measured.len() / 2].to_vec(),
        theta0,
        eps,
    };
    match coverage_check(&section, &bad, 7) {
        Err(e) => println!("half coverage rejected: {e}"),
        Ok(_) => println!("half coverage unexpectedly accepted"),
    }
    Ok(())
}
