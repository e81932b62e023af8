//! Mollification ladder: kernel mass, L² convergence of the smoothed
//! potential, and the growth rate of its gradient sup norm across scales.
//!
//! Usage: `cargo run --release --example mollify`

use std::sync::Arc;

use cgo_waveguide::fields::{mollify, Mollifier, PotentialSpec};
use cgo_waveguide::geometry::{CrossSection, CylinderGrid};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let section = CrossSection::disk(1.0, 64)?;
    let grid = Arc::new(CylinderGrid::build(section, 0.08, 0.08, 1.5)?);
    let spec = PotentialSpec::GaussianBump {
        center: [0.15, 0.0, 0.0],
        radius_plane: 0.45,
        radius_axial: 0.55,
        amplitude: [0.4, 0.3, 0.2],
    };
    let a = spec.sample(&grid)?;
    println!(
        "potential |A|_L2 = {:.6}, kernel normalization c = {:.12}",
        a.l2_norm(),
        Mollifier::normalization()
    );

    let ladder = [4.0, 8.0, 16.0, 32.0];
    let mut dist = Vec::new();
    let mut grad = Vec::new();
    for &rho in &ladder {
        let out = mollify(&a, &Mollifier::new(rho)?);
        let d = a.l2_distance(&out.field)?;
        let g = out.field.grad_sup_norm();
        println!(
            "rho {rho:5.1}  raw kernel mass {:.9}  |A - A_rho|_L2 {:.6e}  |grad A_rho|_inf {:.6e}{}",
            out.raw_mass,
            d,
            g,
            if out.under_resolved {
                "  (under-resolved)"
            } else {
                ""
            }
        );
        dist.push(d);
        grad.push(g);
    }

    let decreasing = dist.windows(2).all(|w| w[1] < w[0]);
    let slope = log_slope(&ladder, &grad);
    println!("L2 distance strictly decreasing: {decreasing}");
    println!("gradient sup norm log-log slope: {slope:.4} (theory 1/4)");
    Ok(())
}

fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}
