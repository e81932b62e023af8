//! Direction-frame algebra: builds randomized admissible frames, checks the
//! orthogonality relations behind the phase construction, and prints the
//! boundary partition of the section for a few illumination directions.
//!
//! Usage: `cargo run --release --example frames [count]`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cgo_waveguide::geometry::{boundary_partition, dot3, CrossSection, DirectionFrame};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let count: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(1000);

    let section = CrossSection::disk(1.0, 64)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let mut worst = 0.0f64;
    for _ in 0..count {
        let ang: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let theta = [ang.cos(), ang.sin()];
        let scale: f64 = rng.gen_range(0.2..3.0);
        let xi_prime = [-theta[1] * scale, theta[0] * scale];
        let xi3: f64 = rng.gen_range(0.3..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let f = DirectionFrame::build(&section, theta, xi_prime, xi3)?;

        let tt = f.theta_tilde();
        let xi = f.xi();
        let checks = [
            dot3(tt, f.eta),
            dot3(tt, xi),
            dot3(f.eta, xi),
            (dot3(f.eta, f.eta) - 1.0).abs(),
            (dot3(tt, tt) - 1.0).abs(),
        ];
        for c in checks {
            worst = worst.max(c.abs());
        }
    }
    println!("{count} random frames, worst orthonormality defect {worst:.3e}");

    let f = DirectionFrame::build(&section, [1.0, 0.0], [0.0, 1.0], 1.0)?;
    println!(
        "spot frame theta=(1,0), xi'=(0,1), xi3=1: eta = ({:.6}, {:.6}, {:.6}), R1 = {:.6}",
        f.eta[0], f.eta[1], f.eta[2], f.quad_radius
    );

    for eps in [0.0, 0.5] {
        let part = boundary_partition(&section, [1.0, 0.0], eps)?;
        println!(
            "partition at eps = {eps}: {} shadowed, {} illuminated of {} segments",
            part.shadowed.len(),
            part.illuminated.len(),
            section.num_segments()
        );
    }
    Ok(())
}
