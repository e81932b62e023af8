use std::sync::Arc;

use cgo_waveguide::cauchy::{cauchy_phase_on, dbar_residual};
use cgo_waveguide::cgo::{
    assemble_principal, build_cgo, carrier_symbol, cgo_grid, cgo_source, discrete_frequency,
    verify_pde, AxialCutoff, CgoParams,
};
use cgo_waveguide::fields::{mollify, Mollifier, PotentialSpec, ScalarSpec};
use cgo_waveguide::geometry::{dot3, CrossSection, CylinderGrid, DirectionFrame, IndexBox};
use cgo_waveguide::solver::SolveParams;
use num_complex::Complex64;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rhos: Vec<f64> = std::env::args()
        .skip(1)
        .map(|s| s.parse::<f64>().unwrap())
        .collect();
    let rhos = if rhos.is_empty() { vec![4.0, 8.0] } else { rhos };

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
    let mut solve = SolveParams::default();
    if let Ok(v) = std::env::var("CGO_PROBE_DAMP") {
        solve.damping_factor = v.parse()?;
    }
    println!("damping_factor {}", solve.damping_factor);
    let carrier = Arc::new(CylinderGrid::build(section, 0.08, 0.08, 1.5)?);

    for &rho in &rhos {
        let params = CgoParams {
            frame: frame.clone(),
            sigma: 1.0,
            rho,
            cutoff,
        };
        let grid = cgo_grid(&carrier, &params)?;
        let a = a_spec.sample(&grid)?;
        let q = q_spec.sample(&grid)?;
        let a_rho = mollify(&a, &Mollifier::new(rho)?).field;

        let phase = cauchy_phase_on(&a_rho, &frame, 1.0, &grid, IndexBox::full(&grid), None)?;
        let dres = dbar_residual(&phase, &a, &a_rho)?;
        println!(
            "rho {rho}: dbar moll_sup {:.3e} moll_l2 {:.3e} exact_l2 {:.3e} gap {:.3e}",
            dres.moll_sup, dres.moll_l2, dres.exact_l2, dres.moll_gap_l2
        );

        let source = cgo_source(&grid, &phase, &a, &q, &params);
        let principal = assemble_principal(&grid, &phase, &params);

        // rhs_lattice as build_cgo constructs it
        let eta = params.frame.eta;
        let nu = discrete_frequency(&grid, &params.frame, params.sigma, rho, params.kappa());
        let s_res = carrier_symbol(&grid, &params.frame, params.sigma, rho, params.kappa(), nu);
        let s_at_rho = carrier_symbol(&grid, &params.frame, params.sigma, rho, params.kappa(), rho);
        println!(
            "  nu {:.6} (nu/rho-1 {:.3e})  |S(nu)| {:.3e}  |S(rho)| {:.3e}",
            nu,
            nu / rho - 1.0,
            s_res.norm(),
            s_at_rho.norm()
        );
        let mut rhs_lattice = vec![Complex64::new(0.0, 0.0); grid.n_nodes()];
        for k in 0..grid.nz {
            for j in 0..grid.ny {
                for i in 0..grid.nx {
                    let lin = grid.idx(i, j, k);
                    if source.data[lin] != Complex64::new(0.0, 0.0) {
                        let p = grid.pos(i, j, k);
                        let e = Complex64::from_polar(1.0, nu * dot3(eta, p));
                        rhs_lattice[lin] = e * source.data[lin];
                    }
                }
            }
        }
        let op = cgo_waveguide::solver::CgoOperator::magnetic(
            &grid,
            params.linear_weight(),
            &a,
            &q,
        )?;
        let rhs = op.pack(&rhs_lattice);
        let vol = grid.cell_volume();
        let l2 = |v: &[Complex64]| (v.iter().map(|z| z.norm_sqr()).sum::<f64>() * vol).sqrt();

        let applied = op.apply_lattice(&principal.data);
        // op(principal) should equal -rhs up to carrier truncation
        let mut diff = applied.clone();
        for (d, r) in diff.iter_mut().zip(&rhs) {
            *d += r;
        }
        println!(
            "  |rhs| {:.3e}  |op(principal)| {:.3e}  |op(principal)+rhs| {:.3e}",
            l2(&rhs),
            l2(&applied),
            l2(&diff)
        );
        // correlation of the defect with the packed principal
        let pp = op.pack(&principal.data);
        let dot_dp: Complex64 = diff
            .iter()
            .zip(&pp)
            .map(|(d, p)| d * p.conj())
            .sum::<Complex64>()
            * vol;
        let np = l2(&pp);
        println!(
            "  defect.principal corr {:.3e}  |principal_packed| {:.3e}",
            dot_dp.norm() / (l2(&diff) * np).max(1e-300),
            np
        );

        let t0 = std::time::Instant::now();
        let build = build_cgo(&grid, &a, &q, &a_rho, &params, &solve, None)?;
        println!(
            "  source_l2 {:.3e}  w_l2 {:.3e}  w_h1 {:.3e}  decay {:.3e}  iters {}  rel_res {:.3e} grad {:.3e}  [{:.1}s]",
            build.report.source_l2,
            build.report.w_l2,
            build.report.w_h1,
            build.report.decay_quantity,
            build.report.solve.iterations,
            build.report.solve.rel_residual,
            build.report.solve.grad_residual,
            t0.elapsed().as_secs_f64()
        );
        let pde = verify_pde(&build);
        println!(
            "  pde res {:.3e} budget {:.3e} ratio {:.3}",
            pde.residual_l2, pde.budget, pde.ratio
        );

        // where does w live? profile along theta (x), along axis (z), axial spectrum
        let w = &build.remainder.data;
        let mut prof_x = vec![0.0f64; grid.nx];
        let mut prof_z = vec![0.0f64; grid.nz];
        for k in 0..grid.nz {
            for j in 0..grid.ny {
                for i in 0..grid.nx {
                    let v = w[grid.idx(i, j, k)].norm_sqr();
                    prof_x[i] += v;
                    prof_z[k] += v;
                }
            }
        }
        let tot: f64 = prof_x.iter().sum();
        let xmax = prof_x
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        let zmax = prof_z
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        println!(
            "  w profile: x peak at {:.3} ({:.1}% of mass), z peak at {:.3} ({:.1}% of mass), L {:.2}",
            grid.pos(xmax.0, 0, 0)[0],
            100.0 * xmax.1 / tot,
            grid.pos(0, 0, zmax.0)[2],
            100.0 * prof_z[zmax.0] / tot,
            grid.half_length
        );
        // quartile masses along x and z
        let quart = |p: &[f64]| {
            let n = p.len();
            let s: f64 = p.iter().sum();
            let q: Vec<f64> = (0..4)
                .map(|t| p[t * n / 4..(t + 1) * n / 4].iter().sum::<f64>() / s)
                .collect();
            q
        };
        println!("  x quartiles {:?}", quart(&prof_x).iter().map(|v| (v * 100.0).round()).collect::<Vec<_>>());
        println!("  z quartiles {:?}", quart(&prof_z).iter().map(|v| (v * 100.0).round()).collect::<Vec<_>>());
        // axial spectrum at the center column
        let (ic, jc) = (grid.nx / 2, grid.ny / 2);
        let col: Vec<Complex64> = (0..grid.nz).map(|k| w[grid.idx(ic, jc, k)]).collect();
        let nzf = grid.nz as f64;
        let mut best = [(0.0f64, 0.0f64); 3];
        for m in 0..grid.nz {
            let km = 2.0 * std::f64::consts::PI * m as f64 / (nzf * grid.hz);
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, c) in col.iter().enumerate() {
                acc += c * Complex64::from_polar(1.0, -km * k as f64 * grid.hz);
            }
            let a = acc.norm();
            if a > best[0].1 {
                best = [(km, a), best[0], best[1]];
            } else if a > best[1].1 {
                best = [best[0], (km, a), best[1]];
            } else if a > best[2].1 {
                best[2] = (km, a);
            }
        }
        let kc = nu * eta[2].abs();
        println!(
            "  axial spectrum peaks (k, amp): ({:.2}, {:.2e}) ({:.2}, {:.2e}) ({:.2}, {:.2e}); carrier |nu eta3| {:.2}",
            best[0].0, best[0].1, best[1].0, best[1].1, best[2].0, best[2].1, kc
        );
    }
    Ok(())
}
