//! Fourier-side recovery from the solution machinery: the oscillatory
//! pairing identity, reconstruction of the field strength `dA`, gauge
//! generators, and the electric potential, plus the restricted-boundary
//! (partial data) bound.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::cauchy::{cauchy_phase_on, PhaseCorrector};
use crate::cgo::{build_cgo, cgo_grid, AxialCutoff, CgoParams};
use crate::error::{CgoError, Result};
use crate::fields::{
    mollify, Mollifier, PotentialSpec, RealField, ScalarSpec, VectorPotential,
};
use crate::geometry::{
    boundary_partition, dot3, CrossSection, CylinderGrid, DirectionFrame, IndexBox,
};
use crate::solver::{
    solve_damped_least_squares, AxialModePreconditioner, CgoOperator, SolveParams,
};
use crate::tol::GAUGE_CURL_GATE;

const ZC: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Applies `f` to every item on up to `jobs` worker threads and returns the
/// results in input order, so the output is identical for any job count.
pub fn parallel_map<T, R, F>(jobs: usize, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    let n = items.len();
    let workers = jobs.max(1).min(n.max(1));
    if workers <= 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut out: Vec<Option<R>> = (0..n).map(|_| None).collect();
    {
        let slots: Vec<std::sync::Mutex<&mut Option<R>>> =
            out.iter_mut().map(std::sync::Mutex::new).collect();
        let (slots, next, f) = (&slots, &next, &f);
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(move || loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    if i >= n {
                        break;
                    }
                    let val = f(i, &items[i]);
                    **slots[i].lock().expect("result slot poisoned") = Some(val);
                });
            }
        });
    }
    out.into_iter()
        .map(|r| r.expect("worker filled every slot"))
        .collect()
}

/// `∫ [(σθ̃+iη)·A] e^{Φ} e^{-ix·ξ} dx` over the support of `A` by the
/// lattice midpoint rule. The direction and `ξ` come from the corrector's
/// own frame, so the multiplier matches the direction solving the ∂̄
/// equation.
pub fn pairing_integral(a: &VectorPotential, phase: &PhaseCorrector) -> Result<Complex64> {
    if !a.grid.same_lattice(&phase.grid) {
        return Err(CgoError::Recovery(
            "pairing field and phase live on different lattices".into(),
        ));
    }
    let sb = match a.support_box() {
        Some(b) => b,
        None => return Ok(ZC),
    };
    for (i, j, k) in [(sb.i0, sb.j0, sb.k0), (sb.i1 - 1, sb.j1 - 1, sb.k1 - 1)] {
        if !phase.eval_box.contains(i, j, k) {
            return Err(CgoError::Recovery(
                "potential support leaves the phase evaluation box".into(),
            ));
        }
    }
    let grid = &a.grid;
    let tt = phase.frame.theta_tilde();
    let eta = phase.frame.eta;
    let sigma = phase.sigma;
    let xi = phase.frame.xi();
    let mut acc = ZC;
    for k in sb.k0..sb.k1 {
        for j in sb.j0..sb.j1 {
            for i in sb.i0..sb.i1 {
                let lin = grid.idx(i, j, k);
                let av = [a.comp[0][lin], a.comp[1][lin], a.comp[2][lin]];
                let g = Complex64::new(sigma * (tt[0] * av[0] + tt[1] * av[1]), dot3(eta, av));
                if g == ZC {
                    continue;
                }
                let p = grid.pos(i, j, k);
                let osc = Complex64::from_polar(1.0, -dot3(p, xi));
                acc += g * phase.data[lin].exp() * osc;
            }
        }
    }
    Ok(acc * grid.cell_volume())
}

/// Windowed lattice transform `∫ f e^{-ix·ξ} dx` of a real field given
/// nodewise, over the index box `sb`.
fn lattice_transform(grid: &CylinderGrid, f: &[f64], sb: &IndexBox, xi: [f64; 3]) -> Complex64 {
    let mut acc = ZC;
    for k in sb.k0..sb.k1 {
        for j in sb.j0..sb.j1 {
            for i in sb.i0..sb.i1 {
                let v = f[grid.idx(i, j, k)];
                if v == 0.0 {
                    continue;
                }
                let p = grid.pos(i, j, k);
                acc += v * Complex64::from_polar(1.0, -dot3(p, xi));
            }
        }
    }
    acc * grid.cell_volume()
}

/// One resolution level of the identity check.
#[derive(Debug, Clone, Serialize)]
pub struct FourierIdentityLevel {
    pub h: f64,
    pub paired: Complex64,
    pub direct: Complex64,
    pub rel_err: f64,
    pub rel_err_flipped: f64,
}

/// Comparison of the phase-corrected pairing with the plain transform at two
/// resolutions; the corrected integral must reproduce the transform, and
/// halving the spacing must cut the defect.
#[derive(Debug, Clone, Serialize)]
pub struct FourierIdentityReport {
    pub xi: [f64; 3],
    pub rho: f64,
    pub coarse: FourierIdentityLevel,
    pub fine: FourierIdentityLevel,
    pub improvement: f64,
}

fn identity_level(
    section: &CrossSection,
    spec: &PotentialSpec,
    rho: f64,
    xi: [f64; 3],
    h: f64,
    half_length: f64,
) -> Result<FourierIdentityLevel> {
    let grid = Arc::new(CylinderGrid::build(section.clone(), h, h, half_length)?);
    let a = spec.sample(&grid)?;
    let out = mollify(&a, &Mollifier::new(rho)?);
    if out.under_resolved {
        return Err(CgoError::UnderResolved(format!(
            "mollifier at scale {rho} is narrower than the lattice spacing {h}"
        )));
    }
    let a_rho = out.field;
    let sb = a_rho.support_box().ok_or_else(|| {
        CgoError::Recovery("mollified potential vanishes identically".into())
    })?;
    let frame = DirectionFrame::for_xi(section, xi)?;
    let mut level = FourierIdentityLevel {
        h,
        paired: ZC,
        direct: ZC,
        rel_err: 0.0,
        rel_err_flipped: 0.0,
    };
    for flip in [false, true] {
        let fr = if flip { frame.flip_eta() } else { frame.clone() };
        let phase = cauchy_phase_on(&a_rho, &fr, 1.0, &grid, sb, None)?;
        let paired = pairing_integral(&a_rho, &phase)?;
        let mut direct = ZC;
        let tt = fr.theta_tilde();
        for k in sb.k0..sb.k1 {
            for j in sb.j0..sb.j1 {
                for i in sb.i0..sb.i1 {
                    let lin = grid.idx(i, j, k);
                    let av = [a_rho.comp[0][lin], a_rho.comp[1][lin], a_rho.comp[2][lin]];
                    let g = Complex64::new(tt[0] * av[0] + tt[1] * av[1], dot3(fr.eta, av));
                    if g == ZC {
                        continue;
                    }
                    let p = grid.pos(i, j, k);
                    direct += g * Complex64::from_polar(1.0, -dot3(p, xi));
                }
            }
        }
        direct *= grid.cell_volume();
        if direct.norm() == 0.0 {
            return Err(CgoError::Recovery(
                "transform vanishes at the probe frequency; pick another xi".into(),
            ));
        }
        let rel = (paired - direct).norm() / direct.norm();
        if flip {
            level.rel_err_flipped = rel;
        } else {
            level.paired = paired;
            level.direct = direct;
            level.rel_err = rel;
        }
    }
    Ok(level)
}

/// Runs the identity check at spacing `2h` and `h`.
pub fn verify_fourier_identity(
    section: &CrossSection,
    spec: &PotentialSpec,
    rho: f64,
    xi: [f64; 3],
    h: f64,
    half_length: f64,
) -> Result<FourierIdentityReport> {
    let coarse = identity_level(section, spec, rho, xi, 2.0 * h, half_length)?;
    let fine = identity_level(section, spec, rho, xi, h, half_length)?;
    let worst_c = coarse.rel_err.max(coarse.rel_err_flipped);
    let worst_f = fine.rel_err.max(fine.rel_err_flipped);
    let improvement = if worst_f > 0.0 {
        worst_c / worst_f
    } else {
        f64::INFINITY
    };
    Ok(FourierIdentityReport {
        xi,
        rho,
        coarse,
        fine,
        improvement,
    })
}

/// One reconstructed transform sample of the field strength.
#[derive(Debug, Clone, Serialize)]
pub struct CurlSample {
    pub xi: [f64; 3],
    pub frame_theta: [f64; 2],
    /// Component pair `(j, k)` of `∂_j a_k - ∂_k a_j`.
    pub pair: [usize; 2],
    pub per_rho: Vec<Complex64>,
    pub recovered: Complex64,
    pub oracle: Complex64,
    /// `|recovered - oracle|` over the sup of all oracle samples.
    pub defect: f64,
    /// Ladder increments failed to contract; the extrapolated value is the
    /// last rung.
    pub diverged: bool,
}

/// Ladder reconstruction of the transform of `d(A₁-A₂)` at the probe set.
#[derive(Debug, Clone, Serialize)]
pub struct DaRecoveryReport {
    pub ladder: Vec<f64>,
    pub samples: Vec<CurlSample>,
    pub oracle_sup: f64,
    pub recovered_rms: f64,
    pub max_defect: f64,
    /// Worst mismatch of `v(-ξ)` against `conj(v(ξ))` over paired probes,
    /// on the oracle sup scale.
    pub conjugate_defect: f64,
}

const PAIRS: [[usize; 2]; 3] = [[0, 1], [0, 2], [1, 2]];

fn aitken(v: &[Complex64]) -> (Complex64, bool) {
    let n = v.len();
    if n < 3 {
        return (v[n - 1], false);
    }
    let (a, b, c) = (v[n - 3], v[n - 2], v[n - 1]);
    let d1 = b - a;
    let d2 = c - b;
    let scale = c.norm() + b.norm() + a.norm();
    if d2.norm() > d1.norm() && d2.norm() > 1e-12 * scale {
        return (c, true);
    }
    let d = d2 - d1;
    if d.norm() <= 1e-13 * scale {
        return (c, false);
    }
    (c - d2 * d2 / d, false)
}

/// Assembles one antisymmetric component `(j,k)` of the transformed field
/// strength from the two tangential transform values. The output for `(k,j)`
/// is exactly the negation of the output for `(j,k)`.
pub fn assemble_component(
    frame: &DirectionFrame,
    t_theta: Complex64,
    t_eta: Complex64,
    j: usize,
    k: usize,
) -> Complex64 {
    let xi = frame.xi();
    let mut zeta = [0.0; 3];
    zeta[k] += xi[j];
    zeta[j] -= xi[k];
    I * (dot3(zeta, frame.theta_tilde()) * t_theta + dot3(zeta, frame.eta) * t_eta)
}

/// Reconstructs the transform of the field strength of `A₁-A₂` from paired
/// oscillatory integrals over the mollification ladder, extrapolates in ρ,
/// and compares against a finite-difference oracle. The two tangential
/// components of the transform come from the two phase directions, and each
/// antisymmetric pair is assembled from them.
pub fn recover_da(
    section: &CrossSection,
    a1: &PotentialSpec,
    a2: &PotentialSpec,
    h: f64,
    half_length: f64,
    ladder: &[f64],
    xis: &[[f64; 3]],
    jobs: usize,
) -> Result<DaRecoveryReport> {
    if ladder.len() < 3 {
        return Err(CgoError::Recovery(
            "recovery ladder needs at least three scales".into(),
        ));
    }
    let grid = Arc::new(CylinderGrid::build(section.clone(), h, h, half_length)?);
    let diff = a1.sample(&grid)?.minus(&a2.sample(&grid)?)?;

    let curl = diff.curl();
    let curl_pair = |pair: [usize; 2]| -> &Vec<f64> {
        match pair {
            [0, 1] => &curl[2],
            [0, 2] => &curl[1],
            _ => &curl[0],
        }
    };
    let pair_sign = |pair: [usize; 2]| if pair == [0, 2] { -1.0 } else { 1.0 };

    let oracle_box = match diff.support_box() {
        Some(b) => b.expand(1, &grid),
        None => IndexBox::full(&grid),
    };

    let mut per_rho: Vec<Vec<Vec<Complex64>>> =
        vec![vec![Vec::new(); PAIRS.len()]; xis.len()];
    for &rho in ladder {
        let out = mollify(&diff, &Mollifier::new(rho)?);
        if out.under_resolved {
            return Err(CgoError::UnderResolved(format!(
                "mollifier at scale {rho} is narrower than the recovery lattice"
            )));
        }
        let a_rho = out.field;
        let sb = match a_rho.support_box() {
            Some(b) => b,
            None => continue,
        };
        let rung: Vec<Result<Vec<Complex64>>> = parallel_map(jobs, xis, |_, &xi| {
            let frame = DirectionFrame::for_xi(section, xi)?;
            let ph_p = cauchy_phase_on(&a_rho, &frame, 1.0, &grid, sb, None)?;
            let ph_m = cauchy_phase_on(&a_rho, &frame.flip_eta(), 1.0, &grid, sb, None)?;
            let lp = pairing_integral(&a_rho, &ph_p)?;
            let lm = pairing_integral(&a_rho, &ph_m)?;
            let t_theta = 0.5 * (lp + lm);
            let t_eta = (lp - lm) / (2.0 * I);
            Ok(PAIRS
                .iter()
                .map(|&p| assemble_component(&frame, t_theta, t_eta, p[0], p[1]))
                .collect())
        });
        for (xi_idx, res) in rung.into_iter().enumerate() {
            for (pi, val) in res?.into_iter().enumerate() {
                per_rho[xi_idx][pi].push(val);
            }
        }
    }

    let mut samples = Vec::new();
    let mut oracle_sup = 0.0f64;
    for (xi_idx, &xi) in xis.iter().enumerate() {
        let frame = DirectionFrame::for_xi(section, xi)?;
        for (pi, &pair) in PAIRS.iter().enumerate() {
            let seq = &per_rho[xi_idx][pi];
            if seq.is_empty() {
                return Err(CgoError::Recovery(
                    "no ladder values accumulated for a probe".into(),
                ));
            }
            let oracle =
                pair_sign(pair) * lattice_transform(&grid, curl_pair(pair), &oracle_box, xi);
            oracle_sup = oracle_sup.max(oracle.norm());
            let (recovered, diverged) = aitken(seq);
            samples.push(CurlSample {
                xi,
                frame_theta: frame.theta,
                pair,
                per_rho: seq.clone(),
                recovered,
                oracle,
                defect: 0.0,
                diverged,
            });
        }
    }
    let scale = oracle_sup.max(f64::MIN_POSITIVE);
    let mut max_defect = 0.0f64;
    let mut rms = 0.0;
    for s in &mut samples {
        s.defect = (s.recovered - s.oracle).norm() / scale;
        max_defect = max_defect.max(s.defect);
        rms += s.recovered.norm_sqr();
    }
    let recovered_rms = (rms / samples.len() as f64).sqrt();

    let mut conjugate_defect = 0.0f64;
    for s in &samples {
        let neg = [-s.xi[0], -s.xi[1], -s.xi[2]];
        if let Some(t) = samples.iter().find(|t| {
            t.pair == s.pair
                && (t.xi[0] - neg[0]).abs() < 1e-12
                && (t.xi[1] - neg[1]).abs() < 1e-12
                && (t.xi[2] - neg[2]).abs() < 1e-12
        }) {
            conjugate_defect =
                conjugate_defect.max((t.recovered - s.recovered.conj()).norm() / scale);
        }
    }

    Ok(DaRecoveryReport {
        ladder: ladder.to_vec(),
        samples,
        oracle_sup,
        recovered_rms,
        max_defect,
        conjugate_defect,
    })
}

/// Radial line integral `φ(x) = ∫₀¹ A(sx)·x ds` by 64-interval trapezoid
/// with trilinear samples; reconstructs the gauge function of a curl-free
/// field vanishing near the axis origin's reach.
pub fn gauge_line_integral(a: &VectorPotential, x: [f64; 3]) -> f64 {
    const N: usize = 64;
    let g = &a.grid;
    let mut acc = 0.0;
    for i in 0..=N {
        let s = i as f64 / N as f64;
        let p = [s * x[0], s * x[1], s * x[2]];
        let ax = g.trilinear(&a.comp[0], p) * x[0]
            + g.trilinear(&a.comp[1], p) * x[1]
            + g.trilinear(&a.comp[2], p) * x[2];
        let w = if i == 0 || i == N { 0.5 } else { 1.0 };
        acc += w * ax;
    }
    acc / N as f64
}

/// Sup norm of the finite-difference curl, the admission gate for gauge
/// reconstruction.
pub fn curl_sup(a: &VectorPotential) -> f64 {
    a.curl()
        .iter()
        .flat_map(|c| c.iter())
        .fold(0.0f64, |m, &v| m.max(v.abs()))
}

/// Reconstructs the scalar generator of a curl-free field node by node via
/// [`gauge_line_integral`], then shifts by a constant so the value at the
/// lattice corner, which lies outside the support, is zero.
pub fn gauge_potential(a: &VectorPotential) -> Result<RealField> {
    let sup = curl_sup(a);
    if sup > GAUGE_CURL_GATE {
        return Err(CgoError::Recovery(format!(
            "not a gradient field: sup |curl| = {sup:.3e} exceeds {GAUGE_CURL_GATE:.1e}"
        )));
    }
    let g = &a.grid;
    if let Some(sb) = a.support_box() {
        if sb.contains(0, 0, 0) {
            return Err(CgoError::Recovery(
                "field support reaches the lattice corner; no zero reference node available"
                    .into(),
            ));
        }
    }
    let mut out = RealField::zeros(&a.grid);
    for lin in 0..g.n_nodes() {
        let (i, j, k) = g.split(lin);
        out.data[lin] = gauge_line_integral(a, g.pos(i, j, k));
    }
    let base = out.data[g.idx(0, 0, 0)];
    for v in &mut out.data {
        *v -= base;
    }
    Ok(out)
}

/// Two-level refinement record for the line-integral gauge reconstruction.
#[derive(Debug, Clone, Serialize)]
pub struct GaugeRecovery {
    pub hs: [f64; 2],
    pub curl_sup: f64,
    /// Sup distance of the recovered generator to its closed form, both
    /// pinned to zero at the reference corner node.
    pub sup_err: [f64; 2],
    /// `sup_err / h²` per level.
    pub c_fit: [f64; 2],
    /// Sup distance of the centered gradient of the recovered generator to
    /// the field itself.
    pub grad_err: [f64; 2],
    pub grad_c_fit: [f64; 2],
}

/// Samples a gradient field at two resolutions, reconstructs its generator
/// from line integrals, and fits the second-order constants for the sup
/// error of the generator and of its finite-difference gradient.
pub fn gauge_reconstruction_check(
    section: &CrossSection,
    gauge: &PotentialSpec,
    h: f64,
    half_length: f64,
) -> Result<GaugeRecovery> {
    let hs = [h, 0.5 * h];
    let mut worst_curl = 0.0f64;
    let mut sup_err = [0.0f64; 2];
    let mut c_fit = [0.0f64; 2];
    let mut grad_err = [0.0f64; 2];
    let mut grad_c_fit = [0.0f64; 2];
    for (lvl, &hl) in hs.iter().enumerate() {
        let grid = Arc::new(CylinderGrid::build_with_margin(
            section.clone(),
            hl,
            hl,
            half_length,
            0.5,
        )?);
        let af = gauge.sample(&grid)?;
        worst_curl = worst_curl.max(curl_sup(&af));
        let phi = gauge_potential(&af)?;

        let exact = |i: usize, j: usize, k: usize| -> Result<f64> {
            gauge.gauge_phi(grid.pos(i, j, k)).ok_or_else(|| {
                CgoError::Recovery("potential has no closed-form generator".into())
            })
        };
        let exact_ref = exact(0, 0, 0)?;
        let mut sup = 0.0f64;
        for lin in 0..grid.n_nodes() {
            let (i, j, k) = grid.split(lin);
            sup = sup.max((phi.data[lin] - (exact(i, j, k)? - exact_ref)).abs());
        }
        sup_err[lvl] = sup;
        c_fit[lvl] = sup / (hl * hl);

        let mut gs = 0.0f64;
        for k in 1..grid.nz - 1 {
            for j in 1..grid.ny - 1 {
                for i in 1..grid.nx - 1 {
                    let lin = grid.idx(i, j, k);
                    let dx = (phi.data[grid.idx(i + 1, j, k)] - phi.data[grid.idx(i - 1, j, k)])
                        / (2.0 * grid.hx);
                    let dy = (phi.data[grid.idx(i, j + 1, k)] - phi.data[grid.idx(i, j - 1, k)])
                        / (2.0 * grid.hx);
                    let dz = (phi.data[grid.idx(i, j, k + 1)] - phi.data[grid.idx(i, j, k - 1)])
                        / (2.0 * grid.hz);
                    gs = gs
                        .max((dx - af.comp[0][lin]).abs())
                        .max((dy - af.comp[1][lin]).abs())
                        .max((dz - af.comp[2][lin]).abs());
                }
            }
        }
        grad_err[lvl] = gs;
        grad_c_fit[lvl] = gs / (hl * hl);
    }
    Ok(GaugeRecovery {
        hs,
        curl_sup: worst_curl,
        sup_err,
        c_fit,
        grad_err,
        grad_c_fit,
    })
}

/// One probe of the electric-potential recovery.
#[derive(Debug, Clone, Serialize)]
pub struct QSample {
    pub xi: [f64; 3],
    /// Paired transform at each ladder scale.
    pub per_rho: Vec<Complex64>,
    pub direct: Complex64,
    /// Worst relative distance of a ladder value to the direct transform.
    pub rel_err: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct QRecoveryReport {
    pub ladder: Vec<f64>,
    /// Distance from the support edge to the cutoff plateau edge at the
    /// smallest ladder scale; positive when every ladder value is exact.
    pub plateau_margin: f64,
    pub samples: Vec<QSample>,
    pub max_rel_err: f64,
    pub conjugate_defect: f64,
}

/// Recovers the transform of `q₁-q₂` through the product of the two
/// oscillating families along the ρ ladder. With both magnetic potentials
/// equal the amplitude factors cancel, leaving the squared axial profile
/// under the transform; once the support sits inside the cutoff plateau the
/// profile contributes an exact factor 1 and every ladder value matches the
/// plain transform to rounding.
pub fn recover_q(
    section: &CrossSection,
    q1: &ScalarSpec,
    q2: &ScalarSpec,
    ladder: &[f64],
    cutoff: &AxialCutoff,
    h: f64,
    half_length: f64,
    xis: &[[f64; 3]],
) -> Result<QRecoveryReport> {
    if ladder.is_empty() {
        return Err(CgoError::Recovery("empty scale ladder".into()));
    }
    let grid = Arc::new(CylinderGrid::build(section.clone(), h, h, half_length)?);
    let f1 = q1.sample(&grid)?;
    let f2 = q2.sample(&grid)?;
    let n = grid.n_nodes();
    let mut qd = vec![0.0; n];
    for lin in 0..n {
        qd[lin] = f1.data[lin] - f2.data[lin];
    }

    let mut z_max = 0.0f64;
    for (lin, &v) in qd.iter().enumerate() {
        if v != 0.0 {
            let (_, _, k) = grid.split(lin);
            z_max = z_max.max(grid.pos(0, 0, k)[2].abs());
        }
    }
    let rho_min = ladder.iter().cloned().fold(f64::INFINITY, f64::min);
    let plateau_margin = cutoff.plateau * rho_min.powf(0.25) - z_max;

    let full = IndexBox::full(&grid);
    let mut samples = Vec::with_capacity(xis.len());
    let mut max_rel = 0.0f64;
    for &xi in xis {
        let mut per_rho = vec![ZC; ladder.len()];
        let mut direct = ZC;
        for k in full.k0..full.k1 {
            for j in full.j0..full.j1 {
                for i in full.i0..full.i1 {
                    let v = qd[grid.idx(i, j, k)];
                    if v == 0.0 {
                        continue;
                    }
                    let p = grid.pos(i, j, k);
                    let osc = Complex64::from_polar(1.0, -dot3(p, xi));
                    for (r, &rho) in ladder.iter().enumerate() {
                        let (psi, _, _) = cutoff.at(rho.powf(-0.25) * p[2]);
                        per_rho[r] += v * psi * psi * osc;
                    }
                    direct += v * osc;
                }
            }
        }
        let vol = grid.cell_volume();
        for v in &mut per_rho {
            *v *= vol;
        }
        direct *= vol;
        let mut rel = 0.0f64;
        for v in &per_rho {
            rel = rel.max(if direct.norm() > 0.0 {
                (v - direct).norm() / direct.norm()
            } else {
                v.norm()
            });
        }
        max_rel = max_rel.max(rel);
        samples.push(QSample {
            xi,
            per_rho,
            direct,
            rel_err: rel,
        });
    }

    let mut conj = 0.0f64;
    let scale = samples
        .iter()
        .map(|s| s.direct.norm())
        .fold(f64::MIN_POSITIVE, f64::max);
    for s in &samples {
        if let Some(t) = samples.iter().find(|t| {
            (t.xi[0] + s.xi[0]).abs() < 1e-12
                && (t.xi[1] + s.xi[1]).abs() < 1e-12
                && (t.xi[2] + s.xi[2]).abs() < 1e-12
        }) {
            for (a, b) in t.per_rho.iter().zip(&s.per_rho) {
                conj = conj.max((a - b.conj()).norm() / scale);
            }
        }
    }

    Ok(QRecoveryReport {
        ladder: ladder.to_vec(),
        plateau_margin,
        samples,
        max_rel_err: max_rel,
        conjugate_defect: conj,
    })
}

/// Which lateral boundary segments are measured, and the illumination
/// direction the measurement set was designed around.
#[derive(Debug, Clone, Serialize)]
pub struct PartialDataSpec {
    pub measured: Vec<usize>,
    pub theta0: [f64; 2],
    pub eps: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PartialRung {
    pub rho: f64,
    /// `|∫ ∂_ν(v-u₁) conj(u₂) dσ|` over the unmeasured lateral part, in
    /// conjugated variables. This is the pairing the bound controls.
    pub complement: f64,
    /// Weighted illuminated flux `∫ |∂_ν(v-u₁)|² (θ·ν) dσ`.
    pub illuminated: f64,
    /// Boundary pairing over the measured part, for context.
    pub measured: f64,
    /// `complement / ρ`; should shrink along the ladder together with the
    /// mollification error.
    pub pairing_over_rho: f64,
    /// `‖A₂ - A_{2,ρ}‖_{L²}`, the mollification error entering the bound.
    pub moll_err: f64,
    /// `ε·complement² / (ρ²·moll_err²·‖A₂‖²)`.
    pub c_fit: f64,
    pub u1_iters: usize,
    pub u2_iters: usize,
    pub v_iters: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PartialDataReport {
    pub spec: PartialDataSpec,
    pub probes: usize,
    pub segments_total: usize,
    pub segments_measured: usize,
    pub rungs: Vec<PartialRung>,
    /// Value of the complement integral when every segment is measured.
    pub complement_full: f64,
    pub fit_drift: f64,
}

/// Verifies that the measured set contains the full shadowed part for every
/// direction within `eps` of `theta0`.
pub fn coverage_check(
    section: &CrossSection,
    spec: &PartialDataSpec,
    probes: usize,
) -> Result<usize> {
    let base = spec.theta0[1].atan2(spec.theta0[0]);
    for t in 0..probes {
        let frac = if probes == 1 {
            0.0
        } else {
            2.0 * t as f64 / (probes - 1) as f64 - 1.0
        };
        let ang = base + frac * spec.eps;
        let part = boundary_partition(section, [ang.cos(), ang.sin()], 0.0)?;
        for s in &part.shadowed {
            if !spec.measured.contains(s) {
                return Err(CgoError::Recovery(format!(
                    "measured set misses shadowed segment {s} for a probe \
                     direction {:.4} rad off the design direction",
                    frac * spec.eps
                )));
            }
        }
    }
    Ok(probes)
}

struct SurfaceTerms {
    complement: Complex64,
    measured: Complex64,
    illuminated: f64,
}

fn surface_terms(
    grid: &CylinderGrid,
    u_diff: &[Complex64],
    u2: &[Complex64],
    theta: [f64; 2],
    eps: f64,
    measured: &[usize],
) -> Result<SurfaceTerms> {
    let cs = &grid.section;
    let part = boundary_partition(cs, theta, eps)?;
    let h = grid.hx;
    let mut out = SurfaceTerms {
        complement: ZC,
        measured: ZC,
        illuminated: 0.0,
    };
    for s in 0..cs.num_segments() {
        let nu = cs.segment_normal(s);
        let mid = cs.segment_midpoint(s);
        let len = cs.segment_length(s);
        let mut pair = ZC;
        let mut flux = 0.0;
        for k in 0..grid.nz {
            let z = grid.pos(0, 0, k)[2];
            let p0 = [mid[0], mid[1], z];
            let p1 = [mid[0] - h * nu[0], mid[1] - h * nu[1], z];
            let p2 = [mid[0] - 2.0 * h * nu[0], mid[1] - 2.0 * h * nu[1], z];
            let dn = (grid.trilinear_c(u_diff, p0) * 3.0 - grid.trilinear_c(u_diff, p1) * 4.0
                + grid.trilinear_c(u_diff, p2))
                / (2.0 * h);
            let wz = if k == 0 || k == grid.nz - 1 { 0.5 } else { 1.0 };
            pair += wz * dn * grid.trilinear_c(u2, p0).conj();
            flux += wz * dn.norm_sqr();
        }
        let term = pair * grid.hz * len;
        if measured.contains(&s) {
            out.measured += term;
        } else {
            out.complement += term;
        }
        if part.illuminated.contains(&s) {
            let w = nu[0] * theta[0] + nu[1] * theta[1];
            out.illuminated += flux * grid.hz * len * w;
        }
    }
    Ok(out)
}

/// Restricted-boundary check. Builds the two oscillating families and the
/// auxiliary interior solution sharing the first family's boundary values,
/// forms the boundary pairing of the difference against the second family,
/// and splits it into measured and unmeasured parts. The unmeasured pairing
/// is the quantity the estimate chain controls: its square, normalized by
/// ρ², the mollification error, and the potential norm, must stay stable
/// across the ladder.
pub fn partial_data_check(
    section: &CrossSection,
    spec: &PartialDataSpec,
    a2: &PotentialSpec,
    q: &ScalarSpec,
    xi: [f64; 3],
    h: f64,
    half_length: f64,
    ladder: &[f64],
    solve: &SolveParams,
) -> Result<PartialDataReport> {
    let probes = coverage_check(section, spec, 7)?;
    let frame = DirectionFrame::build(section, spec.theta0, [xi[0], xi[1]], xi[2])?;
    let all: Vec<usize> = (0..section.num_segments()).collect();

    let mut rungs = Vec::new();
    let mut complement_full = 0.0f64;
    for (ri, &rho) in ladder.iter().enumerate() {
        let params1 = CgoParams {
            frame: frame.clone(),
            sigma: 1.0,
            rho,
            cutoff: AxialCutoff::default(),
        };
        let params2 = CgoParams {
            sigma: -1.0,
            ..params1.clone()
        };
        let carrier = CylinderGrid::build(section.clone(), h, h, half_length)?;
        let grid = cgo_grid(&carrier, &params1)?;
        let a2f = a2.sample(&grid)?;
        let qf = q.sample(&grid)?;
        let zero_a = VectorPotential::zero(&grid);
        let a_rho2 = mollify(&a2f, &Mollifier::new(rho)?).field;
        let trivial = a2f.comp.iter().all(|c| c.iter().all(|&v| v == 0.0));

        if ri == 0 {
            let cs = &grid.section;
            let mut normal_flux = 0.0f64;
            for s in 0..cs.num_segments() {
                let nu = cs.segment_normal(s);
                let mid = cs.segment_midpoint(s);
                for k in 0..grid.nz {
                    let p = [mid[0], mid[1], grid.pos(0, 0, k)[2]];
                    let an = grid.trilinear(&a2f.comp[0], p) * nu[0]
                        + grid.trilinear(&a2f.comp[1], p) * nu[1];
                    normal_flux = normal_flux.max(an.abs());
                }
            }
            if normal_flux > crate::tol::EXACT_F64 {
                return Err(CgoError::Recovery(format!(
                    "normal components of the two magnetic potentials differ on the \
                     boundary (sup {normal_flux:.3e}); the boundary identity needs \
                     matching normal traces"
                )));
            }
        }

        let probe_op = CgoOperator::reduced(&grid, params1.linear_weight(), &zero_a, &qf)?;
        let lambda = solve.damping_factor * rho;
        let mut prec = AxialModePreconditioner::build(&probe_op, solve.buckets, lambda)?;

        let u1 = build_cgo(&grid, &zero_a, &qf, &zero_a, &params1, solve, Some(&mut prec))?;
        let u2 = build_cgo(&grid, &a2f, &qf, &a_rho2, &params2, solve, Some(&mut prec))?;
        let cu1 = u1.composed();
        let cu2 = u2.composed();

        let mut u_diff = vec![ZC; grid.n_nodes()];
        let v_iters = if trivial {
            0
        } else {
            let op2 = CgoOperator::magnetic(&grid, params1.linear_weight(), &a2f, &qf)?;
            let mut bdata = cu1.data.clone();
            for &lu in &grid.interior_nodes() {
                bdata[lu as usize] = ZC;
            }
            let rhs = op2.rhs_from_boundary(&bdata);
            let (wv, vinfo) = solve_damped_least_squares(&op2, &rhs, solve, Some(&mut prec))?;
            let vfull = op2.unpack(&wv);
            for lin in 0..grid.n_nodes() {
                u_diff[lin] = bdata[lin] + vfull[lin] - cu1.data[lin];
            }
            vinfo.iterations
        };

        let terms =
            surface_terms(&grid, &u_diff, &cu2.data, spec.theta0, spec.eps, &spec.measured)?;
        if ri == 0 {
            let full_terms =
                surface_terms(&grid, &u_diff, &cu2.data, spec.theta0, spec.eps, &all)?;
            complement_full = full_terms.complement.norm();
        }
        let moll_err = a2f.l2_distance(&a_rho2)?;
        let a_l2 = a2f.l2_norm();
        let complement = terms.complement.norm();
        let denom = rho * rho * moll_err * moll_err * a_l2 * a_l2;
        let c_fit = if denom > 0.0 {
            spec.eps * complement * complement / denom
        } else {
            0.0
        };
        rungs.push(PartialRung {
            rho,
            complement,
            illuminated: terms.illuminated,
            measured: terms.measured.norm(),
            pairing_over_rho: complement / rho,
            moll_err,
            c_fit,
            u1_iters: u1.report.solve.iterations,
            u2_iters: u2.report.solve.iterations,
            v_iters,
        });
    }

    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for r in &rungs {
        lo = lo.min(r.c_fit);
        hi = hi.max(r.c_fit);
    }
    Ok(PartialDataReport {
        spec: spec.clone(),
        probes,
        segments_total: section.num_segments(),
        segments_measured: spec.measured.len(),
        rungs,
        complement_full,
        fit_drift: if hi > 0.0 { hi / lo } else { 1.0 },
    })
}
