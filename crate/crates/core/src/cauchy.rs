//! Phase correctors from the planar Cauchy transform.
//!
//! For a mollified potential `A_ρ` and a frame `(θ̃, η)` the corrector is
//!
//! `Φ_σ(x) = (-i/2π) ∬ (σθ̃+iη)·A_ρ(x - σs₁θ̃ - s₂η) / (s₁+is₂) ds₁ ds₂`,
//!
//! so that `b_σ = e^{Φ_σ}` solves the directional ∂̄ equation
//! `(σθ̃+iη)·∇b + i[(σθ̃+iη)·A_ρ] b = 0`. In polar coordinates the kernel
//! reduces to `e^{-iφ} dr dφ`, and the integrand vanishes outside the
//! bounding ball of the support, so each ray only samples a short window.
//! Points whose sampling plane `x + span(θ̃, η)` misses the support entirely
//! get an exactly zero phase.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{CgoError, Result};
use crate::fields::{ScalarField, VectorPotential};
use crate::geometry::{dot3, CylinderGrid, DirectionFrame, IndexBox};

/// Angular quadrature order of the polar Cauchy integral.
pub const POLAR_ANGLES: usize = 64;

const ZC: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy)]
struct SupportBall {
    center: [f64; 3],
    radius: f64,
}

/// A computed phase corrector: lattice values on an evaluation box plus
/// everything needed to evaluate the same quadrature at arbitrary points.
pub struct PhaseCorrector {
    pub frame: DirectionFrame,
    /// `+1` or `-1`; selects the direction `σθ̃+iη`.
    pub sigma: f64,
    /// Evaluation lattice.
    pub grid: Arc<CylinderGrid>,
    /// Sub-box of the evaluation lattice actually computed.
    pub eval_box: IndexBox,
    /// `Φ` per lattice node, zero outside `eval_box`.
    pub data: Vec<Complex64>,
    g_grid: Arc<CylinderGrid>,
    /// Combined source `(σθ̃+iη)·A_ρ` on the sampling lattice.
    g: Vec<Complex64>,
    support: Option<SupportBall>,
    plane_normal: [f64; 3],
    delta_r: f64,
    cap: f64,
    dirs: Vec<[f64; 3]>,
    kernel: Vec<Complex64>,
}

/// Builds the corrector on the potential's own lattice with an unbounded
/// radial window (the support windows bound every ray anyway).
pub fn cauchy_phase(
    a_rho: &VectorPotential,
    frame: &DirectionFrame,
    sigma: f64,
) -> Result<PhaseCorrector> {
    let grid = Arc::clone(&a_rho.grid);
    let full = IndexBox::full(&grid);
    cauchy_phase_on(a_rho, frame, sigma, &grid, full, None)
}

/// Builds the corrector on a chosen evaluation lattice and sub-box, sampling
/// the potential from its own (possibly finer) lattice. An explicit radial
/// window below the frame radius `R₁` is rejected, since the support
/// argument only truncates the integral beyond `R₁`.
pub fn cauchy_phase_on(
    a_rho: &VectorPotential,
    frame: &DirectionFrame,
    sigma: f64,
    eval_grid: &Arc<CylinderGrid>,
    eval_box: IndexBox,
    window: Option<f64>,
) -> Result<PhaseCorrector> {
    if sigma.abs() != 1.0 {
        return Err(CgoError::Quadrature(format!(
            "phase sign must be ±1, got {sigma}"
        )));
    }
    let cap = match window {
        Some(w) => {
            if w < frame.quad_radius {
                return Err(CgoError::Quadrature(format!(
                    "frame radius R1 = {:.6} exceeds the requested quadrature window {w:.6}",
                    frame.quad_radius
                )));
            }
            w
        }
        None => f64::INFINITY,
    };
    if eval_box.is_empty() {
        return Err(CgoError::Quadrature("empty phase evaluation box".into()));
    }

    let tt = frame.theta_tilde();
    let eta = frame.eta;
    let g_grid = Arc::clone(&a_rho.grid);
    let n_src = g_grid.n_nodes();
    let mut g = vec![ZC; n_src];
    for lin in 0..n_src {
        let re = sigma * (tt[0] * a_rho.comp[0][lin] + tt[1] * a_rho.comp[1][lin]);
        let im = eta[0] * a_rho.comp[0][lin]
            + eta[1] * a_rho.comp[1][lin]
            + eta[2] * a_rho.comp[2][lin];
        g[lin] = Complex64::new(re, im);
    }

    let support = a_rho.support_box().map(|bb| {
        let lo = g_grid.pos(bb.i0, bb.j0, bb.k0);
        let hi = g_grid.pos(bb.i1 - 1, bb.j1 - 1, bb.k1 - 1);
        let center = [
            0.5 * (lo[0] + hi[0]),
            0.5 * (lo[1] + hi[1]),
            0.5 * (lo[2] + hi[2]),
        ];
        let he = [
            0.5 * (hi[0] - lo[0]),
            0.5 * (hi[1] - lo[1]),
            0.5 * (hi[2] - lo[2]),
        ];
        let pad = (2.0 * g_grid.hx * g_grid.hx + g_grid.hz * g_grid.hz).sqrt();
        SupportBall {
            center,
            radius: (he[0] * he[0] + he[1] * he[1] + he[2] * he[2]).sqrt() + pad,
        }
    });

    let plane_normal = [
        tt[1] * eta[2] - tt[2] * eta[1],
        tt[2] * eta[0] - tt[0] * eta[2],
        tt[0] * eta[1] - tt[1] * eta[0],
    ];
    let delta_r = 0.5 * g_grid.hx.min(g_grid.hz);
    let mut dirs = Vec::with_capacity(POLAR_ANGLES);
    let mut kernel = Vec::with_capacity(POLAR_ANGLES);
    for k in 0..POLAR_ANGLES {
        let phi = 2.0 * std::f64::consts::PI * k as f64 / POLAR_ANGLES as f64;
        let (s, c) = phi.sin_cos();
        dirs.push([
            sigma * c * tt[0] + s * eta[0],
            sigma * c * tt[1] + s * eta[1],
            sigma * c * tt[2] + s * eta[2],
        ]);
        kernel.push(Complex64::new(c, -s));
    }

    let mut out = PhaseCorrector {
        frame: frame.clone(),
        sigma,
        grid: Arc::clone(eval_grid),
        eval_box,
        data: vec![ZC; eval_grid.n_nodes()],
        g_grid,
        g,
        support,
        plane_normal,
        delta_r,
        cap,
        dirs,
        kernel,
    };
    for k in eval_box.k0..eval_box.k1 {
        for j in eval_box.j0..eval_box.j1 {
            for i in eval_box.i0..eval_box.i1 {
                let p = eval_grid.pos(i, j, k);
                out.data[eval_grid.idx(i, j, k)] = out.quadrature(p);
            }
        }
    }
    Ok(out)
}

impl PhaseCorrector {
    /// Whether the source potential vanishes identically (then `Φ ≡ 0`).
    pub fn is_zero(&self) -> bool {
        self.support.is_none()
    }

    /// Evaluates `Φ` at an arbitrary point by the same polar quadrature used
    /// on the lattice.
    pub fn phase_at(&self, x: [f64; 3]) -> Complex64 {
        self.quadrature(x)
    }

    /// `b = e^{Φ}` as a lattice field. Outside the evaluation box the stored
    /// phase is zero, so the amplitude is 1 there; callers restricted to a
    /// sub-box must stay inside it.
    pub fn amplitude(&self) -> ScalarField {
        ScalarField {
            grid: Arc::clone(&self.grid),
            data: self.data.iter().map(|z| z.exp()).collect(),
        }
    }

    /// Sup of `|Φ|` over computed nodes whose horizontal distance stays
    /// within one unit of the cross-section (the uniform-bound region).
    pub fn sup_core(&self) -> f64 {
        let rr = self.grid.section.radius_sup() + 1.0;
        let mut m: f64 = 0.0;
        for k in self.eval_box.k0..self.eval_box.k1 {
            for j in self.eval_box.j0..self.eval_box.j1 {
                for i in self.eval_box.i0..self.eval_box.i1 {
                    let p = self.grid.pos(i, j, k);
                    if p[0] * p[0] + p[1] * p[1] <= rr * rr {
                        m = m.max(self.data[self.grid.idx(i, j, k)].norm());
                    }
                }
            }
        }
        m
    }

    fn quadrature(&self, x: [f64; 3]) -> Complex64 {
        let Some(ball) = self.support else {
            return ZC;
        };
        let dc = [
            x[0] - ball.center[0],
            x[1] - ball.center[1],
            x[2] - ball.center[2],
        ];
        if dot3(self.plane_normal, dc).abs() > ball.radius {
            return ZC;
        }
        let dc2 = dot3(dc, dc);
        let r2 = ball.radius * ball.radius;
        let dr = self.delta_r;
        let mut acc = ZC;
        for (d, ker) in self.dirs.iter().zip(&self.kernel) {
            let bh = dot3(*d, dc);
            let disc = bh * bh - dc2 + r2;
            if disc <= 0.0 {
                continue;
            }
            let sq = disc.sqrt();
            let rhi = (bh + sq).min(self.cap);
            let rlo = (bh - sq).max(0.0);
            if rhi <= rlo {
                continue;
            }
            let jlo = (rlo / dr).floor().max(0.0) as usize;
            let jhi = (rhi / dr).ceil() as usize;
            let mut inner = ZC;
            for jj in jlo..=jhi {
                let r = jj as f64 * dr;
                let p = [x[0] - r * d[0], x[1] - r * d[1], x[2] - r * d[2]];
                let gv = self.g_grid.trilinear_c(&self.g, p);
                inner += if jj == 0 { gv * 0.5 } else { gv };
            }
            acc += *ker * inner;
        }
        acc * Complex64::new(0.0, -dr / POLAR_ANGLES as f64)
    }
}

/// Residual norms of the directional ∂̄ equation for `b = e^{Φ}`, against
/// both the mollified potential the phase was built from and the exact one.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DbarResidual {
    /// Sup and L² of `(σθ̃+iη)·∇b + i[(σθ̃+iη)·A_ρ]b`.
    pub moll_sup: f64,
    pub moll_l2: f64,
    /// The same with the exact `A` in place of `A_ρ`.
    pub exact_sup: f64,
    pub exact_l2: f64,
    /// `‖A - A_ρ‖_{L²}`.
    pub moll_gap_l2: f64,
    /// `sup|b|` over the evaluation region.
    pub amplitude_sup: f64,
    /// `moll_l2 + √2·sup|b|·‖A-A_ρ‖`, an a-priori ceiling for `exact_l2`.
    pub exact_l2_bound: f64,
    pub nodes: usize,
}

/// Evaluates the ∂̄ residuals on the interior of the phase's evaluation box,
/// restricted to horizontal distance ≤ R+1 from the axis.
pub fn dbar_residual(
    phase: &PhaseCorrector,
    a: &VectorPotential,
    a_rho: &VectorPotential,
) -> Result<DbarResidual> {
    let g = &phase.grid;
    if !g.same_lattice(&a.grid) || !g.same_lattice(&a_rho.grid) {
        return Err(CgoError::Quadrature(
            "∂̄ residual needs potentials on the phase evaluation lattice".into(),
        ));
    }
    let tt = phase.frame.theta_tilde();
    let eta = phase.frame.eta;
    let c = [
        Complex64::new(phase.sigma * tt[0], eta[0]),
        Complex64::new(phase.sigma * tt[1], eta[1]),
        Complex64::new(phase.sigma * tt[2], eta[2]),
    ];
    let b: Vec<Complex64> = phase.data.iter().map(|z| z.exp()).collect();
    let inner = phase.eval_box.shrink(1);
    if inner.is_empty() {
        return Err(CgoError::Quadrature(
            "phase evaluation box too thin for the ∂̄ residual".into(),
        ));
    }
    let rr = g.section.radius_sup() + 1.0;
    let strides = [1usize, g.nx, g.nx * g.ny];
    let inv2 = [0.5 / g.hx, 0.5 / g.hx, 0.5 / g.hz];
    let vol = g.cell_volume();

    let mut moll_sup = 0.0f64;
    let mut moll_l2 = 0.0f64;
    let mut exact_sup = 0.0f64;
    let mut exact_l2 = 0.0f64;
    let mut b_sup = 0.0f64;
    let mut nodes = 0usize;
    for k in inner.k0..inner.k1 {
        for j in inner.j0..inner.j1 {
            for i in inner.i0..inner.i1 {
                let p = g.pos(i, j, k);
                if p[0] * p[0] + p[1] * p[1] > rr * rr {
                    continue;
                }
                let lin = g.idx(i, j, k);
                let mut grad = ZC;
                let mut gm = ZC;
                let mut ge = ZC;
                for ax in 0..3 {
                    grad += c[ax] * (b[lin + strides[ax]] - b[lin - strides[ax]]) * inv2[ax];
                    gm += c[ax] * a_rho.comp[ax][lin];
                    ge += c[ax] * a.comp[ax][lin];
                }
                let bv = b[lin];
                let rm = grad + Complex64::new(0.0, 1.0) * gm * bv;
                let re = grad + Complex64::new(0.0, 1.0) * ge * bv;
                moll_sup = moll_sup.max(rm.norm());
                exact_sup = exact_sup.max(re.norm());
                moll_l2 += rm.norm_sqr();
                exact_l2 += re.norm_sqr();
                b_sup = b_sup.max(bv.norm());
                nodes += 1;
            }
        }
    }
    let gap = a.l2_distance(a_rho)?;
    let moll_l2 = (moll_l2 * vol).sqrt();
    let exact_l2 = (exact_l2 * vol).sqrt();
    Ok(DbarResidual {
        moll_sup,
        moll_l2,
        exact_sup,
        exact_l2,
        moll_gap_l2: gap,
        amplitude_sup: b_sup,
        exact_l2_bound: moll_l2 + std::f64::consts::SQRT_2 * b_sup * gap,
        nodes,
    })
}

/// Radial decay record of `|Φ|` in the sampling plane.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PhaseDecayReport {
    /// Fitted log-log slope of the angular RMS against radius, `None` for a
    /// zero field.
    pub slope: Option<f64>,
    pub radii: Vec<f64>,
    pub rms: Vec<f64>,
    pub zero_field: bool,
}

/// Measures `|Φ|` along rings of radius `t ∈ [2R₁, 4R₁]` around the support
/// center inside the `(θ̃, η)` plane and fits the decay exponent; the
/// continuum bound decays like `1/t`.
pub fn phase_decay(phase: &PhaseCorrector) -> Result<PhaseDecayReport> {
    let Some(ball) = phase.support else {
        return Ok(PhaseDecayReport {
            slope: None,
            radii: Vec::new(),
            rms: Vec::new(),
            zero_field: true,
        });
    };
    let r1 = phase.frame.quad_radius;
    let needed = 4.0 * r1 + ball.radius + phase.delta_r;
    if phase.cap < needed {
        return Err(CgoError::Quadrature(format!(
            "quadrature window {:.3} too small for the decay probe (needs {needed:.3})",
            phase.cap
        )));
    }
    let tt = phase.frame.theta_tilde();
    let eta = phase.frame.eta;
    let n_rad = 12usize;
    let n_ang = 8usize;
    let mut radii = Vec::with_capacity(n_rad);
    let mut rms = Vec::with_capacity(n_rad);
    for it in 0..n_rad {
        let t = 2.0 * r1 * 2f64.powf(it as f64 / (n_rad - 1) as f64);
        let mut s = 0.0;
        for m in 0..n_ang {
            let alpha = 2.0 * std::f64::consts::PI * m as f64 / n_ang as f64 + 0.37;
            let (sa, ca) = alpha.sin_cos();
            let x = [
                ball.center[0] + t * (ca * tt[0] + sa * eta[0]),
                ball.center[1] + t * (ca * tt[1] + sa * eta[1]),
                ball.center[2] + t * (ca * tt[2] + sa * eta[2]),
            ];
            s += phase.phase_at(x).norm_sqr();
        }
        radii.push(t);
        rms.push((s / n_ang as f64).sqrt());
    }
    if rms.iter().any(|&v| v <= 0.0) {
        return Err(CgoError::Quadrature(
            "phase vanished on the decay window; cannot fit a slope".into(),
        ));
    }
    let slope = log_log_slope(&radii, &rms);
    Ok(PhaseDecayReport {
        slope: Some(slope),
        radii,
        rms,
        zero_field: false,
    })
}

/// Uniform-in-ρ phase bound data: sup of `|Φ_ρ|` near the cylinder per ρ.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PhaseLadderReport {
    pub rho: Vec<f64>,
    pub sup: Vec<f64>,
    /// Largest sup across the ladder.
    pub uniform_bound: f64,
}

/// Collects `sup|Φ|` across precomputed phases (one per ladder rung).
pub fn phase_ladder(rhos: &[f64], phases: &[&PhaseCorrector]) -> Result<PhaseLadderReport> {
    if rhos.len() != phases.len() || rhos.is_empty() {
        return Err(CgoError::Quadrature(
            "phase ladder needs one phase per rho".into(),
        ));
    }
    let sup: Vec<f64> = phases.iter().map(|p| p.sup_core()).collect();
    let uniform_bound = sup.iter().fold(0.0f64, |m, &v| m.max(v));
    Ok(PhaseLadderReport {
        rho: rhos.to_vec(),
        sup,
        uniform_bound,
    })
}

fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (la, lb) = (a.ln(), b.ln());
        sx += la;
        sy += lb;
        sxx += la * la;
        sxy += la * lb;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Decay constant of the continuum estimate: `‖A_ρ‖_∞ · |B'_{R₁}| / 2π`,
/// so that `|Φ(x)| ≤ const / (|x''| - R₁)` beyond the frame radius.
pub fn decay_constant(a_rho: &VectorPotential, frame: &DirectionFrame) -> f64 {
    let r1 = frame.quad_radius;
    a_rho.sup_norm() * (std::f64::consts::PI * r1 * r1) / (2.0 * std::f64::consts::PI)
}
