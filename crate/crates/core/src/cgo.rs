//! Complex geometric optics solutions on the truncated waveguide.
//!
//! A CGO solution is assembled as `u = e^{σρθ·x'} (ψ_ρ b e^{iE} + w)`:
//! an exponential weight, an axial cutoff `ψ_ρ = ψ(ρ^{-1/4}x₃)`, the ∂̄
//! amplitude `b = e^{Φ}`, an oscillation `E` (= `ρη·x - ξ·x` for the `σ=+1`
//! family, `ρη·x` for `σ=-1`), and a remainder `w` solving the conjugated
//! equation with the source generated by the cutoff and the amplitude.
//! Everything here works in conjugated variables; the weight only appears
//! through stencil-local factors and in trace formulas.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::cauchy::{cauchy_phase_on, PhaseCorrector};
use crate::error::{CgoError, Result};
use crate::fields::{RealField, ScalarField, VectorPotential};
use crate::geometry::{dot3, BoundaryNode, CylinderGrid, DirectionFrame, IndexBox};
use crate::solver::{
    solve_damped_least_squares, AxialModePreconditioner, CgoOperator, LinearWeight, SolveInfo,
    SolveParams,
};
use crate::tol;

const ZC: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Smooth axial cutoff profile: 1 on `[-plateau, plateau]`, 0 beyond
/// `±support`, glued by the standard exponential smoothstep. The CGO
/// construction evaluates it at the slow variable `t = ρ^{-1/4} x₃`.
#[derive(Debug, Clone, Copy)]
pub struct AxialCutoff {
    pub plateau: f64,
    pub support: f64,
}

impl Default for AxialCutoff {
    fn default() -> Self {
        Self {
            plateau: 1.0,
            support: 2.0,
        }
    }
}

fn stem(u: f64) -> f64 {
    if u > 0.0 {
        (-1.0 / u).exp()
    } else {
        0.0
    }
}

fn stem_d(u: f64) -> f64 {
    if u > 0.0 {
        (-1.0 / u).exp() / (u * u)
    } else {
        0.0
    }
}

fn stem_dd(u: f64) -> f64 {
    if u > 0.0 {
        (-1.0 / u).exp() * (1.0 / (u * u * u * u) - 2.0 / (u * u * u))
    } else {
        0.0
    }
}

impl AxialCutoff {
    pub fn new(plateau: f64, support: f64) -> Result<Self> {
        if !(plateau > 0.0) || !(support > plateau) {
            return Err(CgoError::Config(format!(
                "cutoff needs 0 < plateau < support, got {plateau}, {support}"
            )));
        }
        Ok(Self { plateau, support })
    }

    /// `(ψ, ψ', ψ'')` at `t` (derivatives in the `t` variable).
    pub fn at(&self, t: f64) -> (f64, f64, f64) {
        let a = t.abs();
        if a <= self.plateau {
            return (1.0, 0.0, 0.0);
        }
        if a >= self.support {
            return (0.0, 0.0, 0.0);
        }
        let width = self.support - self.plateau;
        let u = (self.support - a) / width;
        let (f, g) = (stem(u), stem(1.0 - u));
        let (fd, gd) = (stem_d(u), -stem_d(1.0 - u));
        let (fdd, gdd) = (stem_dd(u), stem_dd(1.0 - u));
        let den = f + g;
        let s = f / den;
        let num1 = fd * g - f * gd;
        let s1 = num1 / (den * den);
        let s2 = ((fdd * g - f * gdd) * den - 2.0 * num1 * (fd + gd)) / (den * den * den);
        // d/dt = -sign(t)/width · d/du
        let sgn = if t >= 0.0 { 1.0 } else { -1.0 };
        (s, -s1 * sgn / width, s2 / (width * width))
    }

    /// Axial extent of the scaled support, `support · ρ^{1/4}`.
    pub fn support_extent(&self, rho: f64) -> f64 {
        self.support * rho.powf(0.25)
    }
}

/// Frame, weight sign and frequency for one CGO build.
#[derive(Debug, Clone)]
pub struct CgoParams {
    pub frame: DirectionFrame,
    /// `+1` or `-1`; sign of the exponential weight.
    pub sigma: f64,
    pub rho: f64,
    pub cutoff: AxialCutoff,
}

impl CgoParams {
    /// `κ`: the `σ=+1` family carries the probe oscillation `e^{-iξ·x}`,
    /// the `σ=-1` family does not.
    pub fn kappa(&self) -> f64 {
        if self.sigma > 0.0 {
            1.0
        } else {
            0.0
        }
    }

    /// Exponential weight of this build.
    pub fn linear_weight(&self) -> LinearWeight {
        LinearWeight {
            sigma: self.sigma,
            rho: self.rho,
            theta: self.frame.theta,
        }
    }

}

/// Minimum lattice nodes per oscillation wavelength for a trusted solve.
pub const NODES_PER_WAVELENGTH: f64 = 6.05;

/// Conjugated lattice symbol at the carrier wavevector `σρθ̃ + i(νη - κξ)`:
/// the exact eigenvalue of the weighted second-difference stencil on the
/// pure exponential with that wavevector.
pub fn carrier_symbol(
    grid: &CylinderGrid,
    frame: &DirectionFrame,
    sigma: f64,
    rho: f64,
    kappa: f64,
    nu: f64,
) -> Complex64 {
    let tt = frame.theta_tilde();
    let eta = frame.eta;
    let xi = frame.xi();
    let hs = [grid.hx, grid.hx, grid.hz];
    let mut s = ZC;
    for ax in 0..3 {
        let z = Complex64::new(sigma * rho * tt[ax], nu * eta[ax] - kappa * xi[ax]);
        let zh = z * hs[ax];
        s += (zh.cosh() - 1.0) * (2.0 / (hs[ax] * hs[ax]));
    }
    s
}

/// Oscillation scale `ν` near `ρ` minimizing the carrier symbol: the lattice
/// counterpart of placing `ρη` on the characteristic sphere. The continuum
/// symbol vanishes at `ν = ρ` exactly; on the lattice the zero shifts by
/// `O(ρ³h²)`, and chasing it keeps the principal part out of the stencil's
/// near-kernel. Deterministic: coarse scan then golden-section polish.
pub fn discrete_frequency(
    grid: &CylinderGrid,
    frame: &DirectionFrame,
    sigma: f64,
    rho: f64,
    kappa: f64,
) -> f64 {
    let f = |nu: f64| carrier_symbol(grid, frame, sigma, rho, kappa, nu).norm_sqr();
    let (lo, hi) = (0.85 * rho, 1.3 * rho);
    let n = 240usize;
    let mut best = (f(rho), rho);
    for i in 0..=n {
        let nu = lo + (hi - lo) * i as f64 / n as f64;
        let v = f(nu);
        if v < best.0 {
            best = (v, nu);
        }
    }
    let step = (hi - lo) / n as f64;
    let (mut a, mut b) = (best.1 - step, best.1 + step);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (b - phi * (b - a), a + phi * (b - a));
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..120 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

/// Builds the solve lattice for a CGO parameter set: the spacing resolves
/// the fastest oscillation `ρ + |ξ|` with at least [`NODES_PER_WAVELENGTH`]
/// nodes, and the half-length leaves room past the scaled cutoff support.
pub fn cgo_grid(base: &CylinderGrid, params: &CgoParams) -> Result<Arc<CylinderGrid>> {
    let kmax = params.rho + params.frame.xi_norm();
    let h_osc = 2.0 * std::f64::consts::PI / (NODES_PER_WAVELENGTH * kmax);
    let h = base.hx.min(h_osc);
    let hz = base.hz.min(h_osc);
    let l = base
        .half_length
        .max(params.cutoff.support_extent(params.rho) + 0.75);
    let grid = CylinderGrid::build_with_margin(base.section.clone(), h, hz, l, 0.0)?;
    let worst = grid.hx.max(grid.hz);
    if worst * kmax * NODES_PER_WAVELENGTH > 2.0 * std::f64::consts::PI * (1.0 + 1e-9) {
        return Err(CgoError::UnderResolved(format!(
            "solve lattice h = {worst:.5} cannot resolve oscillation {kmax:.2}"
        )));
    }
    Ok(Arc::new(grid))
}

/// The principal factor `ψ_ρ b e^{iE}` in conjugated variables. The
/// oscillation scale comes from [`discrete_frequency`], so `E` rides the
/// lattice characteristic set rather than the continuum one.
pub fn assemble_principal(
    grid: &Arc<CylinderGrid>,
    phase: &PhaseCorrector,
    params: &CgoParams,
) -> ScalarField {
    let kappa = params.kappa();
    let nu = discrete_frequency(grid, &params.frame, params.sigma, params.rho, kappa);
    let eta = params.frame.eta;
    let xi = params.frame.xi();
    let osc = [
        nu * eta[0] - kappa * xi[0],
        nu * eta[1] - kappa * xi[1],
        nu * eta[2] - kappa * xi[2],
    ];
    let s4 = params.rho.powf(-0.25);
    let mut data = vec![ZC; grid.n_nodes()];
    for k in 0..grid.nz {
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let lin = grid.idx(i, j, k);
                let p = grid.pos(i, j, k);
                let (psi, _, _) = params.cutoff.at(s4 * p[2]);
                if psi == 0.0 {
                    continue;
                }
                let e = Complex64::from_polar(1.0, dot3(osc, p));
                data[lin] = phase.data[lin].exp() * psi * e;
            }
        }
    }
    ScalarField {
        grid: Arc::clone(grid),
        data,
    }
}

/// The conjugated CGO source `F`: applying the conjugated operator to the
/// principal factor gives exactly `-e^{iνη·x}F`, node for node, so the
/// remainder solves `P w = e^{iνη·x} F` against the same stencil. The source
/// is assembled through the discrete product rule: carrier cosh/sinh factors
/// multiply lattice differences of the envelope `ψ_ρ b`, which keeps the
/// match exact instead of `O(h²)` and puts the axial collar term, the
/// amplitude-gradient terms, and the mollification defect `A - A_ρ` terms in
/// one stroke.
pub fn cgo_source(
    grid: &Arc<CylinderGrid>,
    phase: &PhaseCorrector,
    a: &VectorPotential,
    q: &RealField,
    params: &CgoParams,
) -> ScalarField {
    let n = grid.n_nodes();
    let rho = params.rho;
    let kappa = params.kappa();
    let frame = &params.frame;
    let nu = discrete_frequency(grid, frame, params.sigma, rho, kappa);
    let s_res = carrier_symbol(grid, frame, params.sigma, rho, kappa, nu);
    let tt = frame.theta_tilde();
    let eta = frame.eta;
    let xi = frame.xi();
    let hs = [grid.hx, grid.hx, grid.hz];
    let mut ch = [ZC; 3];
    let mut sh = [ZC; 3];
    for ax in 0..3 {
        let z = Complex64::new(params.sigma * rho * tt[ax], nu * eta[ax] - kappa * xi[ax]);
        let zh = z * hs[ax];
        ch[ax] = zh.cosh();
        sh[ax] = zh.sinh();
    }
    let rm4 = rho.powf(-0.25);
    let mut env = vec![ZC; n];
    for k in 0..grid.nz {
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let lin = grid.idx(i, j, k);
                let p = grid.pos(i, j, k);
                let (psi, _, _) = params.cutoff.at(rm4 * p[2]);
                if psi != 0.0 {
                    env[lin] = phase.data[lin].exp() * psi;
                }
            }
        }
    }
    let div_a = a.divergence();
    let inv_h2 = [
        1.0 / (grid.hx * grid.hx),
        1.0 / (grid.hx * grid.hx),
        1.0 / (grid.hz * grid.hz),
    ];
    let strides = [1usize, grid.nx, grid.nx * grid.ny];
    let mut data = vec![ZC; n];
    let inner = IndexBox::full(grid).shrink(1);
    for k in inner.k0..inner.k1 {
        for j in inner.j0..inner.j1 {
            for i in inner.i0..inner.i1 {
                let lin = grid.idx(i, j, k);
                let e0 = env[lin];
                let av = [a.comp[0][lin], a.comp[1][lin], a.comp[2][lin]];
                let mut live = e0 != ZC;
                let mut t = ZC;
                for ax in 0..3 {
                    let ep = env[lin + strides[ax]];
                    let em = env[lin - strides[ax]];
                    if ep != ZC || em != ZC {
                        live = true;
                    }
                    let d2 = (ep - e0 * 2.0 + em) * inv_h2[ax];
                    let dc = (ep - em) * (0.5 / hs[ax]);
                    let coef_d2 = ch[ax] + I * (av[ax] * hs[ax]) * sh[ax];
                    let coef_dc = sh[ax] * (2.0 / hs[ax]) + I * (2.0 * av[ax]) * ch[ax];
                    t += coef_d2 * d2 + coef_dc * dc + (I * (2.0 * av[ax] / hs[ax]) * sh[ax]) * e0;
                }
                if !live {
                    continue;
                }
                let zloc = Complex64::new(q.data[lin] - dot3(av, av), div_a[lin]);
                t += (s_res + zloc) * e0;
                let p = grid.pos(i, j, k);
                let em_xi = Complex64::from_polar(1.0, -kappa * dot3(xi, p));
                data[lin] = -t * em_xi;
            }
        }
    }
    ScalarField {
        grid: Arc::clone(grid),
        data,
    }
}

/// Norms and convergence data of one CGO build.
#[derive(Debug, Clone, Serialize)]
pub struct CgoReport {
    pub rho: f64,
    pub sigma: f64,
    /// Oscillation scale actually used for `E`; the lattice-characteristic
    /// shift of `ρ`.
    pub freq: f64,
    pub h: f64,
    pub hz: f64,
    pub half_length: f64,
    pub unknowns: usize,
    pub source_l2: f64,
    pub w_l2: f64,
    pub w_h1: f64,
    /// `ρ^{-1}‖w‖_{H¹} + ‖w‖_{L²}`, the ladder decay quantity.
    pub decay_quantity: f64,
    pub solve: SolveInfo,
}

/// One assembled CGO solution in conjugated variables.
pub struct CgoBuild {
    pub params: CgoParams,
    pub grid: Arc<CylinderGrid>,
    pub phase: PhaseCorrector,
    /// `ψ_ρ b e^{iE}` on the lattice.
    pub principal: ScalarField,
    /// Remainder on the lattice (zero at and outside the boundary).
    pub remainder: ScalarField,
    pub op: CgoOperator,
    pub report: CgoReport,
}

impl CgoBuild {
    /// Conjugated composed solution `U = principal + w`; the physical
    /// solution is `e^{σρθ·x'} U`.
    pub fn composed(&self) -> ScalarField {
        let mut data = self.principal.data.clone();
        for (d, w) in data.iter_mut().zip(&self.remainder.data) {
            *d += w;
        }
        ScalarField {
            grid: Arc::clone(&self.grid),
            data,
        }
    }

    pub fn weight(&self) -> LinearWeight {
        LinearWeight {
            sigma: self.params.sigma,
            rho: self.params.rho,
            theta: self.params.frame.theta,
        }
    }
}

/// Builds a full CGO solution: evaluates the phase on the solve lattice
/// (sampling the mollified potential from its own lattice), assembles the
/// source, and solves for the remainder. `a` and `q` are rematerialized on
/// the solve lattice through their closed forms. A preconditioner built on
/// the same lattice may be shared between builds of either weight sign.
pub fn build_cgo(
    grid: &Arc<CylinderGrid>,
    a: &VectorPotential,
    q: &RealField,
    a_rho: &VectorPotential,
    params: &CgoParams,
    solve: &SolveParams,
    shared: Option<&mut AxialModePreconditioner>,
) -> Result<CgoBuild> {
    let af = a.sample_on(grid)?;
    let qf = q.sample_on(grid)?;
    let phase = cauchy_phase_on(
        a_rho,
        &params.frame,
        params.sigma,
        grid,
        IndexBox::full(grid),
        None,
    )?;
    let source = cgo_source(grid, &phase, &af, &qf, params);
    let weight = LinearWeight {
        sigma: params.sigma,
        rho: params.rho,
        theta: params.frame.theta,
    };
    let op = CgoOperator::magnetic(grid, weight, &af, &qf)?;

    let eta = params.frame.eta;
    let rho = params.rho;
    let nu = discrete_frequency(grid, &params.frame, params.sigma, rho, params.kappa());
    let mut rhs_lattice = vec![ZC; grid.n_nodes()];
    for k in 0..grid.nz {
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let lin = grid.idx(i, j, k);
                if source.data[lin] != ZC {
                    let p = grid.pos(i, j, k);
                    let e = Complex64::from_polar(1.0, nu * dot3(eta, p));
                    rhs_lattice[lin] = e * source.data[lin];
                }
            }
        }
    }
    let rhs = op.pack(&rhs_lattice);
    let vol = grid.cell_volume();
    let source_l2 = (rhs.iter().map(|z| z.norm_sqr()).sum::<f64>() * vol).sqrt();

    let (w_packed, info) = solve_damped_least_squares(&op, &rhs, solve, shared)?;
    let w_lattice = op.unpack(&w_packed);
    let remainder = ScalarField {
        grid: Arc::clone(grid),
        data: w_lattice,
    };
    let principal = assemble_principal(grid, &phase, params);

    let w_l2 = remainder.l2_norm();
    let mut grad2 = 0.0;
    {
        let d = &remainder.data;
        let strides = [1usize, grid.nx, grid.nx * grid.ny];
        let hs = [grid.hx, grid.hx, grid.hz];
        let n = grid.n_nodes();
        for ax in 0..3 {
            let st = strides[ax];
            let inv = 1.0 / hs[ax];
            for lin in 0..n - st {
                let dv = (d[lin + st] - d[lin]) * inv;
                grad2 += dv.norm_sqr();
            }
        }
    }
    let w_h1 = (w_l2 * w_l2 + grad2 * vol).sqrt();
    let report = CgoReport {
        rho,
        sigma: params.sigma,
        freq: nu,
        h: grid.hx,
        hz: grid.hz,
        half_length: grid.half_length,
        unknowns: op.n_unknowns(),
        source_l2,
        w_l2,
        w_h1,
        decay_quantity: w_h1 / rho + w_l2,
        solve: info,
    };
    Ok(CgoBuild {
        params: params.clone(),
        grid: Arc::clone(grid),
        phase,
        principal,
        remainder,
        op,
        report,
    })
}

/// Interior residual check of the composed solution against the
/// truncation-error budget `C·h²·ρ²·‖D²U‖`.
#[derive(Debug, Clone, Serialize)]
pub struct PdeCheck {
    pub residual_l2: f64,
    pub budget: f64,
    pub ratio: f64,
    /// Second-difference energy norm of the composed solution.
    pub d2_norm: f64,
}

/// Applies the discrete conjugated operator to `principal + w`. The
/// remainder rows vanish to solver tolerance by construction, so what is
/// left is the truncation error of the principal part; it must stay below
/// the second-difference budget.
pub fn verify_pde(build: &CgoBuild) -> PdeCheck {
    let grid = &build.grid;
    let u = build.composed();
    let res = build.op.apply_lattice(&u.data);
    let vol = grid.cell_volume();
    let mut r2 = 0.0;
    for z in &res {
        r2 += z.norm_sqr();
    }
    let residual_l2 = (r2 * vol).sqrt();

    let strides = [1usize, grid.nx, grid.nx * grid.ny];
    let inv_h2 = [
        1.0 / (grid.hx * grid.hx),
        1.0 / (grid.hx * grid.hx),
        1.0 / (grid.hz * grid.hz),
    ];
    let inner = IndexBox::full(grid).shrink(1);
    let mut d2 = 0.0;
    for k in inner.k0..inner.k1 {
        for j in inner.j0..inner.j1 {
            for i in inner.i0..inner.i1 {
                let lin = grid.idx(i, j, k);
                let uv = u.data[lin];
                for ax in 0..3 {
                    let s = (u.data[lin + strides[ax]] - uv * 2.0 + u.data[lin - strides[ax]])
                        * inv_h2[ax];
                    d2 += s.norm_sqr();
                }
            }
        }
    }
    let d2_norm = (d2 * vol).sqrt();
    let h2 = grid.hx.max(grid.hz).powi(2);
    let budget = tol::PDE_RESIDUAL_C * h2 * build.params.rho * build.params.rho * d2_norm;
    PdeCheck {
        residual_l2,
        budget,
        ratio: if budget > 0.0 {
            residual_l2 / budget
        } else {
            f64::INFINITY
        },
        d2_norm,
    }
}

/// Dirichlet and magnetic Neumann traces of a conjugated lattice solution:
/// per boundary node, `U` itself and
/// `e^{-φ}·N = -(∂_ν U + σρ(θ·ν')U) - i(A·ν)U`.
#[derive(Debug, Clone)]
pub struct TraceSet {
    pub nodes: Vec<BoundaryNode>,
    pub dirichlet: Vec<Complex64>,
    pub neumann: Vec<Complex64>,
}

/// One-sided directional derivative along the outward normal, taken into
/// the cylinder: second order where two in-domain nodes line up behind the
/// boundary node, first order otherwise.
pub fn normal_derivative(
    grid: &CylinderGrid,
    data: &[Complex64],
    node: &BoundaryNode,
) -> Complex64 {
    let lin = node.lin as usize;
    let strides = [1usize, grid.nx, grid.nx * grid.ny];
    let hs = [grid.hx, grid.hx, grid.hz];
    let mut acc = ZC;
    for ax in 0..3 {
        let nu = node.normal[ax];
        if nu == 0.0 {
            continue;
        }
        // the domain side is opposite the outward normal component
        let inward_minus = nu > 0.0;
        let ok = |dist: usize| -> bool {
            if !line_room(grid, lin, ax, dist, !inward_minus) {
                return false;
            }
            let l = if inward_minus {
                lin - dist * strides[ax]
            } else {
                lin + dist * strides[ax]
            };
            let (i, j, _) = grid.split(l);
            grid.is_masked(i, j)
        };
        let get = |dist: usize| -> Complex64 {
            let l = if inward_minus {
                lin - dist * strides[ax]
            } else {
                lin + dist * strides[ax]
            };
            data[l]
        };
        // with the domain on the -ax side this is the backward formula for
        // ∂/∂x_ax; on the +ax side it evaluates to -∂/∂x_ax
        let one_sided = if ok(1) && ok(2) {
            (data[lin] * 3.0 - get(1) * 4.0 + get(2)) / (2.0 * hs[ax])
        } else if ok(1) {
            (data[lin] - get(1)) / hs[ax]
        } else {
            ZC
        };
        let d_ax = if inward_minus { one_sided } else { -one_sided };
        acc += d_ax * nu;
    }
    acc
}

fn line_room(grid: &CylinderGrid, lin: usize, ax: usize, dist: usize, forward: bool) -> bool {
    let (i, j, k) = grid.split(lin);
    let (pos, count) = match ax {
        0 => (i, grid.nx),
        1 => (j, grid.ny),
        _ => (k, grid.nz),
    };
    if forward {
        pos + dist < count
    } else {
        pos >= dist
    }
}

/// Extracts the conjugated traces of a lattice field on every boundary node.
pub fn magnetic_traces(
    grid: &CylinderGrid,
    data: &[Complex64],
    weight: &LinearWeight,
    a: &VectorPotential,
    nodes: &[BoundaryNode],
) -> TraceSet {
    let mut dirichlet = Vec::with_capacity(nodes.len());
    let mut neumann = Vec::with_capacity(nodes.len());
    for bn in nodes {
        let lin = bn.lin as usize;
        let uv = data[lin];
        let dnu = normal_derivative(grid, data, bn);
        let theta_nu = weight.theta[0] * bn.normal[0] + weight.theta[1] * bn.normal[1];
        let a_nu = a.comp[0][lin] * bn.normal[0]
            + a.comp[1][lin] * bn.normal[1]
            + a.comp[2][lin] * bn.normal[2];
        let n = -(dnu + uv * (weight.sigma * weight.rho * theta_nu)) - I * a_nu * uv;
        dirichlet.push(uv);
        neumann.push(n);
    }
    TraceSet {
        nodes: nodes.to_vec(),
        dirichlet,
        neumann,
    }
}

/// Remainder decay along a ρ ladder.
#[derive(Debug, Clone, Serialize)]
pub struct CgoDecayReport {
    pub rho: Vec<f64>,
    pub quantity: Vec<f64>,
    /// Log-log slope of the decay quantity against ρ.
    pub slope: f64,
    pub reports: Vec<CgoReport>,
}

/// Fits the ladder decay of `ρ^{-1}‖w‖_{H¹} + ‖w‖_{L²}`.
pub fn decay_report(builds: &[&CgoBuild]) -> Result<CgoDecayReport> {
    if builds.len() < 2 {
        return Err(CgoError::Solver(
            "ladder decay needs at least two builds".into(),
        ));
    }
    let rho: Vec<f64> = builds.iter().map(|b| b.params.rho).collect();
    let quantity: Vec<f64> = builds.iter().map(|b| b.report.decay_quantity).collect();
    let n = rho.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (r, q) in rho.iter().zip(&quantity) {
        let (x, y) = (r.ln(), q.ln());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    Ok(CgoDecayReport {
        rho,
        quantity,
        slope,
        reports: builds.iter().map(|b| b.report.clone()).collect(),
    })
}
