//! Conjugated-stencil operators and the damped least-squares solver used for
//! CGO remainders and Dirichlet data transfer.
//!
//! The operator is the centered-difference form of
//! `e^{-φ}(Δ + 2iA·∇ + Z)e^{φ}` with a linear weight `φ = σρ θ·x'`. The
//! weight never appears globally: each neighbor coupling carries the exact
//! local ratio `e^{φ(x±h e_a) - φ(x)}`, so entries stay O(e^{ρh}) even when
//! `e^{φ}` itself spans many orders of magnitude.
//!
//! Unknowns are the interior nodes only, stored packed as
//! `idx = plane·nc + cross_position` with a trailing dummy slot that is
//! always zero; Dirichlet neighbors resolve to the dummy, which keeps the
//! stencil loops branch-light and the axial lines contiguous in stride `nc`.
//!
//! Solves use damped CGLS on the normal equations. Plain CGLS needs O(κ)
//! iterations and κ grows like ρ·h⁻² on phase-resolving grids, so a right
//! preconditioner built from the A = 0, Z = 0 part of the operator is
//! available: the axial direction is diagonalized exactly by a discrete
//! sine transform and each axial mode leaves a real banded 2-D system on
//! the cross-section, factored by partial-pivoted band LU once per shift
//! bucket. Right preconditioning leaves the true residual untouched, so
//! the reported relative residual refers to the original system.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{CgoError, Result};
use crate::fields::{RealField, VectorPotential};
use crate::geometry::CylinderGrid;
use crate::tol;

const ZC: Complex64 = Complex64::new(0.0, 0.0);
const NO_CROSS: u32 = u32::MAX;

/// Linear conjugation weight `φ(x) = σ ρ θ·x'`.
#[derive(Debug, Clone, Copy)]
pub struct LinearWeight {
    /// `+1` or `-1`.
    pub sigma: f64,
    pub rho: f64,
    pub theta: [f64; 2],
}

/// Matrix-free conjugated operator on the packed interior unknowns.
pub struct CgoOperator {
    pub grid: Arc<CylinderGrid>,
    pub weight: LinearWeight,
    /// Cross-interior nodes per axial plane.
    pub nc: usize,
    /// Interior axial planes (lattice planes `1..=nz-2`).
    pub nzi: usize,
    /// Packed index -> lattice index.
    lattice_of: Vec<u32>,
    /// Cross neighbor tables by cross position (`NO_CROSS` if Dirichlet).
    xp: Vec<u32>,
    xm: Vec<u32>,
    yp: Vec<u32>,
    ym: Vec<u32>,
    /// Per-axis neighbor ratios `e^{±σρθ_a h_a}` (axial entries are 1).
    fp: [f64; 3],
    fm: [f64; 3],
    /// Packed potential components and zeroth-order term (length n+1, the
    /// trailing dummy entry is zero).
    a: [Vec<f64>; 3],
    z: Vec<Complex64>,
    inv_h2: [f64; 3],
    inv_h: [f64; 3],
}

impl CgoOperator {
    /// Full magnetic operator `e^{-φ}(Δ_A + q)e^{φ}` with
    /// `Z = i·div_h A - |A|² + q` (divergence by centered differences).
    pub fn magnetic(
        grid: &Arc<CylinderGrid>,
        weight: LinearWeight,
        a: &VectorPotential,
        q: &RealField,
    ) -> Result<Self> {
        let div = a.divergence();
        let n = grid.n_nodes();
        let mut z = vec![ZC; n];
        for lin in 0..n {
            let a2 = a.comp[0][lin] * a.comp[0][lin]
                + a.comp[1][lin] * a.comp[1][lin]
                + a.comp[2][lin] * a.comp[2][lin];
            z[lin] = Complex64::new(q.data[lin] - a2, div[lin]);
        }
        Self::build(grid, weight, a, &z)
    }

    /// Reduced operator `e^{-φ}(Δ + 2iA·∇ + q)e^{φ}` without the gauge
    /// zeroth-order terms.
    pub fn reduced(
        grid: &Arc<CylinderGrid>,
        weight: LinearWeight,
        a: &VectorPotential,
        q: &RealField,
    ) -> Result<Self> {
        let z: Vec<Complex64> = q.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Self::build(grid, weight, a, &z)
    }

    fn build(
        grid: &Arc<CylinderGrid>,
        weight: LinearWeight,
        a: &VectorPotential,
        z_lattice: &[Complex64],
    ) -> Result<Self> {
        if !grid.same_lattice(&a.grid) {
            return Err(CgoError::Solver(
                "potential lattice does not match operator grid".into(),
            ));
        }
        if weight.sigma.abs() != 1.0 {
            return Err(CgoError::Solver(format!(
                "conjugation sign must be ±1, got {}",
                weight.sigma
            )));
        }
        let steps = [
            weight.sigma * weight.rho * weight.theta[0] * grid.hx,
            weight.sigma * weight.rho * weight.theta[1] * grid.hx,
            0.0,
        ];
        if steps.iter().any(|s| s.abs() > 700.0) {
            return Err(CgoError::Solver(
                "per-cell conjugation increment overflows the exponential".into(),
            ));
        }
        let fp = [steps[0].exp(), steps[1].exp(), 1.0];
        let fm = [(-steps[0]).exp(), (-steps[1]).exp(), 1.0];

        let nc = grid.cross_interior.len();
        if nc == 0 || grid.nz < 3 {
            return Err(CgoError::Solver("grid has no interior nodes".into()));
        }
        let nzi = grid.nz - 2;
        let n = nc * nzi;
        let plane = grid.nx * grid.ny;

        let mut cross_pos = vec![NO_CROSS; plane];
        for (p, &c) in grid.cross_interior.iter().enumerate() {
            cross_pos[c] = p as u32;
        }
        let nx = grid.nx;
        let look = |c: usize| -> u32 { cross_pos[c] };
        let xp: Vec<u32> = grid.cross_interior.iter().map(|&c| look(c + 1)).collect();
        let xm: Vec<u32> = grid.cross_interior.iter().map(|&c| look(c - 1)).collect();
        let yp: Vec<u32> = grid.cross_interior.iter().map(|&c| look(c + nx)).collect();
        let ym: Vec<u32> = grid.cross_interior.iter().map(|&c| look(c - nx)).collect();

        let mut lattice_of = Vec::with_capacity(n);
        for k in 0..nzi {
            let base = (k + 1) * plane;
            for &c in &grid.cross_interior {
                lattice_of.push((base + c) as u32);
            }
        }

        let mut ap: [Vec<f64>; 3] = [
            vec![0.0; n + 1],
            vec![0.0; n + 1],
            vec![0.0; n + 1],
        ];
        let mut z = vec![ZC; n + 1];
        for (idx, &lu) in lattice_of.iter().enumerate() {
            let lin = lu as usize;
            for ax in 0..3 {
                ap[ax][idx] = a.comp[ax][lin];
            }
            z[idx] = z_lattice[lin];
        }

        let inv_h2 = [
            1.0 / (grid.hx * grid.hx),
            1.0 / (grid.hx * grid.hx),
            1.0 / (grid.hz * grid.hz),
        ];
        let inv_h = [1.0 / grid.hx, 1.0 / grid.hx, 1.0 / grid.hz];
        Ok(Self {
            grid: Arc::clone(grid),
            weight,
            nc,
            nzi,
            lattice_of,
            xp,
            xm,
            yp,
            ym,
            fp,
            fm,
            a: ap,
            z,
            inv_h2,
            inv_h,
        })
    }

    /// Number of packed unknowns (excluding the dummy slot).
    pub fn n_unknowns(&self) -> usize {
        self.nc * self.nzi
    }

    /// Allocates a packed vector (with the dummy slot).
    pub fn packed_zeros(&self) -> Vec<Complex64> {
        vec![ZC; self.n_unknowns() + 1]
    }

    /// Gathers a full-lattice field into packed interior order.
    pub fn pack(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = self.packed_zeros();
        for (idx, &lu) in self.lattice_of.iter().enumerate() {
            out[idx] = v[lu as usize];
        }
        out
    }

    /// Scatters a packed vector back onto the full lattice (zeros elsewhere).
    pub fn unpack(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![ZC; self.grid.n_nodes()];
        for (idx, &lu) in self.lattice_of.iter().enumerate() {
            out[lu as usize] = v[idx];
        }
        out
    }

    #[inline]
    fn coef_pair(&self, ax: usize, aval: f64) -> (Complex64, Complex64) {
        (
            Complex64::new(
                self.fp[ax] * self.inv_h2[ax],
                self.fp[ax] * aval * self.inv_h[ax],
            ),
            Complex64::new(
                self.fm[ax] * self.inv_h2[ax],
                -self.fm[ax] * aval * self.inv_h[ax],
            ),
        )
    }

    #[inline]
    fn diag_re(&self) -> f64 {
        -2.0 * (self.inv_h2[0] + self.inv_h2[1] + self.inv_h2[2])
    }

    /// `out = P v` for packed `v` (homogeneous Dirichlet data).
    pub fn apply(&self, v: &[Complex64], out: &mut [Complex64]) {
        let (nc, nzi) = (self.nc, self.nzi);
        let n = nc * nzi;
        let dummy = n;
        let diag = self.diag_re();
        out[dummy] = ZC;
        for k in 0..nzi {
            let base = k * nc;
            for p in 0..nc {
                let idx = base + p;
                let mut acc = (Complex64::new(diag, 0.0) + self.z[idx]) * v[idx];
                let (cxp, cxm) = self.coef_pair(0, self.a[0][idx]);
                let (cyp, cym) = self.coef_pair(1, self.a[1][idx]);
                let (czp, czm) = self.coef_pair(2, self.a[2][idx]);
                let ix = self.xp[p];
                acc += cxp * v[if ix == NO_CROSS { dummy } else { base + ix as usize }];
                let ix = self.xm[p];
                acc += cxm * v[if ix == NO_CROSS { dummy } else { base + ix as usize }];
                let ix = self.yp[p];
                acc += cyp * v[if ix == NO_CROSS { dummy } else { base + ix as usize }];
                let ix = self.ym[p];
                acc += cym * v[if ix == NO_CROSS { dummy } else { base + ix as usize }];
                acc += czp * v[if k + 1 < nzi { idx + nc } else { dummy }];
                acc += czm * v[if k > 0 { idx - nc } else { dummy }];
                out[idx] = acc;
            }
        }
    }

    /// `out = Pᴴ y` for packed `y`.
    pub fn apply_adjoint(&self, y: &[Complex64], out: &mut [Complex64]) {
        let (nc, nzi) = (self.nc, self.nzi);
        let n = nc * nzi;
        let dummy = n;
        let diag = self.diag_re();
        out[dummy] = ZC;
        for k in 0..nzi {
            let base = k * nc;
            for p in 0..nc {
                let idx = base + p;
                let mut acc = (Complex64::new(diag, 0.0) + self.z[idx].conj()) * y[idx];
                // the row at -axis couples here via its +axis coefficient
                for (ax, tm, tp) in [(0usize, &self.xm, &self.xp), (1, &self.ym, &self.yp)] {
                    let im = tm[p];
                    let below = if im == NO_CROSS { dummy } else { base + im as usize };
                    let cb = Complex64::new(
                        self.fp[ax] * self.inv_h2[ax],
                        -self.fp[ax] * self.a[ax][below] * self.inv_h[ax],
                    );
                    acc += cb * y[below];
                    let ip = tp[p];
                    let above = if ip == NO_CROSS { dummy } else { base + ip as usize };
                    let ca = Complex64::new(
                        self.fm[ax] * self.inv_h2[ax],
                        self.fm[ax] * self.a[ax][above] * self.inv_h[ax],
                    );
                    acc += ca * y[above];
                }
                let below = if k > 0 { idx - nc } else { dummy };
                let cb = Complex64::new(
                    self.inv_h2[2],
                    -self.a[2][below] * self.inv_h[2],
                );
                acc += cb * y[below];
                let above = if k + 1 < nzi { idx + nc } else { dummy };
                let ca = Complex64::new(
                    self.inv_h2[2],
                    self.a[2][above] * self.inv_h[2],
                );
                acc += ca * y[above];
                out[idx] = acc;
            }
        }
    }

    /// Applies the interior rows to an arbitrary full-lattice vector
    /// (boundary entries read as data). Used for residual checks and for
    /// moving inhomogeneous Dirichlet data to the right-hand side.
    pub fn apply_lattice(&self, v: &[Complex64]) -> Vec<Complex64> {
        let plane = self.grid.nx * self.grid.ny;
        let nx = self.grid.nx;
        let diag = self.diag_re();
        let mut out = self.packed_zeros();
        for (idx, &lu) in self.lattice_of.iter().enumerate() {
            let lin = lu as usize;
            let mut acc = (Complex64::new(diag, 0.0) + self.z[idx]) * v[lin];
            let strides = [1usize, nx, plane];
            for ax in 0..3 {
                let (cp, cm) = self.coef_pair(ax, self.a[ax][idx]);
                acc += cp * v[lin + strides[ax]] + cm * v[lin - strides[ax]];
            }
            out[idx] = acc;
        }
        out
    }

    /// RHS contribution of inhomogeneous Dirichlet data: `-P·(extension of
    /// the boundary values by zero)` at interior rows, packed.
    pub fn rhs_from_boundary(&self, boundary_data: &[Complex64]) -> Vec<Complex64> {
        let mut out = self.apply_lattice(boundary_data);
        for v in &mut out {
            *v = -*v;
        }
        out
    }

}

/// Band LU with partial pivoting (LAPACK `gbtrf` layout: `2·kl+ku+1` stored
/// rows, the top `kl` reserved for pivoting fill).
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row-major `(2kl+ku+1) × n`.
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandedLu {
    /// Factors a band matrix given by `entries(row, out)` pushing
    /// `(col, val)` pairs with `|row - col| <= band`.
    pub fn factor(
        n: usize,
        band: usize,
        entries: impl Fn(usize, &mut Vec<(usize, f64)>),
    ) -> Result<Self> {
        let (kl, ku) = (band, band);
        let rows = 2 * kl + ku + 1;
        let mut ab = vec![0.0; rows * n];
        let mut buf = Vec::new();
        for r in 0..n {
            buf.clear();
            entries(r, &mut buf);
            for &(c, v) in &buf {
                debug_assert!(c.abs_diff(r) <= band);
                ab[(kl + ku + r - c) * n + c] = v;
            }
        }
        let mut ipiv = vec![0usize; n];
        let d = kl + ku;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut jp = 0;
            let mut best = ab[d * n + j].abs();
            for i in 1..=km {
                let v = ab[(d + i) * n + j].abs();
                if v > best {
                    best = v;
                    jp = i;
                }
            }
            ipiv[j] = j + jp;
            if best == 0.0 {
                return Err(CgoError::Solver(format!(
                    "band LU: zero pivot at column {j}"
                )));
            }
            let ju = (j + kl + ku).min(n - 1);
            if jp != 0 {
                for c in j..=ju {
                    ab.swap((d + j - c + jp) * n + c, (d + j - c) * n + c);
                }
            }
            let piv = ab[d * n + j];
            for i in 1..=km {
                ab[(d + i) * n + j] /= piv;
            }
            for c in (j + 1)..=ju {
                let tmp = ab[(d + j - c) * n + c];
                if tmp != 0.0 {
                    for i in 1..=km {
                        ab[(d + j + i - c) * n + c] -= tmp * ab[(d + i) * n + j];
                    }
                }
            }
        }
        Ok(Self { n, kl, ku, ab, ipiv })
    }

    /// Solves `A x = b` in place for a complex right-hand side.
    pub fn solve(&self, b: &mut [Complex64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let d = kl + ku;
        for j in 0..n {
            if self.ipiv[j] != j {
                b.swap(j, self.ipiv[j]);
            }
            let km = kl.min(n - 1 - j);
            let bj = b[j];
            if bj != ZC {
                for i in 1..=km {
                    let m = self.ab[(d + i) * n + j];
                    if m != 0.0 {
                        b[j + i] -= bj * m;
                    }
                }
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.ab[d * n + j];
            let bj = b[j];
            if bj != ZC {
                let lm = d.min(j);
                for i in 1..=lm {
                    let u = self.ab[(d - i) * n + j];
                    if u != 0.0 {
                        b[j - i] -= bj * u;
                    }
                }
            }
        }
    }

    /// Solves `Aᵀ x = b` in place using the same factorization.
    pub fn solve_transposed(&self, b: &mut [Complex64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let d = kl + ku;
        for j in 0..n {
            let lm = d.min(j);
            let mut s = b[j];
            for i in 1..=lm {
                let u = self.ab[(d - i) * n + j];
                if u != 0.0 {
                    s -= b[j - i] * u;
                }
            }
            b[j] = s / self.ab[d * n + j];
        }
        for j in (0..n).rev() {
            let km = kl.min(n - 1 - j);
            let mut s = b[j];
            for i in 1..=km {
                let m = self.ab[(d + i) * n + j];
                if m != 0.0 {
                    s -= b[j + i] * m;
                }
            }
            b[j] = s;
            if self.ipiv[j] != j {
                b.swap(j, self.ipiv[j]);
            }
        }
    }
}

/// Symmetric positive definite band factorization `A = L Lᵀ` without
/// pivoting, lower triangle stored column-major with leading dimension
/// `band + 1`.
pub struct BandedCholesky {
    n: usize,
    band: usize,
    ab: Vec<f64>,
}

impl BandedCholesky {
    /// Factors in place; on entry `ab[j*(band+1) + (i-j)]` holds `A[i][j]`
    /// for `j <= i <= min(j+band, n-1)`. Fails on a non-positive pivot.
    pub fn factor(n: usize, band: usize, mut ab: Vec<f64>) -> Result<Self> {
        let ld = band + 1;
        assert_eq!(ab.len(), n * ld);
        for j in 0..n {
            let d = ab[j * ld];
            if d <= 0.0 {
                return Err(CgoError::Solver(format!(
                    "band Cholesky: non-positive pivot {d:.3e} at column {j}"
                )));
            }
            let piv = d.sqrt();
            ab[j * ld] = piv;
            let kn = band.min(n - 1 - j);
            for i in 1..=kn {
                ab[j * ld + i] /= piv;
            }
            for c in 1..=kn {
                let vc = ab[j * ld + c];
                if vc != 0.0 {
                    let base = (j + c) * ld;
                    for i in c..=kn {
                        ab[base + (i - c)] -= ab[j * ld + i] * vc;
                    }
                }
            }
        }
        Ok(Self { n, band, ab })
    }

    /// Solves `A x = b` in place for a complex right-hand side.
    pub fn solve(&self, b: &mut [Complex64]) {
        let (n, ld) = (self.n, self.band + 1);
        for j in 0..n {
            b[j] /= self.ab[j * ld];
            let bj = b[j];
            if bj != ZC {
                let kn = self.band.min(n - 1 - j);
                for i in 1..=kn {
                    let l = self.ab[j * ld + i];
                    if l != 0.0 {
                        b[j + i] -= bj * l;
                    }
                }
            }
        }
        for j in (0..n).rev() {
            let kn = self.band.min(n - 1 - j);
            let mut s = b[j];
            for i in 1..=kn {
                let l = self.ab[j * ld + i];
                if l != 0.0 {
                    s -= b[j + i] * l;
                }
            }
            b[j] = s / self.ab[j * ld];
        }
    }
}

/// Type-I discrete sine transform of length `n` via a complex FFT of length
/// `2(n+1)`; DST-I is its own inverse up to the factor `2/(n+1)`.
pub struct DstPlan {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
    ext: Vec<Complex64>,
}

impl DstPlan {
    pub fn new(planner: &mut FftPlanner<f64>, n: usize) -> Self {
        let m = 2 * (n + 1);
        Self {
            n,
            fft: planner.plan_fft_forward(m),
            ext: vec![ZC; m],
        }
    }

    /// In-place unnormalized DST-I: `y_m = Σ_k x_k sin(π k m/(n+1))`.
    pub fn forward(&mut self, line: &mut [Complex64]) {
        let n = self.n;
        let m = 2 * (n + 1);
        self.ext[0] = ZC;
        self.ext[n + 1] = ZC;
        for k in 0..n {
            self.ext[k + 1] = line[k];
            self.ext[m - 1 - k] = -line[k];
        }
        self.fft.process(&mut self.ext);
        let half_i = Complex64::new(0.0, 0.5);
        for k in 0..n {
            line[k] = half_i * self.ext[k + 1];
        }
    }
}

/// Preconditioner for the damped normal equations: exact axial
/// diagonalization plus shift-bucketed band Cholesky factors of
/// `TᵀT + λ²I`, where `T` is the constant-coefficient cross operator of a
/// mode bucket. The cross matrices are real, and flipping the weight sign
/// swaps the two conjugation factors, so the flipped-sign normal matrices
/// are `TTᵀ + λ²I`; those factors are built on first use from the same
/// neighbor tables with the weights swapped.
pub struct AxialModePreconditioner {
    nc: usize,
    nzi: usize,
    built_sigma: f64,
    lambda: f64,
    band: usize,
    diag: f64,
    /// Off-diagonal stencil weights in table order `xp, xm, yp, ym`.
    weights: [f64; 4],
    xp: Vec<u32>,
    xm: Vec<u32>,
    yp: Vec<u32>,
    ym: Vec<u32>,
    reps: Vec<f64>,
    used: Vec<bool>,
    mode_bucket: Vec<usize>,
    same: Vec<Option<BandedCholesky>>,
    flip: Vec<Option<BandedCholesky>>,
    dst: DstPlan,
    dst_scale: f64,
    modal: Vec<Complex64>,
    line: Vec<Complex64>,
}

/// Assembles and factors `TᵀT + λ²I` for one cross matrix `T` given by a
/// five-point row stencil: pair products of entries within a row land in
/// the normal matrix at their column pair, doubling the bandwidth.
fn banded_normal_factor(
    nc: usize,
    band2: usize,
    lambda2: f64,
    mu: f64,
    diag: f64,
    tables: [&[u32]; 4],
    weights: [f64; 4],
) -> Result<BandedCholesky> {
    let ld = band2 + 1;
    let mut ab = vec![0.0f64; nc * ld];
    let mut ent: [(usize, f64); 5] = [(0, 0.0); 5];
    for r in 0..nc {
        ent[0] = (r, diag + mu);
        let mut ne = 1usize;
        for (tab, &w) in tables.iter().zip(&weights) {
            let q = tab[r];
            if q != NO_CROSS {
                ent[ne] = (q as usize, w);
                ne += 1;
            }
        }
        for a in 0..ne {
            let (ca, va) = ent[a];
            ab[ca * ld] += va * va;
            for b in (a + 1)..ne {
                let (cb, vb) = ent[b];
                let (hi, lo) = if ca >= cb { (ca, cb) } else { (cb, ca) };
                ab[lo * ld + (hi - lo)] += va * vb;
            }
        }
    }
    for r in 0..nc {
        ab[r * ld] += lambda2;
    }
    BandedCholesky::factor(nc, band2, ab)
}

impl AxialModePreconditioner {
    pub fn build(op: &CgoOperator, buckets: usize, lambda: f64) -> Result<Self> {
        let grid = &op.grid;
        let nc = op.nc;
        let nzi = op.nzi;
        let hz2 = grid.hz * grid.hz;
        let mus: Vec<f64> = (1..=nzi)
            .map(|m| {
                let s = (std::f64::consts::PI * m as f64 / (2.0 * (nzi + 1) as f64)).sin();
                -4.0 * s * s / hz2
            })
            .collect();
        let lo = mus.iter().fold(f64::INFINITY, |acc, &m| acc.min(-m));
        let hi = mus.iter().fold(0.0f64, |acc, &m| acc.max(-m));
        let (llo, lhi) = (lo.ln(), hi.ln().max(lo.ln() + 1e-9));
        let nb = buckets.max(1);
        let mode_bucket: Vec<usize> = mus
            .iter()
            .map(|&m| {
                let t = ((-m).ln() - llo) / (lhi - llo) * nb as f64;
                (t.floor() as usize).min(nb - 1)
            })
            .collect();
        let reps: Vec<f64> = (0..nb)
            .map(|t| -((llo + (t as f64 + 0.5) / nb as f64 * (lhi - llo)).exp()))
            .collect();

        let mut band = 0usize;
        for p in 0..nc {
            for t in [&op.xp, &op.xm, &op.yp, &op.ym] {
                let q = t[p];
                if q != NO_CROSS {
                    band = band.max(p.abs_diff(q as usize));
                }
            }
        }

        let inv_h2 = 1.0 / (grid.hx * grid.hx);
        let mut used = vec![false; nb];
        for &b in &mode_bucket {
            used[b] = true;
        }
        let mut planner = FftPlanner::new();
        let dst = DstPlan::new(&mut planner, nzi);
        let mut built = Self {
            nc,
            nzi,
            built_sigma: op.weight.sigma,
            lambda,
            band,
            diag: -4.0 * inv_h2,
            weights: [
                op.fp[0] * inv_h2,
                op.fm[0] * inv_h2,
                op.fp[1] * inv_h2,
                op.fm[1] * inv_h2,
            ],
            xp: op.xp.clone(),
            xm: op.xm.clone(),
            yp: op.yp.clone(),
            ym: op.ym.clone(),
            reps,
            used,
            mode_bucket,
            same: Vec::new(),
            flip: Vec::new(),
            dst,
            dst_scale: 2.0 / (nzi + 1) as f64,
            modal: vec![ZC; nc * nzi],
            line: vec![ZC; nzi],
        };
        built.same = built.factor_sign(false)?;
        Ok(built)
    }

    /// Factors every used bucket for one weight sign; the flipped sign
    /// swaps the plus and minus conjugation weights.
    fn factor_sign(&self, flipped: bool) -> Result<Vec<Option<BandedCholesky>>> {
        let w = if flipped {
            [
                self.weights[1],
                self.weights[0],
                self.weights[3],
                self.weights[2],
            ]
        } else {
            self.weights
        };
        let l2d = self.lambda * self.lambda;
        let mut out = Vec::with_capacity(self.reps.len());
        for (t, &is_used) in self.used.iter().enumerate() {
            if !is_used {
                out.push(None);
                continue;
            }
            out.push(Some(banded_normal_factor(
                self.nc,
                2 * self.band,
                l2d,
                self.reps[t],
                self.diag,
                [&self.xp, &self.xm, &self.yp, &self.ym],
                w,
            )?));
        }
        Ok(out)
    }

    /// Checks the factors fit the given operator (same grid shape and weight
    /// magnitude; either sign is fine) at the given damping.
    pub fn compatible(&self, op: &CgoOperator, lambda: f64) -> bool {
        self.nc == op.nc
            && self.nzi == op.nzi
            && (self.lambda - lambda).abs() <= 1e-12 * lambda.abs().max(1.0)
    }

    /// `out = (P₀ᴴP₀ + λ²)⁻¹ b` for the separable part of an operator with
    /// weight sign `sigma`.
    pub fn solve_normal(
        &mut self,
        sigma: f64,
        b: &[Complex64],
        out: &mut [Complex64],
    ) -> Result<()> {
        let flipped = sigma != self.built_sigma;
        if flipped && self.flip.is_empty() {
            self.flip = self.factor_sign(true)?;
        }
        let (nc, nz) = (self.nc, self.nzi);
        out.copy_from_slice(b);
        let v = &mut out[..nc * nz];
        for p in 0..nc {
            for k in 0..nz {
                self.line[k] = v[k * nc + p];
            }
            self.dst.forward(&mut self.line);
            for k in 0..nz {
                self.modal[k * nc + p] = self.line[k];
            }
        }
        let set = if flipped { &self.flip } else { &self.same };
        for m in 0..nz {
            let ch = set[self.mode_bucket[m]]
                .as_ref()
                .expect("bucket factor present for used mode");
            ch.solve(&mut self.modal[m * nc..(m + 1) * nc]);
        }
        for p in 0..nc {
            for k in 0..nz {
                self.line[k] = self.modal[k * nc + p];
            }
            self.dst.forward(&mut self.line);
            for k in 0..nz {
                v[k * nc + p] = self.line[k] * self.dst_scale;
            }
        }
        out[nc * nz] = ZC;
        Ok(())
    }
}

/// Solver controls.
#[derive(Debug, Clone)]
pub struct SolveParams {
    pub rel_tol: f64,
    pub max_iters: usize,
    pub damping_factor: f64,
    pub precondition: bool,
    /// Shift buckets for the preconditioner factors.
    pub buckets: usize,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            rel_tol: tol::SOLVER_REL_RESIDUAL,
            max_iters: tol::SOLVER_MAX_ITERS,
            damping_factor: tol::SOLVER_DAMPING_FACTOR,
            precondition: true,
            buckets: 48,
        }
    }
}

/// Convergence record of one solve.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SolveInfo {
    pub iterations: usize,
    pub rel_residual: f64,
    /// Relative residual of the damped normal equations at exit; the
    /// convergence indicator when damping keeps `rel_residual` above the
    /// target.
    pub grad_residual: f64,
    pub damping: f64,
    pub preconditioned: bool,
}

/// Solves `min ‖P w - g‖² + λ²‖w‖²` with `λ = damping_factor · ρ` by
/// conjugate gradients on the damped normal equations
/// `(PᴴP + λ²) w = Pᴴ g`, preconditioned by the exact damped normal
/// inverse of the constant-coefficient part. The conjugated operator is
/// severely non-normal: modes shaped like the inverse weight concentrate
/// at the section boundary and carry exponentially small singular values,
/// and the plain truncated-cylinder solve pollutes the remainder with
/// them. The norm penalty selects the small-norm near-solution instead,
/// which is the one the resolvent estimates control; the price is a
/// residual floor far below the scheme's own consistency error. All
/// vectors are packed; returns the packed solution and the convergence
/// record, and errors if neither the residual target nor the
/// normal-equations target is reached. A prebuilt preconditioner may be
/// shared across solves on the same grid at the same damping (both weight
/// signs).
pub fn solve_damped_least_squares(
    op: &CgoOperator,
    rhs: &[Complex64],
    params: &SolveParams,
    shared: Option<&mut AxialModePreconditioner>,
) -> Result<(Vec<Complex64>, SolveInfo)> {
    let n = op.n_unknowns();
    assert_eq!(rhs.len(), n + 1);
    let lambda = params.damping_factor * op.weight.rho;
    let mut owned: Option<AxialModePreconditioner>;
    let precond: Option<&mut AxialModePreconditioner> = if params.precondition {
        match shared {
            Some(m) => {
                if !m.compatible(op, lambda) {
                    return Err(CgoError::Solver(
                        "shared preconditioner does not match the operator grid and damping"
                            .into(),
                    ));
                }
                Some(m)
            }
            None => {
                owned = Some(AxialModePreconditioner::build(op, params.buckets, lambda)?);
                owned.as_mut()
            }
        }
    } else {
        None
    };
    let sigma = op.weight.sigma;

    let norm_g = l2(rhs);
    let mut x = op.packed_zeros();
    if norm_g == 0.0 {
        return Ok((
            x,
            SolveInfo {
                iterations: 0,
                rel_residual: 0.0,
                grad_residual: 0.0,
                damping: lambda,
                preconditioned: params.precondition,
            },
        ));
    }

    let l2d = lambda * lambda;
    let mut c = op.packed_zeros();
    op.apply_adjoint(rhs, &mut c);
    let norm_c = l2(&c);

    let mut r = c;
    let mut z = op.packed_zeros();
    let mut t = op.packed_zeros();
    let mut q = op.packed_zeros();
    let mut precond = precond;
    match precond.as_deref_mut() {
        Some(m) => m.solve_normal(sigma, &r, &mut z)?,
        None => z.copy_from_slice(&r),
    }
    let mut p = z.clone();
    let mut gamma = re_dot(&r, &z);
    let mut iters = 0usize;
    let mut grad_rel = if norm_c == 0.0 { 0.0 } else { 1.0 };

    while iters < params.max_iters && grad_rel > params.rel_tol {
        op.apply(&p, &mut t);
        op.apply_adjoint(&t, &mut q);
        if l2d > 0.0 {
            for i in 0..n {
                q[i] += p[i] * l2d;
            }
        }
        let delta = re_dot(&p, &q);
        if delta <= 0.0 {
            break;
        }
        let alpha = gamma / delta;
        for i in 0..n {
            x[i] += p[i] * alpha;
            r[i] -= q[i] * alpha;
        }
        iters += 1;
        grad_rel = l2(&r) / norm_c;
        if grad_rel <= params.rel_tol {
            break;
        }
        match precond.as_deref_mut() {
            Some(m) => m.solve_normal(sigma, &r, &mut z)?,
            None => z.copy_from_slice(&r),
        }
        let gamma_new = re_dot(&r, &z);
        if gamma_new <= 0.0 {
            break;
        }
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        for i in 0..n {
            p[i] = z[i] + p[i] * beta;
        }
    }

    // recompute the residual of the original system from scratch
    op.apply(&x, &mut t);
    let mut rr = 0.0;
    for i in 0..=n {
        rr += (rhs[i] - t[i]).norm_sqr();
    }
    let rel_final = rr.sqrt() / norm_g;
    let info = SolveInfo {
        iterations: iters,
        rel_residual: rel_final,
        grad_residual: grad_rel,
        damping: lambda,
        preconditioned: params.precondition,
    };
    let converged = rel_final <= params.rel_tol || grad_rel <= params.rel_tol;
    if !converged {
        return Err(CgoError::Solver(format!(
            "least-squares solve stalled: residual {rel_final:.3e}, normal-equations \
             residual {grad_rel:.3e} after {iters} iterations (target {:.1e})",
            params.rel_tol
        )));
    }
    Ok((x, info))
}

fn l2(v: &[Complex64]) -> f64 {
    norm_sqr(v).sqrt()
}

fn re_dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x.conj() * y).re).sum()
}

fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// General conjugated apply with a nodal weight field: evaluates
/// `e^{-φ}(Δ + 2iA·∇ + Z)e^{φ} v` at the given lattice rows through
/// stencil-local weight ratios. Every row must have all six lattice
/// neighbors. Rejects weight increments that would overflow `exp`.
pub fn conjugated_apply_general(
    grid: &CylinderGrid,
    phi: &[f64],
    a: &VectorPotential,
    z: &[Complex64],
    v: &[Complex64],
    rows: &[u32],
) -> Result<Vec<Complex64>> {
    let n = grid.n_nodes();
    let strides = [1usize, grid.nx, grid.nx * grid.ny];
    let inv_h2 = [
        1.0 / (grid.hx * grid.hx),
        1.0 / (grid.hx * grid.hx),
        1.0 / (grid.hz * grid.hz),
    ];
    let inv_h = [1.0 / grid.hx, 1.0 / grid.hx, 1.0 / grid.hz];
    let mut out = vec![ZC; n];
    let diag_re = -2.0 * (inv_h2[0] + inv_h2[1] + inv_h2[2]);
    for &lu in rows {
        let lin = lu as usize;
        let mut acc = (Complex64::new(diag_re, 0.0) + z[lin]) * v[lin];
        for ax in 0..3 {
            let (up, dn) = (lin + strides[ax], lin - strides[ax]);
            let dp = phi[up] - phi[lin];
            let dm = phi[dn] - phi[lin];
            if dp.abs() > 700.0 || dm.abs() > 700.0 {
                return Err(CgoError::Carleman(
                    "weight increment overflows the exponential".into(),
                ));
            }
            let (ep, em) = (dp.exp(), dm.exp());
            let aval = a.comp[ax][lin];
            let cp = Complex64::new(ep * inv_h2[ax], ep * aval * inv_h[ax]);
            let cm = Complex64::new(em * inv_h2[ax], -em * aval * inv_h[ax]);
            acc += cp * v[up] + cm * v[dn];
        }
        out[lin] = acc;
    }
    Ok(out)
}
