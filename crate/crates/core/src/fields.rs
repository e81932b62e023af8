//! Lattice fields over the cylinder grid: synthetic potentials with
//! closed-form oracles, mollification, difference operators, and the
//! frequency-weighted Sobolev norms.

use std::sync::Arc;
use std::sync::OnceLock;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{CgoError, Result};
use crate::geometry::{CylinderGrid, IndexBox};

/// Complex scalar field on the full lattice box.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub grid: Arc<CylinderGrid>,
    pub data: Vec<Complex64>,
}

/// Real scalar field on the full lattice box (electric potentials, gauge
/// functions, weights).
#[derive(Debug, Clone)]
pub struct RealField {
    pub grid: Arc<CylinderGrid>,
    pub data: Vec<f64>,
    pub spec: Option<ScalarSpec>,
}

/// Real vector field `A = (a₁, a₂, a₃)` on the full lattice box, extended by
/// zero outside its compact support.
#[derive(Debug, Clone)]
pub struct VectorPotential {
    pub grid: Arc<CylinderGrid>,
    pub comp: [Vec<f64>; 3],
    /// Half-width of the axial support interval around 0.
    pub axial_support: f64,
    /// Closed form used to synthesize the field, when one exists; lets the
    /// CGO stage resample on refined lattices without interpolation loss.
    pub spec: Option<PotentialSpec>,
}

/// Which closed form the gradient-field generator samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GradientVariant {
    /// Sample the analytic `∇φ`; exact continuum structure, but its
    /// centered-difference curl is only O(h²) small.
    #[default]
    Analytic,
    /// Centered-difference gradient of sampled `φ`; discretely curl-free to
    /// rounding because centered differences commute.
    Lattice,
}

/// Synthetic vector potential families. All are compactly supported in
/// `ω × (-L/2, L/2)` (validated at sampling time) with C^∞ profiles unless
/// noted.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PotentialSpec {
    /// `A_i = amp_i · B(t)` for a shared smooth compact bump profile.
    GaussianBump {
        center: [f64; 3],
        radius_plane: f64,
        radius_axial: f64,
        amplitude: [f64; 3],
    },
    /// `A = ∇φ` for `φ = amp · B(t)`; curl-free by construction.
    GradientField {
        center: [f64; 3],
        radius_plane: f64,
        radius_axial: f64,
        amplitude: f64,
        #[serde(default)]
        variant: GradientVariant,
    },
    /// `A = (0, amp·(x₁-c₁)·P(t), 0)` whose curl is order `amp` near the
    /// center. `sharp` replaces the smooth profile by the indicator of the
    /// support ellipsoid: a bounded field with a jump, whose mollification
    /// error decays slowly in ρ.
    CurlCarrier {
        center: [f64; 3],
        radius_plane: f64,
        radius_axial: f64,
        amplitude: f64,
        #[serde(default)]
        sharp: bool,
    },
    Zero,
}

/// Synthetic real scalar families (electric potentials).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScalarSpec {
    Bump {
        center: [f64; 3],
        radius_plane: f64,
        radius_axial: f64,
        amplitude: f64,
    },
    Zero,
}

/// Smooth compact bump profile `B(t) = exp(-t²/(1-t²))` for `t < 1`, zero
/// beyond; Gaussian-like near the center, C^∞ with support exactly `t ≤ 1`.
pub fn bump_profile(t2: f64) -> f64 {
    if t2 >= 1.0 {
        0.0
    } else {
        (-t2 / (1.0 - t2)).exp()
    }
}

/// `d B / d(t²) = -B(t) / (1-t²)²`.
fn bump_profile_d(t2: f64) -> f64 {
    if t2 >= 1.0 {
        0.0
    } else {
        let om = 1.0 - t2;
        -bump_profile(t2) / (om * om)
    }
}

fn anisotropic_t2(p: [f64; 3], center: [f64; 3], rp: f64, rz: f64) -> f64 {
    let dx = p[0] - center[0];
    let dy = p[1] - center[1];
    let dz = p[2] - center[2];
    (dx * dx + dy * dy) / (rp * rp) + dz * dz / (rz * rz)
}

/// Gradient of `t² ↦ B` composed with the anisotropic radius, i.e. `∇B(x)`.
fn bump_grad(p: [f64; 3], center: [f64; 3], rp: f64, rz: f64) -> [f64; 3] {
    let t2 = anisotropic_t2(p, center, rp, rz);
    let d = bump_profile_d(t2);
    [
        d * 2.0 * (p[0] - center[0]) / (rp * rp),
        d * 2.0 * (p[1] - center[1]) / (rp * rp),
        d * 2.0 * (p[2] - center[2]) / (rz * rz),
    ]
}

impl PotentialSpec {
    /// Closed-form evaluation at an arbitrary point. For the `Lattice`
    /// gradient variant this is the analytic gradient; the lattice variant
    /// differs from it by O(h²) only on the sampling grid.
    pub fn eval(&self, p: [f64; 3]) -> [f64; 3] {
        match *self {
            PotentialSpec::Zero => [0.0; 3],
            PotentialSpec::GaussianBump {
                center,
                radius_plane,
                radius_axial,
                amplitude,
            } => {
                let b = bump_profile(anisotropic_t2(p, center, radius_plane, radius_axial));
                [amplitude[0] * b, amplitude[1] * b, amplitude[2] * b]
            }
            PotentialSpec::GradientField {
                center,
                radius_plane,
                radius_axial,
                amplitude,
                ..
            } => {
                let g = bump_grad(p, center, radius_plane, radius_axial);
                [amplitude * g[0], amplitude * g[1], amplitude * g[2]]
            }
            PotentialSpec::CurlCarrier {
                center,
                radius_plane,
                radius_axial,
                amplitude,
                sharp,
            } => {
                let t2 = anisotropic_t2(p, center, radius_plane, radius_axial);
                let prof = if sharp {
                    if t2 < 1.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    bump_profile(t2)
                };
                [0.0, amplitude * (p[0] - center[0]) * prof, 0.0]
            }
        }
    }

    /// Closed-form curl `(∂₂a₃-∂₃a₂, ∂₃a₁-∂₁a₃, ∂₁a₂-∂₂a₁)`, when the
    /// profile is smooth enough to have one.
    pub fn curl_closed_form(&self, p: [f64; 3]) -> Option<[f64; 3]> {
        match *self {
            PotentialSpec::Zero => Some([0.0; 3]),
            PotentialSpec::GradientField { .. } => Some([0.0; 3]),
            PotentialSpec::GaussianBump {
                center,
                radius_plane,
                radius_axial,
                amplitude,
            } => {
                let g = bump_grad(p, center, radius_plane, radius_axial);
                Some([
                    g[1] * amplitude[2] - g[2] * amplitude[1],
                    g[2] * amplitude[0] - g[0] * amplitude[2],
                    g[0] * amplitude[1] - g[1] * amplitude[0],
                ])
            }
            PotentialSpec::CurlCarrier {
                center,
                radius_plane,
                radius_axial,
                amplitude,
                sharp,
            } => {
                if sharp {
                    return None;
                }
                let t2 = anisotropic_t2(p, center, radius_plane, radius_axial);
                let b = bump_profile(t2);
                let g = bump_grad(p, center, radius_plane, radius_axial);
                let x1 = p[0] - center[0];
                Some([-amplitude * x1 * g[2], 0.0, amplitude * (b + x1 * g[0])])
            }
        }
    }

    /// The gauge function `φ` whose gradient a `GradientField` samples.
    pub fn gauge_phi(&self, p: [f64; 3]) -> Option<f64> {
        match *self {
            PotentialSpec::GradientField {
                center,
                radius_plane,
                radius_axial,
                amplitude,
                ..
            } => Some(amplitude * bump_profile(anisotropic_t2(p, center, radius_plane, radius_axial))),
            _ => None,
        }
    }

    fn support_params(&self) -> Option<([f64; 3], f64, f64)> {
        match *self {
            PotentialSpec::Zero => None,
            PotentialSpec::GaussianBump {
                center,
                radius_plane,
                radius_axial,
                ..
            }
            | PotentialSpec::GradientField {
                center,
                radius_plane,
                radius_axial,
                ..
            }
            | PotentialSpec::CurlCarrier {
                center,
                radius_plane,
                radius_axial,
                ..
            } => Some((center, radius_plane, radius_axial)),
        }
    }

    /// Samples the potential on a grid after validating that its support
    /// sits strictly inside `ω × (-L/2, L/2)`.
    pub fn sample(&self, grid: &Arc<CylinderGrid>) -> Result<VectorPotential> {
        let mut axial_support = 0.0;
        if let Some((center, rp, rz)) = self.support_params() {
            validate_support(grid, center, rp, rz)?;
            axial_support = center[2].abs() + rz;
        }
        let n = grid.n_nodes();
        let mut comp = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        match self {
            PotentialSpec::GradientField {
                center,
                radius_plane,
                radius_axial,
                amplitude,
                variant: GradientVariant::Lattice,
            } => {
                let mut phi = vec![0.0; n];
                for k in 0..grid.nz {
                    for j in 0..grid.ny {
                        for i in 0..grid.nx {
                            let p = grid.pos(i, j, k);
                            phi[grid.idx(i, j, k)] = amplitude
                                * bump_profile(anisotropic_t2(
                                    p,
                                    *center,
                                    *radius_plane,
                                    *radius_axial,
                                ));
                        }
                    }
                }
                for (axis, c) in comp.iter_mut().enumerate() {
                    *c = centered_diff(grid, &phi, axis);
                }
            }
            _ => {
                for k in 0..grid.nz {
                    for j in 0..grid.ny {
                        for i in 0..grid.nx {
                            let v = self.eval(grid.pos(i, j, k));
                            let lin = grid.idx(i, j, k);
                            comp[0][lin] = v[0];
                            comp[1][lin] = v[1];
                            comp[2][lin] = v[2];
                        }
                    }
                }
            }
        }
        Ok(VectorPotential {
            grid: Arc::clone(grid),
            comp,
            axial_support,
            spec: Some(self.clone()),
        })
    }
}

impl ScalarSpec {
    pub fn eval(&self, p: [f64; 3]) -> f64 {
        match *self {
            ScalarSpec::Zero => 0.0,
            ScalarSpec::Bump {
                center,
                radius_plane,
                radius_axial,
                amplitude,
            } => amplitude * bump_profile(anisotropic_t2(p, center, radius_plane, radius_axial)),
        }
    }

    pub fn sample(&self, grid: &Arc<CylinderGrid>) -> Result<RealField> {
        if let ScalarSpec::Bump {
            center,
            radius_plane,
            radius_axial,
            ..
        } = *self
        {
            validate_support(grid, center, radius_plane, radius_axial)?;
        }
        let mut data = vec![0.0; grid.n_nodes()];
        for k in 0..grid.nz {
            for j in 0..grid.ny {
                for i in 0..grid.nx {
                    data[grid.idx(i, j, k)] = self.eval(grid.pos(i, j, k));
                }
            }
        }
        Ok(RealField {
            grid: Arc::clone(grid),
            data,
            spec: Some(self.clone()),
        })
    }
}

fn validate_support(grid: &CylinderGrid, center: [f64; 3], rp: f64, rz: f64) -> Result<()> {
    if !(rp > 0.0) || !(rz > 0.0) {
        return Err(CgoError::Field(format!(
            "support radii must be positive, got ({rp}, {rz})"
        )));
    }
    let half = grid.half_length / 2.0;
    if center[2].abs() + rz >= half {
        return Err(CgoError::Field(format!(
            "axial support [{:.3}, {:.3}] leaves (-L/2, L/2) = (-{half:.3}, {half:.3})",
            center[2] - rz,
            center[2] + rz
        )));
    }
    let c = [center[0], center[1]];
    if !grid.section.contains(c) {
        return Err(CgoError::Field("support center lies outside ω".into()));
    }
    let n = grid.section.num_segments();
    let verts = grid.section.vertices();
    let mut dist = f64::INFINITY;
    for i in 0..n {
        let a = verts[i];
        let b = verts[(i + 1) % n];
        dist = dist.min(point_segment_distance(c, a, b));
    }
    if dist <= rp {
        return Err(CgoError::Field(format!(
            "planar support radius {rp:.3} reaches ∂ω (distance {dist:.3})"
        )));
    }
    Ok(())
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0);
    let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

/// Centered difference along `axis` with zero extension at the box faces
/// (fields are compactly supported away from them).
pub fn centered_diff(grid: &CylinderGrid, data: &[f64], axis: usize) -> Vec<f64> {
    let n = grid.n_nodes();
    let mut out = vec![0.0; n];
    let (stride, count, h) = match axis {
        0 => (1usize, grid.nx, grid.hx),
        1 => (grid.nx, grid.ny, grid.hx),
        2 => (grid.nx * grid.ny, grid.nz, grid.hz),
        _ => panic!("axis out of range"),
    };
    let inv2h = 0.5 / h;
    for lin in 0..n {
        let along = match axis {
            0 => lin % grid.nx,
            1 => (lin / grid.nx) % grid.ny,
            _ => lin / (grid.nx * grid.ny),
        };
        let up = if along + 1 < count {
            data[lin + stride]
        } else {
            0.0
        };
        let dn = if along > 0 { data[lin - stride] } else { 0.0 };
        out[lin] = (up - dn) * inv2h;
    }
    out
}

/// Centered difference of a complex field along `axis`.
pub fn centered_diff_c(grid: &CylinderGrid, data: &[Complex64], axis: usize) -> Vec<Complex64> {
    let n = grid.n_nodes();
    let zero = Complex64::new(0.0, 0.0);
    let mut out = vec![zero; n];
    let (stride, count, h) = match axis {
        0 => (1usize, grid.nx, grid.hx),
        1 => (grid.nx, grid.ny, grid.hx),
        2 => (grid.nx * grid.ny, grid.nz, grid.hz),
        _ => panic!("axis out of range"),
    };
    let inv2h = 0.5 / h;
    for lin in 0..n {
        let along = match axis {
            0 => lin % grid.nx,
            1 => (lin / grid.nx) % grid.ny,
            _ => lin / (grid.nx * grid.ny),
        };
        let up = if along + 1 < count {
            data[lin + stride]
        } else {
            zero
        };
        let dn = if along > 0 { data[lin - stride] } else { zero };
        out[lin] = (up - dn) * inv2h;
    }
    out
}

impl VectorPotential {
    pub fn zero(grid: &Arc<CylinderGrid>) -> Self {
        let n = grid.n_nodes();
        Self {
            grid: Arc::clone(grid),
            comp: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            axial_support: 0.0,
            spec: Some(PotentialSpec::Zero),
        }
    }

    /// Sup norm over all components and nodes.
    pub fn sup_norm(&self) -> f64 {
        self.comp
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0, |m, &v| m.max(v.abs()))
    }

    /// `L²` norm over the whole box (the fields vanish outside `ω̄`, so this
    /// is the ℝ³ norm of the zero extension).
    pub fn l2_norm(&self) -> f64 {
        let vol = self.grid.cell_volume();
        let s: f64 = self
            .comp
            .iter()
            .map(|c| c.iter().map(|v| v * v).sum::<f64>())
            .sum();
        (s * vol).sqrt()
    }

    /// `‖self - other‖_{L²}` on a shared lattice.
    pub fn l2_distance(&self, other: &VectorPotential) -> Result<f64> {
        if !self.grid.same_lattice(&other.grid) {
            return Err(CgoError::Field(
                "potentials live on different lattices".into(),
            ));
        }
        let vol = self.grid.cell_volume();
        let mut s = 0.0;
        for c in 0..3 {
            for (a, b) in self.comp[c].iter().zip(&other.comp[c]) {
                let d = a - b;
                s += d * d;
            }
        }
        Ok((s * vol).sqrt())
    }

    /// Centered-difference divergence.
    pub fn divergence(&self) -> Vec<f64> {
        let mut out = centered_diff(&self.grid, &self.comp[0], 0);
        let dy = centered_diff(&self.grid, &self.comp[1], 1);
        let dz = centered_diff(&self.grid, &self.comp[2], 2);
        for i in 0..out.len() {
            out[i] += dy[i] + dz[i];
        }
        out
    }

    /// Centered-difference curl `(∂₂a₃-∂₃a₂, ∂₃a₁-∂₁a₃, ∂₁a₂-∂₂a₁)`.
    pub fn curl(&self) -> [Vec<f64>; 3] {
        let g = &self.grid;
        let d2a3 = centered_diff(g, &self.comp[2], 1);
        let d3a2 = centered_diff(g, &self.comp[1], 2);
        let d3a1 = centered_diff(g, &self.comp[0], 2);
        let d1a3 = centered_diff(g, &self.comp[2], 0);
        let d1a2 = centered_diff(g, &self.comp[1], 0);
        let d2a1 = centered_diff(g, &self.comp[0], 1);
        let n = d2a3.len();
        let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for i in 0..n {
            out[0][i] = d2a3[i] - d3a2[i];
            out[1][i] = d3a1[i] - d1a3[i];
            out[2][i] = d1a2[i] - d2a1[i];
        }
        out
    }

    /// Sup norm of the centered-difference gradient over all components.
    pub fn grad_sup_norm(&self) -> f64 {
        let mut m: f64 = 0.0;
        for c in &self.comp {
            for axis in 0..3 {
                let d = centered_diff(&self.grid, c, axis);
                m = d.iter().fold(m, |acc, &v| acc.max(v.abs()));
            }
        }
        m
    }

    /// Smallest index box containing all nodes where any component is
    /// nonzero, or `None` for the zero field.
    pub fn support_box(&self) -> Option<IndexBox> {
        let g = &self.grid;
        let mut bb: Option<IndexBox> = None;
        for k in 0..g.nz {
            for j in 0..g.ny {
                for i in 0..g.nx {
                    let lin = g.idx(i, j, k);
                    if self.comp.iter().any(|c| c[lin] != 0.0) {
                        bb = Some(match bb {
                            None => IndexBox {
                                i0: i,
                                i1: i + 1,
                                j0: j,
                                j1: j + 1,
                                k0: k,
                                k1: k + 1,
                            },
                            Some(b) => IndexBox {
                                i0: b.i0.min(i),
                                i1: b.i1.max(i + 1),
                                j0: b.j0.min(j),
                                j1: b.j1.max(j + 1),
                                k0: b.k0.min(k),
                                k1: b.k1.max(k + 1),
                            },
                        });
                    }
                }
            }
        }
        bb
    }

    /// Re-materializes the potential on another lattice: through the closed
    /// form when available, otherwise by trilinear resampling.
    pub fn sample_on(&self, grid: &Arc<CylinderGrid>) -> Result<VectorPotential> {
        if let Some(spec) = &self.spec {
            return spec.sample(grid);
        }
        let n = grid.n_nodes();
        let mut comp = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for k in 0..grid.nz {
            for j in 0..grid.ny {
                for i in 0..grid.nx {
                    let p = grid.pos(i, j, k);
                    let lin = grid.idx(i, j, k);
                    for c in 0..3 {
                        comp[c][lin] = self.grid.trilinear(&self.comp[c], p);
                    }
                }
            }
        }
        Ok(VectorPotential {
            grid: Arc::clone(grid),
            comp,
            axial_support: self.axial_support,
            spec: None,
        })
    }

    /// Pointwise difference on a shared lattice (gauge perturbations).
    pub fn minus(&self, other: &VectorPotential) -> Result<VectorPotential> {
        if !self.grid.same_lattice(&other.grid) {
            return Err(CgoError::Field(
                "potentials live on different lattices".into(),
            ));
        }
        let mut comp = self.comp.clone();
        for c in 0..3 {
            for (a, b) in comp[c].iter_mut().zip(&other.comp[c]) {
                *a -= b;
            }
        }
        Ok(VectorPotential {
            grid: Arc::clone(&self.grid),
            comp,
            axial_support: self.axial_support.max(other.axial_support),
            spec: None,
        })
    }

    pub fn plus(&self, other: &VectorPotential) -> Result<VectorPotential> {
        if !self.grid.same_lattice(&other.grid) {
            return Err(CgoError::Field(
                "potentials live on different lattices".into(),
            ));
        }
        let mut comp = self.comp.clone();
        for c in 0..3 {
            for (a, b) in comp[c].iter_mut().zip(&other.comp[c]) {
                *a += b;
            }
        }
        Ok(VectorPotential {
            grid: Arc::clone(&self.grid),
            comp,
            axial_support: self.axial_support.max(other.axial_support),
            spec: None,
        })
    }
}

impl ScalarField {
    pub fn zeros(grid: &Arc<CylinderGrid>) -> Self {
        Self {
            grid: Arc::clone(grid),
            data: vec![Complex64::new(0.0, 0.0); grid.n_nodes()],
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// `L²` over the whole box.
    pub fn l2_norm(&self) -> f64 {
        let vol = self.grid.cell_volume();
        let s: f64 = self.data.iter().map(|v| v.norm_sqr()).sum();
        (s * vol).sqrt()
    }

    /// `L²` over the masked cylinder nodes only.
    pub fn l2_norm_masked(&self) -> f64 {
        let g = &self.grid;
        let vol = g.cell_volume();
        let mut s = 0.0;
        for k in 0..g.nz {
            for j in 0..g.ny {
                for i in 0..g.nx {
                    if g.is_masked(i, j) {
                        s += self.data[g.idx(i, j, k)].norm_sqr();
                    }
                }
            }
        }
        (s * vol).sqrt()
    }
}

impl RealField {
    pub fn zeros(grid: &Arc<CylinderGrid>) -> Self {
        Self {
            grid: Arc::clone(grid),
            data: vec![0.0; grid.n_nodes()],
            spec: None,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }

    pub fn sample_on(&self, grid: &Arc<CylinderGrid>) -> Result<RealField> {
        if let Some(spec) = &self.spec {
            return spec.sample(grid);
        }
        let mut data = vec![0.0; grid.n_nodes()];
        for k in 0..grid.nz {
            for j in 0..grid.ny {
                for i in 0..grid.nx {
                    data[grid.idx(i, j, k)] = self.grid.trilinear(&self.data, grid.pos(i, j, k));
                }
            }
        }
        Ok(RealField {
            grid: Arc::clone(grid),
            data,
            spec: None,
        })
    }
}

/// Mollification kernel `χ_ρ(x) = ρ^{3/4} χ(ρ^{1/4} x)` where
/// `χ(y) = c·exp(-1/(1-|y|²))` on `|y| < 1` and `c` normalizes unit mass.
#[derive(Debug, Clone, Copy)]
pub struct Mollifier {
    pub rho: f64,
}

/// Radial integral `∫₀¹ r² e^{-1/(1-r²)} dr` by composite Simpson; the
/// normalization is `c = 1/(4π·I)`.
fn kernel_radial_integral(panels: usize) -> f64 {
    let h = 1.0 / panels as f64;
    let f = |r: f64| {
        if r >= 1.0 {
            0.0
        } else {
            r * r * (-1.0 / (1.0 - r * r)).exp()
        }
    };
    let mut s = f(0.0) + f(1.0);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(i as f64 * h);
    }
    s * h / 3.0
}

static KERNEL_NORMALIZATION: OnceLock<f64> = OnceLock::new();

impl Mollifier {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(CgoError::Field(format!(
                "mollifier scale must be positive, got {rho}"
            )));
        }
        Ok(Self { rho })
    }

    /// Normalization constant `c` of the unit kernel, computed once by
    /// 4096-panel Simpson quadrature.
    pub fn normalization() -> f64 {
        *KERNEL_NORMALIZATION
            .get_or_init(|| 1.0 / (4.0 * std::f64::consts::PI * kernel_radial_integral(4096)))
    }

    /// Independent check value for the radial integral (8192-panel
    /// trapezoid), used by the unit-mass test.
    pub fn radial_integral_check() -> f64 {
        let n = 8192usize;
        let h = 1.0 / n as f64;
        let f = |r: f64| {
            if r >= 1.0 {
                0.0
            } else {
                r * r * (-1.0 / (1.0 - r * r)).exp()
            }
        };
        let mut s = 0.5 * (f(0.0) + f(1.0));
        for i in 1..n {
            s += f(i as f64 * h);
        }
        s * h
    }

    /// Support radius `ρ^{-1/4}` of the scaled kernel.
    pub fn support_radius(&self) -> f64 {
        self.rho.powf(-0.25)
    }

    /// Kernel value at `x`.
    pub fn eval(&self, x: [f64; 3]) -> f64 {
        let s = self.rho.powf(0.25);
        let y2 = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) * s * s;
        if y2 >= 1.0 {
            0.0
        } else {
            Self::normalization() * self.rho.powf(0.75) * (-1.0 / (1.0 - y2)).exp()
        }
    }

    /// True when the scaled kernel support spans less than one lattice cell.
    pub fn under_resolved(&self, grid: &CylinderGrid) -> bool {
        self.support_radius() < grid.hx.max(grid.hz)
    }
}

/// Discrete kernel stencil: lattice offsets with weights proportional to
/// `χ_ρ`, renormalized to unit discrete mass so mollification preserves
/// constants exactly.
pub struct MollifyStencil {
    pub offsets: Vec<(i64, i64, i64)>,
    pub weights: Vec<f64>,
    /// Discrete mass of the raw (un-renormalized) kernel samples times the
    /// cell volume; near 1 when the kernel is resolved.
    pub raw_mass: f64,
    pub radius_nodes: (i64, i64),
}

impl MollifyStencil {
    pub fn build(m: &Mollifier, grid: &CylinderGrid) -> Self {
        let r = m.support_radius();
        let ni = (r / grid.hx).ceil() as i64;
        let nk = (r / grid.hz).ceil() as i64;
        let vol = grid.cell_volume();
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        for dk in -nk..=nk {
            for dj in -ni..=ni {
                for di in -ni..=ni {
                    let x = [
                        di as f64 * grid.hx,
                        dj as f64 * grid.hx,
                        dk as f64 * grid.hz,
                    ];
                    let w = m.eval(x) * vol;
                    if w > 0.0 {
                        offsets.push((di, dj, dk));
                        weights.push(w);
                    }
                }
            }
        }
        if offsets.is_empty() {
            offsets.push((0, 0, 0));
            weights.push(1.0);
        }
        let raw_mass: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= raw_mass;
        }
        Self {
            offsets,
            weights,
            raw_mass,
            radius_nodes: (ni, nk),
        }
    }
}

/// Outcome of mollifying a potential: the smoothed field plus resolution
/// diagnostics.
pub struct MollifyOutcome {
    pub field: VectorPotential,
    pub under_resolved: bool,
    pub raw_mass: f64,
}

/// Convolves `a` with the discrete mollification kernel at scale `ρ`,
/// treating `a` as extended by zero outside its support. The result's
/// support grows by at most the kernel radius.
pub fn mollify(a: &VectorPotential, m: &Mollifier) -> MollifyOutcome {
    let grid = &a.grid;
    let stencil = MollifyStencil::build(m, grid);
    let under_resolved = m.under_resolved(grid);
    let n = grid.n_nodes();
    let mut comp = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    if let Some(sb) = a.support_box() {
        let (ni, nk) = stencil.radius_nodes;
        let out_box = IndexBox {
            i0: sb.i0.saturating_sub(ni as usize),
            i1: (sb.i1 + ni as usize).min(grid.nx),
            j0: sb.j0.saturating_sub(ni as usize),
            j1: (sb.j1 + ni as usize).min(grid.ny),
            k0: sb.k0.saturating_sub(nk as usize),
            k1: (sb.k1 + nk as usize).min(grid.nz),
        };
        for c in 0..3 {
            let src = &a.comp[c];
            let dst = &mut comp[c];
            for k in out_box.k0..out_box.k1 {
                for j in out_box.j0..out_box.j1 {
                    for i in out_box.i0..out_box.i1 {
                        let mut acc = 0.0;
                        for (o, w) in stencil.offsets.iter().zip(&stencil.weights) {
                            let ii = i as i64 - o.0;
                            let jj = j as i64 - o.1;
                            let kk = k as i64 - o.2;
                            if ii >= 0
                                && jj >= 0
                                && kk >= 0
                                && (ii as usize) < grid.nx
                                && (jj as usize) < grid.ny
                                && (kk as usize) < grid.nz
                            {
                                acc += src[grid.idx(ii as usize, jj as usize, kk as usize)] * w;
                            }
                        }
                        dst[grid.idx(i, j, k)] = acc;
                    }
                }
            }
        }
    }
    MollifyOutcome {
        field: VectorPotential {
            grid: Arc::clone(grid),
            comp,
            axial_support: a.axial_support + m.support_radius(),
            spec: None,
        },
        under_resolved,
        raw_mass: stencil.raw_mass,
    }
}

/// Frequency-weighted Sobolev norm
/// `‖u‖_{H^m_ρ} = (∫ (|ξ|² + ρ²)^m |û(ξ)|² dξ)^{1/2}` for `m ∈ [-2, 2]`,
/// with `û` the (2π)^{-3/2}-normalized transform, computed on a zero-padded
/// periodic box twice the field's support extent.
pub fn weighted_norm(f: &ScalarField, m: f64, rho: f64) -> Result<f64> {
    if !(m >= -2.0 && m <= 2.0) {
        return Err(CgoError::Field(format!(
            "norm order must lie in [-2, 2], got {m}"
        )));
    }
    if !(rho > 0.0) {
        return Err(CgoError::Field(format!(
            "norm weight ρ must be positive, got {rho}"
        )));
    }
    let grid = &f.grid;
    let mut sb: Option<IndexBox> = None;
    for k in 0..grid.nz {
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                if f.data[grid.idx(i, j, k)] != Complex64::new(0.0, 0.0) {
                    sb = Some(match sb {
                        None => IndexBox {
                            i0: i,
                            i1: i + 1,
                            j0: j,
                            j1: j + 1,
                            k0: k,
                            k1: k + 1,
                        },
                        Some(b) => IndexBox {
                            i0: b.i0.min(i),
                            i1: b.i1.max(i + 1),
                            j0: b.j0.min(j),
                            j1: b.j1.max(j + 1),
                            k0: b.k0.min(k),
                            k1: b.k1.max(k + 1),
                        },
                    });
                }
            }
        }
    }
    let sb = match sb {
        None => return Ok(0.0),
        Some(b) => b,
    };
    let spans = [sb.i1 - sb.i0, sb.j1 - sb.j0, sb.k1 - sb.k0];
    let dims = [2 * spans[0], 2 * spans[1], 2 * spans[2]];
    let mut buf = vec![Complex64::new(0.0, 0.0); dims[0] * dims[1] * dims[2]];
    for k in 0..spans[2] {
        for j in 0..spans[1] {
            for i in 0..spans[0] {
                buf[(k * dims[1] + j) * dims[0] + i] =
                    f.data[grid.idx(sb.i0 + i, sb.j0 + j, sb.k0 + k)];
            }
        }
    }
    fft3_in_place(&mut buf, dims);
    let spacings = [grid.hx, grid.hx, grid.hz];
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut sum = 0.0;
    for k in 0..dims[2] {
        let kz = signed_mode(k, dims[2]);
        let xi3 = two_pi * kz / (dims[2] as f64 * spacings[2]);
        for j in 0..dims[1] {
            let ky = signed_mode(j, dims[1]);
            let xi2 = two_pi * ky / (dims[1] as f64 * spacings[1]);
            for i in 0..dims[0] {
                let kx = signed_mode(i, dims[0]);
                let xi1 = two_pi * kx / (dims[0] as f64 * spacings[0]);
                let w = (xi1 * xi1 + xi2 * xi2 + xi3 * xi3 + rho * rho).powf(m);
                sum += w * buf[(k * dims[1] + j) * dims[0] + i].norm_sqr();
            }
        }
    }
    let cells = (dims[0] * dims[1] * dims[2]) as f64;
    let scale = grid.hx * grid.hx * grid.hz / cells;
    Ok((sum * scale).sqrt())
}

fn signed_mode(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// In-place 3-d FFT (forward, unnormalized) on a row-major `dims` box.
pub fn fft3_in_place(buf: &mut [Complex64], dims: [usize; 3]) {
    let mut planner = FftPlanner::new();
    for axis in 0..3 {
        let n = dims[axis];
        if n <= 1 {
            continue;
        }
        let fft = planner.plan_fft_forward(n);
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let (s_outer, s_axis, count_outer, count_inner) = match axis {
            0 => (dims[0], 1usize, dims[1] * dims[2], 1usize),
            1 => (dims[0] * dims[1], dims[0], dims[2], dims[0]),
            _ => (0usize, dims[0] * dims[1], 1usize, dims[0] * dims[1]),
        };
        for outer in 0..count_outer {
            for inner in 0..count_inner {
                let base = outer * s_outer + inner;
                for t in 0..n {
                    line[t] = buf[base + t * s_axis];
                }
                fft.process(&mut line);
                for t in 0..n {
                    buf[base + t * s_axis] = line[t];
                }
            }
        }
    }
}
