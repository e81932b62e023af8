//! Waveguide geometry: planar cross-sections, cylinder lattices, direction
//! frames, and boundary decompositions.
//!
//! The waveguide is `ω × ℝ` for a bounded convex-ish planar domain `ω`,
//! truncated to `ω × [-L, L]` for computation. The cross-section is a closed
//! polyline with outward unit normals; the lattice is a uniform box covering
//! `B'_{R+1} × [-L, L]` (R = sup |x'| over ω) with a membership mask, so
//! fields extend by zero outside the waveguide and Fourier work needs no
//! re-gridding.

use crate::error::{CgoError, Result};

/// Relative slack when deciding whether a nominally orthogonal pair of
/// vectors was merely rounded; larger deviations are rejected as data errors.
const ORTHO_PROJECT_REL: f64 = 1e-6;

/// Closed planar cross-section as a counterclockwise polyline.
#[derive(Debug, Clone)]
pub struct CrossSection {
    vertices: Vec<[f64; 2]>,
    normals: Vec<[f64; 2]>,
    seg_lengths: Vec<f64>,
    radius_sup: f64,
}

impl CrossSection {
    /// Builds a cross-section from polygon vertices (either orientation;
    /// stored counterclockwise). Rejects degenerate input: fewer than three
    /// vertices, repeated consecutive vertices, or zero area.
    pub fn from_polygon(vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(CgoError::Geometry(format!(
                "cross-section needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        let n = vertices.len();
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let d = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            if d == 0.0 {
                return Err(CgoError::Geometry(format!(
                    "repeated consecutive vertex at index {i}"
                )));
            }
        }
        let mut vertices = vertices;
        let area2: f64 = (0..n)
            .map(|i| {
                let a = vertices[i];
                let b = vertices[(i + 1) % n];
                a[0] * b[1] - b[0] * a[1]
            })
            .sum();
        if area2.abs() < 1e-14 {
            return Err(CgoError::Geometry("cross-section has zero area".into()));
        }
        if area2 < 0.0 {
            vertices.reverse();
        }
        let mut normals = Vec::with_capacity(n);
        let mut seg_lengths = Vec::with_capacity(n);
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let len = (dx * dx + dy * dy).sqrt();
            // interior lies left of counterclockwise travel, so the outward
            // normal is the right-hand rotation of the edge direction
            normals.push([dy / len, -dx / len]);
            seg_lengths.push(len);
        }
        let radius_sup = vertices
            .iter()
            .map(|v| (v[0] * v[0] + v[1] * v[1]).sqrt())
            .fold(0.0, f64::max);
        Ok(Self {
            vertices,
            normals,
            seg_lengths,
            radius_sup,
        })
    }

    /// Regular polygon approximation of a disk of the given radius,
    /// vertices on the circle so `radius_sup` equals the radius exactly.
    pub fn disk(radius: f64, segments: usize) -> Result<Self> {
        if radius <= 0.0 {
            return Err(CgoError::Geometry(format!("disk radius {radius} <= 0")));
        }
        if segments < 3 {
            return Err(CgoError::Geometry("disk needs at least 3 segments".into()));
        }
        let verts = (0..segments)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / segments as f64;
                [radius * a.cos(), radius * a.sin()]
            })
            .collect();
        Self::from_polygon(verts)
    }

    /// `R = sup_{x' ∈ ω} |x'|`, computed from the vertices.
    pub fn radius_sup(&self) -> f64 {
        self.radius_sup
    }

    pub fn num_segments(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    /// Outward unit normal of segment `i`.
    pub fn segment_normal(&self, i: usize) -> [f64; 2] {
        self.normals[i]
    }

    pub fn segment_length(&self, i: usize) -> f64 {
        self.seg_lengths[i]
    }

    /// Segment midpoint, the quadrature node for boundary line integrals.
    pub fn segment_midpoint(&self, i: usize) -> [f64; 2] {
        let a = self.vertices[i];
        let b = self.vertices[(i + 1) % self.vertices.len()];
        [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
    }

    /// Even-odd ray-crossing membership test (closed region; points on an
    /// edge classify consistently by the crossing rule).
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let n = self.vertices.len();
        let mut inside = false;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let t = (p[1] - a[1]) / (b[1] - a[1]);
                let x_cross = a[0] + t * (b[0] - a[0]);
                if p[0] < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Index of the segment whose midpoint is nearest to `p`; used to assign
    /// outward normals to staircase boundary nodes.
    pub fn nearest_segment(&self, p: [f64; 2]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for i in 0..self.vertices.len() {
            let m = self.segment_midpoint(i);
            let d = (m[0] - p[0]).powi(2) + (m[1] - p[1]).powi(2);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Perimeter of the polyline.
    pub fn perimeter(&self) -> f64 {
        self.seg_lengths.iter().sum()
    }
}

/// Splitting of cross-section boundary segments by the sign of `ν·θ - ε`.
///
/// A segment is illuminated when its outward normal satisfies `ν·θ > ε` and
/// shadowed otherwise, so the two lists partition the segment indices for
/// any threshold.
#[derive(Debug, Clone)]
pub struct BoundaryPartition {
    pub illuminated: Vec<usize>,
    pub shadowed: Vec<usize>,
    pub theta: [f64; 2],
    pub eps: f64,
}

/// Partitions the boundary segments of `section` for direction `theta`
/// (normalized here) and threshold `eps >= 0`.
pub fn boundary_partition(
    section: &CrossSection,
    theta: [f64; 2],
    eps: f64,
) -> Result<BoundaryPartition> {
    let theta = normalize2(theta)
        .ok_or_else(|| CgoError::Geometry("partition direction must be nonzero".into()))?;
    if !(eps >= 0.0) {
        return Err(CgoError::Geometry(format!(
            "partition threshold must be >= 0, got {eps}"
        )));
    }
    let mut illuminated = Vec::new();
    let mut shadowed = Vec::new();
    for i in 0..section.num_segments() {
        let nu = section.segment_normal(i);
        if nu[0] * theta[0] + nu[1] * theta[1] > eps {
            illuminated.push(i);
        } else {
            shadowed.push(i);
        }
    }
    Ok(BoundaryPartition {
        illuminated,
        shadowed,
        theta,
        eps,
    })
}

/// Direction data for one CGO frame: a horizontal direction `θ ∈ S¹`, a
/// probe frequency `ξ = (ξ', ξ₃)` with `ξ' ⊥ θ`, and the unit vector `η`
/// completing `(θ̃, η)` to an orthonormal basis of `ξ^⊥`.
#[derive(Debug, Clone)]
pub struct DirectionFrame {
    pub theta: [f64; 2],
    pub xi_prime: [f64; 2],
    pub xi3: f64,
    pub eta: [f64; 3],
    /// Radial quadrature window `R₁ = 2√2 (R+2 + (R+2)/|ξ'|)` for the
    /// Cauchy transform over the `(θ̃, η)` plane.
    pub quad_radius: f64,
}

impl DirectionFrame {
    /// Builds a frame from raw direction data. `θ` is normalized; `ξ'` is
    /// projected exactly onto `θ^⊥` when its deviation is at rounding level
    /// and rejected otherwise; `ξ' = 0` and `ξ₃ = 0` are rejected.
    pub fn build(
        section: &CrossSection,
        theta: [f64; 2],
        xi_prime: [f64; 2],
        xi3: f64,
    ) -> Result<Self> {
        let theta = normalize2(theta)
            .ok_or_else(|| CgoError::Frame("theta must be a nonzero direction".into()))?;
        if xi3 == 0.0 || !xi3.is_finite() {
            return Err(CgoError::Frame(format!(
                "axial frequency must be finite and nonzero, got {xi3}"
            )));
        }
        let norm_xp = (xi_prime[0] * xi_prime[0] + xi_prime[1] * xi_prime[1]).sqrt();
        if norm_xp == 0.0 || !norm_xp.is_finite() {
            return Err(CgoError::Frame("xi' must be finite and nonzero".into()));
        }
        let dot = xi_prime[0] * theta[0] + xi_prime[1] * theta[1];
        if dot.abs() > ORTHO_PROJECT_REL * norm_xp {
            return Err(CgoError::Frame(format!(
                "xi'·theta = {dot:.3e} is not orthogonal (|xi'| = {norm_xp:.3e})"
            )));
        }
        let xi_prime = [xi_prime[0] - dot * theta[0], xi_prime[1] - dot * theta[1]];
        let np2 = xi_prime[0] * xi_prime[0] + xi_prime[1] * xi_prime[1];
        if np2 == 0.0 {
            return Err(CgoError::Frame("xi' vanished after projection".into()));
        }
        let eta_raw = [xi_prime[0], xi_prime[1], -np2 / xi3];
        let scale = (np2 + np2 * np2 / (xi3 * xi3)).sqrt();
        let eta = [eta_raw[0] / scale, eta_raw[1] / scale, eta_raw[2] / scale];
        let rp2 = section.radius_sup() + 2.0;
        let quad_radius = 2.0 * std::f64::consts::SQRT_2 * (rp2 + rp2 / np2.sqrt());
        Ok(Self {
            theta,
            xi_prime,
            xi3,
            eta,
            quad_radius,
        })
    }

    /// Frame for a given probe frequency, choosing `θ` as the right-hand
    /// rotation of `ξ'` (rotating `ξ'` by -90°), which is orthogonal to `ξ'`
    /// by construction.
    pub fn for_xi(section: &CrossSection, xi: [f64; 3]) -> Result<Self> {
        let xp = [xi[0], xi[1]];
        let n = (xp[0] * xp[0] + xp[1] * xp[1]).sqrt();
        if n == 0.0 {
            return Err(CgoError::Frame("xi' must be nonzero to pick theta".into()));
        }
        Self::build(section, [xp[1] / n, -xp[0] / n], xp, xi[2])
    }

    /// The same frame with `η` negated; `(θ̃, -η)` is again an orthonormal
    /// basis of `ξ^⊥`.
    pub fn flip_eta(&self) -> Self {
        let mut f = self.clone();
        f.eta = [-f.eta[0], -f.eta[1], -f.eta[2]];
        f
    }

    /// `θ̃ = (θ, 0)`, the horizontal direction lifted to ℝ³.
    pub fn theta_tilde(&self) -> [f64; 3] {
        [self.theta[0], self.theta[1], 0.0]
    }

    /// Full probe frequency `ξ = (ξ', ξ₃)`.
    pub fn xi(&self) -> [f64; 3] {
        [self.xi_prime[0], self.xi_prime[1], self.xi3]
    }

    pub fn xi_norm(&self) -> f64 {
        let x = self.xi();
        (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
    }
}

/// Uniform lattice over the box `[-b, b]² × [-L, L]` covering the truncated
/// waveguide, with a cross-section membership mask and staircase boundary
/// bookkeeping. Axial spacing is snapped so that `±L` are lattice planes.
#[derive(Debug, Clone)]
pub struct CylinderGrid {
    pub section: CrossSection,
    /// In-plane spacing (shared by both horizontal axes).
    pub hx: f64,
    /// Axial spacing after snapping `L` to a whole number of steps.
    pub hz: f64,
    pub half_length: f64,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    mx: i64,
    mz: i64,
    /// Cross-section membership of lattice columns, length `nx·ny`.
    pub mask: Vec<bool>,
    /// 2-d indices (`j·nx + i`) of masked columns with an unmasked 4-neighbor.
    pub cross_boundary: Vec<usize>,
    /// Outward unit normals for `cross_boundary`, from the nearest segment.
    pub boundary_normals: Vec<[f64; 2]>,
    /// Masked columns that are not staircase boundary.
    pub cross_interior: Vec<usize>,
}

impl CylinderGrid {
    /// Builds the lattice for the given spacings and axial half-length.
    ///
    /// Fails when spacings are non-positive or the masked region is thinner
    /// than 5 nodes in any direction (too coarse for centered stencils).
    pub fn build(
        section: CrossSection,
        h_plane: f64,
        h_axial: f64,
        half_length: f64,
    ) -> Result<Self> {
        Self::build_with_margin(section, h_plane, h_axial, half_length, 1.0)
    }

    /// Like [`CylinderGrid::build`] with an explicit box margin around the
    /// cross-section. Fine solve grids use a slim margin to keep the lattice
    /// box close to the cylinder; the margin is clamped below so the
    /// staircase always keeps a ring of outside nodes.
    pub fn build_with_margin(
        section: CrossSection,
        h_plane: f64,
        h_axial: f64,
        half_length: f64,
        margin: f64,
    ) -> Result<Self> {
        if !(h_plane > 0.0) || !(h_axial > 0.0) {
            return Err(CgoError::Geometry(format!(
                "spacings must be positive, got h'={h_plane}, h3={h_axial}"
            )));
        }
        if !(half_length > 0.0) {
            return Err(CgoError::Geometry(format!(
                "axial half-length must be positive, got {half_length}"
            )));
        }
        let cover = section.radius_sup() + margin.max(2.5 * h_plane);
        let mx = (cover / h_plane + 1e-9).ceil() as i64 + 1;
        let nx = (2 * mx + 1) as usize;
        let ny = nx;
        // never snap the axial spacing above the requested value; callers
        // size it to resolve a fixed oscillation
        let steps = (half_length / h_axial - 1e-9).ceil().max(1.0) as i64;
        let hz = half_length / steps as f64;
        let mz = steps;
        let nz = (2 * steps + 1) as usize;

        let mut mask = vec![false; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let x = (i as i64 - mx) as f64 * h_plane;
                let y = (j as i64 - mx) as f64 * h_plane;
                mask[j * nx + i] = section.contains([x, y]);
            }
        }
        let mut cross_boundary = Vec::new();
        let mut cross_interior = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                if !mask[j * nx + i] {
                    continue;
                }
                // box covers R+1 > R so masked nodes never touch the box edge
                let exposed = !mask[j * nx + i - 1]
                    || !mask[j * nx + i + 1]
                    || !mask[(j - 1) * nx + i]
                    || !mask[(j + 1) * nx + i];
                if exposed {
                    cross_boundary.push(j * nx + i);
                } else {
                    cross_interior.push(j * nx + i);
                }
            }
        }
        let mut boundary_normals = Vec::with_capacity(cross_boundary.len());
        for &c in &cross_boundary {
            let (i, j) = (c % nx, c / nx);
            let x = (i as i64 - mx) as f64 * h_plane;
            let y = (j as i64 - mx) as f64 * h_plane;
            let seg = section.nearest_segment([x, y]);
            boundary_normals.push(section.segment_normal(seg));
        }

        let (mut i_min, mut i_max, mut j_min, mut j_max) = (usize::MAX, 0, usize::MAX, 0);
        for j in 0..ny {
            for i in 0..nx {
                if mask[j * nx + i] {
                    i_min = i_min.min(i);
                    i_max = i_max.max(i);
                    j_min = j_min.min(j);
                    j_max = j_max.max(j);
                }
            }
        }
        if i_min == usize::MAX {
            return Err(CgoError::Geometry(
                "no lattice node falls inside the cross-section".into(),
            ));
        }
        let spans = [i_max - i_min + 1, j_max - j_min + 1, nz];
        if spans.iter().any(|&s| s < 5) {
            return Err(CgoError::Geometry(format!(
                "grid too coarse: masked spans {spans:?}, need at least 5 nodes each"
            )));
        }

        Ok(Self {
            section,
            hx: h_plane,
            hz,
            half_length,
            nx,
            ny,
            nz,
            mx,
            mz,
            mask,
            cross_boundary,
            boundary_normals,
            cross_interior,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.ny + j) * self.nx + i
    }

    /// Coordinates of node `(i, j, k)`; the lattice is centered so index
    /// `(mx, mx, mz)` sits at the origin.
    #[inline]
    pub fn pos(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            (i as i64 - self.mx) as f64 * self.hx,
            (j as i64 - self.mx) as f64 * self.hx,
            (k as i64 - self.mz) as f64 * self.hz,
        ]
    }

    /// Splits a linear node index back into `(i, j, k)`.
    #[inline]
    pub fn split(&self, lin: usize) -> (usize, usize, usize) {
        let plane = self.nx * self.ny;
        (lin % self.nx, (lin / self.nx) % self.ny, lin / plane)
    }

    #[inline]
    pub fn is_masked(&self, i: usize, j: usize) -> bool {
        self.mask[j * self.nx + i]
    }

    /// Minimum corner of the lattice.
    pub fn origin(&self) -> [f64; 3] {
        [
            -(self.mx as f64) * self.hx,
            -(self.mx as f64) * self.hx,
            -(self.mz as f64) * self.hz,
        ]
    }

    /// True when `other` shares dims, spacings, and cross-section radius, so
    /// nodewise operations between fields are meaningful.
    pub fn same_lattice(&self, other: &CylinderGrid) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && self.nz == other.nz
            && (self.hx - other.hx).abs() < 1e-12
            && (self.hz - other.hz).abs() < 1e-12
            && (self.section.radius_sup() - other.section.radius_sup()).abs() < 1e-12
    }

    /// Trilinear interpolation of a real lattice field; zero outside the box.
    pub fn trilinear(&self, data: &[f64], p: [f64; 3]) -> f64 {
        match self.cell_weights(p) {
            None => 0.0,
            Some((base, w)) => {
                let (sx, sy) = (1, self.nx);
                let sz = self.nx * self.ny;
                w[0] * data[base]
                    + w[1] * data[base + sx]
                    + w[2] * data[base + sy]
                    + w[3] * data[base + sx + sy]
                    + w[4] * data[base + sz]
                    + w[5] * data[base + sx + sz]
                    + w[6] * data[base + sy + sz]
                    + w[7] * data[base + sx + sy + sz]
            }
        }
    }

    /// Trilinear interpolation of a complex lattice field; zero outside.
    pub fn trilinear_c(
        &self,
        data: &[num_complex::Complex64],
        p: [f64; 3],
    ) -> num_complex::Complex64 {
        match self.cell_weights(p) {
            None => num_complex::Complex64::new(0.0, 0.0),
            Some((base, w)) => {
                let (sx, sy) = (1, self.nx);
                let sz = self.nx * self.ny;
                data[base] * w[0]
                    + data[base + sx] * w[1]
                    + data[base + sy] * w[2]
                    + data[base + sx + sy] * w[3]
                    + data[base + sz] * w[4]
                    + data[base + sx + sz] * w[5]
                    + data[base + sy + sz] * w[6]
                    + data[base + sx + sy + sz] * w[7]
            }
        }
    }

    fn cell_weights(&self, p: [f64; 3]) -> Option<(usize, [f64; 8])> {
        let o = self.origin();
        let u = (p[0] - o[0]) / self.hx;
        let v = (p[1] - o[1]) / self.hx;
        let w = (p[2] - o[2]) / self.hz;
        if !(u >= 0.0) || !(v >= 0.0) || !(w >= 0.0) {
            return None;
        }
        let (iu, iv, iw) = (u.floor() as usize, v.floor() as usize, w.floor() as usize);
        if iu + 1 >= self.nx || iv + 1 >= self.ny || iw + 1 >= self.nz {
            return None;
        }
        let (fu, fv, fw) = (u - iu as f64, v - iv as f64, w - iw as f64);
        let (gu, gv, gw) = (1.0 - fu, 1.0 - fv, 1.0 - fw);
        Some((
            self.idx(iu, iv, iw),
            [
                gu * gv * gw,
                fu * gv * gw,
                gu * fv * gw,
                fu * fv * gw,
                gu * gv * fw,
                fu * gv * fw,
                gu * fv * fw,
                fu * fv * fw,
            ],
        ))
    }

    /// Linear indices of all masked nodes (cross-section columns over every
    /// axial plane), ascending; the integration set for cylinder integrals.
    pub fn masked_nodes(&self) -> Vec<u32> {
        let mut out = Vec::new();
        for k in 0..self.nz {
            for j in 0..self.ny {
                for i in 0..self.nx {
                    if self.mask[j * self.nx + i] {
                        out.push(self.idx(i, j, k) as u32);
                    }
                }
            }
        }
        out
    }

    /// Linear indices of interior nodes: masked, not staircase boundary, and
    /// not on the artificial axial end planes. These are the unknowns of
    /// Dirichlet solves.
    pub fn interior_nodes(&self) -> Vec<u32> {
        let mut interior2d = vec![false; self.nx * self.ny];
        for &c in &self.cross_interior {
            interior2d[c] = true;
        }
        let mut out = Vec::new();
        let plane = self.nx * self.ny;
        for k in 1..self.nz - 1 {
            for (c, &is_int) in interior2d.iter().enumerate() {
                if is_int {
                    out.push((k * plane + c) as u32);
                }
            }
        }
        out
    }

    /// Volume element `h'² · h₃`.
    pub fn cell_volume(&self) -> f64 {
        self.hx * self.hx * self.hz
    }
}

/// One boundary lattice node with its outward normal.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryNode {
    pub lin: u32,
    pub normal: [f64; 3],
    /// True for lateral (staircase) nodes, false for axial end caps.
    pub lateral: bool,
}

/// All boundary nodes of the truncated cylinder: lateral staircase columns
/// over every axial plane plus the two end caps with normals `(0,0,∓1)`.
pub fn boundary_nodes(grid: &CylinderGrid) -> Vec<BoundaryNode> {
    let mut out = Vec::new();
    let plane = grid.nx * grid.ny;
    for k in 0..grid.nz {
        for (b, &c) in grid.cross_boundary.iter().enumerate() {
            let n = grid.boundary_normals[b];
            out.push(BoundaryNode {
                lin: (k * plane + c) as u32,
                normal: [n[0], n[1], 0.0],
                lateral: true,
            });
        }
    }
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if grid.mask[j * grid.nx + i] {
                out.push(BoundaryNode {
                    lin: grid.idx(i, j, 0) as u32,
                    normal: [0.0, 0.0, -1.0],
                    lateral: false,
                });
                out.push(BoundaryNode {
                    lin: grid.idx(i, j, grid.nz - 1) as u32,
                    normal: [0.0, 0.0, 1.0],
                    lateral: false,
                });
            }
        }
    }
    out
}

/// Boundary band `S_r = ∂Ω ∩ (ω̄ × [-r, r])` as linear node indices,
/// ascending. `r` is clipped to `L`; at `r = L` the end caps belong to the
/// band and the result is the full boundary node set.
pub fn boundary_band(grid: &CylinderGrid, r: f64) -> Vec<u32> {
    let r = r.min(grid.half_length);
    let full = (grid.half_length - r) <= 1e-12 * grid.half_length.max(1.0);
    let mut out = Vec::new();
    for bn in boundary_nodes(grid) {
        let (_, _, k) = grid.split(bn.lin as usize);
        let z = grid.pos(0, 0, k)[2];
        let keep = if bn.lateral {
            z.abs() <= r + 1e-12
        } else {
            full
        };
        if keep {
            out.push(bn.lin);
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Axis-aligned half-open index box inside a lattice; the evaluation domain
/// for phase correctors and other partial-lattice fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexBox {
    pub i0: usize,
    pub i1: usize,
    pub j0: usize,
    pub j1: usize,
    pub k0: usize,
    pub k1: usize,
}

impl IndexBox {
    pub fn full(grid: &CylinderGrid) -> Self {
        Self {
            i0: 0,
            i1: grid.nx,
            j0: 0,
            j1: grid.ny,
            k0: 0,
            k1: grid.nz,
        }
    }

    pub fn len(&self) -> usize {
        (self.i1 - self.i0) * (self.j1 - self.j0) * (self.k1 - self.k0)
    }

    pub fn is_empty(&self) -> bool {
        self.i1 <= self.i0 || self.j1 <= self.j0 || self.k1 <= self.k0
    }

    pub fn contains(&self, i: usize, j: usize, k: usize) -> bool {
        i >= self.i0 && i < self.i1 && j >= self.j0 && j < self.j1 && k >= self.k0 && k < self.k1
    }

    /// Grows the box by `m` nodes on every side, clamped to the lattice.
    pub fn expand(&self, m: usize, grid: &CylinderGrid) -> Self {
        Self {
            i0: self.i0.saturating_sub(m),
            i1: (self.i1 + m).min(grid.nx),
            j0: self.j0.saturating_sub(m),
            j1: (self.j1 + m).min(grid.ny),
            k0: self.k0.saturating_sub(m),
            k1: (self.k1 + m).min(grid.nz),
        }
    }

    /// Shrinks the box by `m` nodes on every side (empty if too small).
    pub fn shrink(&self, m: usize) -> Self {
        Self {
            i0: self.i0 + m,
            i1: self.i1.saturating_sub(m),
            j0: self.j0 + m,
            j1: self.j1.saturating_sub(m),
            k0: self.k0 + m,
            k1: self.k1.saturating_sub(m),
        }
    }
}

fn normalize2(v: [f64; 2]) -> Option<[f64; 2]> {
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    if n > 0.0 && n.is_finite() {
        Some([v[0] / n, v[1] / n])
    } else {
        None
    }
}

/// Dot product in ℝ³.
#[inline]
pub fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Euclidean norm in ℝ³.
#[inline]
pub fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}
