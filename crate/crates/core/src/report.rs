//! Report artifacts: JSON envelopes with stable key order, CSV tables, and
//! a little-endian binary field format. All files are written to a
//! temporary name first and renamed into place.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CgoError, Result};
use crate::geometry::CylinderGrid;

pub const LIBRARY_VERSION: &str = env!("CARGO_PKG_VERSION");

/// One pass/fail line of a stage report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckLine {
    pub name: String,
    pub metric: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl CheckLine {
    /// Passes when `metric <= threshold`. A NaN metric fails.
    pub fn le(name: &str, metric: f64, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            metric,
            threshold,
            passed: metric <= threshold,
        }
    }

    /// Passes when `metric >= threshold`. A NaN metric fails.
    pub fn ge(name: &str, metric: f64, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            metric,
            threshold,
            passed: metric >= threshold,
        }
    }

    /// Boolean condition rendered as a 0/1 metric.
    pub fn flag(name: &str, ok: bool) -> Self {
        Self {
            name: name.to_string(),
            metric: if ok { 1.0 } else { 0.0 },
            threshold: 1.0,
            passed: ok,
        }
    }
}

/// Envelope around every JSON report.
#[derive(Debug, Clone, Serialize)]
pub struct Envelope<T: Serialize> {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckLine>,
    pub report: T,
}

/// The envelope fields shared by every report, for rendering summaries
/// without knowing the payload shape.
#[derive(Debug, Clone, Deserialize)]
pub struct EnvelopeHeader {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckLine>,
}

pub fn read_envelope_header(path: &Path) -> Result<EnvelopeHeader> {
    let text = fs::read_to_string(path)
        .map_err(|e| CgoError::Report(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CgoError::Report(format!("{}: {e}", path.display())))
}

pub struct ReportWriter {
    out_dir: PathBuf,
    config_hash: String,
    seed: u64,
}

impl ReportWriter {
    pub fn new(out_dir: &Path, config_hash: &str, seed: u64) -> Result<Self> {
        fs::create_dir_all(out_dir).map_err(|e| {
            CgoError::Report(format!("cannot create {}: {e}", out_dir.display()))
        })?;
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            config_hash: config_hash.to_string(),
            seed,
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    /// Serializes the payload inside the provenance envelope. The overall
    /// `passed` flag is the conjunction of the check lines.
    pub fn write_json<T: Serialize>(
        &self,
        name: &str,
        checks: &[CheckLine],
        report: &T,
    ) -> Result<PathBuf> {
        let envelope = Envelope {
            version: LIBRARY_VERSION.to_string(),
            config_hash: self.config_hash.clone(),
            seed: self.seed,
            passed: checks.iter().all(|c| c.passed),
            checks: checks.to_vec(),
            report,
        };
        let mut text = serde_json::to_string_pretty(&envelope)
            .map_err(|e| CgoError::Report(format!("serializing {name}: {e}")))?;
        text.push('\n');
        self.write_atomic(&format!("{name}.json"), text.as_bytes())
    }

    /// Writes a CSV table with `,` separators and `.` decimals regardless of
    /// locale.
    pub fn write_csv(
        &self,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<PathBuf> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)
            .map_err(|e| CgoError::Report(format!("csv {name}: {e}")))?;
        for row in rows {
            w.write_record(row)
                .map_err(|e| CgoError::Report(format!("csv {name}: {e}")))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CgoError::Report(format!("csv {name}: {e}")))?;
        self.write_atomic(&format!("{name}.csv"), &bytes)
    }

    pub fn write_binary(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        self.write_atomic(&format!("{name}.field"), bytes)
    }

    fn write_atomic(&self, file: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.out_dir.join(file);
        let tmp = self.out_dir.join(format!(".{file}.tmp"));
        fs::write(&tmp, bytes)
            .map_err(|e| CgoError::Report(format!("cannot write {}: {e}", tmp.display())))?;
        fs::rename(&tmp, &path).map_err(|e| {
            CgoError::Report(format!("cannot move report into {}: {e}", path.display()))
        })?;
        Ok(path)
    }
}

fn push_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn field_header(grid: &CylinderGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(48);
    push_f64(&mut out, grid.nx as f64);
    push_f64(&mut out, grid.ny as f64);
    push_f64(&mut out, grid.nz as f64);
    push_f64(&mut out, grid.hx);
    push_f64(&mut out, grid.hx);
    push_f64(&mut out, grid.hz);
    out
}

fn check_header(bytes: &[u8], grid: &CylinderGrid) -> Result<()> {
    if bytes.len() < 48 || bytes.len() % 8 != 0 {
        return Err(CgoError::Report(
            "field payload is not a whole number of doubles with a header".into(),
        ));
    }
    let mut vals = [0.0f64; 6];
    for (i, v) in vals.iter_mut().enumerate() {
        let mut b = [0u8; 8];
        b.copy_from_slice(&bytes[8 * i..8 * i + 8]);
        *v = f64::from_le_bytes(b);
    }
    let expect = [
        grid.nx as f64,
        grid.ny as f64,
        grid.nz as f64,
        grid.hx,
        grid.hx,
        grid.hz,
    ];
    if vals != expect {
        return Err(CgoError::Report(format!(
            "field header {vals:?} does not match the target lattice {expect:?}"
        )));
    }
    Ok(())
}

/// Node-major complex scalar: re, im per node after the header.
pub fn field_bytes_complex(grid: &CylinderGrid, data: &[Complex64]) -> Result<Vec<u8>> {
    if data.len() != grid.n_nodes() {
        return Err(CgoError::Report(format!(
            "field has {} values for a lattice of {} nodes",
            data.len(),
            grid.n_nodes()
        )));
    }
    let mut out = field_header(grid);
    out.reserve(16 * data.len());
    for v in data {
        push_f64(&mut out, v.re);
        push_f64(&mut out, v.im);
    }
    Ok(out)
}

pub fn read_field_complex(bytes: &[u8], grid: &CylinderGrid) -> Result<Vec<Complex64>> {
    check_header(bytes, grid)?;
    let body = &bytes[48..];
    if body.len() != 16 * grid.n_nodes() {
        return Err(CgoError::Report(format!(
            "complex field body has {} bytes, lattice needs {}",
            body.len(),
            16 * grid.n_nodes()
        )));
    }
    let mut out = Vec::with_capacity(grid.n_nodes());
    for c in body.chunks_exact(16) {
        let mut re = [0u8; 8];
        let mut im = [0u8; 8];
        re.copy_from_slice(&c[..8]);
        im.copy_from_slice(&c[8..]);
        out.push(Complex64::new(f64::from_le_bytes(re), f64::from_le_bytes(im)));
    }
    Ok(out)
}

/// Node-major three-component real field: the three components per node.
pub fn field_bytes_vector(grid: &CylinderGrid, comp: &[Vec<f64>; 3]) -> Result<Vec<u8>> {
    for c in comp {
        if c.len() != grid.n_nodes() {
            return Err(CgoError::Report(format!(
                "vector component has {} values for a lattice of {} nodes",
                c.len(),
                grid.n_nodes()
            )));
        }
    }
    let mut out = field_header(grid);
    out.reserve(24 * grid.n_nodes());
    for lin in 0..grid.n_nodes() {
        for c in comp {
            push_f64(&mut out, c[lin]);
        }
    }
    Ok(out)
}

pub fn read_field_vector(bytes: &[u8], grid: &CylinderGrid) -> Result<[Vec<f64>; 3]> {
    check_header(bytes, grid)?;
    let body = &bytes[48..];
    if body.len() != 24 * grid.n_nodes() {
        return Err(CgoError::Report(format!(
            "vector field body has {} bytes, lattice needs {}",
            body.len(),
            24 * grid.n_nodes()
        )));
    }
    let mut out = [
        Vec::with_capacity(grid.n_nodes()),
        Vec::with_capacity(grid.n_nodes()),
        Vec::with_capacity(grid.n_nodes()),
    ];
    for chunk in body.chunks_exact(24) {
        for (c, sub) in out.iter_mut().zip(chunk.chunks_exact(8)) {
            let mut b = [0u8; 8];
            b.copy_from_slice(sub);
            c.push(f64::from_le_bytes(b));
        }
    }
    Ok(out)
}
