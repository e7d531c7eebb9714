//! Sparse Gaussian sketch Φ and the sketched basis Ψ = ΦΠ.
//!
//! Every row of Φ has `max(1, round(k·S))` nonzeros at positions drawn without
//! replacement, each value standard normal scaled by `1/sqrt(D·k')` where `k'`
//! is the realised row density.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::camera::CameraRig;
use crate::geometry::{Template, TemplateId, TemplateLibrary};
use crate::raster::{render_template, BitVec, MeasurementVector};
use crate::seed::rng;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SketchMatrix {
    rows: usize,
    cols: usize,
    density: f64,
    seed: u64,
    /// Per row: strictly increasing column indices with values.
    row_entries: Vec<Vec<(u32, f64)>>,
    // Column-compressed copy for products with sparse binary vectors.
    col_start: Vec<usize>,
    col_rows: Vec<u32>,
    col_vals: Vec<f64>,
}

pub fn nonzeros_per_row(cols: usize, density: f64) -> usize {
    ((density * cols as f64).round() as usize).clamp(1, cols)
}

pub fn build_sketch(rows: usize, cols: usize, density: f64, seed: u64) -> Result<SketchMatrix> {
    if rows == 0 || rows > cols {
        return Err(Error::InvalidParameter(format!("sketch needs 1 <= D <= S, got D={rows} S={cols}")));
    }
    if !(density > 0.0 && density <= 1.0) || density * (cols as f64) < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "sketch density {density} invalid for S={cols}"
        )));
    }
    if cols > u32::MAX as usize {
        return Err(Error::InvalidParameter(format!("S={cols} too large")));
    }
    let nnz = nonzeros_per_row(cols, density);
    let scale = 1.0 / ((rows as f64) * (nnz as f64) / (cols as f64)).sqrt();
    let mut rng = rng(seed);
    let row_entries = (0..rows)
        .map(|_| {
            let mut idx: Vec<u32> = sample(&mut rng, cols, nnz).into_iter().map(|i| i as u32).collect();
            idx.sort_unstable();
            idx.into_iter()
                .map(|i| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    (i, g * scale)
                })
                .collect()
        })
        .collect();
    Ok(SketchMatrix::assemble(rows, cols, density, seed, row_entries))
}

impl SketchMatrix {
    fn assemble(rows: usize, cols: usize, density: f64, seed: u64, row_entries: Vec<Vec<(u32, f64)>>) -> Self {
        let mut col_start = vec![0usize; cols + 1];
        for row in &row_entries {
            for &(c, _) in row {
                col_start[c as usize + 1] += 1;
            }
        }
        for c in 0..cols {
            col_start[c + 1] += col_start[c];
        }
        let total = col_start[cols];
        let mut fill = col_start.clone();
        let mut col_rows = vec![0u32; total];
        let mut col_vals = vec![0.0; total];
        for (r, row) in row_entries.iter().enumerate() {
            for &(c, v) in row {
                let slot = &mut fill[c as usize];
                col_rows[*slot] = r as u32;
                col_vals[*slot] = v;
                *slot += 1;
            }
        }
        SketchMatrix {
            rows,
            cols,
            density,
            seed,
            row_entries,
            col_start,
            col_rows,
            col_vals,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn density(&self) -> f64 {
        self.density
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn row(&self, r: usize) -> &[(u32, f64)] {
        &self.row_entries[r]
    }

    /// Column `j` as `(row, value)` pairs in increasing row order.
    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.col_start[j]..self.col_start[j + 1];
        self.col_rows[range.clone()]
            .iter()
            .zip(&self.col_vals[range])
            .map(|(&r, &v)| (r as usize, v))
    }

    /// Φ times a binary vector given as bits.
    pub fn apply_bits(&self, bits: &BitVec) -> Result<Vec<f64>> {
        if bits.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "measurement has {} bits, sketch expects {}",
                bits.len(),
                self.cols
            )));
        }
        let mut out = vec![0.0; self.rows];
        for j in bits.iter_ones() {
            for (r, v) in self.column(j) {
                out[r] += v;
            }
        }
        Ok(out)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "SKETCH 1 {} {} {} {}", self.rows, self.cols, self.density, self.seed);
        for row in &self.row_entries {
            let _ = write!(out, "{}", row.len());
            for (c, v) in row {
                let _ = write!(out, " {c} {v:e}");
            }
            out.push('\n');
        }
        out
    }

    /// Hex SHA-256 of [`SketchMatrix::to_text`].
    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::parse(path, "empty sketch file"))?
            .split_whitespace()
            .collect();
        let bad = |m: &str| Error::parse(path, m.to_string());
        let [magic, version, d, s, k, seed] = header[..] else {
            return Err(bad("expected `SKETCH 1 D S k seed`"));
        };
        if magic != "SKETCH" || version != "1" {
            return Err(bad("expected `SKETCH 1 D S k seed`"));
        }
        let rows: usize = d.parse().map_err(|_| bad("bad D"))?;
        let cols: usize = s.parse().map_err(|_| bad("bad S"))?;
        let density: f64 = k.parse().map_err(|_| bad("bad k"))?;
        let seed: u64 = seed.parse().map_err(|_| bad("bad seed"))?;
        let mut row_entries = Vec::with_capacity(rows);
        for line in lines {
            let mut tok = line.split_whitespace();
            let count: usize = tok.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad row count"))?;
            let mut row = Vec::with_capacity(count);
            for _ in 0..count {
                let c: u32 = tok.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad column index"))?;
                let v: f64 = tok.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad value"))?;
                if c as usize >= cols || !v.is_finite() {
                    return Err(bad("entry out of range"));
                }
                if row.last().is_some_and(|&(p, _): &(u32, f64)| p >= c) {
                    return Err(bad("column indices must increase within a row"));
                }
                row.push((c, v));
            }
            if tok.next().is_some() {
                return Err(bad("trailing tokens in row"));
            }
            row_entries.push(row);
        }
        if row_entries.len() != rows {
            return Err(bad("row count does not match header"));
        }
        Ok(SketchMatrix::assemble(rows, cols, density, seed, row_entries))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SketchedMeasurement {
    pub values: Vec<f64>,
}

impl SketchedMeasurement {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn apply(phi: &SketchMatrix, y: &MeasurementVector) -> Result<SketchedMeasurement> {
    Ok(SketchedMeasurement {
        values: phi.apply_bits(y.bits())?,
    })
}

/// Dense D×T matrix stored column-major, one column per template.
#[derive(Clone, Debug, PartialEq)]
pub struct SketchedBasis {
    rows: usize,
    entries: Vec<f64>,
    template_ids: Vec<TemplateId>,
}

#[derive(Serialize, Deserialize)]
struct BasisSidecar {
    rows: usize,
    columns: usize,
    template_ids: Vec<u32>,
    sketch_sha256: String,
}

impl SketchedBasis {
    pub fn new(rows: usize, entries: Vec<f64>, template_ids: Vec<TemplateId>) -> Result<Self> {
        if entries.len() != rows * template_ids.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{} basis",
                entries.len(),
                template_ids.len()
            )));
        }
        Ok(SketchedBasis {
            rows,
            entries,
            template_ids,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.template_ids.len()
    }

    pub fn template_ids(&self) -> &[TemplateId] {
        &self.template_ids
    }

    pub fn column(&self, t: usize) -> &[f64] {
        &self.entries[t * self.rows..(t + 1) * self.rows]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Keeps only the listed templates, in the order given.
    pub fn restrict(&self, ids: &[TemplateId]) -> Result<SketchedBasis> {
        let mut entries = Vec::with_capacity(ids.len() * self.rows);
        for id in ids {
            let t = self
                .template_ids
                .iter()
                .position(|x| x == id)
                .ok_or(Error::UnknownId(id.0))?;
            entries.extend_from_slice(self.column(t));
        }
        SketchedBasis::new(self.rows, entries, ids.to_vec())
    }

    fn sidecar_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".json");
        PathBuf::from(s)
    }

    /// Writes the raw little-endian matrix to `path` and metadata to
    /// `path.json`.
    pub fn write(&self, path: &Path, sketch_sha256: &str) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        for v in &self.entries {
            out.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))?;
        let sidecar = BasisSidecar {
            rows: self.rows,
            columns: self.cols(),
            template_ids: self.template_ids.iter().map(|t| t.0).collect(),
            sketch_sha256: sketch_sha256.to_string(),
        };
        let side = Self::sidecar_path(path);
        std::fs::write(&side, serde_json::to_string_pretty(&sidecar)?).map_err(|e| Error::io(&side, e))
    }

    /// Reads a cached basis, checking it was built from the sketch with the
    /// given hash.
    pub fn read(path: &Path, sketch_sha256: &str) -> Result<SketchedBasis> {
        let side = Self::sidecar_path(path);
        let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let meta: BasisSidecar = serde_json::from_str(&text)?;
        if meta.sketch_sha256 != sketch_sha256 {
            return Err(Error::parse(path, "cached basis was built from a different sketch"));
        }
        if meta.template_ids.len() != meta.columns {
            return Err(Error::parse(&side, "template id count does not match column count"));
        }
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() != 8 * meta.rows * meta.columns {
            return Err(Error::parse(path, "basis file size does not match sidecar"));
        }
        let entries = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        SketchedBasis::new(
            meta.rows,
            entries,
            meta.template_ids.into_iter().map(TemplateId).collect(),
        )
    }
}

/// Renders, flattens and sketches each template, keeping only the sketched
/// column. Columns follow the order of `templates`.
pub fn sketch_templates(phi: &SketchMatrix, templates: &[Template], rig: &CameraRig) -> Result<SketchedBasis> {
    if phi.cols() != rig.measurement_len() {
        return Err(Error::DimensionMismatch(format!(
            "sketch has {} columns but the rig measures {} pixels",
            phi.cols(),
            rig.measurement_len()
        )));
    }
    let d = phi.rows();
    let mut entries = vec![0.0; d * templates.len()];
    if d > 0 {
        entries
            .par_chunks_mut(d)
            .zip(templates.par_iter())
            .try_for_each(|(col, template)| -> Result<()> {
                let y = render_template(template, rig)?;
                for j in y.bits().iter_ones() {
                    for (r, v) in phi.column(j) {
                        col[r] += v;
                    }
                }
                Ok(())
            })?;
    }
    SketchedBasis::new(d, entries, templates.iter().map(|t| t.id).collect())
}

pub fn sketch_basis(phi: &SketchMatrix, library: &TemplateLibrary, rig: &CameraRig) -> Result<SketchedBasis> {
    sketch_templates(phi, library.templates(), rig)
}
