//! Binary PBM (`P4`) silhouettes and measurement manifests.
//!
//! A set bit is a foreground pixel, stored as 1 (black) in the file. Rows are
//! padded to whole bytes, most significant bit first.
//!
//! A measurement manifest is one line, `MEAS 1 P view0.pbm view1.pbm ...`,
//! with view paths relative to the manifest's directory.

use std::path::{Path, PathBuf};

use crate::raster::{flatten, unflatten, BitVec, MeasurementVector, SilhouetteImage};
use crate::{Error, Result};

pub fn encode(image: &SilhouetteImage) -> Vec<u8> {
    let (w, h) = (image.width(), image.height());
    let mut out = format!("P4\n{w} {h}\n").into_bytes();
    let row_bytes = w.div_ceil(8);
    out.reserve(row_bytes * h);
    for y in 0..h {
        for bx in 0..row_bytes {
            let mut byte = 0u8;
            for bit in 0..8 {
                let x = bx * 8 + bit;
                if x < w && image.get(x, y) {
                    byte |= 0x80 >> bit;
                }
            }
            out.push(byte);
        }
    }
    out
}

/// Reads one whitespace-delimited header token, skipping `#` comments.
fn header_token(data: &[u8], pos: &mut usize) -> Option<String> {
    loop {
        while *pos < data.len() && data[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < data.len() && data[*pos] == b'#' {
            while *pos < data.len() && data[*pos] != b'\n' && data[*pos] != b'\r' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < data.len() && !data[*pos].is_ascii_whitespace() && data[*pos] != b'#' {
        *pos += 1;
    }
    (start < *pos).then(|| String::from_utf8_lossy(&data[start..*pos]).into_owned())
}

pub fn decode(data: &[u8], path: &Path) -> Result<SilhouetteImage> {
    let mut pos = 0;
    if header_token(data, &mut pos).as_deref() != Some("P4") {
        return Err(Error::parse(path, "not a binary PBM (expected magic `P4`)"));
    }
    let mut dim = || -> Result<usize> {
        header_token(data, &mut pos)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::parse(path, "bad PBM dimensions"))
    };
    let (w, h) = (dim()?, dim()?);
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= data.len() || !data[pos].is_ascii_whitespace() {
        return Err(Error::parse(path, "truncated PBM header"));
    }
    pos += 1;
    let row_bytes = w.div_ceil(8);
    let raster = &data[pos..];
    if raster.len() < row_bytes * h {
        return Err(Error::parse(
            path,
            format!("PBM raster has {} bytes, expected {}", raster.len(), row_bytes * h),
        ));
    }
    let bits = BitVec::from_bools((0..h).flat_map(|y| {
        (0..w).map(move |x| raster[y * row_bytes + x / 8] & (0x80 >> (x % 8)) != 0)
    }));
    SilhouetteImage::from_bits(w, h, bits)
}

pub fn read(path: &Path) -> Result<SilhouetteImage> {
    let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&data, path)
}

pub fn write(path: &Path, image: &SilhouetteImage) -> Result<()> {
    std::fs::write(path, encode(image)).map_err(|e| Error::io(path, e))
}

/// Writes one PBM per view as `{stem}_{p}.pbm` next to `manifest`, then the
/// manifest line.
pub fn write_measurement(manifest: &Path, y: &MeasurementVector) -> Result<()> {
    let dir = manifest.parent().unwrap_or(Path::new(""));
    let stem = manifest
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "view".into());
    let images = unflatten(y);
    let mut line = format!("MEAS 1 {}", images.len());
    for (p, image) in images.iter().enumerate() {
        let name = format!("{stem}_{p}.pbm");
        write(&dir.join(&name), image)?;
        line.push(' ');
        line.push_str(&name);
    }
    line.push('\n');
    std::fs::write(manifest, line).map_err(|e| Error::io(manifest, e))
}

pub fn read_measurement(manifest: &Path) -> Result<MeasurementVector> {
    let text = std::fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
    let fields: Vec<&str> = text.split_whitespace().collect();
    let count: usize = match fields.as_slice() {
        ["MEAS", "1", p, ..] => p
            .parse()
            .map_err(|_| Error::parse(manifest, "bad view count"))?,
        _ => return Err(Error::parse(manifest, "expected `MEAS 1 P files...`")),
    };
    let files = &fields[3..];
    if files.len() != count {
        return Err(Error::parse(
            manifest,
            format!("manifest declares {count} views but lists {}", files.len()),
        ));
    }
    let dir = manifest.parent().unwrap_or(Path::new(""));
    let images = files
        .iter()
        .map(|f| read(&dir.join(PathBuf::from(f))))
        .collect::<Result<Vec<_>>>()?;
    Ok(flatten(&images))
}
