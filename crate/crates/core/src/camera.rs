//! Pinhole cameras as 3x4 projection matrices.
//!
//! Pixel convention: pixel `(i, j)` covers `[i, i+1) x [j, j+1)` in image
//! coordinates, so its center is `(i + 0.5, j + 0.5)`; x grows right and y
//! grows down.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix3, Matrix3x4, Point2, Vector3};

use crate::geometry::Point;
use crate::{Error, Result};

/// Homogeneous depths below this magnitude are treated as points at infinity.
pub const MIN_DEPTH: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionMatrix {
    entries: Matrix3x4<f64>,
    width: usize,
    height: usize,
}

impl ProjectionMatrix {
    pub fn new(entries: Matrix3x4<f64>, width: usize, height: usize) -> Result<Self> {
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("camera entries must be finite".into()));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter("image dimensions must be positive".into()));
        }
        let block: Matrix3<f64> = entries.fixed_view::<3, 3>(0, 0).into_owned();
        let scale = block.amax().max(f64::MIN_POSITIVE);
        if (block / scale).determinant().abs() < 1e-12 {
            return Err(Error::SingularCamera);
        }
        Ok(ProjectionMatrix {
            entries,
            width,
            height,
        })
    }

    pub fn entries(&self) -> &Matrix3x4<f64> {
        &self.entries
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn project_point(&self, point: &Point) -> Result<Point2<f64>> {
        let h = self.entries * point.to_homogeneous();
        if h.z.abs() < MIN_DEPTH {
            return Err(Error::PointAtInfinity(h.z));
        }
        Ok(Point2::new(h.x / h.z, h.y / h.z))
    }

    /// Unit vector along the viewing direction (third row of the rotation).
    pub fn optical_axis(&self) -> Vector3<f64> {
        let block = self.entries.fixed_view::<3, 3>(0, 0);
        let sign = block.determinant().signum();
        let row: Vector3<f64> = block.row(2).transpose();
        row.normalize() * sign
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CameraRig {
    cameras: Vec<ProjectionMatrix>,
}

impl CameraRig {
    pub fn new(cameras: Vec<ProjectionMatrix>) -> Result<Self> {
        let first = cameras
            .first()
            .ok_or_else(|| Error::InvalidParameter("a rig needs at least one camera".into()))?;
        let dims = (first.width, first.height);
        if cameras.iter().any(|c| (c.width, c.height) != dims) {
            return Err(Error::DimensionMismatch(
                "all cameras in a rig must share image dimensions".into(),
            ));
        }
        Ok(CameraRig { cameras })
    }

    pub fn cameras(&self) -> &[ProjectionMatrix] {
        &self.cameras
    }

    pub fn views(&self) -> usize {
        self.cameras.len()
    }

    pub fn image_dims(&self) -> (usize, usize) {
        (self.cameras[0].width, self.cameras[0].height)
    }

    /// Length S of a measurement vector for this rig.
    pub fn measurement_len(&self) -> usize {
        self.cameras.iter().map(ProjectionMatrix::pixel_count).sum()
    }

    /// `CAMS 1 P W H`, then P lines of 12 row-major reals.
    pub fn to_cams_string(&self) -> String {
        let (w, h) = self.image_dims();
        let mut out = format!("CAMS 1 {} {} {}\n", self.views(), w, h);
        for cam in &self.cameras {
            let row: Vec<String> = (0..3)
                .flat_map(|r| (0..4).map(move |c| (r, c)))
                .map(|(r, c)| format!("{}", cam.entries[(r, c)]))
                .collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn parse_cams(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::parse(path, "empty camera file"))?
            .split_whitespace()
            .collect();
        let (p, w, h) = match header.as_slice() {
            ["CAMS", "1", p, w, h] => match (p.parse(), w.parse(), h.parse()) {
                (Ok(p), Ok(w), Ok(h)) => (p, w, h),
                _ => return Err(Error::parse(path, "bad CAMS header values")),
            },
            _ => return Err(Error::parse(path, "expected header `CAMS 1 P W H`")),
        };
        let mut cameras = Vec::with_capacity(p);
        for (i, line) in lines.enumerate() {
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(path, format!("camera {i}: bad number")))?;
            if vals.len() != 12 {
                return Err(Error::parse(path, format!("camera {i}: expected 12 values")));
            }
            let m = Matrix3x4::from_row_slice(&vals);
            cameras.push(ProjectionMatrix::new(m, w, h)?);
        }
        if cameras.len() != p {
            return Err(Error::parse(
                path,
                format!("header declares {p} cameras, found {}", cameras.len()),
            ));
        }
        CameraRig::new(cameras)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_cams(&text, path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_cams_string()).map_err(|e| Error::io(path, e))
    }
}

/// Parameters of a ring of inward-looking cameras.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RingRigParams {
    pub views: usize,
    /// Horizontal distance from the target, scene units.
    pub radius: f64,
    /// Height above the target, scene units.
    pub elevation: f64,
    pub target: [f64; 3],
    pub width: usize,
    pub height: usize,
    /// Focal length in pixels.
    pub focal: f64,
}

/// Cameras evenly spaced on a horizontal circle around `target`, camera 0 on
/// the +x side, each looking at `target` with +z up.
pub fn ring_rig(params: &RingRigParams) -> Result<CameraRig> {
    if params.views == 0 || !(params.radius > 0.0) || !(params.focal > 0.0) {
        return Err(Error::InvalidParameter(
            "ring rig needs views >= 1, radius > 0 and focal > 0".into(),
        ));
    }
    let target = Point::from(params.target);
    let up = Vector3::z();
    let cameras = (0..params.views)
        .map(|p| {
            let theta = std::f64::consts::TAU * p as f64 / params.views as f64;
            let center = target
                + Vector3::new(
                    params.radius * theta.cos(),
                    params.radius * theta.sin(),
                    params.elevation,
                );
            let forward = (target - center).normalize();
            let right = forward.cross(&up).normalize();
            let down = forward.cross(&right);
            let rotation = Matrix3::from_rows(&[
                right.transpose(),
                down.transpose(),
                forward.transpose(),
            ]);
            let translation = -(rotation * center.coords);
            let intrinsics = Matrix3::new(
                params.focal,
                0.0,
                params.width as f64 / 2.0,
                0.0,
                params.focal,
                params.height as f64 / 2.0,
                0.0,
                0.0,
                1.0,
            );
            let mut extrinsics = Matrix3x4::zeros();
            extrinsics.fixed_view_mut::<3, 3>(0, 0).copy_from(&rotation);
            extrinsics.set_column(3, &translation);
            ProjectionMatrix::new(intrinsics * extrinsics, params.width, params.height)
        })
        .collect::<Result<Vec<_>>>()?;
    CameraRig::new(cameras)
}
