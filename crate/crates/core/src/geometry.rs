//! Convex primitives, grid poses and template libraries.
//!
//! Shapes are stored as vertex lists and always treated as the convex hull of
//! those vertices. A pose is a yaw rotation by a multiple of 90 degrees about
//! the vertical (+z) axis through the model origin, followed by a translation.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{Point3, Vector3};

use crate::{Error, Result};

pub type Point = Point3<f64>;

/// Slack used by the point-in-box test, in scene units.
const BOUNDS_EPS: f64 = 1e-9;

/// One-based template identifier, dense over a library.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct TemplateId(pub u32);

impl TemplateId {
    pub fn from_index(index: usize) -> Self {
        TemplateId(index as u32 + 1)
    }

    /// Zero-based column index.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl std::fmt::Display for TemplateId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ShapeKind {
    Box,
    Wedge,
    ArchApproximation,
    LeafQuad,
}

impl ShapeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ShapeKind::Box => "box",
            ShapeKind::Wedge => "wedge",
            ShapeKind::ArchApproximation => "arch",
            ShapeKind::LeafQuad => "leaf-quad",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "box" => Some(ShapeKind::Box),
            "wedge" => Some(ShapeKind::Wedge),
            "arch" => Some(ShapeKind::ArchApproximation),
            "leaf-quad" => Some(ShapeKind::LeafQuad),
            _ => None,
        }
    }
}

/// A convex primitive in model coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimitiveShape {
    name: String,
    kind: ShapeKind,
    vertices: Vec<Point>,
    /// Number of distinct yaw rotations (1, 2 or 4) used when enumerating.
    rotations: u8,
}

impl PrimitiveShape {
    pub fn new(
        name: impl Into<String>,
        kind: ShapeKind,
        vertices: Vec<Point>,
        rotations: u8,
    ) -> Result<Self> {
        let name = name.into();
        let invalid = |reason: &str| Error::InvalidShape {
            name: name.clone(),
            reason: reason.to_string(),
        };
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(invalid("name must be non-empty and contain no whitespace"));
        }
        if !matches!(rotations, 1 | 2 | 4) {
            return Err(invalid("rotation count must be 1, 2 or 4"));
        }
        if vertices.iter().any(|v| !v.coords.iter().all(|c| c.is_finite())) {
            return Err(invalid("vertex coordinates must be finite"));
        }
        if vertices.len() < 4 {
            return Err(invalid("at least 4 vertices are required"));
        }
        let coplanar = is_coplanar(&vertices);
        match kind {
            ShapeKind::LeafQuad => {
                if vertices.len() != 4 || !coplanar {
                    return Err(invalid("a leaf quad has exactly 4 coplanar vertices"));
                }
            }
            _ if coplanar => return Err(invalid("solid shape has coplanar vertices")),
            _ => {}
        }
        Ok(PrimitiveShape {
            name,
            kind,
            vertices,
            rotations,
        })
    }

    /// Axis-aligned box occupying `[0,sx] x [0,sy] x [0,sz]`.
    pub fn cuboid(name: &str, sx: f64, sy: f64, sz: f64, rotations: u8) -> Result<Self> {
        let mut vertices = Vec::with_capacity(8);
        for &z in &[0.0, sz] {
            for &y in &[0.0, sy] {
                for &x in &[0.0, sx] {
                    vertices.push(Point::new(x, y, z));
                }
            }
        }
        Self::new(name, ShapeKind::Box, vertices, rotations)
    }

    /// Convex stand-in for an arch: a footprint `[-sx/2,sx/2] x [-sy/2,sy/2]`
    /// whose top narrows to a ridge running along x. Symmetric under a
    /// half turn, so two rotations are distinct.
    pub fn arch(name: &str, sx: f64, sy: f64, height: f64) -> Result<Self> {
        let (hx, hy) = (sx / 2.0, sy / 2.0);
        let vertices = vec![
            Point::new(-hx, -hy, 0.0),
            Point::new(hx, -hy, 0.0),
            Point::new(hx, hy, 0.0),
            Point::new(-hx, hy, 0.0),
            Point::new(-hx, -hy / 2.0, height),
            Point::new(hx, -hy / 2.0, height),
            Point::new(hx, hy / 2.0, height),
            Point::new(-hx, hy / 2.0, height),
        ];
        Self::new(name, ShapeKind::ArchApproximation, vertices, 2)
    }

    /// Right-angle wedge: a `[0,sx] x [0,sy]` footprint rising to height
    /// `sz` along the x = 0 edge.
    pub fn wedge(name: &str, sx: f64, sy: f64, sz: f64) -> Result<Self> {
        let vertices = vec![
            Point::new(0.0, 0.0, 0.0),
            Point::new(sx, 0.0, 0.0),
            Point::new(sx, sy, 0.0),
            Point::new(0.0, sy, 0.0),
            Point::new(0.0, 0.0, sz),
            Point::new(0.0, sy, sz),
        ];
        Self::new(name, ShapeKind::Wedge, vertices, 4)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> ShapeKind {
        self.kind
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn rotations(&self) -> u8 {
        self.rotations
    }
}

fn is_coplanar(vertices: &[Point]) -> bool {
    let scale = vertices
        .iter()
        .flat_map(|v| v.coords.iter().map(|c| c.abs()))
        .fold(1.0f64, f64::max);
    let origin = vertices[0];
    // Normal of the largest triangle through the first vertex.
    let normal = vertices
        .iter()
        .enumerate()
        .skip(1)
        .flat_map(|(i, a)| {
            vertices[i + 1..]
                .iter()
                .map(move |b| (a - origin).cross(&(b - origin)))
        })
        .max_by(|x, y| x.norm().total_cmp(&y.norm()));
    match normal {
        Some(n) if n.norm() > 1e-12 * scale * scale => {
            let n = n.normalize();
            vertices
                .iter()
                .all(|v| n.dot(&(v - origin)).abs() <= 1e-9 * scale)
        }
        _ => true,
    }
}

/// Axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    pub fn new(min: Point, max: Point) -> Result<Self> {
        if (0..3).any(|i| !(min[i] <= max[i]) || !min[i].is_finite() || !max[i].is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bounds min {min} must be <= max {max}"
            )));
        }
        Ok(Aabb { min, max })
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] - BOUNDS_EPS && p[i] <= self.max[i] + BOUNDS_EPS)
    }

    pub fn center(&self) -> Point {
        nalgebra::center(&self.min, &self.max)
    }

    /// Smallest box containing all points.
    pub fn enclosing<'a>(points: impl IntoIterator<Item = &'a Point>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let (mut min, mut max) = (first, first);
        for p in it {
            for i in 0..3 {
                min[i] = min[i].min(p[i]);
                max[i] = max[i].max(p[i]);
            }
        }
        Some(Aabb { min, max })
    }
}

/// Yaw rotation by `rotation * 90` degrees about +z, then translation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    rotation: u8,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn new(rotation: u8, translation: Vector3<f64>) -> Result<Self> {
        if rotation > 3 {
            return Err(Error::InvalidParameter(format!(
                "rotation index {rotation} is not in 0..=3"
            )));
        }
        Ok(Pose {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Pose {
            rotation: 0,
            translation: Vector3::zeros(),
        }
    }

    pub fn rotation(&self) -> u8 {
        self.rotation
    }

    pub fn apply(&self, p: &Point) -> Point {
        // Exact quarter turns: no trigonometry, so repeated turns compose exactly.
        let (x, y) = match self.rotation {
            0 => (p.x, p.y),
            1 => (-p.y, p.x),
            2 => (-p.x, -p.y),
            _ => (p.y, -p.x),
        };
        Point::new(x, y, p.z) + self.translation
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Template {
    pub id: TemplateId,
    pub shape_index: usize,
    pub shape: Arc<PrimitiveShape>,
    pub pose: Pose,
}

impl Template {
    pub fn transformed_vertices(&self) -> Vec<Point> {
        self.shape
            .vertices()
            .iter()
            .map(|v| self.pose.apply(v))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TemplateLibrary {
    shapes: Vec<Arc<PrimitiveShape>>,
    templates: Vec<Template>,
    bounds: Aabb,
    pitch: f64,
}

impl TemplateLibrary {
    /// Builds a library from explicit placements; ids are assigned in order.
    pub fn from_placements(
        shapes: Vec<PrimitiveShape>,
        placements: impl IntoIterator<Item = (usize, Pose)>,
        bounds: Aabb,
        pitch: f64,
    ) -> Result<Self> {
        let shapes: Vec<_> = shapes.into_iter().map(Arc::new).collect();
        let mut templates = Vec::new();
        for (shape_index, pose) in placements {
            let shape = shapes.get(shape_index).ok_or_else(|| {
                Error::InvalidParameter(format!("shape index {shape_index} out of range"))
            })?;
            let template = Template {
                id: TemplateId::from_index(templates.len()),
                shape_index,
                shape: Arc::clone(shape),
                pose,
            };
            if let Some(v) = template
                .transformed_vertices()
                .iter()
                .find(|v| !bounds.contains(v))
            {
                return Err(Error::InvalidParameter(format!(
                    "template {} has vertex {v} outside the scene bounds",
                    template.id
                )));
            }
            templates.push(template);
        }
        if templates.is_empty() {
            return Err(Error::EmptyLibrary);
        }
        Ok(TemplateLibrary {
            shapes,
            templates,
            bounds,
            pitch,
        })
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn shapes(&self) -> &[Arc<PrimitiveShape>] {
        &self.shapes
    }

    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn get(&self, id: TemplateId) -> Result<&Template> {
        if id.0 == 0 {
            return Err(Error::UnknownId(id.0));
        }
        self.templates.get(id.index()).ok_or(Error::UnknownId(id.0))
    }

    /// Library restricted to `ids`, renumbered densely in the given order.
    pub fn subset(&self, ids: &[TemplateId]) -> Result<TemplateLibrary> {
        let placements = ids
            .iter()
            .map(|&id| self.get(id).map(|t| (t.shape_index, t.pose)))
            .collect::<Result<Vec<_>>>()?;
        let shapes = self.shapes.iter().map(|s| (**s).clone()).collect();
        TemplateLibrary::from_placements(shapes, placements, self.bounds, self.pitch)
    }

    pub fn to_tlib_string(&self) -> String {
        let mut out = String::from("TLIB 1\n");
        let (lo, hi) = (self.bounds.min, self.bounds.max);
        let _ = writeln!(
            out,
            "BOUNDS {} {} {} {} {} {} {}",
            lo.x, lo.y, lo.z, hi.x, hi.y, hi.z, self.pitch
        );
        for shape in &self.shapes {
            let _ = write!(out, "SHAPE {} {}", shape.name(), shape.kind().as_str());
            for v in shape.vertices() {
                let _ = write!(out, " {} {} {}", v.x, v.y, v.z);
            }
            out.push('\n');
        }
        for t in &self.templates {
            let tr = t.pose.translation;
            let _ = writeln!(
                out,
                "TMPL {} {} {} {} {} {}",
                t.id,
                t.shape_index,
                t.pose.rotation(),
                tr.x,
                tr.y,
                tr.z
            );
        }
        out
    }

    pub fn parse_tlib(text: &str, path: &Path) -> Result<Self> {
        let mut lines = content_lines(text);
        match lines.next() {
            Some((_, "TLIB 1")) => {}
            _ => return Err(Error::parse(path, "expected header `TLIB 1`")),
        }
        let mut bounds = None;
        let mut pitch = 1.0;
        let mut shapes = Vec::new();
        let mut placements = Vec::new();
        for (lineno, line) in lines {
            let err = |m: &str| Error::parse(path, format!("line {lineno}: {m}"));
            let mut fields = line.split_whitespace();
            match fields.next() {
                Some("BOUNDS") => {
                    let v = parse_floats(fields).ok_or_else(|| err("bad BOUNDS"))?;
                    if v.len() != 7 {
                        return Err(err("BOUNDS takes 6 coordinates and a pitch"));
                    }
                    bounds = Some(Aabb::new(
                        Point::new(v[0], v[1], v[2]),
                        Point::new(v[3], v[4], v[5]),
                    )?);
                    pitch = v[6];
                }
                Some("SHAPE") => {
                    let name = fields.next().ok_or_else(|| err("missing shape name"))?;
                    let kind = fields
                        .next()
                        .and_then(ShapeKind::parse)
                        .ok_or_else(|| err("unknown shape kind"))?;
                    let shape = shape_from_fields(name, kind, 4, fields).map_err(|e| err(&e))?;
                    shapes.push(shape);
                }
                Some("TMPL") => {
                    let v = parse_floats(fields).ok_or_else(|| err("bad TMPL"))?;
                    if v.len() != 6 {
                        return Err(err("TMPL takes id shape_idx rot tx ty tz"));
                    }
                    if v[0] != (placements.len() + 1) as f64 {
                        return Err(err("template ids must be dense and ascending from 1"));
                    }
                    let pose = Pose::new(v[2] as u8, Vector3::new(v[3], v[4], v[5]))?;
                    placements.push((v[1] as usize, pose));
                }
                _ => return Err(err("unrecognised record")),
            }
        }
        let bounds = match bounds {
            Some(b) => b,
            None => {
                // Fall back to the tight box around all placed vertices.
                let pts: Vec<Point> = placements
                    .iter()
                    .filter_map(|(s, pose)| shapes.get(*s).map(|sh: &PrimitiveShape| (sh, pose)))
                    .flat_map(|(sh, pose)| sh.vertices().iter().map(move |v| pose.apply(v)))
                    .collect();
                Aabb::enclosing(&pts).ok_or(Error::EmptyLibrary)?
            }
        };
        TemplateLibrary::from_placements(shapes, placements, bounds, pitch)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tlib(&text, path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_tlib_string()).map_err(|e| Error::io(path, e))
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_floats<'a>(fields: impl Iterator<Item = &'a str>) -> Option<Vec<f64>> {
    fields.map(|f| f.parse::<f64>().ok()).collect()
}

fn shape_from_fields<'a>(
    name: &str,
    kind: ShapeKind,
    rotations: u8,
    fields: impl Iterator<Item = &'a str>,
) -> std::result::Result<PrimitiveShape, String> {
    let coords = parse_floats(fields).ok_or("bad vertex coordinate")?;
    if coords.len() % 3 != 0 {
        return Err("vertex coordinates must come in triples".into());
    }
    let vertices = coords
        .chunks(3)
        .map(|c| Point::new(c[0], c[1], c[2]))
        .collect();
    PrimitiveShape::new(name, kind, vertices, rotations).map_err(|e| e.to_string())
}

/// Parses a shapes file: header `SHAPES 1`, then one
/// `SHAPE name kind rotations v0x v0y v0z ...` line per shape.
pub fn parse_shapes(text: &str, path: &Path) -> Result<Vec<PrimitiveShape>> {
    let mut lines = content_lines(text);
    match lines.next() {
        Some((_, "SHAPES 1")) => {}
        _ => return Err(Error::parse(path, "expected header `SHAPES 1`")),
    }
    let mut shapes = Vec::new();
    for (lineno, line) in lines {
        let err = |m: &str| Error::parse(path, format!("line {lineno}: {m}"));
        let mut fields = line.split_whitespace();
        if fields.next() != Some("SHAPE") {
            return Err(err("expected SHAPE record"));
        }
        let name = fields.next().ok_or_else(|| err("missing shape name"))?;
        let kind = fields
            .next()
            .and_then(ShapeKind::parse)
            .ok_or_else(|| err("unknown shape kind"))?;
        let rotations = fields
            .next()
            .and_then(|r| r.parse::<u8>().ok())
            .ok_or_else(|| err("missing rotation count"))?;
        shapes.push(shape_from_fields(name, kind, rotations, fields).map_err(|e| err(&e))?);
    }
    Ok(shapes)
}

pub fn shapes_to_string(shapes: &[PrimitiveShape]) -> String {
    let mut out = String::from("SHAPES 1\n");
    for s in shapes {
        let _ = write!(out, "SHAPE {} {} {}", s.name(), s.kind().as_str(), s.rotations());
        for v in s.vertices() {
            let _ = write!(out, " {} {} {}", v.x, v.y, v.z);
        }
        out.push('\n');
    }
    out
}

fn grid_steps(lo: f64, hi: f64, pitch: f64) -> usize {
    ((hi - lo) / pitch + 1e-9).floor() as usize + 1
}

/// Enumerates every (shape, rotation, grid translation) whose transformed hull
/// lies inside `bounds`.
///
/// Translations sit on the grid `bounds.min + pitch * (col, row, layer)`.
/// Ids follow the lexicographic order (shape, layer, row, column, rotation).
pub fn enumerate_library(
    shapes: &[PrimitiveShape],
    bounds: Aabb,
    pitch: f64,
    layers: usize,
) -> Result<TemplateLibrary> {
    if !(pitch > 0.0) || !pitch.is_finite() {
        return Err(Error::InvalidParameter(format!("pitch must be > 0, got {pitch}")));
    }
    if layers == 0 {
        return Err(Error::InvalidParameter("layers must be >= 1".into()));
    }
    let cols = grid_steps(bounds.min.x, bounds.max.x, pitch);
    let rows = grid_steps(bounds.min.y, bounds.max.y, pitch);
    let mut placements = Vec::new();
    for (shape_index, shape) in shapes.iter().enumerate() {
        for layer in 0..layers {
            for row in 0..rows {
                for col in 0..cols {
                    let t = Vector3::new(
                        bounds.min.x + col as f64 * pitch,
                        bounds.min.y + row as f64 * pitch,
                        bounds.min.z + layer as f64 * pitch,
                    );
                    for rotation in 0..shape.rotations() {
                        let pose = Pose { rotation, translation: t };
                        if shape
                            .vertices()
                            .iter()
                            .all(|v| bounds.contains(&pose.apply(v)))
                        {
                            placements.push((shape_index, pose));
                        }
                    }
                }
            }
        }
    }
    if placements.is_empty() {
        return Err(Error::EmptyLibrary);
    }
    TemplateLibrary::from_placements(shapes.to_vec(), placements, bounds, pitch)
}

/// Looks up the templates making up a scene; duplicates are rejected.
pub fn compose_scene(ids: &[TemplateId], library: &TemplateLibrary) -> Result<Vec<Template>> {
    let mut seen = HashSet::with_capacity(ids.len());
    ids.iter()
        .map(|&id| {
            if !seen.insert(id) {
                return Err(Error::DuplicateId(id.0));
            }
            library.get(id).cloned()
        })
        .collect()
}

/// `SCENE 1` followed by one `TMPL_REF id` line per part. Lines starting with
/// `#` are comments.
pub fn scene_to_string(ids: &[TemplateId]) -> String {
    let mut out = String::from("SCENE 1\n");
    for id in ids {
        let _ = writeln!(out, "TMPL_REF {id}");
    }
    out
}

pub fn parse_scene(text: &str, path: &Path) -> Result<Vec<TemplateId>> {
    let mut lines = content_lines(text);
    match lines.next() {
        Some((_, "SCENE 1")) => {}
        _ => return Err(Error::parse(path, "expected header `SCENE 1`")),
    }
    lines
        .map(|(lineno, line)| {
            let mut fields = line.split_whitespace();
            match (fields.next(), fields.next().map(str::parse::<u32>), fields.next()) {
                (Some("TMPL_REF"), Some(Ok(id)), None) if id > 0 => Ok(TemplateId(id)),
                _ => Err(Error::parse(path, format!("line {lineno}: expected `TMPL_REF id`"))),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_box() -> PrimitiveShape {
        PrimitiveShape::cuboid("brick1x1", 1.0, 1.0, 1.0, 1).unwrap()
    }

    fn cube_bounds(n: f64, layers: f64) -> Aabb {
        Aabb::new(Point::origin(), Point::new(n, n, layers)).unwrap()
    }

    #[test]
    fn lego_brick_grid_gives_784_templates() {
        let lib = enumerate_library(&[unit_box()], cube_bounds(14.0, 4.0), 1.0, 4).unwrap();
        assert_eq!(lib.len(), 784);
    }

    #[test]
    fn arch_grid_gives_968_templates() {
        let arch = PrimitiveShape::arch("arch", 4.0, 4.0, 1.0).unwrap();
        let lib = enumerate_library(&[arch], cube_bounds(14.0, 4.0), 1.0, 4).unwrap();
        assert_eq!(lib.len(), 968);
    }

    #[test]
    fn degenerate_grid_has_one_template() {
        let lib = enumerate_library(&[unit_box()], cube_bounds(1.0, 1.0), 1.0, 1).unwrap();
        assert_eq!(lib.len(), 1);
        assert_eq!(lib.templates()[0].id, TemplateId(1));
    }

    #[test]
    fn nothing_fits_is_empty_library() {
        let big = PrimitiveShape::cuboid("big", 5.0, 5.0, 5.0, 1).unwrap();
        let err = enumerate_library(&[big], cube_bounds(2.0, 2.0), 1.0, 2).unwrap_err();
        assert!(matches!(err, Error::EmptyLibrary));
    }

    #[test]
    fn bad_parameters_rejected() {
        assert!(enumerate_library(&[unit_box()], cube_bounds(2.0, 1.0), 0.0, 1).is_err());
        assert!(enumerate_library(&[unit_box()], cube_bounds(2.0, 1.0), 1.0, 0).is_err());
    }

    #[test]
    fn ids_follow_shape_layer_row_col_rotation_order() {
        let bar = PrimitiveShape::cuboid("bar", 2.0, 1.0, 1.0, 2).unwrap();
        let bounds = Aabb::new(Point::new(-2.0, -2.0, 0.0), Point::new(2.0, 2.0, 2.0)).unwrap();
        let lib = enumerate_library(&[unit_box(), bar], bounds, 1.0, 2).unwrap();
        let key = |t: &Template| {
            let tr = t.pose.translation;
            (
                t.shape_index,
                tr.z as i64,
                tr.y as i64,
                tr.x as i64,
                t.pose.rotation(),
            )
        };
        let keys: Vec<_> = lib.templates().iter().map(key).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        for (i, t) in lib.templates().iter().enumerate() {
            assert_eq!(t.id, TemplateId::from_index(i));
            assert!(t.transformed_vertices().iter().all(|v| bounds.contains(v)));
        }
    }

    /// Hand count: a box with footprint a x b on an n x n unit grid has
    /// (n-a+1)(n-b+1) placements per rotation when its model corner sits at the
    /// grid point; the quarter-turned copy occupies [-b,0] x [0,a] and so needs
    /// x >= b.
    #[test]
    fn count_law_on_small_grids() {
        for n in 1..=3usize {
            for (a, b) in [(1usize, 1usize), (1, 2), (2, 1), (2, 2), (1, 3)] {
                for layers in 1..=2usize {
                    let shape = PrimitiveShape::cuboid("s", a as f64, b as f64, 1.0, 1).unwrap();
                    let bounds = cube_bounds(n as f64, layers as f64);
                    let per_layer = (n + 1).saturating_sub(a) * (n + 1).saturating_sub(b);
                    let expected = layers * per_layer;
                    match enumerate_library(&[shape], bounds, 1.0, layers) {
                        Ok(lib) => assert_eq!(lib.len(), expected, "n={n} a={a} b={b}"),
                        Err(Error::EmptyLibrary) => assert_eq!(expected, 0),
                        Err(e) => panic!("{e}"),
                    }
                }
            }
        }
        // Two rotations of a 2x1 bar on a 3x3 grid: rotation 0 covers [x,x+2]x[y,y+1],
        // rotation 1 covers [x-1,x]x[y,y+2]; both give 2*3 = 6 placements per layer.
        let bar = PrimitiveShape::cuboid("bar", 2.0, 1.0, 1.0, 2).unwrap();
        let lib = enumerate_library(&[bar], cube_bounds(3.0, 1.0), 1.0, 1).unwrap();
        assert_eq!(lib.len(), 2 * 6);
    }

    #[test]
    fn enumeration_is_deterministic() {
        let arch = PrimitiveShape::arch("arch", 2.0, 2.0, 1.0).unwrap();
        let a = enumerate_library(&[unit_box(), arch.clone()], cube_bounds(4.0, 2.0), 1.0, 2)
            .unwrap();
        let b = enumerate_library(&[unit_box(), arch], cube_bounds(4.0, 2.0), 1.0, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identity_pose_keeps_vertices() {
        let t = Template {
            id: TemplateId(1),
            shape_index: 0,
            shape: Arc::new(unit_box()),
            pose: Pose::identity(),
        };
        assert_eq!(t.transformed_vertices(), unit_box().vertices());
    }

    #[test]
    fn translation_shifts_x() {
        let pose = Pose::new(0, Vector3::new(1.0, 0.0, 0.0)).unwrap();
        for v in unit_box().vertices() {
            let moved = pose.apply(v);
            assert_eq!(moved.x, v.x + 1.0);
            assert_eq!((moved.y, moved.z), (v.y, v.z));
        }
    }

    #[test]
    fn half_turn_twice_restores_vertices() {
        let half = Pose::new(2, Vector3::zeros()).unwrap();
        let shape = PrimitiveShape::wedge("w", 1.5, 0.7, 0.3).unwrap();
        for v in shape.vertices() {
            let back = half.apply(&half.apply(v));
            assert_relative_eq!((back - v).norm(), 0.0, epsilon = 1e-12);
        }
        assert!(Pose::new(4, Vector3::zeros()).is_err());
    }

    #[test]
    fn shape_validation() {
        let flat = vec![
            Point::new(0.0, 0.0, 0.0),
            Point::new(1.0, 0.0, 0.0),
            Point::new(1.0, 1.0, 0.0),
            Point::new(0.0, 1.0, 0.0),
        ];
        assert!(PrimitiveShape::new("leaf", ShapeKind::LeafQuad, flat.clone(), 1).is_ok());
        assert!(PrimitiveShape::new("slab", ShapeKind::Box, flat.clone(), 1).is_err());
        assert!(PrimitiveShape::new("tri", ShapeKind::Box, flat[..3].to_vec(), 1).is_err());
        assert!(PrimitiveShape::new("bad name", ShapeKind::LeafQuad, flat.clone(), 1).is_err());
        assert!(PrimitiveShape::new("r3", ShapeKind::LeafQuad, flat, 3).is_err());
        let mut bent = PrimitiveShape::cuboid("c", 1.0, 1.0, 1.0, 1).unwrap().vertices()[..4].to_vec();
        bent[3].z = 0.5;
        assert!(PrimitiveShape::new("bent", ShapeKind::LeafQuad, bent, 1).is_err());
    }

    #[test]
    fn compose_scene_cases() {
        let lib = enumerate_library(&[unit_box()], cube_bounds(3.0, 1.0), 1.0, 1).unwrap();
        assert!(compose_scene(&[], &lib).unwrap().is_empty());
        let one = compose_scene(&[TemplateId(3)], &lib).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].id, TemplateId(3));
        assert!(matches!(
            compose_scene(&[TemplateId(1), TemplateId(1)], &lib),
            Err(Error::DuplicateId(1))
        ));
        assert!(matches!(
            compose_scene(&[TemplateId(10)], &lib),
            Err(Error::UnknownId(10))
        ));
        assert!(matches!(compose_scene(&[TemplateId(0)], &lib), Err(Error::UnknownId(0))));
    }

    #[test]
    fn tlib_round_trip() {
        let arch = PrimitiveShape::arch("arch", 2.0, 2.0, 0.5).unwrap();
        let lib = enumerate_library(&[unit_box(), arch], cube_bounds(3.0, 2.0), 0.5, 3).unwrap();
        let text = lib.to_tlib_string();
        let back = TemplateLibrary::parse_tlib(&text, Path::new("mem")).unwrap();
        assert_eq!(back.len(), lib.len());
        assert_eq!(back.to_tlib_string(), text);
        for (a, b) in lib.templates().iter().zip(back.templates()) {
            assert_eq!(a.transformed_vertices(), b.transformed_vertices());
        }
    }

    #[test]
    fn tlib_rejects_sparse_ids() {
        let text = "TLIB 1\nSHAPE b box 0 0 0 1 0 0 0 1 0 0 0 1\nTMPL 2 0 0 0 0 0\n";
        assert!(TemplateLibrary::parse_tlib(text, Path::new("mem")).is_err());
    }

    #[test]
    fn scene_round_trip() {
        let ids = vec![TemplateId(4), TemplateId(1), TemplateId(9)];
        let text = scene_to_string(&ids);
        assert_eq!(text, "SCENE 1\nTMPL_REF 4\nTMPL_REF 1\nTMPL_REF 9\n");
        let with_comment = format!("{text}# error 3\n");
        assert_eq!(parse_scene(&with_comment, Path::new("mem")).unwrap(), ids);
        assert!(parse_scene("SCENE 1\nTMPL_REF 0\n", Path::new("mem")).is_err());
    }

    #[test]
    fn shapes_file_round_trip() {
        let shapes = vec![unit_box(), PrimitiveShape::arch("arch", 4.0, 4.0, 1.0).unwrap()];
        let text = shapes_to_string(&shapes);
        assert_eq!(parse_shapes(&text, Path::new("mem")).unwrap(), shapes);
        assert!(parse_shapes("SHAPES 1\n", Path::new("mem")).unwrap().is_empty());
    }
}
