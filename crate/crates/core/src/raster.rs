//! Binary silhouettes, measurement vectors and noise.
//!
//! A template's silhouette in one view is the filled 2D convex hull of its
//! projected vertices. A pixel is set iff its center lies inside the hull;
//! centers exactly on an edge count only for top and left edges, so shapes
//! sharing an edge never both claim the pixel.

use rand::seq::index::sample;
use rand::Rng;

use crate::camera::{CameraRig, ProjectionMatrix};
use crate::geometry::Template;
use crate::{seed, Error, Result};

/// Fixed-length bit vector packed 64 bits per word; bits past `len` are zero.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BitVec {
    words: Vec<u64>,
    len: usize,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        BitVec {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn from_bools(bits: impl IntoIterator<Item = bool>) -> Self {
        let mut out = BitVec::zeros(0);
        for b in bits {
            if out.len % 64 == 0 {
                out.words.push(0);
            }
            if b {
                out.words[out.len / 64] |= 1 << (out.len % 64);
            }
            out.len += 1;
        }
        out
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        let mask = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    /// Sets bits `start..end`.
    pub fn set_range(&mut self, start: usize, end: usize) {
        assert!(start <= end && end <= self.len);
        let mut i = start;
        while i < end {
            let offset = i % 64;
            let take = (64 - offset).min(end - i);
            let mask = if take == 64 {
                u64::MAX
            } else {
                ((1u64 << take) - 1) << offset
            };
            self.words[i / 64] |= mask;
            i += take;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn or_assign(&mut self, other: &BitVec) {
        assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    /// Number of positions where `self` and `other` differ.
    pub fn hamming(&self, other: &BitVec) -> usize {
        assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    /// Number of positions set in both.
    pub fn and_count(&self, other: &BitVec) -> usize {
        assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    /// Number of positions set in `self` but not in `other`.
    pub fn and_not_count(&self, other: &BitVec) -> usize {
        assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & !b).count_ones() as usize)
            .sum()
    }

    /// Whether every set bit of `self` is also set in `other`.
    pub fn is_subset(&self, other: &BitVec) -> bool {
        self.and_not_count(other) == 0
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let bit = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(wi * 64 + bit)
            })
        })
    }

    /// Appends all bits of `other`.
    pub fn extend_from(&mut self, other: &BitVec) {
        let shift = self.len % 64;
        if shift == 0 {
            self.words.extend_from_slice(&other.words);
        } else {
            for &w in &other.words {
                *self.words.last_mut().expect("non-empty when shift > 0") |= w << shift;
                self.words.push(w >> (64 - shift));
            }
        }
        self.len += other.len;
        self.words.truncate(self.len.div_ceil(64));
    }

    /// Copies bits `start..start + len` into a new vector.
    pub fn slice(&self, start: usize, len: usize) -> BitVec {
        assert!(start + len <= self.len);
        let mut out = BitVec::zeros(len);
        let shift = start % 64;
        let base = start / 64;
        for (k, word) in out.words.iter_mut().enumerate() {
            let lo = self.words.get(base + k).copied().unwrap_or(0) >> shift;
            let hi = if shift == 0 {
                0
            } else {
                self.words.get(base + k + 1).copied().unwrap_or(0) << (64 - shift)
            };
            *word = lo | hi;
        }
        out.clear_tail();
        out
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

/// Row-major binary mask of one view.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SilhouetteImage {
    width: usize,
    height: usize,
    bits: BitVec,
}

impl SilhouetteImage {
    pub fn empty(width: usize, height: usize) -> Self {
        SilhouetteImage {
            width,
            height,
            bits: BitVec::zeros(width * height),
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: BitVec) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} bits for a {width}x{height} image",
                bits.len()
            )));
        }
        Ok(SilhouetteImage {
            width,
            height,
            bits,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &BitVec {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits.get(y * self.width + x)
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits.set(y * self.width + x, value)
    }

    pub fn count_ones(&self) -> usize {
        self.bits.count_ones()
    }

    pub fn or_assign(&mut self, other: &SilhouetteImage) {
        self.bits.or_assign(&other.bits)
    }
}

/// Concatenation of flattened view silhouettes, in view order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeasurementVector {
    bits: BitVec,
    /// `(width, height)` of each view.
    dims: Vec<(usize, usize)>,
    /// Start index of each view's block.
    offsets: Vec<usize>,
}

impl MeasurementVector {
    pub fn zeros_like(rig: &CameraRig) -> Self {
        let dims: Vec<_> = rig.cameras().iter().map(|c| (c.width(), c.height())).collect();
        Self::with_dims(BitVec::zeros(rig.measurement_len()), dims)
            .expect("length matches by construction")
    }

    pub fn with_dims(bits: BitVec, dims: Vec<(usize, usize)>) -> Result<Self> {
        let mut offsets = Vec::with_capacity(dims.len());
        let mut total = 0;
        for (w, h) in &dims {
            offsets.push(total);
            total += w * h;
        }
        if total != bits.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} bits for views totalling {total} pixels",
                bits.len()
            )));
        }
        Ok(MeasurementVector {
            bits,
            dims,
            offsets,
        })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &BitVec {
        &self.bits
    }

    pub fn bits_mut(&mut self) -> &mut BitVec {
        &mut self.bits
    }

    pub fn view_offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn view_dims(&self) -> &[(usize, usize)] {
        &self.dims
    }

    pub fn count_ones(&self) -> usize {
        self.bits.count_ones()
    }

    /// Checks that this vector was laid out for `rig`.
    pub fn check_rig(&self, rig: &CameraRig) -> Result<()> {
        let rig_dims = rig.cameras().iter().map(|c| (c.width(), c.height()));
        if self.dims.len() != rig.views() || !rig_dims.eq(self.dims.iter().copied()) {
            return Err(Error::DimensionMismatch(format!(
                "measurement has {} views of {:?}, rig has {} views of {:?}",
                self.dims.len(),
                self.dims.first(),
                rig.views(),
                rig.image_dims()
            )));
        }
        Ok(())
    }

    pub fn or_assign(&mut self, other: &MeasurementVector) {
        self.bits.or_assign(&other.bits)
    }
}

/// Row-major per image, images in view order.
pub fn flatten(images: &[SilhouetteImage]) -> MeasurementVector {
    let mut bits = BitVec::zeros(0);
    for image in images {
        bits.extend_from(&image.bits);
    }
    let dims = images.iter().map(|i| (i.width, i.height)).collect();
    MeasurementVector::with_dims(bits, dims).expect("length matches by construction")
}

/// Flattens and checks the images against a rig.
pub fn flatten_for_rig(images: &[SilhouetteImage], rig: &CameraRig) -> Result<MeasurementVector> {
    let y = flatten(images);
    y.check_rig(rig)?;
    Ok(y)
}

pub fn unflatten(y: &MeasurementVector) -> Vec<SilhouetteImage> {
    y.dims
        .iter()
        .zip(&y.offsets)
        .map(|(&(w, h), &start)| SilhouetteImage {
            width: w,
            height: h,
            bits: y.bits.slice(start, w * h),
        })
        .collect()
}

type P2 = (f64, f64);

fn cross(o: P2, a: P2, b: P2) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull (monotone chain), positively oriented, collinear points dropped.
pub fn convex_hull(points: &[P2]) -> Vec<P2> {
    let mut pts: Vec<P2> = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    fn half(pts: impl Iterator<Item = P2>) -> Vec<P2> {
        let mut chain: Vec<P2> = Vec::new();
        for p in pts {
            while chain.len() >= 2 && cross(chain[chain.len() - 2], chain[chain.len() - 1], p) <= 0.0 {
                chain.pop();
            }
            chain.push(p);
        }
        chain.pop();
        chain
    }
    let mut hull = half(pts.iter().copied());
    hull.extend(half(pts.iter().rev().copied()));
    hull
}

/// Pixel-center coverage test for a positively oriented convex polygon.
///
/// Centers on an edge belong to the polygon only when the edge is a top edge
/// (horizontal, interior below) or a left edge (interior to its right).
struct ConvexPolygon {
    edges: Vec<(P2, P2)>,
}

impl ConvexPolygon {
    fn new(hull: &[P2]) -> Self {
        let edges = (0..hull.len())
            .map(|i| (hull[i], hull[(i + 1) % hull.len()]))
            .collect();
        ConvexPolygon { edges }
    }

    #[inline]
    fn covers(&self, p: P2) -> bool {
        self.edges.iter().all(|&(a, b)| {
            let e = cross(a, b, p);
            if e != 0.0 {
                return e > 0.0;
            }
            let (dx, dy) = (b.0 - a.0, b.1 - a.1);
            dy < 0.0 || (dy == 0.0 && dx > 0.0)
        })
    }

    /// Horizontal extent of the polygon on the line `y`, if any.
    fn span_at(&self, y: f64) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &(a, b) in &self.edges {
            let (ymin, ymax) = if a.1 < b.1 { (a.1, b.1) } else { (b.1, a.1) };
            if y < ymin || y > ymax {
                continue;
            }
            if a.1 == b.1 {
                lo = lo.min(a.0.min(b.0));
                hi = hi.max(a.0.max(b.0));
            } else {
                let x = a.0 + (y - a.1) / (b.1 - a.1) * (b.0 - a.0);
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        (lo <= hi).then_some((lo, hi))
    }
}

fn fill_polygon(image: &mut SilhouetteImage, hull: &[P2]) {
    let poly = ConvexPolygon::new(hull);
    let (w, h) = (image.width as i64, image.height as i64);
    let ymin = hull.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let ymax = hull.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let row_lo = ((ymin - 0.5).floor() as i64).max(0);
    let row_hi = ((ymax - 0.5).ceil() as i64).min(h - 1);
    for row in row_lo..=row_hi {
        let cy = row as f64 + 0.5;
        let Some((xl, xr)) = poly.span_at(cy) else {
            continue;
        };
        let covers = |col: i64| poly.covers((col as f64 + 0.5, cy));
        // Covered centers on a row form an interval; the analytic span is
        // only used to bracket it, the ends come from the exact test.
        let lo = ((xl - 0.5).floor() as i64 - 1).max(0);
        let hi = ((xr - 0.5).ceil() as i64 + 1).min(w - 1);
        let Some(first) = (lo..=hi).find(|&c| covers(c)) else {
            continue;
        };
        let last = (first..=hi).rev().find(|&c| covers(c)).unwrap_or(first);
        let base = row as usize * image.width;
        image
            .bits
            .set_range(base + first as usize, base + last as usize + 1);
    }
}

/// Marks every pixel whose square the segment passes through.
fn draw_segment(image: &mut SilhouetteImage, a: P2, b: P2) {
    let len = ((b.0 - a.0).abs()).max((b.1 - a.1).abs());
    let steps = (len * 4.0).ceil().max(1.0) as usize;
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        let (x, y) = (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1));
        if x >= 0.0 && y >= 0.0 && x < image.width as f64 && y < image.height as f64 {
            image.set(x as usize, y as usize, true);
        }
    }
}

/// Fills the convex hull of already-projected points into `image`.
pub fn fill_hull(image: &mut SilhouetteImage, points: &[P2]) {
    let hull = convex_hull(points);
    match hull.len() {
        0 => {}
        1 => draw_segment(image, hull[0], hull[0]),
        2 => draw_segment(image, hull[0], hull[1]),
        _ => fill_polygon(image, &hull),
    }
}

fn projected_vertices(template: &Template, camera: &ProjectionMatrix) -> Result<Vec<P2>> {
    template
        .transformed_vertices()
        .iter()
        .map(|v| camera.project_point(v).map(|p| (p.x, p.y)))
        .collect()
}

pub fn render_silhouette(template: &Template, camera: &ProjectionMatrix) -> Result<SilhouetteImage> {
    let mut image = SilhouetteImage::empty(camera.width(), camera.height());
    fill_hull(&mut image, &projected_vertices(template, camera)?);
    Ok(image)
}

/// Renders one template into every view and flattens: one column of the basis.
pub fn render_template(template: &Template, rig: &CameraRig) -> Result<MeasurementVector> {
    render_scene(std::slice::from_ref(template), rig)
}

/// Pixelwise OR of the templates' silhouettes, flattened in view order.
pub fn render_scene(templates: &[Template], rig: &CameraRig) -> Result<MeasurementVector> {
    let mut images = Vec::with_capacity(rig.views());
    for camera in rig.cameras() {
        let mut image = SilhouetteImage::empty(camera.width(), camera.height());
        for t in templates {
            fill_hull(&mut image, &projected_vertices(t, camera)?);
        }
        images.push(image);
    }
    Ok(flatten(&images))
}

/// Resamples `round(fraction * S)` distinct positions, each to a fair coin.
pub fn add_salt_pepper(y: &MeasurementVector, fraction: f64, seed: u64) -> Result<MeasurementVector> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidParameter(format!(
            "noise fraction {fraction} is outside [0, 1]"
        )));
    }
    let mut out = y.clone();
    let count = (fraction * y.len() as f64).round() as usize;
    if count == 0 {
        return Ok(out);
    }
    let mut rng = seed::rng(seed);
    let positions = sample(&mut rng, y.len(), count.min(y.len()));
    for pos in positions.iter() {
        let value = rng.random::<bool>();
        out.bits.set(pos, value);
    }
    Ok(out)
}

/// Hamming distance between two measurement vectors.
pub fn silhouette_error(a: &MeasurementVector, b: &MeasurementVector) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "measurement lengths {} and {} differ",
            a.len(),
            b.len()
        )));
    }
    Ok(a.bits.hamming(&b.bits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{ring_rig, RingRigParams};
    use crate::geometry::{Pose, PrimitiveShape, TemplateId};
    use nalgebra::{Matrix3x4, Vector3};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn image(w: usize, h: usize, bits: &[u8]) -> SilhouetteImage {
        SilhouetteImage::from_bits(w, h, BitVec::from_bools(bits.iter().map(|&b| b == 1))).unwrap()
    }

    fn cube_at(id: u32, x: f64, y: f64, z: f64) -> Template {
        Template {
            id: TemplateId(id),
            shape_index: 0,
            shape: Arc::new(PrimitiveShape::cuboid("c", 1.0, 1.0, 1.0, 1).unwrap()),
            pose: Pose::new(0, Vector3::new(x, y, z)).unwrap(),
        }
    }

    fn small_rig() -> CameraRig {
        ring_rig(&RingRigParams {
            views: 3,
            radius: 8.0,
            elevation: 3.0,
            target: [0.0, 0.0, 0.5],
            width: 40,
            height: 30,
            focal: 40.0,
        })
        .unwrap()
    }

    /// Straightforward per-pixel reference: every pixel center against every
    /// edge of the hull, with the top-left tie rule.
    fn brute_force(w: usize, h: usize, hull: &[P2]) -> SilhouetteImage {
        let mut img = SilhouetteImage::empty(w, h);
        let n = hull.len();
        for y in 0..h {
            for x in 0..w {
                let c = (x as f64 + 0.5, y as f64 + 0.5);
                let inside = (0..n).all(|i| {
                    let (a, b) = (hull[i], hull[(i + 1) % n]);
                    let e = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
                    e > 0.0 || (e == 0.0 && (b.1 < a.1 || (b.1 == a.1 && b.0 > a.0)))
                });
                img.set(x, y, inside);
            }
        }
        img
    }

    #[test]
    fn bitvec_extend_and_slice() {
        let a = BitVec::from_bools((0..70).map(|i| i % 3 == 0));
        let b = BitVec::from_bools((0..100).map(|i| i % 5 == 1));
        let mut ab = a.clone();
        ab.extend_from(&b);
        assert_eq!(ab.len(), 170);
        assert_eq!(ab.slice(0, 70), a);
        assert_eq!(ab.slice(70, 100), b);
        assert_eq!(ab.count_ones(), a.count_ones() + b.count_ones());
        let ones: Vec<_> = a.iter_ones().collect();
        assert_eq!(ones, (0..70).filter(|i| i % 3 == 0).collect::<Vec<_>>());
    }

    #[test]
    fn set_range_matches_individual_sets() {
        for (s, e) in [(0, 0), (3, 64), (60, 130), (64, 128), (1, 199)] {
            let mut a = BitVec::zeros(200);
            a.set_range(s, e);
            let b = BitVec::from_bools((0..200).map(|i| i >= s && i < e));
            assert_eq!(a, b, "{s}..{e}");
        }
    }

    #[test]
    fn flatten_row_major() {
        let y = flatten(&[image(2, 2, &[1, 0, 0, 1])]);
        let bits: Vec<bool> = (0..4).map(|i| y.bits().get(i)).collect();
        assert_eq!(bits, vec![true, false, false, true]);
    }

    #[test]
    fn flatten_two_views_offsets() {
        let a = image(2, 2, &[1, 1, 0, 0]);
        let b = image(2, 2, &[0, 0, 1, 1]);
        let y = flatten(&[a.clone(), b.clone()]);
        assert_eq!(y.len(), 8);
        assert_eq!(y.view_offsets(), &[0, 4]);
        assert_eq!(unflatten(&y), vec![a, b]);
    }

    #[test]
    fn flatten_for_rig_checks_dims() {
        let rig = small_rig();
        let imgs = vec![SilhouetteImage::empty(40, 30); 3];
        assert!(flatten_for_rig(&imgs, &rig).is_ok());
        assert!(flatten_for_rig(&imgs[..2], &rig).is_err());
        assert!(flatten_for_rig(&vec![SilhouetteImage::empty(30, 40); 3], &rig).is_err());
    }

    #[test]
    fn fronto_parallel_cube_is_square() {
        // Camera at the origin looking down +z; cube face at depth 10, side 1.
        let focal = 100.0;
        let k = Matrix3x4::new(
            focal, 0.0, 32.0, 0.0, //
            0.0, focal, 32.0, 0.0, //
            0.0, 0.0, 1.0, 0.0,
        );
        let cam = ProjectionMatrix::new(k, 64, 64).unwrap();
        let t = cube_at(1, -0.5, -0.5, 10.0);
        let img = render_silhouette(&t, &cam).unwrap();
        // Near face (z = 10) projects to a 10 px square; the far face is inside it.
        let side = focal / 10.0;
        let area = img.count_ones() as f64;
        assert!((area - side * side).abs() <= 4.0 * side + 4.0, "area {area}");
        // Filled square: every row that has pixels has the same span.
        let rows: Vec<usize> = (0..64)
            .map(|y| (0..64).filter(|&x| img.get(x, y)).count())
            .filter(|&c| c > 0)
            .collect();
        assert!((rows.len() as f64 - side).abs() <= 1.0);
        assert!(rows.iter().all(|&c| (c as f64 - side).abs() <= 1.0));
    }

    #[test]
    fn empty_scene_renders_zero() {
        let rig = small_rig();
        let y = render_scene(&[], &rig).unwrap();
        assert_eq!(y.len(), 3 * 40 * 30);
        assert_eq!(y.count_ones(), 0);
    }

    #[test]
    fn scene_or_identities() {
        let rig = small_rig();
        let a = cube_at(1, -2.0, -0.5, 0.0);
        let b = cube_at(2, 1.0, -0.5, 0.0);
        let ya = render_scene(std::slice::from_ref(&a), &rig).unwrap();
        let views: Vec<_> = rig
            .cameras()
            .iter()
            .map(|c| render_silhouette(&a, c).unwrap())
            .collect();
        assert_eq!(ya, flatten(&views));
        let twice = render_scene(&[a.clone(), a.clone()], &rig).unwrap();
        assert_eq!(twice, ya);
        let yab = render_scene(&[a, b.clone()], &rig).unwrap();
        let yb = render_scene(&[b], &rig).unwrap();
        assert!(ya.bits().is_subset(yab.bits()) && yb.bits().is_subset(yab.bits()));
    }

    #[test]
    fn disjoint_templates_add_bitcounts() {
        // Head-on camera: two cubes side by side with a gap never overlap.
        let k = Matrix3x4::new(50.0, 0.0, 32.0, 0.0, 0.0, 50.0, 16.0, 0.0, 0.0, 0.0, 1.0, 0.0);
        let rig = CameraRig::new(vec![ProjectionMatrix::new(k, 64, 32).unwrap()]).unwrap();
        let a = cube_at(1, -2.5, -0.5, 10.0);
        let b = cube_at(2, 1.5, -0.5, 10.0);
        let ya = render_scene(std::slice::from_ref(&a), &rig).unwrap();
        let yb = render_scene(std::slice::from_ref(&b), &rig).unwrap();
        let yab = render_scene(&[a, b], &rig).unwrap();
        assert!(ya.count_ones() > 0 && yb.count_ones() > 0);
        assert_eq!(yab.count_ones(), ya.count_ones() + yb.count_ones());
    }

    #[test]
    fn shared_edge_is_claimed_once() {
        // Two triangles splitting a square along its diagonal through pixel centers.
        let mut left = SilhouetteImage::empty(8, 8);
        let mut right = SilhouetteImage::empty(8, 8);
        fill_hull(&mut left, &[(0.5, 0.5), (7.5, 7.5), (0.5, 7.5)]);
        fill_hull(&mut right, &[(0.5, 0.5), (7.5, 0.5), (7.5, 7.5)]);
        let mut square = SilhouetteImage::empty(8, 8);
        fill_hull(&mut square, &[(0.5, 0.5), (7.5, 0.5), (7.5, 7.5), (0.5, 7.5)]);
        assert_eq!(left.bits().and_count(right.bits()), 0);
        let mut union = left.clone();
        union.or_assign(&right);
        assert_eq!(union, square);
    }

    #[test]
    fn collinear_hull_draws_segment() {
        let mut img = SilhouetteImage::empty(10, 10);
        fill_hull(&mut img, &[(1.2, 5.5), (4.0, 5.5), (8.7, 5.5)]);
        assert_eq!(img.count_ones(), 8);
        assert!((1..=8).all(|x| img.get(x, 5)));
    }

    #[test]
    fn noise_extremes() {
        let rig = small_rig();
        let y = render_scene(&[cube_at(1, 0.0, 0.0, 0.0)], &rig).unwrap();
        assert_eq!(add_salt_pepper(&y, 0.0, 3).unwrap(), y);
        let noisy = add_salt_pepper(&y, 1.0, 3).unwrap();
        let d = silhouette_error(&y, &noisy).unwrap() as f64;
        let s = y.len() as f64;
        // Binomial(S, 1/2): 6 standard deviations.
        assert!((d - s / 2.0).abs() < 6.0 * (s / 4.0).sqrt(), "{d} vs {}", s / 2.0);
        assert_eq!(add_salt_pepper(&y, 0.16, 9).unwrap(), add_salt_pepper(&y, 0.16, 9).unwrap());
        assert!(add_salt_pepper(&y, 1.5, 0).is_err());
    }

    #[test]
    fn noise_touches_exactly_the_sampled_count() {
        let y = MeasurementVector::with_dims(BitVec::zeros(1000), vec![(1000, 1)]).unwrap();
        let noisy = add_salt_pepper(&y, 0.16, 1).unwrap();
        // From all zeros only the sampled positions can become one.
        let ones = noisy.count_ones();
        assert!(ones <= 160 && ones > 40, "{ones}");
    }

    #[test]
    fn silhouette_error_cases() {
        let a = flatten(&[image(3, 2, &[1, 0, 1, 1, 0, 0])]);
        assert_eq!(silhouette_error(&a, &a).unwrap(), 0);
        let mut not_a = a.clone();
        for i in 0..6 {
            not_a.bits_mut().set(i, !a.bits().get(i));
        }
        assert_eq!(silhouette_error(&a, &not_a).unwrap(), 6);
        let mut flipped = a.clone();
        for i in [0, 1, 2, 4, 5] {
            flipped.bits_mut().set(i, !a.bits().get(i));
        }
        assert_eq!(silhouette_error(&a, &flipped).unwrap(), 5);
        let b = flatten(&[image(2, 2, &[1, 0, 0, 1])]);
        assert!(silhouette_error(&a, &b).is_err());
    }

    proptest! {
        #[test]
        fn rasterizer_matches_brute_force(
            w in 1usize..=32, h in 1usize..=32,
            pts in prop::collection::vec((-8.0..40.0f64, -8.0..40.0f64), 3..9),
        ) {
            let hull = convex_hull(&pts);
            prop_assume!(hull.len() >= 3);
            let mut fast = SilhouetteImage::empty(w, h);
            fill_hull(&mut fast, &pts);
            prop_assert_eq!(fast, brute_force(w, h, &hull));
        }

        #[test]
        fn rasterizer_matches_brute_force_on_half_pixel_lattice(
            pts in prop::collection::vec((0i32..40, 0i32..40), 3..7),
        ) {
            // Vertices on pixel centers and corners exercise the tie rule.
            let pts: Vec<P2> = pts.iter().map(|&(x, y)| (x as f64 * 0.5, y as f64 * 0.5)).collect();
            let hull = convex_hull(&pts);
            prop_assume!(hull.len() >= 3);
            let mut fast = SilhouetteImage::empty(20, 20);
            fill_hull(&mut fast, &pts);
            prop_assert_eq!(fast, brute_force(20, 20, &hull));
        }

        #[test]
        fn adding_templates_never_clears_bits(
            cubes in prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64, 0.0..1.0f64), 1..5),
            extra in (-2.0..2.0f64, -2.0..2.0f64, 0.0..1.0f64),
        ) {
            let rig = small_rig();
            let base: Vec<_> = cubes.iter().enumerate()
                .map(|(i, &(x, y, z))| cube_at(i as u32 + 1, x, y, z)).collect();
            let mut more = base.clone();
            more.push(cube_at(99, extra.0, extra.1, extra.2));
            let a = render_scene(&base, &rig).unwrap();
            let b = render_scene(&more, &rig).unwrap();
            prop_assert!(a.bits().is_subset(b.bits()));
        }

        #[test]
        fn flatten_unflatten_round_trip(
            views in prop::collection::vec(prop::collection::vec(any::<bool>(), 35), 1..4),
        ) {
            let images: Vec<_> = views.iter()
                .map(|v| SilhouetteImage::from_bits(7, 5, BitVec::from_bools(v.iter().copied())).unwrap())
                .collect();
            prop_assert_eq!(unflatten(&flatten(&images)), images);
        }
    }

    #[test]
    fn render_point_at_infinity_propagates() {
        let cam = ProjectionMatrix::new(Matrix3x4::identity(), 8, 8).unwrap();
        let t = cube_at(1, 0.0, 0.0, 0.0);
        assert!(matches!(render_silhouette(&t, &cam), Err(Error::PointAtInfinity(_))));
    }
}
