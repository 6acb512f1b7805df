//! Pixel-space geometry: axis-aligned boxes, overlap ratios and planar
//! homographies used for screen rectification and perspective warps.
//!
//! Coordinates are real-valued pixels with the origin at the top-left corner
//! and `y` growing downward. Rasterization only happens when an image is
//! sampled (see [`warp_perspective`]).

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{Image, RasterError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate quadrilateral: {0}")]
    DegenerateQuad(&'static str),
    #[error("homography is not invertible (det = {0:e})")]
    Singular(f64),
    #[error("invalid box [{0}, {1}, {2}, {3}]")]
    InvalidBox(f64, f64, f64, f64),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned rectangle `[x_min, y_min, x_max, y_max]`.
///
/// Serialized as a four-element array, matching the detection wire format.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    /// Builds a box, rejecting non-finite or inverted coordinates.
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, GeometryError> {
        let ok = [x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite())
            && x_min <= x_max
            && y_min <= y_max;
        if ok {
            Ok(Self { x_min, y_min, x_max, y_max })
        } else {
            Err(GeometryError::InvalidBox(x_min, y_min, x_max, y_max))
        }
    }

    pub fn from_array(v: [f64; 4]) -> Result<Self, GeometryError> {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point {
        Point::new((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }

    pub fn is_degenerate(&self) -> bool {
        self.area() <= 0.0
    }

    /// Intersection rectangle, `None` when the boxes do not overlap with
    /// positive area.
    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let x_min = self.x_min.max(other.x_min);
        let y_min = self.y_min.max(other.y_min);
        let x_max = self.x_max.min(other.x_max);
        let y_max = self.y_max.min(other.y_max);
        (x_min < x_max && y_min < y_max).then_some(BBox { x_min, y_min, x_max, y_max })
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        self.intersection(other).map_or(0.0, |b| b.area())
    }

    /// Clips the box to `[0, width] × [0, height]`.
    pub fn clip(&self, width: f64, height: f64) -> BBox {
        let cx = |v: f64| v.clamp(0.0, width);
        let cy = |v: f64| v.clamp(0.0, height);
        BBox {
            x_min: cx(self.x_min),
            y_min: cy(self.y_min),
            x_max: cx(self.x_max),
            y_max: cy(self.y_max),
        }
    }

    /// True when `self` lies inside `outer` (boundaries may touch).
    pub fn is_inside(&self, outer: &BBox) -> bool {
        self.x_min >= outer.x_min
            && self.y_min >= outer.y_min
            && self.x_max <= outer.x_max
            && self.y_max <= outer.y_max
    }
}

impl Serialize for BBox {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for BBox {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = <[f64; 4]>::deserialize(d)?;
        BBox::from_array(v).map_err(serde::de::Error::custom)
    }
}

/// Intersection over union. Zero whenever the union has no area.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Fraction of `child`'s area covered by `parent`; 1.0 means full
/// containment. A zero-area child yields 0.
pub fn containment_ratio(child: &BBox, parent: &BBox) -> f64 {
    let area = child.area();
    if area <= 0.0 {
        return 0.0;
    }
    (child.intersection_area(parent) / area).clamp(0.0, 1.0)
}

/// Planar projective transform acting on homogeneous pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    m: Matrix3<f64>,
}

const MIN_DET: f64 = 1e-12;

impl Homography {
    pub fn identity() -> Self {
        Self { m: Matrix3::identity() }
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Self { m: Matrix3::new(1.0, 0.0, dx, 0.0, 1.0, dy, 0.0, 0.0, 1.0) }
    }

    /// Rotation by `degrees` about `center`. Positive angles turn the image
    /// clockwise on screen (y axis points down).
    pub fn rotation_about(center: Point, degrees: f64) -> Self {
        let (s, c) = degrees.to_radians().sin_cos();
        let (cx, cy) = (center.x, center.y);
        Self {
            m: Matrix3::new(
                c,
                -s,
                cx - c * cx + s * cy,
                s,
                c,
                cy - s * cx - c * cy,
                0.0,
                0.0,
                1.0,
            ),
        }
    }

    /// Wraps a raw row-major matrix, normalizing `m[2][2]` to 1 when it is
    /// nonzero.
    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self, GeometryError> {
        let m = Matrix3::from_fn(|r, c| rows[r][c]);
        Self::from_matrix(m)
    }

    fn from_matrix(mut m: Matrix3<f64>) -> Result<Self, GeometryError> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::Singular(f64::NAN));
        }
        let scale = m[(2, 2)];
        if scale.abs() > f64::EPSILON {
            m /= scale;
        }
        let det = m.determinant();
        if det.abs() <= MIN_DET || !det.is_finite() {
            return Err(GeometryError::Singular(det));
        }
        Ok(Self { m })
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        let m = &self.m;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.m[(row, col)]
    }

    /// Maps a point; returns `None` on the vanishing line.
    pub fn apply(&self, p: Point) -> Option<Point> {
        let v = self.m * Vector3::new(p.x, p.y, 1.0);
        if v.z.abs() < 1e-15 {
            return None;
        }
        let q = Point::new(v.x / v.z, v.y / v.z);
        (q.x.is_finite() && q.y.is_finite()).then_some(q)
    }

    pub fn inverse(&self) -> Result<Self, GeometryError> {
        let inv = self
            .m
            .try_inverse()
            .ok_or(GeometryError::Singular(self.m.determinant()))?;
        Self::from_matrix(inv)
    }

    /// `self` applied after `first`.
    pub fn compose(&self, first: &Homography) -> Result<Self, GeometryError> {
        Self::from_matrix(self.m * first.m)
    }

    pub fn is_identity(&self) -> bool {
        self.m == Matrix3::identity()
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn check_quad(q: &[Point; 4]) -> Result<(), GeometryError> {
    if q.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(GeometryError::DegenerateQuad("non-finite corner"));
    }
    let scale = q
        .iter()
        .flat_map(|a| q.iter().map(move |b| a.distance(*b)))
        .fold(0.0_f64, f64::max);
    if scale <= 0.0 {
        return Err(GeometryError::DegenerateQuad("all corners coincide"));
    }
    for i in 0..4 {
        let (a, b, c) = (q[i], q[(i + 1) % 4], q[(i + 2) % 4]);
        if cross(a, b, c).abs() <= 1e-9 * scale * scale {
            return Err(GeometryError::DegenerateQuad("three collinear corners"));
        }
    }
    Ok(())
}

/// Similarity transform moving the centroid to the origin with mean
/// distance sqrt(2). Keeps the linear system well conditioned for
/// pixel-scale inputs.
fn conditioning(q: &[Point; 4]) -> Matrix3<f64> {
    let cx = q.iter().map(|p| p.x).sum::<f64>() / 4.0;
    let cy = q.iter().map(|p| p.y).sum::<f64>() / 4.0;
    let mean = q.iter().map(|p| (p.x - cx).hypot(p.y - cy)).sum::<f64>() / 4.0;
    let s = std::f64::consts::SQRT_2 / mean;
    Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0)
}

fn transform(t: &Matrix3<f64>, p: Point) -> Point {
    let v = t * Vector3::new(p.x, p.y, 1.0);
    Point::new(v.x / v.z, v.y / v.z)
}

/// Direct linear transform for the homography taking `src[i]` to `dst[i]`,
/// solved as the 8-unknown system with `h33 = 1` after normalizing both
/// quads.
pub fn homography_from_quad(src: &[Point; 4], dst: &[Point; 4]) -> Result<Homography, GeometryError> {
    check_quad(src)?;
    check_quad(dst)?;
    let ts = conditioning(src);
    let td = conditioning(dst);

    let mut a = SMatrix::<f64, 8, 8>::zeros();
    let mut b = SVector::<f64, 8>::zeros();
    for i in 0..4 {
        let s = transform(&ts, src[i]);
        let d = transform(&td, dst[i]);
        let r = 2 * i;
        a.set_row(r, &SMatrix::<f64, 1, 8>::from_row_slice(&[s.x, s.y, 1.0, 0.0, 0.0, 0.0, -d.x * s.x, -d.x * s.y]));
        a.set_row(r + 1, &SMatrix::<f64, 1, 8>::from_row_slice(&[0.0, 0.0, 0.0, s.x, s.y, 1.0, -d.y * s.x, -d.y * s.y]));
        b[r] = d.x;
        b[r + 1] = d.y;
    }
    let h = a
        .full_piv_lu()
        .solve(&b)
        .ok_or(GeometryError::DegenerateQuad("singular linear system"))?;
    let normalized = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0);
    let td_inv = td
        .try_inverse()
        .ok_or(GeometryError::DegenerateQuad("singular conditioning"))?;
    Homography::from_matrix(td_inv * normalized * ts)
        .map_err(|_| GeometryError::DegenerateQuad("singular homography"))
}

/// Samples `img` at a real-valued position with bilinear interpolation.
/// Positions outside the frame are clamped to the nearest edge pixel.
pub(crate) fn sample_bilinear(img: &Image, x: f64, y: f64, out: &mut [u8; 3]) {
    let max_x = (img.width() - 1) as f64;
    let max_y = (img.height() - 1) as f64;
    let x = if x.is_finite() { x.clamp(0.0, max_x) } else { 0.0 };
    let y = if y.is_finite() { y.clamp(0.0, max_y) } else { 0.0 };
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (x0, y0) = (x0 as u32, y0 as u32);
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let p00 = img.pixel(x0, y0);
    let p10 = img.pixel(x1, y0);
    let p01 = img.pixel(x0, y1);
    let p11 = img.pixel(x1, y1);
    for c in 0..3 {
        let top = p00[c] as f64 * (1.0 - fx) + p10[c] as f64 * fx;
        let bottom = p01[c] as f64 * (1.0 - fx) + p11[c] as f64 * fx;
        let v = top * (1.0 - fy) + bottom * fy;
        out[c] = v.round_ties_even().clamp(0.0, 255.0) as u8;
    }
}

/// Warps `img` by `h` (source → destination) into an image of `out_w × out_h`.
///
/// Each destination pixel is mapped back through `h⁻¹` and sampled
/// bilinearly; samples outside the source replicate the nearest edge.
pub fn warp_perspective(img: &Image, h: &Homography, out_w: u32, out_h: u32) -> Result<Image, GeometryError> {
    if img.is_empty() {
        return Err(RasterError::EmptyImage.into());
    }
    let inv = h.inverse()?;
    let mut out = Image::new(out_w, out_h)?;
    let mut px = [0u8; 3];
    for y in 0..out_h {
        for x in 0..out_w {
            let src = inv
                .apply(Point::new(x as f64, y as f64))
                .unwrap_or(Point::new(f64::NAN, f64::NAN));
            sample_bilinear(img, src.x, src.y, &mut px);
            out.put_pixel(x, y, px);
        }
    }
    Ok(out)
}

/// Crops the quadrilateral `corners` (top-left, top-right, bottom-right,
/// bottom-left) out of a photo into an upright `out_w × out_h` image.
pub fn rectify(img: &Image, corners: &[Point; 4], out_w: u32, out_h: u32) -> Result<Image, GeometryError> {
    let (w, h) = (out_w.saturating_sub(1) as f64, out_h.saturating_sub(1) as f64);
    let dst = [Point::new(0.0, 0.0), Point::new(w, 0.0), Point::new(w, h), Point::new(0.0, h)];
    let hm = homography_from_quad(corners, &dst)?;
    warp_perspective(img, &hm, out_w, out_h)
}
