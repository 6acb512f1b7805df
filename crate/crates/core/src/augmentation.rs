//! Seeded photometric and geometric augmentations that make clean
//! screenshots look like camera captures of a phone screen.
//!
//! Every random draw comes from a ChaCha stream keyed by
//! `(seed, image index, op)`, so an image's augmentation does not depend on
//! which other images are in the batch or in what order they are processed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{homography_from_quad, warp_perspective, GeometryError, Homography, Point};
use crate::raster::{Image, RasterError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AugmentError {
    #[error("image is empty")]
    EmptyImage,
    #[error("invalid augmentation config: {0}")]
    InvalidConfig(String),
    #[error("could not draw a non-degenerate perspective quad after {0} attempts")]
    DegenerateQuad(u32),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl From<RasterError> for AugmentError {
    fn from(e: RasterError) -> Self {
        match e {
            RasterError::EmptyImage => AugmentError::EmptyImage,
            other => AugmentError::Geometry(GeometryError::Raster(other)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugmentOp {
    Light,
    Noise,
    Rotate,
    Perspective,
}

impl AugmentOp {
    /// Application order inside [`augment`].
    pub const ORDER: [AugmentOp; 4] = [AugmentOp::Light, AugmentOp::Noise, AugmentOp::Rotate, AugmentOp::Perspective];

    fn stream_tag(self) -> u64 {
        match self {
            AugmentOp::Light => 0,
            AugmentOp::Noise => 1,
            AugmentOp::Rotate => 2,
            AugmentOp::Perspective => 3,
        }
    }
}

fn default_ops() -> Vec<AugmentOp> {
    AugmentOp::ORDER.to_vec()
}

/// Parameter ranges for [`augment`]. Mirrors the JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub seed: u64,
    /// Multiplicative light-mask strength.
    pub light_strength_range: [f64; 2],
    /// Noise standard deviation in intensity levels.
    pub noise_sigma_range: [f64; 2],
    /// Rotation angle in degrees.
    pub rotation_range: [f64; 2],
    /// Maximum corner displacement as a fraction of each dimension.
    pub perspective_jitter: f64,
    #[serde(default = "default_ops")]
    pub ops: Vec<AugmentOp>,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            light_strength_range: [-0.4, 0.4],
            noise_sigma_range: [2.0, 10.0],
            rotation_range: [-5.0, 5.0],
            perspective_jitter: 0.02,
            ops: default_ops(),
        }
    }
}

impl AugmentConfig {
    pub fn from_json(text: &str) -> Result<Self, AugmentError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| AugmentError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        let check = |name: &str, [lo, hi]: [f64; 2]| {
            if lo.is_finite() && hi.is_finite() && lo <= hi {
                Ok(())
            } else {
                Err(AugmentError::InvalidConfig(format!("{name} [{lo}, {hi}] is not an ordered range")))
            }
        };
        check("light_strength_range", self.light_strength_range)?;
        check("noise_sigma_range", self.noise_sigma_range)?;
        check("rotation_range", self.rotation_range)?;
        if self.light_strength_range[0] < -1.0 || self.light_strength_range[1] > 1.0 {
            return Err(AugmentError::InvalidConfig("light strength must lie in [-1, 1]".into()));
        }
        if self.noise_sigma_range[0] < 0.0 {
            return Err(AugmentError::InvalidConfig("noise sigma must be non-negative".into()));
        }
        if !(0.0..=0.1).contains(&self.perspective_jitter) {
            return Err(AugmentError::InvalidConfig(format!(
                "perspective_jitter {} outside [0, 0.1]",
                self.perspective_jitter
            )));
        }
        Ok(())
    }

    pub fn enabled(&self, op: AugmentOp) -> bool {
        self.ops.contains(&op)
    }
}

/// Random stream for one op of one image.
pub fn op_rng(seed: u64, image_index: u64, op: AugmentOp) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((image_index << 2) | op.stream_tag());
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LightKind {
    /// Ramp rising from 0 at the anchor along `angle_deg` (0° points right,
    /// 90° points down).
    Linear { angle_deg: f64 },
    /// 1 at the anchor, falling to 0 at the farthest corner.
    Radial,
}

/// Gain profile `g ∈ [0, 1]` at normalized position `(u, v)`.
fn light_gain(kind: LightKind, anchor: Point, u: f64, v: f64) -> f64 {
    const CORNERS: [(f64, f64); 4] = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
    match kind {
        LightKind::Linear { angle_deg } => {
            let (dy, dx) = angle_deg.to_radians().sin_cos();
            let proj = |x: f64, y: f64| (x - anchor.x) * dx + (y - anchor.y) * dy;
            let extent = CORNERS.iter().map(|&(x, y)| proj(x, y)).fold(0.0_f64, f64::max);
            if extent <= 0.0 {
                0.0
            } else {
                (proj(u, v) / extent).clamp(0.0, 1.0)
            }
        }
        LightKind::Radial => {
            let reach = CORNERS
                .iter()
                .map(|&(x, y)| (x - anchor.x).hypot(y - anchor.y))
                .fold(0.0_f64, f64::max);
            if reach <= 0.0 {
                1.0
            } else {
                1.0 - ((u - anchor.x).hypot(v - anchor.y) / reach).clamp(0.0, 1.0)
            }
        }
    }
}

fn normalized(i: u32, n: u32) -> f64 {
    if n <= 1 {
        0.0
    } else {
        i as f64 / (n - 1) as f64
    }
}

/// Uneven illumination: `out = clamp(in · (1 + strength · g(x, y)))`.
///
/// `anchor` is in normalized image coordinates; pixel `(x, y)` sits at
/// `(x / (W-1), y / (H-1))`.
pub fn light_mask(img: &Image, strength: f64, kind: LightKind, anchor: Point) -> Result<Image, AugmentError> {
    if img.is_empty() {
        return Err(AugmentError::EmptyImage);
    }
    if strength == 0.0 {
        return Ok(img.clone());
    }
    let mut out = img.clone();
    let (w, h) = (img.width(), img.height());
    for y in 0..h {
        let v = normalized(y, h);
        for x in 0..w {
            let gain = 1.0 + strength * light_gain(kind, anchor, normalized(x, w), v);
            let px = img.pixel(x, y).map(|c| (c as f64 * gain).round_ties_even().clamp(0.0, 255.0) as u8);
            out.put_pixel(x, y, px);
        }
    }
    Ok(out)
}

/// Additive per-sample Gaussian noise. Each draw is rounded to an integer
/// offset before it is added, so results only depend on the random stream.
pub fn gaussian_noise(img: &Image, sigma: f64, rng: &mut impl Rng) -> Image {
    if sigma.is_nan() || sigma <= 0.0 {
        return img.clone();
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is positive and finite");
    let mut out = img.clone();
    for sample in out.data_mut() {
        let delta = normal.sample(rng).round_ties_even() as i32;
        *sample = (*sample as i32 + delta).clamp(0, 255) as u8;
    }
    out
}

/// Homography rotating an image of `width × height` about its center.
pub fn rotation_homography(width: u32, height: u32, degrees: f64) -> Homography {
    let center = Point::new((width.max(1) - 1) as f64 / 2.0, (height.max(1) - 1) as f64 / 2.0);
    Homography::rotation_about(center, degrees)
}

/// Rotates about the image center (clockwise on screen for positive
/// angles), keeping the output size and replicating edges.
pub fn rotate(img: &Image, degrees: f64) -> Result<Image, AugmentError> {
    if img.is_empty() {
        return Err(AugmentError::EmptyImage);
    }
    if degrees == 0.0 {
        return Ok(img.clone());
    }
    let h = rotation_homography(img.width(), img.height(), degrees);
    Ok(warp_perspective(img, &h, img.width(), img.height())?)
}

const MAX_QUAD_DRAWS: u32 = 5;

fn image_corners(w: u32, h: u32) -> [Point; 4] {
    let (xm, ym) = ((w.max(1) - 1) as f64, (h.max(1) - 1) as f64);
    [Point::new(0.0, 0.0), Point::new(xm, 0.0), Point::new(xm, ym), Point::new(0.0, ym)]
}

/// Draws the perspective homography used by [`perspective_jitter`]: every
/// corner moves uniformly within `±jitter · (W, H)`.
pub fn sample_perspective(width: u32, height: u32, jitter: f64, rng: &mut impl Rng) -> Result<Homography, AugmentError> {
    if !(0.0..=0.1).contains(&jitter) {
        return Err(AugmentError::InvalidConfig(format!("jitter {jitter} outside [0, 0.1]")));
    }
    if jitter == 0.0 {
        return Ok(Homography::identity());
    }
    let src = image_corners(width, height);
    let (jx, jy) = (jitter * width as f64, jitter * height as f64);
    for _ in 0..MAX_QUAD_DRAWS {
        let dst = src.map(|p| Point::new(p.x + rng.random_range(-jx..=jx), p.y + rng.random_range(-jy..=jy)));
        match homography_from_quad(&src, &dst) {
            Ok(h) => return Ok(h),
            Err(GeometryError::DegenerateQuad(_)) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(AugmentError::DegenerateQuad(MAX_QUAD_DRAWS))
}

/// Random perspective deformation. Returns the warped image and the
/// source → output homography that produced it.
pub fn perspective_jitter(img: &Image, jitter: f64, rng: &mut impl Rng) -> Result<(Image, Homography), AugmentError> {
    if img.is_empty() {
        return Err(AugmentError::EmptyImage);
    }
    let h = sample_perspective(img.width(), img.height(), jitter, rng)?;
    if h.is_identity() {
        return Ok((img.clone(), h));
    }
    Ok((warp_perspective(img, &h, img.width(), img.height())?, h))
}

/// Parameters actually drawn for one image.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AugmentRecord {
    pub light: Option<(f64, LightKind, Point)>,
    pub noise_sigma: Option<f64>,
    pub rotation_deg: Option<f64>,
    /// Composite geometric transform (rotation then perspective) mapping
    /// source pixels to output pixels; apply it to annotation boxes.
    #[serde(serialize_with = "ser_rows")]
    pub geometry: Homography,
}

fn ser_rows<S: serde::Serializer>(h: &Homography, s: S) -> Result<S::Ok, S::Error> {
    h.rows().serialize(s)
}

fn draw(rng: &mut impl Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Applies the enabled ops in the fixed order light → noise → rotate →
/// perspective to the `image_index`-th image of a batch.
pub fn augment(img: &Image, cfg: &AugmentConfig, image_index: u64) -> Result<(Image, AugmentRecord), AugmentError> {
    cfg.validate()?;
    if img.is_empty() {
        return Err(AugmentError::EmptyImage);
    }
    let mut out = img.clone();
    let mut record = AugmentRecord { light: None, noise_sigma: None, rotation_deg: None, geometry: Homography::identity() };
    for op in AugmentOp::ORDER {
        if !cfg.enabled(op) {
            continue;
        }
        let mut rng = op_rng(cfg.seed, image_index, op);
        match op {
            AugmentOp::Light => {
                let strength = draw(&mut rng, cfg.light_strength_range);
                let kind = if rng.random_bool(0.5) {
                    LightKind::Linear { angle_deg: rng.random_range(0.0..360.0) }
                } else {
                    LightKind::Radial
                };
                let anchor = Point::new(rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0));
                out = light_mask(&out, strength, kind, anchor)?;
                record.light = Some((strength, kind, anchor));
            }
            AugmentOp::Noise => {
                let sigma = draw(&mut rng, cfg.noise_sigma_range);
                out = gaussian_noise(&out, sigma, &mut rng);
                record.noise_sigma = Some(sigma);
            }
            AugmentOp::Rotate => {
                let angle = draw(&mut rng, cfg.rotation_range);
                out = rotate(&out, angle)?;
                record.rotation_deg = Some(angle);
                if angle != 0.0 {
                    record.geometry = rotation_homography(img.width(), img.height(), angle).compose(&record.geometry)?;
                }
            }
            AugmentOp::Perspective => {
                let (warped, h) = perspective_jitter(&out, cfg.perspective_jitter, &mut rng)?;
                out = warped;
                if !h.is_identity() {
                    record.geometry = h.compose(&record.geometry)?;
                }
            }
        }
    }
    Ok((out, record))
}

/// [`augment`] for a single image (index 0), discarding the record.
pub fn augment_pipeline(img: &Image, cfg: &AugmentConfig) -> Result<Image, AugmentError> {
    augment(img, cfg, 0).map(|(img, _)| img)
}
