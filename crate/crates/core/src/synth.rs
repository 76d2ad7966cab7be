//! Synthetic bore surfaces with prefabricated defects, and the captures a
//! camera would record of them.
//!
//! The unwrapped surface is indexed by arc length `u` around the bore and
//! by distance `z` from the nozzle. It is stored as a background level plus
//! sparse rasterized patches, one per defect; `value` exposes it as a dense
//! periodic grid.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{HoleSpec, OpticsConfig};
use crate::scanplan::{CaptureEvent, EffectiveRegion, ScanPlan};
use crate::unwrap::{BitDepth, RemapTable, TileImage};

const SUPERSAMPLE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefectShape {
    Disc,
    Line,
}

/// Direction along which a line defect runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineOrientation {
    #[default]
    Axial,
    Circumferential,
}

fn default_contrast() -> f64 {
    -0.4
}

/// One prefabricated defect on the unwrapped surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefectSpec {
    pub kind: DefectShape,
    /// Distance of the centre from the nozzle, mm.
    pub z: f64,
    /// Angular position of the centre, degrees in [0, 360).
    pub beta: f64,
    /// Disc diameter or line width, mm.
    pub size: f64,
    /// Line length, mm. Ignored for discs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(default)]
    pub orientation: LineOrientation,
    /// Signed intensity offset, fraction of full scale.
    #[serde(default = "default_contrast")]
    pub contrast: f64,
}

impl DefectSpec {
    pub fn disc(z: f64, beta: f64, diameter: f64) -> Self {
        Self {
            kind: DefectShape::Disc,
            z,
            beta,
            size: diameter,
            length: None,
            orientation: LineOrientation::Axial,
            contrast: default_contrast(),
        }
    }

    pub fn line(z: f64, beta: f64, width: f64, length: f64) -> Self {
        Self {
            kind: DefectShape::Line,
            z,
            beta,
            size: width,
            length: Some(length),
            orientation: LineOrientation::Axial,
            contrast: default_contrast(),
        }
    }

    /// Half extents (arc, depth) in mm.
    fn half_extents(&self) -> (f64, f64) {
        match self.kind {
            DefectShape::Disc => (self.size / 2.0, self.size / 2.0),
            DefectShape::Line => {
                let len = self.length.unwrap_or(0.0);
                match self.orientation {
                    LineOrientation::Axial => (self.size / 2.0, len / 2.0),
                    LineOrientation::Circumferential => (len / 2.0, self.size / 2.0),
                }
            }
        }
    }

    fn validate(&self, hole: &HoleSpec) -> Result<()> {
        if !(self.size > 0.0) {
            return Err(Error::Placement(format!("defect size must be positive, got {}", self.size)));
        }
        if !(0.0..360.0).contains(&self.beta) {
            return Err(Error::Placement(format!("beta {} outside [0, 360)", self.beta)));
        }
        if self.kind == DefectShape::Line && !(self.length.unwrap_or(0.0) > 0.0) {
            return Err(Error::Placement("line defect needs a positive length".into()));
        }
        let (hu, hz) = self.half_extents();
        if self.z - hz < 0.0 || self.z + hz > hole.depth {
            return Err(Error::Placement(format!(
                "defect spanning z = {:.4}..{:.4} mm leaves the bore depth {}",
                self.z - hz,
                self.z + hz,
                hole.depth
            )));
        }
        if 2.0 * hu >= hole.circumference() {
            return Err(Error::Placement("defect wraps the whole circumference".into()));
        }
        Ok(())
    }

    fn contains(&self, du: f64, dz: f64) -> bool {
        match self.kind {
            DefectShape::Disc => {
                let rad = self.size / 2.0;
                du * du + dz * dz <= rad * rad
            }
            DefectShape::Line => {
                let (hu, hz) = self.half_extents();
                du.abs() <= hu && dz.abs() <= hz
            }
        }
    }
}

/// Truth defects plus the centre-to-centre spacings to be measured.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TruthSet {
    #[serde(default)]
    pub defects: Vec<DefectSpec>,
    /// Index pairs into `defects`.
    #[serde(default)]
    pub spacings: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
struct Patch {
    col0: i64,
    row0: i64,
    width: usize,
    height: usize,
    /// Offset from the background, fraction of full scale.
    values: Vec<f32>,
}

/// Unwrapped bore surface, periodic in arc.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceTexture {
    pub radius: f64,
    pub depth: f64,
    /// Column pitch, µm. Equals the camera `p_x` up to the rounding of the
    /// circumference to whole columns.
    pub pitch_u: f64,
    /// Row pitch, µm.
    pub pitch_z: f64,
    width: usize,
    height: usize,
    /// Fraction of full scale.
    pub background: f64,
    pub defects: Vec<DefectSpec>,
    pub warnings: Vec<String>,
    patches: Vec<Patch>,
}

impl SurfaceTexture {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Intensity (fraction of full scale) at an integer texel. Columns wrap;
    /// rows outside the bore read as background.
    pub fn value(&self, col: i64, row: i64) -> f64 {
        self.value_in(&self.patches.iter().collect::<Vec<_>>(), col, row)
    }

    fn value_in(&self, patches: &[&Patch], col: i64, row: i64) -> f64 {
        let mut v = self.background;
        if row < 0 || row >= self.height as i64 {
            return v;
        }
        let w = self.width as i64;
        for p in patches {
            let dr = row - p.row0;
            if dr < 0 || dr >= p.height as i64 {
                continue;
            }
            let dc = (col - p.col0).rem_euclid(w);
            if dc < p.width as i64 {
                v += p.values[dr as usize * p.width + dc as usize] as f64;
            }
        }
        v
    }

    /// Summed defect coverage (texels) of defect `i`.
    pub fn coverage(&self, i: usize) -> f64 {
        self.patches[i]
            .values
            .iter()
            .map(|&v| (v as f64 / self.defects[i].contrast).abs())
            .sum()
    }

    /// Texels with at least half coverage for defect `i`.
    pub fn foreground_count(&self, i: usize) -> usize {
        let c = self.defects[i].contrast as f32;
        self.patches[i].values.iter().filter(|&&v| (v / c) >= 0.5).count()
    }

    /// Materialize the dense grid (fraction of full scale). Large for real bores.
    pub fn to_grid(&self) -> Vec<f32> {
        let mut grid = vec![self.background as f32; self.width * self.height];
        let w = self.width as i64;
        for p in &self.patches {
            for r in 0..p.height {
                let row = p.row0 + r as i64;
                if row < 0 || row >= self.height as i64 {
                    continue;
                }
                for c in 0..p.width {
                    let col = (p.col0 + c as i64).rem_euclid(w) as usize;
                    grid[row as usize * self.width + col] += p.values[r * p.width + c];
                }
            }
        }
        grid
    }

    /// Patches overlapping the column range `[c0, c1]` (may wrap) and rows `[r0, r1]`.
    fn patches_in(&self, c0: i64, c1: i64, r0: i64, r1: i64) -> Vec<&Patch> {
        let w = self.width as i64;
        self.patches
            .iter()
            .filter(|p| {
                let pr1 = p.row0 + p.height as i64 - 1;
                if pr1 < r0 || p.row0 > r1 {
                    return false;
                }
                // test the patch against the window shifted by whole turns
                let pc1 = p.col0 + p.width as i64 - 1;
                (-1..=1).any(|t| {
                    let (a, b) = (c0 + t * w, c1 + t * w);
                    pc1 >= a && p.col0 <= b
                })
            })
            .collect()
    }
}

fn rasterize(spec: &DefectSpec, pitch_u_mm: f64, pitch_z_mm: f64, radius: f64) -> Patch {
    let (hu, hz) = spec.half_extents();
    let u_c = spec.beta.to_radians() * radius;
    let z_c = spec.z;
    // texel (c, r) covers [(c - 0.5) p, (c + 0.5) p)
    let col0 = ((u_c - hu) / pitch_u_mm).floor() as i64 - 1;
    let col1 = ((u_c + hu) / pitch_u_mm).ceil() as i64 + 1;
    let row0 = ((z_c - hz) / pitch_z_mm).floor() as i64 - 1;
    let row1 = ((z_c + hz) / pitch_z_mm).ceil() as i64 + 1;
    let width = (col1 - col0 + 1) as usize;
    let height = (row1 - row0 + 1) as usize;
    let mut values = vec![0f32; width * height];
    let n = SUPERSAMPLE as f64;
    let norm = (SUPERSAMPLE * SUPERSAMPLE) as f64;
    for r in 0..height {
        let zr = (row0 + r as i64) as f64 * pitch_z_mm;
        for c in 0..width {
            let uc = (col0 + c as i64) as f64 * pitch_u_mm;
            let mut hits = 0usize;
            for sy in 0..SUPERSAMPLE {
                let dz = zr + ((sy as f64 + 0.5) / n - 0.5) * pitch_z_mm - z_c;
                for sx in 0..SUPERSAMPLE {
                    let du = uc + ((sx as f64 + 0.5) / n - 0.5) * pitch_u_mm - u_c;
                    if spec.contains(du, dz) {
                        hits += 1;
                    }
                }
            }
            values[r * width + c] = (spec.contrast * hits as f64 / norm) as f32;
        }
    }
    Patch {
        col0,
        row0,
        width,
        height,
        values,
    }
}

/// Rasterize `defects` (4x4 supersampled) onto a uniform `background`.
///
/// `background` and defect contrasts are fractions of full scale; pitches
/// are µm/pixel. Overlapping defects are summed and noted in `warnings`.
pub fn build_texture(
    hole: &HoleSpec,
    defects: &[DefectSpec],
    background: f64,
    pitch_x: f64,
    pitch_y: f64,
) -> Result<SurfaceTexture> {
    hole.validate()?;
    if !(pitch_x > 0.0 && pitch_y > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "texture pitch must be positive, got ({pitch_x}, {pitch_y})"
        )));
    }
    let circ = hole.circumference();
    let width = (circ / (pitch_x * 1e-3)).round().max(1.0) as usize;
    let pitch_u_mm = circ / width as f64;
    let pitch_z_mm = pitch_y * 1e-3;
    let height = (hole.depth / pitch_z_mm).round() as usize + 1;

    let mut patches = Vec::with_capacity(defects.len());
    for d in defects {
        d.validate(hole)?;
        patches.push(rasterize(d, pitch_u_mm, pitch_z_mm, hole.radius));
    }

    let mut warnings = Vec::new();
    for (i, a) in defects.iter().enumerate() {
        for (j, b) in defects.iter().enumerate().skip(i + 1) {
            let (au, az) = a.half_extents();
            let (bu, bz) = b.half_extents();
            let du = circular_arc_delta(a.beta, b.beta, hole.radius).abs();
            if du < au + bu && (a.z - b.z).abs() < az + bz {
                warnings.push(format!("defects {i} and {j} overlap"));
            }
        }
    }

    Ok(SurfaceTexture {
        radius: hole.radius,
        depth: hole.depth,
        pitch_u: pitch_u_mm * 1e3,
        pitch_z: pitch_y,
        width,
        height,
        background,
        defects: defects.to_vec(),
        warnings,
        patches,
    })
}

/// Signed arc length from `b_from` to `b_to` (degrees), wrapped to the short way.
pub(crate) fn circular_arc_delta(b_from: f64, b_to: f64, radius: f64) -> f64 {
    let d = (b_to - b_from + 540.0).rem_euclid(360.0) - 180.0;
    d.to_radians() * radius
}

/// Camera capture for one scan event.
///
/// Each camera column `k` looks at the arc offset `pixel_to_arc(k)` around
/// the tile centre `theta * r`; each row is a straight axial offset.
pub fn render_tile(
    texture: &SurfaceTexture,
    event: &CaptureEvent,
    cfg: &OpticsConfig,
    region: &EffectiveRegion,
    bit_depth: BitDepth,
) -> Result<TileImage> {
    let (w, h) = region.tile_pixels(cfg.p_x, cfg.p_y);
    let table = RemapTable::projection(w, texture.radius, cfg.p_x)?;
    let full = bit_depth.max_value() as f64;
    let cy = (h as f64 - 1.0) / 2.0;

    let pitch_u_mm = texture.pitch_u * 1e-3;
    let pitch_z_mm = texture.pitch_z * 1e-3;
    let u_center = event.theta.to_radians() * texture.radius / pitch_u_mm;
    let p_x_mm = cfg.p_x_mm();
    let p_y_mm = cfg.p_y_mm();

    let cols: Vec<f64> = (0..w)
        .map(|i| u_center + table.offset(i) * p_x_mm / pitch_u_mm)
        .collect();
    // camera row y sits (y - cy) rows above the tile centre; rows grow toward the nozzle downward
    let rows: Vec<f64> = (0..h)
        .map(|y| (texture.depth - event.z - (y as f64 - cy) * p_y_mm) / pitch_z_mm)
        .collect();

    let c_lo = cols[0].floor() as i64 - 1;
    let c_hi = cols[w - 1].ceil() as i64 + 1;
    let r_lo = rows[h - 1].floor() as i64 - 1;
    let r_hi = rows[0].ceil() as i64 + 1;
    let patches = texture.patches_in(c_lo, c_hi, r_lo, r_hi);

    let mut pixels = vec![0u16; w * h];
    if patches.is_empty() {
        pixels.fill(crate::unwrap::quantize(texture.background * full, bit_depth));
    } else {
        for (y, out) in pixels.chunks_exact_mut(w).enumerate() {
            let ry = rows[y];
            let r0 = ry.floor() as i64;
            let fy = ry - r0 as f64;
            for (x, o) in out.iter_mut().enumerate() {
                let cxf = cols[x];
                let c0 = cxf.floor() as i64;
                let fx = cxf - c0 as f64;
                let v00 = texture.value_in(&patches, c0, r0);
                let v10 = texture.value_in(&patches, c0 + 1, r0);
                let v01 = texture.value_in(&patches, c0, r0 + 1);
                let v11 = texture.value_in(&patches, c0 + 1, r0 + 1);
                let v = v11 * fx * fy
                    + v10 * fx * (1.0 - fy)
                    + v01 * (1.0 - fx) * fy
                    + v00 * (1.0 - fx) * (1.0 - fy);
                *o = crate::unwrap::quantize(v * full, bit_depth);
            }
        }
    }
    Ok(TileImage::new(w, h, bit_depth, pixels, cfg.p_x, cfg.p_y)?.with_index(event.index()))
}

/// Additive zero-mean Gaussian noise of `sigma` intensity levels, clamped.
pub fn add_noise(img: &TileImage, sigma: f64, seed: u64) -> TileImage {
    add_noise_stream(img, sigma, seed, 0)
}

/// As [`add_noise`], drawing from stream `stream` of the seeded generator.
pub fn add_noise_stream(img: &TileImage, sigma: f64, seed: u64, stream: u64) -> TileImage {
    if !(sigma > 0.0) {
        return img.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let normal = Normal::new(0.0, sigma).expect("finite positive sigma");
    let mut out = img.clone();
    let pixels: Vec<u16> = img
        .pixels()
        .iter()
        .map(|&v| img.quantize(v as f64 + normal.sample(&mut rng)))
        .collect();
    for (i, v) in pixels.into_iter().enumerate() {
        out.set(i % img.width(), i / img.width(), v);
    }
    out
}

/// Parameters shared by every capture of a rendered stack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderSettings {
    pub bit_depth: BitDepth,
    /// Noise standard deviation, fraction of full scale.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            bit_depth: BitDepth::Eight,
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

/// Render and noise every capture of `plan`, in schedule order.
///
/// Noise for event `order` comes from stream `order` of `seed`, so the
/// result does not depend on thread scheduling.
pub fn render_stack(
    texture: &SurfaceTexture,
    plan: &ScanPlan,
    cfg: &OpticsConfig,
    region: &EffectiveRegion,
    settings: &RenderSettings,
) -> Result<Vec<TileImage>> {
    let sigma = settings.noise_sigma * settings.bit_depth.max_value() as f64;
    plan.schedule
        .par_iter()
        .map(|ev| {
            let clean = render_tile(texture, ev, cfg, region, settings.bit_depth)?;
            Ok(add_noise_stream(&clean, sigma, settings.seed, ev.order as u64))
        })
        .collect()
}
