//! Arc-surface projection correction.
//!
//! A flat sensor looking at the bore wall sees the arc `s` at the flat
//! offset `w = r sin(s / r)`. Correction resamples each row so that every
//! output column spans the same arc length `p_x`; the forward direction is
//! what the camera records and is used to render synthetic captures.
//!
//! Column coordinates here are signed offsets from the tile centre
//! `(width - 1) / 2`. Rows are untouched.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Position of a capture in the scan grid: `j` depth step, `k` rotation step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct TileIndex {
    pub j: usize,
    pub k: usize,
}

impl TileIndex {
    pub fn new(j: usize, k: usize) -> Self {
        Self { j, k }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn max_value(self) -> u16 {
        match self {
            BitDepth::Eight => u8::MAX as u16,
            BitDepth::Sixteen => u16::MAX,
        }
    }

    pub fn bits(self) -> u8 {
        match self {
            BitDepth::Eight => 8,
            BitDepth::Sixteen => 16,
        }
    }
}

impl TryFrom<u8> for BitDepth {
    type Error = String;

    fn try_from(bits: u8) -> std::result::Result<Self, Self::Error> {
        match bits {
            8 => Ok(BitDepth::Eight),
            16 => Ok(BitDepth::Sixteen),
            other => Err(format!("unsupported bit depth {other}")),
        }
    }
}

impl From<BitDepth> for u8 {
    fn from(depth: BitDepth) -> u8 {
        depth.bits()
    }
}

/// One grayscale capture or corrected tile.
#[derive(Debug, Clone, PartialEq)]
pub struct TileImage {
    width: usize,
    height: usize,
    bit_depth: BitDepth,
    pixels: Vec<u16>,
    /// Horizontal pixel equivalent, µm/pixel.
    pub p_x: f64,
    /// Vertical pixel equivalent, µm/pixel.
    pub p_y: f64,
    pub tile_index: TileIndex,
    /// Columns whose source fell outside the input and hold the sentinel 0.
    pub invalid_columns: Vec<usize>,
}

impl TileImage {
    pub fn new(
        width: usize,
        height: usize,
        bit_depth: BitDepth,
        pixels: Vec<u16>,
        p_x: f64,
        p_y: f64,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidConfig(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidConfig(format!(
                "expected {} pixels for {width}x{height}, got {}",
                width * height,
                pixels.len()
            )));
        }
        if !(p_x > 0.0 && p_y > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "pixel equivalents must be positive, got ({p_x}, {p_y})"
            )));
        }
        let max = bit_depth.max_value();
        if let Some(v) = pixels.iter().find(|&&v| v > max) {
            return Err(Error::InvalidConfig(format!(
                "pixel value {v} exceeds {}-bit range",
                bit_depth.bits()
            )));
        }
        Ok(Self {
            width,
            height,
            bit_depth,
            pixels,
            p_x,
            p_y,
            tile_index: TileIndex::default(),
            invalid_columns: Vec::new(),
        })
    }

    pub fn filled(
        width: usize,
        height: usize,
        bit_depth: BitDepth,
        value: u16,
        p_x: f64,
        p_y: f64,
    ) -> Result<Self> {
        let value = value.min(bit_depth.max_value());
        Self::new(width, height, bit_depth, vec![value; width * height], p_x, p_y)
    }

    pub fn with_index(mut self, index: TileIndex) -> Self {
        self.tile_index = index;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bit_depth(&self) -> BitDepth {
        self.bit_depth
    }

    pub fn max_value(&self) -> u16 {
        self.bit_depth.max_value()
    }

    pub fn pixels(&self) -> &[u16] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u16> {
        self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u16) {
        self.pixels[y * self.width + x] = v.min(self.bit_depth.max_value());
    }

    pub fn row(&self, y: usize) -> &[u16] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.width as f64 - 1.0) / 2.0,
            (self.height as f64 - 1.0) / 2.0,
        )
    }

    /// Round and clamp a floating intensity into this image's range.
    pub fn quantize(&self, v: f64) -> u16 {
        quantize(v, self.bit_depth)
    }
}

pub(crate) fn quantize(v: f64, depth: BitDepth) -> u16 {
    v.round().clamp(0.0, depth.max_value() as f64) as u16
}

/// Flat-plane pixel offset `k` to uniform-arc pixel offset `m`.
///
/// `r` in mm, `p_x` in µm/pixel.
pub fn pixel_to_arc(k: f64, r: f64, p_x: f64) -> Result<f64> {
    let p = p_x * 1e-3;
    let w = k * p;
    if !(w.abs() < r) {
        return Err(Error::OutOfDomain {
            value: k,
            limit: r / p,
        });
    }
    Ok(r / p * (w / r).asin())
}

/// Uniform-arc pixel offset `m` to flat-plane pixel offset `k`.
pub fn arc_to_pixel(m: f64, r: f64, p_x: f64) -> Result<f64> {
    let p = p_x * 1e-3;
    let limit = std::f64::consts::FRAC_PI_2 * r;
    if !(r > 0.0) || !((m * p).abs() <= limit) {
        return Err(Error::OutOfDomain {
            value: m,
            limit: limit / p,
        });
    }
    Ok(r / p * (m * p / r).sin())
}

/// Bilinear interpolation at fractional `(x, y)`; exact at integer nodes.
pub fn bilinear_sample(img: &TileImage, x: f64, y: f64) -> Result<f64> {
    let (w, h) = (img.width, img.height);
    if !(x >= 0.0 && y >= 0.0 && x <= (w - 1) as f64 && y <= (h - 1) as f64) {
        return Err(Error::OutOfBounds {
            x,
            y,
            width: w,
            height: h,
        });
    }
    let x0 = (x.floor() as usize).min(w.saturating_sub(2));
    let y0 = (y.floor() as usize).min(h.saturating_sub(2));
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let f = |xx: usize, yy: usize| img.get(xx, yy) as f64;
    Ok(f(x1, y1) * fx * fy
        + f(x1, y0) * fx * (1.0 - fy)
        + f(x0, y1) * (1.0 - fx) * fy
        + f(x0, y0) * (1.0 - fx) * (1.0 - fy))
}

/// Per-output-column source offsets, both relative to the tile centre.
#[derive(Debug, Clone, PartialEq)]
pub struct RemapTable {
    width: usize,
    offsets: Vec<f64>,
}

impl RemapTable {
    fn build(width: usize, r: f64, p_x: f64, f: impl Fn(f64) -> Result<f64>) -> Result<Self> {
        if width == 0 {
            return Err(Error::InvalidConfig("tile width must be positive".into()));
        }
        if !(r > 0.0 && p_x > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "radius and pixel equivalent must be positive, got {r}, {p_x}"
            )));
        }
        if !(width as f64 / 2.0 * p_x * 1e-3 < r) {
            return Err(Error::InvalidConfig(format!(
                "tile of {width} px at {p_x} µm/px is wider than the visible arc of r = {r} mm"
            )));
        }
        let c = (width as f64 - 1.0) / 2.0;
        let offsets = (0..width)
            .map(|i| f(i as f64 - c))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { width, offsets })
    }

    /// Correction table: for each corrected column `m`, the flat-plane source `k`.
    pub fn correction(width: usize, r: f64, p_x: f64) -> Result<Self> {
        Self::build(width, r, p_x, |m| arc_to_pixel(m, r, p_x))
    }

    /// Projection table: for each camera column `k`, the arc-plane source `m`.
    pub fn projection(width: usize, r: f64, p_x: f64) -> Result<Self> {
        Self::build(width, r, p_x, |k| pixel_to_arc(k, r, p_x))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn center(&self) -> f64 {
        (self.width as f64 - 1.0) / 2.0
    }

    /// Source offset for output column `i`, relative to the centre.
    pub fn offset(&self, i: usize) -> f64 {
        self.offsets[i]
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// Absolute fractional source column for output column `i`.
    pub fn source_column(&self, i: usize) -> f64 {
        self.center() + self.offsets[i]
    }
}

/// Correction remap for a tile of `width` columns.
pub fn build_remap(width: usize, r: f64, p_x: f64) -> Result<RemapTable> {
    RemapTable::correction(width, r, p_x)
}

/// Resample every row of `img` through `table` into an image `table.width()` wide.
///
/// Sources beyond the input are written as 0 and recorded in `invalid_columns`.
pub fn resample_columns(img: &TileImage, table: &RemapTable) -> TileImage {
    let out_w = table.width();
    let in_w = img.width;
    let in_c = (in_w as f64 - 1.0) / 2.0;
    let eps = 1e-9;

    // (left index, weight of right neighbour) per output column
    let taps: Vec<Option<(usize, f64)>> = (0..out_w)
        .map(|i| {
            let x = in_c + table.offset(i);
            if x < -eps || x > (in_w - 1) as f64 + eps {
                return None;
            }
            let x = x.clamp(0.0, (in_w - 1) as f64);
            let x0 = (x.floor() as usize).min(in_w.saturating_sub(2));
            Some((x0, x - x0 as f64))
        })
        .collect();

    let invalid_columns: Vec<usize> = taps
        .iter()
        .enumerate()
        .filter_map(|(i, t)| t.is_none().then_some(i))
        .collect();

    let mut pixels = vec![0u16; out_w * img.height];
    for (y, out_row) in pixels.chunks_exact_mut(out_w).enumerate() {
        let row = img.row(y);
        for (o, tap) in out_row.iter_mut().zip(&taps) {
            if let Some((x0, t)) = *tap {
                let a = row[x0] as f64;
                let b = row[(x0 + 1).min(in_w - 1)] as f64;
                *o = quantize(a * (1.0 - t) + b * t, img.bit_depth);
            }
        }
    }

    TileImage {
        width: out_w,
        height: img.height,
        bit_depth: img.bit_depth,
        pixels,
        p_x: img.p_x,
        p_y: img.p_y,
        tile_index: img.tile_index,
        invalid_columns,
    }
}

/// Remap a flat-plane capture onto the uniform-arc plane.
pub fn correct_tile(img: &TileImage, r: f64) -> Result<TileImage> {
    let table = build_remap(img.width, r, img.p_x)?;
    Ok(resample_columns(img, &table))
}

/// Render what the flat sensor records of an arc-plane texture window.
pub fn forward_project(texture_window: &TileImage, r: f64) -> Result<TileImage> {
    let table = RemapTable::projection(texture_window.width, r, texture_window.p_x)?;
    Ok(resample_columns(texture_window, &table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const R: f64 = 2.0;
    const PX: f64 = 2.16;

    fn image(w: usize, h: usize, px: Vec<u16>) -> TileImage {
        TileImage::new(w, h, BitDepth::Eight, px, PX, PX).unwrap()
    }

    #[test]
    fn arc_mapping_reference_values() {
        assert_eq!(pixel_to_arc(0.0, R, PX).unwrap(), 0.0);
        assert_eq!(arc_to_pixel(0.0, R, PX).unwrap(), 0.0);
        // mpmath, 30 digits
        assert!((pixel_to_arc(200.0, R, PX).unwrap() - 201.588_788_338_990_1).abs() < 1e-9);
        assert!((arc_to_pixel(300.0, R, PX).unwrap() - 294.778_681_142_729_9).abs() < 1e-9);
        assert!((pixel_to_arc(-200.0, R, PX).unwrap() + 201.588_788_338_990_1).abs() < 1e-9);
    }

    #[test]
    fn arc_mapping_domain_errors() {
        let limit = R / (PX * 1e-3);
        assert!(matches!(pixel_to_arc(limit, R, PX), Err(Error::OutOfDomain { .. })));
        assert!(matches!(pixel_to_arc(-limit - 1.0, R, PX), Err(Error::OutOfDomain { .. })));
        assert!(arc_to_pixel(limit * std::f64::consts::FRAC_PI_2 * 0.999, R, PX).is_ok());
        assert!(matches!(
            arc_to_pixel(limit * std::f64::consts::FRAC_PI_2 * 1.001, R, PX),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn small_angle_limit() {
        for m in [1.0, 5.0, 20.0] {
            let k = arc_to_pixel(m, R, PX).unwrap();
            let p = PX * 1e-3;
            let bound = (m * p / R).powi(3) / 6.0 * (R / p);
            assert!((m - k).abs() <= bound * 1.0001 + 1e-12);
        }
    }

    #[test]
    fn bilinear_nodes_and_midpoints() {
        let img = image(2, 2, vec![0, 100, 0, 100]);
        assert_eq!(bilinear_sample(&img, 0.5, 0.5).unwrap(), 50.0);
        assert_eq!(bilinear_sample(&img, 1.0, 1.0).unwrap(), 100.0);
        assert_eq!(bilinear_sample(&img, 0.0, 1.0).unwrap(), 0.0);
        let flat = TileImage::filled(7, 5, BitDepth::Eight, 77, PX, PX).unwrap();
        assert!((bilinear_sample(&flat, 3.3, 2.9).unwrap() - 77.0).abs() < 1e-12);
        assert!(matches!(
            bilinear_sample(&img, 1.01, 0.0),
            Err(Error::OutOfBounds { .. })
        ));
        assert!(bilinear_sample(&img, -0.01, 0.0).is_err());
    }

    #[test]
    fn remap_edge_cases() {
        let single = build_remap(1, R, PX).unwrap();
        assert_eq!(single.offsets(), &[0.0]);

        let t = build_remap(695, R, PX).unwrap();
        // mpmath: 2/0.00216 * sin(347 * 0.00216 / 2)
        assert!((t.offset(694) - 338.934_441_398_410_8).abs() < 1e-9);
        assert_eq!(t.offset(347), 0.0);
        for i in 0..695 {
            assert!((t.offset(i) + t.offset(694 - i)).abs() < 1e-9);
            if i > 0 {
                assert!(t.offset(i) > t.offset(i - 1));
            }
            let m = i as f64 - 347.0;
            assert!(t.offset(i).abs() <= m.abs() + 1e-12);
        }

        // 2 mm of 2.16 µm pixels is ~926 px half-width; 2000 px is too wide
        assert!(matches!(build_remap(2000, R, PX), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn correction_keeps_constant_and_center() {
        let flat = TileImage::filled(101, 9, BitDepth::Eight, 140, PX, PX).unwrap();
        let out = correct_tile(&flat, R).unwrap();
        assert_eq!(out, flat);

        let mut px = vec![0u16; 101 * 3];
        for y in 0..3 {
            for x in 0..101 {
                px[y * 101 + x] = ((x * 7 + y * 13) % 256) as u16;
            }
        }
        let img = image(101, 3, px);
        let out = correct_tile(&img, 0.2).unwrap();
        for y in 0..3 {
            assert_eq!(out.get(50, y), img.get(50, y));
        }
        assert!(out.invalid_columns.is_empty());
    }

    #[test]
    fn forward_projection_marks_columns_beyond_window() {
        let flat = TileImage::filled(695, 3, BitDepth::Eight, 90, PX, PX).unwrap();
        let out = forward_project(&flat, R).unwrap();
        assert!(!out.invalid_columns.is_empty());
        assert!(out.invalid_columns.contains(&0));
        assert!(out.invalid_columns.contains(&694));
        for x in 0..695 {
            let expected = if out.invalid_columns.contains(&x) { 0 } else { 90 };
            assert_eq!(out.get(x, 1), expected);
        }
    }

    #[test]
    fn forward_projection_keeps_center_column() {
        let w = 201;
        let mut px = vec![20u16; w * 4];
        for y in 0..4 {
            px[y * w + 100] = 250;
        }
        let out = forward_project(&image(w, 4, px), R).unwrap();
        for y in 0..4 {
            assert_eq!(out.get(100, y), 250);
            assert!(out.get(99, y) < 250 && out.get(101, y) < 250);
        }
    }

    #[test]
    fn forward_projection_compresses_by_cosine() {
        // local slope dk/dm of the projection equals cos(m p / r)
        let r = 0.5;
        let p = PX * 1e-3;
        for m in [50.0, 120.0, 200.0] {
            let h = 1e-3;
            let dk = (arc_to_pixel(m + h, r, PX).unwrap() - arc_to_pixel(m - h, r, PX).unwrap())
                / (2.0 * h);
            assert!((dk - (m * p / r).cos()).abs() < 1e-7);
        }
    }

    #[test]
    fn row_independence() {
        let (w, h) = (151, 6);
        let px: Vec<u16> = (0..w * h).map(|i| ((i * 37) % 251) as u16).collect();
        let img = image(w, h, px);
        let full = correct_tile(&img, 0.5).unwrap();
        for y in 0..h {
            let row = image(w, 1, img.row(y).to_vec());
            let single = correct_tile(&row, 0.5).unwrap();
            assert_eq!(single.row(0), full.row(y));
        }
    }

    proptest! {
        #[test]
        fn arc_inverse_pair(frac in -0.999f64..0.999) {
            let p = PX * 1e-3;
            let m = frac * (std::f64::consts::FRAC_PI_2 - 0.1) * R / p;
            let k = arc_to_pixel(m, R, PX).unwrap();
            let back = pixel_to_arc(k, R, PX).unwrap();
            prop_assert!((back - m).abs() < 1e-9);
            prop_assert!(back.abs() >= k.abs());
        }

        #[test]
        fn bilinear_within_neighbour_range(
            vals in proptest::collection::vec(0u16..=255, 16),
            x in 0.0f64..3.0, y in 0.0f64..3.0,
        ) {
            let img = image(4, 4, vals);
            let v = bilinear_sample(&img, x, y).unwrap();
            let (x0, y0) = (x.floor() as usize, y.floor() as usize);
            let n = [img.get(x0, y0), img.get(x0 + 1, y0), img.get(x0, y0 + 1), img.get(x0 + 1, y0 + 1)];
            let lo = *n.iter().min().unwrap() as f64;
            let hi = *n.iter().max().unwrap() as f64;
            prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
        }

        #[test]
        fn correction_matches_bilinear_sample(seed in 0u64..1000) {
            let (w, h) = (61, 4);
            let px: Vec<u16> = (0..w * h).map(|i| ((i as u64 * 2654435761 + seed) % 256) as u16).collect();
            let img = image(w, h, px);
            let r = 0.1;
            let out = correct_tile(&img, r).unwrap();
            let table = build_remap(w, r, PX).unwrap();
            for y in 0..h {
                for x in 0..w {
                    let v = bilinear_sample(&img, table.source_column(x), y as f64).unwrap();
                    prop_assert_eq!(out.get(x, y), img.quantize(v));
                }
            }
        }
    }
}
