//! Defect segmentation and blob measurement on corrected tiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::unwrap::{TileImage, TileIndex};

/// Which side of the threshold counts as a defect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    #[default]
    Dark,
    Bright,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "method", content = "level")]
pub enum Threshold {
    /// Fraction of full scale.
    Fixed(f64),
    Otsu,
}

/// Binary foreground mask in the frame of one tile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
    pub frame: TileIndex,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
            frame: TileIndex::default(),
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<bool>) -> Self {
        assert_eq!(data.len(), width * height, "mask size mismatch");
        Self {
            width,
            height,
            data,
            frame: TileIndex::default(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// A mask with the threshold that produced it.
#[derive(Debug, Clone)]
pub struct Binarization {
    pub mask: Mask,
    /// Intensity level separating the classes. Dark foreground is `<= level`
    /// for Otsu and `< level` for fixed thresholds.
    pub level: f64,
    /// Class means below / above the level, when computed (Otsu).
    pub class_means: Option<(f64, f64)>,
}

/// Otsu threshold over the image histogram: the level `t` maximizing the
/// between-class variance of `{v <= t}` vs `{v > t}`. When a plateau of
/// levels ties, its midpoint is returned.
pub fn otsu_level(img: &TileImage) -> Result<(f64, (f64, f64))> {
    let max = img.max_value() as usize;
    let mut hist = vec![0u64; max + 1];
    let skip: Vec<bool> = column_mask(img);
    for y in 0..img.height() {
        for (x, &v) in img.row(y).iter().enumerate() {
            if !skip[x] {
                hist[v as usize] += 1;
            }
        }
    }
    let occupied = hist.iter().filter(|&&h| h > 0).count();
    if occupied < 2 {
        return Err(Error::DegenerateThreshold);
    }
    let total: f64 = hist.iter().sum::<u64>() as f64;
    let sum_total: f64 = hist.iter().enumerate().map(|(i, &h)| i as f64 * h as f64).sum();

    let mut w_b = 0.0;
    let mut sum_b = 0.0;
    let mut best = -1.0f64;
    let mut best_lo = 0usize;
    let mut best_hi = 0usize;
    let mut means = (0.0, 0.0);
    for (t, &h) in hist.iter().enumerate() {
        w_b += h as f64;
        sum_b += t as f64 * h as f64;
        let w_f = total - w_b;
        if w_b == 0.0 {
            continue;
        }
        if w_f == 0.0 {
            break;
        }
        let m_b = sum_b / w_b;
        let m_f = (sum_total - sum_b) / w_f;
        let var = w_b * w_f * (m_b - m_f) * (m_b - m_f);
        if var > best * (1.0 + 1e-12) {
            best = var;
            best_lo = t;
            best_hi = t;
            means = (m_b, m_f);
        } else if (var - best).abs() <= best * 1e-12 && best_hi + 1 == t {
            best_hi = t;
        }
    }
    Ok(((best_lo + best_hi) as f64 / 2.0, means))
}

fn column_mask(img: &TileImage) -> Vec<bool> {
    let mut skip = vec![false; img.width()];
    for &c in &img.invalid_columns {
        if c < skip.len() {
            skip[c] = true;
        }
    }
    skip
}

/// Split `img` into defect foreground and background. Columns listed as
/// invalid in the image are always background.
pub fn binarize(img: &TileImage, method: Threshold, polarity: Polarity) -> Result<Binarization> {
    let (level, class_means, inclusive) = match method {
        Threshold::Fixed(frac) => (frac * img.max_value() as f64, None, false),
        Threshold::Otsu => {
            let (t, means) = otsu_level(img)?;
            (t, Some(means), true)
        }
    };
    let skip = column_mask(img);
    let mut mask = Mask::new(img.width(), img.height());
    mask.frame = img.tile_index;
    for y in 0..img.height() {
        for (x, &v) in img.row(y).iter().enumerate() {
            if skip[x] {
                continue;
            }
            let v = v as f64;
            let fg = match (polarity, inclusive) {
                (Polarity::Dark, false) => v < level,
                (Polarity::Dark, true) => v <= level,
                (Polarity::Bright, _) => v > level,
            };
            if fg {
                mask.data[y * img.width() + x] = true;
            }
        }
    }
    Ok(Binarization {
        mask,
        level,
        class_means,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x0: usize,
    pub y0: usize,
    /// Inclusive.
    pub x1: usize,
    /// Inclusive.
    pub y1: usize,
}

impl BoundingBox {
    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 as f64 && x <= self.x1 as f64 && y >= self.y0 as f64 && y <= self.y1 as f64
    }

    /// True if the box reaches the outer ring of a `width` x `height` frame.
    pub fn touches_border(&self, width: usize, height: usize) -> bool {
        self.x0 == 0 || self.y0 == 0 || self.x1 + 1 >= width || self.y1 + 1 >= height
    }
}

/// A labelled connected component, in pixel units.
#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    pub label: u32,
    pub frame: TileIndex,
    pub pixel_area: usize,
    /// Mean pixel coordinate (x = column m, y = row n).
    pub centroid: (f64, f64),
    pub bbox: BoundingBox,
    /// Central second moments (xx, yy, xy), per pixel.
    pub moments: (f64, f64, f64),
}

impl Blob {
    /// Ratio of principal axis lengths, >= 1.
    pub fn elongation(&self) -> f64 {
        let (xx, yy, xy) = self.moments;
        // regularize by the variance of a unit pixel so single rows stay finite
        let (xx, yy) = (xx + 1.0 / 12.0, yy + 1.0 / 12.0);
        let tr = xx + yy;
        let det = xx * yy - xy * xy;
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        let l1 = tr / 2.0 + disc;
        let l2 = (tr / 2.0 - disc).max(f64::MIN_POSITIVE);
        (l1 / l2).sqrt()
    }

    /// Axis along which the blob is longest.
    pub fn major_axis(&self) -> Axis {
        if self.moments.1 >= self.moments.0 {
            Axis::Vertical
        } else {
            Axis::Horizontal
        }
    }
}

/// Component labels for a whole mask: 0 for background, 1..=n otherwise.
#[derive(Debug, Clone)]
pub struct Labeling {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    pub count: u32,
}

impl Labeling {
    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        parent[x as usize] = parent[parent[x as usize] as usize];
        x = parent[x as usize];
    }
    x
}

fn union(parent: &mut [u32], a: u32, b: u32) -> u32 {
    let (ra, rb) = (find(parent, a), find(parent, b));
    let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
    parent[hi as usize] = lo;
    lo
}

/// Two-pass 8-connected labelling with union-find. Labels are dense and
/// numbered in raster order of each component's first pixel.
pub fn label_components(mask: &Mask) -> Labeling {
    let (w, h) = (mask.width, mask.height);
    let mut labels = vec![0u32; w * h];
    let mut parent: Vec<u32> = vec![0];

    for y in 0..h {
        for x in 0..w {
            if !mask.data[y * w + x] {
                continue;
            }
            let mut current = 0u32;
            let mut neighbours = [0u32; 4];
            if x > 0 {
                neighbours[0] = labels[y * w + x - 1];
            }
            if y > 0 {
                let up = (y - 1) * w;
                if x > 0 {
                    neighbours[1] = labels[up + x - 1];
                }
                neighbours[2] = labels[up + x];
                if x + 1 < w {
                    neighbours[3] = labels[up + x + 1];
                }
            }
            for &n in neighbours.iter().filter(|&&n| n != 0) {
                current = if current == 0 { find(&mut parent, n) } else { union(&mut parent, current, n) };
            }
            if current == 0 {
                current = parent.len() as u32;
                parent.push(current);
            }
            labels[y * w + x] = current;
        }
    }

    let mut remap = vec![0u32; parent.len()];
    let mut next = 0u32;
    for l in labels.iter_mut().filter(|l| **l != 0) {
        let root = find(&mut parent, *l) as usize;
        if remap[root] == 0 {
            next += 1;
            remap[root] = next;
        }
        *l = remap[root];
    }
    Labeling {
        width: w,
        height: h,
        labels,
        count: next,
    }
}

/// Per-label statistics from a labelling.
pub fn blobs_from_labels(labeling: &Labeling, frame: TileIndex) -> Vec<Blob> {
    #[derive(Clone, Copy)]
    struct Acc {
        n: usize,
        sx: f64,
        sy: f64,
        sxx: f64,
        syy: f64,
        sxy: f64,
        x0: usize,
        y0: usize,
        x1: usize,
        y1: usize,
    }
    let empty = Acc {
        n: 0,
        sx: 0.0,
        sy: 0.0,
        sxx: 0.0,
        syy: 0.0,
        sxy: 0.0,
        x0: usize::MAX,
        y0: usize::MAX,
        x1: 0,
        y1: 0,
    };
    let mut acc = vec![empty; labeling.count as usize + 1];
    for y in 0..labeling.height {
        for x in 0..labeling.width {
            let l = labeling.labels[y * labeling.width + x];
            if l == 0 {
                continue;
            }
            let a = &mut acc[l as usize];
            let (xf, yf) = (x as f64, y as f64);
            a.n += 1;
            a.sx += xf;
            a.sy += yf;
            a.sxx += xf * xf;
            a.syy += yf * yf;
            a.sxy += xf * yf;
            a.x0 = a.x0.min(x);
            a.y0 = a.y0.min(y);
            a.x1 = a.x1.max(x);
            a.y1 = a.y1.max(y);
        }
    }
    acc.iter()
        .enumerate()
        .skip(1)
        .map(|(l, a)| {
            let n = a.n as f64;
            let (cx, cy) = (a.sx / n, a.sy / n);
            Blob {
                label: l as u32,
                frame,
                pixel_area: a.n,
                centroid: (cx, cy),
                bbox: BoundingBox {
                    x0: a.x0,
                    y0: a.y0,
                    x1: a.x1,
                    y1: a.y1,
                },
                moments: (
                    (a.sxx / n - cx * cx).max(0.0),
                    (a.syy / n - cy * cy).max(0.0),
                    a.sxy / n - cx * cy,
                ),
            }
        })
        .collect()
}

/// 8-connected components of `mask`, dropping those under `min_area` pixels.
pub fn connected_components(mask: &Mask, min_area: usize) -> Vec<Blob> {
    let labeling = label_components(mask);
    blobs_from_labels(&labeling, mask.frame)
        .into_iter()
        .filter(|b| b.pixel_area >= min_area)
        .collect()
}

/// Blob with physical measurements attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobRecord {
    pub label: u32,
    pub frame: TileIndex,
    pub pixel_area: usize,
    pub centroid: (f64, f64),
    pub bbox: BoundingBox,
    /// mm
    pub equivalent_diameter: f64,
    /// mm²
    pub physical_area: f64,
    pub elongation: f64,
}

/// Attach physical area and equivalent-circle diameter. `p_x`, `p_y` in µm/pixel.
pub fn blob_metrics(blob: &Blob, p_x: f64, p_y: f64) -> BlobRecord {
    let physical_area = blob.pixel_area as f64 * p_x * p_y * 1e-6;
    BlobRecord {
        label: blob.label,
        frame: blob.frame,
        pixel_area: blob.pixel_area,
        centroid: blob.centroid,
        bbox: blob.bbox,
        equivalent_diameter: 2.0 * (physical_area / std::f64::consts::PI).sqrt(),
        physical_area,
        elongation: blob.elongation(),
    }
}

/// Centroid separation in mm. Both blobs must share a frame.
pub fn centroid_distance(a: &BlobRecord, b: &BlobRecord, p_x: f64, p_y: f64) -> Result<f64> {
    if a.frame != b.frame {
        return Err(Error::FrameMismatch {
            a: a.frame,
            b: b.frame,
        });
    }
    let dx = (a.centroid.0 - b.centroid.0) * p_x * 1e-3;
    let dy = (a.centroid.1 - b.centroid.1) * p_y * 1e-3;
    Ok(dx.hypot(dy))
}

/// Direction a line runs in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineMeasurement {
    /// mm, one per segment.
    pub widths: Vec<f64>,
    pub mean_width: f64,
    pub segment_count: usize,
}

impl LineMeasurement {
    pub fn from_widths(widths: Vec<f64>) -> Result<Self> {
        if widths.is_empty() {
            return Err(Error::LineNotFound);
        }
        let mean_width = widths.iter().sum::<f64>() / widths.len() as f64;
        Ok(Self {
            segment_count: widths.len(),
            widths,
            mean_width,
        })
    }
}

/// Per-segment widths (pixels) of component `label` running along `axis`.
///
/// Each segment covers `segment_len` lines across the axis; its width is the
/// mean foreground run over the lines it actually touches.
pub fn segment_widths_px(
    labeling: &Labeling,
    label: u32,
    bbox: &BoundingBox,
    axis: Axis,
    segment_len: usize,
) -> Vec<f64> {
    let segment_len = segment_len.max(1);
    let (along0, along1) = match axis {
        Axis::Vertical => (bbox.y0, bbox.y1),
        Axis::Horizontal => (bbox.x0, bbox.x1),
    };
    let mut widths = Vec::new();
    let mut start = along0;
    while start <= along1 {
        let end = (start + segment_len - 1).min(along1);
        let (mut total, mut lines) = (0usize, 0usize);
        for a in start..=end {
            let n = match axis {
                Axis::Vertical => (bbox.x0..=bbox.x1)
                    .filter(|&x| labeling.label(x, a) == label)
                    .count(),
                Axis::Horizontal => (bbox.y0..=bbox.y1)
                    .filter(|&y| labeling.label(a, y) == label)
                    .count(),
            };
            if n > 0 {
                total += n;
                lines += 1;
            }
        }
        if lines > 0 {
            widths.push(total as f64 / lines as f64);
        }
        start = end + 1;
    }
    widths
}

/// Width of the dominant line-like component, measured segment by segment.
///
/// `pitch_across` is the pixel equivalent (µm/pixel) perpendicular to `axis`.
pub fn line_width(
    mask: &Mask,
    axis: Axis,
    segment_len: usize,
    pitch_across: f64,
) -> Result<LineMeasurement> {
    let labeling = label_components(mask);
    let blobs = blobs_from_labels(&labeling, mask.frame);
    let blob = blobs
        .iter()
        .max_by_key(|b| b.pixel_area)
        .ok_or(Error::LineNotFound)?;
    let (along, across) = match axis {
        Axis::Vertical => (blob.bbox.height(), blob.bbox.width()),
        Axis::Horizontal => (blob.bbox.width(), blob.bbox.height()),
    };
    let mean_across = blob.pixel_area as f64 / along as f64;
    if (along as f64) < mean_across || across == 0 {
        return Err(Error::LineNotFound);
    }
    let widths = segment_widths_px(&labeling, blob.label, &blob.bbox, axis, segment_len)
        .into_iter()
        .map(|w| w * pitch_across * 1e-3)
        .collect();
    LineMeasurement::from_widths(widths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::unwrap::BitDepth;
    use proptest::prelude::*;
    use std::collections::{HashMap, VecDeque};

    const PX: f64 = 2.16;

    /// Breadth-first flood fill, independent of the union-find labeller.
    fn flood_fill_labels(mask: &Mask) -> Vec<u32> {
        let (w, h) = (mask.width(), mask.height());
        let mut labels = vec![0u32; w * h];
        let mut next = 0;
        for start in 0..w * h {
            if !mask.data()[start] || labels[start] != 0 {
                continue;
            }
            next += 1;
            labels[start] = next;
            let mut queue = VecDeque::from([start]);
            while let Some(p) = queue.pop_front() {
                let (x, y) = ((p % w) as i64, (p / w) as i64);
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (x + dx, y + dy);
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        let q = ny as usize * w + nx as usize;
                        if mask.data()[q] && labels[q] == 0 {
                            labels[q] = next;
                            queue.push_back(q);
                        }
                    }
                }
            }
        }
        labels
    }

    fn same_partition(a: &[u32], b: &[u32]) -> bool {
        let mut ab = HashMap::new();
        let mut ba = HashMap::new();
        for (&x, &y) in a.iter().zip(b) {
            if (x == 0) != (y == 0) {
                return false;
            }
            if *ab.entry(x).or_insert(y) != y || *ba.entry(y).or_insert(x) != x {
                return false;
            }
        }
        true
    }

    fn disc_image(diameter_px: f64, w: usize, h: usize, cx: f64, cy: f64) -> TileImage {
        let mut img = TileImage::filled(w, h, BitDepth::Eight, 180, PX, PX).unwrap();
        let r = diameter_px / 2.0;
        for y in 0..h {
            for x in 0..w {
                let mut hits = 0;
                for sy in 0..4 {
                    for sx in 0..4 {
                        let dx = x as f64 + (sx as f64 + 0.5) / 4.0 - 0.5 - cx;
                        let dy = y as f64 + (sy as f64 + 0.5) / 4.0 - 0.5 - cy;
                        if dx * dx + dy * dy <= r * r {
                            hits += 1;
                        }
                    }
                }
                img.set(x, y, img.quantize(180.0 - 100.0 * hits as f64 / 16.0));
            }
        }
        img
    }

    #[test]
    fn uniform_image_fixed_threshold_is_empty() {
        let img = TileImage::filled(20, 10, BitDepth::Eight, 180, PX, PX).unwrap();
        let b = binarize(&img, Threshold::Fixed(0.5), Polarity::Dark).unwrap();
        assert_eq!(b.mask.count(), 0);
        assert!(matches!(
            binarize(&img, Threshold::Otsu, Polarity::Dark),
            Err(Error::DegenerateThreshold)
        ));
    }

    #[test]
    fn otsu_separates_two_levels() {
        let px: Vec<u16> = (0..400).map(|i| if i % 3 == 0 { 50 } else { 200 }).collect();
        let img = TileImage::new(20, 20, BitDepth::Eight, px, PX, PX).unwrap();
        let (t, (lo, hi)) = otsu_level(&img).unwrap();
        assert!(t > 50.0 && t < 200.0, "{t}");
        assert_eq!((lo, hi), (50.0, 200.0));
        let b = binarize(&img, Threshold::Otsu, Polarity::Dark).unwrap();
        assert_eq!(b.mask.count(), 134);
        let bright = binarize(&img, Threshold::Otsu, Polarity::Bright).unwrap();
        assert_eq!(bright.mask.count(), 266);
    }

    #[test]
    fn invalid_columns_are_background() {
        let mut img = TileImage::filled(10, 4, BitDepth::Eight, 0, PX, PX).unwrap();
        img.invalid_columns = vec![0, 9];
        let b = binarize(&img, Threshold::Fixed(0.5), Polarity::Dark).unwrap();
        assert_eq!(b.mask.count(), 8 * 4);
    }

    #[test]
    fn noisy_disc_area_within_three_percent() {
        // 0.2 mm disc, sigma 5 noise
        let d = 200.0 / PX;
        let clean = disc_image(d, 160, 160, 80.3, 79.6);
        let noisy = crate::synth::add_noise(&clean, 5.0, 11);
        let b = binarize(&noisy, Threshold::Fixed(0.5), Polarity::Dark).unwrap();
        let truth = std::f64::consts::PI * (d / 2.0).powi(2);
        let n = b.mask.count() as f64;
        assert!((n - truth).abs() / truth < 0.03, "{n} vs {truth}");
        let otsu = binarize(&noisy, Threshold::Otsu, Polarity::Dark).unwrap();
        let n = otsu.mask.count() as f64;
        assert!((n - truth).abs() / truth < 0.03, "{n} vs {truth}");
    }

    #[test]
    fn components_basic() {
        assert!(connected_components(&Mask::new(8, 8), 1).is_empty());

        let mut m = Mask::new(10, 5);
        for (x, y) in [(1, 1), (2, 1), (1, 2), (2, 2), (6, 2), (7, 2), (7, 3)] {
            m.set(x, y, true);
        }
        let blobs = connected_components(&m, 1);
        assert_eq!(blobs.len(), 2);
        assert_eq!(blobs[0].pixel_area, 4);
        assert_eq!(blobs[0].centroid, (1.5, 1.5));

        // diagonal neighbours join under 8-connectivity
        let mut d = Mask::new(4, 4);
        d.set(0, 0, true);
        d.set(1, 1, true);
        d.set(2, 2, true);
        assert_eq!(connected_components(&d, 1).len(), 1);

        // min_area drops the small one
        assert_eq!(connected_components(&m, 4).len(), 1);
    }

    #[test]
    fn exhaustive_4x4_against_flood_fill() {
        for bits in 0u32..(1 << 16) {
            let data: Vec<bool> = (0..16).map(|i| bits >> i & 1 == 1).collect();
            let m = Mask::from_vec(4, 4, data);
            let l = label_components(&m);
            assert!(same_partition(&l.labels, &flood_fill_labels(&m)), "mask {bits:#06x}");
        }
    }

    #[test]
    fn blob_metrics_units() {
        let mut m = Mask::new(30, 30);
        m.set(10, 20, true);
        let blob = &connected_components(&m, 1)[0];
        let rec = blob_metrics(blob, PX, PX);
        assert_eq!(rec.centroid, (10.0, 20.0));
        assert!((rec.physical_area * 1e6 - 4.6656).abs() < 1e-9);
    }

    fn measured_diameter(d_mm: f64, pitch: f64) -> f64 {
        let d = d_mm * 1e3 / pitch;
        let size = (d + 20.0) as usize;
        let c = size as f64 / 2.0 + 0.27;
        let mut img = disc_image(d, size, size, c, c - 0.41);
        img.p_x = pitch;
        img.p_y = pitch;
        let b = binarize(&img, Threshold::Fixed(0.5), Polarity::Dark).unwrap();
        let blobs = connected_components(&b.mask, 9);
        assert_eq!(blobs.len(), 1);
        blob_metrics(&blobs[0], pitch, pitch).equivalent_diameter
    }

    #[test]
    fn disc_diameters_from_rasterization() {
        assert!((measured_diameter(0.1, PX) - 0.1).abs() <= 0.005);
        assert!((measured_diameter(0.2, PX) - 0.2).abs() <= 0.005);
    }

    #[test]
    fn diameter_converges_with_pitch() {
        let coarse = (measured_diameter(0.1, 8.0) - 0.1).abs();
        let fine = (measured_diameter(0.1, 1.0) - 0.1).abs();
        assert!(fine < coarse, "{fine} !< {coarse}");
    }

    #[test]
    fn centroid_distance_cases() {
        let mut m = Mask::new(400, 10);
        m.set(5, 5, true);
        m.set(300, 5, true);
        let blobs: Vec<_> = connected_components(&m, 1).iter().map(|b| blob_metrics(b, PX, PX)).collect();
        assert_eq!(centroid_distance(&blobs[0], &blobs[0], PX, PX).unwrap(), 0.0);
        let mut far = blobs[1].clone();
        far.centroid.0 = blobs[0].centroid.0 + 400.0 / PX;
        assert!((centroid_distance(&blobs[0], &far, PX, PX).unwrap() - 0.4).abs() < 1e-12);
        far.frame = TileIndex::new(1, 0);
        assert!(matches!(
            centroid_distance(&blobs[0], &far, PX, PX),
            Err(Error::FrameMismatch { .. })
        ));
    }

    #[test]
    fn perfect_band_width() {
        let mut m = Mask::new(300, 500);
        for y in 0..500 {
            for x in 80..219 {
                m.set(x, y, true);
            }
        }
        for seg in [1, 64, 100, 500] {
            let lm = line_width(&m, Axis::Vertical, seg, PX).unwrap();
            assert!(lm.widths.iter().all(|&w| (w - 139.0 * PX * 1e-3).abs() < 1e-12));
            assert!((lm.mean_width - 0.30024).abs() < 1e-12);
            assert_eq!(lm.segment_count, 500usize.div_ceil(seg));
        }
        assert!(matches!(
            line_width(&Mask::new(10, 10), Axis::Vertical, 64, PX),
            Err(Error::LineNotFound)
        ));
        // a wide short blob is not a vertical line
        assert!(matches!(
            line_width(&m, Axis::Horizontal, 64, PX),
            Err(Error::LineNotFound)
        ));
    }

    #[test]
    fn elongation_distinguishes_lines() {
        let mut m = Mask::new(200, 400);
        for y in 10..390 {
            for x in 50..100 {
                m.set(x, y, true);
            }
        }
        let b = &connected_components(&m, 1)[0];
        assert!(b.elongation() > 7.0);
        assert_eq!(b.major_axis(), Axis::Vertical);

        let disc = disc_image(50.0, 80, 80, 40.0, 40.0);
        let bin = binarize(&disc, Threshold::Fixed(0.5), Polarity::Dark).unwrap();
        let b = &connected_components(&bin.mask, 1)[0];
        assert!(b.elongation() < 1.05);
    }

    fn random_mask(w: usize, h: usize, seed: u64, density: f64) -> Mask {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Mask::from_vec(w, h, (0..w * h).map(|_| rng.random_bool(density)).collect())
    }

    #[test]
    fn random_32x32_against_flood_fill() {
        for seed in 0..200 {
            let m = random_mask(32, 32, seed, 0.2 + 0.5 * (seed % 5) as f64 / 5.0);
            assert!(same_partition(&label_components(&m).labels, &flood_fill_labels(&m)));
        }
    }

    proptest! {
        #[test]
        fn partition_and_area_conservation(seed in 0u64..10_000, min_area in 1usize..6) {
            let m = random_mask(24, 17, seed, 0.35);
            let l = label_components(&m);
            let blobs = blobs_from_labels(&l, m.frame);
            let total: usize = blobs.iter().map(|b| b.pixel_area).sum();
            prop_assert_eq!(total, m.count());
            let kept: usize = connected_components(&m, min_area).iter().map(|b| b.pixel_area).sum();
            let dropped: usize = blobs.iter().filter(|b| b.pixel_area < min_area).map(|b| b.pixel_area).sum();
            prop_assert_eq!(kept, m.count() - dropped);
            // distinct components never touch
            for y in 0..m.height() {
                for x in 0..m.width() {
                    let a = l.label(x, y);
                    if a == 0 { continue; }
                    for (dx, dy) in [(1i64, 0i64), (0, 1), (1, 1), (-1, 1)] {
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        if nx < 0 || ny < 0 || nx >= m.width() as i64 || ny >= m.height() as i64 { continue; }
                        let b = l.label(nx as usize, ny as usize);
                        prop_assert!(b == 0 || b == a);
                    }
                }
            }
        }

        #[test]
        fn centroids_translate_exactly(seed in 0u64..10_000, dx in 0usize..6, dy in 0usize..6) {
            let m = random_mask(16, 16, seed, 0.3);
            let mut shifted = Mask::new(22, 22);
            for y in 0..16 {
                for x in 0..16 {
                    shifted.set(x + dx, y + dy, m.get(x, y));
                }
            }
            let a = connected_components(&m, 1);
            let b = connected_components(&shifted, 1);
            prop_assert_eq!(a.len(), b.len());
            for (p, q) in a.iter().zip(&b) {
                prop_assert!((q.centroid.0 - p.centroid.0 - dx as f64).abs() < 1e-9);
                prop_assert!((q.centroid.1 - p.centroid.1 - dy as f64).abs() < 1e-9);
            }
        }
    }
}
