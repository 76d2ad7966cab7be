//! The per-stack pipeline: correct, segment, measure, locate, fuse.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{
    binarize, blob_metrics, blobs_from_labels, label_components, segment_widths_px, Axis, Blob,
    BlobRecord, Labeling, Polarity, Threshold,
};
use crate::error::Result;
use crate::geometry::{HoleSpec, OpticsConfig};
use crate::locate::{
    defect_location, fuse_detections, tile_point, DefectKind, DefectRecord, Footprint,
    FusionTolerance, SourceObservation,
};
use crate::scanplan::ScanPlan;
use crate::unwrap::{correct_tile, TileImage, TileIndex};

/// Detection settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectConfig {
    pub threshold: ThresholdMode,
    /// Fixed threshold, fraction of full scale.
    pub level: f64,
    pub polarity: Polarity,
    /// Smallest blob kept, pixels.
    pub min_area: usize,
    /// Segment length for line widths, pixels.
    pub segment_len: usize,
    /// Blobs at least this elongated are treated as lines.
    pub line_elongation: f64,
    /// Otsu falls back to the fixed level when its class means are closer
    /// than this fraction of full scale.
    pub min_contrast: f64,
    pub tolerance: FusionTolerance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMode {
    #[default]
    Fixed,
    Otsu,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            threshold: ThresholdMode::Fixed,
            level: 0.5,
            polarity: Polarity::Dark,
            min_area: 9,
            segment_len: 64,
            line_elongation: 3.0,
            min_contrast: 0.15,
            tolerance: FusionTolerance::default(),
        }
    }
}

/// Detections in one corrected tile, located on the wall but not yet fused.
pub fn analyze_tile(
    corrected: &TileImage,
    plan: &ScanPlan,
    hole: &HoleSpec,
    cfg: &OpticsConfig,
    detect: &DetectConfig,
) -> Result<Vec<DefectRecord>> {
    let fixed = Threshold::Fixed(detect.level);
    let bin = match detect.threshold {
        ThresholdMode::Fixed => binarize(corrected, fixed, detect.polarity)?,
        ThresholdMode::Otsu => match binarize(corrected, Threshold::Otsu, detect.polarity) {
            Ok(b) => {
                let (lo, hi) = b.class_means.unwrap_or((0.0, 0.0));
                if hi - lo < detect.min_contrast * corrected.max_value() as f64 {
                    binarize(corrected, fixed, detect.polarity)?
                } else {
                    b
                }
            }
            Err(crate::error::Error::DegenerateThreshold) => {
                binarize(corrected, fixed, detect.polarity)?
            }
            Err(e) => return Err(e),
        },
    };
    let labeling = label_components(&bin.mask);
    let dims = (corrected.width(), corrected.height());
    let tile = corrected.tile_index;
    let share = TileShare::new(tile, dims, plan, hole, cfg);
    let mut out = Vec::new();
    for blob in blobs_from_labels(&labeling, tile) {
        if blob.pixel_area < detect.min_area {
            continue;
        }
        let metrics = blob_metrics(&blob, corrected.p_x, corrected.p_y);
        let truncated = blob.bbox.touches_border(dims.0, dims.1);
        // a cut blob is described by the part in this tile's share of the wall,
        // so fragments from overlapping tiles add up without double counting
        let (centroid, area) = if truncated {
            match owned_part(&labeling, &blob, &share) {
                Some((c, px_area)) => (c, px_area * corrected.p_x * corrected.p_y * 1e-6),
                None if !is_line_like(&metrics, detect) => continue,
                None => (blob.centroid, 0.0),
            }
        } else {
            (blob.centroid, metrics.physical_area)
        };
        let (z, beta) = defect_location(tile, centroid, dims, plan, hole, cfg)?;
        let is_line = is_line_like(&metrics, detect);
        let (kind, size, segment_widths) = if is_line {
            let axis = blob.major_axis();
            let pitch = match axis {
                Axis::Vertical => corrected.p_x,
                Axis::Horizontal => corrected.p_y,
            };
            let widths: Vec<f64> =
                segment_widths_px(&labeling, blob.label, &blob.bbox, axis, detect.segment_len)
                    .into_iter()
                    .map(|w| w * pitch * 1e-3)
                    .collect();
            let mean = widths.iter().sum::<f64>() / widths.len().max(1) as f64;
            (DefectKind::Line, mean, widths)
        } else {
            (DefectKind::Disc, metrics.equivalent_diameter, Vec::new())
        };

        // pixel edges, half a pixel beyond the extreme centres
        let b = &blob.bbox;
        let (z_a, arc_a) = tile_point(tile, (b.x0 as f64 - 0.5, b.y0 as f64 - 0.5), dims, plan, hole, cfg)?;
        let (z_b, arc_b) = tile_point(tile, (b.x1 as f64 + 0.5, b.y1 as f64 + 0.5), dims, plan, hole, cfg)?;
        let (_, arc_c) = tile_point(tile, centroid, dims, plan, hole, cfg)?;
        // express the interval around the normalized centre angle
        let to_deg = |arc: f64| (arc / hole.radius).to_degrees();
        let shift = beta - to_deg(arc_c);
        let footprint = Footprint {
            z_min: z_a.min(z_b),
            z_max: z_a.max(z_b),
            beta_min: to_deg(arc_a.min(arc_b)) + shift,
            beta_max: to_deg(arc_a.max(arc_b)) + shift,
        };

        out.push(DefectRecord {
            id: 0,
            kind,
            z,
            z_from_bottom: hole.depth - z,
            beta,
            size,
            area,
            pixel_area: metrics.pixel_area,
            truncated,
            sources: vec![SourceObservation {
                tile,
                centroid: blob.centroid,
            }],
            footprint,
            segment_widths,
        });
    }
    Ok(out)
}

fn is_line_like(metrics: &BlobRecord, detect: &DetectConfig) -> bool {
    metrics.elongation >= detect.line_elongation
}

/// The part of the wall a tile is responsible for, in its pixel coordinates.
///
/// Columns split the circumference evenly between neighbouring centres and
/// rows split the depth step; the bottom and top rows own everything beyond
/// them. The shares of all tiles partition the wall.
#[derive(Debug, Clone, Copy)]
struct TileShare {
    x: (f64, f64),
    y: (f64, f64),
}

impl TileShare {
    fn new(tile: TileIndex, dims: (usize, usize), plan: &ScanPlan, hole: &HoleSpec, cfg: &OpticsConfig) -> Self {
        let m_c = (dims.0 as f64 - 1.0) / 2.0;
        let n_c = (dims.1 as f64 - 1.0) / 2.0;
        let half_x = std::f64::consts::PI * hole.radius / plan.n_rot.max(1) as f64 / cfg.p_x_mm();
        let half_y = plan.step / 2.0 / cfg.p_y_mm();
        // row index grows towards the nozzle
        let y_lo = if tile.j == 0 { f64::NEG_INFINITY } else { n_c - half_y };
        let y_hi = if tile.j + 1 >= plan.n_depth { f64::INFINITY } else { n_c + half_y };
        Self {
            x: (m_c - half_x, m_c + half_x),
            y: (y_lo, y_hi),
        }
    }
}

/// Fraction of the unit pixel centred on `c` inside `[lo, hi)`.
fn cover(c: f64, (lo, hi): (f64, f64)) -> f64 {
    ((c + 0.5).min(hi) - (c - 0.5).max(lo)).clamp(0.0, 1.0)
}

/// Centroid and area in pixels of the part of `blob` inside `share`.
fn owned_part(labeling: &Labeling, blob: &Blob, share: &TileShare) -> Option<((f64, f64), f64)> {
    let b = &blob.bbox;
    let (mut w, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for y in b.y0..=b.y1 {
        let wy = cover(y as f64, share.y);
        if wy == 0.0 {
            continue;
        }
        for x in b.x0..=b.x1 {
            if labeling.label(x, y) != blob.label {
                continue;
            }
            let wxy = cover(x as f64, share.x) * wy;
            w += wxy;
            sx += wxy * x as f64;
            sy += wxy * y as f64;
        }
    }
    (w > 0.0).then(|| ((sx / w, sy / w), w))
}

/// Output of [`inspect_tiles`].
#[derive(Debug, Clone)]
pub struct Inspection {
    pub corrected: Vec<TileImage>,
    pub records: Vec<DefectRecord>,
}

/// Correct every capture, detect and locate defects, and fuse sightings
/// across tiles. Tiles are processed in parallel on the current rayon pool.
pub fn inspect_tiles(
    captures: &[TileImage],
    plan: &ScanPlan,
    hole: &HoleSpec,
    cfg: &OpticsConfig,
    detect: &DetectConfig,
) -> Result<Inspection> {
    let per_tile: Vec<(TileImage, Vec<DefectRecord>)> = captures
        .par_iter()
        .map(|raw| {
            let corrected = correct_tile(raw, hole.radius)?;
            let found = analyze_tile(&corrected, plan, hole, cfg, detect)?;
            Ok((corrected, found))
        })
        .collect::<Result<_>>()?;
    let mut corrected = Vec::with_capacity(per_tile.len());
    let mut detections = Vec::new();
    for (tile, found) in per_tile {
        corrected.push(tile);
        detections.extend(found);
    }
    let records = fuse_detections(&detections, hole, &detect.tolerance);
    Ok(Inspection { corrected, records })
}
