//! Tile detections to bore-wall coordinates, cross-tile fusion, and the
//! unwrapped panorama.
//!
//! `z` is the distance from the nozzle, `beta` the angle from the initial
//! rotation in degrees, arc positions are `beta * r` in mm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{HoleSpec, OpticsConfig};
use crate::scanplan::ScanPlan;
use crate::unwrap::{BitDepth, TileImage, TileIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefectKind {
    Disc,
    Line,
}

impl DefectKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DefectKind::Disc => "disc",
            DefectKind::Line => "line",
        }
    }
}

/// Centroid of a defect as seen in one corrected tile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceObservation {
    pub tile: TileIndex,
    /// (m, n) in corrected-tile pixels.
    pub centroid: (f64, f64),
}

/// Axis-aligned extent on the unwrapped wall. The angular interval is kept
/// unwrapped around the defect, so it may leave `[0, 360)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub z_min: f64,
    pub z_max: f64,
    /// Degrees.
    pub beta_min: f64,
    /// Degrees.
    pub beta_max: f64,
}

impl Footprint {
    fn shifted(&self, turns: f64) -> Self {
        Self {
            beta_min: self.beta_min + 360.0 * turns,
            beta_max: self.beta_max + 360.0 * turns,
            ..*self
        }
    }

    /// Overlap test with margins `tol_z` (mm) and `tol_beta` (degrees),
    /// trying whole-turn shifts.
    pub fn touches(&self, other: &Footprint, tol_z: f64, tol_beta: f64) -> bool {
        if self.z_max + tol_z < other.z_min || other.z_max + tol_z < self.z_min {
            return false;
        }
        (-1..=1).any(|t| {
            let o = other.shifted(t as f64);
            !(self.beta_max + tol_beta < o.beta_min || o.beta_max + tol_beta < self.beta_min)
        })
    }

    /// Union, with `other` moved by whole turns next to `self`.
    fn union(&self, other: &Footprint) -> Self {
        let mid = (self.beta_min + self.beta_max) / 2.0;
        let omid = (other.beta_min + other.beta_max) / 2.0;
        let o = other.shifted(((mid - omid) / 360.0).round());
        Self {
            z_min: self.z_min.min(o.z_min),
            z_max: self.z_max.max(o.z_max),
            beta_min: self.beta_min.min(o.beta_min),
            beta_max: self.beta_max.max(o.beta_max),
        }
    }
}

/// One located defect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectRecord {
    pub id: usize,
    pub kind: DefectKind,
    /// Distance to the nozzle, mm.
    pub z: f64,
    /// Height above the hole bottom, mm (`depth - z`).
    pub z_from_bottom: f64,
    /// Degrees in [0, 360).
    pub beta: f64,
    /// Equivalent-circle diameter (discs) or mean width (lines), mm.
    pub size: f64,
    /// mm². For a border-cut fragment, only the part inside the tile's
    /// share of the wall.
    pub area: f64,
    pub pixel_area: usize,
    /// Set when no tile saw the whole defect.
    pub truncated: bool,
    pub sources: Vec<SourceObservation>,
    pub footprint: Footprint,
    /// Per-segment widths for lines, mm.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub segment_widths: Vec<f64>,
}

pub fn normalize_degrees(beta: f64) -> f64 {
    let b = beta.rem_euclid(360.0);
    if b >= 360.0 {
        0.0
    } else {
        b
    }
}

/// Signed shortest angular difference `b - a`, in (-180, 180].
pub fn angle_delta(a: f64, b: f64) -> f64 {
    let d = (b - a).rem_euclid(360.0);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

/// Map a corrected-tile pixel to (distance to nozzle, unwrapped arc) in mm.
pub fn tile_point(
    tile: TileIndex,
    point: (f64, f64),
    tile_size: (usize, usize),
    plan: &ScanPlan,
    hole: &HoleSpec,
    cfg: &OpticsConfig,
) -> Result<(f64, f64)> {
    if !plan.contains(tile) {
        return Err(Error::Index { j: tile.j, k: tile.k });
    }
    let m_c = (tile_size.0 as f64 - 1.0) / 2.0;
    let n_c = (tile_size.1 as f64 - 1.0) / 2.0;
    let z = hole.depth - (tile.j as f64 * plan.step + (point.1 - n_c) * cfg.p_y_mm());
    let arc = (tile.k as f64 * plan.alpha).to_radians() * hole.radius + (point.0 - m_c) * cfg.p_x_mm();
    Ok((z, arc))
}

/// Cylinder coordinates `(z, beta)` of pixel `(m, n)` in corrected tile `tile`.
pub fn defect_location(
    tile: TileIndex,
    centroid: (f64, f64),
    tile_size: (usize, usize),
    plan: &ScanPlan,
    hole: &HoleSpec,
    cfg: &OpticsConfig,
) -> Result<(f64, f64)> {
    let (z, arc) = tile_point(tile, centroid, tile_size, plan, hole, cfg)?;
    Ok((z, normalize_degrees((arc / hole.radius).to_degrees())))
}

/// Physical area in mm² of `pixel_area` pixels at `p_x` x `p_y` µm/pixel.
pub fn defect_area(pixel_area: usize, p_x: f64, p_y: f64) -> f64 {
    pixel_area as f64 * p_x * p_y * 1e-6
}

fn circular_mean(records: &[&DefectRecord]) -> (f64, f64) {
    let total: f64 = records.iter().map(|r| r.area).sum();
    let uniform = !(total > 0.0);
    let reference = records[0].beta;
    let mut z = 0.0;
    let mut d = 0.0;
    for r in records {
        let w = if uniform {
            1.0 / records.len() as f64
        } else {
            r.area / total
        };
        z += w * r.z;
        d += w * angle_delta(reference, r.beta);
    }
    (z, normalize_degrees(reference + d))
}

/// Combine duplicate sightings of one defect: area-weighted position, the
/// largest area estimate, all sources.
fn combine_duplicates(group: &[&DefectRecord]) -> DefectRecord {
    let (z, beta) = circular_mean(group);
    let best = group
        .iter()
        .max_by(|a, b| a.area.total_cmp(&b.area))
        .expect("non-empty group");
    let mut footprint = group[0].footprint;
    for r in &group[1..] {
        footprint = footprint.union(&r.footprint);
    }
    DefectRecord {
        id: best.id,
        kind: best.kind,
        z,
        z_from_bottom: best.z_from_bottom + (best.z - z),
        beta,
        size: best.size,
        area: best.area,
        pixel_area: best.pixel_area,
        truncated: best.truncated,
        sources: group.iter().flat_map(|r| r.sources.iter().copied()).collect(),
        footprint,
        segment_widths: group.iter().flat_map(|r| r.segment_widths.iter().copied()).collect(),
    }
}

struct DisjointSet(Vec<usize>);

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }

    fn groups(&mut self) -> Vec<Vec<usize>> {
        let n = self.0.len();
        let mut out: Vec<Vec<usize>> = Vec::new();
        let mut slot = vec![usize::MAX; n];
        for i in 0..n {
            let r = self.find(i);
            if slot[r] == usize::MAX {
                slot[r] = out.len();
                out.push(Vec::new());
            }
            out[slot[r]].push(i);
        }
        out
    }
}

fn merge_pass(records: &[DefectRecord], tol_z: f64, tol_beta: f64) -> Vec<DefectRecord> {
    let mut sets = DisjointSet::new(records.len());
    for i in 0..records.len() {
        for j in i + 1..records.len() {
            let (a, b) = (&records[i], &records[j]);
            if (a.z - b.z).abs() <= tol_z && angle_delta(a.beta, b.beta).abs() <= tol_beta {
                sets.union(i, j);
            }
        }
    }
    sets.groups()
        .into_iter()
        .map(|g| {
            let members: Vec<&DefectRecord> = g.iter().map(|&i| &records[i]).collect();
            if members.len() == 1 {
                members[0].clone()
            } else {
                combine_duplicates(&members)
            }
        })
        .collect()
}

/// Cluster records whose centres lie within `tol_z` (mm) and `tol_beta`
/// (degrees, measured around the circle) and collapse each cluster.
///
/// Clustering is transitive and repeated until nothing merges, so the
/// result is a fixed point.
pub fn merge_duplicates(records: &[DefectRecord], tol_z: f64, tol_beta: f64) -> Vec<DefectRecord> {
    let mut current = records.to_vec();
    loop {
        let next = merge_pass(&current, tol_z, tol_beta);
        if next.len() == current.len() {
            return next;
        }
        current = next;
    }
}

/// Merge fragments of one defect cut by tile borders into a single record.
fn combine_fragments(group: &[&DefectRecord], hole: &HoleSpec) -> DefectRecord {
    let (z, beta) = circular_mean(group);
    let pixel_area: usize = group.iter().map(|r| r.pixel_area).sum();
    let area: f64 = group.iter().map(|r| r.area).sum();
    let is_line = group.iter().any(|r| r.kind == DefectKind::Line);
    let segment_widths: Vec<f64> = group
        .iter()
        .filter(|r| r.kind == DefectKind::Line)
        .flat_map(|r| r.segment_widths.iter().copied())
        .collect();
    let (kind, size, truncated) = if is_line {
        let mean = if segment_widths.is_empty() {
            0.0
        } else {
            segment_widths.iter().sum::<f64>() / segment_widths.len() as f64
        };
        (DefectKind::Line, mean, false)
    } else {
        (
            DefectKind::Disc,
            2.0 * (area / std::f64::consts::PI).sqrt(),
            group.iter().all(|r| r.truncated),
        )
    };
    let mut footprint = group[0].footprint;
    for r in &group[1..] {
        footprint = footprint.union(&r.footprint);
    }
    DefectRecord {
        id: 0,
        kind,
        z,
        z_from_bottom: hole.depth - z,
        beta,
        size,
        area,
        pixel_area,
        truncated,
        sources: group.iter().flat_map(|r| r.sources.iter().copied()).collect(),
        footprint,
        segment_widths,
    }
}

/// Tolerances for cross-tile fusion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionTolerance {
    /// Axial duplicate tolerance, mm.
    pub z: f64,
    /// Circumferential duplicate tolerance as arc length, mm.
    pub arc: f64,
    /// Gap allowed between footprints of fragments of one defect, mm.
    pub contact: f64,
}

impl Default for FusionTolerance {
    fn default() -> Self {
        Self {
            z: 0.05,
            arc: 0.05,
            contact: 0.005,
        }
    }
}

/// Reduce per-tile detections to one record per physical defect.
///
/// Discs seen whole are merged by centre distance. Border-cut fragments
/// lying on a whole sighting are dropped; the rest, together with line
/// pieces, are joined by footprint contact. Output ids follow (z, beta).
pub fn fuse_detections(
    detections: &[DefectRecord],
    hole: &HoleSpec,
    tol: &FusionTolerance,
) -> Vec<DefectRecord> {
    let contact_beta = (tol.contact / hole.radius).to_degrees();
    let (whole, pieces): (Vec<&DefectRecord>, Vec<&DefectRecord>) = detections
        .iter()
        .partition(|r| r.kind == DefectKind::Disc && !r.truncated);

    let pieces: Vec<&DefectRecord> = pieces
        .into_iter()
        .filter(|p| {
            p.kind == DefectKind::Line
                || !whole.iter().any(|w| w.footprint.touches(&p.footprint, tol.contact, contact_beta))
        })
        .collect();

    let mut sets = DisjointSet::new(pieces.len());
    for i in 0..pieces.len() {
        for j in i + 1..pieces.len() {
            if pieces[i].footprint.touches(&pieces[j].footprint, tol.contact, contact_beta) {
                sets.union(i, j);
            }
        }
    }
    let mut out: Vec<DefectRecord> = sets
        .groups()
        .into_iter()
        .map(|g| {
            let members: Vec<&DefectRecord> = g.iter().map(|&i| pieces[i]).collect();
            combine_fragments(&members, hole)
        })
        .collect();

    let tol_beta = (tol.arc / hole.radius).to_degrees();
    let whole: Vec<DefectRecord> = whole.into_iter().cloned().collect();
    out.extend(merge_duplicates(&whole, tol.z, tol_beta));

    for r in &mut out {
        r.z = r.z.clamp(0.0, hole.depth);
        r.z_from_bottom = hole.depth - r.z;
    }
    out.sort_by(|a, b| a.z.total_cmp(&b.z).then(a.beta.total_cmp(&b.beta)));
    for (i, r) in out.iter_mut().enumerate() {
        r.id = i;
    }
    out
}

/// Overlap bookkeeping for one tile placed in the panorama.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeamNote {
    pub tile: TileIndex,
    /// Panorama pixels this tile overwrote.
    pub overwritten: usize,
}

#[derive(Debug, Clone)]
pub struct Panorama {
    /// Rows run from the nozzle (row 0) to the bottom, columns from beta = 0.
    pub image: TileImage,
    pub seams: Vec<SeamNote>,
    pub missing: Vec<TileIndex>,
    /// Panorama pixels no tile covered.
    pub gap_pixels: usize,
}

/// Place corrected tiles on the unwrapped wall, later tiles overwriting
/// earlier ones.
pub fn stitch_panorama(
    tiles: &[TileImage],
    plan: &ScanPlan,
    hole: &HoleSpec,
    cfg: &OpticsConfig,
) -> Result<Panorama> {
    let p_x = cfg.p_x_mm();
    let p_y = cfg.p_y_mm();
    let width = (hole.circumference() / p_x).round().max(1.0) as usize;
    let height = (hole.depth / p_y).round() as usize + 1;
    let bit_depth = tiles.first().map(|t| t.bit_depth()).unwrap_or(BitDepth::Eight);
    let mut pixels = vec![0u16; width * height];
    let mut written = vec![false; width * height];
    let mut seams = Vec::new();
    let mut missing = Vec::new();

    for ev in &plan.schedule {
        let Some(tile) = tiles.iter().find(|t| t.tile_index == ev.index()) else {
            missing.push(ev.index());
            continue;
        };
        let h = tile.height();
        let (m_c, n_c) = tile.center();
        let arc0 = (ev.theta.to_radians() * hole.radius) / p_x - m_c;
        let col0 = arc0.round() as i64;
        // tile row n lies at nozzle distance depth - (z + (n - n_c) p_y)
        let row0 = ((hole.depth - ev.z) / p_y + n_c).round() as i64;
        let mut overwritten = 0usize;
        for n in 0..h {
            let row = row0 - n as i64;
            if row < 0 || row >= height as i64 {
                continue;
            }
            let src = tile.row(n);
            let base = row as usize * width;
            for (m, &v) in src.iter().enumerate() {
                if tile.invalid_columns.contains(&m) {
                    continue;
                }
                let col = (col0 + m as i64).rem_euclid(width as i64) as usize;
                let i = base + col;
                if written[i] {
                    overwritten += 1;
                }
                written[i] = true;
                pixels[i] = v;
            }
        }
        seams.push(SeamNote {
            tile: ev.index(),
            overwritten,
        });
    }

    let gap_pixels = written.iter().filter(|&&w| !w).count();
    let image = TileImage::new(width, height, bit_depth, pixels, cfg.p_x, cfg.p_y)?;
    Ok(Panorama {
        image,
        seams,
        missing,
        gap_pixels,
    })
}
