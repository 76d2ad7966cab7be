//! Moving-Rotating-Moving capture schedule.
//!
//! The probe starts at the hole bottom, climbs one column capturing a tile
//! per depth step, rotates by `alpha`, returns to the bottom without
//! capturing and repeats. `z` in the schedule is measured from the bottom.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::HoleSpec;
use crate::unwrap::TileIndex;

/// Physical extent of the central crop used from each capture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EffectiveRegion {
    /// Circumferential extent, mm.
    pub f_x: f64,
    /// Axial extent, mm.
    pub f_y: f64,
}

impl Default for EffectiveRegion {
    fn default() -> Self {
        Self { f_x: 1.5, f_y: 1.5 }
    }
}

impl EffectiveRegion {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_x > 0.0 && self.f_y > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "effective region must be positive, got {} x {}",
                self.f_x, self.f_y
            )));
        }
        Ok(())
    }

    /// Tile size in pixels for the given pixel equivalents (µm/pixel).
    pub fn tile_pixels(&self, p_x: f64, p_y: f64) -> (usize, usize) {
        let cols = (self.f_x * 1e3 / p_x - 1e-9).ceil().max(1.0) as usize;
        let rows = (self.f_y * 1e3 / p_y - 1e-9).ceil().max(1.0) as usize;
        (cols, rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaptureEvent {
    pub order: usize,
    pub j: usize,
    pub k: usize,
    /// Height of the tile centre above the hole bottom, mm.
    pub z: f64,
    /// Rotation from the initial orientation, degrees.
    pub theta: f64,
}

impl CaptureEvent {
    pub fn index(&self) -> TileIndex {
        TileIndex::new(self.j, self.k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPlan {
    pub n_rot: usize,
    pub n_depth: usize,
    /// Rotation per column, degrees.
    pub alpha: f64,
    /// Depth increment, mm.
    pub step: f64,
    /// Set when the top row only re-covers depth already covered below it.
    pub redundant_last_row: bool,
    pub schedule: Vec<CaptureEvent>,
}

impl ScanPlan {
    pub fn len(&self) -> usize {
        self.schedule.len()
    }

    pub fn is_empty(&self) -> bool {
        self.schedule.is_empty()
    }

    pub fn contains(&self, index: TileIndex) -> bool {
        index.j < self.n_depth && index.k < self.n_rot
    }

    pub fn event(&self, index: TileIndex) -> Option<&CaptureEvent> {
        self.schedule.iter().find(|e| e.index() == index)
    }
}

/// Number of captures around the circumference and along the depth.
///
/// The circumferential count is `ceil(2πr / f_x)` so that the tiles close
/// the circle; the depth count is `floor(h / f_y) + 1`.
pub fn shot_counts(hole: &HoleSpec, region: &EffectiveRegion) -> Result<(usize, usize)> {
    hole.validate()?;
    region.validate()?;
    if region.f_x >= std::f64::consts::PI * hole.radius {
        return Err(Error::DegeneratePlan(format!(
            "tile arc {} mm is at least half the circumference of r = {} mm",
            region.f_x, hole.radius
        )));
    }
    let n_rot = (hole.circumference() / region.f_x - 1e-9).ceil() as usize;
    let n_depth = (hole.depth / region.f_y + 1e-9).floor() as usize + 1;
    Ok((n_rot, n_depth))
}

pub fn plan_scan(hole: &HoleSpec, region: &EffectiveRegion) -> Result<ScanPlan> {
    let (n_rot, n_depth) = shot_counts(hole, region)?;
    Ok(plan_with_counts(n_rot, n_depth, hole, region))
}

/// Plan with explicit shot counts, bypassing the closure rules.
pub fn plan_with_counts(
    n_rot: usize,
    n_depth: usize,
    hole: &HoleSpec,
    region: &EffectiveRegion,
) -> ScanPlan {
    let alpha = if n_rot == 0 { 0.0 } else { 360.0 / n_rot as f64 };
    let step = region.f_y;
    let mut schedule = Vec::with_capacity(n_rot * n_depth);
    for k in 0..n_rot {
        for j in 0..n_depth {
            schedule.push(CaptureEvent {
                order: schedule.len(),
                j,
                k,
                z: j as f64 * step,
                theta: k as f64 * alpha,
            });
        }
    }
    let redundant_last_row = n_depth > 1 && (n_depth - 1) as f64 * step >= hole.depth - 1e-9;
    ScanPlan {
        n_rot,
        n_depth,
        alpha,
        step,
        redundant_last_row,
        schedule,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    /// Fraction of grid points inside at least one tile footprint.
    pub fraction: f64,
    pub min_overlap: u32,
    pub max_overlap: u32,
    pub points: usize,
}

impl CoverageReport {
    pub fn is_complete(&self) -> bool {
        self.points > 0 && self.min_overlap >= 1
    }
}

/// Sample the bore wall on a grid of roughly `spacing` mm and count how many
/// tile footprints cover each point.
pub fn coverage_check_with_spacing(
    plan: &ScanPlan,
    hole: &HoleSpec,
    region: &EffectiveRegion,
    spacing: f64,
) -> CoverageReport {
    let circ = hole.circumference();
    let nu = (circ / spacing).ceil().max(1.0) as usize;
    let nz = (hole.depth / spacing).ceil().max(1.0) as usize;
    let du = circ / nu as f64;
    let dz = hole.depth / nz as f64;
    let mut counts = vec![0u32; nu * nz];

    for ev in &plan.schedule {
        let u_c = ev.theta.to_radians() * hole.radius;
        let (u_lo, u_hi) = (u_c - region.f_x / 2.0, u_c + region.f_x / 2.0);
        let (z_lo, z_hi) = (ev.z - region.f_y / 2.0, ev.z + region.f_y / 2.0);

        // point i sits at (i + 0.5) * d
        let first = |lo: f64, d: f64| (lo / d - 0.5).ceil() as i64;
        let last = |hi: f64, d: f64| (hi / d - 0.5).floor() as i64;

        let iz0 = first(z_lo, dz).max(0);
        let iz1 = last(z_hi, dz).min(nz as i64 - 1);
        if iz0 > iz1 {
            continue;
        }
        let iu0 = first(u_lo, du);
        let iu1 = last(u_hi, du);
        // a footprint wider than the circumference still counts once per point
        let span = (iu1 - iu0 + 1).min(nu as i64);
        for iz in iz0..=iz1 {
            let row = &mut counts[iz as usize * nu..(iz as usize + 1) * nu];
            for iu in iu0..iu0 + span {
                row[iu.rem_euclid(nu as i64) as usize] += 1;
            }
        }
    }

    let covered = counts.iter().filter(|&&c| c > 0).count();
    CoverageReport {
        fraction: covered as f64 / counts.len() as f64,
        min_overlap: counts.iter().copied().min().unwrap_or(0),
        max_overlap: counts.iter().copied().max().unwrap_or(0),
        points: counts.len(),
    }
}

/// Coverage on a 10 µm grid.
pub fn coverage_check(plan: &ScanPlan, hole: &HoleSpec, region: &EffectiveRegion) -> CoverageReport {
    coverage_check_with_spacing(plan, hole, region, 0.01)
}
