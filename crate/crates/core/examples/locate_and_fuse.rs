//! A disc on the seam between two columns is seen cut in both tiles. Each
//! fragment is located on the wall, then fusion rebuilds one defect.
//!
//! ```text
//! cargo run --example locate_and_fuse
//! ```

use borescan::inspect::analyze_tile;
use borescan::locate::{fuse_detections, FusionTolerance};
use borescan::synth::{build_texture, render_tile};
use borescan::unwrap::correct_tile;
use borescan::{plan_scan, BitDepth, DefectSpec, DetectConfig, EffectiveRegion, HoleSpec, OpticsConfig};

fn main() -> borescan::Result<()> {
    let hole = HoleSpec::new(2.0, 3.0)?;
    let optics = OpticsConfig::default();
    let region = EffectiveRegion::default();
    let plan = plan_scan(&hole, &region)?;
    // halfway between columns 0 and 1, and on the boundary between rows 0 and 1
    let truth = DefectSpec::disc(2.25, 20.0, 0.2);
    let texture = build_texture(&hole, &[truth], 0.7, optics.p_x, optics.p_y)?;

    let detect = DetectConfig::default();
    let mut sightings = Vec::new();
    for ev in &plan.schedule {
        let raw = render_tile(&texture, ev, &optics, &region, BitDepth::Eight)?;
        let tile = correct_tile(&raw, hole.radius)?.with_index(ev.index());
        sightings.extend(analyze_tile(&tile, &plan, &hole, &optics, &detect)?);
    }
    println!("{} sightings:", sightings.len());
    for s in &sightings {
        let t = s.sources[0].tile;
        println!(
            "  tile ({}, {}): z {:.4} mm, beta {:.3} deg, area {:.5} mm2, cut {}",
            t.j, t.k, s.z, s.beta, s.area, s.truncated
        );
    }

    let fused = fuse_detections(&sightings, &hole, &FusionTolerance::default());
    for r in &fused {
        println!(
            "defect {}: z {:.4} mm ({:.4} from bottom), beta {:.3} deg, diameter {:.4} mm from {} tiles",
            r.id,
            r.z,
            r.z_from_bottom,
            r.beta,
            r.size,
            r.sources.len()
        );
    }
    println!("truth: z {} mm, beta {} deg, diameter {} mm", truth.z, truth.beta, truth.size);
    Ok(())
}
