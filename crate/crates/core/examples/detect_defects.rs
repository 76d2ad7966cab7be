//! Segmentation and blob measurement on one corrected tile holding a disc,
//! a close pair and a line.
//!
//! ```text
//! cargo run --example detect_defects
//! ```

use borescan::detect::{
    binarize, blob_metrics, centroid_distance, connected_components, line_width, Axis, Polarity,
    Threshold,
};
use borescan::synth::{build_texture, render_tile};
use borescan::unwrap::correct_tile;
use borescan::{plan_scan, BitDepth, DefectSpec, EffectiveRegion, HoleSpec, OpticsConfig, TileIndex};

fn main() -> borescan::Result<()> {
    let hole = HoleSpec::new(2.0, 3.0)?;
    let optics = OpticsConfig::default();
    let region = EffectiveRegion::default();
    let plan = plan_scan(&hole, &region)?;
    // tile (1, 2) is centred 1.5 mm from the nozzle at 80 degrees
    let beta = |arc_mm: f64| 80.0 + (arc_mm / hole.radius).to_degrees();
    let defects = [
        DefectSpec::disc(1.2, beta(-0.4), 0.2),
        DefectSpec::disc(1.7, beta(-0.2), 0.1),
        DefectSpec::disc(1.7, beta(0.2), 0.1),
        DefectSpec::line(1.5, beta(0.5), 0.3, 1.0),
    ];
    let texture = build_texture(&hole, &defects, 0.7, optics.p_x, optics.p_y)?;
    let ev = plan.event(TileIndex::new(1, 2)).expect("tile in plan");
    let raw = render_tile(&texture, ev, &optics, &region, BitDepth::Eight)?;
    let tile = correct_tile(&raw, hole.radius)?;

    let bin = binarize(&tile, Threshold::Otsu, Polarity::Dark)?;
    println!("otsu level {:.1}, class means {:?}", bin.level, bin.class_means);
    let blobs = connected_components(&bin.mask, 9);
    let records: Vec<_> = blobs.iter().map(|b| blob_metrics(b, tile.p_x, tile.p_y)).collect();
    for r in &records {
        println!(
            "blob {}: {} px, centroid ({:.1}, {:.1}), diameter {:.4} mm, elongation {:.2}",
            r.label, r.pixel_area, r.centroid.0, r.centroid.1, r.equivalent_diameter, r.elongation
        );
    }
    let pair: Vec<_> = records.iter().filter(|r| (r.equivalent_diameter - 0.1).abs() < 0.02).collect();
    if let [a, b] = pair[..] {
        println!("pair spacing {:.4} mm", centroid_distance(a, b, tile.p_x, tile.p_y)?);
    }

    // the line is the only blob in the right third of the tile
    let mut right = bin.mask.clone();
    for y in 0..right.height() {
        for x in 0..right.width() * 2 / 3 {
            right.set(x, y, false);
        }
    }
    let lw = line_width(&right, Axis::Vertical, 64, tile.p_x)?;
    println!(
        "line width {:.4} mm over {} segments",
        lw.mean_width, lw.segment_count
    );
    Ok(())
}
