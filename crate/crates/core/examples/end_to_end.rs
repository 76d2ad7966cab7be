//! Full pipeline on the 4 mm x 47 mm bore: render 288 captures, then
//! correct, detect, locate, fuse and compare against truth.
//!
//! ```text
//! cargo run --release --example end_to_end [-- <out-dir>]
//! ```
//!
//! With an output directory the report and the panorama are written there.

use std::path::PathBuf;
use std::time::Instant;

use borescan::locate::stitch_panorama;
use borescan::report::DefectReport;
use borescan::synth::{build_texture, render_stack, RenderSettings};
use borescan::{inspect_tiles, pgm, plan_scan, DefectSpec, DetectConfig, EffectiveRegion, HoleSpec, OpticsConfig, TruthSet};

fn main() -> borescan::Result<()> {
    let out_dir = std::env::args().nth(1).map(PathBuf::from);

    let hole = HoleSpec::new(2.0, 47.0)?;
    let optics = OpticsConfig::default();
    let region = EffectiveRegion::default();
    let plan = plan_scan(&hole, &region)?;

    let truth = TruthSet {
        defects: vec![
            DefectSpec::disc(5.2, 12.0, 0.1),
            DefectSpec::disc(11.0, 60.0, 0.2),
            DefectSpec::disc(17.3, 20.0, 0.2), // column seam
            DefectSpec::disc(24.0, 150.0, 0.1),
            DefectSpec::disc(24.4, 150.0, 0.1),
            DefectSpec::disc(35.75, 359.5, 0.2), // row boundary, across beta = 0
            DefectSpec::line(40.0, 250.0, 0.3, 3.0),
        ],
        spacings: vec![[3, 4]],
    };
    let texture = build_texture(&hole, &truth.defects, 0.7, optics.p_x, optics.p_y)?;
    let settings = RenderSettings {
        noise_sigma: 5.0 / 255.0,
        seed: 2024,
        ..Default::default()
    };

    let t0 = Instant::now();
    let stack = render_stack(&texture, &plan, &optics, &region, &settings)?;
    let t_render = t0.elapsed();

    let t1 = Instant::now();
    let result = inspect_tiles(&stack, &plan, &hole, &optics, &DetectConfig::default())?;
    let report = DefectReport::new(result.records).with_truth(&truth, &hole);
    let t_inspect = t1.elapsed();

    println!(
        "{} captures of {}x{} px: render {:.1} s, inspect {:.1} s",
        stack.len(),
        stack[0].width(),
        stack[0].height(),
        t_render.as_secs_f64(),
        t_inspect.as_secs_f64()
    );
    println!("{:>3} {:<5} {:>8} {:>8} {:>7} {:>6}", "id", "kind", "z mm", "beta", "size", "tiles");
    for r in &report.records {
        println!(
            "{:>3} {:<5} {:>8.3} {:>8.3} {:>7.3} {:>6}",
            r.id,
            r.kind.as_str(),
            r.z,
            r.beta,
            r.size,
            r.sources.len()
        );
    }
    if let Some(cmp) = &report.comparison {
        println!();
        for f in &cmp.features {
            let measured = f.measured.map(|m| format!("{m:.3}")).unwrap_or_else(|| "missed".into());
            println!("{:<16} truth {:.3} measured {}", f.feature, f.truth, measured);
        }
        println!("unmatched records: {}", cmp.unmatched_records.len());
    }

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(&dir)?;
        report.write_json(&dir.join("report.json"))?;
        report.write_csv(std::fs::File::create(dir.join("report.csv"))?)?;
        let pano = stitch_panorama(&result.corrected, &plan, &hole, &optics)?;
        pgm::write(&dir.join("panorama.pgm"), &pano.image)?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}
