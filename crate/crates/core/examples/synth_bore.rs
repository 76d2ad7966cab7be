//! Synthetic bore with prefabricated defects, and the raw captures of the
//! tiles that see them.
//!
//! ```text
//! cargo run --example synth_bore [-- <out-dir>]
//! ```

use std::path::PathBuf;

use borescan::manifest::{tile_file_name, RunManifest};
use borescan::synth::{build_texture, render_stack, RenderSettings};
use borescan::{pgm, plan_scan, DefectSpec, EffectiveRegion, HoleSpec, OpticsConfig, TruthSet};

fn main() -> borescan::Result<()> {
    let hole = HoleSpec::new(2.0, 6.0)?;
    let optics = OpticsConfig::default();
    let region = EffectiveRegion::default();
    let plan = plan_scan(&hole, &region)?;

    let truth = TruthSet {
        defects: vec![
            DefectSpec::disc(1.5, 0.0, 0.2),
            DefectSpec::disc(3.0, 80.0, 0.1),
            DefectSpec::line(4.5, 160.0, 0.3, 1.0),
        ],
        spacings: vec![],
    };
    let texture = build_texture(&hole, &truth.defects, 0.7, optics.p_x, optics.p_y)?;
    println!(
        "texture {} x {} texels at {:.5} x {:.3} µm",
        texture.width(),
        texture.height(),
        texture.pitch_u,
        texture.pitch_z
    );
    for (i, d) in truth.defects.iter().enumerate() {
        println!("  defect {i}: {:?} {} mm at z = {} mm, beta = {} deg", d.kind, d.size, d.z, d.beta);
    }

    let settings = RenderSettings {
        noise_sigma: 5.0 / 255.0,
        seed: 1,
        ..Default::default()
    };
    let stack = render_stack(&texture, &plan, &optics, &region, &settings)?;
    let dark: Vec<_> = stack
        .iter()
        .filter(|t| t.pixels().iter().any(|&v| v < 128))
        .map(|t| t.tile_index)
        .collect();
    println!("{} captures, defects visible in {:?}", stack.len(), dark);

    if let Some(dir) = std::env::args().nth(1).map(PathBuf::from) {
        std::fs::create_dir_all(&dir)?;
        for tile in &stack {
            pgm::write(&dir.join(tile_file_name(tile.tile_index)), tile)?;
        }
        let mut manifest = RunManifest::new(hole, optics, region, plan).with_default_images();
        manifest.seed = settings.seed;
        manifest.noise_sigma = settings.noise_sigma;
        manifest.truth = Some(truth);
        manifest.write(&dir.join(borescan::manifest::MANIFEST_FILE))?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}
