//! Write a stack to disk as PGM files plus a JSON manifest, read it back and
//! check that nothing changed.
//!
//! ```text
//! cargo run --example stack_io
//! ```

use borescan::manifest::{RunManifest, MANIFEST_FILE};
use borescan::synth::{build_texture, render_stack, RenderSettings};
use borescan::{pgm, plan_scan, BitDepth, DefectSpec, EffectiveRegion, HoleSpec, OpticsConfig, TruthSet};

fn main() -> borescan::Result<()> {
    let dir = std::env::temp_dir().join(format!("borescan-stack-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;

    let hole = HoleSpec::new(2.0, 1.0)?;
    let optics = OpticsConfig::default();
    let region = EffectiveRegion::default();
    let plan = plan_scan(&hole, &region)?;
    let truth = TruthSet {
        defects: vec![DefectSpec::disc(0.5, 200.0, 0.1)],
        spacings: vec![],
    };
    let texture = build_texture(&hole, &truth.defects, 0.7, optics.p_x, optics.p_y)?;
    let settings = RenderSettings {
        bit_depth: BitDepth::Sixteen,
        noise_sigma: 0.01,
        seed: 3,
    };
    let stack = render_stack(&texture, &plan, &optics, &region, &settings)?;

    let mut manifest = RunManifest::new(hole, optics, region, plan).with_default_images();
    manifest.seed = settings.seed;
    manifest.noise_sigma = settings.noise_sigma;
    manifest.bit_depth = settings.bit_depth;
    manifest.truth = Some(truth);
    for (entry, tile) in manifest.images.iter().zip(&stack) {
        pgm::write(&dir.join(&entry.file), tile)?;
    }
    let path = dir.join(MANIFEST_FILE);
    manifest.write(&path)?;

    let loaded = RunManifest::load(&path)?;
    let images = loaded.load_images(&path)?;
    let same = images.iter().zip(&stack).all(|(a, b)| a.pixels() == b.pixels());
    println!(
        "{} 16-bit tiles in {}: manifest identical {}, pixels identical {}",
        images.len(),
        dir.display(),
        loaded == manifest,
        same
    );
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
