//! Repeated noisy measurements of a test piece, summarised like a
//! calibration table: truth, mean, standard deviation per feature.
//!
//! ```text
//! cargo run --release --example table1_trials [-- <trials>]
//! ```

use borescan::report::{compare_trials, trial_table};
use borescan::synth::{build_texture, render_stack, RenderSettings};
use borescan::{inspect_tiles, plan_scan, DefectSpec, DetectConfig, EffectiveRegion, HoleSpec, OpticsConfig, TruthSet};

fn main() -> borescan::Result<()> {
    let trials: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(6);
    let hole = HoleSpec::new(2.0, 4.5)?;
    let optics = OpticsConfig::default();
    let region = EffectiveRegion::default();
    let plan = plan_scan(&hole, &region)?;
    let half = (0.2f64 / hole.radius).to_degrees();
    let truth = TruthSet {
        defects: vec![
            DefectSpec::disc(3.0, 40.0, 0.1),
            DefectSpec::disc(3.0, 120.0, 0.2),
            DefectSpec::disc(1.5, 240.0 - half, 0.1),
            DefectSpec::disc(1.5, 240.0 + half, 0.1),
            DefectSpec::line(2.25, 320.0, 0.3, 2.6),
        ],
        spacings: vec![[2, 3]],
    };
    let texture = build_texture(&hole, &truth.defects, 0.7, optics.p_x, optics.p_y)?;

    let mut runs = Vec::with_capacity(trials);
    for seed in 0..trials as u64 {
        let settings = RenderSettings {
            noise_sigma: 5.0 / 255.0,
            seed,
            ..Default::default()
        };
        let stack = render_stack(&texture, &plan, &optics, &region, &settings)?;
        let result = inspect_tiles(&stack, &plan, &hole, &optics, &DetectConfig::default())?;
        runs.push(result.records);
        eprint!(".");
    }
    eprintln!();
    let rows = compare_trials(&runs, &truth, &hole)?;
    print!("{}", trial_table(&rows));
    Ok(())
}
