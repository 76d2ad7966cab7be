//! Moving-Rotating-Moving schedule for a bore, and a check that the tiles
//! cover the whole wall.
//!
//! ```text
//! cargo run --example scan_plan [-- <radius mm> <depth mm>]
//! ```

use borescan::scanplan::{coverage_check, plan_with_counts};
use borescan::{plan_scan, EffectiveRegion, HoleSpec};

fn main() -> borescan::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let (r, h) = match args[..] {
        [r, h, ..] => (r, h),
        _ => (2.0, 47.0),
    };
    let hole = HoleSpec::new(r, h)?;
    let region = EffectiveRegion::default();
    let plan = plan_scan(&hole, &region)?;
    println!(
        "r = {r} mm, h = {h} mm: {} columns x {} rows = {} captures, alpha {:.3} deg, step {} mm",
        plan.n_rot,
        plan.n_depth,
        plan.len(),
        plan.alpha,
        plan.step
    );
    if plan.redundant_last_row {
        println!("top row only repeats depth already covered");
    }

    println!("first column:");
    for ev in plan.schedule.iter().take(plan.n_depth.min(4)) {
        println!("  #{:<3} (j={}, k={}) z = {:>5.2} mm, theta = {:>6.2} deg", ev.order, ev.j, ev.k, ev.z, ev.theta);
    }

    let full = coverage_check(&plan, &hole, &region);
    println!(
        "coverage {:.3}%, overlap {}..{} tiles per point",
        full.fraction * 100.0,
        full.min_overlap,
        full.max_overlap
    );
    if plan.n_rot > 1 {
        let short = plan_with_counts(plan.n_rot - 1, plan.n_depth, &hole, &region);
        let rep = coverage_check(&short, &hole, &region);
        println!("one column fewer: coverage {:.3}%", rep.fraction * 100.0);
    }
    Ok(())
}
