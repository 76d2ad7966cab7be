//! Imaging-chain error budget for two bore sizes: object extent, arc
//! expansion, projection error and the field-of-view error caused by a
//! tilted or shifted reflecting plane.
//!
//! ```text
//! cargo run --example error_budget
//! ```

use borescan::geometry::{
    arc_expansion, deviation_total, fov_bounds, fov_half_angle, image_plane_distance,
    object_extent, projection_error_ratio, relative_fov_error,
};
use borescan::{DeviationSpec, OpticsConfig};

fn main() -> borescan::Result<()> {
    let cfg = OpticsConfig::default();
    println!(
        "half field angle {:.4} deg, image plane at {:.2} mm",
        fov_half_angle(&cfg)?.to_degrees(),
        image_plane_distance(&cfg)?
    );

    // 45 mm lever, 0.5 deg tilt, 0.2 mm shift
    let dev = DeviationSpec::from_degrees(45.0, 0.5, 0.2)?;
    let p = deviation_total(&dev);
    println!("reflecting-plane displacement {p:.4} mm\n");

    println!(
        "{:>6} {:>8} {:>8} {:>8} {:>17} {:>8}",
        "r mm", "d_m", "d_s", "proj %", "fov range", "fov %"
    );
    for (r, l_d) in [(2.0, 94.0), (3.0, 93.0)] {
        let cfg = OpticsConfig { l_d, ..cfg };
        let d_m = object_extent(&cfg, r)?;
        let d_s = arc_expansion(r, d_m)?;
        let ratio = projection_error_ratio(r, d_m)?;
        let (lo, hi) = fov_bounds(d_m, cfg.d_p, r, p)?;
        let eps = relative_fov_error(d_m, cfg.d_p, r, p)?;
        println!(
            "{r:>6.1} {d_m:>8.4} {d_s:>8.4} {:>8.3} {lo:>8.4}..{hi:<7.4} {:>8.3}",
            ratio * 100.0,
            eps * 100.0
        );
    }
    Ok(())
}
