//! Cylindrical projection and its correction on a single tile.
//!
//! A grid of equally spaced vertical stripes on the bore wall is projected
//! onto the flat sensor, where stripes crowd towards the edges, and then
//! remapped back to uniform arc length.
//!
//! ```text
//! cargo run --example unwrap_tile [-- <out-dir>]
//! ```

use std::path::PathBuf;

use borescan::unwrap::{arc_to_pixel, build_remap, correct_tile, forward_project, pixel_to_arc};
use borescan::{pgm, BitDepth, TileImage};

/// Column positions where the row crosses mid-grey going down.
fn falling_edges(img: &TileImage, y: usize) -> Vec<usize> {
    let row = img.row(y);
    (1..row.len()).filter(|&x| row[x - 1] >= 128 && row[x] < 128).collect()
}

fn main() -> borescan::Result<()> {
    let (w, h, r, p) = (695, 64, 2.0, 2.16);
    let mut stripes = TileImage::filled(w, h, BitDepth::Eight, 200, p, p)?;
    for y in 0..h {
        for x in 0..w {
            if (x / 25) % 2 == 1 {
                stripes.set(x, y, 60);
            }
        }
    }

    let table = build_remap(w, r, p)?;
    println!("edge column {} reads source column {:.3}", w - 1, table.source_column(w - 1));
    println!("pixel 200 from centre lies at arc {:.3} px", pixel_to_arc(200.0, r, p)?);
    println!("arc 300 px from centre images at {:.3} px", arc_to_pixel(300.0, r, p)?);

    let seen = forward_project(&stripes, r)?;
    let back = correct_tile(&seen, r)?;
    let gaps = |e: &[usize]| e.windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>();
    println!("stripe spacing on the wall   {:?}", gaps(&falling_edges(&stripes, h / 2)));
    println!("stripe spacing on the sensor {:?}", gaps(&falling_edges(&seen, h / 2)));
    println!("stripe spacing corrected     {:?}", gaps(&falling_edges(&back, h / 2)));

    if let Some(dir) = std::env::args().nth(1).map(PathBuf::from) {
        std::fs::create_dir_all(&dir)?;
        pgm::write(&dir.join("wall.pgm"), &stripes)?;
        pgm::write(&dir.join("sensor.pgm"), &seen)?;
        pgm::write(&dir.join("corrected.pgm"), &back)?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}
