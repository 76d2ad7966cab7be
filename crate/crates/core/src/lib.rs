//! Inner-surface inspection of fine holes.
//!
//! A side-looking probe climbs the bore in columns, capturing small tiles of
//! the cylindrical wall. This crate plans that scan, removes the
//! cylindrical projection from each tile, finds dark defects, locates them
//! in `(z, beta)` and measures them in millimetres. A synthetic bore renderer
//! provides ground truth for all of it.
//!
//! ```
//! use borescan::{geometry::HoleSpec, scanplan::{plan_scan, EffectiveRegion}};
//!
//! let hole = HoleSpec::new(2.0, 47.0).unwrap();
//! let plan = plan_scan(&hole, &EffectiveRegion::default()).unwrap();
//! assert_eq!((plan.n_rot, plan.n_depth), (9, 32));
//! ```

pub mod cli;
pub mod config;
pub mod detect;
pub mod error;
pub mod geometry;
pub mod inspect;
pub mod locate;
pub mod manifest;
pub mod pgm;
pub mod report;
pub mod scanplan;
pub mod synth;
pub mod unwrap;

pub use error::{Error, Result};
pub use geometry::{DeviationSpec, HoleSpec, OpticsConfig};
pub use inspect::{inspect_tiles, DetectConfig, Inspection, ThresholdMode};
pub use locate::{DefectKind, DefectRecord};
pub use scanplan::{plan_scan, CaptureEvent, EffectiveRegion, ScanPlan};
pub use synth::{DefectSpec, SurfaceTexture, TruthSet};
pub use unwrap::{BitDepth, TileImage, TileIndex};
