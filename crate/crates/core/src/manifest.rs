//! Run manifest: everything needed to reinterpret an image stack.
//!
//! Stored as pretty-printed JSON next to the images. Image paths are
//! relative to the manifest's directory.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{HoleSpec, OpticsConfig};
use crate::pgm;
use crate::scanplan::{EffectiveRegion, ScanPlan};
use crate::synth::TruthSet;
use crate::unwrap::{BitDepth, TileImage, TileIndex};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub j: usize,
    pub k: usize,
    pub file: String,
}

impl ImageEntry {
    pub fn index(&self) -> TileIndex {
        TileIndex::new(self.j, self.k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub seed: u64,
    pub hole: HoleSpec,
    pub optics: OpticsConfig,
    pub region: EffectiveRegion,
    pub plan: ScanPlan,
    pub bit_depth: BitDepth,
    /// Fraction of full scale.
    pub noise_sigma: f64,
    #[serde(default)]
    pub images: Vec<ImageEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<TruthSet>,
}

/// Conventional file name for tile `(j, k)`.
pub fn tile_file_name(index: TileIndex) -> String {
    format!("tile_j{:03}_k{:03}.pgm", index.j, index.k)
}

impl RunManifest {
    pub fn new(
        hole: HoleSpec,
        optics: OpticsConfig,
        region: EffectiveRegion,
        plan: ScanPlan,
    ) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: 0,
            hole,
            optics,
            region,
            plan,
            bit_depth: BitDepth::Eight,
            noise_sigma: 0.0,
            images: Vec::new(),
            truth: None,
        }
    }

    /// One entry per plan event, named by [`tile_file_name`].
    pub fn with_default_images(mut self) -> Self {
        self.images = self
            .plan
            .schedule
            .iter()
            .map(|ev| ImageEntry {
                j: ev.j,
                k: ev.k,
                file: tile_file_name(ev.index()),
            })
            .collect();
        self
    }

    /// Check that the image list maps one-to-one onto the plan. An empty
    /// list is allowed for plan-only manifests.
    pub fn validate(&self) -> Result<()> {
        if self.images.is_empty() {
            return Ok(());
        }
        let mut seen = HashSet::new();
        for entry in &self.images {
            if !self.plan.contains(entry.index()) {
                return Err(Error::Index { j: entry.j, k: entry.k });
            }
            if !seen.insert(entry.index()) {
                return Err(Error::Parse(format!(
                    "tile (j={}, k={}) listed twice",
                    entry.j, entry.k
                )));
            }
        }
        if let Some(ev) = self.plan.schedule.iter().find(|e| !seen.contains(&e.index())) {
            return Err(Error::Parse(format!(
                "no image for tile (j={}, k={})",
                ev.j, ev.k
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    /// Read and check that every referenced image exists.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let m = Self::from_json(&text)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let dir = base_dir(path);
        for entry in &m.images {
            let file = dir.join(&entry.file);
            if !file.is_file() {
                return Err(Error::Image {
                    path: file.display().to_string(),
                    reason: "missing".into(),
                });
            }
        }
        Ok(m)
    }

    /// Load every image in schedule order, tagged with its index and pitch.
    pub fn load_images(&self, manifest_path: &Path) -> Result<Vec<TileImage>> {
        let dir = base_dir(manifest_path);
        let mut entries: Vec<&ImageEntry> = self.images.iter().collect();
        entries.sort_by_key(|e| (e.k, e.j));
        entries
            .into_iter()
            .map(|entry| {
                let file = dir.join(&entry.file);
                let fail = |reason: String| Error::Image {
                    path: file.display().to_string(),
                    reason,
                };
                let mut img = pgm::read(&file).map_err(|e| fail(e.to_string()))?;
                if img.bit_depth() != self.bit_depth {
                    return Err(fail(format!(
                        "{}-bit image in a {}-bit stack",
                        img.bit_depth().bits(),
                        self.bit_depth.bits()
                    )));
                }
                img.p_x = self.optics.p_x;
                img.p_y = self.optics.p_y;
                Ok(img.with_index(entry.index()))
            })
            .collect()
    }
}

fn base_dir(manifest_path: &Path) -> PathBuf {
    manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scanplan::plan_scan;
    use crate::synth::DefectSpec;

    fn manifest() -> RunManifest {
        let hole = HoleSpec::new(2.0, 47.0).unwrap();
        let region = EffectiveRegion::default();
        let plan = plan_scan(&hole, &region).unwrap();
        let mut m = RunManifest::new(hole, OpticsConfig::default(), region, plan).with_default_images();
        m.seed = 42;
        m.noise_sigma = 5.0 / 255.0;
        m.truth = Some(TruthSet {
            defects: vec![
                DefectSpec::disc(10.1, 33.3, 0.1),
                DefectSpec::line(20.0, 200.0, 0.3, 2.0),
            ],
            spacings: vec![[0, 1]],
        });
        m
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = manifest();
        assert_eq!(m.images.len(), 288);
        let back = RunManifest::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json(), m.to_json());
    }

    #[test]
    fn plan_only_manifest() {
        let mut m = manifest();
        m.images.clear();
        m.truth = None;
        let text = m.to_json();
        assert!(!text.contains("truth"));
        assert_eq!(RunManifest::from_json(&text).unwrap(), m);
    }

    #[test]
    fn image_list_must_match_plan() {
        let mut m = manifest();
        m.images.pop();
        assert!(m.validate().is_err());

        let mut m = manifest();
        m.images[1] = m.images[0].clone();
        assert!(m.validate().is_err());

        let mut m = manifest();
        m.images[0].k = 9;
        assert!(matches!(m.validate(), Err(Error::Index { j: 0, k: 9 })));
    }

    #[test]
    fn load_reports_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(MANIFEST_FILE);
        manifest().write(&path).unwrap();
        match RunManifest::load(&path) {
            Err(Error::Image { path, .. }) => assert!(path.ends_with("tile_j000_k000.pgm")),
            other => panic!("{other:?}"),
        }
    }
}
