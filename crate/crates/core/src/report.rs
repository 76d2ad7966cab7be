//! Defect reports, comparison against truth, and multi-trial statistics.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::HoleSpec;
use crate::locate::{angle_delta, DefectKind, DefectRecord};
use crate::synth::{DefectShape, DefectSpec, TruthSet};

/// Size statistics for one defect kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindSummary {
    pub kind: DefectKind,
    pub count: usize,
    pub mean_size: f64,
    /// Sample standard deviation; absent below two records.
    pub std_size: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Disc,
    Line,
    Spacing,
}

/// One truth feature and what the run measured for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatch {
    pub feature: String,
    pub kind: FeatureKind,
    /// mm
    pub truth: f64,
    pub measured: Option<f64>,
    /// Matched record ids; two for spacings.
    pub records: Vec<usize>,
    /// Axial and arc position errors, mm. Zero for spacings.
    pub dz: f64,
    pub darc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub features: Vec<FeatureMatch>,
    /// Records not matched to any truth defect.
    pub unmatched_records: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    pub records: Vec<DefectRecord>,
    pub summary: Vec<KindSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Comparison>,
}

/// Mean and sample standard deviation (n - 1 denominator).
pub fn mean_std(values: &[f64]) -> Option<(f64, Option<f64>)> {
    if values.is_empty() {
        return None;
    }
    // Welford: identical inputs give exactly that mean and zero spread
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &v) in values.iter().enumerate() {
        let d = v - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (v - mean);
    }
    if values.len() < 2 {
        return Some((mean, None));
    }
    Some((mean, Some((m2 / (values.len() - 1) as f64).sqrt())))
}

pub fn summarize(records: &[DefectRecord]) -> Vec<KindSummary> {
    [DefectKind::Disc, DefectKind::Line]
        .into_iter()
        .filter_map(|kind| {
            let sizes: Vec<f64> = records.iter().filter(|r| r.kind == kind).map(|r| r.size).collect();
            mean_std(&sizes).map(|(mean_size, std_size)| KindSummary {
                kind,
                count: sizes.len(),
                mean_size,
                std_size,
            })
        })
        .collect()
}

fn kind_of(spec: &DefectSpec) -> DefectKind {
    match spec.kind {
        DefectShape::Disc => DefectKind::Disc,
        DefectShape::Line => DefectKind::Line,
    }
}

fn feature_name(i: usize, spec: &DefectSpec) -> String {
    match spec.kind {
        DefectShape::Disc => format!("disc#{i} d={:.3}", spec.size),
        DefectShape::Line => format!("line#{i} w={:.3}", spec.size),
    }
}

/// Distance within which a record may be matched to a truth defect, mm.
fn match_gate(spec: &DefectSpec) -> f64 {
    let half = match spec.kind {
        DefectShape::Disc => spec.size / 2.0,
        DefectShape::Line => spec.length.unwrap_or(0.0).max(spec.size) / 2.0,
    };
    half + 0.05
}

/// Axial and arc offsets from truth to record, mm.
fn offsets(spec: &DefectSpec, rec: &DefectRecord, radius: f64) -> (f64, f64) {
    let dz = rec.z - spec.z;
    let darc = angle_delta(spec.beta, rec.beta).to_radians() * radius;
    (dz, darc)
}

fn centre_distance(z0: f64, b0: f64, z1: f64, b1: f64, radius: f64) -> f64 {
    let arc = angle_delta(b0, b1).to_radians() * radius;
    (z1 - z0).hypot(arc)
}

/// Match records to truth one-to-one, nearest pairs first, and measure
/// every truth feature including the requested spacings.
pub fn compare(records: &[DefectRecord], truth: &TruthSet, hole: &HoleSpec) -> Comparison {
    let r = hole.radius;
    let mut pairs = Vec::new();
    for (ti, spec) in truth.defects.iter().enumerate() {
        for (ri, rec) in records.iter().enumerate() {
            if rec.kind != kind_of(spec) {
                continue;
            }
            let (dz, darc) = offsets(spec, rec, r);
            let d = dz.hypot(darc);
            if d <= match_gate(spec) {
                pairs.push((d, ti, ri));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut truth_to_rec: Vec<Option<usize>> = vec![None; truth.defects.len()];
    let mut rec_used = vec![false; records.len()];
    for (_, ti, ri) in pairs {
        if truth_to_rec[ti].is_none() && !rec_used[ri] {
            truth_to_rec[ti] = Some(ri);
            rec_used[ri] = true;
        }
    }

    let mut features = Vec::new();
    for (ti, spec) in truth.defects.iter().enumerate() {
        let kind = match spec.kind {
            DefectShape::Disc => FeatureKind::Disc,
            DefectShape::Line => FeatureKind::Line,
        };
        let (measured, ids, dz, darc) = match truth_to_rec[ti] {
            Some(ri) => {
                let rec = &records[ri];
                let (dz, darc) = offsets(spec, rec, r);
                (Some(rec.size), vec![rec.id], dz, darc)
            }
            None => (None, Vec::new(), 0.0, 0.0),
        };
        features.push(FeatureMatch {
            feature: feature_name(ti, spec),
            kind,
            truth: spec.size,
            measured,
            records: ids,
            dz,
            darc,
        });
    }
    for &[a, b] in &truth.spacings {
        let (Some(sa), Some(sb)) = (truth.defects.get(a), truth.defects.get(b)) else {
            continue;
        };
        let truth_d = centre_distance(sa.z, sa.beta, sb.z, sb.beta, r);
        let (measured, ids) = match (truth_to_rec[a], truth_to_rec[b]) {
            (Some(ra), Some(rb)) => {
                let (p, q) = (&records[ra], &records[rb]);
                (Some(centre_distance(p.z, p.beta, q.z, q.beta, r)), vec![p.id, q.id])
            }
            _ => (None, Vec::new()),
        };
        features.push(FeatureMatch {
            feature: format!("spacing#{a}-{b}"),
            kind: FeatureKind::Spacing,
            truth: truth_d,
            measured,
            records: ids,
            dz: 0.0,
            darc: 0.0,
        });
    }
    let unmatched_records = records
        .iter()
        .zip(&rec_used)
        .filter(|(_, &used)| !used)
        .map(|(rec, _)| rec.id)
        .collect();
    Comparison {
        features,
        unmatched_records,
    }
}

impl DefectReport {
    pub fn new(records: Vec<DefectRecord>) -> Self {
        let summary = summarize(&records);
        Self {
            records,
            summary,
            comparison: None,
        }
    }

    pub fn with_truth(mut self, truth: &TruthSet, hole: &HoleSpec) -> Self {
        self.comparison = Some(compare(&self.records, truth, hole));
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    /// One row per record. Sizes in mm to three decimals.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "id",
            "kind",
            "z_mm",
            "z_from_bottom_mm",
            "beta_deg",
            "size_mm",
            "area_mm2",
            "pixel_area",
            "truncated",
            "tiles",
        ])
        .map_err(csv_err)?;
        for r in &self.records {
            let tiles: Vec<String> = r
                .sources
                .iter()
                .map(|s| format!("{}:{}", s.tile.j, s.tile.k))
                .collect();
            w.write_record([
                r.id.to_string(),
                r.kind.as_str().to_string(),
                format!("{:.4}", r.z),
                format!("{:.4}", r.z_from_bottom),
                format!("{:.4}", r.beta),
                format!("{:.3}", r.size),
                format!("{:.6}", r.area),
                r.pixel_area.to_string(),
                r.truncated.to_string(),
                tiles.join(" "),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// One Table-1 style row: truth, measured mean and spread over trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub feature: String,
    pub kind: FeatureKind,
    pub truth: f64,
    /// Trials in which the feature was found.
    pub found: usize,
    pub trials: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub max_abs_error: Option<f64>,
}

/// Aggregate per-trial record lists against one truth set.
pub fn compare_trials(
    trials: &[Vec<DefectRecord>],
    truth: &TruthSet,
    hole: &HoleSpec,
) -> Result<Vec<TrialRow>> {
    if truth.defects.is_empty() {
        return Err(Error::NoTruth);
    }
    if trials.is_empty() {
        return Err(Error::NoTrials);
    }
    let comparisons: Vec<Comparison> = trials.iter().map(|t| compare(t, truth, hole)).collect();
    let rows = comparisons[0]
        .features
        .iter()
        .enumerate()
        .map(|(i, first)| {
            let values: Vec<f64> = comparisons.iter().filter_map(|c| c.features[i].measured).collect();
            let stats = mean_std(&values);
            TrialRow {
                feature: first.feature.clone(),
                kind: first.kind,
                truth: first.truth,
                found: values.len(),
                trials: trials.len(),
                mean: stats.map(|s| s.0),
                std: stats.and_then(|s| s.1),
                max_abs_error: values.iter().map(|v| (v - first.truth).abs()).reduce(f64::max),
            }
        })
        .collect();
    Ok(rows)
}

fn fmt3(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into())
}

pub fn write_trial_csv<W: Write>(rows: &[TrialRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["feature", "truth_mm", "mean_mm", "std_mm", "max_abs_error_mm", "found", "trials"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.feature.clone(),
            format!("{:.3}", r.truth),
            fmt3(r.mean),
            fmt3(r.std),
            fmt3(r.max_abs_error),
            r.found.to_string(),
            r.trials.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Fixed-width text rendering of [`TrialRow`]s.
pub fn trial_table(rows: &[TrialRow]) -> String {
    let mut s = format!(
        "{:<20} {:>9} {:>9} {:>9} {:>7}\n",
        "feature", "truth", "mean", "std", "found"
    );
    for r in rows {
        s += &format!(
            "{:<20} {:>9.3} {:>9} {:>9} {:>3}/{:<3}\n",
            r.feature,
            r.truth,
            fmt3(r.mean),
            fmt3(r.std),
            r.found,
            r.trials
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::locate::{Footprint, SourceObservation};
    use crate::unwrap::TileIndex;

    fn rec(id: usize, kind: DefectKind, z: f64, beta: f64, size: f64) -> DefectRecord {
        DefectRecord {
            id,
            kind,
            z,
            z_from_bottom: 47.0 - z,
            beta,
            size,
            area: 0.0,
            pixel_area: 100,
            truncated: false,
            sources: vec![SourceObservation {
                tile: TileIndex::new(1, 2),
                centroid: (0.0, 0.0),
            }],
            footprint: Footprint {
                z_min: z,
                z_max: z,
                beta_min: beta,
                beta_max: beta,
            },
            segment_widths: Vec::new(),
        }
    }

    fn hole() -> HoleSpec {
        HoleSpec::new(2.0, 47.0).unwrap()
    }

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m, 2.5);
        // sqrt(5/3)
        assert!((s.unwrap() - 1.2909944487358056).abs() < 1e-15);
        assert_eq!(mean_std(&[0.2, 0.2, 0.2]).unwrap().1, Some(0.0));
        assert_eq!(mean_std(&[0.2]).unwrap().1, None);
        assert!(mean_std(&[]).is_none());
    }

    #[test]
    fn summary_by_kind() {
        let recs = vec![
            rec(0, DefectKind::Disc, 1.0, 0.0, 0.1),
            rec(1, DefectKind::Disc, 2.0, 0.0, 0.2),
            rec(2, DefectKind::Line, 3.0, 0.0, 0.3),
        ];
        let s = summarize(&recs);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].count, 2);
        assert!((s[0].mean_size - 0.15).abs() < 1e-12);
        assert_eq!(s[1].std_size, None);
    }

    #[test]
    fn matching_and_spacing() {
        let truth = TruthSet {
            defects: vec![
                DefectSpec::disc(10.0, 30.0, 0.2),
                DefectSpec::disc(10.4, 30.0, 0.2),
                DefectSpec::disc(20.0, 90.0, 0.1),
            ],
            spacings: vec![[0, 1]],
        };
        let recs = vec![
            rec(7, DefectKind::Disc, 10.405, 30.0, 0.198),
            rec(8, DefectKind::Disc, 10.001, 30.0, 0.203),
            rec(9, DefectKind::Line, 20.0, 90.0, 0.1),
        ];
        let c = compare(&recs, &truth, &hole());
        assert_eq!(c.features.len(), 4);
        assert_eq!(c.features[0].records, vec![8]);
        assert_eq!(c.features[1].records, vec![7]);
        // wrong kind does not match
        assert_eq!(c.features[2].measured, None);
        assert_eq!(c.unmatched_records, vec![9]);
        let sp = &c.features[3];
        assert!((sp.truth - 0.4).abs() < 1e-12);
        assert!((sp.measured.unwrap() - 0.404).abs() < 1e-12);
    }

    #[test]
    fn arc_offsets_across_zero() {
        let truth = TruthSet {
            defects: vec![DefectSpec::disc(5.0, 359.9, 0.1)],
            spacings: vec![],
        };
        let c = compare(&[rec(0, DefectKind::Disc, 5.0, 0.1, 0.1)], &truth, &hole());
        let expected = 0.2f64.to_radians() * 2.0;
        assert!((c.features[0].darc - expected).abs() < 1e-12);
    }

    #[test]
    fn trials() {
        let truth = TruthSet {
            defects: vec![DefectSpec::disc(10.0, 30.0, 0.2)],
            spacings: vec![],
        };
        let trials: Vec<Vec<DefectRecord>> = [0.19, 0.20, 0.21]
            .iter()
            .map(|&s| vec![rec(0, DefectKind::Disc, 10.0, 30.0, s)])
            .collect();
        let rows = compare_trials(&trials, &truth, &hole()).unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].mean.unwrap() - 0.2).abs() < 1e-12);
        assert!((rows[0].std.unwrap() - 0.01).abs() < 1e-12);
        assert_eq!(rows[0].found, 3);

        let same = vec![trials[1].clone(); 4];
        assert_eq!(compare_trials(&same, &truth, &hole()).unwrap()[0].std, Some(0.0));

        assert!(matches!(compare_trials(&[], &truth, &hole()), Err(Error::NoTrials)));
        assert!(matches!(
            compare_trials(&trials, &TruthSet::default(), &hole()),
            Err(Error::NoTruth)
        ));
    }

    #[test]
    fn csv_layout() {
        let report = DefectReport::new(vec![rec(3, DefectKind::Disc, 10.0, 30.0, 0.1234)]);
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("id,kind,z_mm"));
        assert_eq!(
            lines.next().unwrap(),
            "3,disc,10.0000,37.0000,30.0000,0.123,0.000000,100,false,1:2"
        );

        let empty = DefectReport::new(Vec::new());
        let mut buf = Vec::new();
        empty.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1);
        assert!(DefectReport::from_json(&empty.to_json()).unwrap().records.is_empty());
    }
}
