//! The 31 beat-morphology features, beat averaging, and physiological
//! grouping.
//!
//! Feature numbering (fixed, used everywhere a flat 31-vector appears):
//!
//! | #     | feature                                  |
//! |-------|------------------------------------------|
//! | 1-3   | PTT from R to PPG s, m, p                |
//! | 4-6   | ascending time of PPG, VPPG, APPG        |
//! | 7-9   | ascending slope of PPG, VPPG, APPG       |
//! | 10-12 | ascending area of PPG, VPPG, APPG        |
//! | 13-15 | ascending intensity diff of PPG/VPPG/APPG|
//! | 16-18 | descending time of PPG, VPPG, APPG       |
//! | 19-21 | descending slope of PPG, VPPG, APPG      |
//! | 22-24 | descending area of PPG, VPPG, APPG       |
//! | 25-27 | descending intensity diff of PPG/VPPG/APPG|
//! | 28    | large artery stiffness index (p to n)    |
//! | 29    | pulse width (m to n)                     |
//! | 30    | pulse rate span (s to v)                 |
//! | 31    | pulse intensity rate (p over s amplitude)|
//!
//! Times are seconds, slopes amplitude/second, areas amplitude-seconds,
//! intensity differences raw amplitude, and the intensity rate is
//! dimensionless.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Gender, UserProfile, VisitDay};
use crate::waveform::{BeatFiducials, FilteredBundle};

pub const FEATURE_COUNT: usize = 31;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "ptt_rv",
    "ptt_rm",
    "ptt_rp",
    "asc_time_ppg",
    "asc_time_vppg",
    "asc_time_appg",
    "asc_slope_ppg",
    "asc_slope_vppg",
    "asc_slope_appg",
    "asc_area_ppg",
    "asc_area_vppg",
    "asc_area_appg",
    "asc_intensity_ppg",
    "asc_intensity_vppg",
    "asc_intensity_appg",
    "desc_time_ppg",
    "desc_time_vppg",
    "desc_time_appg",
    "desc_slope_ppg",
    "desc_slope_vppg",
    "desc_slope_appg",
    "desc_area_ppg",
    "desc_area_vppg",
    "desc_area_appg",
    "desc_intensity_ppg",
    "desc_intensity_vppg",
    "desc_intensity_appg",
    "lasi",
    "pulse_width",
    "pulse_rate",
    "pulse_intensity_rate",
];

/// Features of a single beat.
#[derive(Debug, Clone, PartialEq)]
pub struct BeatFeatureVector {
    pub values: [f64; FEATURE_COUNT],
}

/// Beat-averaged features for one record, with identity and references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: [f64; FEATURE_COUNT],
    pub beat_count: usize,
    pub user: Option<UserProfile>,
    pub subject_id: String,
    pub visit_day: VisitDay,
    pub ref_sbp_mmhg: f64,
    pub ref_dbp_mmhg: f64,
}

/// Trapezoidal integral of `x[a..=b]` against a grid of spacing `1/fs`.
fn trapezoid(x: &[f64], a: usize, b: usize, fs: f64) -> f64 {
    let mut acc = 0.0;
    for i in a..b {
        acc += 0.5 * (x[i] + x[i + 1]);
    }
    acc / fs
}

/// Compute the 31 features of one beat, literally per their definitions.
/// Beats that produce a non-finite value, a non-positive intensity rate, or
/// a zero-amplitude onset are rejected.
pub fn compute_beat_features(
    bundle: &FilteredBundle,
    beat: &BeatFiducials,
) -> Result<BeatFeatureVector> {
    beat.validate(bundle.len())
        .map_err(Error::DegenerateBeat)?;
    let fs = bundle.sampling_rate_hz;
    let span = |a: usize, b: usize| (b - a) as f64 / fs;

    let mut values = [0.0; FEATURE_COUNT];
    values[0] = span(beat.r, beat.ppg_s);
    values[1] = span(beat.r, beat.ppg_m);
    values[2] = span(beat.r, beat.ppg_p);

    let waves: [(&[f64], usize, usize, usize); 3] = [
        (&bundle.ppg_f, beat.ppg_s, beat.ppg_p, beat.ppg_v),
        (&bundle.vppg, beat.vppg_s, beat.vppg_p, beat.vppg_v),
        (&bundle.appg, beat.appg_s, beat.appg_p, beat.appg_v),
    ];
    for (w, (wave, s, p, v)) in waves.into_iter().enumerate() {
        let asc_time = span(s, p);
        let desc_time = span(p, v);
        values[3 + w] = asc_time;
        values[6 + w] = (wave[p] - wave[s]) / asc_time;
        values[9 + w] = trapezoid(wave, s, p, fs);
        values[12 + w] = wave[p] - wave[s];
        values[15 + w] = desc_time;
        values[18 + w] = (wave[v] - wave[p]) / desc_time;
        values[21 + w] = trapezoid(wave, p, v, fs);
        values[24 + w] = wave[p] - wave[v];
    }

    values[27] = span(beat.ppg_p, beat.ppg_n);
    values[28] = span(beat.ppg_m, beat.ppg_n);
    values[29] = span(beat.ppg_s, beat.ppg_v);

    let onset_amplitude = bundle.ppg_f[beat.ppg_s];
    if onset_amplitude == 0.0 {
        return Err(Error::DegenerateBeat(
            "onset amplitude is zero; intensity rate undefined".to_owned(),
        ));
    }
    values[30] = bundle.ppg_f[beat.ppg_p] / onset_amplitude;
    if values[30] <= 0.0 {
        return Err(Error::DegenerateBeat(format!(
            "non-positive pulse intensity rate {}",
            values[30]
        )));
    }

    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::DegenerateBeat(format!(
            "non-finite value for {}",
            FEATURE_NAMES[bad]
        )));
    }
    Ok(BeatFeatureVector { values })
}

/// Record identity carried onto the averaged feature vector.
#[derive(Debug, Clone)]
pub struct RecordMeta {
    pub subject_id: String,
    pub visit_day: VisitDay,
    pub ref_sbp_mmhg: f64,
    pub ref_dbp_mmhg: f64,
    pub user: Option<UserProfile>,
}

/// Element-wise mean over beats.
pub fn aggregate_features(beats: &[BeatFeatureVector], meta: RecordMeta) -> Result<FeatureVector> {
    if beats.is_empty() {
        return Err(Error::EmptyBeatList);
    }
    let mut values = [0.0; FEATURE_COUNT];
    for beat in beats {
        for (acc, v) in values.iter_mut().zip(beat.values.iter()) {
            *acc += v;
        }
    }
    for v in values.iter_mut() {
        *v /= beats.len() as f64;
    }
    Ok(FeatureVector {
        values,
        beat_count: beats.len(),
        user: meta.user,
        subject_id: meta.subject_id,
        visit_day: meta.visit_day,
        ref_sbp_mmhg: meta.ref_sbp_mmhg,
        ref_dbp_mmhg: meta.ref_dbp_mmhg,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    ArterialStiffness,
    CardiacOutput,
    PeripheralResistance,
}

/// Named grouping presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupingPreset {
    /// 3 arterial-stiffness / 10 cardiac-output / 18 peripheral-resistance.
    Table1,
    /// 3 / 9 / 19 split: the intensity rate moves to the resistance group.
    AppendixB,
}

impl std::str::FromStr for GroupingPreset {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "table1" => Ok(GroupingPreset::Table1),
            "appendix-b" | "appendixb" => Ok(GroupingPreset::AppendixB),
            other => Err(format!("unknown grouping preset {other:?}")),
        }
    }
}

/// Assignment of every feature index to a physiological group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupingConfig {
    assignment: Vec<FeatureGroup>,
}

impl GroupingConfig {
    /// Build from explicit 1-based index lists; they must partition 1..=31.
    pub fn from_groups(stiffness: &[usize], output: &[usize], resistance: &[usize]) -> Result<Self> {
        let mut assignment = vec![None; FEATURE_COUNT];
        for (group, indices) in [
            (FeatureGroup::ArterialStiffness, stiffness),
            (FeatureGroup::CardiacOutput, output),
            (FeatureGroup::PeripheralResistance, resistance),
        ] {
            for &idx in indices {
                if !(1..=FEATURE_COUNT).contains(&idx) {
                    return Err(Error::InvalidGrouping(format!("index {idx} out of range")));
                }
                if assignment[idx - 1].replace(group).is_some() {
                    return Err(Error::InvalidGrouping(format!(
                        "index {idx} assigned more than once"
                    )));
                }
            }
        }
        if let Some(missing) = assignment.iter().position(|a| a.is_none()) {
            return Err(Error::InvalidGrouping(format!(
                "index {} unassigned",
                missing + 1
            )));
        }
        Ok(Self {
            assignment: assignment.into_iter().map(|a| a.unwrap()).collect(),
        })
    }

    pub fn preset(preset: GroupingPreset) -> Self {
        let stiffness = [1, 2, 3];
        match preset {
            GroupingPreset::Table1 => {
                let output = [4, 5, 6, 16, 17, 18, 28, 29, 30, 31];
                let resistance = [
                    7, 8, 9, 10, 11, 12, 13, 14, 15, 19, 20, 21, 22, 23, 24, 25, 26, 27,
                ];
                Self::from_groups(&stiffness, &output, &resistance).expect("static preset")
            }
            GroupingPreset::AppendixB => {
                let output = [4, 5, 6, 16, 17, 18, 28, 29, 30];
                let resistance = [
                    7, 8, 9, 10, 11, 12, 13, 14, 15, 19, 20, 21, 22, 23, 24, 25, 26, 27, 31,
                ];
                Self::from_groups(&stiffness, &output, &resistance).expect("static preset")
            }
        }
    }

    /// 1-based feature indices of a group, ascending.
    pub fn indices(&self, group: FeatureGroup) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, g)| **g == group)
            .map(|(i, _)| i + 1)
            .collect()
    }
}

/// Feature values split by physiological significance, each group in
/// ascending feature-index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedFeatures {
    pub arterial_stiffness: Vec<f64>,
    pub cardiac_output: Vec<f64>,
    pub peripheral_resistance: Vec<f64>,
}

pub fn group_features(values: &[f64; FEATURE_COUNT], grouping: &GroupingConfig) -> GroupedFeatures {
    let pick = |group: FeatureGroup| -> Vec<f64> {
        grouping
            .indices(group)
            .into_iter()
            .map(|i| values[i - 1])
            .collect()
    };
    GroupedFeatures {
        arterial_stiffness: pick(FeatureGroup::ArterialStiffness),
        cardiac_output: pick(FeatureGroup::CardiacOutput),
        peripheral_resistance: pick(FeatureGroup::PeripheralResistance),
    }
}

// ---------------------------------------------------------------------------
// Flat tabular export
// ---------------------------------------------------------------------------

const PROFILE_COLUMNS: [&str; 5] = [
    "age_years",
    "gender",
    "height_cm",
    "weight_kg",
    "hypertension",
];

fn table_header() -> Vec<String> {
    let mut header = vec![
        "subject_id".to_owned(),
        "visit_day".to_owned(),
        "beat_count".to_owned(),
    ];
    header.extend(FEATURE_NAMES.iter().map(|s| s.to_string()));
    header.extend(PROFILE_COLUMNS.iter().map(|s| s.to_string()));
    header.push("sbp".to_owned());
    header.push("dbp".to_owned());
    header
}

fn csv_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Write one row per record: identity, beat count, the 31 features, the
/// profile (blank when unknown), and the reference readings. A leading
/// `#cuffless-meta` comment carries the tool version, seed, and config
/// fingerprint; [`read_feature_table`] skips it.
pub fn write_feature_table(rows: &[FeatureVector], path: &Path, meta_comment: &str) -> Result<()> {
    use std::io::Write;
    let mut file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    writeln!(file, "#cuffless-meta {meta_comment}").map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut writer = csv::Writer::from_writer(file);
    writer
        .write_record(&table_header())
        .map_err(|e| csv_error(path, e))?;
    for fv in rows {
        let mut record: Vec<String> = vec![
            fv.subject_id.clone(),
            fv.visit_day.to_string(),
            fv.beat_count.to_string(),
        ];
        record.extend(fv.values.iter().map(|v| v.to_string()));
        match &fv.user {
            Some(p) => {
                record.push(p.age_years.to_string());
                record.push(p.gender.to_string());
                record.push(p.height_cm.to_string());
                record.push(p.weight_kg.to_string());
                record.push(if p.hypertension_history { "yes" } else { "no" }.to_owned());
            }
            None => record.extend(std::iter::repeat_n(String::new(), PROFILE_COLUMNS.len())),
        }
        record.push(fv.ref_sbp_mmhg.to_string());
        record.push(fv.ref_dbp_mmhg.to_string());
        writer.write_record(&record).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

pub fn read_feature_table(path: &Path) -> Result<Vec<FeatureVector>> {
    let raw = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let body: String = raw
        .lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n");
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .clone();
    let expected = table_header();
    if header.iter().map(str::to_owned).collect::<Vec<_>>() != expected {
        return Err(csv_error(path, "unexpected feature-table header"));
    }
    let mut out = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| csv_error(path, e))?;
        out.push(parse_table_row(&row, path, line + 2)?);
    }
    Ok(out)
}

fn parse_table_row(row: &csv::StringRecord, path: &Path, line: usize) -> Result<FeatureVector> {
    let bad = |message: String| Error::MalformedRecord {
        path: path.to_path_buf(),
        line,
        message,
    };
    let field = |i: usize| row.get(i).ok_or_else(|| bad(format!("missing column {i}")));
    let num = |i: usize| -> Result<f64> {
        field(i)?
            .parse::<f64>()
            .map_err(|e| bad(format!("column {i}: {e}")))
    };

    let subject_id = field(0)?.to_owned();
    let visit_day: VisitDay = field(1)?.parse().map_err(bad)?;
    let beat_count = field(2)?
        .parse::<usize>()
        .map_err(|e| bad(e.to_string()))?;
    let mut values = [0.0; FEATURE_COUNT];
    for (k, v) in values.iter_mut().enumerate() {
        *v = num(3 + k)?;
    }
    let profile_start = 3 + FEATURE_COUNT;
    let age_raw = field(profile_start)?;
    let user = if age_raw.is_empty() {
        None
    } else {
        let gender = match field(profile_start + 1)? {
            "male" => Gender::Male,
            "female" => Gender::Female,
            other => return Err(bad(format!("unknown gender {other:?}"))),
        };
        Some(UserProfile {
            age_years: num(profile_start)?,
            gender,
            height_cm: num(profile_start + 2)?,
            weight_kg: num(profile_start + 3)?,
            hypertension_history: matches!(field(profile_start + 4)?, "yes" | "true" | "1"),
        })
    };
    Ok(FeatureVector {
        values,
        beat_count,
        user,
        subject_id,
        visit_day,
        ref_sbp_mmhg: num(profile_start + 5)?,
        ref_dbp_mmhg: num(profile_start + 6)?,
    })
}
