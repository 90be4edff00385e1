//! Record loading, synthetic data, and quality screening.

mod quality;
mod synth;

pub use quality::{screen_quality, QualityConfig, QualityReport, RejectReason};
pub use synth::{
    reference_dbp, reference_sbp, synthesize_cohort, synthesize_record, CohortConfig, GroundTruth,
    SyntheticConfig,
};

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Follow-up day of a measurement session.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum VisitDay {
    D,
    D7,
    D14,
    D21,
}

impl VisitDay {
    pub const ALL: [VisitDay; 4] = [VisitDay::D, VisitDay::D7, VisitDay::D14, VisitDay::D21];

    pub fn as_str(&self) -> &'static str {
        match self {
            VisitDay::D => "D",
            VisitDay::D7 => "D7",
            VisitDay::D14 => "D14",
            VisitDay::D21 => "D21",
        }
    }
}

impl fmt::Display for VisitDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for VisitDay {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "D" => Ok(VisitDay::D),
            "D7" => Ok(VisitDay::D7),
            "D14" => Ok(VisitDay::D14),
            "D21" => Ok(VisitDay::D21),
            other => Err(format!("unknown visit day {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::Male => "male",
            Gender::Female => "female",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub age_years: f64,
    pub gender: Gender,
    pub height_cm: f64,
    pub weight_kg: f64,
    pub hypertension_history: bool,
}

impl UserProfile {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidProfile(msg));
        if !self.age_years.is_finite() || self.age_years < 0.0 {
            return fail(format!("age_years {} must be >= 0", self.age_years));
        }
        if !self.height_cm.is_finite() || self.height_cm <= 0.0 {
            return fail(format!("height_cm {} must be positive", self.height_cm));
        }
        if !self.weight_kg.is_finite() || self.weight_kg <= 0.0 {
            return fail(format!("weight_kg {} must be positive", self.weight_kg));
        }
        Ok(())
    }
}

/// One measurement session: synchronized ECG/PPG plus reference readings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalRecord {
    pub subject_id: String,
    pub visit_day: VisitDay,
    #[serde(rename = "fs")]
    pub sampling_rate_hz: f64,
    pub ecg: Vec<f64>,
    pub ppg: Vec<f64>,
    #[serde(rename = "sbp")]
    pub ref_sbp_mmhg: f64,
    #[serde(rename = "dbp")]
    pub ref_dbp_mmhg: f64,
}

impl SignalRecord {
    pub fn duration_s(&self) -> f64 {
        self.ecg.len() as f64 / self.sampling_rate_hz
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| {
            Err(Error::InvalidRecord {
                subject_id: self.subject_id.clone(),
                visit_day: self.visit_day.to_string(),
                message: msg,
            })
        };
        if !self.sampling_rate_hz.is_finite() || self.sampling_rate_hz <= 0.0 {
            return fail(format!("fs {} must be positive", self.sampling_rate_hz));
        }
        if self.ecg.len() != self.ppg.len() {
            return fail(format!(
                "ecg length {} != ppg length {}",
                self.ecg.len(),
                self.ppg.len()
            ));
        }
        if self.ecg.is_empty() {
            return fail("empty signal arrays".to_owned());
        }
        if !(self.ref_sbp_mmhg.is_finite() && self.ref_dbp_mmhg.is_finite())
            || self.ref_sbp_mmhg <= self.ref_dbp_mmhg
            || self.ref_dbp_mmhg <= 0.0
        {
            return fail(format!(
                "reference readings must satisfy sbp > dbp > 0, got sbp {} dbp {}",
                self.ref_sbp_mmhg, self.ref_dbp_mmhg
            ));
        }
        Ok(())
    }
}

/// On-disk layout of a record set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordFormat {
    /// One JSON record per line, sample arrays inline.
    Ndjson,
    /// One directory per subject with a per-visit signal CSV and a manifest
    /// of reference readings.
    CsvDir,
}

impl std::str::FromStr for RecordFormat {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ndjson" => Ok(RecordFormat::Ndjson),
            "csv-dir" => Ok(RecordFormat::CsvDir),
            other => Err(format!("unknown record format {other:?}")),
        }
    }
}

/// Load all records from `path`, validate them, and return them sorted by
/// `(subject_id, visit_day)`. A pure function of the file bytes.
pub fn load_records(path: &Path, format: RecordFormat) -> Result<Vec<SignalRecord>> {
    let mut records = match format {
        RecordFormat::Ndjson => load_ndjson(path)?,
        RecordFormat::CsvDir => load_csv_dir(path)?,
    };
    for r in &records {
        r.validate()?;
    }
    records.sort_by(|a, b| {
        a.subject_id
            .cmp(&b.subject_id)
            .then(a.visit_day.cmp(&b.visit_day))
    });
    Ok(records)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn load_ndjson(path: &Path) -> Result<Vec<SignalRecord>> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SignalRecord =
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                path: path.to_path_buf(),
                line: idx + 1,
                message: e.to_string(),
            })?;
        records.push(record);
    }
    Ok(records)
}

pub fn write_ndjson(records: &[SignalRecord], path: &Path) -> Result<()> {
    let mut file = fs::File::create(path).map_err(io_err(path))?;
    for record in records {
        let line = serde_json::to_string(record)?;
        writeln!(file, "{line}").map_err(io_err(path))?;
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestRow {
    visit_day: VisitDay,
    fs: f64,
    sbp: f64,
    dbp: f64,
}

fn csv_error(path: &Path, e: impl fmt::Display) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn load_csv_dir(path: &Path) -> Result<Vec<SignalRecord>> {
    let mut subject_dirs: Vec<PathBuf> = fs::read_dir(path)
        .map_err(io_err(path))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subject_dirs.sort();

    let mut records = Vec::new();
    for dir in subject_dirs {
        let subject_id = dir
            .file_name()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_owned();
        let manifest_path = dir.join("manifest.csv");
        let mut manifest = csv::Reader::from_path(&manifest_path)
            .map_err(|e| csv_error(&manifest_path, e))?;
        for row in manifest.deserialize::<ManifestRow>() {
            let row = row.map_err(|e| csv_error(&manifest_path, e))?;
            let signal_path = dir.join(format!("{}.csv", row.visit_day));
            let (ecg, ppg) = load_signal_csv(&signal_path)?;
            records.push(SignalRecord {
                subject_id: subject_id.clone(),
                visit_day: row.visit_day,
                sampling_rate_hz: row.fs,
                ecg,
                ppg,
                ref_sbp_mmhg: row.sbp,
                ref_dbp_mmhg: row.dbp,
            });
        }
    }
    Ok(records)
}

fn load_signal_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut ecg = Vec::new();
    let mut ppg = Vec::new();
    for row in reader.deserialize::<(f64, f64)>() {
        let (e, p) = row.map_err(|e| csv_error(path, e))?;
        ecg.push(e);
        ppg.push(p);
    }
    Ok((ecg, ppg))
}

pub fn write_csv_dir(records: &[SignalRecord], root: &Path) -> Result<()> {
    fs::create_dir_all(root).map_err(io_err(root))?;
    let mut by_subject: BTreeMap<&str, Vec<&SignalRecord>> = BTreeMap::new();
    for r in records {
        by_subject.entry(&r.subject_id).or_default().push(r);
    }
    for (subject, rows) in by_subject {
        let dir = root.join(subject);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let manifest_path = dir.join("manifest.csv");
        let mut manifest =
            csv::Writer::from_path(&manifest_path).map_err(|e| csv_error(&manifest_path, e))?;
        for r in &rows {
            manifest
                .serialize(ManifestRow {
                    visit_day: r.visit_day,
                    fs: r.sampling_rate_hz,
                    sbp: r.ref_sbp_mmhg,
                    dbp: r.ref_dbp_mmhg,
                })
                .map_err(|e| csv_error(&manifest_path, e))?;
            let signal_path = dir.join(format!("{}.csv", r.visit_day));
            let mut signal =
                csv::Writer::from_path(&signal_path).map_err(|e| csv_error(&signal_path, e))?;
            signal
                .write_record(["ecg", "ppg"])
                .map_err(|e| csv_error(&signal_path, e))?;
            for (e, p) in r.ecg.iter().zip(&r.ppg) {
                signal
                    .write_record([e.to_string(), p.to_string()])
                    .map_err(|e| csv_error(&signal_path, e))?;
            }
        }
        manifest.flush().map_err(io_err(&manifest_path))?;
    }
    Ok(())
}

/// Load subject profiles from a CSV with columns
/// `subject_id,age_years,gender,height_cm,weight_kg,hypertension`.
pub fn load_profiles(path: &Path) -> Result<BTreeMap<String, UserProfile>> {
    #[derive(Deserialize)]
    struct Row {
        subject_id: String,
        age_years: f64,
        gender: Gender,
        height_cm: f64,
        weight_kg: f64,
        hypertension: String,
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut out = BTreeMap::new();
    for row in reader.deserialize::<Row>() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let profile = UserProfile {
            age_years: row.age_years,
            gender: row.gender,
            height_cm: row.height_cm,
            weight_kg: row.weight_kg,
            hypertension_history: matches!(row.hypertension.as_str(), "yes" | "true" | "1"),
        };
        profile.validate()?;
        out.insert(row.subject_id, profile);
    }
    Ok(out)
}

pub fn write_profiles(profiles: &BTreeMap<String, UserProfile>, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    writer
        .write_record([
            "subject_id",
            "age_years",
            "gender",
            "height_cm",
            "weight_kg",
            "hypertension",
        ])
        .map_err(|e| csv_error(path, e))?;
    for (id, p) in profiles {
        writer
            .write_record([
                id.clone(),
                p.age_years.to_string(),
                p.gender.to_string(),
                p.height_cm.to_string(),
                p.weight_kg.to_string(),
                if p.hypertension_history { "yes" } else { "no" }.to_string(),
            ])
            .map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(io_err(path))?;
    Ok(())
}
