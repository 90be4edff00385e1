//! Context-enhanced prompt rendering, tuning-record export, and estimate
//! parsing.
//!
//! Rendering is byte-deterministic: feature values are rounded
//! half-away-from-zero to two decimals with trailing zeros trimmed
//! (`0.10` -> `0.1`, `1.00` -> `1`), profile heights and weights always
//! carry one decimal, and MAP/PP targets always carry one decimal.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{group_features, FeatureVector, GroupingConfig};
use crate::ingest::VisitDay;

/// Task preamble sent as the system message and exported as the
/// `instruction` field of tuning records.
pub const INSTRUCTION: &str = "You are a personalized healthcare agent trained to predict mean arterial pressure and pulse pressure based on user information and physiological features calculated from electrocardiogram and photoplethysmogram signals.";

const QUESTION: &str = "Based on these data, what would be the predicted MAP and PP values?";

const BP_KNOWLEDGE: &str = "Mean arterial pressure (MAP) represents the average blood pressure during a cardiac cycle and is influenced by cardiac output and peripheral resistance. Pulse pressure (PP) is the difference between systolic and diastolic blood pressure and is correlated with arterial stiffness.";

/// How much context the rendered prompt carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextLevel {
    /// Signal features only.
    Basic,
    /// Features grouped under a BP-physiology preamble.
    BpKnowledge,
    /// Grouped features plus the user profile.
    BpKnowledgeUser,
}

impl ContextLevel {
    pub const ALL: [ContextLevel; 3] = [
        ContextLevel::Basic,
        ContextLevel::BpKnowledge,
        ContextLevel::BpKnowledgeUser,
    ];

    /// Stable short name used in file names and CLI flags.
    pub fn slug(&self) -> &'static str {
        match self {
            ContextLevel::Basic => "basic",
            ContextLevel::BpKnowledge => "knowledge",
            ContextLevel::BpKnowledgeUser => "knowledge-user",
        }
    }
}

impl std::str::FromStr for ContextLevel {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "basic" => Ok(ContextLevel::Basic),
            "knowledge" => Ok(ContextLevel::BpKnowledge),
            "knowledge-user" => Ok(ContextLevel::BpKnowledgeUser),
            other => Err(format!("unknown context level {other:?}")),
        }
    }
}

/// A rendered prompt, optionally carrying the reference response used for
/// instruction-tuning export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub instruction: String,
    pub input: String,
    pub response: Option<String>,
    pub context_level: ContextLevel,
    pub subject_id: String,
    pub visit_day: VisitDay,
}

/// MAP/PP pair recovered from a model reply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParsedEstimate {
    pub map_mmhg: f64,
    pub pp_mmhg: f64,
}

/// Two-decimal, half-away-from-zero rounding with trailing-zero trimming.
pub fn format_feature_value(v: f64) -> String {
    let cents = (v * 100.0).round() as i64;
    let sign = if cents < 0 { "-" } else { "" };
    let magnitude = cents.abs();
    let whole = magnitude / 100;
    let frac = magnitude % 100;
    if frac == 0 {
        format!("{sign}{whole}")
    } else if frac % 10 == 0 {
        format!("{sign}{whole}.{}", frac / 10)
    } else {
        format!("{sign}{whole}.{frac:02}")
    }
}

/// One-decimal, half-away-from-zero rounding; always shows the decimal.
fn format_mmhg(v: f64) -> String {
    let tenths = (v * 10.0).round() as i64;
    let sign = if tenths < 0 { "-" } else { "" };
    let magnitude = tenths.abs();
    format!("{sign}{}.{}", magnitude / 10, magnitude % 10)
}

/// Render a bracketed, comma-separated feature list.
pub fn format_feature_list(values: &[f64]) -> Result<String> {
    if values.is_empty() {
        return Err(Error::EmptyFeatureList);
    }
    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteFeature(bad));
    }
    let parts: Vec<String> = values.iter().map(|v| format_feature_value(*v)).collect();
    Ok(format!("[{}]", parts.join(", ")))
}

/// Render the prompt for one record at the requested context level.
pub fn build_prompt(
    fv: &FeatureVector,
    level: ContextLevel,
    grouping: &GroupingConfig,
) -> Result<PromptRecord> {
    let input = match level {
        ContextLevel::Basic => {
            let list = format_feature_list(&fv.values)?;
            format!("The physiological features are {list}. {QUESTION}")
        }
        ContextLevel::BpKnowledge => {
            let grouped = group_features(&fv.values, grouping);
            let co = format_feature_list(&grouped.cardiac_output)?;
            let pr = format_feature_list(&grouped.peripheral_resistance)?;
            let stiff = format_feature_list(&grouped.arterial_stiffness)?;
            format!(
                "{BP_KNOWLEDGE} The physiological features associated with cardiac output are {co}, peripheral resistance are {pr}, and arterial stiffness are {stiff}. {QUESTION}"
            )
        }
        ContextLevel::BpKnowledgeUser => {
            let user = fv.user.as_ref().ok_or(Error::MissingProfile)?;
            user.validate()?;
            let grouped = group_features(&fv.values, grouping);
            let co = format_feature_list(&grouped.cardiac_output)?;
            let pr = format_feature_list(&grouped.peripheral_resistance)?;
            let stiff = format_feature_list(&grouped.arterial_stiffness)?;
            let hypertension = if user.hypertension_history { "yes" } else { "no" };
            format!(
                "{BP_KNOWLEDGE} Given the user's profile: age: {age} years old, gender: {gender}, height: {height:.1} cm, weight: {weight:.1} kg, history of hypertension: {hypertension}. The physiological features associated with cardiac output are {co}, peripheral resistance are {pr}, and arterial stiffness are {stiff}. {QUESTION}",
                age = format_feature_value(user.age_years),
                gender = user.gender,
                height = user.height_cm,
                weight = user.weight_kg,
            )
        }
    };
    Ok(PromptRecord {
        instruction: INSTRUCTION.to_owned(),
        input,
        response: None,
        context_level: level,
        subject_id: fv.subject_id.clone(),
        visit_day: fv.visit_day,
    })
}

/// Attach the reference response, computed from the reference readings:
/// MAP = (SBP + 2 DBP) / 3 and PP = SBP - DBP, one decimal each.
pub fn build_tuning_record(prompt: &PromptRecord, ref_sbp: f64, ref_dbp: f64) -> Result<PromptRecord> {
    if !(ref_sbp.is_finite() && ref_dbp.is_finite()) || ref_sbp <= ref_dbp || ref_dbp <= 0.0 {
        return Err(Error::InvalidReading {
            sbp: ref_sbp,
            dbp: ref_dbp,
        });
    }
    let map = (ref_sbp + 2.0 * ref_dbp) / 3.0;
    let pp = ref_sbp - ref_dbp;
    let response = format!(
        "Predicted_MAP: {} mmHg, Predicted_PP: {} mmHg.",
        format_mmhg(map),
        format_mmhg(pp)
    );
    Ok(PromptRecord {
        response: Some(response),
        ..prompt.clone()
    })
}

fn map_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)predicted_map[^0-9+\-]*([+-]?[0-9]+(?:\.[0-9]+)?)").unwrap()
    })
}

fn pp_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)predicted_pp[^0-9+\-]*([+-]?[0-9]+(?:\.[0-9]+)?)").unwrap()
    })
}

/// Extract the first number after each of the `predicted_map` and
/// `predicted_pp` keys, tolerating surrounding prose. Fails (carrying the
/// raw text) when a key is missing or a value is non-positive.
pub fn parse_response(text: &str) -> Result<ParsedEstimate> {
    let fail = || Error::ResponseParse {
        raw: text.to_owned(),
    };
    let grab = |re: &Regex| -> Option<f64> {
        re.captures(text)
            .and_then(|c| c.get(1))
            .and_then(|m| m.as_str().parse::<f64>().ok())
    };
    let map_mmhg = grab(map_regex()).ok_or_else(fail)?;
    let pp_mmhg = grab(pp_regex()).ok_or_else(fail)?;
    if !(map_mmhg.is_finite() && pp_mmhg.is_finite()) || map_mmhg <= 0.0 || pp_mmhg <= 0.0 {
        return Err(fail());
    }
    Ok(ParsedEstimate { map_mmhg, pp_mmhg })
}

/// Strict variant: the reply must match the canonical response format
/// byte-for-byte apart from the two numbers. Used by golden tests.
pub fn parse_response_strict(text: &str) -> Result<ParsedEstimate> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(
            r"^Predicted_MAP: ([0-9]+\.[0-9]) mmHg, Predicted_PP: ([0-9]+\.[0-9]) mmHg\.$",
        )
        .unwrap()
    });
    let caps = re.captures(text).ok_or_else(|| Error::ResponseParse {
        raw: text.to_owned(),
    })?;
    let map_mmhg: f64 = caps[1].parse().expect("digits");
    let pp_mmhg: f64 = caps[2].parse().expect("digits");
    if map_mmhg <= 0.0 || pp_mmhg <= 0.0 {
        return Err(Error::ResponseParse {
            raw: text.to_owned(),
        });
    }
    Ok(ParsedEstimate { map_mmhg, pp_mmhg })
}

/// The instruction/input/output triplet consumed by fine-tuning toolchains.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TuningRecord {
    pub instruction: String,
    pub input: String,
    pub output: String,
}

impl From<&PromptRecord> for TuningRecord {
    fn from(p: &PromptRecord) -> Self {
        TuningRecord {
            instruction: p.instruction.clone(),
            input: p.input.clone(),
            output: p.response.clone().unwrap_or_default(),
        }
    }
}

/// Write tuning records as newline-delimited JSON with exactly the fields
/// `instruction`, `input`, `output`.
pub fn write_tuning_jsonl(records: &[TuningRecord], path: &std::path::Path) -> Result<()> {
    use std::io::Write;
    let mut file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    for record in records {
        let line = serde_json::to_string(record)?;
        writeln!(file, "{line}").map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
    }
    Ok(())
}

pub fn read_tuning_jsonl(path: &std::path::Path) -> Result<Vec<TuningRecord>> {
    let raw = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (idx, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
                path: path.to_path_buf(),
                line: idx + 1,
                message: e.to_string(),
            })?,
        );
    }
    Ok(out)
}

/// Every rendered input must end with the fixed question.
pub fn ends_with_question(input: &str) -> bool {
    input.ends_with(QUESTION)
}
