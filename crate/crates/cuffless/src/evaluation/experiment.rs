//! Cross-validated estimation experiments with basal calibration.
//!
//! One experiment: split records by subject into folds, obtain free
//! estimates per test fold (training native baselines on the remaining
//! folds, or querying the endpoint, or using the oracle/zero references),
//! calibrate each estimate against the subject's basal BP, and report
//! per-fold plus pooled metrics with Bland-Altman and correlation point
//! sets. Free estimates are independent of alpha, so sweeps recalibrate
//! cached estimates instead of re-querying.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{compute_metrics, pearson_r, FoldPlan, MetricSet};
use crate::error::{Error, Result};
use crate::estimation::{
    calibrate, compute_basal, predict_baseline, reading_from_map_pp, train_baseline,
    zero_baseline, BPReading, BasalBP, BaselineHyper, BaselineKind, ChatClient, EndpointConfig,
};
use crate::features::{FeatureVector, GroupingConfig, GroupingPreset};
use crate::ingest::VisitDay;
use crate::parallel;
use crate::prompting::{build_prompt, ContextLevel};

const MIN_TRAINING_ROWS: usize = 20;

/// How estimates are produced for test records.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "estimator", rename_all = "kebab-case")]
pub enum EstimatorSpec {
    /// Returns the reference MAP/PP (testing aid: perfect free estimates).
    Oracle,
    /// Always the subject's basal reading.
    Zero,
    /// Native model trained on the training folds.
    Baseline {
        kind: BaselineKind,
        hyper: BaselineHyper,
    },
    /// External chat-completions endpoint.
    Endpoint { cfg: EndpointConfig },
}

impl EstimatorSpec {
    pub fn describe(&self) -> String {
        match self {
            EstimatorSpec::Oracle => "oracle".to_owned(),
            EstimatorSpec::Zero => "zero".to_owned(),
            EstimatorSpec::Baseline { kind, .. } => match kind {
                BaselineKind::Dtr => "dtr".to_owned(),
                BaselineKind::Adaboost => "adaboost".to_owned(),
            },
            EstimatorSpec::Endpoint { cfg } => format!("endpoint:{}", cfg.model_name),
        }
    }
}

/// Unit whose records must never straddle folds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    Subject,
    Record,
}

impl SplitMode {
    pub fn key(&self, subject_id: &str, visit_day: VisitDay) -> String {
        match self {
            SplitMode::Subject => subject_id.to_owned(),
            SplitMode::Record => format!("{subject_id}::{visit_day}"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub context_level: ContextLevel,
    pub grouping: GroupingPreset,
    pub alpha: f64,
    pub seed: u64,
    pub split: SplitMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            context_level: ContextLevel::BpKnowledgeUser,
            grouping: GroupingPreset::Table1,
            alpha: 0.3,
            seed: 7,
            split: SplitMode::Subject,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordFault {
    pub subject_id: String,
    pub visit_day: VisitDay,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub n: usize,
    pub sbp: Option<MetricSet>,
    pub dbp: Option<MetricSet>,
}

/// Mean of the per-fold metric values (the alternative pooling rule).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldMeanMetrics {
    pub sbp_mae_mmhg: f64,
    pub sbp_me_mmhg: f64,
    pub sbp_sde_mmhg: f64,
    pub dbp_mae_mmhg: f64,
    pub dbp_me_mmhg: f64,
    pub dbp_sde_mmhg: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BpPointSets {
    /// (mean of ref and est, ref - est) pairs.
    pub bland_altman: Vec<(f64, f64)>,
    /// (ref, est) pairs.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub tool_name: String,
    pub tool_version: String,
    pub fingerprint: String,
    pub estimator: String,
    pub context_level: ContextLevel,
    pub alpha: f64,
    pub seed: u64,
    pub k_folds: usize,
    pub n_records: usize,
    pub n_evaluated: usize,
    pub excluded_no_basal: usize,
    pub clamped_estimates: usize,
    pub per_fold: Vec<FoldMetrics>,
    pub fold_mean: Option<FoldMeanMetrics>,
    pub pooled_sbp: MetricSet,
    pub pooled_dbp: MetricSet,
    pub correlation_sbp_r: Option<f64>,
    pub correlation_dbp_r: Option<f64>,
    pub sbp: BpPointSets,
    pub dbp: BpPointSets,
    pub faults: Vec<RecordFault>,
}

#[derive(Debug, Clone)]
enum FreeOutcome {
    Estimate { reading: BPReading, clamped: bool },
    Fault(String),
    NotInPlan,
}

#[derive(Debug, Clone)]
struct FreeEstimates {
    outcomes: Vec<FreeOutcome>,
}

fn basal_map(records: &[FeatureVector]) -> BTreeMap<String, BasalBP> {
    let mut day_d: BTreeMap<String, Vec<BPReading>> = BTreeMap::new();
    for r in records {
        if r.visit_day == VisitDay::D {
            day_d.entry(r.subject_id.clone()).or_default().push(BPReading {
                sbp_mmhg: r.ref_sbp_mmhg,
                dbp_mmhg: r.ref_dbp_mmhg,
            });
        }
    }
    day_d
        .into_iter()
        .map(|(subject, readings)| {
            let basal = compute_basal(&readings).expect("non-empty by construction");
            (subject, basal)
        })
        .collect()
}

fn fold_lookup(records: &[FeatureVector], plan: &FoldPlan, split: SplitMode) -> Vec<Option<usize>> {
    records
        .iter()
        .map(|r| {
            plan.assignments
                .get(&split.key(&r.subject_id, r.visit_day))
                .copied()
        })
        .collect()
}

/// Subject-level down-sampling of a training fold. Selection is by seeded
/// shuffle; surviving rows keep their original order so a fraction of 1.0
/// is a strict no-op.
fn down_sample_subjects(
    train_idx: &[usize],
    records: &[FeatureVector],
    fraction: f64,
    seed: u64,
    fold: usize,
) -> Vec<usize> {
    let mut subjects: Vec<&str> = train_idx
        .iter()
        .map(|&i| records[i].subject_id.as_str())
        .collect();
    subjects.sort_unstable();
    subjects.dedup();
    let keep = ((fraction * subjects.len() as f64).ceil() as usize).clamp(1, subjects.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fold as u64 + 1);
    let mut shuffled = subjects.clone();
    shuffled.shuffle(&mut rng);
    let retained: std::collections::BTreeSet<&str> = shuffled.into_iter().take(keep).collect();
    train_idx
        .iter()
        .copied()
        .filter(|&i| retained.contains(records[i].subject_id.as_str()))
        .collect()
}

fn collect_free(
    records: &[FeatureVector],
    estimator: &EstimatorSpec,
    cfg: &ExperimentConfig,
    plan: &FoldPlan,
    basal: &BTreeMap<String, BasalBP>,
    down_sample: Option<f64>,
) -> Result<FreeEstimates> {
    let fold_of = fold_lookup(records, plan, cfg.split);
    let mut outcomes: Vec<FreeOutcome> = fold_of
        .iter()
        .map(|f| match f {
            Some(_) => FreeOutcome::Fault("not yet estimated".to_owned()),
            None => FreeOutcome::NotInPlan,
        })
        .collect();

    match estimator {
        EstimatorSpec::Oracle => {
            for (i, r) in records.iter().enumerate() {
                if fold_of[i].is_some() {
                    outcomes[i] = FreeOutcome::Estimate {
                        reading: BPReading {
                            sbp_mmhg: r.ref_sbp_mmhg,
                            dbp_mmhg: r.ref_dbp_mmhg,
                        },
                        clamped: false,
                    };
                }
            }
        }
        EstimatorSpec::Zero => {
            for (i, r) in records.iter().enumerate() {
                if fold_of[i].is_none() {
                    continue;
                }
                outcomes[i] = match basal.get(&r.subject_id) {
                    Some(b) => FreeOutcome::Estimate {
                        reading: zero_baseline(b),
                        clamped: false,
                    },
                    None => FreeOutcome::Fault("no day-D basal".to_owned()),
                };
            }
        }
        EstimatorSpec::Baseline { kind, hyper } => {
            let folds: Vec<usize> = (0..plan.k).collect();
            let per_fold = parallel::map_slice(&folds, |&fold| -> Result<Vec<(usize, FreeOutcome)>> {
                let train_idx: Vec<usize> = (0..records.len())
                    .filter(|&i| fold_of[i].is_some_and(|f| f != fold))
                    .collect();
                let train_idx = match down_sample {
                    Some(fraction) => {
                        let sampled =
                            down_sample_subjects(&train_idx, records, fraction, cfg.seed, fold);
                        if sampled.len() < MIN_TRAINING_ROWS {
                            return Err(Error::TrainingTooSmall {
                                fraction,
                                rows: sampled.len(),
                                min_rows: MIN_TRAINING_ROWS,
                            });
                        }
                        sampled
                    }
                    None => train_idx,
                };
                let train_rows: Vec<FeatureVector> =
                    train_idx.iter().map(|&i| records[i].clone()).collect();
                let model = train_baseline(*kind, &train_rows, hyper, cfg.seed)?;
                let mut out = Vec::new();
                for i in (0..records.len()).filter(|&i| fold_of[i] == Some(fold)) {
                    let outcome = match predict_baseline(&model, &records[i]) {
                        Ok(p) => FreeOutcome::Estimate {
                            reading: p.reading,
                            clamped: p.clamped,
                        },
                        Err(e) => FreeOutcome::Fault(e.to_string()),
                    };
                    out.push((i, outcome));
                }
                Ok(out)
            });
            for fold_result in per_fold {
                for (i, outcome) in fold_result? {
                    outcomes[i] = outcome;
                }
            }
        }
        EstimatorSpec::Endpoint { cfg: endpoint_cfg } => {
            let grouping = GroupingConfig::preset(cfg.grouping);
            let client = ChatClient::new(endpoint_cfg.clone())?;
            let mut indices = Vec::new();
            let mut prompts = Vec::new();
            for (i, r) in records.iter().enumerate() {
                if fold_of[i].is_none() {
                    continue;
                }
                match build_prompt(r, cfg.context_level, &grouping) {
                    Ok(p) => {
                        indices.push(i);
                        prompts.push(p);
                    }
                    Err(e) => outcomes[i] = FreeOutcome::Fault(e.to_string()),
                }
            }
            let replies = client.estimate_batch(&prompts);
            for (i, reply) in indices.into_iter().zip(replies) {
                outcomes[i] = match reply.and_then(|est| reading_from_map_pp(est.map_mmhg, est.pp_mmhg))
                {
                    Ok(reading) => FreeOutcome::Estimate {
                        reading,
                        clamped: false,
                    },
                    Err(e) => FreeOutcome::Fault(e.to_string()),
                };
            }
        }
    }

    Ok(FreeEstimates { outcomes })
}

fn fingerprint(
    estimator: &EstimatorSpec,
    cfg: &ExperimentConfig,
    plan: &FoldPlan,
    extra: &str,
) -> String {
    let payload = serde_json::json!({
        "tool": crate::TOOL_NAME,
        "version": crate::TOOL_VERSION,
        "estimator": estimator,
        "config": cfg,
        "fold_seed": plan.seed,
        "k": plan.k,
        "extra": extra,
    });
    let mut hasher = Sha256::new();
    hasher.update(payload.to_string().as_bytes());
    hasher
        .finalize()
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn assemble(
    records: &[FeatureVector],
    free: &FreeEstimates,
    estimator: &EstimatorSpec,
    cfg: &ExperimentConfig,
    plan: &FoldPlan,
    basal: &BTreeMap<String, BasalBP>,
    alpha: f64,
    print: &str,
) -> Result<EvaluationReport> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    let fold_of = fold_lookup(records, plan, cfg.split);

    let mut faults = Vec::new();
    let mut excluded_no_basal = 0usize;
    let mut clamped = 0usize;
    let mut per_fold_data: Vec<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> =
        vec![(Vec::new(), Vec::new(), Vec::new(), Vec::new()); plan.k];

    for (i, record) in records.iter().enumerate() {
        let Some(fold) = fold_of[i] else {
            faults.push(RecordFault {
                subject_id: record.subject_id.clone(),
                visit_day: record.visit_day,
                message: "record key missing from fold plan".to_owned(),
            });
            continue;
        };
        match &free.outcomes[i] {
            FreeOutcome::NotInPlan => unreachable!("fold lookup disagreed with free pass"),
            FreeOutcome::Fault(message) => faults.push(RecordFault {
                subject_id: record.subject_id.clone(),
                visit_day: record.visit_day,
                message: message.clone(),
            }),
            FreeOutcome::Estimate { reading, clamped: was_clamped } => {
                let Some(base) = basal.get(&record.subject_id) else {
                    excluded_no_basal += 1;
                    continue;
                };
                if *was_clamped {
                    clamped += 1;
                }
                let cal = calibrate(reading, base, alpha)?;
                let slot = &mut per_fold_data[fold];
                slot.0.push(record.ref_sbp_mmhg);
                slot.1.push(cal.sbp_mmhg);
                slot.2.push(record.ref_dbp_mmhg);
                slot.3.push(cal.dbp_mmhg);
            }
        }
    }

    let mut per_fold = Vec::with_capacity(plan.k);
    let mut all_ref_sbp = Vec::new();
    let mut all_est_sbp = Vec::new();
    let mut all_ref_dbp = Vec::new();
    let mut all_est_dbp = Vec::new();
    for (fold, (ref_sbp, est_sbp, ref_dbp, est_dbp)) in per_fold_data.iter().enumerate() {
        let sbp = compute_metrics(ref_sbp, est_sbp).ok();
        let dbp = compute_metrics(ref_dbp, est_dbp).ok();
        per_fold.push(FoldMetrics {
            fold,
            n: ref_sbp.len(),
            sbp,
            dbp,
        });
        all_ref_sbp.extend_from_slice(ref_sbp);
        all_est_sbp.extend_from_slice(est_sbp);
        all_ref_dbp.extend_from_slice(ref_dbp);
        all_est_dbp.extend_from_slice(est_dbp);
    }

    let pooled_sbp = compute_metrics(&all_ref_sbp, &all_est_sbp)?;
    let pooled_dbp = compute_metrics(&all_ref_dbp, &all_est_dbp)?;

    let fold_mean = {
        let complete: Vec<&FoldMetrics> = per_fold
            .iter()
            .filter(|f| f.sbp.is_some() && f.dbp.is_some())
            .collect();
        if complete.is_empty() {
            None
        } else {
            let n = complete.len() as f64;
            let avg = |pick: &dyn Fn(&FoldMetrics) -> f64| {
                complete.iter().map(|f| pick(f)).sum::<f64>() / n
            };
            Some(FoldMeanMetrics {
                sbp_mae_mmhg: avg(&|f| f.sbp.unwrap().mae_mmhg),
                sbp_me_mmhg: avg(&|f| f.sbp.unwrap().me_mmhg),
                sbp_sde_mmhg: avg(&|f| f.sbp.unwrap().sde_mmhg),
                dbp_mae_mmhg: avg(&|f| f.dbp.unwrap().mae_mmhg),
                dbp_me_mmhg: avg(&|f| f.dbp.unwrap().me_mmhg),
                dbp_sde_mmhg: avg(&|f| f.dbp.unwrap().sde_mmhg),
            })
        }
    };

    let point_sets = |refs: &[f64], ests: &[f64]| BpPointSets {
        bland_altman: refs
            .iter()
            .zip(ests)
            .map(|(r, e)| (0.5 * (r + e), r - e))
            .collect(),
        points: refs.iter().zip(ests).map(|(r, e)| (*r, *e)).collect(),
    };

    Ok(EvaluationReport {
        tool_name: crate::TOOL_NAME.to_owned(),
        tool_version: crate::TOOL_VERSION.to_owned(),
        fingerprint: fingerprint(estimator, cfg, plan, print),
        estimator: estimator.describe(),
        context_level: cfg.context_level,
        alpha,
        seed: cfg.seed,
        k_folds: plan.k,
        n_records: records.len(),
        n_evaluated: all_ref_sbp.len(),
        excluded_no_basal,
        clamped_estimates: clamped,
        per_fold,
        fold_mean,
        correlation_sbp_r: pearson_r(&all_ref_sbp, &all_est_sbp)?,
        correlation_dbp_r: pearson_r(&all_ref_dbp, &all_est_dbp)?,
        pooled_sbp,
        pooled_dbp,
        sbp: point_sets(&all_ref_sbp, &all_est_sbp),
        dbp: point_sets(&all_ref_dbp, &all_est_dbp),
        faults,
    })
}

/// Run one cross-validated experiment at `cfg.alpha`.
pub fn run_experiment(
    records: &[FeatureVector],
    estimator: &EstimatorSpec,
    cfg: &ExperimentConfig,
    plan: &FoldPlan,
) -> Result<EvaluationReport> {
    let basal = basal_map(records);
    let free = collect_free(records, estimator, cfg, plan, &basal, None)?;
    assemble(records, &free, estimator, cfg, plan, &basal, cfg.alpha, "run")
}

/// The 11-point grid 0.0, 0.1, ..., 1.0.
pub fn default_alpha_grid() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

/// Evaluate a grid of alphas against one set of free estimates. Estimates
/// are computed once; the blend acts only on outputs, so reuse is exact.
pub fn sweep_alpha(
    records: &[FeatureVector],
    estimator: &EstimatorSpec,
    cfg: &ExperimentConfig,
    plan: &FoldPlan,
    grid: &[f64],
) -> Result<Vec<(f64, EvaluationReport)>> {
    let basal = basal_map(records);
    let free = collect_free(records, estimator, cfg, plan, &basal, None)?;
    grid.iter()
        .map(|&alpha| {
            let label = format!("alpha-sweep:{alpha}");
            assemble(records, &free, estimator, cfg, plan, &basal, alpha, &label)
                .map(|report| (alpha, report))
        })
        .collect()
}

/// Down-sample the training folds (subject-level) at each fraction and
/// re-run the baseline experiment. Test folds are untouched.
pub fn sweep_training_size(
    records: &[FeatureVector],
    kind: BaselineKind,
    hyper: &BaselineHyper,
    cfg: &ExperimentConfig,
    plan: &FoldPlan,
    fractions: &[f64],
) -> Result<Vec<(f64, EvaluationReport)>> {
    let estimator = EstimatorSpec::Baseline {
        kind,
        hyper: *hyper,
    };
    let basal = basal_map(records);
    fractions
        .iter()
        .map(|&fraction| {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(Error::TrainingTooSmall {
                    fraction,
                    rows: 0,
                    min_rows: MIN_TRAINING_ROWS,
                });
            }
            let free = collect_free(records, &estimator, cfg, plan, &basal, Some(fraction))?;
            let label = format!("train-size:{fraction}");
            assemble(
                records, &free, &estimator, cfg, plan, &basal, cfg.alpha, &label,
            )
            .map(|report| (fraction, report))
        })
        .collect()
}
