//! Standards-style error metrics, fold planning, and the experiment
//! harness.

mod experiment;

pub use experiment::{
    default_alpha_grid, run_experiment, sweep_alpha, sweep_training_size, EstimatorSpec,
    EvaluationReport, ExperimentConfig, FoldMetrics, RecordFault, SplitMode,
};

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// MAE / ME / SDE over one set of reference-estimate pairs. The error
/// convention is `ref - est`; SDE uses the n-1 denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub mae_mmhg: f64,
    pub me_mmhg: f64,
    pub sde_mmhg: f64,
    pub n: usize,
}

pub fn compute_metrics(refs: &[f64], ests: &[f64]) -> Result<MetricSet> {
    if refs.len() != ests.len() {
        return Err(Error::MetricLengthMismatch {
            refs: refs.len(),
            ests: ests.len(),
        });
    }
    let n = refs.len();
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    let errors: Vec<f64> = refs.iter().zip(ests).map(|(r, e)| r - e).collect();
    let me = errors.iter().sum::<f64>() / n as f64;
    let mae = errors.iter().map(|e| e.abs()).sum::<f64>() / n as f64;
    let var = errors.iter().map(|e| (e - me) * (e - me)).sum::<f64>() / (n - 1) as f64;
    Ok(MetricSet {
        mae_mmhg: mae,
        me_mmhg: me,
        sde_mmhg: var.sqrt(),
        n,
    })
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson_r(xs: &[f64], ys: &[f64]) -> Result<Option<f64>> {
    if xs.len() != ys.len() {
        return Err(Error::MetricLengthMismatch {
            refs: xs.len(),
            ests: ys.len(),
        });
    }
    let n = xs.len();
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some(sxy / (sxx * syy).sqrt()))
}

/// Deterministic assignment of split keys (subjects, normally) to folds.
/// Fold sizes differ by at most one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: BTreeMap<String, usize>,
    pub seed: u64,
}

pub fn make_folds(keys: &[String], k: usize, seed: u64) -> Result<FoldPlan> {
    let unique: BTreeSet<&String> = keys.iter().collect();
    let n = unique.len();
    if k == 0 || n < k {
        return Err(Error::BadFoldCount { subjects: n, k });
    }
    let mut order: Vec<&String> = unique.into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let assignments = order
        .into_iter()
        .enumerate()
        .map(|(i, key)| (key.clone(), i % k))
        .collect();
    Ok(FoldPlan {
        k,
        assignments,
        seed,
    })
}
