//! AdaBoost.R2 over shallow regression trees, linear loss.
//!
//! Each round resamples the training set by the current weights, fits a
//! tree, measures per-row relative losses on the full set, and reweights.
//! Prediction is the weighted median of the stage outputs with weights
//! `ln(1/beta_t)`. Rounds stop early when the average loss reaches 0.5 or a
//! stage fits the data exactly.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{RegressionTree, TreeParams};
use crate::error::{Error, Result};

/// Stage weight assigned when a round fits the training set exactly.
const PERFECT_STAGE_WEIGHT: f64 = 23.025_850_929_940_46; // ln(1e10)

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostParams {
    pub n_rounds: usize,
    pub tree: TreeParams,
}

impl Default for AdaBoostParams {
    fn default() -> Self {
        Self {
            n_rounds: 50,
            tree: TreeParams {
                max_depth: 3,
                min_samples_leaf: 5,
                min_samples_split: 10,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostR2 {
    stages: Vec<(RegressionTree, f64)>,
    /// Average weighted loss per round, recorded during fitting.
    pub round_losses: Vec<f64>,
}

impl AdaBoostR2 {
    pub fn fit(
        x: &[Vec<f64>],
        y: &[f64],
        params: &AdaBoostParams,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let n = x.len();
        if n == 0 || n != y.len() {
            return Err(Error::TooFewRows {
                need: 1,
                got: n.min(y.len()),
            });
        }
        let mut weights = vec![1.0 / n as f64; n];
        let mut stages: Vec<(RegressionTree, f64)> = Vec::new();
        let mut round_losses = Vec::new();

        for _ in 0..params.n_rounds {
            let sample = sample_weighted(n, &weights, rng);
            let sx: Vec<Vec<f64>> = sample.iter().map(|&i| x[i].clone()).collect();
            let sy: Vec<f64> = sample.iter().map(|&i| y[i]).collect();
            let tree = match RegressionTree::fit(&sx, &sy, &params.tree) {
                Ok(t) => t,
                // A degenerate bootstrap (all rows identical) ends boosting.
                Err(Error::ConstantFeatures) if !stages.is_empty() => break,
                Err(e) => return Err(e),
            };

            let errors: Vec<f64> = x.iter().zip(y).map(|(r, t)| (tree.predict(r) - t).abs()).collect();
            let max_error = errors.iter().cloned().fold(0.0, f64::max);
            if max_error <= f64::EPSILON {
                stages.push((tree, PERFECT_STAGE_WEIGHT));
                round_losses.push(0.0);
                break;
            }
            let losses: Vec<f64> = errors.iter().map(|e| e / max_error).collect();
            let avg_loss: f64 = weights.iter().zip(&losses).map(|(w, l)| w * l).sum();
            if avg_loss >= 0.5 {
                if stages.is_empty() {
                    // Keep one weak stage rather than fail outright.
                    stages.push((tree, (1.0f64 / 0.999).ln()));
                    round_losses.push(avg_loss);
                }
                break;
            }
            let beta = avg_loss / (1.0 - avg_loss);
            let stage_weight = (1.0 / beta).ln();
            for (w, l) in weights.iter_mut().zip(&losses) {
                *w *= beta.powf(1.0 - l);
            }
            let total: f64 = weights.iter().sum();
            for w in weights.iter_mut() {
                *w /= total;
            }
            stages.push((tree, stage_weight));
            round_losses.push(avg_loss);
        }

        Ok(Self {
            stages,
            round_losses,
        })
    }

    pub fn n_stages(&self) -> usize {
        self.stages.len()
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        weighted_median(self.stages.iter().map(|(t, w)| (t.predict(row), *w)))
    }

    /// Prediction truncated to the first `k` stages.
    fn predict_staged(&self, row: &[f64], k: usize) -> f64 {
        weighted_median(self.stages.iter().take(k).map(|(t, w)| (t.predict(row), *w)))
    }

    /// Training-set MAE after each boosting round.
    pub fn staged_training_mae(&self, x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        (1..=self.stages.len())
            .map(|k| {
                x.iter()
                    .zip(y)
                    .map(|(r, t)| (self.predict_staged(r, k) - t).abs())
                    .sum::<f64>()
                    / x.len() as f64
            })
            .collect()
    }
}

/// Weighted median: smallest prediction whose cumulative stage weight
/// reaches half of the total.
fn weighted_median(items: impl Iterator<Item = (f64, f64)>) -> f64 {
    let mut pairs: Vec<(f64, f64)> = items.collect();
    debug_assert!(!pairs.is_empty());
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let total: f64 = pairs.iter().map(|(_, w)| w).sum();
    let mut acc = 0.0;
    for (value, weight) in &pairs {
        acc += weight;
        if acc >= 0.5 * total {
            return *value;
        }
    }
    pairs.last().unwrap().0
}

/// `n` draws with replacement, proportional to `weights`.
fn sample_weighted(n: usize, weights: &[f64], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut cumulative = Vec::with_capacity(n);
    let mut acc = 0.0;
    for w in weights {
        acc += w;
        cumulative.push(acc);
    }
    let total = acc;
    (0..n)
        .map(|_| {
            let draw: f64 = rng.random::<f64>() * total;
            cumulative.partition_point(|&c| c < draw).min(n - 1)
        })
        .collect()
}
