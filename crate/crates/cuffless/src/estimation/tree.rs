//! CART regression tree with variance-reduction splits.
//!
//! Split search is exhaustive over features and thresholds; candidates are
//! midpoints between adjacent distinct values. Tie-breaking keeps the first
//! strictly better candidate in (feature, threshold) order, which makes
//! fitting fully deterministic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 6,
            min_samples_leaf: 5,
            min_samples_split: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    n_features: usize,
}

impl RegressionTree {
    /// Fit on row-major data. Requires at least one row and one non-constant
    /// feature column.
    pub fn fit(x: &[Vec<f64>], y: &[f64], params: &TreeParams) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::TooFewRows {
                need: 1,
                got: x.len().min(y.len()),
            });
        }
        let n_features = x[0].len();
        let constant = (0..n_features).all(|f| {
            let first = x[0][f];
            x.iter().all(|row| row[f] == first)
        });
        if constant {
            return Err(Error::ConstantFeatures);
        }
        let mut tree = Self {
            nodes: Vec::new(),
            n_features,
        };
        let indices: Vec<usize> = (0..x.len()).collect();
        tree.build(x, y, &indices, 0, params);
        Ok(tree)
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    fn build(
        &mut self,
        x: &[Vec<f64>],
        y: &[f64],
        indices: &[usize],
        depth: usize,
        params: &TreeParams,
    ) -> usize {
        let mean = indices.iter().map(|&i| y[i]).sum::<f64>() / indices.len() as f64;
        if depth >= params.max_depth || indices.len() < params.min_samples_split {
            return self.push(Node::Leaf { value: mean });
        }
        let Some((feature, threshold)) = best_split(x, y, indices, params.min_samples_leaf) else {
            return self.push(Node::Leaf { value: mean });
        };

        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
            indices.iter().partition(|&&i| x[i][feature] <= threshold);
        // Reserve a slot so children are appended after their parent.
        let slot = self.push(Node::Leaf { value: mean });
        let left = self.build(x, y, &left_idx, depth + 1, params);
        let right = self.build(x, y, &right_idx, depth + 1, params);
        self.nodes[slot] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        slot
    }

    fn push(&mut self, node: Node) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

/// Best (feature, threshold) by sum-of-squares reduction, or `None` when no
/// split satisfies the leaf-size constraint.
fn best_split(
    x: &[Vec<f64>],
    y: &[f64],
    indices: &[usize],
    min_leaf: usize,
) -> Option<(usize, f64)> {
    let n = indices.len();
    let total_sum: f64 = indices.iter().map(|&i| y[i]).sum();
    let total_sq: f64 = indices.iter().map(|&i| y[i] * y[i]).sum();
    let parent_sse = total_sq - total_sum * total_sum / n as f64;

    let n_features = x[indices[0]].len();
    let mut best: Option<(usize, f64, f64)> = None; // (feature, threshold, sse)

    let mut order: Vec<usize> = indices.to_vec();
    for feature in 0..n_features {
        order.sort_by(|&a, &b| {
            x[a][feature]
                .partial_cmp(&x[b][feature])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        for split_at in 1..n {
            let prev = order[split_at - 1];
            left_sum += y[prev];
            left_sq += y[prev] * y[prev];
            let (lo, hi) = (x[prev][feature], x[order[split_at]][feature]);
            if lo == hi {
                continue;
            }
            if split_at < min_leaf || n - split_at < min_leaf {
                continue;
            }
            let right_sum = total_sum - left_sum;
            let right_sq = total_sq - left_sq;
            let sse = (left_sq - left_sum * left_sum / split_at as f64)
                + (right_sq - right_sum * right_sum / (n - split_at) as f64);
            if best.is_none_or(|(_, _, s)| sse < s) {
                best = Some((feature, 0.5 * (lo + hi), sse));
            }
        }
    }
    best.filter(|(_, _, sse)| *sse < parent_sse).map(|(f, t, _)| (f, t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_target_fits_a_single_leaf() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64]).collect();
        let y = vec![120.0; 30];
        let tree = RegressionTree::fit(&x, &y, &TreeParams::default()).unwrap();
        for row in &x {
            assert_eq!(tree.predict(row), 120.0);
        }
    }

    #[test]
    fn recovers_a_step_function() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..40).map(|i| if i < 20 { 1.0 } else { 5.0 }).collect();
        let tree = RegressionTree::fit(&x, &y, &TreeParams::default()).unwrap();
        assert_eq!(tree.predict(&[3.0]), 1.0);
        assert_eq!(tree.predict(&[33.0]), 5.0);
    }

    #[test]
    fn constant_features_are_rejected() {
        let x: Vec<Vec<f64>> = (0..30).map(|_| vec![1.0, 2.0]).collect();
        let y: Vec<f64> = (0..30).map(|i| i as f64).collect();
        assert!(matches!(
            RegressionTree::fit(&x, &y, &TreeParams::default()),
            Err(Error::ConstantFeatures)
        ));
    }

    #[test]
    fn fitting_is_deterministic() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let x: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = x.iter().map(|r| 3.0 * r[0] - r[2]).collect();
        let a = RegressionTree::fit(&x, &y, &TreeParams::default()).unwrap();
        let b = RegressionTree::fit(&x, &y, &TreeParams::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn respects_min_leaf_size() {
        let x: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let params = TreeParams {
            max_depth: 10,
            min_samples_leaf: 6,
            min_samples_split: 2,
        };
        let tree = RegressionTree::fit(&x, &y, &params).unwrap();
        // Only one split is possible: 6 | 6.
        let splits = tree
            .nodes
            .iter()
            .filter(|n| matches!(n, Node::Split { .. }))
            .count();
        assert_eq!(splits, 1);
    }
}
