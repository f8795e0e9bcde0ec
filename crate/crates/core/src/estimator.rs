//! Forest weights and quantile inversion.
//!
//! A tree puts weight `1/#L(x)` on every I-point in the leaf containing `x`;
//! the forest averages these over its trees. The conditional quantile is the
//! infimum of `y` with `Σ α_t (τ - 1{Y_t ≤ y}) ≤ 0`, which is always attained
//! at a response in the support of the weights.

use rayon::prelude::*;
use serde::Serialize;

use crate::data::LagDataset;
use crate::error::{Error, Result};
use crate::forest::{enumerate_double_samples, DoubleSample, Forest, Tree};
use crate::synth::check_tau;

/// Sparse nonnegative weights over training indices, sorted by index.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct WeightVector {
    pub weights: Vec<(usize, f64)>,
    /// Mass carried by the weights. For forest weights this is the fraction
    /// of trees whose leaf at the query is nonempty.
    pub total: f64,
}

impl WeightVector {
    /// Builds a vector from arbitrary `(index, weight)` pairs; duplicate
    /// indices are merged and zero weights dropped.
    pub fn from_pairs(mut pairs: Vec<(usize, f64)>) -> Result<Self> {
        if let Some(&(_, w)) = pairs.iter().find(|(_, w)| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::param(format!(
                "weights must be finite and nonnegative, got {w}"
            )));
        }
        pairs.sort_by_key(|&(t, _)| t);
        let mut weights: Vec<(usize, f64)> = Vec::with_capacity(pairs.len());
        for (t, w) in pairs {
            match weights.last_mut() {
                Some(last) if last.0 == t => last.1 += w,
                _ => weights.push((t, w)),
            }
        }
        weights.retain(|&(_, w)| w > 0.0);
        let total = weights.iter().map(|&(_, w)| w).sum();
        Ok(WeightVector { weights, total })
    }

    pub fn get(&self, t: usize) -> f64 {
        self.weights
            .binary_search_by_key(&t, |&(i, _)| i)
            .map(|pos| self.weights[pos].1)
            .unwrap_or(0.0)
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().map(|&(_, w)| w).fold(0.0, f64::max)
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Weights of a single tree: uniform over the I-points of the leaf at `x`.
pub fn tree_weights(tree: &Tree, x: &[f64]) -> WeightVector {
    let samples = tree.leaf_samples(tree.leaf_of(x));
    if samples.is_empty() {
        return WeightVector::default();
    }
    let w = 1.0 / samples.len() as f64;
    WeightVector {
        weights: samples.iter().map(|&t| (t, w)).collect(),
        total: 1.0,
    }
}

fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: x.len(),
        });
    }
    Ok(())
}

/// Averages tree weights over `trees` for training data of size `n`.
pub fn average_tree_weights<'a>(
    trees: impl IntoIterator<Item = &'a Tree>,
    n: usize,
    x: &[f64],
) -> WeightVector {
    let mut dense = vec![0.0; n];
    let mut touched = Vec::new();
    let mut count = 0usize;
    let mut nonempty = 0usize;
    for tree in trees {
        count += 1;
        let samples = tree.leaf_samples(tree.leaf_of(x));
        if samples.is_empty() {
            continue;
        }
        nonempty += 1;
        let w = 1.0 / samples.len() as f64;
        for &t in samples {
            if dense[t] == 0.0 {
                touched.push(t);
            }
            dense[t] += w;
        }
    }
    if count == 0 {
        return WeightVector::default();
    }
    touched.sort_unstable();
    let b = count as f64;
    WeightVector {
        weights: touched.into_iter().map(|t| (t, dense[t] / b)).collect(),
        total: nonempty as f64 / b,
    }
}

/// `α_t(x) = (1/B) Σ_b α_{b,t}(x)`.
pub fn forest_weights(forest: &Forest, x: &[f64]) -> Result<WeightVector> {
    check_dim(forest.p(), x)?;
    Ok(average_tree_weights(&forest.trees, forest.train.len(), x))
}

/// Exhaustive weights over every double-sample of size `s`, with the tree
/// for each double-sample supplied by `grow`. Small `N` only.
pub fn exhaustive_weights<F>(n: usize, s: usize, x: &[f64], grow: F) -> Result<WeightVector>
where
    F: Fn(&DoubleSample) -> Tree,
{
    let all = enumerate_double_samples(n, s)?;
    let trees: Vec<Tree> = all.iter().map(grow).collect();
    Ok(average_tree_weights(&trees, n, x))
}

/// Sorted `(response, weight)` support with equal responses merged.
fn weighted_support(weights: &WeightVector, responses: &[f64]) -> Vec<(f64, f64)> {
    let mut support: Vec<(f64, f64)> = weights
        .weights
        .iter()
        .map(|&(t, w)| (responses[t], w))
        .collect();
    support.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(support.len());
    for (y, w) in support {
        match merged.last_mut() {
            Some(last) if last.0 == y => last.1 += w,
            _ => merged.push((y, w)),
        }
    }
    merged
}

/// Smallest response whose cumulative weight reaches `τ · total`, for each
/// `τ` in `taus`.
pub fn weighted_quantiles(
    weights: &WeightVector,
    responses: &[f64],
    taus: &[f64],
) -> Result<Vec<f64>> {
    for &tau in taus {
        check_tau(tau)?;
    }
    if weights.is_empty() || weights.total <= 0.0 {
        return Err(Error::EmptyCoverage);
    }
    if let Some(&(t, _)) = weights.weights.iter().find(|&&(t, _)| t >= responses.len()) {
        return Err(Error::param(format!("weight index {t} has no response")));
    }
    let support = weighted_support(weights, responses);
    Ok(taus
        .iter()
        .map(|&tau| {
            let target = tau * weights.total;
            let mut cum = 0.0;
            for &(y, w) in &support {
                cum += w;
                if cum >= target {
                    return y;
                }
            }
            // rounding can leave the running sum a hair below the total
            support.last().map(|&(y, _)| y).unwrap_or(f64::NAN)
        })
        .collect())
}

pub fn weighted_quantile(weights: &WeightVector, responses: &[f64], tau: f64) -> Result<f64> {
    Ok(weighted_quantiles(weights, responses, &[tau])?[0])
}

/// Quantile estimates for each query row; a row fails only when no tree
/// covers the query.
pub fn predict_quantiles(
    forest: &Forest,
    queries: &[Vec<f64>],
    taus: &[f64],
) -> Vec<Result<Vec<f64>>> {
    queries
        .par_iter()
        .map(|x| {
            let w = forest_weights(forest, x)?;
            weighted_quantiles(&w, forest.train.responses(), taus)
        })
        .collect()
}

/// Same as [`predict_quantiles`] over the covariates of a dataset.
pub fn predict_dataset(forest: &Forest, data: &LagDataset, taus: &[f64]) -> Vec<Result<Vec<f64>>> {
    let queries: Vec<Vec<f64>> = data.rows().map(<[f64]>::to_vec).collect();
    predict_quantiles(forest, &queries, taus)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreDiagnostic {
    /// `Σ_t α_t(x) (τ - 1{Y_t ≤ q̂})`.
    pub score: f64,
    /// `max_t α_t(x)`.
    pub bound: f64,
}

impl ScoreDiagnostic {
    pub fn holds(&self) -> bool {
        self.score.abs() <= self.bound
    }
}

/// Weighted quantile score at `q_hat` and the largest single weight.
///
/// With distinct responses `|score| ≤ bound` always holds at the quantile
/// returned by [`weighted_quantile`]; tied responses can exceed it.
pub fn score_at(
    weights: &WeightVector,
    responses: &[f64],
    q_hat: f64,
    tau: f64,
) -> ScoreDiagnostic {
    let score = weights
        .weights
        .iter()
        .map(|&(t, w)| w * (tau - if responses[t] <= q_hat { 1.0 } else { 0.0 }))
        .sum();
    ScoreDiagnostic {
        score,
        bound: weights.max_weight(),
    }
}

pub fn score_diagnostic(
    forest: &Forest,
    x: &[f64],
    q_hat: f64,
    tau: f64,
) -> Result<ScoreDiagnostic> {
    let w = forest_weights(forest, x)?;
    Ok(score_at(&w, forest.train.responses(), q_hat, tau))
}
