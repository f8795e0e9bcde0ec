//! Honest double-sample trees and the forest that owns them.
//!
//! Each tree receives a [`DoubleSample`]: a J-half used to place splits and a
//! disjoint I-half whose indices are stored in the leaves for estimation.
//! Splits are ω-regular in the J-half and never leave fewer than `k`
//! I-points in a child; growth stops once a node holds fewer than `2k`
//! I-points.

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::LagDataset;
use crate::error::{Error, Result};
use crate::synth::check_tau;

/// Largest `N` accepted by [`enumerate_double_samples`].
pub const ENUMERATION_CAP: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub num_trees: usize,
    /// `s / N`; the subsample size is `max(2, round(fraction · N))`.
    pub subsample_fraction: f64,
    /// Minimum fraction of a node's J-points sent to each child.
    pub omega: f64,
    /// Leaf occupancy target: between `k` and `2k - 1` I-points.
    pub min_leaf_k: usize,
    /// Poisson mean for the number of candidate directions per split.
    /// `None` means `min(⌈√p⌉ + 1, p)`.
    pub mtry_mean: Option<usize>,
    /// Quantile levels whose pseudo-outcomes drive the split criterion.
    pub tau_levels: Vec<f64>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            num_trees: 2000,
            subsample_fraction: 0.5,
            omega: 0.05,
            min_leaf_k: 5,
            mtry_mean: None,
            tau_levels: vec![0.1, 0.5, 0.9],
            seed: 42,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_trees == 0 {
            return Err(Error::param("num_trees must be positive"));
        }
        if !(self.subsample_fraction > 0.0 && self.subsample_fraction < 1.0) {
            return Err(Error::param(format!(
                "subsample_fraction {} must lie in (0, 1)",
                self.subsample_fraction
            )));
        }
        if !(self.omega > 0.0 && self.omega <= 0.2) {
            return Err(Error::param(format!(
                "omega {} must lie in (0, 0.2]",
                self.omega
            )));
        }
        if self.min_leaf_k == 0 {
            return Err(Error::param("min_leaf_k must be at least 1"));
        }
        if self.mtry_mean == Some(0) {
            return Err(Error::param("mtry_mean must be positive"));
        }
        if self.tau_levels.is_empty() {
            return Err(Error::param("tau_levels must not be empty"));
        }
        self.tau_levels.iter().try_for_each(|&t| check_tau(t))
    }

    pub fn subsample_size(&self, n: usize) -> Result<usize> {
        let s = ((self.subsample_fraction * n as f64).round() as usize).max(2);
        if s > n {
            return Err(Error::param(format!(
                "subsample size {s} exceeds the {n} available training pairs"
            )));
        }
        Ok(s)
    }

    pub fn mtry_mean_for(&self, p: usize) -> usize {
        self.mtry_mean
            .unwrap_or_else(|| ((p as f64).sqrt().ceil() as usize + 1).min(p))
            .max(1)
    }
}

/// Disjoint index halves: `a_i` (size ⌊s/2⌋) estimates, `a_j` (size ⌈s/2⌉) splits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DoubleSample {
    pub a_i: Vec<usize>,
    pub a_j: Vec<usize>,
}

impl DoubleSample {
    pub fn s(&self) -> usize {
        self.a_i.len() + self.a_j.len()
    }

    /// Checks sortedness, disjointness, half sizes and index range.
    pub fn validate(&self, n: usize) -> Result<()> {
        let s = self.s();
        if self.a_i.len() != s / 2 || self.a_j.len() != s - s / 2 {
            return Err(Error::param("double-sample halves have the wrong sizes"));
        }
        for half in [&self.a_i, &self.a_j] {
            if half.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::param(
                    "double-sample halves must be sorted and distinct",
                ));
            }
            if half.last().is_some_and(|&m| m >= n) {
                return Err(Error::param("double-sample index out of range"));
            }
        }
        if self.a_i.iter().any(|t| self.a_j.binary_search(t).is_ok()) {
            return Err(Error::param("double-sample halves overlap"));
        }
        Ok(())
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// `N! / (⌊s/2⌋! ⌈s/2⌉! (N - s)!)`.
pub fn double_sample_count(n: usize, s: usize) -> u128 {
    binomial(n, s) * binomial(s, s / 2)
}

fn combinations(pool: &[usize], k: usize) -> Vec<Vec<usize>> {
    fn rec(
        pool: &[usize],
        k: usize,
        start: usize,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        let need = k - cur.len();
        for i in start..=pool.len().saturating_sub(need) {
            cur.push(pool[i]);
            rec(pool, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= pool.len() {
        rec(pool, k, 0, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

/// Every double-sample of size `s` over indices `0..n`, ordered
/// lexicographically by `(a_i, a_j)`. Oracle use only.
pub fn enumerate_double_samples(n: usize, s: usize) -> Result<Vec<DoubleSample>> {
    if n > ENUMERATION_CAP {
        return Err(Error::EnumerationCapped {
            n,
            cap: ENUMERATION_CAP,
        });
    }
    if s == 0 || s > n {
        return Err(Error::param(format!("need 1 <= s <= N, got s={s}, N={n}")));
    }
    let all: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    for a_i in combinations(&all, s / 2) {
        let rest: Vec<usize> = all
            .iter()
            .copied()
            .filter(|t| a_i.binary_search(t).is_err())
            .collect();
        for a_j in combinations(&rest, s - s / 2) {
            out.push(DoubleSample {
                a_i: a_i.clone(),
                a_j,
            });
        }
    }
    Ok(out)
}

/// Uniform size-`s` subset of `0..n`, split uniformly into halves.
pub fn draw_double_sample<R: Rng + ?Sized>(
    n: usize,
    s: usize,
    rng: &mut R,
) -> Result<DoubleSample> {
    if s < 2 || s > n {
        return Err(Error::param(format!("need 2 <= s <= N, got s={s}, N={n}")));
    }
    let mut pool: Vec<usize> = (0..n).collect();
    // partial_shuffle yields a uniformly random ordered selection
    let (chosen, _) = pool.partial_shuffle(rng, s);
    let mut a_i = chosen[..s / 2].to_vec();
    let mut a_j = chosen[s / 2..].to_vec();
    a_i.sort_unstable();
    a_j.sort_unstable();
    Ok(DoubleSample { a_i, a_j })
}

/// Draws `mtry = min(max(Poisson(m), 1), p)` distinct directions, ascending.
pub fn choose_split_directions<R: Rng + ?Sized>(p: usize, m: usize, rng: &mut R) -> Vec<usize> {
    assert!(p >= 1 && m >= 1, "need p >= 1 and m >= 1");
    let draw = Poisson::new(m as f64)
        .map(|d| d.sample(rng) as usize)
        .unwrap_or(m);
    let mtry = mtry_from_draw(draw, p);
    let mut dirs = index::sample(rng, p, mtry).into_vec();
    dirs.sort_unstable();
    dirs
}

pub(crate) fn mtry_from_draw(draw: usize, p: usize) -> usize {
    draw.max(1).min(p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Empirical `τ`-quantile of a sample: the smallest value whose count of
/// values at or below it reaches `τ·n`.
pub(crate) fn sample_quantile(sorted: &[f64], tau: f64) -> f64 {
    let n = sorted.len();
    let rank = ((tau * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

/// Per-point pseudo-outcomes `ρ = 1{y > q̂_P(τ)} - (1 - τ)`, one row per
/// J-point, one column per level.
pub fn pseudo_outcomes(responses: &[f64], tau_levels: &[f64]) -> Vec<Vec<f64>> {
    let mut sorted = responses.to_vec();
    sorted.sort_by(f64::total_cmp);
    let qs: Vec<f64> = tau_levels
        .iter()
        .map(|&t| sample_quantile(&sorted, t))
        .collect();
    responses
        .iter()
        .map(|&y| {
            qs.iter()
                .zip(tau_levels)
                .map(|(&q, &t)| if y > q { t } else { t - 1.0 })
                .collect()
        })
        .collect()
}

/// Minimum J-count per child for a node holding `n_j` J-points.
pub fn min_child_j(omega: f64, n_j: usize) -> usize {
    ((omega * n_j as f64).ceil() as usize).max(1)
}

/// Best ω-regular split of a node, or `None` when no candidate satisfies the
/// child constraints. Only J-responses enter the criterion; I-covariates
/// only enter the occupancy check.
pub fn best_split(
    data: &LagDataset,
    j_idx: &[usize],
    i_idx: &[usize],
    directions: &[usize],
    config: &ForestConfig,
) -> Option<Split> {
    let k = config.min_leaf_k;
    let n_j = j_idx.len();
    let n_i = i_idx.len();
    if n_i < 2 * k || n_j < 2 {
        return None;
    }
    let min_j = min_child_j(config.omega, n_j);
    if 2 * min_j > n_j {
        return None;
    }

    let ys: Vec<f64> = j_idx.iter().map(|&t| data.y(t)).collect();
    let rho = pseudo_outcomes(&ys, &config.tau_levels);
    let levels = config.tau_levels.len();
    let mut totals = vec![0.0; levels];
    for row in &rho {
        for (tot, r) in totals.iter_mut().zip(row) {
            *tot += r;
        }
    }

    let mut best: Option<Split> = None;
    let mut order: Vec<usize> = (0..n_j).collect();
    let mut i_coords: Vec<f64> = Vec::with_capacity(n_i);
    let mut left = vec![0.0; levels];

    for &feature in directions {
        order.sort_by(|&a, &b| {
            data.x(j_idx[a])[feature]
                .total_cmp(&data.x(j_idx[b])[feature])
                .then(a.cmp(&b))
        });
        i_coords.clear();
        i_coords.extend(i_idx.iter().map(|&t| data.x(t)[feature]));
        i_coords.sort_by(f64::total_cmp);

        left.iter_mut().for_each(|v| *v = 0.0);
        let mut i_left = 0usize;
        let mut pos = 0usize;
        while pos < n_j {
            let zeta = data.x(j_idx[order[pos]])[feature];
            while pos < n_j && data.x(j_idx[order[pos]])[feature] == zeta {
                for (l, r) in left.iter_mut().zip(&rho[order[pos]]) {
                    *l += r;
                }
                pos += 1;
            }
            let n_left = pos;
            let n_right = n_j - n_left;
            if n_right < min_j {
                break;
            }
            if n_left < min_j {
                continue;
            }
            while i_left < n_i && i_coords[i_left] <= zeta {
                i_left += 1;
            }
            if i_left < k || n_i - i_left < k {
                continue;
            }
            let gain: f64 = left
                .iter()
                .zip(&totals)
                .map(|(&l, &tot)| {
                    let r = tot - l;
                    l * l / n_left as f64 + r * r / n_right as f64
                })
                .sum();
            if best.is_none_or(|b| gain > b.gain) {
                best = Some(Split {
                    feature,
                    threshold: zeta,
                    gain,
                });
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        j_count: usize,
        i_count: usize,
    },
    Leaf {
        /// I-sample indices whose covariates fall in this leaf.
        samples: Vec<usize>,
        j_count: usize,
        /// Set when the leaf holds fewer than `k` or more than `2k - 1`
        /// I-points (root too small, or no admissible split existed).
        undersized: bool,
    },
}

impl Node {
    pub fn j_count(&self) -> usize {
        match self {
            Node::Split { j_count, .. } | Node::Leaf { j_count, .. } => *j_count,
        }
    }

    pub fn i_count(&self) -> usize {
        match self {
            Node::Split { i_count, .. } => *i_count,
            Node::Leaf { samples, .. } => samples.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    pub double_sample: DoubleSample,
    pub seed: u64,
}

impl Tree {
    pub const ROOT: usize = 0;

    pub fn leaf_of(&self, x: &[f64]) -> usize {
        let mut id = Self::ROOT;
        loop {
            match &self.nodes[id] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    id = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
                Node::Leaf { .. } => return id,
            }
        }
    }

    pub fn leaf_samples(&self, leaf: usize) -> &[usize] {
        match &self.nodes[leaf] {
            Node::Leaf { samples, .. } => samples,
            Node::Split { .. } => &[],
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = (usize, &Node)> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n, Node::Leaf { .. }))
    }

    /// Splits only, ignoring leaf contents.
    pub fn structure(&self) -> Vec<(usize, u64, usize, usize)> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => Some((*feature, threshold.to_bits(), *left, *right)),
                Node::Leaf { .. } => None,
            })
            .collect()
    }

    /// Axis-aligned box of every node, clipped to `bounds`.
    pub fn node_boxes(&self, bounds: &[(f64, f64)]) -> Vec<Vec<(f64, f64)>> {
        let mut boxes = vec![Vec::new(); self.nodes.len()];
        boxes[Self::ROOT] = bounds.to_vec();
        let mut stack = vec![Self::ROOT];
        while let Some(id) = stack.pop() {
            if let Node::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } = &self.nodes[id]
            {
                let mut lb = boxes[id].clone();
                let mut rb = boxes[id].clone();
                lb[*feature].1 = lb[*feature].1.min(*threshold);
                rb[*feature].0 = rb[*feature].0.max(*threshold);
                boxes[*left] = lb;
                boxes[*right] = rb;
                stack.push(*left);
                stack.push(*right);
            }
        }
        boxes
    }
}

/// Grows one honest tree. A pure function of its inputs and the RNG state.
pub fn grow_tree<R: Rng + ?Sized>(
    data: &LagDataset,
    ds: &DoubleSample,
    config: &ForestConfig,
    rng: &mut R,
) -> Tree {
    let k = config.min_leaf_k;
    let p = data.p();
    let m = config.mtry_mean_for(p);
    let mut nodes: Vec<Option<Node>> = vec![None];
    let mut stack = vec![(Tree::ROOT, ds.a_j.clone(), ds.a_i.clone())];

    while let Some((id, j_idx, i_idx)) = stack.pop() {
        let split = if i_idx.len() >= 2 * k {
            let dirs = choose_split_directions(p, m, rng);
            best_split(data, &j_idx, &i_idx, &dirs, config)
        } else {
            None
        };
        let Some(split) = split else {
            let undersized = i_idx.len() < k || i_idx.len() > 2 * k - 1;
            nodes[id] = Some(Node::Leaf {
                j_count: j_idx.len(),
                samples: i_idx,
                undersized,
            });
            continue;
        };
        let goes_left = |t: &usize| data.x(*t)[split.feature] <= split.threshold;
        let (j_left, j_right): (Vec<usize>, Vec<usize>) = j_idx.iter().partition(|t| goes_left(t));
        let (i_left, i_right): (Vec<usize>, Vec<usize>) = i_idx.iter().partition(|t| goes_left(t));
        let left = nodes.len();
        let right = left + 1;
        nodes.push(None);
        nodes.push(None);
        nodes[id] = Some(Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
            j_count: j_idx.len(),
            i_count: i_idx.len(),
        });
        stack.push((right, j_right, i_right));
        stack.push((left, j_left, i_left));
    }

    Tree {
        nodes: nodes
            .into_iter()
            .map(|n| n.expect("every node assigned"))
            .collect(),
        double_sample: ds.clone(),
        seed: 0,
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable seed for stream `stream` under `master`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    mix64(master ^ mix64(stream.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

/// Draws a double-sample and grows a tree from the seed alone.
pub fn grow_seeded_tree(
    data: &LagDataset,
    config: &ForestConfig,
    s: usize,
    seed: u64,
) -> Result<Tree> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ds = draw_double_sample(data.len(), s, &mut rng)?;
    let mut tree = grow_tree(data, &ds, config, &mut rng);
    tree.seed = seed;
    Ok(tree)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub config: ForestConfig,
    pub trees: Vec<Tree>,
    pub train: LagDataset,
}

impl Forest {
    /// Grows `config.num_trees` trees in parallel; tree `b` depends only on
    /// `derive_seed(config.seed, b)`, so the result does not depend on the
    /// number of worker threads.
    pub fn fit(train: &LagDataset, config: &ForestConfig) -> Result<Forest> {
        config.validate()?;
        if train.is_empty() {
            return Err(Error::param("cannot fit on an empty dataset"));
        }
        let s = config.subsample_size(train.len())?;
        let trees = (0..config.num_trees)
            .into_par_iter()
            .map(|b| grow_seeded_tree(train, config, s, derive_seed(config.seed, b as u64)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Forest {
            config: config.clone(),
            trees,
            train: train.clone(),
        })
    }

    /// Assembles a forest from trees grown elsewhere.
    pub fn from_trees(train: LagDataset, config: ForestConfig, trees: Vec<Tree>) -> Result<Forest> {
        if trees.is_empty() {
            return Err(Error::param("a forest needs at least one tree"));
        }
        for tree in &trees {
            tree.double_sample.validate(train.len())?;
        }
        Ok(Forest {
            config,
            trees,
            train,
        })
    }

    pub fn p(&self) -> usize {
        self.train.p()
    }

    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }
}

/// Leaf diameters at probe points, per tree and overall.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiameterStats {
    pub per_tree_mean: Vec<f64>,
    pub per_tree_max: Vec<f64>,
    pub mean: f64,
    pub max: f64,
}

/// Euclidean diameter of the leaf box containing each probe point, with
/// boxes clipped to the empirical covariate range of the training data.
pub fn leaf_diameter_stats(forest: &Forest, probes: &[Vec<f64>]) -> Result<DiameterStats> {
    let p = forest.p();
    if probes.is_empty() {
        return Err(Error::param("need at least one probe point"));
    }
    if let Some(bad) = probes.iter().find(|x| x.len() != p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: bad.len(),
        });
    }
    let bounds = forest.train.covariate_range();
    let (per_tree_mean, per_tree_max): (Vec<f64>, Vec<f64>) = forest
        .trees
        .iter()
        .map(|tree| {
            let boxes = tree.node_boxes(&bounds);
            let diams: Vec<f64> = probes
                .iter()
                .map(|x| box_diameter(&boxes[tree.leaf_of(x)]))
                .collect();
            let mean = diams.iter().sum::<f64>() / diams.len() as f64;
            let max = diams.iter().copied().fold(0.0, f64::max);
            (mean, max)
        })
        .unzip();
    let mean = per_tree_mean.iter().sum::<f64>() / per_tree_mean.len() as f64;
    let max = per_tree_max.iter().copied().fold(0.0, f64::max);
    Ok(DiameterStats {
        per_tree_mean,
        per_tree_max,
        mean,
        max,
    })
}

pub fn box_diameter(bx: &[(f64, f64)]) -> f64 {
    bx.iter()
        .map(|(lo, hi)| (hi - lo).max(0.0).powi(2))
        .sum::<f64>()
        .sqrt()
}
