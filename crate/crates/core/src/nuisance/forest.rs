//! CART ensembles (bagged trees with per-split feature subsampling).
//!
//! Splits maximise the reduction in within-node sum of squares. For a 0/1
//! target this is the Gini criterion up to a constant factor, so the same
//! builder serves regression and classification; a classification leaf
//! stores the treated fraction.
//!
//! Ties: features are scanned in increasing index order and thresholds in
//! increasing order, and a candidate only replaces the incumbent on a strictly
//! larger gain, so the first feature and then the smallest threshold win.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Covariates;
use crate::error::{invalid, Result};
use crate::rng::{derive_seed, SplitMix64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `None` grows until the leaf-size limit stops splitting.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Candidate features per split. `None` picks `ceil(p/3)` for regression
    /// and `ceil(sqrt(p))` for classification.
    pub mtry: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 200,
            max_depth: None,
            min_leaf: 5,
            mtry: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForestTask {
    Regression,
    Classification,
}

impl ForestConfig {
    pub fn resolved_mtry(&self, p: usize, task: ForestTask) -> usize {
        let default = match task {
            ForestTask::Regression => p.div_ceil(3),
            ForestTask::Classification => (p as f64).sqrt().ceil() as usize,
        };
        self.mtry.unwrap_or(default).clamp(1, p.max(1))
    }

    fn validate(&self, n: usize, p: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(invalid("forest needs n_trees >= 1"));
        }
        if self.min_leaf == 0 {
            return Err(invalid("forest needs min_leaf >= 1"));
        }
        if let Some(m) = self.mtry {
            if m == 0 || m > p.max(1) {
                return Err(invalid(format!("mtry must lie in 1..={p}, got {m}")));
            }
        }
        if n < 2 * self.min_leaf {
            return Err(invalid(format!(
                "forest needs n >= 2 * min_leaf (n = {n}, min_leaf = {})",
                self.min_leaf
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
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
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => k = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, k: usize) -> usize {
            match t.nodes[k] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub p: usize,
    pub trees: Vec<Tree>,
}

impl Forest {
    pub fn fit(x: &Covariates, y: &[f64], cfg: &ForestConfig, task: ForestTask) -> Result<Forest> {
        let n = y.len();
        let p = x.ncols();
        cfg.validate(n, p)?;
        let mtry = cfg.resolved_mtry(p, task);
        let trees = (0..cfg.n_trees)
            .into_par_iter()
            .map(|b| {
                let mut rng = SplitMix64::new(derive_seed(cfg.seed, b as u64));
                let sample: Vec<usize> = if cfg.bootstrap {
                    (0..n).map(|_| rng.below(n)).collect()
                } else {
                    (0..n).collect()
                };
                TreeBuilder {
                    x,
                    y,
                    mtry,
                    min_leaf: cfg.min_leaf,
                    max_depth: cfg.max_depth,
                    rng,
                    nodes: Vec::new(),
                }
                .build(sample)
            })
            .collect();
        Ok(Forest { p, trees })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

struct TreeBuilder<'a> {
    x: &'a Covariates,
    y: &'a [f64],
    mtry: usize,
    min_leaf: usize,
    max_depth: Option<usize>,
    rng: SplitMix64,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl TreeBuilder<'_> {
    fn build(mut self, sample: Vec<usize>) -> Tree {
        self.grow(sample, 0);
        Tree { nodes: self.nodes }
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0 });

        let m = idx.len() as f64;
        let sum: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let mean = sum / m;
        let sse: f64 = idx.iter().map(|&i| (self.y[i] - mean).powi(2)).sum();

        let can_split = self.max_depth.is_none_or(|d| depth < d)
            && idx.len() >= 2 * self.min_leaf
            && sse > 0.0
            && self.x.ncols() > 0;
        let best = if can_split {
            self.best_split(&idx, sum, sse)
        } else {
            None
        };

        match best {
            None => {
                self.nodes[slot] = Node::Leaf { value: mean };
            }
            Some(b) => {
                let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
                    idx.into_iter().partition(|&i| self.x.get(i, b.feature) <= b.threshold);
                let left = self.grow(left_idx, depth + 1);
                let right = self.grow(right_idx, depth + 1);
                self.nodes[slot] = Node::Split {
                    feature: b.feature,
                    threshold: b.threshold,
                    left,
                    right,
                };
            }
        }
        slot
    }

    fn best_split(&mut self, idx: &[usize], total: f64, sse: f64) -> Option<BestSplit> {
        let p = self.x.ncols();
        let mut features: Vec<usize> = (0..p).collect();
        // Partial Fisher-Yates: the first `mtry` entries are a uniform subset.
        for k in 0..self.mtry {
            let j = k + self.rng.below(p - k);
            features.swap(k, j);
        }
        let mut candidates = features[..self.mtry].to_vec();
        candidates.sort_unstable();

        let m = idx.len();
        let sum_sq_total: f64 = sse + total * total / m as f64;
        let mut best: Option<BestSplit> = None;
        let mut order: Vec<(f64, f64)> = Vec::with_capacity(m);
        for &f in &candidates {
            order.clear();
            order.extend(idx.iter().map(|&i| (self.x.get(i, f), self.y[i])));
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            if order[0].0 == order[m - 1].0 {
                continue;
            }
            let mut left_sum = 0.0;
            let mut left_sq = 0.0;
            for k in 0..m - 1 {
                let (xv, yv) = order[k];
                left_sum += yv;
                left_sq += yv * yv;
                let nl = k + 1;
                let nr = m - nl;
                if nl < self.min_leaf {
                    continue;
                }
                if nr < self.min_leaf {
                    break;
                }
                let next = order[k + 1].0;
                if xv == next {
                    continue;
                }
                let right_sum = total - left_sum;
                let right_sq = sum_sq_total - left_sq;
                let child_sse =
                    (left_sq - left_sum * left_sum / nl as f64) + (right_sq - right_sum * right_sum / nr as f64);
                let gain = sse - child_sse;
                if gain > 1e-12 * sse && best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut threshold = 0.5 * (xv + next);
                    if threshold >= next {
                        threshold = xv;
                    }
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }
}
