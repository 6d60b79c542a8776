//! Turning per-offset confidence scores into a structurally consistent
//! instruction set.
//!
//! Two phases over the post-dominator forest. Weights are first propagated
//! bottom-up so a subtree's positive mass can pull a weak ancestor back in;
//! then a breadth-first pass from each exit keeps every positive
//! control-flow child and at most one (the heaviest positive)
//! fall-through-like child per node.
//!
//! [`PropagationMode::Faithful`] sums every positive child during
//! propagation. [`PropagationMode::Exact`] counts only the best
//! fall-through-like child, which matches what the collection phase can
//! actually keep and makes the result an optimum of the constrained
//! subtree problem.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pdt::PostDomForest;
use crate::supercfg::SupersetCfg;

pub mod oracle;

pub use oracle::{prune_oracle, OracleOptimum};

/// Weight of an undecodable offset. Large enough that no admissible amount
/// of positive score below it can lift it above zero.
pub const NEG: f64 = -1.0e9;

/// Upper bound on the summed positive scores of one region.
pub const MAX_POSITIVE_MASS: f64 = 1.0e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropagationMode {
    #[default]
    Faithful,
    Exact,
}

impl PropagationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PropagationMode::Faithful => "faithful",
            PropagationMode::Exact => "exact",
        }
    }
}

impl fmt::Display for PropagationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PropagationMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "faithful" => Ok(PropagationMode::Faithful),
            "exact" => Ok(PropagationMode::Exact),
            other => Err(format!("unknown propagation mode `{other}`")),
        }
    }
}

/// Per-node weights. Nodes past the end of the vector (virtual exits before
/// propagation) weigh 0.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightVector(pub Vec<f64>);

impl WeightVector {
    pub fn get(&self, node: usize) -> f64 {
        self.0.get(node).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrunedResult {
    pub retained: Vec<usize>,
    pub total_raw_score: f64,
    pub mode: PropagationMode,
}

/// Raw weights: decodable offsets keep their score, invalid ones get [`NEG`].
pub fn assign_weights(scores: &[f64], cfg: &SupersetCfg) -> WeightVector {
    WeightVector(
        scores
            .iter()
            .enumerate()
            .map(|(offset, &s)| {
                if cfg.class(offset).is_invalid() {
                    NEG
                } else {
                    s
                }
            })
            .collect(),
    )
}

fn validate_scores(scores: &[f64], cfg: &SupersetCfg) -> Result<()> {
    if scores.len() != cfg.region_len() {
        return Err(Error::LengthMismatch {
            expected: cfg.region_len(),
            found: scores.len(),
            unit: "scores",
        });
    }
    let mut mass = 0.0;
    for (offset, &s) in scores.iter().enumerate() {
        if !s.is_finite() {
            return Err(Error::NonFiniteScore { offset, value: s });
        }
        if s > 0.0 {
            mass += s;
        }
    }
    if mass > MAX_POSITIVE_MASS {
        return Err(Error::ScoreMassTooLarge {
            mass,
            limit: MAX_POSITIVE_MASS,
        });
    }
    Ok(())
}

/// Post-order weight propagation. The result covers every forest node,
/// virtual exits included.
pub fn propagate_weights(
    forest: &PostDomForest,
    cfg: &SupersetCfg,
    raw: &WeightVector,
    mode: PropagationMode,
) -> WeightVector {
    let mut w: Vec<f64> = (0..forest.num_nodes()).map(|v| raw.get(v)).collect();
    for &node in forest.bfs_order().iter().rev() {
        let mut child_sum = 0.0;
        let mut best_fall_through = 0.0f64;
        for &child in forest.children(node) {
            let cw = w[child];
            let grouped = mode == PropagationMode::Exact
                && !cfg.class(child).kind().is_some_and(|k| k.is_control_flow());
            if grouped {
                best_fall_through = best_fall_through.max(cw);
            } else if cw > 0.0 {
                child_sum += cw;
            }
        }
        w[node] = (w[node] + child_sum + best_fall_through).max(0.0);
    }
    WeightVector(w)
}

/// Breadth-first collection over propagated weights.
pub fn prune_forest(
    forest: &PostDomForest,
    cfg: &SupersetCfg,
    propagated: &WeightVector,
) -> Vec<usize> {
    let mut retained = Vec::new();
    let mut queue: VecDeque<usize> = forest.virtual_exits().collect();
    while let Some(node) = queue.pop_front() {
        let is_root = forest.is_virtual_exit(node);
        if !(is_root || propagated.get(node) > 0.0) {
            continue;
        }
        if !is_root {
            retained.push(node);
        }
        let mut best: Option<(f64, usize)> = None;
        for &child in forest.children(node) {
            let class = cfg.class(child);
            if class.is_invalid() {
                continue;
            }
            let cw = propagated.get(child);
            if class.is_fall_through_like() {
                // Strictly greater: ties keep the lower offset.
                if cw > best.map_or(0.0, |(w, _)| w) {
                    best = Some((cw, child));
                }
            } else if cw > 0.0 {
                queue.push_back(child);
            }
        }
        if let Some((_, child)) = best {
            queue.push_back(child);
        }
    }
    retained.sort_unstable();
    retained
}

/// Full pruning pipeline from raw scores.
pub fn prune(
    forest: &PostDomForest,
    cfg: &SupersetCfg,
    scores: &[f64],
    mode: PropagationMode,
) -> Result<PrunedResult> {
    validate_scores(scores, cfg)?;
    let raw = assign_weights(scores, cfg);
    let propagated = propagate_weights(forest, cfg, &raw, mode);
    let retained = prune_forest(forest, cfg, &propagated);
    let total_raw_score = retained.iter().map(|&v| scores[v]).sum();
    Ok(PrunedResult {
        retained,
        total_raw_score,
        mode,
    })
}
