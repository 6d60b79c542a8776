//! Exhaustive search for the best consistent instruction set, used to check
//! the exact propagation mode on small forests.
//!
//! A set is admissible when it contains no invalid offsets, is closed under
//! ipdom (every member's parent is a member or a virtual exit), and keeps at
//! most one fall-through-like child under any parent. The search enumerates
//! every admissible set by deciding nodes in breadth-first order, so a node
//! is only ever considered once its parent has been decided.

use crate::pdt::PostDomForest;
use crate::supercfg::SupersetCfg;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOptimum {
    pub retained: Vec<usize>,
    pub total_raw_score: f64,
    /// Admissible sets enumerated.
    pub candidates: usize,
}

struct Search<'a> {
    forest: &'a PostDomForest,
    cfg: &'a SupersetCfg,
    scores: &'a [f64],
    order: Vec<usize>,
    chosen: Vec<bool>,
    fall_through_used: Vec<bool>,
    best: Option<(f64, Vec<usize>)>,
    candidates: usize,
}

impl Search<'_> {
    fn visit(&mut self, depth: usize, score: f64) {
        if depth == self.order.len() {
            self.candidates += 1;
            if self.best.as_ref().is_some_and(|(best, _)| score < *best) {
                return;
            }
            let set: Vec<usize> = (0..self.cfg.region_len())
                .filter(|&v| self.chosen[v])
                .collect();
            let better = match &self.best {
                None => true,
                Some((best_score, best_set)) => {
                    score > *best_score || (score == *best_score && set < *best_set)
                }
            };
            if better {
                self.best = Some((score, set));
            }
            return;
        }

        let node = self.order[depth];
        let parent = self.forest.ipdom(node);
        let parent_in = self.forest.is_virtual_exit(parent) || self.chosen[parent];
        let class = self.cfg.class(node);
        let slot_free = !class.is_fall_through_like() || !self.fall_through_used[parent];

        self.visit(depth + 1, score);

        if parent_in && slot_free && !class.is_invalid() {
            self.chosen[node] = true;
            if class.is_fall_through_like() {
                self.fall_through_used[parent] = true;
            }
            self.visit(depth + 1, score + self.scores[node]);
            self.chosen[node] = false;
            if class.is_fall_through_like() {
                self.fall_through_used[parent] = false;
            }
        }
    }
}

/// Maximum total raw score over all admissible sets; ties go to the
/// lexicographically smallest offset list.
pub fn prune_oracle(forest: &PostDomForest, cfg: &SupersetCfg, scores: &[f64]) -> OracleOptimum {
    let decodable = (0..cfg.region_len())
        .filter(|&v| !cfg.class(v).is_invalid())
        .count();
    assert!(
        decodable <= 24,
        "exhaustive oracle limited to small forests"
    );

    let order: Vec<usize> = forest
        .bfs_order()
        .into_iter()
        .filter(|&v| !forest.is_virtual_exit(v) && !cfg.class(v).is_invalid())
        .collect();
    let mut search = Search {
        forest,
        cfg,
        scores,
        order,
        chosen: vec![false; forest.num_nodes()],
        fall_through_used: vec![false; forest.num_nodes()],
        best: None,
        candidates: 0,
    };
    search.visit(0, 0.0);
    let (total_raw_score, retained) = search.best.expect("empty set is always admissible");
    OracleOptimum {
        retained,
        total_raw_score,
        candidates: search.candidates,
    }
}
