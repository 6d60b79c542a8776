//! Structural violation detection on a post-dominator forest.
//!
//! A consistent disassembly forms a subtree hanging from the virtual exits:
//! every true node's ancestor chain is true, and no node has two true
//! fall-through-like children. One breadth-first pass from each exit finds
//! the exceptions:
//!
//! - **D** (dead-end sequence): true nodes below an invalid child of an exit.
//! - **M** (missing post-dominator): true nodes never reached through true
//!   parents. Split into **N** when the nearest non-true ancestor is a NOP.
//! - **O** (overlapping instructions): every true fall-through-like child of
//!   a true node after the lowest-offset one.
//!
//! The four sets are disjoint.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pdt::PostDomForest;
use crate::supercfg::SupersetCfg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Truth {
    True,
    False,
    Ignore,
}

impl Truth {
    pub fn is_true(self) -> bool {
        self == Truth::True
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TruthVector(pub Vec<Truth>);

impl TruthVector {
    pub fn all(len: usize, value: Truth) -> Self {
        TruthVector(vec![value; len])
    }

    /// True exactly on `offsets`, false elsewhere.
    pub fn from_offsets(len: usize, offsets: impl IntoIterator<Item = usize>) -> Self {
        let mut v = vec![Truth::False; len];
        for o in offsets {
            v[o] = Truth::True;
        }
        TruthVector(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, offset: usize) -> Truth {
        self.0[offset]
    }

    pub fn is_true(&self, node: usize) -> bool {
        self.0.get(node).is_some_and(|t| t.is_true())
    }

    pub fn true_offsets(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_true())
            .map(|(i, _)| i)
    }
}

/// Threshold scores at zero (strictly). Invalid offsets are never true.
pub fn truth_from_scores(scores: &[f64], cfg: &SupersetCfg) -> Result<TruthVector> {
    if scores.len() != cfg.region_len() {
        return Err(Error::LengthMismatch {
            expected: cfg.region_len(),
            found: scores.len(),
            unit: "scores",
        });
    }
    scores
        .iter()
        .enumerate()
        .map(|(offset, &s)| {
            if !s.is_finite() {
                Err(Error::NonFiniteScore { offset, value: s })
            } else if s > 0.0 && !cfg.class(offset).is_invalid() {
                Ok(Truth::True)
            } else {
                Ok(Truth::False)
            }
        })
        .collect::<Result<Vec<_>>>()
        .map(TruthVector)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    M,
    N,
    D,
    O,
    /// All categories together.
    T,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::M,
        Category::N,
        Category::D,
        Category::O,
        Category::T,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Category::M => "M",
            Category::N => "N",
            Category::D => "D",
            Category::O => "O",
            Category::T => "T",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ViolationReport {
    pub region_len: usize,
    /// Missing post-dominator, nearest blocking ancestor not a NOP.
    pub mpd: Vec<usize>,
    /// Missing post-dominator blocked by a NOP.
    pub nop: Vec<usize>,
    /// Dead-end sequences.
    pub des: Vec<usize>,
    /// Overlapping instructions.
    pub oi: Vec<usize>,
}

impl ViolationReport {
    pub fn total(&self) -> usize {
        self.mpd.len() + self.nop.len() + self.des.len() + self.oi.len()
    }

    pub fn is_clean(&self) -> bool {
        self.total() == 0
    }

    pub fn count(&self, category: Category) -> usize {
        match category {
            Category::M => self.mpd.len(),
            Category::N => self.nop.len(),
            Category::D => self.des.len(),
            Category::O => self.oi.len(),
            Category::T => self.total(),
        }
    }

    pub fn offsets(&self, category: Category) -> Vec<usize> {
        match category {
            Category::M => self.mpd.clone(),
            Category::N => self.nop.clone(),
            Category::D => self.des.clone(),
            Category::O => self.oi.clone(),
            Category::T => {
                let mut all = [&self.mpd, &self.nop, &self.des, &self.oi]
                    .into_iter()
                    .flatten()
                    .copied()
                    .collect::<Vec<_>>();
                all.sort_unstable();
                all
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TraversalStats {
    /// Nodes pushed on the breadth-first queue, exits included.
    pub enqueued: usize,
    /// Nodes visited by the dead-end searches.
    pub dead_end_visits: usize,
}

pub fn detect_violations(
    forest: &PostDomForest,
    cfg: &SupersetCfg,
    truth: &TruthVector,
) -> Result<ViolationReport> {
    detect_violations_traced(forest, cfg, truth).map(|(report, _)| report)
}

pub fn detect_violations_traced(
    forest: &PostDomForest,
    cfg: &SupersetCfg,
    truth: &TruthVector,
) -> Result<(ViolationReport, TraversalStats)> {
    let n = forest.region_len();
    if truth.len() != n || cfg.region_len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: truth.len(),
            unit: "labels",
        });
    }

    let mut stats = TraversalStats::default();
    let mut visited = vec![false; forest.num_nodes()];
    let mut des = Vec::new();
    let mut oi = Vec::new();
    let mut queue = std::collections::VecDeque::new();
    let mut stack = Vec::new();

    for root in forest.virtual_exits() {
        visited[root] = true;
        queue.push_back(root);
        stats.enqueued += 1;

        while let Some(node) = queue.pop_front() {
            let is_root = forest.is_virtual_exit(node);
            if !(is_root || truth.is_true(node)) {
                continue;
            }
            let mut kept_fall_through = false;
            for &child in forest.children(node) {
                if visited[child] {
                    continue;
                }
                visited[child] = true;
                let class = cfg.class(child);
                if is_root && (class.is_invalid() || class.is_fall_through_like()) {
                    // Dead end: everything true in this subtree, the child included.
                    stack.push(child);
                    while let Some(v) = stack.pop() {
                        stats.dead_end_visits += 1;
                        visited[v] = true;
                        if truth.is_true(v) {
                            des.push(v);
                        }
                        stack.extend(forest.children(v).iter().rev());
                    }
                    continue;
                }
                if !truth.is_true(child) {
                    continue;
                }
                if class.is_fall_through_like() && !is_root {
                    if kept_fall_through {
                        oi.push(child);
                    }
                    kept_fall_through = true;
                }
                queue.push_back(child);
                stats.enqueued += 1;
            }
        }
    }

    let mut mpd = Vec::new();
    let mut nop = Vec::new();
    for v in truth.true_offsets() {
        if visited[v] {
            continue;
        }
        let blocker = forest
            .ancestors(v)
            .find(|&a| !truth.is_true(a))
            .expect("unvisited true node must have a non-true ancestor");
        if !forest.is_virtual_exit(blocker) && cfg.class(blocker).is_nop() {
            nop.push(v);
        } else {
            mpd.push(v);
        }
    }

    des.sort_unstable();
    oi.sort_unstable();
    Ok((
        ViolationReport {
            region_len: n,
            mpd,
            nop,
            des,
            oi,
        },
        stats,
    ))
}

/// Aggregate error rates over a corpus of per-file reports.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RateSummary {
    pub files: usize,
    pub total_bytes: u64,
    /// Files with at least one error, per category (M, N, D, O, T).
    pub files_with_errors: [usize; 5],
    /// Error counts per category (M, N, D, O, T).
    pub errors: [u64; 5],
}

pub const MIB: u64 = 1024 * 1024;

impl RateSummary {
    fn index(category: Category) -> usize {
        Category::ALL.iter().position(|&c| c == category).unwrap()
    }

    pub fn files_with(&self, category: Category) -> usize {
        self.files_with_errors[Self::index(category)]
    }

    pub fn error_count(&self, category: Category) -> u64 {
        self.errors[Self::index(category)]
    }

    /// Fraction of files with at least one error of this category.
    pub fn file_error_rate(&self, category: Category) -> f64 {
        self.files_with(category) as f64 / self.files as f64
    }

    /// Errors per 1024 * 1024 bytes of code.
    pub fn errors_per_mib(&self, category: Category) -> f64 {
        (self.error_count(category) as f64 * MIB as f64) / self.total_bytes as f64
    }
}

pub fn aggregate_rates(reports: &[ViolationReport]) -> Result<RateSummary> {
    if reports.is_empty() {
        return Err(Error::EmptyAggregate("no reports"));
    }
    let mut summary = RateSummary {
        files: reports.len(),
        ..RateSummary::default()
    };
    for report in reports {
        summary.total_bytes += report.region_len as u64;
        for (i, &category) in Category::ALL.iter().enumerate() {
            let count = report.count(category);
            summary.errors[i] += count as u64;
            if count > 0 {
                summary.files_with_errors[i] += 1;
            }
        }
    }
    if summary.total_bytes == 0 {
        return Err(Error::EmptyAggregate("zero total bytes"));
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::{superset_decode, Region, Tbc1};
    use crate::pdt::build_pdt;
    use crate::supercfg::build_cfg;

    fn setup(bytes: &[u8]) -> (SupersetCfg, PostDomForest) {
        let region = Region::new(bytes.to_vec());
        let cfg = build_cfg(&superset_decode(&Tbc1, &region), region.len());
        let forest = build_pdt(&cfg).unwrap();
        (cfg, forest)
    }

    fn check(bytes: &[u8], true_at: &[usize]) -> ViolationReport {
        let (cfg, forest) = setup(bytes);
        let truth = TruthVector::from_offsets(bytes.len(), true_at.iter().copied());
        detect_violations(&forest, &cfg, &truth).unwrap()
    }

    #[test]
    fn all_false_is_clean() {
        let r = check(&[0x90, 0x20, 0x00, 0x10, 0xFC, 0x00], &[]);
        assert!(r.is_clean());
    }

    #[test]
    fn jump_to_non_code_target() {
        // 0: JMP +2 -> 4; 2: HALT; 3: HALT; 4: NOP... target labelled false.
        // Layout: 0 JMP 0x02, 2 0x00, 3 0x00, 4 OP2 xx, 6 HALT
        let bytes = [0x10, 0x02, 0x00, 0x00, 0x20, 0x00, 0x00];
        let r = check(&bytes, &[0, 6]);
        assert_eq!(r.mpd, vec![0]);
        assert!(r.nop.is_empty() && r.des.is_empty() && r.oi.is_empty());
    }

    #[test]
    fn missing_nop_is_n_category() {
        // NOP at 1 between OP2-less chain: 0 NOP, 1 NOP, 2 HALT; 1 labelled false.
        let r = check(&[0x90, 0x90, 0x00], &[0, 2]);
        assert_eq!(r.nop, vec![0]);
        assert!(r.mpd.is_empty());
    }

    #[test]
    fn chain_into_undecodable() {
        let r = check(&[0x90, 0x90, 0x20, 0x01, 0xFF], &[0, 1, 2]);
        assert_eq!(r.des, vec![0, 1, 2]);
        assert_eq!(r.total(), 3);
    }

    #[test]
    fn true_label_on_invalid_offset_is_dead_end() {
        let r = check(&[0xFF], &[0]);
        assert_eq!(r.des, vec![0]);
    }

    #[test]
    fn overlapping_fall_throughs() {
        // 0: OP3 (0x21 0x20 0x05) -> 3; 1: OP2 (0x20 0x05) -> 3; 3: HALT
        let r = check(&[0x21, 0x20, 0x05, 0x00], &[0, 1, 3]);
        assert_eq!(r.oi, vec![1]);
        assert_eq!(r.total(), 1);
    }

    #[test]
    fn dead_end_beats_missing() {
        // 0 NOP(true) -> 1 NOP(false) -> 2 invalid
        let r = check(&[0x90, 0x90, 0xFF], &[0]);
        assert_eq!(r.des, vec![0]);
        assert!(r.nop.is_empty());
    }

    #[test]
    fn ignore_blocks_like_false() {
        let (cfg, forest) = setup(&[0x20, 0x00, 0x00]);
        let truth = TruthVector(vec![Truth::True, Truth::Ignore, Truth::True]);
        let r = detect_violations(&forest, &cfg, &truth).unwrap();
        // OP2 at 0 falls through to 2 (HALT), so offset 1 is not on its chain.
        assert!(r.is_clean());

        let (cfg, forest) = setup(&[0x20, 0x00, 0x20, 0x00, 0x00]);
        let truth = TruthVector(vec![
            Truth::True,
            Truth::False,
            Truth::Ignore,
            Truth::False,
            Truth::True,
        ]);
        let r = detect_violations(&forest, &cfg, &truth).unwrap();
        assert_eq!(r.mpd, vec![0]);
    }

    #[test]
    fn length_mismatch_rejected() {
        let (cfg, forest) = setup(&[0x00]);
        let truth = TruthVector::all(2, Truth::False);
        assert!(detect_violations(&forest, &cfg, &truth).is_err());
    }

    #[test]
    fn threshold_at_zero() {
        let (cfg, _) = setup(&[0x90, 0x00, 0xFF]);
        let t = truth_from_scores(&[1.0, -1.0, 5.0], &cfg).unwrap();
        assert_eq!(t.0, vec![Truth::True, Truth::False, Truth::False]);
        let t = truth_from_scores(&[0.0, 0.0, 0.0], &cfg).unwrap();
        assert_eq!(t.true_offsets().count(), 0);
        assert!(truth_from_scores(&[f64::NAN, 0.0, 0.0], &cfg).is_err());
        let p: f64 = 0.9;
        let t = truth_from_scores(&[(p / (1.0 - p)).ln(), 0.0, 0.0], &cfg).unwrap();
        assert!(t.is_true(0));
    }

    #[test]
    fn rates() {
        let dirty = ViolationReport {
            region_len: MIB as usize,
            mpd: vec![1, 2, 3],
            nop: vec![4],
            des: vec![5, 6],
            oi: vec![7],
        };
        let s = aggregate_rates(std::slice::from_ref(&dirty)).unwrap();
        assert_eq!(s.errors_per_mib(Category::T), 7.0);
        assert_eq!(s.file_error_rate(Category::T), 1.0);

        let clean = ViolationReport {
            region_len: MIB as usize,
            ..Default::default()
        };
        let s = aggregate_rates(&[dirty, clean.clone()]).unwrap();
        assert_eq!(s.file_error_rate(Category::T), 0.5);
        assert_eq!(s.errors_per_mib(Category::M), 1.5);

        assert!(aggregate_rates(&[]).is_err());
        let empty = ViolationReport::default();
        assert!(aggregate_rates(&[empty]).is_err());
    }
}
