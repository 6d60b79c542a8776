//! Superset control-flow graph over every byte offset of a region.
//!
//! Edge policy:
//! - call instructions keep only their fall-through edge;
//! - a fall-through-like or conditional instruction whose fall-through lands
//!   at or past the region end is reclassified [`NodeClass::Invalid`];
//! - a direct jump whose target leaves the region keeps its class but has no
//!   successors (it is a region exit);
//! - a conditional jump with an out-of-region target keeps only its
//!   fall-through edge.

use arrayvec::ArrayVec;

use crate::error::{Error, Result};
use crate::isa::{DecodedInst, InstKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Decodable(InstKind),
    Invalid,
}

impl NodeClass {
    pub fn kind(self) -> Option<InstKind> {
        match self {
            NodeClass::Decodable(kind) => Some(kind),
            NodeClass::Invalid => None,
        }
    }

    pub fn is_invalid(self) -> bool {
        self == NodeClass::Invalid
    }

    pub fn is_nop(self) -> bool {
        self == NodeClass::Decodable(InstKind::Nop)
    }

    pub fn is_fall_through_like(self) -> bool {
        matches!(self, NodeClass::Decodable(k) if k.is_fall_through_like())
    }

    pub fn is_jump(self) -> bool {
        matches!(self, NodeClass::Decodable(k) if k.is_jump())
    }
}

pub type NodeSuccs = ArrayVec<usize, 2>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupersetCfg {
    region_len: usize,
    class: Vec<NodeClass>,
    succ: Vec<NodeSuccs>,
    lengths: Vec<usize>,
}

impl SupersetCfg {
    pub fn region_len(&self) -> usize {
        self.region_len
    }

    pub fn class(&self, node: usize) -> NodeClass {
        self.class[node]
    }

    pub fn succ(&self, node: usize) -> &[usize] {
        &self.succ[node]
    }

    /// Instruction length, 0 for invalid nodes.
    pub fn length(&self, node: usize) -> usize {
        self.lengths[node]
    }

    pub fn edge_count(&self) -> usize {
        self.succ.iter().map(|s| s.len()).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.succ
            .iter()
            .enumerate()
            .flat_map(|(from, succ)| succ.iter().map(move |&to| (from, to)))
    }

    /// Predecessor lists in compressed form: `(start, list)` where the
    /// predecessors of `v` are `list[start[v]..start[v + 1]]`, ascending.
    pub fn predecessors(&self) -> (Vec<usize>, Vec<usize>) {
        let n = self.region_len;
        let mut start = vec![0usize; n + 1];
        for (_, to) in self.edges() {
            start[to + 1] += 1;
        }
        for i in 0..n {
            start[i + 1] += start[i];
        }
        let mut fill = start.clone();
        let mut list = vec![0usize; start[n]];
        for (from, to) in self.edges() {
            list[fill[to]] = from;
            fill[to] += 1;
        }
        (start, list)
    }

    pub fn check_invariants(&self) -> Result<()> {
        let n = self.region_len;
        if self.edge_count() > 2 * n {
            return Err(Error::Invariant(format!(
                "edge count {} exceeds 2 * {n}",
                self.edge_count()
            )));
        }
        for node in 0..n {
            let succ = self.succ(node);
            if let Some(&bad) = succ.iter().find(|&&s| s >= n) {
                return Err(Error::Invariant(format!(
                    "successor {bad} of {node} outside region"
                )));
            }
            match self.class[node] {
                NodeClass::Invalid if !succ.is_empty() => {
                    return Err(Error::Invariant(format!(
                        "invalid node {node} has successors"
                    )));
                }
                NodeClass::Decodable(kind)
                    if kind.is_fall_through_like() && succ != [node + self.lengths[node]] =>
                {
                    return Err(Error::Invariant(format!(
                        "fall-through node {node} has successors {succ:?}"
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Build the superset CFG from a pointwise decoding of `region_len` bytes.
pub fn build_cfg(decoded: &[Option<DecodedInst>], region_len: usize) -> SupersetCfg {
    assert_eq!(decoded.len(), region_len, "decoding must cover the region");

    let in_range = |target: i64| target >= 0 && (target as usize) < region_len;
    let mut class = Vec::with_capacity(region_len);
    let mut succ = Vec::with_capacity(region_len);
    let mut lengths = Vec::with_capacity(region_len);

    for inst in decoded {
        let mut out = NodeSuccs::new();
        let node_class = match inst {
            None => NodeClass::Invalid,
            Some(inst) => {
                let fall = inst.fall_through();
                match inst.kind {
                    k if (k.is_fall_through_like() || k == InstKind::CondJump)
                        && !in_range(fall) =>
                    {
                        NodeClass::Invalid
                    }
                    k if k.is_fall_through_like() => {
                        out.push(fall as usize);
                        NodeClass::Decodable(k)
                    }
                    k => {
                        for &target in &inst.successors {
                            if in_range(target) {
                                out.push(target as usize);
                            }
                        }
                        NodeClass::Decodable(k)
                    }
                }
            }
        };
        let len = match (node_class, inst) {
            (NodeClass::Decodable(_), Some(inst)) => inst.length,
            _ => 0,
        };
        class.push(node_class);
        succ.push(out);
        lengths.push(len);
    }

    SupersetCfg {
        region_len,
        class,
        succ,
        lengths,
    }
}

/// Weakly connected components, each sorted ascending, ordered by their
/// smallest offset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WccPartition {
    component_of: Vec<usize>,
    start: Vec<usize>,
    members: Vec<usize>,
}

impl WccPartition {
    pub fn len(&self) -> usize {
        self.start.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn component(&self, index: usize) -> &[usize] {
        &self.members[self.start[index]..self.start[index + 1]]
    }

    pub fn components(&self) -> impl Iterator<Item = &[usize]> + '_ {
        (0..self.len()).map(move |i| self.component(i))
    }

    pub fn component_of(&self, node: usize) -> usize {
        self.component_of[node]
    }

    pub fn to_sets(&self) -> Vec<Vec<usize>> {
        self.components().map(<[usize]>::to_vec).collect()
    }
}

struct DisjointSet {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
    }
}

pub fn wcc_partition(cfg: &SupersetCfg) -> WccPartition {
    let n = cfg.region_len();
    let mut dsu = DisjointSet::new(n);
    for (from, to) in cfg.edges() {
        dsu.union(from, to);
    }

    // Number components in order of first (smallest) member.
    let mut label_of_root = vec![usize::MAX; n];
    let mut component_of = vec![0usize; n];
    let mut sizes = Vec::new();
    for node in 0..n {
        let root = dsu.find(node);
        if label_of_root[root] == usize::MAX {
            label_of_root[root] = sizes.len();
            sizes.push(0usize);
        }
        let label = label_of_root[root];
        component_of[node] = label;
        sizes[label] += 1;
    }

    let mut start = Vec::with_capacity(sizes.len() + 1);
    start.push(0);
    for size in &sizes {
        start.push(start.last().unwrap() + size);
    }
    let mut fill = start.clone();
    let mut members = vec![0usize; n];
    for node in 0..n {
        let c = component_of[node];
        members[fill[c]] = node;
        fill[c] += 1;
    }

    WccPartition {
        component_of,
        start,
        members,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::{superset_decode, Region, Tbc1};

    fn cfg_of(bytes: &[u8]) -> SupersetCfg {
        let region = Region::new(bytes.to_vec());
        build_cfg(&superset_decode(&Tbc1, &region), region.len())
    }

    #[test]
    fn call_keeps_only_fall_through() {
        let cfg = cfg_of(&[0x12, 0x00, 0x00]);
        assert_eq!(cfg.class(0), NodeClass::Decodable(InstKind::DirectCall));
        assert_eq!(cfg.succ(0), &[2]);
    }

    #[test]
    fn fall_off_region_end_is_invalid() {
        let cfg = cfg_of(&[0x90]);
        assert_eq!(cfg.class(0), NodeClass::Invalid);
        assert!(cfg.succ(0).is_empty());
        assert_eq!(cfg.length(0), 0);

        let cfg = cfg_of(&[0x11, 0x00]);
        assert_eq!(cfg.class(0), NodeClass::Invalid);
    }

    #[test]
    fn out_of_region_jump_becomes_exit() {
        let cfg = cfg_of(&[0x10, 0x7F]);
        assert_eq!(cfg.class(0), NodeClass::Decodable(InstKind::DirectJump));
        assert!(cfg.succ(0).is_empty());
        assert_eq!(cfg.length(0), 2);
    }

    #[test]
    fn conditional_with_out_of_region_target() {
        // JCC +100 then HALT
        let cfg = cfg_of(&[0x11, 100, 0x00]);
        assert_eq!(cfg.class(0), NodeClass::Decodable(InstKind::CondJump));
        assert_eq!(cfg.succ(0), &[2]);
        // JCC -3 at offset 1: target 0, fall-through 3
        let cfg = cfg_of(&[0x00, 0x11, 0xFD, 0x00]);
        assert_eq!(cfg.succ(1), &[3, 0]);
    }

    #[test]
    fn wcc_examples() {
        let cfg = cfg_of(&[0x00, 0x00]);
        assert_eq!(wcc_partition(&cfg).to_sets(), vec![vec![0], vec![1]]);

        let cfg = cfg_of(&[0x90, 0x90, 0x00]);
        assert_eq!(wcc_partition(&cfg).to_sets(), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn predecessor_lists() {
        // 0: NOP -> 1, 1: JCC -3 -> {3, 0}, 3: HALT
        let cfg = cfg_of(&[0x90, 0x11, 0xFD, 0x00]);
        let (start, list) = cfg.predecessors();
        let preds = |v: usize| &list[start[v]..start[v + 1]];
        assert_eq!(preds(0), &[1]);
        assert_eq!(preds(1), &[0]);
        // Offset 2 (0xFD) is undecodable.
        assert_eq!(preds(3), &[1]);
    }

    proptest::proptest! {
        #[test]
        fn cfg_invariants_hold(bytes in proptest::collection::vec(
            proptest::sample::select(vec![0x00u8, 0x01, 0x02, 0x10, 0x11, 0x12, 0x13, 0x20, 0x21, 0x90, 0xFE, 0x03, 0x7F, 0x80]),
            0..96,
        )) {
            let cfg = cfg_of(&bytes);
            proptest::prop_assert!(cfg.check_invariants().is_ok());
            proptest::prop_assert_eq!(&cfg, &cfg_of(&bytes));

            let parts = wcc_partition(&cfg);
            let mut seen = vec![false; bytes.len()];
            for (index, part) in parts.components().enumerate() {
                for &node in part {
                    proptest::prop_assert!(!seen[node]);
                    seen[node] = true;
                    proptest::prop_assert_eq!(parts.component_of(node), index);
                }
            }
            proptest::prop_assert!(seen.iter().all(|&s| s));
            for (from, to) in cfg.edges() {
                proptest::prop_assert_eq!(parts.component_of(from), parts.component_of(to));
            }
        }
    }
}
