//! Post-dominator forest over a superset CFG.
//!
//! Each weakly connected component gets its own virtual exit. Zero
//! out-degree nodes are linked to it, and so are the jump instructions of
//! every cyclic terminal SCC, so that infinite loops still reach the exit.
//! Immediate post-dominators are then the immediate dominators of the
//! reversed, anchored graph rooted at the exit.
//!
//! Node ids: offsets `0..region_len`, then one virtual exit per WCC at
//! `region_len + wcc_index`.

use std::collections::{HashMap, VecDeque};

use rayon::prelude::*;

use crate::dom::{immediate_dominators, Csr, DomScratch, UNDEF};
use crate::error::{Error, Result};
use crate::scc::{scc_info, SccInfo};
use crate::supercfg::{wcc_partition, SupersetCfg, WccPartition};

pub mod oracle;

pub use oracle::{brute_force_postdom, PostDomSets};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PostDomForest {
    region_len: usize,
    ipdom: Vec<usize>,
    wcc_of: Vec<usize>,
    num_wccs: usize,
    child_start: Vec<usize>,
    child_list: Vec<usize>,
}

impl PostDomForest {
    pub fn region_len(&self) -> usize {
        self.region_len
    }

    /// Offsets plus virtual exits.
    pub fn num_nodes(&self) -> usize {
        self.region_len + self.num_wccs
    }

    pub fn num_wccs(&self) -> usize {
        self.num_wccs
    }

    pub fn virtual_exit(&self, wcc: usize) -> usize {
        self.region_len + wcc
    }

    pub fn virtual_exits(&self) -> std::ops::Range<usize> {
        self.region_len..self.num_nodes()
    }

    pub fn is_virtual_exit(&self, node: usize) -> bool {
        node >= self.region_len
    }

    pub fn ipdom(&self, offset: usize) -> usize {
        self.ipdom[offset]
    }

    pub fn ipdoms(&self) -> &[usize] {
        &self.ipdom
    }

    /// `None` for virtual exits.
    pub fn parent(&self, node: usize) -> Option<usize> {
        self.ipdom.get(node).copied()
    }

    pub fn wcc_of(&self, offset: usize) -> usize {
        self.wcc_of[offset]
    }

    /// Children in ascending offset order.
    pub fn children(&self, node: usize) -> &[usize] {
        &self.child_list[self.child_start[node]..self.child_start[node + 1]]
    }

    /// Strict ancestors of `node`, nearest first, ending with its exit.
    pub fn ancestors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::successors(self.parent(node), move |&p| self.parent(p))
    }

    /// All nodes in breadth-first order, exits first and in index order.
    pub fn bfs_order(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.num_nodes());
        order.extend(self.virtual_exits());
        let mut head = 0;
        while head < order.len() {
            let node = order[head];
            head += 1;
            order.extend_from_slice(self.children(node));
        }
        order
    }

    pub fn check_invariants(&self, cfg: &SupersetCfg) -> Result<()> {
        let n = self.region_len;
        if cfg.region_len() != n {
            return Err(Error::Invariant("forest and cfg sizes differ".into()));
        }
        // Rootedness and acyclicity: a walk down from the exits reaches
        // every offset exactly once, staying within its WCC.
        let mut seen = vec![false; n];
        let mut reached = 0;
        for exit in self.virtual_exits() {
            let wcc = exit - n;
            let mut queue = VecDeque::from([exit]);
            while let Some(node) = queue.pop_front() {
                for &child in self.children(node) {
                    if child >= n || seen[child] {
                        return Err(Error::Invariant(format!("node {child} is not a tree node")));
                    }
                    if self.wcc_of[child] != wcc {
                        return Err(Error::Invariant(format!(
                            "offset {child} hangs below the exit of another component"
                        )));
                    }
                    seen[child] = true;
                    reached += 1;
                    queue.push_back(child);
                }
            }
        }
        if reached != n {
            return Err(Error::Invariant(format!(
                "{} offsets do not reach a virtual exit",
                n - reached
            )));
        }
        for node in 0..n {
            let class = cfg.class(node);
            let parent = self.ipdom[node];
            if class.is_invalid() && parent != self.virtual_exit(self.wcc_of[node]) {
                return Err(Error::Invariant(format!(
                    "invalid offset {node} is not a child of its exit"
                )));
            }
            if class.is_fall_through_like() && parent != node + cfg.length(node) {
                return Err(Error::Invariant(format!(
                    "fall-through offset {node} has ipdom {parent}"
                )));
            }
        }
        Ok(())
    }
}

/// Anchor selection for one component: every zero out-degree node plus the
/// jumps of every cyclic terminal SCC.
fn select_anchors(cfg: &SupersetCfg, scc: &SccInfo, nodes: &[usize]) -> Result<Vec<usize>> {
    let mut anchors = Vec::new();
    // Cyclic terminal components seen, and whether a jump was found in each.
    let mut cycles: HashMap<usize, bool> = HashMap::new();
    for &node in nodes {
        if cfg.succ(node).is_empty() {
            anchors.push(node);
            continue;
        }
        let c = scc.scc_id[node];
        if !(scc.terminal[c] && scc.cyclic[c]) {
            continue;
        }
        let is_jump = cfg.class(node).is_jump();
        *cycles.entry(c).or_insert(false) |= is_jump;
        if is_jump {
            anchors.push(node);
        }
    }
    if let Some((c, _)) = cycles.iter().find(|(_, &has_jump)| !has_jump) {
        return Err(Error::Invariant(format!(
            "terminal cycle (component {c}) contains no jump"
        )));
    }
    Ok(anchors)
}

/// Nodes of `wcc` that get an edge to the component's virtual exit.
pub fn terminal_scc_anchors(cfg: &SupersetCfg, wcc: &[usize]) -> Result<Vec<usize>> {
    let scc = scc_info(cfg);
    let mut nodes = wcc.to_vec();
    nodes.sort_unstable();
    select_anchors(cfg, &scc, &nodes)
}

struct Shared<'a> {
    cfg: &'a SupersetCfg,
    scc: SccInfo,
    parts: WccPartition,
    pred_start: Vec<usize>,
    pred_list: Vec<usize>,
    /// Position of each offset within its component's member list.
    local: Vec<usize>,
}

#[derive(Default)]
struct WccScratch {
    reversed_succ: Csr,
    reversed_pred: Csr,
    is_anchor: Vec<bool>,
    dom: DomScratch,
    idom: Vec<usize>,
}

impl Shared<'_> {
    fn new(cfg: &SupersetCfg) -> Shared<'_> {
        let parts = wcc_partition(cfg);
        let (pred_start, pred_list) = cfg.predecessors();
        let mut local = vec![0; cfg.region_len()];
        for part in parts.components() {
            for (i, &node) in part.iter().enumerate() {
                local[node] = i;
            }
        }
        Shared {
            cfg,
            scc: scc_info(cfg),
            parts,
            pred_start,
            pred_list,
            local,
        }
    }

    /// ipdom of every member of component `wcc`, in member order.
    fn component_ipdoms(&self, wcc: usize, s: &mut WccScratch) -> Result<Vec<usize>> {
        let members = self.parts.component(wcc);
        let m = members.len();
        let exit_local = m;
        let exit_id = self.cfg.region_len() + wcc;

        let anchors = select_anchors(self.cfg, &self.scc, members)?;
        s.is_anchor.clear();
        s.is_anchor.resize(m, false);
        for &a in &anchors {
            s.is_anchor[self.local[a]] = true;
        }

        // Reversed graph: exit -> anchors, v -> forward predecessors of v.
        let rs = &mut s.reversed_succ;
        rs.clear();
        rs.start.push(0);
        for &node in members {
            let preds = &self.pred_list[self.pred_start[node]..self.pred_start[node + 1]];
            rs.targets.extend(preds.iter().map(|&p| self.local[p]));
            rs.start.push(rs.targets.len());
        }
        rs.targets.extend(anchors.iter().map(|&a| self.local[a]));
        rs.start.push(rs.targets.len());

        let rp = &mut s.reversed_pred;
        rp.clear();
        rp.start.push(0);
        for (i, &node) in members.iter().enumerate() {
            rp.targets
                .extend(self.cfg.succ(node).iter().map(|&t| self.local[t]));
            if s.is_anchor[i] {
                rp.targets.push(exit_local);
            }
            rp.start.push(rp.targets.len());
        }
        rp.start.push(rp.targets.len());

        immediate_dominators(m + 1, exit_local, rs, rp, &mut s.dom, &mut s.idom);

        members
            .iter()
            .enumerate()
            .map(|(i, &node)| match s.idom[i] {
                UNDEF => Err(Error::Invariant(format!(
                    "offset {node} cannot reach its virtual exit"
                ))),
                d if d == exit_local => Ok(exit_id),
                d => Ok(members[d]),
            })
            .collect()
    }

    fn assemble(self, per_wcc: Vec<Vec<usize>>) -> PostDomForest {
        let n = self.cfg.region_len();
        let mut ipdom = vec![0; n];
        for (wcc, ipdoms) in per_wcc.into_iter().enumerate() {
            for (&node, parent) in self.parts.component(wcc).iter().zip(ipdoms) {
                ipdom[node] = parent;
            }
        }
        let num_wccs = self.parts.len();
        let wcc_of = (0..n).map(|v| self.parts.component_of(v)).collect();

        let total = n + num_wccs;
        let mut child_start = vec![0usize; total + 1];
        for &p in &ipdom {
            child_start[p + 1] += 1;
        }
        for i in 0..total {
            child_start[i + 1] += child_start[i];
        }
        let mut fill = child_start.clone();
        let mut child_list = vec![0usize; n];
        for (node, &p) in ipdom.iter().enumerate() {
            child_list[fill[p]] = node;
            fill[p] += 1;
        }

        PostDomForest {
            region_len: n,
            ipdom,
            wcc_of,
            num_wccs,
            child_start,
            child_list,
        }
    }
}

/// Build the post-dominator forest, one component at a time.
pub fn build_pdt(cfg: &SupersetCfg) -> Result<PostDomForest> {
    let shared = Shared::new(cfg);
    let mut scratch = WccScratch::default();
    let per_wcc = (0..shared.parts.len())
        .map(|wcc| shared.component_ipdoms(wcc, &mut scratch))
        .collect::<Result<Vec<_>>>()?;
    Ok(shared.assemble(per_wcc))
}

/// Same result as [`build_pdt`], with components processed on the current
/// rayon pool.
pub fn build_pdt_par(cfg: &SupersetCfg) -> Result<PostDomForest> {
    let shared = Shared::new(cfg);
    let per_wcc = (0..shared.parts.len())
        .into_par_iter()
        .map_init(WccScratch::default, |scratch, wcc| {
            shared.component_ipdoms(wcc, scratch)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(shared.assemble(per_wcc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::{superset_decode, Region, Tbc1};
    use crate::supercfg::build_cfg;

    fn cfg_of(bytes: &[u8]) -> SupersetCfg {
        let region = Region::new(bytes.to_vec());
        build_cfg(&superset_decode(&Tbc1, &region), region.len())
    }

    #[test]
    fn nop_then_halt() {
        let cfg = cfg_of(&[0x90, 0x00]);
        let forest = build_pdt(&cfg).unwrap();
        assert_eq!(forest.num_wccs(), 1);
        assert_eq!(forest.ipdom(0), 1);
        assert_eq!(forest.ipdom(1), forest.virtual_exit(0));
        assert_eq!(forest.children(forest.virtual_exit(0)), &[1]);
        forest.check_invariants(&cfg).unwrap();
    }

    #[test]
    fn loop_anchors_on_its_jump() {
        // W: NOP at 0, X: JMP -3 at 1 back to W.
        let cfg = cfg_of(&[0x90, 0x10, 0xFD]);
        let parts = wcc_partition(&cfg);
        let wcc = parts.component(parts.component_of(0));
        assert_eq!(terminal_scc_anchors(&cfg, wcc).unwrap(), vec![1]);
        let forest = build_pdt(&cfg).unwrap();
        assert_eq!(forest.ipdom(0), 1);
        assert!(forest.is_virtual_exit(forest.ipdom(1)));
    }

    #[test]
    fn halt_and_ret_chain_anchors() {
        let cfg = cfg_of(&[0x00]);
        assert_eq!(terminal_scc_anchors(&cfg, &[0]).unwrap(), vec![0]);
        let cfg = cfg_of(&[0x90, 0x90, 0x90, 0x01]);
        assert_eq!(terminal_scc_anchors(&cfg, &[0, 1, 2, 3]).unwrap(), vec![3]);
    }

    #[test]
    fn diamond_merges_at_join() {
        // 0: JCC +2 -> {2, 4}; 2: OP2 -> 4; 4: HALT
        let cfg = cfg_of(&[0x11, 0x02, 0x20, 0x00, 0x00]);
        let forest = build_pdt(&cfg).unwrap();
        assert_eq!(forest.ipdom(0), 4);
        assert_eq!(forest.ipdom(2), 4);
        let sets = brute_force_postdom(&cfg);
        assert!(sets.post_dominates(4, 0));
        assert_eq!(sets.ipdom(0), Some(4));
    }

    #[test]
    fn components_are_independent() {
        let bytes = [
            0x90, 0x11, 0x03, 0x10, 0xFB, 0x20, 0x00, 0x90, 0x00, 0x10, 0xFE, 0x21, 0x11, 0xF0,
            0x00, 0x42, 0x13, 0x90, 0x01,
        ];
        let cfg = cfg_of(&bytes);
        let full = build_pdt(&cfg).unwrap();
        let shared = Shared::new(&cfg);
        let mut scratch = WccScratch::default();
        // Each component computed alone, in reverse order, with a fresh
        // scratch, gives the same answer.
        for wcc in (0..shared.parts.len()).rev() {
            let alone = shared
                .component_ipdoms(wcc, &mut WccScratch::default())
                .unwrap();
            let reused = shared.component_ipdoms(wcc, &mut scratch).unwrap();
            assert_eq!(alone, reused);
            for (&node, &p) in shared.parts.component(wcc).iter().zip(&alone) {
                assert_eq!(full.ipdom(node), p);
            }
        }
        assert_eq!(build_pdt_par(&cfg).unwrap(), full);
    }
}
