//! Brute-force post-dominator sets, used to cross-check [`super::build_pdt`].
//!
//! Everything here is recomputed from the CFG edges alone: components by
//! undirected search, terminal cycles by pairwise reachability, and
//! post-dominator sets by the backward dataflow fixpoint
//! `pd(n) = {n} ∪ ⋂ pd(s)` over the anchored graph. Quadratic or worse;
//! meant for regions of a few thousand bytes at most.

use crate::supercfg::SupersetCfg;

#[derive(Debug, Clone)]
struct BitSet {
    words: Vec<u64>,
}

impl BitSet {
    fn new(bits: usize) -> Self {
        BitSet {
            words: vec![0; bits.div_ceil(64)],
        }
    }

    fn full(bits: usize) -> Self {
        let mut set = BitSet::new(bits);
        for i in 0..bits {
            set.insert(i);
        }
        set
    }

    fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    fn contains(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }
}

/// Post-dominator sets of every node of the anchored graph, offsets first
/// then one virtual exit per component (components numbered by smallest
/// member).
#[derive(Debug, Clone)]
pub struct PostDomSets {
    region_len: usize,
    num_wccs: usize,
    sets: Vec<BitSet>,
}

impl PostDomSets {
    pub fn num_nodes(&self) -> usize {
        self.region_len + self.num_wccs
    }

    pub fn num_wccs(&self) -> usize {
        self.num_wccs
    }

    /// Does `b` post-dominate `a`? Reflexive.
    pub fn post_dominates(&self, b: usize, a: usize) -> bool {
        self.sets[a].contains(b)
    }

    pub fn postdoms(&self, a: usize) -> Vec<usize> {
        (0..self.num_nodes())
            .filter(|&b| self.post_dominates(b, a))
            .collect()
    }

    /// The strict post-dominator of `a` that every other strict
    /// post-dominator of `a` post-dominates. `None` for virtual exits.
    pub fn ipdom(&self, a: usize) -> Option<usize> {
        let strict: Vec<usize> = self.postdoms(a).into_iter().filter(|&b| b != a).collect();
        strict
            .iter()
            .copied()
            .find(|&d| strict.iter().all(|&other| self.post_dominates(other, d)))
    }
}

pub fn brute_force_postdom(cfg: &SupersetCfg) -> PostDomSets {
    let n = cfg.region_len();
    assert!(n <= 4096, "brute-force oracle limited to 4096 offsets");

    // Components by undirected flood fill.
    let mut undirected = vec![Vec::new(); n];
    for (a, b) in cfg.edges() {
        undirected[a].push(b);
        undirected[b].push(a);
    }
    let mut wcc = vec![usize::MAX; n];
    let mut num_wccs = 0;
    for start in 0..n {
        if wcc[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        wcc[start] = num_wccs;
        while let Some(v) = stack.pop() {
            for &w in &undirected[v] {
                if wcc[w] == usize::MAX {
                    wcc[w] = num_wccs;
                    stack.push(w);
                }
            }
        }
        num_wccs += 1;
    }

    // reach[v]: nodes reachable from v by one or more edges.
    let reach: Vec<BitSet> = (0..n)
        .map(|v| {
            let mut set = BitSet::new(n);
            let mut stack: Vec<usize> = cfg.succ(v).to_vec();
            while let Some(w) = stack.pop() {
                if !set.contains(w) {
                    set.insert(w);
                    stack.extend_from_slice(cfg.succ(w));
                }
            }
            set
        })
        .collect();
    let on_terminal_cycle = |v: usize| {
        reach[v].contains(v) && (0..n).all(|u| !reach[v].contains(u) || reach[u].contains(v))
    };
    let anchored: Vec<bool> = (0..n)
        .map(|v| cfg.succ(v).is_empty() || (cfg.class(v).is_jump() && on_terminal_cycle(v)))
        .collect();

    let total = n + num_wccs;
    let succ = |v: usize| -> Vec<usize> {
        let mut out = cfg.succ(v).to_vec();
        if anchored[v] {
            out.push(n + wcc[v]);
        }
        out
    };

    let mut sets: Vec<BitSet> = (0..total)
        .map(|v| {
            if v >= n {
                let mut s = BitSet::new(total);
                s.insert(v);
                s
            } else {
                BitSet::full(total)
            }
        })
        .collect();

    let mut changed = true;
    while changed {
        changed = false;
        for v in (0..n).rev() {
            let mut next = BitSet::full(total);
            let succs = succ(v);
            if succs.is_empty() {
                // Cannot happen after anchoring; keep the top element.
                continue;
            }
            for s in succs {
                for (w, sw) in next.words.iter_mut().zip(&sets[s].words) {
                    *w &= sw;
                }
            }
            next.insert(v);
            if next.words != sets[v].words {
                sets[v] = next;
                changed = true;
            }
        }
    }
    debug_assert!(sets.iter().all(|s| s.count() >= 1));

    PostDomSets {
        region_len: n,
        num_wccs,
        sets,
    }
}
