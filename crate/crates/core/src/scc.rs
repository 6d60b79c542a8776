//! Strongly connected components of the superset CFG (iterative Tarjan).

use crate::supercfg::SupersetCfg;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SccInfo {
    /// Component index per offset. Components are numbered in Tarjan
    /// completion order, so every edge between components goes from a
    /// higher index to a lower one.
    pub scc_id: Vec<usize>,
    /// Per component: no edge leaves it.
    pub terminal: Vec<bool>,
    /// Per component: contains a cycle (more than one node, or a self loop).
    pub cyclic: Vec<bool>,
}

impl SccInfo {
    pub fn len(&self) -> usize {
        self.terminal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terminal.is_empty()
    }
}

const UNSEEN: usize = usize::MAX;

pub fn scc_info(cfg: &SupersetCfg) -> SccInfo {
    let n = cfg.region_len();
    let mut index = vec![UNSEEN; n];
    let mut lowlink = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut scc_id = vec![UNSEEN; n];
    let mut stack = Vec::new();
    let mut call: Vec<(usize, usize)> = Vec::new();
    let mut next_index = 0;
    let mut sizes: Vec<usize> = Vec::new();

    for start in 0..n {
        if index[start] != UNSEEN {
            continue;
        }
        index[start] = next_index;
        lowlink[start] = next_index;
        next_index += 1;
        stack.push(start);
        on_stack[start] = true;
        call.push((start, 0));

        while let Some(&mut (v, ref mut edge)) = call.last_mut() {
            if let Some(&w) = cfg.succ(v).get(*edge) {
                *edge += 1;
                if index[w] == UNSEEN {
                    index[w] = next_index;
                    lowlink[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    lowlink[v] = lowlink[v].min(index[w]);
                }
                continue;
            }

            call.pop();
            if let Some(&(parent, _)) = call.last() {
                lowlink[parent] = lowlink[parent].min(lowlink[v]);
            }
            if lowlink[v] == index[v] {
                let id = sizes.len();
                let mut size = 0;
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    scc_id[w] = id;
                    size += 1;
                    if w == v {
                        break;
                    }
                }
                sizes.push(size);
            }
        }
    }

    let mut terminal = vec![true; sizes.len()];
    let mut cyclic: Vec<bool> = sizes.iter().map(|&s| s > 1).collect();
    for (from, to) in cfg.edges() {
        if scc_id[from] != scc_id[to] {
            terminal[scc_id[from]] = false;
        } else if from == to {
            cyclic[scc_id[from]] = true;
        }
    }

    SccInfo {
        scc_id,
        terminal,
        cyclic,
    }
}
