//! Lengauer-Tarjan immediate dominators over a compact adjacency graph.
//!
//! This is the "simple" variant (path compression without balancing),
//! O(E log V). Post-dominators are obtained by running it on the reversed
//! graph rooted at the exit.

/// Adjacency in compressed row form.
#[derive(Debug, Clone, Default)]
pub(crate) struct Csr {
    pub start: Vec<usize>,
    pub targets: Vec<usize>,
}

impl Csr {
    pub fn clear(&mut self) {
        self.start.clear();
        self.targets.clear();
    }

    pub fn row(&self, node: usize) -> &[usize] {
        &self.targets[self.start[node]..self.start[node + 1]]
    }
}

pub(crate) const UNDEF: usize = usize::MAX;

/// Scratch buffers, reusable across graphs.
#[derive(Debug, Default)]
pub(crate) struct DomScratch {
    dfnum: Vec<usize>,
    vertex: Vec<usize>,
    parent: Vec<usize>,
    semi: Vec<usize>,
    label: Vec<usize>,
    ancestor: Vec<usize>,
    idom: Vec<usize>,
    bucket_head: Vec<usize>,
    bucket_next: Vec<usize>,
    dfs: Vec<(usize, usize)>,
    path: Vec<usize>,
}

fn reset(v: &mut Vec<usize>, n: usize, value: usize) {
    v.clear();
    v.resize(n, value);
}

impl DomScratch {
    fn eval(&mut self, v: usize) -> usize {
        if self.ancestor[v] == UNDEF {
            return v;
        }
        self.compress(v);
        self.label[v]
    }

    fn compress(&mut self, v: usize) {
        self.path.clear();
        let mut x = v;
        while self.ancestor[self.ancestor[x]] != UNDEF {
            self.path.push(x);
            x = self.ancestor[x];
        }
        while let Some(x) = self.path.pop() {
            let a = self.ancestor[x];
            if self.semi[self.label[a]] < self.semi[self.label[x]] {
                self.label[x] = self.label[a];
            }
            self.ancestor[x] = self.ancestor[a];
        }
    }
}

/// Immediate dominator of every node of an `n`-node graph, written to `out`.
/// The root maps to itself; nodes unreachable from the root map to [`UNDEF`].
pub(crate) fn immediate_dominators(
    n: usize,
    root: usize,
    succ: &Csr,
    pred: &Csr,
    s: &mut DomScratch,
    out: &mut Vec<usize>,
) {
    reset(&mut s.dfnum, n, UNDEF);
    s.vertex.clear();
    reset(&mut s.parent, n, UNDEF);

    // Preorder numbering.
    s.dfnum[root] = 0;
    s.vertex.push(root);
    s.dfs.clear();
    s.dfs.push((root, 0));
    while let Some(&mut (v, ref mut edge)) = s.dfs.last_mut() {
        let row = succ.row(v);
        if let Some(&w) = row.get(*edge) {
            *edge += 1;
            if s.dfnum[w] == UNDEF {
                let num = s.vertex.len();
                s.dfnum[w] = num;
                s.vertex.push(w);
                s.parent[num] = s.dfnum[v];
                s.dfs.push((w, 0));
            }
        } else {
            s.dfs.pop();
        }
    }

    let reached = s.vertex.len();
    s.semi.clear();
    s.semi.extend(0..reached);
    s.label.clear();
    s.label.extend(0..reached);
    reset(&mut s.ancestor, reached, UNDEF);
    reset(&mut s.idom, reached, UNDEF);
    reset(&mut s.bucket_head, reached, UNDEF);
    reset(&mut s.bucket_next, reached, UNDEF);

    for w in (1..reached).rev() {
        let node = s.vertex[w];
        for &p in pred.row(node) {
            let v = s.dfnum[p];
            if v == UNDEF {
                continue;
            }
            let u = s.eval(v);
            if s.semi[u] < s.semi[w] {
                s.semi[w] = s.semi[u];
            }
        }
        let sw = s.semi[w];
        s.bucket_next[w] = s.bucket_head[sw];
        s.bucket_head[sw] = w;

        let p = s.parent[w];
        s.ancestor[w] = p;

        let mut v = s.bucket_head[p];
        s.bucket_head[p] = UNDEF;
        while v != UNDEF {
            let next = s.bucket_next[v];
            let u = s.eval(v);
            s.idom[v] = if s.semi[u] < s.semi[v] { u } else { p };
            v = next;
        }
    }

    for w in 1..reached {
        if s.idom[w] != s.semi[w] {
            s.idom[w] = s.idom[s.idom[w]];
        }
    }

    reset(out, n, UNDEF);
    out[root] = root;
    for w in 1..reached {
        out[s.vertex[w]] = s.vertex[s.idom[w]];
    }
}
