//! Deterministic per-offset features for sequence models over the superset
//! decoding: windowed reachability and overlap masks, and a fixed-width
//! control-flow adjacency table.
//!
//! Binary layouts (all integers little-endian):
//!
//! ```text
//! mask file:   "PDM1" | region_len: u32 | radius: u32 | max_steps: u32
//!              then region_len rows of ceil((2 * radius + 1) / 8) bytes;
//!              bit k (LSB first) of a row is relative position k - radius
//! global file: "PDG1" | region_len: u32 | slots: u32 (= 4) | 0: u32
//!              then region_len * 4 i32: must, may[0], may[1], next (-1 = none)
//! ```

use crate::isa::InstKind;
use crate::supercfg::{NodeClass, SupersetCfg};

pub const MASK_MAGIC: [u8; 4] = *b"PDM1";
pub const GLOBAL_MAGIC: [u8; 4] = *b"PDG1";
pub const HEADER_LEN: usize = 16;

/// Export defaults: window of 64 on each side, sequences chunked at 8192.
pub const DEFAULT_WINDOW: usize = 64;
pub const DEFAULT_CHUNK: usize = 8192;
pub const DEFAULT_MAX_STEPS: usize = 64;

/// Generation-stamped visited marks, reused across walks.
struct Walker {
    stamp: Vec<u32>,
    generation: u32,
}

impl Walker {
    fn new(n: usize) -> Self {
        Walker {
            stamp: vec![0; n],
            generation: 0,
        }
    }

    fn walk(&mut self, cfg: &SupersetCfg, start: usize, max_steps: usize, out: &mut Vec<usize>) {
        self.generation += 1;
        out.clear();
        out.push(start);
        self.stamp[start] = self.generation;
        let mut node = start;
        for _ in 0..max_steps {
            let succ = cfg.succ(node);
            if succ.len() != 1 || cfg.class(node) == NodeClass::Decodable(InstKind::CondJump) {
                break;
            }
            node = succ[0];
            if self.stamp[node] == self.generation {
                break;
            }
            self.stamp[node] = self.generation;
            out.push(node);
        }
    }
}

/// Offsets visited from `start` along unique successors, at most `max_steps`
/// hops, stopping at (and including) any node without exactly one successor.
pub fn reachability_set(cfg: &SupersetCfg, start: usize, max_steps: usize) -> Vec<usize> {
    let mut out = Vec::new();
    Walker::new(cfg.region_len()).walk(cfg, start, max_steps, &mut out);
    out
}

pub fn reachability_sets(cfg: &SupersetCfg, max_steps: usize) -> Vec<Vec<usize>> {
    let mut walker = Walker::new(cfg.region_len());
    let mut buf = Vec::new();
    (0..cfg.region_len())
        .map(|i| {
            walker.walk(cfg, i, max_steps, &mut buf);
            buf.clone()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowMask {
    region_len: usize,
    radius: usize,
    max_steps: usize,
    row_bytes: usize,
    bits: Vec<u8>,
}

impl WindowMask {
    fn new(region_len: usize, radius: usize, max_steps: usize) -> Self {
        let row_bytes = (2 * radius + 1).div_ceil(8);
        let mut mask = WindowMask {
            region_len,
            radius,
            max_steps,
            row_bytes,
            bits: vec![0; row_bytes * region_len],
        };
        for i in 0..region_len {
            mask.set(i, i);
        }
        mask
    }

    pub fn region_len(&self) -> usize {
        self.region_len
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn row_len(&self) -> usize {
        2 * self.radius + 1
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.region_len || j >= self.region_len || i.abs_diff(j) > self.radius {
            return None;
        }
        Some(j + self.radius - i)
    }

    fn set(&mut self, i: usize, j: usize) {
        if let Some(k) = self.position(i, j) {
            self.bits[i * self.row_bytes + k / 8] |= 1 << (k % 8);
        }
    }

    /// Can offset `i` attend to offset `j`? False outside the window.
    pub fn allowed(&self, i: usize, j: usize) -> bool {
        self.position(i, j)
            .is_some_and(|k| self.bits[i * self.row_bytes + k / 8] >> (k % 8) & 1 == 1)
    }

    /// Row `i` as booleans over relative positions `-radius..=radius`.
    pub fn row(&self, i: usize) -> Vec<bool> {
        (0..self.row_len())
            .map(|k| {
                (i + k)
                    .checked_sub(self.radius)
                    .is_some_and(|j| self.allowed(i, j))
            })
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.bits.len());
        out.extend_from_slice(&MASK_MAGIC);
        out.extend_from_slice(&(self.region_len as u32).to_le_bytes());
        out.extend_from_slice(&(self.radius as u32).to_le_bytes());
        out.extend_from_slice(&(self.max_steps as u32).to_le_bytes());
        out.extend_from_slice(&self.bits);
        out
    }
}

/// `i` may attend to `j` when they lie within `radius` of each other and one
/// is on the other's reachability chain.
pub fn reachability_mask(cfg: &SupersetCfg, radius: usize, max_steps: usize) -> WindowMask {
    let mut mask = WindowMask::new(cfg.region_len(), radius, max_steps);
    let mut walker = Walker::new(cfg.region_len());
    let mut chain = Vec::new();
    for i in 0..cfg.region_len() {
        walker.walk(cfg, i, max_steps, &mut chain);
        for &j in &chain {
            mask.set(i, j);
            mask.set(j, i);
        }
    }
    mask
}

/// `i` may attend to `j` when their byte spans intersect. Invalid offsets
/// span one byte.
pub fn overlap_mask(cfg: &SupersetCfg, radius: usize) -> WindowMask {
    let n = cfg.region_len();
    let span = |v: usize| cfg.length(v).max(1);
    let mut mask = WindowMask::new(n, radius, 0);
    for i in 0..n {
        let end = i + span(i);
        for j in i + 1..(i + radius + 1).min(n) {
            if j < end {
                mask.set(i, j);
                mask.set(j, i);
            }
        }
    }
    mask
}

pub const NO_CONNECTION: i64 = -1;

/// must, may[0], may[1], next.
pub type Connections = [i64; 4];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalAdjacency(pub Vec<Connections>);

impl GlobalAdjacency {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 16 * self.0.len());
        out.extend_from_slice(&GLOBAL_MAGIC);
        out.extend_from_slice(&(self.0.len() as u32).to_le_bytes());
        out.extend_from_slice(&4u32.to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        for slots in &self.0 {
            for &s in slots {
                out.extend_from_slice(&(s as i32).to_le_bytes());
            }
        }
        out
    }
}

pub fn global_connections(cfg: &SupersetCfg) -> GlobalAdjacency {
    let n = cfg.region_len();
    GlobalAdjacency(
        (0..n)
            .map(|v| {
                let mut slots = [NO_CONNECTION; 4];
                let succ = cfg.succ(v);
                match cfg.class(v) {
                    NodeClass::Invalid => return slots,
                    NodeClass::Decodable(InstKind::CondJump) => {
                        for (slot, &s) in slots[1..3].iter_mut().zip(succ) {
                            *slot = s as i64;
                        }
                    }
                    NodeClass::Decodable(_) => {
                        if let [only] = succ {
                            slots[0] = *only as i64;
                        }
                    }
                }
                let next = v + cfg.length(v);
                if next < n {
                    slots[3] = next as i64;
                }
                slots
            })
            .collect(),
    )
}
