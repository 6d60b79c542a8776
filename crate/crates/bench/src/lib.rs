//! Input generators shared by the benchmarks.

use pdt_disasm::isa::opcode;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A region where most bytes are TBC-1 opcodes, so the superset graph is
/// dense with overlapping candidates, jumps and loops.
pub fn synthetic_region(len: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| {
            if rng.gen_bool(0.75) {
                opcode::ALL[rng.gen_range(0..opcode::ALL.len())]
            } else {
                rng.gen()
            }
        })
        .collect()
}

/// Uniform scores in `[-3, 3]`.
pub fn synthetic_scores(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    (0..len).map(|_| rng.gen_range(-3.0..=3.0)).collect()
}
