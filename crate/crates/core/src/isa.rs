//! Instruction model and the TBC-1 toy instruction set.
//!
//! TBC-1 is a small variable-length encoding (1 to 3 bytes, opcode first)
//! that exercises every control-flow shape the graph algorithms care about:
//! fall-through, unconditional and conditional direct jumps, calls, indirect
//! transfers and terminators. Real-architecture backends plug in through
//! [`Decoder`].
//!
//! | opcode | operands   | len | kind           |
//! |--------|------------|-----|----------------|
//! | `0x00` |            | 1   | `HALT`, terminator |
//! | `0x01` |            | 1   | `RET`, terminator  |
//! | `0x02` |            | 1   | `IJMP`, indirect jump |
//! | `0x10` | rel8       | 2   | `JMP`, direct jump |
//! | `0x11` | rel8       | 2   | `JCC`, conditional jump |
//! | `0x12` | rel8       | 2   | `CALL`, direct call |
//! | `0x13` |            | 1   | `ICALL`, indirect call |
//! | `0x20` | imm8       | 2   | `OP2` |
//! | `0x21` | imm8 imm8  | 3   | `OP3` |
//! | `0x90` |            | 1   | `NOP` |
//!
//! Relative targets are `offset + len + sign_extend(rel8)`.

use std::fmt;

use arrayvec::ArrayVec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InstKind {
    FallThrough,
    Nop,
    DirectJump,
    IndirectJump,
    CondJump,
    DirectCall,
    IndirectCall,
    Terminator,
}

impl InstKind {
    /// The sole static successor is the physically next instruction.
    ///
    /// Calls count here: their target edges are never part of the graph.
    pub fn is_fall_through_like(self) -> bool {
        matches!(
            self,
            InstKind::FallThrough | InstKind::Nop | InstKind::DirectCall | InstKind::IndirectCall
        )
    }

    pub fn is_control_flow(self) -> bool {
        !self.is_fall_through_like()
    }

    /// Kinds that can close a cycle in the graph.
    pub fn is_jump(self) -> bool {
        matches!(self, InstKind::DirectJump | InstKind::CondJump)
    }

    pub fn name(self) -> &'static str {
        match self {
            InstKind::FallThrough => "fallthrough",
            InstKind::Nop => "nop",
            InstKind::DirectJump => "jmp",
            InstKind::IndirectJump => "ijmp",
            InstKind::CondJump => "jcc",
            InstKind::DirectCall => "call",
            InstKind::IndirectCall => "icall",
            InstKind::Terminator => "term",
        }
    }
}

impl fmt::Display for InstKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Statically known successor offsets. May point outside the region; the
/// graph builder decides what to do with those.
pub type Successors = ArrayVec<i64, 2>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedInst {
    pub offset: usize,
    pub length: usize,
    pub kind: InstKind,
    /// Fall-through first, then the branch target.
    pub successors: Successors,
}

impl DecodedInst {
    pub fn fall_through(&self) -> i64 {
        (self.offset + self.length) as i64
    }
}

/// A raw code region. `base` only affects rendered addresses.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Region {
    pub bytes: Vec<u8>,
    pub base: u64,
}

impl Region {
    pub fn new(bytes: Vec<u8>) -> Self {
        Region { bytes, base: 0 }
    }

    pub fn with_base(bytes: Vec<u8>, base: u64) -> Self {
        Region { bytes, base }
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    pub fn address(&self, offset: usize) -> u64 {
        self.base.wrapping_add(offset as u64)
    }
}

/// Decoding backend. Implementations must be pure functions of
/// `bytes[offset..offset + max_inst_len()]`.
pub trait Decoder: Sync {
    fn name(&self) -> &'static str;

    fn max_inst_len(&self) -> usize;

    /// `None` when the bytes at `offset` do not form an instruction.
    fn decode_at(&self, bytes: &[u8], offset: usize) -> Option<DecodedInst>;
}

pub const TBC1_MAX_INST_LEN: usize = 3;

#[derive(Debug, Clone, Copy, Default)]
pub struct Tbc1;

pub mod opcode {
    pub const HALT: u8 = 0x00;
    pub const RET: u8 = 0x01;
    pub const IJMP: u8 = 0x02;
    pub const JMP: u8 = 0x10;
    pub const JCC: u8 = 0x11;
    pub const CALL: u8 = 0x12;
    pub const ICALL: u8 = 0x13;
    pub const OP2: u8 = 0x20;
    pub const OP3: u8 = 0x21;
    pub const NOP: u8 = 0x90;

    pub const ALL: [u8; 10] = [HALT, RET, IJMP, JMP, JCC, CALL, ICALL, OP2, OP3, NOP];
}

impl Decoder for Tbc1 {
    fn name(&self) -> &'static str {
        "tbc1"
    }

    fn max_inst_len(&self) -> usize {
        TBC1_MAX_INST_LEN
    }

    fn decode_at(&self, bytes: &[u8], offset: usize) -> Option<DecodedInst> {
        use opcode::*;

        let op = *bytes.get(offset)?;
        let (length, kind) = match op {
            HALT | RET => (1, InstKind::Terminator),
            IJMP => (1, InstKind::IndirectJump),
            JMP => (2, InstKind::DirectJump),
            JCC => (2, InstKind::CondJump),
            CALL => (2, InstKind::DirectCall),
            ICALL => (1, InstKind::IndirectCall),
            OP2 => (2, InstKind::FallThrough),
            OP3 => (3, InstKind::FallThrough),
            NOP => (1, InstKind::Nop),
            _ => return None,
        };
        if offset + length > bytes.len() {
            return None;
        }

        let next = (offset + length) as i64;
        let target = || next + i64::from(bytes[offset + 1] as i8);
        let mut successors = Successors::new();
        match kind {
            InstKind::Terminator | InstKind::IndirectJump => {}
            InstKind::DirectJump => successors.push(target()),
            InstKind::CondJump => {
                successors.push(next);
                successors.push(target());
            }
            // Call targets are deliberately not successors.
            InstKind::FallThrough
            | InstKind::Nop
            | InstKind::DirectCall
            | InstKind::IndirectCall => successors.push(next),
        }

        Some(DecodedInst {
            offset,
            length,
            kind,
            successors,
        })
    }
}

pub fn decoder_by_name(name: &str) -> Result<&'static dyn Decoder> {
    match name {
        "tbc1" | "tbc-1" | "TBC-1" => Ok(&Tbc1),
        other => Err(Error::UnknownIsa(other.to_string())),
    }
}

/// Decode a candidate at every offset of the region.
pub fn superset_decode(decoder: &dyn Decoder, region: &Region) -> Vec<Option<DecodedInst>> {
    (0..region.len())
        .map(|offset| decoder.decode_at(&region.bytes, offset))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decode(bytes: &[u8], offset: usize) -> Option<DecodedInst> {
        Tbc1.decode_at(bytes, offset)
    }

    #[test]
    fn self_loop_jump() {
        let inst = decode(&[0x10, 0xFE], 0).unwrap();
        assert_eq!(inst.kind, InstKind::DirectJump);
        assert_eq!(inst.length, 2);
        assert_eq!(inst.successors.as_slice(), &[0]);
    }

    #[test]
    fn nop_falls_through() {
        let inst = decode(&[0x90], 0).unwrap();
        assert_eq!(inst.kind, InstKind::Nop);
        assert_eq!(inst.length, 1);
        assert_eq!(inst.successors.as_slice(), &[1]);
    }

    #[test]
    fn truncated_is_undecodable() {
        assert_eq!(decode(&[0x21, 0x00], 0), None);
        assert_eq!(decode(&[0x10], 0), None);
        assert_eq!(decode(&[0x42], 0), None);
    }

    #[test]
    fn conditional_and_call_successors() {
        let jcc = decode(&[0x11, 0x03], 0).unwrap();
        assert_eq!(jcc.successors.as_slice(), &[2, 5]);
        let back = decode(&[0x90, 0x11, 0x80], 1).unwrap();
        assert_eq!(back.successors.as_slice(), &[3, 3 - 128]);
        let call = decode(&[0x12, 0x10, 0x00], 0).unwrap();
        assert_eq!(call.kind, InstKind::DirectCall);
        assert_eq!(call.successors.as_slice(), &[2]);
        let icall = decode(&[0x13], 0).unwrap();
        assert_eq!(icall.successors.as_slice(), &[1]);
        for op in [0x00, 0x01, 0x02] {
            assert!(decode(&[op], 0).unwrap().successors.is_empty());
        }
    }

    #[test]
    fn superset_of_nops() {
        let region = Region::new(vec![0x90; 3]);
        let all = superset_decode(&Tbc1, &region);
        assert_eq!(all.len(), 3);
        for (offset, inst) in all.iter().enumerate() {
            let inst = inst.as_ref().unwrap();
            assert_eq!(inst.offset, offset);
            assert_eq!(inst.kind, InstKind::Nop);
        }
        assert!(superset_decode(&Tbc1, &Region::default()).is_empty());
    }

    #[test]
    fn kind_partition() {
        use InstKind::*;
        let ft = [FallThrough, Nop, DirectCall, IndirectCall];
        let cf = [DirectJump, IndirectJump, CondJump, Terminator];
        assert!(ft.iter().all(|k| k.is_fall_through_like()));
        assert!(cf.iter().all(|k| k.is_control_flow()));
    }

    proptest::proptest! {
        #[test]
        fn superset_matches_pointwise(bytes in proptest::collection::vec(proptest::prelude::any::<u8>(), 0..64)) {
            let region = Region::new(bytes.clone());
            let all = superset_decode(&Tbc1, &region);
            proptest::prop_assert_eq!(all.len(), bytes.len());
            for (offset, entry) in all.iter().enumerate() {
                proptest::prop_assert_eq!(entry, &decode(&bytes, offset));
                if let Some(inst) = entry {
                    proptest::prop_assert!(inst.length >= 1 && inst.length <= TBC1_MAX_INST_LEN);
                    if inst.kind.is_fall_through_like() {
                        proptest::prop_assert_eq!(inst.successors.as_slice(), &[inst.fall_through()]);
                    }
                }
            }
        }
    }
}
