//! A minimal EVM assembler over labeled blocks. Jump targets are written as
//! labels and resolved to concrete offsets at assembly time, which is what
//! lets the corpus generator reorder blocks or widen push immediates and
//! still emit working code.

use std::collections::BTreeMap;
use std::fmt;

use crate::opcode::{self, OpCode};

pub type Label = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AsmOp {
    /// A plain opcode with no immediate.
    Op(OpCode),
    /// PUSHn with the given immediate bytes (n = data length, 1..=32).
    Push(Vec<u8>),
    /// PUSH2 of a block's resolved start offset.
    PushLabel(Label),
}

impl AsmOp {
    pub fn push_u64(v: u64) -> AsmOp {
        let bytes = v.to_be_bytes();
        let skip = bytes.iter().take_while(|&&b| b == 0).count().min(7);
        AsmOp::Push(bytes[skip..].to_vec())
    }

    fn size(&self) -> usize {
        match self {
            AsmOp::Op(_) => 1,
            AsmOp::Push(data) => 1 + data.len(),
            AsmOp::PushLabel(_) => 3, // always PUSH2
        }
    }
}

/// A labeled block. `jump_target` blocks are prefixed with JUMPDEST when
/// emitted. `falls_through` marks blocks whose execution continues into the
/// block that follows them in layout order; the reorder mutation keeps such
/// blocks glued to their successor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AsmBlock {
    pub label: Label,
    pub jump_target: bool,
    pub ops: Vec<AsmOp>,
}

impl AsmBlock {
    pub fn new(label: Label, jump_target: bool, ops: Vec<AsmOp>) -> Self {
        AsmBlock { label, jump_target, ops }
    }

    pub fn falls_through(&self) -> bool {
        match self.ops.last() {
            Some(AsmOp::Op(op)) => !(opcode::is_halt(*op) || *op == opcode::JUMP),
            _ => true,
        }
    }

    fn size(&self) -> usize {
        (self.jump_target as usize) + self.ops.iter().map(AsmOp::size).sum::<usize>()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Program {
    pub blocks: Vec<AsmBlock>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AsmError {
    UnknownLabel(Label),
    DuplicateLabel(Label),
    OffsetOverflow,
    BadPushWidth(usize),
}

impl fmt::Display for AsmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AsmError::UnknownLabel(l) => write!(f, "push of undefined label {l}"),
            AsmError::DuplicateLabel(l) => write!(f, "label {l} defined twice"),
            AsmError::OffsetOverflow => write!(f, "program too large for 2-byte label offsets"),
            AsmError::BadPushWidth(n) => write!(f, "push immediate of {n} bytes"),
        }
    }
}

impl std::error::Error for AsmError {}

impl Program {
    pub fn new(blocks: Vec<AsmBlock>) -> Self {
        Program { blocks }
    }

    /// Start offset of every block in layout order.
    pub fn layout(&self) -> Result<BTreeMap<Label, usize>, AsmError> {
        let mut offsets = BTreeMap::new();
        let mut pos = 0usize;
        for block in &self.blocks {
            if offsets.insert(block.label, pos).is_some() {
                return Err(AsmError::DuplicateLabel(block.label));
            }
            pos += block.size();
        }
        if pos > u16::MAX as usize {
            return Err(AsmError::OffsetOverflow);
        }
        Ok(offsets)
    }

    pub fn assemble(&self) -> Result<Vec<u8>, AsmError> {
        let offsets = self.layout()?;
        let mut out = Vec::new();
        for block in &self.blocks {
            if block.jump_target {
                out.push(opcode::JUMPDEST);
            }
            for op in &block.ops {
                match op {
                    AsmOp::Op(byte) => out.push(*byte),
                    AsmOp::Push(data) => {
                        if data.is_empty() || data.len() > 32 {
                            return Err(AsmError::BadPushWidth(data.len()));
                        }
                        out.push(opcode::PUSH1 + (data.len() - 1) as u8);
                        out.extend_from_slice(data);
                    }
                    AsmOp::PushLabel(label) => {
                        let target = *offsets.get(label).ok_or(AsmError::UnknownLabel(*label))?;
                        out.push(opcode::PUSH2);
                        out.extend_from_slice(&(target as u16).to_be_bytes());
                    }
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opcode::{JUMP, JUMPDEST, SSTORE, STOP};

    #[test]
    fn resolves_forward_and_backward_labels() {
        let prog = Program::new(vec![
            AsmBlock::new(0, false, vec![AsmOp::PushLabel(2), AsmOp::Op(JUMP)]),
            AsmBlock::new(1, true, vec![AsmOp::Op(STOP)]),
            AsmBlock::new(
                2,
                true,
                vec![AsmOp::push_u64(1), AsmOp::push_u64(0), AsmOp::Op(SSTORE), AsmOp::PushLabel(1), AsmOp::Op(JUMP)],
            ),
        ]);
        let bytes = prog.assemble().unwrap();
        // entry: PUSH2 0x0006 JUMP; block1 at 4: JUMPDEST STOP; block2 at 6
        assert_eq!(&bytes[..4], &[0x61, 0x00, 0x06, 0x56]);
        assert_eq!(bytes[4], JUMPDEST);
        assert_eq!(bytes[6], JUMPDEST);
        // block 2 jumps back to offset 4
        let prog_offsets = prog.layout().unwrap();
        assert_eq!(prog_offsets[&1], 4);
        assert_eq!(prog_offsets[&2], 6);
    }

    #[test]
    fn reordering_preserves_targets() {
        let mk = |order: &[usize]| {
            let blocks = vec![
                AsmBlock::new(0, false, vec![AsmOp::PushLabel(2), AsmOp::Op(JUMP)]),
                AsmBlock::new(1, true, vec![AsmOp::Op(STOP)]),
                AsmBlock::new(2, true, vec![AsmOp::PushLabel(1), AsmOp::Op(JUMP)]),
            ];
            Program::new(order.iter().map(|&i| blocks[i].clone()).collect())
        };
        for order in [&[0usize, 1, 2][..], &[0, 2, 1][..]] {
            let prog = mk(order);
            let bytes = prog.assemble().unwrap();
            let offsets = prog.layout().unwrap();
            // decoded PUSH2 in the entry must point at block 2's JUMPDEST
            let target = ((bytes[1] as usize) << 8) | bytes[2] as usize;
            assert_eq!(target, offsets[&2]);
            assert_eq!(bytes[offsets[&2]], JUMPDEST);
        }
    }

    #[test]
    fn duplicate_labels_rejected() {
        let prog = Program::new(vec![
            AsmBlock::new(0, false, vec![AsmOp::Op(STOP)]),
            AsmBlock::new(0, false, vec![AsmOp::Op(STOP)]),
        ]);
        assert_eq!(prog.assemble(), Err(AsmError::DuplicateLabel(0)));
    }
}
