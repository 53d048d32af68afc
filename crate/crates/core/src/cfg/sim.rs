//! Bounded abstract interpretation of EVM code.
//!
//! Stack slots hold ids into a per-function value arena. PUSH, DUP, SWAP,
//! POP, AND, JUMP and JUMPI are modeled exactly; every other opcode consumes
//! and produces opaque values with the arity from the opcode table. A
//! concrete-offset byte memory keeps enough provenance for the dataflow pass
//! to trace values through MSTORE/MLOAD, calldata/code/returndata copies and
//! call output regions. A write to a statically unknown offset drops the
//! whole memory image.

use std::collections::BTreeMap;

use crate::bytecode::Instruction;
use crate::opcode::{self, OpCode};
use crate::word::Word;

/// Visited-state budget per function.
pub const MAX_VISITED_STATES: usize = 10_000;
/// Stack prefix length used for the visited-state abstraction.
pub const STATE_KEY_DEPTH: usize = 16;
/// Return-address prefix length used for block cloning.
pub const CLONE_PATH_DEPTH: usize = 8;
/// Longest constant-length memory copy that is tracked byte by byte.
const MAX_TRACKED_COPY: u64 = 4_096;
/// Most words materialized from a memory range (call args, log data, ...).
pub const MAX_RANGE_WORDS: u64 = 8;
/// Memory offsets beyond this are treated as statically unknown.
const MAX_TRACKED_OFFSET: u64 = 1 << 32;

pub type ValueId = u32;

/// How a value came to exist. Classification into source-node kinds happens
/// in the dataflow pass; the simulator only records structure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValueOp {
    /// PUSH immediate or a read of untouched (zero) memory.
    Const,
    /// Produced by executing this opcode over `args`.
    Op(OpCode),
    /// Memory word composed from the argument values.
    MemRead,
    /// Memory word over bytes placed by CALLDATACOPY.
    CalldataRead { offset: Option<u64> },
    /// Memory word over bytes placed by RETURNDATACOPY or a call's output.
    ReturnDataRead { offset: Option<u64>, site: usize },
    /// Memory word over bytes placed by CODECOPY; the actual code bytes are
    /// in `const_val`.
    CodeRead,
    /// Join of values arriving along different control-flow paths.
    Phi,
    /// Operand below the simulated frame (never defined in view).
    External,
}

#[derive(Debug, Clone)]
pub struct SymValue {
    pub op: ValueOp,
    pub const_val: Option<Word>,
    pub args: Vec<ValueId>,
    /// Code offset of the defining instruction, when there is one.
    pub def_offset: Option<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct ValueArena {
    values: Vec<SymValue>,
}

impl ValueArena {
    pub fn get(&self, id: ValueId) -> &SymValue {
        &self.values[id as usize]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn const_of(&self, id: ValueId) -> Option<Word> {
        self.get(id).const_val
    }

    fn add(&mut self, v: SymValue) -> ValueId {
        let id = self.values.len() as ValueId;
        self.values.push(v);
        id
    }

    /// A constant with no defining instruction (entry-prefix seeds).
    pub fn seed_const(&mut self, w: Word) -> ValueId {
        self.konst(w, None)
    }

    /// An operand assumed to exist below the simulated frame.
    pub fn seed_external(&mut self) -> ValueId {
        self.external()
    }

    fn konst(&mut self, w: Word, def_offset: Option<usize>) -> ValueId {
        self.add(SymValue { op: ValueOp::Const, const_val: Some(w), args: vec![], def_offset })
    }

    fn opcode_result(
        &mut self,
        op: OpCode,
        args: Vec<ValueId>,
        const_val: Option<Word>,
        def_offset: usize,
    ) -> ValueId {
        self.add(SymValue { op: ValueOp::Op(op), const_val, args, def_offset: Some(def_offset) })
    }

    fn external(&mut self) -> ValueId {
        self.add(SymValue { op: ValueOp::External, const_val: None, args: vec![], def_offset: None })
    }

    fn phi(&mut self, a: ValueId, b: ValueId) -> ValueId {
        let const_val = match (self.const_of(a), self.const_of(b)) {
            (Some(x), Some(y)) if x == y => Some(x),
            _ => None,
        };
        self.add(SymValue { op: ValueOp::Phi, const_val, args: vec![a, b], def_offset: None })
    }
}

/// One byte of the abstract memory image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MemByte {
    /// Byte `index` (0 = most significant) of stack value `id`.
    Val { id: ValueId, index: u8 },
    Calldata { offset: Option<u64> },
    ReturnData { offset: u64, site: usize },
    Code { offset: usize },
    /// Contents lost at a control-flow join.
    Clobbered,
}

#[derive(Debug, Clone, Default)]
pub struct MemModel {
    bytes: BTreeMap<u64, MemByte>,
    havoc: bool,
}

impl MemModel {
    pub fn invalidate(&mut self) {
        self.bytes.clear();
        self.havoc = true;
    }

    pub fn is_havoc(&self) -> bool {
        self.havoc
    }

    fn write_word(&mut self, off: u64, id: ValueId) {
        for i in 0..32 {
            self.bytes.insert(off + i, MemByte::Val { id, index: i as u8 });
        }
    }

    fn write_byte(&mut self, off: u64, id: ValueId) {
        self.bytes.insert(off, MemByte::Val { id, index: 31 });
    }

    fn write_calldata(&mut self, dst: u64, src: Option<u64>, len: u64) {
        for i in 0..len {
            self.bytes.insert(dst + i, MemByte::Calldata { offset: src.map(|s| s + i) });
        }
    }

    fn write_returndata(&mut self, dst: u64, src: Option<u64>, len: u64, site: usize) {
        for i in 0..len {
            // unknown source offsets are recorded relative to the copy itself
            self.bytes.insert(
                dst + i,
                MemByte::ReturnData { offset: src.map_or(i, |s| s + i), site },
            );
        }
    }

    fn write_code(&mut self, dst: u64, src: usize, len: u64) {
        for i in 0..len {
            self.bytes.insert(dst + i, MemByte::Code { offset: src + i as usize });
        }
    }

    fn write_opaque(&mut self, dst: u64, len: u64, id: ValueId) {
        for i in 0..len {
            self.bytes.insert(dst + i, MemByte::Val { id, index: (i % 32) as u8 });
        }
    }

    fn copy_within(&mut self, dst: u64, src: u64, len: u64) {
        let snapshot: Vec<Option<MemByte>> =
            (0..len).map(|i| self.bytes.get(&(src + i)).copied()).collect();
        for (i, b) in snapshot.into_iter().enumerate() {
            match b {
                Some(v) => self.bytes.insert(dst + i as u64, v),
                None => self.bytes.remove(&(dst + i as u64)),
            };
        }
    }

    /// Reads the 32-byte word at `off`, synthesizing arena values for the
    /// provenance of its bytes. `site` is the code offset of the reading
    /// instruction.
    pub fn read_word(&self, off: u64, arena: &mut ValueArena, site: usize, code: &[u8]) -> ValueId {
        self.read_bytes(off, 32, arena, site, code)
    }

    /// Like `read_word` but over `len <= 32` bytes (call selectors).
    pub fn read_bytes(
        &self,
        off: u64,
        len: usize,
        arena: &mut ValueArena,
        site: usize,
        code: &[u8],
    ) -> ValueId {
        if self.havoc {
            return arena.opcode_result(opcode::MLOAD, vec![], None, site);
        }
        let cells: Vec<Option<MemByte>> =
            (0..len as u64).map(|i| self.bytes.get(&(off + i)).copied()).collect();

        // untouched memory reads as zero
        if cells.iter().all(|c| c.is_none()) {
            return arena.konst(Word::ZERO, None);
        }
        // clean pass-through: a prefix of exactly one stored word
        if let Some(MemByte::Val { id, index: 0 }) = cells[0] {
            let aligned = cells.iter().enumerate().all(|(i, c)| {
                matches!(c, Some(MemByte::Val { id: cid, index }) if *cid == id && *index as usize == i)
            });
            if aligned {
                return id;
            }
        }

        // composite read: one contributing arena value per distinct origin
        let mut args: Vec<ValueId> = Vec::new();
        let push_unique = |arg: ValueId, args: &mut Vec<ValueId>| {
            if !args.contains(&arg) {
                args.push(arg);
            }
        };
        let mut seen_cd: Vec<Option<u64>> = Vec::new();
        let mut seen_rd: Vec<(Option<u64>, usize)> = Vec::new();
        let mut seen_code: Vec<usize> = Vec::new();
        let mut clobbered = false;
        for (i, cell) in cells.iter().enumerate() {
            match cell {
                None => {}
                Some(MemByte::Val { id, .. }) => push_unique(*id, &mut args),
                Some(MemByte::Calldata { offset }) => {
                    let base = offset.map(|o| o.saturating_sub(i as u64));
                    if !seen_cd.contains(&base) {
                        seen_cd.push(base);
                        let v = arena.add(SymValue {
                            op: ValueOp::CalldataRead { offset: base },
                            const_val: None,
                            args: vec![],
                            def_offset: Some(site),
                        });
                        args.push(v);
                    }
                }
                Some(MemByte::ReturnData { offset, site: call_site }) => {
                    let base = (Some(offset.saturating_sub(i as u64)), *call_site);
                    if !seen_rd.contains(&base) {
                        seen_rd.push(base);
                        let v = arena.add(SymValue {
                            op: ValueOp::ReturnDataRead { offset: base.0, site: *call_site },
                            const_val: None,
                            args: vec![],
                            def_offset: Some(site),
                        });
                        args.push(v);
                    }
                }
                Some(MemByte::Code { offset }) => {
                    let base = offset.saturating_sub(i);
                    if !seen_code.contains(&base) {
                        seen_code.push(base);
                        let end = (base + 32).min(code.len());
                        let word = if base < code.len() {
                            let mut w = [0u8; 32];
                            w[..end - base].copy_from_slice(&code[base..end]);
                            Word(w)
                        } else {
                            Word::ZERO
                        };
                        let v = arena.add(SymValue {
                            op: ValueOp::CodeRead,
                            const_val: Some(word),
                            args: vec![],
                            def_offset: Some(site),
                        });
                        args.push(v);
                    }
                }
                Some(MemByte::Clobbered) => clobbered = true,
            }
        }
        if clobbered {
            let v = arena.opcode_result(opcode::MLOAD, vec![], None, site);
            args.push(v);
        }
        if args.len() == 1 {
            return args[0];
        }
        arena.add(SymValue { op: ValueOp::MemRead, const_val: None, args, def_offset: Some(site) })
    }

    /// The words covering `[off, off+len)`, at most `MAX_RANGE_WORDS`.
    pub fn read_range(
        &self,
        off: u64,
        len: u64,
        arena: &mut ValueArena,
        site: usize,
        code: &[u8],
    ) -> Vec<ValueId> {
        let n_words = len.div_ceil(32).min(MAX_RANGE_WORDS);
        (0..n_words).map(|i| self.read_word(off + 32 * i, arena, site, code)).collect()
    }

    /// Path join: keep bytes both sides agree on, clobber the rest.
    fn join(a: &MemModel, b: &MemModel) -> MemModel {
        if a.havoc || b.havoc {
            let mut m = MemModel::default();
            m.havoc = true;
            return m;
        }
        let mut out = MemModel::default();
        let keys: Vec<u64> = a.bytes.keys().chain(b.bytes.keys()).copied().collect();
        for k in keys {
            let entry = match (a.bytes.get(&k), b.bytes.get(&k)) {
                (Some(x), Some(y)) if x == y => *x,
                (None, None) => continue,
                _ => MemByte::Clobbered,
            };
            out.bytes.insert(k, entry);
        }
        out
    }
}

/// Stack plus memory at a program point.
#[derive(Debug, Clone, Default)]
pub struct PathState {
    pub stack: Vec<ValueId>,
    pub memory: MemModel,
}

impl PathState {
    pub fn with_stack(stack: Vec<ValueId>) -> Self {
        PathState { stack, memory: MemModel::default() }
    }

    fn pop(&mut self, arena: &mut ValueArena) -> ValueId {
        self.stack.pop().unwrap_or_else(|| arena.external())
    }

    fn peek(&self, depth: usize) -> Option<ValueId> {
        let n = self.stack.len();
        if depth < n {
            Some(self.stack[n - 1 - depth])
        } else {
            None
        }
    }

    fn push(&mut self, id: ValueId) {
        self.stack.push(id);
    }

    /// Const-or-unknown abstraction of the top `STATE_KEY_DEPTH` slots,
    /// top first.
    pub fn state_key(&self, arena: &ValueArena) -> Vec<Option<Word>> {
        self.stack.iter().rev().take(STATE_KEY_DEPTH).map(|&id| arena.const_of(id)).collect()
    }

    /// Return-address constants on the stack (top first, at most
    /// `CLONE_PATH_DEPTH`): constants that name a JUMPDEST in the code.
    pub fn clone_path(&self, arena: &ValueArena, jumpdests: &impl Fn(usize) -> bool) -> Vec<usize> {
        self.stack
            .iter()
            .rev()
            .filter_map(|&id| arena.const_of(id).and_then(|w| w.to_usize()))
            .filter(|&t| jumpdests(t))
            .take(CLONE_PATH_DEPTH)
            .collect()
    }

    /// Merges `other` into `self`, inserting phi values where the paths
    /// disagree. Stacks align at the top; excess depth on either side is
    /// dropped. Returns true when anything changed.
    pub fn join_from(&mut self, other: &PathState, arena: &mut ValueArena) -> bool {
        let mut changed = false;
        let n = self.stack.len().min(other.stack.len());
        if self.stack.len() != n {
            self.stack.drain(..self.stack.len() - n);
            changed = true;
        }
        let off_self = self.stack.len() - n;
        let off_other = other.stack.len() - n;
        debug_assert_eq!(off_self, 0);
        for i in 0..n {
            let a = self.stack[off_self + i];
            let b = other.stack[off_other + i];
            if a != b {
                // avoid phi chains when re-joining the same pair
                let already = match &arena.get(a).op {
                    ValueOp::Phi => arena.get(a).args.contains(&b),
                    _ => false,
                };
                if !already {
                    self.stack[off_self + i] = arena.phi(a, b);
                    changed = true;
                }
            }
        }
        let joined = MemModel::join(&self.memory, &other.memory);
        if joined.bytes != self.memory.bytes || joined.havoc != self.memory.havoc {
            self.memory = joined;
            changed = true;
        }
        changed
    }
}

/// Static contract facts the executor needs.
pub struct ExecEnv<'a> {
    pub code: &'a [u8],
    pub is_jumpdest: &'a dyn Fn(usize) -> bool,
}

/// A stable instruction encountered during execution, with its operands
/// (top of stack first) and the memory image at that point.
pub struct SiteView<'a> {
    pub insn: &'a Instruction,
    pub operands: &'a [ValueId],
    pub memory: &'a MemModel,
}

/// Where control goes after a block.
#[derive(Debug)]
pub struct ExecOutcome {
    /// (target offset, state at entry, true when reached by jump)
    pub successors: Vec<(usize, PathState, bool)>,
    /// A JUMP/JUMPI whose target could not be resolved to a constant.
    pub unresolved_jump: bool,
}

/// Runs one basic block. `next_offset` is the fall-through target (the byte
/// offset just past the block), `None` when the block ends the code.
pub fn exec_block(
    instructions: &[Instruction],
    next_offset: Option<usize>,
    mut state: PathState,
    arena: &mut ValueArena,
    env: &ExecEnv,
    visitor: &mut dyn FnMut(SiteView, &mut ValueArena),
) -> ExecOutcome {
    use opcode as op;

    let mut outcome = ExecOutcome { successors: vec![], unresolved_jump: false };
    for insn in instructions {
        let o = insn.opcode;
        if op::classify_stable(o).is_some() {
            let (pops, _) = op::stack_arity(o);
            let mut operands = Vec::with_capacity(pops);
            for depth in 0..pops {
                let id = state.peek(depth).unwrap_or_else(|| arena.external());
                operands.push(id);
            }
            visitor(SiteView { insn, operands: &operands, memory: &state.memory }, arena);
        }
        match o {
            op::PUSH0 => {
                let id = arena.konst(Word::ZERO, Some(insn.offset));
                state.push(id);
            }
            _ if op::push_width(o).is_some() => {
                let w = Word::from_be_slice(insn.push_data.as_deref().unwrap_or(&[]));
                let id = arena.konst(w, Some(insn.offset));
                state.push(id);
            }
            0x80..=0x8f => {
                // DUPn
                let depth = (o - op::DUP1) as usize;
                let id = match state.peek(depth) {
                    Some(v) => v,
                    None => {
                        let ext = arena.external();
                        while state.stack.len() <= depth {
                            state.stack.insert(0, arena.external());
                        }
                        let n = state.stack.len();
                        state.stack[n - 1 - depth] = ext;
                        ext
                    }
                };
                state.push(id);
            }
            0x90..=0x9f => {
                // SWAPn
                let depth = (o - op::SWAP1) as usize + 1;
                while state.stack.len() <= depth {
                    state.stack.insert(0, arena.external());
                }
                let n = state.stack.len();
                state.stack.swap(n - 1, n - 1 - depth);
            }
            op::POP => {
                state.pop(arena);
            }
            op::AND => {
                let a = state.pop(arena);
                let b = state.pop(arena);
                let cv = match (arena.const_of(a), arena.const_of(b)) {
                    (Some(x), Some(y)) => Some(x.bitand(&y)),
                    _ => None,
                };
                let id = arena.opcode_result(op::AND, vec![a, b], cv, insn.offset);
                state.push(id);
            }
            op::MLOAD => {
                let off = state.pop(arena);
                let id = match arena.const_of(off).and_then(|w| w.to_u64()) {
                    Some(o_val) if o_val < MAX_TRACKED_OFFSET => {
                        state.memory.read_word(o_val, arena, insn.offset, env.code)
                    }
                    _ => arena.opcode_result(op::MLOAD, vec![off], None, insn.offset),
                };
                state.push(id);
            }
            op::MSTORE | op::MSTORE8 => {
                let off = state.pop(arena);
                let val = state.pop(arena);
                match arena.const_of(off).and_then(|w| w.to_u64()) {
                    Some(o_val) if o_val < MAX_TRACKED_OFFSET => {
                        if o == op::MSTORE {
                            state.memory.write_word(o_val, val);
                        } else {
                            state.memory.write_byte(o_val, val);
                        }
                    }
                    _ => state.memory.invalidate(),
                }
            }
            op::CALLDATACOPY | op::CODECOPY | op::RETURNDATACOPY | 0x3c | op::MCOPY => {
                // EXTCODECOPY (0x3c) pops the address first
                if o == 0x3c {
                    state.pop(arena);
                }
                let dst = state.pop(arena);
                let src = state.pop(arena);
                let len = state.pop(arena);
                let dst_c = arena.const_of(dst).and_then(|w| w.to_u64());
                let src_c = arena.const_of(src).and_then(|w| w.to_u64());
                let len_c = arena.const_of(len).and_then(|w| w.to_u64());
                match (dst_c, len_c) {
                    (Some(d), Some(l))
                        if d < MAX_TRACKED_OFFSET && l <= MAX_TRACKED_COPY =>
                    {
                        match o {
                            op::CALLDATACOPY => state.memory.write_calldata(d, src_c, l),
                            op::RETURNDATACOPY => {
                                state.memory.write_returndata(d, src_c, l, insn.offset)
                            }
                            op::CODECOPY => match src_c {
                                Some(s) => state.memory.write_code(d, s as usize, l),
                                None => {
                                    let id = arena.opcode_result(o, vec![src], None, insn.offset);
                                    state.memory.write_opaque(d, l, id);
                                }
                            },
                            0x3c => {
                                let id = arena.opcode_result(o, vec![src], None, insn.offset);
                                state.memory.write_opaque(d, l, id);
                            }
                            op::MCOPY => match src_c {
                                Some(s) => state.memory.copy_within(d, s, l),
                                None => {
                                    let id = arena.opcode_result(o, vec![src], None, insn.offset);
                                    state.memory.write_opaque(d, l, id);
                                }
                            },
                            _ => unreachable!(),
                        }
                    }
                    _ => state.memory.invalidate(),
                }
            }
            op::KECCAK256 => {
                let off = state.pop(arena);
                let len = state.pop(arena);
                let off_c = arena.const_of(off).and_then(|w| w.to_u64());
                let len_c = arena.const_of(len).and_then(|w| w.to_u64());
                let args = match (off_c, len_c) {
                    (Some(ov), Some(lv)) if ov < MAX_TRACKED_OFFSET => {
                        state.memory.read_range(ov, lv, arena, insn.offset, env.code)
                    }
                    _ => vec![off, len],
                };
                let id = arena.opcode_result(op::KECCAK256, args, None, insn.offset);
                state.push(id);
            }
            op::CALL | op::CALLCODE | op::DELEGATECALL | op::STATICCALL => {
                let pops = op::stack_arity(o).0;
                let mut args = Vec::with_capacity(pops);
                for _ in 0..pops {
                    args.push(state.pop(arena));
                }
                // output region is the last two operands
                let ret_off = arena.const_of(args[pops - 2]).and_then(|w| w.to_u64());
                let ret_len = arena.const_of(args[pops - 1]).and_then(|w| w.to_u64());
                match (ret_off, ret_len) {
                    (_, Some(0)) => {}
                    (Some(d), Some(l)) if d < MAX_TRACKED_OFFSET && l <= MAX_TRACKED_COPY => {
                        state.memory.write_returndata(d, Some(0), l, insn.offset);
                    }
                    _ => state.memory.invalidate(),
                }
                let id = arena.opcode_result(o, vec![], None, insn.offset);
                state.push(id);
            }
            op::JUMP => {
                let target = state.pop(arena);
                match arena.const_of(target).and_then(|w| w.to_usize()) {
                    Some(t) if (env.is_jumpdest)(t) => {
                        outcome.successors.push((t, state, true));
                    }
                    Some(_) => {} // illegal destination: the EVM would throw
                    None => outcome.unresolved_jump = true,
                }
                return outcome;
            }
            op::JUMPI => {
                let target = state.pop(arena);
                let cond = state.pop(arena);
                let take_jump;
                let take_fall;
                match arena.const_of(cond) {
                    Some(w) if w.is_zero() => {
                        take_jump = false;
                        take_fall = true;
                    }
                    Some(_) => {
                        take_jump = true;
                        take_fall = false;
                    }
                    None => {
                        take_jump = true;
                        take_fall = true;
                    }
                }
                if take_jump {
                    match arena.const_of(target).and_then(|w| w.to_usize()) {
                        Some(t) if (env.is_jumpdest)(t) => {
                            outcome.successors.push((t, state.clone(), true));
                        }
                        Some(_) => {}
                        None => outcome.unresolved_jump = true,
                    }
                }
                if take_fall {
                    if let Some(next) = next_offset {
                        outcome.successors.push((next, state, false));
                    }
                }
                return outcome;
            }
            _ if op::is_halt(o) => {
                return outcome;
            }
            _ => {
                let (pops, pushes) = op::stack_arity(o);
                let mut args = Vec::with_capacity(pops);
                for _ in 0..pops {
                    args.push(state.pop(arena));
                }
                for _ in 0..pushes {
                    let id = arena.opcode_result(o, args.clone(), None, insn.offset);
                    state.push(id);
                }
            }
        }
    }
    // ran off the end of the block: fall through
    if let Some(next) = next_offset {
        outcome.successors.push((next, state, false));
    }
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bytecode::{disassemble, Bytecode};

    fn run(hex_code: &str) -> (ExecOutcome, ValueArena, Vec<Instruction>) {
        let code = Bytecode::from_hex_str(hex_code, "t").unwrap();
        let insns = disassemble(&code).unwrap();
        let mut arena = ValueArena::default();
        let env = ExecEnv { code: code.bytes(), is_jumpdest: &|_| true };
        let out = exec_block(
            &insns,
            None,
            PathState::default(),
            &mut arena,
            &env,
            &mut |_, _| {},
        );
        (out, arena, insns)
    }

    #[test]
    fn push_and_constant_fold_and() {
        // PUSH1 0x0f, PUSH1 0x3c, AND, PUSH1 0x00, MSTORE
        let (_, arena, _) = run("600f603c16600052");
        let and_val = arena
            .values
            .iter()
            .find(|v| matches!(v.op, ValueOp::Op(opcode::AND)))
            .unwrap();
        assert_eq!(and_val.const_val, Some(Word::from_u64(0x0c)));
    }

    #[test]
    fn memory_word_round_trip_is_transparent() {
        // PUSH1 0x2a, PUSH1 0x40, MSTORE, PUSH1 0x40, MLOAD, PUSH1 0x00, SSTORE
        let code = Bytecode::from_hex_str("602a60405260405160005500", "t").unwrap();
        let insns = disassemble(&code).unwrap();
        let mut arena = ValueArena::default();
        let env = ExecEnv { code: code.bytes(), is_jumpdest: &|_| false };
        let mut sstore_operands = vec![];
        exec_block(&insns, None, PathState::default(), &mut arena, &env, &mut |site, arena_| {
            if site.insn.opcode == opcode::SSTORE {
                sstore_operands = site.operands.to_vec();
                let _ = arena_;
            }
        });
        // operands: [slot, value]; value must be the original 0x2a constant
        assert_eq!(sstore_operands.len(), 2);
        let val = arena.get(sstore_operands[1]);
        assert_eq!(val.const_val, Some(Word::from_u64(0x2a)));
        assert!(matches!(val.op, ValueOp::Const));
    }

    #[test]
    fn unknown_store_offset_invalidates_memory() {
        // CALLDATALOAD(0) gives an unknown offset; storing there must havoc
        // PUSH1 0x2a, PUSH1 0x00, CALLDATALOAD, MSTORE, PUSH1 0x00, MLOAD, PUSH1 0x00, SSTORE
        let code = Bytecode::from_hex_str("602a60003552600051600055", "t").unwrap();
        let insns = disassemble(&code).unwrap();
        let mut arena = ValueArena::default();
        let env = ExecEnv { code: code.bytes(), is_jumpdest: &|_| false };
        let mut stored = None;
        exec_block(&insns, None, PathState::default(), &mut arena, &env, &mut |site, _| {
            if site.insn.opcode == opcode::SSTORE {
                stored = Some(site.operands[1]);
                assert!(site.memory.is_havoc());
            }
        });
        let v = arena.get(stored.unwrap());
        assert!(matches!(v.op, ValueOp::Op(opcode::MLOAD)));
    }

    #[test]
    fn jumpi_with_unknown_condition_explores_both() {
        // PUSH1 0x00 CALLDATALOAD PUSH1 0x08 JUMPI | STOP STOP | JUMPDEST STOP
        let code = Bytecode::from_hex_str("60003560085700005b00", "t").unwrap();
        let insns = disassemble(&code).unwrap();
        let mut arena = ValueArena::default();
        let env = ExecEnv { code: code.bytes(), is_jumpdest: &|o| o == 8 };
        let out = exec_block(
            &insns[..4],
            Some(6),
            PathState::default(),
            &mut arena,
            &env,
            &mut |_, _| {},
        );
        assert_eq!(out.successors.len(), 2);
        assert!(out.successors.iter().any(|s| s.0 == 8 && s.2));
        assert!(out.successors.iter().any(|s| s.0 == 6 && !s.2));
        assert!(!out.unresolved_jump);
    }

    #[test]
    fn unknown_jump_target_resolves_no_edge() {
        // PUSH1 0x00 CALLDATALOAD JUMP
        let (out, _, _) = run("60003556");
        assert!(out.successors.is_empty());
        assert!(out.unresolved_jump);
    }

    #[test]
    fn swap_and_dup_cover_underflow() {
        // SWAP2 on an empty stack pads with externals and must not panic
        let (_, arena, _) = run("91505000");
        assert!(arena.len() > 0);
    }
}
