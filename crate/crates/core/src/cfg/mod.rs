//! Function discovery and per-function control-flow graphs.
//!
//! Entrypoints come from the Solc dispatcher pattern (PUSH4 selector, EQ,
//! PUSH target, JUMPI). Jump targets are resolved by the bounded abstract
//! interpreter in [`sim`]; blocks reached under distinct return-address
//! contexts are cloned per function, so two functions sharing bytes never
//! share a graph node.

pub mod sim;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bytecode::{disassemble, strip_metadata, Bytecode, BytecodeError, Instruction};
use crate::opcode::{self, OpCode};
use crate::word::Word;
use sim::{exec_block, ExecEnv, PathState, SiteView, ValueArena, MAX_VISITED_STATES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminatorKind {
    Jump,
    JumpI,
    FallThrough,
    Terminal,
}

/// A leader-delimited straight-line run of instructions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicBlock {
    pub start_offset: usize,
    pub instructions: Vec<Instruction>,
    pub terminator_kind: TerminatorKind,
}

impl BasicBlock {
    /// Byte offset just past the block.
    pub fn end_offset(&self) -> usize {
        self.instructions.last().map_or(self.start_offset, |i| i.offset + i.size())
    }
}

/// Blocks partitioning the instruction stream. Leaders are offset 0, every
/// JUMPDEST and every instruction following a terminator.
pub fn find_basic_blocks(instructions: &[Instruction]) -> Vec<BasicBlock> {
    let mut blocks = Vec::new();
    let mut current: Vec<Instruction> = Vec::new();
    for insn in instructions {
        if insn.opcode == opcode::JUMPDEST && !current.is_empty() {
            blocks.push(close_block(std::mem::take(&mut current)));
        }
        let terminates = opcode::is_terminator(insn.opcode);
        current.push(insn.clone());
        if terminates {
            blocks.push(close_block(std::mem::take(&mut current)));
        }
    }
    if !current.is_empty() {
        blocks.push(close_block(current));
    }
    blocks
}

fn close_block(instructions: Vec<Instruction>) -> BasicBlock {
    let last = instructions.last().expect("blocks are never empty");
    let terminator_kind = match last.opcode {
        opcode::JUMP => TerminatorKind::Jump,
        opcode::JUMPI => TerminatorKind::JumpI,
        op if opcode::is_halt(op) => TerminatorKind::Terminal,
        _ => TerminatorKind::FallThrough,
    };
    BasicBlock { start_offset: instructions[0].offset, instructions, terminator_kind }
}

/// External function identity: a 4-byte selector or the fallback path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FunctionId {
    Selector([u8; 4]),
    Fallback,
}

impl FunctionId {
    pub fn parse(text: &str) -> Option<FunctionId> {
        if text == "fallback" {
            return Some(FunctionId::Fallback);
        }
        let t = text.strip_prefix("0x").unwrap_or(text);
        if t.len() != 8 {
            return None;
        }
        let bytes = hex::decode(t).ok()?;
        Some(FunctionId::Selector(bytes.try_into().ok()?))
    }
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionId::Selector(s) => write!(f, "0x{}", hex::encode(s)),
            FunctionId::Fallback => write!(f, "fallback"),
        }
    }
}

impl Serialize for FunctionId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FunctionId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        FunctionId::parse(&text)
            .ok_or_else(|| serde::de::Error::custom(format!("bad function id: {text}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CfgError {
    NoDispatcher,
    UnknownFunction(String),
    /// The function entry offset does not start a block in this code.
    EntryNotInCode(usize),
    BlockNotInCfg(usize),
}

impl fmt::Display for CfgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CfgError::NoDispatcher => write!(f, "no selector dispatcher pattern found"),
            CfgError::UnknownFunction(id) => write!(f, "function {id} not in dispatch table"),
            CfgError::EntryNotInCode(off) => write!(f, "entry offset {off:#x} starts no block"),
            CfgError::BlockNotInCfg(b) => write!(f, "block ref {b} not in this cfg"),
        }
    }
}

impl std::error::Error for CfgError {}

/// Shared, immutable per-contract analysis context.
pub struct Contract {
    code: Bytecode,
    pub instructions: Vec<Instruction>,
    pub blocks: Vec<BasicBlock>,
    block_index: BTreeMap<usize, usize>,
    jumpdests: BTreeSet<usize>,
    dispatch: Option<BTreeMap<FunctionId, usize>>,
}

impl Contract {
    /// Strips metadata, checks the size bound, decodes and partitions the
    /// code, and scans for the dispatcher.
    pub fn analyze(code: &Bytecode) -> Result<Contract, BytecodeError> {
        let stripped = strip_metadata(code);
        let instructions = disassemble(&stripped)?;
        let blocks = find_basic_blocks(&instructions);
        let block_index = blocks.iter().enumerate().map(|(i, b)| (b.start_offset, i)).collect();
        let jumpdests = instructions
            .iter()
            .filter(|i| i.opcode == opcode::JUMPDEST)
            .map(|i| i.offset)
            .collect();
        let dispatch = scan_dispatcher(&instructions);
        Ok(Contract { code: stripped, instructions, blocks, block_index, jumpdests, dispatch })
    }

    pub fn code(&self) -> &Bytecode {
        &self.code
    }

    pub fn origin_id(&self) -> &str {
        self.code.origin_id()
    }

    /// The dispatch table, or `NoDispatcher`.
    pub fn functions(&self) -> Result<&BTreeMap<FunctionId, usize>, CfgError> {
        self.dispatch.as_ref().ok_or(CfgError::NoDispatcher)
    }

    /// Functions to analyze: the dispatch table when present, otherwise the
    /// whole code treated as a single fallback function at offset 0.
    pub fn effective_functions(&self) -> BTreeMap<FunctionId, usize> {
        match &self.dispatch {
            Some(table) => table.clone(),
            None => [(FunctionId::Fallback, 0usize)].into_iter().collect(),
        }
    }

    pub fn has_dispatcher(&self) -> bool {
        self.dispatch.is_some()
    }

    pub fn is_jumpdest(&self, offset: usize) -> bool {
        self.jumpdests.contains(&offset)
    }

    fn block_at(&self, offset: usize) -> Option<&BasicBlock> {
        self.block_index.get(&offset).map(|&i| &self.blocks[i])
    }
}

/// One entry per dispatcher comparison: PUSH4 selector, then EQ (possibly
/// after a DUP/SWAP used to keep the loaded selector around), then a 1- to
/// 3-byte PUSH of the target, then JUMPI. The fallback entry is the
/// fall-through of the last comparison.
fn scan_dispatcher(instructions: &[Instruction]) -> Option<BTreeMap<FunctionId, usize>> {
    let mut table = BTreeMap::new();
    let mut last_jumpi: Option<usize> = None;
    let is_shuffle = |op: OpCode| (0x80..=0x9f).contains(&op);
    let mut i = 0;
    while i < instructions.len() {
        let insn = &instructions[i];
        if insn.opcode == opcode::PUSH4 {
            let selector: [u8; 4] =
                insn.push_data.as_deref().unwrap_or(&[0; 4]).try_into().unwrap_or([0; 4]);
            let mut j = i + 1;
            let mut shuffles = 0;
            while j < instructions.len() && shuffles < 2 && is_shuffle(instructions[j].opcode) {
                j += 1;
                shuffles += 1;
            }
            let matched = (|| {
                if instructions.get(j)?.opcode != opcode::EQ {
                    return None;
                }
                let push = instructions.get(j + 1)?;
                let width = opcode::push_width(push.opcode)?;
                if width > 3 {
                    return None;
                }
                if instructions.get(j + 2)?.opcode != opcode::JUMPI {
                    return None;
                }
                Some((push.push_value_usize()?, j + 2))
            })();
            if let Some((target, jumpi_idx)) = matched {
                table.insert(FunctionId::Selector(selector), target);
                last_jumpi = Some(jumpi_idx);
                i = jumpi_idx + 1;
                continue;
            }
        }
        i += 1;
    }
    if table.is_empty() {
        return None;
    }
    if let Some(idx) = last_jumpi {
        if let Some(next) = instructions.get(idx + 1) {
            table.insert(FunctionId::Fallback, next.offset);
        }
    }
    Some(table)
}

/// Selector map for a contract: one entry per recognized dispatcher
/// comparison plus the fallback fall-through.
pub fn get_functions(code: &Bytecode) -> Result<BTreeMap<FunctionId, usize>, BuildError> {
    let contract = Contract::analyze(code)?;
    Ok(contract.functions()?.clone())
}

/// Errors from the combined decode-and-build pipeline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BuildError {
    Bytecode(BytecodeError),
    Cfg(CfgError),
}

impl fmt::Display for BuildError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuildError::Bytecode(e) => e.fmt(f),
            BuildError::Cfg(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for BuildError {}

impl From<BytecodeError> for BuildError {
    fn from(e: BytecodeError) -> Self {
        BuildError::Bytecode(e)
    }
}

impl From<CfgError> for BuildError {
    fn from(e: CfgError) -> Self {
        BuildError::Cfg(e)
    }
}

pub type BlockRef = usize;

/// Identity of a function-local block clone: its code offset plus the
/// return-address constants on the abstract stack when it was entered.
pub type BlockKey = (usize, Vec<usize>);

#[derive(Debug, Clone)]
pub struct CfgNode {
    pub key: BlockKey,
    /// Function-local copy of the block's instructions.
    pub instructions: Vec<Instruction>,
    pub terminator_kind: TerminatorKind,
    /// Joined abstract state over every path reaching this clone.
    pub entry_state: PathState,
    /// A jump in this block had a statically unknown target.
    pub unresolved_jump: bool,
}

impl CfgNode {
    pub fn start_offset(&self) -> usize {
        self.key.0
    }
}

/// Per-function CFG over cloned blocks.
pub struct FunctionCfg {
    pub function: FunctionId,
    pub entry: BlockRef,
    pub nodes: Vec<CfgNode>,
    pub edges: BTreeSet<(BlockRef, BlockRef)>,
    /// Symbolic values referenced by the nodes' entry states.
    pub arena: ValueArena,
    /// The visit budget ran out; the graph is a prefix of the full one.
    pub budget_exceeded: bool,
    /// Jumps that resolved to no edge.
    pub unresolved_jumps: usize,
}

impl FunctionCfg {
    pub fn predecessors(&self, block: BlockRef) -> Result<BTreeSet<BlockRef>, CfgError> {
        if block >= self.nodes.len() {
            return Err(CfgError::BlockNotInCfg(block));
        }
        Ok(self.edges.iter().filter(|(_, to)| *to == block).map(|(from, _)| *from).collect())
    }

    pub fn successors(&self, block: BlockRef) -> BTreeSet<BlockRef> {
        self.edges.iter().filter(|(from, _)| *from == block).map(|(_, to)| *to).collect()
    }

    /// Graphviz rendering; node labels are clone-qualified start offsets.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph cfg {\n  node [shape=box, fontname=\"monospace\"];\n");
        for (i, node) in self.nodes.iter().enumerate() {
            let suffix = if node.key.1.is_empty() {
                String::new()
            } else {
                format!("\\n[{}]", node.key.1.iter().map(|o| format!("{o:#x}")).collect::<Vec<_>>().join(","))
            };
            let marks = match (i == self.entry, node.unresolved_jump) {
                (true, true) => " (entry, unresolved)",
                (true, false) => " (entry)",
                (false, true) => " (unresolved)",
                (false, false) => "",
            };
            out.push_str(&format!(
                "  n{i} [label=\"{:#06x}{suffix}{marks}\"];\n",
                node.start_offset()
            ));
        }
        for (from, to) in &self.edges {
            out.push_str(&format!("  n{from} -> n{to} [style=solid];\n"));
        }
        out.push_str("}\n");
        out
    }
}

/// Set of predecessors of `block` in `cfg`.
pub fn get_predecessors(block: BlockRef, cfg: &FunctionCfg) -> Result<BTreeSet<BlockRef>, CfgError> {
    cfg.predecessors(block)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn functions_of(hex_code: &str) -> Result<BTreeMap<FunctionId, usize>, BuildError> {
        get_functions(&Bytecode::from_hex_str(hex_code, "t").unwrap())
    }

    #[test]
    fn modern_dispatcher_shape() {
        // CALLDATALOAD selector, DUP1 PUSH4 EQ PUSH2 JUMPI, fallback revert,
        // body at 0x11: JUMPDEST STOP
        let code = "600035602035601c575b00"; // filler, not a dispatcher
        assert!(matches!(
            functions_of(code),
            Err(BuildError::Cfg(CfgError::NoDispatcher))
        ));

        // PUSH1 00 CALLDATALOAD PUSH1 e0 SHR DUP1 PUSH4 095ea7b3 EQ PUSH2 0120 JUMPI ...
        let code = "60003560e01c8063095ea7b314610120575b00";
        let table = functions_of(code).unwrap();
        assert_eq!(
            table.get(&FunctionId::parse("0x095ea7b3").unwrap()),
            Some(&0x120)
        );
        // fall-through right after the JUMPI
        assert_eq!(table.get(&FunctionId::Fallback), Some(&0x11));
    }

    #[test]
    fn old_style_dup_after_push4() {
        // PUSH4 aabbccdd DUP2 EQ PUSH1 40 JUMPI
        let code = "63aabbccdd811460405700";
        let table = functions_of(code).unwrap();
        assert_eq!(
            table.get(&FunctionId::Selector([0xaa, 0xbb, 0xcc, 0xdd])),
            Some(&0x40)
        );
    }

    #[test]
    fn inverted_iszero_comparison_is_not_a_function_entry() {
        // PUSH4 s EQ ISZERO PUSH1 t JUMPI jumps AWAY on mismatch
        let code = "63aabbccdd141560405700";
        assert!(matches!(
            functions_of(code),
            Err(BuildError::Cfg(CfgError::NoDispatcher))
        ));
    }

    #[test]
    fn three_selector_dispatcher() {
        let mut code = String::from("60003560e01c");
        for (sel, target) in [("11111111", "0040"), ("22222222", "0050"), ("33333333", "0060")] {
            code.push_str(&format!("8063{sel}1461{target}57"));
        }
        code.push_str("5b00");
        let table = functions_of(&code).unwrap();
        assert_eq!(table.len(), 4); // three selectors plus fallback
        assert_eq!(table.get(&FunctionId::Selector([0x11; 4])), Some(&0x40));
        assert_eq!(table.get(&FunctionId::Selector([0x22; 4])), Some(&0x50));
        assert_eq!(table.get(&FunctionId::Selector([0x33; 4])), Some(&0x60));
        let fallback = table[&FunctionId::Fallback];
        assert_eq!(fallback, code.len() / 2 - 2);
    }

    #[test]
    fn find_blocks_leader_rules() {
        // PUSH1 03 JUMP | JUMPDEST STOP
        let code = Bytecode::from_hex_str("6003565b00", "t").unwrap();
        let insns = disassemble(&code).unwrap();
        let blocks = find_basic_blocks(&insns);
        assert_eq!(blocks.len(), 2);
        assert_eq!(blocks[0].start_offset, 0);
        assert_eq!(blocks[0].terminator_kind, TerminatorKind::Jump);
        assert_eq!(blocks[1].start_offset, 3);
        assert_eq!(blocks[1].terminator_kind, TerminatorKind::Terminal);
    }

    #[test]
    fn single_terminator_block() {
        let code = Bytecode::from_hex_str("00", "t").unwrap();
        let blocks = find_basic_blocks(&disassemble(&code).unwrap());
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].terminator_kind, TerminatorKind::Terminal);
    }

    #[test]
    fn function_id_round_trip() {
        for text in ["0x095ea7b3", "fallback"] {
            let fid = FunctionId::parse(text).unwrap();
            assert_eq!(fid.to_string(), text);
        }
        assert!(FunctionId::parse("0x095e").is_none());
        assert!(FunctionId::parse("bogus").is_none());
    }
}

/// Builds the CFG of one function by bounded abstract interpretation from
/// its entry, with the dispatcher-established stack prefix.
pub fn get_cfg(contract: &Contract, function: FunctionId) -> Result<FunctionCfg, CfgError> {
    let functions = contract.effective_functions();
    let entry_offset = *functions
        .get(&function)
        .ok_or_else(|| CfgError::UnknownFunction(function.to_string()))?;
    if contract.block_at(entry_offset).is_none() {
        return Err(CfgError::EntryNotInCode(entry_offset));
    }

    let mut arena = ValueArena::default();
    let entry_stack = match function {
        FunctionId::Selector(sel) => {
            vec![arena.seed_const(Word::from_be_slice(&sel))]
        }
        FunctionId::Fallback if contract.has_dispatcher() => {
            // the dispatcher leaves the (unknown to us) selector word behind
            vec![arena.seed_external()]
        }
        FunctionId::Fallback => vec![],
    };
    let entry_state = PathState::with_stack(entry_stack);

    let is_jd = |off: usize| contract.is_jumpdest(off);
    let env = ExecEnv { code: contract.code.bytes(), is_jumpdest: &is_jd };

    let entry_key: BlockKey = (entry_offset, entry_state.clone_path(&arena, &is_jd));
    let mut entry_states: BTreeMap<BlockKey, PathState> = BTreeMap::new();
    entry_states.insert(entry_key.clone(), entry_state.clone());
    let mut unresolved_flags: BTreeMap<BlockKey, bool> = BTreeMap::new();
    let mut edges: BTreeSet<(BlockKey, BlockKey)> = BTreeSet::new();

    let mut visited: BTreeSet<(usize, Vec<Option<Word>>)> = BTreeSet::new();
    let mut worklist: VecDeque<(usize, PathState)> = VecDeque::new();
    worklist.push_back((entry_offset, entry_state));
    let mut budget_exceeded = false;
    let mut unresolved_jumps = 0usize;

    while let Some((offset, state)) = worklist.pop_front() {
        if !visited.insert((offset, state.state_key(&arena))) {
            continue;
        }
        if visited.len() > MAX_VISITED_STATES {
            budget_exceeded = true;
            break;
        }
        let block = contract.block_at(offset).expect("worklist offsets are block leaders");
        let block_key: BlockKey = (offset, state.clone_path(&arena, &is_jd));
        let next_offset = match block.terminator_kind {
            TerminatorKind::FallThrough | TerminatorKind::JumpI => {
                let end = block.end_offset();
                contract.block_at(end).map(|_| end)
            }
            _ => None,
        };
        let outcome = exec_block(
            &block.instructions,
            next_offset,
            state,
            &mut arena,
            &env,
            &mut |_: SiteView, _: &mut ValueArena| {},
        );
        if outcome.unresolved_jump {
            unresolved_jumps += 1;
            unresolved_flags.insert(block_key.clone(), true);
        }
        for (succ_offset, succ_state, _) in outcome.successors {
            let succ_key: BlockKey = (succ_offset, succ_state.clone_path(&arena, &is_jd));
            edges.insert((block_key.clone(), succ_key.clone()));
            match entry_states.get_mut(&succ_key) {
                Some(existing) => {
                    existing.join_from(&succ_state, &mut arena);
                }
                None => {
                    entry_states.insert(succ_key.clone(), succ_state.clone());
                }
            }
            worklist.push_back((succ_offset, succ_state));
        }
    }

    // canonical node order: by (offset, clone path)
    let keys: Vec<BlockKey> = entry_states.keys().cloned().collect();
    let index_of: BTreeMap<&BlockKey, BlockRef> =
        keys.iter().enumerate().map(|(i, k)| (k, i)).collect();
    let nodes: Vec<CfgNode> = keys
        .iter()
        .map(|key| {
            let block = contract.block_at(key.0).expect("keyed blocks exist");
            CfgNode {
                key: key.clone(),
                instructions: block.instructions.clone(),
                terminator_kind: block.terminator_kind,
                entry_state: entry_states[key].clone(),
                unresolved_jump: unresolved_flags.get(key).copied().unwrap_or(false),
            }
        })
        .collect();
    let edges: BTreeSet<(BlockRef, BlockRef)> =
        edges.iter().map(|(a, b)| (index_of[a], index_of[b])).collect();

    Ok(FunctionCfg {
        function,
        entry: index_of[&entry_key],
        nodes,
        edges,
        arena,
        budget_exceeded,
        unresolved_jumps,
    })
}

