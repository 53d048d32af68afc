//! Stable-semantic graphs: control nodes over stable instructions connected
//! in execution order (the SCFG), enriched with sink/source data nodes and
//! dataflow edges (the SDFG).

pub mod dataflow;
pub mod json;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::bytecode::{Bytecode, Instruction};
use crate::cfg::{get_cfg, BlockRef, BuildError, Contract, FunctionCfg, FunctionId};
use crate::opcode::{self, StableCategory};
use crate::word::Word;

/// Where a control node lives: which block clone, which code offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Site {
    pub block: BlockRef,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlNode {
    pub id: usize,
    pub category: StableCategory,
    pub opcode: u8,
    pub site: Site,
}

/// Operand roles of a call-family sink.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CallRole {
    Address,
    Value,
    Selector,
    Arg,
}

impl CallRole {
    pub fn as_str(self) -> &'static str {
        match self {
            CallRole::Address => "address",
            CallRole::Value => "value",
            CallRole::Selector => "selector",
            CallRole::Arg => "arg",
        }
    }
}

/// Traced origin of a sink operand. Constant, Information and Calldata are
/// path-insensitive and deduplicate globally per function; ReturnData and
/// Definition deduplicate per defining site.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum SourceKind {
    Constant { value: Word },
    Information { opcode: u8 },
    Calldata { offset: Option<Word> },
    ReturnData { offset: Option<Word>, site: usize },
    Definition { opcode: Option<u8>, site: Option<usize> },
}

/// Operand consumed by a stable instruction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum SinkKind {
    LogTopic { topic_index: u32 },
    LogData { index: u32 },
    StorageSlot { slot: Option<Word> },
    StorageValue { slot: Option<Word> },
    Call { role: CallRole, index: u32 },
    Return { index: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum DataNodeKind {
    Source(SourceKind),
    Sink {
        /// Id of the control node this sink belongs to.
        control: usize,
        kind: SinkKind,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataNode {
    pub id: usize,
    pub kind: DataNodeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Relation {
    Cc,
    Dd,
    Cd,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Cc => "cc",
            Relation::Dd => "dd",
            Relation::Cd => "cd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub rel: Relation,
}

/// The heterogeneous graph for one function. Node ids are dense from 0 with
/// control nodes first in offset order; edges are sorted and deduplicated.
#[derive(Debug, Clone, PartialEq)]
pub struct Ssg {
    pub function: FunctionId,
    pub control_nodes: Vec<ControlNode>,
    pub data_nodes: Vec<DataNode>,
    pub edges: Vec<Edge>,
    /// Some sink's backward taint hit the visit budget; sources are partial.
    pub taint_truncated: bool,
}

impl Ssg {
    pub fn node_count(&self) -> usize {
        self.control_nodes.len() + self.data_nodes.len()
    }

    /// Graphs with fewer than two nodes embed to near-zero vectors and are
    /// flagged for downstream filtering.
    pub fn is_degenerate(&self) -> bool {
        self.node_count() < 2
    }

    /// Checks the structural invariants: dense ids, relation endpoint
    /// typing, one CD edge per sink, every source on a DD edge, and
    /// within-block CC edges forming the instruction-order chain.
    pub fn validate(&self) -> Result<(), String> {
        let n_c = self.control_nodes.len();
        for (i, c) in self.control_nodes.iter().enumerate() {
            if c.id != i {
                return Err(format!("control node id {} at position {i}", c.id));
            }
            if opcode::classify_stable(c.opcode) != Some(c.category) {
                return Err(format!("control node {} category mismatch", c.id));
            }
        }
        for (i, d) in self.data_nodes.iter().enumerate() {
            if d.id != n_c + i {
                return Err(format!("data node id {} at position {i}", d.id));
            }
        }
        let total = self.node_count();
        let is_sink = |id: usize| {
            self.data_nodes
                .get(id.wrapping_sub(n_c))
                .map(|d| matches!(d.kind, DataNodeKind::Sink { .. }))
        };
        let mut cd_counts = vec![0usize; self.data_nodes.len()];
        let mut dd_touched = vec![false; self.data_nodes.len()];
        for e in &self.edges {
            if e.from >= total || e.to >= total {
                return Err(format!("edge ({},{}) out of range", e.from, e.to));
            }
            match e.rel {
                Relation::Cc => {
                    if e.from >= n_c || e.to >= n_c {
                        return Err("cc edge touching a data node".into());
                    }
                }
                Relation::Cd => {
                    if e.from >= n_c || e.to < n_c {
                        return Err("cd edge must go control -> data".into());
                    }
                    match &self.data_nodes[e.to - n_c].kind {
                        DataNodeKind::Sink { control, .. } if *control == e.from => {}
                        _ => return Err(format!("cd edge ({},{}) to non-owned sink", e.from, e.to)),
                    }
                    cd_counts[e.to - n_c] += 1;
                }
                Relation::Dd => {
                    if e.from < n_c || e.to < n_c {
                        return Err("dd edge touching a control node".into());
                    }
                    if is_sink(e.from) != Some(false) {
                        return Err(format!("dd edge {} -> {} from a sink", e.from, e.to));
                    }
                    dd_touched[e.from - n_c] = true;
                    dd_touched[e.to - n_c] = true;
                }
            }
        }
        for (i, d) in self.data_nodes.iter().enumerate() {
            match d.kind {
                DataNodeKind::Sink { .. } => {
                    if cd_counts[i] != 1 {
                        return Err(format!("sink {} has {} cd edges", d.id, cd_counts[i]));
                    }
                }
                DataNodeKind::Source(_) => {
                    if !dd_touched[i] {
                        return Err(format!("source {} participates in no dd edge", d.id));
                    }
                }
            }
        }
        // within-block forward CC edges must be the consecutive chain
        let mut per_block: BTreeMap<BlockRef, Vec<usize>> = BTreeMap::new();
        for c in &self.control_nodes {
            per_block.entry(c.site.block).or_default().push(c.id);
        }
        for ids in per_block.values_mut() {
            ids.sort_by_key(|&id| self.control_nodes[id].site.offset);
        }
        for e in &self.edges {
            if e.rel != Relation::Cc || e.from == e.to {
                continue;
            }
            let (a, b) = (&self.control_nodes[e.from], &self.control_nodes[e.to]);
            if a.site.block == b.site.block && a.site.offset < b.site.offset {
                let ids = &per_block[&a.site.block];
                let pos = ids.iter().position(|&id| id == e.from).unwrap();
                if ids.get(pos + 1) != Some(&e.to) {
                    return Err(format!(
                        "non-consecutive within-block cc edge {} -> {}",
                        e.from, e.to
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Stable instructions of a block, in offset order.
pub fn get_stable_stmts(instructions: &[Instruction]) -> Vec<&Instruction> {
    instructions.iter().filter(|i| opcode::classify_stable(i.opcode).is_some()).collect()
}

/// A stable statement identified before node ids exist.
pub type StmtRef = (BlockRef, usize);

/// The nearest stable statements flowing into `block`: for each predecessor,
/// its last stable statement when it has one, otherwise the result of
/// walking further back. The visited set is shared across the whole query.
pub fn resolve_pre_stable_stmts(
    block: BlockRef,
    cfg: &FunctionCfg,
    visited: &mut BTreeSet<BlockRef>,
) -> BTreeSet<StmtRef> {
    let mut result = BTreeSet::new();
    let mut pending = vec![block];
    while let Some(b) = pending.pop() {
        let preds = cfg.predecessors(b).expect("pending blocks are in the cfg");
        for p in preds {
            let stmts = get_stable_stmts(&cfg.nodes[p].instructions);
            if let Some(last) = stmts.last() {
                result.insert((p, last.offset));
            } else if visited.insert(p) {
                pending.push(p);
            }
        }
    }
    result
}

/// The control part of the SSG for one function CFG: every stable statement
/// in a reachable block becomes a node; within-block edges follow
/// instruction order and each block's first stable statement is connected
/// from its predecessors' nearest stable statements.
pub fn scfg_for_cfg(cfg: &FunctionCfg) -> Ssg {
    let mut stmts: Vec<(Site, u8)> = Vec::new();
    for (block_ref, node) in cfg.nodes.iter().enumerate() {
        for insn in get_stable_stmts(&node.instructions) {
            stmts.push((Site { block: block_ref, offset: insn.offset }, insn.opcode));
        }
    }
    // control nodes first in offset order; block ref breaks clone ties
    stmts.sort_by_key(|(site, _)| (site.offset, site.block));
    let id_of: BTreeMap<StmtRef, usize> = stmts
        .iter()
        .enumerate()
        .map(|(i, (site, _))| ((site.block, site.offset), i))
        .collect();

    let mut edges: BTreeSet<Edge> = BTreeSet::new();
    for block_ref in 0..cfg.nodes.len() {
        let stable = get_stable_stmts(&cfg.nodes[block_ref].instructions)
            .iter()
            .map(|i| (block_ref, i.offset))
            .collect::<Vec<StmtRef>>();
        if stable.is_empty() {
            continue;
        }
        let mut prev: BTreeSet<StmtRef> =
            resolve_pre_stable_stmts(block_ref, cfg, &mut BTreeSet::new());
        for stmt in stable {
            for p in &prev {
                edges.insert(Edge { from: id_of[p], to: id_of[&stmt], rel: Relation::Cc });
            }
            prev = [stmt].into_iter().collect();
        }
    }

    let control_nodes = stmts
        .into_iter()
        .enumerate()
        .map(|(id, (site, op))| ControlNode {
            id,
            category: opcode::classify_stable(op).expect("stable stmts are classifiable"),
            opcode: op,
            site,
        })
        .collect();

    Ssg {
        function: cfg.function,
        control_nodes,
        data_nodes: vec![],
        edges: edges.into_iter().collect(),
        taint_truncated: false,
    }
}

/// SCFGs for every function of a contract. Functions whose CFG cannot be
/// built are skipped with a diagnostic.
pub fn construct_scfg(code: &Bytecode) -> Result<BTreeMap<FunctionId, Ssg>, BuildError> {
    let contract = Contract::analyze(code)?;
    let (map, diagnostics) = construct_scfg_for_contract(&contract);
    for d in &diagnostics {
        log::warn!("{}: {d}", contract.origin_id());
    }
    Ok(map)
}

pub fn construct_scfg_for_contract(
    contract: &Contract,
) -> (BTreeMap<FunctionId, Ssg>, Vec<String>) {
    let mut map = BTreeMap::new();
    let mut diagnostics = Vec::new();
    for function in contract.effective_functions().keys() {
        match get_cfg(contract, *function) {
            Ok(cfg) => {
                map.insert(*function, scfg_for_cfg(&cfg));
            }
            Err(e) => diagnostics.push(format!("{function}: {e}")),
        }
    }
    (map, diagnostics)
}

/// Full SSGs for every function of a contract, with per-function warnings.
pub struct ContractSsgs {
    pub origin_id: String,
    pub functions: Vec<(FunctionId, Ssg)>,
    pub warnings: Vec<String>,
}

pub fn extract_contract(code: &Bytecode) -> Result<ContractSsgs, BuildError> {
    let contract = Contract::analyze(code)?;
    let mut warnings = Vec::new();
    if !contract.has_dispatcher() {
        warnings.push("no dispatcher found; analyzing whole code as the fallback".to_string());
    }
    let mut functions = Vec::new();
    for function in contract.effective_functions().keys() {
        let cfg = match get_cfg(&contract, *function) {
            Ok(cfg) => cfg,
            Err(e) => {
                warnings.push(format!("{function}: skipped: {e}"));
                continue;
            }
        };
        if cfg.budget_exceeded {
            warnings.push(format!("{function}: simulation budget exceeded; cfg is partial"));
        }
        if cfg.unresolved_jumps > 0 {
            warnings.push(format!("{function}: {} unresolved jumps", cfg.unresolved_jumps));
        }
        let scfg = scfg_for_cfg(&cfg);
        let ssg = dataflow::integrate_sdfg(&scfg, &contract, &cfg);
        if ssg.taint_truncated {
            warnings.push(format!("{function}: taint budget exceeded; dataflow is partial"));
        }
        if ssg.is_degenerate() {
            warnings.push(format!("{function}: degenerate graph ({} nodes)", ssg.node_count()));
        }
        debug_assert_eq!(ssg.validate(), Ok(()));
        functions.push((*function, ssg));
    }
    Ok(ContractSsgs { origin_id: contract.origin_id().to_string(), functions, warnings })
}

impl fmt::Display for Ssg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ssg[{}]: {} control, {} data, {} edges",
            self.function,
            self.control_nodes.len(),
            self.data_nodes.len(),
            self.edges.len()
        )
    }
}
