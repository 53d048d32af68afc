//! Sink location and backward taint analysis over the symbolic value arena.
//!
//! Each stable instruction's operands (stack slots, and the memory words
//! behind call arguments, log payloads and return payloads) become sink data
//! nodes. Tracing those operands backwards yields the source nodes of
//! Table-driven kinds; memory reads and path joins are transparent, a
//! KECCAK256 is reported as a definition whose own inputs are traced one
//! level further so hashed mapping keys keep their provenance.

use std::collections::BTreeMap;

use crate::cfg::sim::{exec_block, ExecEnv, SiteView, ValueArena, ValueId, ValueOp, MAX_RANGE_WORDS};
use crate::cfg::{BlockRef, Contract, FunctionCfg};
use crate::opcode;
use crate::ssg::{
    CallRole, DataNode, DataNodeKind, Edge, Relation, SinkKind, SourceKind, Ssg,
};
use crate::word::Word;

/// Visited value-definition budget per sink.
pub const TAINT_BUDGET: usize = 512;

/// A sink with the operand values feeding it.
#[derive(Debug, Clone)]
pub struct SinkSpec {
    pub kind: SinkKind,
    pub sources: Vec<ValueId>,
}

/// Sinks for one stable instruction, reading the abstract stack and memory
/// at its site.
pub fn locate_sink_nodes(site: &SiteView, arena: &mut ValueArena, code: &[u8]) -> Vec<SinkSpec> {
    use opcode as op;
    let o = site.insn.opcode;
    let offset = site.insn.offset;
    let ops = site.operands;
    let konst = |arena: &ValueArena, id: ValueId| arena.const_of(id);
    let as_u64 = |arena: &ValueArena, id: ValueId| konst(arena, id).and_then(|w| w.to_u64());

    let mut sinks = Vec::new();
    match o {
        op::SSTORE => {
            let slot = konst(arena, ops[0]);
            sinks.push(SinkSpec { kind: SinkKind::StorageSlot { slot }, sources: vec![ops[0]] });
            sinks.push(SinkSpec { kind: SinkKind::StorageValue { slot }, sources: vec![ops[1]] });
        }
        op::SLOAD => {
            let slot = konst(arena, ops[0]);
            sinks.push(SinkSpec { kind: SinkKind::StorageSlot { slot }, sources: vec![ops[0]] });
        }
        _ if (op::LOG0..=op::LOG4).contains(&o) => {
            let n_topics = (o - op::LOG0) as u32;
            for t in 0..n_topics {
                sinks.push(SinkSpec {
                    kind: SinkKind::LogTopic { topic_index: t },
                    sources: vec![ops[2 + t as usize]],
                });
            }
            let data_words =
                range_words(site, arena, code, offset, ops[0], ops[1]);
            for (index, sources) in data_words {
                sinks.push(SinkSpec { kind: SinkKind::LogData { index }, sources });
            }
        }
        op::BALANCE => {
            sinks.push(SinkSpec {
                kind: SinkKind::Call { role: CallRole::Address, index: 0 },
                sources: vec![ops[0]],
            });
        }
        op::CALL | op::DELEGATECALL | op::STATICCALL => {
            sinks.push(SinkSpec {
                kind: SinkKind::Call { role: CallRole::Address, index: 0 },
                sources: vec![ops[1]],
            });
            let args_at = if o == op::CALL {
                sinks.push(SinkSpec {
                    kind: SinkKind::Call { role: CallRole::Value, index: 0 },
                    sources: vec![ops[2]],
                });
                3
            } else {
                2
            };
            let args_off = as_u64(arena, ops[args_at]);
            let args_len = as_u64(arena, ops[args_at + 1]);
            let has_payload = !matches!(args_len, Some(0));
            if has_payload {
                let selector_sources = match args_off {
                    Some(ao) => vec![site.memory.read_bytes(ao, 4, arena, offset, code)],
                    None => vec![],
                };
                sinks.push(SinkSpec {
                    kind: SinkKind::Call { role: CallRole::Selector, index: 0 },
                    sources: selector_sources,
                });
                if let (Some(ao), Some(al)) = (args_off, args_len) {
                    let n_args = al.saturating_sub(4).div_ceil(32).min(MAX_RANGE_WORDS);
                    for j in 0..n_args {
                        let word = site.memory.read_word(ao + 4 + 32 * j, arena, offset, code);
                        sinks.push(SinkSpec {
                            kind: SinkKind::Call { role: CallRole::Arg, index: j as u32 },
                            sources: vec![word],
                        });
                    }
                }
            }
        }
        op::RETURN | op::REVERT => {
            for (index, sources) in range_words(site, arena, code, offset, ops[0], ops[1]) {
                sinks.push(SinkSpec { kind: SinkKind::Return { index }, sources });
            }
        }
        op::SELFDESTRUCT => {
            sinks.push(SinkSpec { kind: SinkKind::Return { index: 0 }, sources: vec![ops[0]] });
        }
        // STOP and INVALID consume nothing
        _ => {}
    }
    sinks
}

/// Indexed words of the memory range `[offset_op, offset_op + len_op)`.
/// An unknown length yields a single indexed sink over the first word; an
/// unknown offset yields a single sink with no traceable value.
fn range_words(
    site: &SiteView,
    arena: &mut ValueArena,
    code: &[u8],
    insn_offset: usize,
    offset_op: ValueId,
    len_op: ValueId,
) -> Vec<(u32, Vec<ValueId>)> {
    let off = arena.const_of(offset_op).and_then(|w| w.to_u64());
    let len = arena.const_of(len_op).and_then(|w| w.to_u64());
    match (off, len) {
        (_, Some(0)) => vec![],
        (Some(o), Some(l)) => {
            let words = site.memory.read_range(o, l, arena, insn_offset, code);
            words.into_iter().enumerate().map(|(j, w)| (j as u32, vec![w])).collect()
        }
        (Some(o), None) => {
            vec![(0, vec![site.memory.read_word(o, arena, insn_offset, code)])]
        }
        (None, _) => vec![(0, vec![])],
    }
}

/// Classification of one arena value during the backward walk.
enum Trace {
    Source(SourceKind),
    Keccak(SourceKind),
    Transparent,
}

fn classify(value_op: &ValueOp, const_val: Option<Word>, args_offset_const: Option<Word>, def_offset: Option<usize>) -> Trace {
    match value_op {
        ValueOp::Const => Trace::Source(SourceKind::Constant { value: const_val.unwrap_or(Word::ZERO) }),
        ValueOp::CodeRead => Trace::Source(SourceKind::Constant { value: const_val.unwrap_or(Word::ZERO) }),
        ValueOp::Op(o) if *o == opcode::CALLDATALOAD => {
            Trace::Source(SourceKind::Calldata { offset: args_offset_const })
        }
        ValueOp::Op(o) if opcode::is_transaction_constant(*o) => {
            Trace::Source(SourceKind::Information { opcode: *o })
        }
        ValueOp::Op(o)
            if matches!(
                *o,
                opcode::CALL | opcode::CALLCODE | opcode::DELEGATECALL | opcode::STATICCALL
            ) =>
        {
            Trace::Source(SourceKind::ReturnData {
                offset: None,
                site: def_offset.unwrap_or(0),
            })
        }
        ValueOp::Op(o) if *o == opcode::KECCAK256 => Trace::Keccak(SourceKind::Definition {
            opcode: Some(opcode::KECCAK256),
            site: def_offset,
        }),
        ValueOp::Op(o) => Trace::Source(SourceKind::Definition { opcode: Some(*o), site: def_offset }),
        ValueOp::CalldataRead { offset } => {
            Trace::Source(SourceKind::Calldata { offset: offset.map(Word::from_u64) })
        }
        ValueOp::ReturnDataRead { offset, site } => Trace::Source(SourceKind::ReturnData {
            offset: offset.map(Word::from_u64),
            site: *site,
        }),
        ValueOp::MemRead | ValueOp::Phi => Trace::Transparent,
        ValueOp::External => Trace::Source(SourceKind::Definition { opcode: None, site: None }),
    }
}

/// Accumulates data nodes and DD/CD edges while sinks are processed.
struct SdfgBuilder {
    n_control: usize,
    source_index: BTreeMap<SourceKind, usize>,
    data_nodes: Vec<DataNodeKind>,
    dd_edges: Vec<(usize, usize)>,
    cd_edges: Vec<(usize, usize)>,
    truncated: bool,
}

impl SdfgBuilder {
    fn new(n_control: usize) -> Self {
        SdfgBuilder {
            n_control,
            source_index: BTreeMap::new(),
            data_nodes: Vec::new(),
            dd_edges: Vec::new(),
            cd_edges: Vec::new(),
            truncated: false,
        }
    }

    fn add_sink(&mut self, control: usize, kind: SinkKind) -> usize {
        let id = self.n_control + self.data_nodes.len();
        self.data_nodes.push(DataNodeKind::Sink { control, kind });
        self.cd_edges.push((control, id));
        id
    }

    fn intern_source(&mut self, kind: SourceKind) -> usize {
        if let Some(&id) = self.source_index.get(&kind) {
            return id;
        }
        let id = self.n_control + self.data_nodes.len();
        self.data_nodes.push(DataNodeKind::Source(kind.clone()));
        self.source_index.insert(kind, id);
        id
    }

    /// Backward taint from the sink's operand values. Returns early when the
    /// per-sink budget runs out, keeping whatever was found.
    fn taint(&mut self, roots: &[ValueId], sink_node: usize, arena: &ValueArena) {
        let mut worklist: Vec<(ValueId, usize, u8)> =
            roots.iter().rev().map(|&v| (v, sink_node, 0u8)).collect();
        let mut visited: Vec<(ValueId, usize)> = Vec::new();
        let mut budget = TAINT_BUDGET;
        while let Some((value, attach, keccak_level)) = worklist.pop() {
            if visited.contains(&(value, attach)) {
                continue;
            }
            visited.push((value, attach));
            if budget == 0 {
                self.truncated = true;
                return;
            }
            budget -= 1;
            let sym = arena.get(value);
            let first_arg_const = sym.args.first().and_then(|&a| arena.const_of(a));
            match classify(&sym.op, sym.const_val, first_arg_const, sym.def_offset) {
                Trace::Source(kind) => {
                    let src = self.intern_source(kind);
                    self.dd_edges.push((src, attach));
                }
                Trace::Keccak(kind) => {
                    let src = self.intern_source(kind);
                    self.dd_edges.push((src, attach));
                    if keccak_level == 0 {
                        for &a in sym.args.iter().rev() {
                            worklist.push((a, src, 1));
                        }
                    }
                }
                Trace::Transparent => {
                    for &a in sym.args.iter().rev() {
                        worklist.push((a, attach, keccak_level));
                    }
                }
            }
        }
    }
}

/// Runs sink location and backward taint over every control node of the
/// SCFG and merges the results into a complete SSG.
pub fn integrate_sdfg(scfg: &Ssg, contract: &Contract, cfg: &FunctionCfg) -> Ssg {
    let mut arena = cfg.arena.clone();
    let is_jd = |off: usize| contract.is_jumpdest(off);
    let env = ExecEnv { code: contract.code().bytes(), is_jumpdest: &is_jd };

    // one deterministic re-execution per block clone, from its joined entry
    // state, capturing the sinks of every stable site
    let mut captures: BTreeMap<(BlockRef, usize), Vec<SinkSpec>> = BTreeMap::new();
    for (block_ref, node) in cfg.nodes.iter().enumerate() {
        exec_block(
            &node.instructions,
            None,
            node.entry_state.clone(),
            &mut arena,
            &env,
            &mut |site: SiteView, arena: &mut ValueArena| {
                let specs = locate_sink_nodes(&site, arena, contract.code().bytes());
                captures.insert((block_ref, site.insn.offset), specs);
            },
        );
    }

    let mut builder = SdfgBuilder::new(scfg.control_nodes.len());
    for control in &scfg.control_nodes {
        let Some(specs) = captures.get(&(control.site.block, control.site.offset)) else {
            continue;
        };
        for spec in specs {
            let sink = builder.add_sink(control.id, spec.kind.clone());
            builder.taint(&spec.sources, sink, &arena);
        }
    }

    assemble(scfg, builder)
}

/// Canonicalizes the data part (sorted by kind) and merges all edges.
fn assemble(scfg: &Ssg, builder: SdfgBuilder) -> Ssg {
    let n_c = scfg.control_nodes.len();
    let mut order: Vec<usize> = (0..builder.data_nodes.len()).collect();
    order.sort_by(|&a, &b| builder.data_nodes[a].cmp(&builder.data_nodes[b]));
    let mut remap = vec![0usize; builder.data_nodes.len()];
    for (new_pos, &old_pos) in order.iter().enumerate() {
        remap[old_pos] = n_c + new_pos;
    }
    let data_nodes: Vec<DataNode> = order
        .iter()
        .enumerate()
        .map(|(new_pos, &old_pos)| DataNode {
            id: n_c + new_pos,
            kind: builder.data_nodes[old_pos].clone(),
        })
        .collect();

    let remap_id = |id: usize| if id < n_c { id } else { remap[id - n_c] };
    let mut edges: Vec<Edge> = scfg.edges.clone();
    edges.extend(
        builder
            .cd_edges
            .iter()
            .map(|&(c, d)| Edge { from: c, to: remap_id(d), rel: Relation::Cd }),
    );
    edges.extend(
        builder
            .dd_edges
            .iter()
            .map(|&(s, d)| Edge { from: remap_id(s), to: remap_id(d), rel: Relation::Dd }),
    );
    edges.sort();
    edges.dedup();

    Ssg {
        function: scfg.function,
        control_nodes: scfg.control_nodes.clone(),
        data_nodes,
        edges,
        taint_truncated: builder.truncated,
    }
}

/// Standalone backward taint used by tests and tools: sources and DD edges
/// reachable from the given operand values, without graph assembly.
pub fn backward_taint(
    roots: &[ValueId],
    arena: &ValueArena,
) -> (Vec<SourceKind>, Vec<(SourceKind, Option<SourceKind>)>, bool) {
    let mut builder = SdfgBuilder::new(0);
    builder.taint(roots, usize::MAX, arena);
    let sources: Vec<SourceKind> = builder
        .data_nodes
        .iter()
        .filter_map(|k| match k {
            DataNodeKind::Source(s) => Some(s.clone()),
            _ => None,
        })
        .collect();
    let kind_of = |id: usize| -> Option<SourceKind> {
        builder.data_nodes.get(id).and_then(|k| match k {
            DataNodeKind::Source(s) => Some(s.clone()),
            _ => None,
        })
    };
    let edges = builder
        .dd_edges
        .iter()
        .map(|&(src, attach)| {
            let s = kind_of(src).expect("taint edges start at sources");
            (s, if attach == usize::MAX { None } else { kind_of(attach) })
        })
        .collect();
    (sources, edges, builder.truncated)
}
