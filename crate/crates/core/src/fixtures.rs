//! Hand-assembled contracts with hand-labeled graph edges, used to measure
//! SCFG/SDFG extraction accuracy. Labels name instructions by mnemonic and
//! occurrence order in the code ("SSTORE#0"), sinks by owner and role
//! ("SSTORE#0/storage.slot"), and sources by kind and attribute
//! ("calldata:0x4"). The label sets below were written from the intended
//! control and data flow of each contract, not from tool output.

use std::collections::{BTreeMap, BTreeSet};

use crate::asm::{AsmBlock, AsmOp, Program};
use crate::bytecode::{disassemble, strip_metadata, Bytecode};
use crate::cfg::FunctionId;
use crate::opcode as op;
use crate::ssg::{DataNodeKind, Relation, SinkKind, SourceKind, Ssg};

#[derive(Debug, Clone)]
pub struct FunctionLabels {
    pub function: FunctionId,
    pub scfg_nodes: Vec<String>,
    pub scfg_edges: Vec<(String, String)>,
    pub cd_edges: Vec<(String, String)>,
    pub dd_edges: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
pub struct LabeledFixture {
    pub name: &'static str,
    pub bytecode: Bytecode,
    pub functions: Vec<FunctionLabels>,
}

/// Rendered edges of a built graph, in the fixtures' label grammar.
#[derive(Debug, Default, Clone)]
pub struct RenderedGraph {
    pub nodes: BTreeSet<String>,
    pub scfg_edges: BTreeSet<(String, String)>,
    pub cd_edges: BTreeSet<(String, String)>,
    pub dd_edges: BTreeSet<(String, String)>,
}

/// Maps every instruction offset to "MNEMONIC#ordinal".
fn instruction_names(code: &Bytecode) -> BTreeMap<usize, String> {
    let stripped = strip_metadata(code);
    let mut counts: BTreeMap<&'static str, usize> = BTreeMap::new();
    let mut names = BTreeMap::new();
    for insn in disassemble(&stripped).unwrap_or_default() {
        let name = op::name(insn.opcode);
        let ordinal = counts.entry(name).or_insert(0);
        names.insert(insn.offset, format!("{name}#{ordinal}"));
        *ordinal += 1;
    }
    names
}

fn sink_label(kind: &SinkKind) -> String {
    match kind {
        SinkKind::StorageSlot { .. } => "storage.slot".to_string(),
        SinkKind::StorageValue { .. } => "storage.value".to_string(),
        SinkKind::LogTopic { topic_index } => format!("log.topic{topic_index}"),
        SinkKind::LogData { index } => format!("log.data{index}"),
        SinkKind::Call { role, index } => match role {
            crate::ssg::CallRole::Arg => format!("call.arg{index}"),
            other => format!("call.{}", other.as_str()),
        },
        SinkKind::Return { index } => format!("ret{index}"),
    }
}

fn source_label(kind: &SourceKind, names: &BTreeMap<usize, String>) -> String {
    let site_name = |site: usize| {
        names.get(&site).cloned().unwrap_or_else(|| format!("@{site:#x}"))
    };
    match kind {
        SourceKind::Constant { value } => format!("const:{}", value.to_hex()),
        SourceKind::Information { opcode } => format!("info:{}", op::name(*opcode)),
        SourceKind::Calldata { offset } => match offset {
            Some(w) => format!("calldata:{}", w.to_hex()),
            None => "calldata:unknown".to_string(),
        },
        SourceKind::ReturnData { offset, site } => {
            let off = match offset {
                Some(w) => w.to_hex(),
                None => "unknown".to_string(),
            };
            format!("retdata:{}+{}", site_name(*site), off)
        }
        SourceKind::Definition { opcode, site } => match (opcode, site) {
            (_, Some(s)) => format!("def:{}", site_name(*s)),
            (Some(o), None) => format!("def:{}", op::name(*o)),
            _ => "def:external".to_string(),
        },
    }
}

/// Renders an extracted SSG into label space for comparison with the
/// hand-written sets.
pub fn render(ssg: &Ssg, code: &Bytecode) -> RenderedGraph {
    let names = instruction_names(code);
    let control_label = |id: usize| -> String {
        let c = &ssg.control_nodes[id];
        names.get(&c.site.offset).cloned().unwrap_or_else(|| format!("@{:#x}", c.site.offset))
    };
    let n_c = ssg.control_nodes.len();
    let data_label = |id: usize| -> String {
        match &ssg.data_nodes[id - n_c].kind {
            DataNodeKind::Source(s) => source_label(s, &names),
            DataNodeKind::Sink { control, kind } => {
                format!("{}/{}", control_label(*control), sink_label(kind))
            }
        }
    };
    let mut out = RenderedGraph::default();
    for c in &ssg.control_nodes {
        out.nodes.insert(control_label(c.id));
    }
    for e in &ssg.edges {
        match e.rel {
            Relation::Cc => {
                out.scfg_edges.insert((control_label(e.from), control_label(e.to)));
            }
            Relation::Cd => {
                out.cd_edges.insert((control_label(e.from), data_label(e.to)));
            }
            Relation::Dd => {
                out.dd_edges.insert((data_label(e.from), data_label(e.to)));
            }
        }
    }
    out
}

/// Precision/recall/F1 of a predicted set against an expected set. Two
/// empty sets count as a perfect match.
pub fn set_f1<T: Ord + Clone>(expected: &BTreeSet<T>, got: &BTreeSet<T>) -> (f64, usize, usize, usize) {
    let tp = expected.intersection(got).count();
    let fp = got.len() - tp;
    let fn_ = expected.len() - tp;
    if tp + fp + fn_ == 0 {
        return (1.0, 0, 0, 0);
    }
    let f1 = 2.0 * tp as f64 / (2.0 * tp as f64 + fp as f64 + fn_ as f64);
    (f1, tp, fp, fn_)
}

fn s(text: &str) -> String {
    text.to_string()
}

fn e(a: &str, b: &str) -> (String, String) {
    (a.to_string(), b.to_string())
}

const SEL_A: [u8; 4] = [0x11, 0x11, 0x11, 0x11];
const SEL_B: [u8; 4] = [0x22, 0x22, 0x22, 0x22];
const SEL_APPROVE: [u8; 4] = [0x09, 0x5e, 0xa7, 0xb3];
const SEL_TRANSFER: [u8; 4] = [0xa9, 0x05, 0x9c, 0xbb];
const SEL_SUPPLY: [u8; 4] = [0x18, 0x16, 0x0d, 0xdd];

/// Standard dispatcher prologue: size guard to the fallback, selector
/// extraction, one DUP1/PUSH4/EQ/PUSH2/JUMPI comparison per entry, falling
/// through into the fallback block.
fn dispatcher(selectors: &[([u8; 4], usize)], fallback: usize) -> Vec<AsmBlock> {
    let mut ops = vec![
        AsmOp::push_u64(4),
        AsmOp::Op(op::CALLDATASIZE),
        AsmOp::Op(0x10), // LT
        AsmOp::PushLabel(fallback),
        AsmOp::Op(op::JUMPI),
        AsmOp::push_u64(0),
        AsmOp::Op(op::CALLDATALOAD),
        AsmOp::push_u64(0xe0),
        AsmOp::Op(op::SHR),
    ];
    for (selector, label) in selectors {
        ops.push(AsmOp::Op(op::DUP1));
        ops.push(AsmOp::Push(selector.to_vec()));
        ops.push(AsmOp::Op(op::EQ));
        ops.push(AsmOp::PushLabel(*label));
        ops.push(AsmOp::Op(op::JUMPI));
    }
    vec![
        AsmBlock::new(0, false, ops),
        AsmBlock::new(
            fallback,
            true,
            vec![AsmOp::push_u64(0), AsmOp::push_u64(0), AsmOp::Op(op::REVERT)],
        ),
    ]
}

fn assemble(blocks: Vec<AsmBlock>, name: &str) -> Bytecode {
    let bytes = Program::new(blocks).assemble().expect("fixture assembles");
    Bytecode::new(bytes, name)
}

fn fx_single_stop() -> LabeledFixture {
    LabeledFixture {
        name: "single_stop",
        bytecode: Bytecode::from_hex_str("00", "single_stop").unwrap(),
        functions: vec![FunctionLabels {
            function: FunctionId::Fallback,
            scfg_nodes: vec![s("STOP#0")],
            scfg_edges: vec![],
            cd_edges: vec![],
            dd_edges: vec![],
        }],
    }
}

/// Straight-line store + log + return body behind a dispatcher.
fn fx_approve_like() -> LabeledFixture {
    let topic = vec![0xa5u8; 32];
    let topic_hex = format!("0x{}", "a5".repeat(32));
    let mut blocks = dispatcher(&[(SEL_APPROVE, 2)], 1);
    blocks.push(AsmBlock::new(
        2,
        true,
        vec![
            AsmOp::push_u64(4),
            AsmOp::Op(op::CALLDATALOAD),
            // sstore(slot 2, value)
            AsmOp::Op(op::DUP1),
            AsmOp::push_u64(2),
            AsmOp::Op(op::SSTORE),
            // log1(topic, value) via memory
            AsmOp::Op(op::DUP1),
            AsmOp::push_u64(0),
            AsmOp::Op(op::MSTORE),
            AsmOp::Push(topic),
            AsmOp::push_u64(0x20),
            AsmOp::push_u64(0),
            AsmOp::Op(op::LOG1),
            // return true
            AsmOp::push_u64(1),
            AsmOp::push_u64(0),
            AsmOp::Op(op::MSTORE),
            AsmOp::push_u64(0x20),
            AsmOp::push_u64(0),
            AsmOp::Op(op::RETURN),
        ],
    ));
    LabeledFixture {
        name: "approve_like",
        bytecode: assemble(blocks, "approve_like"),
        functions: vec![FunctionLabels {
            function: FunctionId::Selector(SEL_APPROVE),
            scfg_nodes: vec![s("SSTORE#0"), s("LOG1#0"), s("RETURN#0")],
            scfg_edges: vec![e("SSTORE#0", "LOG1#0"), e("LOG1#0", "RETURN#0")],
            cd_edges: vec![
                e("SSTORE#0", "SSTORE#0/storage.slot"),
                e("SSTORE#0", "SSTORE#0/storage.value"),
                e("LOG1#0", "LOG1#0/log.topic0"),
                e("LOG1#0", "LOG1#0/log.data0"),
                e("RETURN#0", "RETURN#0/ret0"),
            ],
            dd_edges: vec![
                e("const:0x2", "SSTORE#0/storage.slot"),
                e("calldata:0x4", "SSTORE#0/storage.value"),
                (format!("const:{topic_hex}"), s("LOG1#0/log.topic0")),
                e("calldata:0x4", "LOG1#0/log.data0"),
                e("const:0x1", "RETURN#0/ret0"),
            ],
        }],
    }
}

/// The same store/log/return function, but the private helper's two blocks
/// appear in swapped order in the binary and are stitched with jumps and a
/// pushed return address; the graph must restore execution order.
fn fx_swapped_blocks() -> LabeledFixture {
    let topic = vec![0xa5u8; 32];
    let topic_hex = format!("0x{}", "a5".repeat(32));
    const BODY: usize = 2;
    const A1: usize = 3;
    const A2: usize = 4;
    const RET: usize = 5;
    let mut blocks = dispatcher(&[(SEL_APPROVE, BODY)], 1);
    blocks.push(AsmBlock::new(
        BODY,
        true,
        vec![
            AsmOp::PushLabel(RET),
            AsmOp::push_u64(4),
            AsmOp::Op(op::CALLDATALOAD),
            AsmOp::PushLabel(A1),
            AsmOp::Op(op::JUMP),
        ],
    ));
    // layout order: BODY, A2, A1, RET - A2 before A1 is the swap
    blocks.push(AsmBlock::new(
        A2,
        true,
        vec![
            AsmOp::Op(op::DUP1),
            AsmOp::push_u64(0),
            AsmOp::Op(op::MSTORE),
            AsmOp::Push(topic),
            AsmOp::push_u64(0x20),
            AsmOp::push_u64(0),
            AsmOp::Op(op::LOG1),
            AsmOp::Op(op::POP),
            AsmOp::Op(op::JUMP), // return to the pushed address
        ],
    ));
    blocks.push(AsmBlock::new(
        A1,
        true,
        vec![
            AsmOp::Op(op::DUP1),
            AsmOp::push_u64(2),
            AsmOp::Op(op::SSTORE),
            AsmOp::PushLabel(A2),
            AsmOp::Op(op::JUMP),
        ],
    ));
    blocks.push(AsmBlock::new(
        RET,
        true,
        vec![
            AsmOp::push_u64(1),
            AsmOp::push_u64(0),
            AsmOp::Op(op::MSTORE),
            AsmOp::push_u64(0x20),
            AsmOp::push_u64(0),
            AsmOp::Op(op::RETURN),
        ],
    ));
    LabeledFixture {
        name: "swapped_blocks",
        bytecode: assemble(blocks, "swapped_blocks"),
        functions: vec![FunctionLabels {
            function: FunctionId::Selector(SEL_APPROVE),
            scfg_nodes: vec![s("SSTORE#0"), s("LOG1#0"), s("RETURN#0")],
            scfg_edges: vec![e("SSTORE#0", "LOG1#0"), e("LOG1#0", "RETURN#0")],
            cd_edges: vec![
                e("SSTORE#0", "SSTORE#0/storage.slot"),
                e("SSTORE#0", "SSTORE#0/storage.value"),
                e("LOG1#0", "LOG1#0/log.topic0"),
                e("LOG1#0", "LOG1#0/log.data0"),
                e("RETURN#0", "RETURN#0/ret0"),
            ],
            dd_edges: vec![
                e("const:0x2", "SSTORE#0/storage.slot"),
                e("calldata:0x4", "SSTORE#0/storage.value"),
                (format!("const:{topic_hex}"), s("LOG1#0/log.topic0")),
                e("calldata:0x4", "LOG1#0/log.data0"),
                e("const:0x1", "RETURN#0/ret0"),
            ],
        }],
    }
}

/// Unknown-condition branch writing different slots, joining into a log.
fn fx_diamond() -> LabeledFixture {
    const BODY: usize = 2;
    const RIGHT: usize = 3;
    const LEFT: usize = 4;
    const JOIN: usize = 5;
    let mut blocks = dispatcher(&[(SEL_A, BODY)], 1);
    blocks.push(AsmBlock::new(
        BODY,
        true,
        vec![
            AsmOp::push_u64(4),
            AsmOp::Op(op::CALLDATALOAD),
            AsmOp::PushLabel(LEFT),
            AsmOp::Op(op::JUMPI),
        ],
    ));
    // fall-through arm first in layout
    blocks.push(AsmBlock::new(
        RIGHT,
        false,
        vec![
            AsmOp::push_u64(0x0b),
            AsmOp::push_u64(2),
            AsmOp::Op(op::SSTORE),
            AsmOp::PushLabel(JOIN),
            AsmOp::Op(op::JUMP),
        ],
    ));
    blocks.push(AsmBlock::new(
        LEFT,
        true,
        vec![
            AsmOp::push_u64(0x0c),
            AsmOp::push_u64(3),
            AsmOp::Op(op::SSTORE),
            AsmOp::PushLabel(JOIN),
            AsmOp::Op(op::JUMP),
        ],
    ));
    blocks.push(AsmBlock::new(
        JOIN,
        true,
        vec![
            AsmOp::push_u64(0x20),
            AsmOp::push_u64(0),
            AsmOp::Op(op::LOG0),
            AsmOp::Op(op::STOP),
        ],
    ));
    LabeledFixture {
        name: "diamond",
        bytecode: assemble(blocks, "diamond"),
        functions: vec![FunctionLabels {
            function: FunctionId::Selector(SEL_A),
            scfg_nodes: vec![s("SSTORE#0"), s("SSTORE#1"), s("LOG0#0"), s("STOP#0")],
            scfg_edges: vec![
                e("SSTORE#0", "LOG0#0"),
                e("SSTORE#1", "LOG0#0"),
                e("LOG0#0", "STOP#0"),
            ],
            cd_edges: vec![
                e("SSTORE#0", "SSTORE#0/storage.slot"),
                e("SSTORE#0", "SSTORE#0/storage.value"),
                e("SSTORE#1", "SSTORE#1/storage.slot"),
                e("SSTORE#1", "SSTORE#1/storage.value"),
                e("LOG0#0", "LOG0#0/log.data0"),
            ],
            dd_edges: vec![
                e("const:0x2", "SSTORE#0/storage.slot"),
                e("const:0xb", "SSTORE#0/storage.value"),
                e("const:0x3", "SSTORE#1/storage.slot"),
                e("const:0xc", "SSTORE#1/storage.value"),
                e("const:0x0", "LOG0#0/log.data0"),
            ],
        }],
    }
}

/// Counter loop: the body stores on every iteration, so the store connects
/// to itself along the back edge.
fn fx_loop() -> LabeledFixture {
    const BODY: usize = 2;
    const LOOP: usize = 3;
    let mut blocks = dispatcher(&[(SEL_A, BODY)], 1);
    blocks.push(AsmBlock::new(
        BODY,
        true,
        vec![
            AsmOp::push_u64(0),
            AsmOp::Op(op::SLOAD),
            AsmOp::PushLabel(LOOP),
            AsmOp::Op(op::JUMP),
        ],
    ));
    blocks.push(AsmBlock::new(
        LOOP,
        true,
        vec![
            AsmOp::Op(op::DUP1),
            AsmOp::push_u64(1),
            AsmOp::Op(op::SSTORE),
            AsmOp::push_u64(4),
            AsmOp::Op(op::CALLDATALOAD),
            AsmOp::PushLabel(LOOP),
            AsmOp::Op(op::JUMPI),
        ],
    ));
    blocks.push(AsmBlock::new(4, false, vec![AsmOp::Op(op::STOP)]));
    LabeledFixture {
        name: "loop_counter",
        bytecode: assemble(blocks, "loop_counter"),
        functions: vec![FunctionLabels {
            function: FunctionId::Selector(SEL_A),
            scfg_nodes: vec![s("SLOAD#0"), s("SSTORE#0"), s("STOP#0")],
            scfg_edges: vec![
                e("SLOAD#0", "SSTORE#0"),
                e("SSTORE#0", "SSTORE#0"),
                e("SSTORE#0", "STOP#0"),
            ],
            cd_edges: vec![
                e("SLOAD#0", "SLOAD#0/storage.slot"),
                e("SSTORE#0", "SSTORE#0/storage.slot"),
                e("SSTORE#0", "SSTORE#0/storage.value"),
            ],
            dd_edges: vec![
                e("const:0x0", "SLOAD#0/storage.slot"),
                e("const:0x1", "SSTORE#0/storage.slot"),
                e("def:SLOAD#0", "SSTORE#0/storage.value"),
            ],
        }],
    }
}

/// Three-selector dispatcher; each function has its own small body, and the
/// fallback is its own labeled function.
fn fx_three_functions() -> LabeledFixture {
    const APPROVE: usize = 2;
    const TRANSFER: usize = 3;
    const SUPPLY: usize = 4;
    let mut blocks =
        dispatcher(&[(SEL_APPROVE, APPROVE), (SEL_TRANSFER, TRANSFER), (SEL_SUPPLY, SUPPLY)], 1);
    blocks.push(AsmBlock::new(
        APPROVE,
        true,
        vec![
            AsmOp::push_u64(1),
            AsmOp::push_u64(0),
            AsmOp::Op(op::MSTORE),
            AsmOp::push_u64(0x20),
            AsmOp::push_u64(0),
            AsmOp::Op(op::RETURN),
        ],
    ));
    blocks.push(AsmBlock::new(
        TRANSFER,
        true,
        vec![
            AsmOp::push_u64(0x24),
            AsmOp::Op(op::CALLDATALOAD),
            AsmOp::push_u64(5),
            AsmOp::Op(op::SSTORE),
            AsmOp::Op(op::STOP),
        ],
    ));
    blocks.push(AsmBlock::new(
        SUPPLY,
        true,
        vec![
            AsmOp::push_u64(5),
            AsmOp::Op(op::SLOAD),
            AsmOp::push_u64(0),
            AsmOp::Op(op::MSTORE),
            AsmOp::push_u64(0x20),
            AsmOp::push_u64(0),
            AsmOp::Op(op::RETURN),
        ],
    ));
    LabeledFixture {
        name: "three_functions",
        bytecode: assemble(blocks, "three_functions"),
        functions: vec![
            FunctionLabels {
                function: FunctionId::Selector(SEL_APPROVE),
                scfg_nodes: vec![s("RETURN#0")],
                scfg_edges: vec![],
                cd_edges: vec![e("RETURN#0", "RETURN#0/ret0")],
                dd_edges: vec![e("const:0x1", "RETURN#0/ret0")],
            },
            FunctionLabels {
                function: FunctionId::Selector(SEL_TRANSFER),
                scfg_nodes: vec![s("SSTORE#0"), s("STOP#0")],
                scfg_edges: vec![e("SSTORE#0", "STOP#0")],
                cd_edges: vec![
                    e("SSTORE#0", "SSTORE#0/storage.slot"),
                    e("SSTORE#0", "SSTORE#0/storage.value"),
                ],
                dd_edges: vec![
                    e("const:0x5", "SSTORE#0/storage.slot"),
                    e("calldata:0x24", "SSTORE#0/storage.value"),
                ],
            },
            FunctionLabels {
                function: FunctionId::Selector(SEL_SUPPLY),
                scfg_nodes: vec![s("SLOAD#0"), s("RETURN#1")],
                scfg_edges: vec![e("SLOAD#0", "RETURN#1")],
                cd_edges: vec![
                    e("SLOAD#0", "SLOAD#0/storage.slot"),
                    e("RETURN#1", "RETURN#1/ret0"),
                ],
                dd_edges: vec![
                    e("const:0x5", "SLOAD#0/storage.slot"),
                    e("def:SLOAD#0", "RETURN#1/ret0"),
                ],
            },
            FunctionLabels {
                function: FunctionId::Fallback,
                scfg_nodes: vec![s("REVERT#0")],
                scfg_edges: vec![],
                cd_edges: vec![],
                dd_edges: vec![],
            },
        ],
    }
}

/// Two functions funnel through one shared store block with pushed return
/// addresses; each function must see its own clone with its own constants.
fn fx_block_reuse() -> LabeledFixture {
    const E1: usize = 2;
    const E2: usize = 3;
    const SHARED: usize = 4;
    const R1: usize = 5;
    const R2: usize = 6;
    let mut blocks = dispatcher(&[(SEL_A, E1), (SEL_B, E2)], 1);
    blocks.push(AsmBlock::new(
        E1,
        true,
        vec![
            AsmOp::PushLabel(R1),
            AsmOp::push_u64(5),
            AsmOp::PushLabel(SHARED),
            AsmOp::Op(op::JUMP),
        ],
    ));
    blocks.push(AsmBlock::new(
        E2,
        true,
        vec![
            AsmOp::PushLabel(R2),
            AsmOp::push_u64(7),
            AsmOp::PushLabel(SHARED),
            AsmOp::Op(op::JUMP),
        ],
    ));
    blocks.push(AsmBlock::new(
        SHARED,
        true,
        vec![AsmOp::push_u64(0), AsmOp::Op(op::SSTORE), AsmOp::Op(op::JUMP)],
    ));
    blocks.push(AsmBlock::new(R1, true, vec![AsmOp::Op(op::STOP)]));
    blocks.push(AsmBlock::new(
        R2,
        true,
        vec![AsmOp::push_u64(0), AsmOp::Op(op::DUP1), AsmOp::Op(op::RETURN)],
    ));
    LabeledFixture {
        name: "block_reuse",
        bytecode: assemble(blocks, "block_reuse"),
        functions: vec![
            FunctionLabels {
                function: FunctionId::Selector(SEL_A),
                scfg_nodes: vec![s("SSTORE#0"), s("STOP#0")],
                scfg_edges: vec![e("SSTORE#0", "STOP#0")],
                cd_edges: vec![
                    e("SSTORE#0", "SSTORE#0/storage.slot"),
                    e("SSTORE#0", "SSTORE#0/storage.value"),
                ],
                dd_edges: vec![
                    e("const:0x0", "SSTORE#0/storage.slot"),
                    e("const:0x5", "SSTORE#0/storage.value"),
                ],
            },
            FunctionLabels {
                function: FunctionId::Selector(SEL_B),
                scfg_nodes: vec![s("SSTORE#0"), s("RETURN#0")],
                scfg_edges: vec![e("SSTORE#0", "RETURN#0")],
                cd_edges: vec![
                    e("SSTORE#0", "SSTORE#0/storage.slot"),
                    e("SSTORE#0", "SSTORE#0/storage.value"),
                ],
                dd_edges: vec![
                    e("const:0x0", "SSTORE#0/storage.slot"),
                    e("const:0x7", "SSTORE#0/storage.value"),
                ],
            },
        ],
    }
}

/// An outbound call whose selector word is staged in memory from calldata.
fn fx_call_memory_selector() -> LabeledFixture {
    let addr = vec![0x44u8; 20];
    let addr_hex = format!("0x{}", "44".repeat(20));
    const BODY: usize = 2;
    let mut blocks = dispatcher(&[(SEL_A, BODY)], 1);
    blocks.push(AsmBlock::new(
        BODY,
        true,
        vec![
            AsmOp::push_u64(4),
            AsmOp::Op(op::CALLDATALOAD),
            AsmOp::push_u64(0),
            AsmOp::Op(op::MSTORE),
            AsmOp::push_u64(0), // retSize
            AsmOp::push_u64(0), // retOff
            AsmOp::push_u64(4), // argsSize
            AsmOp::push_u64(0), // argsOff
            AsmOp::push_u64(0), // value
            AsmOp::Push(addr),
            AsmOp::Op(op::GAS),
            AsmOp::Op(op::CALL),
            AsmOp::Op(op::POP),
            AsmOp::Op(op::STOP),
        ],
    ));
    LabeledFixture {
        name: "call_memory_selector",
        bytecode: assemble(blocks, "call_memory_selector"),
        functions: vec![FunctionLabels {
            function: FunctionId::Selector(SEL_A),
            scfg_nodes: vec![s("CALL#0"), s("STOP#0")],
            scfg_edges: vec![e("CALL#0", "STOP#0")],
            cd_edges: vec![
                e("CALL#0", "CALL#0/call.address"),
                e("CALL#0", "CALL#0/call.value"),
                e("CALL#0", "CALL#0/call.selector"),
            ],
            dd_edges: vec![
                (format!("const:{addr_hex}"), s("CALL#0/call.address")),
                e("const:0x0", "CALL#0/call.value"),
                e("calldata:0x4", "CALL#0/call.selector"),
            ],
        }],
    }
}

/// Mapping-style store: the slot is a hash over the calldata key and the
/// mapping slot constant; both inputs stay visible behind the hash.
fn fx_keccak_slot() -> LabeledFixture {
    const BODY: usize = 2;
    let mut blocks = dispatcher(&[(SEL_A, BODY)], 1);
    blocks.push(AsmBlock::new(
        BODY,
        true,
        vec![
            AsmOp::push_u64(0x2a), // stored value
            AsmOp::push_u64(4),
            AsmOp::Op(op::CALLDATALOAD),
            AsmOp::push_u64(0),
            AsmOp::Op(op::MSTORE),
            AsmOp::push_u64(5), // mapping slot
            AsmOp::push_u64(0x20),
            AsmOp::Op(op::MSTORE),
            AsmOp::push_u64(0x40),
            AsmOp::push_u64(0),
            AsmOp::Op(op::KECCAK256),
            AsmOp::Op(op::SSTORE),
            AsmOp::Op(op::STOP),
        ],
    ));
    LabeledFixture {
        name: "keccak_slot",
        bytecode: assemble(blocks, "keccak_slot"),
        functions: vec![FunctionLabels {
            function: FunctionId::Selector(SEL_A),
            scfg_nodes: vec![s("SSTORE#0"), s("STOP#0")],
            scfg_edges: vec![e("SSTORE#0", "STOP#0")],
            cd_edges: vec![
                e("SSTORE#0", "SSTORE#0/storage.slot"),
                e("SSTORE#0", "SSTORE#0/storage.value"),
            ],
            dd_edges: vec![
                e("def:KECCAK256#0", "SSTORE#0/storage.slot"),
                e("calldata:0x4", "def:KECCAK256#0"),
                e("const:0x5", "def:KECCAK256#0"),
                e("const:0x2a", "SSTORE#0/storage.value"),
            ],
        }],
    }
}

/// Two stores against the same constant slot share one source node.
fn fx_shared_const() -> LabeledFixture {
    const BODY: usize = 2;
    let mut blocks = dispatcher(&[(SEL_A, BODY)], 1);
    blocks.push(AsmBlock::new(
        BODY,
        true,
        vec![
            AsmOp::push_u64(0x11),
            AsmOp::push_u64(0),
            AsmOp::Op(op::SSTORE),
            AsmOp::push_u64(0x22),
            AsmOp::push_u64(0),
            AsmOp::Op(op::SSTORE),
            AsmOp::Op(op::STOP),
        ],
    ));
    LabeledFixture {
        name: "shared_const_dedupe",
        bytecode: assemble(blocks, "shared_const_dedupe"),
        functions: vec![FunctionLabels {
            function: FunctionId::Selector(SEL_A),
            scfg_nodes: vec![s("SSTORE#0"), s("SSTORE#1"), s("STOP#0")],
            scfg_edges: vec![e("SSTORE#0", "SSTORE#1"), e("SSTORE#1", "STOP#0")],
            cd_edges: vec![
                e("SSTORE#0", "SSTORE#0/storage.slot"),
                e("SSTORE#0", "SSTORE#0/storage.value"),
                e("SSTORE#1", "SSTORE#1/storage.slot"),
                e("SSTORE#1", "SSTORE#1/storage.value"),
            ],
            dd_edges: vec![
                e("const:0x0", "SSTORE#0/storage.slot"),
                e("const:0x11", "SSTORE#0/storage.value"),
                e("const:0x0", "SSTORE#1/storage.slot"),
                e("const:0x22", "SSTORE#1/storage.value"),
            ],
        }],
    }
}

/// Transaction-environment reads as sources: a caller-topic log and a
/// caller-directed selfdestruct sharing one Information node.
fn fx_info_sources() -> LabeledFixture {
    const BODY: usize = 2;
    let mut blocks = dispatcher(&[(SEL_A, BODY)], 1);
    blocks.push(AsmBlock::new(
        BODY,
        true,
        vec![
            AsmOp::Op(op::CALLER),
            AsmOp::push_u64(0x20),
            AsmOp::push_u64(0),
            AsmOp::Op(op::LOG1),
            AsmOp::Op(op::CALLER),
            AsmOp::Op(op::SELFDESTRUCT),
        ],
    ));
    LabeledFixture {
        name: "info_sources",
        bytecode: assemble(blocks, "info_sources"),
        functions: vec![FunctionLabels {
            function: FunctionId::Selector(SEL_A),
            scfg_nodes: vec![s("LOG1#0"), s("SELFDESTRUCT#0")],
            scfg_edges: vec![e("LOG1#0", "SELFDESTRUCT#0")],
            cd_edges: vec![
                e("LOG1#0", "LOG1#0/log.topic0"),
                e("LOG1#0", "LOG1#0/log.data0"),
                e("SELFDESTRUCT#0", "SELFDESTRUCT#0/ret0"),
            ],
            dd_edges: vec![
                e("info:CALLER", "LOG1#0/log.topic0"),
                e("const:0x0", "LOG1#0/log.data0"),
                e("info:CALLER", "SELFDESTRUCT#0/ret0"),
            ],
        }],
    }
}

/// A call's returned word flows through memory into a store.
fn fx_returndata_flow() -> LabeledFixture {
    let addr = vec![0x44u8; 20];
    let addr_hex = format!("0x{}", "44".repeat(20));
    const BODY: usize = 2;
    let mut blocks = dispatcher(&[(SEL_A, BODY)], 1);
    blocks.push(AsmBlock::new(
        BODY,
        true,
        vec![
            AsmOp::push_u64(0x20), // retSize
            AsmOp::push_u64(0x40), // retOff
            AsmOp::push_u64(0),    // argsSize
            AsmOp::push_u64(0),    // argsOff
            AsmOp::push_u64(0),    // value
            AsmOp::Push(addr),
            AsmOp::Op(op::GAS),
            AsmOp::Op(op::CALL),
            AsmOp::Op(op::POP),
            AsmOp::push_u64(0x40),
            AsmOp::Op(op::MLOAD),
            AsmOp::push_u64(6),
            AsmOp::Op(op::SSTORE),
            AsmOp::Op(op::STOP),
        ],
    ));
    LabeledFixture {
        name: "returndata_flow",
        bytecode: assemble(blocks, "returndata_flow"),
        functions: vec![FunctionLabels {
            function: FunctionId::Selector(SEL_A),
            scfg_nodes: vec![s("CALL#0"), s("SSTORE#0"), s("STOP#0")],
            scfg_edges: vec![e("CALL#0", "SSTORE#0"), e("SSTORE#0", "STOP#0")],
            cd_edges: vec![
                e("CALL#0", "CALL#0/call.address"),
                e("CALL#0", "CALL#0/call.value"),
                e("SSTORE#0", "SSTORE#0/storage.slot"),
                e("SSTORE#0", "SSTORE#0/storage.value"),
            ],
            dd_edges: vec![
                (format!("const:{addr_hex}"), s("CALL#0/call.address")),
                e("const:0x0", "CALL#0/call.value"),
                e("const:0x6", "SSTORE#0/storage.slot"),
                e("retdata:CALL#0+0x0", "SSTORE#0/storage.value"),
            ],
        }],
    }
}

/// A guarded increment in the shape solc emits for checked arithmetic: the
/// overflow branch funnels into a shared panic-revert block.
fn fx_guarded_increment() -> LabeledFixture {
    const BODY: usize = 2;
    const PANIC: usize = 3;
    const STORE: usize = 4;
    let mut panic_word = vec![0u8; 32];
    panic_word[..4].copy_from_slice(&[0x4e, 0x48, 0x7b, 0x71]);
    let panic_const = format!("const:0x4e487b71{}", "00".repeat(28));
    let mut blocks = dispatcher(&[(SEL_A, BODY)], 1);
    blocks.push(AsmBlock::new(
        BODY,
        true,
        vec![
            AsmOp::push_u64(3),
            AsmOp::Op(op::SLOAD),
            AsmOp::push_u64(1),
            AsmOp::Op(op::ADD),
            AsmOp::Op(op::DUP1),
            AsmOp::Op(op::ISZERO),
            AsmOp::PushLabel(PANIC),
            AsmOp::Op(op::JUMPI),
            AsmOp::PushLabel(STORE),
            AsmOp::Op(op::JUMP),
        ],
    ));
    blocks.push(AsmBlock::new(
        PANIC,
        true,
        vec![
            AsmOp::Push(panic_word),
            AsmOp::push_u64(0),
            AsmOp::Op(op::MSTORE),
            AsmOp::push_u64(0x20),
            AsmOp::push_u64(0),
            AsmOp::Op(op::REVERT),
        ],
    ));
    blocks.push(AsmBlock::new(
        STORE,
        true,
        vec![AsmOp::push_u64(3), AsmOp::Op(op::SSTORE), AsmOp::Op(op::STOP)],
    ));
    LabeledFixture {
        name: "guarded_increment",
        bytecode: assemble(blocks, "guarded_increment"),
        functions: vec![FunctionLabels {
            function: FunctionId::Selector(SEL_A),
            scfg_nodes: vec![s("SLOAD#0"), s("REVERT#1"), s("SSTORE#0"), s("STOP#0")],
            scfg_edges: vec![
                e("SLOAD#0", "REVERT#1"),
                e("SLOAD#0", "SSTORE#0"),
                e("SSTORE#0", "STOP#0"),
            ],
            cd_edges: vec![
                e("SLOAD#0", "SLOAD#0/storage.slot"),
                e("REVERT#1", "REVERT#1/ret0"),
                e("SSTORE#0", "SSTORE#0/storage.slot"),
                e("SSTORE#0", "SSTORE#0/storage.value"),
            ],
            dd_edges: vec![
                e("const:0x3", "SLOAD#0/storage.slot"),
                (panic_const, s("REVERT#1/ret0")),
                e("const:0x3", "SSTORE#0/storage.slot"),
                e("def:ADD#0", "SSTORE#0/storage.value"),
            ],
        }],
    }
}

/// The whole hand-labeled suite.
pub fn all() -> Vec<LabeledFixture> {
    vec![
        fx_single_stop(),
        fx_approve_like(),
        fx_swapped_blocks(),
        fx_diamond(),
        fx_loop(),
        fx_three_functions(),
        fx_block_reuse(),
        fx_call_memory_selector(),
        fx_keccak_slot(),
        fx_shared_const(),
        fx_info_sources(),
        fx_returndata_flow(),
        fx_guarded_increment(),
    ]
}
