//! Synthetic labeled corpus: randomly structured single-function contracts
//! (the classes) rendered into several bytecode variants each. Variant
//! knobs mimic compiler-version differences (guard blocks, argument
//! masking, return styles, scratch layout), and assembler-level mutations
//! (block reordering with jump fix-up, push widening, stack no-ops) stand
//! in for optimization-level variance. Same class means similar; that is
//! the training oracle.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::asm::{AsmBlock, AsmOp, Program};
use crate::bytecode::Bytecode;
use crate::cfg::FunctionId;
use crate::dataset::CorpusEntry;
use crate::opcode as op;
use crate::rng::sub_rng;
use crate::ssg::extract_contract;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n_classes: usize,
    pub variants_per_class: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { n_classes: 60, variants_per_class: 6, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct SynthContract {
    pub class_id: String,
    pub variant_id: String,
    pub selector: [u8; 4],
    pub bytecode: Bytecode,
}

/// What a value fed into a sink comes from, decided per class.
#[derive(Debug, Clone)]
enum ValueSpec {
    Const(u64),
    CalldataArg(u8),
    /// A deployment-specific immutable: the same source yields a different
    /// embedded word per deployment, so the codegen draws it from the
    /// variant generator.
    Deployment,
}

/// The class-level shape shared by all variants.
#[derive(Debug, Clone)]
enum Segment {
    Store { slot: u64, value: ValueSpec },
    Increment { slot: u64, step: u64 },
    Emit { topic: [u8; 32], data: ValueSpec },
    CallOut { selector: [u8; 4], target_slot: u64, arg: ValueSpec },
}

#[derive(Debug, Clone)]
struct Blueprint {
    selector: [u8; 4],
    segments: Vec<Segment>,
}

/// Per-variant compiler-style knobs.
#[derive(Debug, Clone)]
struct VariantKnobs {
    /// Chance that any one store gets a checked-arithmetic style guard.
    guard_prob: f64,
    /// Chance that any one calldata argument gets a cleanup mask.
    mask_prob: f64,
    /// How the shared bail-out block halts: 0 INVALID, 1 plain revert,
    /// 2 revert with the panic word.
    panic_style: u8,
    return_style: u8,
    noise_slots: Vec<u64>,
    scratch: u64,
    /// Independent statements get reordered the way an IR-level optimizer
    /// would schedule them.
    shuffle_segments: bool,
    /// Chance a call target reads as an embedded immutable instead of a
    /// storage load, the way newer compilers lower `immutable`.
    immutable_prob: f64,
    reorder: bool,
    widen_pushes: bool,
    stack_noise: bool,
}

/// Solidity's fixed panic selector word, emitted by guard revert blocks.
const PANIC_WORD: [u8; 32] = {
    let mut w = [0u8; 32];
    w[0] = 0x4e;
    w[1] = 0x48;
    w[2] = 0x7b;
    w[3] = 0x71;
    w
};

/// Corpus-wide attribute pools. Real contracts share event signatures and
/// call selectors (every token emits the same Transfer topic), so classes
/// draw from common pools and differ in which elements they combine; that
/// keeps raw feature overlap high across classes.
struct Pools {
    topics: Vec<[u8; 32]>,
    selectors: Vec<[u8; 4]>,
}

fn pools(seed: u64) -> Pools {
    let mut rng = sub_rng(seed, "pools");
    let topics = (0..2)
        .map(|_| {
            let mut t = [0u8; 32];
            rng.fill(&mut t);
            t
        })
        .collect();
    let selectors = (0..4)
        .map(|_| {
            let mut s = [0u8; 4];
            rng.fill(&mut s);
            s
        })
        .collect();
    Pools { topics, selectors }
}

fn blueprint(class: usize, seed: u64, pools: &Pools) -> Blueprint {
    let mut rng = sub_rng(seed, &format!("class/{class}"));
    let mut selector = [0u8; 4];
    rng.fill(&mut selector);
    // all classes share one segment skeleton (corpora of near-clones are
    // exactly where similarity detection is hard); identity lives in the
    // attributes and their wiring, not in the segment-type mix
    let spec = |rng: &mut ChaCha12Rng| {
        let roll = rng.random::<f64>();
        if roll < 0.35 {
            ValueSpec::Const(rng.random_range(1..12))
        } else if roll < 0.7 {
            ValueSpec::CalldataArg(rng.random_range(0..3))
        } else {
            ValueSpec::Deployment
        }
    };
    let mut segments = vec![
        Segment::Store { slot: rng.random_range(0..8), value: spec(&mut rng) },
        Segment::Store { slot: rng.random_range(0..8), value: ValueSpec::Deployment },
        Segment::Increment { slot: rng.random_range(0..8), step: rng.random_range(1..8) },
        Segment::Emit {
            topic: pools.topics[rng.random_range(0..pools.topics.len())],
            data: spec(&mut rng),
        },
        Segment::CallOut {
            selector: pools.selectors[rng.random_range(0..pools.selectors.len())],
            target_slot: rng.random_range(0..8),
            arg: spec(&mut rng),
        },
    ];
    segments.shuffle(&mut rng);
    Blueprint { selector, segments }
}

fn knobs(class: usize, variant: usize, seed: u64) -> VariantKnobs {
    let mut rng = sub_rng(seed, &format!("variant/{class}/{variant}"));
    let n_noise = rng.random_range(0..=2);
    VariantKnobs {
        guard_prob: [0.0, 0.3, 0.8][rng.random_range(0..3)],
        mask_prob: [0.0, 0.4, 1.0][rng.random_range(0..3)],
        panic_style: rng.random_range(0..3),
        return_style: rng.random_range(0..3),
        noise_slots: (0..n_noise).map(|_| rng.random_range(0..8)).collect(),
        scratch: [0x00u64, 0x40, 0x80][rng.random_range(0..3)],
        shuffle_segments: rng.random::<f64>() < 0.75,
        immutable_prob: [0.0, 0.5, 1.0][rng.random_range(0..3)],
        reorder: rng.random::<f64>() < 0.7,
        widen_pushes: rng.random::<f64>() < 0.5,
        stack_noise: rng.random::<f64>() < 0.5,
    }
}

/// Emits the ops that leave the segment's input value on the stack.
fn push_value(ops: &mut Vec<AsmOp>, spec: &ValueSpec, knobs: &VariantKnobs, rng: &mut ChaCha12Rng) {
    match spec {
        ValueSpec::Const(v) => ops.push(AsmOp::push_u64(*v)),
        ValueSpec::CalldataArg(k) => {
            ops.push(AsmOp::push_u64(4 + 32 * *k as u64));
            ops.push(AsmOp::Op(op::CALLDATALOAD));
            if rng.random::<f64>() < knobs.mask_prob {
                ops.push(AsmOp::Push(vec![0xff; 16]));
                ops.push(AsmOp::Op(op::AND));
            }
        }
        ValueSpec::Deployment => {
            let mut word = [0u8; 32];
            rng.fill(&mut word);
            ops.push(AsmOp::Push(word.to_vec()));
        }
    }
}

/// One synthetic contract: dispatcher, segment blocks chained by jumps, an
/// optional shared panic block, and the chosen return style.
fn codegen(bp: &Blueprint, knobs: &VariantKnobs, rng: &mut ChaCha12Rng) -> Program {
    const ENTRY: usize = 0;
    const FALLBACK: usize = 1;
    const PANIC: usize = 2;
    const BODY0: usize = 3;

    let mut blocks: Vec<AsmBlock> = Vec::new();
    // dispatcher
    blocks.push(AsmBlock::new(
        ENTRY,
        false,
        vec![
            AsmOp::push_u64(4),
            AsmOp::Op(op::CALLDATASIZE),
            AsmOp::Op(0x10), // LT
            AsmOp::PushLabel(FALLBACK),
            AsmOp::Op(op::JUMPI),
            AsmOp::push_u64(0),
            AsmOp::Op(op::CALLDATALOAD),
            AsmOp::push_u64(0xe0),
            AsmOp::Op(op::SHR),
            AsmOp::Op(op::DUP1),
            AsmOp::Push(bp.selector.to_vec()),
            AsmOp::Op(op::EQ),
            AsmOp::PushLabel(BODY0),
            AsmOp::Op(op::JUMPI),
        ],
    ));
    blocks.push(AsmBlock::new(
        FALLBACK,
        true,
        vec![AsmOp::push_u64(0), AsmOp::push_u64(0), AsmOp::Op(op::REVERT)],
    ));

    // body: one block per segment, chained by explicit jumps
    let mut segments: Vec<&Segment> = bp.segments.iter().collect();
    if knobs.shuffle_segments {
        segments.shuffle(rng);
    }
    let mut next_label = BODY0;
    let mut body_blocks: Vec<AsmBlock> = Vec::new();
    let mut guard_used = false;
    for (i, segment) in segments.into_iter().enumerate() {
        let label = next_label;
        next_label += 1;
        let mut ops: Vec<AsmOp> = Vec::new();
        if knobs.stack_noise && rng.random::<bool>() {
            ops.push(AsmOp::push_u64(rng.random_range(0..256)));
            ops.push(AsmOp::Op(op::POP));
        }
        if i == 0 {
            for &slot in &knobs.noise_slots {
                ops.push(AsmOp::push_u64(slot));
                ops.push(AsmOp::Op(op::SLOAD));
                ops.push(AsmOp::Op(op::POP));
            }
        }
        match segment {
            Segment::Store { slot, value } => {
                push_value(&mut ops, value, knobs, rng);
                if rng.random::<f64>() < knobs.guard_prob {
                    // solc-style check: bail out to the shared panic block
                    ops.push(AsmOp::Op(op::DUP1));
                    ops.push(AsmOp::Op(op::ISZERO));
                    ops.push(AsmOp::PushLabel(PANIC));
                    ops.push(AsmOp::Op(op::JUMPI));
                    guard_used = true;
                }
                ops.push(AsmOp::push_u64(*slot));
                ops.push(AsmOp::Op(op::SSTORE));
            }
            Segment::Increment { slot, step } => {
                ops.push(AsmOp::push_u64(*slot));
                ops.push(AsmOp::Op(op::SLOAD));
                ops.push(AsmOp::push_u64(*step));
                ops.push(AsmOp::Op(op::ADD));
                if rng.random::<f64>() < knobs.guard_prob {
                    ops.push(AsmOp::Op(op::DUP1));
                    ops.push(AsmOp::Op(op::ISZERO));
                    ops.push(AsmOp::PushLabel(PANIC));
                    ops.push(AsmOp::Op(op::JUMPI));
                    guard_used = true;
                }
                ops.push(AsmOp::push_u64(*slot));
                ops.push(AsmOp::Op(op::SSTORE));
            }
            Segment::Emit { topic, data } => {
                push_value(&mut ops, data, knobs, rng);
                ops.push(AsmOp::push_u64(knobs.scratch));
                ops.push(AsmOp::Op(op::MSTORE));
                ops.push(AsmOp::Push(topic.to_vec()));
                ops.push(AsmOp::push_u64(0x20));
                ops.push(AsmOp::push_u64(knobs.scratch));
                ops.push(AsmOp::Op(op::LOG1));
            }
            Segment::CallOut { selector, target_slot, arg } => {
                // selector word (selector in the high bytes), then the arg
                let mut sel_word = [0u8; 32];
                sel_word[..4].copy_from_slice(selector);
                ops.push(AsmOp::Push(sel_word.to_vec()));
                ops.push(AsmOp::push_u64(knobs.scratch));
                ops.push(AsmOp::Op(op::MSTORE));
                push_value(&mut ops, arg, knobs, rng);
                ops.push(AsmOp::push_u64(knobs.scratch + 4));
                ops.push(AsmOp::Op(op::MSTORE));
                // retSize, retOff, argsSize, argsOff, value, address, gas
                ops.push(AsmOp::push_u64(0x20));
                ops.push(AsmOp::push_u64(knobs.scratch + 0x60));
                ops.push(AsmOp::push_u64(4 + 32));
                ops.push(AsmOp::push_u64(knobs.scratch));
                ops.push(AsmOp::push_u64(0));
                if rng.random::<f64>() < knobs.immutable_prob {
                    let mut addr = [0u8; 20];
                    rng.fill(&mut addr);
                    ops.push(AsmOp::Push(addr.to_vec()));
                } else {
                    ops.push(AsmOp::push_u64(*target_slot));
                    ops.push(AsmOp::Op(op::SLOAD));
                }
                ops.push(AsmOp::Op(op::GAS));
                ops.push(AsmOp::Op(op::CALL));
                ops.push(AsmOp::Op(op::POP));
            }
        }
        // chain to the next block
        ops.push(AsmOp::PushLabel(next_label));
        ops.push(AsmOp::Op(op::JUMP));
        body_blocks.push(AsmBlock::new(label, true, ops));
    }

    // epilogue
    let epilogue_ops = match knobs.return_style {
        0 => vec![AsmOp::Op(op::STOP)],
        1 => vec![
            AsmOp::push_u64(1),
            AsmOp::push_u64(knobs.scratch),
            AsmOp::Op(op::MSTORE),
            AsmOp::push_u64(0x20),
            AsmOp::push_u64(knobs.scratch),
            AsmOp::Op(op::RETURN),
        ],
        _ => vec![AsmOp::push_u64(0), AsmOp::Op(op::DUP1), AsmOp::Op(op::RETURN)],
    };
    body_blocks.push(AsmBlock::new(next_label, true, epilogue_ops));

    if guard_used {
        let panic_ops = match knobs.panic_style {
            0 => vec![AsmOp::Op(op::INVALID)],
            1 => vec![AsmOp::push_u64(0), AsmOp::push_u64(0), AsmOp::Op(op::REVERT)],
            _ => vec![
                AsmOp::Push(PANIC_WORD.to_vec()),
                AsmOp::push_u64(0),
                AsmOp::Op(op::MSTORE),
                AsmOp::push_u64(0x20),
                AsmOp::push_u64(0),
                AsmOp::Op(op::REVERT),
            ],
        };
        blocks.push(AsmBlock::new(PANIC, true, panic_ops));
    }
    blocks.extend(body_blocks);

    let mut program = Program::new(blocks);
    if knobs.widen_pushes {
        widen_pushes(&mut program, rng);
    }
    if knobs.reorder {
        reorder_blocks(&mut program, rng);
    }
    program
}

/// Re-encodes some push immediates one byte wider; values are unchanged.
/// The entry block is left alone so the dispatcher keeps its exact PUSH4
/// comparison shape.
pub fn widen_pushes(program: &mut Program, rng: &mut ChaCha12Rng) {
    for block in program.blocks.iter_mut().skip(1) {
        for op_ in &mut block.ops {
            if let AsmOp::Push(data) = op_ {
                if data.len() < 32 && rng.random::<f64>() < 0.4 {
                    data.insert(0, 0);
                }
            }
        }
    }
}

/// Permutes layout chains (maximal runs glued by fall-through), keeping the
/// entry chain first. Label fix-up happens at assembly time.
pub fn reorder_blocks(program: &mut Program, rng: &mut ChaCha12Rng) {
    let mut chains: Vec<Vec<AsmBlock>> = Vec::new();
    let mut current: Vec<AsmBlock> = Vec::new();
    for block in program.blocks.drain(..) {
        let glue = block.falls_through();
        current.push(block);
        if !glue {
            chains.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        chains.push(current);
    }
    if chains.len() > 2 {
        let mut tail: Vec<Vec<AsmBlock>> = chains.drain(1..).collect();
        tail.shuffle(rng);
        chains.extend(tail);
    }
    program.blocks = chains.into_iter().flatten().collect();
}

/// All contracts of the synthetic corpus.
pub fn generate_contracts(cfg: &SynthConfig) -> Vec<SynthContract> {
    let pools = pools(cfg.seed);
    let mut out = Vec::with_capacity(cfg.n_classes * cfg.variants_per_class);
    for class in 0..cfg.n_classes {
        let bp = blueprint(class, cfg.seed, &pools);
        for variant in 0..cfg.variants_per_class {
            let k = knobs(class, variant, cfg.seed);
            let mut rng = sub_rng(cfg.seed, &format!("mutate/{class}/{variant}"));
            let program = codegen(&bp, &k, &mut rng);
            let bytes = program.assemble().expect("synthetic programs always assemble");
            let class_id = format!("src{class:03}");
            let variant_id = format!("v{variant}");
            out.push(SynthContract {
                class_id: class_id.clone(),
                variant_id: variant_id.clone(),
                selector: bp.selector,
                bytecode: Bytecode::new(bytes, format!("{class_id}_{variant_id}")),
            });
        }
    }
    out
}

/// Generates, extracts and packages the corpus as labeled entries. The
/// entry graph is the one behind the contract's external selector.
pub fn build_corpus(cfg: &SynthConfig) -> Vec<CorpusEntry> {
    let mut entries = Vec::new();
    for contract in generate_contracts(cfg) {
        let extracted = extract_contract(&contract.bytecode)
            .expect("synthetic contracts extract cleanly");
        let wanted = FunctionId::Selector(contract.selector);
        let ssg = extracted
            .functions
            .into_iter()
            .find(|(fid, _)| *fid == wanted)
            .map(|(_, g)| g)
            .expect("the generated selector always dispatches");
        entries.push(CorpusEntry {
            source_function_id: contract.class_id,
            variant_id: contract.variant_id,
            ssg,
        });
    }
    entries
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_shape_and_determinism() {
        let cfg = SynthConfig { n_classes: 3, variants_per_class: 2, seed: 11 };
        let a = generate_contracts(&cfg);
        let b = generate_contracts(&cfg);
        assert_eq!(a.len(), 6);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.bytecode.bytes(), y.bytecode.bytes());
        }
        // variants differ at the byte level
        assert_ne!(a[0].bytecode.bytes(), a[1].bytecode.bytes());
    }

    #[test]
    fn every_contract_extracts_with_its_selector() {
        let cfg = SynthConfig { n_classes: 4, variants_per_class: 3, seed: 23 };
        let entries = build_corpus(&cfg);
        assert_eq!(entries.len(), 12);
        for e in &entries {
            assert!(e.ssg.node_count() >= 2, "degenerate synthetic graph: {}", e.ssg);
            e.ssg.validate().unwrap();
        }
    }
}
