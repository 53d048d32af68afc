//! Extraction accuracy on the hand-labeled fixture suite, plus the
//! cross-module behaviors that need real contracts: block cloning, the
//! budget guard, and the path-enumeration oracle for stable control flow.

use std::collections::BTreeSet;

use esim_core::asm::{AsmBlock, AsmOp, Program};
use esim_core::bytecode::Bytecode;
use esim_core::cfg::{get_cfg, get_predecessors, sim, CfgNode, Contract, FunctionCfg, FunctionId};
use esim_core::fixtures::{self, render, set_f1};
use esim_core::opcode as op;
use esim_core::ssg::{
    construct_scfg, extract_contract, get_stable_stmts, scfg_for_cfg, Relation,
};

#[test]
fn all_fixtures_validate_and_match_labels_exactly() {
    for fixture in fixtures::all() {
        let extracted = extract_contract(&fixture.bytecode)
            .unwrap_or_else(|e| panic!("{}: extraction failed: {e}", fixture.name));
        for labels in &fixture.functions {
            let (_, ssg) = extracted
                .functions
                .iter()
                .find(|(fid, _)| *fid == labels.function)
                .unwrap_or_else(|| panic!("{}: function {} missing", fixture.name, labels.function));
            ssg.validate().unwrap_or_else(|e| panic!("{}: invalid ssg: {e}", fixture.name));
            let got = render(ssg, &fixture.bytecode);

            let want_nodes: BTreeSet<String> = labels.scfg_nodes.iter().cloned().collect();
            assert_eq!(
                got.nodes, want_nodes,
                "{}/{}: control node mismatch",
                fixture.name, labels.function
            );
            let want_edges: BTreeSet<(String, String)> =
                labels.scfg_edges.iter().cloned().collect();
            let (f1, _, _, _) = set_f1(&want_edges, &got.scfg_edges);
            assert_eq!(
                f1, 1.0,
                "{}/{}: scfg edges differ\n want {want_edges:?}\n got {:?}",
                fixture.name, labels.function, got.scfg_edges
            );

            let want_cd: BTreeSet<(String, String)> = labels.cd_edges.iter().cloned().collect();
            let want_dd: BTreeSet<(String, String)> = labels.dd_edges.iter().cloned().collect();
            assert_eq!(
                got.cd_edges, want_cd,
                "{}/{}: cd edges differ",
                fixture.name, labels.function
            );
            assert_eq!(
                got.dd_edges, want_dd,
                "{}/{}: dd edges differ",
                fixture.name, labels.function
            );
        }
    }
}

#[test]
fn shared_constant_slot_is_one_source_node() {
    let fixture = fixtures::all().into_iter().find(|f| f.name == "shared_const_dedupe").unwrap();
    let extracted = extract_contract(&fixture.bytecode).unwrap();
    let (_, ssg) = &extracted.functions[0];
    // 4 sinks + constants {0x0, 0x11, 0x22}: the slot constant is shared
    assert_eq!(ssg.data_nodes.len(), 7, "{ssg}");
}

#[test]
fn cloned_blocks_are_function_local() {
    let fixture = fixtures::all().into_iter().find(|f| f.name == "block_reuse").unwrap();
    let contract = Contract::analyze(&fixture.bytecode).unwrap();
    let sel_a = FunctionId::parse("0x11111111").unwrap();
    let sel_b = FunctionId::parse("0x22222222").unwrap();
    let cfg_a = get_cfg(&contract, sel_a).unwrap();
    let cfg_b = get_cfg(&contract, sel_b).unwrap();

    let shared_offset_a: Vec<&CfgNode> = cfg_a
        .nodes
        .iter()
        .filter(|n| n.instructions.iter().any(|i| i.opcode == op::SSTORE))
        .collect();
    let shared_offset_b: Vec<&CfgNode> = cfg_b
        .nodes
        .iter()
        .filter(|n| n.instructions.iter().any(|i| i.opcode == op::SSTORE))
        .collect();
    assert_eq!(shared_offset_a.len(), 1);
    assert_eq!(shared_offset_b.len(), 1);
    // same code offset, different clone context
    assert_eq!(shared_offset_a[0].start_offset(), shared_offset_b[0].start_offset());
    assert_ne!(shared_offset_a[0].key, shared_offset_b[0].key);
}

#[test]
fn jump_edges_target_jumpdest_blocks() {
    for fixture in fixtures::all() {
        let contract = Contract::analyze(&fixture.bytecode).unwrap();
        for function in contract.effective_functions().keys() {
            let cfg = get_cfg(&contract, *function).unwrap();
            for &(from, to) in &cfg.edges {
                let from_node = &cfg.nodes[from];
                let to_node = &cfg.nodes[to];
                let fall_through = from_node.instructions.last().map_or(true, |i| {
                    i.offset + i.size() == to_node.start_offset()
                });
                if !fall_through {
                    assert_eq!(
                        to_node.instructions[0].opcode,
                        op::JUMPDEST,
                        "{}: jump edge to non-jumpdest {:#x}",
                        fixture.name,
                        to_node.start_offset()
                    );
                }
            }
        }
    }
}

#[test]
fn identical_bytecode_yields_identical_graphs() {
    let fixture = fixtures::all().into_iter().find(|f| f.name == "swapped_blocks").unwrap();
    let a = extract_contract(&fixture.bytecode).unwrap();
    let b = extract_contract(&fixture.bytecode).unwrap();
    assert_eq!(a.functions.len(), b.functions.len());
    for ((fa, ga), (fb, gb)) in a.functions.iter().zip(&b.functions) {
        assert_eq!(fa, fb);
        assert_eq!(ga.to_json(), gb.to_json());
    }
}

#[test]
fn predecessors_match_reverse_adjacency_oracle() {
    use rand::Rng;
    let mut rng = esim_core::rng::sub_rng(17, "dag-test");
    // random 20-block DAG over synthetic nodes
    let n = 20;
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < 0.25 {
                edges.insert((i, j));
            }
        }
    }
    let nodes: Vec<CfgNode> = (0..n)
        .map(|i| CfgNode {
            key: (i, vec![]),
            instructions: vec![],
            terminator_kind: esim_core::cfg::TerminatorKind::Terminal,
            entry_state: sim::PathState::default(),
            unresolved_jump: false,
        })
        .collect();
    let cfg = FunctionCfg {
        function: FunctionId::Fallback,
        entry: 0,
        nodes,
        edges: edges.clone(),
        arena: sim::ValueArena::default(),
        budget_exceeded: false,
        unresolved_jumps: 0,
    };
    // independent reverse-adjacency map
    let mut reverse: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for &(from, to) in &edges {
        reverse[to].insert(from);
    }
    for block in 0..n {
        assert_eq!(get_predecessors(block, &cfg).unwrap(), reverse[block]);
    }
    assert!(get_predecessors(n + 1, &cfg).is_err());
    assert!(get_predecessors(0, &cfg).unwrap().is_empty());
}

/// Independent oracle for stable control flow edges: enumerate block paths
/// in the CFG and connect each block's last stable statement to the next
/// stable statement reachable through stable-free blocks, plus the
/// consecutive pairs within a block.
fn scfg_edges_by_path_enumeration(cfg: &FunctionCfg) -> BTreeSet<((usize, usize), (usize, usize))> {
    let stable: Vec<Vec<usize>> = cfg
        .nodes
        .iter()
        .map(|n| get_stable_stmts(&n.instructions).iter().map(|i| i.offset).collect())
        .collect();
    let mut out = BTreeSet::new();
    for (b, offs) in stable.iter().enumerate() {
        for w in offs.windows(2) {
            out.insert(((b, w[0]), (b, w[1])));
        }
    }
    // BFS from each block with stable stmts through stable-free blocks
    for (b, offs) in stable.iter().enumerate() {
        let Some(&last) = offs.last() else { continue };
        let mut queue: Vec<usize> = cfg.successors(b).into_iter().collect();
        let mut seen: BTreeSet<usize> = queue.iter().copied().collect();
        while let Some(next) = queue.pop() {
            if let Some(&first) = stable[next].first() {
                out.insert(((b, last), (next, first)));
            } else {
                for succ in cfg.successors(next) {
                    if seen.insert(succ) {
                        queue.push(succ);
                    }
                }
            }
        }
    }
    out
}

#[test]
fn scfg_equals_path_enumeration_oracle_on_fixtures() {
    for fixture in fixtures::all() {
        let contract = Contract::analyze(&fixture.bytecode).unwrap();
        for function in contract.effective_functions().keys() {
            let cfg = get_cfg(&contract, *function).unwrap();
            let scfg = scfg_for_cfg(&cfg);
            let got: BTreeSet<((usize, usize), (usize, usize))> = scfg
                .edges
                .iter()
                .filter(|e| e.rel == Relation::Cc)
                .map(|e| {
                    let a = &scfg.control_nodes[e.from];
                    let b = &scfg.control_nodes[e.to];
                    ((a.site.block, a.site.offset), (b.site.block, b.site.offset))
                })
                .collect();
            let want = scfg_edges_by_path_enumeration(&cfg);
            assert_eq!(got, want, "{}/{function}: oracle mismatch", fixture.name);
        }
    }
}

#[test]
fn resolve_pre_three_block_chain_and_cycle() {
    // A(SSTORE) -> B(no stable) -> C: querying C must surface A's store.
    const A: usize = 2;
    const B: usize = 3;
    const C: usize = 4;
    let blocks = vec![
        AsmBlock::new(
            0,
            false,
            vec![
                AsmOp::push_u64(0),
                AsmOp::Op(op::CALLDATALOAD),
                AsmOp::push_u64(0xe0),
                AsmOp::Op(op::SHR),
                AsmOp::Op(op::DUP1),
                AsmOp::Push(vec![0x11; 4]),
                AsmOp::Op(op::EQ),
                AsmOp::PushLabel(A),
                AsmOp::Op(op::JUMPI),
            ],
        ),
        AsmBlock::new(1, true, vec![AsmOp::push_u64(0), AsmOp::push_u64(0), AsmOp::Op(op::REVERT)]),
        AsmBlock::new(
            A,
            true,
            vec![
                AsmOp::push_u64(1),
                AsmOp::push_u64(0),
                AsmOp::Op(op::SSTORE),
                AsmOp::PushLabel(B),
                AsmOp::Op(op::JUMP),
            ],
        ),
        AsmBlock::new(B, true, vec![AsmOp::Op(op::POP), AsmOp::PushLabel(C), AsmOp::Op(op::JUMP)]),
        AsmBlock::new(C, true, vec![AsmOp::Op(op::STOP)]),
    ];
    let code = Bytecode::new(Program::new(blocks).assemble().unwrap(), "chain");
    let contract = Contract::analyze(&code).unwrap();
    let cfg = get_cfg(&contract, FunctionId::Selector([0x11; 4])).unwrap();

    let c_block = cfg
        .nodes
        .iter()
        .position(|n| n.instructions.first().map(|i| i.opcode) == Some(op::JUMPDEST)
            && n.instructions.len() == 2
            && n.instructions[1].opcode == op::STOP)
        .unwrap();
    let mut visited = BTreeSet::new();
    let pre = esim_core::ssg::resolve_pre_stable_stmts(c_block, &cfg, &mut visited);
    assert_eq!(pre.len(), 1, "one stable stmt reaches C");
    let (block, offset) = pre.into_iter().next().unwrap();
    assert_eq!(
        cfg.nodes[block].instructions.iter().find(|i| i.offset == offset).unwrap().opcode,
        op::SSTORE
    );

    // entry block has no predecessors
    let mut visited = BTreeSet::new();
    assert!(esim_core::ssg::resolve_pre_stable_stmts(cfg.entry, &cfg, &mut visited).is_empty());
}

#[test]
fn resolve_pre_terminates_on_stable_free_cycle() {
    // fallback-only code: 0: JUMPDEST ... jump 0 — a cycle with no stable stmts
    // plus an unknown-condition exit to a STOP so the cfg is finite.
    let code = Bytecode::from_hex_str("5b6000356001571b5b600056", "cycle").unwrap();
    // layout: 0 JUMPDEST, 1 PUSH1 00, 3 CALLDATALOAD, 4 PUSH1 01, 6 JUMPI,
    //         7 SHL (filler), 8 JUMPDEST, 9 PUSH1 00, b JUMP
    let contract = Contract::analyze(&code).unwrap();
    let cfg = get_cfg(&contract, FunctionId::Fallback).unwrap();
    for block in 0..cfg.nodes.len() {
        let mut visited = BTreeSet::new();
        let pre = esim_core::ssg::resolve_pre_stable_stmts(block, &cfg, &mut visited);
        assert!(pre.is_empty());
    }
}

#[test]
fn budget_guard_returns_partial_cfg() {
    // 24 two-way branches give ~F(24) > 10k distinct stack states
    let mut blocks = Vec::new();
    let n = 24usize;
    for i in 0..n {
        blocks.push(AsmBlock::new(
            i,
            true,
            vec![
                AsmOp::push_u64(0x10 + i as u64),
                AsmOp::push_u64(0),
                AsmOp::Op(op::CALLDATALOAD),
                AsmOp::PushLabel((i + 2).min(n)),
                AsmOp::Op(op::JUMPI),
            ],
        ));
    }
    blocks.push(AsmBlock::new(n, true, vec![AsmOp::Op(op::STOP)]));
    let code = Bytecode::new(Program::new(blocks).assemble().unwrap(), "bomb");
    let contract = Contract::analyze(&code).unwrap();
    let cfg = get_cfg(&contract, FunctionId::Fallback).unwrap();
    assert!(cfg.budget_exceeded, "state bomb must exhaust the visit budget");
    assert!(!cfg.nodes.is_empty(), "partial cfg is still returned");
    // extraction still succeeds, with a warning recorded
    let out = extract_contract(&code).unwrap();
    assert!(out.warnings.iter().any(|w| w.contains("budget")));
}

#[test]
fn construct_scfg_maps_every_function() {
    let fixture = fixtures::all().into_iter().find(|f| f.name == "three_functions").unwrap();
    let map = construct_scfg(&fixture.bytecode).unwrap();
    assert_eq!(map.len(), 4); // three selectors + fallback
    for ssg in map.values() {
        assert!(ssg.data_nodes.is_empty(), "scfg is the control part only");
        ssg.validate().unwrap();
    }
}

#[test]
fn dispatcher_selector_is_keccak_prefix_of_signature() {
    // independent hashing oracle for the approve selector used in fixtures
    use sha3::{Digest, Keccak256};
    let hash = Keccak256::digest(b"approve(address,uint256)");
    assert_eq!(&hash[..4], &[0x09, 0x5e, 0xa7, 0xb3]);

    let fixture = fixtures::all().into_iter().find(|f| f.name == "approve_like").unwrap();
    let table = esim_core::get_functions(&fixture.bytecode).unwrap();
    assert!(table.keys().any(|f| matches!(f, FunctionId::Selector(s) if s[..] == hash[..4])));
}
