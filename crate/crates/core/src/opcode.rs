//! EVM opcode table: names, stack arity, push widths and the stable-instruction
//! classification used to pick control nodes out of an instruction stream.

use serde::{Deserialize, Serialize};

pub type OpCode = u8;

pub const STOP: OpCode = 0x00;
pub const ADD: OpCode = 0x01;
pub const MUL: OpCode = 0x02;
pub const SUB: OpCode = 0x03;
pub const DIV: OpCode = 0x04;
pub const EQ: OpCode = 0x14;
pub const ISZERO: OpCode = 0x15;
pub const AND: OpCode = 0x16;
pub const SHR: OpCode = 0x1c;
pub const KECCAK256: OpCode = 0x20;
pub const ADDRESS: OpCode = 0x30;
pub const BALANCE: OpCode = 0x31;
pub const ORIGIN: OpCode = 0x32;
pub const CALLER: OpCode = 0x33;
pub const CALLVALUE: OpCode = 0x34;
pub const CALLDATALOAD: OpCode = 0x35;
pub const CALLDATASIZE: OpCode = 0x36;
pub const CALLDATACOPY: OpCode = 0x37;
pub const CODESIZE: OpCode = 0x38;
pub const CODECOPY: OpCode = 0x39;
pub const GASPRICE: OpCode = 0x3a;
pub const RETURNDATASIZE: OpCode = 0x3d;
pub const RETURNDATACOPY: OpCode = 0x3e;
pub const COINBASE: OpCode = 0x41;
pub const TIMESTAMP: OpCode = 0x42;
pub const NUMBER: OpCode = 0x43;
pub const PREVRANDAO: OpCode = 0x44;
pub const GASLIMIT: OpCode = 0x45;
pub const CHAINID: OpCode = 0x46;
pub const SELFBALANCE: OpCode = 0x47;
pub const BASEFEE: OpCode = 0x48;
pub const BLOBBASEFEE: OpCode = 0x4a;
pub const POP: OpCode = 0x50;
pub const MLOAD: OpCode = 0x51;
pub const MSTORE: OpCode = 0x52;
pub const MSTORE8: OpCode = 0x53;
pub const SLOAD: OpCode = 0x54;
pub const SSTORE: OpCode = 0x55;
pub const JUMP: OpCode = 0x56;
pub const JUMPI: OpCode = 0x57;
pub const GAS: OpCode = 0x5a;
pub const JUMPDEST: OpCode = 0x5b;
pub const MCOPY: OpCode = 0x5e;
pub const PUSH0: OpCode = 0x5f;
pub const PUSH1: OpCode = 0x60;
pub const PUSH2: OpCode = 0x61;
pub const PUSH4: OpCode = 0x63;
pub const PUSH32: OpCode = 0x7f;
pub const DUP1: OpCode = 0x80;
pub const DUP16: OpCode = 0x8f;
pub const SWAP1: OpCode = 0x90;
pub const SWAP16: OpCode = 0x9f;
pub const LOG0: OpCode = 0xa0;
pub const LOG1: OpCode = 0xa1;
pub const LOG4: OpCode = 0xa4;
pub const CREATE: OpCode = 0xf0;
pub const CALL: OpCode = 0xf1;
pub const CALLCODE: OpCode = 0xf2;
pub const RETURN: OpCode = 0xf3;
pub const DELEGATECALL: OpCode = 0xf4;
pub const CREATE2: OpCode = 0xf5;
pub const STATICCALL: OpCode = 0xfa;
pub const REVERT: OpCode = 0xfd;
pub const INVALID: OpCode = 0xfe;
pub const SELFDESTRUCT: OpCode = 0xff;

#[rustfmt::skip]
const NAMES: [&str; 256] = [
    "STOP","ADD","MUL","SUB","DIV","SDIV","MOD","SMOD","ADDMOD","MULMOD","EXP","SIGNEXTEND","?","?","?","?",
    "LT","GT","SLT","SGT","EQ","ISZERO","AND","OR","XOR","NOT","BYTE","SHL","SHR","SAR","?","?",
    "KECCAK256","?","?","?","?","?","?","?","?","?","?","?","?","?","?","?",
    "ADDRESS","BALANCE","ORIGIN","CALLER","CALLVALUE","CALLDATALOAD","CALLDATASIZE","CALLDATACOPY","CODESIZE","CODECOPY","GASPRICE","EXTCODESIZE","EXTCODECOPY","RETURNDATASIZE","RETURNDATACOPY","EXTCODEHASH",
    "BLOCKHASH","COINBASE","TIMESTAMP","NUMBER","PREVRANDAO","GASLIMIT","CHAINID","SELFBALANCE","BASEFEE","BLOBHASH","BLOBBASEFEE","?","?","?","?","?",
    "POP","MLOAD","MSTORE","MSTORE8","SLOAD","SSTORE","JUMP","JUMPI","PC","MSIZE","GAS","JUMPDEST","TLOAD","TSTORE","MCOPY","PUSH0",
    "PUSH1","PUSH2","PUSH3","PUSH4","PUSH5","PUSH6","PUSH7","PUSH8","PUSH9","PUSH10","PUSH11","PUSH12","PUSH13","PUSH14","PUSH15","PUSH16",
    "PUSH17","PUSH18","PUSH19","PUSH20","PUSH21","PUSH22","PUSH23","PUSH24","PUSH25","PUSH26","PUSH27","PUSH28","PUSH29","PUSH30","PUSH31","PUSH32",
    "DUP1","DUP2","DUP3","DUP4","DUP5","DUP6","DUP7","DUP8","DUP9","DUP10","DUP11","DUP12","DUP13","DUP14","DUP15","DUP16",
    "SWAP1","SWAP2","SWAP3","SWAP4","SWAP5","SWAP6","SWAP7","SWAP8","SWAP9","SWAP10","SWAP11","SWAP12","SWAP13","SWAP14","SWAP15","SWAP16",
    "LOG0","LOG1","LOG2","LOG3","LOG4","?","?","?","?","?","?","?","?","?","?","?",
    "?","?","?","?","?","?","?","?","?","?","?","?","?","?","?","?",
    "?","?","?","?","?","?","?","?","?","?","?","?","?","?","?","?",
    "?","?","?","?","?","?","?","?","?","?","?","?","?","?","?","?",
    "?","?","?","?","?","?","?","?","?","?","?","?","?","?","?","?",
    "CREATE","CALL","CALLCODE","RETURN","DELEGATECALL","CREATE2","?","?","?","?","STATICCALL","?","?","REVERT","INVALID","SELFDESTRUCT",
];

pub fn name(op: OpCode) -> &'static str {
    NAMES[op as usize]
}

/// An opcode is defined iff it has a name in the current instruction set.
/// Undefined opcodes behave like INVALID: one byte, halting.
pub fn is_defined(op: OpCode) -> bool {
    NAMES[op as usize] != "?"
}

/// Width of the immediate operand for PUSH1..PUSH32, otherwise `None`.
/// PUSH0 carries no immediate.
pub fn push_width(op: OpCode) -> Option<usize> {
    if (PUSH1..=PUSH32).contains(&op) {
        Some((op - PUSH1) as usize + 1)
    } else {
        None
    }
}

/// Stack items consumed and produced. DUPn is reported as (n, n+1) and
/// SWAPn as (n+1, n+1); the simulator treats both specially anyway.
/// Undefined opcodes report (0, 0).
pub fn stack_arity(op: OpCode) -> (usize, usize) {
    match op {
        STOP => (0, 0),
        0x01..=0x07 => (2, 1),           // ADD..SMOD
        0x08 | 0x09 => (3, 1),           // ADDMOD, MULMOD
        0x0a | 0x0b => (2, 1),           // EXP, SIGNEXTEND
        0x10..=0x14 => (2, 1),           // LT..EQ
        ISZERO => (1, 1),
        0x16..=0x18 => (2, 1),           // AND, OR, XOR
        0x19 => (1, 1),                  // NOT
        0x1a..=0x1d => (2, 1),           // BYTE, SHL, SHR, SAR
        KECCAK256 => (2, 1),
        ADDRESS => (0, 1),
        BALANCE => (1, 1),
        ORIGIN | CALLER | CALLVALUE => (0, 1),
        CALLDATALOAD => (1, 1),
        CALLDATASIZE => (0, 1),
        CALLDATACOPY => (3, 0),
        CODESIZE => (0, 1),
        CODECOPY => (3, 0),
        GASPRICE => (0, 1),
        0x3b => (1, 1),                  // EXTCODESIZE
        0x3c => (4, 0),                  // EXTCODECOPY
        RETURNDATASIZE => (0, 1),
        RETURNDATACOPY => (3, 0),
        0x3f => (1, 1),                  // EXTCODEHASH
        0x40 => (1, 1),                  // BLOCKHASH
        0x41..=0x48 => (0, 1),           // COINBASE..BASEFEE
        0x49 => (1, 1),                  // BLOBHASH
        BLOBBASEFEE => (0, 1),
        POP => (1, 0),
        MLOAD => (1, 1),
        MSTORE | MSTORE8 => (2, 0),
        SLOAD => (1, 1),
        SSTORE => (2, 0),
        JUMP => (1, 0),
        JUMPI => (2, 0),
        0x58..=0x5a => (0, 1),           // PC, MSIZE, GAS
        JUMPDEST => (0, 0),
        0x5c => (1, 1),                  // TLOAD
        0x5d => (2, 0),                  // TSTORE
        MCOPY => (3, 0),
        PUSH0..=PUSH32 => (0, 1),
        0x80..=0x8f => {
            let n = (op - DUP1) as usize + 1;
            (n, n + 1)
        }
        0x90..=0x9f => {
            let n = (op - SWAP1) as usize + 2;
            (n, n)
        }
        0xa0..=0xa4 => ((op - LOG0) as usize + 2, 0),
        CREATE => (3, 1),
        CALL | CALLCODE => (7, 1),
        RETURN => (2, 0),
        DELEGATECALL => (6, 1),
        CREATE2 => (4, 1),
        STATICCALL => (6, 1),
        REVERT => (2, 0),
        SELFDESTRUCT => (1, 0),
        _ => (0, 0),
    }
}

/// Ends a basic block: jumps, halts and every undefined opcode (which the
/// EVM treats as INVALID).
pub fn is_terminator(op: OpCode) -> bool {
    matches!(
        op,
        JUMP | JUMPI | STOP | RETURN | REVERT | INVALID | SELFDESTRUCT
    ) || !is_defined(op)
}

/// Halts execution with no successor (everything in `is_terminator` except
/// the jumps).
pub fn is_halt(op: OpCode) -> bool {
    is_terminator(op) && op != JUMP && op != JUMPI
}

/// The four stable control-node categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StableCategory {
    Storage,
    Log,
    Call,
    Return,
}

impl StableCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            StableCategory::Storage => "storage",
            StableCategory::Log => "log",
            StableCategory::Call => "call",
            StableCategory::Return => "return",
        }
    }
}

/// Category of a stable instruction, or `None` for everything else.
///
/// Storage: SSTORE, SLOAD. Log: LOG0..LOG4. Call: CALL, STATICCALL, BALANCE,
/// DELEGATECALL. Return: RETURN, SELFDESTRUCT, REVERT, INVALID (the historic
/// `throw`), STOP.
pub fn classify_stable(op: OpCode) -> Option<StableCategory> {
    match op {
        SSTORE | SLOAD => Some(StableCategory::Storage),
        LOG0..=LOG4 => Some(StableCategory::Log),
        CALL | STATICCALL | BALANCE | DELEGATECALL => Some(StableCategory::Call),
        RETURN | SELFDESTRUCT | REVERT | INVALID | STOP => Some(StableCategory::Return),
        _ => None,
    }
}

/// Zero-operand reads whose value is fixed for the duration of a transaction.
/// These become Information source nodes during taint analysis.
pub fn is_transaction_constant(op: OpCode) -> bool {
    matches!(
        op,
        ADDRESS
            | ORIGIN
            | CALLER
            | CALLVALUE
            | CALLDATASIZE
            | CODESIZE
            | GASPRICE
            | COINBASE
            | TIMESTAMP
            | NUMBER
            | PREVRANDAO
            | GASLIMIT
            | CHAINID
            | SELFBALANCE
            | BASEFEE
            | BLOBBASEFEE
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_set_is_exactly_sixteen_opcodes() {
        let stable: Vec<u8> = (0u16..256)
            .map(|x| x as u8)
            .filter(|&op| classify_stable(op).is_some())
            .collect();
        assert_eq!(stable.len(), 16);
        let expected: Vec<u8> = vec![
            STOP, BALANCE, SLOAD, SSTORE, 0xa0, 0xa1, 0xa2, 0xa3, 0xa4, CALL, RETURN,
            DELEGATECALL, STATICCALL, REVERT, INVALID, SELFDESTRUCT,
        ];
        assert_eq!(stable, expected);
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_stable(0x55), Some(StableCategory::Storage));
        assert_eq!(classify_stable(0xa3), Some(StableCategory::Log));
        assert_eq!(classify_stable(0x01), None);
        assert_eq!(classify_stable(CALLCODE), None);
    }

    #[test]
    fn push_widths() {
        assert_eq!(push_width(PUSH1), Some(1));
        assert_eq!(push_width(PUSH32), Some(32));
        assert_eq!(push_width(PUSH0), None);
        assert_eq!(push_width(ADD), None);
    }

    #[test]
    fn undefined_opcodes_are_halting_terminators() {
        assert!(is_terminator(0x0c));
        assert!(is_halt(0x0c));
        assert!(is_terminator(0xef));
        assert!(!is_terminator(ADD));
        assert!(is_terminator(JUMP));
        assert!(!is_halt(JUMP));
    }
}
