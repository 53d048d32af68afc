//! Raw runtime bytecode handling: hex parsing, CBOR metadata-trailer
//! stripping and disassembly into an instruction stream.
//!
//! Inputs are runtime (deployed) code. Constructor code is not handled here;
//! callers must strip it before handing bytes in.

use std::fmt;

use crate::opcode::{self, OpCode};

/// EVM code size cap (EIP-170). Inputs longer than this after metadata
/// stripping are rejected.
pub const MAX_CODE_SIZE: usize = 24_576;

/// Runtime bytecode plus an opaque origin tag (address or file name).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bytecode {
    bytes: Vec<u8>,
    origin_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BytecodeError {
    /// Code longer than `MAX_CODE_SIZE` after metadata stripping.
    InputTooLarge { len: usize },
    /// Hex input malformed (odd length or a non-hex character).
    BadHex(String),
}

impl fmt::Display for BytecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BytecodeError::InputTooLarge { len } => {
                write!(f, "code is {len} bytes, exceeding the {MAX_CODE_SIZE}-byte limit")
            }
            BytecodeError::BadHex(msg) => write!(f, "malformed hex input: {msg}"),
        }
    }
}

impl std::error::Error for BytecodeError {}

impl Bytecode {
    pub fn new(bytes: Vec<u8>, origin_id: impl Into<String>) -> Self {
        Bytecode { bytes, origin_id: origin_id.into() }
    }

    /// Parses hex text: optional `0x` prefix, upper or lower case, any
    /// whitespace ignored.
    pub fn from_hex_str(text: &str, origin_id: impl Into<String>) -> Result<Self, BytecodeError> {
        let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        let stripped = compact.strip_prefix("0x").or_else(|| compact.strip_prefix("0X")).unwrap_or(&compact);
        if stripped.len() % 2 != 0 {
            return Err(BytecodeError::BadHex("odd number of hex digits".into()));
        }
        let bytes = hex::decode(stripped).map_err(|e| BytecodeError::BadHex(e.to_string()))?;
        Ok(Bytecode::new(bytes, origin_id))
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    pub fn origin_id(&self) -> &str {
        &self.origin_id
    }
}

/// One decoded instruction. `push_data` is present exactly for PUSH1..PUSH32
/// and is zero-padded when the stream truncates mid-immediate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instruction {
    pub offset: usize,
    pub opcode: OpCode,
    pub push_data: Option<Vec<u8>>,
}

impl Instruction {
    /// Total encoded size in bytes (opcode plus immediate).
    pub fn size(&self) -> usize {
        1 + self.push_data.as_ref().map_or(0, |d| d.len())
    }

    /// Immediate interpreted as a big-endian integer, when it fits in usize.
    pub fn push_value_usize(&self) -> Option<usize> {
        let data = self.push_data.as_ref()?;
        let mut v: usize = 0;
        for &b in data {
            v = v.checked_mul(256)?.checked_add(b as usize)?;
        }
        Some(v)
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#06x}: {}", self.offset, opcode::name(self.opcode))?;
        if let Some(data) = &self.push_data {
            write!(f, " 0x{}", hex::encode(data))?;
        }
        Ok(())
    }
}

/// Removes a Solidity CBOR metadata trailer when present.
///
/// The trailer is `<L bytes of CBOR map> <2-byte big-endian L>`. The CBOR
/// segment must decode as a single complete map filling exactly L bytes;
/// anything else leaves the input untouched.
pub fn strip_metadata(code: &Bytecode) -> Bytecode {
    let bytes = code.bytes();
    let n = bytes.len();
    if n < 2 {
        return code.clone();
    }
    let footer_len = ((bytes[n - 2] as usize) << 8) | bytes[n - 1] as usize;
    if footer_len == 0 || footer_len + 2 > n {
        return code.clone();
    }
    let cbor = &bytes[n - 2 - footer_len..n - 2];
    if cbor_is_single_map(cbor) {
        Bytecode::new(bytes[..n - 2 - footer_len].to_vec(), code.origin_id())
    } else {
        code.clone()
    }
}

/// True iff `data` is exactly one well-formed CBOR map (the shape solc
/// emits: a map of short strings to byte/text strings or small ints).
fn cbor_is_single_map(data: &[u8]) -> bool {
    if data.is_empty() || data[0] >> 5 != 5 {
        return false;
    }
    matches!(cbor_skip_item(data, 0), Some(end) if end == data.len())
}

/// Returns the offset just past the CBOR item starting at `pos`, or `None`
/// if malformed. Handles the definite-length subset solc produces.
fn cbor_skip_item(data: &[u8], pos: usize) -> Option<usize> {
    let head = *data.get(pos)?;
    let major = head >> 5;
    let minor = head & 0x1f;
    let mut p = pos + 1;
    let arg: u64 = match minor {
        0..=23 => minor as u64,
        24 => {
            let v = *data.get(p)? as u64;
            p += 1;
            v
        }
        25 => {
            let v = ((*data.get(p)? as u64) << 8) | *data.get(p + 1)? as u64;
            p += 2;
            v
        }
        26 => {
            let mut v = 0u64;
            for i in 0..4 {
                v = (v << 8) | *data.get(p + i)? as u64;
            }
            p += 4;
            v
        }
        27 => {
            let mut v = 0u64;
            for i in 0..8 {
                v = (v << 8) | *data.get(p + i)? as u64;
            }
            p += 8;
            v
        }
        _ => return None, // indefinite lengths never appear in solc metadata
    };
    match major {
        0 | 1 => Some(p),                     // integers
        2 | 3 => p.checked_add(arg as usize).filter(|&e| e <= data.len()), // strings
        4 => {
            let mut q = p;
            for _ in 0..arg {
                q = cbor_skip_item(data, q)?;
            }
            Some(q)
        }
        5 => {
            let mut q = p;
            for _ in 0..arg {
                q = cbor_skip_item(data, q)?;
                q = cbor_skip_item(data, q)?;
            }
            Some(q)
        }
        7 => Some(p), // simple values / floats with the arg already consumed
        _ => None,
    }
}

/// Decodes the full byte range into instructions. Every byte belongs to
/// exactly one instruction; undefined opcodes decode as one-byte
/// INVALID-class instructions; a PUSH immediate truncated by the end of the
/// stream is zero-padded to its declared width.
pub fn disassemble(code: &Bytecode) -> Result<Vec<Instruction>, BytecodeError> {
    let bytes = code.bytes();
    if bytes.len() > MAX_CODE_SIZE {
        return Err(BytecodeError::InputTooLarge { len: bytes.len() });
    }
    let mut out = Vec::new();
    let mut offset = 0usize;
    while offset < bytes.len() {
        let op = bytes[offset];
        let push_data = opcode::push_width(op).map(|w| {
            let start = offset + 1;
            let avail = bytes.len().saturating_sub(start).min(w);
            let mut data = bytes[start..start + avail].to_vec();
            data.resize(w, 0);
            data
        });
        let insn = Instruction { offset, opcode: op, push_data };
        offset += insn.size();
        out.push(insn);
    }
    Ok(out)
}

/// Re-encodes an instruction list. Inverse of `disassemble` except that
/// truncated trailing PUSH data comes back zero-padded.
pub fn assemble(instructions: &[Instruction]) -> Vec<u8> {
    let mut out = Vec::new();
    for insn in instructions {
        out.push(insn.opcode);
        if let Some(data) = &insn.push_data {
            out.extend_from_slice(data);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opcode::{PUSH1, SSTORE};

    /// Independently transcribed opcode facts used as a decode oracle:
    /// (byte, mnemonic, immediate width).
    #[rustfmt::skip]
    const ORACLE: &[(u8, &str, usize)] = &[
        (0x00, "STOP", 0), (0x01, "ADD", 0), (0x14, "EQ", 0), (0x16, "AND", 0),
        (0x20, "KECCAK256", 0), (0x33, "CALLER", 0), (0x35, "CALLDATALOAD", 0),
        (0x51, "MLOAD", 0), (0x52, "MSTORE", 0), (0x54, "SLOAD", 0), (0x55, "SSTORE", 0),
        (0x56, "JUMP", 0), (0x57, "JUMPI", 0), (0x5b, "JUMPDEST", 0), (0x5f, "PUSH0", 0),
        (0x60, "PUSH1", 1), (0x61, "PUSH2", 2), (0x63, "PUSH4", 4), (0x7f, "PUSH32", 32),
        (0x80, "DUP1", 0), (0x90, "SWAP1", 0), (0xa0, "LOG0", 0), (0xa4, "LOG4", 0),
        (0xf1, "CALL", 0), (0xf3, "RETURN", 0), (0xfa, "STATICCALL", 0),
        (0xfd, "REVERT", 0), (0xfe, "INVALID", 0), (0xff, "SELFDESTRUCT", 0),
    ];

    #[test]
    fn oracle_agrees_with_main_table() {
        for &(op, mnemonic, width) in ORACLE {
            assert_eq!(crate::opcode::name(op), mnemonic, "name of {op:#04x}");
            assert_eq!(
                crate::opcode::push_width(op).unwrap_or(0),
                width,
                "push width of {op:#04x}"
            );
        }
    }

    #[test]
    fn empty_input_decodes_to_empty_list() {
        let code = Bytecode::new(vec![], "t");
        assert!(disassemble(&code).unwrap().is_empty());
    }

    #[test]
    fn decode_push_store_sequence() {
        // 0x6001600255: PUSH1 0x01, PUSH1 0x02, SSTORE
        let code = Bytecode::from_hex_str("0x6001600255", "t").unwrap();
        let insns = disassemble(&code).unwrap();
        assert_eq!(insns.len(), 3);
        assert_eq!((insns[0].offset, insns[0].opcode), (0, PUSH1));
        assert_eq!(insns[0].push_data.as_deref(), Some(&[0x01][..]));
        assert_eq!((insns[1].offset, insns[1].opcode), (2, PUSH1));
        assert_eq!(insns[1].push_data.as_deref(), Some(&[0x02][..]));
        assert_eq!((insns[2].offset, insns[2].opcode), (4, SSTORE));
        // cross-check against the oracle table
        for insn in &insns {
            let entry = ORACLE.iter().find(|e| e.0 == insn.opcode).unwrap();
            assert_eq!(insn.push_data.as_ref().map_or(0, |d| d.len()), entry.2);
        }
    }

    #[test]
    fn truncated_push_is_zero_padded() {
        let code = Bytecode::from_hex_str("60", "t").unwrap();
        let insns = disassemble(&code).unwrap();
        assert_eq!(insns.len(), 1);
        assert_eq!(insns[0].push_data.as_deref(), Some(&[0x00][..]));
        // round-trip re-serializes the padded form
        assert_eq!(assemble(&insns), vec![0x60, 0x00]);
    }

    #[test]
    fn contiguous_coverage_and_round_trip() {
        use rand::{RngCore, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        for _ in 0..200 {
            let len = (rng.next_u32() % 512) as usize;
            let mut bytes = vec![0u8; len];
            rng.fill_bytes(&mut bytes);
            let code = Bytecode::new(bytes.clone(), "fuzz");
            let insns = disassemble(&code).unwrap();
            let mut expect = 0usize;
            for insn in &insns {
                assert_eq!(insn.offset, expect);
                expect += insn.size();
            }
            assert!(expect >= len);
            let reassembled = assemble(&insns);
            assert_eq!(&reassembled[..len], &bytes[..]);
            // any extra bytes come from zero-padding a trailing PUSH
            assert!(reassembled[len..].iter().all(|&b| b == 0));
        }
    }

    #[test]
    fn size_limit_enforced() {
        let code = Bytecode::new(vec![0x00; MAX_CODE_SIZE + 1], "t");
        assert!(matches!(
            disassemble(&code),
            Err(BytecodeError::InputTooLarge { .. })
        ));
        let ok = Bytecode::new(vec![0x00; MAX_CODE_SIZE], "t");
        assert!(disassemble(&ok).is_ok());
    }

    /// Minimal independent CBOR map writer for trailer fixtures.
    fn cbor_map(pairs: &[(&str, &[u8])]) -> Vec<u8> {
        assert!(pairs.len() < 24);
        let mut out = vec![0xa0 | pairs.len() as u8];
        for (k, v) in pairs {
            assert!(k.len() < 24);
            out.push(0x60 | k.len() as u8); // text string
            out.extend_from_slice(k.as_bytes());
            if v.len() < 24 {
                out.push(0x40 | v.len() as u8); // byte string
            } else {
                out.push(0x58);
                out.push(v.len() as u8);
            }
            out.extend_from_slice(v);
        }
        out
    }

    #[test]
    fn strips_solc_style_trailer() {
        let body = vec![0x60, 0x01, 0x60, 0x02, 0x55, 0x00];
        let trailer = cbor_map(&[("ipfs", &[0xaa; 34]), ("solc", &[0x00, 0x08, 0x14])]);
        assert_eq!(trailer.len(), 51, "fixture matches the common solc trailer size");
        let mut bytes = body.clone();
        bytes.extend_from_slice(&trailer);
        bytes.extend_from_slice(&(trailer.len() as u16).to_be_bytes());
        let stripped = strip_metadata(&Bytecode::new(bytes, "t"));
        assert_eq!(stripped.bytes(), &body[..]);
    }

    #[test]
    fn no_trailer_is_untouched() {
        let code = Bytecode::from_hex_str("6001600255", "t").unwrap();
        assert_eq!(strip_metadata(&code), code);
    }

    #[test]
    fn oversized_footer_length_is_ignored() {
        // footer claims 0xffff bytes of CBOR; far longer than the code
        let code = Bytecode::new(vec![0x00, 0x01, 0xff, 0xff], "t");
        assert_eq!(strip_metadata(&code), code);
    }

    #[test]
    fn non_cbor_tail_is_ignored() {
        // footer length 2, but the two preceding bytes are not a CBOR map
        let code = Bytecode::new(vec![0x60, 0x01, 0x55, 0x00, 0x00, 0x02], "t");
        assert_eq!(strip_metadata(&code), code);
    }

    #[test]
    fn hex_parsing_variants() {
        for text in ["0x6001", "6001", "0X6001", "60 01", "60\n01\t"] {
            let code = Bytecode::from_hex_str(text, "t").unwrap();
            assert_eq!(code.bytes(), &[0x60, 0x01]);
        }
        assert!(Bytecode::from_hex_str("601", "t").is_err());
        assert!(Bytecode::from_hex_str("60zz", "t").is_err());
    }
}
