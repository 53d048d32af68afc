//! 256-bit EVM stack word. Only the operations the abstract interpreter
//! models are provided: construction, bitwise AND and narrowing.

use std::fmt;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Word(pub [u8; 32]);

impl Word {
    pub const ZERO: Word = Word([0u8; 32]);

    pub fn from_u64(v: u64) -> Self {
        let mut w = [0u8; 32];
        w[24..].copy_from_slice(&v.to_be_bytes());
        Word(w)
    }

    /// Big-endian bytes, left-padded with zeros. Inputs longer than 32 bytes
    /// keep their least-significant 32.
    pub fn from_be_slice(bytes: &[u8]) -> Self {
        let mut w = [0u8; 32];
        if bytes.len() >= 32 {
            w.copy_from_slice(&bytes[bytes.len() - 32..]);
        } else {
            w[32 - bytes.len()..].copy_from_slice(bytes);
        }
        Word(w)
    }

    pub fn bitand(&self, other: &Word) -> Word {
        let mut w = [0u8; 32];
        for i in 0..32 {
            w[i] = self.0[i] & other.0[i];
        }
        Word(w)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&b| b == 0)
    }

    /// The value as usize when it fits, e.g. for jump targets.
    pub fn to_usize(&self) -> Option<usize> {
        if self.0[..24].iter().any(|&b| b != 0) {
            return None;
        }
        Some(u64::from_be_bytes(self.0[24..].try_into().unwrap()) as usize)
    }

    pub fn to_u64(&self) -> Option<u64> {
        self.to_usize().map(|v| v as u64)
    }

    /// Minimal lowercase hex with `0x` prefix ("0x0" for zero).
    pub fn to_hex(&self) -> String {
        let s = hex::encode(self.0);
        let trimmed = s.trim_start_matches('0');
        if trimmed.is_empty() {
            "0x0".to_string()
        } else {
            format!("0x{trimmed}")
        }
    }

    pub fn from_hex(text: &str) -> Option<Self> {
        let t = text.strip_prefix("0x")?;
        if t.is_empty() || t.len() > 64 {
            return None;
        }
        let padded = if t.len() % 2 == 1 { format!("0{t}") } else { t.to_string() };
        let bytes = hex::decode(padded).ok()?;
        Some(Word::from_be_slice(&bytes))
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_hex())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_hex())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        let w = Word::from_u64(0x095ea7b3);
        assert_eq!(w.to_hex(), "0x95ea7b3");
        assert_eq!(Word::from_hex("0x95ea7b3"), Some(w));
        assert_eq!(w.to_usize(), Some(0x095ea7b3));
        assert_eq!(Word::ZERO.to_hex(), "0x0");
        assert_eq!(Word::from_hex("0x0"), Some(Word::ZERO));
    }

    #[test]
    fn and_masks() {
        let a = Word::from_u64(0xffff_ffff);
        let b = Word::from_u64(0x1234_5678_9abc);
        assert_eq!(a.bitand(&b), Word::from_u64(0x5678_9abc));
    }

    #[test]
    fn big_values_do_not_fit_usize() {
        let mut bytes = [0u8; 32];
        bytes[0] = 1;
        assert_eq!(Word(bytes).to_usize(), None);
    }
}
