//! Persistent vector index with exact top-k cosine search by linear scan.
//!
//! File layout (little-endian): magic "ESIM", format version u16, dimension
//! u32, entry count u64, then per entry the two length-prefixed key strings
//! and the vector as f64 bits, and a trailing CRC32 over everything before
//! it.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

pub const INDEX_MAGIC: &[u8; 4] = b"ESIM";
pub const INDEX_VERSION: u16 = 1;

/// (origin_id, selector) naming one embedded function.
pub type IndexKey = (String, String);

#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    dimension: usize,
    entries: BTreeMap<IndexKey, Vec<f64>>,
}

#[derive(Debug)]
pub enum IndexError {
    DimensionMismatch { expected: usize, got: usize },
    NonFiniteVector,
    Io(io::Error),
    Corrupt(String),
}

impl fmt::Display for IndexError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IndexError::DimensionMismatch { expected, got } => {
                write!(f, "vector of dimension {got}, index holds {expected}")
            }
            IndexError::NonFiniteVector => write!(f, "vector is non-finite or zero"),
            IndexError::Io(e) => write!(f, "index io error: {e}"),
            IndexError::Corrupt(msg) => write!(f, "corrupt index: {msg}"),
        }
    }
}

impl std::error::Error for IndexError {}

impl From<io::Error> for IndexError {
    fn from(e: io::Error) -> Self {
        IndexError::Io(e)
    }
}

impl VectorIndex {
    pub fn new(dimension: usize) -> VectorIndex {
        VectorIndex { dimension, entries: BTreeMap::new() }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &IndexKey) -> Option<&Vec<f64>> {
        self.entries.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&IndexKey, &Vec<f64>)> {
        self.entries.iter()
    }

    /// Inserts or replaces; the stored vector is re-normalized to unit
    /// length.
    pub fn add(&mut self, key: IndexKey, vector: &[f64]) -> Result<(), IndexError> {
        if vector.len() != self.dimension {
            return Err(IndexError::DimensionMismatch {
                expected: self.dimension,
                got: vector.len(),
            });
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(IndexError::NonFiniteVector);
        }
        let norm = vector.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(IndexError::NonFiniteVector);
        }
        let unit: Vec<f64> = vector.iter().map(|x| x / norm).collect();
        self.entries.insert(key, unit);
        Ok(())
    }

    /// Top-k by descending cosine score over a full scan. Ties break by key
    /// ascending; `k` larger than the index returns everything.
    pub fn search(&self, query: &[f64], k: usize) -> Result<Vec<(IndexKey, f64)>, IndexError> {
        if query.len() != self.dimension {
            return Err(IndexError::DimensionMismatch {
                expected: self.dimension,
                got: query.len(),
            });
        }
        if k == 0 || self.entries.is_empty() {
            return Ok(vec![]);
        }
        let qnorm = query.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scored: Vec<(IndexKey, f64)> = self
            .entries
            .iter()
            .map(|(key, v)| {
                let dot: f64 = v.iter().zip(query).map(|(a, b)| a * b).sum();
                let score = if qnorm == 0.0 { 0.0 } else { dot / qnorm };
                (key.clone(), score)
            })
            .collect();
        let mut scored = scored;
        scored.sort_by(|(ka, sa), (kb, sb)| {
            sb.partial_cmp(sa).expect("scores are finite").then_with(|| ka.cmp(kb))
        });
        scored.truncate(k);
        Ok(scored)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(INDEX_MAGIC);
        out.extend_from_slice(&INDEX_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dimension as u32).to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        for ((origin, selector), v) in &self.entries {
            for s in [origin, selector] {
                out.extend_from_slice(&(s.len() as u32).to_le_bytes());
                out.extend_from_slice(s.as_bytes());
            }
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<VectorIndex, IndexError> {
        let corrupt = |msg: &str| IndexError::Corrupt(msg.to_string());
        if bytes.len() < 4 + 2 + 4 + 8 + 4 {
            return Err(corrupt("file shorter than the fixed header"));
        }
        let (body, crc_bytes) = bytes.split_at(bytes.len() - 4);
        let stored_crc = u32::from_le_bytes(crc_bytes.try_into().unwrap());
        if crc32fast::hash(body) != stored_crc {
            return Err(corrupt("checksum mismatch"));
        }
        let mut pos = 0usize;
        let take = |pos: &mut usize, n: usize| -> Result<&[u8], IndexError> {
            let end = pos.checked_add(n).ok_or_else(|| corrupt("length overflow"))?;
            if end > body.len() {
                return Err(corrupt("truncated record"));
            }
            let slice = &body[*pos..end];
            *pos = end;
            Ok(slice)
        };
        if take(&mut pos, 4)? != INDEX_MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = u16::from_le_bytes(take(&mut pos, 2)?.try_into().unwrap());
        if version != INDEX_VERSION {
            return Err(IndexError::Corrupt(format!(
                "unsupported version {version}, expected {INDEX_VERSION}"
            )));
        }
        let dimension = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let count = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
        let mut entries = BTreeMap::new();
        for _ in 0..count {
            let mut strings = Vec::with_capacity(2);
            for _ in 0..2 {
                let len = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
                let s = std::str::from_utf8(take(&mut pos, len)?)
                    .map_err(|_| corrupt("key is not utf-8"))?
                    .to_string();
                strings.push(s);
            }
            let mut v = Vec::with_capacity(dimension);
            for _ in 0..dimension {
                let x = f64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
                v.push(x);
            }
            let selector = strings.pop().unwrap();
            let origin = strings.pop().unwrap();
            entries.insert((origin, selector), v);
        }
        if pos != body.len() {
            return Err(corrupt("trailing bytes after the last record"));
        }
        Ok(VectorIndex { dimension, entries })
    }

    pub fn persist(&self, path: &Path) -> Result<(), IndexError> {
        let bytes = self.to_bytes();
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<VectorIndex, IndexError> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        VectorIndex::from_bytes(&bytes)
    }

    /// Debug view of the entries as JSON.
    pub fn to_debug_json(&self) -> String {
        let rows: Vec<serde_json::Value> = self
            .entries
            .iter()
            .map(|((origin, selector), v)| {
                serde_json::json!({ "origin_id": origin, "selector": selector, "vector": v })
            })
            .collect();
        serde_json::to_string_pretty(&rows).expect("index json cannot fail")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::sub_rng;
    use rand::Rng;

    fn random_unit(rng: &mut impl Rng, p: usize) -> Vec<f64> {
        let v: Vec<f64> = (0..p).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| x / n).collect()
    }

    #[test]
    fn add_lookup_and_replace() {
        let mut idx = VectorIndex::new(4);
        idx.add(("a".into(), "0x00000001".into()), &[2.0, 0.0, 0.0, 0.0]).unwrap();
        let stored = idx.get(&("a".into(), "0x00000001".into())).unwrap();
        assert_eq!(stored, &vec![1.0, 0.0, 0.0, 0.0]);
        idx.add(("a".into(), "0x00000001".into()), &[0.0, 3.0, 0.0, 0.0]).unwrap();
        assert_eq!(idx.len(), 1);
        let stored = idx.get(&("a".into(), "0x00000001".into())).unwrap();
        assert_eq!(stored, &vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn dimension_and_finiteness_checks() {
        let mut idx = VectorIndex::new(64);
        assert!(matches!(
            idx.add(("a".into(), "s".into()), &vec![1.0; 32]),
            Err(IndexError::DimensionMismatch { expected: 64, got: 32 })
        ));
        assert!(matches!(
            idx.add(("a".into(), "s".into()), &vec![f64::NAN; 64]),
            Err(IndexError::NonFiniteVector)
        ));
        assert!(matches!(
            idx.add(("a".into(), "s".into()), &vec![0.0; 64]),
            Err(IndexError::NonFiniteVector)
        ));
        assert!(matches!(
            idx.search(&vec![1.0; 32], 5),
            Err(IndexError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn search_self_and_small_k() {
        let mut idx = VectorIndex::new(3);
        idx.add(("a".into(), "f".into()), &[1.0, 0.0, 0.0]).unwrap();
        idx.add(("b".into(), "f".into()), &[0.0, 1.0, 0.0]).unwrap();
        idx.add(("c".into(), "f".into()), &[0.0, 0.0, 1.0]).unwrap();
        let hits = idx.search(&[1.0, 0.0, 0.0], 1).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].0, ("a".into(), "f".into()));
        assert!((hits[0].1 - 1.0).abs() < 1e-12);
        // k larger than the index returns everything
        assert_eq!(idx.search(&[1.0, 0.0, 0.0], 10).unwrap().len(), 3);
        assert!(idx.search(&[1.0, 0.0, 0.0], 0).unwrap().is_empty());
        assert!(VectorIndex::new(3).search(&[1.0, 0.0, 0.0], 5).unwrap().is_empty());
    }

    #[test]
    fn search_matches_brute_force_oracle() {
        let p = 16;
        let mut rng = sub_rng(5, "index-test");
        let mut idx = VectorIndex::new(p);
        let mut all: Vec<(IndexKey, Vec<f64>)> = Vec::new();
        for i in 0..10_000 {
            let key = (format!("c{i:05}"), "0xdeadbeef".to_string());
            let v = random_unit(&mut rng, p);
            idx.add(key.clone(), &v).unwrap();
            all.push((key, v));
        }
        let query = random_unit(&mut rng, p);
        for k in [1usize, 25, 100] {
            let got = idx.search(&query, k).unwrap();
            let mut want: Vec<(IndexKey, f64)> = all
                .iter()
                .map(|(key, v)| {
                    (key.clone(), v.iter().zip(&query).map(|(a, b)| a * b).sum::<f64>())
                })
                .collect();
            want.sort_by(|(ka, sa), (kb, sb)| sb.partial_cmp(sa).unwrap().then(ka.cmp(kb)));
            want.truncate(k);
            let got_keys: Vec<_> = got.iter().map(|(k, _)| k.clone()).collect();
            let want_keys: Vec<_> = want.iter().map(|(k, _)| k.clone()).collect();
            assert_eq!(got_keys, want_keys);
            for (g, w) in got.iter().zip(&want) {
                assert!((g.1 - w.1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let mut rng = sub_rng(6, "index-test");
        let mut idx = VectorIndex::new(8);
        for i in 0..1000 {
            idx.add((format!("origin{i}"), format!("0x{i:08x}")), &random_unit(&mut rng, 8))
                .unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("test.esim");
        idx.persist(&path).unwrap();
        let loaded = VectorIndex::load(&path).unwrap();
        assert_eq!(idx, loaded);
        // bit-identical bytes too
        assert_eq!(idx.to_bytes(), loaded.to_bytes());
    }

    #[test]
    fn truncated_and_tampered_files_are_rejected() {
        let mut idx = VectorIndex::new(4);
        idx.add(("a".into(), "b".into()), &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let bytes = idx.to_bytes();
        assert!(matches!(
            VectorIndex::from_bytes(&bytes[..bytes.len() - 7]),
            Err(IndexError::Corrupt(_))
        ));
        let mut wrong_version = bytes.clone();
        wrong_version[4] = 99; // version byte
        let err = VectorIndex::from_bytes(&wrong_version).unwrap_err();
        // flipping the version invalidates the checksum first; patch it
        let mut body = wrong_version[..wrong_version.len() - 4].to_vec();
        let crc = crc32fast::hash(&body);
        body.extend_from_slice(&crc.to_le_bytes());
        match VectorIndex::from_bytes(&body).unwrap_err() {
            IndexError::Corrupt(msg) => assert!(msg.contains("version 99"), "got: {msg}"),
            other => panic!("expected corrupt error, got {other:?}"),
        }
        drop(err);
    }
}
