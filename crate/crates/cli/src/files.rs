//! File-format glue: hex inputs, SSG JSON files, corpus manifests, pairs
//! files, embedding CSVs, and atomic writes.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use esim_core::dataset::{Manifest, PairRecord};
use esim_core::ssg::Ssg;
use esim_core::Bytecode;

/// Writes via a temp file in the same directory plus rename, so parallel
/// runs never leave partial files behind.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .with_context(|| format!("creating directory {}", parent.display()))?;
    }
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temp file in {}", dir.display()))?;
    std::io::Write::write_all(&mut tmp, contents)?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_hex_contract(path: &Path) -> Result<Bytecode> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let origin = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("contract")
        .to_string();
    Ok(Bytecode::from_hex_str(&text, origin)?)
}

/// Hex files to process: the file itself, or every *.hex / *.txt / *.bin
/// file directly inside a directory.
pub fn hex_inputs(input: &Path) -> Result<Vec<PathBuf>> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    if !input.is_dir() {
        bail!("input {} is neither a file nor a directory", input.display());
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(input)? {
        let path = entry?.path();
        if !path.is_file() {
            continue;
        }
        match path.extension().and_then(|e| e.to_str()) {
            Some("hex") | Some("txt") | Some("bin") => out.push(path),
            _ => {}
        }
    }
    out.sort();
    Ok(out)
}

/// Canonical SSG output name for one function of one contract.
pub fn ssg_file_name(origin: &str, selector: &str) -> String {
    format!("{origin}_{selector}.ssg.json")
}

/// Recovers (origin, selector) from a canonical SSG file name.
pub fn parse_ssg_file_name(path: &Path) -> Option<(String, String)> {
    let name = path.file_name()?.to_str()?;
    let stem = name.strip_suffix(".ssg.json")?;
    let (origin, selector) = stem.rsplit_once('_')?;
    Some((origin.to_string(), selector.to_string()))
}

pub fn load_ssg(path: &Path) -> Result<Ssg> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Ssg::from_json(&text)?)
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
}

/// Manifest entry paths are relative to the manifest's directory.
pub fn manifest_entry_path(manifest_path: &Path, entry_path: &str) -> PathBuf {
    let p = Path::new(entry_path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        manifest_path.parent().unwrap_or_else(|| Path::new(".")).join(p)
    }
}

/// `target` expressed relative to `base` (a directory), so manifests can be
/// rewritten into other directories without baking in absolute paths.
pub fn relative_to(target: &Path, base: &Path) -> Result<PathBuf> {
    let target = std::path::absolute(target)?;
    let base = std::path::absolute(base)?;
    let mut t = target.components().peekable();
    let mut b = base.components().peekable();
    while let (Some(x), Some(y)) = (t.peek(), b.peek()) {
        if x == y {
            t.next();
            b.next();
        } else {
            break;
        }
    }
    let mut out = PathBuf::new();
    for _ in b {
        out.push("..");
    }
    for c in t {
        out.push(c);
    }
    Ok(out)
}

pub fn load_pairs(path: &Path) -> Result<Vec<PairRecord>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(esim_core::dataset::pairs_from_jsonl(&text)?)
}

/// One embedding CSV row parsed back into its parts.
pub struct VectorRow {
    pub origin: String,
    pub selector: String,
    pub vector: Vec<f64>,
}

pub fn parse_embedding_csv(text: &str) -> Result<Vec<VectorRow>> {
    let mut lines = text.lines();
    let header = lines.next().context("empty embeddings csv")?;
    if !header.starts_with("origin_id,selector,") {
        bail!("unexpected embeddings csv header: {header}");
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let origin = parts.next().context("missing origin column")?.to_string();
        let selector = parts.next().context("missing selector column")?.to_string();
        let vector: Vec<f64> = parts
            .map(|p| p.parse::<f64>().with_context(|| format!("row {}: bad float {p}", i + 2)))
            .collect::<Result<_>>()?;
        rows.push(VectorRow { origin, selector, vector });
    }
    Ok(rows)
}
