//! Subcommand implementations. Hard input errors bubble up as `Err` (exit
//! 2); per-contract failures are logged and reported as `Partial` (exit 1).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;

use esim_core::cfg::{get_cfg, Contract, FunctionId};
use esim_core::dataset::{
    self, CorpusEntry, Manifest, ManifestEntry, PairRecord,
};
use esim_core::embed::train::{PairIdx, TrainingConfig};
use esim_core::embed::{
    embed_prepared, embedding_csv_header, embedding_csv_row, prepare, EmbeddingModel,
    PreparedGraph,
};
use esim_core::index::VectorIndex;
use esim_core::ssg::{extract_contract, Ssg};
use esim_core::synth::{generate_contracts, SynthConfig};

use crate::files;

pub enum Outcome {
    Ok,
    Partial,
}

fn outcome_from(partial: bool) -> Outcome {
    if partial {
        Outcome::Partial
    } else {
        Outcome::Ok
    }
}

/// Extracts every function of every input contract into SSG JSON files.
pub fn extract(input: &str, out: &str) -> Result<Outcome> {
    let inputs = files::hex_inputs(Path::new(input))?;
    if inputs.is_empty() {
        log::warn!("no hex inputs under {input}");
        return Ok(Outcome::Ok);
    }
    fs::create_dir_all(out).with_context(|| format!("creating {out}"))?;
    let partial = AtomicBool::new(false);
    inputs.par_iter().for_each(|path| {
        if let Err(e) = extract_one(path, Path::new(out)) {
            log::error!("{}: {e:#}", path.display());
            partial.store(true, Ordering::Relaxed);
        }
    });
    Ok(outcome_from(partial.load(Ordering::Relaxed)))
}

fn extract_one(path: &Path, out_dir: &Path) -> Result<()> {
    let code = files::read_hex_contract(path)?;
    let extracted = extract_contract(&code)?;
    for warning in &extracted.warnings {
        log::warn!("{}: {warning}", extracted.origin_id);
    }
    for (function, ssg) in &extracted.functions {
        let name = files::ssg_file_name(&extracted.origin_id, &function.to_string());
        files::write_atomic(&out_dir.join(name), ssg.to_json().as_bytes())?;
    }
    log::info!("{}: {} functions", extracted.origin_id, extracted.functions.len());
    Ok(())
}

/// Renders CFGs or SSGs to Graphviz files.
pub fn export_dot(input: &str, out: &str, what: &str) -> Result<Outcome> {
    let path = Path::new(input);
    fs::create_dir_all(out)?;
    if input.ends_with(".ssg.json") {
        let ssg = files::load_ssg(path)?;
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("ssg");
        files::write_atomic(&Path::new(out).join(format!("{name}.dot")), ssg.to_dot().as_bytes())?;
        return Ok(Outcome::Ok);
    }
    let code = files::read_hex_contract(path)?;
    match what {
        "cfg" => {
            let contract = Contract::analyze(&code)?;
            for function in contract.effective_functions().keys() {
                let cfg = get_cfg(&contract, *function)
                    .map_err(|e| anyhow!("{function}: {e}"))?;
                let name = format!("{}_{}.cfg.dot", code.origin_id(), function);
                files::write_atomic(&Path::new(out).join(name), cfg.to_dot().as_bytes())?;
            }
        }
        "ssg" => {
            let extracted = extract_contract(&code)?;
            for (function, ssg) in &extracted.functions {
                let name = format!("{}_{function}.ssg.dot", extracted.origin_id);
                files::write_atomic(&Path::new(out).join(name), ssg.to_dot().as_bytes())?;
            }
        }
        other => bail!("unknown --what {other}; expected cfg or ssg"),
    }
    Ok(Outcome::Ok)
}

/// Generates the synthetic corpus: hex files, extracted SSGs for the
/// labeled functions, and the manifest tying them together.
pub fn synth(classes: usize, variants: usize, seed: u64, out: &str) -> Result<Outcome> {
    let out_dir = Path::new(out);
    let contracts = generate_contracts(&SynthConfig {
        n_classes: classes,
        variants_per_class: variants,
        seed,
    });
    let mut entries = Vec::with_capacity(contracts.len());
    for contract in &contracts {
        let origin = contract.bytecode.origin_id().to_string();
        let hex_path = out_dir.join("bytecode").join(format!("{origin}.hex"));
        files::write_atomic(&hex_path, hex::encode(contract.bytecode.bytes()).as_bytes())?;

        let extracted = extract_contract(&contract.bytecode)?;
        let wanted = FunctionId::Selector(contract.selector);
        let ssg = extracted
            .functions
            .iter()
            .find(|(fid, _)| *fid == wanted)
            .map(|(_, g)| g)
            .ok_or_else(|| anyhow!("{origin}: generated selector did not dispatch"))?;
        let ssg_rel = format!("ssg/{}", files::ssg_file_name(&origin, &wanted.to_string()));
        files::write_atomic(&out_dir.join(&ssg_rel), ssg.to_json().as_bytes())?;
        entries.push(ManifestEntry {
            id: origin.clone(),
            class: contract.class_id.clone(),
            variant: contract.variant_id.clone(),
            path: ssg_rel,
        });
    }
    let manifest = Manifest { entries };
    files::write_atomic(
        &out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?.as_bytes(),
    )?;
    log::info!("synth corpus: {} contracts under {out}", contracts.len());
    Ok(Outcome::Ok)
}

/// A corpus manifest loaded into memory with its graphs.
pub struct LoadedCorpus {
    pub entries: Vec<CorpusEntry>,
    pub ids: Vec<String>,
    pub by_id: BTreeMap<String, usize>,
    pub manifest: Manifest,
}

pub fn load_corpus(manifest_path: &Path) -> Result<LoadedCorpus> {
    let manifest = files::load_manifest(manifest_path)?;
    let mut entries = Vec::with_capacity(manifest.entries.len());
    let mut ids = Vec::with_capacity(manifest.entries.len());
    let mut by_id = BTreeMap::new();
    for entry in &manifest.entries {
        let ssg = files::load_ssg(&files::manifest_entry_path(manifest_path, &entry.path))?;
        by_id.insert(entry.id.clone(), entries.len());
        ids.push(entry.id.clone());
        entries.push(CorpusEntry {
            source_function_id: entry.class.clone(),
            variant_id: entry.variant.clone(),
            ssg,
        });
    }
    Ok(LoadedCorpus { entries, ids, by_id, manifest })
}

/// Splits a manifest into class-disjoint train/val/test manifests.
pub fn split(corpus: &str, seed: u64, out: &str) -> Result<Outcome> {
    let corpus_path = Path::new(corpus);
    let loaded = load_corpus(corpus_path)?;
    let split = dataset::split_corpus(&loaded.entries, seed)?;
    let write_subset = |name: &str, idx: &[usize]| -> Result<()> {
        let entries: Vec<ManifestEntry> = idx
            .iter()
            .map(|&i| {
                let mut e = loaded.manifest.entries[i].clone();
                // keep paths resolvable from the new manifest's directory
                let resolved = files::manifest_entry_path(corpus_path, &e.path);
                e.path = files::relative_to(&resolved, Path::new(out))?
                    .to_string_lossy()
                    .into_owned();
                Ok(e)
            })
            .collect::<Result<_>>()?;
        let manifest = Manifest { entries };
        files::write_atomic(
            &Path::new(out).join(format!("{name}.json")),
            serde_json::to_string_pretty(&manifest)?.as_bytes(),
        )
    };
    write_subset("train", &split.train)?;
    write_subset("val", &split.val)?;
    write_subset("test", &split.test)?;
    log::info!(
        "split: {} train / {} val / {} test entries",
        split.train.len(),
        split.val.len(),
        split.test.len()
    );
    Ok(Outcome::Ok)
}

/// Samples labeled pairs from a corpus manifest.
pub fn pairs(corpus: &str, pos: usize, neg: usize, seed: u64, out: &str) -> Result<Outcome> {
    let loaded = load_corpus(Path::new(corpus))?;
    let pairs = dataset::make_pairs(&loaded.entries, pos, neg, seed)?;
    let records: Vec<PairRecord> = pairs
        .iter()
        .map(|p| PairRecord {
            a: loaded.ids[p.a].clone(),
            b: loaded.ids[p.b].clone(),
            y: p.y,
        })
        .collect();
    files::write_atomic(Path::new(out), dataset::pairs_to_jsonl(&records).as_bytes())?;
    log::info!("pairs: {pos} positive + {neg} negative -> {out}");
    Ok(Outcome::Ok)
}

fn resolve_pairs(loaded: &LoadedCorpus, records: &[PairRecord]) -> Result<Vec<PairIdx>> {
    records
        .iter()
        .map(|r| {
            let a = *loaded
                .by_id
                .get(&r.a)
                .ok_or_else(|| anyhow!("pair references unknown id {}", r.a))?;
            let b = *loaded
                .by_id
                .get(&r.b)
                .ok_or_else(|| anyhow!("pair references unknown id {}", r.b))?;
            Ok((a, b, r.y))
        })
        .collect()
}

pub struct TrainArgs {
    pub corpus: String,
    pub pairs: String,
    pub val_pairs: Option<String>,
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub embed_size: usize,
    pub depth: usize,
    pub seed: u64,
    pub out: String,
    pub log_out: Option<String>,
}

pub fn train(args: TrainArgs) -> Result<Outcome> {
    if args.lr <= 0.0 && args.lr != 0.0 {
        bail!("learning rate must be non-negative");
    }
    if args.batch == 0 {
        bail!("batch size must be at least 1");
    }
    let loaded = load_corpus(Path::new(&args.corpus))?;
    let graphs: Vec<PreparedGraph> = loaded.entries.iter().map(|e| prepare(&e.ssg)).collect();
    let train_pairs = resolve_pairs(&loaded, &files::load_pairs(Path::new(&args.pairs))?)?;
    let val_pairs = match &args.val_pairs {
        Some(path) => resolve_pairs(&loaded, &files::load_pairs(Path::new(path))?)?,
        None => vec![],
    };
    let cfg = TrainingConfig {
        learning_rate: args.lr,
        batch_pairs: args.batch,
        epochs: args.epochs,
        embed_size: args.embed_size,
        depth: args.depth,
        seed: args.seed,
    };
    let outcome = esim_core::embed::train::train(&graphs, &train_pairs, &val_pairs, &cfg)?;

    files::write_atomic(Path::new(&args.out), outcome.model.to_json().as_bytes())?;
    let log_path = args.log_out.clone().unwrap_or_else(|| format!("{}.log.csv", args.out));
    let mut csv = String::from("epoch,train_loss,val_loss,val_auc\n");
    for row in &outcome.log {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            row.epoch, row.train_loss, row.val_loss, row.val_auc
        ));
    }
    files::write_atomic(Path::new(&log_path), csv.as_bytes())?;
    if let Some(last) = outcome.log.last() {
        log::info!(
            "trained {} epochs: train_loss={:.4} val_loss={:.4} val_auc={:.4}",
            outcome.log.len(),
            last.train_loss,
            last.val_loss,
            last.val_auc
        );
    }
    log::info!("model -> {}", args.out);
    Ok(Outcome::Ok)
}

/// Embeds SSGs (from a manifest, a single file, or a directory) into a CSV.
pub fn embed(input: &str, model_path: &str, out: &str) -> Result<Outcome> {
    let model = load_model(Path::new(model_path))?;
    let input_path = Path::new(input);

    // (origin, selector, ssg) triples in deterministic order
    let mut items: Vec<(String, String, Ssg)> = Vec::new();
    if input.ends_with("manifest.json") || input.ends_with(".manifest") {
        let loaded = load_corpus(input_path)?;
        for (i, entry) in loaded.entries.iter().enumerate() {
            items.push((
                loaded.ids[i].clone(),
                entry.ssg.function.to_string(),
                entry.ssg.clone(),
            ));
        }
    } else if input_path.is_dir() {
        let mut paths: Vec<_> = fs::read_dir(input_path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.to_string_lossy().ends_with(".ssg.json"))
            .collect();
        paths.sort();
        for path in paths {
            let (origin, selector) = files::parse_ssg_file_name(&path)
                .ok_or_else(|| anyhow!("{}: not a canonical ssg file name", path.display()))?;
            items.push((origin, selector, files::load_ssg(&path)?));
        }
    } else if input.ends_with(".ssg.json") {
        let (origin, selector) = files::parse_ssg_file_name(input_path)
            .ok_or_else(|| anyhow!("{input}: not a canonical ssg file name"))?;
        items.push((origin, selector, files::load_ssg(input_path)?));
    } else {
        bail!("embed input must be a manifest, an .ssg.json file, or a directory");
    }

    let mut csv = embedding_csv_header(model.p);
    csv.push('\n');
    for (origin, selector, ssg) in &items {
        if ssg.is_degenerate() {
            log::warn!("{origin}_{selector}: degenerate graph; embedding is near zero");
        }
        let mu = esim_core::embed::embed_ssg(ssg, &model);
        csv.push_str(&embedding_csv_row(origin, selector, &mu));
        csv.push('\n');
    }
    files::write_atomic(Path::new(out), csv.as_bytes())?;
    log::info!("embedded {} functions -> {out}", items.len());
    Ok(Outcome::Ok)
}

fn load_model(path: &Path) -> Result<EmbeddingModel> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(EmbeddingModel::from_json(&text)?)
}

/// Adds embedding CSV rows to an index, creating it when absent.
pub fn index_add(db: &str, vectors: &str) -> Result<Outcome> {
    let rows = files::parse_embedding_csv(&fs::read_to_string(vectors)?)?;
    if rows.is_empty() {
        bail!("no vectors in {vectors}");
    }
    let db_path = Path::new(db);
    let mut index = if db_path.exists() {
        VectorIndex::load(db_path)?
    } else {
        VectorIndex::new(rows[0].vector.len())
    };
    let mut skipped = 0usize;
    for row in &rows {
        match index.add((row.origin.clone(), row.selector.clone()), &row.vector) {
            Ok(()) => {}
            Err(esim_core::index::IndexError::NonFiniteVector) => {
                log::warn!("{}_{}: zero or non-finite vector skipped", row.origin, row.selector);
                skipped += 1;
            }
            Err(e) => return Err(e.into()),
        }
    }
    index.persist(db_path)?;
    log::info!("index {db}: {} entries ({skipped} skipped)", index.len());
    Ok(outcome_from(skipped > 0))
}

/// Searches the index with an SSG file or with every function of a hex
/// contract.
pub fn search(db: &str, model_path: &str, query: &str, top_k: usize, format: &str) -> Result<Outcome> {
    let index = VectorIndex::load(Path::new(db))?;
    let model = load_model(Path::new(model_path))?;
    if model.p != index.dimension() {
        bail!(
            "model embeds into {} dimensions but the index holds {}",
            model.p,
            index.dimension()
        );
    }

    let mut queries: Vec<(String, Vec<f64>)> = Vec::new();
    if query.ends_with(".ssg.json") {
        let ssg = files::load_ssg(Path::new(query))?;
        queries.push((ssg.function.to_string(), esim_core::embed::embed_ssg(&ssg, &model)));
    } else {
        let code = files::read_hex_contract(Path::new(query))?;
        let extracted = extract_contract(&code)?;
        for (function, ssg) in &extracted.functions {
            queries.push((function.to_string(), esim_core::embed::embed_ssg(ssg, &model)));
        }
    }

    let mut json_out = Vec::new();
    for (label, vector) in &queries {
        let hits = index.search(vector, top_k)?;
        if format == "json" {
            json_out.push(serde_json::json!({
                "query": label,
                "results": hits
                    .iter()
                    .enumerate()
                    .map(|(rank, ((origin, selector), score))| {
                        serde_json::json!({
                            "rank": rank + 1,
                            "origin_id": origin,
                            "selector": selector,
                            "score": score,
                        })
                    })
                    .collect::<Vec<_>>(),
            }));
        } else {
            println!("query {label}:");
            for (rank, ((origin, selector), score)) in hits.iter().enumerate() {
                println!("{:>4}  {score:.4}  {origin} {selector}", rank + 1);
            }
        }
    }
    if format == "json" {
        println!("{}", serde_json::to_string_pretty(&json_out)?);
    }
    Ok(Outcome::Ok)
}

/// Scores labeled pairs and reports rank AUC.
pub fn eval(corpus: &str, pairs_path: &str, model_path: &str, scores_out: Option<&str>) -> Result<Outcome> {
    let loaded = load_corpus(Path::new(corpus))?;
    let model = load_model(Path::new(model_path))?;
    let records = files::load_pairs(Path::new(pairs_path))?;
    let pair_idx = resolve_pairs(&loaded, &records)?;
    let graphs: Vec<PreparedGraph> = loaded.entries.iter().map(|e| prepare(&e.ssg)).collect();
    let mus: Vec<Vec<f64>> = graphs.iter().map(|g| embed_prepared(g, &model)).collect();

    let scores: Vec<f64> = pair_idx
        .iter()
        .map(|&(a, b, _)| mus[a].iter().zip(&mus[b]).map(|(x, y)| x * y).sum())
        .collect();
    let labels: Vec<i8> = pair_idx.iter().map(|&(_, _, y)| y).collect();
    let auc = dataset::compute_auc(&scores, &labels)?;
    println!("AUC {auc:.4}");

    if let Some(path) = scores_out {
        let mut csv = String::from("a,b,y,score\n");
        for (record, score) in records.iter().zip(&scores) {
            csv.push_str(&format!("{},{},{},{}\n", record.a, record.b, record.y, score));
        }
        files::write_atomic(Path::new(path), csv.as_bytes())?;
        log::info!("per-pair scores -> {path}");
    }
    Ok(Outcome::Ok)
}
