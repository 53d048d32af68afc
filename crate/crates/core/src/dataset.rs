//! Labeled-pair construction and evaluation metrics. The similarity oracle
//! is equality of source function classes: two variants of one class are
//! similar (+1), anything across classes is dissimilar (-1).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng::sub_rng;
use crate::ssg::Ssg;

/// One corpus member: a variant of a source function class with its graph.
#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub source_function_id: String,
    pub variant_id: String,
    pub ssg: Ssg,
}

/// Index-based labeled pair over a corpus slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabeledPair {
    pub a: usize,
    pub b: usize,
    pub y: i8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DatasetError {
    TooFewClasses { have: usize, need: usize },
    InsufficientVariants(String),
    SingleClass,
}

impl fmt::Display for DatasetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetError::TooFewClasses { have, need } => {
                write!(f, "{have} function classes, {need} required")
            }
            DatasetError::InsufficientVariants(msg) => write!(f, "{msg}"),
            DatasetError::SingleClass => write!(f, "scores contain only one label class"),
        }
    }
}

impl std::error::Error for DatasetError {}

/// Class-disjoint corpus split by entry index: 70% of the function classes
/// to train, 20% to validation, 10% to test (floor on val/test, remainder
/// to train).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn split_corpus(entries: &[CorpusEntry], seed: u64) -> Result<Split, DatasetError> {
    let mut classes: Vec<&str> =
        entries.iter().map(|e| e.source_function_id.as_str()).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 10 {
        return Err(DatasetError::TooFewClasses { have: classes.len(), need: 10 });
    }
    let mut rng = sub_rng(seed, "split");
    let mut shuffled = classes.clone();
    shuffled.shuffle(&mut rng);
    let n = shuffled.len();
    let n_val = n * 2 / 10;
    let n_test = n / 10;
    let n_train = n - n_val - n_test;
    let to_set = |cs: &[&str]| cs.iter().map(|s| s.to_string()).collect::<BTreeSet<String>>();
    let train_classes = to_set(&shuffled[..n_train]);
    let val_classes = to_set(&shuffled[n_train..n_train + n_val]);

    let mut split = Split { train: vec![], val: vec![], test: vec![] };
    for (i, e) in entries.iter().enumerate() {
        if train_classes.contains(&e.source_function_id) {
            split.train.push(i);
        } else if val_classes.contains(&e.source_function_id) {
            split.val.push(i);
        } else {
            split.test.push(i);
        }
    }
    Ok(split)
}

/// Samples `n_pos` intra-class and `n_neg` inter-class pairs without
/// duplicate unordered pairs, labeled by the class oracle.
pub fn make_pairs(
    entries: &[CorpusEntry],
    n_pos: usize,
    n_neg: usize,
    seed: u64,
) -> Result<Vec<LabeledPair>, DatasetError> {
    make_pairs_over(entries, &(0..entries.len()).collect::<Vec<_>>(), n_pos, n_neg, seed)
}

/// `make_pairs` restricted to a subset of entry indices (one side of a
/// split); returned indices still address the full corpus slice.
pub fn make_pairs_over(
    entries: &[CorpusEntry],
    subset: &[usize],
    n_pos: usize,
    n_neg: usize,
    seed: u64,
) -> Result<Vec<LabeledPair>, DatasetError> {
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for &i in subset {
        by_class.entry(entries[i].source_function_id.as_str()).or_default().push(i);
    }
    if n_pos > 0 || n_neg > 0 {
        if by_class.len() < 2 && n_neg > 0 {
            return Err(DatasetError::InsufficientVariants(
                "negative pairs need at least two classes".into(),
            ));
        }
        if n_pos > 0 && !by_class.values().any(|v| v.len() >= 2) {
            return Err(DatasetError::InsufficientVariants(
                "positive pairs need a class with at least two variants".into(),
            ));
        }
    }

    let mut pos_pool: Vec<(usize, usize)> = Vec::new();
    for members in by_class.values() {
        for i in 0..members.len() {
            for j in i + 1..members.len() {
                pos_pool.push((members[i], members[j]));
            }
        }
    }
    let classes: Vec<&Vec<usize>> = by_class.values().collect();
    let mut neg_pool: Vec<(usize, usize)> = Vec::new();
    for ci in 0..classes.len() {
        for cj in ci + 1..classes.len() {
            for &a in classes[ci] {
                for &b in classes[cj] {
                    neg_pool.push((a, b));
                }
            }
        }
    }
    if n_pos > pos_pool.len() {
        return Err(DatasetError::InsufficientVariants(format!(
            "{n_pos} positive pairs requested, {} available",
            pos_pool.len()
        )));
    }
    if n_neg > neg_pool.len() {
        return Err(DatasetError::InsufficientVariants(format!(
            "{n_neg} negative pairs requested, {} available",
            neg_pool.len()
        )));
    }
    let mut rng = sub_rng(seed, "pairs");
    pos_pool.shuffle(&mut rng);
    neg_pool.shuffle(&mut rng);
    let mut out: Vec<LabeledPair> =
        pos_pool[..n_pos].iter().map(|&(a, b)| LabeledPair { a, b, y: 1 }).collect();
    out.extend(neg_pool[..n_neg].iter().map(|&(a, b)| LabeledPair { a, b, y: -1 }));
    Ok(out)
}

/// Rank-based AUC (the Mann-Whitney statistic): the probability that a
/// random positive scores above a random negative, ties counting half.
pub fn compute_auc(scores: &[f64], labels: &[i8]) -> Result<f64, DatasetError> {
    assert_eq!(scores.len(), labels.len());
    let n_pos = labels.iter().filter(|&&y| y > 0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(DatasetError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("scores must be comparable"));
    // midranks over tied score runs
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if labels[idx] > 0 {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// On-disk corpus manifest: entry ids to class, variant and SSG file path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub class: String,
    pub variant: String,
    pub path: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

/// One line of a pairs file: entry ids and the ±1 label.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairRecord {
    pub a: String,
    pub b: String,
    pub y: i8,
}

pub fn pairs_to_jsonl(pairs: &[PairRecord]) -> String {
    let mut out = String::new();
    for p in pairs {
        out.push_str(&serde_json::to_string(p).expect("pair serialization cannot fail"));
        out.push('\n');
    }
    out
}

pub fn pairs_from_jsonl(text: &str) -> Result<Vec<PairRecord>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfg::FunctionId;

    fn entry(class: &str, variant: &str) -> CorpusEntry {
        CorpusEntry {
            source_function_id: class.to_string(),
            variant_id: variant.to_string(),
            ssg: Ssg {
                function: FunctionId::Fallback,
                control_nodes: vec![],
                data_nodes: vec![],
                edges: vec![],
                taint_truncated: false,
            },
        }
    }

    fn corpus(n_classes: usize, variants: usize) -> Vec<CorpusEntry> {
        let mut out = Vec::new();
        for c in 0..n_classes {
            for v in 0..variants {
                out.push(entry(&format!("class{c:03}"), &format!("v{v}")));
            }
        }
        out
    }

    #[test]
    fn split_ratios_on_ten_classes() {
        let entries = corpus(10, 2);
        let split = split_corpus(&entries, 42).unwrap();
        let classes = |idx: &[usize]| {
            idx.iter().map(|&i| entries[i].source_function_id.clone()).collect::<BTreeSet<_>>()
        };
        assert_eq!(classes(&split.train).len(), 7);
        assert_eq!(classes(&split.val).len(), 2);
        assert_eq!(classes(&split.test).len(), 1);
    }

    #[test]
    fn split_is_seeded_and_class_disjoint() {
        let entries = corpus(13, 3);
        let a = split_corpus(&entries, 7).unwrap();
        let b = split_corpus(&entries, 7).unwrap();
        assert_eq!(a, b);
        let c = split_corpus(&entries, 8).unwrap();
        assert!(a != c || a.train == c.train); // different seed may differ
        let classes = |idx: &[usize]| {
            idx.iter().map(|&i| entries[i].source_function_id.clone()).collect::<BTreeSet<_>>()
        };
        let train = classes(&a.train);
        let test = classes(&a.test);
        assert!(train.is_disjoint(&test));
        assert!(classes(&a.val).is_disjoint(&train));
        assert!(classes(&a.val).is_disjoint(&test));
    }

    #[test]
    fn too_few_classes_rejected() {
        let entries = corpus(9, 2);
        assert!(matches!(
            split_corpus(&entries, 0),
            Err(DatasetError::TooFewClasses { have: 9, need: 10 })
        ));
    }

    #[test]
    fn single_positive_pair() {
        let entries = corpus(1, 2);
        let pairs = make_pairs(&entries, 1, 0, 0).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].y, 1);
        assert_eq!(
            entries[pairs[0].a].source_function_id,
            entries[pairs[0].b].source_function_id
        );
    }

    #[test]
    fn negative_pairs_cross_classes() {
        let entries = corpus(5, 3);
        let pairs = make_pairs(&entries, 10, 20, 3).unwrap();
        assert_eq!(pairs.len(), 30);
        for p in &pairs {
            let same =
                entries[p.a].source_function_id == entries[p.b].source_function_id;
            assert_eq!(p.y == 1, same);
        }
        // no duplicate unordered pairs
        let mut seen = BTreeSet::new();
        for p in &pairs {
            let key = (p.a.min(p.b), p.a.max(p.b));
            assert!(seen.insert(key));
        }
    }

    #[test]
    fn requesting_more_pairs_than_exist_fails() {
        let entries = corpus(2, 2);
        // only 2 positive pairs exist
        assert!(matches!(
            make_pairs(&entries, 3, 0, 0),
            Err(DatasetError::InsufficientVariants(_))
        ));
        // only 4 negative pairs exist
        assert!(matches!(
            make_pairs(&entries, 0, 5, 0),
            Err(DatasetError::InsufficientVariants(_))
        ));
    }

    #[test]
    fn auc_separable_and_ties() {
        assert_eq!(compute_auc(&[0.9, 0.8, 0.2, 0.1], &[1, 1, -1, -1]).unwrap(), 1.0);
        assert_eq!(compute_auc(&[0.5, 0.5, 0.5, 0.5], &[1, 1, -1, -1]).unwrap(), 0.5);
    }

    #[test]
    fn auc_hand_case() {
        // pos: .9 .8 .4, neg: .7 .3 .1 -> wins: 3 + 3 + 2 = 8 of 9, no ties
        let scores = [0.9, 0.8, 0.4, 0.7, 0.3, 0.1];
        let labels = [1, 1, 1, -1, -1, -1];
        let auc = compute_auc(&scores, &labels).unwrap();
        assert!((auc - 8.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn auc_single_class_is_an_error() {
        assert!(matches!(compute_auc(&[0.1, 0.2], &[1, 1]), Err(DatasetError::SingleClass)));
    }

    #[test]
    fn auc_matches_brute_force_and_is_monotone_invariant() {
        use rand::Rng;
        let mut rng = sub_rng(99, "auc-test");
        for _ in 0..200 {
            let n = rng.random_range(2..1000);
            let scores: Vec<f64> =
                (0..n).map(|_| (rng.random::<f64>() * 8.0).round() / 8.0).collect();
            let labels: Vec<i8> =
                (0..n).map(|i| if i == 0 || rng.random::<bool>() { 1 } else { -1 }).collect();
            if labels.iter().all(|&y| y > 0) || labels.iter().all(|&y| y < 0) {
                continue;
            }
            let auc = compute_auc(&scores, &labels).unwrap();
            let mut hits = 0.0;
            let mut total = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if labels[i] > 0 && labels[j] < 0 {
                        total += 1.0;
                        if scores[i] > scores[j] {
                            hits += 1.0;
                        } else if scores[i] == scores[j] {
                            hits += 0.5;
                        }
                    }
                }
            }
            assert!((auc - hits / total).abs() < 1e-12);
            // strictly monotone transform leaves the ranking unchanged
            let transformed: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp()).collect();
            let auc2 = compute_auc(&transformed, &labels).unwrap();
            assert!((auc - auc2).abs() < 1e-12);
        }
    }
}
