//! Loaders for the three claim-level benchmarks.
//!
//! Each file is either a JSON array of records or JSON lines, one record per
//! line. A record needs a claim text and a label; an id is optional (records
//! without one get `<dataset>-<index>`, index counted over the whole file).
//!
//! | dataset          | claim field                       | label field              | label values                                                        |
//! |------------------|-----------------------------------|--------------------------|---------------------------------------------------------------------|
//! | FacTool-KBQA     | `claim` / `text` / `atomic_claim` | `label` / `claim_label` / `gold` | `true`/`false` (bool or string)                             |
//! | BingCheck        | same                              | same                     | `supported`, `refuted`, `partially supported`, `not supported` |
//! | Factcheck-Bench  | same                              | same                     | `true`/`false`, `unknown` or `null`                          |
//!
//! BingCheck keeps only supported (True) and refuted (False). Factcheck-Bench
//! drops unknown labels. Both are then sampled per class with a seeded RNG to
//! fixed counts; selected records keep their file order.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::model::{Claim, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DatasetKind {
    #[serde(rename = "factool-kbqa")]
    FacToolKbqa,
    #[serde(rename = "bingcheck")]
    BingCheck,
    #[serde(rename = "factcheck-bench")]
    FactcheckBench,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 3] = [DatasetKind::FacToolKbqa, DatasetKind::BingCheck, DatasetKind::FactcheckBench];

    pub fn slug(self) -> &'static str {
        match self {
            DatasetKind::FacToolKbqa => "factool-kbqa",
            DatasetKind::BingCheck => "bingcheck",
            DatasetKind::FactcheckBench => "factcheck-bench",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            DatasetKind::FacToolKbqa => "FacTool-KBQA",
            DatasetKind::BingCheck => "BingCheck",
            DatasetKind::FactcheckBench => "Factcheck-Bench",
        }
    }

    /// Per-class counts used by the standard evaluation split (True, False).
    pub fn standard_counts(self) -> (usize, usize) {
        match self {
            DatasetKind::FacToolKbqa => (177, 56),
            DatasetKind::BingCheck => (160, 42),
            DatasetKind::FactcheckBench => (472, 159),
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

impl FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s.to_ascii_lowercase().chars().filter(|c| c.is_ascii_alphanumeric()).collect();
        match norm.as_str() {
            "factoolkbqa" | "factool" | "kbqa" => Ok(DatasetKind::FacToolKbqa),
            "bingcheck" => Ok(DatasetKind::BingCheck),
            "factcheckbench" | "factbench" => Ok(DatasetKind::FactcheckBench),
            _ => Err(format!("unknown dataset {s:?} (expected factool-kbqa, bingcheck or factcheck-bench)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("record {index}: {message}")]
    Schema { index: usize, message: String },
    #[error("dataset has no usable claims")]
    EmptyDataset,
    #[error("wanted {wanted} {label} examples but only {available} are available")]
    InsufficientExamples { label: Verdict, wanted: usize, available: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledClaim {
    pub claim: Claim,
    pub gold: Verdict,
    pub dataset: DatasetKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadOptions {
    pub seed: u64,
    /// Keep this many True examples (all when `None`).
    pub true_target: Option<usize>,
    pub false_target: Option<usize>,
}

impl LoadOptions {
    /// No sampling at all.
    pub fn full(seed: u64) -> Self {
        Self { seed, true_target: None, false_target: None }
    }

    /// The standard split: BingCheck subsamples supported claims, Factcheck-Bench
    /// samples both classes; FacTool-KBQA is used whole.
    pub fn standard(kind: DatasetKind, seed: u64) -> Self {
        let (t, f) = kind.standard_counts();
        match kind {
            DatasetKind::FacToolKbqa => Self::full(seed),
            DatasetKind::BingCheck => Self { seed, true_target: Some(t), false_target: None },
            DatasetKind::FactcheckBench => Self { seed, true_target: Some(t), false_target: Some(f) },
        }
    }
}

pub const DEFAULT_SEED: u64 = 2025;

const CLAIM_FIELDS: [&str; 3] = ["claim", "text", "atomic_claim"];
const LABEL_FIELDS: [&str; 3] = ["label", "claim_label", "gold"];

fn parse_records(text: &str) -> Result<Vec<Value>, DatasetError> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        return match serde_json::from_str::<Value>(trimmed) {
            Ok(Value::Array(items)) => Ok(items),
            Ok(_) => Err(DatasetError::Schema { index: 0, message: "expected a JSON array".into() }),
            Err(e) => Err(DatasetError::Schema { index: 0, message: e.to_string() }),
        };
    }
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| DatasetError::Schema { index: i, message: e.to_string() })
        })
        .collect()
}

fn field<'a>(record: &'a Value, names: &[&str]) -> Option<&'a Value> {
    names.iter().find_map(|n| record.get(*n))
}

/// Normalized label text; `None` for JSON null.
fn label_text(value: &Value) -> Option<String> {
    match value {
        Value::Bool(b) => Some(b.to_string()),
        Value::String(s) => Some(s.trim().to_ascii_lowercase().replace(['_', '-'], " ")),
        Value::Null => None,
        other => Some(other.to_string()),
    }
}

/// Gold label for a record, `Ok(None)` when the dataset's rules drop it.
fn map_label(kind: DatasetKind, label: Option<String>, index: usize) -> Result<Option<Verdict>, DatasetError> {
    let bad = |l: &str| DatasetError::Schema { index, message: format!("unexpected label {l:?} for {kind}") };
    match kind {
        DatasetKind::FacToolKbqa => match label.as_deref() {
            Some("true") => Ok(Some(Verdict::True)),
            Some("false") => Ok(Some(Verdict::False)),
            other => Err(bad(other.unwrap_or("null"))),
        },
        DatasetKind::BingCheck => match label.as_deref() {
            Some("supported") => Ok(Some(Verdict::True)),
            Some("refuted") => Ok(Some(Verdict::False)),
            Some("partially supported" | "not supported") => Ok(None),
            other => Err(bad(other.unwrap_or("null"))),
        },
        DatasetKind::FactcheckBench => match label.as_deref() {
            Some("true") => Ok(Some(Verdict::True)),
            Some("false") => Ok(Some(Verdict::False)),
            None | Some("unknown") => Ok(None),
            Some(other) => Err(bad(other)),
        },
    }
}

type Indexed = Vec<(usize, LabeledClaim)>;

fn sample(items: Indexed, target: Option<usize>, label: Verdict, rng: &mut ChaCha8Rng) -> Result<Indexed, DatasetError> {
    let Some(wanted) = target else { return Ok(items) };
    if items.len() < wanted {
        return Err(DatasetError::InsufficientExamples { label, wanted, available: items.len() });
    }
    let mut picked = rand::seq::index::sample(rng, items.len(), wanted).into_vec();
    picked.sort_unstable();
    let mut slots: Vec<Option<(usize, LabeledClaim)>> = items.into_iter().map(Some).collect();
    Ok(picked.into_iter().map(|i| slots[i].take().expect("distinct indices")).collect())
}

pub fn parse_dataset(kind: DatasetKind, text: &str, options: &LoadOptions) -> Result<Vec<LabeledClaim>, DatasetError> {
    let records = parse_records(text)?;
    let mut trues = Vec::new();
    let mut falses = Vec::new();
    for (index, record) in records.iter().enumerate() {
        let claim_text = field(record, &CLAIM_FIELDS)
            .and_then(Value::as_str)
            .ok_or_else(|| DatasetError::Schema { index, message: "missing claim text".into() })?;
        let label = field(record, &LABEL_FIELDS)
            .ok_or_else(|| DatasetError::Schema { index, message: "missing label".into() })?;
        let Some(gold) = map_label(kind, label_text(label), index)? else { continue };
        let id = match record.get("id") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => format!("{}-{index}", kind.slug()),
        };
        let claim = Claim::new(id, claim_text)
            .map_err(|e| DatasetError::Schema { index, message: e.to_string() })?
            .with_gold(gold);
        let item = (index, LabeledClaim { claim, gold, dataset: kind });
        match gold {
            Verdict::True => trues.push(item),
            Verdict::False => falses.push(item),
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let trues = sample(trues, options.true_target, Verdict::True, &mut rng)?;
    let falses = sample(falses, options.false_target, Verdict::False, &mut rng)?;
    let mut all: Indexed = trues.into_iter().chain(falses).collect();
    all.sort_by_key(|(index, _)| *index);
    if all.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    Ok(all.into_iter().map(|(_, c)| c).collect())
}

pub fn load_dataset(kind: DatasetKind, path: &Path, options: &LoadOptions) -> Result<Vec<LabeledClaim>, DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io { path: path.display().to_string(), source })?;
    parse_dataset(kind, &text, options)
}

/// A seeded sample of `n` claims, kept in their original order.
pub fn subset(claims: Vec<LabeledClaim>, n: usize, seed: u64) -> Vec<LabeledClaim> {
    if n >= claims.len() {
        return claims;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, claims.len(), n).into_vec();
    picked.sort_unstable();
    let mut slots: Vec<Option<LabeledClaim>> = claims.into_iter().map(Some).collect();
    picked.into_iter().map(|i| slots[i].take().expect("distinct indices")).collect()
}

pub fn label_counts(claims: &[LabeledClaim]) -> (usize, usize) {
    let t = claims.iter().filter(|c| c.gold == Verdict::True).count();
    (t, claims.len() - t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn jsonl(records: &[Value]) -> String {
        records.iter().map(|r| format!("{r}\n")).collect()
    }

    #[test]
    fn factool_labels_pass_through() {
        let text = jsonl(&[
            json!({"claim": "a is b", "label": true}),
            json!({"claim": "c is d", "label": "False"}),
        ]);
        let claims = parse_dataset(DatasetKind::FacToolKbqa, &text, &LoadOptions::full(0)).unwrap();
        assert_eq!(claims.iter().map(|c| c.gold).collect::<Vec<_>>(), [Verdict::True, Verdict::False]);
        assert_eq!(claims[0].claim.id, "factool-kbqa-0");
        assert_eq!(claims[1].claim.gold_label, Some(Verdict::False));
    }

    #[test]
    fn bingcheck_mapping_drops_partial_labels() {
        let text = json!([
            {"claim": "s1", "label": "supported"},
            {"claim": "p", "label": "partially supported"},
            {"claim": "r", "label": "refuted"},
            {"claim": "n", "label": "not_supported"},
        ])
        .to_string();
        let claims = parse_dataset(DatasetKind::BingCheck, &text, &LoadOptions::full(0)).unwrap();
        let texts: Vec<_> = claims.iter().map(|c| (c.claim.text.as_str(), c.gold)).collect();
        assert_eq!(texts, [("s1", Verdict::True), ("r", Verdict::False)]);
    }

    #[test]
    fn factcheck_bench_ignores_unknown() {
        let text = jsonl(&[
            json!({"id": 7, "claim": "x", "label": "unknown"}),
            json!({"id": 8, "claim": "y", "label": null}),
            json!({"id": 9, "claim": "z", "label": false}),
        ]);
        let claims = parse_dataset(DatasetKind::FactcheckBench, &text, &LoadOptions::full(0)).unwrap();
        assert_eq!(claims.len(), 1);
        assert_eq!(claims[0].claim.id, "9");
    }

    #[test]
    fn schema_errors() {
        let missing = jsonl(&[json!({"text": "x"})]);
        assert!(matches!(
            parse_dataset(DatasetKind::FacToolKbqa, &missing, &LoadOptions::full(0)),
            Err(DatasetError::Schema { .. })
        ));
        let weird = jsonl(&[json!({"claim": "x", "label": "maybe"})]);
        assert!(parse_dataset(DatasetKind::BingCheck, &weird, &LoadOptions::full(0)).is_err());
        let only_unknown = jsonl(&[json!({"claim": "x", "label": "unknown"})]);
        assert!(matches!(
            parse_dataset(DatasetKind::FactcheckBench, &only_unknown, &LoadOptions::full(0)),
            Err(DatasetError::EmptyDataset)
        ));
    }

    #[test]
    fn sampling_is_seeded_and_order_preserving() {
        let records: Vec<Value> = (0..50)
            .map(|i| json!({"claim": format!("c{i}"), "label": if i % 5 == 0 { "refuted" } else { "supported" }}))
            .collect();
        let text = jsonl(&records);
        let opts = LoadOptions { seed: 3, true_target: Some(10), false_target: None };
        let a = parse_dataset(DatasetKind::BingCheck, &text, &opts).unwrap();
        let b = parse_dataset(DatasetKind::BingCheck, &text, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(label_counts(&a), (10, 10));
        let idx: Vec<usize> = a.iter().map(|c| c.claim.text[1..].parse().unwrap()).collect();
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        let other = parse_dataset(DatasetKind::BingCheck, &text, &LoadOptions { seed: 4, ..opts }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn insufficient_examples() {
        let text = jsonl(&[json!({"claim": "x", "label": "supported"})]);
        let err = parse_dataset(DatasetKind::BingCheck, &text, &LoadOptions::standard(DatasetKind::BingCheck, 0)).unwrap_err();
        assert!(matches!(err, DatasetError::InsufficientExamples { wanted: 160, available: 1, .. }));
    }

    #[test]
    fn subset_is_seeded_and_ordered() {
        let records: Vec<Value> = (0..30).map(|i| json!({"claim": format!("c{i}"), "label": i % 2 == 0})).collect();
        let all = parse_dataset(DatasetKind::FacToolKbqa, &jsonl(&records), &LoadOptions::full(0)).unwrap();
        let a = subset(all.clone(), 7, 9);
        assert_eq!(a, subset(all.clone(), 7, 9));
        assert_eq!(a.len(), 7);
        let idx: Vec<usize> = a.iter().map(|c| c.claim.text[1..].parse().unwrap()).collect();
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(subset(all.clone(), 99, 1), all);
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("FacTool-KBQA".parse::<DatasetKind>(), Ok(DatasetKind::FacToolKbqa));
        assert_eq!("factcheck_bench".parse::<DatasetKind>(), Ok(DatasetKind::FactcheckBench));
        assert!("fever".parse::<DatasetKind>().is_err());
    }
}
