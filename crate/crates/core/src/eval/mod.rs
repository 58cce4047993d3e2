//! Benchmark datasets, predictions and metrics.

pub mod dataset;
pub mod metrics;
pub mod runner;

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use dataset::{label_counts, load_dataset, parse_dataset, subset, DatasetError, DatasetKind, LabeledClaim, LoadOptions, DEFAULT_SEED};
pub use metrics::{
    confusion, fmt_metric, macro_f1, prf1, render_table, report, round2, weighted_f1, ClassCounts, ClassReport,
    ConfusionCounts, MetricError, MetricReport, Prf1, TABLE_HEADER,
};

use crate::model::Verdict;
use crate::trace::TerminatedBy;

/// One line of a predictions file. `predicted` is absent for errored runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub claim_id: String,
    pub gold: Verdict,
    pub predicted: Option<Verdict>,
    pub terminated_by: Option<TerminatedBy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl PredictionRecord {
    pub fn is_errored(&self) -> bool {
        self.predicted.is_none()
    }
}

pub fn write_predictions(path: &Path, records: &[PredictionRecord]) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_predictions(path: &Path) -> io::Result<Vec<PredictionRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?);
    }
    Ok(records)
}

/// Metrics over the non-errored predictions. `None` when every run errored.
pub fn score(records: &[PredictionRecord]) -> Option<MetricReport> {
    let (preds, golds): (Vec<Verdict>, Vec<Verdict>) =
        records.iter().filter_map(|r| r.predicted.map(|p| (p, r.gold))).unzip();
    confusion(&preds, &golds).ok().map(|c| report(&c))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, gold: Verdict, predicted: Option<Verdict>) -> PredictionRecord {
        PredictionRecord {
            claim_id: id.into(),
            gold,
            predicted,
            terminated_by: predicted.map(|_| TerminatedBy::BudgetExhausted),
            error: predicted.is_none().then(|| "gateway failure".into()),
        }
    }

    #[test]
    fn predictions_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        let records = vec![rec("a", Verdict::True, Some(Verdict::False)), rec("b", Verdict::False, None)];
        write_predictions(&path, &records).unwrap();
        assert_eq!(read_predictions(&path).unwrap(), records);
    }

    #[test]
    fn errored_runs_are_excluded_from_scores() {
        let records = vec![
            rec("a", Verdict::True, Some(Verdict::True)),
            rec("b", Verdict::False, Some(Verdict::False)),
            rec("c", Verdict::False, None),
        ];
        let r = score(&records).unwrap();
        assert_eq!(r.macro_f1, 1.0);
        assert!(score(&[rec("x", Verdict::True, None)]).is_none());
    }
}
