//! Per-class precision/recall/F1 with macro and support-weighted averages.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Verdict;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("predictions ({preds}) and gold labels ({golds}) differ in length")]
    LengthMismatch { preds: usize, golds: usize },
    #[error("no predictions to score")]
    Empty,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ClassCounts {
    pub fn support(&self) -> usize {
        self.tp + self.fn_
    }
}

/// One-vs-rest tallies for each of the two labels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    #[serde(rename = "True")]
    pub true_class: ClassCounts,
    #[serde(rename = "False")]
    pub false_class: ClassCounts,
}

impl ConfusionCounts {
    pub fn class(&self, label: Verdict) -> &ClassCounts {
        match label {
            Verdict::True => &self.true_class,
            Verdict::False => &self.false_class,
        }
    }

    fn class_mut(&mut self, label: Verdict) -> &mut ClassCounts {
        match label {
            Verdict::True => &mut self.true_class,
            Verdict::False => &mut self.false_class,
        }
    }

    pub fn total(&self) -> usize {
        self.true_class.support() + self.false_class.support()
    }
}

pub fn confusion(preds: &[Verdict], golds: &[Verdict]) -> Result<ConfusionCounts, MetricError> {
    if preds.len() != golds.len() {
        return Err(MetricError::LengthMismatch { preds: preds.len(), golds: golds.len() });
    }
    if preds.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut counts = ConfusionCounts::default();
    for (&pred, &gold) in preds.iter().zip(golds) {
        if pred == gold {
            counts.class_mut(gold).tp += 1;
        } else {
            counts.class_mut(pred).fp += 1;
            counts.class_mut(gold).fn_ += 1;
        }
    }
    Ok(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall and F1 for one label; zero denominators give 0.
pub fn prf1(counts: &ConfusionCounts, label: Verdict) -> Prf1 {
    let c = counts.class(label);
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Prf1 { precision, recall, f1 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(rename = "True")]
    pub true_class: ClassReport,
    #[serde(rename = "False")]
    pub false_class: ClassReport,
    pub macro_f1: f64,
    pub weighted_f1: f64,
}

pub fn macro_f1(f1_true: f64, f1_false: f64) -> f64 {
    (f1_true + f1_false) / 2.0
}

pub fn weighted_f1(f1_true: f64, support_true: usize, f1_false: f64, support_false: usize) -> f64 {
    let total = support_true + support_false;
    if total == 0 {
        return 0.0;
    }
    (support_true as f64 * f1_true + support_false as f64 * f1_false) / total as f64
}

pub fn report(counts: &ConfusionCounts) -> MetricReport {
    let class = |label| {
        let m = prf1(counts, label);
        ClassReport { precision: m.precision, recall: m.recall, f1: m.f1, support: counts.class(label).support() }
    };
    let t = class(Verdict::True);
    let f = class(Verdict::False);
    MetricReport {
        true_class: t,
        false_class: f,
        macro_f1: macro_f1(t.f1, f.f1),
        weighted_f1: weighted_f1(t.f1, t.support, f.f1, f.support),
    }
}

/// Rounds half away from zero at two decimals. A small tolerance absorbs
/// binary representation error, so 0.795 rounds to 0.80.
pub fn round2(value: f64) -> f64 {
    let scaled = value * 100.0;
    (scaled + 1e-9_f64.copysign(scaled)).round() / 100.0
}

/// Two-decimal display with trailing zeros trimmed: 0.80 -> "0.8", 1 -> "1.0".
pub fn fmt_metric(value: f64) -> String {
    let s = format!("{:.2}", round2(value));
    let s = s.trim_end_matches('0');
    if s.ends_with('.') {
        format!("{s}0")
    } else {
        s.to_string()
    }
}

impl MetricReport {
    /// Display cells in the column order P, R, F1 (True), P, R, F1 (False), M-F1, W-F1.
    pub fn row(&self) -> [String; 8] {
        let t = &self.true_class;
        let f = &self.false_class;
        [t.precision, t.recall, t.f1, f.precision, f.recall, f.f1, self.macro_f1, self.weighted_f1].map(fmt_metric)
    }
}

pub const TABLE_HEADER: [&str; 10] = ["Dataset", "Method", "True P", "True R", "True F1", "False P", "False R", "False F1", "M-F1", "W-F1"];

/// Renders rows of (dataset, method, report) as an aligned plain-text table.
pub fn render_table(rows: &[(String, String, MetricReport)]) -> String {
    let mut cells: Vec<Vec<String>> = vec![TABLE_HEADER.iter().map(|s| s.to_string()).collect()];
    for (dataset, method, report) in rows {
        let mut line = vec![dataset.clone(), method.clone()];
        line.extend(report.row());
        cells.push(line);
    }
    let widths: Vec<usize> = (0..TABLE_HEADER.len())
        .map(|c| cells.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in cells.iter().enumerate() {
        let line: Vec<String> = row.iter().zip(&widths).map(|(cell, w)| format!("{cell:<w$}")).collect();
        out.push_str(line.join(" | ").trim_end());
        out.push('\n');
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            out.push_str(&rule.join("-+-"));
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Verdict::{False as F, True as T};

    #[test]
    fn perfect_two_items() {
        let c = confusion(&[T, F], &[T, F]).unwrap();
        assert_eq!(c.true_class, ClassCounts { tp: 1, fp: 0, fn_: 0 });
        assert_eq!(c.false_class, ClassCounts { tp: 1, fp: 0, fn_: 0 });
    }

    #[test]
    fn one_false_positive() {
        let c = confusion(&[T, T], &[T, F]).unwrap();
        assert_eq!(c.true_class, ClassCounts { tp: 1, fp: 1, fn_: 0 });
        assert_eq!(c.false_class, ClassCounts { tp: 0, fp: 0, fn_: 1 });
    }

    #[test]
    fn length_mismatch_and_empty() {
        assert_eq!(confusion(&[T], &[T, F]), Err(MetricError::LengthMismatch { preds: 1, golds: 2 }));
        assert_eq!(confusion(&[], &[]), Err(MetricError::Empty));
    }

    fn counts(tp: usize, fp: usize, fn_: usize) -> ConfusionCounts {
        ConfusionCounts { true_class: ClassCounts { tp, fp, fn_ }, false_class: ClassCounts::default() }
    }

    #[test]
    fn prf1_perfect() {
        assert_eq!(prf1(&counts(1, 0, 0), T), Prf1 { precision: 1.0, recall: 1.0, f1: 1.0 });
    }

    #[test]
    fn prf1_zero_denominators() {
        assert_eq!(prf1(&counts(0, 0, 5), T), Prf1 { precision: 0.0, recall: 0.0, f1: 0.0 });
        assert_eq!(prf1(&ConfusionCounts::default(), F), Prf1 { precision: 0.0, recall: 0.0, f1: 0.0 });
    }

    /// Counts solved from the published EMULATE / FacTool-KBQA precision and
    /// recall with supports 177 True / 56 False.
    #[test]
    fn kbqa_counts_reproduce_published_scores() {
        let c = ConfusionCounts {
            true_class: ClassCounts { tp: 163, fp: 20, fn_: 14 },
            false_class: ClassCounts { tp: 36, fp: 14, fn_: 20 },
        };
        let r = report(&c);
        assert_eq!(r.true_class.support, 177);
        assert_eq!(r.false_class.support, 56);
        assert_eq!(r.row(), ["0.89", "0.92", "0.91", "0.72", "0.64", "0.68", "0.79", "0.85"].map(String::from));
        // the published 0.8 averages the already-rounded F1s; full precision gives 0.7924
        assert!((r.macro_f1 - 0.8).abs() <= 0.01);
    }

    #[test]
    fn published_f1_arithmetic() {
        // (0.91 + 0.68) / 2 and the 177/56 weighting
        assert_eq!(fmt_metric(macro_f1(0.91, 0.68)), "0.8");
        let w = weighted_f1(0.91, 177, 0.68, 56);
        assert!((w - 0.854721).abs() < 1e-6);
        assert_eq!(fmt_metric(w), "0.85");
        let w = weighted_f1(0.9, 472, 0.71, 159);
        assert!((w - 0.852124).abs() < 1e-6);
        assert_eq!(fmt_metric(w), "0.85");
        assert_eq!(weighted_f1(1.0, 3, 1.0, 9), 1.0);
    }

    #[test]
    fn display_rounding() {
        assert_eq!(fmt_metric(0.795), "0.8");
        assert_eq!(fmt_metric(0.125), "0.13");
        assert_eq!(fmt_metric(1.0), "1.0");
        assert_eq!(fmt_metric(0.0), "0.0");
        assert_eq!(fmt_metric(0.8547), "0.85");
    }

    #[test]
    fn table_alignment() {
        let r = report(&confusion(&[T, F], &[T, F]).unwrap());
        let table = render_table(&[("BingCheck".into(), "EMULATE".into(), r)]);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("Dataset   | Method  | True P"));
        assert!(lines[2].contains("1.0"));
    }

    proptest! {
        #[test]
        fn metrics_in_unit_interval(tt in 0usize..50, tf in 0usize..50, ft in 0usize..50, ff in 0usize..50) {
            let c = ConfusionCounts {
                true_class: ClassCounts { tp: tt, fp: ft, fn_: tf },
                false_class: ClassCounts { tp: ff, fp: tf, fn_: ft },
            };
            let r = report(&c);
            for v in [r.true_class.precision, r.true_class.recall, r.true_class.f1, r.false_class.precision,
                      r.false_class.recall, r.false_class.f1, r.macro_f1, r.weighted_f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn equal_supports_make_weighted_equal_macro(n in 1usize..40, a in 0usize..40, b in 0usize..40) {
            let tp_t = a.min(n);
            let tp_f = b.min(n);
            let c = ConfusionCounts {
                true_class: ClassCounts { tp: tp_t, fp: n - tp_f, fn_: n - tp_t },
                false_class: ClassCounts { tp: tp_f, fp: n - tp_t, fn_: n - tp_f },
            };
            let r = report(&c);
            prop_assert!((r.weighted_f1 - r.macro_f1).abs() < 1e-12);
        }
    }
}
