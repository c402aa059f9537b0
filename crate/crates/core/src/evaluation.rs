//! Pairwise precision/recall of predicted groups against gold labels.
//!
//! Only pairs whose two products both carry a gold label are scored. A
//! predicted pair is a true positive when both products share a gold group and
//! a false positive otherwise. Pairwise recall divides true positives by the
//! number of gold within-group pairs; item recall is reported alongside it.
//! Empty denominators yield 0 and set the matching `*_undefined` flag.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::catalog::{GoldLabel, Product};
use crate::error::{Error, Result};
use crate::grouping::VariantGroup;

/// Release gate: a category is highly accurate at or above this precision.
pub const DEFAULT_PRECISION_GATE: f64 = 0.9;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub ignored_pairs: u64,
    pub gold_pairs: u64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryMetrics {
    pub precision: f64,
    pub recall_pairwise: f64,
    /// Predicted pairs in this category with both products labeled.
    pub n_labeled_pairs: u64,
    pub n_gold_pairs: u64,
    pub meets_precision_gate: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall_pairwise: f64,
    pub recall_item: f64,
    pub f1: f64,
    pub pct_high_precision_categories: f64,
    pub counts: Counts,
    pub per_category: BTreeMap<String, CategoryMetrics>,
}

impl EvalReport {
    /// Categories that were scored but fall below the precision gate.
    pub fn gated_out_categories(&self) -> impl Iterator<Item = &str> {
        self.per_category
            .iter()
            .filter(|(_, m)| m.n_labeled_pairs > 0 && !m.meets_precision_gate)
            .map(|(c, _)| c.as_str())
    }
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

#[derive(Default)]
struct Tally {
    tp: u64,
    fp: u64,
    gold_pairs: u64,
}

pub fn evaluate(
    groups: &[VariantGroup],
    gold: &[GoldLabel],
    products: &[Product],
    precision_gate: f64,
) -> Result<EvalReport> {
    let category_of: HashMap<&str, &str> = products
        .iter()
        .map(|p| (p.id.as_str(), p.category.as_str()))
        .collect();
    let mut gold_of: HashMap<&str, &str> = HashMap::with_capacity(gold.len());
    for label in gold {
        if !category_of.contains_key(label.product_id.as_str()) {
            return Err(Error::UnknownGoldProduct(label.product_id.clone()));
        }
        gold_of.insert(&label.product_id, &label.gold_group_id);
    }

    let mut per_category: BTreeMap<&str, Tally> = BTreeMap::new();
    let mut counts = Counts::default();

    // Gold pairs, attributed to a category only when both ends share it.
    let mut gold_sizes: HashMap<&str, u64> = HashMap::new();
    let mut gold_sizes_by_category: HashMap<(&str, &str), u64> = HashMap::new();
    for (&id, &group) in &gold_of {
        *gold_sizes.entry(group).or_default() += 1;
        *gold_sizes_by_category.entry((group, category_of[id])).or_default() += 1;
    }
    let pairs = |n: u64| n * n.saturating_sub(1) / 2;
    counts.gold_pairs = gold_sizes.values().map(|&n| pairs(n)).sum();
    for (&(_, category), &n) in &gold_sizes_by_category {
        per_category.entry(category).or_default().gold_pairs += pairs(n);
    }

    let mut recalled_items: HashSet<&str> = HashSet::new();
    for group in groups {
        let members: Vec<&str> = group.member_ids.iter().map(String::as_str).collect();
        for id in &members {
            if !category_of.contains_key(id) {
                return Err(Error::UnknownGroupMember(id.to_string()));
            }
        }
        for (i, a) in members.iter().enumerate() {
            for b in &members[i + 1..] {
                let (Some(ga), Some(gb)) = (gold_of.get(a), gold_of.get(b)) else {
                    counts.ignored_pairs += 1;
                    continue;
                };
                let tally = per_category.entry(category_of[a]).or_default();
                if ga == gb {
                    counts.tp += 1;
                    tally.tp += 1;
                    recalled_items.insert(a);
                    recalled_items.insert(b);
                } else {
                    counts.fp += 1;
                    tally.fp += 1;
                }
            }
        }
    }
    counts.fn_ = counts.gold_pairs.saturating_sub(counts.tp);

    let (precision, precision_undefined) = ratio(counts.tp, counts.tp + counts.fp);
    let (recall_pairwise, recall_undefined) = ratio(counts.tp, counts.gold_pairs);
    counts.precision_undefined = precision_undefined;
    counts.recall_undefined = recall_undefined;

    // Items that have at least one labeled gold partner.
    let recallable = gold_of
        .values()
        .filter(|g| gold_sizes[*g] >= 2)
        .count() as u64;
    let (recall_item, _) = ratio(recalled_items.len() as u64, recallable);

    let per_category: BTreeMap<String, CategoryMetrics> = per_category
        .into_iter()
        .map(|(category, t)| {
            let (precision, _) = ratio(t.tp, t.tp + t.fp);
            let (recall_pairwise, _) = ratio(t.tp, t.gold_pairs);
            let n_labeled_pairs = t.tp + t.fp;
            let metrics = CategoryMetrics {
                precision,
                recall_pairwise,
                n_labeled_pairs,
                n_gold_pairs: t.gold_pairs,
                meets_precision_gate: n_labeled_pairs > 0 && precision >= precision_gate,
            };
            (category.to_string(), metrics)
        })
        .collect();
    let scored = per_category.values().filter(|m| m.n_labeled_pairs > 0).count() as u64;
    let passing = per_category.values().filter(|m| m.meets_precision_gate).count() as u64;
    let (pct_high_precision_categories, _) = ratio(passing, scored);

    Ok(EvalReport {
        precision,
        recall_pairwise,
        recall_item,
        f1: f1_score(precision, recall_pairwise),
        pct_high_precision_categories,
        counts,
        per_category,
    })
}

fn percent(x: f64) -> String {
    let s = format!("{:.1}", x * 100.0);
    let s = s.strip_suffix(".0").unwrap_or(&s);
    format!("{s}%")
}

/// Human-readable summary table plus the JSON document.
pub fn render_report(report: &EvalReport) -> Result<(String, String)> {
    let mut table = String::new();
    let header = ["Precision", "Recall", "F1 Score", "Percent of Highly Accurate Categories"];
    let row = [
        percent(report.precision),
        percent(report.recall_pairwise),
        format!("{:.2}", report.f1),
        percent(report.pct_high_precision_categories),
    ];
    let _ = writeln!(table, "{:<10} {:<10} {:<10} {}", header[0], header[1], header[2], header[3]);
    let _ = writeln!(table, "{:<10} {:<10} {:<10} {}", row[0], row[1], row[2], row[3]);
    let _ = writeln!(
        table,
        "\nitem recall {}  tp {}  fp {}  fn {}  ignored pairs {}",
        percent(report.recall_item),
        report.counts.tp,
        report.counts.fp,
        report.counts.fn_,
        report.counts.ignored_pairs
    );
    if !report.per_category.is_empty() {
        let _ = writeln!(table, "\n{:<10} {:<10} {:<8} {:<6} Category", "Precision", "Recall", "Pairs", "Gate");
        for (category, m) in &report.per_category {
            let gate = if m.meets_precision_gate {
                "pass"
            } else if m.n_labeled_pairs == 0 {
                "-"
            } else {
                "fail"
            };
            let _ = writeln!(
                table,
                "{:<10} {:<10} {:<8} {:<6} {}",
                percent(m.precision),
                percent(m.recall_pairwise),
                m.n_labeled_pairs,
                gate,
                category
            );
        }
    }
    let json = serde_json::to_string_pretty(report)?;
    Ok((table, json))
}
