//! Per-category grid search over the model-number distance threshold.
//!
//! Each grid point regroups the category at that threshold and scores it
//! against the gold labels. The threshold with the highest F1 wins; ties go to
//! the smallest threshold.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{CategoryConfigs, GoldLabel, Product};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, DEFAULT_PRECISION_GATE};
use crate::grouping::{group_catalog, GroupingOptions};
use crate::normalize::NormalizationRules;

pub const DEFAULT_GRID: [u32; 7] = [0, 1, 2, 3, 4, 5, 6];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub precision: f64,
    pub recall_pairwise: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningResult {
    pub category: String,
    pub chosen_threshold: u32,
    pub objective_curve: BTreeMap<u32, CurvePoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TuningOutcome {
    Tuned(TuningResult),
    /// The category has no labeled gold pairs.
    Untunable {
        category: String,
        default_threshold: u32,
    },
}

impl TuningOutcome {
    pub fn category(&self) -> &str {
        match self {
            TuningOutcome::Tuned(r) => &r.category,
            TuningOutcome::Untunable { category, .. } => category,
        }
    }

    pub fn threshold(&self) -> u32 {
        match self {
            TuningOutcome::Tuned(r) => r.chosen_threshold,
            TuningOutcome::Untunable {
                default_threshold, ..
            } => *default_threshold,
        }
    }
}

/// One entry of the tuning output document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningEntry {
    pub threshold: u32,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub untunable: bool,
    pub curve: BTreeMap<u32, CurvePoint>,
}

impl From<&TuningOutcome> for TuningEntry {
    fn from(outcome: &TuningOutcome) -> Self {
        match outcome {
            TuningOutcome::Tuned(r) => TuningEntry {
                threshold: r.chosen_threshold,
                untunable: false,
                curve: r.objective_curve.clone(),
            },
            TuningOutcome::Untunable {
                default_threshold, ..
            } => TuningEntry {
                threshold: *default_threshold,
                untunable: true,
                curve: BTreeMap::new(),
            },
        }
    }
}

/// Parses a comma-separated list of thresholds such as `0,1,2`.
pub fn parse_grid(text: &str) -> Result<Vec<u32>> {
    let grid = text
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<u32>()
                .map_err(|_| Error::InvalidGrid(format!("{part:?} is not a non-negative integer")))
        })
        .collect::<Result<Vec<_>>>()?;
    validate_grid(&grid)?;
    Ok(grid)
}

pub fn validate_grid(grid: &[u32]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("grid is empty".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidGrid(format!("{grid:?} is not strictly ascending")));
    }
    Ok(())
}

fn labeled_pair_count(products: &[Product], gold: &[GoldLabel]) -> u64 {
    let ids: HashSet<&str> = products.iter().map(|p| p.id.as_str()).collect();
    let mut sizes: BTreeMap<&str, u64> = BTreeMap::new();
    for label in gold.iter().filter(|l| ids.contains(l.product_id.as_str())) {
        *sizes.entry(&label.gold_group_id).or_default() += 1;
    }
    sizes.values().map(|&n| n * n.saturating_sub(1) / 2).sum()
}

/// Grid-searches the threshold for one category.
pub fn tune_threshold(
    category: &str,
    products: &[Product],
    gold: &[GoldLabel],
    rules: &NormalizationRules,
    configs: &CategoryConfigs,
    grid: &[u32],
    options: &GroupingOptions,
) -> Result<TuningOutcome> {
    validate_grid(grid)?;
    let in_category: Vec<Product> = products
        .iter()
        .filter(|p| p.category == category)
        .cloned()
        .collect();
    let ids: HashSet<&str> = in_category.iter().map(|p| p.id.as_str()).collect();
    let gold: Vec<GoldLabel> = gold
        .iter()
        .filter(|l| ids.contains(l.product_id.as_str()))
        .cloned()
        .collect();
    if labeled_pair_count(&in_category, &gold) == 0 {
        return Ok(TuningOutcome::Untunable {
            category: category.to_string(),
            default_threshold: options.default_threshold,
        });
    }

    let curve = grid
        .par_iter()
        .map(|&c| {
            let mut configs = configs.clone();
            configs.set_threshold(category, c);
            let grouped = group_catalog(&in_category, rules, &configs, options)?;
            let report = evaluate(&grouped.groups, &gold, &in_category, DEFAULT_PRECISION_GATE)?;
            Ok((
                c,
                CurvePoint {
                    precision: report.precision,
                    recall_pairwise: report.recall_pairwise,
                    f1: report.f1,
                },
            ))
        })
        .collect::<Result<BTreeMap<u32, CurvePoint>>>()?;

    // Ascending scan with strict improvement keeps the smallest threshold on ties.
    let mut best = grid[0];
    for (&c, point) in &curve {
        if point.f1 > curve[&best].f1 {
            best = c;
        }
    }
    Ok(TuningOutcome::Tuned(TuningResult {
        category: category.to_string(),
        chosen_threshold: best,
        objective_curve: curve,
    }))
}

/// Tunes every category present in the catalog.
pub fn tune_all(
    products: &[Product],
    gold: &[GoldLabel],
    rules: &NormalizationRules,
    configs: &CategoryConfigs,
    grid: &[u32],
    options: &GroupingOptions,
) -> Result<BTreeMap<String, TuningOutcome>> {
    validate_grid(grid)?;
    let categories: BTreeSet<&str> = products.iter().map(|p| p.category.as_str()).collect();
    categories
        .into_par_iter()
        .map(|category| {
            let outcome = tune_threshold(category, products, gold, rules, configs, grid, options)?;
            Ok((category.to_string(), outcome))
        })
        .collect()
}

/// Writes tuned thresholds into `configs`; untunable categories are left as-is.
pub fn apply_tuning(
    configs: &mut CategoryConfigs,
    outcomes: &BTreeMap<String, TuningOutcome>,
    gold_digest: Option<&str>,
) {
    for outcome in outcomes.values() {
        if let TuningOutcome::Tuned(result) = outcome {
            configs.set_threshold(&result.category, result.chosen_threshold);
            if let Some(config) = configs.get_mut(&result.category) {
                config.tuned_on_gold = gold_digest.map(str::to_string);
            }
        }
    }
}

pub fn tuning_json(outcomes: &BTreeMap<String, TuningOutcome>) -> Result<String> {
    let doc: BTreeMap<&str, TuningEntry> = outcomes
        .iter()
        .map(|(category, outcome)| (category.as_str(), TuningEntry::from(outcome)))
        .collect();
    Ok(serde_json::to_string_pretty(&doc)?)
}
