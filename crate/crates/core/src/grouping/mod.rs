//! Constrained clustering of products into variant groups.
//!
//! Products are blocked on exact brand, category and family name. Inside a
//! block, two products are linked when their model numbers are within the
//! category's edit-distance threshold, and each connected component of two or
//! more products becomes a [`VariantGroup`]. Optional aggregate constraints
//! then drop whole groups that fail them.

mod aggregate;

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use petgraph::unionfind::UnionFind;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{CategoryConfigs, Product};
use crate::editdist::{bounded_char_distance, normalize_model_number};
use crate::error::Result;
use crate::normalize::{extract_family_name, FamilyName, NormalizationRules};

pub use aggregate::{
    check_aggregate_constraint, index_products, AggregateConstraint, AggregateKind, Comparator,
    ProductIndex,
};

/// Threshold used for categories without a tuned value.
pub const DEFAULT_THRESHOLD: u32 = 2;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockKey {
    pub brand: String,
    pub category: String,
    pub family: FamilyName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SkipReason {
    #[serde(rename = "empty family name")]
    EmptyFamilyName,
}

impl SkipReason {
    pub fn as_str(self) -> &'static str {
        match self {
            SkipReason::EmptyFamilyName => "empty family name",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedProduct {
    pub product_id: String,
    pub reason: SkipReason,
}

/// Why a group's members belong together.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Justification {
    pub brand: String,
    pub category: String,
    pub family_tokens: Vec<String>,
    /// Distance from each member to its closest linked partner.
    pub nearest_neighbor_distances: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantGroup {
    /// Lexicographically smallest member id.
    pub group_id: String,
    /// Sorted, at least two entries.
    pub member_ids: Vec<String>,
    #[serde(flatten)]
    pub justification: Justification,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupingOptions {
    pub default_threshold: u32,
    /// When false, blocks are formed on brand and category only.
    pub family_blocking: bool,
    /// Post-filters applied to every candidate group.
    pub constraints: Vec<AggregateConstraint>,
}

impl Default for GroupingOptions {
    fn default() -> Self {
        Self {
            default_threshold: DEFAULT_THRESHOLD,
            family_blocking: true,
            constraints: Vec::new(),
        }
    }
}

#[derive(Debug, Default)]
pub struct Blocks<'a> {
    pub blocks: BTreeMap<BlockKey, Vec<&'a Product>>,
    pub skipped: Vec<SkippedProduct>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroupingOutput {
    pub groups: Vec<VariantGroup>,
    pub skipped: Vec<SkippedProduct>,
}

/// Computes the block key of a product, or `None` if its family name is empty
/// and family blocking is on.
pub fn block_key(
    product: &Product,
    rules: &NormalizationRules,
    configs: &CategoryConfigs,
    family_blocking: bool,
) -> Option<BlockKey> {
    let family = if family_blocking {
        let family = extract_family_name(product, rules, configs.get(&product.category));
        if family.is_empty() {
            return None;
        }
        family
    } else {
        FamilyName::default()
    };
    Some(BlockKey {
        brand: product.brand.clone(),
        category: product.category.clone(),
        family,
    })
}

pub fn build_blocks<'a>(
    products: &'a [Product],
    rules: &NormalizationRules,
    configs: &CategoryConfigs,
    options: &GroupingOptions,
) -> Blocks<'a> {
    let mut unconfigured = BTreeSet::new();
    let mut out = Blocks::default();
    for product in products {
        if configs.get(&product.category).is_none() {
            unconfigured.insert(product.category.as_str());
        }
        match block_key(product, rules, configs, options.family_blocking) {
            Some(key) => out.blocks.entry(key).or_default().push(product),
            None => out.skipped.push(SkippedProduct {
                product_id: product.id.clone(),
                reason: SkipReason::EmptyFamilyName,
            }),
        }
    }
    for category in unconfigured {
        warn!("no category config for {category:?}; using empty variant attributes");
    }
    out
}

/// Algorithm-level pairwise test: same brand, same category, same non-empty
/// family name, and model numbers within the category threshold.
pub fn are_variant_candidates(
    a: &Product,
    b: &Product,
    rules: &NormalizationRules,
    configs: &CategoryConfigs,
    default_threshold: u32,
) -> bool {
    if a.brand != b.brand || a.category != b.category {
        return false;
    }
    let config = configs.get(&a.category);
    let family = extract_family_name(a, rules, config);
    if family.is_empty() || family != extract_family_name(b, rules, config) {
        return false;
    }
    let (ka, kb) = (
        normalize_model_number(&a.model_number),
        normalize_model_number(&b.model_number),
    );
    if ka.is_empty() && kb.is_empty() {
        return false;
    }
    let c = configs.threshold_for(&a.category, default_threshold) as usize;
    bounded_char_distance(&ka.chars(), &kb.chars(), c).is_some()
}

/// Single-linkage clustering of one block under threshold `c`; components of
/// size one are dropped. Two empty model numbers never link.
pub fn cluster_block(key: &BlockKey, products: &[&Product], c: u32) -> Vec<VariantGroup> {
    let keys: Vec<Vec<char>> = products
        .iter()
        .map(|p| normalize_model_number(&p.model_number).chars())
        .collect();
    let n = products.len();
    let mut components = UnionFind::new(n);
    let mut nearest: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        for j in i + 1..n {
            if keys[i].is_empty() && keys[j].is_empty() {
                continue;
            }
            if let Some(d) = bounded_char_distance(&keys[i], &keys[j], c as usize) {
                components.union(i, j);
                for k in [i, j] {
                    nearest[k] = Some(nearest[k].map_or(d, |cur| cur.min(d)));
                }
            }
        }
    }

    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        members.entry(components.find(i)).or_default().push(i);
    }
    let mut groups: Vec<VariantGroup> = members
        .into_values()
        .filter(|m| m.len() >= 2)
        .map(|m| {
            let mut member_ids: Vec<String> = m.iter().map(|&i| products[i].id.clone()).collect();
            member_ids.sort();
            let nearest_neighbor_distances = m
                .iter()
                .map(|&i| {
                    let d = nearest[i].expect("linked member has a nearest neighbor");
                    (products[i].id.clone(), d)
                })
                .collect();
            VariantGroup {
                group_id: member_ids[0].clone(),
                member_ids,
                justification: Justification {
                    brand: key.brand.clone(),
                    category: key.category.clone(),
                    family_tokens: key.family.tokens().to_vec(),
                    nearest_neighbor_distances,
                },
            }
        })
        .collect();
    groups.sort_by(|a, b| a.group_id.cmp(&b.group_id));
    groups
}

/// Blocks the catalog, clusters each block with its category threshold, and
/// applies any aggregate constraints. Output is sorted by group id.
pub fn group_catalog(
    products: &[Product],
    rules: &NormalizationRules,
    configs: &CategoryConfigs,
    options: &GroupingOptions,
) -> Result<GroupingOutput> {
    let Blocks { blocks, mut skipped } = build_blocks(products, rules, configs, options);
    let blocks: Vec<_> = blocks.into_iter().collect();
    let candidates: Vec<VariantGroup> = blocks
        .par_iter()
        .flat_map_iter(|(key, members)| {
            let c = configs.threshold_for(&key.category, options.default_threshold);
            cluster_block(key, members, c)
        })
        .collect();

    let mut groups = if options.constraints.is_empty() {
        candidates
    } else {
        let index = index_products(products);
        let mut kept = Vec::with_capacity(candidates.len());
        for group in candidates {
            let mut pass = true;
            for constraint in &options.constraints {
                if !check_aggregate_constraint(&group, &index, constraint)? {
                    pass = false;
                    break;
                }
            }
            if pass {
                kept.push(group);
            }
        }
        kept
    };
    groups.sort_by(|a, b| a.group_id.cmp(&b.group_id));
    skipped.sort_by(|a, b| a.product_id.cmp(&b.product_id));
    Ok(GroupingOutput { groups, skipped })
}
