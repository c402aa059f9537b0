//! Oracles and fixtures shared by the integration suites. Nothing here calls
//! the grouping or distance code under test.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use variant_grouping::catalog::{CategoryConfigs, Product};
use variant_grouping::grouping::VariantGroup;
use variant_grouping::normalize::{extract_family_name, NormalizationRules};
use variant_grouping::synthgen::{generate, GeneratedData, GeneratorSpec};

pub fn fold_model(raw: &str) -> Vec<char> {
    raw.chars()
        .filter(|c| !c.is_whitespace())
        .flat_map(char::to_uppercase)
        .collect()
}

/// Exponential recursion on the definition of edit distance.
pub fn naive_levenshtein(a: &[char], b: &[char]) -> usize {
    match (a.split_first(), b.split_first()) {
        (None, _) => b.len(),
        (_, None) => a.len(),
        (Some((ha, ta)), Some((hb, tb))) => {
            let sub = naive_levenshtein(ta, tb) + usize::from(ha != hb);
            sub.min(naive_levenshtein(ta, b) + 1)
                .min(naive_levenshtein(a, tb) + 1)
        }
    }
}

/// Full-matrix Wagner-Fischer.
pub fn matrix_levenshtein(a: &[char], b: &[char]) -> usize {
    let mut m = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in m.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in m[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            m[i][j] = (m[i - 1][j - 1] + cost)
                .min(m[i - 1][j] + 1)
                .min(m[i][j - 1] + 1);
        }
    }
    m[a.len()][b.len()]
}

pub type Partition = BTreeSet<BTreeSet<String>>;

pub fn as_partition(groups: &[VariantGroup]) -> Partition {
    groups
        .iter()
        .map(|g| g.member_ids.iter().cloned().collect())
        .collect()
}

/// Enumerates every pair, applies the pairwise constraints directly, and
/// returns the connected components of size two or more.
pub fn brute_force_groups(
    products: &[Product],
    rules: &NormalizationRules,
    configs: &CategoryConfigs,
    default_threshold: u32,
    family_blocking: bool,
) -> Partition {
    let families: Vec<_> = products
        .iter()
        .map(|p| extract_family_name(p, rules, configs.get(&p.category)))
        .collect();
    let models: Vec<Vec<char>> = products.iter().map(|p| fold_model(&p.model_number)).collect();
    let n = products.len();
    let mut adjacent = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (a, b) = (&products[i], &products[j]);
            if a.brand != b.brand || a.category != b.category {
                continue;
            }
            if family_blocking && (families[i].is_empty() || families[i] != families[j]) {
                continue;
            }
            if models[i].is_empty() && models[j].is_empty() {
                continue;
            }
            let c = configs.threshold_for(&a.category, default_threshold) as usize;
            if matrix_levenshtein(&models[i], &models[j]) <= c {
                adjacent[i].push(j);
            }
        }
    }
    let mut seen = vec![false; n];
    let mut out = Partition::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut stack = vec![start];
        let mut component = BTreeSet::new();
        seen[start] = true;
        while let Some(v) = stack.pop() {
            component.insert(products[v].id.clone());
            for &w in &adjacent[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        if component.len() >= 2 {
            out.insert(component);
        }
    }
    out
}

/// Re-checks emitted groups against the raw inputs and returns every
/// violation found.
pub fn verify_groups(
    groups: &[VariantGroup],
    products: &[Product],
    rules: &NormalizationRules,
    configs: &CategoryConfigs,
    default_threshold: u32,
) -> Vec<String> {
    let by_id: BTreeMap<&str, &Product> = products.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut violations = Vec::new();
    let mut owner: BTreeMap<&str, &str> = BTreeMap::new();
    for g in groups {
        let mut v = |msg: String| violations.push(format!("group {}: {msg}", g.group_id));
        if g.member_ids.len() < 2 {
            v("fewer than two members".into());
            continue;
        }
        if !g.member_ids.windows(2).all(|w| w[0] < w[1]) {
            v("members not sorted and unique".into());
        }
        if g.group_id != g.member_ids[0] {
            v("group id is not the smallest member".into());
        }
        let Some(members) = g
            .member_ids
            .iter()
            .map(|id| by_id.get(id.as_str()).copied())
            .collect::<Option<Vec<&Product>>>()
        else {
            v("unknown member".into());
            continue;
        };
        for m in &members {
            if let Some(prev) = owner.insert(&m.id, &g.group_id) {
                v(format!("{} also in group {prev}", m.id));
            }
        }
        let first = members[0];
        let family = extract_family_name(first, rules, configs.get(&first.category));
        if family.is_empty() {
            v("empty family name".into());
        }
        if family.tokens() != g.justification.family_tokens.as_slice() {
            v("justification family differs from recomputed family".into());
        }
        for m in &members[1..] {
            if m.brand != first.brand {
                v(format!("brand mismatch {} vs {}", m.id, first.id));
            }
            if m.category != first.category {
                v(format!("category mismatch {} vs {}", m.id, first.id));
            }
            if extract_family_name(m, rules, configs.get(&m.category)) != family {
                v(format!("family mismatch {} vs {}", m.id, first.id));
            }
        }
        let c = configs.threshold_for(&first.category, default_threshold) as usize;
        for (i, m) in members.iter().enumerate() {
            let mi = fold_model(&m.model_number);
            let nearest = members
                .iter()
                .enumerate()
                .filter(|(j, o)| *j != i && !(mi.is_empty() && fold_model(&o.model_number).is_empty()))
                .map(|(_, o)| matrix_levenshtein(&mi, &fold_model(&o.model_number)))
                .min();
            match nearest {
                Some(d) if d <= c => {}
                other => v(format!("{} nearest distance {other:?} exceeds c={c}", m.id)),
            }
        }
    }
    violations
}

/// A small random catalog (at most 50 products) drawn from the generator,
/// with some titles copied across families so family names collide.
pub fn random_catalog(seed: u64) -> GeneratedData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let gap = rng.gen_range(0..=4);
    let spec = GeneratorSpec {
        seed,
        n_categories: rng.gen_range(1..=2),
        families_per_category: rng.gen_range(2..=7),
        variants_per_family: [1.0, 2.0, 2.0, 1.0, 1.0, 0.5, 0.0, 0.0],
        model_stem_length: rng.gen_range(gap.max(3)..=6),
        suffix_edit_ops: [1.0, 1.0, 0.5],
        distractor_rate: 0.3,
        cross_family_model_gap: gap,
        brands_per_category: rng.gen_range(1..=2),
        ..Default::default()
    };
    let mut data = generate(&spec).expect("valid spec");
    data.catalog.truncate(50);
    let kept: BTreeSet<String> = data.catalog.iter().map(|p| p.id.clone()).collect();
    data.gold.retain(|l| kept.contains(&l.product_id));

    let n = data.catalog.len();
    for i in 0..n {
        if rng.gen_bool(0.1) {
            let j = rng.gen_range(0..n);
            if data.catalog[i].category == data.catalog[j].category {
                let (brand, title) = (data.catalog[j].brand.clone(), data.catalog[j].title.clone());
                data.catalog[i].brand = brand;
                data.catalog[i].title = title;
            }
        }
        if rng.gen_bool(0.03) {
            data.catalog[i].model_number.clear();
        }
    }
    for category in data.configs.iter().map(|c| c.category.clone()).collect::<Vec<_>>() {
        if rng.gen_bool(0.7) {
            data.configs.set_threshold(&category, rng.gen_range(0..=4));
        }
    }
    data
}

/// Specs used by the end-to-end criteria.
pub fn separable_spec(seed: u64) -> GeneratorSpec {
    GeneratorSpec {
        seed,
        n_categories: 10,
        families_per_category: 160,
        variants_per_family: [1.0, 2.0, 2.0, 2.0, 1.0, 0.0, 0.0, 0.0],
        model_stem_length: 8,
        suffix_edit_ops: [1.0, 1.0, 0.0],
        distractor_rate: 0.2,
        cross_family_model_gap: 6,
        brands_per_category: 2,
        ..Default::default()
    }
}

pub fn inseparable_spec(seed: u64) -> GeneratorSpec {
    GeneratorSpec {
        seed,
        n_categories: 6,
        families_per_category: 60,
        cross_family_model_gap: 1,
        distractor_rate: 0.5,
        ..separable_spec(seed)
    }
}
