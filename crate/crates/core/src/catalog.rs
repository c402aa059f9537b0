//! Catalog data model: products, gold labels and per-category configuration.
//!
//! Catalog and gold files are JSON Lines. Every catalog record carries exactly
//! the keys `id`, `brand`, `category`, `title` and `model_number`; a missing or
//! extra key is a located parse error rather than an imputed default.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Product {
    pub id: String,
    pub brand: String,
    pub category: String,
    pub title: String,
    pub model_number: String,
}

impl Product {
    /// Looks up a product attribute by its catalog key.
    pub fn attribute(&self, name: &str) -> Option<&str> {
        match name {
            "id" => Some(&self.id),
            "brand" => Some(&self.brand),
            "category" => Some(&self.category),
            "title" => Some(&self.title),
            "model_number" => Some(&self.model_number),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldLabel {
    pub product_id: String,
    pub gold_group_id: String,
}

/// Variant attributes and model-number threshold for one category.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryConfig {
    /// Filled from the map key when loaded from a configs file.
    #[serde(skip)]
    pub category: String,
    #[serde(default)]
    pub variant_attribute_tokens: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_number_threshold: Option<u32>,
    /// Digest of the gold file the threshold was tuned on, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuned_on_gold: Option<String>,
}

impl CategoryConfig {
    pub fn new(category: impl Into<String>) -> Self {
        Self {
            category: category.into(),
            ..Default::default()
        }
    }

    pub fn with_variant_tokens<I, S>(mut self, tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.variant_attribute_tokens = tokens.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_threshold(mut self, threshold: u32) -> Self {
        self.model_number_threshold = Some(threshold);
        self
    }

    fn validate(&self) -> Result<()> {
        if let Some(bad) = self
            .variant_attribute_tokens
            .iter()
            .find(|t| !crate::normalize::is_canonical_token(t))
        {
            return Err(Error::InvalidCategoryConfig {
                category: self.category.clone(),
                message: format!("variant token {bad:?} is not lowercase and punctuation-free"),
            });
        }
        Ok(())
    }
}

/// All category configurations, keyed by the exact category string.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CategoryConfigs {
    by_category: BTreeMap<String, CategoryConfig>,
}

impl CategoryConfigs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, config: CategoryConfig) -> Result<()> {
        config.validate()?;
        self.by_category.insert(config.category.clone(), config);
        Ok(())
    }

    pub fn get(&self, category: &str) -> Option<&CategoryConfig> {
        self.by_category.get(category)
    }

    pub fn get_mut(&mut self, category: &str) -> Option<&mut CategoryConfig> {
        self.by_category.get_mut(category)
    }

    /// Returns the configured threshold for `category`, or `default` when unset.
    pub fn threshold_for(&self, category: &str, default: u32) -> u32 {
        self.get(category)
            .and_then(|c| c.model_number_threshold)
            .unwrap_or(default)
    }

    /// Sets the threshold for `category`, creating an empty config if needed.
    pub fn set_threshold(&mut self, category: &str, threshold: u32) {
        self.by_category
            .entry(category.to_string())
            .or_insert_with(|| CategoryConfig::new(category))
            .model_number_threshold = Some(threshold);
    }

    pub fn iter(&self) -> impl Iterator<Item = &CategoryConfig> {
        self.by_category.values()
    }

    pub fn len(&self) -> usize {
        self.by_category.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_category.is_empty()
    }

    /// Parses a configs document: a JSON object mapping category to config.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, CategoryConfig> = serde_json::from_str(text)?;
        let mut configs = Self::new();
        for (category, mut config) in raw {
            config.category = category;
            configs.insert(config)?;
        }
        Ok(configs)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.by_category)?)
    }
}

impl FromIterator<CategoryConfig> for CategoryConfigs {
    fn from_iter<T: IntoIterator<Item = CategoryConfig>>(iter: T) -> Self {
        let mut configs = Self::new();
        for config in iter {
            configs.by_category.insert(config.category.clone(), config);
        }
        configs
    }
}

fn parse_lines<R, T, F>(reader: R, mut accept: F) -> Result<()>
where
    R: BufRead,
    T: serde::de::DeserializeOwned,
    F: FnMut(usize, T) -> Result<()>,
{
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        accept(line_no, record)?;
    }
    Ok(())
}

/// Reads a JSON Lines catalog, preserving input order.
pub fn load_catalog<R: BufRead>(reader: R) -> Result<Vec<Product>> {
    let mut products = Vec::new();
    let mut seen = HashSet::new();
    parse_lines(reader, |line, product: Product| {
        if product.id.is_empty() {
            return Err(Error::EmptyId { line });
        }
        if !seen.insert(product.id.clone()) {
            return Err(Error::DuplicateId(product.id));
        }
        products.push(product);
        Ok(())
    })?;
    Ok(products)
}

/// Reads JSON Lines gold labels. A repeated identical label is collapsed;
/// a product labeled with two different groups is rejected.
pub fn load_gold<R: BufRead>(reader: R) -> Result<Vec<GoldLabel>> {
    let mut labels = Vec::new();
    let mut group_of: HashMap<String, String> = HashMap::new();
    parse_lines(reader, |_, label: GoldLabel| {
        match group_of.get(&label.product_id) {
            Some(existing) if *existing == label.gold_group_id => {}
            Some(existing) => {
                return Err(Error::ConflictingGold {
                    product_id: label.product_id,
                    first: existing.clone(),
                    second: label.gold_group_id,
                })
            }
            None => {
                group_of.insert(label.product_id.clone(), label.gold_group_id.clone());
                labels.push(label);
            }
        }
        Ok(())
    })?;
    Ok(labels)
}

pub fn write_jsonl<W: Write, T: Serialize>(mut out: W, records: &[T]) -> Result<()> {
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: &str) -> String {
        format!(
            r#"{{"id":"{id}","brand":"Delta","category":"Faucets","title":"Lahara Faucet","model_number":"K-1"}}"#
        )
    }

    #[test]
    fn loads_single_product() {
        let products = load_catalog(line("p1").as_bytes()).unwrap();
        assert_eq!(products.len(), 1);
        assert_eq!(products[0].id, "p1");
        assert_eq!(products[0].model_number, "K-1");
    }

    #[test]
    fn empty_stream_is_empty_catalog() {
        assert!(load_catalog("".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let input = format!("{}\n{}\n", line("p1"), line("p1"));
        match load_catalog(input.as_bytes()) {
            Err(Error::DuplicateId(id)) => assert_eq!(id, "p1"),
            other => panic!("expected duplicate id error, got {other:?}"),
        }
    }

    #[test]
    fn missing_field_reports_line() {
        let input = format!(
            "{}\n{}\n",
            line("p1"),
            r#"{"id":"p2","brand":"Delta","category":"Faucets","title":"x"}"#
        );
        match load_catalog(input.as_bytes()) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("model_number"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_key_and_bad_json_are_parse_errors() {
        let extra = r#"{"id":"p","brand":"","category":"","title":"","model_number":"","price":"1"}"#;
        assert!(matches!(
            load_catalog(extra.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            load_catalog("{not json".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn empty_strings_are_allowed_but_empty_id_is_not() {
        let ok = r#"{"id":"p","brand":"","category":"","title":"","model_number":""}"#;
        assert_eq!(load_catalog(ok.as_bytes()).unwrap().len(), 1);
        let bad = r#"{"id":"","brand":"","category":"","title":"","model_number":""}"#;
        assert!(matches!(
            load_catalog(bad.as_bytes()),
            Err(Error::EmptyId { line: 1 })
        ));
    }

    #[test]
    fn ids_are_not_trimmed() {
        let input = format!("{}\n{}\n", line("p1"), line(" p1"));
        let products = load_catalog(input.as_bytes()).unwrap();
        assert_eq!(products[1].id, " p1");
    }

    #[test]
    fn gold_labels() {
        let one = r#"{"product_id":"p1","gold_group_id":"g1"}"#;
        assert_eq!(load_gold(one.as_bytes()).unwrap().len(), 1);

        let conflict = format!("{one}\n{}\n", r#"{"product_id":"p1","gold_group_id":"g2"}"#);
        assert!(matches!(
            load_gold(conflict.as_bytes()),
            Err(Error::ConflictingGold { .. })
        ));

        let same_group = format!("{one}\n{}\n", r#"{"product_id":"p2","gold_group_id":"g1"}"#);
        let labels = load_gold(same_group.as_bytes()).unwrap();
        assert_eq!(labels.len(), 2);
        assert_eq!(labels[0].gold_group_id, labels[1].gold_group_id);
    }

    #[test]
    fn catalog_round_trips_through_jsonl() {
        let input = format!("{}\n{}\n", line("b"), line("a"));
        let products = load_catalog(input.as_bytes()).unwrap();
        let mut out = Vec::new();
        write_jsonl(&mut out, &products).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), input);
    }

    #[test]
    fn configs_parse_and_validate() {
        let text = r#"{"Faucets":{"variant_attribute_tokens":["chrome","bronze"],"model_number_threshold":3},
                       "Pipes":{}}"#;
        let configs = CategoryConfigs::from_json(text).unwrap();
        assert_eq!(configs.threshold_for("Faucets", 2), 3);
        assert_eq!(configs.threshold_for("Pipes", 2), 2);
        assert_eq!(configs.threshold_for("Unknown", 2), 2);
        assert_eq!(configs.get("Faucets").unwrap().category, "Faucets");

        let bad = r#"{"Faucets":{"variant_attribute_tokens":["Chrome"]}}"#;
        assert!(matches!(
            CategoryConfigs::from_json(bad),
            Err(Error::InvalidCategoryConfig { .. })
        ));
        let negative = r#"{"Faucets":{"model_number_threshold":-1}}"#;
        assert!(CategoryConfigs::from_json(negative).is_err());
    }
}
