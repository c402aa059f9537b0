//! Title cleaning: extracts a product family name from a free-text title.
//!
//! The pipeline runs in a fixed order: tokenize, canonicalize synonyms, drop
//! numbers and units, drop brand tokens, drop blacklisted tokens, drop tokens
//! already carried by the category, and finally drop the category's variant
//! attribute tokens. What survives, in title order, is the family name.
//!
//! All lexicon matching is single-token set membership. Lexicons hold
//! canonical (post-synonym) tokens only.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::catalog::{CategoryConfig, Product};
use crate::error::{Error, Result};

/// Dictionaries driving the title-cleaning pipeline.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalizationRules {
    #[serde(default)]
    pub synonyms: BTreeMap<String, String>,
    #[serde(default)]
    pub blacklist: BTreeSet<String>,
    #[serde(default)]
    pub units: BTreeSet<String>,
    #[serde(default, rename = "brands")]
    pub brand_lexicon: BTreeMap<String, BTreeSet<String>>,
    #[serde(default, rename = "categories")]
    pub category_lexicon: BTreeMap<String, BTreeSet<String>>,
}

impl NormalizationRules {
    /// Parses and validates a rules document.
    pub fn from_json(text: &str) -> Result<Self> {
        let rules: Self = serde_json::from_str(text)?;
        rules.validate()?;
        Ok(rules)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Checks that every token is canonical and that synonym targets are not
    /// themselves synonym keys.
    pub fn validate(&self) -> Result<()> {
        let check = |what: &str, token: &str| {
            if is_canonical_token(token) {
                Ok(())
            } else {
                Err(Error::InvalidRules(format!(
                    "{what} token {token:?} is not lowercase and punctuation-free"
                )))
            }
        };
        for (from, to) in &self.synonyms {
            check("synonym", from)?;
            check("synonym", to)?;
            if from != to && self.synonyms.contains_key(to) {
                return Err(Error::InvalidRules(format!(
                    "synonym {from:?} -> {to:?} targets another synonym key"
                )));
            }
        }
        for token in self.blacklist.iter() {
            check("blacklist", token)?;
        }
        for token in self.units.iter() {
            check("unit", token)?;
        }
        for tokens in self.brand_lexicon.values() {
            for token in tokens {
                check("brand", token)?;
            }
        }
        for tokens in self.category_lexicon.values() {
            for token in tokens {
                check("category", token)?;
            }
        }
        Ok(())
    }

    fn brand_tokens(&self, brand: &str) -> BTreeSet<String> {
        self.brand_lexicon
            .get(brand)
            .cloned()
            .unwrap_or_else(|| apply_synonyms(tokenize(brand), self).into_iter().collect())
    }

    fn category_tokens(&self, category: &str) -> BTreeSet<String> {
        self.category_lexicon
            .get(category)
            .cloned()
            .unwrap_or_else(|| apply_synonyms(tokenize(category), self).into_iter().collect())
    }
}

/// Ordered token sequence left after title cleaning. Equality is sequence
/// equality.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FamilyName(Vec<String>);

impl FamilyName {
    pub fn new(tokens: Vec<String>) -> Self {
        Self(tokens)
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Joins the tokens back into a title-like string.
    pub fn to_title(&self) -> String {
        self.0.join(" ")
    }
}

impl fmt::Display for FamilyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.0.join(", "))
    }
}

/// True when `token` is a single lowercase token with no punctuation, i.e. it
/// survives [`tokenize`] unchanged.
pub fn is_canonical_token(token: &str) -> bool {
    let tokens = tokenize(token);
    tokens.len() == 1 && tokens[0] == token
}

/// Lowercases, folds compatibility forms and diacritics, and splits on every
/// non-alphanumeric character.
pub fn tokenize(title: &str) -> Vec<String> {
    // Lowercasing can reintroduce combining marks and compatibility forms can
    // expand to uppercase, so fold on both sides.
    let decomposed: String = title.nfkd().filter(|c| !is_combining_mark(*c)).collect();
    let folded: String = decomposed
        .to_lowercase()
        .nfkd()
        .filter(|c| !is_combining_mark(*c))
        .collect();
    folded
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn apply_synonyms(tokens: Vec<String>, rules: &NormalizationRules) -> Vec<String> {
    tokens
        .into_iter()
        .map(|t| match rules.synonyms.get(&t) {
            Some(canonical) => canonical.clone(),
            None => t,
        })
        .collect()
}

/// Integers, decimals and simple fractions such as `1/2`. Mixed codes like
/// `t4502` are not numbers.
pub fn is_numeric(token: &str) -> bool {
    fn decimal(s: &str) -> bool {
        let mut parts = s.splitn(2, '.');
        let int = parts.next().unwrap_or("");
        let frac = parts.next();
        let digits = |p: &str| p.chars().all(char::is_numeric);
        match frac {
            None => !int.is_empty() && digits(int),
            Some(frac) => {
                (!int.is_empty() || !frac.is_empty()) && digits(int) && digits(frac)
            }
        }
    }
    match token.split_once('/') {
        Some((num, den)) => {
            !num.is_empty() && !den.is_empty() && decimal(num) && decimal(den)
        }
        None => decimal(token),
    }
}

/// Drops numeric tokens and any token in the unit lexicon.
pub fn strip_numbers_and_units(mut tokens: Vec<String>, rules: &NormalizationRules) -> Vec<String> {
    tokens.retain(|t| !is_numeric(t) && !rules.units.contains(t));
    tokens
}

pub fn strip_brand(mut tokens: Vec<String>, brand: &str, rules: &NormalizationRules) -> Vec<String> {
    let brand_tokens = rules.brand_tokens(brand);
    tokens.retain(|t| !brand_tokens.contains(t));
    tokens
}

pub fn strip_blacklist(mut tokens: Vec<String>, rules: &NormalizationRules) -> Vec<String> {
    tokens.retain(|t| !rules.blacklist.contains(t));
    tokens
}

pub fn strip_category_tokens(
    mut tokens: Vec<String>,
    category: &str,
    rules: &NormalizationRules,
) -> Vec<String> {
    let category_tokens = rules.category_tokens(category);
    tokens.retain(|t| !category_tokens.contains(t));
    tokens
}

pub fn strip_variant_attributes(
    mut tokens: Vec<String>,
    config: Option<&CategoryConfig>,
) -> Vec<String> {
    if let Some(config) = config {
        tokens.retain(|t| !config.variant_attribute_tokens.contains(t));
    }
    tokens
}

/// One step of the cleaning pipeline, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Tokenize,
    Synonyms,
    NumbersAndUnits,
    Brand,
    Blacklist,
    CategoryTokens,
    VariantAttributes,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Tokenize,
        Stage::Synonyms,
        Stage::NumbersAndUnits,
        Stage::Brand,
        Stage::Blacklist,
        Stage::CategoryTokens,
        Stage::VariantAttributes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Tokenize => "tokenize",
            Stage::Synonyms => "synonyms",
            Stage::NumbersAndUnits => "numbers and units",
            Stage::Brand => "brand",
            Stage::Blacklist => "blacklist",
            Stage::CategoryTokens => "category tokens",
            Stage::VariantAttributes => "variant attributes",
        }
    }
}

fn run_pipeline(
    product: &Product,
    rules: &NormalizationRules,
    config: Option<&CategoryConfig>,
    mut observe: impl FnMut(Stage, &[String]),
) -> FamilyName {
    let mut tokens = Vec::new();
    for stage in Stage::ALL {
        tokens = match stage {
            Stage::Tokenize => tokenize(&product.title),
            Stage::Synonyms => apply_synonyms(tokens, rules),
            Stage::NumbersAndUnits => strip_numbers_and_units(tokens, rules),
            Stage::Brand => strip_brand(tokens, &product.brand, rules),
            Stage::Blacklist => strip_blacklist(tokens, rules),
            Stage::CategoryTokens => strip_category_tokens(tokens, &product.category, rules),
            Stage::VariantAttributes => strip_variant_attributes(tokens, config),
        };
        observe(stage, &tokens);
    }
    FamilyName(tokens)
}

/// Runs the full cleaning pipeline over a product's title.
pub fn extract_family_name(
    product: &Product,
    rules: &NormalizationRules,
    config: Option<&CategoryConfig>,
) -> FamilyName {
    run_pipeline(product, rules, config, |_, _| {})
}

/// Like [`extract_family_name`], also returning the tokens after each stage.
pub fn family_name_trace(
    product: &Product,
    rules: &NormalizationRules,
    config: Option<&CategoryConfig>,
) -> (FamilyName, Vec<(Stage, Vec<String>)>) {
    let mut trace = Vec::with_capacity(Stage::ALL.len());
    let family = run_pipeline(product, rules, config, |stage, tokens| {
        trace.push((stage, tokens.to_vec()))
    });
    (family, trace)
}
