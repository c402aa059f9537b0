//! Cluster-level aggregate constraints of the form `agg(values) op constant`
//! or `count(group) op constant`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::VariantGroup;
use crate::catalog::Product;
use crate::error::{Error, Result};

pub type ProductIndex<'a> = HashMap<&'a str, &'a Product>;

pub fn index_products(products: &[Product]) -> ProductIndex<'_> {
    products.iter().map(|p| (p.id.as_str(), p)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregateKind {
    Max,
    Min,
    Avg,
    Sum,
    Count,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=", alias = "≤")]
    Le,
    #[serde(rename = "!=", alias = "≠")]
    Ne,
    #[serde(rename = "=", alias = "==")]
    Eq,
    #[serde(rename = ">=", alias = "≥")]
    Ge,
    #[serde(rename = ">")]
    Gt,
}

impl Comparator {
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Comparator::Lt => lhs < rhs,
            Comparator::Le => lhs <= rhs,
            Comparator::Ne => lhs != rhs,
            Comparator::Eq => lhs == rhs,
            Comparator::Ge => lhs >= rhs,
            Comparator::Gt => lhs > rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateConstraint {
    pub kind: AggregateKind,
    /// Product attribute aggregated over; ignored for `count`.
    #[serde(default)]
    pub attribute: String,
    pub comparator: Comparator,
    pub constant: f64,
}

impl AggregateConstraint {
    pub fn count(comparator: Comparator, constant: f64) -> Self {
        Self {
            kind: AggregateKind::Count,
            attribute: String::new(),
            comparator,
            constant,
        }
    }

    pub fn over(kind: AggregateKind, attribute: &str, comparator: Comparator, constant: f64) -> Self {
        Self {
            kind,
            attribute: attribute.to_string(),
            comparator,
            constant,
        }
    }
}

pub fn check_aggregate_constraint(
    group: &VariantGroup,
    products: &ProductIndex<'_>,
    constraint: &AggregateConstraint,
) -> Result<bool> {
    let value = match constraint.kind {
        AggregateKind::Count => group.member_ids.len() as f64,
        kind => {
            let values = member_values(group, products, &constraint.attribute)?;
            match kind {
                AggregateKind::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                AggregateKind::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
                AggregateKind::Sum => values.iter().sum(),
                AggregateKind::Avg => values.iter().sum::<f64>() / values.len() as f64,
                AggregateKind::Count => unreachable!(),
            }
        }
    };
    Ok(constraint.comparator.holds(value, constraint.constant))
}

fn member_values(group: &VariantGroup, products: &ProductIndex<'_>, attribute: &str) -> Result<Vec<f64>> {
    group
        .member_ids
        .iter()
        .map(|id| {
            let product = products
                .get(id.as_str())
                .ok_or_else(|| Error::UnknownGroupMember(id.clone()))?;
            let raw = product
                .attribute(attribute)
                .ok_or_else(|| Error::UnknownAttribute(attribute.to_string()))?;
            raw.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::NonNumericAttribute {
                    product_id: id.clone(),
                    attribute: attribute.to_string(),
                    value: raw.to_string(),
                })
        })
        .collect()
}
