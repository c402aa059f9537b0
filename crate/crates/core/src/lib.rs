//! Product variant grouping for retail catalogs.
//!
//! Products are grouped when they share brand, category and a family name
//! extracted from the title, and their model numbers are within a
//! per-category edit-distance threshold.

pub mod catalog;
pub mod cli;
pub mod editdist;
mod error;
pub mod evaluation;
pub mod grouping;
pub mod normalize;
pub mod synthgen;
pub mod tuning;

pub use error::{Error, Result};
