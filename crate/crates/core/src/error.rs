use std::path::PathBuf;

/// Errors raised while loading inputs or running the grouping pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate product id {0:?}")]
    DuplicateId(String),

    #[error("line {line}: product id must be non-empty")]
    EmptyId { line: usize },

    #[error("product {product_id:?} has conflicting gold groups {first:?} and {second:?}")]
    ConflictingGold {
        product_id: String,
        first: String,
        second: String,
    },

    #[error("gold label references unknown product {0:?}")]
    UnknownGoldProduct(String),

    #[error("invalid rules: {0}")]
    InvalidRules(String),

    #[error("invalid category config for {category:?}: {message}")]
    InvalidCategoryConfig { category: String, message: String },

    #[error("product {product_id:?}: attribute {attribute:?} value {value:?} is not numeric")]
    NonNumericAttribute {
        product_id: String,
        attribute: String,
        value: String,
    },

    #[error("unknown product attribute {0:?}")]
    UnknownAttribute(String),

    #[error("group references unknown product {0:?}")]
    UnknownGroupMember(String),

    #[error("invalid threshold grid: {0}")]
    InvalidGrid(String),

    #[error("invalid generator spec: {0}")]
    InvalidGeneratorSpec(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
