use serde::{Deserialize, Serialize};

pub const MAX_EMBEDDING_DIM: usize = 32;

/// Vocabulary over training tokens. Indices `0..C` are tokens in sorted
/// order; index `C` is shared by null and unseen tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoricalEncoder {
    pub vocabulary: Vec<String>,
}

impl CategoricalEncoder {
    pub fn fit<'a>(tokens: impl IntoIterator<Item = &'a str>) -> CategoricalEncoder {
        let mut vocabulary: Vec<String> = tokens.into_iter().map(str::to_string).collect();
        vocabulary.sort_unstable();
        vocabulary.dedup();
        CategoricalEncoder { vocabulary }
    }

    pub fn cardinality(&self) -> usize {
        self.vocabulary.len()
    }

    /// Rows of the embedding table, including the reserved index.
    pub fn num_indices(&self) -> usize {
        self.cardinality() + 1
    }

    pub fn reserved_index(&self) -> usize {
        self.cardinality()
    }

    pub fn embedding_dim(&self) -> usize {
        embedding_dim(self.cardinality())
    }

    pub fn encode(&self, token: Option<&str>) -> usize {
        token
            .and_then(|t| self.vocabulary.binary_search_by(|v| v.as_str().cmp(t)).ok())
            .unwrap_or(self.reserved_index())
    }

    /// Indicator vector of width [`CategoricalEncoder::num_indices`].
    pub fn one_hot_into(&self, token: Option<&str>, out: &mut Vec<f64>) {
        let start = out.len();
        out.resize(start + self.num_indices(), 0.0);
        out[start + self.encode(token)] = 1.0;
    }
}

pub fn embedding_dim(cardinality: usize) -> usize {
    cardinality.min(MAX_EMBEDDING_DIM)
}
