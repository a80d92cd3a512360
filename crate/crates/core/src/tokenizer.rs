//! Word-level tokenizing encoder.
//!
//! Descriptions are lowercased and split on whitespace and punctuation. Each
//! token gets an integer id in order of first appearance in the training
//! descriptions; ids 0 and 1 are reserved for padding and unknown tokens.
//! Encodings are right-padded or truncated to a fixed `max_len`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::color::Rgb;
use crate::dataset::ColorSample;
use crate::error::{Error, Result};

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const DEFAULT_MAX_LEN: usize = 6;

/// Lowercased word tokens of `text`.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| c.is_whitespace() || c.is_ascii_punctuation())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyDoc", into = "VocabularyDoc")]
pub struct Vocabulary {
    tokens: Vec<String>,
    token_to_id: HashMap<String, u32>,
    max_len: usize,
}

/// Serialized form: corpus tokens in id order (the first one has id 2).
#[derive(Serialize, Deserialize)]
struct VocabularyDoc {
    tokens: Vec<String>,
    max_len: usize,
}

impl TryFrom<VocabularyDoc> for Vocabulary {
    type Error = Error;

    fn try_from(doc: VocabularyDoc) -> Result<Self> {
        Vocabulary::from_tokens(doc.tokens, doc.max_len)
    }
}

impl From<Vocabulary> for VocabularyDoc {
    fn from(v: Vocabulary) -> Self {
        VocabularyDoc {
            tokens: v.tokens,
            max_len: v.max_len,
        }
    }
}

/// Fixed-length id sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EncodedVector(pub Vec<u32>);

impl EncodedVector {
    pub fn ids(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&id| f64::from(id)).collect()
    }
}

impl Vocabulary {
    /// Builds the vocabulary from training descriptions only.
    pub fn fit(train: &[ColorSample], max_len: usize) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyTrainingData);
        }
        Self::fit_texts(train.iter().map(|s| s.description.as_str()), max_len)
    }

    pub fn fit_texts<'a>(texts: impl IntoIterator<Item = &'a str>, max_len: usize) -> Result<Self> {
        if max_len == 0 {
            return Err(Error::invalid("max_len must be at least 1"));
        }
        let mut vocab = Vocabulary {
            tokens: Vec::new(),
            token_to_id: HashMap::new(),
            max_len,
        };
        let mut seen_any = false;
        for text in texts {
            seen_any = true;
            for token in tokenize(text) {
                vocab.insert(token);
            }
        }
        if !seen_any {
            return Err(Error::EmptyTrainingData);
        }
        Ok(vocab)
    }

    pub fn from_tokens(tokens: Vec<String>, max_len: usize) -> Result<Self> {
        if max_len == 0 {
            return Err(Error::invalid("max_len must be at least 1"));
        }
        let mut vocab = Vocabulary {
            tokens: Vec::with_capacity(tokens.len()),
            token_to_id: HashMap::with_capacity(tokens.len()),
            max_len,
        };
        for token in tokens {
            if vocab.token_to_id.contains_key(&token) {
                return Err(Error::invalid(format!(
                    "duplicate vocabulary token `{token}`"
                )));
            }
            vocab.insert(token);
        }
        Ok(vocab)
    }

    fn insert(&mut self, token: String) {
        if !self.token_to_id.contains_key(&token) {
            let id = self.tokens.len() as u32 + 2;
            self.token_to_id.insert(token.clone(), id);
            self.tokens.push(token);
        }
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    /// Corpus tokens in id order.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Number of ids in use, including the pad and unknown ids.
    pub fn id_count(&self) -> usize {
        self.tokens.len() + 2
    }

    pub fn id_of(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    /// Reverse lookup; `None` for the reserved ids and out-of-range ids.
    pub fn token_of(&self, id: u32) -> Option<&str> {
        let idx = (id as usize).checked_sub(2)?;
        self.tokens.get(idx).map(String::as_str)
    }

    pub fn encode(&self, description: &str) -> Result<EncodedVector> {
        let tokens = tokenize(description);
        if tokens.is_empty() {
            return Err(Error::EmptyDescription);
        }
        let mut ids: Vec<u32> = tokens
            .iter()
            .take(self.max_len)
            .map(|t| self.id_of(t).unwrap_or(UNK_ID))
            .collect();
        ids.resize(self.max_len, PAD_ID);
        Ok(EncodedVector(ids))
    }

    pub fn encode_batch(&self, samples: &[ColorSample]) -> Result<Vec<(EncodedVector, Rgb)>> {
        samples
            .iter()
            .enumerate()
            .map(|(index, s)| {
                self.encode(&s.description)
                    .map(|v| (v, s.recipe))
                    .map_err(|e| Error::Sample {
                        index,
                        source: Box::new(e),
                    })
            })
            .collect()
    }
}
