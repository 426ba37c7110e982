//! Dataset ingestion and batching: text corpora for character/word language
//! modeling, a procedural digit generator for the pixel-sequence task, and
//! seeded batch schedules.

mod digits;
mod schedule;
mod text;

pub use digits::synth_digits;
pub use schedule::BatchSchedule;
pub use text::{
    ingest_str, ingest_text, load_cached_corpus, windows_from_corpus, write_cached_corpus,
    TextCorpus, TokenMode, UNK_SYMBOL,
};

/// A set of fixed-length training examples. Token datasets hold (input,
/// target) index sequences where targets are inputs shifted by one; pixel
/// datasets hold scalar sequences with a class label each.
#[derive(Debug, Clone)]
pub struct SequenceDataset {
    pub data: SequenceData,
}

#[derive(Debug, Clone)]
pub enum SequenceData {
    Tokens {
        inputs: Vec<Vec<usize>>,
        targets: Vec<Vec<usize>>,
        vocab: usize,
    },
    Pixels {
        sequences: Vec<Vec<f64>>,
        labels: Vec<usize>,
        classes: usize,
    },
}

impl SequenceDataset {
    pub fn len(&self) -> usize {
        match &self.data {
            SequenceData::Tokens { inputs, .. } => inputs.len(),
            SequenceData::Pixels { sequences, .. } => sequences.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Common length of every sequence in the set (T for token pairs, pixel
    /// count for images).
    pub fn seq_len(&self) -> usize {
        match &self.data {
            SequenceData::Tokens { inputs, .. } => inputs.first().map_or(0, Vec::len),
            SequenceData::Pixels { sequences, .. } => sequences.first().map_or(0, Vec::len),
        }
    }

    /// Number of distinct symbols (tokens) or classes (pixels).
    pub fn output_count(&self) -> usize {
        match &self.data {
            SequenceData::Tokens { vocab, .. } => *vocab,
            SequenceData::Pixels { classes, .. } => *classes,
        }
    }
}
