//! Text corpus ingestion: tokenize, build a vocabulary from the training
//! region, encode, and slice into fixed-length (input, target) windows.
//!
//! Windows advance with stride T, so window i reads symbols `[iT, iT+T]`
//! inclusive and every symbol after the first is predicted exactly once.
//! The train/test split is a contiguous tail split over windows: the first
//! `round(split * windows)` windows (at least one) train, the remainder
//! test. The vocabulary is collected from the training region only; in word
//! mode unseen test words map to a reserved `<unk>` entry appended to the
//! vocabulary on first use, while character mode treats an unseen character
//! as a configuration error.

use std::collections::HashMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{SequenceData, SequenceDataset};
use crate::error::{OptimError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenMode {
    Char,
    Word,
}

pub const UNK_SYMBOL: &str = "<unk>";

/// An encoded corpus: the symbol table plus the full index stream.
#[derive(Debug, Clone, PartialEq)]
pub struct TextCorpus {
    pub mode: TokenMode,
    /// Sorted unique training symbols; `<unk>` appended lazily in word mode.
    pub vocab: Vec<String>,
    pub encoded: Vec<u32>,
    pub split: f64,
    pub unk_index: Option<u32>,
}

impl TextCorpus {
    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn symbol(&self, index: usize) -> Option<&str> {
        self.vocab.get(index).map(String::as_str)
    }

    pub fn symbol_index(&self, symbol: &str) -> Option<usize> {
        self.vocab.iter().position(|s| s == symbol)
    }

    /// Decode the full stream back into symbols.
    pub fn decode_stream(&self) -> Vec<&str> {
        self.encoded
            .iter()
            .map(|&i| self.vocab[i as usize].as_str())
            .collect()
    }
}

fn tokenize(text: &str, mode: TokenMode) -> Vec<String> {
    match mode {
        TokenMode::Char => text.chars().map(|c| c.to_string()).collect(),
        TokenMode::Word => text.split_whitespace().map(str::to_string).collect(),
    }
}

/// Number of stride-T windows a stream of `len` symbols yields.
fn window_count(len: usize, t_len: usize) -> usize {
    if len == 0 {
        0
    } else {
        (len - 1) / t_len
    }
}

fn split_windows(windows: usize, split: f64) -> usize {
    let raw = (split * windows as f64).round() as usize;
    raw.clamp(1, windows)
}

fn build_windows(
    encoded: &[u32],
    vocab_size: usize,
    t_len: usize,
    train_windows: usize,
    total_windows: usize,
) -> (SequenceDataset, SequenceDataset) {
    let make = |range: std::ops::Range<usize>| {
        let mut inputs = Vec::with_capacity(range.len());
        let mut targets = Vec::with_capacity(range.len());
        for i in range {
            let start = i * t_len;
            inputs.push(encoded[start..start + t_len].iter().map(|&v| v as usize).collect());
            targets.push(
                encoded[start + 1..start + t_len + 1]
                    .iter()
                    .map(|&v| v as usize)
                    .collect(),
            );
        }
        SequenceDataset {
            data: SequenceData::Tokens {
                inputs,
                targets,
                vocab: vocab_size,
            },
        }
    };
    (make(0..train_windows), make(train_windows..total_windows))
}

/// Ingest a UTF-8 text file into an encoded corpus plus train/test window
/// datasets.
pub fn ingest_text(
    path: &Path,
    mode: TokenMode,
    t_len: usize,
    split: f64,
) -> Result<(TextCorpus, SequenceDataset, SequenceDataset)> {
    let text = fs::read_to_string(path)?;
    ingest_str(&text, mode, t_len, split)
}

/// Same as [`ingest_text`] but over an in-memory string (used by the bundled
/// sample corpus and the tests).
pub fn ingest_str(
    text: &str,
    mode: TokenMode,
    t_len: usize,
    split: f64,
) -> Result<(TextCorpus, SequenceDataset, SequenceDataset)> {
    if t_len == 0 {
        return Err(OptimError::Config("ingest: T must be positive".into()));
    }
    if !(0.0 < split && split <= 1.0) {
        return Err(OptimError::Config(format!(
            "ingest: split {split} outside (0, 1]"
        )));
    }
    let tokens = tokenize(text, mode);
    if tokens.is_empty() {
        return Err(OptimError::Config("ingest: empty corpus".into()));
    }
    if tokens.len() < t_len + 1 {
        return Err(OptimError::Config(format!(
            "ingest: corpus has {} symbols, need at least T+1 = {}",
            tokens.len(),
            t_len + 1
        )));
    }
    let total_windows = window_count(tokens.len(), t_len);
    let train_windows = split_windows(total_windows, split);

    // Vocabulary from the training region only: every symbol touched by a
    // training window, i.e. tokens[0 ..= train_windows * T].
    let train_end = train_windows * t_len + 1;
    let mut vocab: Vec<String> = {
        let mut set: Vec<&String> = tokens[..train_end].iter().collect();
        set.sort();
        set.dedup();
        set.into_iter().cloned().collect()
    };
    // Lazy <unk> insertion happens in two passes: first find out whether it
    // is needed, then rebuild the lookup table and encode.
    let (mut unk_index, needs_unk) = {
        let index: HashMap<&str, u32> = vocab
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i as u32))
            .collect();
        let unk = index.get(UNK_SYMBOL).copied();
        let needs = tokens[train_end..]
            .iter()
            .any(|t| !index.contains_key(t.as_str()));
        (unk, needs)
    };
    if needs_unk && unk_index.is_none() {
        match mode {
            TokenMode::Word => {
                vocab.push(UNK_SYMBOL.to_string());
                unk_index = Some((vocab.len() - 1) as u32);
            }
            TokenMode::Char => {
                return Err(OptimError::Config(
                    "ingest: character outside the training vocabulary; \
                     character mode requires full coverage"
                        .into(),
                ));
            }
        }
    }
    let index: HashMap<&str, u32> = vocab
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i as u32))
        .collect();
    let used_unk = needs_unk;

    let encoded: Vec<u32> = tokens
        .iter()
        .map(|t| {
            index
                .get(t.as_str())
                .copied()
                .unwrap_or_else(|| unk_index.expect("unk reserved above"))
        })
        .collect();

    let vocab_size = vocab.len();
    let (train, test) = build_windows(&encoded, vocab_size, t_len, train_windows, total_windows);
    let corpus = TextCorpus {
        mode,
        vocab,
        encoded,
        split,
        unk_index: if used_unk { unk_index } else { None },
    };
    Ok((corpus, train, test))
}

// ---------------------------------------------------------------------------
// Cached corpus file.
//
// Layout (all integers little-endian):
//   magic      8 bytes  b"ADAQNCRP"
//   version    u32      currently 1
//   mode       u8       0 = char, 1 = word
//   idx_width  u8       bytes per stream index: 1, 2 or 4
//   unk        u32      unknown-symbol index + 1, or 0 if none
//   t_len      u64      window length the corpus was encoded for
//   split      f64      train fraction
//   vocab_len  u32      number of symbols, then per symbol:
//     sym_len  u16      UTF-8 byte length, followed by the bytes
//   stream_len u64      number of indices, then the packed stream
// ---------------------------------------------------------------------------

const CACHE_MAGIC: &[u8; 8] = b"ADAQNCRP";
const CACHE_VERSION: u32 = 1;

fn index_width(vocab: usize) -> u8 {
    if vocab <= u8::MAX as usize {
        1
    } else if vocab <= u16::MAX as usize {
        2
    } else {
        4
    }
}

/// Write the encoded corpus to a cache file.
pub fn write_cached_corpus(corpus: &TextCorpus, t_len: usize, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.push(match corpus.mode {
        TokenMode::Char => 0,
        TokenMode::Word => 1,
    });
    let width = index_width(corpus.vocab.len());
    out.push(width);
    out.extend_from_slice(&corpus.unk_index.map_or(0, |u| u + 1).to_le_bytes());
    out.extend_from_slice(&(t_len as u64).to_le_bytes());
    out.extend_from_slice(&corpus.split.to_le_bytes());
    out.extend_from_slice(&(corpus.vocab.len() as u32).to_le_bytes());
    for sym in &corpus.vocab {
        let bytes = sym.as_bytes();
        if bytes.len() > u16::MAX as usize {
            return Err(OptimError::Config("cache: oversized symbol".into()));
        }
        out.extend_from_slice(&(bytes.len() as u16).to_le_bytes());
        out.extend_from_slice(bytes);
    }
    out.extend_from_slice(&(corpus.encoded.len() as u64).to_le_bytes());
    for &v in &corpus.encoded {
        match width {
            1 => out.push(v as u8),
            2 => out.extend_from_slice(&(v as u16).to_le_bytes()),
            _ => out.extend_from_slice(&v.to_le_bytes()),
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(OptimError::Config("cache: truncated file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Load a corpus previously written by [`write_cached_corpus`]. Returns the
/// corpus and the window length it was encoded for.
pub fn load_cached_corpus(path: &Path) -> Result<(TextCorpus, usize)> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    let mut cur = Cursor { buf: &buf, pos: 0 };
    if cur.take(8)? != CACHE_MAGIC {
        return Err(OptimError::Config("cache: bad magic".into()));
    }
    let version = cur.u32()?;
    if version != CACHE_VERSION {
        return Err(OptimError::Config(format!(
            "cache: unsupported version {version}"
        )));
    }
    let mode = match cur.u8()? {
        0 => TokenMode::Char,
        1 => TokenMode::Word,
        other => {
            return Err(OptimError::Config(format!("cache: unknown mode {other}")));
        }
    };
    let width = cur.u8()?;
    if ![1, 2, 4].contains(&width) {
        return Err(OptimError::Config(format!(
            "cache: unsupported index width {width}"
        )));
    }
    let unk_raw = cur.u32()?;
    let t_len = cur.u64()? as usize;
    let split = cur.f64()?;
    let vocab_len = cur.u32()? as usize;
    let mut vocab = Vec::with_capacity(vocab_len);
    for _ in 0..vocab_len {
        let n = cur.u16()? as usize;
        let bytes = cur.take(n)?;
        let sym = std::str::from_utf8(bytes)
            .map_err(|_| OptimError::Config("cache: invalid UTF-8 symbol".into()))?;
        vocab.push(sym.to_string());
    }
    let stream_len = cur.u64()? as usize;
    let mut encoded = Vec::with_capacity(stream_len);
    for _ in 0..stream_len {
        let v = match width {
            1 => cur.u8()? as u32,
            2 => cur.u16()? as u32,
            _ => cur.u32()?,
        };
        if v as usize >= vocab.len() {
            return Err(OptimError::Config("cache: index out of vocabulary".into()));
        }
        encoded.push(v);
    }
    let corpus = TextCorpus {
        mode,
        vocab,
        encoded,
        split,
        unk_index: if unk_raw == 0 { None } else { Some(unk_raw - 1) },
    };
    Ok((corpus, t_len))
}

/// Rebuild the train/test window datasets from a cached corpus.
pub fn windows_from_corpus(
    corpus: &TextCorpus,
    t_len: usize,
) -> Result<(SequenceDataset, SequenceDataset)> {
    if corpus.encoded.len() < t_len + 1 {
        return Err(OptimError::Config(
            "cache: stream shorter than one window".into(),
        ));
    }
    let total = window_count(corpus.encoded.len(), t_len);
    let train = split_windows(total, corpus.split);
    Ok(build_windows(
        &corpus.encoded,
        corpus.vocab.len(),
        t_len,
        train,
        total,
    ))
}
