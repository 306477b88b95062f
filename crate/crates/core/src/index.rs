//! Inverted index: term -> sorted posting list, plus the document universe.
//!
//! The index is immutable after build and safe to share across threads.
//! Doc ids are dense integers assigned at build time; the original external
//! keys are kept as an optional sidecar so results can be printed in terms of
//! the caller's identifiers.

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;
use std::marker::PhantomData;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{doc_from_u64, doc_to_u64, DocInt};

/// On-disk format magic bytes.
pub const INDEX_MAGIC: &[u8; 4] = b"PNIX";
/// On-disk format version.
pub const INDEX_FORMAT_VERSION: u32 = 1;

#[derive(thiserror::Error, Debug)]
pub enum IndexError {
    #[error("document {key:?} already indexed with different tokens")]
    ConflictingDoc { key: String },
    #[error("document {key:?} has an empty token")]
    EmptyToken { key: String },
    #[error("posting list for {term:?} is not strictly ascending")]
    UnsortedPostings { term: String },
    #[error("doc id {id} out of range for universe of size {universe_size}")]
    DocOutOfRange { id: u64, universe_size: u64 },
    #[error("universe of size {universe_size} does not fit the doc id type (max id {max})")]
    UniverseOverflow { universe_size: u64, max: u64 },
    #[error("corpus line {line}: {msg}")]
    CorpusLine { line: usize, msg: String },
    #[error("not an index file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported index format version {0}")]
    UnsupportedVersion(u32),
    #[error("index file checksum mismatch")]
    ChecksumMismatch,
    #[error("index file corrupted: {0}")]
    Corrupt(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Sorted, duplicate-free sequence of document ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PostingList<D>(Vec<D>);

impl<D> Default for PostingList<D> {
    fn default() -> Self {
        PostingList(Vec::new())
    }
}

impl<D: DocInt> PostingList<D> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Wraps an already strictly ascending vector.
    pub fn from_sorted(docs: Vec<D>) -> Self {
        debug_assert!(
            docs.windows(2).all(|w| w[0] < w[1]),
            "posting list must be strictly ascending"
        );
        PostingList(docs)
    }

    /// Sorts and deduplicates, then wraps.
    pub fn from_unsorted(mut docs: Vec<D>) -> Self {
        docs.sort_unstable();
        docs.dedup();
        PostingList(docs)
    }

    pub fn as_slice(&self) -> &[D] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<D> {
        self.0
    }

    pub fn contains(&self, doc: D) -> bool {
        self.0.binary_search(&doc).is_ok()
    }

    fn check(&self, term: &str, universe_size: u64) -> Result<(), IndexError> {
        if !self.0.windows(2).all(|w| w[0] < w[1]) {
            return Err(IndexError::UnsortedPostings { term: term.to_string() });
        }
        if let Some(&last) = self.0.last() {
            if doc_to_u64(last) >= universe_size {
                return Err(IndexError::DocOutOfRange {
                    id: doc_to_u64(last),
                    universe_size,
                });
            }
        }
        Ok(())
    }
}

impl<D> std::ops::Deref for PostingList<D> {
    type Target = [D];
    fn deref(&self) -> &[D] {
        &self.0
    }
}

impl<D: DocInt> FromIterator<D> for PostingList<D> {
    fn from_iter<I: IntoIterator<Item = D>>(iter: I) -> Self {
        PostingList::from_unsorted(iter.into_iter().collect())
    }
}

/// Mapping from terms to posting lists over a universe of `universe_size`
/// dense document ids.
///
/// Looking up an absent term yields the empty list, never an error: query
/// semantics never fail, and compiled circuits rely on absent bit tokens
/// reading as FALSE.
#[derive(Clone, Debug, PartialEq)]
pub struct InvertedIndex<D> {
    universe_size: u64,
    postings: BTreeMap<String, PostingList<D>>,
    doc_keys: Option<Vec<String>>,
}

impl<D: DocInt> InvertedIndex<D> {
    /// The empty corpus: no terms, universe of size zero.
    pub fn empty() -> Self {
        InvertedIndex {
            universe_size: 0,
            postings: BTreeMap::new(),
            doc_keys: None,
        }
    }

    /// Builds an index directly from term -> posting list pairs.
    pub fn from_postings<I>(universe_size: u64, postings: I) -> Result<Self, IndexError>
    where
        I: IntoIterator<Item = (String, PostingList<D>)>,
    {
        check_universe_fits::<D>(universe_size)?;
        let mut map = BTreeMap::new();
        for (term, list) in postings {
            list.check(&term, universe_size)?;
            map.insert(term, list);
        }
        Ok(InvertedIndex {
            universe_size,
            postings: map,
            doc_keys: None,
        })
    }

    pub fn universe_size(&self) -> u64 {
        self.universe_size
    }

    pub fn term_count(&self) -> usize {
        self.postings.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    /// Posting list for `term`; empty slice when the term is absent.
    pub fn lookup(&self, term: &str) -> &[D] {
        self.postings.get(term).map_or(&[], |l| l.as_slice())
    }

    /// Document frequency of `term` (used for leaf polarity decisions).
    pub fn term_doc_count(&self, term: &str) -> usize {
        self.lookup(term).len()
    }

    /// External key for a doc id, when the key sidecar is present.
    pub fn doc_key(&self, doc: D) -> Option<&str> {
        self.doc_keys
            .as_ref()
            .and_then(|keys| keys.get(doc_to_u64(doc) as usize))
            .map(String::as_str)
    }

    pub fn doc_keys(&self) -> Option<&[String]> {
        self.doc_keys.as_deref()
    }

    pub fn set_doc_keys(&mut self, keys: Vec<String>) {
        debug_assert_eq!(keys.len() as u64, self.universe_size);
        self.doc_keys = Some(keys);
    }

    /// Serializes to the versioned single-file format: magic, version,
    /// universe size, term dictionary with delta-varint posting lists, the
    /// optional key sidecar, and a trailing CRC32 over everything before it.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(INDEX_MAGIC);
        buf.extend_from_slice(&INDEX_FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&self.universe_size.to_le_bytes());
        write_varint(&mut buf, self.postings.len() as u64);
        for (term, list) in &self.postings {
            write_varint(&mut buf, term.len() as u64);
            buf.extend_from_slice(term.as_bytes());
            write_varint(&mut buf, list.len() as u64);
            let mut prev = 0u64;
            for (i, &d) in list.iter().enumerate() {
                let v = doc_to_u64(d);
                write_varint(&mut buf, if i == 0 { v } else { v - prev });
                prev = v;
            }
        }
        match &self.doc_keys {
            None => buf.push(0),
            Some(keys) => {
                buf.push(1);
                for key in keys {
                    write_varint(&mut buf, key.len() as u64);
                    buf.extend_from_slice(key.as_bytes());
                }
            }
        }
        let crc = crc32fast::hash(&buf);
        buf.extend_from_slice(&crc.to_le_bytes());
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IndexError> {
        if bytes.len() < 4 {
            return Err(IndexError::Corrupt("file shorter than magic"));
        }
        if &bytes[..4] != INDEX_MAGIC {
            return Err(IndexError::BadMagic);
        }
        if bytes.len() < 4 + 4 + 8 + 4 {
            return Err(IndexError::Corrupt("file shorter than header"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != INDEX_FORMAT_VERSION {
            return Err(IndexError::UnsupportedVersion(version));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored_crc = u32::from_le_bytes(tail.try_into().unwrap());
        if crc32fast::hash(body) != stored_crc {
            return Err(IndexError::ChecksumMismatch);
        }

        let mut pos = 8usize;
        let universe_size = u64::from_le_bytes(body[pos..pos + 8].try_into().unwrap());
        pos += 8;
        check_universe_fits::<D>(universe_size)?;

        let term_count = read_varint(body, &mut pos)?;
        let mut postings = BTreeMap::new();
        for _ in 0..term_count {
            let term = read_string(body, &mut pos)?;
            let len = read_varint(body, &mut pos)?;
            // each posting takes at least one byte, so a corrupt length
            // prefix cannot force an oversized allocation
            let mut docs = Vec::with_capacity((len as usize).min(body.len() - pos));
            let mut prev = 0u64;
            for i in 0..len {
                let delta = read_varint(body, &mut pos)?;
                let v = if i == 0 { delta } else { prev.checked_add(delta).ok_or(IndexError::Corrupt("doc id overflow"))? };
                if i > 0 && delta == 0 {
                    return Err(IndexError::UnsortedPostings { term });
                }
                if v >= universe_size {
                    return Err(IndexError::DocOutOfRange { id: v, universe_size });
                }
                docs.push(doc_from_u64(v));
                prev = v;
            }
            postings.insert(term, PostingList::from_sorted(docs));
        }

        let has_keys = *body.get(pos).ok_or(IndexError::Corrupt("missing key-sidecar flag"))?;
        pos += 1;
        let doc_keys = match has_keys {
            0 => None,
            1 => {
                let mut keys = Vec::with_capacity((universe_size as usize).min(body.len()));
                for _ in 0..universe_size {
                    keys.push(read_string(body, &mut pos)?);
                }
                Some(keys)
            }
            _ => return Err(IndexError::Corrupt("bad key-sidecar flag")),
        };
        if pos != body.len() {
            return Err(IndexError::Corrupt("trailing bytes after index body"));
        }
        Ok(InvertedIndex { universe_size, postings, doc_keys })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), IndexError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IndexError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn check_universe_fits<D: DocInt>(universe_size: u64) -> Result<(), IndexError> {
    let max = D::max_value().to_u64().unwrap_or(u64::MAX);
    if universe_size > 0 && universe_size - 1 > max {
        return Err(IndexError::UniverseOverflow { universe_size, max });
    }
    Ok(())
}

fn write_varint(buf: &mut Vec<u8>, mut v: u64) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            buf.push(byte);
            return;
        }
        buf.push(byte | 0x80);
    }
}

fn read_varint(bytes: &[u8], pos: &mut usize) -> Result<u64, IndexError> {
    let mut v = 0u64;
    let mut shift = 0u32;
    loop {
        let &byte = bytes.get(*pos).ok_or(IndexError::Corrupt("truncated varint"))?;
        *pos += 1;
        if shift >= 64 {
            return Err(IndexError::Corrupt("varint too long"));
        }
        v |= u64::from(byte & 0x7f) << shift;
        if byte & 0x80 == 0 {
            return Ok(v);
        }
        shift += 7;
    }
}

fn read_string(bytes: &[u8], pos: &mut usize) -> Result<String, IndexError> {
    let len = read_varint(bytes, pos)? as usize;
    let end = pos.checked_add(len).ok_or(IndexError::Corrupt("string length overflow"))?;
    if end > bytes.len() {
        return Err(IndexError::Corrupt("truncated string"));
    }
    let s = std::str::from_utf8(&bytes[*pos..end])
        .map_err(|_| IndexError::Corrupt("invalid utf-8 in string"))?;
    *pos = end;
    Ok(s.to_string())
}

/// Incremental index construction; assigns dense doc ids in insertion order.
pub struct IndexBuilder<D> {
    keys: Vec<String>,
    by_key: HashMap<String, usize>,
    token_sets: Vec<Vec<String>>,
    _doc: PhantomData<D>,
}

impl<D: DocInt> Default for IndexBuilder<D> {
    fn default() -> Self {
        IndexBuilder {
            keys: Vec::new(),
            by_key: HashMap::new(),
            token_sets: Vec::new(),
            _doc: PhantomData,
        }
    }
}

impl<D: DocInt> IndexBuilder<D> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn doc_count(&self) -> usize {
        self.keys.len()
    }

    /// Adds a document. Re-adding the same key with the same token set is a
    /// no-op returning the existing id; a different token set is rejected.
    pub fn add_doc<I, S>(&mut self, key: &str, tokens: I) -> Result<D, IndexError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut set: Vec<String> = tokens.into_iter().map(Into::into).collect();
        if set.iter().any(String::is_empty) {
            return Err(IndexError::EmptyToken { key: key.to_string() });
        }
        set.sort_unstable();
        set.dedup();

        if let Some(&id) = self.by_key.get(key) {
            if self.token_sets[id] == set {
                return Ok(doc_from_u64(id as u64));
            }
            return Err(IndexError::ConflictingDoc { key: key.to_string() });
        }

        let id = self.keys.len() as u64;
        check_universe_fits::<D>(id + 1)?;
        self.by_key.insert(key.to_string(), id as usize);
        self.keys.push(key.to_string());
        self.token_sets.push(set);
        Ok(doc_from_u64(id))
    }

    pub fn finish(self) -> InvertedIndex<D> {
        let universe_size = self.keys.len() as u64;
        let mut postings: BTreeMap<String, PostingList<D>> = BTreeMap::new();
        for (id, tokens) in self.token_sets.into_iter().enumerate() {
            let doc = doc_from_u64::<D>(id as u64);
            for token in tokens {
                // ids arrive in ascending order, so lists stay sorted
                postings.entry(token).or_default().0.push(doc);
            }
        }
        InvertedIndex {
            universe_size,
            postings,
            doc_keys: Some(self.keys),
        }
    }
}

/// One-shot build from (key, tokens) pairs.
pub fn build_index<D: DocInt>(docs: &[(&str, &[&str])]) -> Result<InvertedIndex<D>, IndexError> {
    let mut b = IndexBuilder::new();
    for (key, tokens) in docs {
        b.add_doc(key, tokens.iter().map(|t| t.to_string()))?;
    }
    Ok(b.finish())
}

/// One corpus document: external key plus its tokens.
///
/// The JSONL corpus format is one such object per line. Numeric fields meant
/// for bit-sliced comparison are pre-tokenized by the producer: field `F`
/// with value `n` emits a token `F#BIT<i>` for every set bit `i` of `n`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorpusDoc {
    pub id: String,
    pub tokens: Vec<String>,
}

/// Emits the `F#BIT<i>` tokens for one numeric field value.
pub fn bit_tokens(field: &str, value: u64) -> Vec<String> {
    (0..64)
        .filter(|i| value >> i & 1 == 1)
        .map(|i| format!("{field}#BIT{i}"))
        .collect()
}

/// Reads a JSONL corpus (`{"id": .., "tokens": [..]}` per line) into an index.
pub fn read_corpus_jsonl<D: DocInt, R: BufRead>(reader: R) -> Result<InvertedIndex<D>, IndexError> {
    let mut builder = IndexBuilder::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: CorpusDoc = serde_json::from_str(&line).map_err(|e| IndexError::CorpusLine {
            line: lineno + 1,
            msg: e.to_string(),
        })?;
        builder
            .add_doc(&doc.id, doc.tokens)
            .map_err(|e| IndexError::CorpusLine {
                line: lineno + 1,
                msg: e.to_string(),
            })?;
    }
    Ok(builder.finish())
}
