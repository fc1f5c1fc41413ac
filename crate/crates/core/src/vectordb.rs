//! In-process vector store with exact cosine top-k search.
//!
//! Index file layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes  "JRAGVIDX"
//! version      u16
//! scalar tag   u8       4 = f32, 8 = f64
//! reserved     u8
//! dim          u32
//! count        u64
//! hash seed    u64      seed of the mock embedder, 0 otherwise
//! provider id  u32 length + UTF-8 bytes
//! vectors      count * dim scalars
//! metadata     u64 length + JSON array of {vector_id, chunk, metadata}
//! crc32        u32 over every preceding byte
//! ```

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chunker::{Chunk, ChunkUnit};
use crate::providers::{EmbeddingFingerprint, EmbeddingVector};
use crate::scalar::Scalar;

pub const INDEX_MAGIC: &[u8; 8] = b"JRAGVIDX";
pub const INDEX_FORMAT_VERSION: u16 = 1;

pub type Metadata = BTreeMap<String, String>;

#[derive(Debug, Error)]
pub enum VectorDbError {
    #[error("dimension mismatch: index has {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("vector has zero norm")]
    ZeroNorm,
    #[error("chunk {doc_id} {unit:?} {start}..{end} is already indexed")]
    DuplicateChunk {
        doc_id: String,
        unit: ChunkUnit,
        start: usize,
        end: usize,
    },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not an index file (bad magic)")]
    BadMagic,
    #[error("unsupported index format version {found} (expected {expected})")]
    VersionMismatch { found: u16, expected: u16 },
    #[error("index checksum mismatch (file truncated or corrupted)")]
    ChecksumMismatch,
    #[error("index stores {found}-byte scalars, expected {expected}")]
    ScalarMismatch { found: u8, expected: u8 },
    #[error("corrupt index: {0}")]
    Corrupt(String),
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// `dot(a, b) / (|a| |b|)`; zero-norm inputs are an error.
pub fn cosine_similarity<T: Scalar>(
    a: &EmbeddingVector<T>,
    b: &EmbeddingVector<T>,
) -> Result<T, VectorDbError> {
    if a.dim() != b.dim() {
        return Err(VectorDbError::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    let (na, nb) = (norm(a.values()), norm(b.values()));
    if na == T::zero() || nb == T::zero() {
        return Err(VectorDbError::ZeroNorm);
    }
    Ok(dot(a.values(), b.values()) / (na * nb))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct EmbeddedChunk<T> {
    pub vector_id: u64,
    pub chunk: Chunk,
    pub vector: EmbeddingVector<T>,
    pub metadata: Metadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct SearchHit<T> {
    pub vector_id: u64,
    pub score: T,
    pub chunk: Chunk,
    pub metadata: Metadata,
}

/// Conjunction of metadata equality constraints.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MetadataFilter(pub BTreeMap<String, String>);

impl MetadataFilter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.0.insert(key.into(), value.into());
        self
    }

    pub fn matches(&self, metadata: &Metadata) -> bool {
        self.0
            .iter()
            .all(|(k, v)| metadata.get(k).is_some_and(|m| m == v))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

type ChunkKey = (String, ChunkUnit, usize, usize);

fn chunk_key(chunk: &Chunk) -> ChunkKey {
    (chunk.doc_id.clone(), chunk.unit, chunk.range.0, chunk.range.1)
}

/// Exact-scan vector index.
///
/// Searching borrows the index immutably and inserting mutably, so shared
/// use follows the usual many-readers or one-writer rule.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex<T> {
    fingerprint: Option<EmbeddingFingerprint>,
    dim: Option<usize>,
    entries: Vec<EmbeddedChunk<T>>,
    norms: Vec<T>,
    keys: HashSet<ChunkKey>,
}

impl<T: Scalar> Default for VectorIndex<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> VectorIndex<T> {
    /// An index whose dimension is fixed by the first insert.
    pub fn new() -> Self {
        Self {
            fingerprint: None,
            dim: None,
            entries: Vec::new(),
            norms: Vec::new(),
            keys: HashSet::new(),
        }
    }

    /// An index bound to one embedding model.
    pub fn with_fingerprint(fingerprint: EmbeddingFingerprint) -> Self {
        Self {
            dim: Some(fingerprint.dim),
            fingerprint: Some(fingerprint),
            ..Self::new()
        }
    }

    pub fn fingerprint(&self) -> Option<&EmbeddingFingerprint> {
        self.fingerprint.as_ref()
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[EmbeddedChunk<T>] {
        &self.entries
    }

    pub fn get(&self, vector_id: u64) -> Option<&EmbeddedChunk<T>> {
        self.entries.get(usize::try_from(vector_id).ok()?)
    }

    fn check_dim(&self, actual: usize) -> Result<(), VectorDbError> {
        match self.dim {
            Some(expected) if expected != actual => {
                Err(VectorDbError::DimensionMismatch { expected, actual })
            }
            _ => Ok(()),
        }
    }

    /// Adds a chunk and returns its id. Ids count up from 0 in insertion
    /// order.
    pub fn insert(
        &mut self,
        chunk: Chunk,
        vector: EmbeddingVector<T>,
        metadata: Metadata,
    ) -> Result<u64, VectorDbError> {
        self.check_dim(vector.dim())?;
        let n = norm(vector.values());
        if n == T::zero() {
            return Err(VectorDbError::ZeroNorm);
        }
        let key = chunk_key(&chunk);
        if self.keys.contains(&key) {
            return Err(VectorDbError::DuplicateChunk {
                doc_id: key.0,
                unit: key.1,
                start: key.2,
                end: key.3,
            });
        }
        self.dim.get_or_insert(vector.dim());
        let vector_id = self.entries.len() as u64;
        self.keys.insert(key);
        self.norms.push(n);
        self.entries.push(EmbeddedChunk {
            vector_id,
            chunk,
            vector,
            metadata,
        });
        Ok(vector_id)
    }

    /// The `k` most similar entries passing `filter`, by descending score
    /// and then ascending id.
    pub fn top_k(
        &self,
        query: &EmbeddingVector<T>,
        k: usize,
        filter: Option<&MetadataFilter>,
    ) -> Result<Vec<SearchHit<T>>, VectorDbError> {
        self.top_k_where(query, k, |e| filter.is_none_or(|f| f.matches(&e.metadata)))
    }

    pub fn top_k_where(
        &self,
        query: &EmbeddingVector<T>,
        k: usize,
        mut accept: impl FnMut(&EmbeddedChunk<T>) -> bool,
    ) -> Result<Vec<SearchHit<T>>, VectorDbError> {
        if k == 0 {
            return Err(VectorDbError::InvalidK);
        }
        if self.entries.is_empty() {
            return Ok(Vec::new());
        }
        self.check_dim(query.dim())?;
        let qn = norm(query.values());
        if qn == T::zero() {
            return Err(VectorDbError::ZeroNorm);
        }

        // (score, position), kept sorted best-first
        let mut best: Vec<(T, usize)> = Vec::with_capacity(k + 1);
        let ranks_before = |a: &(T, usize), b: &(T, usize)| -> Ordering {
            b.0.partial_cmp(&a.0)
                .unwrap_or(Ordering::Equal)
                .then(a.1.cmp(&b.1))
        };
        for (pos, entry) in self.entries.iter().enumerate() {
            if !accept(entry) {
                continue;
            }
            let score = dot(query.values(), entry.vector.values()) / (qn * self.norms[pos]);
            let candidate = (score, pos);
            if best.len() == k && ranks_before(&candidate, &best[k - 1]) != Ordering::Less {
                continue;
            }
            let at = best
                .binary_search_by(|probe| ranks_before(probe, &candidate))
                .unwrap_or_else(|i| i);
            best.insert(at, candidate);
            best.truncate(k);
        }
        Ok(best
            .into_iter()
            .map(|(score, pos)| {
                let e = &self.entries[pos];
                SearchHit {
                    vector_id: e.vector_id,
                    score,
                    chunk: e.chunk.clone(),
                    metadata: e.metadata.clone(),
                }
            })
            .collect())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let dim = self.dim.unwrap_or(0);
        let (provider_id, seed) = self
            .fingerprint
            .as_ref()
            .map(|f| (f.provider_id.as_str(), f.seed))
            .unwrap_or(("", 0));

        let mut out = Vec::with_capacity(64 + self.entries.len() * dim * T::WIDTH);
        out.extend_from_slice(INDEX_MAGIC);
        out.extend_from_slice(&INDEX_FORMAT_VERSION.to_le_bytes());
        out.push(T::TAG);
        out.push(0);
        out.extend_from_slice(&(dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        out.extend_from_slice(&seed.to_le_bytes());
        out.extend_from_slice(&(provider_id.len() as u32).to_le_bytes());
        out.extend_from_slice(provider_id.as_bytes());
        for e in &self.entries {
            for &v in e.vector.values() {
                v.write_le(&mut out);
            }
        }
        let meta: Vec<EntryMeta<'_>> = self
            .entries
            .iter()
            .map(|e| EntryMeta {
                vector_id: e.vector_id,
                chunk: std::borrow::Cow::Borrowed(&e.chunk),
                metadata: std::borrow::Cow::Borrowed(&e.metadata),
            })
            .collect();
        let meta = serde_json::to_vec(&meta).expect("metadata serializes");
        out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
        out.extend_from_slice(&meta);
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, VectorDbError> {
        if bytes.len() < INDEX_MAGIC.len() {
            return Err(VectorDbError::ChecksumMismatch);
        }
        if &bytes[..8] != INDEX_MAGIC {
            return Err(VectorDbError::BadMagic);
        }
        if bytes.len() < 10 {
            return Err(VectorDbError::ChecksumMismatch);
        }
        let version = u16::from_le_bytes([bytes[8], bytes[9]]);
        if version != INDEX_FORMAT_VERSION {
            return Err(VectorDbError::VersionMismatch {
                found: version,
                expected: INDEX_FORMAT_VERSION,
            });
        }
        let (body, trailer) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(trailer.try_into().expect("4 bytes"));
        if crc32fast::hash(body) != stored {
            return Err(VectorDbError::ChecksumMismatch);
        }

        let mut r = Reader { buf: body, pos: 10 };
        let tag = r.take(1)?[0];
        if tag != T::TAG {
            return Err(VectorDbError::ScalarMismatch {
                found: tag,
                expected: T::TAG,
            });
        }
        r.take(1)?;
        let dim = r.u32()? as usize;
        let count = usize::try_from(r.u64()?)
            .map_err(|_| VectorDbError::Corrupt("entry count overflows".into()))?;
        let seed = r.u64()?;
        let id_len = r.u32()? as usize;
        let provider_id = std::str::from_utf8(r.take(id_len)?)
            .map_err(|_| VectorDbError::Corrupt("provider id is not UTF-8".into()))?
            .to_string();
        let block_len = count
            .checked_mul(dim)
            .and_then(|n| n.checked_mul(T::WIDTH))
            .ok_or_else(|| VectorDbError::Corrupt("vector block size overflows".into()))?;
        let block = r.take(block_len)?;
        let meta_len = usize::try_from(r.u64()?)
            .map_err(|_| VectorDbError::Corrupt("metadata length overflows".into()))?;
        let meta: Vec<OwnedEntryMeta> = serde_json::from_slice(r.take(meta_len)?)
            .map_err(|e| VectorDbError::Corrupt(format!("metadata block: {e}")))?;
        if r.pos != body.len() {
            return Err(VectorDbError::Corrupt("trailing bytes before checksum".into()));
        }
        if meta.len() != count {
            return Err(VectorDbError::Corrupt(format!(
                "{count} vectors but {} metadata entries",
                meta.len()
            )));
        }

        let mut index = if provider_id.is_empty() {
            Self::new()
        } else {
            Self::with_fingerprint(EmbeddingFingerprint {
                provider_id,
                dim,
                seed,
            })
        };
        for (i, m) in meta.into_iter().enumerate() {
            if m.vector_id != i as u64 {
                return Err(VectorDbError::Corrupt(format!(
                    "vector id {} at position {i}",
                    m.vector_id
                )));
            }
            let raw = &block[i * dim * T::WIDTH..(i + 1) * dim * T::WIDTH];
            let values: Vec<T> = raw.chunks_exact(T::WIDTH).map(T::read_le).collect();
            let vector = EmbeddingVector::new(values)
                .map_err(|e| VectorDbError::Corrupt(format!("vector {i}: {e}")))?;
            index.insert(m.chunk, vector, m.metadata)?;
        }
        Ok(index)
    }

    /// Writes the index atomically (temp file, then rename).
    pub fn persist(&self, path: &Path) -> Result<(), VectorDbError> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.to_bytes())?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, VectorDbError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

#[derive(Serialize)]
struct EntryMeta<'a> {
    vector_id: u64,
    chunk: std::borrow::Cow<'a, Chunk>,
    metadata: std::borrow::Cow<'a, Metadata>,
}

#[derive(Deserialize)]
struct OwnedEntryMeta {
    vector_id: u64,
    chunk: Chunk,
    metadata: Metadata,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], VectorDbError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| VectorDbError::Corrupt("unexpected end of index".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, VectorDbError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, VectorDbError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
