//! Text embeddings, EMBX persistence and exact cosine retrieval.

use std::collections::{BTreeSet, HashSet};
use std::hash::Hasher;
use std::io::{Read, Write};
use std::path::Path;

use fnv::FnvHasher;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::disclosure::word_tokens;

pub const EMBX_MAGIC: &[u8; 4] = b"EMBX";
pub const EMBX_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 8;

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not an EMBX file (bad magic)")]
    BadMagic,
    #[error("unsupported EMBX version {0}")]
    BadVersion(u16),
    #[error("EMBX checksum mismatch")]
    Checksum,
    #[error("EMBX row count mismatch: header says {header}, found {found} ids")]
    RowCount { header: u64, found: usize },
    #[error("EMBX payload malformed: {0}")]
    Malformed(String),
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("invalid embedder config: {0}")]
    Config(String),
    #[error("invalid matrix: {0}")]
    Matrix(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    HashedNgram,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedderConfig {
    pub kind: EmbedderKind,
    pub dim: usize,
    pub ngram_range: (usize, usize),
    pub seed: u64,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig {
            kind: EmbedderKind::HashedNgram,
            dim: 4096,
            ngram_range: (1, 2),
            seed: 0,
        }
    }
}

impl EmbedderConfig {
    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.kind == EmbedderKind::HashedNgram {
            let (lo, hi) = self.ngram_range;
            if self.dim < 8 {
                return Err(EmbedError::Config(format!("dim {} < 8", self.dim)));
            }
            if !(1 <= lo && lo <= hi && hi <= 3) {
                return Err(EmbedError::Config(format!("ngram_range ({lo}, {hi}) outside 1..=3")));
            }
        } else if self.dim == 0 {
            return Err(EmbedError::Config("dim must be positive".into()));
        }
        Ok(())
    }
}

/// Result of embedding one text. `normalizable` is false for texts with no
/// tokens, whose vector is all zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedded {
    pub vector: Vec<f32>,
    pub normalizable: bool,
}

/// Signed-hash bag of word n-grams, L2-normalized.
///
/// Panics if `cfg` is not a valid hashed-ngram config; call
/// [`EmbedderConfig::validate`] first when the config is user supplied.
pub fn embed_text(text: &str, cfg: &EmbedderConfig) -> Embedded {
    assert_eq!(cfg.kind, EmbedderKind::HashedNgram, "embed_text needs a hashed_ngram config");
    cfg.validate().expect("invalid embedder config");
    let tokens = word_tokens(text);
    let mut acc = vec![0f64; cfg.dim];
    let (lo, hi) = cfg.ngram_range;
    for n in lo..=hi {
        for gram in tokens.windows(n) {
            let mut h = FnvHasher::with_key(cfg.seed ^ 0xcbf2_9ce4_8422_2325);
            h.write_usize(n);
            for t in gram {
                h.write(t.as_bytes());
                h.write_u8(0x1f);
            }
            let v = h.finish();
            let sign = if v >> 63 == 1 { -1.0 } else { 1.0 };
            acc[(v % cfg.dim as u64) as usize] += sign;
        }
    }
    let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Embedded {
            vector: vec![0.0; cfg.dim],
            normalizable: false,
        };
    }
    Embedded {
        vector: acc.iter().map(|x| (x / norm) as f32).collect(),
        normalizable: true,
    }
}

/// Dense row-major embedding table.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    ids: Vec<String>,
    dim: usize,
    data: Vec<f32>,
    normalized: bool,
}

impl EmbeddingMatrix {
    pub fn new(ids: Vec<String>, dim: usize, data: Vec<f32>, normalized: bool) -> Result<Self, EmbedError> {
        if dim == 0 {
            return Err(EmbedError::Matrix("dim must be positive".into()));
        }
        if data.len() != ids.len() * dim {
            return Err(EmbedError::Matrix(format!(
                "{} values for {} rows of dim {dim}",
                data.len(),
                ids.len()
            )));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(EmbedError::Matrix(format!("duplicate id {id}")));
            }
        }
        let m = EmbeddingMatrix {
            ids,
            dim,
            data,
            normalized,
        };
        if normalized {
            for i in 0..m.rows() {
                let n = l2(m.row(i));
                if (n - 1.0).abs() > 1e-6 {
                    return Err(EmbedError::Matrix(format!(
                        "row {} has norm {n} but matrix is marked normalized",
                        m.ids[i]
                    )));
                }
            }
        }
        Ok(m)
    }

    pub fn from_rows(ids: Vec<String>, rows: Vec<Vec<f32>>, normalized: bool) -> Result<Self, EmbedError> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(EmbedError::Matrix("ragged rows".into()));
        }
        Self::new(ids, dim, rows.concat(), normalized)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn rows(&self) -> usize {
        self.ids.len()
    }
    pub fn data(&self) -> &[f32] {
        &self.data
    }
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
    pub fn position(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// Keeps the listed rows, in the given order.
    pub fn select(&self, idx: &[usize]) -> EmbeddingMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        EmbeddingMatrix {
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            dim: self.dim,
            data,
            normalized: self.normalized,
        }
    }

    pub fn write_embx<W: Write>(&self, mut w: W) -> Result<(), EmbedError> {
        let mut buf = Vec::with_capacity(HEADER_LEN + self.data.len() * 4 + self.ids.len() * 16 + 8);
        buf.extend_from_slice(EMBX_MAGIC);
        buf.extend_from_slice(&EMBX_VERSION.to_le_bytes());
        let dim = u32::try_from(self.dim).map_err(|_| EmbedError::Matrix("dim exceeds u32".into()))?;
        buf.extend_from_slice(&dim.to_le_bytes());
        buf.extend_from_slice(&(self.rows() as u64).to_le_bytes());
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for id in &self.ids {
            if id.contains('\n') {
                return Err(EmbedError::Matrix(format!("id {id:?} contains a newline")));
            }
            buf.extend_from_slice(id.as_bytes());
            buf.push(b'\n');
        }
        let sum = Sha256::digest(&buf);
        buf.extend_from_slice(&sum[..8]);
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn export(&self, path: &Path) -> Result<(), EmbedError> {
        let f = std::fs::File::create(path)?;
        self.write_embx(std::io::BufWriter::new(f))
    }

    /// Parses EMBX bytes. The `normalized` flag is inferred from the rows.
    pub fn read_embx<R: Read>(mut r: R) -> Result<EmbeddingMatrix, EmbedError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() < 4 || &bytes[..4] != EMBX_MAGIC {
            return Err(EmbedError::BadMagic);
        }
        if bytes.len() < 6 {
            return Err(EmbedError::Checksum);
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != EMBX_VERSION {
            return Err(EmbedError::BadVersion(version));
        }
        if bytes.len() < HEADER_LEN + 8 {
            return Err(EmbedError::Checksum);
        }
        let (body, sum) = bytes.split_at(bytes.len() - 8);
        if Sha256::digest(body)[..8] != *sum {
            return Err(EmbedError::Checksum);
        }
        let dim = u32::from_le_bytes(body[6..10].try_into().unwrap()) as usize;
        let rows = u64::from_le_bytes(body[10..18].try_into().unwrap());
        let n_vals = (rows as usize)
            .checked_mul(dim)
            .filter(|n| n.checked_mul(4).is_some_and(|b| b <= body.len() - HEADER_LEN))
            .ok_or(EmbedError::RowCount { header: rows, found: 0 })?;
        let payload_end = HEADER_LEN + n_vals * 4;
        let data: Vec<f32> = body[HEADER_LEN..payload_end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let tail = std::str::from_utf8(&body[payload_end..])
            .map_err(|e| EmbedError::Malformed(format!("id list is not UTF-8: {e}")))?;
        let ids: Vec<String> = if tail.is_empty() {
            Vec::new()
        } else {
            let t = tail
                .strip_suffix('\n')
                .ok_or_else(|| EmbedError::Malformed("id list not newline-terminated".into()))?;
            t.split('\n').map(str::to_string).collect()
        };
        if ids.len() as u64 != rows {
            return Err(EmbedError::RowCount {
                header: rows,
                found: ids.len(),
            });
        }
        if dim == 0 {
            return Err(EmbedError::Malformed("dim 0".into()));
        }
        let normalized = rows > 0 && data.chunks_exact(dim).all(|r| (l2(r) - 1.0).abs() <= 1e-6);
        EmbeddingMatrix::new(ids, dim, data, normalized)
    }

    pub fn import(path: &Path) -> Result<EmbeddingMatrix, EmbedError> {
        Self::read_embx(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

pub fn import_embeddings(path: &Path) -> Result<EmbeddingMatrix, EmbedError> {
    EmbeddingMatrix::import(path)
}

/// Embeds `(id, text)` pairs in parallel. Rows for empty texts are zero and
/// the matrix is then marked unnormalized.
pub fn embed_batch(items: &[(String, String)], cfg: &EmbedderConfig) -> Result<EmbeddingMatrix, EmbedError> {
    cfg.validate()?;
    if cfg.kind != EmbedderKind::HashedNgram {
        return Err(EmbedError::Config("external embeddings must be imported from an EMBX file".into()));
    }
    let vecs: Vec<Embedded> = items.par_iter().map(|(_, t)| embed_text(t, cfg)).collect();
    let normalized = !vecs.is_empty() && vecs.iter().all(|e| e.normalizable);
    let mut data = Vec::with_capacity(items.len() * cfg.dim);
    for e in &vecs {
        data.extend_from_slice(&e.vector);
    }
    EmbeddingMatrix::new(items.iter().map(|(id, _)| id.clone()).collect(), cfg.dim, data, normalized)
}

fn l2(v: &[f32]) -> f64 {
    v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt()
}

/// Cosine similarity computed in f64. Zero vectors have similarity 0 with
/// everything.
pub fn cosine_similarity<T: Copy + Into<f64>>(u: &[T], v: &[T]) -> Result<f64, EmbedError> {
    if u.len() != v.len() {
        return Err(EmbedError::DimMismatch(u.len(), v.len()));
    }
    let (mut dot, mut nu, mut nv) = (0f64, 0f64, 0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b): (f64, f64) = (a.into(), b.into());
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

/// Exact top-k scan. Ties are broken by ascending id.
pub fn top_k_similar(
    query: &[f32],
    m: &EmbeddingMatrix,
    k: usize,
    exclude: &BTreeSet<String>,
) -> Result<Vec<(String, f64)>, EmbedError> {
    assert!(k >= 1, "k must be positive");
    if query.len() != m.dim() {
        return Err(EmbedError::DimMismatch(query.len(), m.dim()));
    }
    let rows: Vec<usize> = (0..m.rows()).filter(|&i| !exclude.contains(&m.ids[i])).collect();
    Ok(rank_rows(query, m, &rows, k)
        .into_iter()
        .map(|(i, s)| (m.ids[i].clone(), s))
        .collect())
}

/// Ranks a subset of rows by cosine to `query`, returning at most `k`
/// `(row, score)` pairs under the same ordering as [`top_k_similar`].
pub fn rank_rows<T: Copy + Into<f64>>(query: &[T], m: &EmbeddingMatrix, rows: &[usize], k: usize) -> Vec<(usize, f64)> {
    assert_eq!(query.len(), m.dim(), "query dim");
    let q: Vec<f64> = query.iter().map(|&x| x.into()).collect();
    let mut scored: Vec<(usize, f64)> = rows
        .iter()
        .map(|&i| {
            let r: Vec<f64> = m.row(i).iter().map(|&x| x as f64).collect();
            (i, cosine_similarity(&q, &r).unwrap())
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| m.ids[a.0].cmp(&m.ids[b.0])));
    scored.truncate(k);
    scored
}

/// Mean of the given rows, renormalized to unit length when `renormalize`
/// is set and the mean is nonzero. Returns zeros for an empty selection.
pub fn mean_pool(m: &EmbeddingMatrix, rows: &[usize], renormalize: bool) -> Vec<f64> {
    let mut acc = vec![0f64; m.dim()];
    for &i in rows {
        for (a, &x) in acc.iter_mut().zip(m.row(i)) {
            *a += x as f64;
        }
    }
    if rows.is_empty() {
        return acc;
    }
    let n = rows.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    if renormalize {
        let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            acc.iter_mut().for_each(|a| *a /= norm);
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> EmbedderConfig {
        EmbedderConfig::default()
    }

    #[test]
    fn deterministic_and_empty() {
        let a = embed_text("My roommate threw a loud party", &cfg());
        assert_eq!(a, embed_text("My roommate threw a loud party", &cfg()));
        assert!(a.normalizable);
        assert!((l2(&a.vector) - 1.0).abs() < 1e-6);
        let e = embed_text("  ", &cfg());
        assert!(!e.normalizable);
        assert!(e.vector.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn disjoint_texts_are_nearly_orthogonal() {
        let a = embed_text("the cat sat on a warm mat today", &cfg());
        let b = embed_text("quarterly revenue exceeded analyst forecasts", &cfg());
        let c = cosine_similarity(&a.vector, &b.vector).unwrap();
        assert!(c.abs() < 0.1, "{c}");
    }

    #[test]
    fn config_validation() {
        let mut c = cfg();
        c.dim = 4;
        assert!(c.validate().is_err());
        c.dim = 8;
        c.ngram_range = (2, 1);
        assert!(c.validate().is_err());
        c.ngram_range = (1, 4);
        assert!(c.validate().is_err());
        c.ngram_range = (3, 3);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn cosine_examples() {
        let u = [1.0f64, 2.0, 2.0];
        let v = [2.0f64, 1.0, 2.0];
        assert!((cosine_similarity(&u, &v).unwrap() - 8.0 / 9.0).abs() < 1e-12);
        assert!((cosine_similarity(&u, &u).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine_similarity(&[1.0f64, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cosine_similarity(&[0.0f64, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!(cosine_similarity(&[1.0f64], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn roundtrip_and_errors() {
        let m = EmbeddingMatrix::from_rows(
            vec!["a".into(), "b".into()],
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.6, 0.8]],
            true,
        )
        .unwrap();
        let mut buf = Vec::new();
        m.write_embx(&mut buf).unwrap();
        assert_eq!(EmbeddingMatrix::read_embx(&buf[..]).unwrap(), m);

        assert!(matches!(
            EmbeddingMatrix::read_embx(&buf[..buf.len() - 3]),
            Err(EmbedError::Checksum)
        ));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(EmbeddingMatrix::read_embx(&bad[..]), Err(EmbedError::BadMagic)));
        let mut bad = buf.clone();
        bad[4] = 2;
        assert!(matches!(EmbeddingMatrix::read_embx(&bad[..]), Err(EmbedError::BadVersion(2))));
    }

    #[test]
    fn rejects_bad_matrices() {
        assert!(EmbeddingMatrix::from_rows(vec!["a".into(), "a".into()], vec![vec![1.0], vec![1.0]], false).is_err());
        assert!(EmbeddingMatrix::from_rows(vec!["a".into()], vec![vec![0.0, 0.0]], true).is_err());
        let m = EmbeddingMatrix::from_rows(vec!["a\nb".into()], vec![vec![1.0]], false).unwrap();
        assert!(m.write_embx(Vec::new()).is_err());
    }

    #[test]
    fn top_k_basics() {
        let m = EmbeddingMatrix::from_rows(
            vec!["c".into(), "a".into(), "b".into()],
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]],
            true,
        )
        .unwrap();
        let r = top_k_similar(&[1.0, 0.0], &m, 10, &BTreeSet::new()).unwrap();
        assert_eq!(r[0], ("c".to_string(), 1.0));
        assert_eq!(r.iter().map(|x| x.0.as_str()).collect::<Vec<_>>(), ["c", "a", "b"]);
        let r = top_k_similar(&[0.0, 1.0], &m, 1, &BTreeSet::from(["a".to_string()])).unwrap();
        assert_eq!(r, vec![("b".to_string(), 1.0)]);
    }

    #[test]
    fn pooling() {
        let m = EmbeddingMatrix::from_rows(
            vec!["a".into(), "b".into()],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            true,
        )
        .unwrap();
        assert_eq!(mean_pool(&m, &[0, 1], false), vec![0.5, 0.5]);
        let p = mean_pool(&m, &[0, 1], true);
        assert!((p[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(mean_pool(&m, &[], true), vec![0.0, 0.0]);
    }
}
