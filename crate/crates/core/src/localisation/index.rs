use std::cmp::Ordering;

use super::codebook::{quantize, Codebook};
use crate::error::{Error, Result};
use crate::hashing::Fingerprint;
use crate::par;

pub const INDEX_MAGIC: &[u8; 4] = b"OACB";
pub const INDEX_VERSION: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct IndexEntry {
    pub image_id: u32,
    /// TF-IDF weights, L2-normalized unless all zero.
    pub weights: Vec<f64>,
}

/// TF-IDF index over word histograms of any vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct WordIndex {
    idf: Vec<f64>,
    entries: Vec<IndexEntry>,
}

impl WordIndex {
    /// Builds the index from raw word counts.
    ///
    /// `idf[w] = ln((1 + D) / (1 + d_w)) + 1` with `D` images of which
    /// `d_w` contain word `w`. Entries are sorted by id.
    pub fn build(k: usize, histograms: Vec<(u32, Vec<u32>)>) -> Result<Self> {
        if histograms.is_empty() {
            return Err(Error::EmptyInput("no images to index".into()));
        }
        if let Some((id, h)) = histograms.iter().find(|(_, h)| h.len() != k) {
            return Err(Error::Argument(format!(
                "image {id} has {} words, vocabulary has {k}",
                h.len()
            )));
        }
        let mut histograms = histograms;
        histograms.sort_by_key(|(id, _)| *id);
        if let Some(w) = histograms.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Argument(format!("duplicate image id {}", w[0].0)));
        }
        let d = histograms.len() as f64;
        let idf: Vec<f64> = (0..k)
            .map(|w| {
                let dw = histograms.iter().filter(|(_, h)| h[w] > 0).count() as f64;
                ((1.0 + d) / (1.0 + dw)).ln() + 1.0
            })
            .collect();
        let entries = histograms
            .into_iter()
            .map(|(image_id, h)| {
                let tf: Vec<f64> = h.iter().map(|&c| c as f64).collect();
                IndexEntry {
                    image_id,
                    weights: weigh(&tf, &idf),
                }
            })
            .collect();
        Ok(Self { idf, entries })
    }

    pub fn from_parts(idf: Vec<f64>, entries: Vec<IndexEntry>) -> Result<Self> {
        if entries.iter().any(|e| e.weights.len() != idf.len()) {
            return Err(Error::Argument("entry length differs from vocabulary".into()));
        }
        if entries.windows(2).any(|w| w[0].image_id >= w[1].image_id) {
            return Err(Error::Integrity("image ids not strictly increasing".into()));
        }
        Ok(Self { idf, entries })
    }

    pub fn k(&self) -> usize {
        self.idf.len()
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    /// Ranks entries by cosine similarity to a term-frequency vector.
    ///
    /// Descending similarity, lower id first on ties; at most `top_m` hits.
    pub fn query_tf(&self, tf: &[f64], top_m: usize) -> Result<Vec<(u32, f64)>> {
        if top_m == 0 {
            return Err(Error::Argument("top_m must be at least 1".into()));
        }
        if self.entries.is_empty() {
            return Err(Error::EmptyIndex);
        }
        if tf.len() != self.k() {
            return Err(Error::Argument(format!(
                "query has {} words, vocabulary has {}",
                tf.len(),
                self.k()
            )));
        }
        let q = weigh(tf, &self.idf);
        let mut hits: Vec<(u32, f64)> = self
            .entries
            .iter()
            .map(|e| (e.image_id, e.weights.iter().zip(&q).map(|(a, b)| a * b).sum()))
            .collect();
        hits.sort_by(|a, b| match b.1.total_cmp(&a.1) {
            Ordering::Equal => a.0.cmp(&b.0),
            o => o,
        });
        hits.truncate(top_m);
        Ok(hits)
    }

    pub fn query_counts(&self, counts: &[u32], top_m: usize) -> Result<Vec<(u32, f64)>> {
        let tf: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        self.query_tf(&tf, top_m)
    }
}

fn weigh(tf: &[f64], idf: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = tf.iter().zip(idf).map(|(t, i)| t * i).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Codebook plus TF-IDF index over a reference trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct RetrievalIndex {
    codebook: Codebook,
    words: WordIndex,
    stride: Option<usize>,
}

impl RetrievalIndex {
    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn words(&self) -> &WordIndex {
        &self.words
    }

    pub fn entries(&self) -> &[IndexEntry] {
        self.words.entries()
    }

    pub fn idf(&self) -> &[f64] {
        self.words.idf()
    }

    /// Training stride the reference frames were sampled with, if known.
    /// Not stored in the index file.
    pub fn stride(&self) -> Option<usize> {
        self.stride
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = Some(stride);
        self
    }

    /// Queries many fingerprints in parallel; results are in input order.
    pub fn query_batch(&self, fps: &[Fingerprint], top_m: usize) -> Result<Vec<Vec<(u32, f64)>>> {
        par::map(fps, |fp| query(self, fp, top_m)).into_iter().collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let k = self.codebook.k();
        let entries = self.words.entries();
        let mut out = Vec::with_capacity(13 + 12 * k + entries.len() * (4 + 4 * k));
        out.extend_from_slice(INDEX_MAGIC);
        out.push(INDEX_VERSION);
        out.extend_from_slice(&(k as u32).to_le_bytes());
        for c in self.codebook.centroids() {
            out.extend_from_slice(&(c[0] as f32).to_le_bytes());
            out.extend_from_slice(&(c[1] as f32).to_le_bytes());
        }
        for &v in self.words.idf() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
        for e in entries {
            out.extend_from_slice(&e.image_id.to_le_bytes());
            for &w in &e.weights {
                out.extend_from_slice(&(w as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != INDEX_MAGIC {
            return Err(Error::Format("bad index magic".into()));
        }
        let version = r.take(1)?[0];
        if version != INDEX_VERSION {
            return Err(Error::Format(format!("unsupported index version {version}")));
        }
        let k = r.u32()? as usize;
        if k == 0 {
            return Err(Error::Format("index with empty vocabulary".into()));
        }
        // Fail on truncation before allocating anything sized by k.
        if bytes.len() < 9 + 12usize.saturating_mul(k) + 4 {
            return Err(Error::Format("truncated index file".into()));
        }
        let mut centroids = Vec::with_capacity(k);
        for _ in 0..k {
            centroids.push([r.f32()? as f64, r.f32()? as f64]);
        }
        let idf = (0..k).map(|_| r.f32().map(f64::from)).collect::<Result<Vec<_>>>()?;
        let d = r.u32()? as usize;
        let expected = r.pos + d.saturating_mul(4 + 4 * k);
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "index file is {} bytes, header promises {expected}",
                bytes.len()
            )));
        }
        let mut entries = Vec::with_capacity(d);
        for _ in 0..d {
            let image_id = r.u32()?;
            let weights = (0..k).map(|_| r.f32().map(f64::from)).collect::<Result<Vec<_>>>()?;
            entries.push(IndexEntry { image_id, weights });
        }
        let codebook =
            Codebook::from_centroids(centroids, 0).map_err(|e| Error::Integrity(e.to_string()))?;
        Ok(Self {
            codebook,
            words: WordIndex::from_parts(idf, entries)?,
            stride: None,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Format("truncated index file".into()));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Indexes reference fingerprints under their image ids.
pub fn build_index<'a>(
    fingerprints: impl IntoIterator<Item = (u32, &'a Fingerprint)>,
    codebook: &Codebook,
) -> Result<RetrievalIndex> {
    let items: Vec<(u32, &Fingerprint)> = fingerprints.into_iter().collect();
    let histograms = par::map(&items, |(id, fp)| (*id, quantize(fp, codebook)));
    Ok(RetrievalIndex {
        codebook: codebook.clone(),
        words: WordIndex::build(codebook.k(), histograms)?,
        stride: None,
    })
}

/// Ranked `(image_id, cosine similarity)` hits for a query fingerprint.
pub fn query(index: &RetrievalIndex, fp: &Fingerprint, top_m: usize) -> Result<Vec<(u32, f64)>> {
    index.words.query_counts(&quantize(fp, &index.codebook), top_m)
}
