use super::kmeans::{self, nearest};
use crate::error::{Error, Result};
use crate::hashing::Fingerprint;

/// Vocabulary size used when none is requested.
pub const DEFAULT_K: usize = 64;

/// Visual words in `(min, max)` intensity space.
#[derive(Clone, Debug, PartialEq)]
pub struct Codebook {
    centroids: Vec<[f64; 2]>,
    trained_on: usize,
}

impl Codebook {
    /// Wraps existing centroids, e.g. read back from an index file.
    pub fn from_centroids(centroids: Vec<[f64; 2]>, trained_on: usize) -> Result<Self> {
        if centroids.is_empty() {
            return Err(Error::Argument("codebook needs at least one centroid".into()));
        }
        if centroids
            .iter()
            .any(|c| !c.iter().all(|v| v.is_finite() && (0.0..=255.0).contains(v)))
        {
            return Err(Error::Argument("centroid outside [0, 255]^2".into()));
        }
        Ok(Self {
            centroids,
            trained_on,
        })
    }

    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Centroids as `[min, max]`.
    pub fn centroids(&self) -> &[[f64; 2]] {
        &self.centroids
    }

    /// Number of pairs the codebook was trained on (0 if unknown).
    pub fn trained_on(&self) -> usize {
        self.trained_on
    }

    /// Nearest word for a `(min, max)` point; lowest index on ties.
    pub fn word(&self, min: f64, max: f64) -> usize {
        let mut best = (0, f64::INFINITY);
        for (j, c) in self.centroids.iter().enumerate() {
            let d = (c[0] - min).powi(2) + (c[1] - max).powi(2);
            if d < best.1 {
                best = (j, d);
            }
        }
        best.0
    }

    /// Sum of squared distances from every pair to its word.
    pub fn quantization_error<'a>(&self, fps: impl IntoIterator<Item = &'a Fingerprint>) -> f64 {
        let flat: Vec<f64> = self.centroids.iter().flatten().copied().collect();
        fps.into_iter()
            .flat_map(|fp| fp.pairs())
            .map(|p| nearest(&[p.min as f64, p.max as f64], &flat, 2).1)
            .sum()
    }
}

/// Runs k-means over every extrema pair of the given fingerprints.
pub fn train_codebook<'a>(
    fingerprints: impl IntoIterator<Item = &'a Fingerprint>,
    k: usize,
    seed: u64,
) -> Result<Codebook> {
    if k == 0 {
        return Err(Error::Argument("k must be at least 1".into()));
    }
    // Pairs live on a 256x256 lattice; collapse duplicates into weights.
    let mut counts = vec![0u64; 256 * 256];
    let mut total = 0usize;
    for fp in fingerprints {
        for p in fp.pairs() {
            counts[p.min as usize * 256 + p.max as usize] += 1;
            total += 1;
        }
    }
    if total < k {
        return Err(Error::Degenerate(format!("{total} pairs cannot train {k} words")));
    }
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (cell, &c) in counts.iter().enumerate() {
        if c > 0 {
            points.push((cell / 256) as f64);
            points.push((cell % 256) as f64);
            weights.push(c as f64);
        }
    }
    if weights.len() < k {
        return Err(Error::Degenerate(format!(
            "{} distinct pairs cannot train {k} words",
            weights.len()
        )));
    }
    let km = kmeans::kmeans(&points, &weights, 2, k, seed)?;
    Ok(Codebook {
        centroids: km.centroids.chunks_exact(2).map(|c| [c[0], c[1]]).collect(),
        trained_on: total,
    })
}

/// Number of different `(min, max)` values across the fingerprints, the
/// largest vocabulary they can train.
pub fn distinct_pairs<'a>(fingerprints: impl IntoIterator<Item = &'a Fingerprint>) -> usize {
    let mut seen = vec![false; 256 * 256];
    let mut count = 0;
    for fp in fingerprints {
        for p in fp.pairs() {
            let cell = &mut seen[p.min as usize * 256 + p.max as usize];
            if !*cell {
                *cell = true;
                count += 1;
            }
        }
    }
    count
}

/// Raw word counts of a fingerprint.
pub fn quantize(fp: &Fingerprint, codebook: &Codebook) -> Vec<u32> {
    let mut hist = vec![0u32; codebook.k()];
    let pairs = fp.pairs();
    let mut i = 0;
    while i < pairs.len() {
        let p = pairs[i];
        let start = i;
        while i < pairs.len() && pairs[i] == p {
            i += 1;
        }
        hist[codebook.word(p.min as f64, p.max as f64)] += (i - start) as u32;
    }
    hist
}
