//! Weighted Lloyd k-means with D²-weighted seeding.
//!
//! Points are stored flat, `dim` values per point, each with a positive
//! weight (the multiplicity of that point). Duplicated inputs should be
//! collapsed into weights by the caller: seeding needs distinct points.

use crate::error::{Error, Result};
use crate::par;
use crate::rng::SplitMix64;

pub const MAX_ITERATIONS: usize = 100;
pub const TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct KMeans {
    /// `k * dim` centroid coordinates.
    pub centroids: Vec<f64>,
    pub iterations: usize,
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid, lowest index on ties.
#[inline]
pub fn nearest(point: &[f64], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Clusters distinct weighted points into `k` groups.
pub fn kmeans(points: &[f64], weights: &[f64], dim: usize, k: usize, seed: u64) -> Result<KMeans> {
    if dim == 0 || !points.len().is_multiple_of(dim) || points.len() / dim != weights.len() {
        return Err(Error::Argument("point buffer does not match dimension and weights".into()));
    }
    if k == 0 {
        return Err(Error::Argument("k must be at least 1".into()));
    }
    let n = weights.len();
    if n < k {
        return Err(Error::Degenerate(format!("{n} distinct points cannot seed {k} clusters")));
    }
    let point = |i: usize| &points[i * dim..(i + 1) * dim];

    let mut rng = SplitMix64::new(seed);
    let mut centroids = Vec::with_capacity(k * dim);
    let first = sample_weighted(&mut rng, weights.iter().copied())
        .ok_or_else(|| Error::Degenerate("all point weights are zero".into()))?;
    centroids.extend_from_slice(point(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(point(i), point(first))).collect();
    while centroids.len() < k * dim {
        let pick = sample_weighted(&mut rng, d2.iter().zip(weights).map(|(d, w)| d * w))
            .ok_or_else(|| Error::Degenerate(format!("fewer than {k} distinct points")))?;
        let c = point(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(point(i), &c));
        }
        centroids.extend_from_slice(&c);
    }

    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let assign: Vec<(usize, f64)> = par::map_range(n, |i| nearest(point(i), &centroids, dim));

        let mut sums = vec![0.0; k * dim];
        let mut mass = vec![0.0; k];
        for (i, &(j, _)) in assign.iter().enumerate() {
            mass[j] += weights[i];
            for (s, x) in sums[j * dim..(j + 1) * dim].iter_mut().zip(point(i)) {
                *s += weights[i] * x;
            }
        }

        let mut next = centroids.clone();
        let mut taken = vec![false; n];
        for j in 0..k {
            let slot = &mut next[j * dim..(j + 1) * dim];
            if mass[j] > 0.0 {
                for (c, s) in slot.iter_mut().zip(&sums[j * dim..(j + 1) * dim]) {
                    *c = s / mass[j];
                }
            } else {
                // Empty cluster: move it onto the point worst served by its
                // current centroid.
                let far = (0..n)
                    .filter(|&i| !taken[i])
                    .fold(None::<(usize, f64)>, |best, i| match best {
                        Some((_, d)) if d >= assign[i].1 => best,
                        _ => Some((i, assign[i].1)),
                    });
                if let Some((i, _)) = far {
                    taken[i] = true;
                    slot.copy_from_slice(point(i));
                }
            }
        }

        let shift = centroids
            .chunks_exact(dim)
            .zip(next.chunks_exact(dim))
            .map(|(a, b)| sq_dist(a, b))
            .fold(0.0, f64::max)
            .sqrt();
        centroids = next;
        if shift < TOLERANCE {
            break;
        }
    }
    Ok(KMeans {
        centroids,
        iterations,
    })
}

/// Draws an index with probability proportional to its weight.
fn sample_weighted(rng: &mut SplitMix64, weights: impl Iterator<Item = f64> + Clone) -> Option<usize> {
    let total: f64 = weights.clone().sum();
    if total.is_nan() || total <= 0.0 {
        return None;
    }
    let target = rng.next_f64() * total;
    let mut acc = 0.0;
    let mut last_positive = None;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = Some(i);
            if target < acc {
                return Some(i);
            }
        }
    }
    last_positive
}
