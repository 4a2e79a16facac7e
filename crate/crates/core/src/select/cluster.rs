use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::AffinityMatrix;
use crate::linalg::symmetric_eigen;
use crate::{Error, Result};

/// Independent k-means runs; the lowest-inertia run wins.
pub const KMEANS_RESTARTS: usize = 20;
const JACOBI_SWEEPS: usize = 100;
const LLOYD_ITERATIONS: usize = 100;

/// Spectral clustering of an affinity matrix into `k` groups.
///
/// Entries are mapped to `[0, 1]` by `(a + 1) / 2`, the symmetric normalised
/// Laplacian is eigen-decomposed, the `k` eigenvectors with the smallest
/// eigenvalues are row-normalised and the rows grouped by k-means. Labels are
/// renumbered in order of first appearance.
pub fn spectral_cluster(affinity: &AffinityMatrix, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = affinity.size();
    if k == 0 {
        return Err(Error::Config("cluster count must be positive".into()));
    }
    if n <= k {
        return Ok((0..n).collect());
    }
    let shifted: Vec<f64> = affinity.entries.iter().map(|a| (a + 1.0) / 2.0).collect();
    let inv_sqrt_deg: Vec<f64> = (0..n)
        .map(|i| {
            let d: f64 = shifted[i * n..(i + 1) * n].iter().sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut lap = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let norm = inv_sqrt_deg[i] * shifted[i * n + j] * inv_sqrt_deg[j];
            lap[i * n + j] = if i == j { 1.0 - norm } else { -norm };
        }
    }
    let (_, vectors) = symmetric_eigen(&lap, n, JACOBI_SWEEPS)?;
    let mut points = vec![0.0; n * k];
    for i in 0..n {
        let row = &mut points[i * k..(i + 1) * k];
        for (d, r) in row.iter_mut().enumerate() {
            *r = vectors[i * n + d];
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
    }
    Ok(kmeans(&points, k, k, seed, KMEANS_RESTARTS))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// k-means++ seeding and Lloyd iterations over `points` (`n x dim`), keeping
/// the restart with the lowest inertia. Labels are renumbered in order of
/// first appearance.
pub fn kmeans(points: &[f64], dim: usize, k: usize, seed: u64, restarts: usize) -> Vec<usize> {
    let n = points.len() / dim;
    let point = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..restarts.max(1) {
        let mut centres: Vec<f64> = point(rng.gen_range(0..n)).to_vec();
        while centres.len() < k * dim {
            let d: Vec<f64> = (0..n)
                .map(|i| {
                    centres
                        .chunks_exact(dim)
                        .map(|c| sq_dist(point(i), c))
                        .fold(f64::INFINITY, f64::min)
                })
                .collect();
            let total: f64 = d.iter().sum();
            let pick = if total > 0.0 {
                let mut u = rng.gen_range(0.0..total);
                d.iter()
                    .position(|&w| {
                        u -= w;
                        u < 0.0
                    })
                    .unwrap_or(n - 1)
            } else {
                rng.gen_range(0..n)
            };
            centres.extend_from_slice(point(pick));
        }
        let mut labels = vec![0; n];
        for _ in 0..LLOYD_ITERATIONS {
            let mut changed = false;
            for (i, l) in labels.iter_mut().enumerate() {
                let nearest = centres
                    .chunks_exact(dim)
                    .enumerate()
                    .map(|(c, ctr)| (c, sq_dist(point(i), ctr)))
                    .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
                    .0;
                changed |= nearest != *l;
                *l = nearest;
            }
            for (c, ctr) in centres.chunks_exact_mut(dim).enumerate() {
                let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
                if members.is_empty() {
                    continue;
                }
                ctr.iter_mut().for_each(|v| *v = 0.0);
                for &i in &members {
                    for (v, p) in ctr.iter_mut().zip(point(i)) {
                        *v += p / members.len() as f64;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let inertia: f64 = (0..n)
            .map(|i| sq_dist(point(i), &centres[labels[i] * dim..(labels[i] + 1) * dim]))
            .sum();
        if best.as_ref().map_or(true, |b| inertia < b.0) {
            best = Some((inertia, labels));
        }
    }
    canonical_labels(&best.expect("at least one restart").1)
}

fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map: Vec<(usize, usize)> = Vec::new();
    labels
        .iter()
        .map(|&l| match map.iter().find(|m| m.0 == l) {
            Some(m) => m.1,
            None => {
                map.push((l, map.len()));
                map.len() - 1
            }
        })
        .collect()
}
