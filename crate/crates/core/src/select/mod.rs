//! Reduces the `E x B` per-beam outputs to one output per talker.

mod cluster;

pub use cluster::{kmeans, spectral_cluster, KMEANS_RESTARTS};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::metrics::{SdrMeasure, SdrReference};
use crate::{Error, Result};

/// Pearson correlations between candidates, over the ones with nonzero
/// variance.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    /// Indices (into the original candidate list) of the rows kept.
    pub kept: Vec<usize>,
    /// `kept.len()` squared entries, row-major.
    pub entries: Vec<f64>,
}

impl AffinityMatrix {
    pub fn size(&self) -> usize {
        self.kept.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size() + j]
    }
}

/// Correlates flattened magnitude spectrograms (or their logs).
///
/// Candidates with zero variance carry no shape information; they are
/// dropped with a warning. If none remain the input is rejected.
pub fn pearson_affinity(candidates: &[Vec<f64>], log_magnitude: bool) -> Result<AffinityMatrix> {
    let len = candidates.first().map_or(0, Vec::len);
    if len == 0 || candidates.iter().any(|c| c.len() != len) {
        return Err(Error::Shape(
            "candidates must be non-empty and equally sized".into(),
        ));
    }
    let mut kept = Vec::new();
    let mut centred: Vec<Vec<f64>> = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        let x: Vec<f64> = if log_magnitude {
            c.iter().map(|m| m.max(1e-8).ln()).collect()
        } else {
            c.clone()
        };
        let mean = x.iter().sum::<f64>() / len as f64;
        let mut d: Vec<f64> = x.iter().map(|v| v - mean).collect();
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            warn!("candidate {i} has zero variance and is left out of clustering");
            continue;
        }
        d.iter_mut().for_each(|v| *v /= norm);
        kept.push(i);
        centred.push(d);
    }
    if kept.is_empty() {
        return Err(Error::DegenerateInput(
            "every candidate has zero variance".into(),
        ));
    }
    let n = kept.len();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        entries[i * n + i] = 1.0;
        for j in i + 1..n {
            let r: f64 = centred[i].iter().zip(&centred[j]).map(|(a, b)| a * b).sum();
            let r = r.clamp(-1.0, 1.0);
            entries[i * n + j] = r;
            entries[j * n + i] = r;
        }
    }
    Ok(AffinityMatrix { kept, entries })
}

/// `mean / std` of a candidate's magnitude values; higher counts as cleaner.
/// Outputs that carry a talker fill the time-frequency plane densely and
/// score high, while a residual output holding only sparse leakage scores
/// low. A constant input has no spread and scores `+inf`.
pub fn quality_score(magnitudes: &[f64]) -> f64 {
    let n = magnitudes.len() as f64;
    let abs: Vec<f64> = magnitudes.iter().map(|v| v.abs()).collect();
    let mean = abs.iter().sum::<f64>() / n;
    let std = (abs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    // Rounding leaves a tiny spread on constant inputs; treat it as none.
    if std > 1e-12 * mean {
        mean / std
    } else {
        f64::INFINITY
    }
}

fn better(a: (usize, f64), b: (usize, f64)) -> bool {
    a.1 > b.1 || (a.1 == b.1 && a.0 < b.0)
}

fn best_first(a: &(usize, f64), b: &(usize, f64)) -> std::cmp::Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Picks `c` candidates from clustered outputs.
///
/// Every cluster is represented by its best (highest-score) member. The
/// cluster whose representative scores lowest is treated as the artifact
/// cluster and dropped; the representatives of the others are returned, best
/// first. If that leaves fewer than `c`, the best remaining candidates fill
/// in.
pub fn select_outputs(scores: &[f64], labels: &[usize], c: usize) -> Result<Vec<usize>> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if c > scores.len() {
        return Err(Error::Input(format!(
            "cannot select {c} outputs from {} candidates",
            scores.len()
        )));
    }
    let n_clusters = labels.iter().max().map_or(0, |m| m + 1);
    let mut reps: Vec<(usize, f64)> = (0..n_clusters)
        .filter_map(|k| {
            (0..scores.len())
                .filter(|&i| labels[i] == k)
                .map(|i| (i, scores[i]))
                .reduce(|a, b| if better(b, a) { b } else { a })
        })
        .collect();
    reps.sort_by(best_first);
    reps.pop();
    let mut chosen: Vec<usize> = reps.iter().take(c).map(|r| r.0).collect();
    if chosen.len() < c {
        let mut rest: Vec<(usize, f64)> = (0..scores.len())
            .filter(|i| !chosen.contains(i))
            .map(|i| (i, scores[i]))
            .collect();
        rest.sort_by(best_first);
        chosen.extend(rest.iter().take(c - chosen.len()).map(|r| r.0));
    }
    Ok(chosen)
}

/// For each reference, the candidate with the best SDR against it, each
/// candidate serving at most one reference. Pairs are fixed greedily from the
/// highest SDR down. Result is indexed by reference.
pub fn oracle_select(
    candidates: &[Vec<f64>],
    references: &[Vec<f64>],
    measure: SdrMeasure,
) -> Result<Vec<usize>> {
    if references.len() > candidates.len() {
        return Err(Error::Input(format!(
            "{} references but only {} candidates",
            references.len(),
            candidates.len()
        )));
    }
    let table = sdr_table(candidates, references, measure)?;
    Ok(greedy_assignment(&table, candidates.len()))
}

/// `table[r][c]`: SDR of candidate `c` against reference `r`.
pub fn sdr_table(
    candidates: &[Vec<f64>],
    references: &[Vec<f64>],
    measure: SdrMeasure,
) -> Result<Vec<Vec<f64>>> {
    references
        .iter()
        .map(|r| {
            let r = SdrReference::new(r, measure)?;
            candidates.iter().map(|c| r.sdr(c)).collect()
        })
        .collect()
}

fn greedy_assignment(table: &[Vec<f64>], n_candidates: usize) -> Vec<usize> {
    let mut pairs: Vec<(f64, usize, usize)> = table
        .iter()
        .enumerate()
        .flat_map(|(r, row)| row.iter().enumerate().map(move |(c, &s)| (s, r, c)))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out = vec![usize::MAX; table.len()];
    let mut used = vec![false; n_candidates];
    for (_, r, c) in pairs {
        if out[r] == usize::MAX && !used[c] {
            out[r] = c;
            used[c] = true;
        }
    }
    out
}

/// Per-utterance record of how the final outputs were chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    /// `(beam, output)` of every candidate, in candidate order.
    pub provenance: Vec<(usize, usize)>,
    pub scores: Vec<f64>,
    /// Cluster label per candidate; candidates left out of clustering get
    /// `None`.
    pub labels: Vec<Option<usize>>,
    pub chosen: Vec<usize>,
    pub oracle: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affinity_basics() {
        let a = vec![1.0, 3.0, 2.0, 5.0];
        let neg: Vec<f64> = a.iter().map(|v| 6.0 - v).collect();
        let aff = pearson_affinity(&[a.clone(), a.clone(), neg, vec![2.0; 4]], false).unwrap();
        assert_eq!(aff.kept, vec![0, 1, 2]);
        assert!((aff.get(0, 1) - 1.0).abs() < 1e-12);
        assert!((aff.get(0, 2) + 1.0).abs() < 1e-12);
        assert!(matches!(
            pearson_affinity(&[vec![1.0; 3]], false),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn pearson_matches_covariance_formula() {
        let c = vec![
            vec![0.3, 1.2, 0.7, 2.2, 0.1],
            vec![1.0, 0.2, 0.4, 0.9, 1.7],
            vec![0.5, 0.5, 2.0, 0.1, 0.3],
        ];
        let aff = pearson_affinity(&c, false).unwrap();
        let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
        for i in 0..3 {
            for j in 0..3 {
                let (mi, mj) = (mean(&c[i]), mean(&c[j]));
                let cov: f64 = c[i]
                    .iter()
                    .zip(&c[j])
                    .map(|(a, b)| (a - mi) * (b - mj))
                    .sum::<f64>()
                    / 5.0;
                let si = (c[i].iter().map(|a| (a - mi).powi(2)).sum::<f64>() / 5.0).sqrt();
                let sj = (c[j].iter().map(|b| (b - mj).powi(2)).sum::<f64>() / 5.0).sqrt();
                assert!((aff.get(i, j) - cov / (si * sj)).abs() < 1e-12);
                assert_eq!(aff.get(i, j), aff.get(j, i));
            }
        }
    }

    #[test]
    fn quality_score_properties() {
        assert_eq!(quality_score(&[0.4; 10]), f64::INFINITY);
        let x = vec![0.1, 2.0, 0.0, 0.3, 4.0, 0.2];
        let scaled: Vec<f64> = x.iter().map(|v| 7.5 * v).collect();
        assert!((quality_score(&x) - quality_score(&scaled)).abs() < 1e-12);
    }

    #[test]
    fn dense_output_scores_above_sparse_leakage() {
        // A talker-like output covering most cells against a residual that
        // only holds a few leaked peaks.
        let dense: Vec<f64> = (0..2000)
            .map(|i| 1.0 + 0.5 * ((i * 7919 % 101) as f64 / 101.0))
            .collect();
        let sparse: Vec<f64> = (0..2000)
            .map(|i| if i % 40 == 3 { 5.0 } else { 0.01 })
            .collect();
        assert!(quality_score(&dense) > quality_score(&sparse));
    }

    #[test]
    fn selection_drops_the_artifact_cluster() {
        // Clusters: {0,1} speaker A, {2,3} speaker B, {4,5} near-silent residual.
        let scores = [0.5, 0.7, 0.6, 0.9, 0.02, 0.05];
        let labels = [0, 0, 1, 1, 2, 2];
        assert_eq!(select_outputs(&scores, &labels, 2).unwrap(), vec![3, 1]);
        // A single cluster still yields C outputs.
        let chosen = select_outputs(&[1.0; 6], &[0; 6], 2).unwrap();
        assert_eq!(chosen.len(), 2);
        assert_ne!(chosen[0], chosen[1]);
    }

    #[test]
    fn oracle_select_finds_copies() {
        let r = vec![vec![1.0, -1.0, 2.0, 0.5], vec![0.2, 0.9, -0.4, 1.0]];
        let cands = vec![
            vec![1.0, 1.0, 1.0, 0.0],
            r[1].clone(),
            vec![0.0, 1.0, 0.0, 1.0],
            r[0].clone(),
        ];
        assert_eq!(
            oracle_select(&cands, &r, SdrMeasure::SCALE_INVARIANT).unwrap(),
            vec![3, 1]
        );
        let best = oracle_select(&cands, &r[..1], SdrMeasure::SCALE_INVARIANT).unwrap();
        assert_eq!(best, vec![3]);
    }
}
