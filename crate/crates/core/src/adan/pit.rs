//! Permutation-invariant squared error with a residual output.

use serde::{Deserialize, Serialize};

use super::attractor::{combinations, permutations};
use crate::{Error, Result};

/// The output-to-target matching that achieved the minimum loss.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PitAssignment {
    /// `(output, reference)` pairs for the `G` salient speakers.
    pub pairs: Vec<(usize, usize)>,
    /// Outputs scored against the residual.
    pub residual_outputs: Vec<usize>,
}

impl PitAssignment {
    /// Target magnitude for every output: its matched reference, or the
    /// residual `max(mixture - sum of matched references, 0)`.
    pub fn targets(&self, references: &[f64], mixture: &[f64]) -> Vec<Vec<f64>> {
        let n = mixture.len();
        let e = self.pairs.len() + self.residual_outputs.len();
        let used: Vec<usize> = self.pairs.iter().map(|p| p.1).collect();
        let residual = residual(references, mixture, &used);
        let mut out = vec![Vec::new(); e];
        for &(o, r) in &self.pairs {
            out[o] = references[r * n..(r + 1) * n].to_vec();
        }
        for &o in &self.residual_outputs {
            out[o] = residual.clone();
        }
        out
    }
}

fn residual(references: &[f64], mixture: &[f64], used: &[usize]) -> Vec<f64> {
    let n = mixture.len();
    let mut r = mixture.to_vec();
    for &c in used {
        for (x, s) in r.iter_mut().zip(&references[c * n..(c + 1) * n]) {
            *x -= s;
        }
    }
    for x in &mut r {
        *x = x.max(0.0);
    }
    r
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Minimum total squared error over every choice of `g` outputs (of `E`),
/// every choice of `g` references (of `C`) and every bijection between them,
/// with the remaining `E - g` outputs scored against the residual.
///
/// `outputs` is `E x n`, `references` is `C x n` and `mixture` has `n`
/// values, all magnitudes. Ties keep the first assignment in enumeration
/// order (output subsets, then reference subsets, then orderings, each
/// lexicographic).
pub fn pit_loss(
    outputs: &[f64],
    references: &[f64],
    mixture: &[f64],
    g: usize,
) -> Result<(f64, PitAssignment)> {
    let n = mixture.len();
    if n == 0 || outputs.len() % n != 0 || references.len() % n != 0 {
        return Err(Error::Shape(format!(
            "outputs ({}) and references ({}) are not multiples of {n} bins",
            outputs.len(),
            references.len()
        )));
    }
    let e = outputs.len() / n;
    let c = references.len() / n;
    if g == 0 || g >= e || g > c {
        return Err(Error::Config(format!(
            "{g} salient speakers need 0 < G < E = {e} and G <= C = {c}"
        )));
    }
    let out = |i: usize| &outputs[i * n..(i + 1) * n];
    let pair: Vec<Vec<f64>> = (0..e)
        .map(|o| {
            (0..c)
                .map(|r| squared_distance(out(o), &references[r * n..(r + 1) * n]))
                .collect()
        })
        .collect();
    let ref_sets = combinations(c, g);
    let residual_cost: Vec<Vec<f64>> = ref_sets
        .iter()
        .map(|set| {
            let res = residual(references, mixture, set);
            (0..e).map(|o| squared_distance(out(o), &res)).collect()
        })
        .collect();

    let mut best: Option<(f64, PitAssignment)> = None;
    for out_set in combinations(e, g) {
        let rest: Vec<usize> = (0..e).filter(|o| !out_set.contains(o)).collect();
        for (si, ref_set) in ref_sets.iter().enumerate() {
            let leftover: f64 = rest.iter().map(|&o| residual_cost[si][o]).sum();
            for order in permutations(ref_set) {
                let total = leftover
                    + out_set
                        .iter()
                        .zip(&order)
                        .map(|(&o, &r)| pair[o][r])
                        .sum::<f64>();
                if best.as_ref().map_or(true, |b| total < b.0) {
                    best = Some((
                        total,
                        PitAssignment {
                            pairs: out_set.iter().copied().zip(order.iter().copied()).collect(),
                            residual_outputs: rest.clone(),
                        },
                    ));
                }
            }
        }
    }
    Ok(best.expect("at least one assignment"))
}
