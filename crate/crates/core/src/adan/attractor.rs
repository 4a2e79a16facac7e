//! Anchor pre-segmentation, attractor formation, set selection and masks.
//!
//! Embeddings are stored bin-major: `v[i * k + d]` is coordinate `d` of
//! time-frequency bin `i`. Per-source quantities over bins are stored
//! source-major: `w[c * n + i]`.

use crate::{Error, Result};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// In-place softmax over `c` of `logits[c * n + i]` for every bin `i`.
fn softmax_columns(logits: &mut [f64], c: usize, n: usize) {
    for i in 0..n {
        let max = (0..c)
            .map(|s| logits[s * n + i])
            .fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for s in 0..c {
            let e = (logits[s * n + i] - max).exp();
            logits[s * n + i] = e;
            total += e;
        }
        for s in 0..c {
            logits[s * n + i] /= total;
        }
    }
}

/// Softmax over sources of `<centres[c], v_i>` at every bin; `centres` is
/// `C x K`. Shared by pre-segmentation (anchors) and masking (attractors).
fn similarity_softmax(centres: &[f64], v: &[f64], k: usize) -> Vec<f64> {
    let c = centres.len() / k;
    let n = v.len() / k;
    let mut out = vec![0.0; c * n];
    for s in 0..c {
        let h = &centres[s * k..(s + 1) * k];
        for (i, e) in v.chunks_exact(k).enumerate() {
            out[s * n + i] = dot(h, e);
        }
    }
    softmax_columns(&mut out, c, n);
    out
}

/// Soft pre-segmentation of every bin over the selected anchors
/// (`C x K`): `W[c, i] = softmax_c <H_c, V_i>`.
pub fn presegment(anchors: &[f64], v: &[f64], k: usize) -> Vec<f64> {
    similarity_softmax(anchors, v, k)
}

/// Weighted mean embedding per source: `A_c = sum_i W[c, i] V_i / sum_i W[c, i]`.
pub fn attractors(v: &[f64], w: &[f64], k: usize) -> Result<Vec<f64>> {
    let n = v.len() / k;
    let c = w.len() / n.max(1);
    let mut a = vec![0.0; c * k];
    for s in 0..c {
        let ws = &w[s * n..(s + 1) * n];
        let total: f64 = ws.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::DegenerateWeight(format!(
                "source {s} has total pre-segmentation weight {total}"
            )));
        }
        let row = &mut a[s * k..(s + 1) * k];
        for (wi, e) in ws.iter().zip(v.chunks_exact(k)) {
            for (r, x) in row.iter_mut().zip(e) {
                *r += wi * x;
            }
        }
        for r in row.iter_mut() {
            *r /= total;
        }
    }
    Ok(a)
}

/// Largest dot product between two distinct attractors of a set, and the
/// pair achieving it. `None` for sets of fewer than two.
pub fn in_set_similarity(a: &[f64], k: usize) -> Option<(f64, usize, usize)> {
    let c = a.len() / k;
    let mut best: Option<(f64, usize, usize)> = None;
    for i in 0..c {
        for j in i + 1..c {
            let s = dot(&a[i * k..(i + 1) * k], &a[j * k..(j + 1) * k]);
            if best.map_or(true, |b| s > b.0) {
                best = Some((s, i, j));
            }
        }
    }
    best
}

/// Index of the candidate set with the smallest in-set similarity; ties go
/// to the lowest index. Returns `None` only for an empty candidate list.
pub fn select_attractor_set(candidates: &[Vec<f64>], k: usize) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (p, a) in candidates.iter().enumerate() {
        let s = in_set_similarity(a, k).map_or(f64::NEG_INFINITY, |x| x.0);
        if best.map_or(true, |b| s < b.1) {
            best = Some((p, s));
        }
    }
    best.map(|b| b.0)
}

/// Output masks `M[e, i] = softmax_e <A_e, V_i>`.
pub fn masks(a: &[f64], v: &[f64], k: usize) -> Vec<f64> {
    similarity_softmax(a, v, k)
}

/// All `r`-element subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if r > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..r).rev().find(|&i| idx[i] != i + n - r) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..r {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// All orderings of `items`, lexicographic in position.
pub fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (i, &first) in items.iter().enumerate() {
        let rest: Vec<usize> = items
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &x)| x)
            .collect();
        for mut tail in permutations(&rest) {
            tail.insert(0, first);
            out.push(tail);
        }
    }
    out
}

/// The attractor stage for one utterance: every choice of `outputs` anchors
/// out of `N`, the selected set, and the masks it yields.
#[derive(Debug, Clone)]
pub(crate) struct AttractorPass {
    pub anchor_sets: Vec<Vec<usize>>,
    pub similarities: Vec<f64>,
    pub chosen: usize,
    pub weights: Vec<f64>,
    pub attractors: Vec<f64>,
    pub masks: Vec<f64>,
}

impl AttractorPass {
    pub fn run(anchors: &[f64], v: &[f64], k: usize, outputs: usize) -> Result<Self> {
        let n_anchors = anchors.len() / k;
        if outputs < 2 || outputs > n_anchors {
            return Err(Error::Config(format!(
                "{outputs} outputs cannot be drawn from {n_anchors} anchors"
            )));
        }
        let anchor_sets = combinations(n_anchors, outputs);
        let mut weights = Vec::with_capacity(anchor_sets.len());
        let mut sets = Vec::with_capacity(anchor_sets.len());
        for set in &anchor_sets {
            let h: Vec<f64> = set
                .iter()
                .flat_map(|&a| anchors[a * k..(a + 1) * k].iter().copied())
                .collect();
            let w = presegment(&h, v, k);
            sets.push(attractors(v, &w, k)?);
            weights.push(w);
        }
        let similarities = sets
            .iter()
            .map(|a| in_set_similarity(a, k).map_or(f64::NEG_INFINITY, |x| x.0))
            .collect();
        let chosen = select_attractor_set(&sets, k).expect("at least one anchor set");
        let attractors = sets.swap_remove(chosen);
        let masks = masks(&attractors, v, k);
        Ok(AttractorPass {
            anchor_sets,
            similarities,
            chosen,
            weights: weights.swap_remove(chosen),
            attractors,
            masks,
        })
    }

    /// Back-propagates `d_masks` (same layout as the masks) through the
    /// selected branch, accumulating into `dv` (bin-major) and `d_anchors`
    /// (`N x K`). The set choice itself is held fixed.
    pub fn backward(
        &self,
        anchors: &[f64],
        v: &[f64],
        k: usize,
        d_masks: &[f64],
        dv: &mut [f64],
        d_anchors: &mut [f64],
    ) {
        let e = self.attractors.len() / k;
        let n = v.len() / k;
        let set = &self.anchor_sets[self.chosen];

        // Masks: softmax over outputs of z = <A_e, V_i>.
        let mut da = vec![0.0; e * k];
        let dz = softmax_backward(&self.masks, d_masks, e, n);
        for s in 0..e {
            let a = &self.attractors[s * k..(s + 1) * k];
            let das = &mut da[s * k..(s + 1) * k];
            for (i, vi) in v.chunks_exact(k).enumerate() {
                let g = dz[s * n + i];
                if g == 0.0 {
                    continue;
                }
                let dvi = &mut dv[i * k..(i + 1) * k];
                for d in 0..k {
                    das[d] += g * vi[d];
                    dvi[d] += g * a[d];
                }
            }
        }

        // Attractors: A_e = sum_i W_ei V_i / sum_i W_ei.
        let mut dw = vec![0.0; e * n];
        for s in 0..e {
            let w = &self.weights[s * n..(s + 1) * n];
            let total: f64 = w.iter().sum();
            let das = &da[s * k..(s + 1) * k];
            let a = &self.attractors[s * k..(s + 1) * k];
            let da_dot_a = dot(das, a);
            for (i, vi) in v.chunks_exact(k).enumerate() {
                let dvi = &mut dv[i * k..(i + 1) * k];
                let scale = w[i] / total;
                for d in 0..k {
                    dvi[d] += scale * das[d];
                }
                dw[s * n + i] = (dot(das, vi) - da_dot_a) / total;
            }
        }

        // Pre-segmentation: softmax over the set of y = <H_a, V_i>.
        let dy = softmax_backward(&self.weights, &dw, e, n);
        for (s, &anchor) in set.iter().enumerate() {
            let h = &anchors[anchor * k..(anchor + 1) * k];
            let mut dh = vec![0.0; k];
            for (i, vi) in v.chunks_exact(k).enumerate() {
                let g = dy[s * n + i];
                let dvi = &mut dv[i * k..(i + 1) * k];
                for d in 0..k {
                    dh[d] += g * vi[d];
                    dvi[d] += g * h[d];
                }
            }
            for (t, x) in d_anchors[anchor * k..(anchor + 1) * k].iter_mut().zip(dh) {
                *t += x;
            }
        }
    }
}

/// Gradient through a column softmax: `dz = p * (dp - sum_c p dp)`.
fn softmax_backward(p: &[f64], dp: &[f64], c: usize, n: usize) -> Vec<f64> {
    let mut dz = vec![0.0; c * n];
    for i in 0..n {
        let inner: f64 = (0..c).map(|s| p[s * n + i] * dp[s * n + i]).sum();
        for s in 0..c {
            dz[s * n + i] = p[s * n + i] * (dp[s * n + i] - inner);
        }
    }
    dz
}
