//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// `rows x cols` view of a flat row-major buffer.
pub fn to_rows(flat: &[f64], cols: usize) -> Vec<Vec<f64>> {
    flat.chunks(cols).map(<[f64]>::to_vec).collect()
}

/// `weights[c][i] = exp(<centre_c, v_i>) / sum_c' exp(<centre_c', v_i>)`,
/// computed without any max shift.
pub fn softmax_weights(centres: &[Vec<f64>], v: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let exps: Vec<Vec<f64>> = centres
        .iter()
        .map(|h| {
            v.iter()
                .map(|e| h.iter().zip(e).map(|(a, b)| a * b).sum::<f64>().exp())
                .collect()
        })
        .collect();
    (0..centres.len())
        .map(|c| {
            (0..v.len())
                .map(|i| exps[c][i] / exps.iter().map(|row| row[i]).sum::<f64>())
                .collect()
        })
        .collect()
}

/// Weighted mean of the embeddings per source.
pub fn weighted_means(v: &[Vec<f64>], w: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = v[0].len();
    w.iter()
        .map(|ws| {
            let total: f64 = ws.iter().sum();
            (0..k)
                .map(|d| ws.iter().zip(v).map(|(wi, e)| wi * e[d]).sum::<f64>() / total)
                .collect()
        })
        .collect()
}

/// Maximum off-diagonal dot product, scanning every ordered pair.
pub fn max_pairwise_dot(a: &[Vec<f64>]) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for (i, x) in a.iter().enumerate() {
        for (j, y) in a.iter().enumerate() {
            if i != j {
                best = best.max(x.iter().zip(y).map(|(p, q)| p * q).sum());
            }
        }
    }
    best
}

/// First index attaining the minimum.
pub fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Minimum PIT loss by trying every labelling of the outputs with a
/// reference or "residual", keeping those that use exactly `g` distinct
/// references. Returns the loss and the sorted `(output, reference)` pairs.
pub fn pit_brute_force(
    outputs: &[Vec<f64>],
    refs: &[Vec<f64>],
    mixture: &[f64],
    g: usize,
) -> (f64, Vec<(usize, usize)>) {
    let e = outputs.len();
    let c = refs.len();
    let choices = c + 1;
    let mut best = (f64::INFINITY, Vec::new());
    for code in 0..choices.pow(e as u32) {
        let mut label = Vec::with_capacity(e);
        let mut x = code;
        for _ in 0..e {
            label.push(x % choices);
            x /= choices;
        }
        let used: Vec<usize> = label.iter().copied().filter(|&l| l < c).collect();
        let mut distinct = used.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if used.len() != g || distinct.len() != g {
            continue;
        }
        let residual: Vec<f64> = (0..mixture.len())
            .map(|i| (mixture[i] - used.iter().map(|&r| refs[r][i]).sum::<f64>()).max(0.0))
            .collect();
        let mut loss = 0.0;
        for (o, &l) in label.iter().enumerate() {
            let target = if l < c { &refs[l] } else { &residual };
            loss += outputs[o]
                .iter()
                .zip(target)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        }
        if loss < best.0 {
            let pairs = label
                .iter()
                .enumerate()
                .filter(|(_, &l)| l < c)
                .map(|(o, &l)| (o, l))
                .collect();
            best = (loss, pairs);
        }
    }
    best
}

/// Ideal image-source impulse response rendered with its own windowed-sinc
/// interpolator: a list of `(delay in samples, gain)` taps.
pub fn render_taps(taps: &[(f64, f64)], len: usize, half_width: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    let half = half_width as f64;
    for &(delay, gain) in taps {
        for (n, o) in out.iter_mut().enumerate() {
            let x = n as f64 - delay;
            if x.abs() > half {
                continue;
            }
            let sinc = if x == 0.0 {
                1.0
            } else {
                (PI * x).sin() / (PI * x)
            };
            *o += gain * sinc * 0.5 * (1.0 + (PI * x / half).cos());
        }
    }
    out
}

/// First-order image sources of a shoebox, mirrored wall by wall: the
/// source itself, and for each axis the reflections in the wall at 0 and
/// at `L`, including every combination across axes.
pub fn first_order_images(source: [f64; 3], dims: [f64; 3]) -> Vec<([f64; 3], usize)> {
    let per_axis = |a: usize| -> Vec<(f64, usize)> {
        vec![
            (source[a], 0),
            (-source[a], 1),
            (2.0 * dims[a] - source[a], 1),
        ]
    };
    let mut out = Vec::new();
    for (x, nx) in per_axis(0) {
        for (y, ny) in per_axis(1) {
            for (z, nz) in per_axis(2) {
                out.push(([x, y, z], nx + ny + nz));
            }
        }
    }
    out
}

pub fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Fraction of nodes whose label matches the planted one under the best
/// relabelling (all permutations of up to `k` labels).
pub fn label_agreement(found: &[usize], planted: &[usize], k: usize) -> f64 {
    let perms = permutations(k);
    perms
        .iter()
        .map(|p| {
            found
                .iter()
                .zip(planted)
                .filter(|(f, t)| p.get(**f) == Some(t))
                .count() as f64
                / found.len() as f64
        })
        .fold(0.0, f64::max)
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Symmetric block affinity: `within` inside blocks, `between` across, each
/// entry perturbed uniformly by up to `noise`; unit diagonal.
pub fn planted_affinity(
    sizes: &[usize],
    within: f64,
    between: f64,
    noise: f64,
    seed: u64,
) -> (Vec<f64>, Vec<usize>) {
    let planted: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| std::iter::repeat(b).take(s))
        .collect();
    let n = planted.len();
    let mut r = rng(seed);
    let mut a = vec![1.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let base = if planted[i] == planted[j] {
                within
            } else {
                between
            };
            let v = base + r.gen_range(-noise..=noise);
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
    }
    (a, planted)
}
