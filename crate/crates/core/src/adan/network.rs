//! The embedding network: a stack of bidirectional LSTM (or dense tanh)
//! layers over frames, then a tanh projection to `K` values per frequency bin.
//!
//! All parameters live in one flat vector; [`Layout`] knows where each
//! tensor starts. Activations are frame-major: `x[t * dim + j]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Hidden layer sizes and whether they are recurrent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    /// Units per layer (per direction when recurrent).
    pub hidden: Vec<usize>,
    pub recurrent: bool,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            hidden: vec![64, 64],
            recurrent: true,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct LayerLayout {
    input: usize,
    hidden: usize,
    offset: usize,
}

impl LayerLayout {
    fn gate_cols(&self) -> usize {
        self.input + self.hidden
    }

    /// Weight and bias offsets of one direction of a recurrent layer.
    fn direction(&self, dir: usize) -> (usize, usize) {
        let w = 4 * self.hidden * self.gate_cols();
        let start = self.offset + dir * (w + 4 * self.hidden);
        (start, start + w)
    }

    fn output_dim(&self, recurrent: bool) -> usize {
        if recurrent {
            2 * self.hidden
        } else {
            self.hidden
        }
    }
}

/// Offsets of every tensor in the flat parameter vector.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    layers: Vec<LayerLayout>,
    recurrent: bool,
    bins: usize,
    dim: usize,
    out_w: usize,
    out_b: usize,
    out_in: usize,
    total: usize,
}

impl Layout {
    pub fn new(bins: usize, dim: usize, arch: &Architecture) -> Self {
        let mut offset = 0;
        let mut input = bins;
        let mut layers = Vec::with_capacity(arch.hidden.len());
        for &hidden in &arch.hidden {
            let l = LayerLayout {
                input,
                hidden,
                offset,
            };
            offset += if arch.recurrent {
                2 * (4 * hidden * l.gate_cols() + 4 * hidden)
            } else {
                hidden * input + hidden
            };
            input = l.output_dim(arch.recurrent);
            layers.push(l);
        }
        let out_w = offset;
        let out_b = out_w + bins * dim * input;
        Layout {
            layers,
            recurrent: arch.recurrent,
            bins,
            dim,
            out_w,
            out_b,
            out_in: input,
            total: out_b + bins * dim,
        }
    }

    pub fn num_params(&self) -> usize {
        self.total
    }

    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` weights, zero biases and
    /// unit forget-gate biases.
    pub fn initialise(&self, rng: &mut impl Rng) -> Vec<f64> {
        let mut p = vec![0.0; self.total];
        for l in &self.layers {
            if self.recurrent {
                let s = 1.0 / (l.hidden as f64).sqrt();
                for dir in 0..2 {
                    let (w, b) = l.direction(dir);
                    for x in &mut p[w..b] {
                        *x = rng.gen_range(-s..s);
                    }
                    for x in &mut p[b + l.hidden..b + 2 * l.hidden] {
                        *x = 1.0;
                    }
                }
            } else {
                let s = 1.0 / (l.input as f64).sqrt();
                for x in &mut p[l.offset..l.offset + l.hidden * l.input] {
                    *x = rng.gen_range(-s..s);
                }
            }
        }
        let s = 1.0 / (self.out_in as f64).sqrt();
        for x in &mut p[self.out_w..self.out_b] {
            *x = rng.gen_range(-s..s);
        }
        p
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `out[r] += sum_c w[r, c] x[c]` over a column window of a row-major matrix.
fn gemv(w: &[f64], cols: usize, col0: usize, x: &[f64], out: &mut [f64]) {
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w[r * cols + col0..r * cols + col0 + x.len()];
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out[c] += sum_r w[r, c] dy[r]`, the transposed product.
fn gemv_t(w: &[f64], cols: usize, col0: usize, dy: &[f64], out: &mut [f64]) {
    for (r, &g) in dy.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let row = &w[r * cols + col0..r * cols + col0 + out.len()];
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * g;
        }
    }
}

/// `dw[r, c] += dy[r] x[c]` over a column window.
fn ger(dw: &mut [f64], cols: usize, col0: usize, dy: &[f64], x: &[f64]) {
    for (r, &g) in dy.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let row = &mut dw[r * cols + col0..r * cols + col0 + x.len()];
        for (d, v) in row.iter_mut().zip(x) {
            *d += g * v;
        }
    }
}

/// One direction of an LSTM layer over the whole sequence.
#[derive(Debug, Clone)]
struct DirectionCache {
    /// Activated gates `i, f, g, o` per frame (`T x 4H`).
    gates: Vec<f64>,
    cells: Vec<f64>,
    hidden: Vec<f64>,
}

fn step_order(frames: usize, reverse: bool) -> impl DoubleEndedIterator<Item = usize> + Clone {
    (0..frames).map(move |s| if reverse { frames - 1 - s } else { s })
}

fn lstm_forward(
    p: &[f64],
    l: &LayerLayout,
    dir: usize,
    x: &[f64],
    frames: usize,
) -> DirectionCache {
    let (h, cols) = (l.hidden, l.gate_cols());
    let (wo, bo) = l.direction(dir);
    let (w, b) = (&p[wo..bo], &p[bo..bo + 4 * h]);
    let mut cache = DirectionCache {
        gates: vec![0.0; frames * 4 * h],
        cells: vec![0.0; frames * h],
        hidden: vec![0.0; frames * h],
    };
    let mut prev: Option<usize> = None;
    for t in step_order(frames, dir == 1) {
        let mut z = b.to_vec();
        gemv(w, cols, 0, &x[t * l.input..(t + 1) * l.input], &mut z);
        if let Some(tp) = prev {
            gemv(
                w,
                cols,
                l.input,
                &cache.hidden[tp * h..(tp + 1) * h],
                &mut z,
            );
        }
        for j in 0..h {
            let (i, f, g, o) = (
                sigmoid(z[j]),
                sigmoid(z[h + j]),
                z[2 * h + j].tanh(),
                sigmoid(z[3 * h + j]),
            );
            let c_prev = prev.map_or(0.0, |tp| cache.cells[tp * h + j]);
            let c = f * c_prev + i * g;
            cache.cells[t * h + j] = c;
            cache.hidden[t * h + j] = o * c.tanh();
            let gates = &mut cache.gates[t * 4 * h..(t + 1) * 4 * h];
            gates[j] = i;
            gates[h + j] = f;
            gates[2 * h + j] = g;
            gates[3 * h + j] = o;
        }
        prev = Some(t);
    }
    cache
}

/// Back-propagation through time for one direction. `dh` is the gradient
/// arriving at each frame's hidden output; `dx` receives input gradients.
#[allow(clippy::too_many_arguments)]
fn lstm_backward(
    p: &[f64],
    grad: &mut [f64],
    l: &LayerLayout,
    dir: usize,
    x: &[f64],
    cache: &DirectionCache,
    dh: &[f64],
    dx: &mut [f64],
    frames: usize,
) {
    let (h, cols) = (l.hidden, l.gate_cols());
    let (wo, bo) = l.direction(dir);
    let w = &p[wo..bo];
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut dz = vec![0.0; 4 * h];
    let order: Vec<usize> = step_order(frames, dir == 1).collect();
    for (s, &t) in order.iter().enumerate().rev() {
        let prev = s.checked_sub(1).map(|q| order[q]);
        let gates = &cache.gates[t * 4 * h..(t + 1) * 4 * h];
        for j in 0..h {
            let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
            let c = cache.cells[t * h + j];
            let tc = c.tanh();
            let dhj = dh[t * h + j] + dh_next[j];
            let dc = dhj * o * (1.0 - tc * tc) + dc_next[j];
            let c_prev = prev.map_or(0.0, |tp| cache.cells[tp * h + j]);
            dz[j] = dc * g * i * (1.0 - i);
            dz[h + j] = dc * c_prev * f * (1.0 - f);
            dz[2 * h + j] = dc * i * (1.0 - g * g);
            dz[3 * h + j] = dhj * tc * o * (1.0 - o);
            dc_next[j] = dc * f;
        }
        let (dw, db) = grad[wo..bo + 4 * h].split_at_mut(bo - wo);
        for (d, z) in db.iter_mut().zip(&dz) {
            *d += z;
        }
        ger(dw, cols, 0, &dz, &x[t * l.input..(t + 1) * l.input]);
        gemv_t(w, cols, 0, &dz, &mut dx[t * l.input..(t + 1) * l.input]);
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        if let Some(tp) = prev {
            ger(dw, cols, l.input, &dz, &cache.hidden[tp * h..(tp + 1) * h]);
            gemv_t(w, cols, l.input, &dz, &mut dh_next);
        }
    }
}

#[derive(Debug, Clone)]
enum LayerCache {
    Recurrent([DirectionCache; 2]),
    Dense,
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub(crate) struct ForwardCache {
    frames: usize,
    /// Layer inputs; `acts[0]` is the feature matrix and the last entry
    /// feeds the projection.
    acts: Vec<Vec<f64>>,
    layers: Vec<LayerCache>,
    /// Embeddings, `T x F x K`.
    pub embeddings: Vec<f64>,
}

pub(crate) fn forward(layout: &Layout, p: &[f64], features: &[f64], frames: usize) -> ForwardCache {
    let mut acts = vec![features.to_vec()];
    let mut layers = Vec::with_capacity(layout.layers.len());
    for l in &layout.layers {
        let x = acts.last().expect("input present");
        let out_dim = l.output_dim(layout.recurrent);
        let mut out = vec![0.0; frames * out_dim];
        if layout.recurrent {
            let fwd = lstm_forward(p, l, 0, x, frames);
            let bwd = lstm_forward(p, l, 1, x, frames);
            for t in 0..frames {
                let row = &mut out[t * out_dim..(t + 1) * out_dim];
                row[..l.hidden].copy_from_slice(&fwd.hidden[t * l.hidden..(t + 1) * l.hidden]);
                row[l.hidden..].copy_from_slice(&bwd.hidden[t * l.hidden..(t + 1) * l.hidden]);
            }
            layers.push(LayerCache::Recurrent([fwd, bwd]));
        } else {
            let (w, b) = (
                &p[l.offset..l.offset + l.hidden * l.input],
                &p[l.offset + l.hidden * l.input..],
            );
            for t in 0..frames {
                let row = &mut out[t * out_dim..(t + 1) * out_dim];
                row.copy_from_slice(&b[..l.hidden]);
                gemv(w, l.input, 0, &x[t * l.input..(t + 1) * l.input], row);
                row.iter_mut().for_each(|v| *v = v.tanh());
            }
            layers.push(LayerCache::Dense);
        }
        acts.push(out);
    }
    let y = acts.last().expect("input present");
    let fk = layout.bins * layout.dim;
    let (w, b) = (
        &p[layout.out_w..layout.out_b],
        &p[layout.out_b..layout.total],
    );
    let mut embeddings = vec![0.0; frames * fk];
    for t in 0..frames {
        let row = &mut embeddings[t * fk..(t + 1) * fk];
        row.copy_from_slice(b);
        gemv(
            w,
            layout.out_in,
            0,
            &y[t * layout.out_in..(t + 1) * layout.out_in],
            row,
        );
        row.iter_mut().for_each(|v| *v = v.tanh());
    }
    ForwardCache {
        frames,
        acts,
        layers,
        embeddings,
    }
}

/// Accumulates parameter gradients for upstream gradient `dv` on the
/// embeddings.
pub(crate) fn backward(
    layout: &Layout,
    p: &[f64],
    cache: &ForwardCache,
    dv: &[f64],
    grad: &mut [f64],
) {
    let frames = cache.frames;
    let fk = layout.bins * layout.dim;
    let y = cache.acts.last().expect("input present");
    let mut dy = vec![0.0; frames * layout.out_in];
    {
        let w = &p[layout.out_w..layout.out_b];
        let (gw, gb) = grad[layout.out_w..layout.total].split_at_mut(layout.out_b - layout.out_w);
        let mut du = vec![0.0; fk];
        for t in 0..frames {
            let v = &cache.embeddings[t * fk..(t + 1) * fk];
            for ((d, g), e) in du.iter_mut().zip(&dv[t * fk..(t + 1) * fk]).zip(v) {
                *d = g * (1.0 - e * e);
            }
            for (b, d) in gb.iter_mut().zip(&du) {
                *b += d;
            }
            let yt = &y[t * layout.out_in..(t + 1) * layout.out_in];
            ger(gw, layout.out_in, 0, &du, yt);
            gemv_t(
                w,
                layout.out_in,
                0,
                &du,
                &mut dy[t * layout.out_in..(t + 1) * layout.out_in],
            );
        }
    }
    for (li, l) in layout.layers.iter().enumerate().rev() {
        let x = &cache.acts[li];
        let mut dx = vec![0.0; frames * l.input];
        match &cache.layers[li] {
            LayerCache::Recurrent(dirs) => {
                let h = l.hidden;
                for (dir, dc) in dirs.iter().enumerate() {
                    let dh: Vec<f64> = (0..frames)
                        .flat_map(|t| {
                            dy[t * 2 * h + dir * h..t * 2 * h + (dir + 1) * h]
                                .iter()
                                .copied()
                        })
                        .collect();
                    lstm_backward(p, grad, l, dir, x, dc, &dh, &mut dx, frames);
                }
            }
            LayerCache::Dense => {
                let out = &cache.acts[li + 1];
                let nw = l.hidden * l.input;
                let w = &p[l.offset..l.offset + nw];
                let (gw, gb) = grad[l.offset..l.offset + nw + l.hidden].split_at_mut(nw);
                let mut dz = vec![0.0; l.hidden];
                for t in 0..frames {
                    for ((d, g), o) in dz
                        .iter_mut()
                        .zip(&dy[t * l.hidden..(t + 1) * l.hidden])
                        .zip(&out[t * l.hidden..(t + 1) * l.hidden])
                    {
                        *d = g * (1.0 - o * o);
                    }
                    for (b, d) in gb.iter_mut().zip(&dz) {
                        *b += d;
                    }
                    ger(gw, l.input, 0, &dz, &x[t * l.input..(t + 1) * l.input]);
                    gemv_t(w, l.input, 0, &dz, &mut dx[t * l.input..(t + 1) * l.input]);
                }
            }
        }
        dy = dx;
    }
}
