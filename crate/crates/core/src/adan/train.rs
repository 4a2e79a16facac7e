use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{EmbeddingModel, Gradients, TrainingExample};
use crate::beam::BeamformerBank;
use crate::dsp::{energy, MultichannelWave, StftConfig};
use crate::{Error, Result};

/// Parameter update rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Optimizer {
    /// Plain gradient descent.
    Sgd,
    /// Adam with the usual bias correction.
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    /// Gradients with a larger global norm are rescaled to this norm.
    pub clip_norm: f64,
    pub batch_size: usize,
    /// Random crop length in frames; `None` trains on whole utterances.
    pub crop_frames: Option<usize>,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 2000,
            learning_rate: 1e-3,
            clip_norm: 5.0,
            batch_size: 4,
            crop_frames: Some(100),
            optimizer: Optimizer::adam(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !(self.clip_norm > 0.0) || self.batch_size == 0 {
            return Err(Error::Config(
                "learning rate must be >= 0, clip norm > 0 and batch size >= 1".into(),
            ));
        }
        if self.crop_frames == Some(0) {
            return Err(Error::Config("crop length must be positive".into()));
        }
        Ok(())
    }
}

/// Moment estimates carried between steps.
#[derive(Debug, Clone, Default)]
pub struct OptimizerState {
    pub step: u64,
    first: Vec<f64>,
    second: Vec<f64>,
}

/// What one step did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub loss: f64,
    pub grad_norm: f64,
}

/// One optimiser step on the batch-mean loss. On a non-finite loss or
/// gradient the model is left untouched and a divergence error returned.
pub fn train_step(
    model: &mut EmbeddingModel,
    batch: &[TrainingExample],
    g: usize,
    config: &TrainConfig,
    state: &mut OptimizerState,
) -> Result<StepReport> {
    if batch.is_empty() {
        return Err(Error::Input("empty training batch".into()));
    }
    let mut grad = Gradients::zeros_like(model);
    let mut loss = 0.0;
    let w = 1.0 / batch.len() as f64;
    for ex in batch {
        let eval = model.loss_and_gradient(ex, g)?;
        loss += w * eval.loss;
        grad.add_scaled(&eval.grad, w);
    }
    let grad_norm = grad.norm();
    if !loss.is_finite() || !grad_norm.is_finite() {
        return Err(Error::Divergence(format!(
            "step {}: loss {loss}, gradient norm {grad_norm}",
            state.step + 1
        )));
    }
    if grad_norm > config.clip_norm {
        grad.scale(config.clip_norm / grad_norm);
    }
    state.step += 1;
    apply_update(model, &grad, config, state);
    Ok(StepReport { loss, grad_norm })
}

fn apply_update(
    model: &mut EmbeddingModel,
    grad: &Gradients,
    config: &TrainConfig,
    state: &mut OptimizerState,
) {
    let lr = config.learning_rate;
    let n_params = model.params().len();
    let update = |i: usize, p: &mut f64, g: f64, state: &mut OptimizerState| match config.optimizer
    {
        Optimizer::Sgd => *p -= lr * g,
        Optimizer::Adam {
            beta1,
            beta2,
            epsilon,
        } => {
            let m = &mut state.first[i];
            *m = beta1 * *m + (1.0 - beta1) * g;
            let v = &mut state.second[i];
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let t = state.step as i32;
            let m_hat = state.first[i] / (1.0 - beta1.powi(t));
            let v_hat = state.second[i] / (1.0 - beta2.powi(t));
            *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
        }
    };
    if matches!(config.optimizer, Optimizer::Adam { .. })
        && state.first.len() != model.num_parameters()
    {
        state.first = vec![0.0; model.num_parameters()];
        state.second = vec![0.0; model.num_parameters()];
    }
    for (i, (p, g)) in model.params_mut().iter_mut().zip(&grad.params).enumerate() {
        update(i, p, *g, state);
    }
    for (i, (p, g)) in model
        .anchors_mut()
        .iter_mut()
        .zip(&grad.anchors)
        .enumerate()
    {
        update(n_params + i, p, *g, state);
    }
}

/// Runs `config.steps` steps over randomly drawn (and cropped) examples,
/// calling `on_step(step, report)` after each. Returns the loss curve.
pub fn train(
    model: &mut EmbeddingModel,
    examples: &[TrainingExample],
    g: usize,
    config: &TrainConfig,
    mut on_step: impl FnMut(usize, &StepReport),
) -> Result<Vec<f64>> {
    config.validate()?;
    if examples.is_empty() {
        return Err(Error::Input("no training examples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = OptimizerState::default();
    let mut losses = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let batch: Vec<TrainingExample> = (0..config.batch_size)
            .map(|_| {
                let ex = &examples[rng.gen_range(0..examples.len())];
                match config.crop_frames {
                    Some(len) if len < ex.frames => {
                        ex.crop(rng.gen_range(0..=ex.frames - len), len)
                    }
                    _ => ex.clone(),
                }
            })
            .collect();
        let report = train_step(model, &batch, g, config, &mut state)?;
        losses.push(report.loss);
        on_step(step, &report);
    }
    Ok(losses)
}

/// Training examples from one mixture: for each speaker, the beam where that
/// speaker's image has the highest SNR over the other speakers' images. The
/// references are every speaker's image through that beam. A beam picked by
/// several speakers appears once.
///
/// Signals are padded by the STFT edge padding so every sample is
/// fully covered by analysis windows.
pub fn beam_examples(
    mixture: &MultichannelWave,
    images: &[MultichannelWave],
    bank: &BeamformerBank,
    cfg: StftConfig,
) -> Result<Vec<TrainingExample>> {
    let pad = cfg.edge_padding();
    let beams = bank.apply(&mixture.padded(pad), cfg)?;
    let source_beams: Vec<Vec<_>> = images
        .iter()
        .map(|im| bank.apply(&im.padded(pad), cfg))
        .collect::<Result<_>>()?;
    let power =
        |s: &crate::dsp::ComplexSpectrogram| s.bins().iter().map(|x| x.norm_sqr()).sum::<f64>();
    let mut picked: Vec<usize> = Vec::new();
    for c in 0..images.len() {
        let mut best = (0, f64::NEG_INFINITY);
        for b in 0..beams.len() {
            let target = power(&source_beams[c][b]);
            let other: f64 = (0..images.len())
                .filter(|&o| o != c)
                .map(|o| power(&source_beams[o][b]))
                .sum();
            let snr = 10.0 * (target / other.max(f64::MIN_POSITIVE)).log10();
            if snr > best.1 {
                best = (b, snr);
            }
        }
        if !picked.contains(&best.0) {
            picked.push(best.0);
        }
    }
    picked
        .into_iter()
        .map(|b| {
            let refs: Vec<_> = source_beams.iter().map(|s| s[b].clone()).collect();
            TrainingExample::from_spectra(&beams[b], &refs)
        })
        .filter(|ex| ex.as_ref().map_or(true, |e| energy(&e.mixture) > 0.0))
        .collect()
}

/// `step,loss` rows.
pub fn write_loss_csv(path: impl AsRef<Path>, losses: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("step,loss\n");
    for (i, l) in losses.iter().enumerate() {
        writeln!(out, "{},{l:e}", i + 1).expect("writing to a String");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
