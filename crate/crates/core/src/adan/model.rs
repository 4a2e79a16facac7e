use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::attractor::AttractorPass;
use super::network::{self, Architecture, Layout};
use super::pit::{pit_loss, PitAssignment};
use crate::dsp::{istft, ComplexSpectrogram};
use crate::{Error, Result};

const CHECKPOINT_FORMAT: &str = "beamsep-adan";
const CHECKPOINT_VERSION: u32 = 1;

/// Magnitudes more than 80 dB below an utterance's peak are floored before
/// taking logs, so silent padding does not dominate the feature statistics.
const FEATURE_FLOOR_REL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// Frequency bins per frame (`frame_len / 2 + 1`).
    pub num_bins: usize,
    /// Embedding dimension `K`.
    pub embed_dim: usize,
    /// Number of anchors `N`.
    pub num_anchors: usize,
    pub architecture: Architecture,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            num_bins: 129,
            embed_dim: 20,
            num_anchors: 6,
            architecture: Architecture::default(),
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim < 2 {
            return Err(Error::Config(
                "embedding dimension must be at least 2".into(),
            ));
        }
        if self.num_anchors < 2 {
            return Err(Error::Config("at least two anchors are required".into()));
        }
        if self.num_bins == 0 {
            return Err(Error::Config("feature dimension must be positive".into()));
        }
        if self.architecture.hidden.is_empty() || self.architecture.hidden.contains(&0) {
            return Err(Error::Config(
                "every hidden layer needs at least one unit".into(),
            ));
        }
        Ok(())
    }
}

/// Standardised log magnitudes of a spectrogram, frame-major.
pub fn log_features(spec: &ComplexSpectrogram) -> Vec<f64> {
    let mags = spec.magnitudes();
    let peak = mags.iter().copied().fold(0.0, f64::max);
    let floor = (peak * FEATURE_FLOOR_REL).max(f64::MIN_POSITIVE);
    let mut x: Vec<f64> = mags.iter().map(|m| m.max(floor).ln()).collect();
    let n = x.len().max(1) as f64;
    let mean = x.iter().sum::<f64>() / n;
    let std = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let scale = if std > 0.0 { 1.0 / std } else { 1.0 };
    for v in &mut x {
        *v = (*v - mean) * scale;
    }
    x
}

/// One beam-domain training utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub frames: usize,
    pub bins: usize,
    /// Network input, `T x F`.
    pub features: Vec<f64>,
    /// Beam mixture magnitude, `T x F`.
    pub mixture: Vec<f64>,
    /// Per-speaker beam-domain reference magnitudes, `C x T x F`.
    pub references: Vec<f64>,
}

impl TrainingExample {
    /// Builds an example from a beam mixture spectrogram and the same beam
    /// applied to every speaker's image.
    pub fn from_spectra(
        mixture: &ComplexSpectrogram,
        references: &[ComplexSpectrogram],
    ) -> Result<Self> {
        if references
            .iter()
            .any(|r| r.num_frames() != mixture.num_frames() || r.num_bins() != mixture.num_bins())
        {
            return Err(Error::Shape(
                "references do not match the beam mixture".into(),
            ));
        }
        Ok(TrainingExample {
            frames: mixture.num_frames(),
            bins: mixture.num_bins(),
            features: log_features(mixture),
            mixture: mixture.magnitudes(),
            references: references.iter().flat_map(|r| r.magnitudes()).collect(),
        })
    }

    pub fn num_sources(&self) -> usize {
        self.references.len() / (self.frames * self.bins).max(1)
    }

    /// Frames `start..start + len` of every field.
    pub fn crop(&self, start: usize, len: usize) -> TrainingExample {
        let f = self.bins;
        let n = self.frames * f;
        let take = |x: &[f64]| x[start * f..(start + len) * f].to_vec();
        TrainingExample {
            frames: len,
            bins: f,
            features: take(&self.features),
            mixture: take(&self.mixture),
            references: (0..self.num_sources())
                .flat_map(|c| take(&self.references[c * n..(c + 1) * n]))
                .collect(),
        }
    }
}

/// Soft masks for `E` outputs, each `T x F`, summing to one at every bin.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSet {
    pub outputs: usize,
    pub frames: usize,
    pub bins: usize,
    pub values: Vec<f64>,
}

impl MaskSet {
    pub fn mask(&self, e: usize) -> &[f64] {
        let n = self.frames * self.bins;
        &self.values[e * n..(e + 1) * n]
    }

    /// Masks `beam` once per output and resynthesises each with the beam's
    /// phase. Returns the masked spectra and their (padded) waveforms.
    pub fn apply(
        &self,
        beam: &ComplexSpectrogram,
    ) -> Result<(Vec<ComplexSpectrogram>, Vec<Vec<f64>>)> {
        let spectra = (0..self.outputs)
            .map(|e| beam.masked(self.mask(e)))
            .collect::<Result<Vec<_>>>()?;
        let waveforms = spectra.iter().map(istft).collect::<Result<Vec<_>>>()?;
        Ok((spectra, waveforms))
    }
}

/// Anchors used for an utterance and the resulting attractors.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorChoice {
    pub anchors: Vec<usize>,
    pub attractors: Vec<f64>,
    pub in_set_similarity: f64,
}

/// Loss of one example with its gradient.
#[derive(Debug, Clone)]
pub struct LossEval {
    pub loss: f64,
    pub grad: Gradients,
    pub assignment: PitAssignment,
}

/// Gradients with the same layout as the model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: Vec<f64>,
    pub anchors: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(model: &EmbeddingModel) -> Self {
        Gradients {
            params: vec![0.0; model.params.len()],
            anchors: vec![0.0; model.anchors.len()],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.params.iter().chain(&self.anchors)
    }

    pub fn norm(&self) -> f64 {
        self.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            *a += scale * b;
        }
        for (a, b) in self.anchors.iter_mut().zip(&other.anchors) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.params
            .iter_mut()
            .chain(self.anchors.iter_mut())
            .for_each(|g| *g *= s);
    }
}

/// Output of [`EmbeddingModel::separate_beam`].
#[derive(Debug, Clone)]
pub struct BeamSeparation {
    pub masks: MaskSet,
    pub choice: AnchorChoice,
    /// The beam spectrogram under each mask, keeping the beam's phase.
    pub spectra: Vec<ComplexSpectrogram>,
    pub waveforms: Vec<Vec<f64>>,
}

/// The embedding network `Φ` together with its anchors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    hyper: Hyperparameters,
    params: Vec<f64>,
    /// `N x K`, row-major.
    anchors: Vec<f64>,
}

impl EmbeddingModel {
    /// Randomly initialised model; anchors are uniform in `(-0.5, 0.5)`.
    pub fn new(hyper: Hyperparameters, seed: u64) -> Result<Self> {
        hyper.validate()?;
        let layout = Layout::new(hyper.num_bins, hyper.embed_dim, &hyper.architecture);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = layout.initialise(&mut rng);
        let anchors = (0..hyper.num_anchors * hyper.embed_dim)
            .map(|_| rng.gen_range(-0.5..0.5))
            .collect();
        Ok(EmbeddingModel {
            hyper,
            params,
            anchors,
        })
    }

    /// A model whose network parameters are all zero.
    pub fn zeros(hyper: Hyperparameters) -> Result<Self> {
        hyper.validate()?;
        let layout = Layout::new(hyper.num_bins, hyper.embed_dim, &hyper.architecture);
        Ok(EmbeddingModel {
            params: vec![0.0; layout.num_params()],
            anchors: vec![0.0; hyper.num_anchors * hyper.embed_dim],
            hyper,
        })
    }

    pub fn hyper(&self) -> &Hyperparameters {
        &self.hyper
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn anchors(&self) -> &[f64] {
        &self.anchors
    }

    pub fn anchors_mut(&mut self) -> &mut [f64] {
        &mut self.anchors
    }

    pub fn num_parameters(&self) -> usize {
        self.params.len() + self.anchors.len()
    }

    fn layout(&self) -> Layout {
        Layout::new(
            self.hyper.num_bins,
            self.hyper.embed_dim,
            &self.hyper.architecture,
        )
    }

    fn check_features(&self, features: &[f64], frames: usize) -> Result<()> {
        if frames == 0 || features.len() != frames * self.hyper.num_bins {
            return Err(Error::Shape(format!(
                "{} feature values for {frames} frames of {} bins",
                features.len(),
                self.hyper.num_bins
            )));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input("features contain non-finite values".into()));
        }
        Ok(())
    }

    /// Embeddings `T x F x K`, every coordinate in `(-1, 1)`.
    pub fn embed(&self, features: &[f64], frames: usize) -> Result<Vec<f64>> {
        self.check_features(features, frames)?;
        Ok(network::forward(&self.layout(), &self.params, features, frames).embeddings)
    }

    /// Masks for `outputs` sources, using the anchor set whose attractors
    /// are least similar to each other.
    pub fn infer_masks(
        &self,
        features: &[f64],
        frames: usize,
        outputs: usize,
    ) -> Result<(MaskSet, AnchorChoice)> {
        let v = self.embed(features, frames)?;
        let pass = AttractorPass::run(&self.anchors, &v, self.hyper.embed_dim, outputs)?;
        Ok(self.package(pass, frames, outputs))
    }

    fn package(
        &self,
        pass: AttractorPass,
        frames: usize,
        outputs: usize,
    ) -> (MaskSet, AnchorChoice) {
        let choice = AnchorChoice {
            anchors: pass.anchor_sets[pass.chosen].clone(),
            in_set_similarity: pass.similarities[pass.chosen],
            attractors: pass.attractors,
        };
        let masks = MaskSet {
            outputs,
            frames,
            bins: self.hyper.num_bins,
            values: pass.masks,
        };
        (masks, choice)
    }

    /// Separates one beam into `g + 1` outputs: `g` salient talkers and a
    /// residual.
    pub fn separate_beam(&self, beam: &ComplexSpectrogram, g: usize) -> Result<BeamSeparation> {
        if beam.num_bins() != self.hyper.num_bins {
            return Err(Error::Shape(format!(
                "model expects {} bins, beam has {}",
                self.hyper.num_bins,
                beam.num_bins()
            )));
        }
        let (masks, choice) = self.infer_masks(&log_features(beam), beam.num_frames(), g + 1)?;
        let (spectra, waveforms) = masks.apply(beam)?;
        Ok(BeamSeparation {
            masks,
            choice,
            spectra,
            waveforms,
        })
    }

    /// PIT loss of one example, normalised by the mixture energy, and its
    /// gradient with respect to every parameter and anchor.
    pub fn loss_and_gradient(&self, example: &TrainingExample, g: usize) -> Result<LossEval> {
        let frames = example.frames;
        self.check_features(&example.features, frames)?;
        let n = frames * example.bins;
        if example.mixture.len() != n || example.references.len() % n != 0 {
            return Err(Error::Shape("example fields disagree in size".into()));
        }
        let norm: f64 = example.mixture.iter().map(|x| x * x).sum();
        if !(norm > 0.0) {
            return Err(Error::DegenerateInput(
                "training example has a silent mixture".into(),
            ));
        }
        let k = self.hyper.embed_dim;
        let layout = self.layout();
        let cache = network::forward(&layout, &self.params, &example.features, frames);
        let v = &cache.embeddings;
        let pass = AttractorPass::run(&self.anchors, v, k, g + 1)?;
        let outputs: Vec<f64> = pass
            .masks
            .chunks_exact(n)
            .flat_map(|m| m.iter().zip(&example.mixture).map(|(a, x)| a * x))
            .collect();
        let (raw, assignment) = pit_loss(&outputs, &example.references, &example.mixture, g)?;
        let targets = assignment.targets(&example.references, &example.mixture);
        let mut d_masks = vec![0.0; outputs.len()];
        for (e, target) in targets.iter().enumerate() {
            for i in 0..n {
                let x = example.mixture[i];
                d_masks[e * n + i] = 2.0 * (outputs[e * n + i] - target[i]) * x / norm;
            }
        }
        let mut grad = Gradients::zeros_like(self);
        let mut dv = vec![0.0; v.len()];
        pass.backward(&self.anchors, v, k, &d_masks, &mut dv, &mut grad.anchors);
        network::backward(&layout, &self.params, &cache, &dv, &mut grad.params);
        Ok(LossEval {
            loss: raw / norm,
            grad,
            assignment,
        })
    }

    /// Loss only, for finite-difference checks and validation.
    pub fn loss(&self, example: &TrainingExample, g: usize) -> Result<f64> {
        let (masks, _) = self.infer_masks(&example.features, example.frames, g + 1)?;
        let outputs: Vec<f64> = masks
            .values
            .chunks_exact(example.mixture.len())
            .flat_map(|m| m.iter().zip(&example.mixture).map(|(a, x)| a * x))
            .collect();
        let norm: f64 = example.mixture.iter().map(|x| x * x).sum();
        Ok(pit_loss(&outputs, &example.references, &example.mixture, g)?.0 / norm)
    }

    pub fn save(&self, path: impl AsRef<Path>, meta: &CheckpointMeta) -> Result<()> {
        let path = path.as_ref();
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            hyper: self.hyper.clone(),
            meta: meta.clone(),
            anchors: self.anchors.clone(),
            params: self.params.clone(),
        };
        let text = serde_json::to_string(&ck).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, CheckpointMeta)> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "{}: expected {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION}, found {} v{}",
                path.display(),
                ck.format,
                ck.version
            )));
        }
        ck.hyper.validate()?;
        let expected = Layout::new(
            ck.hyper.num_bins,
            ck.hyper.embed_dim,
            &ck.hyper.architecture,
        )
        .num_params();
        if ck.params.len() != expected
            || ck.anchors.len() != ck.hyper.num_anchors * ck.hyper.embed_dim
        {
            return Err(Error::Format(format!(
                "{}: parameter count does not match the stored architecture",
                path.display()
            )));
        }
        Ok((
            EmbeddingModel {
                hyper: ck.hyper,
                params: ck.params,
                anchors: ck.anchors,
            },
            ck.meta,
        ))
    }
}

/// Provenance stored alongside the weights.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    hyper: Hyperparameters,
    meta: CheckpointMeta,
    anchors: Vec<f64>,
    params: Vec<f64>,
}
