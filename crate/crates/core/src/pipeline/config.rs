use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adan::{Architecture, Hyperparameters, TrainConfig};
use crate::beam::{log_frequency_grid, DesignParams, TargetPattern};
use crate::dsp::{StftConfig, Window};
use crate::metrics::SdrMeasure;
use crate::room::{
    ArrayGeometry, CorpusSpec, DrySourcePool, MixtureOptions, SceneRanges, CIRCULAR_ARRAY_RADIUS,
    DEFAULT_IMAGE_ORDER, DEFAULT_RIR_LEN, SPEED_OF_SOUND,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StftSection {
    pub frame_len: usize,
    pub hop: usize,
    pub window: Window,
}

impl Default for StftSection {
    fn default() -> Self {
        let d = StftConfig::default();
        StftSection {
            frame_len: d.frame_len,
            hop: d.hop,
            window: d.window,
        }
    }
}

/// A uniform circular array, optionally with a centre microphone (index 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArraySection {
    pub outer_mics: usize,
    pub radius_m: f64,
    pub center_mic: bool,
}

impl Default for ArraySection {
    fn default() -> Self {
        ArraySection {
            outer_mics: 6,
            radius_m: CIRCULAR_ARRAY_RADIUS,
            center_mic: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamSection {
    pub count: usize,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub f_count: usize,
    pub wng_floor_db: f64,
    pub angle_step_deg: f64,
    pub target: TargetPattern,
}

impl Default for BeamSection {
    fn default() -> Self {
        let d = DesignParams::default();
        BeamSection {
            count: 12,
            f_min_hz: 100.0,
            f_max_hz: 3900.0,
            f_count: 64,
            wng_floor_db: d.wng_floor_db,
            angle_step_deg: d.angle_step_deg,
            target: d.target,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub embed_dim: usize,
    pub anchors: usize,
    pub hidden: Vec<usize>,
    pub recurrent: bool,
    /// Upper bound on the salient talkers per beam; a beam of a
    /// `C`-talker mixture gets `min(C, salient) + 1` outputs.
    pub salient: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let d = Hyperparameters::default();
        ModelSection {
            embed_dim: d.embed_dim,
            anchors: d.num_anchors,
            hidden: d.architecture.hidden,
            recurrent: d.architecture.recurrent,
            salient: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub count: usize,
    pub speakers: usize,
    pub seed: u64,
    pub seconds: f64,
    /// Number of synthetic voices the talkers are drawn from.
    pub voice_pool: usize,
    /// Dry WAV files to draw talkers from instead of synthetic voices.
    pub source_files: Vec<String>,
    pub min_separation_deg: Option<f64>,
    pub snr_range_db: f64,
    pub rir_len: usize,
    pub image_order: usize,
}

impl Default for CorpusSection {
    fn default() -> Self {
        CorpusSection {
            count: 20,
            speakers: 2,
            seed: 1,
            seconds: 2.0,
            voice_pool: 40,
            source_files: Vec::new(),
            min_separation_deg: None,
            snr_range_db: MixtureOptions::default().snr_range_db,
            rir_len: DEFAULT_RIR_LEN,
            image_order: DEFAULT_IMAGE_ORDER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Distortion-filter length of the SDR measure; 1 gives scale-invariant SDR.
    pub sdr_filter_taps: usize,
    pub cluster_seed: u64,
    /// Correlate log rather than linear magnitudes when clustering.
    pub log_affinity: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            sdr_filter_taps: SdrMeasure::BSS_EVAL.filter_taps,
            cluster_seed: 0,
            log_affinity: false,
        }
    }
}

/// Everything a pipeline run depends on, loaded from one TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub sample_rate: u32,
    pub stft: StftSection,
    pub array: ArraySection,
    pub beams: BeamSection,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub corpus: CorpusSection,
    pub eval: EvalSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            sample_rate: 8000,
            stft: StftSection::default(),
            array: ArraySection::default(),
            beams: BeamSection::default(),
            model: ModelSection::default(),
            train: TrainConfig::default(),
            corpus: CorpusSection::default(),
            eval: EvalSection::default(),
        }
    }
}

/// The fields every stage must agree on; the config hash covers exactly these.
#[derive(Serialize)]
struct SignalChain<'a> {
    sample_rate: u32,
    stft: &'a StftSection,
    array: &'a ArraySection,
    beams: &'a BeamSection,
    model: &'a ModelSection,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        self.stft_config()?;
        self.geometry()?;
        let b = &self.beams;
        if b.count < 2 || b.f_count == 0 || !(b.f_min_hz > 0.0) || !(b.f_max_hz >= b.f_min_hz) {
            return Err(Error::Config(
                "beams need count >= 2, f_count >= 1 and 0 < f_min_hz <= f_max_hz".into(),
            ));
        }
        if b.f_max_hz >= self.sample_rate as f64 / 2.0 {
            return Err(Error::Config(
                "beam design grid must stay below Nyquist".into(),
            ));
        }
        if self.model.salient == 0 {
            return Err(Error::Config("model.salient must be at least 1".into()));
        }
        self.hyperparameters()?.validate()?;
        if self.model.anchors < self.model.salient + 1 {
            return Err(Error::Config(format!(
                "{} anchors cannot serve {} outputs",
                self.model.anchors,
                self.model.salient + 1
            )));
        }
        self.train.validate()?;
        let c = &self.corpus;
        if c.speakers == 0 || !(c.seconds > 0.0) || c.rir_len == 0 {
            return Err(Error::Config(
                "corpus needs speakers >= 1, seconds > 0 and rir_len > 0".into(),
            ));
        }
        if self.eval.sdr_filter_taps == 0 {
            return Err(Error::Config(
                "eval.sdr_filter_taps must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn stft_config(&self) -> Result<StftConfig> {
        StftConfig::new(self.stft.frame_len, self.stft.hop, self.stft.window)
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        let a = &self.array;
        if a.outer_mics < 2 || !(a.radius_m > 0.0) {
            return Err(Error::Config(
                "array needs at least 2 outer mics and a positive radius".into(),
            ));
        }
        Ok(ArrayGeometry::circular(
            a.outer_mics,
            a.radius_m,
            a.center_mic,
        ))
    }

    pub fn design_params(&self) -> DesignParams {
        DesignParams {
            target: self.beams.target,
            angle_step_deg: self.beams.angle_step_deg,
            wng_floor_db: self.beams.wng_floor_db,
            speed_of_sound: SPEED_OF_SOUND,
        }
    }

    pub fn frequency_grid(&self) -> Vec<f64> {
        log_frequency_grid(self.beams.f_min_hz, self.beams.f_max_hz, self.beams.f_count)
    }

    pub fn hyperparameters(&self) -> Result<Hyperparameters> {
        Ok(Hyperparameters {
            num_bins: self.stft_config()?.num_bins(),
            embed_dim: self.model.embed_dim,
            num_anchors: self.model.anchors,
            architecture: Architecture {
                hidden: self.model.hidden.clone(),
                recurrent: self.model.recurrent,
            },
        })
    }

    /// Salient talkers per beam for a `c`-talker mixture.
    pub fn salient_for(&self, c: usize) -> usize {
        c.min(self.model.salient).max(1)
    }

    pub fn sdr_measure(&self) -> SdrMeasure {
        SdrMeasure {
            filter_taps: self.eval.sdr_filter_taps,
        }
    }

    /// SHA-256 over the signal-chain settings (sample rate, STFT, array,
    /// beams, model). Corpus, training and evaluation settings may differ
    /// between stages and are left out.
    pub fn config_hash(&self) -> String {
        let chain = SignalChain {
            sample_rate: self.sample_rate,
            stft: &self.stft,
            array: &self.array,
            beams: &self.beams,
            model: &self.model,
        };
        let json = serde_json::to_string(&chain).expect("config serialises");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn corpus_spec(&self) -> Result<CorpusSpec> {
        let c = &self.corpus;
        let ranges = SceneRanges {
            min_separation_deg: c.min_separation_deg,
            max_image_order: c.image_order,
            ..SceneRanges::default()
        };
        let pool = if c.source_files.is_empty() {
            DrySourcePool::Synthetic {
                speakers: c.voice_pool,
                seconds: c.seconds,
            }
        } else {
            DrySourcePool::Files(c.source_files.iter().map(Into::into).collect())
        };
        Ok(CorpusSpec {
            count: c.count,
            num_speakers: c.speakers,
            seed: c.seed,
            sample_rate: self.sample_rate,
            geometry: self.geometry()?,
            ranges,
            mixture: MixtureOptions {
                rir_len: c.rir_len,
                snr_range_db: c.snr_range_db,
                ..MixtureOptions::default()
            },
            pool,
            config_hash: Some(self.config_hash()),
        })
    }
}

/// Fails with a compatibility error when an artifact's stored hash differs
/// from the current configuration's. Artifacts without a hash are accepted.
pub fn check_hash(what: &str, stored: Option<&str>, expected: &str) -> Result<()> {
    match stored {
        Some(h) if h != expected => Err(Error::Compatibility(format!(
            "{what} was produced under config {h}, current config is {expected}"
        ))),
        _ => Ok(()),
    }
}
