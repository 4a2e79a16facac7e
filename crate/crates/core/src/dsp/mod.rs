//! Time-frequency analysis, features and WAV I/O.

mod conv;
mod stft;
mod wav;

pub use conv::{convolve_direct, convolve_many};
pub use stft::{
    istft, log_magnitude, pad_signal, stft, unpad_signal, ComplexSpectrogram, Stft, StftConfig,
    Window, LOG_FLOOR,
};
pub use wav::{read_wav, write_wav, SampleFormat};

use crate::error::{Error, Result};

/// M channels of equal length at a common sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelWave {
    channels: Vec<Vec<f64>>,
    sample_rate: u32,
}

impl MultichannelWave {
    pub fn new(channels: Vec<Vec<f64>>, sample_rate: u32) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::Shape("a wave needs at least one channel".into()));
        }
        if sample_rate == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::Shape("channels differ in length".into()));
        }
        Ok(MultichannelWave {
            channels,
            sample_rate,
        })
    }

    pub fn mono(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        Self::new(vec![samples], sample_rate)
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channel(&self, m: usize) -> &[f64] {
        &self.channels[m]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }

    pub fn truncated(&self, len: usize) -> Self {
        MultichannelWave {
            channels: self
                .channels
                .iter()
                .map(|c| c[..len.min(c.len())].to_vec())
                .collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Every channel with `pad` zeros added at both ends.
    pub fn padded(&self, pad: usize) -> Self {
        MultichannelWave {
            channels: self.channels.iter().map(|c| pad_signal(c, pad)).collect(),
            sample_rate: self.sample_rate,
        }
    }

    pub fn scaled(&self, gain: f64) -> Self {
        MultichannelWave {
            channels: self
                .channels
                .iter()
                .map(|c| c.iter().map(|v| v * gain).collect())
                .collect(),
            sample_rate: self.sample_rate,
        }
    }

    pub fn peak(&self) -> f64 {
        self.channels
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Per-channel STFTs.
    pub fn stft(&self, cfg: StftConfig) -> Result<Vec<ComplexSpectrogram>> {
        let plan = Stft::new(cfg)?;
        self.channels
            .iter()
            .map(|c| plan.forward(c, self.sample_rate))
            .collect()
    }
}

pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}
