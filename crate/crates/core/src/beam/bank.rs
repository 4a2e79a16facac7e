use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::design::{design_beam, log_frequency_grid, DesignParams};
use super::steering::{response, steering_vector};
use crate::dsp::{ComplexSpectrogram, MultichannelWave, StftConfig};
use crate::error::{Error, Result};
use crate::room::ArrayGeometry;

pub const BANK_FORMAT: &str = "beamsep-bank";
pub const BANK_VERSION: u32 = 1;
/// Lower clamp for [`BeamformerBank::beampattern`].
pub const PATTERN_FLOOR_DB: f64 = -80.0;

/// B fixed beams, each a set of F x M weights, with look directions spread
/// uniformly around the array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamformerBank {
    pub format: String,
    pub version: u32,
    pub geometry: ArrayGeometry,
    pub f_grid: Vec<f64>,
    pub look_azimuths_deg: Vec<f64>,
    pub design: DesignParams,
    /// `weights[b][f][m]`.
    pub weights: Vec<Vec<Vec<Complex64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// Default design grid: 64 log-spaced frequencies in [100, 3900] Hz.
pub fn default_frequency_grid() -> Vec<f64> {
    log_frequency_grid(100.0, 3900.0, 64)
}

/// Designs `num_beams` beams looking at `360 b / B` degrees.
pub fn design_bank(
    geometry: &ArrayGeometry,
    num_beams: usize,
    f_grid: &[f64],
    params: &DesignParams,
) -> Result<BeamformerBank> {
    if num_beams < 2 {
        return Err(Error::Design(format!(
            "a bank needs at least 2 beams, got {num_beams}"
        )));
    }
    let looks: Vec<f64> = (0..num_beams)
        .map(|b| 360.0 * b as f64 / num_beams as f64)
        .collect();
    let weights = looks
        .iter()
        .map(|&look| design_beam(geometry, look, f_grid, params))
        .collect::<Result<Vec<_>>>()?;
    Ok(BeamformerBank {
        format: BANK_FORMAT.into(),
        version: BANK_VERSION,
        geometry: geometry.clone(),
        f_grid: f_grid.to_vec(),
        look_azimuths_deg: looks,
        design: *params,
        weights,
        config_hash: None,
    })
}

impl BeamformerBank {
    pub fn num_beams(&self) -> usize {
        self.weights.len()
    }

    pub fn num_mics(&self) -> usize {
        self.geometry.num_mics()
    }

    /// Single beam passing the only microphone through unchanged.
    pub fn identity_mono() -> Self {
        BeamformerBank {
            format: BANK_FORMAT.into(),
            version: BANK_VERSION,
            geometry: ArrayGeometry::new(vec![[0.0; 3]]).expect("one mic"),
            f_grid: vec![1000.0],
            look_azimuths_deg: vec![0.0],
            design: DesignParams::default(),
            weights: vec![vec![vec![Complex64::new(1.0, 0.0)]]],
            config_hash: None,
        }
    }

    /// Index of the design frequency closest to `freq_hz`.
    pub fn nearest_design_index(&self, freq_hz: f64) -> usize {
        let mut best = 0;
        for (i, f) in self.f_grid.iter().enumerate() {
            if (f - freq_hz).abs() < (self.f_grid[best] - freq_hz).abs() {
                best = i;
            }
        }
        best
    }

    /// Complex response `wᴴd` of beam `b` at design frequency index `fi`.
    pub fn response(&self, b: usize, fi: usize, azimuth_deg: f64) -> Complex64 {
        let d = steering_vector(
            &self.geometry,
            azimuth_deg,
            self.f_grid[fi],
            self.design.speed_of_sound,
        );
        response(&self.weights[b][fi], &d)
    }

    /// Gain in dB of beam `b` over `angles_deg`, at the design frequency
    /// nearest `freq_hz`, clamped below at -80 dB.
    pub fn beampattern(&self, b: usize, freq_hz: f64, angles_deg: &[f64]) -> Vec<f64> {
        let fi = self.nearest_design_index(freq_hz);
        angles_deg
            .iter()
            .map(|&a| (20.0 * self.response(b, fi, a).norm().log10()).max(PATTERN_FLOOR_DB))
            .collect()
    }

    /// Beamforms per-mic spectrograms: `Y_b(t, f) = sum_m conj(w_bfm) X_m(t, f)`,
    /// taking weights from the nearest design frequency of every STFT bin.
    pub fn apply_spectra(&self, mics: &[ComplexSpectrogram]) -> Result<Vec<ComplexSpectrogram>> {
        if mics.len() != self.num_mics() {
            return Err(Error::Shape(format!(
                "bank expects {} channels, got {}",
                self.num_mics(),
                mics.len()
            )));
        }
        let first = &mics[0];
        let (frames, bins) = (first.num_frames(), first.num_bins());
        if mics
            .iter()
            .any(|s| s.num_frames() != frames || s.config() != first.config())
        {
            return Err(Error::Shape("channel spectrograms differ in shape".into()));
        }
        let map: Vec<usize> = (0..bins)
            .map(|f| self.nearest_design_index(first.bin_frequency(f)))
            .collect();
        Ok(self
            .weights
            .iter()
            .map(|beam| {
                let conj: Vec<Vec<Complex64>> = map
                    .iter()
                    .map(|&fi| beam[fi].iter().map(|w| w.conj()).collect())
                    .collect();
                let mut out =
                    ComplexSpectrogram::zeros(frames, first.config(), first.sample_rate());
                for (m, spec) in mics.iter().enumerate() {
                    for (o, (x, f)) in out
                        .bins_mut()
                        .iter_mut()
                        .zip(spec.bins().iter().zip((0..bins).cycle()))
                    {
                        *o += conj[f][m] * x;
                    }
                }
                out
            })
            .collect())
    }

    /// STFT of every channel followed by [`Self::apply_spectra`].
    pub fn apply(
        &self,
        mixture: &MultichannelWave,
        cfg: StftConfig,
    ) -> Result<Vec<ComplexSpectrogram>> {
        if mixture.num_channels() != self.num_mics() {
            return Err(Error::Shape(format!(
                "bank expects {} channels, got {}",
                self.num_mics(),
                mixture.num_channels()
            )));
        }
        self.apply_spectra(&mixture.stft(cfg)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).expect("bank serialises");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bank: BeamformerBank = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {}", path.display(), e)))?;
        if bank.format != BANK_FORMAT || bank.version != BANK_VERSION {
            return Err(Error::Format(format!(
                "{}: expected {} v{}, found {} v{}",
                path.display(),
                BANK_FORMAT,
                BANK_VERSION,
                bank.format,
                bank.version
            )));
        }
        let (b, f, m) = (
            bank.look_azimuths_deg.len(),
            bank.f_grid.len(),
            bank.num_mics(),
        );
        if bank.weights.len() != b
            || bank
                .weights
                .iter()
                .any(|w| w.len() != f || w.iter().any(|x| x.len() != m))
        {
            return Err(Error::Format(format!(
                "{}: weight array shape mismatch",
                path.display()
            )));
        }
        Ok(bank)
    }
}
