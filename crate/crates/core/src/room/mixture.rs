//! Reverberant multi-talker mixtures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::geometry::ArrayGeometry;
use super::rir::{image_method_rir, RoomSpec, DEFAULT_RIR_LEN};
use super::scene::Scene;
use crate::dsp::{convolve_many, energy, MultichannelWave};
use crate::error::{Error, Result};

/// Microphone whose signal defines talker references and SNRs.
pub const REFERENCE_MIC: usize = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureOptions {
    pub rir_len: usize,
    /// Mixing SNRs of talkers 2.. relative to talker 1 are drawn from
    /// `[-snr_range_db, snr_range_db]`.
    pub snr_range_db: f64,
    /// Overrides the SNR draw (one entry per talker, first ignored).
    pub fixed_snrs_db: Option<Vec<f64>>,
    /// Rescales mixture and images together so the mixture peak equals this.
    pub target_peak: Option<f64>,
}

impl Default for MixtureOptions {
    fn default() -> Self {
        MixtureOptions {
            rir_len: DEFAULT_RIR_LEN,
            snr_range_db: 2.5,
            fixed_snrs_db: None,
            target_peak: Some(0.9),
        }
    }
}

/// A mixture together with everything needed to score separations of it.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSample {
    pub mixture: MultichannelWave,
    /// Per-talker reverberant image on every mic, already SNR-scaled.
    pub images: Vec<MultichannelWave>,
    pub azimuths_deg: Vec<f64>,
    pub snrs_db: Vec<f64>,
    pub room: RoomSpec,
    pub seed: u64,
}

impl MixtureSample {
    pub fn num_speakers(&self) -> usize {
        self.images.len()
    }

    /// Talker `c` as heard on the reference microphone.
    pub fn reference(&self, c: usize) -> &[f64] {
        self.images[c].channel(REFERENCE_MIC)
    }

    pub fn references(&self) -> Vec<Vec<f64>> {
        (0..self.num_speakers())
            .map(|c| self.reference(c).to_vec())
            .collect()
    }

    /// Sum of every talker image except `c`.
    pub fn interference(&self, c: usize) -> MultichannelWave {
        let m = self.mixture.num_channels();
        let len = self.mixture.len();
        let mut acc = vec![vec![0.0; len]; m];
        for (_, img) in self.images.iter().enumerate().filter(|(k, _)| *k != c) {
            for (a, ch) in acc.iter_mut().zip(img.channels()) {
                for (x, y) in a.iter_mut().zip(ch) {
                    *x += y;
                }
            }
        }
        MultichannelWave::new(acc, self.mixture.sample_rate()).expect("consistent shapes")
    }
}

/// Convolves a dry signal with an M-channel impulse response, keeping the
/// first `dry.len()` samples of each channel.
pub fn render_source(dry: &[f64], rir: &[Vec<f64>], sample_rate: u32) -> Result<MultichannelWave> {
    if dry.is_empty() || rir.is_empty() {
        return Err(Error::Length("render_source needs non-empty inputs".into()));
    }
    MultichannelWave::new(convolve_many(dry, rir), sample_rate)
}

fn sum_waves(waves: &[MultichannelWave]) -> MultichannelWave {
    let first = &waves[0];
    let mut acc: Vec<Vec<f64>> = first.channels().to_vec();
    for w in &waves[1..] {
        for (a, ch) in acc.iter_mut().zip(w.channels()) {
            for (x, y) in a.iter_mut().zip(ch) {
                *x += y;
            }
        }
    }
    MultichannelWave::new(acc, first.sample_rate()).expect("equal shapes")
}

/// Renders every talker in `scene`, sets their relative levels on the
/// reference mic and sums them. Dry sources are first cut to the shortest.
pub fn generate_mixture(
    dry_sources: &[Vec<f64>],
    scene: &Scene,
    geometry: &ArrayGeometry,
    sample_rate: u32,
    seed: u64,
    opts: &MixtureOptions,
) -> Result<MixtureSample> {
    let c = dry_sources.len();
    if c == 0 || c != scene.room.source_positions.len() {
        return Err(Error::Shape(format!(
            "{} dry sources for {} placed talkers",
            c,
            scene.room.source_positions.len()
        )));
    }
    let len = dry_sources.iter().map(Vec::len).min().unwrap_or(0);
    if len == 0 {
        return Err(Error::Length("empty dry source".into()));
    }
    for (i, d) in dry_sources.iter().enumerate() {
        if energy(&d[..len]) == 0.0 {
            return Err(Error::Energy(format!("dry source {i} is silent")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let snrs: Vec<f64> = match &opts.fixed_snrs_db {
        Some(fixed) if fixed.len() == c => {
            let mut s = fixed.clone();
            s[0] = 0.0;
            s
        }
        Some(fixed) => {
            return Err(Error::Shape(format!(
                "{} fixed SNRs for {} talkers",
                fixed.len(),
                c
            )))
        }
        None => (0..c)
            .map(|i| {
                if i == 0 {
                    0.0
                } else {
                    rng.gen_range(-opts.snr_range_db..=opts.snr_range_db)
                }
            })
            .collect(),
    };

    let mut images = Vec::with_capacity(c);
    for (i, dry) in dry_sources.iter().enumerate() {
        let rir = image_method_rir(&scene.room, i, geometry, opts.rir_len, sample_rate)?;
        images.push(render_source(&dry[..len], &rir, sample_rate)?);
    }
    let ref_energy: Vec<f64> = images
        .iter()
        .map(|img| energy(img.channel(REFERENCE_MIC)))
        .collect();
    if let Some(i) = ref_energy.iter().position(|e| *e == 0.0) {
        return Err(Error::Energy(format!(
            "talker {i} is silent at the reference mic"
        )));
    }
    for i in 1..c {
        let want = ref_energy[0] * 10f64.powf(snrs[i] / 10.0);
        images[i] = images[i].scaled((want / ref_energy[i]).sqrt());
    }
    let mut mixture = sum_waves(&images);
    if let Some(peak) = opts.target_peak {
        let g = peak / mixture.peak().max(f64::MIN_POSITIVE);
        images = images.iter().map(|w| w.scaled(g)).collect();
        mixture = sum_waves(&images);
    }
    Ok(MixtureSample {
        mixture,
        images,
        azimuths_deg: scene.azimuths_deg.clone(),
        snrs_db: snrs,
        room: scene.room.clone(),
        seed,
    })
}
