//! Synthetic dry "speech" so the pipeline runs without an external corpus.
//!
//! An utterance alternates voiced segments (a harmonic series on a drifting
//! pitch, shaped by a three-formant envelope) with short noise bursts and
//! pauses. Each speaker has its own pitch range and vocal-tract scale.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const VOWELS: [[f64; 3]; 6] = [
    [730.0, 1090.0, 2440.0],
    [270.0, 2290.0, 3010.0],
    [300.0, 870.0, 2240.0],
    [530.0, 1840.0, 2480.0],
    [570.0, 840.0, 2410.0],
    [660.0, 1720.0, 2410.0],
];

/// Per-speaker voice parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticVoice {
    pub pitch_hz: f64,
    pub formant_scale: f64,
    /// Spectral tilt exponent applied to harmonic amplitudes.
    pub tilt: f64,
}

impl SyntheticVoice {
    pub fn random(rng: &mut impl Rng) -> Self {
        SyntheticVoice {
            pitch_hz: rng.gen_range(90.0..240.0),
            formant_scale: rng.gen_range(0.88..1.15),
            tilt: rng.gen_range(0.6..1.0),
        }
    }

    fn envelope(&self, f: f64, formants: &[f64; 3]) -> f64 {
        let bandwidths = [90.0, 120.0, 170.0];
        let gains = [1.0, 0.6, 0.35];
        let mut e = 0.02;
        for ((fc, bw), g) in formants.iter().zip(bandwidths).zip(gains) {
            let fc = fc * self.formant_scale;
            e += g / (1.0 + ((f - fc) / bw).powi(2));
        }
        e
    }

    /// `len` samples of babble, normalised to unit RMS.
    pub fn utterance(&self, len: usize, sample_rate: u32, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fs = sample_rate as f64;
        let nyquist = fs / 2.0;
        let mut out = Vec::with_capacity(len);
        let mut phase = vec![0.0f64; 64];
        let mut hp_state = 0.0;
        let mut prev = 0.0;
        while out.len() < len {
            let kind = rng.gen_range(0..10);
            if kind < 6 {
                let dur = (rng.gen_range(0.12..0.30) * fs) as usize;
                let from = VOWELS[rng.gen_range(0..VOWELS.len())];
                let to = VOWELS[rng.gen_range(0..VOWELS.len())];
                let f0_start = self.pitch_hz * rng.gen_range(0.85..1.15);
                let f0_end = self.pitch_hz * rng.gen_range(0.85..1.15);
                let level = rng.gen_range(0.5..1.0);
                for n in 0..dur {
                    let u = n as f64 / dur as f64;
                    let f0 = f0_start + (f0_end - f0_start) * u;
                    let formants = [
                        from[0] + (to[0] - from[0]) * u,
                        from[1] + (to[1] - from[1]) * u,
                        from[2] + (to[2] - from[2]) * u,
                    ];
                    let ramp = (PI * u).sin().powf(0.5);
                    let mut v = 0.0;
                    for (h, ph) in phase.iter_mut().enumerate() {
                        let fh = f0 * (h + 1) as f64;
                        if fh >= nyquist * 0.95 {
                            break;
                        }
                        *ph = (*ph + 2.0 * PI * fh / fs) % (2.0 * PI);
                        v += self.envelope(fh, &formants) / ((h + 1) as f64).powf(self.tilt * 0.5)
                            * ph.sin();
                    }
                    out.push(level * ramp * v);
                }
            } else if kind < 9 {
                let dur = (rng.gen_range(0.04..0.10) * fs) as usize;
                let level = rng.gen_range(0.1..0.35);
                let bright = rng.gen_range(0.5..0.95);
                for n in 0..dur {
                    let u = n as f64 / dur as f64;
                    let white: f64 = rng.gen_range(-1.0..1.0);
                    // One-pole high-pass gives fricative-like brightness.
                    hp_state = bright * (hp_state + white - prev);
                    prev = white;
                    out.push(level * (PI * u).sin() * hp_state);
                }
            } else {
                let dur = (rng.gen_range(0.03..0.12) * fs) as usize;
                out.extend(std::iter::repeat(0.0).take(dur));
            }
        }
        out.truncate(len);
        let rms = (out.iter().map(|v| v * v).sum::<f64>() / len.max(1) as f64).sqrt();
        if rms > 0.0 {
            for v in &mut out {
                *v /= rms;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn utterance_is_deterministic_and_normalised() {
        let voice = SyntheticVoice::random(&mut ChaCha8Rng::seed_from_u64(1));
        let a = voice.utterance(8000, 8000, 5);
        let b = voice.utterance(8000, 8000, 5);
        assert_eq!(a, b);
        let rms = (a.iter().map(|v| v * v).sum::<f64>() / 8000.0).sqrt();
        assert!((rms - 1.0).abs() < 1e-9);
        assert_ne!(a, voice.utterance(8000, 8000, 6));
    }
}
