//! Short-time Fourier analysis and weighted overlap-add synthesis.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Analysis window shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    /// Periodic Hann, `0.5 - 0.5 cos(2 pi n / N)`.
    Hann,
    /// Square root of the periodic Hann window.
    SqrtHann,
    Rectangular,
}

impl Window {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        let n = len as f64;
        (0..len)
            .map(|i| {
                let hann = 0.5 - 0.5 * (2.0 * PI * i as f64 / n).cos();
                match self {
                    Window::Hann => hann,
                    Window::SqrtHann => hann.sqrt(),
                    Window::Rectangular => 1.0,
                }
            })
            .collect()
    }
}

/// Frame length, hop and window of a short-time transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub frame_len: usize,
    pub hop: usize,
    pub window: Window,
}

impl Default for StftConfig {
    /// 32 ms Hann frames with an 8 ms shift at 8 kHz.
    fn default() -> Self {
        StftConfig {
            frame_len: 256,
            hop: 64,
            window: Window::Hann,
        }
    }
}

impl StftConfig {
    pub fn new(frame_len: usize, hop: usize, window: Window) -> Result<Self> {
        let cfg = StftConfig {
            frame_len,
            hop,
            window,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn num_bins(&self) -> usize {
        self.frame_len / 2 + 1
    }

    /// Number of frames produced for a signal of `len` samples, if any.
    pub fn num_frames(&self, len: usize) -> Option<usize> {
        (len >= self.frame_len).then(|| (len - self.frame_len) / self.hop + 1)
    }

    /// Zeros to add at each end of a signal so that every original sample
    /// lies where the overlapping windows are complete.
    pub fn edge_padding(&self) -> usize {
        self.frame_len - self.hop
    }

    /// Checks that the squared window overlap-adds to a constant at this hop,
    /// which is what weighted overlap-add synthesis needs to invert exactly.
    pub fn validate(&self) -> Result<()> {
        if self.frame_len < 2 || self.frame_len % 2 != 0 {
            return Err(Error::Config(format!(
                "frame length must be even and >= 2, got {}",
                self.frame_len
            )));
        }
        if self.hop == 0 || self.hop > self.frame_len {
            return Err(Error::Config(format!(
                "hop must be in 1..={}, got {}",
                self.frame_len, self.hop
            )));
        }
        if self.frame_len % self.hop != 0 {
            return Err(Error::Config(format!(
                "frame length {} is not a multiple of hop {}",
                self.frame_len, self.hop
            )));
        }
        let w = self.window.coefficients(self.frame_len);
        let sums: Vec<f64> = (0..self.hop)
            .map(|n| w.iter().skip(n).step_by(self.hop).map(|x| x * x).sum())
            .collect();
        let max = sums.iter().cloned().fold(f64::MIN, f64::max);
        let min = sums.iter().cloned().fold(f64::MAX, f64::min);
        if min <= 0.0 || (max - min) > 1e-9 * max {
            return Err(Error::Config(format!(
                "{:?} window of length {} is not overlap-add constant at hop {}",
                self.window, self.frame_len, self.hop
            )));
        }
        Ok(())
    }
}

/// T x F one-sided complex spectrogram, stored frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    bins: Vec<Complex64>,
    frames: usize,
    cfg: StftConfig,
    sample_rate: u32,
}

impl ComplexSpectrogram {
    pub fn from_bins(
        bins: Vec<Complex64>,
        frames: usize,
        cfg: StftConfig,
        sample_rate: u32,
    ) -> Result<Self> {
        if frames == 0 || bins.len() != frames * cfg.num_bins() {
            return Err(Error::Shape(format!(
                "{} bins do not form {} frames of {} bins",
                bins.len(),
                frames,
                cfg.num_bins()
            )));
        }
        Ok(ComplexSpectrogram {
            bins,
            frames,
            cfg,
            sample_rate,
        })
    }

    pub fn zeros(frames: usize, cfg: StftConfig, sample_rate: u32) -> Self {
        ComplexSpectrogram {
            bins: vec![Complex64::new(0.0, 0.0); frames * cfg.num_bins()],
            frames,
            cfg,
            sample_rate,
        }
    }

    pub fn num_frames(&self) -> usize {
        self.frames
    }

    pub fn num_bins(&self) -> usize {
        self.cfg.num_bins()
    }

    pub fn config(&self) -> StftConfig {
        self.cfg
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    pub fn bins_mut(&mut self) -> &mut [Complex64] {
        &mut self.bins
    }

    pub fn get(&self, t: usize, f: usize) -> Complex64 {
        self.bins[t * self.num_bins() + f]
    }

    pub fn frame(&self, t: usize) -> &[Complex64] {
        let f = self.num_bins();
        &self.bins[t * f..(t + 1) * f]
    }

    /// Centre frequency of bin `f` in Hz.
    pub fn bin_frequency(&self, f: usize) -> f64 {
        f as f64 * self.sample_rate as f64 / self.cfg.frame_len as f64
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.bins.iter().map(|c| c.norm()).collect()
    }

    /// Element-wise real mask, keeping the phase of every bin.
    pub fn masked(&self, mask: &[f64]) -> Result<Self> {
        if mask.len() != self.bins.len() {
            return Err(Error::Shape(format!(
                "mask of {} values for {} bins",
                mask.len(),
                self.bins.len()
            )));
        }
        let bins = self.bins.iter().zip(mask).map(|(b, m)| b * *m).collect();
        Ok(ComplexSpectrogram { bins, ..*self })
    }
}

/// Reusable FFT plans for one configuration.
pub struct Stft {
    cfg: StftConfig,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Stft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stft").field("cfg", &self.cfg).finish()
    }
}

impl Stft {
    pub fn new(cfg: StftConfig) -> Result<Self> {
        cfg.validate()?;
        let mut planner = FftPlanner::new();
        Ok(Stft {
            cfg,
            window: cfg.window.coefficients(cfg.frame_len),
            forward: planner.plan_fft_forward(cfg.frame_len),
            inverse: planner.plan_fft_inverse(cfg.frame_len),
        })
    }

    pub fn config(&self) -> StftConfig {
        self.cfg
    }

    pub fn forward(&self, signal: &[f64], sample_rate: u32) -> Result<ComplexSpectrogram> {
        let n = self.cfg.frame_len;
        let frames = self.cfg.num_frames(signal.len()).ok_or_else(|| {
            Error::Length(format!(
                "signal of {} samples is shorter than one {}-sample frame",
                signal.len(),
                n
            ))
        })?;
        let nb = self.cfg.num_bins();
        let mut bins = Vec::with_capacity(frames * nb);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for t in 0..frames {
            let seg = &signal[t * self.cfg.hop..t * self.cfg.hop + n];
            for ((b, x), w) in buf.iter_mut().zip(seg).zip(&self.window) {
                *b = Complex64::new(x * w, 0.0);
            }
            self.forward.process(&mut buf);
            bins.extend_from_slice(&buf[..nb]);
        }
        Ok(ComplexSpectrogram {
            bins,
            frames,
            cfg: self.cfg,
            sample_rate,
        })
    }

    /// Weighted overlap-add with per-sample window-energy normalisation.
    /// Samples within a frame of either end are only approximately restored.
    /// Output length is `(T - 1) * hop + frame_len`.
    pub fn inverse(&self, spec: &ComplexSpectrogram) -> Result<Vec<f64>> {
        if spec.cfg != self.cfg {
            return Err(Error::Config(format!(
                "spectrogram config {:?} differs from transform config {:?}",
                spec.cfg, self.cfg
            )));
        }
        let n = self.cfg.frame_len;
        let hop = self.cfg.hop;
        let nb = self.cfg.num_bins();
        let len = (spec.frames - 1) * hop + n;
        let mut out = vec![0.0; len];
        let mut norm = vec![0.0; len];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let scale = 1.0 / n as f64;
        for t in 0..spec.frames {
            let frame = spec.frame(t);
            buf[..nb].copy_from_slice(frame);
            // Hermitian completion; DC and Nyquist imaginary parts are ignored.
            buf[0].im = 0.0;
            buf[nb - 1].im = 0.0;
            for k in 1..nb - 1 {
                buf[n - k] = frame[k].conj();
            }
            self.inverse.process(&mut buf);
            let start = t * hop;
            for (i, (b, w)) in buf.iter().zip(&self.window).enumerate() {
                out[start + i] += b.re * scale * w;
                norm[start + i] += w * w;
            }
        }
        // Near the ends only a window tail covers each sample; dividing by
        // that tiny energy would amplify any inconsistency in a modified
        // spectrogram, so the normaliser is floored there.
        let floor = 0.1 * norm.iter().copied().fold(0.0, f64::max);
        for (o, z) in out.iter_mut().zip(&norm) {
            *o = if *z > 0.0 { *o / z.max(floor) } else { 0.0 };
        }
        Ok(out)
    }
}

/// One-shot forward transform.
pub fn stft(signal: &[f64], cfg: StftConfig, sample_rate: u32) -> Result<ComplexSpectrogram> {
    Stft::new(cfg)?.forward(signal, sample_rate)
}

/// One-shot inverse transform.
pub fn istft(spec: &ComplexSpectrogram) -> Result<Vec<f64>> {
    Stft::new(spec.cfg)?.inverse(spec)
}

/// `x` with `pad` zeros on both sides.
pub fn pad_signal(x: &[f64], pad: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len() + 2 * pad];
    out[pad..pad + x.len()].copy_from_slice(x);
    out
}

/// Inverse of [`pad_signal`]: drops `pad` leading samples and fits the rest to
/// `len`, zero-filling if the synthesis came out short.
pub fn unpad_signal(y: &[f64], pad: usize, len: usize) -> Vec<f64> {
    let mut out: Vec<f64> = y.iter().skip(pad).take(len).copied().collect();
    out.resize(len, 0.0);
    out
}

/// Default floor for [`log_magnitude`].
pub const LOG_FLOOR: f64 = 1e-8;

/// `ln(max(|X|, floor))` for every bin, frame-major.
pub fn log_magnitude(spec: &ComplexSpectrogram, floor: f64) -> Vec<f64> {
    debug_assert!(floor > 0.0);
    spec.bins.iter().map(|c| c.norm().max(floor).ln()).collect()
}
