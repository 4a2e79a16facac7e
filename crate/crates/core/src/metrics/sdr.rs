use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Magnitude cap applied to every SDR value.
pub const SDR_CAP_DB: f64 = 100.0;

/// Scale-invariant signal-to-distortion ratio in dB.
///
/// The estimate is projected onto the reference; the projection is the
/// target component and everything else counts as distortion.
pub fn sdr(estimate: &[f64], reference: &[f64]) -> Result<f64> {
    if estimate.len() != reference.len() {
        return Err(Error::Length(format!(
            "estimate has {} samples, reference {}",
            estimate.len(),
            reference.len()
        )));
    }
    let rr: f64 = reference.iter().map(|r| r * r).sum();
    if rr == 0.0 {
        return Err(Error::Input("reference signal is all zeros".into()));
    }
    let alpha = estimate
        .iter()
        .zip(reference)
        .map(|(e, r)| e * r)
        .sum::<f64>()
        / rr;
    let target = alpha * alpha * rr;
    let noise: f64 = estimate
        .iter()
        .zip(reference)
        .map(|(e, r)| (e - alpha * r).powi(2))
        .sum();
    Ok(ratio_db(target, noise))
}

/// How much linear distortion of the reference an estimate is allowed before
/// it counts as error.
///
/// With one tap the estimate is projected onto the reference alone, giving
/// the scale-invariant SDR of [`sdr`]. With `L` taps the projection is onto
/// the reference and its first `L - 1` delays, so any causal `L`-tap filtering
/// of the reference is absorbed into the target, as in bss_eval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SdrMeasure {
    pub filter_taps: usize,
}

impl SdrMeasure {
    pub const SCALE_INVARIANT: SdrMeasure = SdrMeasure { filter_taps: 1 };
    /// bss_eval's default distortion filter length.
    pub const BSS_EVAL: SdrMeasure = SdrMeasure { filter_taps: 512 };

    pub fn sdr(self, estimate: &[f64], reference: &[f64]) -> Result<f64> {
        SdrReference::new(reference, self)?.sdr(estimate)
    }
}

impl Default for SdrMeasure {
    fn default() -> Self {
        SdrMeasure::BSS_EVAL
    }
}

/// A reference prepared for scoring many estimates: the Cholesky factor of
/// its delayed-copy Gram matrix is computed once.
#[derive(Debug, Clone)]
pub struct SdrReference<'a> {
    reference: &'a [f64],
    taps: usize,
    chol: Vec<f64>,
}

impl<'a> SdrReference<'a> {
    pub fn new(reference: &'a [f64], measure: SdrMeasure) -> Result<Self> {
        let taps = measure.filter_taps;
        if taps == 0 || taps > reference.len() {
            return Err(Error::Config(format!(
                "distortion filter of {taps} taps for a {}-sample reference",
                reference.len()
            )));
        }
        let r0: f64 = reference.iter().map(|r| r * r).sum();
        if r0 == 0.0 {
            return Err(Error::Input("reference signal is all zeros".into()));
        }
        let chol = if taps == 1 {
            vec![r0.sqrt()]
        } else {
            // Gram matrix of the delayed copies, each truncated to the signal
            // length; moving one step down the diagonal drops one product.
            let n = reference.len();
            let mut gram = vec![0.0; taps * taps];
            for lag in 0..taps {
                let mut g = lagged_dot(reference, reference, lag);
                for i in 0..taps - lag {
                    let j = i + lag;
                    gram[i * taps + j] = g;
                    gram[j * taps + i] = g;
                    g -= reference[n - 1 - i] * reference[n - 1 - j];
                }
            }
            for i in 0..taps {
                // Light loading keeps band-limited references factorable.
                gram[i * taps + i] += 1e-10 * r0;
            }
            real_cholesky(gram, taps)?
        };
        Ok(SdrReference {
            reference,
            taps,
            chol,
        })
    }

    pub fn sdr(&self, estimate: &[f64]) -> Result<f64> {
        let reference = self.reference;
        if estimate.len() != reference.len() {
            return Err(Error::Length(format!(
                "estimate has {} samples, reference {}",
                estimate.len(),
                reference.len()
            )));
        }
        if self.taps == 1 {
            return sdr(estimate, reference);
        }
        let b: Vec<f64> = (0..self.taps)
            .map(|k| lagged_dot(estimate, reference, k))
            .collect();
        let h = cholesky_solve_real(&self.chol, self.taps, b);
        let mut target_energy = 0.0;
        let mut noise = 0.0;
        for (i, e) in estimate.iter().enumerate() {
            let t: f64 = h
                .iter()
                .take(i + 1)
                .enumerate()
                .map(|(k, hk)| hk * reference[i - k])
                .sum();
            target_energy += t * t;
            noise += (e - t).powi(2);
        }
        Ok(ratio_db(target_energy, noise))
    }
}

/// `sum_i a[i] b[i - lag]`.
fn lagged_dot(a: &[f64], b: &[f64], lag: usize) -> f64 {
    a[lag..].iter().zip(b).map(|(x, y)| x * y).sum()
}

fn real_cholesky(mut a: Vec<f64>, n: usize) -> Result<Vec<f64>> {
    for j in 0..n {
        let d = a[j * n + j] - (0..j).map(|k| a[j * n + k].powi(2)).sum::<f64>();
        if !(d > 0.0) {
            return Err(Error::Numerical(format!(
                "reference autocorrelation is not positive definite at lag {j}"
            )));
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let v = a[i * n + j] - (0..j).map(|k| a[i * n + k] * a[j * n + k]).sum::<f64>();
            a[i * n + j] = v / d;
        }
    }
    Ok(a)
}

fn cholesky_solve_real(l: &[f64], n: usize, mut y: Vec<f64>) -> Vec<f64> {
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * y[k]).sum();
        y[i] = (y[i] - s) / l[i * n + i];
    }
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * y[k]).sum();
        y[i] = (y[i] - s) / l[i * n + i];
    }
    y
}

fn ratio_db(target: f64, noise: f64) -> f64 {
    let db = if noise == 0.0 {
        SDR_CAP_DB
    } else if target == 0.0 {
        -SDR_CAP_DB
    } else {
        10.0 * (target / noise).log10()
    };
    db.clamp(-SDR_CAP_DB, SDR_CAP_DB)
}

/// Zero-pads or truncates `x` to `len` samples.
pub fn fit_length(mut x: Vec<f64>, len: usize) -> Vec<f64> {
    x.resize(len, 0.0);
    x
}

/// Per-speaker SDR before and after separation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdrReport {
    pub input_sdr: Vec<f64>,
    pub output_sdr: Vec<f64>,
    pub improvement: Vec<f64>,
}

impl SdrReport {
    pub fn num_speakers(&self) -> usize {
        self.improvement.len()
    }

    pub fn mean_improvement(&self) -> f64 {
        mean(&self.improvement)
    }

    pub fn mean_output(&self) -> f64 {
        mean(&self.output_sdr)
    }

    /// Improvements sorted from best to worst speaker.
    pub fn ranked_improvements(&self) -> Vec<f64> {
        let mut r = self.improvement.clone();
        r.sort_by(|a, b| b.total_cmp(a));
        r
    }
}

fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        f64::NAN
    } else {
        x.iter().sum::<f64>() / x.len() as f64
    }
}

/// Scores `outputs[c]` against `references[c]`. The input SDR of each speaker
/// is that of the reference-mic mixture.
pub fn evaluate_mixture(
    outputs: &[Vec<f64>],
    references: &[Vec<f64>],
    mixture_ref_channel: &[f64],
) -> Result<SdrReport> {
    evaluate_mixture_with(
        SdrMeasure::SCALE_INVARIANT,
        outputs,
        references,
        mixture_ref_channel,
    )
}

/// [`evaluate_mixture`] under a chosen SDR measure.
pub fn evaluate_mixture_with(
    measure: SdrMeasure,
    outputs: &[Vec<f64>],
    references: &[Vec<f64>],
    mixture_ref_channel: &[f64],
) -> Result<SdrReport> {
    if outputs.len() != references.len() {
        return Err(Error::Shape(format!(
            "{} outputs for {} references",
            outputs.len(),
            references.len()
        )));
    }
    let mut report = SdrReport {
        input_sdr: Vec::with_capacity(outputs.len()),
        output_sdr: Vec::with_capacity(outputs.len()),
        improvement: Vec::with_capacity(outputs.len()),
    };
    for (out, reference) in outputs.iter().zip(references) {
        let prepared = SdrReference::new(reference, measure)?;
        let input = prepared.sdr(mixture_ref_channel)?;
        let output = prepared.sdr(out)?;
        report.input_sdr.push(input);
        report.output_sdr.push(output);
        report.improvement.push(output - input);
    }
    Ok(report)
}
