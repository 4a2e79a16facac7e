use num_complex::Complex64;

use super::sdr::{SdrMeasure, SdrReference};
use crate::beam::steering_vector;
use crate::dsp::ComplexSpectrogram;
use crate::linalg::{cdot, cholesky_solve, CMatrix};
use crate::room::{ArrayGeometry, SPEED_OF_SOUND};
use crate::{Error, Result};

/// Denominator floor of the ideal ratio mask.
pub const IRM_FLOOR: f64 = 1e-10;

/// Ideal ratio masks `|S_c| / sum |S_c'|`, one per reference, frame-major.
pub fn irm_masks(references: &[ComplexSpectrogram]) -> Result<Vec<Vec<f64>>> {
    let first = references
        .first()
        .ok_or_else(|| Error::Input("no reference spectrograms".into()))?;
    let n = first.bins().len();
    if references.iter().any(|r| r.bins().len() != n) {
        return Err(Error::Shape(
            "reference spectrograms differ in shape".into(),
        ));
    }
    let mut denom = vec![0.0; n];
    for r in references {
        for (d, x) in denom.iter_mut().zip(r.bins()) {
            *d += x.norm();
        }
    }
    Ok(references
        .iter()
        .map(|r| {
            r.bins()
                .iter()
                .zip(&denom)
                .map(|(x, d)| x.norm() / d.max(IRM_FLOOR))
                .collect()
        })
        .collect())
}

/// The mixture masked by each speaker's ideal ratio mask; resynthesis keeps
/// the mixture phase.
pub fn irm_baseline(
    mixture: &ComplexSpectrogram,
    references: &[ComplexSpectrogram],
) -> Result<Vec<ComplexSpectrogram>> {
    if references
        .iter()
        .any(|r| r.num_frames() != mixture.num_frames() || r.config() != mixture.config())
    {
        return Err(Error::Shape(
            "references do not match the mixture spectrogram".into(),
        ));
    }
    irm_masks(references)?
        .iter()
        .map(|m| mixture.masked(m))
        .collect()
}

/// For every reference, the index of the beam waveform with the highest SDR
/// against it. Ties go to the lower beam index.
pub fn mbbf_oracle(
    beams: &[Vec<f64>],
    references: &[Vec<f64>],
    measure: SdrMeasure,
) -> Result<Vec<usize>> {
    if beams.is_empty() {
        return Err(Error::Input("no beams to choose from".into()));
    }
    references
        .iter()
        .map(|r| {
            let r = SdrReference::new(r, measure)?;
            let mut best = (0, f64::NEG_INFINITY);
            for (b, beam) in beams.iter().enumerate() {
                let s = r.sdr(beam)?;
                if s > best.1 {
                    best = (b, s);
                }
            }
            Ok(best.0)
        })
        .collect()
}

/// IRM applied on the beam chosen for each speaker.
///
/// `source_beams[c][b]` is speaker `c`'s image passed through beam `b`, and
/// `chosen[c]` the beam picked for that speaker (usually by [`mbbf_oracle`]).
pub fn mbirm_baseline(
    beams: &[ComplexSpectrogram],
    source_beams: &[Vec<ComplexSpectrogram>],
    chosen: &[usize],
) -> Result<Vec<ComplexSpectrogram>> {
    if chosen.len() != source_beams.len() {
        return Err(Error::Shape(format!(
            "{} beam choices for {} speakers",
            chosen.len(),
            source_beams.len()
        )));
    }
    chosen
        .iter()
        .enumerate()
        .map(|(c, &b)| {
            let beam = beams
                .get(b)
                .ok_or_else(|| Error::Shape(format!("beam {b} out of range")))?;
            let refs: Vec<ComplexSpectrogram> = source_beams
                .iter()
                .map(|s| {
                    s.get(b)
                        .cloned()
                        .ok_or_else(|| Error::Shape(format!("beam {b} out of range")))
                })
                .collect::<Result<_>>()?;
            let masks = irm_masks(&refs)?;
            beam.masked(&masks[c])
        })
        .collect()
}

/// `R^-1 d / (dᴴ R^-1 d)` after loading `R` with `1e-3 * tr(R) / M` on the
/// diagonal.
pub fn mvdr_weights(cov: &CMatrix, steering: &[Complex64]) -> Result<Vec<Complex64>> {
    let m = cov.dim();
    let mut r = cov.clone();
    r.add_diagonal(1e-3 * r.trace().re / m as f64);
    let l = r.cholesky(1e-14)?;
    let rid = cholesky_solve(&l, steering);
    let denom = cdot(steering, &rid);
    if !(denom.norm() > 0.0) || !denom.is_finite() {
        return Err(Error::Numerical("MVDR normaliser vanished".into()));
    }
    Ok(rid.iter().map(|x| x / denom.conj()).collect())
}

/// Oracle MVDR: the steering vector comes from the true azimuth and the noise
/// covariance from the interference-only signal of each speaker.
///
/// `interference[c]` holds the per-mic spectrograms of everything except
/// speaker `c`.
pub fn oracle_mvdr(
    mixture: &[ComplexSpectrogram],
    interference: &[Vec<ComplexSpectrogram>],
    geometry: &ArrayGeometry,
    azimuths_deg: &[f64],
) -> Result<Vec<ComplexSpectrogram>> {
    let m = geometry.num_mics();
    if mixture.len() != m || interference.iter().any(|i| i.len() != m) {
        return Err(Error::Shape(format!("expected {m} channel spectrograms")));
    }
    if interference.len() != azimuths_deg.len() {
        return Err(Error::Shape("one azimuth per speaker is required".into()));
    }
    let first = &mixture[0];
    let (frames, bins) = (first.num_frames(), first.num_bins());
    if mixture
        .iter()
        .chain(interference.iter().flatten())
        .any(|s| s.num_frames() != frames)
    {
        return Err(Error::Shape("channel spectrograms differ in length".into()));
    }
    azimuths_deg
        .iter()
        .zip(interference)
        .map(|(&az, noise)| {
            let mut out = ComplexSpectrogram::zeros(frames, first.config(), first.sample_rate());
            let mut x = vec![Complex64::new(0.0, 0.0); m];
            for f in 0..bins {
                let mut cov = CMatrix::zeros(m);
                for t in 0..frames {
                    for (xm, s) in x.iter_mut().zip(noise) {
                        *xm = s.get(t, f);
                    }
                    cov.add_outer(&x, 1.0 / frames as f64);
                }
                let d = steering_vector(geometry, az, first.bin_frequency(f), SPEED_OF_SOUND);
                let w = mvdr_weights(&cov, &d)?;
                for t in 0..frames {
                    for (xm, s) in x.iter_mut().zip(mixture) {
                        *xm = s.get(t, f);
                    }
                    out.bins_mut()[t * bins + f] = cdot(&w, &x);
                }
            }
            Ok(out)
        })
        .collect()
}
