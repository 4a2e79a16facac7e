use crate::adan::EmbeddingModel;
use crate::beam::BeamformerBank;
use crate::dsp::{pad_signal, unpad_signal, MultichannelWave, StftConfig};
use crate::metrics::SdrMeasure;
use crate::select::{
    oracle_select, pearson_affinity, quality_score, select_outputs, spectral_cluster,
    SelectionReport,
};
use crate::{Error, Result};

/// The `E x B` outputs of running the model on every beam.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidates {
    /// Time-domain outputs, trimmed to the mixture length.
    pub waveforms: Vec<Vec<f64>>,
    /// Flattened magnitude spectrograms, in the same order.
    pub magnitudes: Vec<Vec<f64>>,
    /// `(beam, output)` of every candidate.
    pub provenance: Vec<(usize, usize)>,
}

impl Candidates {
    pub fn len(&self) -> usize {
        self.waveforms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waveforms.is_empty()
    }
}

/// How the final `C` outputs are picked from the candidates.
#[derive(Debug, Clone, Copy)]
pub enum Selection<'a> {
    /// Spectral clustering into `C + 1` groups plus the quality score.
    Spectral { seed: u64, log_affinity: bool },
    /// Best SDR against the given references.
    Oracle {
        references: &'a [Vec<f64>],
        measure: SdrMeasure,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Separation {
    pub outputs: Vec<Vec<f64>>,
    pub report: SelectionReport,
}

/// Beamformer bank followed by the embedding model on every beam.
#[derive(Debug, Clone, Copy)]
pub struct Separator<'a> {
    pub bank: &'a BeamformerBank,
    pub model: &'a EmbeddingModel,
    pub stft: StftConfig,
    /// Salient talkers per beam (`G`); each beam yields `G + 1` outputs.
    pub salient: usize,
}

impl<'a> Separator<'a> {
    pub fn candidates(&self, mixture: &MultichannelWave) -> Result<Candidates> {
        let pad = self.stft.edge_padding();
        let len = mixture.len();
        let beams = self.bank.apply(&mixture.padded(pad), self.stft)?;
        let mut out = Candidates {
            waveforms: Vec::new(),
            magnitudes: Vec::new(),
            provenance: Vec::new(),
        };
        for (b, beam) in beams.iter().enumerate() {
            let sep = self.model.separate_beam(beam, self.salient)?;
            for (e, (spec, wave)) in sep.spectra.iter().zip(&sep.waveforms).enumerate() {
                out.waveforms.push(unpad_signal(wave, pad, len));
                out.magnitudes.push(spec.magnitudes());
                out.provenance.push((b, e));
            }
        }
        Ok(out)
    }

    pub fn separate(
        &self,
        mixture: &MultichannelWave,
        speakers: usize,
        how: Selection,
    ) -> Result<Separation> {
        let cands = self.candidates(mixture)?;
        select(&cands, speakers, how)
    }

    /// Pads a mono reference the way [`Self::candidates`] pads the mixture.
    pub fn padded(&self, x: &[f64]) -> Vec<f64> {
        pad_signal(x, self.stft.edge_padding())
    }
}

/// Picks `speakers` candidates and reports how.
pub fn select(cands: &Candidates, speakers: usize, how: Selection) -> Result<Separation> {
    if speakers == 0 || speakers > cands.len() {
        return Err(Error::Input(format!(
            "cannot select {speakers} outputs from {} candidates",
            cands.len()
        )));
    }
    let scores: Vec<f64> = cands.magnitudes.iter().map(|m| quality_score(m)).collect();
    let mut labels = vec![None; cands.len()];
    let (chosen, oracle) = match how {
        Selection::Oracle {
            references,
            measure,
        } => (oracle_select(&cands.waveforms, references, measure)?, true),
        Selection::Spectral { seed, log_affinity } => {
            let aff = pearson_affinity(&cands.magnitudes, log_affinity)?;
            let kept_labels = spectral_cluster(&aff, speakers + 1, seed)?;
            for (&i, &l) in aff.kept.iter().zip(&kept_labels) {
                labels[i] = Some(l);
            }
            let kept_scores: Vec<f64> = aff.kept.iter().map(|&i| scores[i]).collect();
            let take = speakers.min(aff.kept.len());
            let mut chosen: Vec<usize> = select_outputs(&kept_scores, &kept_labels, take)?
                .into_iter()
                .map(|i| aff.kept[i])
                .collect();
            // Dropped constant candidates only fill in when nothing else is left.
            chosen.extend(
                (0..cands.len())
                    .filter(|i| !aff.kept.contains(i))
                    .take(speakers - take),
            );
            (chosen, false)
        }
    };
    Ok(Separation {
        outputs: chosen.iter().map(|&i| cands.waveforms[i].clone()).collect(),
        report: SelectionReport {
            provenance: cands.provenance.clone(),
            scores,
            labels,
            chosen,
            oracle,
        },
    })
}
