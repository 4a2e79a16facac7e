use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::separate::{select, Selection, Separator};
use crate::beam::BeamformerBank;
use crate::dsp::{
    istft, pad_signal, unpad_signal, ComplexSpectrogram, MultichannelWave, StftConfig,
};
use crate::metrics::{
    evaluate_mixture_with, irm_baseline, mbbf_oracle, mbirm_baseline, oracle_mvdr, SdrMeasure,
};
use crate::room::{ArrayGeometry, REFERENCE_MIC};
use crate::{Error, Result};

/// The systems an evaluation run can score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    /// Beams, embedding model and clustering-based selection.
    Proposed,
    /// Beams and embedding model with reference-based selection.
    ProposedOracle,
    /// The single best beam per talker.
    Mbbf,
    /// Ideal ratio mask on the reference microphone.
    Irm,
    /// Ideal ratio mask on the best beam per talker.
    Mbirm,
    /// MVDR with the true direction and interference covariance.
    Omvdr,
}

impl System {
    pub const ALL: [System; 6] = [
        System::Proposed,
        System::ProposedOracle,
        System::Mbbf,
        System::Irm,
        System::Mbirm,
        System::Omvdr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            System::Proposed => "proposed",
            System::ProposedOracle => "proposed_oracle",
            System::Mbbf => "mbbf",
            System::Irm => "irm",
            System::Mbirm => "mbirm",
            System::Omvdr => "omvdr",
        }
    }

    pub fn needs_model(self) -> bool {
        matches!(self, System::Proposed | System::ProposedOracle)
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for System {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        System::ALL
            .into_iter()
            .find(|sys| sys.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = System::ALL.iter().map(|s| s.name()).collect();
                Error::Config(format!(
                    "unknown system {s:?}; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

/// One talker of one utterance under one system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub utterance: String,
    pub system: System,
    pub speakers: usize,
    pub speaker: usize,
    pub input_sdr: f64,
    pub output_sdr: f64,
    pub improvement: f64,
}

/// A mixture with the per-talker multichannel images it was made from.
#[derive(Debug, Clone, Copy)]
pub struct Utterance<'a> {
    pub id: &'a str,
    pub mixture: &'a MultichannelWave,
    pub images: &'a [MultichannelWave],
    pub azimuths_deg: &'a [f64],
}

impl Utterance<'_> {
    /// Every talker on the reference microphone.
    pub fn references(&self) -> Vec<Vec<f64>> {
        self.images
            .iter()
            .map(|i| i.channel(REFERENCE_MIC).to_vec())
            .collect()
    }

    fn interference(&self, c: usize) -> MultichannelWave {
        let mut acc = vec![vec![0.0; self.mixture.len()]; self.mixture.num_channels()];
        for img in self
            .images
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != c)
            .map(|p| p.1)
        {
            for (a, ch) in acc.iter_mut().zip(img.channels()) {
                a.iter_mut().zip(ch).for_each(|(x, y)| *x += y);
            }
        }
        MultichannelWave::new(acc, self.mixture.sample_rate()).expect("images match the mixture")
    }
}

/// Scores `outputs[c]` against talker `c` and returns one row per talker.
pub fn score_outputs(
    utterance: &Utterance,
    system: System,
    outputs: &[Vec<f64>],
    measure: SdrMeasure,
) -> Result<Vec<EvalRow>> {
    let refs = utterance.references();
    let report = evaluate_mixture_with(
        measure,
        outputs,
        &refs,
        utterance.mixture.channel(REFERENCE_MIC),
    )?;
    Ok((0..refs.len())
        .map(|c| EvalRow {
            utterance: utterance.id.to_string(),
            system,
            speakers: refs.len(),
            speaker: c,
            input_sdr: report.input_sdr[c],
            output_sdr: report.output_sdr[c],
            improvement: report.improvement[c],
        })
        .collect())
}

/// Runs the requested systems on utterances.
#[derive(Debug, Clone, Copy)]
pub struct Evaluator<'a> {
    pub bank: &'a BeamformerBank,
    pub geometry: &'a ArrayGeometry,
    pub stft: StftConfig,
    pub measure: SdrMeasure,
    /// Needed for the proposed systems only.
    pub separator: Option<Separator<'a>>,
    pub cluster_seed: u64,
    pub log_affinity: bool,
}

impl Evaluator<'_> {
    pub fn evaluate(&self, utterance: &Utterance, systems: &[System]) -> Result<Vec<EvalRow>> {
        let c = utterance.images.len();
        if c == 0 || utterance.azimuths_deg.len() != c {
            return Err(Error::Shape(format!(
                "{}: {c} images and {} azimuths",
                utterance.id,
                utterance.azimuths_deg.len()
            )));
        }
        let pad = self.stft.edge_padding();
        let len = utterance.mixture.len();
        let refs = utterance.references();
        let wave = |s: &ComplexSpectrogram| istft(s).map(|y| unpad_signal(&y, pad, len));
        let waves =
            |specs: Vec<ComplexSpectrogram>| specs.iter().map(wave).collect::<Result<Vec<_>>>();

        let mix_specs = utterance.mixture.padded(pad).stft(self.stft)?;
        let beams = self.bank.apply_spectra(&mix_specs)?;
        let beam_waves = waves(beams.clone())?;
        let chosen_beams = mbbf_oracle(&beam_waves, &refs, self.measure)?;
        let candidates = match (&self.separator, systems.iter().any(|s| s.needs_model())) {
            (Some(sep), true) => Some(sep.candidates(utterance.mixture)?),
            (None, true) => {
                return Err(Error::Config(
                    "the proposed systems need a trained model".into(),
                ))
            }
            _ => None,
        };

        let mut rows = Vec::new();
        for &system in systems {
            let outputs = match system {
                System::Proposed => {
                    let how = Selection::Spectral {
                        seed: self.cluster_seed,
                        log_affinity: self.log_affinity,
                    };
                    select(candidates.as_ref().expect("built above"), c, how)?.outputs
                }
                System::ProposedOracle => {
                    let how = Selection::Oracle {
                        references: &refs,
                        measure: self.measure,
                    };
                    select(candidates.as_ref().expect("built above"), c, how)?.outputs
                }
                System::Mbbf => chosen_beams
                    .iter()
                    .map(|&b| beam_waves[b].clone())
                    .collect(),
                System::Irm => {
                    let ref_specs = refs
                        .iter()
                        .map(|r| {
                            crate::dsp::stft(
                                &pad_signal(r, pad),
                                self.stft,
                                utterance.mixture.sample_rate(),
                            )
                        })
                        .collect::<Result<Vec<_>>>()?;
                    waves(irm_baseline(&mix_specs[REFERENCE_MIC], &ref_specs)?)?
                }
                System::Mbirm => {
                    let source_beams = utterance
                        .images
                        .iter()
                        .map(|im| self.bank.apply(&im.padded(pad), self.stft))
                        .collect::<Result<Vec<_>>>()?;
                    waves(mbirm_baseline(&beams, &source_beams, &chosen_beams)?)?
                }
                System::Omvdr => {
                    let interference = (0..c)
                        .map(|k| utterance.interference(k).padded(pad).stft(self.stft))
                        .collect::<Result<Vec<_>>>()?;
                    waves(oracle_mvdr(
                        &mix_specs,
                        &interference,
                        self.geometry,
                        utterance.azimuths_deg,
                    )?)?
                }
            };
            rows.extend(score_outputs(utterance, system, &outputs, self.measure)?);
        }
        Ok(rows)
    }
}

/// Mean scores of one system over every talker it was run on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSummary {
    pub system: System,
    pub utterances: usize,
    pub talkers: usize,
    pub mean_input_sdr: f64,
    pub mean_output_sdr: f64,
    pub mean_improvement: f64,
}

/// Per-system means, in [`System::ALL`] order.
pub fn summarize(rows: &[EvalRow]) -> Vec<SystemSummary> {
    System::ALL
        .into_iter()
        .filter_map(|system| {
            let mine: Vec<&EvalRow> = rows.iter().filter(|r| r.system == system).collect();
            if mine.is_empty() {
                return None;
            }
            let n = mine.len() as f64;
            let mut utts: Vec<&str> = mine.iter().map(|r| r.utterance.as_str()).collect();
            utts.sort_unstable();
            utts.dedup();
            Some(SystemSummary {
                system,
                utterances: utts.len(),
                talkers: mine.len(),
                mean_input_sdr: mine.iter().map(|r| r.input_sdr).sum::<f64>() / n,
                mean_output_sdr: mine.iter().map(|r| r.output_sdr).sum::<f64>() / n,
                mean_improvement: mine.iter().map(|r| r.improvement).sum::<f64>() / n,
            })
        })
        .collect()
}

/// The mean improvement of `system`, if it was evaluated.
pub fn mean_improvement(summary: &[SystemSummary], system: System) -> Option<f64> {
    summary
        .iter()
        .find(|s| s.system == system)
        .map(|s| s.mean_improvement)
}

/// One row per talker, sorted by utterance, system and talker.
pub fn rows_csv(rows: &[EvalRow], config_hash: &str) -> String {
    let mut sorted: Vec<&EvalRow> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        (a.utterance.as_str(), a.system, a.speaker).cmp(&(
            b.utterance.as_str(),
            b.system,
            b.speaker,
        ))
    });
    let mut out = String::from(
        "utterance,system,speakers,speaker,input_sdr,output_sdr,improvement,config_hash\n",
    );
    for r in sorted {
        writeln!(
            out,
            "{},{},{},{},{:.4},{:.4},{:.4},{config_hash}",
            r.utterance, r.system, r.speakers, r.speaker, r.input_sdr, r.output_sdr, r.improvement
        )
        .expect("writing to a String");
    }
    out
}

pub fn summary_csv(summary: &[SystemSummary], config_hash: &str) -> String {
    let mut out = String::from(
        "system,utterances,talkers,mean_input_sdr,mean_output_sdr,mean_improvement,config_hash\n",
    );
    for s in summary {
        writeln!(
            out,
            "{},{},{},{:.4},{:.4},{:.4},{config_hash}",
            s.system,
            s.utterances,
            s.talkers,
            s.mean_input_sdr,
            s.mean_output_sdr,
            s.mean_improvement
        )
        .expect("writing to a String");
    }
    out
}
