use std::fmt::Write as _;
use std::path::Path;

use super::config::{check_hash, PipelineConfig};
use super::evaluate::{EvalRow, Evaluator, System, Utterance};
use super::separate::Separator;
use crate::adan::{
    beam_examples, train, CheckpointMeta, EmbeddingModel, StepReport, TrainingExample,
};
use crate::beam::{design_bank, BeamformerBank};
use crate::room::{build_corpus, load_item, read_manifest, ManifestRecord, MANIFEST_NAME};
use crate::Result;

/// Designs the bank described by `cfg` and stamps it with the config hash.
pub fn design_bank_for(cfg: &PipelineConfig) -> Result<BeamformerBank> {
    let mut bank = design_bank(
        &cfg.geometry()?,
        cfg.beams.count,
        &cfg.frequency_grid(),
        &cfg.design_params(),
    )?;
    bank.config_hash = Some(cfg.config_hash());
    Ok(bank)
}

pub fn load_bank_for(cfg: &PipelineConfig, path: impl AsRef<Path>) -> Result<BeamformerBank> {
    let path = path.as_ref();
    let bank = BeamformerBank::load(path)?;
    check_hash(
        &path.display().to_string(),
        bank.config_hash.as_deref(),
        &cfg.config_hash(),
    )?;
    Ok(bank)
}

/// Gain in dB of every beam at `freqs_hz`, one row per angle step.
pub fn beampattern_csv(bank: &BeamformerBank, freqs_hz: &[f64], angle_step_deg: f64) -> String {
    let steps = (360.0 / angle_step_deg).round() as usize;
    let angles: Vec<f64> = (0..steps).map(|i| i as f64 * angle_step_deg).collect();
    let mut out = String::from("beam,look_deg,freq_hz,angle_deg,gain_db\n");
    for b in 0..bank.num_beams() {
        for &f in freqs_hz {
            let fi = bank.nearest_design_index(f);
            for (a, g) in angles.iter().zip(bank.beampattern(b, f, &angles)) {
                writeln!(
                    out,
                    "{b},{:.1},{:.1},{a:.1},{g:.3}",
                    bank.look_azimuths_deg[b], bank.f_grid[fi]
                )
                .expect("writing to a String");
            }
        }
    }
    out
}

pub fn generate_corpus(cfg: &PipelineConfig, dir: impl AsRef<Path>) -> Result<Vec<ManifestRecord>> {
    build_corpus(dir, &cfg.corpus_spec()?)
}

/// Reads a corpus manifest, rejecting records made under another config.
pub fn load_corpus(cfg: &PipelineConfig, dir: impl AsRef<Path>) -> Result<Vec<ManifestRecord>> {
    let path = dir.as_ref().join(MANIFEST_NAME);
    let records = read_manifest(&path)?;
    let expected = cfg.config_hash();
    for r in &records {
        check_hash(&r.mixture_path, r.config_hash.as_deref(), &expected)?;
    }
    Ok(records)
}

/// Beam-domain training examples for every record of a corpus.
pub fn corpus_training_examples(
    cfg: &PipelineConfig,
    bank: &BeamformerBank,
    dir: impl AsRef<Path>,
    records: &[ManifestRecord],
) -> Result<Vec<TrainingExample>> {
    let stft = cfg.stft_config()?;
    let mut out = Vec::new();
    for r in records {
        let item = load_item(dir.as_ref(), r)?;
        out.extend(beam_examples(&item.mixture, &item.images, bank, stft)?);
    }
    Ok(out)
}

/// A fresh model trained on `examples` under `cfg`; returns it with its loss
/// curve.
pub fn train_model(
    cfg: &PipelineConfig,
    examples: &[TrainingExample],
    on_step: impl FnMut(usize, &StepReport),
) -> Result<(EmbeddingModel, Vec<f64>)> {
    let mut model = EmbeddingModel::new(cfg.hyperparameters()?, cfg.train.seed)?;
    let g = cfg.salient_for(cfg.corpus.speakers);
    let losses = train(&mut model, examples, g, &cfg.train, on_step)?;
    Ok((model, losses))
}

pub fn checkpoint_meta(cfg: &PipelineConfig) -> CheckpointMeta {
    CheckpointMeta {
        seed: cfg.train.seed,
        steps: cfg.train.steps,
        config_hash: Some(cfg.config_hash()),
    }
}

pub fn load_model_for(cfg: &PipelineConfig, path: impl AsRef<Path>) -> Result<EmbeddingModel> {
    let path = path.as_ref();
    let (model, meta) = EmbeddingModel::load(path)?;
    check_hash(
        &path.display().to_string(),
        meta.config_hash.as_deref(),
        &cfg.config_hash(),
    )?;
    if *model.hyper() != cfg.hyperparameters()? {
        return Err(crate::Error::Compatibility(format!(
            "{}: model shape differs from the configured one",
            path.display()
        )));
    }
    Ok(model)
}

/// Scores `systems` on every record of a corpus. The model is only needed
/// for the proposed systems.
pub fn evaluate_corpus(
    cfg: &PipelineConfig,
    bank: &BeamformerBank,
    model: Option<&EmbeddingModel>,
    dir: impl AsRef<Path>,
    records: &[ManifestRecord],
    systems: &[System],
) -> Result<Vec<EvalRow>> {
    let stft = cfg.stft_config()?;
    let geometry = cfg.geometry()?;
    let mut rows = Vec::new();
    for r in records {
        let item = load_item(dir.as_ref(), r)?;
        let c = item.images.len();
        let evaluator = Evaluator {
            bank,
            geometry: &geometry,
            stft,
            measure: cfg.sdr_measure(),
            separator: model.map(|m| Separator {
                bank,
                model: m,
                stft,
                salient: cfg.salient_for(c),
            }),
            cluster_seed: cfg.eval.cluster_seed,
            log_affinity: cfg.eval.log_affinity,
        };
        let id = r.mixture_path.trim_end_matches(".wav");
        let utterance = Utterance {
            id,
            mixture: &item.mixture,
            images: &item.images,
            azimuths_deg: &r.azimuths_deg,
        };
        rows.extend(evaluator.evaluate(&utterance, systems)?);
        log::info!("evaluated {id}");
    }
    Ok(rows)
}
