//! `beamsep`: corpus generation, beam design, training, separation and
//! evaluation from one configuration file.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use beamsep::adan::write_loss_csv;
use beamsep::beam::BeamformerBank;
use beamsep::dsp::{read_wav, write_wav, MultichannelWave, SampleFormat};
use beamsep::pipeline::{
    beampattern_csv, checkpoint_meta, corpus_training_examples, design_bank_for, evaluate_corpus,
    generate_corpus, load_bank_for, load_corpus, load_model_for, rows_csv, summarize, summary_csv,
    train_model, PipelineConfig, Selection, Separator, System,
};
use beamsep::room::REFERENCE_MIC;
use beamsep::Error;
use clap::{Args, Parser, Subcommand};
use log::info;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "beamsep",
    version,
    about = "Multi-beam speech separation pipeline"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline configuration (TOML). Defaults apply when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override a config value, e.g. `--set train.steps=500`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// More logging; repeat for debug output.
    #[arg(long, short, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a corpus of reverberant mixtures.
    GenCorpus {
        #[arg(long)]
        out: PathBuf,
    },
    /// Design the beamformer bank and write its beampatterns.
    DesignBeams {
        #[arg(long)]
        out: PathBuf,
        /// Frequencies at which to tabulate beampatterns.
        #[arg(long, value_delimiter = ',', default_values_t = [500.0, 1000.0, 2000.0, 3000.0])]
        freqs: Vec<f64>,
    },
    /// Train the embedding model on a corpus.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        /// Bank file from `design-beams`; designed on the fly when omitted.
        #[arg(long)]
        bank: Option<PathBuf>,
        /// Checkpoint to write.
        #[arg(long)]
        out: PathBuf,
        /// Loss curve CSV; defaults to the checkpoint path with `.loss.csv`.
        #[arg(long)]
        loss_csv: Option<PathBuf>,
    },
    /// Separate one multichannel mixture.
    Separate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        bank: Option<PathBuf>,
        #[arg(long)]
        mixture: PathBuf,
        /// Directory for the separated WAVs and the selection report.
        #[arg(long)]
        out: PathBuf,
        /// Number of talkers; defaults to `corpus.speakers`.
        #[arg(long)]
        speakers: Option<usize>,
        /// Pick outputs by SDR against reference images instead of clustering.
        #[arg(long)]
        oracle_select: bool,
        /// Reference images, one per talker. Without this flag the corpus
        /// naming `<mixture>_src<c>.wav` is tried.
        #[arg(long, num_args = 1..)]
        references: Vec<PathBuf>,
    },
    /// Score systems on a corpus.
    Evaluate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        bank: Option<PathBuf>,
        /// Needed by the proposed systems.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Comma-separated subset of proposed, proposed_oracle, mbbf, irm,
        /// mbirm, omvdr.
        #[arg(long, value_delimiter = ',')]
        systems: Option<Vec<String>>,
        /// Directory for `results.csv` and `summary.csv`.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Pipeline(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Pipeline(e)
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Pipeline(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_DATA
            })
        }
    }
}

fn run(cli: Cli) -> CliResult {
    let cfg = load_config(cli.common.config.as_deref(), &cli.common.overrides)?;
    match cli.command {
        Command::GenCorpus { out } => {
            let records = generate_corpus(&cfg, &out)?;
            println!("wrote {} mixtures to {}", records.len(), out.display());
        }
        Command::DesignBeams { out, freqs } => {
            create_dir(&out)?;
            let bank = design_bank_for(&cfg)?;
            bank.save(out.join("bank.json"))?;
            write_text(
                &out.join("beampattern.csv"),
                &beampattern_csv(&bank, &freqs, cfg.beams.angle_step_deg),
            )?;
            println!("wrote {} beams to {}", bank.num_beams(), out.display());
        }
        Command::Train {
            corpus,
            bank,
            out,
            loss_csv,
        } => {
            let bank = bank_for(&cfg, bank.as_deref())?;
            let records = load_corpus(&cfg, &corpus)?;
            let examples = corpus_training_examples(&cfg, &bank, &corpus, &records)?;
            info!(
                "{} training examples from {} mixtures",
                examples.len(),
                records.len()
            );
            let (model, losses) = train_model(&cfg, &examples, |step, r| {
                if (step + 1) % 100 == 0 {
                    info!(
                        "step {}: loss {:.4}, gradient norm {:.3}",
                        step + 1,
                        r.loss,
                        r.grad_norm
                    );
                }
            })?;
            model.save(&out, &checkpoint_meta(&cfg))?;
            let loss_path = loss_csv.unwrap_or_else(|| out.with_extension("loss.csv"));
            write_loss_csv(&loss_path, &losses)?;
            println!(
                "trained {} steps, final loss {:.4}; checkpoint {}",
                losses.len(),
                losses.last().copied().unwrap_or(f64::NAN),
                out.display()
            );
        }
        Command::Separate {
            checkpoint,
            bank,
            mixture,
            out,
            speakers,
            oracle_select,
            references,
        } => {
            let bank = bank_for(&cfg, bank.as_deref())?;
            let model = load_model_for(&cfg, &checkpoint)?;
            let wave = read_wav(&mixture)?;
            check_rate(&cfg, &wave, &mixture)?;
            let c = speakers.unwrap_or(cfg.corpus.speakers);
            if c == 0 {
                return Err(Failure::Usage("--speakers must be at least 1".into()));
            }
            let separator = Separator {
                bank: &bank,
                model: &model,
                stft: cfg.stft_config()?,
                salient: cfg.salient_for(c),
            };
            let refs = if oracle_select {
                Some(load_references(&mixture, &references, c)?)
            } else {
                None
            };
            let how = match &refs {
                Some(r) => Selection::Oracle {
                    references: r,
                    measure: cfg.sdr_measure(),
                },
                None => Selection::Spectral {
                    seed: cfg.eval.cluster_seed,
                    log_affinity: cfg.eval.log_affinity,
                },
            };
            let sep = separator.separate(&wave, c, how)?;
            create_dir(&out)?;
            for (k, y) in sep.outputs.iter().enumerate() {
                let w = MultichannelWave::mono(y.clone(), wave.sample_rate())?;
                write_wav(
                    out.join(format!("speaker_{k}.wav")),
                    &w,
                    SampleFormat::Float32,
                )?;
            }
            let report = serde_json::json!({
                "config_hash": cfg.config_hash(),
                "mixture": mixture.display().to_string(),
                "selection": sep.report,
            });
            write_text(
                &out.join("selection.json"),
                &serde_json::to_string_pretty(&report).expect("report serialises"),
            )?;
            println!("wrote {c} outputs to {}", out.display());
        }
        Command::Evaluate {
            corpus,
            bank,
            checkpoint,
            systems,
            out,
        } => {
            let systems = parse_systems(systems)?;
            let bank = bank_for(&cfg, bank.as_deref())?;
            let records = load_corpus(&cfg, &corpus)?;
            let model = match &checkpoint {
                Some(p) => Some(load_model_for(&cfg, p)?),
                None if systems.iter().any(|s| s.needs_model()) => {
                    return Err(Failure::Usage(
                        "the proposed systems need --checkpoint (or drop them with --systems)"
                            .into(),
                    ))
                }
                None => None,
            };
            let rows = evaluate_corpus(&cfg, &bank, model.as_ref(), &corpus, &records, &systems)?;
            let summary = summarize(&rows);
            let hash = cfg.config_hash();
            create_dir(&out)?;
            write_text(&out.join("results.csv"), &rows_csv(&rows, &hash))?;
            write_text(&out.join("summary.csv"), &summary_csv(&summary, &hash))?;
            println!("{:<16} {:>8} {:>12}", "system", "talkers", "improvement");
            for s in &summary {
                println!(
                    "{:<16} {:>8} {:>12.2}",
                    s.system.name(),
                    s.talkers,
                    s.mean_improvement
                );
            }
        }
    }
    Ok(())
}

/// Reads the TOML file (if any), applies `key=value` overrides and validates.
fn load_config(path: Option<&Path>, overrides: &[String]) -> CliResult<PipelineConfig> {
    let text = match path {
        Some(p) => fs::read_to_string(p).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        })?,
        None => String::new(),
    };
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    for o in overrides {
        let (key, value) = o
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("override {o:?} is not KEY=VALUE")))?;
        set_path(&mut table, key.trim(), parse_value(value.trim()))
            .map_err(|m| Failure::Usage(format!("override {o:?}: {m}")))?;
    }
    Ok(PipelineConfig::from_toml(&table.to_string())?)
}

fn parse_value(text: &str) -> toml::Value {
    // A bare word that is not valid TOML is taken as a string.
    format!("v = {text}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(text.to_string()))
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), String> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|k| !k.is_empty()).ok_or("empty key")?;
    let mut cur = table;
    for p in parts {
        cur = cur
            .entry(p)
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| format!("{p} is not a section"))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn parse_systems(names: Option<Vec<String>>) -> CliResult<Vec<System>> {
    match names {
        None => Ok(System::ALL.to_vec()),
        Some(names) => names
            .iter()
            .map(|n| {
                n.trim()
                    .parse::<System>()
                    .map_err(|e| Failure::Usage(e.to_string()))
            })
            .collect(),
    }
}

fn bank_for(cfg: &PipelineConfig, path: Option<&Path>) -> CliResult<BeamformerBank> {
    Ok(match path {
        Some(p) => load_bank_for(cfg, p)?,
        None => design_bank_for(cfg)?,
    })
}

fn check_rate(cfg: &PipelineConfig, wave: &MultichannelWave, path: &Path) -> CliResult {
    if wave.sample_rate() != cfg.sample_rate {
        return Err(Error::Format(format!(
            "{} is {} Hz, config expects {} Hz",
            path.display(),
            wave.sample_rate(),
            cfg.sample_rate
        ))
        .into());
    }
    Ok(())
}

fn load_references(mixture: &Path, given: &[PathBuf], c: usize) -> CliResult<Vec<Vec<f64>>> {
    let paths: Vec<PathBuf> = if given.is_empty() {
        let stem = mixture
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default();
        (0..c)
            .map(|k| mixture.with_file_name(format!("{stem}_src{k}.wav")))
            .collect()
    } else {
        given.to_vec()
    };
    if paths.len() != c {
        return Err(Failure::Usage(format!(
            "{} references given for {c} talkers",
            paths.len()
        )));
    }
    paths
        .iter()
        .map(|p| {
            let w = read_wav(p)?;
            let ch = if w.num_channels() > REFERENCE_MIC {
                REFERENCE_MIC
            } else {
                0
            };
            Ok(w.channel(ch).to_vec())
        })
        .collect()
}

fn create_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| {
        Error::Io {
            path: dir.to_path_buf(),
            source: e,
        }
        .into()
    })
}

fn write_text(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| {
        Error::Io {
            path: path.to_path_buf(),
            source: e,
        }
        .into()
    })
}
