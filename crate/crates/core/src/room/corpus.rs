//! On-disk mixture corpora: WAV files plus a line-delimited JSON manifest.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::geometry::ArrayGeometry;
use super::mixture::{generate_mixture, MixtureOptions, MixtureSample};
use super::rir::RoomSpec;
use super::scene::{sample_scene, SceneRanges};
use super::voices::SyntheticVoice;
use crate::dsp::{read_wav, write_wav, MultichannelWave, SampleFormat};
use crate::error::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomRecord {
    pub dims: [f64; 3],
    pub absorption: f64,
}

/// One manifest line. Paths are relative to the manifest directory;
/// reference files hold each talker's image on every microphone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub mixture_path: String,
    pub reference_paths: Vec<String>,
    pub azimuths_deg: Vec<f64>,
    pub snrs_db: Vec<f64>,
    pub seed: u64,
    pub room: RoomRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// Where dry talker signals come from.
#[derive(Debug, Clone)]
pub enum DrySourcePool {
    /// `speakers` synthetic voices, each utterance `seconds` long.
    Synthetic { speakers: usize, seconds: f64 },
    /// Mono (first channel used) WAV files, one per talker.
    Files(Vec<PathBuf>),
}

impl DrySourcePool {
    fn size(&self) -> usize {
        match self {
            DrySourcePool::Synthetic { speakers, .. } => *speakers,
            DrySourcePool::Files(f) => f.len(),
        }
    }

    fn draw(
        &self,
        index: usize,
        voices: &[SyntheticVoice],
        sample_rate: u32,
        seed: u64,
    ) -> Result<Vec<f64>> {
        match self {
            DrySourcePool::Synthetic { seconds, .. } => {
                let len = (seconds * sample_rate as f64).round() as usize;
                Ok(voices[index].utterance(len, sample_rate, seed))
            }
            DrySourcePool::Files(files) => {
                let w = read_wav(&files[index])?;
                if w.sample_rate() != sample_rate {
                    return Err(Error::Format(format!(
                        "{} is {} Hz, expected {} Hz",
                        files[index].display(),
                        w.sample_rate(),
                        sample_rate
                    )));
                }
                Ok(w.channel(0).to_vec())
            }
        }
    }
}

/// Everything that determines corpus content apart from the seed.
#[derive(Debug, Clone)]
pub struct CorpusSpec {
    pub count: usize,
    pub num_speakers: usize,
    pub seed: u64,
    pub sample_rate: u32,
    pub geometry: ArrayGeometry,
    pub ranges: SceneRanges,
    pub mixture: MixtureOptions,
    pub pool: DrySourcePool,
    pub config_hash: Option<String>,
}

/// SplitMix64 step, used to derive independent per-item seeds.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generates the `index`-th mixture of a corpus without touching disk.
pub fn corpus_item(spec: &CorpusSpec, index: usize) -> Result<MixtureSample> {
    let c = spec.num_speakers;
    if spec.pool.size() < c {
        return Err(Error::Input(format!(
            "source pool has {} talkers, {} needed per mixture",
            spec.pool.size(),
            c
        )));
    }
    let voices = synthetic_voices(spec);
    let item_seed = derive_seed(spec.seed, index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(item_seed);
    let talkers = sample(&mut rng, spec.pool.size(), c).into_vec();
    let dry = talkers
        .iter()
        .map(|&t| spec.pool.draw(t, &voices, spec.sample_rate, rng.gen()))
        .collect::<Result<Vec<_>>>()?;
    let scene = sample_scene(rng.gen(), c, &spec.geometry, &spec.ranges)?;
    generate_mixture(
        &dry,
        &scene,
        &spec.geometry,
        spec.sample_rate,
        item_seed,
        &spec.mixture,
    )
}

fn synthetic_voices(spec: &CorpusSpec) -> Vec<SyntheticVoice> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, u64::MAX));
    (0..spec.pool.size())
        .map(|_| SyntheticVoice::random(&mut rng))
        .collect()
}

fn record_for(sample: &MixtureSample, index: usize, hash: &Option<String>) -> ManifestRecord {
    ManifestRecord {
        mixture_path: format!("mix_{index:05}.wav"),
        reference_paths: (0..sample.num_speakers())
            .map(|c| format!("mix_{index:05}_src{c}.wav"))
            .collect(),
        azimuths_deg: sample.azimuths_deg.clone(),
        snrs_db: sample.snrs_db.clone(),
        seed: sample.seed,
        room: room_record(&sample.room),
        config_hash: hash.clone(),
    }
}

fn room_record(room: &RoomSpec) -> RoomRecord {
    RoomRecord {
        dims: room.dims,
        absorption: room.absorption,
    }
}

/// Writes `spec.count` mixtures into `out_dir` and returns the manifest.
pub fn build_corpus(out_dir: impl AsRef<Path>, spec: &CorpusSpec) -> Result<Vec<ManifestRecord>> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut records = Vec::with_capacity(spec.count);
    for i in 0..spec.count {
        let sample = corpus_item(spec, i)?;
        let rec = record_for(&sample, i, &spec.config_hash);
        write_wav(
            dir.join(&rec.mixture_path),
            &sample.mixture,
            SampleFormat::Float32,
        )?;
        for (img, path) in sample.images.iter().zip(&rec.reference_paths) {
            write_wav(dir.join(path), img, SampleFormat::Float32)?;
        }
        log::info!("corpus item {i}: azimuths {:?}", rec.azimuths_deg);
        records.push(rec);
    }
    write_manifest(dir.join(MANIFEST_NAME), &records)?;
    Ok(records)
}

pub fn write_manifest(path: impl AsRef<Path>, records: &[ManifestRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for r in records {
        let line = serde_json::to_string(r).expect("manifest records serialise");
        writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRecord>> {
    let path = path.as_ref();
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Format(format!("{}:{}: {}", path.display(), n + 1, e)))?,
        );
    }
    Ok(out)
}

/// Mixture and per-talker images loaded back from a corpus directory.
#[derive(Debug, Clone)]
pub struct LoadedMixture {
    pub record: ManifestRecord,
    pub mixture: MultichannelWave,
    pub images: Vec<MultichannelWave>,
}

pub fn load_item(dir: impl AsRef<Path>, record: &ManifestRecord) -> Result<LoadedMixture> {
    let dir = dir.as_ref();
    let mixture = read_wav(dir.join(&record.mixture_path))?;
    let images = record
        .reference_paths
        .iter()
        .map(|p| read_wav(dir.join(p)))
        .collect::<Result<Vec<_>>>()?;
    if images
        .iter()
        .any(|i| i.len() != mixture.len() || i.num_channels() != mixture.num_channels())
    {
        return Err(Error::Shape(format!(
            "{}: reference shapes differ from the mixture",
            record.mixture_path
        )));
    }
    Ok(LoadedMixture {
        record: record.clone(),
        mixture,
        images,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(count: usize, c: usize, seed: u64) -> CorpusSpec {
        CorpusSpec {
            count,
            num_speakers: c,
            seed,
            sample_rate: 8000,
            geometry: ArrayGeometry::circular_seven(),
            ranges: SceneRanges {
                max_image_order: 1,
                ..SceneRanges::default()
            },
            mixture: MixtureOptions {
                rir_len: 1024,
                ..MixtureOptions::default()
            },
            pool: DrySourcePool::Synthetic {
                speakers: 8,
                seconds: 0.25,
            },
            config_hash: None,
        }
    }

    #[test]
    fn empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let recs = build_corpus(dir.path(), &spec(0, 2, 1)).unwrap();
        assert!(recs.is_empty());
        let names: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names, vec![std::ffi::OsString::from(MANIFEST_NAME)]);
        assert_eq!(fs::read(dir.path().join(MANIFEST_NAME)).unwrap(), b"");
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        build_corpus(a.path(), &spec(3, 2, 42)).unwrap();
        build_corpus(b.path(), &spec(3, 2, 42)).unwrap();
        for name in [MANIFEST_NAME, "mix_00002.wav", "mix_00001_src1.wav"] {
            assert_eq!(
                fs::read(a.path().join(name)).unwrap(),
                fs::read(b.path().join(name)).unwrap()
            );
        }
    }

    #[test]
    fn cardinality_and_reload() {
        let dir = tempfile::tempdir().unwrap();
        let recs = build_corpus(dir.path(), &spec(10, 4, 5)).unwrap();
        assert_eq!(recs.len(), 10);
        assert!(recs.iter().all(|r| r.reference_paths.len() == 4));
        let back = read_manifest(dir.path().join(MANIFEST_NAME)).unwrap();
        assert_eq!(back, recs);
        let item = load_item(dir.path(), &back[3]).unwrap();
        assert_eq!(item.images.len(), 4);
        assert_eq!(item.mixture.num_channels(), 7);
    }

    #[test]
    fn pool_too_small() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = spec(1, 4, 1);
        s.pool = DrySourcePool::Synthetic {
            speakers: 3,
            seconds: 0.2,
        };
        assert!(matches!(build_corpus(dir.path(), &s), Err(Error::Input(_))));
    }
}
