use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use hound::{SampleFormat as HoundFormat, WavReader, WavSpec, WavWriter};

use super::MultichannelWave;
use crate::error::{Error, Result};

/// On-disk sample encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    Pcm16,
    Float32,
}

fn format_err(path: &Path, e: hound::Error) -> Error {
    Error::Format(format!("{}: {}", path.display(), e))
}

fn write_err(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {}", path.display(), other)),
    }
}

/// Reads a PCM16 or IEEE float32 RIFF/WAVE file of any channel count.
pub fn read_wav(path: impl AsRef<Path>) -> Result<MultichannelWave> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    // Once the file is open, any short read means a malformed stream.
    let mut reader = WavReader::new(BufReader::new(file)).map_err(|e| format_err(path, e))?;
    let spec = reader.spec();
    let m = spec.channels as usize;
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (HoundFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>(),
        (HoundFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32768.0))
            .collect::<std::result::Result<_, _>>(),
        (fmt, bits) => {
            return Err(Error::Format(format!(
                "{}: unsupported encoding {:?}/{} bits",
                path.display(),
                fmt,
                bits
            )))
        }
    }
    .map_err(|e| format_err(path, e))?;
    if m == 0 || interleaved.len() % m != 0 {
        return Err(Error::Format(format!(
            "{}: sample count not a multiple of channel count",
            path.display()
        )));
    }
    let mut channels = vec![Vec::with_capacity(interleaved.len() / m); m];
    for (i, v) in interleaved.into_iter().enumerate() {
        channels[i % m].push(v);
    }
    MultichannelWave::new(channels, spec.sample_rate)
}

/// Writes `wave` interleaved. PCM16 clips to full scale.
pub fn write_wav(
    path: impl AsRef<Path>,
    wave: &MultichannelWave,
    format: SampleFormat,
) -> Result<()> {
    let path = path.as_ref();
    let (bits, sample_format) = match format {
        SampleFormat::Pcm16 => (16, HoundFormat::Int),
        SampleFormat::Float32 => (32, HoundFormat::Float),
    };
    let spec = WavSpec {
        channels: wave.num_channels() as u16,
        sample_rate: wave.sample_rate(),
        bits_per_sample: bits,
        sample_format,
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| write_err(path, e))?;
    for i in 0..wave.len() {
        for c in wave.channels() {
            let r = match format {
                SampleFormat::Float32 => writer.write_sample(c[i] as f32),
                SampleFormat::Pcm16 => {
                    let q = (c[i] * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                    writer.write_sample(q)
                }
            };
            r.map_err(|e| write_err(path, e))?;
        }
    }
    writer.finalize().map_err(|e| write_err(path, e))
}
