//! Mono WAV files: 16-bit PCM or 32-bit float at 16 or 48 kHz.

use std::io::{Cursor, Read, Seek};
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::dsp::{Waveform, SUPPORTED_SAMPLE_RATES};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

fn wav_err(context: &str, e: hound::Error) -> Error {
    Error::Wav(format!("{context}: {e}"))
}

fn decode<R: Read>(reader: WavReader<R>, context: &str) -> Result<Waveform> {
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::Wav(format!(
            "{context}: expected mono, found {} channels",
            spec.channels
        )));
    }
    if !SUPPORTED_SAMPLE_RATES.contains(&spec.sample_rate) {
        return Err(Error::Wav(format!(
            "{context}: unsupported sample rate {} Hz (expected 16000 or 48000)",
            spec.sample_rate
        )));
    }
    let samples = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f32 / 32768.0))
            .collect::<std::result::Result<Vec<_>, _>>(),
        (SampleFormat::Float, 32) => reader.into_samples::<f32>().collect(),
        (format, bits) => {
            return Err(Error::Wav(format!(
                "{context}: unsupported encoding {bits}-bit {format:?} (expected 16-bit PCM or 32-bit float)"
            )))
        }
    }
    .map_err(|e| wav_err(context, e))?;
    Waveform::new(samples, spec.sample_rate).map_err(|e| Error::Wav(format!("{context}: {e}")))
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_bytes(&bytes, &path.display().to_string())
}

pub fn read_wav_bytes(bytes: &[u8]) -> Result<Waveform> {
    decode_bytes(bytes, "<memory>")
}

fn decode_bytes(bytes: &[u8], context: &str) -> Result<Waveform> {
    if bytes.len() < 12 {
        return Err(Error::Wav(format!(
            "{context}: {} bytes is too short for a RIFF/WAVE header",
            bytes.len()
        )));
    }
    let reader = WavReader::new(Cursor::new(bytes)).map_err(|e| wav_err(context, e))?;
    decode(reader, context)
}

fn encode<W: std::io::Write + Seek>(
    writer: W,
    x: &Waveform,
    encoding: WavEncoding,
) -> std::result::Result<(), hound::Error> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: x.sample_rate,
        bits_per_sample: match encoding {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Float32 => 32,
        },
        sample_format: match encoding {
            WavEncoding::Pcm16 => SampleFormat::Int,
            WavEncoding::Float32 => SampleFormat::Float,
        },
    };
    let mut w = WavWriter::new(writer, spec)?;
    for &v in &x.samples {
        match encoding {
            WavEncoding::Pcm16 => w.write_sample((v * 32768.0).round().clamp(-32768.0, 32767.0) as i16)?,
            WavEncoding::Float32 => w.write_sample(v)?,
        }
    }
    w.finalize()
}

pub fn write_wav(path: impl AsRef<Path>, x: &Waveform, encoding: WavEncoding) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    encode(std::io::BufWriter::new(file), x, encoding).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => wav_err(&path.display().to_string(), other),
    })
}

pub fn write_wav_bytes(x: &Waveform, encoding: WavEncoding) -> Result<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    encode(&mut buf, x, encoding).map_err(|e| wav_err("<memory>", e))?;
    Ok(buf.into_inner())
}
