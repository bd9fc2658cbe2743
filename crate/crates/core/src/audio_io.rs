//! WAV (RIFF) decoding to a mono `f64` buffer, plus a small writer used by
//! the synthesis harness and by test fixtures.

use std::fs;
use std::path::Path;

use thiserror::Error;

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a valid WAV file: {0}")]
    Malformed(String),
    #[error("unsupported WAV encoding: format tag {format_tag:#06x}, {bits} bits per sample")]
    UnsupportedEncoding { format_tag: u16, bits: u16 },
    #[error("WAV file contains no audio frames")]
    Empty,
    #[error("invalid audio buffer: {0}")]
    InvalidBuffer(String),
}

/// Mono sample sequence at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidBuffer("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AudioError::InvalidBuffer(format!("sample {i} is not finite")));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// On-disk sample encodings understood by [`load_wav`] and produced by [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    Int8,
    Int16,
    Int24,
    Int32,
    Float32,
    Float64,
}

impl SampleFormat {
    fn from_header(format_tag: u16, bits: u16) -> Result<Self, AudioError> {
        match (format_tag, bits) {
            (FORMAT_PCM, 8) => Ok(Self::Int8),
            (FORMAT_PCM, 16) => Ok(Self::Int16),
            (FORMAT_PCM, 24) => Ok(Self::Int24),
            (FORMAT_PCM, 32) => Ok(Self::Int32),
            (FORMAT_IEEE_FLOAT, 32) => Ok(Self::Float32),
            (FORMAT_IEEE_FLOAT, 64) => Ok(Self::Float64),
            _ => Err(AudioError::UnsupportedEncoding { format_tag, bits }),
        }
    }

    fn format_tag(self) -> u16 {
        match self {
            Self::Float32 | Self::Float64 => FORMAT_IEEE_FLOAT,
            _ => FORMAT_PCM,
        }
    }

    pub fn bytes_per_sample(self) -> usize {
        match self {
            Self::Int8 => 1,
            Self::Int16 => 2,
            Self::Int24 => 3,
            Self::Int32 | Self::Float32 => 4,
            Self::Float64 => 8,
        }
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            Self::Int8 => (b[0] as f64 - 128.0) / 128.0,
            Self::Int16 => i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0,
            Self::Int24 => {
                // sign-extend by placing the 24 bits in the top of an i32
                let v = i32::from_le_bytes([0, b[0], b[1], b[2]]) >> 8;
                v as f64 / 8_388_608.0
            }
            Self::Int32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64 / 2_147_483_648.0,
            Self::Float32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::Float64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }

    fn encode(self, x: f64, out: &mut Vec<u8>) {
        fn quantize(x: f64, full_scale: f64) -> i64 {
            let max = full_scale - 1.0;
            (x * full_scale).round().clamp(-full_scale, max) as i64
        }
        match self {
            Self::Int8 => out.push((quantize(x, 128.0) + 128) as u8),
            Self::Int16 => out.extend_from_slice(&(quantize(x, 32768.0) as i16).to_le_bytes()),
            Self::Int24 => {
                let v = quantize(x, 8_388_608.0) as i32;
                out.extend_from_slice(&v.to_le_bytes()[..3]);
            }
            Self::Int32 => out.extend_from_slice(&(quantize(x, 2_147_483_648.0) as i32).to_le_bytes()),
            Self::Float32 => out.extend_from_slice(&(x as f32).to_le_bytes()),
            Self::Float64 => out.extend_from_slice(&x.to_le_bytes()),
        }
    }
}

struct FmtChunk {
    channels: u16,
    sample_rate: u32,
    block_align: u16,
    format: SampleFormat,
}

fn read_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn read_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn parse_fmt(body: &[u8]) -> Result<FmtChunk, AudioError> {
    if body.len() < 16 {
        return Err(AudioError::Malformed("fmt chunk shorter than 16 bytes".into()));
    }
    let mut format_tag = read_u16(body, 0);
    let channels = read_u16(body, 2);
    let sample_rate = read_u32(body, 4);
    let block_align = read_u16(body, 12);
    let bits = read_u16(body, 14);
    if format_tag == FORMAT_EXTENSIBLE {
        // cbSize(2) validBits(2) channelMask(4) then the subformat GUID,
        // whose first two bytes carry the actual format code
        if body.len() < 26 {
            return Err(AudioError::Malformed("truncated WAVE_FORMAT_EXTENSIBLE header".into()));
        }
        format_tag = read_u16(body, 24);
    }
    let format = SampleFormat::from_header(format_tag, bits)?;
    if channels == 0 {
        return Err(AudioError::Malformed("zero channels".into()));
    }
    if sample_rate == 0 {
        return Err(AudioError::Malformed("zero sample rate".into()));
    }
    if (block_align as usize) < channels as usize * format.bytes_per_sample() {
        return Err(AudioError::Malformed(format!(
            "block align {block_align} too small for {channels} channels of {bits} bits"
        )));
    }
    Ok(FmtChunk {
        channels,
        sample_rate,
        block_align,
        format,
    })
}

/// Decodes an in-memory WAV file, averaging all channels to mono.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioBuffer, AudioError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(AudioError::Malformed("missing RIFF/WAVE header".into()));
    }
    let mut fmt = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = read_u32(bytes, pos + 4) as usize;
        let start = pos + 8;
        // tolerate a data chunk whose declared size overruns the file
        let end = start.saturating_add(size).min(bytes.len());
        match id {
            b"fmt " => fmt = Some(parse_fmt(&bytes[start..end])?),
            b"data" => data = Some(&bytes[start..end]),
            _ => {}
        }
        // chunks are word aligned
        pos = start.saturating_add(size).saturating_add(size & 1);
    }
    let fmt = fmt.ok_or_else(|| AudioError::Malformed("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| AudioError::Malformed("no data chunk".into()))?;

    let frame_bytes = fmt.block_align as usize;
    let width = fmt.format.bytes_per_sample();
    let channels = fmt.channels as usize;
    let frames = data.len() / frame_bytes;
    if frames == 0 {
        return Err(AudioError::Empty);
    }
    let mut samples = Vec::with_capacity(frames);
    for frame in data.chunks_exact(frame_bytes) {
        let sum: f64 = (0..channels)
            .map(|c| fmt.format.decode(&frame[c * width..(c + 1) * width]))
            .sum();
        samples.push(sum / channels as f64);
    }
    AudioBuffer::new(samples, fmt.sample_rate).map_err(|e| AudioError::Malformed(e.to_string()))
}

/// Loads a PCM or IEEE-float WAV file as a mono buffer.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioBuffer, AudioError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| AudioError::Unreadable {
        path: path.display().to_string(),
        source,
    })?;
    decode_wav(&bytes)
}

/// Encodes planar channel data as a WAV byte stream.
///
/// All channels must have the same length.
pub fn encode_wav(channels: &[&[f64]], sample_rate: u32, format: SampleFormat) -> Vec<u8> {
    assert!(!channels.is_empty(), "at least one channel required");
    let frames = channels[0].len();
    assert!(
        channels.iter().all(|c| c.len() == frames),
        "channels must have equal length"
    );
    let n_ch = channels.len() as u16;
    let width = format.bytes_per_sample();
    let block_align = n_ch as usize * width;
    let data_len = frames * block_align;

    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format.format_tag().to_le_bytes());
    out.extend_from_slice(&n_ch.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&((sample_rate as usize * block_align) as u32).to_le_bytes());
    out.extend_from_slice(&(block_align as u16).to_le_bytes());
    out.extend_from_slice(&((width * 8) as u16).to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for i in 0..frames {
        for ch in channels {
            format.encode(ch[i], &mut out);
        }
    }
    if data_len % 2 == 1 {
        out.push(0);
    }
    out
}

pub fn write_wav(
    path: impl AsRef<Path>,
    channels: &[&[f64]],
    sample_rate: u32,
    format: SampleFormat,
) -> std::io::Result<()> {
    fs::write(path, encode_wav(channels, sample_rate, format))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pcm16_bytes(samples: &[i16], channels: u16) -> Vec<u8> {
        let mut out = Vec::new();
        let data_len = samples.len() * 2;
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
        out.extend_from_slice(b"WAVEfmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&8000u32.to_le_bytes());
        out.extend_from_slice(&(8000 * 2 * channels as u32).to_le_bytes());
        out.extend_from_slice(&(2 * channels).to_le_bytes());
        out.extend_from_slice(&16u16.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&(data_len as u32).to_le_bytes());
        for s in samples {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out
    }

    #[test]
    fn mono_pcm16_full_scale_division() {
        let buf = decode_wav(&pcm16_bytes(&[0, 16384, -16384], 1)).unwrap();
        assert_eq!(buf.samples(), &[0.0, 0.5, -0.5]);
        assert_eq!(buf.sample_rate(), 8000);
    }

    #[test]
    fn stereo_identical_channels_equal_either_channel() {
        let buf = decode_wav(&pcm16_bytes(&[100, 100, -2000, -2000, 7, 7], 2)).unwrap();
        assert_eq!(buf.samples(), &[100.0 / 32768.0, -2000.0 / 32768.0, 7.0 / 32768.0]);
    }

    #[test]
    fn stereo_opposite_channels_cancel() {
        let buf = decode_wav(&pcm16_bytes(&[16384, -16384, 16384, -16384], 2)).unwrap();
        assert_eq!(buf.samples(), &[0.0, 0.0]);
    }

    #[test]
    fn every_supported_format_decodes() {
        let signal = [0.0, 0.5, -0.5, 0.25, -1.0];
        for format in [
            SampleFormat::Int8,
            SampleFormat::Int16,
            SampleFormat::Int24,
            SampleFormat::Int32,
            SampleFormat::Float32,
            SampleFormat::Float64,
        ] {
            let bytes = encode_wav(&[&signal], 22050, format);
            let buf = decode_wav(&bytes).unwrap();
            assert_eq!(buf.len(), signal.len(), "{format:?}");
            assert_eq!(buf.samples(), &signal, "{format:?}");
        }
    }

    #[test]
    fn extensible_header_is_accepted() {
        let mut bytes = encode_wav(&[&[0.5, -0.25]], 44100, SampleFormat::Float32);
        // rewrite the fmt chunk as a 40-byte WAVE_FORMAT_EXTENSIBLE chunk
        let mut ext = Vec::new();
        ext.extend_from_slice(&bytes[..16]);
        ext.extend_from_slice(&40u32.to_le_bytes());
        let mut fmt = bytes[20..36].to_vec();
        fmt[0..2].copy_from_slice(&FORMAT_EXTENSIBLE.to_le_bytes());
        ext.extend_from_slice(&fmt);
        ext.extend_from_slice(&22u16.to_le_bytes());
        ext.extend_from_slice(&32u16.to_le_bytes());
        ext.extend_from_slice(&0u32.to_le_bytes());
        ext.extend_from_slice(&FORMAT_IEEE_FLOAT.to_le_bytes());
        ext.extend_from_slice(&[0u8; 14]);
        ext.extend_from_slice(&bytes.split_off(36));
        let buf = decode_wav(&ext).unwrap();
        assert_eq!(buf.samples(), &[0.5, -0.25]);
    }

    #[test]
    fn errors_are_distinct() {
        let missing = load_wav("/nonexistent/dir/file.wav").unwrap_err();
        assert!(matches!(missing, AudioError::Unreadable { .. }));

        let mut compressed = pcm16_bytes(&[1, 2], 1);
        compressed[20..22].copy_from_slice(&2u16.to_le_bytes()); // ADPCM
        assert!(matches!(
            decode_wav(&compressed).unwrap_err(),
            AudioError::UnsupportedEncoding {
                format_tag: 2,
                bits: 16
            }
        ));

        assert!(matches!(
            decode_wav(&pcm16_bytes(&[], 1)).unwrap_err(),
            AudioError::Empty
        ));
        assert!(matches!(
            decode_wav(b"not a wav").unwrap_err(),
            AudioError::Malformed(_)
        ));
    }

    #[test]
    fn buffer_rejects_non_finite_and_zero_rate() {
        assert!(AudioBuffer::new(vec![0.0, f64::NAN], 44100).is_err());
        assert!(AudioBuffer::new(vec![0.0], 0).is_err());
    }
}
