//! WAV decoding and sample-rate conversion.
//!
//! [`load_wav`] is bit-faithful: integer PCM is scaled by the magnitude of
//! the signed type's minimum (so `-32768` maps to exactly `-1.0`), channels
//! are averaged sample-by-sample and nothing is resampled. Callers that need
//! the canonical 44.1 kHz rate call [`resample`] explicitly.

use std::io::{Read, Seek};
use std::path::Path;

use crate::error::{Error, Result};

/// Canonical recording rate of the source corpus.
pub const CANONICAL_RATE: u32 = 44_100;

/// Lowest sample rate accepted anywhere in the toolkit.
pub const MIN_SAMPLE_RATE: u32 = 8_000;

/// Mono recording normalized to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f32>,
    sample_rate: u32,
    source_id: String,
}

impl AudioClip {
    /// Build a clip, checking the invariants (non-empty, finite, in range,
    /// rate at least 8 kHz).
    pub fn new(samples: Vec<f32>, sample_rate: u32, source_id: impl Into<String>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyAudio);
        }
        if sample_rate < MIN_SAMPLE_RATE {
            return Err(Error::InvalidParameter(format!(
                "sample rate {sample_rate} Hz below {MIN_SAMPLE_RATE}"
            )));
        }
        if let Some(pos) = samples.iter().position(|s| !s.is_finite() || s.abs() > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "sample {pos} = {} is not a finite value in [-1, 1]",
                samples[pos]
            )));
        }
        Ok(Self { samples, sample_rate, source_id: source_id.into() })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn with_source_id(mut self, id: impl Into<String>) -> Self {
        self.source_id = id.into();
        self
    }

    /// Multiply every sample by `gain`, clamping to `[-1, 1]`.
    pub fn scaled(&self, gain: f32) -> Self {
        let samples = self.samples.iter().map(|s| (s * gain).clamp(-1.0, 1.0)).collect();
        Self { samples, sample_rate: self.sample_rate, source_id: self.source_id.clone() }
    }
}

/// Decode a PCM or IEEE-float WAV file into a mono clip.
///
/// The file stem becomes the clip's `source_id`.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    decode_wav(std::io::BufReader::new(file), id)
}

/// Decode WAV bytes from any seekable reader.
pub fn decode_wav<R: Read + Seek>(reader: R, source_id: impl Into<String>) -> Result<AudioClip> {
    let mut wav = hound::WavReader::new(reader).map_err(map_hound)?;
    let spec = wav.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::CorruptHeader("zero channels".into()));
    }

    let interleaved: Vec<f32> = match spec.sample_format {
        hound::SampleFormat::Float => {
            if spec.bits_per_sample != 32 {
                return Err(Error::UnsupportedEncoding(format!(
                    "{}-bit float",
                    spec.bits_per_sample
                )));
            }
            wav.samples::<f32>()
                .map(|s| s.map_err(map_hound))
                .collect::<Result<_>>()?
        }
        hound::SampleFormat::Int => {
            let bits = spec.bits_per_sample;
            if !matches!(bits, 8 | 16 | 24 | 32) {
                return Err(Error::UnsupportedEncoding(format!("{bits}-bit PCM")));
            }
            let scale = 2f64.powi(i32::from(bits) - 1);
            wav.samples::<i32>()
                .map(|s| s.map(|v| (f64::from(v) / scale) as f32).map_err(map_hound))
                .collect::<Result<_>>()?
        }
    };

    if interleaved.len() < channels {
        return Err(Error::EmptyAudio);
    }
    if interleaved.len() % channels != 0 {
        return Err(Error::CorruptHeader("data length is not a whole number of frames".into()));
    }
    if interleaved.iter().any(|s| !s.is_finite()) {
        return Err(Error::CorruptHeader("non-finite float sample".into()));
    }

    let samples: Vec<f32> = if channels == 1 {
        interleaved.into_iter().map(|s| s.clamp(-1.0, 1.0)).collect()
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| {
                let sum: f64 = frame.iter().map(|&s| f64::from(s)).sum();
                ((sum / channels as f64) as f32).clamp(-1.0, 1.0)
            })
            .collect()
    };

    AudioClip::new(samples, spec.sample_rate, source_id).map_err(|e| match e {
        Error::InvalidParameter(m) => Error::CorruptHeader(m),
        other => other,
    })
}

fn map_hound(err: hound::Error) -> Error {
    match err {
        hound::Error::Unsupported => Error::UnsupportedEncoding("compressed or unknown format tag".into()),
        hound::Error::FormatError(m) => Error::CorruptHeader(m.to_string()),
        hound::Error::IoError(e) => Error::CorruptHeader(format!("truncated file: {e}")),
        other => Error::CorruptHeader(other.to_string()),
    }
}

/// Sample encoding used when writing WAV files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

/// Encode a clip as a mono WAV file in memory.
pub fn encode_wav(clip: &AudioClip, encoding: WavEncoding) -> Result<Vec<u8>> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: match encoding {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Float32 => 32,
        },
        sample_format: match encoding {
            WavEncoding::Pcm16 => hound::SampleFormat::Int,
            WavEncoding::Float32 => hound::SampleFormat::Float,
        },
    };
    let mut buf = std::io::Cursor::new(Vec::new());
    {
        let mut writer = hound::WavWriter::new(&mut buf, spec).map_err(map_hound)?;
        for &s in &clip.samples {
            match encoding {
                WavEncoding::Pcm16 => {
                    let v = (f64::from(s) * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                    writer.write_sample(v).map_err(map_hound)?;
                }
                WavEncoding::Float32 => writer.write_sample(s).map_err(map_hound)?,
            }
        }
        writer.finalize().map_err(map_hound)?;
    }
    Ok(buf.into_inner())
}

/// Kaiser-windowed sinc kernel half-width, in samples of the lower rate.
const KERNEL_ZERO_CROSSINGS: usize = 64;
const KAISER_BETA: f64 = 9.0;
/// Cutoff as a fraction of the lower of the two rates; the passband ends at
/// 0.45 and the stopband starts at 0.5.
const CUTOFF_FRACTION: f64 = 0.475;
/// Above this many phases the kernel is evaluated per output sample instead
/// of from a precomputed table.
const MAX_TABLE_PHASES: u64 = 2048;

/// Windowed-sinc polyphase resampling to `target_rate`.
///
/// Output length is `round(len * target / source)`; samples beyond either end
/// of the input are treated as zero.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    if target_rate < MIN_SAMPLE_RATE {
        return Err(Error::InvalidParameter(format!(
            "target rate {target_rate} Hz below {MIN_SAMPLE_RATE}"
        )));
    }
    let src = u64::from(clip.sample_rate);
    let dst = u64::from(target_rate);
    if src == dst {
        return Ok(clip.clone());
    }

    let g = gcd(src, dst);
    let up = dst / g; // phases
    let down = src / g;
    let n_in = clip.samples.len() as u64;
    let n_out = (n_in * dst + src / 2) / src;

    // Kernel expressed in input-sample units.
    let ratio = (dst as f64 / src as f64).min(1.0);
    let fc = CUTOFF_FRACTION * ratio; // cycles per input sample
    let half = (KERNEL_ZERO_CROSSINGS as f64 / ratio).ceil() as i64;
    let kernel = |x: f64| -> f64 {
        if x.abs() >= half as f64 {
            return 0.0;
        }
        2.0 * fc * sinc(2.0 * fc * x) * kaiser(x / half as f64, KAISER_BETA)
    };

    let taps = (2 * half) as usize;
    let table: Option<Vec<f64>> = (up <= MAX_TABLE_PHASES).then(|| {
        let mut t = Vec::with_capacity(up as usize * taps);
        for p in 0..up {
            let frac = p as f64 / up as f64;
            for j in 0..taps as i64 {
                let k = j - half + 1;
                t.push(kernel(frac - k as f64));
            }
        }
        t
    });

    let input = &clip.samples;
    let mut out = Vec::with_capacity(n_out as usize);
    for n in 0..n_out {
        let pos = n * down;
        let base = (pos / up) as i64;
        let phase = pos % up;
        let mut acc = 0.0f64;
        for j in 0..taps as i64 {
            let k = base + j - half + 1;
            if k < 0 || k >= n_in as i64 {
                continue;
            }
            let w = match &table {
                Some(t) => t[phase as usize * taps + j as usize],
                None => kernel(phase as f64 / up as f64 - (j - half + 1) as f64),
            };
            acc += w * f64::from(input[k as usize]);
        }
        out.push((acc as f32).clamp(-1.0, 1.0));
    }
    AudioClip::new(out, target_rate, clip.source_id.clone())
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Kaiser window evaluated at `t` in `[-1, 1]`.
fn kaiser(t: f64, beta: f64) -> f64 {
    let arg = (1.0 - t * t).max(0.0).sqrt();
    bessel_i0(beta * arg) / bessel_i0(beta)
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..64 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, rate: u32, secs: f64, amp: f64) -> AudioClip {
        let n = (secs * rate as f64).round() as usize;
        let s = (0..n)
            .map(|i| (amp * (2.0 * std::f64::consts::PI * freq * i as f64 / rate as f64).sin()) as f32)
            .collect();
        AudioClip::new(s, rate, "sine").unwrap()
    }

    /// Minimal RIFF writer used to build fixtures independently of hound.
    fn riff(format_tag: u16, channels: u16, rate: u32, bits: u16, data: &[u8]) -> Vec<u8> {
        let block = channels * bits / 8;
        let mut v = Vec::new();
        v.extend_from_slice(b"RIFF");
        v.extend_from_slice(&(36 + data.len() as u32).to_le_bytes());
        v.extend_from_slice(b"WAVEfmt ");
        v.extend_from_slice(&16u32.to_le_bytes());
        v.extend_from_slice(&format_tag.to_le_bytes());
        v.extend_from_slice(&channels.to_le_bytes());
        v.extend_from_slice(&rate.to_le_bytes());
        v.extend_from_slice(&(rate * u32::from(block)).to_le_bytes());
        v.extend_from_slice(&block.to_le_bytes());
        v.extend_from_slice(&bits.to_le_bytes());
        v.extend_from_slice(b"data");
        v.extend_from_slice(&(data.len() as u32).to_le_bytes());
        v.extend_from_slice(data);
        v
    }

    fn decode(bytes: Vec<u8>) -> Result<AudioClip> {
        decode_wav(std::io::Cursor::new(bytes), "t")
    }

    #[test]
    fn int16_extremes_scale_by_32768() {
        let data: Vec<u8> = [-32768i16, 32767, 0, 16384].iter().flat_map(|v| v.to_le_bytes()).collect();
        let clip = decode(riff(1, 1, 44_100, 16, &data)).unwrap();
        assert_eq!(clip.samples(), &[-1.0, 32767.0 / 32768.0, 0.0, 0.5]);
        assert!((clip.samples()[1] - 0.999_969_48).abs() < 1e-8);
    }

    #[test]
    fn stereo_opposite_channels_cancel() {
        let mut data = Vec::new();
        for _ in 0..100 {
            data.extend_from_slice(&16384i16.to_le_bytes());
            data.extend_from_slice(&(-16384i16).to_le_bytes());
        }
        let clip = decode(riff(1, 2, 44_100, 16, &data)).unwrap();
        assert_eq!(clip.len(), 100);
        assert!(clip.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn decodes_8_24_32_bit_and_float() {
        // 8-bit PCM is unsigned with a 128 offset.
        let clip = decode(riff(1, 1, 8_000, 8, &[0, 128, 255])).unwrap();
        assert_eq!(clip.samples(), &[-1.0, 0.0, 127.0 / 128.0]);

        let data: Vec<u8> = [-8_388_608i32, 4_194_304].iter().flat_map(|v| v.to_le_bytes()[..3].to_vec()).collect();
        let clip = decode(riff(1, 1, 8_000, 24, &data)).unwrap();
        assert_eq!(clip.samples(), &[-1.0, 0.5]);

        let data: Vec<u8> = [i32::MIN, 1 << 30].iter().flat_map(|v| v.to_le_bytes()).collect();
        let clip = decode(riff(1, 1, 8_000, 32, &data)).unwrap();
        assert_eq!(clip.samples(), &[-1.0, 0.5]);

        let data: Vec<u8> = [0.25f32, -0.75].iter().flat_map(|v| v.to_le_bytes()).collect();
        let clip = decode(riff(3, 1, 8_000, 32, &data)).unwrap();
        assert_eq!(clip.samples(), &[0.25, -0.75]);
    }

    #[test]
    fn compressed_is_unsupported() {
        // format tag 2 = MS ADPCM
        let err = decode(riff(2, 1, 8_000, 16, &[0, 0, 0, 0])).unwrap_err();
        assert!(matches!(err, Error::UnsupportedEncoding(_)), "{err:?}");
        // format tag 0x55 = MPEG layer 3
        let err = decode(riff(0x55, 1, 8_000, 16, &[0, 0])).unwrap_err();
        assert!(matches!(err, Error::UnsupportedEncoding(_)), "{err:?}");
    }

    #[test]
    fn garbage_is_corrupt_header() {
        let err = decode(b"RIFX1234WAVEjunk".to_vec()).unwrap_err();
        assert!(matches!(err, Error::CorruptHeader(_)), "{err:?}");
        let mut truncated = riff(1, 1, 8_000, 16, &[0, 0, 0, 0]);
        truncated.truncate(20);
        assert!(matches!(decode(truncated).unwrap_err(), Error::CorruptHeader(_)));
    }

    #[test]
    fn empty_data_chunk_is_empty_audio() {
        let err = decode(riff(1, 1, 8_000, 16, &[])).unwrap_err();
        assert!(matches!(err, Error::EmptyAudio), "{err:?}");
    }

    #[test]
    fn decode_is_deterministic() {
        let data: Vec<u8> = (0..1000i16).flat_map(|v| (v * 31).to_le_bytes()).collect();
        let bytes = riff(1, 1, 22_050, 16, &data);
        assert_eq!(decode(bytes.clone()).unwrap(), decode(bytes).unwrap());
    }

    #[test]
    fn pcm16_encode_roundtrip() {
        let clip = AudioClip::new(vec![-1.0, -0.5, 0.0, 0.25, 32767.0 / 32768.0], 44_100, "t").unwrap();
        let back = decode(encode_wav(&clip, WavEncoding::Pcm16).unwrap()).unwrap();
        assert_eq!(back.samples(), clip.samples());
        let back = decode(encode_wav(&clip, WavEncoding::Float32).unwrap()).unwrap();
        assert_eq!(back.samples(), clip.samples());
    }

    #[test]
    fn clip_rejects_low_rate_and_empty() {
        assert!(matches!(AudioClip::new(vec![], 44_100, "x"), Err(Error::EmptyAudio)));
        assert!(AudioClip::new(vec![0.0], 4_000, "x").is_err());
        assert!(AudioClip::new(vec![1.5], 44_100, "x").is_err());
    }

    #[test]
    fn resample_identity() {
        let clip = sine(440.0, 44_100, 0.1, 0.5);
        assert_eq!(resample(&clip, 44_100).unwrap(), clip);
    }

    #[test]
    fn resample_length_formula() {
        let clip = sine(440.0, 22_050, 1.0, 0.5);
        let out = resample(&clip, 44_100).unwrap();
        assert!((out.len() as i64 - 44_100).abs() <= 1);
        let out = resample(&sine(100.0, 44_100, 0.5, 0.5), 48_000).unwrap();
        assert_eq!(out.len(), 24_000);
        assert!(resample(&clip, 7_999).is_err());
    }

    #[test]
    fn upsampled_sine_matches_analytic() {
        let clip = sine(440.0, 22_050, 1.0, 0.8);
        let out = resample(&clip, 44_100).unwrap();
        let oracle = sine(440.0, 44_100, 1.0, 0.8);
        let n = out.len().min(oracle.len());
        let worst = (100..n - 100)
            .map(|i| (out.samples()[i] - oracle.samples()[i]).abs())
            .fold(0.0f32, f32::max);
        assert!(worst < 1e-3, "max error {worst}");
    }

    #[test]
    fn down_up_roundtrip_reconstructs_bandlimited() {
        let rate = 22_050;
        let n = rate as usize;
        let s: Vec<f32> = (0..n)
            .map(|i| {
                let t = i as f64 / rate as f64;
                (0.3 * (2.0 * std::f64::consts::PI * 440.0 * t).sin()
                    + 0.2 * (2.0 * std::f64::consts::PI * 1_500.0 * t + 0.3).sin()
                    + 0.1 * (2.0 * std::f64::consts::PI * 3_100.0 * t + 1.1).sin()) as f32
            })
            .collect();
        let x = AudioClip::new(s, rate, "x").unwrap();
        let up = resample(&x, 2 * rate).unwrap();
        let back = resample(&up, rate).unwrap();
        assert_eq!(back.len(), x.len());
        let worst = (100..n - 100)
            .map(|i| (back.samples()[i] - x.samples()[i]).abs())
            .fold(0.0f32, f32::max);
        assert!(worst < 1e-3, "max error {worst}");
    }

    #[test]
    fn passband_ripple_below_tenth_db() {
        // 44.1k -> 32k: passband edge 0.45 * 32000 = 14.4 kHz.
        for &freq in &[1_000.0, 5_000.0, 10_000.0, 14_000.0] {
            let clip = sine(freq, 44_100, 0.5, 0.5);
            let out = resample(&clip, 32_000).unwrap();
            let s = &out.samples()[400..out.len() - 400];
            let rms = (s.iter().map(|v| f64::from(*v).powi(2)).sum::<f64>() / s.len() as f64).sqrt();
            let db = 20.0 * (rms / (0.5 / 2f64.sqrt())).log10();
            assert!(db.abs() < 0.1, "{freq} Hz gain {db} dB");
        }
    }
}
