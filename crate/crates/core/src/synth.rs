//! Synthetic lung-sound recordings with exactly known phase boundaries.
//!
//! Each phase is a burst of band-limited Gaussian noise with 50 ms
//! raised-cosine ramps, scaled so its RMS over the phase window equals the
//! requested level, laid over a white-noise floor. Phases alternate
//! inspiration, expiration, pause, starting with inspiration.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::annotation::{quantize, write_annotation_json, Annotation};
use crate::audio::{encode_wav, AudioClip, WavEncoding, CANONICAL_RATE};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::phase::{PhaseBox, PhaseClass};

/// Longest file the generator will produce, in seconds.
pub const MAX_DURATION_S: f64 = 15.0;
/// Raised-cosine onset/offset length.
pub const RAMP_S: f64 = 0.05;

/// A duration drawn uniformly from `[mean - jitter, mean + jitter]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jittered {
    pub mean: f64,
    pub jitter: f64,
}

impl Jittered {
    pub const fn fixed(mean: f64) -> Self {
        Self { mean, jitter: 0.0 }
    }

    pub const fn new(mean: f64, jitter: f64) -> Self {
        Self { mean, jitter }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.jitter == 0.0 {
            self.mean
        } else {
            rng.random_range(self.mean - self.jitter..=self.mean + self.jitter)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreathSpec {
    pub n_cycles: usize,
    pub insp_duration_s: Jittered,
    pub exp_duration_s: Jittered,
    pub pause_s: Jittered,
    /// Silence before the first inspiration.
    pub lead_s: Jittered,
    pub insp_level_db: f64,
    pub exp_level_db: f64,
    pub noise_floor_db: f64,
    pub band_hz: (f64, f64),
    pub duration_s: f64,
    pub sample_rate: u32,
    pub seed: u64,
}

impl Default for BreathSpec {
    fn default() -> Self {
        Self {
            n_cycles: 3,
            insp_duration_s: Jittered::fixed(1.2),
            exp_duration_s: Jittered::fixed(1.5),
            pause_s: Jittered::fixed(0.8),
            lead_s: Jittered::fixed(0.0),
            insp_level_db: -20.0,
            exp_level_db: -26.0,
            noise_floor_db: -50.0,
            band_hz: (100.0, 2000.0),
            duration_s: MAX_DURATION_S,
            sample_rate: CANONICAL_RATE,
            seed: 0,
        }
    }
}

impl BreathSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        for (name, j, allow_zero) in [
            ("insp_duration_s", self.insp_duration_s, false),
            ("exp_duration_s", self.exp_duration_s, false),
            ("pause_s", self.pause_s, false),
            ("lead_s", self.lead_s, true),
        ] {
            let ok_mean = if allow_zero { j.mean >= 0.0 } else { j.mean > 0.0 };
            let ok_jitter = j.jitter >= 0.0 && (j.jitter < j.mean || (allow_zero && j.jitter == 0.0));
            if !(ok_mean && ok_jitter && j.mean.is_finite()) {
                return bad(format!("{name}: need mean > 0 and 0 <= jitter < mean, got {j:?}"));
            }
        }
        if !(self.insp_level_db > self.noise_floor_db && self.exp_level_db > self.noise_floor_db) {
            return bad("phase levels must exceed the noise floor".into());
        }
        if self.insp_level_db > 0.0 || self.exp_level_db > 0.0 {
            return bad("phase levels must be at or below full scale".into());
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        let (lo, hi) = self.band_hz;
        if !(lo >= 0.0 && lo < hi && hi <= nyquist) {
            return bad(format!("band {lo}..{hi} Hz must lie within 0..{nyquist}"));
        }
        if self.sample_rate < crate::audio::MIN_SAMPLE_RATE {
            return bad(format!("sample rate {} too low", self.sample_rate));
        }
        if !(self.duration_s > 0.0) {
            return bad("duration must be positive".into());
        }
        if self.duration_s > MAX_DURATION_S {
            return Err(Error::SpecOverflow(format!(
                "duration {} s exceeds {MAX_DURATION_S} s",
                self.duration_s
            )));
        }
        Ok(())
    }
}

/// Synthesize one file and its ground truth.
pub fn synth_file(spec: &BreathSpec, file_id: &str) -> Result<(AudioClip, Annotation)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let rate = spec.sample_rate as f64;

    // Phase plan in microsecond-quantized seconds.
    let mut boxes = Vec::with_capacity(2 * spec.n_cycles);
    let mut t = quantize(spec.lead_s.sample(&mut rng));
    for cycle in 0..spec.n_cycles {
        if cycle > 0 {
            t = quantize(t + spec.pause_s.sample(&mut rng));
        }
        for (class, dur) in [
            (PhaseClass::Inspiration, spec.insp_duration_s),
            (PhaseClass::Expiration, spec.exp_duration_s),
        ] {
            let end = quantize(t + dur.sample(&mut rng));
            boxes.push(PhaseBox::annotated(class, t, end));
            t = end;
        }
    }
    if t > spec.duration_s {
        return Err(Error::SpecOverflow(format!(
            "{} cycles end at {t:.3} s, beyond the {} s file",
            spec.n_cycles, spec.duration_s
        )));
    }

    let n = (spec.duration_s * rate).round() as usize;
    let floor_rms = db_to_rms(spec.noise_floor_db);
    let mut signal: Vec<f64> = (0..n)
        .map(|_| floor_rms * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
        .collect();

    let mut planner = FftPlanner::new();
    for b in &boxes {
        let i0 = (b.start_s * rate).round() as usize;
        let i1 = ((b.end_s * rate).round() as usize).min(n);
        if i1 <= i0 {
            continue;
        }
        let level = match b.class {
            PhaseClass::Inspiration => spec.insp_level_db,
            PhaseClass::Expiration => spec.exp_level_db,
        };
        let burst = band_noise_burst(i1 - i0, spec.sample_rate, spec.band_hz, db_to_rms(level), &mut rng, &mut planner);
        for (s, v) in signal[i0..i1].iter_mut().zip(burst) {
            *s += v;
        }
    }

    let samples = signal.into_iter().map(|v| v.clamp(-1.0, 1.0) as f32).collect();
    let clip = AudioClip::new(samples, spec.sample_rate, file_id)?;
    let duration = quantize(clip.duration_s());
    let ann = Annotation::new(file_id, duration, "synthetic", boxes)?;
    Ok((clip, ann))
}

fn db_to_rms(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// Gaussian noise restricted to `band` by zeroing FFT bins, ramped and
/// scaled to `rms` over its full length.
fn band_noise_burst(
    len: usize,
    rate: u32,
    band: (f64, f64),
    rms: f64,
    rng: &mut impl Rng,
    planner: &mut FftPlanner<f64>,
) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = (0..len)
        .map(|_| Complex::new(<StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng), 0.0))
        .collect();
    planner.plan_fft_forward(len).process(&mut buf);
    let bin_hz = rate as f64 / len as f64;
    for (k, c) in buf.iter_mut().enumerate() {
        let freq = k.min(len - k) as f64 * bin_hz;
        if freq < band.0 || freq > band.1 {
            *c = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let mut out: Vec<f64> = buf.iter().map(|c| c.re / len as f64).collect();

    let ramp = ((RAMP_S * rate as f64).round() as usize).min(len / 2);
    for i in 0..ramp {
        let g = 0.5 - 0.5 * (std::f64::consts::PI * (i as f64 + 0.5) / ramp as f64).cos();
        out[i] *= g;
        out[len - 1 - i] *= g;
    }
    let cur = (out.iter().map(|v| v * v).sum::<f64>() / len as f64).sqrt();
    if cur > 0.0 {
        let k = rms / cur;
        out.iter_mut().for_each(|v| *v *= k);
    }
    out
}

/// One entry of a corpus manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub path: String,
    pub duration_s: f64,
}

pub type CorpusManifest = Vec<ManifestEntry>;

/// File id used for the `i`-th spec of a corpus.
pub fn corpus_file_id(i: usize) -> String {
    format!("synth_{i:03}")
}

/// Write one WAV (16-bit PCM) and one annotation JSON per spec, plus
/// `manifest.json`. Files are generated in parallel; output bytes depend only
/// on the specs.
pub fn synth_corpus(specs: &[BreathSpec], out_dir: impl AsRef<Path>) -> Result<CorpusManifest> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let manifest: CorpusManifest = specs
        .par_iter()
        .enumerate()
        .map(|(i, spec)| -> Result<ManifestEntry> {
            let id = corpus_file_id(i);
            let (clip, ann) = synth_file(spec, &id)?;
            let wav_name = format!("{id}.wav");
            write_atomic(out_dir.join(&wav_name), &encode_wav(&clip, WavEncoding::Pcm16)?)?;
            write_atomic(out_dir.join(format!("{id}.json")), write_annotation_json(&ann).as_bytes())?;
            Ok(ManifestEntry { id, path: wav_name, duration_s: clip.duration_s() })
        })
        .collect::<Result<_>>()?;
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    write_atomic(out_dir.join("manifest.json"), text.as_bytes())?;
    Ok(manifest)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<CorpusManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(e.line(), e.to_string()))
}

/// Resolve a manifest entry's WAV path relative to the manifest directory.
pub fn entry_path(manifest_dir: &Path, entry: &ManifestEntry) -> PathBuf {
    manifest_dir.join(&entry.path)
}

/// Specs for a varied corpus of `n` files: per-file mean durations, lead-in
/// and seed are drawn from `seed`; levels put inspiration `snr_db` above the
/// noise floor and expiration 6 dB below inspiration.
pub fn standard_specs(n: usize, n_cycles: usize, snr_db: f64, seed: u64) -> Vec<BreathSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let insp_level = -20.0;
    (0..n)
        .map(|_| BreathSpec {
            n_cycles,
            insp_duration_s: Jittered::new(rng.random_range(0.9..1.4), 0.1),
            exp_duration_s: Jittered::new(rng.random_range(1.2..1.8), 0.1),
            pause_s: Jittered::new(rng.random_range(0.5..1.0), 0.1),
            lead_s: Jittered::fixed(quantize(rng.random_range(0.2..1.0))),
            insp_level_db: insp_level,
            exp_level_db: insp_level - 6.0,
            noise_floor_db: insp_level - snr_db,
            seed: rng.random(),
            ..BreathSpec::default()
        })
        .collect()
}
