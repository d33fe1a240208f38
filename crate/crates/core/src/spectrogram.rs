//! STFT power spectrogram, frequency crop, 8-bit image export and the
//! frame/time mapping used to convert between pixel columns and seconds.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::{Error, Result};

/// Taper applied to each STFT segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Hann,
    Rectangular,
}

impl Window {
    /// Periodic window coefficients of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
                .collect(),
            Window::Rectangular => vec![1.0; n],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrogramParams {
    pub segment_len: usize,
    pub overlap: usize,
    pub max_freq_hz: f64,
    pub window: Window,
    pub db_floor: f64,
}

impl Default for SpectrogramParams {
    fn default() -> Self {
        Self { segment_len: 4096, overlap: 3200, max_freq_hz: 2000.0, window: Window::Hann, db_floor: -100.0 }
    }
}

impl SpectrogramParams {
    pub fn hop(&self) -> usize {
        self.segment_len - self.overlap
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        if self.segment_len == 0 || self.overlap >= self.segment_len {
            return Err(Error::InvalidParameter(format!(
                "overlap {} must be below segment length {}",
                self.overlap, self.segment_len
            )));
        }
        if !(self.max_freq_hz > 0.0 && self.max_freq_hz <= sample_rate as f64 / 2.0) {
            return Err(Error::InvalidParameter(format!(
                "max_freq_hz {} must be in (0, {}]",
                self.max_freq_hz,
                sample_rate as f64 / 2.0
            )));
        }
        if !self.db_floor.is_finite() {
            return Err(Error::InvalidParameter("db_floor must be finite".into()));
        }
        Ok(())
    }

    /// Number of bins whose center frequency is strictly below the crop ceiling.
    pub fn n_bins(&self, sample_rate: u32) -> usize {
        let bin_hz = sample_rate as f64 / self.segment_len as f64;
        let below = (self.max_freq_hz / bin_hz).ceil() as usize;
        below.min(self.segment_len / 2 + 1)
    }

    pub fn n_frames(&self, n_samples: usize) -> usize {
        if n_samples < self.segment_len {
            0
        } else {
            (n_samples - self.segment_len) / self.hop() + 1
        }
    }
}

/// Power spectrogram in dB, stored bin-major: `values[bin * n_frames + frame]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrogram {
    values: Vec<f64>,
    n_bins: usize,
    n_frames: usize,
    pub bin_hz: f64,
    pub hop_s: f64,
    pub source_id: String,
    pub duration_s: f64,
}

/// Added to power before taking the log.
pub const POWER_EPS: f64 = 1e-10;

impl Spectrogram {
    /// Assemble a spectrogram from raw dB values (bin-major).
    pub fn from_parts(
        values: Vec<f64>,
        n_bins: usize,
        n_frames: usize,
        bin_hz: f64,
        hop_s: f64,
        source_id: impl Into<String>,
        duration_s: f64,
    ) -> Result<Self> {
        if values.len() != n_bins * n_frames || n_bins == 0 || n_frames == 0 {
            return Err(Error::InvalidParameter(format!(
                "{} values do not form a non-empty {n_bins}x{n_frames} matrix",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite spectrogram value".into()));
        }
        if !(hop_s > 0.0 && bin_hz > 0.0) {
            return Err(Error::InvalidParameter("hop_s and bin_hz must be positive".into()));
        }
        Ok(Self { values, n_bins, n_frames, bin_hz, hop_s, source_id: source_id.into(), duration_s })
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn get(&self, bin: usize, frame: usize) -> f64 {
        self.values[bin * self.n_frames + frame]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Row of one frequency bin across all frames.
    pub fn bin_row(&self, bin: usize) -> &[f64] {
        &self.values[bin * self.n_frames..(bin + 1) * self.n_frames]
    }

    pub fn bin_center_hz(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_hz
    }

    /// Left edge of frame `f` in seconds.
    pub fn frame_to_time(&self, f: usize) -> Result<f64> {
        if f >= self.n_frames {
            return Err(Error::OutOfRange { what: "frame", value: f as f64, max: (self.n_frames - 1) as f64 });
        }
        Ok(f as f64 * self.hop_s)
    }

    /// Frame whose left edge is the last one at or before `t`, clamped to the
    /// final frame.
    pub fn time_to_frame(&self, t: f64) -> Result<usize> {
        if !(t >= 0.0 && t <= self.duration_s + 1e-9) {
            return Err(Error::OutOfRange { what: "time", value: t, max: self.duration_s });
        }
        // Guard against t = f * hop_s landing just below f after division.
        let x = t / self.hop_s;
        let f = if (x - x.round()).abs() < 1e-9 { x.round() } else { x.floor() };
        Ok((f as usize).min(self.n_frames - 1))
    }

    /// Raw dump: little-endian f32 values, bin-major, plus the sidecar JSON.
    pub fn to_raw(&self) -> (Vec<u8>, String) {
        let bytes = self.values.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
        let sidecar = serde_json::json!({
            "n_bins": self.n_bins,
            "n_frames": self.n_frames,
            "bin_hz": self.bin_hz,
            "hop_s": self.hop_s,
        });
        (bytes, format!("{sidecar}\n"))
    }
}

/// Compute the cropped power spectrogram of a clip.
///
/// Frame `f` covers samples `[f*hop, f*hop + segment_len)`; a trailing
/// partial segment is dropped. Frames are computed in parallel and assembled
/// in order, so the result does not depend on the thread count.
pub fn compute_spectrogram(clip: &AudioClip, params: &SpectrogramParams) -> Result<Spectrogram> {
    params.validate(clip.sample_rate())?;
    let n = params.segment_len;
    if clip.len() < n {
        return Err(Error::ClipTooShort { len: clip.len(), segment_len: n });
    }
    let hop = params.hop();
    let n_frames = params.n_frames(clip.len());
    let n_bins = params.n_bins(clip.sample_rate());
    let window = params.window.coefficients(n);
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(n);
    let samples = clip.samples();

    let frames: Vec<Vec<f64>> = (0..n_frames)
        .into_par_iter()
        .map_init(
            || vec![Complex::new(0.0, 0.0); n],
            |buf, f| {
                let seg = &samples[f * hop..f * hop + n];
                for ((b, &s), &w) in buf.iter_mut().zip(seg).zip(&window) {
                    *b = Complex::new(f64::from(s) * w, 0.0);
                }
                fft.process(buf);
                buf[..n_bins]
                    .iter()
                    .map(|c| (10.0 * (c.norm_sqr() + POWER_EPS).log10()).max(params.db_floor))
                    .collect()
            },
        )
        .collect();

    let mut values = vec![0.0; n_bins * n_frames];
    for (f, col) in frames.iter().enumerate() {
        for (b, &v) in col.iter().enumerate() {
            values[b * n_frames + f] = v;
        }
    }
    Ok(Spectrogram {
        values,
        n_bins,
        n_frames,
        bin_hz: clip.sample_rate() as f64 / n as f64,
        hop_s: hop as f64 / clip.sample_rate() as f64,
        source_id: clip.source_id().to_string(),
        duration_s: clip.duration_s(),
    })
}

/// Full-band power (all `segment_len` bins, linear) of one windowed frame.
pub fn frame_power_spectrum(frame: &[f64], window: Window) -> Vec<f64> {
    let n = frame.len();
    let w = window.coefficients(n);
    let mut buf: Vec<Complex<f64>> = frame.iter().zip(&w).map(|(&x, &w)| Complex::new(x * w, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf.iter().map(|c| c.norm_sqr()).collect()
}

/// 8-bit three-channel raster, row-major RGB.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image3 {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Image3 {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0; width * height * 3] }
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let data = std::iter::repeat_n(rgb, width * height).flatten().collect();
        Self { width, height, data }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        if x < self.width && y < self.height {
            let i = (y * self.width + x) * 3;
            self.data[i..i + 3].copy_from_slice(&rgb);
        }
    }

    /// Encode as an 8-bit RGB PNG.
    pub fn to_png(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut writer = enc
                .write_header()
                .map_err(|e| Error::InvalidParameter(format!("png header: {e}")))?;
            writer
                .write_image_data(&self.data)
                .map_err(|e| Error::InvalidParameter(format!("png data: {e}")))?;
        }
        Ok(out)
    }
}

/// Min-max normalize to 0..=255 (round half up), low frequencies at the
/// bottom, single channel replicated into RGB. A constant spectrogram maps
/// to an all-zero image.
pub fn to_image(spec: &Spectrogram) -> Image3 {
    let (lo, hi) = spec
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    let mut img = Image3::new(spec.n_frames, spec.n_bins);
    for bin in 0..spec.n_bins {
        let y = spec.n_bins - 1 - bin;
        for f in 0..spec.n_frames {
            let v = if range > 0.0 {
                ((spec.get(bin, f) - lo) / range * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
            } else {
                0
            };
            img.set(f, y, [v, v, v]);
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip(n: usize, rate: u32) -> AudioClip {
        let s = (0..n).map(|i| ((i as f64 * 0.37).sin() * 0.3) as f32).collect();
        AudioClip::new(s, rate, "c").unwrap()
    }

    #[test]
    fn shape_15s_and_10s() {
        let p = SpectrogramParams::default();
        assert_eq!(p.hop(), 896);
        assert_eq!(p.n_frames(661_500), 734);
        assert_eq!(p.n_frames(441_000), 488);
        assert_eq!(p.n_bins(44_100), 186);
    }

    #[test]
    fn zero_signal_hits_floor() {
        let c = AudioClip::new(vec![0.0; 8192], 44_100, "z").unwrap();
        let s = compute_spectrogram(&c, &SpectrogramParams::default()).unwrap();
        assert!(s.values().iter().all(|&v| v == -100.0));
        assert!(to_image(&s).data.iter().all(|&p| p == 0));
    }

    #[test]
    fn too_short() {
        let c = clip(4095, 44_100);
        assert!(matches!(
            compute_spectrogram(&c, &SpectrogramParams::default()),
            Err(Error::ClipTooShort { len: 4095, segment_len: 4096 })
        ));
    }

    #[test]
    fn bad_params() {
        let c = clip(8192, 8_000);
        let p = SpectrogramParams { max_freq_hz: 5000.0, ..Default::default() };
        assert!(compute_spectrogram(&c, &p).is_err());
        let p = SpectrogramParams { overlap: 4096, ..Default::default() };
        assert!(p.validate(44_100).is_err());
    }

    #[test]
    fn frame_time_mapping() {
        let c = clip(44_100 * 3, 44_100);
        let s = compute_spectrogram(&c, &SpectrogramParams::default()).unwrap();
        assert_eq!(s.frame_to_time(0).unwrap(), 0.0);
        assert!((s.frame_to_time(100).unwrap() - 2.031_746_031_746).abs() < 1e-9);
        for f in 0..s.n_frames() {
            assert_eq!(s.time_to_frame(s.frame_to_time(f).unwrap()).unwrap(), f);
        }
        assert!(s.frame_to_time(s.n_frames()).is_err());
        assert!(s.time_to_frame(-0.1).is_err());
        assert!(s.time_to_frame(3.5).is_err());
        assert_eq!(s.time_to_frame(3.0).unwrap(), s.n_frames() - 1);
    }

    #[test]
    fn image_rounding_and_flip() {
        let values = vec![-100.0, -50.0, 0.0, -100.0];
        // 2 bins x 2 frames; bin 0 = [-100, -50], bin 1 = [0, -100]
        let s = Spectrogram::from_parts(values, 2, 2, 10.0, 0.02, "x", 1.0).unwrap();
        let img = to_image(&s);
        // bin 0 is at the bottom row
        assert_eq!(img.pixel(0, 1), [0, 0, 0]);
        assert_eq!(img.pixel(1, 1), [128, 128, 128]);
        assert_eq!(img.pixel(0, 0), [255, 255, 255]);
    }

    #[test]
    fn sign_flip_invariance() {
        let c = clip(10_000, 44_100);
        let neg = AudioClip::new(c.samples().iter().map(|s| -s).collect(), 44_100, "c").unwrap();
        let p = SpectrogramParams::default();
        assert_eq!(compute_spectrogram(&c, &p).unwrap(), compute_spectrogram(&neg, &p).unwrap());
    }

    #[test]
    fn png_encodes() {
        let img = Image3::filled(3, 2, [1, 2, 3]);
        let bytes = img.to_png().unwrap();
        assert_eq!(&bytes[1..4], b"PNG");
    }

    #[test]
    fn raw_dump_layout() {
        let s = Spectrogram::from_parts(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 2, 3, 10.0, 0.5, "x", 2.0).unwrap();
        let (bytes, sidecar) = s.to_raw();
        assert_eq!(bytes.len(), 24);
        assert_eq!(f32::from_le_bytes(bytes[12..16].try_into().unwrap()), 4.0);
        let v: serde_json::Value = serde_json::from_str(&sidecar).unwrap();
        assert_eq!(v["n_bins"], 2);
        assert_eq!(v["n_frames"], 3);
    }
}
