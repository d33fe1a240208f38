//! Phase detectors: an energy-envelope baseline and the JSON-lines boundary
//! for detections computed elsewhere.
//!
//! The baseline tracks mean in-band energy per frame, smooths it, and
//! segments it with a hysteresis pair of thresholds above a percentile noise
//! floor. Segments that contain a clear energy valley (the dip between an
//! inspiration and the expiration that follows it) are split there. Classes
//! are then assigned by strict alternation, which is the weakest assumption
//! in the detector: it only holds for recordings of regular breathing whose
//! first detected phase is known.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::kappa::percentile;
use crate::phase::{PhaseBox, PhaseClass};
use crate::spectrogram::Spectrogram;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    pub band_hz: (f64, f64),
    pub smooth_frames: usize,
    pub onset_db: f64,
    pub offset_db: f64,
    pub min_phase_s: f64,
    pub start_class: PhaseClass,
    /// Minimum valley depth (dB below the lower of the two flanking peaks)
    /// at which an active segment is split in two; 0 disables splitting.
    pub split_db: f64,
    /// Percentile (0..1) of smoothed energy taken as the noise floor.
    pub floor_percentile: f64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            band_hz: (100.0, 2000.0),
            smooth_frames: 5,
            onset_db: 8.0,
            offset_db: 4.0,
            min_phase_s: 0.25,
            start_class: PhaseClass::Inspiration,
            split_db: 2.5,
            floor_percentile: 0.10,
        }
    }
}

impl BaselineParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.onset_db > self.offset_db && self.offset_db > 0.0) {
            return bad(format!("need onset_db > offset_db > 0, got {} / {}", self.onset_db, self.offset_db));
        }
        if !(self.min_phase_s > 0.0) {
            return bad("min_phase_s must be positive".into());
        }
        if self.smooth_frames == 0 {
            return bad("smooth_frames must be at least 1".into());
        }
        if !(self.band_hz.0 >= 0.0 && self.band_hz.0 < self.band_hz.1) {
            return bad(format!("band {:?} is empty", self.band_hz));
        }
        if !(self.split_db >= 0.0) {
            return bad("split_db must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.floor_percentile) {
            return bad("floor_percentile must be in [0, 1]".into());
        }
        Ok(())
    }
}

/// Mean dB over the bins whose center lies inside `band`, per frame.
pub fn band_energy(spec: &Spectrogram, band: (f64, f64)) -> Vec<f64> {
    let bins: Vec<usize> = (0..spec.n_bins())
        .filter(|&b| {
            let f = spec.bin_center_hz(b);
            f >= band.0 && f <= band.1
        })
        .collect();
    let mut out = vec![0.0; spec.n_frames()];
    if bins.is_empty() {
        return out;
    }
    for &b in &bins {
        for (o, v) in out.iter_mut().zip(spec.bin_row(b)) {
            *o += v;
        }
    }
    let n = bins.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

/// Centered moving average; the window shrinks at the edges.
pub fn moving_average(x: &[f64], width: usize) -> Vec<f64> {
    let half_lo = (width - 1) / 2;
    let half_hi = width / 2;
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    for v in x {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half_lo);
            let hi = (i + half_hi + 1).min(x.len());
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Frame-index segment `[first, last]` with boundary times in seconds.
#[derive(Debug, Clone, Copy)]
struct Segment {
    first: usize,
    last: usize,
    start_s: f64,
    end_s: f64,
}

/// Detect breathing phases from a spectrogram.
pub fn detect_baseline(spec: &Spectrogram, params: &BaselineParams) -> Result<Vec<PhaseBox>> {
    params.validate()?;
    let n = spec.n_frames();
    let energy = moving_average(&band_energy(spec, params.band_hz), params.smooth_frames);
    let mut sorted = energy.clone();
    sorted.sort_by(f64::total_cmp);
    let floor = percentile(&sorted, params.floor_percentile);
    let enter = floor + params.onset_db;
    let exit = floor + params.offset_db;

    // Frame k is centered at k*hop + window/2; each frame owns one hop around
    // its center.
    let window_s = 1.0 / spec.bin_hz;
    let center = |k: usize| k as f64 * spec.hop_s + 0.5 * window_s;
    let seg_start = |k: usize| if k == 0 { 0.0 } else { (center(k) - 0.5 * spec.hop_s).max(0.0) };
    let seg_end = |k: usize| if k + 1 == n { spec.duration_s } else { (center(k) + 0.5 * spec.hop_s).min(spec.duration_s) };

    let mut segments = Vec::new();
    let mut open: Option<usize> = None;
    for (k, &e) in energy.iter().enumerate() {
        match open {
            None if e >= enter => open = Some(k),
            Some(s) if e < exit => {
                segments.push(Segment { first: s, last: k - 1, start_s: seg_start(s), end_s: seg_end(k - 1) });
                open = None;
            }
            _ => {}
        }
    }
    if let Some(s) = open {
        segments.push(Segment { first: s, last: n - 1, start_s: seg_start(s), end_s: seg_end(n - 1) });
    }

    let mut split = Vec::with_capacity(segments.len());
    for seg in segments {
        split_at_valleys(seg, &energy, params, &center, &mut split);
    }
    split.retain(|s| s.end_s - s.start_s >= params.min_phase_s);

    let mut class = params.start_class;
    let mut boxes = Vec::with_capacity(split.len());
    for s in split {
        let frames = &energy[s.first..=s.last];
        let mean = frames.iter().sum::<f64>() / frames.len() as f64;
        let confidence = ((mean - exit) / params.onset_db).clamp(0.0, 1.0);
        boxes.push(PhaseBox::new(class, s.start_s, s.end_s, confidence));
        class = class.other();
    }
    Ok(boxes)
}

/// Recursively split `seg` at its deepest valley while the valley is at
/// least `split_db` below both flanking maxima and both halves stay at least
/// `min_phase_s` long.
fn split_at_valleys(
    seg: Segment,
    energy: &[f64],
    params: &BaselineParams,
    center: &dyn Fn(usize) -> f64,
    out: &mut Vec<Segment>,
) {
    if params.split_db > 0.0 && seg.last > seg.first + 1 {
        let e = &energy[seg.first..=seg.last];
        let m = e.len();
        let mut left_max = vec![f64::NEG_INFINITY; m];
        let mut right_max = vec![f64::NEG_INFINITY; m];
        for i in 0..m {
            left_max[i] = if i == 0 { e[0] } else { left_max[i - 1].max(e[i]) };
        }
        for i in (0..m).rev() {
            right_max[i] = if i + 1 == m { e[i] } else { right_max[i + 1].max(e[i]) };
        }
        let mut best: Option<(usize, f64)> = None;
        for i in 1..m - 1 {
            let depth = left_max[i].min(right_max[i]) - e[i];
            let t = center(seg.first + i);
            let fits = t - seg.start_s >= params.min_phase_s && seg.end_s - t >= params.min_phase_s;
            if depth >= params.split_db && fits && best.is_none_or(|(_, d)| depth > d) {
                best = Some((i, depth));
            }
        }
        if let Some((i, _)) = best {
            let k = seg.first + i;
            let t = center(k);
            let left = Segment { first: seg.first, last: k, start_s: seg.start_s, end_s: t };
            let right = Segment { first: k, last: seg.last, start_s: t, end_s: seg.end_s };
            split_at_valleys(left, energy, params, center, out);
            split_at_valleys(right, energy, params, center, out);
            return;
        }
    }
    out.push(seg);
}

/// One line of the detection wire format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub file: String,
    pub class: PhaseClass,
    pub start_s: f64,
    pub end_s: f64,
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freq_low_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freq_high_hz: Option<f64>,
}

/// Detections grouped by file id, in input order within each file.
pub type Detections = BTreeMap<String, Vec<PhaseBox>>;

/// Parse detection JSON lines. Blank lines are skipped; frequency fields are
/// accepted and ignored.
pub fn parse_detections(text: &str) -> Result<Detections> {
    let mut out = Detections::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DetectionRecord =
            serde_json::from_str(line).map_err(|e| Error::parse(line_no, e.to_string()))?;
        let b = PhaseBox::new(rec.class, rec.start_s, rec.end_s, rec.confidence);
        b.validate(None)
            .map_err(|m| Error::InvalidBox { line: line_no, message: format!("{m}: {line}") })?;
        out.entry(rec.file).or_default().push(b);
    }
    Ok(out)
}

pub fn load_external_detections(path: impl AsRef<Path>) -> Result<Detections> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_detections(&text)
}

/// Serialize detections as JSON lines, files in id order.
pub fn write_detections(dets: &Detections) -> String {
    let mut out = String::new();
    for (file, boxes) in dets {
        for b in boxes {
            let rec = DetectionRecord {
                file: file.clone(),
                class: b.class,
                start_s: b.start_s,
                end_s: b.end_s,
                confidence: b.confidence,
                freq_low_hz: None,
                freq_high_hz: None,
            };
            out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_single_line() {
        let d = parse_detections(r#"{"file":"a","class":"inspiration","start_s":0.5,"end_s":1.7,"confidence":0.93}"#).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d["a"], vec![PhaseBox::new(PhaseClass::Inspiration, 0.5, 1.7, 0.93)]);
        assert!(parse_detections("").unwrap().is_empty());
    }

    #[test]
    fn invalid_box_reports_line() {
        let text = "{\"file\":\"a\",\"class\":\"expiration\",\"start_s\":0,\"end_s\":1,\"confidence\":1}\n\
                    {\"file\":\"a\",\"class\":\"expiration\",\"start_s\":2,\"end_s\":2,\"confidence\":1}\n";
        assert!(matches!(parse_detections(text), Err(Error::InvalidBox { line: 2, .. })));
        let text = "{\"file\":\"a\",\"class\":\"cough\",\"start_s\":0,\"end_s\":1,\"confidence\":1}";
        assert!(matches!(parse_detections(text), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn freq_fields_ignored_and_order_kept() {
        let text = "{\"file\":\"b\",\"class\":\"expiration\",\"start_s\":3,\"end_s\":4,\"confidence\":0.2,\"freq_low_hz\":0,\"freq_high_hz\":2000}\n\
                    \n{\"file\":\"b\",\"class\":\"inspiration\",\"start_s\":1,\"end_s\":2,\"confidence\":0.6}\n";
        let d = parse_detections(text).unwrap();
        assert_eq!(d["b"][0].start_s, 3.0);
        assert_eq!(d["b"][1].start_s, 1.0);
        assert_eq!(parse_detections(&write_detections(&d)).unwrap(), d);
    }

    #[test]
    fn moving_average_edges() {
        assert_eq!(moving_average(&[1.0, 2.0, 3.0, 4.0, 5.0], 3), vec![1.5, 2.0, 3.0, 4.0, 4.5]);
        assert_eq!(moving_average(&[1.0, 2.0], 1), vec![1.0, 2.0]);
    }

    #[test]
    fn flat_spectrogram_has_no_phases() {
        let s = Spectrogram::from_parts(vec![-60.0; 186 * 100], 186, 100, 10.77, 0.02, "x", 2.1).unwrap();
        assert!(detect_baseline(&s, &BaselineParams::default()).unwrap().is_empty());
    }

    #[test]
    fn params_checked() {
        let p = BaselineParams { onset_db: 3.0, offset_db: 4.0, ..Default::default() };
        let s = Spectrogram::from_parts(vec![0.0; 4], 2, 2, 10.0, 0.02, "x", 0.1).unwrap();
        assert!(detect_baseline(&s, &p).is_err());
    }
}
