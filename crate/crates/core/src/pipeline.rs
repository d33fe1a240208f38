//! Audio to detections to agreement, file by file.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::annotation::{Annotation, Corpus};
use crate::audio::{load_wav, resample, AudioClip, CANONICAL_RATE};
use crate::config::RunConfig;
use crate::detect::{detect_baseline, Detections};
use crate::error::{Error, Result};
use crate::phase::PhaseBox;
use crate::postprocess::{postprocess, PostprocessTrace};
use crate::spectrogram::{compute_spectrogram, Spectrogram};

/// `*.wav` files under `path` (or `path` itself), sorted by path.
pub fn list_wavs(path: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let path = path.as_ref();
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut out: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")))
        .collect();
    out.sort();
    Ok(out)
}

/// Load a WAV and bring it to the canonical rate if needed.
pub fn load_canonical(path: &Path) -> Result<AudioClip> {
    let clip = load_wav(path)?;
    if clip.sample_rate() == CANONICAL_RATE {
        return Ok(clip);
    }
    log::info!("{}: resampling {} Hz to {CANONICAL_RATE} Hz", path.display(), clip.sample_rate());
    resample(&clip, CANONICAL_RATE)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileDetections {
    pub file_id: String,
    pub duration_s: f64,
    /// Detector output before post-processing.
    pub raw: Vec<PhaseBox>,
    pub boxes: Vec<PhaseBox>,
    pub trace: PostprocessTrace,
}

/// Spectrogram, baseline detection and post-processing for one clip.
pub fn analyze_clip(clip: &AudioClip, config: &RunConfig) -> Result<(Spectrogram, FileDetections)> {
    let spec = compute_spectrogram(clip, &config.spectrogram)?;
    let raw = detect_baseline(&spec, &config.baseline)?;
    let (boxes, trace) = postprocess(raw.clone(), &config.postprocess)?;
    let det = FileDetections { file_id: clip.source_id().to_string(), duration_s: clip.duration_s(), raw, boxes, trace };
    Ok((spec, det))
}

/// Analyze every file in parallel; results come back in input order.
pub fn analyze_files(paths: &[PathBuf], config: &RunConfig) -> Result<Vec<FileDetections>> {
    let out: Vec<FileDetections> = paths
        .par_iter()
        .map(|p| load_canonical(p).and_then(|clip| analyze_clip(&clip, config)).map(|(_, d)| d))
        .collect::<Result<_>>()?;
    for w in out.windows(2) {
        if w[0].file_id == w[1].file_id {
            return Err(Error::InvalidParameter(format!("two input files share the id {:?}", w[0].file_id)));
        }
    }
    Ok(out)
}

/// Raw and post-processed detections keyed by file id.
pub fn split_detections(files: &[FileDetections]) -> (Detections, Detections) {
    let raw = files.iter().map(|f| (f.file_id.clone(), f.raw.clone())).collect();
    let boxes = files.iter().map(|f| (f.file_id.clone(), f.boxes.clone())).collect();
    (raw, boxes)
}

/// Wrap per-file boxes as annotations. Durations come from `durations`
/// (usually the reference corpus); files absent there are an error.
pub fn detections_to_corpus(dets: &Detections, durations: &Corpus, source: &str) -> Result<Corpus> {
    let mut corpus = Corpus::new();
    for (id, ann) in durations {
        let boxes = dets.get(id).cloned().unwrap_or_default();
        let a = Annotation::new(id.clone(), ann.duration_s, source, boxes)?;
        corpus.insert(id.clone(), a);
    }
    if let Some(extra) = dets.keys().find(|k| !durations.contains_key(*k)) {
        return Err(Error::MissingFile(extra.clone()));
    }
    Ok(corpus)
}

/// Detected boxes as an annotation corpus, durations from the audio.
pub fn files_to_corpus(files: &[FileDetections], source: &str) -> Result<Corpus> {
    files
        .iter()
        .map(|f| Ok((f.file_id.clone(), Annotation::new(f.file_id.clone(), f.duration_s, source, f.boxes.clone())?)))
        .collect()
}
