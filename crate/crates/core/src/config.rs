//! Run configuration: built-in defaults, an optional config file, and
//! command-line overrides, applied in that order.
//!
//! The config file is flat `key = value` lines (TOML syntax; `#` starts a
//! comment). Recognized keys:
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `segment_len` | 4096 | STFT segment length, samples |
//! | `overlap` | 3200 | STFT overlap, samples |
//! | `max_freq_hz` | 2000 | bins at or above this are dropped |
//! | `band_low_hz`, `band_high_hz` | 100, 2000 | baseline energy band |
//! | `smooth_frames` | 5 | baseline moving-average width |
//! | `onset_db`, `offset_db` | 8, 4 | hysteresis thresholds above the floor |
//! | `min_phase_s` | 0.25 | shortest phase the baseline emits |
//! | `split_db` | 2.5 | valley depth that splits a segment (0 = off) |
//! | `floor_percentile` | 0.1 | noise-floor percentile |
//! | `start_class` | `"inspiration"` | class of the first detected phase |
//! | `confidence_min` | 0.5 | pruning threshold (kept if equal) |
//! | `duplicate_iou` | 0.5 | duplicate suppression threshold |
//! | `small_overlap_max_frac` | 0.1 | overlaps above this fraction are logged |
//! | `duplicates_within_class` | false | restrict suppression to one class |
//! | `n_permutations` | 100 | chance-agreement permutations |
//! | `n_bootstrap` | 1000 | bootstrap replicates for the kappa CI |
//! | `seed` | 0 | seed for every stochastic step |
//! | `conventional_roles` | false | swap FP/FN into conventional roles |
//! | `jobs` | all cores | worker threads |

use std::path::Path;

use serde::Deserialize;

use crate::detect::BaselineParams;
use crate::error::{Error, Result};
use crate::metrics::EvalConfig;
use crate::phase::PhaseClass;
use crate::postprocess::PostprocessParams;
use crate::spectrogram::SpectrogramParams;

/// Every tunable, each optional. Used both for the config file and for
/// command-line overrides.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub segment_len: Option<usize>,
    pub overlap: Option<usize>,
    pub max_freq_hz: Option<f64>,
    pub band_low_hz: Option<f64>,
    pub band_high_hz: Option<f64>,
    pub smooth_frames: Option<usize>,
    pub onset_db: Option<f64>,
    pub offset_db: Option<f64>,
    pub min_phase_s: Option<f64>,
    pub split_db: Option<f64>,
    pub floor_percentile: Option<f64>,
    pub start_class: Option<PhaseClass>,
    pub confidence_min: Option<f64>,
    pub duplicate_iou: Option<f64>,
    pub small_overlap_max_frac: Option<f64>,
    pub duplicates_within_class: Option<bool>,
    pub n_permutations: Option<usize>,
    pub n_bootstrap: Option<usize>,
    pub seed: Option<u64>,
    pub conventional_roles: Option<bool>,
    pub jobs: Option<usize>,
}

macro_rules! merge_fields {
    ($dst:ident, $src:ident, $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl Overrides {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `other` replace ours.
    pub fn merge(&mut self, other: &Overrides) {
        merge_fields!(
            self, other, segment_len, overlap, max_freq_hz, band_low_hz, band_high_hz, smooth_frames, onset_db,
            offset_db, min_phase_s, split_db, floor_percentile, start_class, confidence_min, duplicate_iou,
            small_overlap_max_frac, duplicates_within_class, n_permutations, n_bootstrap, seed,
            conventional_roles, jobs
        );
    }
}

/// Fully resolved parameters for every stage.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub spectrogram: SpectrogramParams,
    pub baseline: BaselineParams,
    pub postprocess: PostprocessParams,
    pub eval: EvalConfig,
    pub jobs: Option<usize>,
}

impl RunConfig {
    pub fn resolve(o: &Overrides) -> Result<Self> {
        let mut c = RunConfig::default();
        let s = &mut c.spectrogram;
        s.segment_len = o.segment_len.unwrap_or(s.segment_len);
        s.overlap = o.overlap.unwrap_or(s.overlap);
        s.max_freq_hz = o.max_freq_hz.unwrap_or(s.max_freq_hz);

        let b = &mut c.baseline;
        b.band_hz = (o.band_low_hz.unwrap_or(b.band_hz.0), o.band_high_hz.unwrap_or(b.band_hz.1));
        b.smooth_frames = o.smooth_frames.unwrap_or(b.smooth_frames);
        b.onset_db = o.onset_db.unwrap_or(b.onset_db);
        b.offset_db = o.offset_db.unwrap_or(b.offset_db);
        b.min_phase_s = o.min_phase_s.unwrap_or(b.min_phase_s);
        b.split_db = o.split_db.unwrap_or(b.split_db);
        b.floor_percentile = o.floor_percentile.unwrap_or(b.floor_percentile);
        b.start_class = o.start_class.unwrap_or(b.start_class);
        b.validate()?;

        let p = &mut c.postprocess;
        p.confidence_min = o.confidence_min.unwrap_or(p.confidence_min);
        p.duplicate_iou = o.duplicate_iou.unwrap_or(p.duplicate_iou);
        p.small_overlap_max_frac = o.small_overlap_max_frac.unwrap_or(p.small_overlap_max_frac);
        p.duplicates_within_class = o.duplicates_within_class.unwrap_or(p.duplicates_within_class);
        p.validate()?;

        let e = &mut c.eval;
        e.n_permutations = o.n_permutations.unwrap_or(e.n_permutations);
        e.n_bootstrap = o.n_bootstrap.unwrap_or(e.n_bootstrap);
        e.seed = o.seed.unwrap_or(e.seed);
        e.conventional_roles = o.conventional_roles.unwrap_or(e.conventional_roles);
        if e.n_permutations == 0 {
            return Err(Error::Config("n_permutations must be at least 1".into()));
        }

        if o.jobs == Some(0) {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        c.jobs = o.jobs;
        Ok(c)
    }
}
