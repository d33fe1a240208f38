//! C ABI over the lungphase core.
//!
//! Objects cross the boundary as opaque handles created by `lp_*_new` /
//! `lp_*_load` / `lp_*_compute` functions and released with the matching
//! `lp_*_free`. Every fallible call returns an [`LpStatus`]; on failure the
//! message is available from [`lp_last_error_message`] on the same thread.
//! Panics never unwind across the boundary: they are reported as
//! `LP_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lungphase::audio::{load_wav, resample, AudioClip};
use lungphase::detect::{detect_baseline, BaselineParams};
use lungphase::metrics::{confusion, match_boxes, IntervalSet, MatchCounts};
use lungphase::postprocess::{postprocess, PostprocessParams, PostprocessTrace};
use lungphase::spectrogram::{compute_spectrogram, SpectrogramParams, Window};
use lungphase::{Error, PhaseBox, PhaseClass, Spectrogram};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    UnsupportedEncoding = 3,
    CorruptHeader = 4,
    EmptyAudio = 5,
    InvalidParameter = 6,
    ClipTooShort = 7,
    OutOfRange = 8,
    InvalidBox = 9,
    DegeneratePhase = 10,
    Io = 11,
    Other = 12,
    Internal = 13,
}

impl From<&Error> for LpStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::UnsupportedEncoding(_) => LpStatus::UnsupportedEncoding,
            Error::CorruptHeader(_) => LpStatus::CorruptHeader,
            Error::EmptyAudio => LpStatus::EmptyAudio,
            Error::InvalidParameter(_) | Error::SpecOverflow(_) | Error::Config(_) => LpStatus::InvalidParameter,
            Error::ClipTooShort { .. } => LpStatus::ClipTooShort,
            Error::OutOfRange { .. } => LpStatus::OutOfRange,
            Error::InvalidBox { .. } | Error::InvariantViolation(_) => LpStatus::InvalidBox,
            Error::DegeneratePhase { .. } => LpStatus::DegeneratePhase,
            Error::Io { .. } => LpStatus::Io,
            _ => LpStatus::Other,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Run `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (LpStatus, String)>) -> LpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LpStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal error: panic inside lungphase".into());
            LpStatus::Internal
        }
    }
}

fn core_err(e: Error) -> (LpStatus, String) {
    (LpStatus::from(&e), e.to_string())
}

fn null(what: &str) -> (LpStatus, String) {
    (LpStatus::NullPointer, format!("{what} is null"))
}

/// Message for the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn lp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---------------------------------------------------------------- audio

/// Mono audio clip.
pub struct LpAudio(AudioClip);

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lp_audio_load_wav(path: *const c_char, out: *mut *mut LpAudio) -> LpStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return Err(null("path or out"));
        }
        let path = CStr::from_ptr(path).to_str().map_err(|e| (LpStatus::InvalidUtf8, e.to_string()))?;
        let clip = load_wav(path).map_err(core_err)?;
        *out = Box::into_raw(Box::new(LpAudio(clip)));
        Ok(())
    })
}

/// Copy `len` samples into a new clip.
///
/// # Safety
/// `samples` must point to `len` readable floats; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lp_audio_from_samples(
    samples: *const f32,
    len: usize,
    sample_rate: u32,
    out: *mut *mut LpAudio,
) -> LpStatus {
    guard(|| {
        if samples.is_null() || out.is_null() {
            return Err(null("samples or out"));
        }
        let data = std::slice::from_raw_parts(samples, len).to_vec();
        let clip = AudioClip::new(data, sample_rate, "ffi").map_err(core_err)?;
        *out = Box::into_raw(Box::new(LpAudio(clip)));
        Ok(())
    })
}

/// # Safety
/// `audio` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lp_audio_resample(audio: *const LpAudio, target_rate: u32, out: *mut *mut LpAudio) -> LpStatus {
    guard(|| {
        let a = audio.as_ref().ok_or_else(|| null("audio"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let clip = resample(&a.0, target_rate).map_err(core_err)?;
        *out = Box::into_raw(Box::new(LpAudio(clip)));
        Ok(())
    })
}

/// # Safety
/// `audio` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lp_audio_len(audio: *const LpAudio) -> usize {
    audio.as_ref().map_or(0, |a| a.0.len())
}

/// # Safety
/// `audio` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lp_audio_sample_rate(audio: *const LpAudio) -> u32 {
    audio.as_ref().map_or(0, |a| a.0.sample_rate())
}

/// Pointer to the clip's samples, valid while the handle lives.
///
/// # Safety
/// `audio` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lp_audio_samples(audio: *const LpAudio) -> *const f32 {
    audio.as_ref().map_or(ptr::null(), |a| a.0.samples().as_ptr())
}

/// # Safety
/// `audio` must come from this library and not be freed twice; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn lp_audio_free(audio: *mut LpAudio) {
    if !audio.is_null() {
        drop(Box::from_raw(audio));
    }
}

// ----------------------------------------------------------- spectrogram

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LpSpectrogramParams {
    pub segment_len: usize,
    pub overlap: usize,
    pub max_freq_hz: f64,
    /// 0 = Hann, 1 = rectangular.
    pub window: u32,
    pub db_floor: f64,
}

impl LpSpectrogramParams {
    fn to_core(self) -> Result<SpectrogramParams, (LpStatus, String)> {
        let window = match self.window {
            0 => Window::Hann,
            1 => Window::Rectangular,
            w => return Err((LpStatus::InvalidParameter, format!("unknown window {w}"))),
        };
        Ok(SpectrogramParams {
            segment_len: self.segment_len,
            overlap: self.overlap,
            max_freq_hz: self.max_freq_hz,
            window,
            db_floor: self.db_floor,
        })
    }
}

#[no_mangle]
pub extern "C" fn lp_spectrogram_params_default() -> LpSpectrogramParams {
    let p = SpectrogramParams::default();
    LpSpectrogramParams {
        segment_len: p.segment_len,
        overlap: p.overlap,
        max_freq_hz: p.max_freq_hz,
        window: match p.window {
            Window::Hann => 0,
            Window::Rectangular => 1,
        },
        db_floor: p.db_floor,
    }
}

/// Power spectrogram in dB.
pub struct LpSpectrogram(Spectrogram);

/// `params` may be null for defaults.
///
/// # Safety
/// `audio` must be a live handle, `params` null or readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lp_spectrogram_compute(
    audio: *const LpAudio,
    params: *const LpSpectrogramParams,
    out: *mut *mut LpSpectrogram,
) -> LpStatus {
    guard(|| {
        let a = audio.as_ref().ok_or_else(|| null("audio"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let p = match params.as_ref() {
            Some(p) => p.to_core()?,
            None => SpectrogramParams::default(),
        };
        let spec = compute_spectrogram(&a.0, &p).map_err(core_err)?;
        *out = Box::into_raw(Box::new(LpSpectrogram(spec)));
        Ok(())
    })
}

/// # Safety
/// `spec` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lp_spectrogram_n_bins(spec: *const LpSpectrogram) -> usize {
    spec.as_ref().map_or(0, |s| s.0.n_bins())
}

/// # Safety
/// `spec` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lp_spectrogram_n_frames(spec: *const LpSpectrogram) -> usize {
    spec.as_ref().map_or(0, |s| s.0.n_frames())
}

/// # Safety
/// `spec` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lp_spectrogram_hop_s(spec: *const LpSpectrogram) -> f64 {
    spec.as_ref().map_or(0.0, |s| s.0.hop_s)
}

/// # Safety
/// `spec` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lp_spectrogram_bin_hz(spec: *const LpSpectrogram) -> f64 {
    spec.as_ref().map_or(0.0, |s| s.0.bin_hz)
}

/// dB values, bin-major (`values[bin * n_frames + frame]`), valid while the
/// handle lives.
///
/// # Safety
/// `spec` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lp_spectrogram_values(spec: *const LpSpectrogram) -> *const f64 {
    spec.as_ref().map_or(ptr::null(), |s| s.0.values().as_ptr())
}

/// # Safety
/// `spec` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lp_spectrogram_time_to_frame(spec: *const LpSpectrogram, t: f64, out: *mut usize) -> LpStatus {
    guard(|| {
        let s = spec.as_ref().ok_or_else(|| null("spec"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = s.0.time_to_frame(t).map_err(core_err)?;
        Ok(())
    })
}

/// # Safety
/// `spec` must come from this library and not be freed twice; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn lp_spectrogram_free(spec: *mut LpSpectrogram) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

// ----------------------------------------------------------------- boxes

pub const LP_INSPIRATION: u32 = 0;
pub const LP_EXPIRATION: u32 = 1;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpPhaseBox {
    /// `LP_INSPIRATION` or `LP_EXPIRATION`.
    pub class: u32,
    pub start_s: f64,
    pub end_s: f64,
    pub confidence: f64,
}

fn class_from(c: u32) -> Result<PhaseClass, (LpStatus, String)> {
    match c {
        LP_INSPIRATION => Ok(PhaseClass::Inspiration),
        LP_EXPIRATION => Ok(PhaseClass::Expiration),
        _ => Err((LpStatus::InvalidParameter, format!("unknown class {c}"))),
    }
}

impl From<&PhaseBox> for LpPhaseBox {
    fn from(b: &PhaseBox) -> Self {
        let class = match b.class {
            PhaseClass::Inspiration => LP_INSPIRATION,
            PhaseClass::Expiration => LP_EXPIRATION,
        };
        LpPhaseBox { class, start_s: b.start_s, end_s: b.end_s, confidence: b.confidence }
    }
}

/// Ordered list of phase boxes.
pub struct LpBoxList(Vec<PhaseBox>);

fn new_list(out: *mut *mut LpBoxList, boxes: Vec<PhaseBox>) {
    // SAFETY: callers checked `out` for null.
    unsafe { *out = Box::into_raw(Box::new(LpBoxList(boxes))) };
}

/// Copy `n` boxes into a new list; each box is validated.
///
/// # Safety
/// `boxes` must point to `n` readable boxes (may be null when `n == 0`);
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lp_boxes_new(boxes: *const LpPhaseBox, n: usize, out: *mut *mut LpBoxList) -> LpStatus {
    guard(|| {
        if out.is_null() || (boxes.is_null() && n > 0) {
            return Err(null("boxes or out"));
        }
        let src = if n == 0 { &[][..] } else { std::slice::from_raw_parts(boxes, n) };
        let mut list = Vec::with_capacity(n);
        for (i, b) in src.iter().enumerate() {
            let pb = PhaseBox::new(class_from(b.class)?, b.start_s, b.end_s, b.confidence);
            pb.validate(None).map_err(|m| (LpStatus::InvalidBox, format!("box {i}: {m}")))?;
            list.push(pb);
        }
        new_list(out, list);
        Ok(())
    })
}

/// # Safety
/// `list` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lp_boxes_len(list: *const LpBoxList) -> usize {
    list.as_ref().map_or(0, |l| l.0.len())
}

/// # Safety
/// `list` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lp_boxes_get(list: *const LpBoxList, index: usize, out: *mut LpPhaseBox) -> LpStatus {
    guard(|| {
        let l = list.as_ref().ok_or_else(|| null("list"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let b = l.0.get(index).ok_or_else(|| {
            (LpStatus::OutOfRange, format!("index {index} out of range for {} boxes", l.0.len()))
        })?;
        *out = b.into();
        Ok(())
    })
}

/// # Safety
/// `list` must come from this library and not be freed twice; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn lp_boxes_free(list: *mut LpBoxList) {
    if !list.is_null() {
        drop(Box::from_raw(list));
    }
}

// ------------------------------------------------------------- detection

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LpBaselineParams {
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    pub smooth_frames: usize,
    pub onset_db: f64,
    pub offset_db: f64,
    pub min_phase_s: f64,
    pub start_class: u32,
    pub split_db: f64,
    pub floor_percentile: f64,
}

#[no_mangle]
pub extern "C" fn lp_baseline_params_default() -> LpBaselineParams {
    let p = BaselineParams::default();
    LpBaselineParams {
        band_low_hz: p.band_hz.0,
        band_high_hz: p.band_hz.1,
        smooth_frames: p.smooth_frames,
        onset_db: p.onset_db,
        offset_db: p.offset_db,
        min_phase_s: p.min_phase_s,
        start_class: LpPhaseBox::from(&PhaseBox::annotated(p.start_class, 0.0, 1.0)).class,
        split_db: p.split_db,
        floor_percentile: p.floor_percentile,
    }
}

/// Run the baseline detector. `params` may be null for defaults.
///
/// # Safety
/// `spec` must be a live handle, `params` null or readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lp_detect_baseline(
    spec: *const LpSpectrogram,
    params: *const LpBaselineParams,
    out: *mut *mut LpBoxList,
) -> LpStatus {
    guard(|| {
        let s = spec.as_ref().ok_or_else(|| null("spec"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let p = match params.as_ref() {
            None => BaselineParams::default(),
            Some(p) => BaselineParams {
                band_hz: (p.band_low_hz, p.band_high_hz),
                smooth_frames: p.smooth_frames,
                onset_db: p.onset_db,
                offset_db: p.offset_db,
                min_phase_s: p.min_phase_s,
                start_class: class_from(p.start_class)?,
                split_db: p.split_db,
                floor_percentile: p.floor_percentile,
            },
        };
        new_list(out, detect_baseline(&s.0, &p).map_err(core_err)?);
        Ok(())
    })
}

// -------------------------------------------------------- post-processing

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LpPostprocessParams {
    pub confidence_min: f64,
    pub duplicate_iou: f64,
    pub small_overlap_max_frac: f64,
    pub duplicates_within_class: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LpPostprocessTrace {
    pub n_pruned: usize,
    pub n_duplicates_removed: usize,
    pub n_overlaps_resolved: usize,
}

impl From<PostprocessTrace> for LpPostprocessTrace {
    fn from(t: PostprocessTrace) -> Self {
        Self { n_pruned: t.n_pruned, n_duplicates_removed: t.n_duplicates_removed, n_overlaps_resolved: t.n_overlaps_resolved }
    }
}

#[no_mangle]
pub extern "C" fn lp_postprocess_params_default() -> LpPostprocessParams {
    let p = PostprocessParams::default();
    LpPostprocessParams {
        confidence_min: p.confidence_min,
        duplicate_iou: p.duplicate_iou,
        small_overlap_max_frac: p.small_overlap_max_frac,
        duplicates_within_class: p.duplicates_within_class,
    }
}

/// Prune, suppress duplicates and resolve overlaps into a new list.
/// `params` and `trace` may be null.
///
/// # Safety
/// `list` must be a live handle, `params` null or readable, `out` writable,
/// `trace` null or writable.
#[no_mangle]
pub unsafe extern "C" fn lp_postprocess(
    list: *const LpBoxList,
    params: *const LpPostprocessParams,
    out: *mut *mut LpBoxList,
    trace: *mut LpPostprocessTrace,
) -> LpStatus {
    guard(|| {
        let l = list.as_ref().ok_or_else(|| null("list"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let p = match params.as_ref() {
            None => PostprocessParams::default(),
            Some(p) => PostprocessParams {
                confidence_min: p.confidence_min,
                duplicate_iou: p.duplicate_iou,
                small_overlap_max_frac: p.small_overlap_max_frac,
                duplicates_within_class: p.duplicates_within_class,
            },
        };
        let (boxes, t) = postprocess(l.0.clone(), &p).map_err(core_err)?;
        if let Some(tr) = trace.as_mut() {
            *tr = t.into();
        }
        new_list(out, boxes);
        Ok(())
    })
}

// ---------------------------------------------------------------- metrics

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LpConfusion {
    pub tp_s: f64,
    pub fp_s: f64,
    pub tn_s: f64,
    pub fn_s: f64,
}

/// Continuous-time confusion of one class over `[0, duration_s)`, roles as
/// defined (FP = A - B, FN = not A - not B).
///
/// # Safety
/// `a` and `b` must be live handles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lp_confusion(
    a: *const LpBoxList,
    b: *const LpBoxList,
    class: u32,
    duration_s: f64,
    out: *mut LpConfusion,
) -> LpStatus {
    guard(|| {
        let a = a.as_ref().ok_or_else(|| null("a"))?;
        let b = b.as_ref().ok_or_else(|| null("b"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let c = class_from(class)?;
        let sa = IntervalSet::from_boxes(&a.0, Some(c), duration_s).map_err(core_err)?;
        let sb = IntervalSet::from_boxes(&b.0, Some(c), duration_s).map_err(core_err)?;
        let m = confusion(&sa, &sb).map_err(core_err)?;
        *out = LpConfusion { tp_s: m.tp_s, fp_s: m.fp_s, tn_s: m.tn_s, fn_s: m.fn_s };
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LpMatchCounts {
    pub n_a: usize,
    pub n_b: usize,
    pub matches: usize,
}

impl From<MatchCounts> for LpMatchCounts {
    fn from(m: MatchCounts) -> Self {
        Self { n_a: m.n_a, n_b: m.n_b, matches: m.matches }
    }
}

/// Box-level matching (same class, Jaccard > 0.5, one-to-one). Either
/// output may be null.
///
/// # Safety
/// `a` and `b` must be live handles; outputs null or writable.
#[no_mangle]
pub unsafe extern "C" fn lp_match_boxes(
    a: *const LpBoxList,
    b: *const LpBoxList,
    inspiration: *mut LpMatchCounts,
    expiration: *mut LpMatchCounts,
) -> LpStatus {
    guard(|| {
        let a = a.as_ref().ok_or_else(|| null("a"))?;
        let b = b.as_ref().ok_or_else(|| null("b"))?;
        let r = match_boxes(&a.0, &b.0);
        if let Some(o) = inspiration.as_mut() {
            *o = r.inspiration.into();
        }
        if let Some(o) = expiration.as_mut() {
            *o = r.expiration.into();
        }
        Ok(())
    })
}
