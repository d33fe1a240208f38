use std::ffi::{CStr, CString};
use std::ptr;

use lungphase::synth::{synth_file, BreathSpec};
use lungphase_ffi::*;

fn last_error() -> String {
    let p = lp_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn box_list(boxes: &[LpPhaseBox]) -> *mut LpBoxList {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { lp_boxes_new(boxes.as_ptr(), boxes.len(), &mut out) }, LpStatus::Ok);
    out
}

fn read_list(list: *const LpBoxList) -> Vec<LpPhaseBox> {
    let n = unsafe { lp_boxes_len(list) };
    (0..n)
        .map(|i| {
            let mut b = LpPhaseBox { class: 9, start_s: 0.0, end_s: 0.0, confidence: 0.0 };
            assert_eq!(unsafe { lp_boxes_get(list, i, &mut b) }, LpStatus::Ok);
            b
        })
        .collect()
}

fn pb(class: u32, start_s: f64, end_s: f64, confidence: f64) -> LpPhaseBox {
    LpPhaseBox { class, start_s, end_s, confidence }
}

#[test]
fn spectrogram_shape_through_the_abi() {
    let samples = vec![0.01f32; 15 * 44_100];
    let mut audio = ptr::null_mut();
    assert_eq!(unsafe { lp_audio_from_samples(samples.as_ptr(), samples.len(), 44_100, &mut audio) }, LpStatus::Ok);
    assert_eq!(unsafe { lp_audio_len(audio) }, samples.len());
    assert_eq!(unsafe { lp_audio_sample_rate(audio) }, 44_100);

    let params = lp_spectrogram_params_default();
    assert_eq!((params.segment_len, params.overlap, params.max_freq_hz), (4096, 3200, 2000.0));
    let mut spec = ptr::null_mut();
    assert_eq!(unsafe { lp_spectrogram_compute(audio, &params, &mut spec) }, LpStatus::Ok);
    assert_eq!(unsafe { lp_spectrogram_n_frames(spec) }, 734);
    assert_eq!(unsafe { lp_spectrogram_n_bins(spec) }, 186);
    assert!(!unsafe { lp_spectrogram_values(spec) }.is_null());

    let mut frame = 0usize;
    assert_eq!(unsafe { lp_spectrogram_time_to_frame(spec, 1.2, &mut frame) }, LpStatus::Ok);
    assert_eq!(frame, 59);
    assert_eq!(unsafe { lp_spectrogram_time_to_frame(spec, -1.0, &mut frame) }, LpStatus::OutOfRange);

    unsafe {
        lp_spectrogram_free(spec);
        lp_audio_free(audio);
    }
}

#[test]
fn detect_and_postprocess_synthetic_file() {
    let (clip, truth) = synth_file(&BreathSpec { seed: 3, ..Default::default() }, "f").unwrap();
    let mut audio = ptr::null_mut();
    let s = clip.samples();
    assert_eq!(unsafe { lp_audio_from_samples(s.as_ptr(), s.len(), clip.sample_rate(), &mut audio) }, LpStatus::Ok);
    let mut spec = ptr::null_mut();
    assert_eq!(unsafe { lp_spectrogram_compute(audio, ptr::null(), &mut spec) }, LpStatus::Ok);
    let mut raw = ptr::null_mut();
    let bp = lp_baseline_params_default();
    assert_eq!(bp.start_class, LP_INSPIRATION);
    assert_eq!(unsafe { lp_detect_baseline(spec, &bp, &mut raw) }, LpStatus::Ok);
    let mut clean = ptr::null_mut();
    let mut trace = LpPostprocessTrace { n_pruned: 99, ..Default::default() };
    assert_eq!(unsafe { lp_postprocess(raw, ptr::null(), &mut clean, &mut trace) }, LpStatus::Ok);
    assert_eq!(trace.n_pruned, 0);

    let want: Vec<_> = truth.boxes.iter().map(LpPhaseBox::from).collect();
    let reference = box_list(&want);
    let (mut insp, mut exp) = (LpMatchCounts::default(), LpMatchCounts::default());
    assert_eq!(unsafe { lp_match_boxes(reference, clean, &mut insp, &mut exp) }, LpStatus::Ok);
    assert_eq!((insp.matches, exp.matches), (3, 3));

    unsafe {
        lp_boxes_free(reference);
        lp_boxes_free(clean);
        lp_boxes_free(raw);
        lp_spectrogram_free(spec);
        lp_audio_free(audio);
    }
}

#[test]
fn postprocess_worked_example() {
    let list = box_list(&[pb(LP_INSPIRATION, 0.0, 5.2, 1.0), pb(LP_EXPIRATION, 5.0, 10.0, 1.0)]);
    let mut out = ptr::null_mut();
    let mut trace = LpPostprocessTrace::default();
    let params = lp_postprocess_params_default();
    assert_eq!(params.confidence_min, 0.5);
    assert_eq!(unsafe { lp_postprocess(list, &params, &mut out, &mut trace) }, LpStatus::Ok);
    assert_eq!(read_list(out), vec![pb(LP_INSPIRATION, 0.0, 5.1, 1.0), pb(LP_EXPIRATION, 5.1, 10.0, 1.0)]);
    assert_eq!(trace.n_overlaps_resolved, 1);
    unsafe {
        lp_boxes_free(out);
        lp_boxes_free(list);
    }
}

#[test]
fn confusion_through_the_abi() {
    let a = box_list(&[pb(LP_INSPIRATION, 0.0, 2.0, 1.0)]);
    let b = box_list(&[pb(LP_INSPIRATION, 1.0, 3.0, 1.0)]);
    let mut m = LpConfusion::default();
    assert_eq!(unsafe { lp_confusion(a, b, LP_INSPIRATION, 10.0, &mut m) }, LpStatus::Ok);
    assert_eq!(m, LpConfusion { tp_s: 1.0, fp_s: 1.0, tn_s: 7.0, fn_s: 1.0 });
    assert_eq!(unsafe { lp_confusion(a, b, 7, 10.0, &mut m) }, LpStatus::InvalidParameter);
    unsafe {
        lp_boxes_free(a);
        lp_boxes_free(b);
    }
}

#[test]
fn errors_are_reported() {
    let mut out = ptr::null_mut();
    let bad = [pb(LP_INSPIRATION, 2.0, 1.0, 1.0)];
    assert_eq!(unsafe { lp_boxes_new(bad.as_ptr(), 1, &mut out) }, LpStatus::InvalidBox);
    assert!(last_error().contains("box 0"));
    assert!(out.is_null());

    let path = CString::new("/nonexistent/x.wav").unwrap();
    let mut audio = ptr::null_mut();
    assert_eq!(unsafe { lp_audio_load_wav(path.as_ptr(), &mut audio) }, LpStatus::Io);
    assert!(last_error().contains("nonexistent"));

    assert_eq!(unsafe { lp_audio_load_wav(ptr::null(), &mut audio) }, LpStatus::NullPointer);
    let empty = box_list(&[]);
    let mut b = pb(0, 0.0, 0.0, 0.0);
    assert_eq!(unsafe { lp_boxes_get(empty, 0, &mut b) }, LpStatus::OutOfRange);
    unsafe {
        lp_boxes_free(empty);
        lp_boxes_free(ptr::null_mut());
        lp_audio_free(ptr::null_mut());
    }
    assert_eq!(unsafe { lp_audio_len(ptr::null()) }, 0);
}

#[test]
fn error_message_is_per_thread() {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { lp_boxes_new(ptr::null(), 3, &mut out) }, LpStatus::NullPointer);
    std::thread::spawn(|| assert!(lp_last_error_message().is_null())).join().unwrap();
    assert!(last_error().contains("null"));
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(lp_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/lungphase.h")).unwrap();
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let mut n = 0;
    for line in src.lines() {
        if let Some(rest) = line.split("extern \"C\" fn ").nth(1) {
            let name = rest.split('(').next().unwrap();
            assert!(header.contains(&format!("{name}(")), "{name} missing from header");
            n += 1;
        }
    }
    assert!(n >= 20);
    assert!(header.contains("LP_STATUS_OK = 0"));
    assert!(header.contains("typedef struct LpAudio LpAudio;"));
}
