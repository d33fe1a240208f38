use proptest::prelude::*;

use lungphase::metrics::{confusion, match_boxes, IntervalSet};
use lungphase::postprocess::{postprocess, PostprocessParams};
use lungphase::spectrogram::compute_spectrogram;
use lungphase::{AudioClip, PhaseBox, PhaseClass, SpectrogramParams};

const DOMAIN: f64 = 10.0;

fn intervals() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0..DOMAIN, 0.001..3.0f64), 0..6)
        .prop_map(|v: Vec<(f64, f64)>| v.into_iter().map(|(s, d)| (s, (s + d).min(DOMAIN))).collect())
}

fn boxes() -> impl Strategy<Value = Vec<PhaseBox>> {
    prop::collection::vec((any::<bool>(), 0.0..20.0f64, 0.05..4.0f64, 0.0..=1.0f64), 0..12).prop_map(|v| {
        v.into_iter()
            .map(|(insp, s, d, c)| {
                let class = if insp { PhaseClass::Inspiration } else { PhaseClass::Expiration };
                PhaseBox::new(class, s, s + d, c)
            })
            .collect()
    })
}

/// Confusion measures counted on a grid of `step`-second cells.
fn grid_confusion(a: &IntervalSet, b: &IntervalSet, step: f64) -> [f64; 4] {
    let n = (DOMAIN / step).round() as usize;
    let mut m = [0.0; 4];
    for k in 0..n {
        let t = (k as f64 + 0.5) * step;
        let idx = match (a.contains(t), b.contains(t)) {
            (true, true) => 0,
            (true, false) => 1,
            (false, false) => 2,
            (false, true) => 3,
        };
        m[idx] += step;
    }
    m
}

proptest! {
    #[test]
    fn confusion_matches_grid(a in intervals(), b in intervals()) {
        let sa = IntervalSet::new(a.iter().copied(), DOMAIN).unwrap();
        let sb = IntervalSet::new(b.iter().copied(), DOMAIN).unwrap();
        let c = confusion(&sa, &sb).unwrap();
        let g = grid_confusion(&sa, &sb, 0.001);
        let endpoints = 2 * (sa.intervals().len() + sb.intervals().len());
        let tol = 0.002 * endpoints.max(1) as f64;
        // tp = A and B; fp = A - B; tn = neither; fn = B - A, as defined
        prop_assert!((c.tp_s - g[0]).abs() <= tol);
        prop_assert!((c.fp_s - g[1]).abs() <= tol);
        prop_assert!((c.tn_s - g[2]).abs() <= tol);
        prop_assert!((c.fn_s - g[3]).abs() <= tol);
        prop_assert!((c.total() - DOMAIN).abs() < 1e-9);
    }

    #[test]
    fn confusion_swaps_roles(a in intervals(), b in intervals()) {
        let sa = IntervalSet::new(a, DOMAIN).unwrap();
        let sb = IntervalSet::new(b, DOMAIN).unwrap();
        let ab = confusion(&sa, &sb).unwrap();
        let ba = confusion(&sb, &sa).unwrap();
        prop_assert!((ab.tp_s - ba.tp_s).abs() < 1e-9);
        prop_assert!((ab.tn_s - ba.tn_s).abs() < 1e-9);
        prop_assert!((ab.fp_s - ba.fn_s).abs() < 1e-9);
        prop_assert!((ab.agreement() - ba.agreement()).abs() < 1e-9);
    }

    #[test]
    fn set_algebra_measures(a in intervals(), b in intervals()) {
        let sa = IntervalSet::new(a, DOMAIN).unwrap();
        let sb = IntervalSet::new(b, DOMAIN).unwrap();
        let inter = sa.intersection(&sb).measure();
        let uni = sa.union(&sb).measure();
        prop_assert!((inter + uni - sa.measure() - sb.measure()).abs() < 1e-9);
        prop_assert!((sa.complement().measure() + sa.measure() - DOMAIN).abs() < 1e-9);
        prop_assert!((sa.difference(&sb).measure() - (sa.measure() - inter)).abs() < 1e-9);
    }

    #[test]
    fn postprocess_is_idempotent(b in boxes()) {
        let params = PostprocessParams::default();
        if let Ok((once, _)) = postprocess(b, &params) {
            let (twice, trace) = postprocess(once.clone(), &params).unwrap();
            prop_assert_eq!(twice, once.clone());
            prop_assert_eq!(trace, Default::default());
            for w in once.windows(2) {
                prop_assert!(w[0].end_s <= w[1].start_s);
            }
            prop_assert!(once.iter().all(|x| x.confidence >= 0.5));
        }
    }

    #[test]
    fn postprocess_ignores_input_order(b in boxes(), seed in any::<u64>()) {
        let params = PostprocessParams::default();
        let mut shuffled = b.clone();
        // deterministic Fisher-Yates from the seed
        let mut s = seed;
        for i in (1..shuffled.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        let x = postprocess(b, &params).map(|r| r.0).ok();
        let y = postprocess(shuffled, &params).map(|r| r.0).ok();
        prop_assert_eq!(x, y);
    }

    #[test]
    fn method1_is_symmetric(a in boxes(), b in boxes()) {
        let ab = match_boxes(&a, &b);
        let ba = match_boxes(&b, &a);
        prop_assert_eq!(ab.inspiration.matches, ba.inspiration.matches);
        prop_assert_eq!(ab.expiration.matches, ba.expiration.matches);
        prop_assert_eq!(ab.combined().agreement(), ba.combined().agreement());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn spectrogram_shape_follows_formula(len in 4096usize..60_000, seg_pow in 9u32..13, overlap_frac in 0.0..0.9f64) {
        let segment_len = 1usize << seg_pow;
        let overlap = ((segment_len as f64) * overlap_frac) as usize;
        let params = SpectrogramParams { segment_len, overlap, ..Default::default() };
        let clip = AudioClip::new((0..len).map(|i| ((i * 7919) % 101) as f32 / 200.0 - 0.25).collect(), 44_100, "p").unwrap();
        let spec = compute_spectrogram(&clip, &params).unwrap();
        let hop = segment_len - overlap;
        prop_assert_eq!(spec.n_frames(), (len - segment_len) / hop + 1);
        let bin_hz = 44_100.0 / segment_len as f64;
        let n_bins = (0..).take_while(|&k| (k as f64) * bin_hz < 2000.0).count();
        prop_assert_eq!(spec.n_bins(), n_bins);
    }
}
