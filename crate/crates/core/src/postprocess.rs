//! Detection clean-up: confidence pruning, duplicate suppression and
//! equal-shrink resolution of residual overlaps between successive phases.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::intervals::box_jaccard;
use crate::phase::{sort_boxes, PhaseBox};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostprocessParams {
    /// Boxes strictly below this confidence are dropped.
    pub confidence_min: f64,
    /// Pairs with temporal Jaccard above this are duplicates.
    pub duplicate_iou: f64,
    /// Overlaps longer than this fraction of the shorter box are logged.
    /// Diagnostic only: every overlap is resolved regardless.
    pub small_overlap_max_frac: f64,
    /// Compare only boxes of the same class when suppressing duplicates.
    pub duplicates_within_class: bool,
}

impl Default for PostprocessParams {
    fn default() -> Self {
        Self { confidence_min: 0.5, duplicate_iou: 0.5, small_overlap_max_frac: 0.10, duplicates_within_class: false }
    }
}

impl PostprocessParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("confidence_min", self.confidence_min),
            ("duplicate_iou", self.duplicate_iou),
            ("small_overlap_max_frac", self.small_overlap_max_frac),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be in (0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostprocessTrace {
    pub n_pruned: usize,
    pub n_duplicates_removed: usize,
    pub n_overlaps_resolved: usize,
}

impl std::ops::AddAssign for PostprocessTrace {
    fn add_assign(&mut self, o: Self) {
        self.n_pruned += o.n_pruned;
        self.n_duplicates_removed += o.n_duplicates_removed;
        self.n_overlaps_resolved += o.n_overlaps_resolved;
    }
}

/// Keep boxes with `confidence >= confidence_min`, preserving order.
pub fn prune_low_confidence(boxes: Vec<PhaseBox>, params: &PostprocessParams) -> (Vec<PhaseBox>, usize) {
    let before = boxes.len();
    let kept: Vec<_> = boxes.into_iter().filter(|b| b.confidence >= params.confidence_min).collect();
    let n = before - kept.len();
    (kept, n)
}

/// Priority for survival: higher confidence, then earlier start, then longer.
fn survival_order(a: &PhaseBox, b: &PhaseBox) -> std::cmp::Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then(a.start_s.total_cmp(&b.start_s))
        .then(b.duration().total_cmp(&a.duration()))
        .then(a.class.cmp(&b.class))
        .then(a.end_s.total_cmp(&b.end_s))
}

/// Remove the lower-priority member of every pair whose Jaccard exceeds
/// `duplicate_iou`. Visiting boxes in survival order makes the result
/// independent of input order. Output is in canonical time order.
pub fn suppress_duplicates(boxes: Vec<PhaseBox>, params: &PostprocessParams) -> (Vec<PhaseBox>, usize) {
    let mut ranked = boxes;
    ranked.sort_by(survival_order);
    let mut kept: Vec<PhaseBox> = Vec::with_capacity(ranked.len());
    let mut removed = 0;
    for b in ranked {
        let dup = kept.iter().any(|k| {
            (!params.duplicates_within_class || k.class == b.class) && box_jaccard(k, &b) > params.duplicate_iou
        });
        if dup {
            removed += 1;
        } else {
            kept.push(b);
        }
    }
    sort_boxes(&mut kept);
    (kept, removed)
}

/// Split every overlap between successive boxes at its midpoint, sweeping
/// left to right. Input must be sorted by start time.
pub fn resolve_small_overlaps(mut boxes: Vec<PhaseBox>, params: &PostprocessParams) -> Result<(Vec<PhaseBox>, usize)> {
    let mut count = 0;
    for i in 1..boxes.len() {
        let (left, right) = boxes.split_at_mut(i);
        let prev = &mut left[i - 1];
        let next = &mut right[0];
        let overlap = prev.end_s - next.start_s;
        if overlap <= 0.0 {
            continue;
        }
        let shorter = prev.duration().min(next.duration());
        if overlap > params.small_overlap_max_frac * shorter {
            log::warn!(
                "overlap of {overlap:.3} s between [{}, {}] and [{}, {}] exceeds {:.0}% of the shorter phase",
                prev.start_s,
                prev.end_s,
                next.start_s,
                next.end_s,
                100.0 * params.small_overlap_max_frac
            );
        }
        // Both boundaries move by overlap/2 and meet at the midpoint.
        let mid = 0.5 * (prev.end_s + next.start_s);
        if mid <= prev.start_s {
            return Err(Error::DegeneratePhase { start_s: prev.start_s, end_s: mid });
        }
        if mid >= next.end_s {
            return Err(Error::DegeneratePhase { start_s: mid, end_s: next.end_s });
        }
        prev.end_s = mid;
        next.start_s = mid;
        count += 1;
    }
    Ok((boxes, count))
}

/// Prune, suppress duplicates, sort, resolve overlaps.
pub fn postprocess(boxes: Vec<PhaseBox>, params: &PostprocessParams) -> Result<(Vec<PhaseBox>, PostprocessTrace)> {
    params.validate()?;
    let (boxes, n_pruned) = prune_low_confidence(boxes, params);
    let (mut boxes, n_duplicates_removed) = suppress_duplicates(boxes, params);
    sort_boxes(&mut boxes);
    let (boxes, n_overlaps_resolved) = resolve_small_overlaps(boxes, params)?;
    Ok((boxes, PostprocessTrace { n_pruned, n_duplicates_removed, n_overlaps_resolved }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::PhaseClass::{self, *};

    fn b(c: PhaseClass, s: f64, e: f64, conf: f64) -> PhaseBox {
        PhaseBox::new(c, s, e, conf)
    }

    fn p() -> PostprocessParams {
        PostprocessParams::default()
    }

    #[test]
    fn prune_boundary_is_strict() {
        let boxes = vec![b(Inspiration, 0.0, 1.0, 0.9), b(Expiration, 1.0, 2.0, 0.49), b(Inspiration, 3.0, 4.0, 0.5)];
        let (kept, n) = prune_low_confidence(boxes, &p());
        assert_eq!(n, 1);
        assert_eq!(kept.iter().map(|b| b.confidence).collect::<Vec<_>>(), vec![0.9, 0.5]);
        assert_eq!(prune_low_confidence(vec![], &p()), (vec![], 0));
    }

    #[test]
    fn duplicate_pair_keeps_higher_confidence() {
        let (kept, n) = suppress_duplicates(vec![b(Inspiration, 0.1, 2.1, 0.7), b(Inspiration, 0.0, 2.0, 0.9)], &p());
        assert_eq!((kept, n), (vec![b(Inspiration, 0.0, 2.0, 0.9)], 1));
        let (kept, n) = suppress_duplicates(vec![b(Inspiration, 0.0, 1.0, 0.9), b(Inspiration, 2.0, 3.0, 0.9)], &p());
        assert_eq!((kept.len(), n), (2, 0));
    }

    #[test]
    fn three_mutual_duplicates() {
        let boxes = vec![b(Inspiration, 0.1, 2.0, 0.8), b(Inspiration, 0.0, 2.0, 0.9), b(Expiration, 0.0, 2.1, 0.7)];
        let (kept, n) = suppress_duplicates(boxes, &p());
        assert_eq!(n, 2);
        assert_eq!(kept, vec![b(Inspiration, 0.0, 2.0, 0.9)]);
    }

    #[test]
    fn duplicate_ties() {
        // equal confidence: the later start is removed
        let (kept, _) = suppress_duplicates(vec![b(Inspiration, 0.1, 2.0, 0.8), b(Inspiration, 0.0, 2.0, 0.8)], &p());
        assert_eq!(kept[0].start_s, 0.0);
        // equal confidence and start: the shorter is removed
        let (kept, _) = suppress_duplicates(vec![b(Inspiration, 0.0, 1.8, 0.8), b(Inspiration, 0.0, 2.0, 0.8)], &p());
        assert_eq!(kept[0].end_s, 2.0);
    }

    #[test]
    fn within_class_option() {
        let params = PostprocessParams { duplicates_within_class: true, ..p() };
        let (kept, n) = suppress_duplicates(vec![b(Inspiration, 0.0, 2.0, 0.9), b(Expiration, 0.0, 2.0, 0.8)], &params);
        assert_eq!((kept.len(), n), (2, 0));
    }

    #[test]
    fn single_overlap_split() {
        let (out, n) = resolve_small_overlaps(vec![b(Inspiration, 0.0, 5.2, 1.0), b(Expiration, 5.0, 10.0, 1.0)], &p()).unwrap();
        assert_eq!(n, 1);
        assert_eq!(out, vec![b(Inspiration, 0.0, 5.1, 1.0), b(Expiration, 5.1, 10.0, 1.0)]);
    }

    #[test]
    fn chained_overlaps() {
        let boxes = vec![b(Inspiration, 0.0, 1.0, 1.0), b(Expiration, 0.9, 2.0, 1.0), b(Inspiration, 1.9, 3.0, 1.0)];
        let (out, n) = resolve_small_overlaps(boxes, &p()).unwrap();
        assert_eq!(n, 2);
        let spans: Vec<_> = out.iter().map(|b| (b.start_s, b.end_s)).collect();
        assert_eq!(spans, vec![(0.0, 0.95), (0.95, 1.95), (1.95, 3.0)]);
    }

    #[test]
    fn disjoint_unchanged() {
        let boxes = vec![b(Inspiration, 0.0, 1.0, 1.0), b(Expiration, 1.0, 2.0, 1.0)];
        assert_eq!(resolve_small_overlaps(boxes.clone(), &p()).unwrap(), (boxes, 0));
    }

    #[test]
    fn contained_box_is_degenerate() {
        let boxes = vec![b(Inspiration, 0.0, 10.0, 1.0), b(Expiration, 1.0, 2.0, 1.0)];
        assert!(matches!(resolve_small_overlaps(boxes, &p()), Err(Error::DegeneratePhase { .. })));
    }

    #[test]
    fn full_pipeline_trace() {
        let boxes = vec![
            b(Expiration, 8.0, 9.0, 0.3),
            b(Inspiration, 0.0, 2.0, 0.9),
            b(Inspiration, 0.1, 2.1, 0.7),
            b(Expiration, 1.9, 4.0, 0.8),
        ];
        let (out, trace) = postprocess(boxes, &p()).unwrap();
        assert_eq!(trace, PostprocessTrace { n_pruned: 1, n_duplicates_removed: 1, n_overlaps_resolved: 1 });
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].end_s, out[1].start_s);
        let (again, t2) = postprocess(out.clone(), &p()).unwrap();
        assert_eq!(again, out);
        assert_eq!(t2, PostprocessTrace::default());
        assert_eq!(postprocess(vec![], &p()).unwrap(), (vec![], PostprocessTrace::default()));
    }

    #[test]
    fn params_validated() {
        let bad = PostprocessParams { confidence_min: 0.0, ..p() };
        assert!(postprocess(vec![], &bad).is_err());
    }
}
