//! Box-level agreement: same-class pairs with temporal Jaccard above 0.5,
//! matched one-to-one.

use serde::Serialize;

use super::intervals::box_jaccard;
use crate::phase::{PhaseBox, PhaseClass};

/// Jaccard index a same-class pair must exceed to count as agreement.
pub const AGREEMENT_JACCARD: f64 = 0.5;

/// Match counts for one class (or for both classes pooled).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MatchCounts {
    pub n_a: usize,
    pub n_b: usize,
    pub matches: usize,
}

impl MatchCounts {
    /// Agreement 2M / (n_A + n_B); `None` when neither side has boxes.
    pub fn agreement(&self) -> Option<f64> {
        let den = self.n_a + self.n_b;
        (den > 0).then(|| 2.0 * self.matches as f64 / den as f64)
    }

    /// Fraction of A's boxes that were matched.
    pub fn recall_a(&self) -> Option<f64> {
        (self.n_a > 0).then(|| self.matches as f64 / self.n_a as f64)
    }

    pub fn recall_b(&self) -> Option<f64> {
        (self.n_b > 0).then(|| self.matches as f64 / self.n_b as f64)
    }
}

impl std::ops::Add for MatchCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self { n_a: self.n_a + o.n_a, n_b: self.n_b + o.n_b, matches: self.matches + o.matches }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Method1Result {
    pub inspiration: MatchCounts,
    pub expiration: MatchCounts,
    /// Matched pairs as (index in A, index in B, Jaccard).
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_a: Vec<usize>,
    pub unmatched_b: Vec<usize>,
}

impl Method1Result {
    pub fn class(&self, class: PhaseClass) -> MatchCounts {
        match class {
            PhaseClass::Inspiration => self.inspiration,
            PhaseClass::Expiration => self.expiration,
        }
    }

    /// Both classes pooled.
    pub fn combined(&self) -> MatchCounts {
        self.inspiration + self.expiration
    }
}

/// Greedy one-to-one matching by descending Jaccard (ties: earlier A box).
pub fn match_boxes(a: &[PhaseBox], b: &[PhaseBox]) -> Method1Result {
    let mut candidates: Vec<(usize, usize, f64)> = Vec::new();
    for (i, ba) in a.iter().enumerate() {
        for (j, bb) in b.iter().enumerate() {
            if ba.class != bb.class {
                continue;
            }
            let jac = box_jaccard(ba, bb);
            if jac > AGREEMENT_JACCARD {
                candidates.push((i, j, jac));
            }
        }
    }
    candidates.sort_by(|x, y| {
        y.2.total_cmp(&x.2)
            .then(a[x.0].start_s.total_cmp(&a[y.0].start_s))
            .then(x.0.cmp(&y.0))
            .then(x.1.cmp(&y.1))
    });

    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut pairs = Vec::new();
    for (i, j, jac) in candidates {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            pairs.push((i, j, jac));
        }
    }

    let counts = |class: PhaseClass| MatchCounts {
        n_a: a.iter().filter(|x| x.class == class).count(),
        n_b: b.iter().filter(|x| x.class == class).count(),
        matches: pairs.iter().filter(|(i, _, _)| a[*i].class == class).count(),
    };
    Method1Result {
        inspiration: counts(PhaseClass::Inspiration),
        expiration: counts(PhaseClass::Expiration),
        unmatched_a: (0..a.len()).filter(|&i| !used_a[i]).collect(),
        unmatched_b: (0..b.len()).filter(|&j| !used_b[j]).collect(),
        pairs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use PhaseClass::*;

    fn b(c: PhaseClass, s: f64, e: f64) -> PhaseBox {
        PhaseBox::annotated(c, s, e)
    }

    #[test]
    fn identical_sets_fully_agree() {
        let a = vec![b(Inspiration, 0.0, 1.0), b(Expiration, 1.0, 2.5), b(Inspiration, 3.0, 4.0)];
        let r = match_boxes(&a, &a);
        assert_eq!(r.combined().matches, 3);
        assert_eq!(r.inspiration.agreement(), Some(1.0));
        assert_eq!(r.expiration.agreement(), Some(1.0));
        assert!(r.unmatched_a.is_empty() && r.unmatched_b.is_empty());
    }

    #[test]
    fn class_mismatch() {
        let r = match_boxes(&[b(Inspiration, 0.0, 2.0)], &[b(Expiration, 0.0, 2.0)]);
        assert_eq!(r.combined().matches, 0);
        assert_eq!(r.combined().agreement(), Some(0.0));
        assert_eq!(r.inspiration.agreement(), Some(0.0));
    }

    #[test]
    fn jaccard_third_is_not_agreement() {
        let r = match_boxes(&[b(Inspiration, 0.0, 2.0)], &[b(Inspiration, 1.0, 3.0)]);
        assert_eq!(r.combined().matches, 0);
    }

    #[test]
    fn exactly_half_is_not_agreement() {
        // J = 1 / 2 exactly
        let r = match_boxes(&[b(Inspiration, 0.0, 2.0)], &[b(Inspiration, 0.0, 1.0)]);
        assert_eq!(r.combined().matches, 0);
    }

    #[test]
    fn one_to_one() {
        // Two hypothesis boxes both overlapping one reference box strongly.
        let r = match_boxes(&[b(Inspiration, 0.0, 2.0)], &[b(Inspiration, 0.0, 1.9), b(Inspiration, 0.1, 2.0)]);
        assert_eq!(r.combined().matches, 1);
        assert_eq!(r.unmatched_b.len(), 1);
        assert_eq!(r.combined().agreement(), Some(2.0 / 3.0));
        assert_eq!(r.combined().recall_a(), Some(1.0));
        assert_eq!(r.combined().recall_b(), Some(0.5));
    }

    #[test]
    fn no_boxes_is_undefined() {
        let r = match_boxes(&[], &[]);
        assert_eq!(r.combined().agreement(), None);
    }
}
