//! Sets of half-open time intervals within a file of known duration.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::phase::{PhaseBox, PhaseClass};

/// Sorted, disjoint, non-touching `[start, end)` intervals within `[0, domain_s]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalSet {
    intervals: Vec<(f64, f64)>,
    domain_s: f64,
}

impl IntervalSet {
    /// Normalize arbitrary intervals: clip to the domain, drop empty ones,
    /// sort and merge overlapping or touching neighbours.
    pub fn new(intervals: impl IntoIterator<Item = (f64, f64)>, domain_s: f64) -> Result<Self> {
        if !(domain_s.is_finite() && domain_s >= 0.0) {
            return Err(Error::InvalidParameter(format!("domain {domain_s} must be finite and non-negative")));
        }
        let mut v: Vec<(f64, f64)> = Vec::new();
        for (s, e) in intervals {
            if !(s.is_finite() && e.is_finite()) {
                return Err(Error::InvalidParameter(format!("non-finite interval [{s}, {e})")));
            }
            let (s, e) = (s.max(0.0), e.min(domain_s));
            if e > s {
                v.push((s, e));
            }
        }
        v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        Ok(Self { intervals: merge_sorted(v), domain_s })
    }

    pub fn empty(domain_s: f64) -> Self {
        Self { intervals: Vec::new(), domain_s }
    }

    /// Union of the boxes of one class (or of all boxes when `class` is `None`).
    pub fn from_boxes<'a>(
        boxes: impl IntoIterator<Item = &'a PhaseBox>,
        class: Option<PhaseClass>,
        domain_s: f64,
    ) -> Result<Self> {
        Self::new(
            boxes
                .into_iter()
                .filter(|b| class.is_none_or(|c| b.class == c))
                .map(|b| (b.start_s, b.end_s)),
            domain_s,
        )
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn domain_s(&self) -> f64 {
        self.domain_s
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Total covered length.
    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(s, e)| e - s).sum()
    }

    /// Restrict to `[0, t)` with `t` as the new domain.
    pub fn truncate(&self, t: f64) -> Self {
        let t = t.min(self.domain_s);
        let intervals = self
            .intervals
            .iter()
            .filter(|(s, _)| *s < t)
            .map(|&(s, e)| (s, e.min(t)))
            .collect();
        Self { intervals, domain_s: t }
    }

    pub fn complement(&self) -> Self {
        let mut out = Vec::with_capacity(self.intervals.len() + 1);
        let mut t = 0.0;
        for &(s, e) in &self.intervals {
            if s > t {
                out.push((t, s));
            }
            t = e;
        }
        if t < self.domain_s {
            out.push((t, self.domain_s));
        }
        Self { intervals: out, domain_s: self.domain_s }
    }

    pub fn intersection(&self, other: &Self) -> Self {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.intervals.len() && j < other.intervals.len() {
            let (a0, a1) = self.intervals[i];
            let (b0, b1) = other.intervals[j];
            let (s, e) = (a0.max(b0), a1.min(b1));
            if e > s {
                out.push((s, e));
            }
            if a1 < b1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self { intervals: out, domain_s: self.domain_s.min(other.domain_s) }
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut v: Vec<_> = self.intervals.iter().chain(&other.intervals).copied().collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        Self { intervals: merge_sorted(v), domain_s: self.domain_s.max(other.domain_s) }
    }

    /// `self − other`.
    pub fn difference(&self, other: &Self) -> Self {
        let c = Self { intervals: other.complement().intervals, domain_s: self.domain_s };
        let c = if other.domain_s < self.domain_s {
            // Everything past the other set's domain is outside it.
            c.union(&Self { intervals: vec![(other.domain_s, self.domain_s)], domain_s: self.domain_s })
        } else {
            c
        };
        let mut d = self.intersection(&c);
        d.domain_s = self.domain_s;
        d
    }

    pub fn contains(&self, t: f64) -> bool {
        self.intervals.iter().any(|&(s, e)| s <= t && t < e)
    }
}

fn merge_sorted(v: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
    for (s, e) in v {
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

/// Temporal Jaccard index of two closed intervals: |a ∩ b| / |a ∪ b|,
/// 0 when disjoint or when both are degenerate.
pub fn jaccard(a: (f64, f64), b: (f64, f64)) -> f64 {
    let inter = (a.1.min(b.1) - a.0.max(b.0)).max(0.0);
    let union = (a.1 - a.0).max(0.0) + (b.1 - b.0).max(0.0) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

pub fn box_jaccard(a: &PhaseBox, b: &PhaseBox) -> f64 {
    jaccard((a.start_s, a.end_s), (b.start_s, b.end_s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jaccard_cases() {
        assert_eq!(jaccard((0.0, 1.0), (0.0, 1.0)), 1.0);
        assert_eq!(jaccard((0.0, 1.0), (2.0, 3.0)), 0.0);
        assert!((jaccard((0.0, 1.0), (0.5, 1.5)) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(jaccard((1.0, 1.0), (1.0, 1.0)), 0.0);
        assert!((jaccard((0.0, 2.0), (0.1, 2.1)) - 1.9 / 2.1).abs() < 1e-12);
    }

    #[test]
    fn normalization_merges_touching() {
        let s = IntervalSet::new([(2.0, 3.0), (0.0, 1.0), (1.0, 1.5), (2.5, 4.0), (9.0, 12.0), (5.0, 5.0)], 10.0).unwrap();
        assert_eq!(s.intervals(), &[(0.0, 1.5), (2.0, 4.0), (9.0, 10.0)]);
        assert_eq!(s.measure(), 1.5 + 2.0 + 1.0);
    }

    #[test]
    fn algebra() {
        let a = IntervalSet::new([(0.0, 4.0)], 10.0).unwrap();
        let b = IntervalSet::new([(1.0, 5.0)], 10.0).unwrap();
        assert_eq!(a.intersection(&b).intervals(), &[(1.0, 4.0)]);
        assert_eq!(a.union(&b).intervals(), &[(0.0, 5.0)]);
        assert_eq!(a.difference(&b).intervals(), &[(0.0, 1.0)]);
        assert_eq!(b.difference(&a).intervals(), &[(4.0, 5.0)]);
        assert_eq!(a.complement().intervals(), &[(4.0, 10.0)]);
        assert_eq!(IntervalSet::empty(3.0).complement().intervals(), &[(0.0, 3.0)]);
        assert_eq!(a.truncate(2.0).intervals(), &[(0.0, 2.0)]);
        assert_eq!(a.truncate(2.0).domain_s(), 2.0);
    }
}
