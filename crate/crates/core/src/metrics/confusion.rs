//! Continuous-time confusion measures (seconds) and screening rates.

use serde::{Deserialize, Serialize};

use super::intervals::IntervalSet;
use crate::error::{Error, Result};

/// Which set difference counts as a false positive.
///
/// With `A` the reference annotation and `B` the hypothesis:
///
/// * `AsDefined`: FP = A − B and FN = ¬A − ¬B (= B − A), the definitions the
///   published evaluation states; annotated-but-unpredicted time is a FP.
/// * `Conventional`: FP = B − A and FN = A − B.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleConvention {
    #[default]
    AsDefined,
    Conventional,
}

impl RoleConvention {
    pub fn describe(self) -> &'static str {
        match self {
            RoleConvention::AsDefined => "FP = A - B, FN = not(A) - not(B)  (A = reference, B = hypothesis)",
            RoleConvention::Conventional => "FP = B - A, FN = A - B  (A = reference, B = hypothesis)",
        }
    }
}

/// Lebesgue measures, in seconds, of TP, FP, TN and FN.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMeasure {
    pub tp_s: f64,
    pub fp_s: f64,
    pub tn_s: f64,
    pub fn_s: f64,
}

impl ConfusionMeasure {
    pub fn total(&self) -> f64 {
        self.tp_s + self.fp_s + self.tn_s + self.fn_s
    }

    /// Time on which both sources agree (TP + TN).
    pub fn agreement(&self) -> f64 {
        self.tp_s + self.tn_s
    }

    pub fn rates(&self) -> ScreeningRates {
        ScreeningRates {
            sensitivity: ratio(self.tp_s, self.tp_s + self.fn_s),
            specificity: ratio(self.tn_s, self.tn_s + self.fp_s),
        }
    }
}

impl std::ops::Add for ConfusionMeasure {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp_s: self.tp_s + o.tp_s,
            fp_s: self.fp_s + o.fp_s,
            tn_s: self.tn_s + o.tn_s,
            fn_s: self.fn_s + o.fn_s,
        }
    }
}

impl std::iter::Sum for ConfusionMeasure {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| (num / den).clamp(0.0, 1.0))
}

/// Sensitivity TP/(TP+FN) and specificity TN/(TN+FP); `None` when the
/// denominator is zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ScreeningRates {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

/// Exact confusion measures of reference `a` against hypothesis `b` over
/// their common domain, using the verbatim role definitions.
pub fn confusion(a: &IntervalSet, b: &IntervalSet) -> Result<ConfusionMeasure> {
    confusion_with(a, b, RoleConvention::AsDefined)
}

pub fn confusion_with(a: &IntervalSet, b: &IntervalSet, roles: RoleConvention) -> Result<ConfusionMeasure> {
    let t = a.domain_s();
    if (t - b.domain_s()).abs() > 1e-9 {
        return Err(Error::DomainMismatch(format!("domains {} s and {} s differ", t, b.domain_s())));
    }
    let tp = a.intersection(b).measure();
    let a_only = (a.measure() - tp).max(0.0);
    let b_only = (b.measure() - tp).max(0.0);
    let tn = (t - tp - a_only - b_only).max(0.0);
    let (fp, fn_) = match roles {
        RoleConvention::AsDefined => (a_only, b_only),
        RoleConvention::Conventional => (b_only, a_only),
    };
    Ok(ConfusionMeasure { tp_s: tp, fp_s: fp, tn_s: tn, fn_s: fn_ })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(iv: &[(f64, f64)], t: f64) -> IntervalSet {
        IntervalSet::new(iv.iter().copied(), t).unwrap()
    }

    #[test]
    fn worked_example() {
        let c = confusion(&set(&[(0.0, 4.0)], 10.0), &set(&[(1.0, 5.0)], 10.0)).unwrap();
        assert_eq!(c, ConfusionMeasure { tp_s: 3.0, fp_s: 1.0, tn_s: 5.0, fn_s: 1.0 });
        let r = c.rates();
        assert_eq!(r.sensitivity, Some(0.75));
        assert!((r.specificity.unwrap() - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn identical_sets() {
        let a = set(&[(1.0, 2.0), (4.0, 6.5)], 10.0);
        let c = confusion(&a, &a).unwrap();
        assert_eq!((c.fp_s, c.fn_s), (0.0, 0.0));
        assert_eq!(c.rates(), ScreeningRates { sensitivity: Some(1.0), specificity: Some(1.0) });
    }

    #[test]
    fn empty_reference_full_hypothesis() {
        let c = confusion(&IntervalSet::empty(10.0), &set(&[(0.0, 10.0)], 10.0)).unwrap();
        assert_eq!(c, ConfusionMeasure { tp_s: 0.0, fp_s: 0.0, tn_s: 0.0, fn_s: 10.0 });
        assert_eq!(c.rates().specificity, None);
        assert_eq!(c.rates().sensitivity, Some(0.0));
    }

    #[test]
    fn conventional_swaps() {
        let a = set(&[(0.0, 4.0)], 10.0);
        let b = set(&[(1.0, 7.0)], 10.0);
        let v = confusion(&a, &b).unwrap();
        let c = confusion_with(&a, &b, RoleConvention::Conventional).unwrap();
        assert_eq!((v.fp_s, v.fn_s), (c.fn_s, c.fp_s));
    }

    #[test]
    fn domain_mismatch() {
        assert!(matches!(
            confusion(&IntervalSet::empty(10.0), &IntervalSet::empty(15.0)),
            Err(Error::DomainMismatch(_))
        ));
    }
}
