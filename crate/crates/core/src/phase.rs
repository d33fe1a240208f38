//! Breathing-phase classes and scored temporal boxes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The two phase classes. Background is the absence of a box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseClass {
    Inspiration,
    Expiration,
}

impl PhaseClass {
    pub const ALL: [PhaseClass; 2] = [PhaseClass::Inspiration, PhaseClass::Expiration];

    pub fn as_str(self) -> &'static str {
        match self {
            PhaseClass::Inspiration => "inspiration",
            PhaseClass::Expiration => "expiration",
        }
    }

    pub fn other(self) -> Self {
        match self {
            PhaseClass::Inspiration => PhaseClass::Expiration,
            PhaseClass::Expiration => PhaseClass::Inspiration,
        }
    }
}

impl fmt::Display for PhaseClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PhaseClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inspiration" => Ok(PhaseClass::Inspiration),
            "expiration" => Ok(PhaseClass::Expiration),
            other => Err(Error::InvalidParameter(format!("unknown phase class {other:?}"))),
        }
    }
}

/// One detected or annotated breathing phase.
///
/// The time extent is `[start_s, end_s]` in seconds from the start of the
/// file; the frequency extent of a detector's 2-D box is not kept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseBox {
    pub class: PhaseClass,
    pub start_s: f64,
    pub end_s: f64,
    pub confidence: f64,
}

impl PhaseBox {
    pub fn new(class: PhaseClass, start_s: f64, end_s: f64, confidence: f64) -> Self {
        Self { class, start_s, end_s, confidence }
    }

    /// A human-annotated phase (confidence 1).
    pub fn annotated(class: PhaseClass, start_s: f64, end_s: f64) -> Self {
        Self::new(class, start_s, end_s, 1.0)
    }

    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }

    /// Length of the time shared with `other` (0 when disjoint).
    pub fn overlap(&self, other: &PhaseBox) -> f64 {
        (self.end_s.min(other.end_s) - self.start_s.max(other.start_s)).max(0.0)
    }

    /// Check the box invariants, with `duration_s` as the file length when known.
    pub fn validate(&self, duration_s: Option<f64>) -> std::result::Result<(), String> {
        let finite = self.start_s.is_finite() && self.end_s.is_finite() && self.confidence.is_finite();
        if !finite {
            return Err("non-finite value".into());
        }
        if self.start_s < 0.0 {
            return Err(format!("start_s {} is negative", self.start_s));
        }
        if self.end_s <= self.start_s {
            return Err(format!("end_s {} is not after start_s {}", self.end_s, self.start_s));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(format!("confidence {} outside [0, 1]", self.confidence));
        }
        if let Some(d) = duration_s {
            if self.end_s > d + 1e-9 {
                return Err(format!("end_s {} beyond file duration {d}", self.end_s));
            }
        }
        Ok(())
    }
}

/// Canonical ordering: start, then end, then class.
pub(crate) fn sort_boxes(boxes: &mut [PhaseBox]) {
    boxes.sort_by(|a, b| {
        a.start_s
            .total_cmp(&b.start_s)
            .then(a.end_s.total_cmp(&b.end_s))
            .then(a.class.cmp(&b.class))
            .then(b.confidence.total_cmp(&a.confidence))
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_wire_names() {
        assert_eq!(serde_json::to_string(&PhaseClass::Inspiration).unwrap(), "\"inspiration\"");
        assert_eq!("expiration".parse::<PhaseClass>().unwrap(), PhaseClass::Expiration);
        assert!("background".parse::<PhaseClass>().is_err());
    }

    #[test]
    fn validation() {
        let b = PhaseBox::new(PhaseClass::Inspiration, 0.5, 1.7, 0.93);
        assert!(b.validate(Some(2.0)).is_ok());
        assert!(b.validate(Some(1.0)).is_err());
        assert!(PhaseBox::new(PhaseClass::Inspiration, 1.0, 1.0, 0.5).validate(None).is_err());
        assert!(PhaseBox::new(PhaseClass::Inspiration, -0.1, 1.0, 0.5).validate(None).is_err());
        assert!(PhaseBox::new(PhaseClass::Inspiration, 0.0, 1.0, 1.2).validate(None).is_err());
        assert!(PhaseBox::new(PhaseClass::Inspiration, 0.0, f64::NAN, 1.0).validate(None).is_err());
    }
}
