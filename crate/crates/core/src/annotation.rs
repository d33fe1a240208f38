//! Per-file annotations, the annotation JSON format and corpus loading.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::{sort_boxes, PhaseBox, PhaseClass};

/// Times closer than this are treated as equal when checking bounds.
const TIME_EPS: f64 = 1e-9;

/// Phases of one file from one source (a human annotator or an algorithm).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    #[serde(rename = "file")]
    pub file_id: String,
    pub duration_s: f64,
    #[serde(default)]
    pub source: String,
    pub boxes: Vec<PhaseBox>,
}

/// What went wrong when checking an annotation's invariants.
#[derive(Debug, Clone, PartialEq)]
pub enum AnnotationIssue {
    BadDuration(f64),
    BadBox { index: usize, message: String },
    SameClassOverlap { first: usize, second: usize },
}

impl AnnotationIssue {
    fn describe(&self, ann: &Annotation) -> String {
        match self {
            AnnotationIssue::BadDuration(d) => format!("duration_s {d} must be positive and finite"),
            AnnotationIssue::BadBox { index, message } => format!("box {index}: {message}"),
            AnnotationIssue::SameClassOverlap { first, second } => {
                let (a, b) = (&ann.boxes[*first], &ann.boxes[*second]);
                format!(
                    "{} boxes [{}, {}] and [{}, {}] overlap",
                    a.class, a.start_s, a.end_s, b.start_s, b.end_s
                )
            }
        }
    }
}

impl Annotation {
    /// Build an annotation, sorting boxes by start time and checking invariants.
    ///
    /// Same-class overlaps are rejected with [`Error::InvariantViolation`];
    /// cross-class overlaps are logged as warnings.
    pub fn new(
        file_id: impl Into<String>,
        duration_s: f64,
        source: impl Into<String>,
        mut boxes: Vec<PhaseBox>,
    ) -> Result<Self> {
        sort_boxes(&mut boxes);
        let ann = Self { file_id: file_id.into(), duration_s, source: source.into(), boxes };
        ann.validate().map_err(|issue| Error::InvariantViolation(format!("{}: {}", ann.file_id, issue.describe(&ann))))?;
        ann.warn_cross_class_overlaps();
        Ok(ann)
    }

    /// Empty annotation (no phases) of the given length.
    pub fn empty(file_id: impl Into<String>, duration_s: f64, source: impl Into<String>) -> Self {
        Self { file_id: file_id.into(), duration_s, source: source.into(), boxes: Vec::new() }
    }

    /// Check invariants on an annotation whose boxes are already sorted.
    pub fn validate(&self) -> std::result::Result<(), AnnotationIssue> {
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(AnnotationIssue::BadDuration(self.duration_s));
        }
        for (index, b) in self.boxes.iter().enumerate() {
            b.validate(Some(self.duration_s))
                .map_err(|message| AnnotationIssue::BadBox { index, message })?;
        }
        for class in PhaseClass::ALL {
            let mut last: Option<usize> = None;
            for (i, b) in self.boxes.iter().enumerate().filter(|(_, b)| b.class == class) {
                if let Some(prev) = last {
                    if self.boxes[prev].end_s > b.start_s + TIME_EPS {
                        return Err(AnnotationIssue::SameClassOverlap { first: prev, second: i });
                    }
                }
                if last.is_none_or(|p| b.end_s > self.boxes[p].end_s) {
                    last = Some(i);
                }
            }
        }
        Ok(())
    }

    fn warn_cross_class_overlaps(&self) {
        for w in self.boxes.windows(2) {
            if w[0].class != w[1].class && w[0].overlap(&w[1]) > TIME_EPS {
                log::warn!(
                    "{}: {} [{}, {}] overlaps {} [{}, {}]",
                    self.file_id,
                    w[0].class,
                    w[0].start_s,
                    w[0].end_s,
                    w[1].class,
                    w[1].start_s,
                    w[1].end_s
                );
            }
        }
    }

    pub fn boxes_of(&self, class: PhaseClass) -> impl Iterator<Item = &PhaseBox> {
        self.boxes.iter().filter(move |b| b.class == class)
    }

    /// Round every time and confidence to microsecond (1e-6) precision, the
    /// resolution of the JSON format.
    pub fn quantized(mut self) -> Self {
        self.duration_s = quantize(self.duration_s);
        for b in &mut self.boxes {
            b.start_s = quantize(b.start_s);
            b.end_s = quantize(b.end_s);
            b.confidence = quantize(b.confidence);
        }
        self
    }

    pub fn count(&self, class: PhaseClass) -> usize {
        self.boxes_of(class).count()
    }
}

pub(crate) fn quantize(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// Serialize with six decimal places per number, one box per line.
pub fn write_annotation_json(ann: &Annotation) -> String {
    let mut out = String::new();
    let q = |s: &str| serde_json::to_string(s).expect("string serialization cannot fail");
    let _ = writeln!(out, "{{");
    let _ = writeln!(out, "  \"file\": {},", q(&ann.file_id));
    let _ = writeln!(out, "  \"duration_s\": {:.6},", ann.duration_s);
    let _ = writeln!(out, "  \"source\": {},", q(&ann.source));
    if ann.boxes.is_empty() {
        let _ = writeln!(out, "  \"boxes\": []");
    } else {
        let _ = writeln!(out, "  \"boxes\": [");
        for (i, b) in ann.boxes.iter().enumerate() {
            let sep = if i + 1 == ann.boxes.len() { "" } else { "," };
            let _ = writeln!(
                out,
                "    {{\"class\": \"{}\", \"start_s\": {:.6}, \"end_s\": {:.6}, \"confidence\": {:.6}}}{sep}",
                b.class, b.start_s, b.end_s, b.confidence
            );
        }
        let _ = writeln!(out, "  ]");
    }
    out.push_str("}\n");
    out
}

/// Parse the annotation JSON format.
///
/// Boxes out of time order are sorted (with a warning); same-class overlaps
/// and out-of-bounds boxes are rejected.
pub fn read_annotation_json(text: &str) -> Result<Annotation> {
    let raw: Annotation = serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.to_string()))?;
    from_raw(raw)
}

fn from_raw(mut raw: Annotation) -> Result<Annotation> {
    let sorted = raw.boxes.windows(2).all(|w| w[0].start_s <= w[1].start_s);
    if !sorted {
        log::warn!("{}: boxes out of time order; sorting", raw.file_id);
        sort_boxes(&mut raw.boxes);
    }
    Annotation::new(raw.file_id, raw.duration_s, raw.source, raw.boxes)
}

/// Annotations keyed by file id.
pub type Corpus = BTreeMap<String, Annotation>;

/// Load a corpus of annotations from a path.
///
/// * a directory: every `*.json` (except `manifest.json`) and `*.TextGrid` file
/// * a `.json` file holding one annotation object or an array of them
/// * a `.TextGrid` file
pub fn load_corpus(path: impl AsRef<Path>, source: Option<&str>) -> Result<Corpus> {
    let path = path.as_ref();
    let mut corpus = Corpus::new();
    let mut add = |mut ann: Annotation| -> Result<()> {
        if let Some(s) = source {
            ann.source = s.to_string();
        }
        if corpus.contains_key(&ann.file_id) {
            return Err(Error::InvariantViolation(format!("duplicate file id {:?}", ann.file_id)));
        }
        corpus.insert(ann.file_id.clone(), ann);
        Ok(())
    };

    if path.is_dir() {
        let mut entries: Vec<_> = std::fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        entries.sort();
        for p in entries {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            if name == "manifest.json" {
                continue;
            }
            match extension(&p).as_deref() {
                Some("json") => {
                    for ann in load_json_file(&p)? {
                        add(ann)?;
                    }
                }
                Some("textgrid") => add(load_textgrid_file(&p)?)?,
                _ => {}
            }
        }
    } else {
        match extension(path).as_deref() {
            Some("textgrid") => add(load_textgrid_file(path)?)?,
            _ => {
                for ann in load_json_file(path)? {
                    add(ann)?;
                }
            }
        }
    }
    Ok(corpus)
}

fn extension(p: &Path) -> Option<String> {
    p.extension().map(|e| e.to_string_lossy().to_ascii_lowercase())
}

fn load_json_file(path: &Path) -> Result<Vec<Annotation>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::parse(e.line(), format!("{}: {e}", path.display())))?;
    let raws: Vec<Annotation> = if value.is_array() {
        serde_json::from_value(value)
    } else {
        serde_json::from_value(value).map(|a| vec![a])
    }
    .map_err(|e| Error::parse(0, format!("{}: {e}", path.display())))?;
    raws.into_iter().map(from_raw).collect()
}

fn load_textgrid_file(path: &Path) -> Result<Annotation> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let text = crate::textgrid::decode_text(&bytes)?;
    crate::textgrid::parse_textgrid(&text, &crate::textgrid::ClassMap::default(), &id)
}

/// Phase counts for one source.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PhaseCounts {
    pub files: usize,
    pub inspiration: usize,
    pub expiration: usize,
}

/// Per-source and overall phase counts, the bookkeeping columns of a corpus
/// description table.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CountSummary {
    pub by_source: BTreeMap<String, PhaseCounts>,
    pub total: PhaseCounts,
}

pub fn count_phases<'a>(annotations: impl IntoIterator<Item = &'a Annotation>) -> CountSummary {
    let mut summary = CountSummary::default();
    for ann in annotations {
        let i = ann.count(PhaseClass::Inspiration);
        let e = ann.count(PhaseClass::Expiration);
        for c in [summary.by_source.entry(ann.source.clone()).or_default(), &mut summary.total] {
            c.files += 1;
            c.inspiration += i;
            c.expiration += e;
        }
    }
    summary
}

#[cfg(test)]
mod tests {
    use super::*;
    use PhaseClass::*;

    fn sample() -> Annotation {
        Annotation::new(
            "a",
            15.0,
            "annotator1",
            vec![
                PhaseBox::annotated(Inspiration, 0.0, 1.2),
                PhaseBox::annotated(Expiration, 1.2, 2.7),
                PhaseBox::annotated(Inspiration, 3.5, 4.7),
            ],
        )
        .unwrap()
    }

    #[test]
    fn json_roundtrip_and_six_decimals() {
        let a = sample();
        let text = write_annotation_json(&a);
        assert!(text.contains("\"end_s\": 1.200000"), "{text}");
        assert_eq!(read_annotation_json(&text).unwrap(), a);
        // byte-stable after one pass
        let again = write_annotation_json(&read_annotation_json(&text).unwrap());
        assert_eq!(again, text);
    }

    #[test]
    fn out_of_order_boxes_are_sorted() {
        let text = r#"{"file":"a","duration_s":10,"source":"x","boxes":[
            {"class":"expiration","start_s":2,"end_s":3,"confidence":1},
            {"class":"inspiration","start_s":0,"end_s":1,"confidence":1}]}"#;
        let a = read_annotation_json(text).unwrap();
        assert_eq!(a.boxes[0].class, Inspiration);
        assert_eq!(a.boxes[1].start_s, 2.0);
    }

    #[test]
    fn same_class_overlap_rejected() {
        let text = r#"{"file":"a","duration_s":10,"source":"x","boxes":[
            {"class":"inspiration","start_s":0,"end_s":2,"confidence":1},
            {"class":"inspiration","start_s":1,"end_s":3,"confidence":1}]}"#;
        assert!(matches!(read_annotation_json(text), Err(Error::InvariantViolation(_))));
    }

    #[test]
    fn cross_class_overlap_allowed() {
        let a = Annotation::new(
            "a",
            10.0,
            "x",
            vec![PhaseBox::annotated(Inspiration, 0.0, 2.0), PhaseBox::annotated(Expiration, 1.9, 3.0)],
        );
        assert!(a.is_ok());
    }

    #[test]
    fn box_beyond_duration_rejected() {
        let r = Annotation::new("a", 1.0, "x", vec![PhaseBox::annotated(Inspiration, 0.5, 1.5)]);
        assert!(matches!(r, Err(Error::InvariantViolation(_))));
    }

    #[test]
    fn malformed_json_reports_line() {
        let err = read_annotation_json("{\n\"file\": \"a\",\n oops }").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn counts() {
        assert_eq!(count_phases(std::iter::empty()).total, PhaseCounts::default());
        let a = sample();
        let s = count_phases([&a]);
        assert_eq!(s.total, PhaseCounts { files: 1, inspiration: 2, expiration: 1 });
        assert_eq!(s.by_source["annotator1"].inspiration, 2);
    }

    #[test]
    fn quantize_survives_text() {
        let a = Annotation::new("q", 15.0, "s", vec![PhaseBox::annotated(Inspiration, 0.1 + 0.2, 1.0 / 3.0)])
            .unwrap()
            .quantized();
        assert_eq!(read_annotation_json(&write_annotation_json(&a)).unwrap(), a);
    }
}
