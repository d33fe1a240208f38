//! Praat TextGrid reader and writer (interval tiers).
//!
//! Long ("intervals [1]:" with `key = value` lines) and short (bare values)
//! text forms share one token stream once keys, brackets and punctuation are
//! dropped, so a single parser handles both.

use std::fmt::Write as _;

use crate::annotation::Annotation;
use crate::error::{Error, Result};
use crate::phase::{sort_boxes, PhaseBox, PhaseClass};

/// How tier labels map to phase classes.
#[derive(Debug, Clone)]
pub struct ClassMap {
    rules: Vec<(String, PhaseClass)>,
    /// Match labels by prefix rather than exactly.
    pub prefix: bool,
    /// Unknown non-empty labels are errors instead of background.
    pub strict: bool,
}

impl Default for ClassMap {
    /// Case-insensitive prefixes `i` → inspiration and `e` → expiration.
    fn default() -> Self {
        Self {
            rules: vec![("i".into(), PhaseClass::Inspiration), ("e".into(), PhaseClass::Expiration)],
            prefix: true,
            strict: false,
        }
    }
}

impl ClassMap {
    /// Exact (case-insensitive) label mapping.
    pub fn exact(rules: impl IntoIterator<Item = (impl Into<String>, PhaseClass)>) -> Self {
        Self {
            rules: rules.into_iter().map(|(l, c)| (l.into().to_lowercase(), c)).collect(),
            prefix: false,
            strict: false,
        }
    }

    pub fn strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    /// Class for a label; `None` means background.
    pub fn classify(&self, label: &str) -> Option<PhaseClass> {
        let label = label.trim().to_lowercase();
        if label.is_empty() {
            return None;
        }
        self.rules
            .iter()
            .find(|(pat, _)| if self.prefix { label.starts_with(pat.as_str()) } else { label == *pat })
            .map(|(_, c)| *c)
    }
}

/// Decode TextGrid bytes: UTF-8 (optional BOM) or UTF-16 with BOM.
pub fn decode_text(bytes: &[u8]) -> Result<String> {
    let utf16 = |le: bool| -> Result<String> {
        let body = &bytes[2..];
        if body.len() % 2 != 0 {
            return Err(Error::MalformedTextGrid { line: 0, message: "odd byte count in UTF-16 text".into() });
        }
        let units: Vec<u16> = body
            .chunks_exact(2)
            .map(|c| if le { u16::from_le_bytes([c[0], c[1]]) } else { u16::from_be_bytes([c[0], c[1]]) })
            .collect();
        String::from_utf16(&units).map_err(|e| Error::MalformedTextGrid { line: 0, message: e.to_string() })
    };
    match bytes {
        [0xFF, 0xFE, ..] => utf16(true),
        [0xFE, 0xFF, ..] => utf16(false),
        [0xEF, 0xBB, 0xBF, rest @ ..] => std::str::from_utf8(rest)
            .map(str::to_owned)
            .map_err(|e| Error::MalformedTextGrid { line: 0, message: e.to_string() }),
        _ => std::str::from_utf8(bytes)
            .map(str::to_owned)
            .map_err(|e| Error::MalformedTextGrid { line: 0, message: e.to_string() }),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Str(String),
    Num(f64),
    Flag(bool),
}

#[derive(Debug)]
struct Token {
    tok: Tok,
    line: usize,
}

fn malformed(line: usize, message: impl Into<String>) -> Error {
    Error::MalformedTextGrid { line, message: message.into() }
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut line = 1;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '\n' => {
                line += 1;
                i += 1;
            }
            '"' => {
                let start_line = line;
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return Err(malformed(start_line, "unterminated string")),
                        Some('"') if chars.get(i + 1) == Some(&'"') => {
                            s.push('"');
                            i += 2;
                        }
                        Some('"') => {
                            i += 1;
                            break;
                        }
                        Some(&ch) => {
                            if ch == '\n' {
                                line += 1;
                            }
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                out.push(Token { tok: Tok::Str(s), line: start_line });
            }
            '[' => {
                while i < chars.len() && chars[i] != ']' {
                    if chars[i] == '\n' {
                        return Err(malformed(line, "unclosed '['"));
                    }
                    i += 1;
                }
                i += 1;
            }
            '!' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '<' => {
                let start = i;
                while i < chars.len() && chars[i] != '>' {
                    i += 1;
                }
                let word: String = chars[start + 1..i.min(chars.len())].iter().collect();
                i += 1;
                match word.as_str() {
                    "exists" => out.push(Token { tok: Tok::Flag(true), line }),
                    "absent" => out.push(Token { tok: Tok::Flag(false), line }),
                    other => return Err(malformed(line, format!("unknown flag <{other}>"))),
                }
            }
            c if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => {
                let start = i;
                while i < chars.len() && !chars[i].is_whitespace() {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                let v: f64 = word.parse().map_err(|_| malformed(line, format!("bad number {word:?}")))?;
                out.push(Token { tok: Tok::Num(v), line });
            }
            c if c.is_alphabetic() => {
                // Keys such as `xmin`, `intervals`, `size`: skip the word.
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
            }
            _ => i += 1,
        }
    }
    Ok(out)
}

struct Cursor {
    toks: Vec<Token>,
    pos: usize,
}

impl Cursor {
    fn line(&self) -> usize {
        self.toks.get(self.pos).or(self.toks.last()).map_or(0, |t| t.line)
    }

    fn next(&mut self, what: &str) -> Result<&Token> {
        let line = self.line();
        let t = self.toks.get(self.pos).ok_or_else(|| malformed(line, format!("unexpected end of file, expected {what}")))?;
        self.pos += 1;
        Ok(t)
    }

    fn num(&mut self, what: &str) -> Result<(f64, usize)> {
        let t = self.next(what)?;
        match t.tok {
            Tok::Num(v) if v.is_finite() => Ok((v, t.line)),
            _ => Err(malformed(t.line, format!("expected number for {what}"))),
        }
    }

    fn count(&mut self, what: &str) -> Result<usize> {
        let (v, line) = self.num(what)?;
        if v < 0.0 || v.fract() != 0.0 {
            return Err(malformed(line, format!("{what} must be a non-negative integer")));
        }
        Ok(v as usize)
    }

    fn string(&mut self, what: &str) -> Result<(String, usize)> {
        let t = self.next(what)?;
        match &t.tok {
            Tok::Str(s) => Ok((s.clone(), t.line)),
            _ => Err(malformed(t.line, format!("expected string for {what}"))),
        }
    }
}

/// Parse a TextGrid into an [`Annotation`] with confidence-1 boxes.
///
/// Every interval tier contributes boxes whose labels map to a class;
/// point tiers are skipped.
pub fn parse_textgrid(text: &str, class_map: &ClassMap, file_id: &str) -> Result<Annotation> {
    let mut cur = Cursor { toks: tokenize(text)?, pos: 0 };

    let (file_type, line) = cur.string("file type")?;
    if file_type != "ooTextFile" {
        return Err(malformed(line, format!("file type {file_type:?} is not ooTextFile")));
    }
    let (class, line) = cur.string("object class")?;
    if class != "TextGrid" {
        return Err(malformed(line, format!("object class {class:?} is not TextGrid")));
    }
    let (xmin, _) = cur.num("xmin")?;
    let (xmax, line) = cur.num("xmax")?;
    if xmax <= xmin {
        return Err(malformed(line, "xmax must exceed xmin"));
    }
    if xmin != 0.0 {
        return Err(malformed(line, format!("xmin {xmin} must be 0")));
    }

    let t = cur.next("tiers flag")?;
    let has_tiers = match t.tok {
        Tok::Flag(b) => b,
        _ => return Err(malformed(t.line, "expected <exists> or <absent>")),
    };
    let n_tiers = if has_tiers { cur.count("tier count")? } else { 0 };

    let mut boxes = Vec::new();
    for _ in 0..n_tiers {
        let (kind, line) = cur.string("tier class")?;
        let _name = cur.string("tier name")?;
        let (tmin, _) = cur.num("tier xmin")?;
        let (tmax, tline) = cur.num("tier xmax")?;
        if tmin < xmin - 1e-9 || tmax > xmax + 1e-9 || tmax < tmin {
            return Err(malformed(tline, format!("tier bounds [{tmin}, {tmax}] outside [{xmin}, {xmax}]")));
        }
        let n = cur.count("interval count")?;
        match kind.as_str() {
            "IntervalTier" => {
                for _ in 0..n {
                    let (a, _) = cur.num("interval xmin")?;
                    let (b, iline) = cur.num("interval xmax")?;
                    let (label, lline) = cur.string("interval text")?;
                    if a < xmin - 1e-9 || b > xmax + 1e-9 {
                        return Err(malformed(iline, format!("interval [{a}, {b}] outside file bounds [{xmin}, {xmax}]")));
                    }
                    if b < a {
                        return Err(malformed(iline, format!("interval [{a}, {b}] ends before it starts")));
                    }
                    match class_map.classify(&label) {
                        Some(c) => {
                            if b <= a {
                                return Err(malformed(iline, format!("labelled interval [{a}, {b}] is empty")));
                            }
                            boxes.push(PhaseBox::annotated(c, a.max(0.0), b.min(xmax)));
                        }
                        None if class_map.strict && !label.trim().is_empty() => {
                            return Err(Error::UnknownLabel { label, line: lline });
                        }
                        None => {}
                    }
                }
            }
            "TextTier" => {
                for _ in 0..n {
                    cur.num("point time")?;
                    cur.string("point mark")?;
                }
            }
            other => return Err(malformed(line, format!("unsupported tier class {other:?}"))),
        }
    }

    sort_boxes(&mut boxes);
    let ann = Annotation::empty(file_id, xmax, "");
    let ann = Annotation { boxes, ..ann };
    match ann.validate() {
        Ok(()) => {}
        Err(crate::annotation::AnnotationIssue::SameClassOverlap { first, second }) => {
            let (a, b) = (&ann.boxes[first], &ann.boxes[second]);
            return Err(Error::OverlapWithinClass {
                file: file_id.to_string(),
                message: format!("{} [{}, {}] and [{}, {}]", a.class, a.start_s, a.end_s, b.start_s, b.end_s),
            });
        }
        Err(other) => return Err(malformed(0, format!("{other:?}"))),
    }
    Annotation::new(ann.file_id, ann.duration_s, ann.source, ann.boxes)
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

/// Tier layout used when writing: one tier per class, gaps filled with empty
/// intervals.
fn tiers(ann: &Annotation) -> Vec<(&'static str, Vec<(f64, f64, &'static str)>)> {
    PhaseClass::ALL
        .iter()
        .map(|&class| {
            let mut ivs = Vec::new();
            let mut t = 0.0;
            for b in ann.boxes_of(class) {
                if b.start_s > t {
                    ivs.push((t, b.start_s, ""));
                }
                ivs.push((b.start_s, b.end_s, class.as_str()));
                t = b.end_s;
            }
            if t < ann.duration_s || ivs.is_empty() {
                ivs.push((t, ann.duration_s, ""));
            }
            (class.as_str(), ivs)
        })
        .collect()
}

/// Write the long ("verbose") TextGrid text form.
pub fn serialize_long(ann: &Annotation) -> String {
    let mut s = String::new();
    let tiers = tiers(ann);
    let _ = writeln!(s, "File type = \"ooTextFile\"\nObject class = \"TextGrid\"\n");
    let _ = writeln!(s, "xmin = 0\nxmax = {}\ntiers? <exists>\nsize = {}\nitem []:", ann.duration_s, tiers.len());
    for (ti, (name, ivs)) in tiers.iter().enumerate() {
        let _ = writeln!(s, "    item [{}]:", ti + 1);
        let _ = writeln!(s, "        class = \"IntervalTier\"\n        name = {}", quote(name));
        let _ = writeln!(s, "        xmin = 0\n        xmax = {}\n        intervals: size = {}", ann.duration_s, ivs.len());
        for (ii, (a, b, label)) in ivs.iter().enumerate() {
            let _ = writeln!(s, "        intervals [{}]:", ii + 1);
            let _ = writeln!(s, "            xmin = {a}\n            xmax = {b}\n            text = {}", quote(label));
        }
    }
    s
}

/// Write the short TextGrid text form.
pub fn serialize_short(ann: &Annotation) -> String {
    let mut s = String::new();
    let tiers = tiers(ann);
    let _ = writeln!(s, "File type = \"ooTextFile\"\nObject class = \"TextGrid\"\n");
    let _ = writeln!(s, "0\n{}\n<exists>\n{}", ann.duration_s, tiers.len());
    for (name, ivs) in &tiers {
        let _ = writeln!(s, "\"IntervalTier\"\n{}\n0\n{}\n{}", quote(name), ann.duration_s, ivs.len());
        for (a, b, label) in ivs {
            let _ = writeln!(s, "{a}\n{b}\n{}", quote(label));
        }
    }
    s
}
