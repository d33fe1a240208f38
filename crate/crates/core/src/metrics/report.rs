//! Corpus-level comparison of two annotation sources, and multi-source
//! reports laid out as box-agreement, sensitivity/specificity and kappa tables.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::confusion::{confusion_with, ConfusionMeasure, RoleConvention, ScreeningRates};
use super::intervals::IntervalSet;
use super::kappa::{kappa_with_ci, KappaResult, DEFAULT_BOOTSTRAP, DEFAULT_PERMUTATIONS};
use super::method1::{match_boxes, MatchCounts};
use crate::annotation::Corpus;
use crate::error::{Error, Result};
use crate::phase::PhaseClass;

/// Durations closer than this are considered equal.
const DURATION_TOL_S: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub n_permutations: usize,
    pub n_bootstrap: usize,
    pub seed: u64,
    pub conventional_roles: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { n_permutations: DEFAULT_PERMUTATIONS, n_bootstrap: DEFAULT_BOOTSTRAP, seed: 0, conventional_roles: false }
    }
}

impl EvalConfig {
    pub fn roles(&self) -> RoleConvention {
        if self.conventional_roles {
            RoleConvention::Conventional
        } else {
            RoleConvention::AsDefined
        }
    }
}

/// Rows of the report: each class and both classes together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassSel {
    Inspiration,
    Expiration,
    Both,
}

impl ClassSel {
    pub const ALL: [ClassSel; 3] = [ClassSel::Inspiration, ClassSel::Expiration, ClassSel::Both];

    pub fn label(self) -> &'static str {
        match self {
            ClassSel::Inspiration => "Inspiration",
            ClassSel::Expiration => "Expiration",
            ClassSel::Both => "Both phases",
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            ClassSel::Inspiration => "inspiration",
            ClassSel::Expiration => "expiration",
            ClassSel::Both => "both",
        }
    }

    fn class(self) -> Option<PhaseClass> {
        match self {
            ClassSel::Inspiration => Some(PhaseClass::Inspiration),
            ClassSel::Expiration => Some(PhaseClass::Expiration),
            ClassSel::Both => None,
        }
    }
}

/// Kappa, or why it could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum KappaOutcome {
    Ok(KappaResult),
    DegenerateChance,
    InsufficientFiles { n_files: usize },
}

impl KappaOutcome {
    pub fn value(&self) -> Option<&KappaResult> {
        match self {
            KappaOutcome::Ok(k) => Some(k),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassFileResult {
    pub boxes: MatchCounts,
    pub confusion: ConfusionMeasure,
    pub rates: ScreeningRates,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileResult {
    pub file_id: String,
    pub duration_s: f64,
    pub inspiration: ClassFileResult,
    pub expiration: ClassFileResult,
    pub both: ClassFileResult,
}

impl FileResult {
    pub fn class(&self, sel: ClassSel) -> &ClassFileResult {
        match sel {
            ClassSel::Inspiration => &self.inspiration,
            ClassSel::Expiration => &self.expiration,
            ClassSel::Both => &self.both,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassSummary {
    pub class: ClassSel,
    pub boxes: MatchCounts,
    /// 2M / (n_A + n_B) over the corpus.
    pub box_agreement: Option<f64>,
    pub recall_reference: Option<f64>,
    pub recall_hypothesis: Option<f64>,
    /// Summed over files.
    pub confusion: ConfusionMeasure,
    /// Duration-weighted mean of per-file rates, skipping undefined ones.
    pub rates: ScreeningRates,
    pub n_undefined_sensitivity: usize,
    pub n_undefined_specificity: usize,
    /// Rates of the summed confusion measures.
    pub pooled_rates: ScreeningRates,
    pub kappa: KappaOutcome,
}

/// One reference-vs-hypothesis comparison over a corpus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub reference: String,
    pub hypothesis: String,
    pub role_convention: String,
    pub config: EvalConfig,
    pub n_files: usize,
    pub total_duration_s: f64,
    pub classes: Vec<ClassSummary>,
    pub files: Vec<FileResult>,
}

impl AgreementReport {
    pub fn label(&self) -> String {
        format!("{} vs {}", self.reference, self.hypothesis)
    }

    pub fn class(&self, sel: ClassSel) -> &ClassSummary {
        self.classes.iter().find(|c| c.class == sel).expect("all three classes present")
    }
}

fn sets(ann: &crate::Annotation, sel: ClassSel, domain: f64) -> Result<IntervalSet> {
    IntervalSet::from_boxes(&ann.boxes, sel.class(), domain)
}

/// Compare hypothesis annotations `hyp` against reference `reference`.
///
/// Both corpora must hold the same file ids with equal durations.
pub fn evaluate_corpus(
    reference: &Corpus,
    hyp: &Corpus,
    reference_label: &str,
    hyp_label: &str,
    config: &EvalConfig,
) -> Result<AgreementReport> {
    for id in reference.keys() {
        if !hyp.contains_key(id) {
            return Err(Error::MissingFile(id.clone()));
        }
    }
    for id in hyp.keys() {
        if !reference.contains_key(id) {
            return Err(Error::MissingFile(id.clone()));
        }
    }
    let roles = config.roles();
    let ids: Vec<&String> = reference.keys().collect();

    let files: Vec<FileResult> = ids
        .par_iter()
        .map(|id| -> Result<FileResult> {
            let a = &reference[*id];
            let b = &hyp[*id];
            if (a.duration_s - b.duration_s).abs() > DURATION_TOL_S {
                return Err(Error::DomainMismatch(format!(
                    "{id}: reference lasts {} s, hypothesis {} s",
                    a.duration_s, b.duration_s
                )));
            }
            let t = a.duration_s;
            let m1 = match_boxes(&a.boxes, &b.boxes);
            let per = |sel: ClassSel| -> Result<ClassFileResult> {
                let c = confusion_with(&sets(a, sel, t)?, &sets(b, sel, t)?, roles)?;
                let boxes = match sel.class() {
                    Some(class) => m1.class(class),
                    None => m1.combined(),
                };
                Ok(ClassFileResult { boxes, confusion: c, rates: c.rates() })
            };
            Ok(FileResult {
                file_id: (*id).clone(),
                duration_s: t,
                inspiration: per(ClassSel::Inspiration)?,
                expiration: per(ClassSel::Expiration)?,
                both: per(ClassSel::Both)?,
            })
        })
        .collect::<Result<_>>()?;

    let mut classes = Vec::with_capacity(3);
    for sel in ClassSel::ALL {
        let boxes = files.iter().fold(MatchCounts::default(), |acc, f| acc + f.class(sel).boxes);
        let confusion: ConfusionMeasure = files.iter().map(|f| f.class(sel).confusion).sum();
        let weighted = |get: fn(&ScreeningRates) -> Option<f64>| -> (Option<f64>, usize) {
            let (mut num, mut den, mut undefined) = (0.0, 0.0, 0);
            for f in &files {
                match get(&f.class(sel).rates) {
                    Some(v) => {
                        num += v * f.duration_s;
                        den += f.duration_s;
                    }
                    None => undefined += 1,
                }
            }
            ((den > 0.0).then(|| num / den), undefined)
        };
        let (sensitivity, n_undefined_sensitivity) = weighted(|r| r.sensitivity);
        let (specificity, n_undefined_specificity) = weighted(|r| r.specificity);

        let pairs: Vec<(IntervalSet, IntervalSet)> = ids
            .iter()
            .map(|id| {
                let t = reference[*id].duration_s;
                Ok((sets(&reference[*id], sel, t)?, sets(&hyp[*id], sel, t)?))
            })
            .collect::<Result<_>>()?;
        let kappa = match kappa_with_ci(&pairs, config.n_permutations, config.n_bootstrap, config.seed) {
            Ok(k) => KappaOutcome::Ok(k),
            Err(Error::DegenerateChance) => KappaOutcome::DegenerateChance,
            Err(Error::InsufficientFiles(n)) => KappaOutcome::InsufficientFiles { n_files: n },
            Err(e) => return Err(e),
        };

        classes.push(ClassSummary {
            class: sel,
            boxes,
            box_agreement: boxes.agreement(),
            recall_reference: boxes.recall_a(),
            recall_hypothesis: boxes.recall_b(),
            confusion,
            rates: ScreeningRates { sensitivity, specificity },
            n_undefined_sensitivity,
            n_undefined_specificity,
            pooled_rates: confusion.rates(),
            kappa,
        });
    }

    Ok(AgreementReport {
        reference: reference_label.to_string(),
        hypothesis: hyp_label.to_string(),
        role_convention: roles.describe().to_string(),
        config: config.clone(),
        n_files: files.len(),
        total_duration_s: files.iter().map(|f| f.duration_s).sum(),
        classes,
        files,
    })
}

/// Several comparisons rendered side by side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub comparisons: Vec<AgreementReport>,
}

/// Order in which sources are compared: every earlier source against the
/// last one, then the remaining pairs among the earlier sources.
///
/// With sources `[annotator 1, annotator 3, algorithm]` this yields
/// `1 vs algorithm`, `3 vs algorithm`, `1 vs 3`.
pub fn comparison_pairs(n_sources: usize) -> Vec<(usize, usize)> {
    if n_sources < 2 {
        return Vec::new();
    }
    let last = n_sources - 1;
    let mut v: Vec<(usize, usize)> = (0..last).map(|i| (i, last)).collect();
    for i in 0..last {
        for j in i + 1..last {
            v.push((i, j));
        }
    }
    v
}

/// Evaluate every pair from [`comparison_pairs`].
pub fn evaluate_sources(sources: &[(String, Corpus)], config: &EvalConfig) -> Result<ComparisonReport> {
    let comparisons = comparison_pairs(sources.len())
        .into_iter()
        .map(|(i, j)| evaluate_corpus(&sources[i].1, &sources[j].1, &sources[i].0, &sources[j].0, config))
        .collect::<Result<_>>()?;
    Ok(ComparisonReport { comparisons })
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{:.0}%", 100.0 * x))
}

fn kappa_cell(k: &KappaOutcome) -> String {
    match k {
        KappaOutcome::Ok(r) => match (r.ci_low, r.ci_high) {
            (Some(lo), Some(hi)) => format!("{:.2} [{lo:.2}, {hi:.2}]", r.kappa),
            _ => format!("{:.2}", r.kappa),
        },
        KappaOutcome::DegenerateChance => "undefined".into(),
        KappaOutcome::InsufficientFiles { .. } => "insufficient files".into(),
    }
}

fn table(out: &mut String, title: &str, header: &[String], rows: &[Vec<String>]) {
    let cols = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String]| -> String {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate() {
            let pad = widths[i] - c.chars().count();
            if i == 0 {
                s.push_str(c);
                s.push_str(&" ".repeat(pad));
            } else {
                s.push_str("  ");
                s.push_str(&" ".repeat(pad));
                s.push_str(c);
            }
        }
        s.trim_end().to_string()
    };
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "{}", line(header));
    let total: usize = widths.iter().sum::<usize>() + 2 * (cols - 1);
    let _ = writeln!(out, "{}", "-".repeat(total));
    for r in rows {
        let _ = writeln!(out, "{}", line(r));
    }
    let _ = writeln!(out);
}

impl ComparisonReport {
    /// Header and rows of the box-agreement table.
    pub fn box_table(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let mut header = vec!["Agreement using boxes".to_string()];
        header.extend(ClassSel::ALL.iter().map(|c| c.label().to_string()));
        let rows = self
            .comparisons
            .iter()
            .map(|r| {
                let mut row = vec![r.label()];
                row.extend(ClassSel::ALL.iter().map(|&c| pct(r.class(c).box_agreement)));
                row
            })
            .collect();
        (header, rows)
    }

    /// Header and rows of the sensitivity/specificity table, with a final
    /// row averaging over comparisons.
    pub fn rates_table(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let mut header = vec!["Sensitivity / specificity".to_string()];
        for c in ClassSel::ALL {
            header.push(format!("{} sens", c.label()));
            header.push(format!("{} spec", c.label()));
        }
        let mut rows: Vec<Vec<String>> = self
            .comparisons
            .iter()
            .map(|r| {
                let mut row = vec![r.label()];
                for c in ClassSel::ALL {
                    let rates = r.class(c).rates;
                    row.push(pct(rates.sensitivity));
                    row.push(pct(rates.specificity));
                }
                row
            })
            .collect();
        let mean = |get: &dyn Fn(&AgreementReport) -> Option<f64>| -> Option<f64> {
            let v: Vec<f64> = self.comparisons.iter().filter_map(get).collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        let mut avg = vec!["Average".to_string()];
        for c in ClassSel::ALL {
            avg.push(pct(mean(&|r| r.class(c).rates.sensitivity)));
            avg.push(pct(mean(&|r| r.class(c).rates.specificity)));
        }
        rows.push(avg);
        (header, rows)
    }

    pub fn kappa_table(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let mut header = vec!["Pseudo-kappa [95% CI]".to_string()];
        header.extend(ClassSel::ALL.iter().map(|c| c.label().to_string()));
        let rows = self
            .comparisons
            .iter()
            .map(|r| {
                let mut row = vec![r.label()];
                row.extend(ClassSel::ALL.iter().map(|&c| kappa_cell(&r.class(c).kappa)));
                row
            })
            .collect();
        (header, rows)
    }

    /// Aligned plain-text rendering of all three tables.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let (h, r) = self.box_table();
        table(&mut out, "Box agreement (same class, Jaccard > 0.5)", &h, &r);
        let (h, r) = self.rates_table();
        table(&mut out, "Continuous-time sensitivity and specificity", &h, &r);
        let (h, r) = self.kappa_table();
        table(&mut out, "Continuous-time pseudo-kappa", &h, &r);
        if let Some(first) = self.comparisons.first() {
            let _ = writeln!(out, "Roles: {}", first.role_convention);
            let _ = writeln!(
                out,
                "Files: {}  permutations: {}  bootstrap: {}  seed: {}",
                first.n_files, first.config.n_permutations, first.config.n_bootstrap, first.config.seed
            );
        }
        out
    }

    /// Kappa rows (one per comparison) for one class.
    pub fn kappa_rows(&self, sel: ClassSel) -> Vec<(String, Option<KappaResult>)> {
        self.comparisons
            .iter()
            .map(|r| (r.label(), r.class(sel).kappa.value().cloned()))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Annotation, PhaseBox};

    fn ann(id: &str, boxes: &[(PhaseClass, f64, f64)]) -> Annotation {
        Annotation::new(id, 10.0, "x", boxes.iter().map(|&(c, s, e)| PhaseBox::annotated(c, s, e)).collect()).unwrap()
    }

    fn corpus() -> Corpus {
        use PhaseClass::*;
        [
            ann("a", &[(Inspiration, 0.0, 1.0), (Expiration, 1.0, 2.5), (Inspiration, 4.0, 5.0)]),
            ann("b", &[(Inspiration, 0.5, 1.8), (Expiration, 1.8, 3.0)]),
            ann("c", &[(Inspiration, 2.0, 3.0), (Expiration, 3.0, 4.0), (Inspiration, 6.0, 7.2)]),
        ]
        .into_iter()
        .map(|a| (a.file_id.clone(), a))
        .collect()
    }

    #[test]
    fn identity() {
        let c = corpus();
        let cfg = EvalConfig { n_bootstrap: 50, n_permutations: 20, ..Default::default() };
        let r = evaluate_corpus(&c, &c, "A", "A", &cfg).unwrap();
        for sel in ClassSel::ALL {
            let s = r.class(sel);
            assert_eq!(s.box_agreement, Some(1.0));
            assert_eq!(s.rates, ScreeningRates { sensitivity: Some(1.0), specificity: Some(1.0) });
            let k = s.kappa.value().unwrap();
            assert_eq!(k.kappa, 1.0);
            assert_eq!((k.ci_low, k.ci_high), (Some(1.0), Some(1.0)));
        }
    }

    #[test]
    fn missing_and_mismatched_files() {
        let c = corpus();
        let mut d = c.clone();
        d.remove("b");
        assert!(matches!(evaluate_corpus(&c, &d, "A", "B", &EvalConfig::default()), Err(Error::MissingFile(f)) if f == "b"));
        assert!(matches!(evaluate_corpus(&d, &c, "A", "B", &EvalConfig::default()), Err(Error::MissingFile(_))));
        let mut e = c.clone();
        e.get_mut("a").unwrap().duration_s = 12.0;
        assert!(matches!(evaluate_corpus(&c, &e, "A", "B", &EvalConfig::default()), Err(Error::DomainMismatch(_))));
    }

    #[test]
    fn one_file_reports_insufficient() {
        let mut c = corpus();
        c.retain(|k, _| k == "a");
        let r = evaluate_corpus(&c, &c, "A", "B", &EvalConfig::default()).unwrap();
        assert_eq!(r.class(ClassSel::Both).box_agreement, Some(1.0));
        assert_eq!(r.class(ClassSel::Both).kappa, KappaOutcome::InsufficientFiles { n_files: 1 });
    }

    #[test]
    fn combined_confusion_is_sum_of_files() {
        let c = corpus();
        let mut h = c.clone();
        h.get_mut("b").unwrap().boxes[0].end_s = 1.5;
        let cfg = EvalConfig { n_bootstrap: 10, n_permutations: 10, ..Default::default() };
        let r = evaluate_corpus(&c, &h, "A", "B", &cfg).unwrap();
        for sel in ClassSel::ALL {
            let sum: ConfusionMeasure = r.files.iter().map(|f| f.class(sel).confusion).sum();
            assert_eq!(r.class(sel).confusion, sum);
            assert!((sum.total() - 30.0).abs() < 1e-9);
        }
    }

    #[test]
    fn pair_order() {
        assert_eq!(comparison_pairs(3), vec![(0, 2), (1, 2), (0, 1)]);
        assert_eq!(comparison_pairs(2), vec![(0, 1)]);
        assert!(comparison_pairs(1).is_empty());
    }

    #[test]
    fn text_tables_have_expected_rows() {
        let c = corpus();
        let cfg = EvalConfig { n_bootstrap: 10, n_permutations: 10, ..Default::default() };
        let sources = vec![("Annotator 1".to_string(), c.clone()), ("Annotator 3".to_string(), c.clone()), ("Algorithm".to_string(), c)];
        let rep = evaluate_sources(&sources, &cfg).unwrap();
        let (h, rows) = rep.box_table();
        assert_eq!(h, vec!["Agreement using boxes", "Inspiration", "Expiration", "Both phases"]);
        let labels: Vec<_> = rows.iter().map(|r| r[0].as_str()).collect();
        assert_eq!(labels, vec!["Annotator 1 vs Algorithm", "Annotator 3 vs Algorithm", "Annotator 1 vs Annotator 3"]);
        assert!(rep.to_text().contains("Annotator 1 vs Algorithm  "));
    }
}
