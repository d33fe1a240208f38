//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::annotation::{load_corpus, Corpus};
use crate::config::{Overrides, RunConfig};
use crate::detect::{load_external_detections, write_detections, Detections};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::metrics::{evaluate_sources, ClassSel, ComparisonReport};
use crate::phase::PhaseClass;
use crate::pipeline::{analyze_files, detections_to_corpus, list_wavs, load_canonical, split_detections};
use crate::postprocess::{postprocess, PostprocessTrace};
use crate::render::{parse_kappa_csv, render_kappa_chart, render_kappa_rows, render_overlay, KappaRow, OverlayStyle};
use crate::spectrogram::{compute_spectrogram, to_image};
use crate::synth::{standard_specs, synth_corpus};

#[derive(Debug, Parser)]
#[command(name = "lungphase", version, about = "Breathing-phase detection and annotation agreement for lung-sound recordings")]
pub struct Cli {
    /// Config file of `key = value` lines; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads [default: number of cores]. Never changes any output.
    #[arg(long, global = true, env = "LUNGPHASE_JOBS")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus of breathing recordings with exact ground truth.
    Synth(SynthArgs),
    /// Compute spectrogram images (and optionally raw float32 matrices).
    Spectrogram(SpectrogramArgs),
    /// Run the baseline energy detector and write raw detections as JSON lines.
    Detect(DetectArgs),
    /// Prune, de-duplicate and de-overlap detections.
    Postprocess(PostprocessArgs),
    /// Compare annotation sources: box agreement, sensitivity/specificity, pseudo-kappa.
    Evaluate(EvaluateArgs),
    /// Draw phase boxes over a spectrogram, or a kappa chart from its CSV.
    Render(RenderArgs),
    /// Audio to detections to post-processing to evaluation in one pass.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory for WAV, annotation JSON and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of files.
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    /// Breathing cycles per file.
    #[arg(long, default_value_t = 3)]
    pub cycles: usize,
    /// Inspiration level above the noise floor, dB.
    #[arg(long, default_value_t = 30.0)]
    pub snr_db: f64,
    /// Corpus seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Default)]
#[command(next_help_heading = "Spectrogram")]
pub struct SpectrogramFlags {
    /// STFT segment length in samples [default: 4096]
    #[arg(long)]
    pub segment_len: Option<usize>,
    /// STFT overlap in samples [default: 3200]
    #[arg(long)]
    pub overlap: Option<usize>,
    /// Frequency bins at or above this are dropped, Hz [default: 2000]
    #[arg(long)]
    pub max_freq_hz: Option<f64>,
}

#[derive(Debug, Args, Default)]
#[command(next_help_heading = "Baseline detector")]
pub struct BaselineFlags {
    /// Lower edge of the energy band, Hz [default: 100]
    #[arg(long)]
    pub band_low_hz: Option<f64>,
    /// Upper edge of the energy band, Hz [default: 2000]
    #[arg(long)]
    pub band_high_hz: Option<f64>,
    /// Moving-average width in frames [default: 5]
    #[arg(long)]
    pub smooth_frames: Option<usize>,
    /// Phase starts this far above the noise floor, dB [default: 8]
    #[arg(long)]
    pub onset_db: Option<f64>,
    /// Phase ends below this level above the noise floor, dB [default: 4]
    #[arg(long)]
    pub offset_db: Option<f64>,
    /// Shortest phase emitted, seconds [default: 0.25]
    #[arg(long)]
    pub min_phase_s: Option<f64>,
    /// Energy dip that splits one active segment into two phases, dB; 0 disables [default: 2.5]
    #[arg(long)]
    pub split_db: Option<f64>,
    /// Percentile of frame energy taken as the noise floor [default: 0.1]
    #[arg(long)]
    pub floor_percentile: Option<f64>,
    /// Class of the first detected phase [default: inspiration]
    #[arg(long)]
    pub start_class: Option<PhaseClass>,
}

#[derive(Debug, Args, Default)]
#[command(next_help_heading = "Post-processing")]
pub struct PostprocessFlags {
    /// Boxes below this confidence are dropped; equal is kept [default: 0.5]
    #[arg(long)]
    pub confidence_min: Option<f64>,
    /// Boxes overlapping with Jaccard above this are duplicates [default: 0.5]
    #[arg(long)]
    pub duplicate_iou: Option<f64>,
    /// Log overlaps longer than this fraction of the shorter phase [default: 0.1]
    #[arg(long)]
    pub small_overlap_max_frac: Option<f64>,
    /// Only suppress duplicates of the same class [default: false]
    #[arg(long)]
    pub duplicates_within_class: bool,
}

#[derive(Debug, Args, Default)]
#[command(next_help_heading = "Evaluation")]
pub struct EvalFlags {
    /// Permutations for chance agreement [default: 100]
    #[arg(long)]
    pub n_permutations: Option<usize>,
    /// Bootstrap replicates for the 95% kappa interval; 0 skips it [default: 1000]
    #[arg(long)]
    pub n_bootstrap: Option<usize>,
    /// Seed for permutations and bootstrap [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report FP as time only the hypothesis marks and FN as time only the
    /// reference marks (default keeps the opposite, as-defined roles)
    #[arg(long)]
    pub conventional_roles: bool,
}

#[derive(Debug, Args)]
pub struct SpectrogramArgs {
    /// WAV file or directory of WAV files.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write `<id>.f32` (little-endian, bin-major) and `<id>.json` sidecar.
    #[arg(long)]
    pub raw: bool,
    #[command(flatten)]
    pub spec: SpectrogramFlags,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// WAV file or directory of WAV files.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Detections as JSON lines.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub spec: SpectrogramFlags,
    #[command(flatten)]
    pub baseline: BaselineFlags,
}

#[derive(Debug, Args)]
pub struct PostprocessArgs {
    /// Detections as JSON lines.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the per-file trace as JSON.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub post: PostprocessFlags,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Reference annotations (JSON, TextGrid or a directory of them).
    #[arg(long = "ref", requires = "hyp", conflicts_with = "source")]
    pub reference: Option<PathBuf>,
    /// Hypothesis annotations, or detections as `.jsonl`.
    #[arg(long, requires = "reference")]
    pub hyp: Option<PathBuf>,
    #[arg(long, default_value = "Reference")]
    pub ref_label: String,
    #[arg(long, default_value = "Hypothesis")]
    pub hyp_label: String,
    /// Labelled source `LABEL=PATH`, repeatable. Every earlier source is
    /// compared with the last one, then the earlier ones with each other.
    #[arg(long, value_name = "LABEL=PATH")]
    pub source: Vec<String>,
    /// Directory for report.json, report.txt and kappa_<class>.csv/.png;
    /// without it the text report goes to standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub eval: EvalFlags,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// WAV file to draw boxes over.
    #[arg(long, required_unless_present = "kappa_csv")]
    pub audio: Option<PathBuf>,
    /// Annotation or detection file, repeatable; drawn in the order given.
    #[arg(long, requires = "audio")]
    pub ann: Vec<PathBuf>,
    /// Kappa CSV to chart instead of an overlay.
    #[arg(long, conflicts_with_all = ["audio", "ann"])]
    pub kappa_csv: Option<PathBuf>,
    /// Output PNG.
    #[arg(long)]
    pub out: PathBuf,
    /// Rectangle stroke in pixels.
    #[arg(long, default_value_t = 2)]
    pub stroke: usize,
    /// Print each box's confidence.
    #[arg(long)]
    pub label_confidence: bool,
    #[command(flatten)]
    pub spec: SpectrogramFlags,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// WAV file or directory of WAV files.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Ground-truth annotations (JSON, TextGrid or a directory of them).
    #[arg(long)]
    pub truth: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "Ground truth")]
    pub truth_label: String,
    #[command(flatten)]
    pub spec: SpectrogramFlags,
    #[command(flatten)]
    pub baseline: BaselineFlags,
    #[command(flatten)]
    pub post: PostprocessFlags,
    #[command(flatten)]
    pub eval: EvalFlags,
}

impl SpectrogramFlags {
    fn apply(&self, o: &mut Overrides) {
        o.segment_len = self.segment_len.or(o.segment_len);
        o.overlap = self.overlap.or(o.overlap);
        o.max_freq_hz = self.max_freq_hz.or(o.max_freq_hz);
    }
}

impl BaselineFlags {
    fn apply(&self, o: &mut Overrides) {
        o.band_low_hz = self.band_low_hz.or(o.band_low_hz);
        o.band_high_hz = self.band_high_hz.or(o.band_high_hz);
        o.smooth_frames = self.smooth_frames.or(o.smooth_frames);
        o.onset_db = self.onset_db.or(o.onset_db);
        o.offset_db = self.offset_db.or(o.offset_db);
        o.min_phase_s = self.min_phase_s.or(o.min_phase_s);
        o.split_db = self.split_db.or(o.split_db);
        o.floor_percentile = self.floor_percentile.or(o.floor_percentile);
        o.start_class = self.start_class.or(o.start_class);
    }
}

impl PostprocessFlags {
    fn apply(&self, o: &mut Overrides) {
        o.confidence_min = self.confidence_min.or(o.confidence_min);
        o.duplicate_iou = self.duplicate_iou.or(o.duplicate_iou);
        o.small_overlap_max_frac = self.small_overlap_max_frac.or(o.small_overlap_max_frac);
        if self.duplicates_within_class {
            o.duplicates_within_class = Some(true);
        }
    }
}

impl EvalFlags {
    fn apply(&self, o: &mut Overrides) {
        o.n_permutations = self.n_permutations.or(o.n_permutations);
        o.n_bootstrap = self.n_bootstrap.or(o.n_bootstrap);
        o.seed = self.seed.or(o.seed);
        if self.conventional_roles {
            o.conventional_roles = Some(true);
        }
    }
}

/// Parse `argv`, run, and return the process exit code: 0 on success, 1 on
/// a user-facing error (reported as one JSON line on standard error).
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            let _ = writeln!(std::io::stderr(), "{line}");
            1
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let mut overrides = match &cli.config {
        Some(p) => Overrides::load(p)?,
        None => Overrides::default(),
    };
    if cli.jobs.is_some() {
        overrides.jobs = cli.jobs;
    }
    match &cli.command {
        Command::Synth(a) => {
            if a.seed.is_some() {
                overrides.seed = a.seed;
            }
        }
        Command::Spectrogram(a) => a.spec.apply(&mut overrides),
        Command::Detect(a) => {
            a.spec.apply(&mut overrides);
            a.baseline.apply(&mut overrides);
        }
        Command::Postprocess(a) => a.post.apply(&mut overrides),
        Command::Evaluate(a) => a.eval.apply(&mut overrides),
        Command::Render(a) => a.spec.apply(&mut overrides),
        Command::Pipeline(a) => {
            a.spec.apply(&mut overrides);
            a.baseline.apply(&mut overrides);
            a.post.apply(&mut overrides);
            a.eval.apply(&mut overrides);
        }
    }
    let config = RunConfig::resolve(&overrides)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.jobs {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(&cli.command, &config))
}

fn dispatch(command: &Command, config: &RunConfig) -> Result<()> {
    match command {
        Command::Synth(a) => cmd_synth(a, config),
        Command::Spectrogram(a) => cmd_spectrogram(a, config),
        Command::Detect(a) => cmd_detect(a, config),
        Command::Postprocess(a) => cmd_postprocess(a, config),
        Command::Evaluate(a) => cmd_evaluate(a, config),
        Command::Render(a) => cmd_render(a, config),
        Command::Pipeline(a) => cmd_pipeline(a, config),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn cmd_synth(a: &SynthArgs, config: &RunConfig) -> Result<()> {
    let specs = standard_specs(a.n, a.cycles, a.snr_db, config.eval.seed);
    let manifest = synth_corpus(&specs, &a.out)?;
    log::info!("wrote {} files to {}", manifest.len(), a.out.display());
    Ok(())
}

fn cmd_spectrogram(a: &SpectrogramArgs, config: &RunConfig) -> Result<()> {
    create_dir(&a.out)?;
    list_wavs(&a.input)?.par_iter().try_for_each(|p| {
        let clip = load_canonical(p)?;
        let spec = compute_spectrogram(&clip, &config.spectrogram)?;
        let id = clip.source_id();
        write_atomic(a.out.join(format!("{id}.png")), &to_image(&spec).to_png()?)?;
        if a.raw {
            let (bytes, sidecar) = spec.to_raw();
            write_atomic(a.out.join(format!("{id}.f32")), &bytes)?;
            write_atomic(a.out.join(format!("{id}.json")), sidecar.as_bytes())?;
        }
        Ok(())
    })
}

fn cmd_detect(a: &DetectArgs, config: &RunConfig) -> Result<()> {
    let files = analyze_files(&list_wavs(&a.input)?, config)?;
    let (raw, _) = split_detections(&files);
    write_atomic(&a.out, write_detections(&raw).as_bytes())
}

fn cmd_postprocess(a: &PostprocessArgs, config: &RunConfig) -> Result<()> {
    let dets = load_external_detections(&a.input)?;
    let results: Vec<(String, Vec<_>, PostprocessTrace)> = dets
        .into_par_iter()
        .map(|(id, boxes)| postprocess(boxes, &config.postprocess).map(|(b, t)| (id, b, t)))
        .collect::<Result<_>>()?;
    let mut out = Detections::new();
    let mut traces = std::collections::BTreeMap::new();
    let mut total = PostprocessTrace::default();
    for (id, boxes, trace) in results {
        total += trace;
        traces.insert(id.clone(), trace);
        out.insert(id, boxes);
    }
    write_atomic(&a.out, write_detections(&out).as_bytes())?;
    if let Some(p) = &a.trace {
        let doc = serde_json::json!({ "total": total, "files": traces });
        write_atomic(p, (serde_json::to_string_pretty(&doc).expect("trace serializes") + "\n").as_bytes())?;
    }
    println!("{}", serde_json::to_string(&total).expect("trace serializes"));
    Ok(())
}

fn is_jsonl(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("jsonl"))
}

/// Load one annotation source. `.jsonl` files are detections and borrow
/// file durations from `durations`.
fn load_source(path: &Path, label: &str, durations: Option<&Corpus>) -> Result<Corpus> {
    if !is_jsonl(path) {
        return load_corpus(path, Some(label));
    }
    let durations = durations
        .ok_or_else(|| Error::InvalidParameter(format!("{}: detections need an annotation source before them for durations", path.display())))?;
    detections_to_corpus(&load_external_detections(path)?, durations, label)
}

fn cmd_evaluate(a: &EvaluateArgs, config: &RunConfig) -> Result<()> {
    let mut specs: Vec<(String, PathBuf)> = Vec::new();
    if let (Some(r), Some(h)) = (&a.reference, &a.hyp) {
        specs.push((a.ref_label.clone(), r.clone()));
        specs.push((a.hyp_label.clone(), h.clone()));
    }
    for s in &a.source {
        let (label, path) = s
            .split_once('=')
            .ok_or_else(|| Error::InvalidParameter(format!("--source expects LABEL=PATH, got {s:?}")))?;
        specs.push((label.to_string(), PathBuf::from(path)));
    }
    if specs.len() < 2 {
        return Err(Error::InvalidParameter("need --ref and --hyp, or at least two --source".into()));
    }
    let mut sources: Vec<(String, Corpus)> = Vec::with_capacity(specs.len());
    for (label, path) in &specs {
        let corpus = load_source(path, label, sources.first().map(|s| &s.1))?;
        sources.push((label.clone(), corpus));
    }
    let report = evaluate_sources(&sources, &config.eval)?;
    match &a.out {
        Some(dir) => write_report(dir, &report),
        None => {
            print!("{}", report.to_text());
            Ok(())
        }
    }
}

/// report.json, report.txt and, per class selection, kappa CSV and chart.
pub fn write_report(dir: &Path, report: &ComparisonReport) -> Result<()> {
    create_dir(dir)?;
    write_atomic(dir.join("report.json"), report.to_json().as_bytes())?;
    write_atomic(dir.join("report.txt"), report.to_text().as_bytes())?;
    for sel in ClassSel::ALL {
        let rows: Vec<KappaRow> =
            report.kappa_rows(sel).iter().map(|(label, k)| KappaRow::new(label.clone(), k.as_ref())).collect();
        let (img, csv) = render_kappa_chart(&rows);
        write_atomic(dir.join(format!("kappa_{}.csv", sel.slug())), csv.as_bytes())?;
        write_atomic(dir.join(format!("kappa_{}.png", sel.slug())), &img.to_png()?)?;
    }
    Ok(())
}

fn cmd_render(a: &RenderArgs, config: &RunConfig) -> Result<()> {
    if let Some(csv_path) = &a.kappa_csv {
        let text = std::fs::read_to_string(csv_path).map_err(|e| Error::io(csv_path, e))?;
        let rows = parse_kappa_csv(&text)?;
        return write_atomic(&a.out, &render_kappa_rows(&rows).to_png()?);
    }
    let audio = a.audio.as_ref().expect("clap requires --audio without --kappa-csv");
    let clip = load_canonical(audio)?;
    let spec = compute_spectrogram(&clip, &config.spectrogram)?;
    let id = clip.source_id();
    let style = OverlayStyle { stroke_px: a.stroke, label_confidence: a.label_confidence, ..Default::default() };
    let mut layers = Vec::new();
    for p in &a.ann {
        let ann = if is_jsonl(p) {
            // Raw detections may overlap, so they are drawn without annotation checks.
            let boxes = load_external_detections(p)?.remove(id).unwrap_or_default();
            crate::Annotation { file_id: id.to_string(), duration_s: clip.duration_s(), source: "detections".into(), boxes }
        } else {
            load_corpus(p, None)?.remove(id).ok_or_else(|| {
                Error::DomainMismatch(format!("{} has no annotation for {id:?}", p.display()))
            })?
        };
        layers.push(ann);
    }
    let refs: Vec<_> = layers.iter().map(|l| (l, &style)).collect();
    let overlay = render_overlay(&spec, &refs)?;
    write_atomic(&a.out, &overlay.image.to_png()?)
}

fn cmd_pipeline(a: &PipelineArgs, config: &RunConfig) -> Result<()> {
    let files = analyze_files(&list_wavs(&a.input)?, config)?;
    let truth = load_corpus(&a.truth, Some(&a.truth_label))?;
    let (raw, boxes) = split_detections(&files);
    let hyp = detections_to_corpus(&boxes, &truth, "Algorithm")?;

    create_dir(&a.out)?;
    write_atomic(a.out.join("detections_raw.jsonl"), write_detections(&raw).as_bytes())?;
    write_atomic(a.out.join("detections.jsonl"), write_detections(&boxes).as_bytes())?;
    let mut total = PostprocessTrace::default();
    let traces: std::collections::BTreeMap<_, _> = files
        .iter()
        .map(|f| {
            total += f.trace;
            (f.file_id.clone(), f.trace)
        })
        .collect();
    let doc = serde_json::json!({ "total": total, "files": traces });
    write_atomic(a.out.join("trace.json"), (serde_json::to_string_pretty(&doc).expect("trace serializes") + "\n").as_bytes())?;

    let report = evaluate_sources(&[(a.truth_label.clone(), truth), ("Algorithm".to_string(), hyp)], &config.eval)?;
    write_report(&a.out, &report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn help_lists_defaults() {
        let help = Cli::command().find_subcommand_mut("pipeline").unwrap().render_long_help().to_string();
        for needle in ["4096", "3200", "2000", "0.5", "100", "1000"] {
            assert!(help.contains(needle), "help lacks {needle}");
        }
    }

    #[test]
    fn bad_arguments_exit_one() {
        assert_eq!(run(["lungphase", "evaluate", "--ref", "x"]), 1);
        assert_eq!(run(["lungphase", "nonsense"]), 1);
    }

    #[test]
    fn missing_input_is_user_error() {
        assert_eq!(run(["lungphase", "postprocess", "--in", "/nonexistent/d.jsonl", "--out", "/tmp/x.jsonl"]), 1);
    }
}
