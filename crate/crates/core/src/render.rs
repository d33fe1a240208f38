//! Static figures: spectrograms with phase-box overlays and kappa charts.

use serde::{Deserialize, Serialize};

use crate::annotation::Annotation;
use crate::error::{Error, Result};
use crate::metrics::kappa::KappaResult;
use crate::phase::PhaseClass;
use crate::spectrogram::{to_image, Image3, Spectrogram};

pub type Rgb = [u8; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayStyle {
    pub inspiration_color: Rgb,
    pub expiration_color: Rgb,
    pub stroke_px: usize,
    /// Print each box's confidence in its top-left corner.
    pub label_confidence: bool,
}

impl Default for OverlayStyle {
    fn default() -> Self {
        Self { inspiration_color: [220, 40, 40], expiration_color: [230, 200, 30], stroke_px: 2, label_confidence: false }
    }
}

impl OverlayStyle {
    pub fn validate(&self) -> Result<()> {
        if self.inspiration_color == self.expiration_color {
            return Err(Error::InvalidParameter("overlay colors must differ".into()));
        }
        if self.stroke_px == 0 {
            return Err(Error::InvalidParameter("stroke_px must be at least 1".into()));
        }
        Ok(())
    }

    pub fn color(&self, class: PhaseClass) -> Rgb {
        match class {
            PhaseClass::Inspiration => self.inspiration_color,
            PhaseClass::Expiration => self.expiration_color,
        }
    }
}

/// Pixel columns `[x0, x1]` a box occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoxColumns {
    pub class: PhaseClass,
    pub x0: usize,
    pub x1: usize,
}

#[derive(Debug, Clone)]
pub struct Overlay {
    pub image: Image3,
    /// Rectangles drawn, in drawing order.
    pub rects: Vec<BoxColumns>,
    /// Boxes whose end fell past the last frame and were clamped to the
    /// image border.
    pub n_clamped: usize,
}

/// Draw every layer's boxes as full-height rectangles over the grayscale
/// spectrogram, layers in the given order.
pub fn render_overlay(spec: &Spectrogram, layers: &[(&Annotation, &OverlayStyle)]) -> Result<Overlay> {
    let mut image = to_image(spec);
    let mut rects = Vec::new();
    let mut n_clamped = 0;
    let last = spec.n_frames() - 1;
    for (ann, style) in layers {
        style.validate()?;
        if (ann.duration_s - spec.duration_s).abs() > 1e-3 {
            return Err(Error::DomainMismatch(format!(
                "annotation {:?} lasts {} s but the spectrogram covers {} s",
                ann.file_id, ann.duration_s, spec.duration_s
            )));
        }
        if !spec.source_id.is_empty() && ann.file_id != spec.source_id {
            return Err(Error::DomainMismatch(format!(
                "annotation for {:?} drawn over spectrogram of {:?}",
                ann.file_id, spec.source_id
            )));
        }
        for b in &ann.boxes {
            let x0 = spec.time_to_frame(b.start_s)?;
            let x1 = spec.time_to_frame(b.end_s)?;
            if (b.end_s / spec.hop_s).floor() > last as f64 {
                n_clamped += 1;
            }
            let color = style.color(b.class);
            draw_rect(&mut image, x0, x1, style.stroke_px, color);
            if style.label_confidence {
                let text = format!("{:.2}", b.confidence);
                draw_text(&mut image, x0 + style.stroke_px + 1, style.stroke_px + 1, &text, 2, color);
            }
            rects.push(BoxColumns { class: b.class, x0, x1 });
        }
    }
    if n_clamped > 0 {
        log::info!("{n_clamped} box end(s) clamped to the last frame");
    }
    Ok(Overlay { image, rects, n_clamped })
}

/// Outline of columns `[x0, x1]` over the full image height, stroke drawn
/// inward.
fn draw_rect(img: &mut Image3, x0: usize, x1: usize, stroke: usize, color: Rgb) {
    let h = img.height;
    for x in x0..=x1 {
        for s in 0..stroke.min(h) {
            img.set(x, s, color);
            img.set(x, h - 1 - s, color);
        }
    }
    for y in 0..h {
        for s in 0..stroke {
            if x0 + s <= x1 {
                img.set(x0 + s, y, color);
            }
            if x1 >= x0 + s {
                img.set(x1 - s, y, color);
            }
        }
    }
}

/// 3x5 glyphs for the characters needed to print numbers.
fn glyph(c: char) -> [u8; 5] {
    match c {
        '0' => [0b111, 0b101, 0b101, 0b101, 0b111],
        '1' => [0b010, 0b110, 0b010, 0b010, 0b111],
        '2' => [0b111, 0b001, 0b111, 0b100, 0b111],
        '3' => [0b111, 0b001, 0b111, 0b001, 0b111],
        '4' => [0b101, 0b101, 0b111, 0b001, 0b001],
        '5' => [0b111, 0b100, 0b111, 0b001, 0b111],
        '6' => [0b111, 0b100, 0b111, 0b101, 0b111],
        '7' => [0b111, 0b001, 0b010, 0b010, 0b010],
        '8' => [0b111, 0b101, 0b111, 0b101, 0b111],
        '9' => [0b111, 0b101, 0b111, 0b001, 0b111],
        '.' => [0b000, 0b000, 0b000, 0b000, 0b010],
        '-' => [0b000, 0b000, 0b111, 0b000, 0b000],
        _ => [0; 5],
    }
}

fn draw_text(img: &mut Image3, x: usize, y: usize, text: &str, scale: usize, color: Rgb) {
    for (i, c) in text.chars().enumerate() {
        let g = glyph(c);
        let gx = x + i * 4 * scale;
        for (row, bits) in g.iter().enumerate() {
            for col in 0..3 {
                if bits >> (2 - col) & 1 == 1 {
                    for dy in 0..scale {
                        for dx in 0..scale {
                            img.set(gx + col * scale + dx, y + row * scale + dy, color);
                        }
                    }
                }
            }
        }
    }
}

/// One row of the kappa chart and its CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaRow {
    pub label: String,
    pub kappa: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

impl KappaRow {
    pub fn new(label: impl Into<String>, result: Option<&KappaResult>) -> Self {
        Self {
            label: label.into(),
            kappa: result.map(|r| r.kappa),
            ci_low: result.and_then(|r| r.ci_low),
            ci_high: result.and_then(|r| r.ci_high),
        }
    }
}

/// CSV with header `label,kappa,ci_low,ci_high`; undefined values are empty.
pub fn kappa_csv(rows: &[KappaRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
}

pub fn parse_kappa_csv(text: &str) -> Result<Vec<KappaRow>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| Error::parse(1, e.to_string()))?;
    if header != vec!["label", "kappa", "ci_low", "ci_high"] {
        return Err(Error::parse(1, format!("unexpected header {header:?}")));
    }
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::parse(i + 2, e.to_string())))
        .collect()
}

const CHART_WIDTH: usize = 640;
const ROW_HEIGHT: usize = 48;
const MARGIN: usize = 24;
const PLOT_X0: usize = 80;
const PLOT_X1: usize = CHART_WIDTH - MARGIN;

const WHITE: Rgb = [255, 255, 255];
const GRID: Rgb = [200, 200, 200];
const SHADE: Rgb = [244, 244, 244];
const INK: Rgb = [20, 20, 20];
const BAR: Rgb = [40, 80, 200];

/// Landis–Koch band edges, used as vertical gridlines.
pub const KAPPA_BANDS: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];

fn kappa_x(k: f64) -> usize {
    let k = k.clamp(0.0, 1.0);
    PLOT_X0 + ((PLOT_X1 - PLOT_X0) as f64 * k).round() as usize
}

/// Point-and-error-bar chart over [0, 1], one row per entry, top to bottom.
/// Values outside [0, 1] are drawn at the nearest edge; the CSV holds the
/// exact numbers.
pub fn render_kappa_rows(rows: &[KappaRow]) -> Image3 {
    let height = 2 * MARGIN + ROW_HEIGHT * rows.len().max(1);
    let mut img = Image3::filled(CHART_WIDTH, height, WHITE);
    for (i, _) in rows.iter().enumerate().filter(|(i, _)| i % 2 == 1) {
        let y0 = MARGIN + i * ROW_HEIGHT;
        for y in y0..y0 + ROW_HEIGHT {
            for x in PLOT_X0..=PLOT_X1 {
                img.set(x, y, SHADE);
            }
        }
    }
    for &k in &KAPPA_BANDS {
        let x = kappa_x(k);
        for y in MARGIN / 2..height - MARGIN / 2 {
            img.set(x, y, GRID);
        }
        draw_text(&mut img, x.saturating_sub(5), height - MARGIN / 2 + 2, &format!("{k:.1}"), 1, INK);
    }
    for (i, row) in rows.iter().enumerate() {
        let yc = MARGIN + i * ROW_HEIGHT + ROW_HEIGHT / 2;
        draw_text(&mut img, 8, yc - 5, &format!("{}", i + 1), 2, INK);
        if let (Some(lo), Some(hi)) = (row.ci_low, row.ci_high) {
            let (xl, xh) = (kappa_x(lo), kappa_x(hi));
            for x in xl..=xh {
                img.set(x, yc, BAR);
                img.set(x, yc + 1, BAR);
            }
            for y in yc - 6..=yc + 7 {
                img.set(xl, y, BAR);
                img.set(xh, y, BAR);
            }
        }
        if let Some(k) = row.kappa {
            let x = kappa_x(k);
            for y in yc - 3..=yc + 4 {
                for dx in 0..8 {
                    img.set(x + dx - 3.min(x), y, INK);
                }
            }
        }
    }
    img
}

/// Chart image plus its CSV.
pub fn render_kappa_chart(rows: &[KappaRow]) -> (Image3, String) {
    (render_kappa_rows(rows), kappa_csv(rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::PhaseBox;

    fn spec(n_frames: usize, hop_s: f64) -> Spectrogram {
        let values = (0..186 * n_frames).map(|i| (i % 97) as f64).collect();
        Spectrogram::from_parts(values, 186, n_frames, 10.77, hop_s, "f", n_frames as f64 * hop_s + 0.07).unwrap()
    }

    #[test]
    fn no_boxes_is_plain_image() {
        let s = spec(50, 0.02);
        let ann = Annotation::empty("f", s.duration_s, "t");
        let out = render_overlay(&s, &[(&ann, &OverlayStyle::default())]).unwrap();
        assert_eq!(out.image.data, to_image(&s).data);
        assert!(out.rects.is_empty());
    }

    #[test]
    fn full_duration_box() {
        let s = spec(50, 0.02);
        let ann = Annotation::new("f", s.duration_s, "t", vec![PhaseBox::annotated(PhaseClass::Inspiration, 0.0, s.duration_s)]).unwrap();
        let out = render_overlay(&s, &[(&ann, &OverlayStyle::default())]).unwrap();
        assert_eq!(out.rects, vec![BoxColumns { class: PhaseClass::Inspiration, x0: 0, x1: 49 }]);
        assert_eq!(out.n_clamped, 1);
        let red = [220, 40, 40];
        for y in 0..186 {
            assert_eq!(out.image.pixel(0, y), red);
            assert_eq!(out.image.pixel(1, y), red);
            assert_eq!(out.image.pixel(49, y), red);
            assert_eq!(out.image.pixel(48, y), red);
        }
        assert_ne!(out.image.pixel(2, 100), red);
    }

    #[test]
    fn mismatched_duration_rejected() {
        let s = spec(50, 0.02);
        let ann = Annotation::empty("f", 99.0, "t");
        assert!(matches!(render_overlay(&s, &[(&ann, &OverlayStyle::default())]), Err(Error::DomainMismatch(_))));
        let other = Annotation::empty("g", s.duration_s, "t");
        assert!(matches!(render_overlay(&s, &[(&other, &OverlayStyle::default())]), Err(Error::DomainMismatch(_))));
    }

    #[test]
    fn style_checked() {
        let st = OverlayStyle { expiration_color: [220, 40, 40], ..Default::default() };
        assert!(st.validate().is_err());
        assert!(OverlayStyle { stroke_px: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            KappaRow { label: "Annotator 1 vs Algorithm".into(), kappa: Some(0.7312), ci_low: Some(0.61), ci_high: Some(0.8) },
            KappaRow { label: "a, \"quoted\"".into(), kappa: None, ci_low: None, ci_high: None },
            KappaRow { label: "x".into(), kappa: Some(1.0), ci_low: Some(1.0), ci_high: Some(1.0) },
        ];
        let (img, csv) = render_kappa_chart(&rows);
        assert!(csv.starts_with("label,kappa,ci_low,ci_high\n"));
        let back = parse_kappa_csv(&csv).unwrap();
        assert_eq!(back, rows);
        assert_eq!(render_kappa_rows(&back).to_png().unwrap(), img.to_png().unwrap());
        assert_eq!(img.height, 2 * MARGIN + 3 * ROW_HEIGHT);
        assert!(parse_kappa_csv("a,b\n1,2\n").is_err());
    }

    #[test]
    fn unit_kappa_point_at_right_edge() {
        let rows = vec![KappaRow { label: "x".into(), kappa: Some(1.0), ci_low: Some(1.0), ci_high: Some(1.0) }];
        let img = render_kappa_rows(&rows);
        let yc = MARGIN + ROW_HEIGHT / 2;
        assert_eq!(img.pixel(kappa_x(1.0), yc), INK);
        assert_eq!(img.pixel(kappa_x(0.5), yc), WHITE);
    }
}
