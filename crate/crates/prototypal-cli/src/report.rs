//! Fit reports, metrics files and static SVG/CSV figures.
//!
//! SVG output is fully deterministic: fixed 800x600 viewbox, fixed palette,
//! fixed 6-decimal coordinate formatting, no timestamps. Rendering the same
//! model twice yields byte-identical files.

use std::fmt::Write as _;

use prototypal::linalg::Mat;

use crate::data::{BlockData, Dataset, FeatureBlock};
use crate::error::{CliError, Result};
use crate::run::{FittedModel, Metrics};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const MARGIN: f64 = 50.0;

const COLOR_DATA: &str = "#4878a8";
const COLOR_PROTO: &str = "#d1352b";
const COLOR_SEGMENT: &str = "#b8b8b8";
const COLOR_FRAME: &str = "#444444";
const CLASS_COLORS: [&str; 3] = ["#4878a8", "#e3a43b", "#5aa469"];

/// Fit report: objective traces, per-prototype top-5 mixing weights, and the
/// importance coefficients for multiple regression.
///
/// Line formats:
/// ```text
/// trace,<block>,<iteration>,<objective>
/// mixing,<block>,<prototype>,<rank>,<train_row>,<weight>
/// tau,<block>,<value>
/// ```
pub fn fit_report_csv(fitted: &FittedModel, ds: &Dataset) -> String {
    let mut out = String::new();
    let trace_lines = |block: &str, trace: &[f64]| {
        let mut s = String::new();
        for (i, v) in trace.iter().enumerate() {
            let _ = writeln!(s, "trace,{block},{i},{v}");
        }
        s
    };
    let mixing_lines = |block: &str, b: &Mat| {
        let mut s = String::new();
        for j in 0..b.rows() {
            let mut weights: Vec<(usize, f64)> = b.row(j).iter().copied().enumerate().collect();
            weights.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
            for (rank, (row, w)) in weights.iter().take(5).enumerate() {
                let _ = writeln!(s, "mixing,{block},{j},{},{row},{w}", rank + 1);
            }
        }
        s
    };
    match fitted {
        FittedModel::Prototypes { model, .. } => {
            let name = &ds.predictors[0].name;
            out += &trace_lines(name, model.objective_trace());
            out += &mixing_lines(name, model.b());
        }
        FittedModel::Simple(model) => {
            let name = &ds.predictors[0].name;
            out += &trace_lines(name, model.x_model().objective_trace());
            out += &trace_lines("response", model.mixing_trace());
            out += &mixing_lines(name, model.x_model().b());
        }
        FittedModel::Multiple(model) => {
            for (part, block) in model.parts().iter().zip(&ds.predictors) {
                out += &trace_lines(&block.name, part.model.objective_trace());
            }
            out += &trace_lines("response", model.fit_trace());
            for (part, block) in model.parts().iter().zip(&ds.predictors) {
                out += &mixing_lines(&block.name, part.model.b());
            }
            for (block, tau) in ds.predictors.iter().zip(model.tau()) {
                let _ = writeln!(out, "tau,{},{tau}", block.name);
            }
        }
    }
    out
}

/// Metrics file lines; `prefix` distinguishes e.g. train/test sections.
pub fn metrics_csv(prefix: &str, m: &Metrics) -> String {
    let mut out = String::new();
    let p = if prefix.is_empty() {
        String::new()
    } else {
        format!("{prefix}_")
    };
    let _ = writeln!(out, "{p}n,{}", m.n);
    if let Some(acc) = m.accuracy {
        let _ = writeln!(out, "{p}accuracy,{acc}");
    }
    if let Some(rmse) = m.rmse {
        let _ = writeln!(out, "{p}rmse,{rmse}");
    }
    if let Some(confusion) = &m.confusion {
        for (i, row) in confusion.iter().enumerate() {
            for (j, count) in row.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{p}confusion,{},{},{count}",
                    m.classes[i], m.classes[j]
                );
            }
        }
    }
    out
}

/// Coordinates of the prototypes in input space, `u_j = Σ_l b_jl x_l`.
/// Exact for the linear kernel; for other kernels this is the input-space
/// average of the mixed points (the RKHS element itself has no coordinates).
pub fn materialize_rows(weights: &Mat, block: &FeatureBlock) -> Result<Vec<Vec<f64>>> {
    let d = block.dim();
    let mut out = Vec::with_capacity(weights.rows());
    for j in 0..weights.rows() {
        let mut u = vec![0.0; d];
        for (l, w) in weights.row(j).iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            let row = block
                .row(l)
                .ok_or_else(|| CliError::config("cannot materialize over distribution blocks"))?;
            for (uc, xc) in u.iter_mut().zip(row) {
                *uc += w * xc;
            }
        }
        out.push(u);
    }
    Ok(out)
}

struct View {
    min: [f64; 2],
    scale: [f64; 2],
}

impl View {
    /// Affine map from a padded data bounding box onto the drawing area.
    fn fit(points: impl Iterator<Item = [f64; 2]> + Clone) -> View {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in points.clone() {
            for c in 0..2 {
                lo[c] = lo[c].min(p[c]);
                hi[c] = hi[c].max(p[c]);
            }
        }
        let mut min = [0.0; 2];
        let mut scale = [1.0; 2];
        for c in 0..2 {
            let span = (hi[c] - lo[c]).max(1e-9);
            let pad = 0.05 * span;
            min[c] = lo[c] - pad;
            let extent = if c == 0 { WIDTH } else { HEIGHT } - 2.0 * MARGIN;
            scale[c] = extent / (span + 2.0 * pad);
        }
        View { min, scale }
    }

    fn map(&self, p: [f64; 2]) -> (f64, f64) {
        let x = MARGIN + (p[0] - self.min[0]) * self.scale[0];
        // SVG y grows downward.
        let y = HEIGHT - MARGIN - (p[1] - self.min[1]) * self.scale[1];
        (x, y)
    }
}

struct Svg {
    body: String,
}

impl Svg {
    fn new() -> Svg {
        let mut body = String::new();
        let _ = writeln!(
            body,
            r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH:.0} {HEIGHT:.0}" width="{WIDTH:.0}" height="{HEIGHT:.0}">"#
        );
        let _ = writeln!(
            body,
            r##"<rect width="{WIDTH:.0}" height="{HEIGHT:.0}" fill="#ffffff"/>"##
        );
        Svg { body }
    }

    fn circle(&mut self, class: &str, x: f64, y: f64, r: f64, color: &str) {
        let _ = writeln!(
            self.body,
            r#"<circle class="{class}" cx="{x:.6}" cy="{y:.6}" r="{r:.1}" fill="{color}"/>"#
        );
    }

    #[allow(clippy::too_many_arguments)]
    fn line(&mut self, class: &str, x1: f64, y1: f64, x2: f64, y2: f64, color: &str, width: f64) {
        let _ = writeln!(
            self.body,
            r#"<line class="{class}" x1="{x1:.6}" y1="{y1:.6}" x2="{x2:.6}" y2="{y2:.6}" stroke="{color}" stroke-width="{width:.1}"/>"#
        );
    }

    /// The '+' marker used for prototypes.
    fn plus(&mut self, x: f64, y: f64, color: &str) {
        let s = 7.0;
        self.line("prototype", x - s, y, x + s, y, color, 2.5);
        self.line("prototype", x, y - s, x, y + s, color, 2.5);
    }

    fn polyline(&mut self, class: &str, pts: &[(f64, f64)], color: &str, width: f64) {
        let mut coords = String::new();
        for (x, y) in pts {
            let _ = write!(coords, "{x:.6},{y:.6} ");
        }
        let _ = writeln!(
            self.body,
            r#"<polyline class="{class}" points="{}" fill="none" stroke="{color}" stroke-width="{width:.1}"/>"#,
            coords.trim_end()
        );
    }

    fn finish(mut self) -> String {
        let _ = writeln!(self.body, "</svg>");
        self.body
    }
}

/// Scatter of 1D/2D data with prototype marks and reconstruction segments.
pub fn render_scatter(
    points: &[Vec<f64>],
    prototypes: &[Vec<f64>],
    reconstructions: &[Vec<f64>],
    format: ReportFormat,
) -> String {
    let lift = |p: &Vec<f64>| -> [f64; 2] {
        if p.len() == 1 {
            [p[0], 0.0]
        } else {
            [p[0], p[1]]
        }
    };
    match format {
        ReportFormat::Csv => {
            let mut out = String::new();
            for p in points {
                let q = lift(p);
                let _ = writeln!(out, "point,{},{}", q[0], q[1]);
            }
            for (p, r) in points.iter().zip(reconstructions) {
                let (q, s) = (lift(p), lift(r));
                let _ = writeln!(out, "reconstruction,{},{},{},{}", q[0], q[1], s[0], s[1]);
            }
            for u in prototypes {
                let q = lift(u);
                let _ = writeln!(out, "prototype,{},{}", q[0], q[1]);
            }
            out
        }
        ReportFormat::Svg => {
            let all: Vec<[f64; 2]> = points
                .iter()
                .chain(prototypes.iter())
                .chain(reconstructions.iter())
                .map(lift)
                .collect();
            let view = View::fit(all.iter().copied());
            let mut svg = Svg::new();
            for (p, r) in points.iter().zip(reconstructions) {
                let (x1, y1) = view.map(lift(p));
                let (x2, y2) = view.map(lift(r));
                svg.line("reconstruction", x1, y1, x2, y2, COLOR_SEGMENT, 0.7);
            }
            for p in points {
                let (x, y) = view.map(lift(p));
                svg.circle("data", x, y, 3.0, COLOR_DATA);
            }
            for u in prototypes {
                let (x, y) = view.map(lift(u));
                svg.plus(x, y, COLOR_PROTO);
            }
            svg.finish()
        }
    }
}

/// 1D->1D regression: data scatter, fitted curve over a 200-point grid,
/// prototype pairs (u_j, v_j).
pub fn render_curve(
    data: &[(f64, f64)],
    curve: &[(f64, f64)],
    prototypes: &[(f64, f64)],
    format: ReportFormat,
) -> String {
    match format {
        ReportFormat::Csv => {
            let mut out = String::new();
            for (x, y) in data {
                let _ = writeln!(out, "point,{x},{y}");
            }
            for (x, y) in curve {
                let _ = writeln!(out, "curve,{x},{y}");
            }
            for (x, y) in prototypes {
                let _ = writeln!(out, "prototype,{x},{y}");
            }
            out
        }
        ReportFormat::Svg => {
            let all = data.iter().chain(curve.iter()).chain(prototypes.iter());
            let view = View::fit(all.map(|&(x, y)| [x, y]));
            let mut svg = Svg::new();
            for &(x, y) in data {
                let (px, py) = view.map([x, y]);
                svg.circle("data", px, py, 3.0, COLOR_DATA);
            }
            let pts: Vec<(f64, f64)> = curve.iter().map(|&(x, y)| view.map([x, y])).collect();
            svg.polyline("curve", &pts, COLOR_PROTO, 2.0);
            for &(x, y) in prototypes {
                let (px, py) = view.map([x, y]);
                svg.plus(px, py, COLOR_PROTO);
            }
            svg.finish()
        }
    }
}

/// Barycentric (ternary) plot for 3-class probability vectors: the triangle
/// corners are the classes; every probability triple lands inside.
pub fn render_ternary(
    labels: &[String],
    points: &[(Vec<f64>, usize)],
    prototypes: &[Vec<f64>],
    format: ReportFormat,
) -> String {
    let corner = |i: usize| -> [f64; 2] {
        match i {
            0 => [0.0, 0.0],
            1 => [1.0, 0.0],
            _ => [0.5, 3f64.sqrt() / 2.0],
        }
    };
    let embed = |p: &[f64]| -> [f64; 2] {
        let mut out = [0.0; 2];
        for (i, w) in p.iter().enumerate() {
            let c = corner(i);
            out[0] += w * c[0];
            out[1] += w * c[1];
        }
        out
    };
    match format {
        ReportFormat::Csv => {
            let mut out = String::new();
            let _ = writeln!(out, "classes,{},{},{}", labels[0], labels[1], labels[2]);
            for (p, class) in points {
                let _ = writeln!(out, "point,{},{},{},{}", p[0], p[1], p[2], labels[*class]);
            }
            for v in prototypes {
                let _ = writeln!(out, "prototype,{},{},{}", v[0], v[1], v[2]);
            }
            out
        }
        ReportFormat::Svg => {
            let corners = [corner(0), corner(1), corner(2)];
            let view = View::fit(corners.iter().copied());
            let mut svg = Svg::new();
            for i in 0..3 {
                let (x1, y1) = view.map(corners[i]);
                let (x2, y2) = view.map(corners[(i + 1) % 3]);
                svg.line("frame", x1, y1, x2, y2, COLOR_FRAME, 1.5);
            }
            for (p, class) in points {
                let (x, y) = view.map(embed(p));
                svg.circle("data", x, y, 3.0, CLASS_COLORS[*class % 3]);
            }
            for v in prototypes {
                let (x, y) = view.map(embed(v));
                svg.plus(x, y, COLOR_PROTO);
            }
            svg.finish()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Svg,
    Csv,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "svg" => Ok(ReportFormat::Svg),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(CliError::config(format!(
                "unknown report format '{other}' (expected svg or csv)"
            ))),
        }
    }
}

/// Lists what the report command can draw, for the unsupported-case error.
pub const SUPPORTED_REPORTS: &str = "supported reports: unsupervised model on 1D/2D vector data \
(scatter with prototypes and reconstruction segments); simple regression 1D vector -> 1D vector \
(fitted curve); regression with a 3-class one-hot response (barycentric plot)";

/// Helpers for rendering: one-hot rows of a block as label matrix rows.
pub fn onehot_rows(block: &FeatureBlock) -> Option<(Vec<String>, Vec<usize>)> {
    match &block.data {
        BlockData::OneHot { categories, .. } => {
            Some((categories.clone(), block.labels().expect("one-hot")))
        }
        _ => None,
    }
}
