//! CSV and SVG emission.
//!
//! Every file starts with `# key: value` provenance lines (CSV) or an XML
//! comment (SVG). Numbers are written with Rust's shortest round-trip float
//! formatting, so re-parsing a CSV reproduces the rows exactly and reruns
//! are byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd::ComplexField;
use crate::schwarz::{ModeRate, SchwarzReport};

/// Ordered provenance entries written at the top of every file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Provenance {
    entries: Vec<(String, String)>,
}

impl Provenance {
    pub fn new() -> Self {
        let mut p = Self::default();
        p.push("tool", concat!("helmdamp ", env!("CARGO_PKG_VERSION")));
        p
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.push(key, value);
        self
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        // keep every entry on one line
        let v = value.to_string().replace(['\n', '\r'], " ");
        self.entries.push((key.to_string(), v));
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    fn csv_header(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("# {k}: {v}\n"))
            .collect()
    }

    fn svg_comment(&self) -> String {
        let body: String = self
            .entries
            .iter()
            .map(|(k, v)| format!("  {k}: {}\n", v.replace("--", "- -")))
            .collect();
        format!("<!--\n{body}-->\n")
    }
}

/// A table: column names plus string cells, written as CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }
}

/// Float formatting shared by every writer: shortest round-trip digits,
/// exponent form for very small or large magnitudes, `inf` for infinities.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Writes `table` as CSV with a provenance header.
pub fn emit_csv(table: &Table, provenance: &Provenance, path: &Path) -> Result<()> {
    let bytes = csv_bytes(table, provenance)?;
    fs::write(path, bytes)?;
    Ok(())
}

pub fn csv_bytes(table: &Table, provenance: &Provenance) -> Result<Vec<u8>> {
    let mut out = provenance.csv_header().into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(&table.columns)?;
        for row in &table.rows {
            w.write_record(row)?;
        }
        w.flush()?;
    }
    Ok(out)
}

/// Reads a CSV written by [`emit_csv`], skipping the provenance lines.
pub fn read_csv(path: &Path) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)?;
    let columns = rdr.headers()?.iter().map(str::to_string).collect();
    let rows = rdr
        .records()
        .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok(Table { columns, rows })
}

/// One named polyline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Axis labels and scaling of a line chart.
#[derive(Debug, Clone, PartialEq)]
pub struct AxesSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    /// Fixed y range; inferred from the data when `None`.
    pub y_range: Option<(f64, f64)>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 180.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Renders curves as a self-contained SVG line chart. Non-finite `y`
/// values (divergent modes) are pinned to the top of the axis and marked.
pub fn svg_lineplot(curves: &[Curve], axes: &AxesSpec, provenance: &Provenance) -> Result<String> {
    if curves.is_empty() || curves.iter().all(|c| c.points.is_empty()) {
        return Err(Error::EmptyPlot);
    }
    let finite_y = |y: f64| y.is_finite() && (!axes.log_y || y > 0.0);
    let xs = curves.iter().flat_map(|c| c.points.iter().map(|p| p.0));
    let (x_min, x_max) = bounds(xs);
    let ys = curves
        .iter()
        .flat_map(|c| c.points.iter().map(|p| p.1))
        .filter(|&y| finite_y(y));
    let (mut y_min, mut y_max) = axes.y_range.unwrap_or_else(|| bounds(ys));
    if axes.log_y {
        y_min = y_min.max(1e-300).log10().floor();
        y_max = y_max.max(1e-300).log10().ceil();
    }
    if !(y_max > y_min) {
        y_max = y_min + 1.0;
    }
    let x_span = if x_max > x_min { x_max - x_min } else { 1.0 };
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let px = |x: f64| MARGIN_L + (x - x_min) / x_span * plot_w;
    let py = |y: f64| {
        let v = if axes.log_y { y.log10() } else { y };
        let v = v.clamp(y_min, y_max);
        MARGIN_T + (1.0 - (v - y_min) / (y_max - y_min)) * plot_h
    };

    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str(&provenance.svg_comment());
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(s, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{plot_w}\" height=\"{plot_h}\" fill=\"none\" stroke=\"black\"/>"
    );
    // ticks
    for i in 0..=5 {
        let x = x_min + x_span * i as f64 / 5.0;
        let _ = writeln!(
            s,
            "<line x1=\"{0:.2}\" y1=\"{1:.2}\" x2=\"{0:.2}\" y2=\"{2:.2}\" stroke=\"#ccc\"/><text x=\"{0:.2}\" y=\"{3:.2}\" text-anchor=\"middle\">{4}</text>",
            px(x),
            MARGIN_T,
            MARGIN_T + plot_h,
            MARGIN_T + plot_h + 16.0,
            tick_label(x)
        );
    }
    let y_ticks: Vec<f64> = if axes.log_y {
        let (lo, hi) = (y_min as i32, y_max as i32);
        let step = ((hi - lo) / 8).max(1);
        (lo..=hi).step_by(step as usize).map(|e| 10f64.powi(e)).collect()
    } else {
        (0..=5).map(|i| y_min + (y_max - y_min) * i as f64 / 5.0).collect()
    };
    for y in y_ticks {
        let label = if axes.log_y {
            format!("1e{}", y.log10().round() as i32)
        } else {
            tick_label(y)
        };
        let _ = writeln!(
            s,
            "<line x1=\"{0:.2}\" y1=\"{2:.2}\" x2=\"{1:.2}\" y2=\"{2:.2}\" stroke=\"#ccc\"/><text x=\"{3:.2}\" y=\"{4:.2}\" text-anchor=\"end\">{5}</text>",
            MARGIN_L,
            MARGIN_L + plot_w,
            py(y),
            MARGIN_L - 6.0,
            py(y) + 4.0,
            label
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"14\">{}</text>",
        MARGIN_L + plot_w / 2.0,
        MARGIN_T - 14.0,
        escape(&axes.title)
    );
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 16.0,
        escape(&axes.x_label)
    );
    let _ = writeln!(
        s,
        "<text x=\"20\" y=\"{0:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 20 {0:.2})\">{1}</text>",
        MARGIN_T + plot_h / 2.0,
        escape(&axes.y_label)
    );

    for (idx, curve) in curves.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let pts: Vec<String> = curve
            .points
            .iter()
            .map(|&(x, y)| {
                let yy = if finite_y(y) { py(y) } else { MARGIN_T };
                format!("{:.2},{:.2}", px(x), yy)
            })
            .collect();
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            pts.join(" ")
        );
        for &(x, _) in curve.points.iter().filter(|p| !p.1.is_finite()) {
            let _ = writeln!(
                s,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"><title>diverged</title></circle>",
                px(x),
                MARGIN_T
            );
        }
        let ly = MARGIN_T + 10.0 + 18.0 * idx as f64;
        let lx = MARGIN_L + plot_w + 12.0;
        let _ = writeln!(
            s,
            "<line x1=\"{lx:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"{color}\" stroke-width=\"2\"/><text x=\"{:.2}\" y=\"{:.2}\">{}</text>",
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&curve.label)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_svg_lineplot(curves: &[Curve], axes: &AxesSpec, provenance: &Provenance, path: &Path) -> Result<()> {
    let svg = svg_lineplot(curves, axes, provenance)?;
    fs::write(path, svg)?;
    Ok(())
}

/// What to render from a complex field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldComponent {
    /// `|u|` on a grayscale map.
    Magnitude,
    /// `Re u` on a blue-white-red map symmetric about zero.
    Real,
}

/// Maximum raster cells per side; larger fields are block-averaged.
pub const MAX_RASTER: usize = 128;

/// Raster image of a field as SVG rectangles.
pub fn svg_field(field: &ComplexField, component: FieldComponent, title: &str, provenance: &Provenance) -> String {
    let nodes = field.grid().nodes();
    let cells = nodes.min(MAX_RASTER);
    let value = |z: num_complex::Complex64| match component {
        FieldComponent::Magnitude => z.norm(),
        FieldComponent::Real => z.re,
    };
    // block average onto cells × cells
    let mut raster = vec![0.0; cells * cells];
    let mut counts = vec![0usize; cells * cells];
    for (i, j, z) in field.iter() {
        let (ci, cj) = (i * cells / nodes, j * cells / nodes);
        raster[cj * cells + ci] += value(z);
        counts[cj * cells + ci] += 1;
    }
    raster.iter_mut().zip(&counts).for_each(|(v, &c)| *v /= c.max(1) as f64);
    let scale = raster.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let scale = if scale > 0.0 { scale } else { 1.0 };

    let size = 512.0;
    let px = size / cells as f64;
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str(&provenance.svg_comment());
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" font-family=\"sans-serif\" font-size=\"12\" shape-rendering=\"crispEdges\">",
        size,
        size + 30.0
    );
    let _ = writeln!(s, "<text x=\"{}\" y=\"18\" text-anchor=\"middle\">{}</text>", size / 2.0, escape(title));
    for cj in 0..cells {
        for ci in 0..cells {
            let v = raster[cj * cells + ci] / scale;
            let (r, g, b) = match component {
                FieldComponent::Magnitude => {
                    let t = (255.0 * (1.0 - v)).round() as u8;
                    (t, t, t)
                }
                FieldComponent::Real => diverging(v),
            };
            // y increases upwards
            let _ = writeln!(
                s,
                "<rect x=\"{:.3}\" y=\"{:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"#{r:02x}{g:02x}{b:02x}\"/>",
                ci as f64 * px,
                30.0 + (cells - 1 - cj) as f64 * px,
                px + 0.01,
                px + 0.01
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

fn diverging(v: f64) -> (u8, u8, u8) {
    let v = v.clamp(-1.0, 1.0);
    let fade = (255.0 * (1.0 - v.abs())).round() as u8;
    if v >= 0.0 {
        (255, fade, fade)
    } else {
        (fade, fade, 255)
    }
}

/// Field samples as a table `(x, y, re, im, abs)`.
pub fn field_table(field: &ComplexField) -> Table {
    let grid = field.grid();
    let mut t = Table::new(&["x", "y", "re", "im", "abs"]);
    for (i, j, z) in field.iter() {
        t.push(vec![
            fmt_f64(grid.coord(i)),
            fmt_f64(grid.coord(j)),
            fmt_f64(z.re),
            fmt_f64(z.im),
            fmt_f64(z.norm()),
        ]);
    }
    t
}

/// Trace-norm history `(iteration, trace_norm)` of a Schwarz run.
pub fn schwarz_norm_table(report: &SchwarzReport) -> Table {
    let mut t = Table::new(&["iteration", "trace_norm"]);
    for (it, v) in report.norms.iter().enumerate() {
        t.push(vec![it.to_string(), fmt_f64(*v)]);
    }
    t
}

/// Observed against predicted per-mode rates `(k, observed_rate,
/// predicted_rate)`; modes that stayed below the noise floor have an empty
/// observed cell.
pub fn schwarz_mode_table(rates: &[ModeRate], predicted: &[f64]) -> Table {
    let mut t = Table::new(&["k", "observed_rate", "predicted_rate"]);
    for (m, p) in rates.iter().zip(predicted) {
        t.push(vec![m.k.to_string(), m.rate.map(fmt_f64).unwrap_or_default(), fmt_f64(*p)]);
    }
    t
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo.is_finite() && hi.is_finite() {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}

fn tick_label(v: f64) -> String {
    let r = (v * 1000.0).round() / 1000.0;
    format!("{r}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes `bytes` to `path`, creating parent directories first.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axes() -> AxesSpec {
        AxesSpec {
            title: "t".into(),
            x_label: "xi/omega".into(),
            y_label: "rho".into(),
            log_y: true,
            y_range: None,
        }
    }

    #[test]
    fn empty_plot_is_an_error() {
        assert!(matches!(svg_lineplot(&[], &axes(), &Provenance::new()), Err(Error::EmptyPlot)));
    }

    #[test]
    fn one_curve_one_polyline() {
        let c = Curve {
            label: "r = 1".into(),
            points: vec![(0.0, 0.5), (1.0, f64::INFINITY)],
        };
        let svg = svg_lineplot(&[c], &axes(), &Provenance::new()).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = Table::new(&["a", "b", "note"]);
        t.push(vec![fmt_f64(0.1 + 0.2), fmt_f64(f64::INFINITY), "x, y".into()]);
        t.push(vec![fmt_f64(-1e-300), fmt_f64(123456.789), String::new()]);
        let prov = Provenance::new().with("seed", 3).with("config", "{\"a\":\n1}");
        emit_csv(&t, &prov, &path).unwrap();
        let back = read_csv(&path).unwrap();
        assert_eq!(back, t);
        let v: f64 = back.rows[0][0].parse().unwrap();
        assert_eq!(v, 0.1 + 0.2);
        assert_eq!(back.rows[0][1].parse::<f64>().unwrap(), f64::INFINITY);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# tool: helmdamp"));
    }
}
