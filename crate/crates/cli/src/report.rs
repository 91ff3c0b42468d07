//! CSV, JSON and SVG artifacts.
//!
//! Output is a pure function of the rows: CSV and JSON go through `csv` and
//! `serde_json` (struct fields in declaration order, map keys sorted), and the
//! SVG writer formats coordinates with a fixed precision.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub struct PlotSpec {
    pub title: String,
    /// Column used for the abscissa.
    pub x: String,
    /// One polyline per column.
    pub y: Vec<String>,
    pub log_x: bool,
    pub log_y: bool,
}

impl PlotSpec {
    pub fn log_log(title: &str, x: &str, y: &[&str]) -> Self {
        PlotSpec { title: title.into(), x: x.into(), y: y.iter().map(|s| s.to_string()).collect(), log_x: true, log_y: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Format<'a> {
    Csv,
    Json,
    Svg(&'a PlotSpec),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io { path: path.to_path_buf(), source: e }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

/// Writes `rows` to `path` in the given format.
pub fn write_report<R: Serialize>(rows: &[R], format: Format<'_>, path: &Path) -> Result<(), CliError> {
    let bytes = match format {
        Format::Csv => csv_bytes(rows)?,
        Format::Json => json_bytes(&rows)?,
        Format::Svg(spec) => {
            if rows.is_empty() {
                return Err(CliError::Config(format!("{}: an svg plot needs at least one row", path.display())));
            }
            let records = rows.iter().map(serde_json::to_value).collect::<Result<Vec<Value>, _>>().map_err(json_err)?;
            render_svg(&records, spec)?.into_bytes()
        }
    };
    let mut w = create(path)?;
    w.write_all(&bytes).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

/// Pretty JSON of any serializable value.
pub fn write_json<V: Serialize + ?Sized>(value: &V, path: &Path) -> Result<(), CliError> {
    let bytes = json_bytes(value)?;
    let mut w = create(path)?;
    w.write_all(&bytes).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

fn json_err(e: serde_json::Error) -> CliError {
    CliError::Config(format!("serialization failed: {e}"))
}

pub fn csv_bytes<R: Serialize>(rows: &[R]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Config(format!("csv serialization failed: {e}")))?;
    }
    w.into_inner().map_err(|e| CliError::Config(format!("csv flush failed: {e}")))
}

pub fn json_bytes<V: Serialize + ?Sized>(value: &V) -> Result<Vec<u8>, CliError> {
    let mut out = serde_json::to_vec_pretty(value).map_err(json_err)?;
    out.push(b'\n');
    Ok(out)
}

/// Reads a CSV with a header into JSON records; numeric cells become numbers
/// and empty cells become null.
pub fn read_csv_records(path: &Path) -> Result<Vec<Value>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let headers = r.headers().map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?.clone();
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut obj = serde_json::Map::new();
        for (h, cell) in headers.iter().zip(rec.iter()) {
            let v = if cell.is_empty() {
                Value::Null
            } else if let Some(n) = cell.parse::<f64>().ok().and_then(serde_json::Number::from_f64) {
                Value::Number(n)
            } else {
                Value::String(cell.to_string())
            };
            obj.insert(h.to_string(), v);
        }
        out.push(Value::Object(obj));
    }
    Ok(out)
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 140.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn field(rec: &Value, key: &str) -> Option<f64> {
    match rec.get(key)? {
        Value::Number(n) => n.as_f64(),
        Value::Bool(b) => Some(if *b { 1.0 } else { 0.0 }),
        _ => None,
    }
}

struct Axis {
    log: bool,
    lo: f64,
    hi: f64,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Option<Self> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return None;
        }
        if log {
            lo = lo.floor();
            hi = hi.ceil().max(lo + 1.0);
        } else if hi - lo < 1e-300 {
            lo -= 0.5;
            hi += 0.5;
        }
        Some(Axis { log, lo, hi })
    }

    fn unit(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let lo = self.lo as i32;
            let hi = self.hi as i32;
            let step = ((hi - lo) / 8).max(1);
            (lo..=hi).step_by(step as usize).map(|e| ((e as f64 - self.lo) / (self.hi - self.lo), format!("1e{e}"))).collect()
        } else {
            (0..=4)
                .map(|i| {
                    let u = i as f64 / 4.0;
                    (u, format!("{:.3}", self.lo + u * (self.hi - self.lo)))
                })
                .collect()
        }
    }
}

/// Renders the records as an SVG line plot, one polyline per `y` column.
/// Points that are missing, non-finite or non-positive on a log axis are
/// skipped.
pub fn render_svg(records: &[Value], spec: &PlotSpec) -> Result<String, CliError> {
    let usable = |x: f64, log: bool| x.is_finite() && (!log || x > 0.0);
    let series: Vec<(&str, Vec<(f64, f64)>)> = spec
        .y
        .iter()
        .map(|col| {
            let pts = records
                .iter()
                .filter_map(|r| Some((field(r, &spec.x)?, field(r, col)?)))
                .filter(|(x, y)| usable(*x, spec.log_x) && usable(*y, spec.log_y))
                .collect();
            (col.as_str(), pts)
        })
        .collect();
    let xs = series.iter().flat_map(|(_, p)| p.iter().map(|q| q.0));
    let ys = series.iter().flat_map(|(_, p)| p.iter().map(|q| q.1));
    let (Some(ax), Some(ay)) = (Axis::fit(xs, spec.log_x), Axis::fit(ys, spec.log_y)) else {
        return Err(CliError::Config(format!("nothing to plot for columns {} vs {}", spec.y.join(", "), spec.x)));
    };
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |u: f64| LEFT + u * pw;
    let py = |u: f64| TOP + (1.0 - u) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(&spec.title));
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for (u, label) in ax.ticks() {
        let x = px(u);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, TOP + ph, TOP + ph + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{label}</text>"#, TOP + ph + 18.0);
    }
    for (u, label) in ay.ticks() {
        let y = py(u);
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#, LEFT - 5.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#, LEFT - 8.0, y + 4.0);
    }
    let x_label = if spec.log_x { format!("{} (log)", spec.x) } else { spec.x.clone() };
    let y_label = if spec.log_y { "value (log)" } else { "value" };
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, HEIGHT - 10.0, escape(&x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{y_label}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{:.2},{:.2}", px(ax.unit(*x)), py(ay.unit(*y)))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"><title>{}</title></polyline>"#, coords.join(" "), escape(name));
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="1.5"/>"#, lx + 20.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 26.0, ly + 4.0, escape(name));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        s: f64,
        ratio: Option<f64>,
        label: String,
    }

    fn rows() -> Vec<Row> {
        vec![
            Row { s: 1.0, ratio: Some(0.5), label: "a".into() },
            Row { s: 2.0, ratio: None, label: "b, quoted \"x\"".into() },
            Row { s: 4.0, ratio: Some(0.125), label: "c".into() },
        ]
    }

    #[test]
    fn csv_has_header_and_quoting() {
        let text = String::from_utf8(csv_bytes(&rows()).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "s,ratio,label");
        assert_eq!(lines[2], "2.0,,\"b, quoted \"\"x\"\"\"");
    }

    #[test]
    fn serialization_is_byte_stable() {
        assert_eq!(csv_bytes(&rows()).unwrap(), csv_bytes(&rows()).unwrap());
        assert_eq!(json_bytes(&rows()).unwrap(), json_bytes(&rows()).unwrap());
        let json = String::from_utf8(json_bytes(&rows()).unwrap()).unwrap();
        assert!(json.find("\"s\"").unwrap() < json.find("\"ratio\"").unwrap());
    }

    #[test]
    fn svg_is_well_formed_with_one_polyline_per_series() {
        let recs: Vec<Value> = rows().iter().map(|r| serde_json::to_value(r).unwrap()).collect();
        let spec = PlotSpec::log_log("ratio <sweep> & more", "s", &["ratio", "s"]);
        let svg = render_svg(&recs, &spec).unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let lines: Vec<_> = doc.descendants().filter(|n| n.has_tag_name("polyline")).collect();
        assert_eq!(lines.len(), 2);
        // the missing ratio is skipped
        assert_eq!(lines[0].attribute("points").unwrap().split(' ').count(), 2);
        assert_eq!(lines[1].attribute("points").unwrap().split(' ').count(), 3);
    }

    #[test]
    fn svg_needs_rows_and_points() {
        let spec = PlotSpec::log_log("t", "s", &["ratio"]);
        let dir = tempfile::tempdir().unwrap();
        let empty: Vec<Row> = Vec::new();
        assert!(write_report(&empty, Format::Svg(&spec), &dir.path().join("a.svg")).is_err());
        let neg = vec![Row { s: 1.0, ratio: Some(-1.0), label: String::new() }];
        assert!(write_report(&neg, Format::Svg(&spec), &dir.path().join("b.svg")).is_err());
    }

    #[test]
    fn csv_round_trips_through_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_report(&rows(), Format::Csv, &path).unwrap();
        let recs = read_csv_records(&path).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[1]["ratio"], Value::Null);
        assert_eq!(recs[2]["ratio"].as_f64(), Some(0.125));
        assert_eq!(recs[1]["label"], Value::String("b, quoted \"x\"".into()));
    }

    #[test]
    fn unwritable_path_names_the_path() {
        let err = write_report(&rows(), Format::Csv, Path::new("/nonexistent-dir/x.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.csv"));
    }
}
