//! Plain SVG line charts, so that a run has no dependency on a plotting stack.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{CliError, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Emphasised series are drawn thicker and on top.
    pub emphasis: bool,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
            emphasis: false,
        }
    }

    pub fn emphasised(mut self) -> Self {
        self.emphasis = true;
        self
    }
}

fn bounds(series: &[Series]) -> (f64, f64, f64, f64) {
    let pts = series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 <= 0.0 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 <= 0.0 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    (x0, x1, y0, y1)
}

/// Renders the series as a single SVG document. Output depends only on the input.
pub fn line_chart(title: &str, series: &[Series]) -> String {
    let (x0, x1, y0, y1) = bounds(series);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<path d="M{m} {top} V{bottom} H{right}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        top = MARGIN,
        bottom = HEIGHT - MARGIN,
        right = WIDTH - MARGIN
    );
    for (v, anchor, x, y) in [
        (x0, "start", sx(x0), HEIGHT - MARGIN + 16.0),
        (x1, "end", sx(x1), HEIGHT - MARGIN + 16.0),
    ] {
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="11" text-anchor="{anchor}">{}</text>"#,
            tick(v)
        );
    }
    for (v, y) in [(y0, sy(y0)), (y1, sy(y1))] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            MARGIN - 4.0,
            y + 4.0,
            tick(v)
        );
    }

    let order = series.iter().enumerate().filter(|(_, s)| !s.emphasis).chain(series.iter().enumerate().filter(|(_, s)| s.emphasis));
    for (i, s) in order {
        let mut d = String::new();
        let mut pen_down = false;
        for &(x, y) in &s.points {
            if !(x.is_finite() && y.is_finite()) {
                pen_down = false;
                continue;
            }
            let _ = write!(d, "{}{:.2} {:.2} ", if pen_down { "L" } else { "M" }, sx(x), sy(y));
            pen_down = true;
        }
        let (color, width, opacity) = if s.emphasis {
            ("black", 2.5, 1.0)
        } else {
            (COLORS[i % COLORS.len()], 1.0, 0.7)
        };
        let _ = writeln!(
            svg,
            r#"<path d="{}" stroke="{color}" stroke-width="{width}" stroke-opacity="{opacity}" fill="none"><title>{}</title></path>"#,
            d.trim_end(),
            escape(&s.label)
        );
    }

    let labelled: Vec<&Series> = series.iter().filter(|s| s.emphasis).collect();
    let legend: Vec<&Series> = if labelled.is_empty() && series.len() <= COLORS.len() {
        series.iter().collect()
    } else {
        labelled
    };
    for (row, s) in legend.iter().enumerate() {
        let idx = series.iter().position(|t| std::ptr::eq(t, *s)).unwrap_or(0);
        let color = if s.emphasis { "black" } else { COLORS[idx % COLORS.len()] };
        let y = MARGIN + 14.0 * row as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{y:.2}" font-family="sans-serif" font-size="11" fill="{color}" text-anchor="end">{}</text>"#,
            WIDTH - MARGIN,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Reads a two-column numeric CSV (first column x, second y). Lines starting
/// with `#` are skipped and the first remaining row is the header.
pub fn read_curve_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let err = |row: usize, reason: String| CliError::Csv {
        path: path.to_path_buf(),
        row,
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(text.as_bytes());
    let mut points = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| err(row, e.to_string()))?;
        if record.len() < 2 {
            return Err(err(row, format!("expected two columns, found {}", record.len())));
        }
        let parse = |j: usize| {
            record[j]
                .trim()
                .parse::<f64>()
                .map_err(|_| err(row, format!("column {} is not a number: {:?}", j + 1, &record[j])))
        };
        points.push((parse(0)?, parse(1)?));
    }
    if points.is_empty() {
        return Err(err(0, "no data rows".into()));
    }
    Ok(points)
}

/// Overlays the curves stored in the given CSV files, labelled by file stem.
pub fn plot_curves(title: &str, paths: &[&Path]) -> Result<String> {
    let mut series = Vec::with_capacity(paths.len());
    for p in paths {
        let label = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        series.push(Series::new(label, read_curve_csv(p)?));
    }
    Ok(line_chart(title, &series))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_is_deterministic() {
        let s = vec![Series::new("a<b", vec![(0.0, 0.0), (1.0, 2.0)]), Series::new("pi", vec![(0.0, 1.0), (1.0, 1.0)]).emphasised()];
        let one = line_chart("t", &s);
        assert_eq!(one, line_chart("t", &s));
        assert!(one.contains("a&lt;b"));
        assert!(one.starts_with("<svg"));
    }

    #[test]
    fn nonfinite_points_break_the_line() {
        let s = vec![Series::new("x", vec![(0.0, 0.0), (0.5, f64::NAN), (1.0, 1.0)])];
        let svg = line_chart("t", &s);
        let line = svg.lines().find(|l| l.contains("<title>x</title>")).unwrap();
        assert_eq!(line.matches('M').count(), 2);
        assert!(!line.contains('L'));
    }
}
