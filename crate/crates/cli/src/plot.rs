//! Minimal SVG line charts of CSV series.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{io_error, CliError, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 180.0;
const MARGIN_Y: f64 = 40.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Reads series from a CSV whose first column is the x axis. Without
/// `columns`, plots `err` if present and every other column otherwise.
pub fn read_series(path: &Path, columns: &[String]) -> Result<Vec<Series>> {
    let text = std::fs::read_to_string(path).map_err(io_error(path))?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if headers.len() < 2 {
        return Err(CliError::Usage(format!("{}: need at least two columns", path.display())));
    }
    let selected: Vec<usize> = if !columns.is_empty() {
        columns
            .iter()
            .map(|c| {
                headers
                    .iter()
                    .position(|h| h == c)
                    .ok_or_else(|| CliError::Usage(format!("{}: no column {c:?}", path.display())))
            })
            .collect::<Result<_>>()?
    } else if let Some(i) = headers.iter().position(|h| h == "err") {
        vec![i]
    } else {
        (1..headers.len()).filter(|&i| headers[i] != "epoch").collect()
    };

    let stem = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    let mut series: Vec<Series> = selected
        .iter()
        .map(|&i| Series {
            label: if headers[i] == "err" { stem.clone() } else { headers[i].clone() },
            points: Vec::new(),
        })
        .collect();
    for record in reader.records() {
        let record = record?;
        let Some(x) = record.get(0).and_then(|v| v.parse::<f64>().ok()) else {
            continue;
        };
        for (s, &i) in series.iter_mut().zip(&selected) {
            if let Some(y) = record.get(i).and_then(|v| v.parse::<f64>().ok()) {
                s.points.push((x, y));
            }
        }
    }
    Ok(series)
}

fn nice_ticks(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let raw = (hi - lo) / count as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let start = (lo / step).ceil() as i64;
    let end = (hi / step).floor() as i64;
    (start..=end).map(|i| i as f64 * step).collect()
}

/// Renders the series as an SVG document; `log_y` uses a base-10 y axis and
/// drops nonpositive values.
pub fn render_svg(series: &[Series], title: &str, y_label: &str, log_y: bool) -> String {
    let transform = |y: f64| if log_y { y.log10() } else { y };
    let usable = |y: f64| y.is_finite() && (!log_y || y > 0.0);
    let all: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|&(x, y)| x.is_finite() && usable(y))
        .map(|(x, y)| (x, transform(y)))
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = all.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
    );
    if all.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if log_y {
        y0 = y0.floor();
        y1 = y1.ceil().max(y0 + 1.0);
    } else if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - 2.0 * MARGIN_Y;
    let px = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w;
    let py = |y: f64| MARGIN_Y + (1.0 - (y - y0) / (y1 - y0)) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, MARGIN_LEFT + plot_w / 2.0, escape(title));

    let y_ticks: Vec<f64> = if log_y {
        (y0 as i64..=y1 as i64).map(|e| e as f64).collect()
    } else {
        nice_ticks(y0, y1, 5)
    };
    for t in y_ticks {
        let y = py(t);
        let label = if log_y { format!("1e{}", t as i64) } else { format!("{t}") };
        let _ = writeln!(svg, r##"<line x1="{MARGIN_LEFT}" x2="{}" y1="{y:.1}" y2="{y:.1}" stroke="#ddd"/>"##, MARGIN_LEFT + plot_w);
        let _ = writeln!(svg, r#"<text x="{}" y="{:.1}" text-anchor="end">{label}</text>"#, MARGIN_LEFT - 6.0, y + 4.0);
    }
    for t in nice_ticks(x0, x1, 6) {
        let x = px(t);
        let _ = writeln!(svg, r##"<line x1="{x:.1}" x2="{x:.1}" y1="{MARGIN_Y}" y2="{}" stroke="#eee"/>"##, MARGIN_Y + plot_h);
        let _ = writeln!(svg, r#"<text x="{x:.1}" y="{}" text-anchor="middle">{t}</text>"#, MARGIN_Y + plot_h + 16.0);
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_Y}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate(16 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
        MARGIN_Y + plot_h / 2.0,
        escape(y_label)
    );

    for (idx, s) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|&&(x, y)| x.is_finite() && usable(y))
            .map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(transform(y))))
            .collect();
        if !pts.is_empty() {
            let _ = writeln!(svg, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        }
        let ly = MARGIN_Y + 14.0 + 18.0 * idx as f64;
        let lx = MARGIN_LEFT + plot_w + 12.0;
        let _ = writeln!(svg, r#"<line x1="{lx}" x2="{}" y1="{ly}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&s.label));
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Plots every input into one chart written to `out`.
pub fn plot_files(inputs: &[PathBuf], columns: &[String], out: &Path, log_y: bool, title: &str) -> Result<()> {
    if inputs.is_empty() {
        return Err(CliError::Usage("plot needs at least one input".into()));
    }
    let mut series = Vec::new();
    for path in inputs {
        series.extend(read_series(path, columns)?);
    }
    let svg = render_svg(&series, title, "tracking error", log_y);
    crate::output::write_atomic(out, svg.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks() {
        assert_eq!(nice_ticks(0.0, 1000.0, 5), vec![0.0, 200.0, 400.0, 600.0, 800.0, 1000.0]);
        assert_eq!(nice_ticks(2.0, 2.0, 5), vec![2.0]);
    }

    #[test]
    fn renders_wide_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fig.csv");
        std::fs::write(&path, "k,a,b\n0,1e0,2e0\n1,1e-1,0e0\n2,1e-2,1e-3\n").unwrap();
        let series = read_series(&path, &[]).unwrap();
        assert_eq!(series.len(), 2);
        assert_eq!(series[0].points.len(), 3);
        let svg = render_svg(&series, "t", "err", true);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(read_series(&path, &["missing".into()]).is_err());
    }
}
