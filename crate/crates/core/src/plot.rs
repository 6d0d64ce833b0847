//! Minimal line charts from CSV series.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const MARGIN: f64 = 60.0;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: String, column: &'static str },
    #[error("{path}: row {row}: non-numeric value")]
    BadValue { path: String, row: usize },
    #[error("{path}: no data rows")]
    Empty { path: String },
    #[error("unknown plot kind `{0}`, expected `loss` or `lambda-curve`")]
    Kind(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    /// The `loss` column against row index.
    Loss,
    /// `false_prediction_rate` against `lambda`.
    LambdaCurve,
}

impl PlotKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PlotKind::Loss => "loss",
            PlotKind::LambdaCurve => "lambda-curve",
        }
    }

    fn labels(self) -> (&'static str, &'static str) {
        match self {
            PlotKind::Loss => ("step", "loss"),
            PlotKind::LambdaCurve => ("lambda", "false_prediction_rate"),
        }
    }
}

impl fmt::Display for PlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlotKind {
    type Err = PlotError;

    fn from_str(s: &str) -> Result<Self, PlotError> {
        [PlotKind::Loss, PlotKind::LambdaCurve]
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| PlotError::Kind(s.to_string()))
    }
}

/// Reads the series for `kind` from a headed CSV file.
pub fn read_series(kind: PlotKind, path: &Path) -> Result<Vec<(f64, f64)>, PlotError> {
    let name = || path.display().to_string();
    let csv_err = |source| PlotError::Csv {
        path: name(),
        source,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let column = |column: &'static str| {
        headers
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| PlotError::MissingColumn {
                path: name(),
                column,
            })
    };
    let (xcol, ycol) = match kind {
        PlotKind::Loss => (None, column("loss")?),
        PlotKind::LambdaCurve => (Some(column("lambda")?), column("false_prediction_rate")?),
    };
    let mut points = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let num = |c: usize| {
            rec.get(c)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| PlotError::BadValue {
                    path: name(),
                    row: i + 1,
                })
        };
        let x = match xcol {
            Some(c) => num(c)?,
            None => i as f64,
        };
        points.push((x, num(ycol)?));
    }
    if points.is_empty() {
        return Err(PlotError::Empty { path: name() });
    }
    Ok(points)
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// An 800×600 chart with one polyline and the axis extremes labelled.
pub fn render(kind: PlotKind, points: &[(f64, f64)]) -> String {
    let (xlabel, ylabel) = kind.labels();
    let (x0, x1) = range(points.iter().map(|p| p.0));
    let (y0, y1) = range(points.iter().map(|p| p.1));
    let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (left, bottom, right, top) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{left} {top} L{left} {bottom} L{right} {bottom}" fill="none" stroke="black"/>"#
    );
    let pts: Vec<String> = points
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#,
        pts.join(" ")
    );
    let text = |s: &mut String, x: f64, y: f64, anchor: &str, body: &str| {
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="12" text-anchor="{anchor}">{body}</text>"#
        );
    };
    text(&mut s, left, bottom + 18.0, "middle", &fmt_tick(x0));
    text(&mut s, right, bottom + 18.0, "middle", &fmt_tick(x1));
    text(&mut s, left - 6.0, bottom + 4.0, "end", &fmt_tick(y0));
    text(&mut s, left - 6.0, top + 4.0, "end", &fmt_tick(y1));
    text(&mut s, WIDTH / 2.0, HEIGHT - 15.0, "middle", xlabel);
    text(&mut s, 15.0, HEIGHT / 2.0, "start", ylabel);
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.4}")
        .trim_end_matches('0')
        .trim_end_matches('.')
        .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polyline_spans_the_plot_area() {
        let svg = render(PlotKind::Loss, &[(0.0, 2.0), (1.0, 1.0), (2.0, 0.5)]);
        assert!(svg.contains(r#"points="60.00,60.00 400.00,380.00 740.00,540.00""#));
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(
            render(PlotKind::Loss, &[(0.0, 2.0), (1.0, 1.0)]),
            render(PlotKind::Loss, &[(0.0, 2.0), (1.0, 1.0)])
        );
    }

    #[test]
    fn flat_series_is_centred() {
        let svg = render(PlotKind::LambdaCurve, &[(50.0, 0.1)]);
        assert!(svg.contains(r#"points="400.00,300.00""#));
    }

    #[test]
    fn kinds_parse() {
        assert_eq!(
            "lambda-curve".parse::<PlotKind>().unwrap(),
            PlotKind::LambdaCurve
        );
        assert!(matches!("bar".parse::<PlotKind>(), Err(PlotError::Kind(_))));
    }

    #[test]
    fn series_are_read_by_column_name() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        std::fs::write(&p, "iteration,loss\n0,2.5\n1,1.5\n").unwrap();
        assert_eq!(
            read_series(PlotKind::Loss, &p).unwrap(),
            vec![(0.0, 2.5), (1.0, 1.5)]
        );
        assert!(matches!(
            read_series(PlotKind::LambdaCurve, &p),
            Err(PlotError::MissingColumn {
                column: "lambda",
                ..
            })
        ));
        std::fs::write(&p, "loss\n").unwrap();
        assert!(matches!(
            read_series(PlotKind::Loss, &p),
            Err(PlotError::Empty { .. })
        ));
        std::fs::write(&p, "loss\nnan\n").unwrap();
        assert!(matches!(
            read_series(PlotKind::Loss, &p),
            Err(PlotError::BadValue { row: 1, .. })
        ));
    }

    #[test]
    fn ticks_are_trimmed() {
        assert_eq!(fmt_tick(0.5), "0.5");
        assert_eq!(fmt_tick(100.0), "100");
        assert_eq!(fmt_tick(-0.0), "0");
    }
}
