//! Static SVG rendering of the CSV outputs: line plots, prediction scatter
//! with an identity line, and embeddings coloured by family.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// A named set of points drawn in one colour.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit<'a>(points: impl Iterator<Item = &'a (f64, f64)>) -> Result<Self> {
        let (mut x, mut y) = ((f64::INFINITY, f64::NEG_INFINITY), (f64::INFINITY, f64::NEG_INFINITY));
        for &(px, py) in points {
            if !px.is_finite() || !py.is_finite() {
                return Err(Error::Format("non-finite value in plot data".into()));
            }
            x = (x.0.min(px), x.1.max(px));
            y = (y.0.min(py), y.1.max(py));
        }
        if !x.0.is_finite() {
            return Err(Error::Format("nothing to plot".into()));
        }
        let pad = |(lo, hi): (f64, f64)| {
            let d = if hi > lo { 0.05 * (hi - lo) } else { 0.5 };
            (lo - d, hi + d)
        };
        Ok(Self { x: pad(x), y: pad(y) })
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn ticks((lo, hi): (f64, f64)) -> Vec<f64> {
    (0..=4).map(|k| lo + (hi - lo) * k as f64 / 4.0).collect()
}

fn open(svg: &mut String, frame: &Frame, title: &str, xlabel: &str, ylabel: &str) {
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(title));
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(svg, r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" fill="none" stroke="black"/>"#);
    for t in ticks(frame.x) {
        let x = frame.px(t);
        let _ = writeln!(svg, r#"<line x1="{x:.1}" y1="{y0}" x2="{x:.1}" y2="{}" stroke="black"/>"#, y0 + 5.0);
        let _ = writeln!(svg, r#"<text x="{x:.1}" y="{}" text-anchor="middle">{t:.3}</text>"#, y0 + 18.0);
    }
    for t in ticks(frame.y) {
        let y = frame.py(t);
        let _ = writeln!(svg, r#"<line x1="{}" y1="{y:.1}" x2="{x0}" y2="{y:.1}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{:.1}" text-anchor="end">{t:.3}</text>"#, x0 - 8.0, y + 4.0);
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 15.0, escape(xlabel));
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{0}" text-anchor="middle" transform="rotate(-90 15 {0})">{1}</text>"#,
        HEIGHT / 2.0,
        escape(ylabel)
    );
}

fn legend(svg: &mut String, names: &[&str]) {
    for (i, name) in names.iter().enumerate() {
        let y = MARGIN + 16.0 * i as f64;
        let x = WIDTH - MARGIN - 110.0;
        let _ = writeln!(svg, r#"<rect x="{x}" y="{}" width="10" height="10" fill="{}"/>"#, y - 9.0, PALETTE[i % PALETTE.len()]);
        let _ = writeln!(svg, r#"<text x="{}" y="{y}">{}</text>"#, x + 15.0, escape(name));
    }
}

/// Polylines with markers, one per series.
pub fn line_plot(series: &[Series], title: &str, xlabel: &str, ylabel: &str) -> Result<String> {
    let frame = Frame::fit(series.iter().flat_map(|s| s.points.iter()))?;
    let mut svg = String::new();
    open(&mut svg, &frame, title, xlabel, ylabel);
    for (i, s) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.1},{:.1}", frame.px(x), frame.py(y))).collect();
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#, path.join(" "));
        for &(x, y) in &s.points {
            let _ = writeln!(svg, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{colour}"/>"#, frame.px(x), frame.py(y));
        }
    }
    legend(&mut svg, &series.iter().map(|s| s.name.as_str()).collect::<Vec<_>>());
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Unconnected markers, one colour per series; `identity` adds the line y = x.
pub fn scatter_plot(series: &[Series], identity: bool, title: &str, xlabel: &str, ylabel: &str) -> Result<String> {
    let mut frame = Frame::fit(series.iter().flat_map(|s| s.points.iter()))?;
    if identity {
        let lo = frame.x.0.min(frame.y.0);
        let hi = frame.x.1.max(frame.y.1);
        frame = Frame { x: (lo, hi), y: (lo, hi) };
    }
    let mut svg = String::new();
    open(&mut svg, &frame, title, xlabel, ylabel);
    if identity {
        let (lo, hi) = frame.x;
        let _ = writeln!(
            svg,
            r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#888" stroke-dasharray="5,4"/>"##,
            frame.px(lo),
            frame.py(lo),
            frame.px(hi),
            frame.py(hi)
        );
    }
    for (i, s) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        for &(x, y) in &s.points {
            let _ = writeln!(svg, r#"<circle cx="{:.1}" cy="{:.1}" r="2.5" fill="{colour}" fill-opacity="0.7"/>"#, frame.px(x), frame.py(y));
        }
    }
    if series.len() > 1 {
        legend(&mut svg, &series.iter().map(|s| s.name.as_str()).collect::<Vec<_>>());
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn parse(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| Error::Format(format!("csv: {e}")))?.iter().map(String::from).collect();
        let rows = reader
            .records()
            .map(|r| r.map(|r| r.iter().map(String::from).collect()).map_err(|e| Error::Format(format!("csv: {e}"))))
            .collect::<Result<_>>()?;
        Ok(Self { header, rows })
    }

    fn col(&self, name: &str) -> Result<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| Error::Format(format!("csv has no column '{name}'")))
    }

    fn num(row: &[String], i: usize) -> Result<f64> {
        row[i].parse().map_err(|_| Error::Format(format!("'{}' is not a number", row[i])))
    }
}

/// Renders any CSV written by the other commands, choosing the plot from
/// its header: a fidelity report gives fidelity against rank, a training
/// log gives the loss curves, predictions give a scatter against truth and
/// an embedding gives a scatter coloured by family.
pub fn plot_csv(text: &str) -> Result<String> {
    let t = Table::parse(text)?;
    let has = |c: &str| t.header.iter().any(|h| h == c);
    if has("kind") && has("split") {
        let (kind, split, rank, value) = (t.col("kind")?, t.col("split")?, t.col("rank")?, t.col("value")?);
        let mut by_split: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
        for row in t.rows.iter().filter(|r| r[kind] == "rank") {
            by_split.entry(row[split].clone()).or_default().push((Table::num(row, rank)?, Table::num(row, value)?));
        }
        let series: Vec<Series> = by_split
            .into_iter()
            .map(|(s, points)| Series { name: if s == "ood" { "out-of-distribution".into() } else { "in-distribution".into() }, points })
            .collect();
        line_plot(&series, "Query fidelity by stellar rank", "stellar rank", "mean classical fidelity")
    } else if has("epoch") && has("recon") {
        let epoch = t.col("epoch")?;
        let series = ["recon", "kl", "triplet", "lambda"]
            .iter()
            .map(|&name| {
                let c = t.col(name)?;
                let points = t.rows.iter().map(|r| Ok((Table::num(r, epoch)?, Table::num(r, c)?))).collect::<Result<_>>()?;
                Ok(Series { name: name.into(), points })
            })
            .collect::<Result<Vec<_>>>()?;
        line_plot(&series, "Pretraining loss terms", "epoch", "value")
    } else if has("truth") && has("prediction") {
        let (truth, pred) = (t.col("truth")?, t.col("prediction")?);
        let points = t.rows.iter().map(|r| Ok((Table::num(r, truth)?, Table::num(r, pred)?))).collect::<Result<_>>()?;
        scatter_plot(&[Series { name: "test".into(), points }], true, "Prediction against truth", "truth", "prediction")
    } else if has("x") && has("y") && has("family") {
        let (x, y, family) = (t.col("x")?, t.col("y")?, t.col("family")?);
        let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
        for row in &t.rows {
            groups.entry(row[family].clone()).or_default().push((Table::num(row, x)?, Table::num(row, y)?));
        }
        let series: Vec<Series> = groups.into_iter().map(|(name, points)| Series { name, points }).collect();
        scatter_plot(&series, false, "State representations (t-SNE)", "t-SNE 1", "t-SNE 2")
    } else {
        Err(Error::Format(format!("unrecognised csv columns: {}", t.header.join(","))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_csv_gives_a_line_per_split() {
        let csv = "kind,split,rank,modes,xi_band,count,value\nrank,id,0,,,5,0.99\nrank,id,1,,,5,0.97\nrank,ood,3,,,4,0.9\n";
        let svg = plot_csv(csv).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("out-of-distribution"));
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    }

    #[test]
    fn predictions_get_an_identity_line() {
        let svg = plot_csv("id,truth,prediction\n0,1.0,1.1\n1,2.0,1.9\n2,3.0,3.2\n").unwrap();
        assert!(svg.contains("stroke-dasharray"));
        assert_eq!(svg.matches("<circle").count(), 3);
    }

    #[test]
    fn embeddings_are_coloured_by_family() {
        let svg = plot_csv("x,y,family,rank,modes,xi\n0,0,cat,inf,1,0\n1,1,noon,inf,2,0\n2,0,cat,inf,1,0\n").unwrap();
        assert!(svg.contains(PALETTE[0]) && svg.contains(PALETTE[1]));
        assert!(svg.contains(">cat<") && svg.contains(">noon<"));
    }

    #[test]
    fn malformed_csv_is_an_error() {
        assert!(plot_csv("a,b\n1,2\n").is_err());
        assert!(plot_csv("id,truth,prediction\n0,x,1\n").is_err());
        assert!(plot_csv("id,truth,prediction\n").is_err());
    }
}
