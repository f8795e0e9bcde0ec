//! Minimal static SVG charts: quantile bands and histograms.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 44.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new((x0, x1): (f64, f64), (y0, y1): (f64, f64)) -> Frame {
        let pad = |lo: f64, hi: f64| {
            if hi > lo {
                (lo, hi)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        };
        let (x0, x1) = pad(x0, x1);
        let (y0, y1) = pad(y0, y1);
        Frame { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN_L + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_B - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

fn header(svg: &mut String, title: &str) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(svg: &mut String, f: &Frame, x_label: &str) {
    let (left, right) = (MARGIN_L, WIDTH - MARGIN_R);
    let (top, bottom) = (MARGIN_T, HEIGHT - MARGIN_B);
    let _ = writeln!(
        svg,
        r#"<g class="axes" stroke="black" fill="none"><line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}"/><line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}"/></g>"#
    );
    for i in 0..=4 {
        let fx = f.x0 + (f.x1 - f.x0) * i as f64 / 4.0;
        let fy = f.y0 + (f.y1 - f.y0) * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            f.px(fx),
            bottom + 16.0,
            tick(fx)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            left - 6.0,
            f.py(fy) + 4.0,
            tick(fy)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (left + right) / 2.0,
        HEIGHT - 8.0,
        escape(x_label)
    );
}

fn tick(v: f64) -> String {
    if v.abs() >= 1000.0 || v == v.trunc() {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Splits a series with gaps into runs of consecutive present indices.
fn runs(ys: &[Option<f64>]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for (i, y) in ys.iter().enumerate() {
        match y {
            Some(_) => out.last_mut().expect("non-empty").push(i),
            None if out.last().is_some_and(|r| !r.is_empty()) => out.push(Vec::new()),
            None => {}
        }
    }
    out.retain(|r| !r.is_empty());
    out
}

fn polyline(
    svg: &mut String,
    f: &Frame,
    xs: &[f64],
    ys: &[Option<f64>],
    run: &[usize],
    class: &str,
    color: &str,
) {
    let coords: Vec<String> = run
        .iter()
        .map(|&i| {
            format!(
                "{:.2},{:.2}",
                f.px(xs[i]),
                f.py(ys[i].expect("present in run"))
            )
        })
        .collect();
    let _ = writeln!(
        svg,
        r#"<polyline class="{class}" fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
        coords.join(" ")
    );
}

fn parse_cell(s: &str) -> Result<Option<f64>> {
    let s = s.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("na") {
        return Ok(None);
    }
    let v: f64 = s.parse().with_context(|| format!("bad number {s:?}"))?;
    Ok(v.is_finite().then_some(v))
}

pub struct BandData {
    pub t: Vec<f64>,
    pub y: Option<Vec<Option<f64>>>,
    /// `(tau, values)` sorted by tau.
    pub quantiles: Vec<(f64, Vec<Option<f64>>)>,
}

pub fn read_band(path: &Path) -> Result<BandData> {
    let mut rdr =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let t_col = headers
        .iter()
        .position(|h| h == "t")
        .context("missing `t` column")?;
    let y_col = headers.iter().position(|h| h == "y");
    let mut q_cols: Vec<(f64, usize)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| {
            h.strip_prefix("q_")
                .and_then(|tau| tau.parse().ok())
                .map(|tau| (tau, i))
        })
        .collect();
    if q_cols.is_empty() {
        bail!("no `q_<tau>` columns in {}", path.display());
    }
    q_cols.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut data = BandData {
        t: Vec::new(),
        y: y_col.map(|_| Vec::new()),
        quantiles: q_cols.iter().map(|&(tau, _)| (tau, Vec::new())).collect(),
    };
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let t = parse_cell(field(t_col))
            .and_then(|t| t.context("empty t"))
            .with_context(|| format!("data row {}", row + 1))?;
        data.t.push(t);
        if let (Some(i), Some(y)) = (y_col, data.y.as_mut()) {
            y.push(parse_cell(field(i)).with_context(|| format!("data row {}", row + 1))?);
        }
        for (k, &(_, i)) in q_cols.iter().enumerate() {
            data.quantiles[k]
                .1
                .push(parse_cell(field(i)).with_context(|| format!("data row {}", row + 1))?);
        }
    }
    if data.t.is_empty() {
        bail!("{} has no data rows", path.display());
    }
    Ok(data)
}

pub fn band_svg(data: &BandData, title: &str) -> String {
    let all_y = data
        .quantiles
        .iter()
        .flat_map(|(_, v)| v.iter())
        .chain(data.y.iter().flatten())
        .flatten()
        .copied();
    let (lo, hi) = all_y.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 1.0) };
    let t0 = data.t.iter().copied().fold(f64::INFINITY, f64::min);
    let t1 = data.t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let f = Frame::new((t0, t1), (lo, hi));

    let mut svg = String::new();
    header(&mut svg, title);

    // shade between the outermost levels where both are present
    if data.quantiles.len() >= 2 {
        let (lower, upper) = (
            &data.quantiles[0].1,
            &data.quantiles[data.quantiles.len() - 1].1,
        );
        let both: Vec<Option<f64>> = lower.iter().zip(upper).map(|(l, u)| l.and(*u)).collect();
        for idx in runs(&both) {
            let mut pts: Vec<String> = idx
                .iter()
                .map(|&i| {
                    format!(
                        "{:.2},{:.2}",
                        f.px(data.t[i]),
                        f.py(upper[i].expect("checked"))
                    )
                })
                .collect();
            pts.extend(idx.iter().rev().map(|&i| {
                format!(
                    "{:.2},{:.2}",
                    f.px(data.t[i]),
                    f.py(lower[i].expect("checked"))
                )
            }));
            let _ = writeln!(
                svg,
                r##"<polygon class="band" fill="#1f77b4" fill-opacity="0.18" stroke="none" points="{}"/>"##,
                pts.join(" ")
            );
        }
    }
    for (k, (_, vals)) in data.quantiles.iter().enumerate() {
        for run in runs(vals) {
            polyline(
                &mut svg,
                &f,
                &data.t,
                vals,
                &run,
                "quantile",
                PALETTE[k % PALETTE.len()],
            );
        }
    }
    if let Some(y) = &data.y {
        for run in runs(y) {
            polyline(&mut svg, &f, &data.t, y, &run, "observed", "#444444");
        }
    }
    axes(&mut svg, &f, "t");
    let mut legend_y = MARGIN_T + 4.0;
    for (k, (tau, _)) in data.quantiles.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<text class="legend" x="{:.2}" y="{legend_y:.2}" fill="{}">q_{tau}</text>"#,
            WIDTH - MARGIN_R - 70.0,
            PALETTE[k % PALETTE.len()]
        );
        legend_y += 14.0;
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn read_column(path: &Path, column: &str) -> Result<Vec<f64>> {
    let mut rdr =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let idx = rdr
        .headers()?
        .iter()
        .position(|h| h == column)
        .with_context(|| format!("{}: missing column `{column}`", path.display()))?;
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if let Some(v) = parse_cell(rec.get(idx).unwrap_or(""))
            .with_context(|| format!("data row {}", row + 1))?
        {
            out.push(v);
        }
    }
    if out.is_empty() {
        bail!("{}: no values in column `{column}`", path.display());
    }
    Ok(out)
}

/// Equal-width bin counts over `[min, max]`; the last bin is closed.
pub fn histogram(values: &[f64], bins: usize) -> (f64, f64, Vec<usize>) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    };
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0; bins];
    for &v in values {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    (lo, hi, counts)
}

pub fn hist_svg(values: &[f64], bins: usize, title: &str, x_label: &str) -> String {
    let (lo, hi, counts) = histogram(values, bins);
    let top = *counts.iter().max().unwrap_or(&1) as f64;
    let f = Frame::new((lo, hi), (0.0, top));
    let mut svg = String::new();
    header(&mut svg, title);
    let width = (hi - lo) / bins as f64;
    for (b, &c) in counts.iter().enumerate() {
        let x0 = f.px(lo + b as f64 * width);
        let x1 = f.px(lo + (b + 1) as f64 * width);
        let y = f.py(c as f64);
        let _ = writeln!(
            svg,
            r##"<rect class="bin" x="{x0:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="#1f77b4" stroke="white"/>"##,
            (x1 - x0).max(0.0),
            (f.py(0.0) - y).max(0.0)
        );
    }
    axes(&mut svg, &f, x_label);
    svg.push_str("</svg>\n");
    svg
}
