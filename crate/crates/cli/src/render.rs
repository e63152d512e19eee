//! CSV cells and static SVG figures.

use std::fmt::Write;

/// Shortest round-trip scientific form; `inf`, `-inf` and `NaN` pass through.
pub fn sci(v: f64) -> String {
    format!("{v:e}")
}

/// Quotes a CSV cell when it contains a separator, quote or newline.
pub fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const PALETTE: [&str; 6] = [
    "#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860",
];

pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
}

pub struct BarPanel {
    pub title: String,
    pub categories: Vec<String>,
    pub series: Vec<Series>,
}

fn finite_range<'a>(values: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    for &v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let pad = 0.15 * (hi - lo);
    (if lo < 0.0 { lo - pad } else { lo }, hi + pad)
}

/// Side-by-side grouped bar panels. Infinite values are drawn to the panel
/// edge and labelled.
pub fn grouped_bars(panels: &[BarPanel]) -> String {
    let (pw, ph, margin) = (360.0, 260.0, 40.0);
    let width = margin + panels.len() as f64 * (pw + margin);
    let height = ph + 2.0 * margin + 30.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (k, panel) in panels.iter().enumerate() {
        let x0 = margin + k as f64 * (pw + margin);
        let y0 = margin;
        let (lo, hi) = finite_range(panel.series.iter().flat_map(|s| s.values.iter()));
        let y_of = |v: f64| y0 + ph * (hi - v.clamp(lo, hi)) / (hi - lo);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="13">{}</text>"#,
            x0 + pw / 2.0,
            y0 - 12.0,
            escape(&panel.title)
        );
        let _ = writeln!(
            out,
            r##"<rect x="{x0:.1}" y="{y0:.1}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="#888"/>"##
        );
        let zero = y_of(0.0);
        let _ = writeln!(
            out,
            r#"<line x1="{x0:.1}" y1="{zero:.1}" x2="{:.1}" y2="{zero:.1}" stroke="black"/>"#,
            x0 + pw
        );
        for (v, anchor) in [(hi, y0 + 10.0), (lo, y0 + ph)] {
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{anchor:.1}" text-anchor="end">{v:.2}</text>"#,
                x0 - 4.0
            );
        }
        let groups = panel.categories.len().max(1) as f64;
        let gw = pw / groups;
        let bw = 0.8 * gw / panel.series.len().max(1) as f64;
        for (c, cat) in panel.categories.iter().enumerate() {
            let gx = x0 + c as f64 * gw + 0.1 * gw;
            for (s, series) in panel.series.iter().enumerate() {
                let v = series.values[c];
                let top = y_of(v);
                let (y, h) = if top < zero {
                    (top, zero - top)
                } else {
                    (zero, top - zero)
                };
                let bx = gx + s as f64 * bw;
                let _ = writeln!(
                    out,
                    r#"<rect x="{bx:.1}" y="{y:.1}" width="{:.1}" height="{h:.1}" fill="{}"/>"#,
                    bw * 0.95,
                    PALETTE[s % PALETTE.len()]
                );
                if v.is_infinite() {
                    let ty = if v > 0.0 { y0 + 12.0 } else { y0 + ph - 4.0 };
                    let label = if v > 0.0 { "+inf" } else { "-inf" };
                    let _ = writeln!(
                        out,
                        r#"<text x="{:.1}" y="{ty:.1}" text-anchor="middle">{label}</text>"#,
                        bx + bw / 2.0
                    );
                }
            }
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                x0 + (c as f64 + 0.5) * gw,
                y0 + ph + 14.0,
                escape(cat)
            );
        }
    }
    if let Some(first) = panels.first() {
        legend(
            &mut out,
            first.series.iter().map(|s| s.name.as_str()),
            margin,
            height - 14.0,
        );
    }
    out.push_str("</svg>\n");
    out
}

fn legend<'a>(out: &mut String, names: impl Iterator<Item = &'a str>, x: f64, y: f64) {
    for (i, name) in names.enumerate() {
        let lx = x + i as f64 * 120.0;
        let _ = writeln!(
            out,
            r#"<rect x="{lx:.1}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{y:.1}">{}</text>"#,
            y - 9.0,
            PALETTE[i % PALETTE.len()],
            lx + 14.0,
            escape(name)
        );
    }
}

/// Line plot of several series over shared x values.
pub fn line_plot(title: &str, x_label: &str, xs: &[f64], series: &[Series]) -> String {
    let (w, h, margin) = (520.0, 320.0, 50.0);
    let width = w + 2.0 * margin;
    let height = h + 2.0 * margin + 24.0;
    let (xlo, xhi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
    let xspan = if xhi > xlo { xhi - xlo } else { 1.0 };
    let (ylo, yhi) = finite_range(series.iter().flat_map(|s| s.values.iter()));
    let px = |x: f64| margin + w * (x - xlo) / xspan;
    let py = |y: f64| margin + h * (yhi - y) / (yhi - ylo);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="13">{}</text>"#,
        margin + w / 2.0,
        margin - 16.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r##"<rect x="{margin}" y="{margin}" width="{w}" height="{h}" fill="none" stroke="#888"/>"##
    );
    for (v, y) in [(yhi, margin + 10.0), (ylo, margin + h)] {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{y:.1}" text-anchor="end">{v:.2}</text>"#,
            margin - 4.0
        );
    }
    for (v, anchor) in [(xlo, "start"), (xhi, "end")] {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="{anchor}">{v:.2}</text>"#,
            px(v),
            margin + h + 14.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        margin + w / 2.0,
        margin + h + 28.0,
        escape(x_label)
    );
    for (i, s) in series.iter().enumerate() {
        let points: Vec<String> = xs
            .iter()
            .zip(&s.values)
            .filter(|(_, y)| y.is_finite())
            .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            PALETTE[i % PALETTE.len()],
            points.join(" ")
        );
    }
    legend(
        &mut out,
        series.iter().map(|s| s.name.as_str()),
        margin,
        height - 10.0,
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scientific_cells() {
        assert_eq!(sci(0.5), "5e-1");
        assert_eq!(sci(f64::NEG_INFINITY), "-inf");
        assert_eq!(sci(f64::INFINITY), "inf");
        let v = 0.6201145069582775;
        assert_eq!(sci(v).parse::<f64>().unwrap(), v);
        assert_eq!(csv_cell("a,b"), "\"a,b\"");
        assert_eq!(csv_cell("plain"), "plain");
    }

    #[test]
    fn figures_are_deterministic() {
        let panel = || BarPanel {
            title: "p".into(),
            categories: vec!["a".into(), "b".into()],
            series: vec![Series {
                name: "cost".into(),
                values: vec![0.7, f64::NEG_INFINITY],
            }],
        };
        let a = grouped_bars(&[panel(), panel()]);
        assert_eq!(a, grouped_bars(&[panel(), panel()]));
        assert!(a.contains("-inf"));
        let xs = [1.0, 2.0, 3.0];
        let s = || {
            vec![Series {
                name: "ce".into(),
                values: vec![0.1, 0.2, 0.3],
            }]
        };
        assert_eq!(
            line_plot("t", "x", &xs, &s()),
            line_plot("t", "x", &xs, &s())
        );
    }
}
