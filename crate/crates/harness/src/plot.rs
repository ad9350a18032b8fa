//! Self-contained SVG regret plots.

use std::fmt::Write;

use crate::report::SummaryRow;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

#[derive(Debug, Clone, PartialEq)]
pub struct PlotOptions {
    pub log_x: bool,
    pub title: String,
    pub y_label: String,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Mean lines with ±1 standard-error bands, one series per strategy.
pub fn render_svg(series: &[(String, Vec<SummaryRow>)], opts: &PlotOptions) -> String {
    let finite = |r: &&SummaryRow| r.mean.is_finite();
    let n_iter = series.iter().flat_map(|(_, rows)| rows.iter().filter(finite).map(|r| r.iteration)).max().unwrap_or(1).max(2);
    let y_max = series
        .iter()
        .flat_map(|(_, rows)| rows.iter().filter(finite).map(|r| r.mean + r.stderr))
        .fold(0.0_f64, f64::max);
    let y_max = if y_max > 0.0 { y_max * 1.05 } else { 1.0 };

    let (x0, x1) = if opts.log_x { (0.0, (n_iter as f64).log10()) } else { (1.0, n_iter as f64) };
    let px = |it: usize| {
        let v = if opts.log_x { (it as f64).log10() } else { it as f64 };
        LEFT + (v - x0) / (x1 - x0) * (WIDTH - LEFT - RIGHT)
    };
    let py = |v: f64| TOP + (1.0 - v.clamp(0.0, y_max) / y_max) * (HEIGHT - TOP - BOTTOM);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, (WIDTH - RIGHT + LEFT) / 2.0, escape(&opts.title));

    // axes and ticks
    let (bx, by) = (HEIGHT - BOTTOM, WIDTH - RIGHT);
    let _ = writeln!(s, r#"<g stroke="black" fill="none"><path d="M{LEFT},{TOP} L{LEFT},{bx} L{by},{bx}"/></g>"#);
    for k in 0..=5 {
        let v = y_max * k as f64 / 5.0;
        let y = py(v);
        let _ = writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{v:.3}</text>"#, LEFT - 5.0, LEFT - 8.0, y + 4.0);
    }
    let ticks: Vec<usize> = if opts.log_x {
        std::iter::successors(Some(1usize), |t| Some(t * 10)).take_while(|t| *t <= n_iter).chain([n_iter]).collect()
    } else {
        let step = (n_iter / 5).max(1);
        (0..=5).map(|k| (k * step).max(1)).filter(|t| *t <= n_iter).chain([n_iter]).collect()
    };
    let mut seen = Vec::new();
    for t in ticks {
        if seen.contains(&t) {
            continue;
        }
        seen.push(t);
        let x = px(t);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{bx}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{t}</text>"#, bx + 5.0, bx + 18.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">iteration{}</text>"#, (LEFT + by) / 2.0, HEIGHT - 15.0, if opts.log_x { " (log scale)" } else { "" });
    let _ = writeln!(s, r#"<text transform="translate(18,{}) rotate(-90)" text-anchor="middle">{}</text>"#, (TOP + bx) / 2.0, escape(&opts.y_label));

    for (k, (name, rows)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let rows: Vec<&SummaryRow> = rows.iter().filter(finite).collect();
        if rows.is_empty() {
            continue;
        }
        let upper = rows.iter().map(|r| format!("{:.2},{:.2}", px(r.iteration), py(r.mean + r.stderr)));
        let lower = rows.iter().rev().map(|r| format!("{:.2},{:.2}", px(r.iteration), py(r.mean - r.stderr)));
        let band: Vec<String> = upper.chain(lower).collect();
        let _ = writeln!(s, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, band.join(" "));
        let line: Vec<String> = rows.iter().map(|r| format!("{:.2},{:.2}", px(r.iteration), py(r.mean))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" "));
        let ly = TOP + 10.0 + 20.0 * k as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#, lx + 25.0, lx + 32.0, ly + 4.0, escape(name));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(v: &[f64]) -> Vec<SummaryRow> {
        v.iter().enumerate().map(|(i, m)| SummaryRow { iteration: i + 1, mean: *m, stderr: 0.1 * m }).collect()
    }

    #[test]
    fn svg_is_well_formed() {
        for log_x in [false, true] {
            let series = vec![("random <&>".to_string(), rows(&[1.0, 0.5, 0.4, 0.2])), ("malibo".to_string(), rows(&[0.3, 0.1, 0.1, 0.05]))];
            let opts = PlotOptions { log_x, title: "t".into(), y_label: "y".into() };
            let svg = render_svg(&series, &opts);
            let doc = roxmltree::Document::parse(&svg).unwrap();
            assert_eq!(doc.root_element().tag_name().name(), "svg");
            let polylines = doc.descendants().filter(|n| n.has_tag_name("polyline")).count();
            assert_eq!(polylines, 2);
        }
    }

    #[test]
    fn empty_and_nan_series_still_render() {
        let series = vec![("a".to_string(), vec![SummaryRow { iteration: 1, mean: f64::NAN, stderr: f64::NAN }])];
        let svg = render_svg(&series, &PlotOptions { log_x: false, title: String::new(), y_label: String::new() });
        roxmltree::Document::parse(&svg).unwrap();
        assert!(!svg.contains("NaN"));
    }
}
