//! Minimal SVG line charts for the per-metric plot-data tables.

use std::fmt::Write;

use crate::experiment::MetricTable;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 60.0;
const COLOURS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// One polyline per strategy, x = missing percentage.
pub fn line_chart(table: &MetricTable, y_label: &str) -> String {
    let finite = table.means.iter().flatten().copied().filter(|v| v.is_finite());
    let (mut lo, mut hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = (hi - lo) * 0.05;
    let (lo, hi) = (lo - pad, hi + pad);
    let xs: Vec<f64> = table.fractions.iter().map(|f| f * 100.0).collect();
    let (x0, x1) = match (xs.first(), xs.last()) {
        (Some(&a), Some(&b)) if b > a => (a, b),
        (Some(&a), _) => (a - 1.0, a + 1.0),
        _ => (0.0, 1.0),
    };
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - lo) / (hi - lo) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    writeln!(
        svg,
        r#"<path d="M{left} {top} L{left} {bottom} L{right} {bottom}" stroke="black" fill="none"/>"#
    )
    .unwrap();
    for &x in &xs {
        writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x}</text>"#,
            px(x),
            bottom + 18.0
        )
        .unwrap();
    }
    for step in 0..=4 {
        let y = lo + (hi - lo) * step as f64 / 4.0;
        writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{y:.3}</text>"#,
            left - 6.0,
            py(y) + 4.0
        )
        .unwrap();
    }
    writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">missing values (%)</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="15" y="{:.1}" text-anchor="middle" transform="rotate(-90 15 {:.1})">{y_label}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    )
    .unwrap();

    for (col, name) in table.strategies.iter().enumerate() {
        let colour = COLOURS[col % COLOURS.len()];
        let points: Vec<String> = xs
            .iter()
            .zip(&table.means)
            .filter(|(_, row)| row[col].is_finite())
            .map(|(&x, row)| format!("{:.1},{:.1}", px(x), py(row[col])))
            .collect();
        writeln!(
            svg,
            r#"<polyline points="{}" stroke="{colour}" stroke-width="2" fill="none"/>"#,
            points.join(" ")
        )
        .unwrap();
        for p in &points {
            let (cx, cy) = p.split_once(',').unwrap();
            writeln!(svg, r#"<circle cx="{cx}" cy="{cy}" r="3" fill="{colour}"/>"#).unwrap();
        }
        let ly = top + 16.0 * col as f64;
        writeln!(
            svg,
            r#"<text x="{:.1}" y="{ly:.1}" fill="{colour}">{}</text>"#,
            right - 60.0,
            name.to_uppercase()
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_has_one_line_per_strategy() {
        let table = MetricTable {
            strategies: vec!["ocs".into(), "nps".into()],
            fractions: vec![0.05, 0.1, 0.15],
            means: vec![vec![99.0, 98.0], vec![97.0, 96.0], vec![f64::NAN, 94.0]],
        };
        let svg = line_chart(&table, "accuracy");
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<circle").count(), 5);
    }
}
