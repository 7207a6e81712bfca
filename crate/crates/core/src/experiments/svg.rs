//! Minimal static SVG line plots: a vertical stack of panels.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    /// `(t, value)`; non-finite points are skipped.
    pub points: Vec<(f64, f64)>,
    /// Printed in the top-right corner, e.g. the drift.
    pub note: String,
}

const WIDTH: f64 = 640.0;
const PANEL_H: f64 = 150.0;
const MARGIN_L: f64 = 90.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 24.0;
const MARGIN_B: f64 = 26.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        return None;
    }
    if hi - lo <= 1e-300_f64.max(1e-12 * hi.abs().max(lo.abs())) {
        let pad = if lo == 0.0 { 1.0 } else { 0.5 * lo.abs() };
        return Some((lo - pad, hi + pad));
    }
    Some((lo, hi))
}

pub fn render(title: &str, panels: &[Panel]) -> String {
    let height = MARGIN_T + panels.len() as f64 * PANEL_H + 10.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="16" text-anchor="middle" font-size="13">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    for (k, panel) in panels.iter().enumerate() {
        let top = MARGIN_T + k as f64 * PANEL_H;
        let (x0, x1) = (MARGIN_L, WIDTH - MARGIN_R);
        let (y0, y1) = (top + 14.0, top + PANEL_H - MARGIN_B);
        let _ = writeln!(
            out,
            r##"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="#888"/>"##,
            x1 - x0,
            y1 - y0
        );
        let _ = writeln!(out, r#"<text x="{x0}" y="{}">{}</text>"#, top + 10.0, escape(&panel.title));
        let _ = writeln!(
            out,
            r#"<text x="{x1}" y="{}" text-anchor="end">{}</text>"#,
            top + 10.0,
            escape(&panel.note)
        );
        let (Some((tlo, thi)), Some((vlo, vhi))) = (
            range(panel.points.iter().map(|p| p.0)),
            range(panel.points.iter().map(|p| p.1)),
        ) else {
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" text-anchor="middle">no finite data</text>"#,
                (x0 + x1) / 2.0,
                (y0 + y1) / 2.0
            );
            continue;
        };
        let sx = |t: f64| x0 + (t - tlo) / (thi - tlo) * (x1 - x0);
        let sy = |v: f64| y1 - (v - vlo) / (vhi - vlo) * (y1 - y0);
        let pts: Vec<String> = panel
            .points
            .iter()
            .filter(|(t, v)| t.is_finite() && v.is_finite())
            .map(|&(t, v)| format!("{:.2},{:.2}", sx(t), sy(v)))
            .collect();
        let _ = writeln!(
            out,
            r##"<polyline fill="none" stroke="#1f5fa8" stroke-width="1.5" points="{}"/>"##,
            pts.join(" ")
        );
        for (v, y) in [(vhi, y0 + 4.0), (vlo, y1)] {
            let _ = writeln!(out, r#"<text x="{}" y="{y}" text-anchor="end">{v:.3e}</text>"#, x0 - 4.0);
        }
        for (t, anchor) in [(tlo, "start"), (thi, "end")] {
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" text-anchor="{anchor}">t = {t:.3}</text>"#,
                sx(t),
                y1 + 14.0
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_one_polyline_per_panel() {
        let panels = vec![
            Panel {
                title: "Q1".into(),
                points: vec![(0.0, 0.0), (0.5, 1.0), (1.0, 0.5)],
                note: "drift 1.0e0".into(),
            },
            Panel {
                title: "Q2 <flat>".into(),
                points: vec![(0.0, 2.0), (1.0, 2.0)],
                note: String::new(),
            },
        ];
        let svg = render("charges", &panels);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("Q2 &lt;flat&gt;"));
        assert!(svg.starts_with("<svg"));
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn empty_data_is_labelled() {
        let svg = render("x", &[Panel {
            title: "nan".into(),
            points: vec![(0.0, f64::NAN)],
            note: String::new(),
        }]);
        assert!(svg.contains("no finite data"));
    }
}
