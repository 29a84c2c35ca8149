//! Standalone SVG heatmaps for trace grids: layers on x, the six token
//! groups on y, a diverging color scale centered at zero, and the exact
//! fitted value embedded as a text annotation in every cell.
//!
//! Rendering is a pure function of the grid report, so re-rendering a
//! reloaded report yields byte-identical SVG.

use crate::tracer::GridReport;

const CELL_W: usize = 92;
const CELL_H: usize = 36;
const LEFT: usize = 130;
const TOP: usize = 54;

/// Which fitted coefficient a heatmap shows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coefficient {
    StereotypeSlope,
    FactualSlope,
    Intercept,
    RSquared,
}

impl Coefficient {
    pub fn label(self) -> &'static str {
        match self {
            Coefficient::StereotypeSlope => "a_s",
            Coefficient::FactualSlope => "a_f",
            Coefficient::Intercept => "b0",
            Coefficient::RSquared => "r2",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "a_s" => Some(Coefficient::StereotypeSlope),
            "a_f" => Some(Coefficient::FactualSlope),
            "b0" => Some(Coefficient::Intercept),
            "r2" => Some(Coefficient::RSquared),
            _ => None,
        }
    }

    fn pick(self, cell: &crate::tracer::CellReport) -> Option<f64> {
        match self {
            Coefficient::StereotypeSlope => cell.a_s,
            Coefficient::FactualSlope => cell.a_f,
            Coefficient::Intercept => cell.b0,
            Coefficient::RSquared => cell.r2,
        }
    }
}

/// Blue (negative) to white (zero) to red (positive), linear in `v / vmax`.
fn diverging_color(v: f64, vmax: f64) -> String {
    let t = if vmax > 0.0 { (v / vmax).clamp(-1.0, 1.0) } else { 0.0 };
    let (r, g, b) = if t >= 0.0 {
        let s = 1.0 - t;
        (255.0, 255.0 * s, 255.0 * s)
    } else {
        let s = 1.0 + t;
        (255.0 * s, 255.0 * s, 255.0)
    };
    format!("rgb({},{},{})", r.round() as u8, g.round() as u8, b.round() as u8)
}

/// Renders one coefficient of the grid as an SVG heatmap.
pub fn render_heatmap(report: &GridReport, coefficient: Coefficient) -> String {
    let n_layers = report.n_layers;
    let n_groups = report.groups.len();
    let width = LEFT + n_layers * CELL_W + 20;
    let height = TOP + n_groups * CELL_H + 30;

    let vmax = report
        .cells
        .iter()
        .filter_map(|c| coefficient.pick(c))
        .fold(0.0f64, |m, v| m.max(v.abs()));

    let mut svg = String::new();
    svg.push_str(&format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="monospace">"#
    ));
    svg.push('\n');
    svg.push_str(&format!(
        r#"<text x="{LEFT}" y="20" font-size="14">{} per (layer, token group) for restored {} activations</text>"#,
        coefficient.label(),
        report.component
    ));
    svg.push('\n');

    for (gi, group) in report.groups.iter().enumerate() {
        let y = TOP + gi * CELL_H + CELL_H / 2 + 4;
        svg.push_str(&format!(
            r#"<text x="{}" y="{y}" font-size="11" text-anchor="end">{group}</text>"#,
            LEFT - 8
        ));
        svg.push('\n');
    }
    for layer in 0..n_layers {
        let x = LEFT + layer * CELL_W + CELL_W / 2;
        svg.push_str(&format!(
            r#"<text x="{x}" y="{}" font-size="11" text-anchor="middle">layer {layer}</text>"#,
            TOP - 8
        ));
        svg.push('\n');
    }

    for cell in &report.cells {
        let gi = report
            .groups
            .iter()
            .position(|g| *g == cell.group)
            .expect("cell group is one of the report groups");
        let x = LEFT + cell.layer * CELL_W;
        let y = TOP + gi * CELL_H;
        match coefficient.pick(cell) {
            Some(v) => {
                let fill = diverging_color(v, vmax);
                svg.push_str(&format!(
                    r##"<rect class="cell" x="{x}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="{fill}" stroke="#444"/>"##
                ));
                svg.push('\n');
                svg.push_str(&format!(
                    r#"<text x="{}" y="{}" font-size="10" text-anchor="middle">{v}</text>"#,
                    x + CELL_W / 2,
                    y + CELL_H / 2 + 4
                ));
            }
            None => {
                svg.push_str(&format!(
                    r##"<rect class="cell" x="{x}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="#dddddd" stroke="#444"/>"##
                ));
                svg.push('\n');
                svg.push_str(&format!(
                    r#"<text x="{}" y="{}" font-size="10" text-anchor="middle">n/a</text>"#,
                    x + CELL_W / 2,
                    y + CELL_H / 2 + 4
                ));
            }
        }
        svg.push('\n');
    }

    svg.push_str(&format!(
        r#"<text x="{LEFT}" y="{}" font-size="10">scale: +-{vmax} (white = 0, red positive, blue negative), {} prompts</text>"#,
        TOP + n_groups * CELL_H + 18,
        report.n_prompts
    ));
    svg.push_str("\n</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracer::CellReport;

    fn tiny_report() -> GridReport {
        GridReport {
            component: "mlp".into(),
            n_layers: 2,
            groups: vec!["subject_last".into(), "last".into()],
            n_prompts: 4,
            cells: vec![
                CellReport {
                    layer: 0,
                    group: "subject_last".into(),
                    n: 4,
                    a_s: Some(0.25),
                    a_f: Some(0.1),
                    b0: Some(0.01),
                    r2: Some(0.9),
                },
                CellReport {
                    layer: 0,
                    group: "last".into(),
                    n: 4,
                    a_s: Some(-0.15),
                    a_f: Some(0.2),
                    b0: Some(0.02),
                    r2: Some(0.8),
                },
                CellReport {
                    layer: 1,
                    group: "subject_last".into(),
                    n: 0,
                    a_s: None,
                    a_f: None,
                    b0: None,
                    r2: None,
                },
                CellReport {
                    layer: 1,
                    group: "last".into(),
                    n: 4,
                    a_s: Some(0.05),
                    a_f: Some(0.0),
                    b0: Some(-0.01),
                    r2: Some(0.5),
                },
            ],
        }
    }

    #[test]
    fn rendering_is_deterministic_and_complete() {
        let report = tiny_report();
        let a = render_heatmap(&report, Coefficient::StereotypeSlope);
        let b = render_heatmap(&report, Coefficient::StereotypeSlope);
        assert_eq!(a, b);
        assert_eq!(a.matches(r#"class="cell""#).count(), 4);
        assert!(a.contains("0.25"));
        assert!(a.contains("n/a"));
    }

    #[test]
    fn json_roundtrip_renders_identically() {
        let report = tiny_report();
        let json = serde_json::to_string(&report).unwrap();
        let back: GridReport = serde_json::from_str(&json).unwrap();
        assert_eq!(
            render_heatmap(&report, Coefficient::FactualSlope),
            render_heatmap(&back, Coefficient::FactualSlope)
        );
    }

    #[test]
    fn color_scale_is_centered() {
        assert_eq!(diverging_color(0.0, 1.0), "rgb(255,255,255)");
        assert_eq!(diverging_color(1.0, 1.0), "rgb(255,0,0)");
        assert_eq!(diverging_color(-1.0, 1.0), "rgb(0,0,255)");
    }
}
