//! Minimal SVG emission for grid heat maps.

use std::fmt::Write;

/// One heat-map panel: `cells[row][col]` fill colors, rows bottom to top.
#[derive(Debug, Clone)]
pub struct HeatPanel {
    pub title: String,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub row_axis: String,
    pub col_axis: String,
    pub cells: Vec<Vec<&'static str>>,
}

const CELL: f64 = 36.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;
const GAP: f64 = 40.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Side-by-side heat-map panels in one SVG document.
pub fn heat_map_svg(panels: &[HeatPanel]) -> String {
    let widths: Vec<f64> = panels
        .iter()
        .map(|p| MARGIN_LEFT + CELL * p.col_labels.len() as f64)
        .collect();
    let rows = panels.iter().map(|p| p.row_labels.len()).max().unwrap_or(0);
    let width = widths.iter().sum::<f64>() + GAP * (panels.len().saturating_sub(1)) as f64 + 10.0;
    let height = MARGIN_TOP + CELL * rows as f64 + MARGIN_BOTTOM;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let mut x0 = 0.0;
    for (p, w) in panels.iter().zip(&widths) {
        let gx = x0 + MARGIN_LEFT;
        let n_rows = p.row_labels.len();
        let _ = writeln!(
            s,
            r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            gx + CELL * p.col_labels.len() as f64 / 2.0,
            escape(&p.title)
        );
        for (r, row) in p.cells.iter().enumerate() {
            let y = MARGIN_TOP + CELL * (n_rows - 1 - r) as f64;
            for (c, fill) in row.iter().enumerate() {
                let x = gx + CELL * c as f64;
                let _ = writeln!(
                    s,
                    r##"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{fill}" stroke="#555" stroke-width="0.5"/>"##
                );
            }
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
                gx - 6.0,
                y + CELL / 2.0 + 4.0,
                escape(&p.row_labels[r])
            );
        }
        let base = MARGIN_TOP + CELL * n_rows as f64;
        for (c, label) in p.col_labels.iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
                gx + CELL * (c as f64 + 0.5),
                base + 16.0,
                escape(label)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            gx + CELL * p.col_labels.len() as f64 / 2.0,
            base + 40.0,
            escape(&p.col_axis)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle" transform="rotate(-90 {} {})">{}</text>"#,
            x0 + 14.0,
            MARGIN_TOP + CELL * n_rows as f64 / 2.0,
            x0 + 14.0,
            MARGIN_TOP + CELL * n_rows as f64 / 2.0,
            escape(&p.row_axis)
        );
        x0 += w + GAP;
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emits_one_rect_per_cell() {
        let p = HeatPanel {
            title: "a<b".into(),
            row_labels: vec!["1".into(), "2".into()],
            col_labels: vec!["x".into(), "y".into(), "z".into()],
            row_axis: "rows".into(),
            col_axis: "cols".into(),
            cells: vec![vec!["green"; 3], vec!["red"; 3]],
        };
        let svg = heat_map_svg(&[p.clone(), p]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches(r##"stroke="#555""##).count(), 12);
        assert!(svg.contains("a&lt;b"));
    }
}
