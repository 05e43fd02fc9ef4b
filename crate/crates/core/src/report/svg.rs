//! SVG 1.1 rendering of principal configurations. The viewBox is the chart
//! domain; a flip keeps `v` pointing up.

use std::fmt::Write;

use crate::geometry::{Domain, Foliation};
use crate::umbilic::UmbilicClass;

/// A polyline to draw.
#[derive(Clone, Debug, PartialEq)]
pub struct Stroke<'a> {
    pub foliation: Foliation,
    pub points: &'a [[f64; 2]],
    pub separatrix: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Glyph {
    pub position: [f64; 2],
    pub class: UmbilicClass,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Style {
    /// Stroke width as a fraction of the domain diameter.
    pub width: f64,
    pub min_color: &'static str,
    pub max_color: &'static str,
}

impl Default for Style {
    fn default() -> Self {
        Style { width: 0.002, min_color: "#1f4e9c", max_color: "#b3261e" }
    }
}

fn f6(x: f64) -> String {
    format!("{x:.6}")
}

pub fn render_portrait(domain: &Domain, strokes: &[Stroke], glyphs: &[Glyph], style: &Style) -> String {
    let [u0, u1] = domain.u;
    let [v0, v1] = domain.v;
    let w = style.width * domain.diameter();
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="{} {} {} {}">"#,
        f6(u0),
        f6(v0),
        f6(u1 - u0),
        f6(v1 - v0)
    );
    // (u, v) -> (u, v0 + v1 - v)
    let _ = writeln!(out, r#"<g transform="matrix(1 0 0 -1 0 {})">"#, f6(v0 + v1));
    let _ = writeln!(out, r##"<g class="axes" stroke="#999999" stroke-width="{}" fill="none">"##, f6(0.5 * w));
    if u0 <= 0.0 && 0.0 <= u1 {
        let _ = writeln!(out, r#"<line x1="0.000000" y1="{}" x2="0.000000" y2="{}"/>"#, f6(v0), f6(v1));
    }
    if v0 <= 0.0 && 0.0 <= v1 {
        let _ = writeln!(out, r#"<line x1="{}" y1="0.000000" x2="{}" y2="0.000000"/>"#, f6(u0), f6(u1));
    }
    let _ = writeln!(out, "</g>");
    for st in strokes.iter().filter(|s| s.points.len() >= 2) {
        let (color, dash, class) = match st.foliation {
            Foliation::Min => (style.min_color, String::new(), "min"),
            Foliation::Max => (style.max_color, format!(r#" stroke-dasharray="{} {}""#, f6(4.0 * w), f6(2.0 * w)), "max"),
        };
        let sw = if st.separatrix { 2.0 * w } else { w };
        let kind = if st.separatrix { " separatrix" } else { "" };
        let pts: Vec<String> = st.points.iter().map(|p| format!("{},{}", f6(p[0]), f6(p[1]))).collect();
        let _ = writeln!(
            out,
            r#"<polyline class="{class}{kind}" fill="none" stroke="{color}" stroke-width="{}"{dash} points="{}"/>"#,
            f6(sw),
            pts.join(" ")
        );
    }
    let r = 4.0 * w;
    for g in glyphs {
        let [x, y] = g.position;
        let _ = writeln!(
            out,
            r#"<circle class="umbilic" cx="{}" cy="{}" r="{}" fill="black"/>"#,
            f6(x),
            f6(y),
            f6(r)
        );
    }
    let _ = writeln!(out, "</g>");
    // labels outside the flip so that text is upright
    let fs = 12.0 * w;
    for g in glyphs {
        let [x, y] = g.position;
        let _ = writeln!(
            out,
            r#"<text class="umbilic-label" x="{}" y="{}" font-size="{}">{}</text>"#,
            f6(x + 1.5 * r),
            f6(v0 + v1 - y - 1.5 * r),
            f6(fs),
            g.class
        );
    }
    let _ = writeln!(out, "</svg>");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_portrait_has_axes_only() {
        let d = Domain::square(1.0);
        let svg = render_portrait(&d, &[], &[], &Style::default());
        assert!(svg.contains(r#"viewBox="-1.000000 -1.000000 2.000000 2.000000""#));
        assert_eq!(svg.matches("<line").count(), 2);
        assert!(!svg.contains("<polyline"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn separatrices_are_twice_as_wide() {
        let d = Domain::square(1.0);
        let p = [[0.0, 0.0], [0.5, 0.25]];
        let st = [
            Stroke { foliation: Foliation::Min, points: &p, separatrix: false },
            Stroke { foliation: Foliation::Max, points: &p, separatrix: true },
        ];
        let g = [Glyph { position: [0.0, 0.0], class: UmbilicClass::D12Case1 }];
        let svg = render_portrait(&d, &st, &g, &Style::default());
        let w = Style::default().width * d.diameter();
        assert!(svg.contains(&format!(r#"stroke-width="{:.6}" points"#, w)));
        assert!(svg.contains(&format!(r#"stroke-width="{:.6}" stroke-dasharray"#, 2.0 * w)));
        assert!(svg.contains(">D12_case1</text>"));
        assert!(svg.contains("0.500000,0.250000"));
    }
}
