//! SVG pseudospectrum plots: contour lines, eigenvalue markers and the
//! stability boundary.

use std::fmt::Write as _;
use std::io::BufRead;

use hpa_core::numerics::{PseudospectrumGrid, C64};

use crate::config::Overlay;
use crate::contour::marching_squares;
use crate::error::CliError;

const WIDTH: f64 = 640.0;
const MARGIN: f64 = 56.0;
const LEGEND: f64 = 120.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ContourRendering {
    pub grid: PseudospectrumGrid,
    pub levels: Vec<f64>,
    pub overlay_points: Vec<C64>,
    /// `Line` or `Circle`; `Auto` and `None` draw nothing.
    pub overlay_curve: Overlay,
    pub title: String,
}

/// Grid CSV plus the name of its value column.
pub fn read_grid_csv(text: &str) -> Result<(PseudospectrumGrid, String), CliError> {
    let header = text.lines().next().unwrap_or_default();
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() != 3 || cols[0] != "re" || cols[1] != "im" {
        return Err(CliError::Usage(format!("expected a re,im,<value> grid CSV, found header {header:?}")));
    }
    let grid = PseudospectrumGrid::read_csv(text.as_bytes())?;
    Ok((grid, cols[2].to_string()))
}

/// First two columns of every row after the header.
pub fn read_points_csv<R: BufRead>(input: R) -> Result<Vec<C64>, CliError> {
    let mut pts = Vec::new();
    for (k, line) in input.lines().enumerate().skip(1) {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut f = line.split(',').map(|s| s.trim().parse::<f64>());
        match (f.next(), f.next()) {
            (Some(Ok(re)), Some(Ok(im))) => pts.push(C64::new(re, im)),
            _ => return Err(CliError::Usage(format!("line {}: expected re,im", k + 1))),
        }
    }
    Ok(pts)
}

/// `Line` for smallest-singular-value grids, `Circle` for the others.
pub fn resolve_overlay(overlay: Overlay, value_column: &str) -> Overlay {
    match overlay {
        Overlay::Auto if value_column == "sigma_min" => Overlay::Line,
        Overlay::Auto => Overlay::Circle,
        o => o,
    }
}

/// Colour for `t` in `[0, 1]`, dark blue through teal to yellow.
fn colour(t: f64) -> String {
    const STOPS: [(f64, f64, f64); 4] = [(68.0, 1.0, 84.0), (49.0, 104.0, 142.0), (53.0, 183.0, 121.0), (253.0, 231.0, 37.0)];
    let x = t.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let k = (x.floor() as usize).min(STOPS.len() - 2);
    let f = x - k as f64;
    let mix = |a: f64, b: f64| (a + f * (b - a)).round() as u8;
    let (a, b) = (STOPS[k], STOPS[k + 1]);
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

struct Frame {
    re: (f64, f64),
    im: (f64, f64),
    height: f64,
}

impl Frame {
    fn x(&self, re: f64) -> f64 {
        MARGIN + (re - self.re.0) / (self.re.1 - self.re.0) * WIDTH
    }

    fn y(&self, im: f64) -> f64 {
        MARGIN + (self.im.1 - im) / (self.im.1 - self.im.0) * self.height
    }
}

impl ContourRendering {
    pub fn to_svg(&self) -> String {
        let (re, im) = (self.grid.re_axis(), self.grid.im_axis());
        let frame = Frame {
            re: (re[0], re[re.len() - 1]),
            im: (im[0], im[im.len() - 1]),
            height: (WIDTH * (im[im.len() - 1] - im[0]) / (re[re.len() - 1] - re[0])).clamp(320.0, 960.0),
        };
        let (w, h) = (WIDTH + 2.0 * MARGIN + LEGEND, frame.height + 2.0 * MARGIN);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
        );
        let _ = writeln!(s, "<title>{}</title>", escape(&self.title));
        let _ = writeln!(
            s,
            r#"<defs><clipPath id="plot"><rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH}" height="{:.2}"/></clipPath></defs>"#,
            frame.height
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(s, r#"<g clip-path="url(#plot)" fill="none">"#);

        let n = self.levels.len();
        for (k, &level) in self.levels.iter().enumerate() {
            let stroke = colour(if n > 1 { k as f64 / (n - 1) as f64 } else { 0.0 });
            for c in marching_squares(&self.grid, level) {
                let mut d = String::new();
                for (m, &(x, y)) in c.points.iter().enumerate() {
                    let _ = write!(d, "{}{:.2},{:.2} ", if m == 0 { "M" } else { "L" }, frame.x(x), frame.y(y));
                }
                if c.closed {
                    d.push('Z');
                }
                let _ = writeln!(
                    s,
                    r#"<path class="contour" data-level="{level:e}" stroke="{stroke}" stroke-width="1.2" d="{}"/>"#,
                    d.trim_end()
                );
            }
        }

        let overlay = r##"stroke="#ff00ff" stroke-width="1.5" stroke-dasharray="2,4""##;
        match self.overlay_curve {
            Overlay::Line => {
                let x = frame.x(0.0);
                let _ = writeln!(
                    s,
                    r#"<line class="stability" x1="{x:.2}" y1="{MARGIN}" x2="{x:.2}" y2="{:.2}" {overlay}/>"#,
                    MARGIN + frame.height
                );
            }
            Overlay::Circle => {
                let (cx, cy) = (frame.x(0.0), frame.y(0.0));
                let _ = writeln!(
                    s,
                    r#"<ellipse class="stability" cx="{cx:.2}" cy="{cy:.2}" rx="{:.2}" ry="{:.2}" {overlay}/>"#,
                    frame.x(1.0) - cx,
                    cy - frame.y(1.0)
                );
            }
            Overlay::Auto | Overlay::None => {}
        }
        for z in &self.overlay_points {
            if z.re < frame.re.0 || z.re > frame.re.1 || z.im < frame.im.0 || z.im > frame.im.1 {
                continue;
            }
            let _ = writeln!(
                s,
                r#"<circle class="eigenvalue" cx="{:.2}" cy="{:.2}" r="3" fill="red"/>"#,
                frame.x(z.re),
                frame.y(z.im)
            );
        }
        let _ = writeln!(s, "</g>");

        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH}" height="{:.2}" fill="none" stroke="black"/>"#,
            frame.height
        );
        let text = r#"font-family="sans-serif" font-size="12""#;
        let bottom = MARGIN + frame.height;
        for (anchor, x, v) in [("start", MARGIN, frame.re.0), ("end", MARGIN + WIDTH, frame.re.1)] {
            let _ = writeln!(s, r#"<text x="{x}" y="{:.2}" text-anchor="{anchor}" {text}>{v}</text>"#, bottom + 18.0);
        }
        for (y, v) in [(bottom, frame.im.0), (MARGIN + 4.0, frame.im.1)] {
            let _ = writeln!(s, r#"<text x="{:.2}" y="{y:.2}" text-anchor="end" {text}>{v}</text>"#, MARGIN - 6.0);
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" {text}>Re z</text>"#,
            MARGIN + WIDTH / 2.0,
            bottom + 36.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" {text}>{}</text>"#,
            MARGIN + WIDTH / 2.0,
            MARGIN - 20.0,
            escape(&self.title)
        );

        let lx = 2.0 * MARGIN + WIDTH - 30.0;
        let _ = writeln!(s, r#"<text x="{lx}" y="{MARGIN}" {text}>log10 eps</text>"#);
        for (k, &level) in self.levels.iter().enumerate() {
            let y = MARGIN + 20.0 + 18.0 * k as f64;
            let stroke = colour(if n > 1 { k as f64 / (n - 1) as f64 } else { 0.0 });
            let _ = writeln!(
                s,
                r#"<line x1="{lx}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{stroke}" stroke-width="3"/>"#,
                y - 4.0,
                lx + 20.0,
                y - 4.0
            );
            let _ = writeln!(s, r#"<text x="{:.2}" y="{y:.2}" {text}>{:.2}</text>"#, lx + 26.0, level.log10());
        }
        s.push_str("</svg>\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
