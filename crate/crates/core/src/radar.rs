//! Deterministic SVG rendering of family spoke values.
//!
//! Three or more spokes render as a radar chart: four rings for the levels
//! 0 to 3 and one polygon per dimension with vertices at `value / 3` of the
//! outer radius. Fewer spokes fall back to grouped bars. A spoke without a
//! value for a dimension sits at the centre and is labelled "no value".

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::assessment::Dimension;
use crate::rollup::RadarData;
use crate::score::Score;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 640.0;
pub const CENTER_X: f64 = 400.0;
pub const CENTER_Y: f64 = 320.0;
pub const RADIUS: f64 = 200.0;

const LABEL_WRAP: usize = 28;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RadarError {
    #[error("nothing to draw: no spokes")]
    Empty,
}

fn dim_class(dim: Dimension) -> &'static str {
    match dim {
        Dimension::Procedural => "procedural",
        Dimension::Implementation => "implementation",
    }
}

fn dim_color(dim: Dimension) -> &'static str {
    match dim {
        Dimension::Procedural => "#1f77b4",
        Dimension::Implementation => "#ff7f0e",
    }
}

fn num(x: f64) -> String {
    // Avoid "-0.0000000000" for values that round to zero.
    let s = format!("{x:.10}");
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        "0.0000000000".to_string()
    } else {
        s
    }
}

pub fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Angle of spoke `i` of `n`, starting at twelve o'clock and going clockwise
/// in screen coordinates.
pub fn spoke_angle(i: usize, n: usize) -> f64 {
    -PI / 2.0 + 2.0 * PI * i as f64 / n as f64
}

fn fraction(v: Option<&Score>) -> f64 {
    v.map(|s| s.to_f64() / 3.0).unwrap_or(0.0)
}

fn wrap(text: &str, width: usize) -> Vec<String> {
    let mut lines: Vec<String> = Vec::new();
    for word in text.split_whitespace() {
        match lines.last_mut() {
            Some(line) if line.chars().count() + 1 + word.chars().count() <= width => {
                line.push(' ');
                line.push_str(word);
            }
            _ => lines.push(word.to_string()),
        }
    }
    lines
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">",
        w = WIDTH,
        h = HEIGHT
    );
    let _ = writeln!(out, "<title>{}</title>", escape(title));
    let _ = writeln!(out, "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>");
}

fn legend(out: &mut String) {
    for (k, dim) in Dimension::ALL.into_iter().enumerate() {
        let y = 20.0 + 18.0 * k as f64;
        let _ = writeln!(
            out,
            "<rect class=\"legend\" x=\"20\" y=\"{}\" width=\"12\" height=\"12\" fill=\"{}\"/>",
            num(y),
            dim_color(dim)
        );
        let _ = writeln!(out, "<text x=\"38\" y=\"{}\">{} support</text>", num(y + 10.0), dim_class(dim));
    }
}

/// Renders spoke values as SVG. Output is byte-identical for equal input.
pub fn render_radar_svg(radar: &RadarData) -> Result<String, RadarError> {
    if radar.spokes.is_empty() {
        return Err(RadarError::Empty);
    }
    let mut out = String::new();
    header(&mut out, &format!("Claim support by family ({})", radar.strategy));
    legend(&mut out);
    if radar.spokes.len() < 3 {
        bars(&mut out, radar);
    } else {
        polygon_chart(&mut out, radar);
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn polygon_chart(out: &mut String, radar: &RadarData) {
    let n = radar.spokes.len();
    let _ = writeln!(out, "<g class=\"rings\" fill=\"none\" stroke=\"#bbbbbb\">");
    for level in 0..=3u8 {
        let r = RADIUS * f64::from(level) / 3.0;
        let _ = writeln!(
            out,
            "<circle class=\"ring\" data-level=\"{level}\" cx=\"{}\" cy=\"{}\" r=\"{}\"/>",
            num(CENTER_X),
            num(CENTER_Y),
            num(r)
        );
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, "<g class=\"ring-labels\" fill=\"#666666\" font-size=\"10\">");
    for level in 0..=3u8 {
        let r = RADIUS * f64::from(level) / 3.0;
        let _ = writeln!(out, "<text x=\"{}\" y=\"{}\">{level}</text>", num(CENTER_X + 3.0), num(CENTER_Y - r - 3.0));
    }
    let _ = writeln!(out, "</g>");

    let _ = writeln!(out, "<g class=\"spokes\" stroke=\"#888888\">");
    for i in 0..n {
        let a = spoke_angle(i, n);
        let _ = writeln!(
            out,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/>",
            num(CENTER_X),
            num(CENTER_Y),
            num(CENTER_X + RADIUS * a.cos()),
            num(CENTER_Y + RADIUS * a.sin())
        );
    }
    let _ = writeln!(out, "</g>");

    for dim in Dimension::ALL {
        let points: Vec<String> = radar
            .spokes
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let a = spoke_angle(i, n);
                let r = RADIUS * fraction(s.value(dim));
                format!("{},{}", num(CENTER_X + r * a.cos()), num(CENTER_Y + r * a.sin()))
            })
            .collect();
        let values: Vec<String> =
            radar.spokes.iter().map(|s| s.value(dim).map(|v| v.to_string()).unwrap_or_else(|| "none".into())).collect();
        let _ = writeln!(
            out,
            "<polygon class=\"{}\" data-values=\"{}\" points=\"{}\" fill=\"{}\" fill-opacity=\"0.25\" stroke=\"{}\" stroke-width=\"2\"/>",
            dim_class(dim),
            values.join(" "),
            points.join(" "),
            dim_color(dim),
            dim_color(dim)
        );
    }

    let _ = writeln!(out, "<g class=\"spoke-labels\">");
    for (i, s) in radar.spokes.iter().enumerate() {
        let a = spoke_angle(i, n);
        let (x, y) = (CENTER_X + (RADIUS + 16.0) * a.cos(), CENTER_Y + (RADIUS + 16.0) * a.sin());
        let anchor = if a.cos().abs() < 1e-9 {
            "middle"
        } else if a.cos() > 0.0 {
            "start"
        } else {
            "end"
        };
        let mut lines = wrap(&s.family, LABEL_WRAP);
        for dim in Dimension::ALL {
            if s.value(dim).is_none() {
                lines.push(format!("({} no value)", dim_class(dim)));
            }
        }
        // Labels above the centre grow upward so they do not cross the ring.
        let top = if a.sin() < -1e-9 { y - 14.0 * (lines.len() as f64 - 1.0) } else { y + if a.sin() > 1e-9 { 10.0 } else { 4.0 } };
        let _ = writeln!(out, "<text class=\"spoke-label\" text-anchor=\"{anchor}\" x=\"{}\" y=\"{}\">", num(x), num(top));
        for (k, line) in lines.iter().enumerate() {
            let dy = if k == 0 { 0.0 } else { 14.0 };
            let _ = writeln!(out, "<tspan x=\"{}\" dy=\"{}\">{}</tspan>", num(x), num(dy), escape(line));
        }
        let _ = writeln!(out, "</text>");
    }
    let _ = writeln!(out, "</g>");
}

fn bars(out: &mut String, radar: &RadarData) {
    let base = CENTER_Y + RADIUS / 2.0;
    let full = RADIUS;
    let group = 160.0;
    let left = CENTER_X - group * radar.spokes.len() as f64 / 2.0;
    let _ = writeln!(out, "<g class=\"rings\" stroke=\"#bbbbbb\">");
    for level in 0..=3u8 {
        let y = base - full * f64::from(level) / 3.0;
        let _ = writeln!(
            out,
            "<line class=\"ring\" data-level=\"{level}\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/>",
            num(left - 10.0),
            num(y),
            num(left + group * radar.spokes.len() as f64),
            num(y)
        );
        let _ = writeln!(out, "<text x=\"{}\" y=\"{}\" stroke=\"none\" fill=\"#666666\">{level}</text>", num(left - 24.0), num(y + 4.0));
    }
    let _ = writeln!(out, "</g>");
    for (i, s) in radar.spokes.iter().enumerate() {
        let x0 = left + group * i as f64 + 30.0;
        for (k, dim) in Dimension::ALL.into_iter().enumerate() {
            let h = full * fraction(s.value(dim));
            let value = s.value(dim).map(|v| v.to_string()).unwrap_or_else(|| "none".into());
            let _ = writeln!(
                out,
                "<rect class=\"{}\" data-value=\"{}\" x=\"{}\" y=\"{}\" width=\"40\" height=\"{}\" fill=\"{}\"/>",
                dim_class(dim),
                value,
                num(x0 + 50.0 * k as f64),
                num(base - h),
                num(h),
                dim_color(dim)
            );
        }
        let _ = writeln!(out, "<text class=\"spoke-label\" text-anchor=\"middle\" x=\"{}\" y=\"{}\">", num(x0 + 45.0), num(base + 20.0));
        for (k, line) in wrap(&s.family, 22).iter().enumerate() {
            let dy = if k == 0 { 0.0 } else { 14.0 };
            let _ = writeln!(out, "<tspan x=\"{}\" dy=\"{}\">{}</tspan>", num(x0 + 45.0), num(dy), escape(line));
        }
        let _ = writeln!(out, "</text>");
    }
}
