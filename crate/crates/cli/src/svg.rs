//! Deterministic SVG rendering of projected knot diagrams.

use std::fmt::Write;

use rossler_knots::knot::{CrossingDiagram, PolygonalKnot};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvgStyle {
    /// Width and height of the square canvas in pixels.
    pub size: f64,
    pub margin: f64,
    pub stroke_width: f64,
    /// Half-length of the gap cut into an under-strand, in pixels.
    pub gap: f64,
    pub stroke: &'static str,
}

impl Default for SvgStyle {
    fn default() -> Self {
        SvgStyle {
            size: 800.0,
            margin: 20.0,
            stroke_width: 1.5,
            gap: 5.0,
            stroke: "#1f3b73",
        }
    }
}

fn fmt(x: f64) -> String {
    let s = format!("{x:.3}");
    // avoid a negative zero after rounding
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        "0.000".into()
    } else {
        s
    }
}

/// Draws `knot` in the projection plane of `diagram`. Every crossing cuts a gap into the
/// under-strand; the root element carries the crossing count as `data-crossings`.
pub fn emit_svg(knot: &PolygonalKnot, diagram: &CrossingDiagram, style: &SvgStyle) -> String {
    let pts: Vec<[f64; 2]> = knot.vertices().iter().map(|v| diagram.project_point(v)).collect();
    let n = pts.len();
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &pts {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE);
    let scale = (style.size - 2.0 * style.margin) / extent;
    let centre = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    // screen y grows downwards
    let screen = |p: [f64; 2]| {
        [
            0.5 * style.size + (p[0] - centre[0]) * scale,
            0.5 * style.size - (p[1] - centre[1]) * scale,
        ]
    };
    let sp: Vec<[f64; 2]> = pts.iter().map(|&p| screen(p)).collect();
    let seg_len = |i: usize| {
        let (a, b) = (sp[i], sp[(i + 1) % n]);
        (b[0] - a[0]).hypot(b[1] - a[1])
    };
    let mut cum = vec![0.0; n + 1];
    for i in 0..n {
        cum[i + 1] = cum[i] + seg_len(i);
    }
    let total = cum[n];
    // gaps as arc-length intervals, split where they wrap around
    let mut gaps: Vec<(f64, f64)> = Vec::new();
    for c in &diagram.crossings {
        let s = cum[c.under_segment] + c.under_param * seg_len(c.under_segment);
        let (g0, g1) = (s - style.gap, s + style.gap);
        if g0 < 0.0 {
            gaps.push((g0 + total, total));
            gaps.push((0.0, g1));
        } else if g1 > total {
            gaps.push((g0, total));
            gaps.push((0.0, g1 - total));
        } else {
            gaps.push((g0, g1));
        }
    }
    gaps.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for g in gaps {
        match merged.last_mut() {
            Some(m) if g.0 <= m.1 => m.1 = m.1.max(g.1),
            _ => merged.push(g),
        }
    }
    let at = |s: f64| {
        let i = match cum.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => i.min(n - 1),
            Err(i) => i.saturating_sub(1).min(n - 1),
        };
        let l = seg_len(i);
        let t = if l > 0.0 { (s - cum[i]) / l } else { 0.0 };
        let (a, b) = (sp[i], sp[(i + 1) % n]);
        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
    };
    // visible arc-length intervals
    let mut visible: Vec<(f64, f64)> = Vec::new();
    let mut s = 0.0;
    for &(g0, g1) in &merged {
        if g0 > s {
            visible.push((s, g0));
        }
        s = s.max(g1);
    }
    if s < total {
        visible.push((s, total));
    }
    // a piece running through the seam joins the first one
    let wraps = visible.len() > 1
        && visible.first().is_some_and(|v| v.0 == 0.0)
        && visible.last().is_some_and(|v| v.1 == total);
    let mut paths: Vec<String> = Vec::new();
    let piece = |a: f64, b: f64, d: &mut String| {
        let mut first = true;
        let mut push = |p: [f64; 2], d: &mut String| {
            let _ = write!(d, "{}{},{}", if first { "M" } else { " L" }, fmt(p[0]), fmt(p[1]));
            first = false;
        };
        push(at(a), d);
        for (i, &c) in cum.iter().enumerate().take(n).skip(1) {
            if c > a && c < b {
                push(sp[i], d);
            }
        }
        push(at(b), d);
    };
    let pieces: Vec<(f64, f64)> = if wraps {
        visible[1..visible.len() - 1].to_vec()
    } else {
        visible.clone()
    };
    if merged.is_empty() {
        let mut d = String::new();
        for (i, p) in sp.iter().enumerate() {
            let _ = write!(d, "{}{},{}", if i == 0 { "M" } else { " L" }, fmt(p[0]), fmt(p[1]));
        }
        d.push_str(" Z");
        paths.push(d);
    } else {
        if wraps {
            let (last, first) = (visible[visible.len() - 1], visible[0]);
            let mut d = String::new();
            piece(last.0, last.1, &mut d);
            let mut rest = String::new();
            piece(first.0, first.1, &mut rest);
            // drop the duplicated seam point
            let tail = rest.split_once(" L").map_or("", |(_, t)| t);
            if !tail.is_empty() {
                d.push_str(" L");
                d.push_str(tail);
            }
            paths.push(d);
        }
        for (a, b) in pieces {
            let mut d = String::new();
            piece(a, b, &mut d);
            paths.push(d);
        }
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{0}\" viewBox=\"0 0 {0} {0}\" data-crossings=\"{1}\" data-writhe=\"{2}\">",
        fmt(style.size),
        diagram.crossing_count(),
        diagram.writhe()
    );
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<g fill=\"none\" stroke=\"{}\" stroke-width=\"{}\" stroke-linejoin=\"round\" stroke-linecap=\"round\">",
        style.stroke,
        fmt(style.stroke_width)
    );
    for d in paths {
        let _ = writeln!(out, "<path d=\"{d}\"/>");
    }
    out.push_str("</g>\n</svg>\n");
    out
}
