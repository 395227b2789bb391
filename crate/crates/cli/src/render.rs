//! Wall previews as SVG and log-tree exports.

use ecolayout_core::log::LogGraph;
use ecolayout_core::{DisplayEcology, LayoutResult, SessionModel, UserId};
use std::collections::BTreeMap;
use std::fmt::Write;

/// How a wall preview is drawn.
#[derive(Clone, Debug)]
pub struct RenderSpec {
    /// Pixels per millimetre.
    pub scale: f64,
    pub labels: bool,
    /// Frame colour per author; authors without an entry get
    /// [`user_color`].
    pub colors: BTreeMap<UserId, String>,
}

impl Default for RenderSpec {
    fn default() -> Self {
        Self {
            scale: 0.2,
            labels: true,
            colors: BTreeMap::new(),
        }
    }
}

/// Gap between displays and around the drawing, in pixels.
pub const GAP_PX: f64 = 24.0;

/// Stable colour for a user id (FNV-1a hash mapped to a hue).
pub fn user_color(user: &UserId) -> String {
    let mut h: u32 = 0x811c_9dc5;
    for b in user.as_str().bytes() {
        h ^= b as u32;
        h = h.wrapping_mul(0x0100_0193);
    }
    let (r, g, b) = hsl_to_rgb((h % 360) as f64, 0.65, 0.42);
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn hsl_to_rgb(hue: f64, s: f64, l: f64) -> (u8, u8, u8) {
    let c = (1.0 - (2.0 * l - 1.0).abs()) * s;
    let hp = hue / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = l - c / 2.0;
    let q = |v: f64| ((v + m) * 255.0).round() as u8;
    (q(r), q(g), q(b))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Left edge (px) of every connected display, ordered by room x.
pub fn display_offsets(ecology: &DisplayEcology, spec: &RenderSpec) -> Vec<(usize, f64)> {
    let mut order: Vec<usize> = (0..ecology.displays.len()).filter(|&i| ecology.displays[i].connected).collect();
    order.sort_by(|&a, &b| {
        let (da, db) = (&ecology.displays[a], &ecology.displays[b]);
        da.center_m[0].total_cmp(&db.center_m[0]).then_with(|| da.id.cmp(&db.id))
    });
    let mut x = GAP_PX;
    order
        .into_iter()
        .map(|i| {
            let left = x;
            x += ecology.displays[i].width_mm * spec.scale + GAP_PX;
            (i, left)
        })
        .collect()
}

/// One rectangle per display, left to right by room position, with the
/// views as labelled boxes framed in their author's colour.
pub fn render_svg(layout: &LayoutResult, model: &SessionModel, ecology: &DisplayEcology, spec: &RenderSpec) -> String {
    assert!(spec.scale > 0.0, "render scale must be positive");
    let offsets = display_offsets(ecology, spec);
    let width = offsets
        .last()
        .map_or(2.0 * GAP_PX, |&(i, x)| x + ecology.displays[i].width_mm * spec.scale + GAP_PX);
    let height = offsets
        .iter()
        .map(|&(i, _)| ecology.displays[i].height_mm * spec.scale)
        .fold(0.0, f64::max)
        + 2.0 * GAP_PX;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.3}" height="{height:.3}" viewBox="0 0 {width:.3} {height:.3}">"#
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#f4f4f4"/>"##);
    for &(i, left) in &offsets {
        let d = &ecology.displays[i];
        let _ = writeln!(out, r#"<g class="display" id="{}">"#, escape(d.id.as_str()));
        let _ = writeln!(
            out,
            r##"<rect class="screen" x="{left:.3}" y="{GAP_PX:.3}" width="{:.3}" height="{:.3}" fill="#1d1d1d"/>"##,
            d.width_mm * spec.scale,
            d.height_mm * spec.scale
        );
        if spec.labels {
            let _ = writeln!(
                out,
                r##"<text x="{left:.3}" y="{:.3}" font-size="12" fill="#555">{}</text>"##,
                GAP_PX - 6.0,
                escape(d.id.as_str())
            );
        }
        for p in layout.placements.iter().filter(|p| p.display == d.id) {
            let color = match model.authors.get(&p.view) {
                Some(a) => spec.colors.get(a).cloned().unwrap_or_else(|| user_color(a)),
                None => "#9a9a9a".to_owned(),
            };
            let (x, y) = (left + (p.cx_mm - p.w_mm / 2.0) * spec.scale, GAP_PX + (p.cy_mm - p.h_mm / 2.0) * spec.scale);
            let (w, h) = (p.w_mm * spec.scale, p.h_mm * spec.scale);
            let _ = writeln!(
                out,
                r##"<rect class="view" data-view="{}" x="{x:.3}" y="{y:.3}" width="{w:.3}" height="{h:.3}" fill="#3a4a5c" stroke="{color}" stroke-width="2"/>"##,
                escape(p.view.as_str())
            );
            if spec.labels {
                let title = model.view(&p.view).map_or("", |v| v.title.as_str());
                let label = if title.is_empty() { p.view.as_str().to_owned() } else { format!("{} · {title}", p.view) };
                let _ = writeln!(
                    out,
                    r##"<text x="{:.3}" y="{:.3}" font-size="11" fill="#eee">{}</text>"##,
                    x + 4.0,
                    y + 14.0,
                    escape(&label)
                );
            }
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}

/// Graphviz export of the log tree: one node per event, bordered in the
/// actor's colour, the head path drawn bold.
pub fn log_dot(graph: &LogGraph) -> String {
    let mut out = String::from("digraph log {\n  rankdir=LR;\n  node [shape=box, style=rounded, fontsize=10];\n");
    for n in &graph.nodes {
        let kind = n.kind.map_or("root", |k| k.as_str());
        let mut label = format!("{} {kind}\\n{}", n.id, n.actor);
        if let Some(v) = &n.touched_view {
            let _ = write!(label, "\\nview {v}");
        }
        if let Some(d) = &n.touched_display {
            let _ = write!(label, "\\non {d}");
        }
        let style = if n.id == graph.head {
            ", penwidth=3, style=\"rounded,filled\", fillcolor=\"#fff3c4\""
        } else if n.on_path {
            ", penwidth=2"
        } else {
            ""
        };
        let _ = writeln!(
            out,
            "  n{} [label=\"{}\", color=\"{}\"{style}];",
            n.id,
            label.replace('"', "\\\""),
            user_color(&n.actor)
        );
    }
    for n in &graph.nodes {
        if let Some(p) = n.parent {
            let bold = if n.on_path { " [penwidth=2]" } else { "" };
            let _ = writeln!(out, "  n{p} -> n{}{bold};", n.id);
        }
    }
    out.push_str("}\n");
    out
}
