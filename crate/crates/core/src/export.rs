//! Elevation drawing (SVG) and node/member listing (CSV) of decoded designs.

use std::fmt::Write as _;

use crate::geometry::{BridgeGeometry, Side};

/// Stroke colours of successive overlays.
pub const OVERLAY_COLOURS: [&str; 3] = ["black", "#d6336c", "#1c7ed6"];

const PX_PER_M: f64 = 5.0;
const MARGIN: f64 = 40.0;

/// Elevation of one or more designs drawn over each other, in the order
/// given, with a legend and a scale bar. Cable lines carry `class="cable"`.
pub fn elevation_svg(designs: &[(&str, &BridgeGeometry)]) -> String {
    let length = designs.iter().map(|(_, g)| g.fixed.total_length).fold(0.0, f64::max);
    let top = designs.iter().map(|(_, g)| g.tower_height).fold(0.0, f64::max);
    let bottom = designs.iter().map(|(_, g)| g.fixed.tower_below_deck).fold(0.0, f64::max);
    let width = length * PX_PER_M + 2.0 * MARGIN;
    let legend = 18.0 * designs.len() as f64;
    let height = (top + bottom) * PX_PER_M + 2.0 * MARGIN + legend + 30.0;
    let sx = |x: f64| MARGIN + x * PX_PER_M;
    let sz = |z: f64| MARGIN + legend + (top - z) * PX_PER_M;

    let mut o = String::new();
    let _ = writeln!(
        o,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(o, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let line = |o: &mut String, class: &str, x1: f64, z1: f64, x2: f64, z2: f64, colour: &str, w: f64| {
        let _ = writeln!(
            o,
            r#"  <line class="{class}" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{colour}" stroke-width="{w}"/>"#,
            sx(x1),
            sz(z1),
            sx(x2),
            sz(z2)
        );
    };
    for (k, (label, g)) in designs.iter().enumerate() {
        let colour = OVERLAY_COLOURS[k % OVERLAY_COLOURS.len()];
        let _ = writeln!(o, r#"<g id="design-{k}">"#);
        let _ = writeln!(o, "  <title>{}</title>", escape(label));
        line(&mut o, "deck", 0.0, 0.0, g.fixed.total_length, 0.0, colour, 2.5);
        for &x in &g.tower_x {
            line(&mut o, "tower", x, -g.fixed.tower_below_deck, x, g.tower_height, colour, 2.0);
        }
        for c in &g.cables {
            line(&mut o, "cable", c.deck_x, 0.0, g.tower_x[c.tower], c.tower_z, colour, 1.0);
        }
        let _ = writeln!(o, "</g>");
        let y = MARGIN + 18.0 * k as f64;
        let _ = writeln!(
            o,
            r#"<line x1="{MARGIN}" y1="{y}" x2="{:.0}" y2="{y}" stroke="{colour}" stroke-width="2"/><text x="{:.0}" y="{:.0}">{}</text>"#,
            MARGIN + 24.0,
            MARGIN + 30.0,
            y + 4.0,
            escape(label)
        );
    }
    let bar = 20.0;
    let y = height - 20.0;
    let _ = writeln!(
        o,
        r#"<g id="scale"><line x1="{MARGIN}" y1="{y}" x2="{:.0}" y2="{y}" stroke="black" stroke-width="2"/><text x="{:.0}" y="{:.0}">{bar} m</text></g>"#,
        MARGIN + bar * PX_PER_M,
        MARGIN + bar * PX_PER_M + 6.0,
        y + 4.0
    );
    o.push_str("</svg>\n");
    o
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Nodes and members of a design as two CSV tables separated by a blank
/// line. Coordinates are in m, `z` measured up from the deck.
pub fn geometry_csv(g: &BridgeGeometry) -> String {
    let mut nodes: Vec<(String, f64, f64)> = Vec::new();
    let mut node = |kind: &str, x: f64, z: f64| -> usize {
        if let Some(i) = nodes.iter().position(|(k, nx, nz)| k == kind && *nx == x && *nz == z) {
            return i;
        }
        nodes.push((kind.to_string(), x, z));
        nodes.len() - 1
    };
    let mut members: Vec<(&str, usize, usize)> = Vec::new();

    let mut deck_x: Vec<f64> = vec![0.0, g.tower_x[0], g.tower_x[1], g.fixed.total_length];
    deck_x.extend(g.anchorages());
    deck_x.sort_by(f64::total_cmp);
    deck_x.dedup();
    let deck: Vec<usize> = deck_x.iter().map(|&x| node("deck", x, 0.0)).collect();
    for w in deck.windows(2) {
        members.push(("deck", w[0], w[1]));
    }
    for &x in &g.tower_x {
        let mut zs: Vec<f64> = vec![-g.fixed.tower_below_deck, g.tower_height];
        zs.extend(g.cables.iter().map(|c| c.tower_z));
        zs.sort_by(f64::total_cmp);
        zs.dedup();
        let ids: Vec<usize> = zs.iter().map(|&z| node("tower", x, z)).collect();
        for w in ids.windows(2) {
            members.push(("tower", w[0], w[1]));
        }
    }
    for c in &g.cables {
        let a = node("deck", c.deck_x, 0.0);
        let b = node("tower", g.tower_x[c.tower], c.tower_z);
        members.push((
            match c.side {
                Side::Lateral => "cable_lateral",
                Side::Central => "cable_central",
            },
            a,
            b,
        ));
    }

    let mut o = String::from("node,kind,x,z\n");
    for (i, (k, x, z)) in nodes.iter().enumerate() {
        let _ = writeln!(o, "{i},{k},{x},{z}");
    }
    o.push_str("\nmember,kind,start,end\n");
    for (i, (k, a, b)) in members.iter().enumerate() {
        let _ = writeln!(o, "{i},{k},{a},{b}");
    }
    o
}
