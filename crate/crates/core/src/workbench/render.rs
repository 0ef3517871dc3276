use std::fmt::Write;

use crate::appgraph::{AppGraph, NodeKind};
use crate::evaluator::{EventKind, Mapping, Timeline};
use crate::platform::Platform;

const LANE_H: f64 = 28.0;
const LABEL_W: f64 = 110.0;
const PLOT_W: f64 = 800.0;
const MARGIN: f64 = 10.0;
const AXIS_H: f64 = 24.0;

const PALETTE: [&str; 8] = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948", "#b07aa1", "#9c755f"];

fn kind_color(kind: EventKind) -> &'static str {
    match kind {
        EventKind::Compute => "#4e79a7",
        EventKind::Read => "#59a14f",
        EventKind::Write => "#f28e2b",
        EventKind::Transfer => "#bab0ac",
    }
}

fn kind_name(kind: EventKind) -> &'static str {
    match kind {
        EventKind::Compute => "compute",
        EventKind::Read => "read",
        EventKind::Write => "write",
        EventKind::Transfer => "transfer",
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// One lane per unit, one rectangle per event colored by kind.
pub fn render_gantt(timeline: &Timeline) -> String {
    let lanes = timeline.unit_names.len();
    let span = timeline.events.iter().map(|e| e.end).fold(timeline.makespan(), f64::max);
    let scale = if span > 0.0 { PLOT_W / span } else { 0.0 };
    let width = LABEL_W + PLOT_W + 2.0 * MARGIN;
    let height = lanes as f64 * LANE_H + AXIS_H + 2.0 * MARGIN;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    for (lane, name) in timeline.unit_names.iter().enumerate() {
        let y = MARGIN + lane as f64 * LANE_H;
        let fill = if lane % 2 == 0 { "#f4f4f4" } else { "#ffffff" };
        let _ = writeln!(
            svg,
            r#"<g class="lane" data-unit="{}"><rect x="{MARGIN}" y="{y}" width="{}" height="{LANE_H}" fill="{fill}"/><text x="{}" y="{}">{}</text></g>"#,
            escape(name),
            LABEL_W + PLOT_W,
            MARGIN + 4.0,
            y + LANE_H * 0.65,
            escape(name)
        );
    }
    for e in &timeline.events {
        let x = MARGIN + LABEL_W + e.start * scale;
        let w = ((e.end - e.start) * scale).max(0.5);
        let y = MARGIN + e.unit.0 as f64 * LANE_H + 4.0;
        let _ = writeln!(
            svg,
            r##"<rect class="{kind}" x="{x:.3}" y="{y}" width="{w:.3}" height="{}" fill="{}" stroke="#333" stroke-width="0.5"><title>node {} {kind} {:.6e}..{:.6e} s</title></rect>"##,
            LANE_H - 8.0,
            kind_color(e.kind),
            e.node,
            e.start,
            e.end,
            kind = kind_name(e.kind),
        );
    }
    let axis_y = MARGIN + lanes as f64 * LANE_H;
    let _ = writeln!(
        svg,
        r##"<line x1="{}" y1="{axis_y}" x2="{}" y2="{axis_y}" stroke="#333"/><text x="{}" y="{}">0</text><text x="{}" y="{}" text-anchor="end">{:.6e} s</text>"##,
        MARGIN + LABEL_W,
        MARGIN + LABEL_W + PLOT_W,
        MARGIN + LABEL_W,
        axis_y + 16.0,
        MARGIN + LABEL_W + PLOT_W,
        axis_y + 16.0,
        span
    );
    svg.push_str("</svg>\n");
    svg
}

/// Graphviz text; compute nodes show parallelizability and complexity, and
/// with a mapping every node is filled by its unit's color.
pub fn render_dot(graph: &AppGraph, platform: &Platform, mapping: Option<&Mapping>) -> String {
    let mut dot = String::from("digraph app {\n  rankdir=LR;\n  node [style=filled, fillcolor=\"#ffffff\"];\n");
    for node in graph.nodes() {
        let shape = if node.kind == NodeKind::Compute { "box" } else { "ellipse" };
        let mut label = format!("{} {}", node.kind.label(), node.id);
        if let Some(a) = &node.attrs {
            let _ = write!(label, "\\np={:.2} c={:.2}", a.parallelizability, a.complexity);
        }
        let mut extra = String::new();
        if let Some(m) = mapping {
            let u = m.unit(node.id);
            let _ = write!(label, "\\n@{}", platform.unit_name(u));
            let _ = write!(extra, ", fillcolor=\"{}\"", PALETTE[u.0 % PALETTE.len()]);
        }
        let _ = writeln!(dot, "  n{} [shape={shape}, label=\"{}\"{extra}];", node.id, label.replace('"', "\\\""));
    }
    for &(a, b) in graph.edges() {
        let _ = writeln!(dot, "  n{a} -> n{b};");
    }
    dot.push_str("}\n");
    dot
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::Event;
    use crate::platform::UnitId;
    use std::collections::BTreeMap;

    #[test]
    fn empty_timeline_has_lanes_only() {
        let t = Timeline { unit_names: vec!["cpu".into(), "cpu_ram".into()], clocks: vec![0.0, 0.0], events: vec![], data_ready: BTreeMap::new() };
        let svg = render_gantt(&t);
        assert_eq!(svg.matches("class=\"lane\"").count(), 2);
        assert_eq!(svg.matches("<rect class=").count(), 0);
    }

    #[test]
    fn events_are_colored_by_kind() {
        let ev = |kind, s, e| Event { node: 1, unit: UnitId(0), start: s, end: e, kind };
        let t = Timeline {
            unit_names: vec!["cpu".into()],
            clocks: vec![3.0],
            events: vec![ev(EventKind::Read, 0.0, 1.0), ev(EventKind::Compute, 1.0, 2.0), ev(EventKind::Write, 2.0, 3.0)],
            data_ready: BTreeMap::new(),
        };
        let svg = render_gantt(&t);
        assert!(svg.contains(r#"class="read""#) && svg.contains(r#"class="compute""#) && svg.contains(r#"class="write""#));
        assert_eq!(svg, render_gantt(&t));
    }
}
