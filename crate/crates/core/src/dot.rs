//! Graphviz export. Output is deterministic: nodes in declaration order,
//! edges in sorted order, fixed attribute spelling — the same graph always
//! serialises to the same bytes.
//!
//! Styling: decisions are squares, utilities diamonds, chance nodes
//! ellipses, mechanism nodes small filled black circles. Information and
//! mechanism edges are dashed; terminal edges are bold dashed. Each agent
//! gets one colour.

use std::fmt::Write as _;

use crate::game::GameGraph;
use crate::graphops::{mechanism_name, MechanisedGraph};

const PALETTE: [&str; 8] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
];

fn quoted(name: &str) -> String {
    format!("\"{}\"", name.replace('\\', "\\\\").replace('"', "\\\""))
}

fn agent_colour(agents: &[String], agent: &str) -> &'static str {
    let i = agents.iter().position(|a| a == agent).unwrap_or(0);
    PALETTE[i % PALETTE.len()]
}

/// DOT rendering of a game graph.
pub fn game_dot(g: &GameGraph) -> String {
    let agents = g.agents();
    let mut out = String::from("digraph game {\n");
    for v in &g.nodes {
        let shape = if g.decisions.contains(v) {
            "square"
        } else if g.utilities.contains(v) {
            "diamond"
        } else {
            "ellipse"
        };
        let mut attrs = format!("shape={shape}");
        if let Some(owners) = g.colour.get(v) {
            // Multiple owners render as a colour list (shared utilities).
            let colours: Vec<&str> = owners
                .iter()
                .map(|a| agent_colour(&agents, a))
                .collect();
            write!(attrs, ", color=\"{}\", penwidth=2", colours.join(":")).unwrap();
        }
        writeln!(out, "  {} [{attrs}];", quoted(v.as_str())).unwrap();
    }
    let info = g.info_edges();
    for (a, b) in &g.edges {
        let style = if info.contains(&(a.clone(), b.clone())) {
            " [style=dashed]"
        } else {
            ""
        };
        writeln!(out, "  {} -> {}{style};", quoted(a.as_str()), quoted(b.as_str())).unwrap();
    }
    out.push_str("}\n");
    out
}

/// DOT rendering of a mechanised graph: object nodes as ellipses plus their
/// mechanism nodes, functional, mechanism, and terminal edges.
pub fn mechanised_dot(c: &MechanisedGraph) -> String {
    let mut out = String::from("digraph mechanised {\n");
    for v in c.object_nodes() {
        writeln!(out, "  {} [shape=ellipse];", quoted(v.as_str())).unwrap();
    }
    for m in c.mechanism_nodes() {
        writeln!(
            out,
            "  {} [shape=circle, style=filled, fillcolor=black, fontcolor=white, width=0.3, fixedsize=true];",
            quoted(&m)
        )
        .unwrap();
    }
    for (m, v) in c.e_func() {
        writeln!(out, "  {} -> {};", quoted(&m), quoted(v.as_str())).unwrap();
    }
    for (a, b) in c.e_obj() {
        writeln!(out, "  {} -> {};", quoted(a.as_str()), quoted(b.as_str())).unwrap();
    }
    for (w, v) in c.e_mech() {
        let style = if c.e_term().contains(&(w.clone(), v.clone())) {
            "style=\"bold,dashed\""
        } else {
            "style=dashed"
        };
        writeln!(
            out,
            "  {} -> {} [{style}];",
            quoted(&mechanism_name(w)),
            quoted(&mechanism_name(v))
        )
        .unwrap();
    }
    out.push_str("}\n");
    out
}
