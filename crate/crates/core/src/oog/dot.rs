use super::{Oog, HAND_ID};
use std::fmt::Write;

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn quote(s: &str) -> String {
    format!("\"{}\"", escape(s))
}

/// Quoted multi-line label.
fn label(lines: &[&str]) -> String {
    let body: Vec<String> = lines.iter().map(|l| escape(l)).collect();
    format!("\"{}\"", body.join("\\n"))
}

/// Graphviz rendering of one OOG. Contact edges are solid, the rest dashed.
pub fn to_dot(g: &Oog) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "graph oog_{} {{", g.keyframe);
    for o in &g.objects {
        let kps = g.points_of(&o.id).count();
        let _ = writeln!(
            out,
            "  {} [label={}];",
            quote(&o.id),
            label(&[&o.name, &format!("{} ({kps} point nodes)", o.object_type.as_str())])
        );
    }
    let grip = if g.grasp.grip_closed { "closed" } else { "open" };
    let _ = writeln!(out, "  {} [shape=box, label={}];", quote(HAND_ID), label(&["hand", grip]));
    for e in &g.edges {
        let style = if e.contact { "solid" } else { "dashed" };
        let _ = writeln!(out, "  {} -- {} [style={style}];", quote(&e.a.to_string()), quote(&e.b.to_string()));
    }
    out.push_str("}\n");
    out
}
