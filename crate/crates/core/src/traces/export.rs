use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::{NodeKind, Trace, TraceNode};
use crate::syntax::Program;

fn node_label(p: &Program, n: &TraceNode) -> String {
    let body = match &n.kind {
        NodeKind::Store { addr, value } => format!("mem[{}] <- {value}", p.value_name(*addr)),
        NodeKind::Load { addr, value } => format!("ld {} = {value}", p.value_name(*addr)),
        NodeKind::Local => "loc".to_string(),
        NodeKind::ScFence => "scfence".to_string(),
        NodeKind::Fence { addrs } => {
            let a: Vec<String> = addrs.iter().map(|a| p.value_name(*a)).collect();
            format!("fence {}", a.join(", "))
        }
        NodeKind::Pending => "isu (pending)".to_string(),
    };
    format!("{}#{}: {body}", p.threads[n.thread].name, n.per_thread_index)
}

impl Trace {
    /// Graphviz rendering. Nodes on the witness cycle, if any, are drawn red.
    pub fn to_dot(&self, p: &Program) -> String {
        let cycle: BTreeSet<usize> = self.find_cycle().unwrap_or_default().into_iter().collect();
        let mut out = String::from("digraph trace {\n  rankdir=TB;\n  node [shape=box];\n");
        for (t, th) in p.threads.iter().enumerate() {
            let _ = writeln!(out, "  subgraph cluster_{t} {{\n    label=\"{}\";", th.name);
            for (i, n) in self.nodes.iter().enumerate().filter(|(_, n)| n.thread == t) {
                let style = if cycle.contains(&i) { ", color=red, penwidth=2" } else { "" };
                let _ = writeln!(out, "    n{i} [label=\"{}\"{style}];", node_label(p, n).replace('"', "\\\""));
            }
            out.push_str("  }\n");
        }
        for e in &self.edges {
            let on_cycle = cycle.contains(&e.from) && cycle.contains(&e.to);
            let style = if on_cycle { ", color=red" } else { "" };
            let _ = writeln!(out, "  n{} -> n{} [label=\"{}\"{style}];", e.from, e.to, e.kind.as_str());
        }
        out.push_str("}\n");
        out
    }

    /// JSON with thread names resolved and the witness cycle, if any.
    pub fn to_json(&self, p: &Program) -> serde_json::Value {
        let nodes: Vec<serde_json::Value> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let mut v = serde_json::to_value(n).expect("nodes serialize");
                v["id"] = i.into();
                v["thread"] = p.threads[n.thread].name.clone().into();
                v["label"] = node_label(p, n).into();
                v
            })
            .collect();
        serde_json::json!({
            "nodes": nodes,
            "edges": self.edges,
            "cycle": self.find_cycle(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::super::build_trace;
    use super::super::tests::{mp, tau_prime};
    use crate::semantics::Machine;

    #[test]
    fn dot_marks_the_cycle() {
        let p = mp();
        let t = build_trace(&tau_prime(&Machine::new(&p)));
        let dot = t.to_dot(&p);
        assert!(dot.contains("label=\"cf\", color=red"));
        assert!(dot.contains("tw#0: mem[d1] <- 1"));
        assert_eq!(dot.matches("color=red, penwidth=2").count(), 6);
    }

    #[test]
    fn json_has_names_and_cycle() {
        let p = mp();
        let t = build_trace(&tau_prime(&Machine::new(&p)));
        let j = t.to_json(&p);
        assert_eq!(j["nodes"][3]["thread"], "tr");
        assert_eq!(j["nodes"][3]["kind"], "load");
        assert_eq!(j["cycle"].as_array().unwrap().len(), 6);
        assert_eq!(j["edges"].as_array().unwrap().len(), 6);
    }
}
