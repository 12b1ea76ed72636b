//! Canonical text serialization of models. `parse(serialize(m))` is
//! structurally equal to `m`, and serialization is deterministic, so model
//! descriptions embedded in notifications compare bytewise.

use std::fmt::Write;

use super::{ModelError, ModelSet, Node, ProcessModel};

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn write_node(out: &mut String, node: &Node, indent: usize) {
    let pad = "  ".repeat(indent);
    match node {
        Node::Task(t) => {
            let _ = write!(out, "{pad}task {}", t.task_id);
            if t.label != t.task_id {
                let _ = write!(out, " {}", quote(&t.label));
            }
            if let Some(d) = t.expected_duration {
                let _ = write!(out, " dur={d}");
            }
            if let Some(g) = t.expected_gap_after {
                let _ = write!(out, " gap={g}");
            }
            if let Some(s) = &t.reference_series_id {
                let _ = write!(out, " series={s}");
            }
        }
        Node::Signal { task_id, label } => {
            let _ = write!(out, "{pad}signal {} id={}", quote(label), task_id);
        }
        Node::SubprocessCall {
            model_id,
            correlate_to_root,
        } => {
            let _ = write!(out, "{pad}call {model_id}");
            if !correlate_to_root {
                out.push_str(" correlate=false");
            }
        }
        Node::Sequence(children) => write_block(out, "seq", children, indent),
        Node::Parallel(children) => write_block(out, "par", children, indent),
        Node::Loop { count, body } => {
            let _ = writeln!(out, "{pad}loop {count} {{");
            write_node(out, body, indent + 1);
            let _ = write!(out, "\n{pad}}}");
        }
    }
}

fn write_block(out: &mut String, kw: &str, children: &[Node], indent: usize) {
    let pad = "  ".repeat(indent);
    let _ = writeln!(out, "{pad}{kw} {{");
    for (i, child) in children.iter().enumerate() {
        write_node(out, child, indent + 1);
        if i + 1 < children.len() {
            out.push(';');
        }
        out.push('\n');
    }
    let _ = write!(out, "{pad}}}");
}

impl ProcessModel {
    /// The canonical single-block document for this model.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "model {} v{} {{", self.model_id, self.version);
        write_node(&mut out, &self.root, 1);
        out.push_str("\n}\n");
        out
    }
}

impl std::fmt::Display for ProcessModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl ModelSet {
    /// Serializes every model of the set, main model first, as one document.
    pub fn to_document(&self) -> String {
        self.model_ids()
            .map(|id| self.get(id).expect("listed id resolves").to_text())
            .collect()
    }

    /// The self-contained document for `model_id`: the model first, then
    /// everything it transitively calls in discovery order. This is the
    /// `model_description` payload instances carry.
    pub fn closure_document(&self, model_id: &str) -> Result<String, ModelError> {
        Ok(self
            .closure(model_id)?
            .iter()
            .map(|m| m.to_text())
            .collect())
    }
}
