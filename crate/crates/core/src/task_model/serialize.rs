use std::fmt::Write;

use super::{Operator, TaskModel, TaskNode};

/// Renders a model in canonical form.
///
/// Output is deterministic and `parse_model(serialize_model(m)) == m` for
/// every valid model.
pub fn serialize_model(m: &TaskModel) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "model {} version {}",
        quote(&m.name),
        quote(&m.version)
    );
    write_node(&mut out, &m.root, 0);
    out
}

fn write_node(out: &mut String, node: &TaskNode, depth: usize) {
    let indent = "  ".repeat(depth);
    match node {
        TaskNode::Leaf(l) => {
            let _ = write!(
                out,
                "{indent}leaf {} {{ nominal={}",
                l.id, l.nominal_duration
            );
            if l.weight != 1.0 {
                let _ = write!(out, " weight={}", l.weight);
            }
            if !l.description.is_empty() {
                let _ = write!(out, " desc={}", quote(&l.description));
            }
            if !l.context_refs.is_empty() {
                let _ = write!(out, " contexts=[{}]", l.context_refs.join(", "));
            }
            for (tier, key) in &l.content_keys {
                let _ = write!(out, " content.{tier}={}", quote(key));
            }
            out.push_str(" }\n");
        }
        TaskNode::Composite(c) => {
            let _ = write!(out, "{indent}task {} {}", c.operator, c.id);
            if let (Operator::Loop, Some(bound)) = (c.operator, c.loop_bound) {
                let _ = write!(out, " bound={bound}");
            }
            if c.weight != 1.0 {
                let _ = write!(out, " weight={}", c.weight);
            }
            out.push_str(" {\n");
            for child in &c.children {
                write_node(out, child, depth + 1);
            }
            let _ = writeln!(out, "{indent}}}");
        }
    }
}

fn quote(s: &str) -> String {
    let mut q = String::with_capacity(s.len() + 2);
    q.push('"');
    for c in s.chars() {
        match c {
            '"' => q.push_str("\\\""),
            '\\' => q.push_str("\\\\"),
            '\n' => q.push_str("\\n"),
            '\t' => q.push_str("\\t"),
            c => q.push(c),
        }
    }
    q.push('"');
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task_model::{parse_model, LeafTask};

    #[test]
    fn one_leaf_model() {
        let m = TaskModel::new("Tighten", TaskNode::Leaf(LeafTask::new("bolt", 12)));
        assert_eq!(
            serialize_model(&m),
            "model \"Tighten\" version \"1\"\nleaf bolt { nominal=12 }\n"
        );
    }

    #[test]
    fn four_leaf_canonical_fixpoint() {
        let src = "task seq { task par { leaf a {nominal=3} leaf b {nominal=4 weight=2} } \
                   leaf c {nominal=5 desc=\"say \\\"hi\\\"\"} leaf d {nominal=6} }";
        let m = parse_model(src).unwrap();
        let canon = serialize_model(&m);
        assert_eq!(parse_model(&canon).unwrap(), m);
        assert_eq!(serialize_model(&parse_model(&canon).unwrap()), canon);
        assert_eq!(serialize_model(&m), canon, "deterministic");
        assert_eq!(
            canon,
            "model \"untitled\" version \"1\"\n\
             task seq seq_1 {\n  task par par_1 {\n    leaf a { nominal=3 }\n    leaf b { nominal=4 weight=2 }\n  }\n  \
             leaf c { nominal=5 desc=\"say \\\"hi\\\"\" }\n  leaf d { nominal=6 }\n}\n"
        );
    }
}
