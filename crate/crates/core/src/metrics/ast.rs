//! Syntax-tree match: clipped overlap of reference subtrees found in the hypothesis.

use std::collections::HashMap;

use super::minilang::{MiniAst, Node, NodeKind};

const PLACEHOLDER: &str = "_";

/// Serializes `node`, pushing the serialization of every subtree with at
/// least one child into `out`. Names and literals become a placeholder so the
/// comparison ignores identifier choice; operators are kept.
fn collect(node: &Node, out: &mut Vec<String>) -> String {
    let label = match (&node.token, node.kind) {
        (Some(op), NodeKind::BinOp) => format!("{}:{}", node.kind, op),
        (Some(_), _) => format!("{}:{PLACEHOLDER}", node.kind),
        (None, _) => node.kind.to_string(),
    };
    if node.children.is_empty() {
        return label;
    }
    let mut s = format!("({label}");
    for child in &node.children {
        s.push(' ');
        s.push_str(&collect(child, out));
    }
    s.push(')');
    out.push(s.clone());
    s
}

/// Serialized subtrees of a parse, in post-order. Empty for unparseable input.
pub fn subtrees(ast: &MiniAst) -> Vec<String> {
    let mut out = Vec::new();
    if ast.is_parseable() {
        collect(&ast.root, &mut out);
    }
    out
}

pub fn ast_match(hyp: &MiniAst, reference: &MiniAst) -> f64 {
    if hyp.unparseable || reference.unparseable {
        return 0.0;
    }
    let r = subtrees(reference);
    if r.is_empty() {
        return 1.0;
    }
    let mut available: HashMap<String, usize> = HashMap::new();
    for s in subtrees(hyp) {
        *available.entry(s).or_insert(0) += 1;
    }
    let mut matched = 0usize;
    for s in &r {
        if let Some(c) = available.get_mut(s) {
            if *c > 0 {
                *c -= 1;
                matched += 1;
            }
        }
    }
    matched as f64 / r.len() as f64
}
