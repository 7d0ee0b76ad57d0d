//! Def-use edges over MiniLang and the data-flow match built on them.
//!
//! Statements of a function are numbered in source order (pre-order, so the
//! statements inside a block follow the `if`/`while` that owns them). A read
//! links to the most recent earlier write in that order; branches and loop
//! back edges are not modelled. Variables are renamed to the order in which
//! they first appear in their function, and top-level statements form one
//! extra scope.

use std::collections::HashMap;

use super::minilang::{parse_minilang, MiniAst, Node, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scope {
    TopLevel,
    Function(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DefSite {
    Param(usize),
    Stmt(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DefUseEdge {
    pub scope: Scope,
    /// Normalized variable index.
    pub var: usize,
    pub def: DefSite,
    pub use_stmt: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DataFlowGraph {
    /// One entry per read, so repeated reads of the same definition repeat.
    pub edges: Vec<DefUseEdge>,
}

struct ScopeWalker {
    scope: Scope,
    names: HashMap<String, usize>,
    last_def: HashMap<usize, DefSite>,
    next_stmt: usize,
    edges: Vec<DefUseEdge>,
}

impl ScopeWalker {
    fn new(scope: Scope) -> Self {
        ScopeWalker {
            scope,
            names: HashMap::new(),
            last_def: HashMap::new(),
            next_stmt: 0,
            edges: Vec::new(),
        }
    }

    fn var(&mut self, name: &str) -> usize {
        let next = self.names.len();
        *self.names.entry(name.to_string()).or_insert(next)
    }

    fn reads(&mut self, expr: &Node, stmt: usize) {
        match expr.kind {
            NodeKind::Name => {
                let v = self.var(expr.token.as_deref().unwrap_or_default());
                if let Some(&def) = self.last_def.get(&v) {
                    self.edges.push(DefUseEdge {
                        scope: self.scope,
                        var: v,
                        def,
                        use_stmt: stmt,
                    });
                }
            }
            _ => {
                for c in &expr.children {
                    self.reads(c, stmt);
                }
            }
        }
    }

    fn stmt(&mut self, node: &Node) {
        let idx = self.next_stmt;
        self.next_stmt += 1;
        match node.kind {
            NodeKind::Assign => {
                let v = self.var(node.token.as_deref().unwrap_or_default());
                self.reads(&node.children[0], idx);
                self.last_def.insert(v, DefSite::Stmt(idx));
            }
            NodeKind::If | NodeKind::While => {
                self.reads(&node.children[0], idx);
                for block in &node.children[1..] {
                    for s in &block.children {
                        self.stmt(s);
                    }
                }
            }
            _ => self.reads(node, idx),
        }
    }
}

pub fn dataflow_graph(ast: &MiniAst) -> DataFlowGraph {
    let mut edges = Vec::new();
    if ast.unparseable {
        return DataFlowGraph { edges };
    }
    let mut top = ScopeWalker::new(Scope::TopLevel);
    let mut func = 0;
    for item in &ast.root.children {
        if item.kind == NodeKind::FuncDef {
            let mut w = ScopeWalker::new(Scope::Function(func));
            func += 1;
            for (i, p) in item
                .children
                .iter()
                .filter(|c| c.kind == NodeKind::Param)
                .enumerate()
            {
                let v = w.var(p.token.as_deref().unwrap_or_default());
                w.last_def.insert(v, DefSite::Param(i));
            }
            if let Some(body) = item.children.last() {
                for s in &body.children {
                    w.stmt(s);
                }
            }
            edges.extend(w.edges);
        } else {
            top.stmt(item);
        }
    }
    edges.extend(top.edges);
    DataFlowGraph { edges }
}

/// Clipped fraction of reference def-use edges found in the hypothesis.
/// A reference without edges scores 1 against any parseable hypothesis.
pub fn dataflow_match_ast(hyp: &MiniAst, reference: &MiniAst) -> f64 {
    if hyp.unparseable || reference.unparseable {
        return 0.0;
    }
    let r = dataflow_graph(reference).edges;
    if r.is_empty() {
        return 1.0;
    }
    let mut available: HashMap<DefUseEdge, usize> = HashMap::new();
    for e in dataflow_graph(hyp).edges {
        *available.entry(e).or_insert(0) += 1;
    }
    let mut matched = 0usize;
    for e in &r {
        if let Some(c) = available.get_mut(e).filter(|c| **c > 0) {
            *c -= 1;
            matched += 1;
        }
    }
    matched as f64 / r.len() as f64
}

pub fn dataflow_match(hyp: &str, reference: &str) -> f64 {
    dataflow_match_ast(&parse_minilang(hyp), &parse_minilang(reference))
}
