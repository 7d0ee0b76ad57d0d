//! Recursive-descent parser for MiniLang, the small language whose syntax
//! trees and def-use chains the code-aware metric compares.
//!
//! ```text
//! program := (funcdef | stmt)*
//! funcdef := "def" NAME "(" params? ")" block
//! params  := NAME ("," NAME)*
//! block   := "{" stmt* "}"
//! stmt    := NAME "=" expr ";" | "return" expr ";"
//!          | "if" "(" expr ")" block ("else" block)?
//!          | "while" "(" expr ")" block | expr ";"
//! expr    := cmp ; cmp := sum (("==" | "!=" | "<" | ">") sum)*
//! sum     := term (("+" | "-") term)* ; term := atom (("*" | "/") atom)*
//! atom    := NAME "(" args? ")" | NAME | NUMBER | STRING
//! ```
//!
//! Parsing never fails outright: malformed input yields a single-node tree
//! with [`MiniAst::unparseable`] set.

use std::fmt;

pub const KEYWORDS: [&str; 5] = ["def", "return", "if", "else", "while"];

/// Trees taller than this, and inputs that nest deeper, are rejected.
pub const MAX_DEPTH: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Program,
    FuncDef,
    Param,
    Block,
    Assign,
    If,
    While,
    Return,
    Call,
    BinOp,
    Name,
    Number,
    String,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub kind: NodeKind,
    /// Name, literal text or operator carried by the node.
    pub token: Option<String>,
    pub children: Vec<Node>,
    height: usize,
}

impl Node {
    fn new(kind: NodeKind, token: Option<String>, children: Vec<Node>) -> Self {
        let height = 1 + children.iter().map(|c| c.height).max().unwrap_or(0);
        Node {
            kind,
            token,
            children,
            height,
        }
    }

    fn leaf(kind: NodeKind, token: &str) -> Self {
        Node::new(kind, Some(token.to_string()), Vec::new())
    }

    pub fn height(&self) -> usize {
        self.height
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiniAst {
    pub root: Node,
    pub unparseable: bool,
}

impl MiniAst {
    pub fn is_parseable(&self) -> bool {
        !self.unparseable
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Name(String),
    Keyword(&'static str),
    Number(String),
    Str(String),
    Punct(&'static str),
}

const PUNCT: [&str; 16] = [
    "==", "!=", "<", ">", "+", "-", "*", "/", "=", ";", ",", "(", ")", "{", "}", "\u{2212}",
];

fn lex(src: &str) -> Option<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            match KEYWORDS.iter().find(|k| **k == word) {
                Some(k) => toks.push(Tok::Keyword(k)),
                None => toks.push(Tok::Name(word)),
            }
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            toks.push(Tok::Number(chars[start..i].iter().collect()));
        } else if c == '"' {
            let start = i;
            i += 1;
            loop {
                match chars.get(i) {
                    None => return None,
                    Some('\\') => i += 2,
                    Some('"') => {
                        i += 1;
                        break;
                    }
                    Some(_) => i += 1,
                }
            }
            toks.push(Tok::Str(chars[start..i.min(chars.len())].iter().collect()));
        } else {
            let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
            let p = PUNCT
                .iter()
                .find(|p| p.chars().count() == 2 && **p == two)
                .or_else(|| {
                    PUNCT
                        .iter()
                        .find(|p| p.chars().count() == 1 && p.starts_with(c))
                })?;
            i += p.chars().count();
            // the typographic minus sign is read as "-"
            toks.push(Tok::Punct(if *p == "\u{2212}" { "-" } else { p }));
        }
    }
    Some(toks)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
    depth: usize,
}

type PResult<T> = Option<T>;

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, offset: usize) -> Option<&Tok> {
        self.toks.get(self.pos + offset)
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Some(Tok::Punct(q)) if *q == p)
    }

    fn is_keyword(&self, k: &str) -> bool {
        matches!(self.peek(), Some(Tok::Keyword(q)) if *q == k)
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.is_punct(p) {
            self.pos += 1;
            Some(())
        } else {
            None
        }
    }

    fn expect_keyword(&mut self, k: &str) -> PResult<()> {
        if self.is_keyword(k) {
            self.pos += 1;
            Some(())
        } else {
            None
        }
    }

    fn name(&mut self) -> PResult<String> {
        match self.peek() {
            Some(Tok::Name(n)) => {
                let n = n.clone();
                self.pos += 1;
                Some(n)
            }
            _ => None,
        }
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        (self.depth <= MAX_DEPTH).then_some(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    fn node(&self, kind: NodeKind, token: Option<String>, children: Vec<Node>) -> PResult<Node> {
        let node = Node::new(kind, token, children);
        (node.height <= MAX_DEPTH).then_some(node)
    }

    fn program(&mut self) -> PResult<Node> {
        let mut items = Vec::new();
        while self.peek().is_some() {
            if self.is_keyword("def") {
                items.push(self.funcdef()?);
            } else {
                items.push(self.stmt()?);
            }
        }
        self.node(NodeKind::Program, None, items)
    }

    fn funcdef(&mut self) -> PResult<Node> {
        self.expect_keyword("def")?;
        let name = self.name()?;
        self.expect_punct("(")?;
        let mut children = Vec::new();
        if !self.is_punct(")") {
            loop {
                children.push(Node::leaf(NodeKind::Param, &self.name()?));
                if self.is_punct(",") {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        children.push(self.block()?);
        self.node(NodeKind::FuncDef, Some(name), children)
    }

    fn block(&mut self) -> PResult<Node> {
        self.enter()?;
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        while !self.is_punct("}") {
            self.peek()?;
            stmts.push(self.stmt()?);
        }
        self.pos += 1;
        self.leave();
        self.node(NodeKind::Block, None, stmts)
    }

    fn stmt(&mut self) -> PResult<Node> {
        if self.is_keyword("return") {
            self.pos += 1;
            let e = self.expr()?;
            self.expect_punct(";")?;
            return self.node(NodeKind::Return, None, vec![e]);
        }
        if self.is_keyword("if") || self.is_keyword("while") {
            let is_if = self.is_keyword("if");
            self.pos += 1;
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let mut children = vec![cond, self.block()?];
            if !is_if {
                return self.node(NodeKind::While, None, children);
            }
            if self.is_keyword("else") {
                self.pos += 1;
                children.push(self.block()?);
            }
            return self.node(NodeKind::If, None, children);
        }
        if let (Some(Tok::Name(target)), Some(Tok::Punct("="))) = (self.peek(), self.peek_at(1)) {
            let target = target.clone();
            self.pos += 2;
            let value = self.expr()?;
            self.expect_punct(";")?;
            return self.node(NodeKind::Assign, Some(target), vec![value]);
        }
        let e = self.expr()?;
        self.expect_punct(";")?;
        Some(e)
    }

    fn expr(&mut self) -> PResult<Node> {
        self.enter()?;
        let e = self.binary(0);
        self.leave();
        e
    }

    fn binary(&mut self, level: usize) -> PResult<Node> {
        const LEVELS: [&[&str]; 3] = [&["==", "!=", "<", ">"], &["+", "-"], &["*", "/"]];
        if level == LEVELS.len() {
            return self.atom();
        }
        let mut left = self.binary(level + 1)?;
        while let Some(Tok::Punct(op)) = self.peek() {
            let op = *op;
            if !LEVELS[level].contains(&op) {
                break;
            }
            self.pos += 1;
            let right = self.binary(level + 1)?;
            left = self.node(NodeKind::BinOp, Some(op.to_string()), vec![left, right])?;
        }
        Some(left)
    }

    fn atom(&mut self) -> PResult<Node> {
        match self.peek()?.clone() {
            Tok::Number(n) => {
                self.pos += 1;
                Some(Node::leaf(NodeKind::Number, &n))
            }
            Tok::Str(s) => {
                self.pos += 1;
                Some(Node::leaf(NodeKind::String, &s))
            }
            Tok::Name(n) => {
                self.pos += 1;
                if !self.is_punct("(") {
                    return Some(Node::leaf(NodeKind::Name, &n));
                }
                self.pos += 1;
                let mut args = Vec::new();
                if !self.is_punct(")") {
                    loop {
                        args.push(self.expr()?);
                        if self.is_punct(",") {
                            self.pos += 1;
                        } else {
                            break;
                        }
                    }
                }
                self.expect_punct(")")?;
                self.node(NodeKind::Call, Some(n), args)
            }
            _ => None,
        }
    }
}

/// Parses MiniLang source. Top-level statements outside any function are
/// accepted as direct children of the program node.
pub fn parse_minilang(code: &str) -> MiniAst {
    let parsed = lex(code).and_then(|toks| {
        let mut p = Parser {
            toks,
            pos: 0,
            depth: 0,
        };
        p.program()
    });
    match parsed {
        Some(root) => MiniAst {
            root,
            unparseable: false,
        },
        None => MiniAst {
            root: Node::new(NodeKind::Program, None, Vec::new()),
            unparseable: true,
        },
    }
}
