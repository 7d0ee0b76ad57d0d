//! Brute-force reference implementations. They share only the tokenizer with
//! the library; every count, parse and match is recomputed here by direct
//! scanning.

pub type Toks = Vec<String>;

const KEYWORDS: [&str; 5] = ["def", "return", "if", "else", "while"];

fn occurrences(seq: &[String], gram: &[String]) -> usize {
    if gram.len() > seq.len() {
        return 0;
    }
    (0..=seq.len() - gram.len())
        .filter(|&i| seq[i..i + gram.len()] == *gram)
        .count()
}

/// Weighted clipped matches and weighted hypothesis n-gram total.
fn clipped(
    hyp: &[String],
    reference: &[String],
    n: usize,
    weight: &dyn Fn(&[String]) -> f64,
) -> (f64, f64) {
    if hyp.len() < n {
        return (0.0, 0.0);
    }
    let mut seen: Vec<&[String]> = Vec::new();
    let (mut matched, mut total) = (0.0, 0.0);
    for i in 0..=hyp.len() - n {
        let g = &hyp[i..i + n];
        total += weight(g);
        if seen.contains(&g) {
            continue;
        }
        seen.push(g);
        matched += weight(g) * occurrences(hyp, g).min(occurrences(reference, g)) as f64;
    }
    (matched, total)
}

fn brevity(hyp_len: usize, ref_len: usize) -> f64 {
    if hyp_len == 0 {
        0.0
    } else if hyp_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    }
}

fn weighted_corpus_bleu(hyps: &[Toks], refs: &[Toks], unigram_weight: &dyn Fn(&str) -> f64) -> f64 {
    let mut matched = [0.0; 4];
    let mut total = [0.0; 4];
    let hyp_len: usize = hyps.iter().map(Vec::len).sum();
    let ref_len: usize = refs.iter().map(Vec::len).sum();
    for (h, r) in hyps.iter().zip(refs) {
        for n in 1..=4 {
            let w = |g: &[String]| if n == 1 { unigram_weight(&g[0]) } else { 1.0 };
            let (m, t) = clipped(h, r, n, &w);
            matched[n - 1] += m;
            total[n - 1] += t;
        }
    }
    let orders: Vec<usize> = (0..4).filter(|&n| total[n] > 0.0).collect();
    if orders.is_empty() || orders.iter().any(|&n| matched[n] == 0.0) {
        return 0.0;
    }
    let product: f64 = orders.iter().map(|&n| matched[n] / total[n]).product();
    100.0 * brevity(hyp_len, ref_len) * product.powf(1.0 / orders.len() as f64)
}

pub fn corpus_bleu(hyps: &[Toks], refs: &[Toks]) -> f64 {
    weighted_corpus_bleu(hyps, refs, &|_| 1.0)
}

pub fn smoothed_bleu4(hyp: &[String], reference: &[String]) -> f64 {
    if hyp.is_empty() {
        return 0.0;
    }
    let mut product = 1.0;
    for n in 1..=4 {
        let (m, t) = clipped(hyp, reference, n, &|_| 1.0);
        if n == 1 {
            if m == 0.0 {
                return 0.0;
            }
            product *= m / t;
        } else {
            product *= (m + 1.0) / (t + 1.0);
        }
    }
    100.0 * brevity(hyp.len(), reference.len()) * product.powf(0.25)
}

pub fn exact_match(hyps: &[String], refs: &[String]) -> f64 {
    if hyps.is_empty() {
        return 0.0;
    }
    let same = hyps
        .iter()
        .zip(refs)
        .filter(|(h, r)| h.split_whitespace().eq(r.split_whitespace()))
        .count();
    same as f64 / hyps.len() as f64
}

pub fn recall_at_k(rankings: &[Vec<String>], gold: &[String], k: usize) -> f64 {
    if rankings.is_empty() {
        return 0.0;
    }
    let hits = rankings
        .iter()
        .zip(gold)
        .filter(|(r, g)| r.iter().take(k).any(|d| d == *g))
        .count();
    hits as f64 / rankings.len() as f64
}

pub fn mrr(rankings: &[Vec<String>], gold: &[String]) -> f64 {
    if rankings.is_empty() {
        return 0.0;
    }
    let mut sum = 0.0;
    for (r, g) in rankings.iter().zip(gold) {
        for (i, d) in r.iter().enumerate() {
            if d == g {
                sum += 1.0 / (i + 1) as f64;
                break;
            }
        }
    }
    sum / rankings.len() as f64
}

/// Exact BM25 scores of every document, computed from raw token lists.
pub fn bm25_all(docs: &[Toks], query: &[String], k1: f64, b: f64) -> Vec<f64> {
    let n = docs.len() as f64;
    let avg = docs.iter().map(Vec::len).sum::<usize>() as f64 / n;
    docs.iter()
        .map(|d| {
            let mut s = 0.0;
            for q in query {
                let tf = d.iter().filter(|t| *t == q).count() as f64;
                if tf == 0.0 {
                    continue;
                }
                let df = docs.iter().filter(|d| d.contains(q)).count() as f64;
                let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                s += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * d.len() as f64 / avg));
            }
            s
        })
        .collect()
}

/// Indices sorted by descending score, ties to the lower index.
pub fn rank_all(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    // insertion sort keeps the comparison rule obvious
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 {
            let (a, c) = (idx[j - 1], idx[j]);
            if scores[c] > scores[a] || (scores[c] == scores[a] && c < a) {
                idx.swap(j - 1, j);
                j -= 1;
            } else {
                break;
            }
        }
    }
    idx
}

// ---------------------------------------------------------------------------
// MiniLang

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub kind: &'static str,
    pub token: Option<String>,
    pub kids: Vec<Tree>,
}

fn tree(kind: &'static str, token: Option<String>, kids: Vec<Tree>) -> Tree {
    Tree { kind, token, kids }
}

#[derive(Debug, Clone, PartialEq)]
enum Lx {
    Word(String),
    Num(String),
    Str(String),
    Sym(String),
}

fn lex(src: &str) -> Option<Vec<Lx>> {
    let cs: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_alphabetic() || c == '_' {
            while i < cs.len() && (cs[i].is_ascii_alphanumeric() || cs[i] == '_') {
                i += 1;
            }
            out.push(Lx::Word(cs[start..i].iter().collect()));
        } else if c.is_ascii_digit() {
            while i < cs.len() && cs[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < cs.len() && cs[i] == '.' && cs[i + 1].is_ascii_digit() {
                i += 1;
                while i < cs.len() && cs[i].is_ascii_digit() {
                    i += 1;
                }
            }
            out.push(Lx::Num(cs[start..i].iter().collect()));
        } else if c == '"' {
            i += 1;
            while i < cs.len() && cs[i] != '"' {
                i += 1;
            }
            if i == cs.len() {
                return None;
            }
            i += 1;
            out.push(Lx::Str(cs[start..i].iter().collect()));
        } else {
            let pair: String = cs[i..(i + 2).min(cs.len())].iter().collect();
            if pair == "==" || pair == "!=" {
                out.push(Lx::Sym(pair));
                i += 2;
            } else if "<>+-*/=;,(){}".contains(c) {
                out.push(Lx::Sym(c.to_string()));
                i += 1;
            } else {
                return None;
            }
        }
    }
    Some(out)
}

fn precedence(op: &str) -> Option<u8> {
    match op {
        "==" | "!=" | "<" | ">" => Some(1),
        "+" | "-" => Some(2),
        "*" | "/" => Some(3),
        _ => None,
    }
}

struct Rd {
    toks: Vec<Lx>,
    at: usize,
}

impl Rd {
    fn sym(&self, s: &str) -> bool {
        matches!(self.toks.get(self.at), Some(Lx::Sym(x)) if x == s)
    }

    fn word(&self, w: &str) -> bool {
        matches!(self.toks.get(self.at), Some(Lx::Word(x)) if x == w)
    }

    fn eat_sym(&mut self, s: &str) -> Option<()> {
        self.sym(s).then(|| self.at += 1)
    }

    fn ident(&mut self) -> Option<String> {
        match self.toks.get(self.at) {
            Some(Lx::Word(w)) if !KEYWORDS.contains(&w.as_str()) => {
                self.at += 1;
                Some(w.clone())
            }
            _ => None,
        }
    }

    fn program(&mut self) -> Option<Tree> {
        let mut items = Vec::new();
        while self.at < self.toks.len() {
            items.push(if self.word("def") {
                self.func()?
            } else {
                self.stmt()?
            });
        }
        Some(tree("Program", None, items))
    }

    fn func(&mut self) -> Option<Tree> {
        self.at += 1;
        let name = self.ident()?;
        self.eat_sym("(")?;
        let mut kids = Vec::new();
        if !self.sym(")") {
            kids.push(tree("Param", Some(self.ident()?), vec![]));
            while self.sym(",") {
                self.at += 1;
                kids.push(tree("Param", Some(self.ident()?), vec![]));
            }
        }
        self.eat_sym(")")?;
        kids.push(self.block()?);
        Some(tree("FuncDef", Some(name), kids))
    }

    fn block(&mut self) -> Option<Tree> {
        self.eat_sym("{")?;
        let mut kids = Vec::new();
        while !self.sym("}") {
            if self.at >= self.toks.len() {
                return None;
            }
            kids.push(self.stmt()?);
        }
        self.at += 1;
        Some(tree("Block", None, kids))
    }

    fn stmt(&mut self) -> Option<Tree> {
        if self.word("return") {
            self.at += 1;
            let e = self.expr(1)?;
            self.eat_sym(";")?;
            return Some(tree("Return", None, vec![e]));
        }
        for (kw, kind) in [("if", "If"), ("while", "While")] {
            if self.word(kw) {
                self.at += 1;
                self.eat_sym("(")?;
                let cond = self.expr(1)?;
                self.eat_sym(")")?;
                let mut kids = vec![cond, self.block()?];
                if kind == "If" && self.word("else") {
                    self.at += 1;
                    kids.push(self.block()?);
                }
                return Some(tree(kind, None, kids));
            }
        }
        let assign = matches!(
            (self.toks.get(self.at), self.toks.get(self.at + 1)),
            (Some(Lx::Word(w)), Some(Lx::Sym(s))) if s == "=" && !KEYWORDS.contains(&w.as_str())
        );
        if assign {
            let target = self.ident()?;
            self.at += 1;
            let e = self.expr(1)?;
            self.eat_sym(";")?;
            return Some(tree("Assign", Some(target), vec![e]));
        }
        let e = self.expr(1)?;
        self.eat_sym(";")?;
        Some(e)
    }

    /// Precedence climbing; every operator is left-associative.
    fn expr(&mut self, min: u8) -> Option<Tree> {
        let mut left = self.primary()?;
        while let Some(Lx::Sym(op)) = self.toks.get(self.at).cloned() {
            let p = match precedence(&op) {
                Some(p) if p >= min => p,
                _ => break,
            };
            self.at += 1;
            let right = self.expr(p + 1)?;
            left = tree("BinOp", Some(op), vec![left, right]);
        }
        Some(left)
    }

    fn primary(&mut self) -> Option<Tree> {
        match self.toks.get(self.at)?.clone() {
            Lx::Num(n) => {
                self.at += 1;
                Some(tree("Number", Some(n), vec![]))
            }
            Lx::Str(s) => {
                self.at += 1;
                Some(tree("String", Some(s), vec![]))
            }
            Lx::Word(_) => {
                let name = self.ident()?;
                if !self.sym("(") {
                    return Some(tree("Name", Some(name), vec![]));
                }
                self.at += 1;
                let mut args = Vec::new();
                if !self.sym(")") {
                    args.push(self.expr(1)?);
                    while self.sym(",") {
                        self.at += 1;
                        args.push(self.expr(1)?);
                    }
                }
                self.eat_sym(")")?;
                Some(tree("Call", Some(name), args))
            }
            Lx::Sym(_) => None,
        }
    }
}

/// Parses the ASCII subset of MiniLang produced by the test generators.
pub fn parse(src: &str) -> Option<Tree> {
    let mut rd = Rd {
        toks: lex(src)?,
        at: 0,
    };
    rd.program()
}

fn render(t: &Tree) -> String {
    let label = match (&t.token, t.kind) {
        (Some(op), "BinOp") => format!("BinOp:{op}"),
        (Some(_), k) => format!("{k}:_"),
        (None, k) => k.to_string(),
    };
    if t.kids.is_empty() {
        label
    } else {
        let kids: Vec<String> = t.kids.iter().map(render).collect();
        format!("({label} {})", kids.join(" "))
    }
}

fn all_subtrees(t: &Tree, out: &mut Vec<String>) {
    if !t.kids.is_empty() {
        out.push(render(t));
        for k in &t.kids {
            all_subtrees(k, out);
        }
    }
}

/// Matched fraction of `reference` items, each hypothesis item used once.
fn clipped_fraction<T: PartialEq>(hyp: &[T], reference: &[T]) -> f64 {
    let mut used = vec![false; hyp.len()];
    let mut matched = 0;
    for r in reference {
        if let Some(i) = (0..hyp.len()).find(|&i| !used[i] && hyp[i] == *r) {
            used[i] = true;
            matched += 1;
        }
    }
    matched as f64 / reference.len() as f64
}

pub fn ast_match(hyp: &str, reference: &str) -> f64 {
    let (Some(h), Some(r)) = (parse(hyp), parse(reference)) else {
        return 0.0;
    };
    let (mut hs, mut rs) = (Vec::new(), Vec::new());
    all_subtrees(&h, &mut hs);
    all_subtrees(&r, &mut rs);
    if rs.is_empty() {
        return 1.0;
    }
    clipped_fraction(&hs, &rs)
}

fn names_in(e: &Tree, out: &mut Vec<String>) {
    if e.kind == "Name" {
        out.push(e.token.clone().unwrap());
    } else {
        for k in &e.kids {
            names_in(k, out);
        }
    }
}

fn flatten<'a>(stmts: &'a [Tree], out: &mut Vec<&'a Tree>) {
    for s in stmts {
        out.push(s);
        if s.kind == "If" || s.kind == "While" {
            for block in &s.kids[1..] {
                flatten(&block.kids, out);
            }
        }
    }
}

/// (defined variable, read variables) of one flattened statement.
fn def_and_reads(s: &Tree) -> (Option<String>, Vec<String>) {
    let mut reads = Vec::new();
    match s.kind {
        "Assign" => {
            names_in(&s.kids[0], &mut reads);
            (s.token.clone(), reads)
        }
        "If" | "While" => {
            names_in(&s.kids[0], &mut reads);
            (None, reads)
        }
        _ => {
            names_in(s, &mut reads);
            (None, reads)
        }
    }
}

/// Edges as (scope, var, def kind, def index, use statement); scope -1 is
/// the top level and def kind 0 is a parameter, 1 a statement.
pub type Edge = (i64, usize, u8, usize, usize);

fn scope_edges(scope: i64, params: &[String], stmts: &[&Tree], out: &mut Vec<Edge>) {
    let mut order: Vec<String> = Vec::new();
    let number = |v: &String, order: &mut Vec<String>| match order.iter().position(|o| o == v) {
        Some(i) => i,
        None => {
            order.push(v.clone());
            order.len() - 1
        }
    };
    for p in params {
        number(p, &mut order);
    }
    let info: Vec<(Option<String>, Vec<String>)> = stmts.iter().map(|s| def_and_reads(s)).collect();
    for (j, (def, reads)) in info.iter().enumerate() {
        if let Some(d) = def {
            number(d, &mut order);
        }
        for u in reads {
            let var = number(u, &mut order);
            let by_stmt = (0..j).rev().find(|&i| info[i].0.as_ref() == Some(u));
            let site = match by_stmt {
                Some(i) => Some((1, i)),
                None => params.iter().rposition(|p| p == u).map(|i| (0, i)),
            };
            if let Some((kind, idx)) = site {
                out.push((scope, var, kind, idx, j));
            }
        }
    }
}

pub fn dataflow_edges(program: &Tree) -> Vec<Edge> {
    let mut edges = Vec::new();
    let mut top_level = Vec::new();
    let mut funcs = 0;
    for item in &program.kids {
        if item.kind == "FuncDef" {
            let params: Vec<String> = item
                .kids
                .iter()
                .filter(|k| k.kind == "Param")
                .map(|k| k.token.clone().unwrap())
                .collect();
            let mut stmts = Vec::new();
            flatten(&item.kids.last().unwrap().kids, &mut stmts);
            scope_edges(funcs, &params, &stmts, &mut edges);
            funcs += 1;
        } else {
            top_level.push(item.clone());
        }
    }
    let mut stmts = Vec::new();
    flatten(&top_level, &mut stmts);
    scope_edges(-1, &[], &stmts, &mut edges);
    edges
}

pub fn dataflow_match(hyp: &str, reference: &str) -> f64 {
    let (Some(h), Some(r)) = (parse(hyp), parse(reference)) else {
        return 0.0;
    };
    let re = dataflow_edges(&r);
    if re.is_empty() {
        return 1.0;
    }
    clipped_fraction(&dataflow_edges(&h), &re)
}

pub struct CodeBleu {
    pub ngram: f64,
    pub weighted: f64,
    pub ast: f64,
    pub dataflow: f64,
    pub total: f64,
}

pub fn codebleu(hyps: &[String], refs: &[String], tokenize: impl Fn(&str) -> Toks) -> CodeBleu {
    let ht: Vec<Toks> = hyps.iter().map(|h| tokenize(h)).collect();
    let rt: Vec<Toks> = refs.iter().map(|r| tokenize(r)).collect();
    let ngram = corpus_bleu(&ht, &rt) / 100.0;
    let weighted =
        weighted_corpus_bleu(&ht, &rt, &|t| if KEYWORDS.contains(&t) { 5.0 } else { 1.0 }) / 100.0;
    let n = hyps.len() as f64;
    let ast = hyps
        .iter()
        .zip(refs)
        .map(|(h, r)| ast_match(h, r))
        .sum::<f64>()
        / n;
    let dataflow = hyps
        .iter()
        .zip(refs)
        .map(|(h, r)| dataflow_match(h, r))
        .sum::<f64>()
        / n;
    CodeBleu {
        ngram,
        weighted,
        ast,
        dataflow,
        total: (ngram + weighted + ast + dataflow) / 4.0,
    }
}
