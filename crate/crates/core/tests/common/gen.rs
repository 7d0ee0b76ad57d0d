//! Random inputs for oracle and fuzz tests.

use rand::seq::IndexedRandom;
use rand::Rng;

const VARS: [&str; 5] = ["a", "b", "c", "d", "x1"];
const FUNCS: [&str; 3] = ["f", "g", "sum"];
const OPS: [&str; 8] = ["+", "-", "*", "/", "==", "!=", "<", ">"];

fn expr<R: Rng>(rng: &mut R, depth: usize) -> String {
    let roll = if depth == 0 {
        rng.random_range(0..3)
    } else {
        rng.random_range(0..5)
    };
    match roll {
        0 => VARS.choose(rng).unwrap().to_string(),
        1 => rng.random_range(0..20).to_string(),
        2 => {
            if rng.random_bool(0.5) {
                VARS.choose(rng).unwrap().to_string()
            } else {
                "\"s\"".to_string()
            }
        }
        3 => format!(
            "{} {} {}",
            expr(rng, depth - 1),
            OPS.choose(rng).unwrap(),
            expr(rng, depth - 1)
        ),
        _ => {
            let n = rng.random_range(0..3);
            let args: Vec<String> = (0..n).map(|_| expr(rng, depth - 1)).collect();
            format!("{} ( {} )", FUNCS.choose(rng).unwrap(), args.join(" , "))
        }
    }
}

fn block<R: Rng>(rng: &mut R, depth: usize) -> String {
    let n = rng.random_range(0..4);
    let stmts: Vec<String> = (0..n).map(|_| stmt(rng, depth)).collect();
    format!("{{ {} }}", stmts.join(" "))
}

fn stmt<R: Rng>(rng: &mut R, depth: usize) -> String {
    let roll = if depth == 0 {
        rng.random_range(0..3)
    } else {
        rng.random_range(0..5)
    };
    match roll {
        0 => format!("{} = {} ;", VARS.choose(rng).unwrap(), expr(rng, 2)),
        1 => format!("return {} ;", expr(rng, 2)),
        2 => format!("{} ;", expr(rng, 2)),
        3 => {
            let mut s = format!("if ( {} ) {}", expr(rng, 1), block(rng, depth - 1));
            if rng.random_bool(0.5) {
                s.push_str(&format!(" else {}", block(rng, depth - 1)));
            }
            s
        }
        _ => format!("while ( {} ) {}", expr(rng, 1), block(rng, depth - 1)),
    }
}

/// A random MiniLang program: a few functions and top-level statements.
pub fn program<R: Rng>(rng: &mut R) -> String {
    let mut items = Vec::new();
    for _ in 0..rng.random_range(0..3) {
        let n = rng.random_range(0..3);
        let params: Vec<&str> = VARS.choose_multiple(rng, n).copied().collect();
        items.push(format!(
            "def {} ( {} ) {}",
            FUNCS.choose(rng).unwrap(),
            params.join(" , "),
            block(rng, 2)
        ));
    }
    for _ in 0..rng.random_range(0..3) {
        items.push(stmt(rng, 1));
    }
    items.join(" ")
}

/// A variant of `code`: tokens dropped, swapped or replaced, or a fresh program.
pub fn mutate<R: Rng>(rng: &mut R, code: &str) -> String {
    let mut toks: Vec<String> = code.split_whitespace().map(str::to_string).collect();
    match rng.random_range(0..6) {
        0 => return program(rng),
        1 => return code.to_string(),
        _ => {}
    }
    for _ in 0..rng.random_range(1..4) {
        if toks.is_empty() {
            break;
        }
        let i = rng.random_range(0..toks.len());
        match rng.random_range(0..4) {
            0 => {
                toks.remove(i);
            }
            1 => toks[i] = VARS.choose(rng).unwrap().to_string(),
            2 => toks[i] = OPS.choose(rng).unwrap().to_string(),
            _ => {
                let j = rng.random_range(0..toks.len());
                toks.swap(i, j);
            }
        }
    }
    toks.join(" ")
}

const WORDS: [&str; 10] = ["a", "b", "c", "if", "while", "return", "=", ";", "(", ")"];

/// Space-joined tokens from a small vocabulary, so n-grams collide often.
pub fn token_text<R: Rng>(rng: &mut R, max_len: usize) -> String {
    let n = rng.random_range(0..=max_len);
    (0..n)
        .map(|_| *WORDS.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

const FUZZ_CHARS: &[char] = &[
    'a', 'z', 'Q', '_', '0', '9', '.', ' ', '\t', '\n', '"', '\\', '(', ')', '{', '}', '=', '!',
    '<', '>', '+', '-', '*', '/', ';', ',', '#', '@', '\u{2212}', 'é', 'ß', 'λ', '中', '🙂',
    '\u{0}', '\u{200b}', '\u{feff}',
];

/// An arbitrary UTF-8 string mixing code punctuation, whitespace and
/// non-ASCII characters, sometimes with long nesting runs.
pub fn fuzz_string<R: Rng>(rng: &mut R) -> String {
    let mut s = String::new();
    match rng.random_range(0..20) {
        0 => {
            let n = rng.random_range(1..400);
            s.push_str(&"( ".repeat(n));
        }
        1 => {
            let n = rng.random_range(1..400);
            s.push_str(&"{ ".repeat(n));
        }
        _ => {}
    }
    for _ in 0..rng.random_range(0..64) {
        if rng.random_bool(0.1) {
            s.push(char::from_u32(rng.random_range(0..0x11_0000)).unwrap_or('?'));
        } else {
            s.push(*FUZZ_CHARS.choose(rng).unwrap());
        }
    }
    s
}
