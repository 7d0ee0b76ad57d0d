//! Synthetic MiniLang corpora with aligned summaries.
//!
//! Every pair belongs to a family. Members of one family share a function
//! body and differ only in the function name, so a sibling is a near-copy of
//! the target. Summaries follow a fixed template naming the function, its
//! result, its first parameter and its first intermediate variable:
//!
//! ```text
//! def tamo ( kivu , ropa ) { lesi = kivu * 3 ; duna = lesi + ropa ; return duna ; }
//! tamo computes duna from kivu via lesi
//! ```
//!
//! A paraphrase rate replaces summary identifiers with unrelated words drawn
//! from a disjoint alphabet, which removes lexical overlap with the code.

use std::collections::{BTreeSet, HashMap};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    /// Present only as a database entry.
    Database,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticPair {
    pub id: String,
    pub family: usize,
    pub split: Split,
    pub code: String,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    /// Families whose members are all training pairs.
    pub train_families: usize,
    /// Families contributing one test pair each.
    pub test_families: usize,
    /// Members per family that has siblings.
    pub family_size: usize,
    /// Fraction of test families that have siblings; the rest are singletons.
    pub near_copy_rate: f64,
    /// Probability that a summary identifier is replaced by its paraphrase.
    pub paraphrase_rate: f64,
    /// Distinct function names to draw from; 0 gives every pair its own name.
    pub name_pool: usize,
    pub var_pool: usize,
    pub seed: u64,
}

impl SyntheticConfig {
    /// `n` unrelated pairs, all for training, each with a unique name.
    pub fn aligned(n: usize, seed: u64) -> Self {
        SyntheticConfig {
            train_families: n,
            test_families: 0,
            family_size: 1,
            near_copy_rate: 0.0,
            paraphrase_rate: 0.0,
            name_pool: 0,
            var_pool: 40,
            seed,
        }
    }

    pub fn paraphrased(n: usize, seed: u64) -> Self {
        SyntheticConfig {
            paraphrase_rate: 1.0,
            ..Self::aligned(n, seed)
        }
    }

    /// Families of near-copies; test targets have siblings in the database
    /// at `near_copy_rate`.
    pub fn near_copy(seed: u64) -> Self {
        SyntheticConfig {
            train_families: 900,
            test_families: 100,
            family_size: 2,
            near_copy_rate: 0.75,
            paraphrase_rate: 0.0,
            name_pool: 100,
            var_pool: 150,
            seed,
        }
    }
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self::near_copy(0)
    }
}

const CODE_CONSONANTS: &[char] = &[
    'b', 'd', 'g', 'k', 'l', 'm', 'n', 'p', 'r', 's', 't', 'v', 'z',
];
const PARA_CONSONANTS: &[char] = &['c', 'f', 'h', 'j', 'w', 'y'];
const VOWELS: &[char] = &['a', 'e', 'i', 'o', 'u'];
const OPS: &[&str] = &["+", "-", "*", "/"];

fn pseudoword<R: Rng>(rng: &mut R, consonants: &[char], syllables: usize) -> String {
    (0..syllables)
        .flat_map(|_| {
            [
                *consonants.choose(rng).unwrap(),
                *VOWELS.choose(rng).unwrap(),
            ]
        })
        .collect()
}

fn distinct_words<R: Rng>(
    rng: &mut R,
    n: usize,
    consonants: &[char],
    syllables: usize,
    taken: &mut BTreeSet<String>,
) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let w = pseudoword(rng, consonants, syllables);
        if taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

struct Body {
    params: Vec<String>,
    stmts: Vec<(String, String, &'static str, String)>,
}

impl Body {
    fn sample<R: Rng>(rng: &mut R, vars: &[String]) -> Self {
        let n_params = rng.random_range(1..=2);
        let n_stmts = rng.random_range(2..=3);
        let mut names: Vec<&String> = vars.choose_multiple(rng, n_params + n_stmts).collect();
        names.shuffle(rng);
        let params: Vec<String> = names[..n_params].iter().map(|s| s.to_string()).collect();
        let mut defined = params.clone();
        let mut stmts = Vec::new();
        for target in &names[n_params..] {
            // after the first statement the newest variable is always read,
            // so every statement feeds the result
            let left = if stmts.is_empty() {
                defined.choose(rng).unwrap().clone()
            } else {
                defined.last().unwrap().clone()
            };
            let right = if rng.random_bool(0.5) {
                defined.choose(rng).unwrap().clone()
            } else {
                rng.random_range(1..=9).to_string()
            };
            let op = *OPS.choose(rng).unwrap();
            stmts.push((target.to_string(), left, op, right));
            defined.push(target.to_string());
        }
        Body { params, stmts }
    }

    fn render(&self, name: &str) -> String {
        let mut s = format!("def {name} ( {} ) {{", self.params.join(" , "));
        for (t, l, op, r) in &self.stmts {
            s.push_str(&format!(" {t} = {l} {op} {r} ;"));
        }
        s.push_str(&format!(" return {} ; }}", self.stmts.last().unwrap().0));
        s
    }

    fn summary_slots<'a>(&'a self, name: &'a str) -> [&'a str; 4] {
        [
            name,
            &self.stmts.last().unwrap().0,
            &self.params[0],
            &self.stmts[0].0,
        ]
    }
}

/// Generates the corpus described by `cfg`. Pairs are ordered train, test,
/// then database-only; ids are `syn-<family>-<member>`.
pub fn generate_corpus(cfg: &SyntheticConfig) -> Vec<SyntheticPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut taken = BTreeSet::new();
    let vars = distinct_words(
        &mut rng,
        cfg.var_pool.max(5),
        CODE_CONSONANTS,
        2,
        &mut taken,
    );
    let total_families = cfg.train_families + cfg.test_families;
    let total_members = total_families * cfg.family_size.max(1);
    let names = if cfg.name_pool == 0 {
        distinct_words(&mut rng, total_members, CODE_CONSONANTS, 3, &mut taken)
    } else {
        distinct_words(
            &mut rng,
            cfg.name_pool.max(cfg.family_size),
            CODE_CONSONANTS,
            2,
            &mut taken,
        )
    };
    let mut para_taken = BTreeSet::new();
    let para_words = distinct_words(
        &mut rng,
        vars.len() + names.len(),
        PARA_CONSONANTS,
        3,
        &mut para_taken,
    );
    let paraphrase: HashMap<&str, &str> = vars
        .iter()
        .chain(&names)
        .map(String::as_str)
        .zip(para_words.iter().map(String::as_str))
        .collect();

    let with_siblings = (cfg.test_families as f64 * cfg.near_copy_rate).round() as usize;
    let mut pairs = Vec::new();
    let mut db_only = Vec::new();
    let mut next_unique_name = 0;
    for family in 0..total_families {
        let body = Body::sample(&mut rng, &vars);
        let is_test = family >= cfg.train_families;
        let size = if is_test && family - cfg.train_families >= with_siblings {
            1
        } else {
            cfg.family_size.max(1)
        };
        let member_names: Vec<String> = if cfg.name_pool == 0 {
            let ns = names[next_unique_name..next_unique_name + size].to_vec();
            next_unique_name += size;
            ns
        } else {
            names.choose_multiple(&mut rng, size).cloned().collect()
        };
        for (member, name) in member_names.iter().enumerate() {
            let words: Vec<String> = body
                .summary_slots(name)
                .iter()
                .map(|w| {
                    if cfg.paraphrase_rate > 0.0 && rng.random_bool(cfg.paraphrase_rate.min(1.0)) {
                        paraphrase[w].to_string()
                    } else {
                        w.to_string()
                    }
                })
                .collect();
            let split = match (is_test, member) {
                (false, _) => Split::Train,
                (true, 0) => Split::Test,
                (true, _) => Split::Database,
            };
            let pair = SyntheticPair {
                id: format!("syn-{family}-{member}"),
                family,
                split,
                code: body.render(name),
                summary: format!(
                    "{} computes {} from {} via {}",
                    words[0], words[1], words[2], words[3]
                ),
            };
            if split == Split::Database {
                db_only.push(pair);
            } else {
                pairs.push(pair);
            }
        }
    }
    pairs.extend(db_only);
    pairs
}
