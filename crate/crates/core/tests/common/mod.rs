//! Random grammars, lexical specifications and inputs for the
//! cross-checking tests.

#![allow(dead_code)]

use fence::lexer::{parse_lex_spec, LexicalAnalysisGraph, Scanner};
use fence::Grammar;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub const MAX_NONTERMINALS: usize = 6;
pub const MAX_PRODUCTIONS: usize = 12;
pub const MAX_RHS: usize = 4;
pub const MAX_TERMINALS: usize = 5;
pub const MAX_TOKENS: usize = 10;

/// Token patterns over the alphabet {a, b, c}. Several overlap so that
/// inputs are lexically ambiguous.
const PATTERNS: &[(&str, &str)] = &[
    ("a", "a"),
    ("b", "b"),
    ("c", "c"),
    ("ab", "ab"),
    ("ba", "ba"),
    ("a+", "aa"),
    ("[ab]", "b"),
    ("bc?", "bc"),
    ("ca?", "c"),
];

pub struct Case {
    pub grammar_text: String,
    pub lex_text: String,
    pub input: String,
    pub grammar: Grammar,
    pub graph: LexicalAnalysisGraph,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random grammar text: nonterminals `N0..`, terminals `T0..`, initial
/// symbol `N0`.
pub fn random_grammar_text(rng: &mut ChaCha8Rng, terminals: usize) -> String {
    let nts = rng.gen_range(1..=MAX_NONTERMINALS);
    let total = rng.gen_range(nts..=MAX_PRODUCTIONS);
    let mut lhs: Vec<usize> = (0..nts).collect();
    while lhs.len() < total {
        lhs.push(rng.gen_range(0..nts));
    }
    lhs.shuffle(rng);
    // the first line fixes the initial symbol
    let pos = lhs.iter().position(|&l| l == 0).unwrap();
    lhs.swap(0, pos);
    let mut out = String::new();
    for l in lhs {
        out.push_str(&format!("N{l} ::="));
        let len = if rng.gen_bool(0.1) { 0 } else { rng.gen_range(1..=MAX_RHS) };
        for _ in 0..len {
            if rng.gen_bool(0.5) {
                out.push_str(&format!(" T{}", rng.gen_range(0..terminals)));
            } else {
                out.push_str(&format!(" N{}", rng.gen_range(0..nts)));
            }
        }
        out.push('\n');
    }
    out
}

/// Random derivation from the initial symbol, mapped to sample lexemes.
fn random_sentence(rng: &mut ChaCha8Rng, g: &Grammar, samples: &[&str]) -> Option<String> {
    let mut form = vec![g.initial()];
    for _ in 0..40 {
        let Some(pos) = form.iter().position(|&s| !g.is_terminal(s)) else {
            break;
        };
        let x = form[pos];
        let mut options: Vec<&[usize]> = g
            .productions()
            .iter()
            .filter(|p| p.left == x)
            .map(|p| p.right.as_slice())
            .collect();
        if g.is_nullable(x) {
            options.push(&[]);
        }
        let rhs = options.choose(rng)?.to_vec();
        form.splice(pos..=pos, rhs);
        if form.iter().filter(|&&s| g.is_terminal(s)).count() > MAX_TOKENS {
            return None;
        }
    }
    if form.is_empty() || form.iter().any(|&s| !g.is_terminal(s)) {
        return None;
    }
    let text: String = form
        .iter()
        .map(|&s| {
            let idx: usize = g.name(s)[1..].parse().unwrap();
            samples[idx]
        })
        .collect();
    Some(text)
}

/// One random (grammar, lexical spec, input) case within the size limits.
/// About half of the inputs are sampled from the grammar.
pub fn random_case(rng: &mut ChaCha8Rng) -> Case {
    loop {
        let terminals = rng.gen_range(1..=MAX_TERMINALS);
        let mut patterns: Vec<(&str, &str)> = PATTERNS.to_vec();
        patterns.shuffle(rng);
        patterns.truncate(terminals);
        let lex_text: String = patterns
            .iter()
            .enumerate()
            .map(|(i, (p, _))| format!("{p} T{i}\n"))
            .collect();
        let samples: Vec<&str> = patterns.iter().map(|(_, s)| *s).collect();

        let grammar_text = random_grammar_text(rng, terminals);
        let mut grammar = Grammar::parse(&grammar_text).unwrap();
        grammar.declare_terminals((0..terminals).map(|i| format!("T{i}")));
        let Ok(grammar) = grammar.prepare() else { continue };

        let input = if rng.gen_bool(0.5) {
            match random_sentence(rng, &grammar, &samples) {
                Some(s) => s,
                None => continue,
            }
        } else {
            let len = rng.gen_range(1..=MAX_TOKENS);
            (0..len).map(|_| *['a', 'b', 'c'].choose(rng).unwrap()).collect()
        };
        if input.len() > MAX_TOKENS {
            continue;
        }
        let scanner = Scanner::new(parse_lex_spec(&lex_text).unwrap(), None).unwrap();
        let Ok(graph) = scanner.scan(&input) else { continue };
        return Case {
            grammar_text,
            lex_text,
            input,
            grammar,
            graph,
        };
    }
}

pub fn sequence_graph(types: &[&str]) -> LexicalAnalysisGraph {
    LexicalAnalysisGraph::from_sequence(types)
}
