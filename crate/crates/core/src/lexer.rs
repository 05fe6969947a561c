//! Ambiguity-preserving scanner.
//!
//! Every token type is matched independently at every reachable offset, and
//! each type contributes its own longest match. The result is a graph of
//! tokens in which every start-to-end path is one possible tokenization.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt::Write as _;

use regex_automata::dfa::{dense, Automaton};
use regex_automata::{Anchored, Input, MatchKind};
use serde::Serialize;
use thiserror::Error;

/// Default skip pattern: a run of ASCII whitespace.
pub const DEFAULT_SKIP: &str = r"[ \t\r\n\x0B\x0C]+";

pub type TokenId = usize;

#[derive(Debug, Error)]
pub enum LexError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("token type `{name}`: invalid pattern: {message}")]
    InvalidPattern { name: String, message: String },
    #[error("token type `{0}` is defined twice")]
    Duplicate(String),
    #[error("token type `{0}` matches the empty string")]
    EmptyMatch(String),
    #[error("invalid skip pattern: {0}")]
    InvalidSkip(String),
    #[error("no token matches at offset {0}")]
    NoMatch(usize),
}

/// Anchored, longest-match regular expression.
#[derive(Clone, Debug)]
pub struct Pattern {
    source: String,
    dfa: dense::DFA<Vec<u32>>,
}

impl Pattern {
    pub fn new(source: &str) -> Result<Pattern, String> {
        let dfa = dense::Builder::new()
            .configure(
                dense::Config::new()
                    .match_kind(MatchKind::All)
                    .start_kind(regex_automata::dfa::StartKind::Anchored),
            )
            .build(source)
            .map_err(|e| e.to_string())?;
        Ok(Pattern {
            source: source.to_owned(),
            dfa,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Length of the longest match starting exactly at `offset`, if any.
    pub fn longest_at(&self, text: &str, offset: usize) -> Option<usize> {
        let input = Input::new(text).range(offset..).anchored(Anchored::Yes);
        self.dfa
            .try_search_fwd(&input)
            .ok()
            .flatten()
            .map(|m| m.offset() - offset)
    }

    pub fn matches_empty(&self) -> bool {
        self.longest_at("", 0).is_some()
    }
}

#[derive(Clone, Debug)]
pub struct TokenTypeSpec {
    pub name: String,
    pub pattern: Pattern,
}

impl TokenTypeSpec {
    pub fn new(name: &str, pattern: &str) -> Result<TokenTypeSpec, LexError> {
        let pattern = Pattern::new(pattern).map_err(|message| LexError::InvalidPattern {
            name: name.to_owned(),
            message,
        })?;
        if pattern.matches_empty() {
            return Err(LexError::EmptyMatch(name.to_owned()));
        }
        Ok(TokenTypeSpec {
            name: name.to_owned(),
            pattern,
        })
    }
}

/// Parses a lexical specification: one `pattern  Name` pair per line, the
/// name being the last whitespace-separated field. `#` starts a comment
/// only at the beginning of a line, since patterns may contain `#`.
pub fn parse_lex_spec(text: &str) -> Result<Vec<TokenTypeSpec>, LexError> {
    let mut specs: Vec<TokenTypeSpec> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some(split) = line.rfind(|c: char| c.is_whitespace()) else {
            return Err(LexError::Syntax {
                line: lineno + 1,
                message: "expected `pattern Name`".into(),
            });
        };
        let (pattern, name) = (line[..split].trim(), line[split..].trim());
        if specs.iter().any(|s| s.name == name) {
            return Err(LexError::Duplicate(name.to_owned()));
        }
        specs.push(TokenTypeSpec::new(name, pattern)?);
    }
    Ok(specs)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Token {
    pub id: TokenId,
    #[serde(rename = "type")]
    pub kind: String,
    pub lexeme: String,
    pub start: usize,
    pub end: usize,
    pub following: BTreeSet<TokenId>,
    #[serde(skip)]
    pub preceding: BTreeSet<TokenId>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LexicalAnalysisGraph {
    pub input: String,
    pub tokens: Vec<Token>,
    pub start_tokens: BTreeSet<TokenId>,
    pub end_tokens: BTreeSet<TokenId>,
    /// Offset of the first token, past any leading skip text.
    pub first_offset: usize,
}

pub struct Scanner {
    specs: Vec<TokenTypeSpec>,
    skip: Option<Pattern>,
}

impl Scanner {
    /// Uses [`DEFAULT_SKIP`] when `skip` is `None`; an empty string disables
    /// skipping.
    pub fn new(specs: Vec<TokenTypeSpec>, skip: Option<&str>) -> Result<Scanner, LexError> {
        let skip = match skip.unwrap_or(DEFAULT_SKIP) {
            "" => None,
            src => Some(Pattern::new(src).map_err(LexError::InvalidSkip)?),
        };
        Ok(Scanner { specs, skip })
    }

    pub fn specs(&self) -> &[TokenTypeSpec] {
        &self.specs
    }

    fn skip_from(&self, input: &str, offset: usize) -> usize {
        match &self.skip {
            Some(p) => offset + p.longest_at(input, offset).unwrap_or(0),
            None => offset,
        }
    }

    /// Builds the pruned lexical analysis graph of `input`.
    pub fn scan(&self, input: &str) -> Result<LexicalAnalysisGraph, LexError> {
        let raw = self.scan_raw(input);
        let graph = prune(raw.graph);
        if graph.start_tokens.is_empty() {
            return Err(LexError::NoMatch(raw.first_failure.unwrap_or(graph.first_offset)));
        }
        Ok(graph)
    }

    /// Scans without pruning and reports the smallest reachable offset at
    /// which nothing matched.
    pub fn scan_raw(&self, input: &str) -> RawScan {
        let first_offset = self.skip_from(input, 0);
        let mut tokens: Vec<Token> = Vec::new();
        let mut by_start: BTreeMap<usize, Vec<TokenId>> = BTreeMap::new();
        let mut next_offset: Vec<usize> = Vec::new();
        let mut first_failure = None;

        let mut queue: VecDeque<usize> = VecDeque::new();
        let mut seen: HashSet<usize> = HashSet::new();
        if first_offset < input.len() {
            queue.push_back(first_offset);
            seen.insert(first_offset);
        }
        while let Some(offset) = queue.pop_front() {
            let mut ids = Vec::new();
            for spec in &self.specs {
                let Some(len) = spec.pattern.longest_at(input, offset) else {
                    continue;
                };
                if len == 0 {
                    continue;
                }
                let end = offset + len;
                let id = tokens.len();
                tokens.push(Token {
                    id,
                    kind: spec.name.clone(),
                    lexeme: input[offset..end].to_owned(),
                    start: offset,
                    end,
                    following: BTreeSet::new(),
                    preceding: BTreeSet::new(),
                });
                let next = self.skip_from(input, end);
                next_offset.push(next);
                ids.push(id);
                if next < input.len() && seen.insert(next) {
                    queue.push_back(next);
                }
            }
            if ids.is_empty() {
                first_failure = Some(first_failure.map_or(offset, |f: usize| f.min(offset)));
            }
            by_start.insert(offset, ids);
        }

        let mut start_tokens = BTreeSet::new();
        let mut end_tokens = BTreeSet::new();
        for id in 0..tokens.len() {
            let next = next_offset[id];
            if tokens[id].start == first_offset {
                start_tokens.insert(id);
            }
            if next >= input.len() {
                end_tokens.insert(id);
            } else if let Some(succ) = by_start.get(&next) {
                for &s in succ {
                    tokens[id].following.insert(s);
                    tokens[s].preceding.insert(id);
                }
            }
        }
        RawScan {
            graph: LexicalAnalysisGraph {
                input: input.to_owned(),
                tokens,
                start_tokens,
                end_tokens,
                first_offset,
            },
            first_failure,
        }
    }
}

pub struct RawScan {
    pub graph: LexicalAnalysisGraph,
    pub first_failure: Option<usize>,
}

/// Keeps only the tokens that lie on some start-to-end path and renumbers
/// them in position order.
pub fn prune(g: LexicalAnalysisGraph) -> LexicalAnalysisGraph {
    let reach = |seeds: &BTreeSet<TokenId>, next: &dyn Fn(&Token) -> &BTreeSet<TokenId>| {
        let mut seen = vec![false; g.tokens.len()];
        let mut stack: Vec<TokenId> = seeds.iter().copied().collect();
        while let Some(t) = stack.pop() {
            if std::mem::replace(&mut seen[t], true) {
                continue;
            }
            stack.extend(next(&g.tokens[t]).iter().copied().filter(|&s| !seen[s]));
        }
        seen
    };
    let forward = reach(&g.start_tokens, &|t| &t.following);
    let backward = reach(&g.end_tokens, &|t| &t.preceding);

    let mut keep: Vec<TokenId> = (0..g.tokens.len())
        .filter(|&t| forward[t] && backward[t])
        .collect();
    keep.sort_by_key(|&t| (g.tokens[t].start, g.tokens[t].end, t));
    let mut remap = vec![usize::MAX; g.tokens.len()];
    for (new, &old) in keep.iter().enumerate() {
        remap[old] = new;
    }
    let map_set = |set: &BTreeSet<TokenId>| -> BTreeSet<TokenId> {
        set.iter()
            .filter(|&&t| remap[t] != usize::MAX)
            .map(|&t| remap[t])
            .collect()
    };
    let tokens = keep
        .iter()
        .enumerate()
        .map(|(new, &old)| {
            let t = &g.tokens[old];
            Token {
                id: new,
                kind: t.kind.clone(),
                lexeme: t.lexeme.clone(),
                start: t.start,
                end: t.end,
                following: map_set(&t.following),
                preceding: map_set(&t.preceding),
            }
        })
        .collect();
    LexicalAnalysisGraph {
        start_tokens: map_set(&g.start_tokens),
        end_tokens: map_set(&g.end_tokens),
        input: g.input,
        tokens,
        first_offset: g.first_offset,
    }
}

impl LexicalAnalysisGraph {
    pub fn input_length(&self) -> usize {
        self.input.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Distinct token start offsets, ascending.
    pub fn positions(&self) -> BTreeSet<usize> {
        self.tokens.iter().map(|t| t.start).collect()
    }

    /// Builds a graph from explicit token-type sequences, one per
    /// alternative path, laid out over a synthetic input with one byte per
    /// position. Mainly useful for tests that need a graph without a lexer.
    pub fn from_sequence(types: &[&str]) -> LexicalAnalysisGraph {
        let input: String = "x".repeat(types.len());
        let tokens: Vec<Token> = types
            .iter()
            .enumerate()
            .map(|(i, ty)| Token {
                id: i,
                kind: (*ty).to_owned(),
                lexeme: "x".into(),
                start: i,
                end: i + 1,
                following: if i + 1 < types.len() {
                    BTreeSet::from([i + 1])
                } else {
                    BTreeSet::new()
                },
                preceding: if i > 0 {
                    BTreeSet::from([i - 1])
                } else {
                    BTreeSet::new()
                },
            })
            .collect();
        let n = tokens.len();
        LexicalAnalysisGraph {
            input,
            tokens,
            start_tokens: if n > 0 { BTreeSet::from([0]) } else { BTreeSet::new() },
            end_tokens: if n > 0 { BTreeSet::from([n - 1]) } else { BTreeSet::new() },
            first_offset: 0,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "input_length": self.input_length(),
            "tokens": self.tokens,
            "start_tokens": self.start_tokens,
            "end_tokens": self.end_tokens,
        })
    }

    /// DOT rendering: one ellipse per token, edges along `following` links.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph lexical {\n");
        if !self.tokens.is_empty() {
            out.push_str("  rankdir=LR;\n");
        }
        for t in &self.tokens {
            let _ = writeln!(
                out,
                "  t{} [shape=ellipse, label=\"{}\\n{}\"];",
                t.id,
                escape(&t.kind),
                escape(&t.lexeme)
            );
        }
        for t in &self.tokens {
            for f in &t.following {
                let _ = writeln!(out, "  t{} -> t{};", t.id, f);
            }
        }
        out.push_str("}\n");
        out
    }
}

pub(crate) fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
