//! Brute-force reference: enumerate every token path of a lexical graph and
//! run a plain top-down chart counter on each one. Slow on purpose; it
//! shares no code with the handle-pool parser.

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use crate::forest::count_trees;
use crate::grammar::{Grammar, SymbolId};
use crate::lexer::{LexicalAnalysisGraph, Token, TokenId};
use crate::parser::parse;

/// Token ids along one start-to-end path.
pub type TokenPath = Vec<TokenId>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathEnumeration {
    pub paths: Vec<TokenPath>,
    pub truncated: bool,
}

/// All start-to-end paths in lexicographic order of token ids, at most
/// `cap` of them.
pub fn enumerate_token_paths(g: &LexicalAnalysisGraph, cap: usize) -> PathEnumeration {
    let mut paths = Vec::new();
    let mut truncated = false;
    let mut current = Vec::new();
    for &s in &g.start_tokens {
        if !walk(g, s, &mut current, &mut paths, cap) {
            truncated = true;
            break;
        }
    }
    PathEnumeration { paths, truncated }
}

fn walk(g: &LexicalAnalysisGraph, t: TokenId, current: &mut Vec<TokenId>, out: &mut Vec<TokenPath>, cap: usize) -> bool {
    current.push(t);
    if g.end_tokens.contains(&t) {
        if out.len() >= cap {
            current.pop();
            return false;
        }
        out.push(current.clone());
    }
    for &f in &g.tokens[t].following {
        if !walk(g, f, current, out, cap) {
            current.pop();
            return false;
        }
    }
    current.pop();
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Reference {
    pub accepted: bool,
    /// Tree count, saturated at the cap.
    pub trees: u64,
    pub saturated: bool,
}

/// Decides whether the initial symbol derives the token types of `path` and
/// counts its derivation trees up to `cap`. Trees in which a symbol occurs
/// inside itself over the same span are not counted; a nullable symbol
/// occupying zero width counts as a single leaf.
pub fn reference_parse(g: &LexicalAnalysisGraph, path: &[TokenId], grammar: &Grammar, cap: u64) -> Reference {
    let types: Option<Vec<SymbolId>> = path
        .iter()
        .map(|&t| {
            grammar
                .lookup(&g.tokens[t].kind)
                .filter(|&s| grammar.is_terminal(s))
        })
        .collect();
    let trees = match types {
        Some(types) if !types.is_empty() => {
            let mut chart = Chart {
                grammar,
                input: &types,
                cap,
                memo: HashMap::new(),
            };
            chart.count(grammar.initial(), 0, types.len(), &mut Vec::new())
        }
        _ => 0,
    };
    Reference {
        accepted: trees > 0,
        trees,
        saturated: trees >= cap,
    }
}

struct Chart<'a> {
    grammar: &'a Grammar,
    input: &'a [SymbolId],
    cap: u64,
    memo: HashMap<(SymbolId, usize, usize), u64>,
}

impl Chart<'_> {
    /// Trees of nonterminal `x` over `input[i..j]`, `i < j`. `spine` holds
    /// the ancestors covering the same span.
    fn count(&mut self, x: SymbolId, i: usize, j: usize, spine: &mut Vec<SymbolId>) -> u64 {
        if spine.contains(&x) {
            return 0;
        }
        let fresh = spine.is_empty();
        if fresh {
            if let Some(&c) = self.memo.get(&(x, i, j)) {
                return c;
            }
        }
        spine.push(x);
        let mut total = 0u64;
        for p in self.grammar.productions() {
            if p.left == x {
                let ways = self.ways(&p.right, i, j, (i, j), spine);
                total = (total + ways).min(self.cap);
            }
        }
        spine.pop();
        if fresh {
            self.memo.insert((x, i, j), total);
        }
        total
    }

    /// Ways for `rhs` to cover exactly `input[i..j]`.
    fn ways(&mut self, rhs: &[SymbolId], i: usize, j: usize, span: (usize, usize), spine: &mut Vec<SymbolId>) -> u64 {
        let Some((&first, rest)) = rhs.split_first() else {
            return u64::from(i == j);
        };
        let mut total = 0u64;
        for m in i..=j {
            let here = if m == i {
                u64::from(self.grammar.is_nullable(first))
            } else if self.grammar.is_terminal(first) {
                u64::from(m == i + 1 && self.input[i] == first)
            } else if (i, m) == span {
                self.count(first, i, m, spine)
            } else {
                self.count(first, i, m, &mut Vec::new())
            };
            if here == 0 {
                continue;
            }
            let after = self.ways(rest, m, j, span, spine);
            total = (total + here.saturating_mul(after).min(self.cap)).min(self.cap);
        }
        total
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Caps {
    pub paths: usize,
    pub trees: u64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            paths: 10_000,
            trees: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CheckReport {
    pub case_id: String,
    #[serde(rename = "match")]
    pub matched: bool,
    pub inconclusive: bool,
    pub detail: String,
    /// Raw differences, empty when both sides agree (capped counts included).
    pub disagreements: Vec<String>,
    pub fence_roots: usize,
    pub fence_trees: u64,
    pub oracle_trees: u64,
    pub total_paths: usize,
    pub accepted_paths: usize,
    pub fence_tokens: BTreeSet<TokenId>,
    pub oracle_tokens: BTreeSet<TokenId>,
    /// Shortest path on which the two engines disagree.
    pub failing_path: Option<Vec<String>>,
    pub handles_created: u64,
}

impl CheckReport {
    pub fn to_json_line(&self) -> String {
        let value = serde_json::to_value(self).expect("report serializes");
        serde_json::to_string(&value).expect("report serializes")
    }
}

/// Compares the handle-pool parser with the per-path reference on root
/// existence, tree counts and surviving tokens.
pub fn cross_check(case_id: &str, g: &LexicalAnalysisGraph, grammar: &Grammar, caps: Caps) -> CheckReport {
    let (pg, stats) = parse(g, grammar);
    let fence = count_trees(&pg, caps.trees);
    let fence_tokens = pg.tokens();

    let paths = enumerate_token_paths(g, caps.paths);
    let mut oracle_trees = 0u64;
    let mut oracle_saturated = false;
    let mut accepted = 0;
    let mut oracle_tokens = BTreeSet::new();
    for path in &paths.paths {
        let r = reference_parse(g, path, grammar, caps.trees);
        if r.accepted {
            accepted += 1;
            oracle_tokens.extend(path.iter().copied());
        }
        oracle_saturated |= r.saturated;
        oracle_trees = (oracle_trees + r.trees).min(caps.trees);
    }
    oracle_saturated |= oracle_trees >= caps.trees;

    let mut problems = Vec::new();
    if pg.roots.is_empty() == (accepted > 0) {
        problems.push(format!(
            "acceptance differs: {} roots, {} accepted paths",
            pg.roots.len(),
            accepted
        ));
    }
    if fence.count != oracle_trees {
        problems.push(format!("tree counts differ: {} vs {}", fence.count, oracle_trees));
    }
    if fence_tokens != oracle_tokens {
        problems.push(format!(
            "surviving tokens differ: {:?} vs {:?}",
            fence_tokens, oracle_tokens
        ));
    }
    let inconclusive = paths.truncated || fence.saturated || oracle_saturated;
    let matched = problems.is_empty();
    let failing_path = if matched || inconclusive {
        None
    } else {
        minimal_failing_path(g, grammar, &paths.paths, caps.trees)
            .map(|p| p.iter().map(|&t| g.tokens[t].kind.clone()).collect())
    };
    let detail = if matched {
        format!("{} accepted of {} paths, {} trees", accepted, paths.paths.len(), fence)
    } else if inconclusive {
        format!("inconclusive (cap reached): {}", problems.join("; "))
    } else {
        problems.join("; ")
    };
    let disagreements = problems;
    CheckReport {
        case_id: case_id.to_owned(),
        matched: matched || inconclusive,
        inconclusive,
        detail,
        disagreements,
        fence_roots: pg.roots.len(),
        fence_trees: fence.count,
        oracle_trees,
        total_paths: paths.paths.len(),
        accepted_paths: accepted,
        fence_tokens,
        oracle_tokens,
        failing_path,
        handles_created: stats.handles_created,
    }
}

/// Shortest path whose single-path parse disagrees with the reference.
fn minimal_failing_path<'p>(
    g: &LexicalAnalysisGraph,
    grammar: &Grammar,
    paths: &'p [TokenPath],
    cap: u64,
) -> Option<&'p TokenPath> {
    let mut by_len: Vec<&TokenPath> = paths.iter().collect();
    by_len.sort_by_key(|p| p.len());
    by_len.into_iter().find(|path| {
        let single = path_graph(g, path);
        let (pg, _) = parse(&single, grammar);
        let reference = reference_parse(g, path, grammar, cap);
        count_trees(&pg, cap).count != reference.trees
    })
}

/// The lexical graph consisting of `path` alone.
pub fn path_graph(g: &LexicalAnalysisGraph, path: &[TokenId]) -> LexicalAnalysisGraph {
    let last = path.len().saturating_sub(1);
    let tokens = path
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let src = &g.tokens[t];
            Token {
                id: i,
                kind: src.kind.clone(),
                lexeme: src.lexeme.clone(),
                start: src.start,
                end: src.end,
                following: if i < last { BTreeSet::from([i + 1]) } else { BTreeSet::new() },
                preceding: if i > 0 { BTreeSet::from([i - 1]) } else { BTreeSet::new() },
            }
        })
        .collect();
    LexicalAnalysisGraph {
        input: g.input.clone(),
        tokens,
        start_tokens: if path.is_empty() { BTreeSet::new() } else { BTreeSet::from([0]) },
        end_tokens: if path.is_empty() { BTreeSet::new() } else { BTreeSet::from([last]) },
        first_offset: g.first_offset,
    }
}
