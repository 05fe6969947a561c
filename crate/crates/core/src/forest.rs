//! Reading trees back out of a packed parse graph.
//!
//! A symbol that derives itself over the same span makes the graph cyclic.
//! Counting and enumeration only consider trees in which no packed symbol
//! occurs twice on a root-to-leaf path; a branch that revisits one is
//! dead. Since children tile their parent, such a revisit can only happen
//! along a chain of symbols that all cover the same span, so the path
//! state is reset whenever the span shrinks.

use std::collections::{BTreeSet, HashMap};
use std::fmt::{self, Write as _};

use serde_json::json;

use crate::grammar::Grammar;
use crate::lexer::{escape, LexicalAnalysisGraph, TokenId};
use crate::parser::{ExtendedGraph, ParseChild, ParseGraph};

/// Result of [`count_trees`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TreeCount {
    /// Exact count, or `cap` when saturated.
    pub count: u64,
    pub saturated: bool,
    pub cyclic: bool,
}

impl fmt::Display for TreeCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.saturated {
            write!(f, "≥{}", self.count)?;
        } else {
            write!(f, "{}", self.count)?;
        }
        if self.cyclic {
            write!(f, " (cyclic)")?;
        }
        Ok(())
    }
}

/// Counts the acyclic trees of every root, saturating at `cap`.
pub fn count_trees(pg: &ParseGraph, cap: u64) -> TreeCount {
    assert!(cap >= 1, "cap must be at least 1");
    let mut counter = Counter {
        pg,
        cap,
        memo: vec![None; pg.nodes.len()],
    };
    // children of wider symbols need the narrower ones first
    let mut order: Vec<usize> = (0..pg.nodes.len()).collect();
    order.sort_by_key(|&n| pg.nodes[n].end - pg.nodes[n].start);
    for n in order {
        counter.fill(n);
    }
    let mut total = 0;
    for &r in &pg.roots {
        total = (total + counter.memo[r].unwrap_or(0)).min(cap);
    }
    TreeCount {
        count: total,
        saturated: total >= cap,
        cyclic: pg.cyclic,
    }
}

struct Counter<'a> {
    pg: &'a ParseGraph,
    cap: u64,
    memo: Vec<Option<u64>>,
}

impl Counter<'_> {
    fn fill(&mut self, n: usize) {
        if self.memo[n].is_none() {
            let mut spine = vec![n];
            let c = self.count(n, &mut spine);
            self.memo[n] = Some(c);
        }
    }

    fn count(&mut self, n: usize, spine: &mut Vec<usize>) -> u64 {
        let node = &self.pg.nodes[n];
        if node.derivations.is_empty() {
            return u64::from(node.token.is_some());
        }
        let span = (node.start, node.end);
        let mut sum = 0u64;
        for derivation in &node.derivations {
            let mut product = 1u64;
            for child in derivation {
                let Some(c) = child.node() else { continue };
                let cn = &self.pg.nodes[c];
                let k = if (cn.start, cn.end) != span {
                    self.memo[c].expect("narrower symbols are counted first")
                } else if spine.contains(&c) {
                    0
                } else {
                    spine.push(c);
                    let k = self.count(c, spine);
                    spine.pop();
                    k
                };
                product = product.saturating_mul(k).min(self.cap);
                if product == 0 {
                    break;
                }
            }
            sum = (sum + product).min(self.cap);
        }
        sum
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseTree {
    Node {
        symbol: String,
        children: Vec<ParseTree>,
    },
    Leaf {
        symbol: String,
        lexeme: String,
        token: Option<TokenId>,
        start: usize,
        end: usize,
    },
    /// A nullable symbol skipped at zero width.
    Epsilon { symbol: String },
}

impl ParseTree {
    pub fn label(&self) -> String {
        match self {
            ParseTree::Node { symbol, .. } | ParseTree::Leaf { symbol, .. } => symbol.clone(),
            ParseTree::Epsilon { symbol } => format!("ε:{symbol}"),
        }
    }

    /// Grammar symbol this subtree stands for.
    pub fn symbol(&self) -> &str {
        match self {
            ParseTree::Node { symbol, .. }
            | ParseTree::Leaf { symbol, .. }
            | ParseTree::Epsilon { symbol } => symbol,
        }
    }

    pub fn children(&self) -> &[ParseTree] {
        match self {
            ParseTree::Node { children, .. } => children,
            _ => &[],
        }
    }

    /// Leaf tokens in order.
    pub fn frontier(&self) -> Vec<&ParseTree> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(t) = stack.pop() {
            match t {
                ParseTree::Leaf { .. } => out.push(t),
                ParseTree::Node { children, .. } => stack.extend(children.iter().rev()),
                ParseTree::Epsilon { .. } => {}
            }
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            ParseTree::Node { children, .. } => json!({
                "label": self.label(),
                "children": children.iter().map(ParseTree::to_json).collect::<Vec<_>>(),
            }),
            ParseTree::Leaf { lexeme, .. } => json!({
                "label": self.label(),
                "children": [],
                "lexeme": lexeme,
            }),
            ParseTree::Epsilon { .. } => json!({
                "label": self.label(),
                "children": [],
            }),
        }
    }
}

impl fmt::Display for ParseTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseTree::Node { symbol, children } => {
                write!(f, "{symbol}(")?;
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
            ParseTree::Leaf { symbol, lexeme, .. } => write!(f, "{symbol} {lexeme:?}"),
            ParseTree::Epsilon { symbol } => write!(f, "ε:{symbol}"),
        }
    }
}

/// Returns at most `limit` acyclic trees. Roots come in order, and within a
/// symbol derivations are taken in creation order, children varying
/// rightmost-fastest.
pub fn enumerate_trees(pg: &ParseGraph, limit: usize) -> Vec<ParseTree> {
    assert!(limit >= 1, "limit must be at least 1");
    let mut e = Enumerator {
        pg,
        limit,
        memo: HashMap::new(),
    };
    let mut out = Vec::new();
    for &r in &pg.roots {
        if out.len() >= limit {
            break;
        }
        let trees = e.trees(r, &mut vec![r]);
        out.extend(trees.into_iter().take(limit - out.len()));
    }
    out
}

struct Enumerator<'a> {
    pg: &'a ParseGraph,
    limit: usize,
    /// Trees of a symbol reached from a narrower-span parent.
    memo: HashMap<usize, Vec<ParseTree>>,
}

impl Enumerator<'_> {
    fn trees(&mut self, n: usize, spine: &mut Vec<usize>) -> Vec<ParseTree> {
        let node = &self.pg.nodes[n];
        if node.derivations.is_empty() {
            return vec![ParseTree::Leaf {
                symbol: node.symbol.clone(),
                lexeme: node.lexeme.clone().unwrap_or_default(),
                token: node.token,
                start: node.start,
                end: node.end,
            }];
        }
        let span = (node.start, node.end);
        let mut out = Vec::new();
        for derivation in &node.derivations {
            let mut options: Vec<Vec<ParseTree>> = Vec::with_capacity(derivation.len());
            for child in derivation {
                let opts = match child {
                    ParseChild::Epsilon(s) => vec![ParseTree::Epsilon { symbol: s.clone() }],
                    ParseChild::Node(c) => {
                        let cn = &self.pg.nodes[*c];
                        if (cn.start, cn.end) != span {
                            self.narrow(*c)
                        } else if spine.contains(c) {
                            Vec::new()
                        } else {
                            spine.push(*c);
                            let t = self.trees(*c, spine);
                            spine.pop();
                            t
                        }
                    }
                };
                if opts.is_empty() {
                    break;
                }
                options.push(opts);
            }
            if options.len() < derivation.len() {
                continue;
            }
            // odometer over the options, last child fastest
            let mut idx = vec![0usize; options.len()];
            'product: loop {
                if out.len() >= self.limit {
                    return out;
                }
                out.push(ParseTree::Node {
                    symbol: node.symbol.clone(),
                    children: idx.iter().zip(&options).map(|(&i, o)| o[i].clone()).collect(),
                });
                for k in (0..idx.len()).rev() {
                    idx[k] += 1;
                    if idx[k] < options[k].len() {
                        continue 'product;
                    }
                    idx[k] = 0;
                }
                break;
            }
        }
        out
    }

    fn narrow(&mut self, n: usize) -> Vec<ParseTree> {
        if let Some(t) = self.memo.get(&n) {
            return t.clone();
        }
        let t = self.trees(n, &mut vec![n]);
        self.memo.insert(n, t.clone());
        t
    }
}

/// Checks that `tree` is a derivation of `grammar` whose frontier is a
/// start-to-end path of `lexical`.
pub fn validate_tree(tree: &ParseTree, grammar: &Grammar, lexical: &LexicalAnalysisGraph) -> Result<(), String> {
    if tree.symbol() != grammar.name(grammar.initial()) {
        return Err(format!("root `{}` is not the initial symbol", tree.symbol()));
    }
    check_node(tree, grammar)?;

    let mut frontier = Vec::new();
    for leaf in tree.frontier() {
        let ParseTree::Leaf {
            symbol,
            lexeme,
            token: Some(id),
            ..
        } = leaf
        else {
            return Err("leaf without a token".into());
        };
        let token = lexical
            .tokens
            .get(*id)
            .ok_or_else(|| format!("unknown token {id}"))?;
        if &token.kind != symbol || &token.lexeme != lexeme {
            return Err(format!("leaf {leaf} does not match token {id}"));
        }
        frontier.push(*id);
    }
    let (Some(first), Some(last)) = (frontier.first(), frontier.last()) else {
        return Err("empty frontier".into());
    };
    if !lexical.start_tokens.contains(first) {
        return Err(format!("token {first} is not a start token"));
    }
    if !lexical.end_tokens.contains(last) {
        return Err(format!("token {last} is not an end token"));
    }
    for pair in frontier.windows(2) {
        if !lexical.tokens[pair[0]].following.contains(&pair[1]) {
            return Err(format!("token {} does not follow token {}", pair[1], pair[0]));
        }
    }
    Ok(())
}

fn check_node(tree: &ParseTree, grammar: &Grammar) -> Result<(), String> {
    match tree {
        ParseTree::Leaf { symbol, .. } => match grammar.lookup(symbol) {
            Some(s) if grammar.is_terminal(s) => Ok(()),
            _ => Err(format!("leaf `{symbol}` is not a terminal")),
        },
        ParseTree::Epsilon { symbol } => match grammar.lookup(symbol) {
            Some(s) if grammar.is_nullable(s) => Ok(()),
            _ => Err(format!("`{symbol}` is not nullable")),
        },
        ParseTree::Node { symbol, children } => {
            let left = grammar
                .lookup(symbol)
                .filter(|&s| !grammar.is_terminal(s))
                .ok_or_else(|| format!("`{symbol}` is not a nonterminal"))?;
            let labels: Vec<Option<usize>> = children.iter().map(|c| grammar.lookup(c.symbol())).collect();
            let matches = grammar.productions().iter().any(|p| {
                p.left == left
                    && p.right.len() == labels.len()
                    && p.right.iter().zip(&labels).all(|(r, l)| Some(*r) == *l)
            });
            if !matches {
                let rhs: Vec<String> = children.iter().map(ParseTree::label).collect();
                return Err(format!("no production {symbol} ::= {}", rhs.join(" ")));
            }
            if children.iter().all(|c| matches!(c, ParseTree::Epsilon { .. })) {
                return Err(format!("`{symbol}` spans nothing"));
            }
            children.iter().try_for_each(|c| check_node(c, grammar))
        }
    }
}

/// Graphviz rendering. Nonterminals are boxes, terminals ellipses, and
/// cores gray circles.
pub trait ToDot {
    fn to_dot(&self) -> String;
}

impl ToDot for LexicalAnalysisGraph {
    fn to_dot(&self) -> String {
        LexicalAnalysisGraph::to_dot(self)
    }
}

impl ToDot for ParseGraph {
    fn to_dot(&self) -> String {
        let mut out = String::from("digraph parse {\n");
        for n in &self.nodes {
            let _ = match &n.lexeme {
                Some(lexeme) => writeln!(
                    out,
                    "  n{} [shape=ellipse, label=\"{}\\n{}\"];",
                    n.id,
                    escape(&n.symbol),
                    escape(lexeme)
                ),
                None => {
                    let peripheries = if self.roots.contains(&n.id) { ", peripheries=2" } else { "" };
                    writeln!(out, "  n{} [shape=box, label=\"{}\"{}];", n.id, escape(&n.symbol), peripheries)
                }
            };
        }
        let mut eps = 0;
        for n in &self.nodes {
            let many = n.derivations.len() > 1;
            for (d, derivation) in n.derivations.iter().enumerate() {
                let attrs = if many {
                    format!(" [label=\"{}\"]", d + 1)
                } else {
                    String::new()
                };
                for child in derivation {
                    match child {
                        ParseChild::Node(c) => {
                            let _ = writeln!(out, "  n{} -> n{}{};", n.id, c, attrs);
                        }
                        ParseChild::Epsilon(s) => {
                            let _ = writeln!(out, "  e{eps} [shape=plaintext, label=\"ε:{}\"];", escape(s));
                            let _ = writeln!(out, "  n{} -> e{}{};", n.id, eps, attrs);
                            eps += 1;
                        }
                    }
                }
            }
        }
        out.push_str("}\n");
        out
    }
}

impl ToDot for ExtendedGraph<'_> {
    fn to_dot(&self) -> String {
        let mut out = String::from("digraph extended {\n  rankdir=LR;\n");
        for c in &self.cores {
            let _ = writeln!(
                out,
                "  c{} [shape=circle, style=filled, fillcolor=gray, label=\"{}\"];",
                c.id, c.position
            );
        }
        for n in &self.nodes {
            let (shape, label) = match n.token {
                Some(t) => {
                    let tok = &self.lexical().tokens[t];
                    ("ellipse", format!("{}\\n{}", escape(&tok.kind), escape(&tok.lexeme)))
                }
                None => (
                    "box",
                    escape(self.grammar().name(n.symbol.expect("nonterminal symbol"))),
                ),
            };
            let _ = writeln!(out, "  s{} [shape={shape}, label=\"{label}\"];", n.id);
            let _ = writeln!(out, "  c{} -> s{};", n.start, n.id);
            let _ = writeln!(out, "  s{} -> c{};", n.id, n.end);
        }
        out.push_str("}\n");
        out
    }
}

/// Tokens used by at least one enumerated tree.
pub fn frontier_tokens(trees: &[ParseTree]) -> BTreeSet<TokenId> {
    trees
        .iter()
        .flat_map(|t| t.frontier())
        .filter_map(|l| match l {
            ParseTree::Leaf { token, .. } => *token,
            _ => None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexer::{parse_lex_spec, Scanner};
    use crate::parser::parse;

    const FIG1: &str = "(-|\\+)?[0-9]+ Integer\n(-|\\+)?[0-9]+\\.[0-9]+ Real\n\\. Point\n\\/ Slash\n\\& Ampersand\n";
    const FIG3: &str = "E ::= A B\nA ::= Ampersand Real Ampersand\nB ::= Slash Integer Point Integer Slash\n";
    const SUM: &str = "E ::= E Plus E\nE ::= Int";

    fn grammar(src: &str) -> Grammar {
        Grammar::parse(src).unwrap().prepare().unwrap()
    }

    fn sum_input(operands: usize) -> LexicalAnalysisGraph {
        let mut seq = vec!["Int"];
        for _ in 1..operands {
            seq.extend(["Plus", "Int"]);
        }
        LexicalAnalysisGraph::from_sequence(&seq)
    }

    fn example() -> (Grammar, LexicalAnalysisGraph, ParseGraph) {
        let g = grammar(FIG3);
        let lg = Scanner::new(parse_lex_spec(FIG1).unwrap(), None)
            .unwrap()
            .scan("&5.2& /25.20/")
            .unwrap();
        let (pg, _) = parse(&lg, &g);
        (g, lg, pg)
    }

    #[test]
    fn counts() {
        let (_, _, pg) = example();
        assert_eq!(count_trees(&pg, 1000).count, 1);
        assert_eq!(count_trees(&ParseGraph::default(), 10).count, 0);

        let g = grammar(SUM);
        let (pg, _) = parse(&sum_input(4), &g);
        assert_eq!(count_trees(&pg, 1000).count, 5);
        let capped = count_trees(&pg, 3);
        assert_eq!((capped.count, capped.saturated), (3, true));
        assert_eq!(capped.to_string(), "≥3");
    }

    #[test]
    fn enumerates_example_tree() {
        let (g, lg, pg) = example();
        let trees = enumerate_trees(&pg, 10);
        assert_eq!(trees.len(), 1);
        assert_eq!(
            trees[0].to_string(),
            r#"E(A(Ampersand "&", Real "5.2", Ampersand "&"), B(Slash "/", Integer "25", Point ".", Integer "20", Slash "/"))"#
        );
        validate_tree(&trees[0], &g, &lg).unwrap();
    }

    #[test]
    fn enumerate_respects_limit() {
        let g = grammar(SUM);
        let (pg, _) = parse(&sum_input(3), &g);
        assert_eq!(enumerate_trees(&pg, 1).len(), 1);
        assert_eq!(count_trees(&pg, 1000).count, 2);
        assert!(enumerate_trees(&ParseGraph::default(), 5).is_empty());
    }

    #[test]
    fn enumeration_is_stable_and_distinct() {
        let g = grammar(SUM);
        let lg = sum_input(5);
        let (pg, _) = parse(&lg, &g);
        let a = enumerate_trees(&pg, 100);
        assert_eq!(a, enumerate_trees(&pg, 100));
        assert_eq!(a.len(), 14);
        let distinct: BTreeSet<String> = a.iter().map(ToString::to_string).collect();
        assert_eq!(distinct.len(), 14);
        for t in &a {
            validate_tree(t, &g, &lg).unwrap();
        }
    }

    #[test]
    fn cyclic_graph_counts_acyclic_trees() {
        let g = grammar("S ::= S\nS ::= a");
        let (pg, _) = parse(&LexicalAnalysisGraph::from_sequence(&["a"]), &g);
        let c = count_trees(&pg, 100);
        assert_eq!((c.count, c.cyclic), (1, true));
        assert_eq!(enumerate_trees(&pg, 10).len(), 1);
    }

    #[test]
    fn epsilon_leaves() {
        let g = grammar("S ::= a B\nB ::=");
        let lg = LexicalAnalysisGraph::from_sequence(&["a"]);
        let (pg, _) = parse(&lg, &g);
        let trees = enumerate_trees(&pg, 10);
        assert_eq!(trees.len(), 1);
        assert_eq!(trees[0].to_string(), r#"S(a "x", ε:B)"#);
        assert_eq!(trees[0].to_json()["children"][1]["label"], "ε:B");
        validate_tree(&trees[0], &g, &lg).unwrap();
    }

    #[test]
    fn validator_rejects_bad_trees() {
        let (g, lg, _) = example();
        let leaf = |symbol: &str, lexeme: &str, token| ParseTree::Leaf {
            symbol: symbol.into(),
            lexeme: lexeme.into(),
            token: Some(token),
            start: 0,
            end: 0,
        };
        let bad = ParseTree::Node {
            symbol: "A".into(),
            children: vec![leaf("Ampersand", "&", 0)],
        };
        assert!(validate_tree(&bad, &g, &lg).is_err());
        let bad = ParseTree::Node {
            symbol: "E".into(),
            children: vec![leaf("Ampersand", "&", 0)],
        };
        assert!(validate_tree(&bad, &g, &lg).unwrap_err().contains("no production"));
    }

    #[test]
    fn dot_export() {
        let (_, _, pg) = example();
        let dot = pg.to_dot();
        assert_eq!(dot.matches("shape=box").count(), 3);
        assert_eq!(dot.matches("shape=ellipse").count(), 8);
        assert_eq!(ParseGraph::default().to_dot(), "digraph parse {\n}\n");

        let g = grammar("S ::= a");
        let lg = LexicalAnalysisGraph::from_sequence(&["a"]);
        let single = LexicalAnalysisGraph::to_dot(&lg);
        assert_eq!(single.matches("[shape=").count(), 1);
        let mut eg = ExtendedGraph::new(&lg, &g);
        eg.initialize_cores();
        eg.run_pool();
        let dot = eg.to_dot();
        assert_eq!(dot.matches("fillcolor=gray").count(), 2);
        assert_eq!(dot.matches("shape=box").count(), 1);
    }

    #[test]
    fn frontier_tokens_of_example() {
        let (_, _, pg) = example();
        let trees = enumerate_trees(&pg, 10);
        assert_eq!(frontier_tokens(&trees), pg.tokens());
    }
}
