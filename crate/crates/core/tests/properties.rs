mod common;

use std::collections::{BTreeSet, HashSet};

use common::{random_case, random_grammar_text, rng};
use fence::forest::{count_trees, enumerate_trees, validate_tree};
use fence::grammar::SymbolId;
use fence::lexer::{parse_lex_spec, Scanner};
use fence::oracle::{cross_check, enumerate_token_paths, Caps};
use fence::parser::{handle_bound, parse, parse_with_order, ParseGraph, PoolOrder};
use fence::Grammar;
use proptest::prelude::*;

/// Terminals that begin some sentential form reachable from `form` in at
/// most `steps` leftmost rewrites.
fn brute_first(g: &Grammar, form: &[SymbolId], steps: usize) -> BTreeSet<SymbolId> {
    let keep = steps + 1;
    let mut found = BTreeSet::new();
    let mut seen: HashSet<Vec<SymbolId>> = HashSet::new();
    let mut level = vec![form.iter().copied().take(keep).collect::<Vec<_>>()];
    for step in 0..=steps {
        let mut next = Vec::new();
        for f in level {
            if !seen.insert(f.clone()) {
                continue;
            }
            let Some(&head) = f.first() else { continue };
            if g.is_terminal(head) {
                found.insert(head);
                continue;
            }
            if step == steps {
                continue;
            }
            let mut rewrites: Vec<Vec<SymbolId>> = g
                .productions()
                .iter()
                .filter(|p| p.left == head)
                .map(|p| p.right.clone())
                .collect();
            if g.is_nullable(head) {
                rewrites.push(Vec::new());
            }
            for rhs in rewrites {
                let mut nf = rhs;
                nf.extend_from_slice(&f[1..]);
                nf.truncate(keep);
                next.push(nf);
            }
        }
        level = next;
    }
    found
}

fn canonical(pg: &ParseGraph) -> BTreeSet<String> {
    let label = |i: usize| {
        let n = &pg.nodes[i];
        format!("{}@{}-{}", n.symbol, n.start, n.end)
    };
    pg.nodes
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let mut ds: Vec<String> = n
                .derivations
                .iter()
                .map(|d| {
                    d.iter()
                        .map(|c| match c {
                            fence::parser::ParseChild::Node(c) => label(*c),
                            fence::parser::ParseChild::Epsilon(s) => format!("ε:{s}"),
                        })
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect();
            ds.sort();
            format!("{} <- [{}] root={}", label(i), ds.join(" | "), pg.roots.contains(&i))
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn select_matches_bounded_derivations(seed in any::<u64>()) {
        let mut r = rng(seed);
        let text = random_grammar_text(&mut r, 5);
        let Ok(g) = Grammar::parse(&text).unwrap().prepare() else { return Ok(()) };
        for (i, p) in g.productions().iter().enumerate() {
            prop_assert_eq!(g.select(i), &brute_first(&g, &p.right, 8), "{}", g.display_production(p));
        }
    }

    #[test]
    fn nullable_is_idempotent_closed_and_select_nonempty(seed in any::<u64>()) {
        let mut r = rng(seed);
        let text = random_grammar_text(&mut r, 4);
        let mut g = Grammar::parse(&text).unwrap();
        let first = g.compute_nullable();
        prop_assert_eq!(g.compute_nullable(), first.clone());
        for p in g.productions() {
            if p.right.iter().all(|s| first.contains(s)) {
                prop_assert!(first.contains(&p.left));
            }
        }
        if let Ok(g) = Grammar::parse(&text).unwrap().prepare() {
            let nonempty = g.derives_nonempty();
            for (i, p) in g.productions().iter().enumerate() {
                prop_assert!(!p.right.is_empty());
                let productive = p.right.iter().all(|&s| nonempty[s] || g.is_nullable(s))
                    && p.right.iter().any(|&s| nonempty[s]);
                if productive {
                    prop_assert!(!g.select(i).is_empty());
                }
                prop_assert!(g.select(i).iter().all(|&t| g.is_terminal(t)));
            }
            prop_assert_eq!(g.dimension(), g.productions().iter().map(|p| p.right.len()).sum::<usize>());
        }
    }

    #[test]
    fn lexer_paths_reconstruct_input(input in "[ab. ]{1,12}") {
        let specs = parse_lex_spec("a+ A\n[ab]+ W\nab AB\nb B\n\\. Dot\na\\.b Q").unwrap();
        let sc = Scanner::new(specs, None).unwrap();
        let Ok(g) = sc.scan(&input) else { return Ok(()) };
        prop_assert_eq!(&g, &sc.scan(&input).unwrap());
        for t in &g.tokens {
            prop_assert!(t.end > t.start);
            prop_assert_eq!(&input[t.start..t.end], t.lexeme.as_str());
        }
        let paths = enumerate_token_paths(&g, 10_000);
        let mut on_path = BTreeSet::new();
        for p in &paths.paths {
            let mut rebuilt = input[..g.first_offset].to_string();
            for (i, &t) in p.iter().enumerate() {
                let tok = &g.tokens[t];
                rebuilt.push_str(&tok.lexeme);
                let gap_end = p.get(i + 1).map_or(input.len(), |&n| g.tokens[n].start);
                rebuilt.push_str(&input[tok.end..gap_end]);
                prop_assert!(input[tok.end..gap_end].chars().all(|c| c == ' '));
            }
            prop_assert_eq!(&rebuilt, &input);
            on_path.extend(p.iter().copied());
        }
        prop_assert_eq!(on_path.len(), g.tokens.len());
    }

    #[test]
    fn fence_agrees_with_oracle(seed in any::<u64>()) {
        let mut r = rng(seed);
        let case = random_case(&mut r);
        let report = cross_check("prop", &case.graph, &case.grammar, Caps::default());
        prop_assert!(report.matched, "{}\n{}\n{}\n{}", report.detail, case.grammar_text, case.lex_text, case.input);
        prop_assert!(
            report.handles_created <= handle_bound(case.graph.positions().len(), &case.grammar),
            "handle bound exceeded: {}", report.handles_created
        );
    }

    #[test]
    fn pool_order_does_not_matter(seed in any::<u64>()) {
        let mut r = rng(seed);
        let case = random_case(&mut r);
        let (lifo, a) = parse_with_order(&case.graph, &case.grammar, PoolOrder::Lifo);
        let (fifo, b) = parse_with_order(&case.graph, &case.grammar, PoolOrder::Fifo);
        prop_assert_eq!(canonical(&lifo), canonical(&fifo));
        prop_assert_eq!(a.handles_created, b.handles_created);
        prop_assert_eq!(a.pool_entries_processed, b.pool_entries_processed);
    }

    #[test]
    fn enumerated_trees_are_valid_and_counted(seed in any::<u64>()) {
        let mut r = rng(seed);
        let case = random_case(&mut r);
        let (pg, _) = parse(&case.graph, &case.grammar);
        let trees = enumerate_trees(&pg, 500);
        for t in &trees {
            prop_assert!(validate_tree(t, &case.grammar, &case.graph).is_ok(), "{}", t);
            let text: String = t.frontier().iter().map(|l| match l {
                fence::forest::ParseTree::Leaf { lexeme, .. } => lexeme.as_str(),
                _ => "",
            }).collect();
            prop_assert_eq!(&text, &case.input);
        }
        // duplicate productions yield identical-looking trees
        let rules: BTreeSet<String> = case.grammar_text.lines().map(str::to_owned).collect();
        if rules.len() == case.grammar_text.lines().count() {
            let distinct: BTreeSet<String> = trees.iter().map(|t| format!("{t:?}")).collect();
            prop_assert_eq!(distinct.len(), trees.len());
        }
        let count = count_trees(&pg, 1_000_000);
        if trees.len() < 500 {
            prop_assert_eq!(count.count, trees.len() as u64);
        }
        for &r in &pg.roots {
            let n = &pg.nodes[r];
            prop_assert_eq!(n.symbol.as_str(), case.grammar.name(case.grammar.initial()));
        }
        prop_assert!(pg.roots.len() <= 1);
    }
}

#[test]
fn cyclic_grammars_terminate() {
    for text in [
        "S ::= S\nS ::= a",
        "S ::= A\nA ::= S\nA ::= a",
        "S ::= S S\nS ::= a\nS ::=",
        "S ::= A S\nA ::=\nS ::= a",
    ] {
        let g = Grammar::parse(text).unwrap().prepare().unwrap();
        for n in 1..5 {
            let seq = vec!["a"; n];
            let lg = common::sequence_graph(&seq);
            let report = cross_check(text, &lg, &g, Caps::default());
            assert!(report.matched, "{text} x{n}: {}", report.detail);
        }
    }
}
