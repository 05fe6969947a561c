//! Context-free grammars: the `LHS ::= RHS...` file format, nullable set,
//! SELECT sets and the size metrics used by the handle bound.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// Index of a symbol in the grammar vocabulary.
pub type SymbolId = usize;

/// Names that may never be used as grammar symbols.
pub const RESERVED: &[&str] = &["::=", "ε"];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GrammarError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("grammar has no productions")]
    Empty,
    #[error("line {line}: `{name}` is a reserved name")]
    Reserved { line: usize, name: String },
    #[error("initial symbol `{0}` derives no nonempty string")]
    Degenerate(String),
    #[error("symbol `{0}` is neither defined by a production nor a declared terminal")]
    Undefined(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SymbolKind {
    Terminal,
    Nonterminal,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymbolType {
    pub name: String,
    pub kind: SymbolKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Production {
    /// Position of the production in the source file; survives preparation.
    pub id: usize,
    pub left: SymbolId,
    pub right: Vec<SymbolId>,
}

#[derive(Debug, Clone)]
pub struct Grammar {
    symbols: Vec<SymbolType>,
    by_name: HashMap<String, SymbolId>,
    productions: Vec<Production>,
    initial: SymbolId,
    declared_terminals: Option<BTreeSet<String>>,
    nullable: BTreeSet<SymbolId>,
    /// SELECT set per entry of `productions`.
    select: Vec<BTreeSet<SymbolId>>,
    prepared: bool,
}

impl Grammar {
    /// Parses a grammar file. The left side of the first production is the
    /// initial symbol; every symbol that never appears on a left side is a
    /// terminal.
    pub fn parse(text: &str) -> Result<Grammar, GrammarError> {
        let mut raw: Vec<(usize, String, Vec<String>)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let line = match line.find('#') {
                Some(i) => &line[..i],
                None => line,
            };
            if line.trim().is_empty() {
                continue;
            }
            let Some((lhs, rhs)) = line.split_once("::=") else {
                return Err(GrammarError::Syntax {
                    line: line_no,
                    message: "expected `LHS ::= RHS...`".into(),
                });
            };
            let lhs_parts: Vec<&str> = lhs.split_whitespace().collect();
            let lhs = match lhs_parts.as_slice() {
                [single] => *single,
                [] => {
                    return Err(GrammarError::Syntax {
                        line: line_no,
                        message: "missing left-hand side".into(),
                    })
                }
                _ => {
                    return Err(GrammarError::Syntax {
                        line: line_no,
                        message: "left-hand side must be a single symbol".into(),
                    })
                }
            };
            let rhs: Vec<String> = rhs.split_whitespace().map(str::to_owned).collect();
            for name in std::iter::once(lhs).chain(rhs.iter().map(String::as_str)) {
                if RESERVED.contains(&name) {
                    return Err(GrammarError::Reserved {
                        line: line_no,
                        name: name.to_owned(),
                    });
                }
            }
            raw.push((line_no, lhs.to_owned(), rhs));
        }
        if raw.is_empty() {
            return Err(GrammarError::Empty);
        }

        let nonterminals: BTreeSet<&str> = raw.iter().map(|(_, l, _)| l.as_str()).collect();
        let mut symbols = Vec::new();
        let mut by_name = HashMap::new();
        let mut intern = |name: &str| -> SymbolId {
            if let Some(&id) = by_name.get(name) {
                return id;
            }
            let kind = if nonterminals.contains(name) {
                SymbolKind::Nonterminal
            } else {
                SymbolKind::Terminal
            };
            symbols.push(SymbolType {
                name: name.to_owned(),
                kind,
            });
            by_name.insert(name.to_owned(), symbols.len() - 1);
            symbols.len() - 1
        };
        let mut productions = Vec::with_capacity(raw.len());
        for (id, (_, lhs, rhs)) in raw.iter().enumerate() {
            let left = intern(lhs);
            let right = rhs.iter().map(|s| intern(s)).collect();
            productions.push(Production { id, left, right });
        }
        let initial = productions[0].left;
        Ok(Grammar {
            symbols,
            by_name,
            productions,
            initial,
            declared_terminals: None,
            nullable: BTreeSet::new(),
            select: Vec::new(),
            prepared: false,
        })
    }

    /// Restricts terminals to the given names (normally the token types of
    /// the lexical specification). Checked by [`Grammar::prepare`].
    pub fn declare_terminals<I, S>(&mut self, names: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.declared_terminals = Some(names.into_iter().map(Into::into).collect());
    }

    /// Computes the least nullable set and removes empty productions from the
    /// retained list. Calling it again returns the same set.
    pub fn compute_nullable(&mut self) -> BTreeSet<SymbolId> {
        let mut nullable = self.nullable.clone();
        for p in &self.productions {
            if p.right.is_empty() {
                nullable.insert(p.left);
            }
        }
        loop {
            let mut changed = false;
            for p in &self.productions {
                if !nullable.contains(&p.left) && p.right.iter().all(|s| nullable.contains(s)) {
                    nullable.insert(p.left);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        self.productions.retain(|p| !p.right.is_empty());
        self.nullable = nullable.clone();
        nullable
    }

    /// Computes SELECT(p) = FIRST(p.right) for every retained production.
    /// Requires the nullable set.
    pub fn compute_select_sets(&mut self) -> BTreeMap<usize, BTreeSet<SymbolId>> {
        let mut first: Vec<BTreeSet<SymbolId>> = vec![BTreeSet::new(); self.symbols.len()];
        for (id, sym) in self.symbols.iter().enumerate() {
            if sym.kind == SymbolKind::Terminal {
                first[id].insert(id);
            }
        }
        loop {
            let mut changed = false;
            for p in &self.productions {
                let add = self.first_of_sequence(&p.right, &first);
                let entry = &mut first[p.left];
                let before = entry.len();
                entry.extend(add);
                changed |= entry.len() != before;
            }
            if !changed {
                break;
            }
        }
        self.select = self
            .productions
            .iter()
            .map(|p| self.first_of_sequence(&p.right, &first))
            .collect();
        self.productions
            .iter()
            .zip(&self.select)
            .map(|(p, s)| (p.id, s.clone()))
            .collect()
    }

    fn first_of_sequence(&self, seq: &[SymbolId], first: &[BTreeSet<SymbolId>]) -> BTreeSet<SymbolId> {
        let mut out = BTreeSet::new();
        for &s in seq {
            out.extend(first[s].iter().copied());
            if !self.nullable.contains(&s) {
                break;
            }
        }
        out
    }

    /// Computes the nullable set, the SELECT sets and the metrics, and checks
    /// that the grammar can derive some nonempty sentence.
    pub fn prepare(mut self) -> Result<Grammar, GrammarError> {
        if let Some(declared) = &self.declared_terminals {
            for sym in &self.symbols {
                if sym.kind == SymbolKind::Terminal && !declared.contains(&sym.name) {
                    return Err(GrammarError::Undefined(sym.name.clone()));
                }
            }
        }
        self.compute_nullable();
        self.compute_select_sets();
        if !self.derives_nonempty()[self.initial] {
            return Err(GrammarError::Degenerate(self.name(self.initial).to_owned()));
        }
        self.prepared = true;
        Ok(self)
    }

    /// Symbols that derive at least one nonempty terminal string.
    pub fn derives_nonempty(&self) -> Vec<bool> {
        let n = self.symbols.len();
        let mut productive: Vec<bool> = (0..n)
            .map(|i| self.symbols[i].kind == SymbolKind::Terminal || self.nullable.contains(&i))
            .collect();
        let mut nonempty: Vec<bool> = (0..n)
            .map(|i| self.symbols[i].kind == SymbolKind::Terminal)
            .collect();
        loop {
            let mut changed = false;
            for p in &self.productions {
                if p.right.iter().all(|&s| productive[s]) {
                    if !productive[p.left] {
                        productive[p.left] = true;
                        changed = true;
                    }
                    if !nonempty[p.left] && p.right.iter().any(|&s| nonempty[s]) {
                        nonempty[p.left] = true;
                        changed = true;
                    }
                }
            }
            if !changed {
                return nonempty;
            }
        }
    }

    pub fn is_prepared(&self) -> bool {
        self.prepared
    }

    pub fn symbols(&self) -> &[SymbolType] {
        &self.symbols
    }

    pub fn symbol(&self, id: SymbolId) -> &SymbolType {
        &self.symbols[id]
    }

    pub fn name(&self, id: SymbolId) -> &str {
        &self.symbols[id].name
    }

    pub fn lookup(&self, name: &str) -> Option<SymbolId> {
        self.by_name.get(name).copied()
    }

    pub fn is_terminal(&self, id: SymbolId) -> bool {
        self.symbols[id].kind == SymbolKind::Terminal
    }

    pub fn initial(&self) -> SymbolId {
        self.initial
    }

    /// Retained productions (all productions before preparation).
    pub fn productions(&self) -> &[Production] {
        &self.productions
    }

    pub fn nullable(&self) -> &BTreeSet<SymbolId> {
        &self.nullable
    }

    pub fn is_nullable(&self, id: SymbolId) -> bool {
        self.nullable.contains(&id)
    }

    /// SELECT set of the production at `index` in [`Grammar::productions`].
    pub fn select(&self, index: usize) -> &BTreeSet<SymbolId> {
        &self.select[index]
    }

    pub fn terminals(&self) -> impl Iterator<Item = SymbolId> + '_ {
        (0..self.symbols.len()).filter(|&i| self.is_terminal(i))
    }

    pub fn nonterminals(&self) -> impl Iterator<Item = SymbolId> + '_ {
        (0..self.symbols.len()).filter(|&i| !self.is_terminal(i))
    }

    /// Sum of right-side lengths over retained productions (`d`).
    pub fn dimension(&self) -> usize {
        self.productions.iter().map(|p| p.right.len()).sum()
    }

    /// Longest right side (`l`).
    pub fn max_rhs_len(&self) -> usize {
        self.productions.iter().map(|p| p.right.len()).max().unwrap_or(0)
    }

    /// Number of terminal symbols (`s`).
    pub fn terminal_count(&self) -> usize {
        self.terminals().count()
    }

    pub fn display_production(&self, p: &Production) -> String {
        let mut out = format!("{} ::=", self.name(p.left));
        for &s in &p.right {
            out.push(' ');
            out.push_str(self.name(s));
        }
        out
    }

    pub fn stats(&self) -> GrammarStats {
        let names = |set: &BTreeSet<SymbolId>| {
            let mut v: Vec<String> = set.iter().map(|&s| self.name(s).to_owned()).collect();
            v.sort();
            v
        };
        GrammarStats {
            initial: self.name(self.initial).to_owned(),
            nullable: names(&self.nullable),
            productions: self
                .productions
                .iter()
                .enumerate()
                .map(|(i, p)| ProductionStats {
                    id: p.id,
                    production: self.display_production(p),
                    select: self.select.get(i).map(&names).unwrap_or_default(),
                })
                .collect(),
            dimension: self.dimension(),
            max_rhs_len: self.max_rhs_len(),
            terminal_count: self.terminal_count(),
        }
    }
}

impl fmt::Display for Grammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.productions {
            writeln!(f, "{}", self.display_production(p))?;
        }
        Ok(())
    }
}

/// Serializable summary of a prepared grammar.
#[derive(Debug, Clone, Serialize)]
pub struct GrammarStats {
    pub initial: String,
    pub nullable: Vec<String>,
    pub productions: Vec<ProductionStats>,
    pub dimension: usize,
    pub max_rhs_len: usize,
    pub terminal_count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProductionStats {
    pub id: usize,
    pub production: String,
    pub select: Vec<String>,
}
