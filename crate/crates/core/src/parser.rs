//! Handle-pool parser over extended lexical analysis graphs.
//!
//! The lexical graph is first extended with cores, one per distinct token
//! start position plus a last core. Cores store handles, i.e. dotted rules
//! anchored at a start core. A global pool of `(handle, matched symbol)`
//! entries drives the parse: each entry either completes its production
//! (reduction) or moves the handle into the core that follows the matched
//! symbol (shift). Symbols are packed per `(type, start, end)`, and a
//! handle's matched prefix is kept as a set of back links to the handle it
//! was shifted from, so ambiguity never multiplies handles or pool entries.

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use crate::grammar::{Grammar, SymbolId, SymbolKind};
use crate::lexer::{LexicalAnalysisGraph, TokenId};

pub type CoreId = usize;
pub type NodeId = usize;
pub type HandleId = usize;

/// Order in which pool entries are extracted. The final graph does not
/// depend on it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PoolOrder {
    #[default]
    Lifo,
    Fifo,
}

#[derive(Clone, Debug, Default)]
pub struct Core {
    pub id: CoreId,
    /// Input offset this core stands for.
    pub position: usize,
    pub handles: Vec<HandleId>,
    /// Symbols starting at this core.
    pub following: Vec<NodeId>,
    /// Symbols ending at this core.
    pub preceding: Vec<NodeId>,
    handle_index: HashMap<(usize, usize, CoreId), HandleId>,
    waiting: HashMap<SymbolId, Vec<HandleId>>,
    following_by_type: HashMap<SymbolId, Vec<NodeId>>,
}

/// One element of a handle's matched prefix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Child {
    Node(NodeId),
    /// A nullable element skipped at zero width.
    Epsilon(SymbolId),
}

/// The handle was reached from `prev` (one element shorter) by consuming
/// `child`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Link {
    pub prev: HandleId,
    pub child: Child,
}

#[derive(Clone, Debug)]
pub struct Handle {
    /// Index into [`Grammar::productions`].
    pub production: usize,
    /// Dot position: number of right-side elements already matched.
    pub index: usize,
    pub start: CoreId,
    /// Core the handle is stored in.
    pub core: CoreId,
    /// Alternative ways the prefix `rhs[..index]` was matched. Empty only
    /// for handles with `index == 0`.
    pub links: Vec<Link>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PoolEntry {
    pub handle: HandleId,
    /// Symbol matched by `rhs[handle.index]`; starts at the handle's core.
    pub matched: NodeId,
}

/// A completed production: the children are every prefix of `handle`,
/// then `last`, then epsilon placeholders for the nullable suffix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Packed {
    pub handle: HandleId,
    pub last: NodeId,
}

#[derive(Clone, Debug)]
pub struct SymbolNode {
    pub id: NodeId,
    /// `None` for tokens whose type is not a grammar terminal.
    pub symbol: Option<SymbolId>,
    pub start: CoreId,
    pub end: CoreId,
    pub token: Option<TokenId>,
    pub derivations: Vec<Packed>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ParseStats {
    pub handles_created: u64,
    pub pool_entries_processed: u64,
    pub reductions: u64,
    pub cores_created: u64,
    pub peak_pool_size: u64,
    /// Some reachable symbol derives itself over the same span.
    pub cyclic: bool,
}

/// Upper bound on created handles, `n * s * d * (1 + s * l)`, where `n` is
/// the number of distinct token positions of the input.
pub fn handle_bound(positions: usize, grammar: &Grammar) -> u64 {
    let (n, s, d, l) = (
        positions as u64,
        grammar.terminal_count() as u64,
        grammar.dimension() as u64,
        grammar.max_rhs_len() as u64,
    );
    n * s * d * (1 + s * l)
}

/// Lexical graph extended with cores, plus all parsing state.
pub struct ExtendedGraph<'a> {
    grammar: &'a Grammar,
    lexical: &'a LexicalAnalysisGraph,
    pub cores: Vec<Core>,
    pub first_core: CoreId,
    pub last_core: CoreId,
    pub nodes: Vec<SymbolNode>,
    pub handles: Vec<Handle>,
    pub roots: Vec<NodeId>,
    node_index: HashMap<(SymbolId, CoreId, CoreId), NodeId>,
    pool: Vec<PoolEntry>,
    pool_head: usize,
    order: PoolOrder,
    stats: ParseStats,
}

impl<'a> ExtendedGraph<'a> {
    /// Creates one core per distinct token start position and a last core,
    /// and wraps every token as a terminal symbol between two cores.
    pub fn new(lexical: &'a LexicalAnalysisGraph, grammar: &'a Grammar) -> ExtendedGraph<'a> {
        let positions: Vec<usize> = lexical.positions().into_iter().collect();
        let mut cores: Vec<Core> = positions
            .iter()
            .enumerate()
            .map(|(id, &position)| Core {
                id,
                position,
                ..Core::default()
            })
            .collect();
        let (first_core, last_core) = if cores.is_empty() {
            cores.push(Core {
                id: 0,
                position: lexical.first_offset,
                ..Core::default()
            });
            (0, 0)
        } else {
            cores.push(Core {
                id: cores.len(),
                position: lexical.input_length(),
                ..Core::default()
            });
            (0, cores.len() - 1)
        };
        let core_at: HashMap<usize, CoreId> =
            positions.iter().enumerate().map(|(i, &p)| (p, i)).collect();

        let mut eg = ExtendedGraph {
            grammar,
            lexical,
            stats: ParseStats {
                cores_created: cores.len() as u64,
                ..ParseStats::default()
            },
            cores,
            first_core,
            last_core,
            nodes: Vec::with_capacity(lexical.tokens.len()),
            handles: Vec::new(),
            roots: Vec::new(),
            node_index: HashMap::new(),
            pool: Vec::new(),
            pool_head: 0,
            order: PoolOrder::default(),
        };
        for token in &lexical.tokens {
            let start = core_at[&token.start];
            let end = if lexical.end_tokens.contains(&token.id) {
                last_core
            } else {
                let next = token
                    .following
                    .first()
                    .expect("pruned token is either an end token or has successors");
                core_at[&lexical.tokens[*next].start]
            };
            let symbol = grammar
                .lookup(&token.kind)
                .filter(|&s| grammar.is_terminal(s));
            let id = eg.nodes.len();
            eg.nodes.push(SymbolNode {
                id,
                symbol,
                start,
                end,
                token: Some(token.id),
                derivations: Vec::new(),
            });
            if let Some(symbol) = symbol {
                eg.node_index.insert((symbol, start, end), id);
            }
            eg.link_node(id);
        }
        eg
    }

    pub fn with_order(mut self, order: PoolOrder) -> Self {
        self.order = order;
        self
    }

    pub fn grammar(&self) -> &Grammar {
        self.grammar
    }

    pub fn lexical(&self) -> &LexicalAnalysisGraph {
        self.lexical
    }

    pub fn stats(&self) -> ParseStats {
        self.stats
    }

    pub fn pool_len(&self) -> usize {
        self.pool.len() - self.pool_head
    }

    pub fn pending(&self) -> &[PoolEntry] {
        &self.pool[self.pool_head..]
    }

    fn link_node(&mut self, id: NodeId) {
        let (start, end, symbol) = (self.nodes[id].start, self.nodes[id].end, self.nodes[id].symbol);
        self.cores[start].following.push(id);
        self.cores[end].preceding.push(id);
        if let Some(symbol) = symbol {
            self.cores[start]
                .following_by_type
                .entry(symbol)
                .or_default()
                .push(id);
        }
    }

    /// Looks up the packed symbol for `(symbol, start, end)`.
    pub fn node(&self, symbol: SymbolId, start: CoreId, end: CoreId) -> Option<NodeId> {
        self.node_index.get(&(symbol, start, end)).copied()
    }

    /// Handle `(production, index, start)` stored in `core`, if any.
    pub fn handle(&self, core: CoreId, production: usize, index: usize, start: CoreId) -> Option<HandleId> {
        self.cores[core]
            .handle_index
            .get(&(production, index, start))
            .copied()
    }

    fn enqueue(&mut self, entry: PoolEntry) {
        self.pool.push(entry);
        let len = self.pool_len() as u64;
        self.stats.peak_pool_size = self.stats.peak_pool_size.max(len);
    }

    fn extract(&mut self) -> Option<PoolEntry> {
        if self.pool_len() == 0 {
            self.pool.clear();
            self.pool_head = 0;
            return None;
        }
        match self.order {
            PoolOrder::Lifo => self.pool.pop(),
            PoolOrder::Fifo => {
                let e = self.pool[self.pool_head];
                self.pool_head += 1;
                Some(e)
            }
        }
    }

    /// Stores handle `(production, index, start)` in `core` and enqueues a
    /// pool entry for every symbol following `core` that matches the next
    /// element. While the element just stepped over is nullable, the
    /// following dot position is added as well with an epsilon child.
    ///
    /// An existing handle only gains the new prefix link; nothing is
    /// enqueued again.
    pub fn add_prod(
        &mut self,
        production: usize,
        mut index: usize,
        core: CoreId,
        start: CoreId,
        mut link: Option<Link>,
    ) {
        let rhs_len = self.grammar.productions()[production].right.len();
        loop {
            if let Some(existing) = self.handle(core, production, index, start) {
                if let Some(link) = link {
                    self.handles[existing].links.push(link);
                }
                return;
            }
            let h = self.handles.len();
            self.handles.push(Handle {
                production,
                index,
                start,
                core,
                links: link.into_iter().collect(),
            });
            self.stats.handles_created += 1;
            let c = &mut self.cores[core];
            c.handles.push(h);
            c.handle_index.insert((production, index, start), h);
            if index >= rhs_len {
                return;
            }
            let next = self.grammar.productions()[production].right[index];
            c.waiting.entry(next).or_default().push(h);
            let matches = c.following_by_type.get(&next).cloned().unwrap_or_default();
            for matched in matches {
                self.enqueue(PoolEntry { handle: h, matched });
            }
            if index + 1 < rhs_len && self.grammar.is_nullable(next) {
                link = Some(Link {
                    prev: h,
                    child: Child::Epsilon(next),
                });
                index += 1;
            } else {
                return;
            }
        }
    }

    /// Seeds every production at every core followed by a terminal in the
    /// production's SELECT set.
    pub fn initialize_cores(&mut self) {
        for production in 0..self.grammar.productions().len() {
            let select = self.grammar.select(production);
            for core in 0..self.cores.len() {
                let seeded = self.cores[core]
                    .following_by_type
                    .keys()
                    .any(|s| select.contains(s));
                if seeded {
                    self.add_prod(production, 0, core, core, None);
                }
            }
        }
    }

    /// Drains the pool.
    pub fn run_pool(&mut self) -> ParseStats {
        while let Some(entry) = self.extract() {
            self.stats.pool_entries_processed += 1;
            self.process(entry);
        }
        self.stats
    }

    fn process(&mut self, PoolEntry { handle, matched }: PoolEntry) {
        let Handle {
            production,
            index,
            start,
            ..
        } = self.handles[handle];
        let right = &self.grammar.productions()[production].right;
        let end = self.nodes[matched].end;
        if right[index + 1..].iter().all(|&s| self.grammar.is_nullable(s)) {
            self.reduce(production, start, end, Packed { handle, last: matched });
        }
        if index + 1 < right.len() {
            let link = Link {
                prev: handle,
                child: Child::Node(matched),
            };
            self.add_prod(production, index + 1, end, start, Some(link));
        }
    }

    /// Records a completed production as a derivation of the packed symbol
    /// `(left, start, end)`. Handles waiting at `start` for that symbol type
    /// are advanced only when the symbol is new.
    pub fn reduce(&mut self, production: usize, start: CoreId, end: CoreId, packed: Packed) -> NodeId {
        self.stats.reductions += 1;
        let left = self.grammar.productions()[production].left;
        if let Some(id) = self.node(left, start, end) {
            let node = &mut self.nodes[id];
            if !node.derivations.contains(&packed) {
                node.derivations.push(packed);
            }
            return id;
        }
        let id = self.nodes.len();
        self.nodes.push(SymbolNode {
            id,
            symbol: Some(left),
            start,
            end,
            token: None,
            derivations: vec![packed],
        });
        self.node_index.insert((left, start, end), id);
        self.link_node(id);
        if left == self.grammar.initial() && start == self.first_core && end == self.last_core {
            self.roots.push(id);
        }
        let waiting = self.cores[start].waiting.get(&left).cloned().unwrap_or_default();
        for handle in waiting {
            self.enqueue(PoolEntry { handle, matched: id });
        }
        id
    }

    /// Every matched prefix of `handle` as a child list.
    pub fn prefixes(&self, handle: HandleId) -> Vec<Vec<Child>> {
        let mut memo = HashMap::new();
        self.prefixes_memo(handle, &mut memo)
    }

    fn prefixes_memo(&self, handle: HandleId, memo: &mut HashMap<HandleId, Vec<Vec<Child>>>) -> Vec<Vec<Child>> {
        if let Some(p) = memo.get(&handle) {
            return p.clone();
        }
        let h = &self.handles[handle];
        let out = if h.links.is_empty() {
            vec![Vec::new()]
        } else {
            let mut out = Vec::new();
            for link in &h.links {
                for mut prefix in self.prefixes_memo(link.prev, memo) {
                    prefix.push(link.child);
                    out.push(prefix);
                }
            }
            out
        };
        memo.insert(handle, out.clone());
        out
    }

    /// Child lists of every derivation of `node`, in creation order.
    pub fn children(&self, node: NodeId) -> Vec<Vec<Child>> {
        let mut memo = HashMap::new();
        self.children_memo(node, &mut memo)
    }

    fn children_memo(&self, node: NodeId, memo: &mut HashMap<HandleId, Vec<Vec<Child>>>) -> Vec<Vec<Child>> {
        let mut out = Vec::new();
        for packed in &self.nodes[node].derivations {
            let h = &self.handles[packed.handle];
            let right = &self.grammar.productions()[h.production].right;
            for mut list in self.prefixes_memo(packed.handle, memo) {
                list.push(Child::Node(packed.last));
                list.extend(right[h.index + 1..].iter().map(|&s| Child::Epsilon(s)));
                out.push(list);
            }
        }
        out
    }

    /// Removes the cores: keeps the symbols reachable from the roots and
    /// links symbols that share a core.
    pub fn strip_cores(&mut self) -> ParseGraph {
        let mut memo = HashMap::new();
        let mut keep = vec![false; self.nodes.len()];
        let mut expanded: HashMap<NodeId, Vec<Vec<Child>>> = HashMap::new();
        let mut stack: Vec<NodeId> = self.roots.clone();
        while let Some(n) = stack.pop() {
            if std::mem::replace(&mut keep[n], true) {
                continue;
            }
            let lists = self.children_memo(n, &mut memo);
            for list in &lists {
                for child in list {
                    if let Child::Node(c) = child {
                        if !keep[*c] {
                            stack.push(*c);
                        }
                    }
                }
            }
            expanded.insert(n, lists);
        }

        let kept: Vec<NodeId> = (0..self.nodes.len()).filter(|&n| keep[n]).collect();
        let mut remap = vec![usize::MAX; self.nodes.len()];
        for (new, &old) in kept.iter().enumerate() {
            remap[old] = new;
        }
        let position = |c: CoreId| self.cores[c].position;
        let mut nodes: Vec<ParseNode> = kept
            .iter()
            .enumerate()
            .map(|(new, &old)| {
                let n = &self.nodes[old];
                let token = n.token.map(|t| &self.lexical.tokens[t]);
                let derivations = expanded[&old]
                    .iter()
                    .map(|list| {
                        list.iter()
                            .map(|c| match *c {
                                Child::Node(id) => ParseChild::Node(remap[id]),
                                Child::Epsilon(s) => ParseChild::Epsilon(self.grammar.name(s).to_owned()),
                            })
                            .collect()
                    })
                    .collect();
                ParseNode {
                    id: new,
                    symbol: match (n.symbol, token) {
                        (Some(s), _) => self.grammar.name(s).to_owned(),
                        (None, Some(t)) => t.kind.clone(),
                        (None, None) => unreachable!("nonterminal nodes always carry a symbol"),
                    },
                    kind: if n.token.is_some() {
                        SymbolKind::Terminal
                    } else {
                        SymbolKind::Nonterminal
                    },
                    start: position(n.start),
                    end: position(n.end),
                    token: n.token,
                    lexeme: token.map(|t| t.lexeme.clone()),
                    derivations,
                    preceding: Vec::new(),
                    following: Vec::new(),
                }
            })
            .collect();

        for (new, &old) in kept.iter().enumerate() {
            let n = &self.nodes[old];
            nodes[new].preceding = self.cores[n.start]
                .preceding
                .iter()
                .filter(|&&p| keep[p])
                .map(|&p| remap[p])
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            nodes[new].following = self.cores[n.end]
                .following
                .iter()
                .filter(|&&f| keep[f])
                .map(|&f| remap[f])
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
        }

        let mut graph = ParseGraph {
            nodes,
            roots: self.roots.iter().map(|&r| remap[r]).collect(),
            cyclic: false,
        };
        graph.cyclic = graph.has_cycle();
        self.stats.cyclic = graph.cyclic;
        graph
    }
}

/// Runs the whole pipeline: extend, seed, drain, strip.
pub fn parse(lexical: &LexicalAnalysisGraph, grammar: &Grammar) -> (ParseGraph, ParseStats) {
    parse_with_order(lexical, grammar, PoolOrder::default())
}

pub fn parse_with_order(
    lexical: &LexicalAnalysisGraph,
    grammar: &Grammar,
    order: PoolOrder,
) -> (ParseGraph, ParseStats) {
    assert!(grammar.is_prepared(), "grammar must be prepared before parsing");
    let mut eg = ExtendedGraph::new(lexical, grammar).with_order(order);
    eg.initialize_cores();
    eg.run_pool();
    let graph = eg.strip_cores();
    (graph, eg.stats())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum ParseChild {
    Node(usize),
    Epsilon(String),
}

impl ParseChild {
    pub fn node(&self) -> Option<usize> {
        match self {
            ParseChild::Node(n) => Some(*n),
            ParseChild::Epsilon(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseNode {
    pub id: usize,
    pub symbol: String,
    pub kind: SymbolKind,
    /// Input offset of the start core.
    pub start: usize,
    /// Input offset of the end core.
    pub end: usize,
    pub token: Option<TokenId>,
    pub lexeme: Option<String>,
    /// Alternative child lists; empty for terminals.
    pub derivations: Vec<Vec<ParseChild>>,
    pub preceding: Vec<usize>,
    pub following: Vec<usize>,
}

/// Packed parse graph with cores removed.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParseGraph {
    pub nodes: Vec<ParseNode>,
    pub roots: Vec<usize>,
    pub cyclic: bool,
}

impl ParseGraph {
    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    pub fn tokens(&self) -> BTreeSet<TokenId> {
        self.nodes.iter().filter_map(|n| n.token).collect()
    }

    fn has_cycle(&self) -> bool {
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state = vec![0u8; self.nodes.len()];
        for root in 0..self.nodes.len() {
            if state[root] != 0 {
                continue;
            }
            let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
            state[root] = 1;
            while let Some(&mut (n, ref mut i)) = stack.last_mut() {
                let children: Vec<usize> = self.nodes[n]
                    .derivations
                    .iter()
                    .flatten()
                    .filter_map(ParseChild::node)
                    .collect();
                if *i < children.len() {
                    let c = children[*i];
                    *i += 1;
                    match state[c] {
                        0 => {
                            state[c] = 1;
                            stack.push((c, 0));
                        }
                        1 => return true,
                        _ => {}
                    }
                } else {
                    state[n] = 2;
                    stack.pop();
                }
            }
        }
        false
    }

    pub fn to_json(&self) -> serde_json::Value {
        let nodes: Vec<serde_json::Value> = self
            .nodes
            .iter()
            .map(|n| {
                let mut v = serde_json::json!({
                    "id": n.id,
                    "type": n.symbol,
                    "kind": n.kind,
                    "start_position": n.start,
                    "end_position": n.end,
                    "derivations": n.derivations.iter().map(|d| {
                        d.iter().map(|c| match c {
                            ParseChild::Node(id) => serde_json::json!(id),
                            ParseChild::Epsilon(t) => serde_json::json!(format!("ε:{t}")),
                        }).collect::<Vec<_>>()
                    }).collect::<Vec<_>>(),
                    "preceding": n.preceding,
                    "following": n.following,
                });
                if let Some(lexeme) = &n.lexeme {
                    v["lexeme"] = serde_json::json!(lexeme);
                }
                if let Some(token) = n.token {
                    v["token"] = serde_json::json!(token);
                }
                v
            })
            .collect();
        serde_json::json!({
            "nodes": nodes,
            "roots": self.roots,
            "cyclic": self.cyclic,
        })
    }
}
