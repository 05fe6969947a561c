//! Parsing over lexical analysis graphs.
//!
//! [`lexer`] turns an input string into a graph of every possible token
//! sequence, [`parser`] runs a bottom-up handle-pool parse over that graph
//! and returns a packed parse graph, [`forest`] counts, enumerates and
//! exports the trees it contains, and [`oracle`] is a slow brute-force
//! reference used to validate the parser.

pub mod cli;
pub mod forest;
pub mod grammar;
pub mod lexer;
pub mod oracle;
pub mod parser;

pub use grammar::{Grammar, GrammarError};
pub use lexer::{LexError, LexicalAnalysisGraph, Scanner};
pub use parser::{parse, ParseGraph, ParseStats};
