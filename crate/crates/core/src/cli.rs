//! Command-line front end.
//!
//! Exit codes: 0 success, 1 no parse (or no tokenization), 2 usage or
//! specification error, 3 oracle mismatch.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde_json::json;

use crate::forest::{count_trees, enumerate_trees, ToDot};
use crate::grammar::Grammar;
use crate::lexer::{parse_lex_spec, LexError, LexicalAnalysisGraph, Scanner};
use crate::oracle::{cross_check, Caps};
use crate::parser::{handle_bound, parse};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NO_PARSE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_MISMATCH: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Print the lexical analysis graph.
    Lex,
    /// Print the packed parse graph.
    Parse,
    /// Enumerate parse trees.
    Trees,
    /// Compare the parser with the brute-force reference.
    Check,
    /// Print grammar metrics and, given an input, parse counters.
    Stats,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Dot,
    Trees,
}

#[derive(Debug, Parser)]
#[command(name = "fence", version, about = "Parse lexically and syntactically ambiguous input")]
pub struct RunConfig {
    pub mode: Mode,
    /// Grammar file (`LHS ::= RHS...` per line).
    #[arg(long)]
    pub grammar: Option<PathBuf>,
    /// Lexical specification (`pattern Name` per line).
    #[arg(long = "lex")]
    pub lex_spec: Option<PathBuf>,
    /// File holding the input text.
    #[arg(long, conflicts_with = "text")]
    pub input: Option<PathBuf>,
    /// Inline input text.
    #[arg(long)]
    pub text: Option<String>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Maximum number of trees to print.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub limit: u64,
    /// Saturation cap for tree counting.
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub cap: u64,
    /// Skip pattern between tokens; empty disables skipping.
    #[arg(long)]
    pub skip: Option<String>,
    /// Write parse statistics here instead of stderr.
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

/// Runs the tool with `args` (program name first).
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    match execute(&config, out, err) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "fence: {}", f.message);
            f.code
        }
    }
}

fn read(path: &PathBuf) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

impl RunConfig {
    fn input_text(&self) -> Result<Option<String>, Failure> {
        match (&self.input, &self.text) {
            (Some(p), _) => read(p).map(Some),
            (None, Some(t)) => Ok(Some(t.clone())),
            (None, None) => Ok(None),
        }
    }

    fn scanner(&self) -> Result<Option<Scanner>, Failure> {
        let Some(path) = &self.lex_spec else {
            return Ok(None);
        };
        let specs = parse_lex_spec(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        Scanner::new(specs, self.skip.as_deref())
            .map(Some)
            .map_err(|e| usage(e.to_string()))
    }

    fn grammar(&self, scanner: Option<&Scanner>) -> Result<Grammar, Failure> {
        let path = self.grammar.as_ref().ok_or_else(|| usage("--grammar is required"))?;
        let mut g = Grammar::parse(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        if let Some(sc) = scanner {
            g.declare_terminals(sc.specs().iter().map(|s| s.name.clone()));
        }
        g.prepare().map_err(|e| usage(format!("{}: {e}", path.display())))
    }
}

fn lex(scanner: &Scanner, text: &str) -> Result<LexicalAnalysisGraph, Failure> {
    scanner.scan(text).map_err(|e| match e {
        LexError::NoMatch(_) => Failure {
            code: EXIT_NO_PARSE,
            message: e.to_string(),
        },
        other => usage(other.to_string()),
    })
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    out.write_all(text.as_bytes())
        .map_err(|e| usage(format!("write failed: {e}")))
}

fn json_line(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string(v).expect("json serializes");
    s.push('\n');
    s
}

fn execute(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let scanner = cfg.scanner()?;
    let text = cfg.input_text()?;
    let needs_input = cfg.mode != Mode::Stats;
    if needs_input && scanner.is_none() {
        return Err(usage("--lex is required"));
    }
    if needs_input && text.is_none() {
        return Err(usage("one of --input or --text is required"));
    }

    if cfg.mode == Mode::Lex {
        let g = lex(scanner.as_ref().unwrap(), text.as_deref().unwrap())?;
        match cfg.format {
            Format::Json => emit(out, &json_line(&g.to_json()))?,
            Format::Dot => emit(out, &g.to_dot())?,
            Format::Trees => return Err(usage("`lex` supports --format json or dot")),
        }
        return Ok(EXIT_OK);
    }

    let grammar = cfg.grammar(scanner.as_ref())?;
    if cfg.mode == Mode::Stats {
        let mut report = json!({ "grammar": grammar.stats() });
        if let (Some(sc), Some(text)) = (&scanner, &text) {
            let g = lex(sc, text)?;
            let (pg, stats) = parse(&g, &grammar);
            let positions = g.positions().len();
            report["parse"] = json!({
                "stats": stats,
                "positions": positions,
                "handle_bound": handle_bound(positions, &grammar),
                "roots": pg.roots.len(),
            });
        }
        emit(out, &json_line(&report))?;
        return Ok(EXIT_OK);
    }

    let g = lex(scanner.as_ref().unwrap(), text.as_deref().unwrap())?;
    match cfg.mode {
        Mode::Parse => {
            let (pg, stats) = parse(&g, &grammar);
            match cfg.format {
                Format::Json => emit(out, &json_line(&pg.to_json()))?,
                Format::Dot => emit(out, &pg.to_dot())?,
                Format::Trees => {
                    for t in enumerate_trees(&pg, cfg.limit as usize) {
                        emit(out, &format!("{t}\n"))?;
                    }
                }
            }
            let stats = json_line(&serde_json::to_value(stats).expect("stats serialize"));
            match &cfg.stats {
                Some(path) => fs::write(path, stats).map_err(|e| usage(format!("{}: {e}", path.display())))?,
                None => {
                    let _ = err.write_all(stats.as_bytes());
                }
            }
            Ok(if pg.roots.is_empty() { EXIT_NO_PARSE } else { EXIT_OK })
        }
        Mode::Trees => {
            let (pg, _) = parse(&g, &grammar);
            let trees = if pg.roots.is_empty() {
                Vec::new()
            } else {
                enumerate_trees(&pg, cfg.limit as usize)
            };
            match cfg.format {
                Format::Json => {
                    let all: Vec<_> = trees.iter().map(|t| t.to_json()).collect();
                    emit(out, &json_line(&json!(all)))?;
                }
                Format::Trees => {
                    for t in &trees {
                        emit(out, &format!("{t}\n"))?;
                    }
                }
                Format::Dot => return Err(usage("`trees` supports --format json or trees")),
            }
            let _ = writeln!(err, "trees: {}", count_trees(&pg, cfg.cap));
            Ok(if trees.is_empty() { EXIT_NO_PARSE } else { EXIT_OK })
        }
        Mode::Check => {
            let case_id = cfg
                .input
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| "inline".into());
            let report = cross_check(
                &case_id,
                &g,
                &grammar,
                Caps {
                    trees: cfg.cap,
                    ..Caps::default()
                },
            );
            emit(out, &format!("{}\n", report.to_json_line()))?;
            Ok(if report.matched { EXIT_OK } else { EXIT_MISMATCH })
        }
        Mode::Lex | Mode::Stats => unreachable!("handled above"),
    }
}
