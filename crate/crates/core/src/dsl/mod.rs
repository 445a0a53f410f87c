//! Scenario description language: lexer, parser, canonical formatter,
//! validator and compiler to a runnable environment.
//!
//! The grammar is documented in `docs/grammar.md`. Formatting is canonical:
//! comments and blank lines are not preserved.

mod ast;
mod compile;
mod format;
mod lexer;
mod parser;
mod validate;

pub use ast::*;
pub use compile::{build_model, build_types, compile, compile_with_seed, CompileError, CompiledScenario, RunSettings};
pub use format::{expr as format_expr, format};
pub use lexer::{lex, LexError, Tok, Token};
pub use parser::{parse, parse_expr, ParseError, RESERVED};
pub use validate::{validate, Diagnostic, Severity, ValidationReport, DEFAULT_GRID, DEFAULT_TICKS, OUTPUTS};
