//! Programs in the assembly-like source language: AST, parser, printer and
//! well-formedness checks.

mod ast;
mod lexer;
mod parser;
mod printer;
mod validate;

use serde::Serialize;
use thiserror::Error;

pub use ast::*;
pub use parser::parse_program;
pub use printer::pretty_print;
pub use validate::{validate, Diagnostic, RuleId};

pub(crate) use parser::is_keyword;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub expected: Vec<String>,
    pub found: String,
}

impl ParseError {
    pub(crate) fn new(
        line: usize,
        column: usize,
        message: impl Into<String>,
        expected: Vec<String>,
        found: impl Into<String>,
    ) -> Self {
        ParseError {
            line,
            column,
            message: message.into(),
            expected,
            found: found.into(),
        }
    }
}

/// Error returned by [`load_program`].
#[derive(Debug, Error)]
pub enum LoadError {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error("program is not well-formed ({} diagnostics)", .0.len())]
    Invalid(Vec<Diagnostic>),
}

/// Parse and validate in one step.
pub fn load_program(text: &str) -> Result<Program, LoadError> {
    let p = parse_program(text)?;
    let diags = validate(&p);
    if diags.is_empty() {
        Ok(p)
    } else {
        Err(LoadError::Invalid(diags))
    }
}
