//! Lexing, parsing, printing and syntactic restrictions.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod printer;
pub mod restrict;

use thiserror::Error;

pub use ast::Program;
pub use lexer::{tokenize, LexError, Token, TokenKind};
pub use parser::{parse, SyntaxError};
pub use printer::{dump, pretty};
pub use restrict::{check_restrictions, Rule, Violation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
}

/// Tokenizes and parses `source`.
pub fn parse_source(source: &str) -> Result<Program, ParseError> {
    let tokens = tokenize(source)?;
    Ok(parse(&tokens)?)
}
