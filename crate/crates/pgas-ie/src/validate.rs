//! Whole-program validation for IR built programmatically (generators,
//! transform output). Validation is the parser's rule set: the program must
//! print to text that parses back to a structurally equal program.

use crate::ast::Program;
use crate::parser::{parse_program, ParseError};
use crate::printer::pretty_print;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ValidateError {
    #[error("program does not satisfy the DSL rules: {0}")]
    Parse(#[from] ParseError),
    #[error("program does not round-trip through the printer")]
    RoundTrip,
}

pub fn validate(p: &Program) -> Result<(), ValidateError> {
    let text = pretty_print(p);
    let reparsed = parse_program(&text)?;
    if &reparsed != p {
        return Err(ValidateError::RoundTrip);
    }
    Ok(())
}
