//! Building blocks for training and evaluating learned code linters on
//! method-level Java code: lexing and method extraction, input formatting,
//! candidate-project collection, analyzer orchestration and report parsing,
//! labeled dataset assembly, a hashed-feature baseline classifier with an
//! external-backend exchange protocol, and evaluation.

pub mod corpus;
pub mod dataset;
pub mod eval;
pub mod extract;
pub mod jsonl;
pub mod lex;
pub mod lintrun;
pub mod model;
pub mod transform;

#[cfg(test)]
pub(crate) mod fixtures;

pub use extract::{extract_methods, locate_method, MethodUnit, Span};
pub use lex::{lex, LexToken, TokenKind};
pub use transform::{apply_format, FormattedSample, InputFormat};
