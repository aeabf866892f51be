//! MiniC front-end: lexer, parser, pretty-printer, and semantic analysis.
//!
//! The concrete grammar lives in `docs/grammar.md` at the repository root.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod pretty;
pub mod sema;

pub use ast::{
    BinOp, Expr, ExprKind, FunctionDef, LValue, Param, RecordDecl, SourceUnit, Span, Stmt,
    TypeTag, UnOp,
};
pub use parser::parse;
pub use pretty::{pretty_print, render};
pub use sema::{analyze, analyze_merged, AnalyzedUnit, CallGraph, PointInfo, VarInfo};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("parse error at {line}:{col}: expected {expected}")]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub expected: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SemanticError {
    #[error("undefined {0} (line {1})")]
    UndefinedName(String, u32),
    #[error("duplicate {0}")]
    DuplicateName(String),
    #[error("type error: {0}")]
    TypeMismatch(String),
    #[error("arity mismatch calling `{function}`: expected {expected} arguments, found {found} (line {line})")]
    ArityMismatch {
        function: String,
        expected: usize,
        found: usize,
        line: u32,
    },
    #[error("array length must be >= 1 (line {0})")]
    BadArrayLength(u32),
    #[error("record `{0}` has no fields")]
    EmptyRecord(String),
    #[error("recursion detected involving `{0}`")]
    RecursionDetected(String),
    #[error("function `{0}`: not every control path ends in a return")]
    MissingReturn(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
}
