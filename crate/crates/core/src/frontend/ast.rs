//! Abstract syntax for MiniC: a closed C-like language with a single scalar
//! type (`int`, W-bit two's complement), by-value records, fixed-length
//! arrays, no pointers, and no recursion.

use crate::property::{PropertyFormula, PropertyId};
use serde::{Deserialize, Serialize};

/// Source location. `file` indexes into the owning unit set when several
/// files are merged; 0 for a single file.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct Span {
    pub file: u32,
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Span {
        Span { file: 0, line, col }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum TypeTag {
    Int,
    Record(String),
    /// Fixed-length array of `int`.
    Array(u32),
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct RecordDecl {
    pub name: String,
    /// Field names, all of scalar kind `int`. Unique, at least one.
    pub fields: Vec<String>,
    pub span: Span,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub ty: TypeTag,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<Param>,
    /// `None` for void.
    pub return_type: Option<TypeTag>,
    pub body: Vec<Stmt>,
    pub span: Span,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum LValue {
    Var(String),
    Field(String, String),
    Index(String, Box<Expr>),
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Stmt {
    /// `int x = e;`
    DeclInt { name: String, init: Expr, span: Span },
    /// `int a[N];` zero-initialized.
    DeclArray { name: String, len: u32, span: Span },
    /// `Rec r;` zero-initialized.
    DeclRecord { name: String, record: String, span: Span },
    Assign { target: LValue, value: Expr, span: Span },
    If {
        cond: Expr,
        then_body: Vec<Stmt>,
        else_body: Vec<Stmt>,
        span: Span,
    },
    While {
        cond: Expr,
        body: Vec<Stmt>,
        /// Preorder index of this loop within its function, assigned by the
        /// parser; identifies the LOOP program point.
        ordinal: u32,
        span: Span,
    },
    Return { value: Option<Expr>, span: Span },
    /// Expression statement; must be a call.
    ExprStmt { call: Expr, span: Span },
    /// `assume(e);` only accepted when parsing in harness mode.
    Assume { cond: Expr, span: Span },
    /// Property assertion. Never produced by the parser; inserted by the
    /// model-checking instrumentation pass.
    Assert {
        prop_id: PropertyId,
        formula: PropertyFormula,
        span: Span,
    },
}

impl Stmt {
    pub fn span(&self) -> Span {
        match self {
            Stmt::DeclInt { span, .. }
            | Stmt::DeclArray { span, .. }
            | Stmt::DeclRecord { span, .. }
            | Stmt::Assign { span, .. }
            | Stmt::If { span, .. }
            | Stmt::While { span, .. }
            | Stmt::Return { span, .. }
            | Stmt::ExprStmt { span, .. }
            | Stmt::Assume { span, .. }
            | Stmt::Assert { span, .. } => *span,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum ExprKind {
    Int(i64),
    Var(String),
    Field(String, String),
    Index(String, Box<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
}

/// One parsed source file.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct SourceUnit {
    pub path: String,
    pub record_decls: Vec<RecordDecl>,
    pub functions: Vec<FunctionDef>,
}

// --- structural normalization (spans erased) for version diffing ---

fn zero(_: Span) -> Span {
    Span::default()
}

fn norm_expr(e: &Expr) -> Expr {
    Expr {
        kind: match &e.kind {
            ExprKind::Int(v) => ExprKind::Int(*v),
            ExprKind::Var(n) => ExprKind::Var(n.clone()),
            ExprKind::Field(b, f) => ExprKind::Field(b.clone(), f.clone()),
            ExprKind::Index(b, i) => ExprKind::Index(b.clone(), Box::new(norm_expr(i))),
            ExprKind::Unary(op, a) => ExprKind::Unary(*op, Box::new(norm_expr(a))),
            ExprKind::Binary(op, a, b) => {
                ExprKind::Binary(*op, Box::new(norm_expr(a)), Box::new(norm_expr(b)))
            }
            ExprKind::Call(f, args) => {
                ExprKind::Call(f.clone(), args.iter().map(norm_expr).collect())
            }
        },
        span: zero(e.span),
    }
}

fn norm_stmt(s: &Stmt) -> Stmt {
    match s {
        Stmt::DeclInt { name, init, span } => Stmt::DeclInt {
            name: name.clone(),
            init: norm_expr(init),
            span: zero(*span),
        },
        Stmt::DeclArray { name, len, span } => Stmt::DeclArray {
            name: name.clone(),
            len: *len,
            span: zero(*span),
        },
        Stmt::DeclRecord { name, record, span } => Stmt::DeclRecord {
            name: name.clone(),
            record: record.clone(),
            span: zero(*span),
        },
        Stmt::Assign { target, value, span } => Stmt::Assign {
            target: match target {
                LValue::Var(n) => LValue::Var(n.clone()),
                LValue::Field(b, f) => LValue::Field(b.clone(), f.clone()),
                LValue::Index(b, i) => LValue::Index(b.clone(), Box::new(norm_expr(i))),
            },
            value: norm_expr(value),
            span: zero(*span),
        },
        Stmt::If {
            cond,
            then_body,
            else_body,
            span,
        } => Stmt::If {
            cond: norm_expr(cond),
            then_body: then_body.iter().map(norm_stmt).collect(),
            else_body: else_body.iter().map(norm_stmt).collect(),
            span: zero(*span),
        },
        Stmt::While {
            cond,
            body,
            ordinal,
            span,
        } => Stmt::While {
            cond: norm_expr(cond),
            body: body.iter().map(norm_stmt).collect(),
            ordinal: *ordinal,
            span: zero(*span),
        },
        Stmt::Return { value, span } => Stmt::Return {
            value: value.as_ref().map(norm_expr),
            span: zero(*span),
        },
        Stmt::ExprStmt { call, span } => Stmt::ExprStmt {
            call: norm_expr(call),
            span: zero(*span),
        },
        Stmt::Assume { cond, span } => Stmt::Assume {
            cond: norm_expr(cond),
            span: zero(*span),
        },
        Stmt::Assert {
            prop_id,
            formula,
            span,
        } => Stmt::Assert {
            prop_id: prop_id.clone(),
            formula: formula.clone(),
            span: zero(*span),
        },
    }
}

impl FunctionDef {
    /// Span-erased copy: two functions compare equal iff their signatures and
    /// bodies are structurally identical. Identifier renames are NOT
    /// normalized away.
    pub fn normalized(&self) -> FunctionDef {
        FunctionDef {
            name: self.name.clone(),
            params: self.params.clone(),
            return_type: self.return_type.clone(),
            body: self.body.iter().map(norm_stmt).collect(),
            span: Span::default(),
        }
    }
}
