//! Pretty-printer. `parse(pretty(parse(s)))` is structurally identical to
//! `parse(s)` for every well-formed `s`.

use super::ast::*;
use crate::property::PropertyFormula;

/// Binding strength used to parenthesize only where needed.
fn prec(op: BinOp) -> u8 {
    match op {
        BinOp::Or => 1,
        BinOp::And => 2,
        BinOp::Eq | BinOp::Ne => 3,
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
        BinOp::Add | BinOp::Sub => 5,
        BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
    }
}

pub fn expr_to_string(e: &Expr) -> String {
    render_expr(e, 0)
}

fn render_expr(e: &Expr, parent: u8) -> String {
    match &e.kind {
        ExprKind::Int(v) => {
            if *v < 0 {
                // negative literals only arise from folding; keep re-parseable
                format!("(0 - {})", -v)
            } else {
                v.to_string()
            }
        }
        ExprKind::Var(n) => n.clone(),
        ExprKind::Field(b, f) => format!("{b}.{f}"),
        ExprKind::Index(b, i) => format!("{b}[{}]", render_expr(i, 0)),
        ExprKind::Unary(op, a) => {
            let s = match op {
                UnOp::Neg => "-",
                UnOp::Not => "!",
            };
            format!("{s}{}", render_expr(a, 7))
        }
        ExprKind::Binary(op, a, b) => {
            let p = prec(*op);
            // left-associative: right child needs parens at equal precedence
            let s = format!(
                "{} {} {}",
                render_expr(a, p),
                op.symbol(),
                render_expr(b, p + 1)
            );
            if p < parent {
                format!("({s})")
            } else {
                s
            }
        }
        ExprKind::Call(f, args) => {
            let args: Vec<String> = args.iter().map(|a| render_expr(a, 0)).collect();
            format!("{f}({})", args.join(", "))
        }
    }
}

fn lvalue_to_string(lv: &LValue) -> String {
    match lv {
        LValue::Var(n) => n.clone(),
        LValue::Field(b, f) => format!("{b}.{f}"),
        LValue::Index(b, i) => format!("{b}[{}]", render_expr(i, 0)),
    }
}

fn type_to_string(ty: &TypeTag, name: &str) -> String {
    match ty {
        TypeTag::Int => format!("int {name}"),
        TypeTag::Record(r) => format!("{r} {name}"),
        TypeTag::Array(len) => format!("int {name}[{len}]"),
    }
}

struct Printer {
    out: String,
    /// For every emitted line: the original source line of the statement it
    /// came from (0 when none applies, e.g. a closing brace).
    line_origins: Vec<u32>,
    current_origin: u32,
}

impl Printer {
    fn line(&mut self, indent: usize, s: &str) {
        self.out.push_str(&"    ".repeat(indent));
        self.out.push_str(s);
        self.out.push('\n');
        self.line_origins.push(self.current_origin);
    }

    fn stmt(&mut self, s: &Stmt, indent: usize) {
        self.current_origin = s.span().line;
        match s {
            Stmt::DeclInt { name, init, .. } => {
                let e = render_expr(init, 0);
                self.line(indent, &format!("int {name} = {e};"));
            }
            Stmt::DeclArray { name, len, .. } => {
                self.line(indent, &format!("int {name}[{len}];"));
            }
            Stmt::DeclRecord { name, record, .. } => {
                self.line(indent, &format!("{record} {name};"));
            }
            Stmt::Assign { target, value, .. } => {
                self.line(
                    indent,
                    &format!("{} = {};", lvalue_to_string(target), render_expr(value, 0)),
                );
            }
            Stmt::If {
                cond,
                then_body,
                else_body,
                span,
            } => {
                self.line(indent, &format!("if ({}) {{", render_expr(cond, 0)));
                for st in then_body {
                    self.stmt(st, indent + 1);
                }
                if else_body.is_empty() {
                    self.current_origin = span.line;
                    self.line(indent, "}");
                } else {
                    self.current_origin = span.line;
                    self.line(indent, "} else {");
                    for st in else_body {
                        self.stmt(st, indent + 1);
                    }
                    self.current_origin = span.line;
                    self.line(indent, "}");
                }
            }
            Stmt::While { cond, body, span, .. } => {
                self.line(indent, &format!("while ({}) {{", render_expr(cond, 0)));
                for st in body {
                    self.stmt(st, indent + 1);
                }
                self.current_origin = span.line;
                self.line(indent, "}");
            }
            Stmt::Return { value, .. } => match value {
                Some(e) => self.line(indent, &format!("return {};", render_expr(e, 0))),
                None => self.line(indent, "return;"),
            },
            Stmt::ExprStmt { call, .. } => {
                self.line(indent, &format!("{};", render_expr(call, 0)));
            }
            Stmt::Assume { cond, .. } => {
                self.line(indent, &format!("assume({});", render_expr(cond, 0)));
            }
            Stmt::Assert { formula, .. } => {
                self.line(indent, &format!("assert({});", formula_text(formula)));
            }
        }
    }
}

fn formula_text(f: &PropertyFormula) -> String {
    f.text()
}

/// Render a unit back to concrete syntax.
pub fn pretty_print(unit: &SourceUnit) -> String {
    render(unit).0
}

/// Render a unit, also returning a map from emitted (1-based) line numbers to
/// the original source line each came from. Inserted assertion lines map to
/// the line of the statement they anchor to.
pub fn render(unit: &SourceUnit) -> (String, Vec<(u32, u32)>) {
    let mut p = Printer {
        out: String::new(),
        line_origins: Vec::new(),
        current_origin: 0,
    };
    let mut first = true;
    for r in &unit.record_decls {
        if !first {
            p.current_origin = 0;
            p.line(0, "");
        }
        first = false;
        p.current_origin = r.span.line;
        p.line(0, &format!("record {} {{", r.name));
        for fld in &r.fields {
            p.line(1, &format!("int {fld};"));
        }
        p.line(0, "}");
    }
    for f in &unit.functions {
        if !first {
            p.current_origin = 0;
            p.line(0, "");
        }
        first = false;
        let ret = match &f.return_type {
            None => "void".to_string(),
            Some(TypeTag::Int) => "int".to_string(),
            Some(TypeTag::Record(r)) => r.clone(),
            Some(TypeTag::Array(_)) => "int".to_string(), // rejected by sema anyway
        };
        let params: Vec<String> = f
            .params
            .iter()
            .map(|pm| type_to_string(&pm.ty, &pm.name))
            .collect();
        p.current_origin = f.span.line;
        p.line(0, &format!("{ret} {}({}) {{", f.name, params.join(", ")));
        for st in &f.body {
            p.stmt(st, 1);
        }
        p.current_origin = f.span.line;
        p.line(0, "}");
    }
    let map = p
        .line_origins
        .iter()
        .enumerate()
        .map(|(i, &orig)| ((i + 1) as u32, orig))
        .collect();
    (p.out, map)
}
