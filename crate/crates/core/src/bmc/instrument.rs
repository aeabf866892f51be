//! Assertion instrumentation: weaves property assertions into a program
//! version so the symbolic executor checks them at every point the tracer
//! would have sampled.
//!
//! Placement mirrors the sampling semantics exactly:
//! - ENTRY properties assert at the top of the function body,
//! - LOOP properties assert once immediately before the loop and at the end
//!   of the loop body, covering the state before every condition evaluation,
//! - EXIT properties assert before each `return`; for value returns the
//!   expression is first captured into a fresh temporary so the `return`
//!   pseudo-variable has a concrete carrier.

use crate::frontend::ast::*;
use crate::frontend::sema::AnalyzedUnit;
use crate::point::PointKind;
use crate::property::{Property, PropertyId};
use std::collections::{BTreeMap, BTreeSet};

/// A program version with assertions woven in, plus the mapping outcome for
/// every requested property.
pub struct Instrumented {
    pub unit: AnalyzedUnit,
    /// Properties whose point and variables exist in this version.
    pub mappable: Vec<PropertyId>,
    /// Properties that cannot be stated in this version: missing function,
    /// missing loop, or missing variable.
    pub unmappable: Vec<PropertyId>,
}

/// Weave assertions for `props` into a copy of `unit`. Property order is
/// preserved at each point.
pub fn instrument(unit: &AnalyzedUnit, props: &[Property]) -> Instrumented {
    let mut mappable = Vec::new();
    let mut unmappable = Vec::new();
    let mut by_function: BTreeMap<String, Vec<&Property>> = BTreeMap::new();
    for p in props {
        if is_mappable(unit, p) {
            mappable.push(p.id.clone());
            by_function
                .entry(p.point.function.clone())
                .or_default()
                .push(p);
        } else {
            unmappable.push(p.id.clone());
        }
    }

    let mut out = unit.clone();
    for (fn_name, fn_props) in &by_function {
        let &(ui, fi) = unit.fn_index.get(fn_name).expect("mappable function");
        let taken: BTreeSet<String> = unit
            .vars
            .get(fn_name)
            .into_iter()
            .flatten()
            .map(|v| v.name.clone())
            .collect();
        let f = &mut out.units[ui].functions[fi];
        let mut w = Weaver {
            entry: Vec::new(),
            exit: Vec::new(),
            loops: BTreeMap::new(),
            taken,
            ret_counter: 0,
        };
        for p in fn_props {
            match p.point.kind {
                PointKind::Entry => w.entry.push(p),
                PointKind::Exit => w.exit.push(p),
                PointKind::Loop(k) => w.loops.entry(k).or_default().push(p),
            }
        }
        let is_void = f.return_type.is_none();
        let mut body = w.weave(std::mem::take(&mut f.body));
        let entry_asserts: Vec<Stmt> = w
            .entry
            .iter()
            .map(|p| assert_stmt(p, None, f.span))
            .collect();
        body.splice(0..0, entry_asserts);
        if is_void {
            // cover the fall-through exit; unreachable if every path returns
            body.extend(w.exit.iter().map(|p| assert_stmt(p, None, f.span)));
        }
        f.body = body;
    }
    Instrumented {
        unit: out,
        mappable,
        unmappable,
    }
}

/// A property maps onto a version when its point exists there and every
/// variable it mentions is in that point's schema.
pub fn is_mappable(unit: &AnalyzedUnit, p: &Property) -> bool {
    match unit.point_schema(&p.point) {
        None => false,
        Some(schema) => p.formula.vars().iter().all(|v| schema.contains(&v.to_string())),
    }
}

fn assert_stmt(p: &Property, rename_return_to: Option<&str>, span: Span) -> Stmt {
    let formula = match rename_return_to {
        Some(tmp) => p.formula.rename_var("return", tmp),
        None => p.formula.clone(),
    };
    Stmt::Assert {
        prop_id: p.id.clone(),
        formula,
        span,
    }
}

struct Weaver<'a> {
    entry: Vec<&'a Property>,
    exit: Vec<&'a Property>,
    loops: BTreeMap<u32, Vec<&'a Property>>,
    /// Names already in use in the function, to keep temporaries fresh.
    taken: BTreeSet<String>,
    ret_counter: u32,
}

impl<'a> Weaver<'a> {
    fn fresh_ret(&mut self) -> String {
        loop {
            let name = format!("__ret_{}", self.ret_counter);
            self.ret_counter += 1;
            if !self.taken.contains(&name) {
                self.taken.insert(name.clone());
                return name;
            }
        }
    }

    fn weave(&mut self, stmts: Vec<Stmt>) -> Vec<Stmt> {
        let mut out = Vec::with_capacity(stmts.len());
        for s in stmts {
            match s {
                Stmt::While {
                    cond,
                    body,
                    ordinal,
                    span,
                } => {
                    let loop_props = self.loops.get(&ordinal).cloned().unwrap_or_default();
                    for p in &loop_props {
                        out.push(assert_stmt(p, None, span));
                    }
                    let mut body = self.weave(body);
                    for p in &loop_props {
                        body.push(assert_stmt(p, None, span));
                    }
                    out.push(Stmt::While {
                        cond,
                        body,
                        ordinal,
                        span,
                    });
                }
                Stmt::If {
                    cond,
                    then_body,
                    else_body,
                    span,
                } => {
                    out.push(Stmt::If {
                        cond,
                        then_body: self.weave(then_body),
                        else_body: self.weave(else_body),
                        span,
                    });
                }
                Stmt::Return {
                    value: Some(e),
                    span,
                } => {
                    if self.exit.is_empty() {
                        out.push(Stmt::Return {
                            value: Some(e),
                            span,
                        });
                        continue;
                    }
                    let tmp = self.fresh_ret();
                    out.push(Stmt::DeclInt {
                        name: tmp.clone(),
                        init: e,
                        span,
                    });
                    for p in &self.exit.clone() {
                        out.push(assert_stmt(p, Some(&tmp), span));
                    }
                    out.push(Stmt::Return {
                        value: Some(Expr {
                            kind: ExprKind::Var(tmp),
                            span,
                        }),
                        span,
                    });
                }
                Stmt::Return { value: None, span } => {
                    for p in &self.exit.clone() {
                        out.push(assert_stmt(p, None, span));
                    }
                    out.push(Stmt::Return { value: None, span });
                }
                other => out.push(other),
            }
        }
        out
    }
}
