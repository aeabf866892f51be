//! Path-merging symbolic execution of an instrumented program into a single
//! boolean circuit. Every write is guarded by the path condition under which
//! it happens, loops are unrolled to a fixed bound with an unwinding
//! assumption appended, and calls are inlined up to a depth limit.

use super::circuit::{BitVec, Circuit, NodeId};
use crate::frontend::ast::*;
use crate::frontend::sema::AnalyzedUnit;
use crate::property::{PropertyFormula, PropertyId, RelOp};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SymExecError {
    #[error("call inlining exceeded depth {0}; result is inconclusive")]
    DepthExceeded(u32),
}

#[derive(Clone, Debug)]
pub struct SymExecConfig {
    pub width: u32,
    /// Loop iterations modeled per loop occurrence.
    pub unroll: u32,
    /// Maximum call inlining depth.
    pub depth: u32,
}

impl Default for SymExecConfig {
    fn default() -> Self {
        SymExecConfig {
            width: 16,
            unroll: 5,
            depth: 16,
        }
    }
}

/// One syntactic assertion reached during execution, in execution order. The
/// same assertion statement yields several occurrences when unrolling or
/// inlining duplicates it.
pub struct AssertOccurrence {
    pub prop_id: PropertyId,
    /// Path condition under which this occurrence executes.
    pub guard: NodeId,
    /// Truth of the asserted formula in the state at this occurrence.
    pub holds: NodeId,
}

/// Entry parameter modeled as fresh inputs, kept for model decoding.
pub enum SymValue {
    Int(BitVec),
    Rec(BTreeMap<String, BitVec>),
    Arr(Vec<BitVec>),
}

pub struct SymResult {
    pub circuit: Circuit,
    /// Entry parameter name -> symbolic value over fresh inputs.
    pub inputs: Vec<(String, SymValue)>,
    /// Global modeling assumptions: unwinding bounds and array-index
    /// in-bounds conditions.
    pub assumptions: Vec<NodeId>,
    pub asserts: Vec<AssertOccurrence>,
}

/// Execute `entry` on fully symbolic parameters.
pub fn exec_entry(
    unit: &AnalyzedUnit,
    entry: &str,
    cfg: &SymExecConfig,
) -> Result<SymResult, SymExecError> {
    let mut c = Circuit::new();
    let f = unit.function(entry).expect("entry resolved");
    let mut inputs = Vec::new();
    let mut args = Vec::new();
    for p in &f.params {
        let v = match &p.ty {
            TypeTag::Int => SymValue::Int(BitVec::fresh(&mut c, cfg.width)),
            TypeTag::Record(r) => {
                let rd = &unit.records[r];
                SymValue::Rec(
                    rd.fields
                        .iter()
                        .map(|fld| (fld.clone(), BitVec::fresh(&mut c, cfg.width)))
                        .collect(),
                )
            }
            TypeTag::Array(len) => {
                SymValue::Arr((0..*len).map(|_| BitVec::fresh(&mut c, cfg.width)).collect())
            }
        };
        args.push(clone_sym(&v));
        inputs.push((p.name.clone(), v));
    }
    let mut ex = Exec {
        unit,
        c,
        cfg: cfg.clone(),
        assumptions: Vec::new(),
        asserts: Vec::new(),
    };
    let top = ex.c.t();
    ex.exec_function(entry, args, top, 0)?;
    Ok(SymResult {
        circuit: ex.c,
        inputs,
        assumptions: ex.assumptions,
        asserts: ex.asserts,
    })
}

fn clone_sym(v: &SymValue) -> SymValue {
    match v {
        SymValue::Int(b) => SymValue::Int(b.clone()),
        SymValue::Rec(m) => SymValue::Rec(m.clone()),
        SymValue::Arr(a) => SymValue::Arr(a.clone()),
    }
}

struct Frame {
    env: BTreeMap<String, SymValue>,
    /// True on paths that have already executed a `return`.
    returned: NodeId,
    ret_val: BitVec,
}

struct Exec<'a> {
    unit: &'a AnalyzedUnit,
    c: Circuit,
    cfg: SymExecConfig,
    assumptions: Vec<NodeId>,
    asserts: Vec<AssertOccurrence>,
}

impl<'a> Exec<'a> {
    fn exec_function(
        &mut self,
        name: &str,
        args: Vec<SymValue>,
        guard: NodeId,
        depth: u32,
    ) -> Result<BitVec, SymExecError> {
        if depth > self.cfg.depth {
            return Err(SymExecError::DepthExceeded(self.cfg.depth));
        }
        let f = self.unit.function(name).expect("callee resolved").clone();
        let w = self.cfg.width;
        let mut env: BTreeMap<String, SymValue> = BTreeMap::new();
        for (p, a) in f.params.iter().zip(args) {
            env.insert(p.name.clone(), a);
        }
        for v in self.unit.vars.get(name).into_iter().flatten() {
            if v.is_param {
                continue;
            }
            env.insert(v.name.clone(), self.zero_sym(&v.ty));
        }
        let mut frame = Frame {
            env,
            returned: self.c.f(),
            ret_val: BitVec::constant(&mut self.c, 0, w),
        };
        self.exec_stmts(&f.body, &mut frame, guard, depth)?;
        Ok(frame.ret_val)
    }

    fn zero_sym(&mut self, ty: &TypeTag) -> SymValue {
        let w = self.cfg.width;
        match ty {
            TypeTag::Int => SymValue::Int(BitVec::constant(&mut self.c, 0, w)),
            TypeTag::Record(r) => {
                let rd = self.unit.records[r].clone();
                SymValue::Rec(
                    rd.fields
                        .iter()
                        .map(|f| (f.clone(), BitVec::constant(&mut self.c, 0, w)))
                        .collect(),
                )
            }
            TypeTag::Array(len) => SymValue::Arr(
                (0..*len)
                    .map(|_| BitVec::constant(&mut self.c, 0, w))
                    .collect(),
            ),
        }
    }

    fn exec_stmts(
        &mut self,
        stmts: &[Stmt],
        frame: &mut Frame,
        guard: NodeId,
        depth: u32,
    ) -> Result<(), SymExecError> {
        for s in stmts {
            self.exec_stmt(s, frame, guard, depth)?;
        }
        Ok(())
    }

    /// Guard in effect for the next statement: block guard minus paths that
    /// have already returned.
    fn live(&mut self, frame: &Frame, guard: NodeId) -> NodeId {
        let nr = self.c.not(frame.returned);
        self.c.and(guard, nr)
    }

    fn exec_stmt(
        &mut self,
        s: &Stmt,
        frame: &mut Frame,
        guard: NodeId,
        depth: u32,
    ) -> Result<(), SymExecError> {
        let g = self.live(frame, guard);
        match s {
            Stmt::DeclInt { name, init, .. } => {
                let v = self.eval(init, frame, g, depth)?;
                self.write_var(frame, name, v, g);
            }
            // pre-zeroed at frame entry
            Stmt::DeclArray { .. } | Stmt::DeclRecord { .. } => {}
            Stmt::Assign { target, value, span } => {
                let v = self.eval(value, frame, g, depth)?;
                match target {
                    LValue::Var(n) => self.write_var(frame, n, v, g),
                    LValue::Field(b, fld) => {
                        if let Some(SymValue::Rec(r)) = frame.env.get(b) {
                            let old = r[fld].clone();
                            let merged = BitVec::mux(&mut self.c, g, &v, &old);
                            if let Some(SymValue::Rec(r)) = frame.env.get_mut(b) {
                                r.insert(fld.clone(), merged);
                            }
                        }
                    }
                    LValue::Index(b, idx) => {
                        let i = self.eval(idx, frame, g, depth)?;
                        self.assume_in_bounds(frame, b, &i, g, span.line);
                        let elems = match frame.env.get(b) {
                            Some(SymValue::Arr(a)) => a.clone(),
                            _ => unreachable!("array base checked"),
                        };
                        let mut updated = Vec::with_capacity(elems.len());
                        for (k, old) in elems.iter().enumerate() {
                            let kv = BitVec::constant(&mut self.c, k as i64, self.cfg.width);
                            let here = i.eq(&mut self.c, &kv);
                            let write = self.c.and(g, here);
                            updated.push(BitVec::mux(&mut self.c, write, &v, old));
                        }
                        frame.env.insert(b.clone(), SymValue::Arr(updated));
                    }
                }
            }
            Stmt::If {
                cond,
                then_body,
                else_body,
                ..
            } => {
                let cnode = self.eval_bool(cond, frame, g, depth)?;
                let g_then = self.c.and(g, cnode);
                let ncond = self.c.not(cnode);
                let g_else = self.c.and(g, ncond);
                self.exec_stmts(then_body, frame, g_then, depth)?;
                self.exec_stmts(else_body, frame, g_else, depth)?;
            }
            Stmt::While { cond, body, .. } => {
                for _ in 0..self.cfg.unroll {
                    let g_live = self.live(frame, guard);
                    let cnode = self.eval_bool(cond, frame, g_live, depth)?;
                    let g_body = self.c.and(g_live, cnode);
                    self.exec_stmts(body, frame, g_body, depth)?;
                }
                // unwinding assumption: on live paths the condition is now
                // false, i.e. the bound sufficed
                let g_live = self.live(frame, guard);
                let cnode = self.eval_bool(cond, frame, g_live, depth)?;
                let done = self.c.not(cnode);
                let a = self.c.implies(g_live, done);
                self.assumptions.push(a);
            }
            Stmt::Return { value, .. } => {
                if let Some(e) = value {
                    let v = self.eval(e, frame, g, depth)?;
                    frame.ret_val = BitVec::mux(&mut self.c, g, &v, &frame.ret_val);
                }
                frame.returned = self.c.or(frame.returned, g);
            }
            Stmt::ExprStmt { call, .. } => {
                // calls are side-effect free; still executed so callee-side
                // assertions and assumptions are modeled
                self.eval(call, frame, g, depth)?;
            }
            Stmt::Assume { cond, .. } => {
                let cnode = self.eval_bool(cond, frame, g, depth)?;
                let a = self.c.implies(g, cnode);
                self.assumptions.push(a);
            }
            Stmt::Assert { prop_id, formula, .. } => {
                let holds = self.eval_formula(formula, frame);
                self.asserts.push(AssertOccurrence {
                    prop_id: prop_id.clone(),
                    guard: g,
                    holds,
                });
            }
        }
        Ok(())
    }

    fn write_var(&mut self, frame: &mut Frame, name: &str, v: BitVec, g: NodeId) {
        let old = match frame.env.get(name) {
            Some(SymValue::Int(b)) => b.clone(),
            // instrumentation temporaries are not in the var table; their
            // pre-state is never read
            None => BitVec::constant(&mut self.c, 0, self.cfg.width),
            _ => unreachable!("scalar write checked"),
        };
        let merged = BitVec::mux(&mut self.c, g, &v, &old);
        frame.env.insert(name.to_string(), SymValue::Int(merged));
    }

    fn assume_in_bounds(&mut self, frame: &Frame, base: &str, idx: &BitVec, g: NodeId, _line: u32) {
        let len = match frame.env.get(base) {
            Some(SymValue::Arr(a)) => a.len() as i64,
            _ => 0,
        };
        let zero = BitVec::constant(&mut self.c, 0, self.cfg.width);
        let len_v = BitVec::constant(&mut self.c, len, self.cfg.width);
        let ge0 = zero.sle(&mut self.c, idx);
        let lt_len = idx.slt(&mut self.c, &len_v);
        let ok = self.c.and(ge0, lt_len);
        let a = self.c.implies(g, ok);
        self.assumptions.push(a);
    }

    /// Evaluate to a W-bit word.
    fn eval(
        &mut self,
        e: &Expr,
        frame: &Frame,
        g: NodeId,
        depth: u32,
    ) -> Result<BitVec, SymExecError> {
        let w = self.cfg.width;
        Ok(match &e.kind {
            ExprKind::Int(v) => BitVec::constant(&mut self.c, *v, w),
            ExprKind::Var(n) => match frame.env.get(n) {
                Some(SymValue::Int(b)) => b.clone(),
                _ => unreachable!("scalar use checked"),
            },
            ExprKind::Field(b, f) => match frame.env.get(b) {
                Some(SymValue::Rec(r)) => r[f].clone(),
                _ => unreachable!(),
            },
            ExprKind::Index(b, idx) => {
                let i = self.eval(idx, frame, g, depth)?;
                self.assume_in_bounds(frame, b, &i, g, e.span.line);
                let elems = match frame.env.get(b) {
                    Some(SymValue::Arr(a)) => a.clone(),
                    _ => unreachable!(),
                };
                let mut acc = BitVec::constant(&mut self.c, 0, w);
                for (k, el) in elems.iter().enumerate() {
                    let kv = BitVec::constant(&mut self.c, k as i64, w);
                    let here = i.eq(&mut self.c, &kv);
                    acc = BitVec::mux(&mut self.c, here, el, &acc);
                }
                acc
            }
            ExprKind::Unary(op, a) => {
                let v = self.eval(a, frame, g, depth)?;
                match op {
                    UnOp::Neg => v.neg(&mut self.c),
                    UnOp::Not => {
                        let z = v.is_zero(&mut self.c);
                        self.bool_to_word(z)
                    }
                }
            }
            ExprKind::Binary(op, a, b) => match op {
                BinOp::And | BinOp::Or => {
                    let n = self.eval_bool(e, frame, g, depth)?;
                    self.bool_to_word(n)
                }
                _ => {
                    let l = self.eval(a, frame, g, depth)?;
                    let r = self.eval(b, frame, g, depth)?;
                    match op {
                        BinOp::Add => l.add(&mut self.c, &r),
                        BinOp::Sub => l.sub(&mut self.c, &r),
                        BinOp::Mul => l.mul(&mut self.c, &r),
                        BinOp::Div => l.sdiv(&mut self.c, &r),
                        BinOp::Rem => l.srem(&mut self.c, &r),
                        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne => {
                            let n = self.compare(*op, &l, &r);
                            self.bool_to_word(n)
                        }
                        BinOp::And | BinOp::Or => unreachable!(),
                    }
                }
            },
            ExprKind::Call(fname, args) => {
                let mut vals = Vec::with_capacity(args.len());
                let callee = self.unit.function(fname).expect("callee resolved").clone();
                for (p, a) in callee.params.iter().zip(args) {
                    match &p.ty {
                        TypeTag::Int => vals.push(SymValue::Int(self.eval(a, frame, g, depth)?)),
                        TypeTag::Record(_) | TypeTag::Array(_) => {
                            if let ExprKind::Var(n) = &a.kind {
                                vals.push(clone_sym(&frame.env[n]));
                            } else {
                                unreachable!("aggregate arguments are variables");
                            }
                        }
                    }
                }
                self.exec_function(fname, vals, g, depth + 1)?
            }
        })
    }

    /// Evaluate to a single boolean node (zero/nonzero test); `&&`, `||` and
    /// comparisons are kept at the bit level instead of round-tripping
    /// through words.
    fn eval_bool(
        &mut self,
        e: &Expr,
        frame: &Frame,
        g: NodeId,
        depth: u32,
    ) -> Result<NodeId, SymExecError> {
        Ok(match &e.kind {
            ExprKind::Binary(BinOp::And, a, b) => {
                let l = self.eval_bool(a, frame, g, depth)?;
                let r = self.eval_bool(b, frame, g, depth)?;
                self.c.and(l, r)
            }
            ExprKind::Binary(BinOp::Or, a, b) => {
                let l = self.eval_bool(a, frame, g, depth)?;
                let r = self.eval_bool(b, frame, g, depth)?;
                self.c.or(l, r)
            }
            ExprKind::Unary(UnOp::Not, a) => {
                let l = self.eval_bool(a, frame, g, depth)?;
                self.c.not(l)
            }
            ExprKind::Binary(
                op @ (BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne),
                a,
                b,
            ) => {
                let l = self.eval(a, frame, g, depth)?;
                let r = self.eval(b, frame, g, depth)?;
                self.compare(*op, &l, &r)
            }
            _ => {
                let v = self.eval(e, frame, g, depth)?;
                let z = v.is_zero(&mut self.c);
                self.c.not(z)
            }
        })
    }

    fn compare(&mut self, op: BinOp, l: &BitVec, r: &BitVec) -> NodeId {
        match op {
            BinOp::Lt => l.slt(&mut self.c, r),
            BinOp::Le => l.sle(&mut self.c, r),
            BinOp::Gt => r.slt(&mut self.c, l),
            BinOp::Ge => r.sle(&mut self.c, l),
            BinOp::Eq => l.eq(&mut self.c, r),
            BinOp::Ne => {
                let eq = l.eq(&mut self.c, r);
                self.c.not(eq)
            }
            _ => unreachable!(),
        }
    }

    fn bool_to_word(&mut self, n: NodeId) -> BitVec {
        let mut bits = vec![n];
        bits.extend((1..self.cfg.width).map(|_| self.c.f()));
        BitVec(bits)
    }

    /// Truth of a property formula in the current state. Variables use the
    /// flattened naming also used by traces.
    fn eval_formula(&mut self, f: &PropertyFormula, frame: &Frame) -> NodeId {
        let w = self.cfg.width;
        let get = |ex: &mut Exec, v: &str| ex.read_flat(frame, v);
        match f {
            PropertyFormula::EqConst { var, value } => {
                let a = get(self, var);
                let c = BitVec::constant(&mut self.c, *value, w);
                a.eq(&mut self.c, &c)
            }
            PropertyFormula::LowerBound { var, bound } => {
                let a = get(self, var);
                let c = BitVec::constant(&mut self.c, *bound, w);
                c.sle(&mut self.c, &a)
            }
            PropertyFormula::UpperBound { var, bound } => {
                let a = get(self, var);
                let c = BitVec::constant(&mut self.c, *bound, w);
                a.sle(&mut self.c, &c)
            }
            PropertyFormula::NonZero { var } => {
                let a = get(self, var);
                let z = a.is_zero(&mut self.c);
                self.c.not(z)
            }
            PropertyFormula::OneOf { var, values } => {
                let a = get(self, var);
                let mut any = self.c.f();
                for v in values {
                    let cv = BitVec::constant(&mut self.c, *v, w);
                    let eq = a.eq(&mut self.c, &cv);
                    any = self.c.or(any, eq);
                }
                any
            }
            PropertyFormula::RelVarVar { lhs, op, rhs } => {
                let a = get(self, lhs);
                let b = get(self, rhs);
                match op {
                    RelOp::Eq => a.eq(&mut self.c, &b),
                    RelOp::Ne => {
                        let eq = a.eq(&mut self.c, &b);
                        self.c.not(eq)
                    }
                    RelOp::Ge => b.sle(&mut self.c, &a),
                    RelOp::Le => a.sle(&mut self.c, &b),
                }
            }
            PropertyFormula::OffsetEq { lhs, rhs, offset } => {
                let a = get(self, lhs);
                let b = get(self, rhs);
                let c = BitVec::constant(&mut self.c, *offset, w);
                let sum = b.add(&mut self.c, &c);
                a.eq(&mut self.c, &sum)
            }
        }
    }

    /// Resolve a flattened trace name (`x`, `rec.field`, `arr.0`) in the
    /// frame environment.
    fn read_flat(&mut self, frame: &Frame, name: &str) -> BitVec {
        if let Some(SymValue::Int(b)) = frame.env.get(name) {
            return b.clone();
        }
        if let Some((base, rest)) = name.split_once('.') {
            match frame.env.get(base) {
                Some(SymValue::Rec(r)) => {
                    if let Some(b) = r.get(rest) {
                        return b.clone();
                    }
                }
                Some(SymValue::Arr(a)) => {
                    if let Ok(i) = rest.parse::<usize>() {
                        if let Some(b) = a.get(i) {
                            return b.clone();
                        }
                    }
                }
                _ => {}
            }
        }
        unreachable!("mappable property variable `{name}` must resolve")
    }
}
