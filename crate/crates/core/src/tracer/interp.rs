//! The MiniC interpreter: W-bit wraparound arithmetic, totalized division
//! (x / 0 = 0, x % 0 = x), short-circuit logic, and a hard step budget so
//! tracing terminates even on accidental infinite loops.

use crate::frontend::ast::*;
use crate::frontend::sema::{AnalyzedUnit, ARRAY_TRACE_CAP};
use crate::point::{PointKind, ProgramPoint};
use crate::property::wrap;
use crate::tracer::TraceSample;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuntimeFault {
    #[error("array index out of bounds: `{array}[{index}]` with length {len} (line {line})")]
    OutOfBounds {
        array: String,
        index: i64,
        len: u32,
        line: u32,
    },
    #[error("step budget of {0} statement steps exceeded")]
    StepBudgetExceeded(u64),
    #[error("assume(...) evaluated to false (line {0})")]
    AssumeFailed(u32),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExecOptions {
    pub width: u32,
    pub step_budget: u64,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions {
            width: 16,
            step_budget: 1_000_000,
        }
    }
}

/// One executed statement in a replayed counterexample trace.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Step {
    pub file: u32,
    pub original_line: u32,
    pub statement_text: String,
    /// Flattened bindings this statement updated.
    pub updated: Vec<(String, i64)>,
}

#[derive(Clone, Debug, Default)]
pub struct ExecOutcome {
    pub samples: Vec<TraceSample>,
    pub steps: Vec<Step>,
    /// For each sample, how many steps had executed when it was taken.
    pub sample_step_marks: Vec<usize>,
    pub return_value: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Int(i64),
    Rec(BTreeMap<String, i64>),
    Arr(Vec<i64>),
}

enum Flow {
    Next,
    Return(Option<i64>),
}

pub struct Interp<'a> {
    unit: &'a AnalyzedUnit,
    opts: ExecOptions,
    monitored: BTreeSet<String>,
    test_name: String,
    steps_left: u64,
    seq: u64,
    samples: Vec<TraceSample>,
    steps: Vec<Step>,
    sample_step_marks: Vec<usize>,
    record_steps: bool,
}

impl<'a> Interp<'a> {
    pub fn new(unit: &'a AnalyzedUnit, opts: ExecOptions) -> Interp<'a> {
        let budget = opts.step_budget;
        Interp {
            unit,
            opts,
            monitored: BTreeSet::new(),
            test_name: String::new(),
            steps_left: budget,
            seq: 0,
            samples: Vec::new(),
            steps: Vec::new(),
            sample_step_marks: Vec::new(),
            record_steps: false,
        }
    }

    pub fn set_monitored(&mut self, monitored: BTreeSet<String>) {
        self.monitored = monitored;
    }

    pub fn set_test_name(&mut self, name: String) {
        self.test_name = name;
    }

    /// Run `name` with the given argument values.
    pub fn run_function(
        &mut self,
        name: &str,
        args: Vec<Value>,
        record_steps: bool,
    ) -> Result<ExecOutcome, RuntimeFault> {
        self.record_steps = record_steps;
        let ret = self.call(name, args)?;
        Ok(ExecOutcome {
            samples: std::mem::take(&mut self.samples),
            steps: std::mem::take(&mut self.steps),
            sample_step_marks: std::mem::take(&mut self.sample_step_marks),
            return_value: ret,
        })
    }

    fn w(&self) -> u32 {
        self.opts.width
    }

    fn tick(&mut self) -> Result<(), RuntimeFault> {
        if self.steps_left == 0 {
            return Err(RuntimeFault::StepBudgetExceeded(self.opts.step_budget));
        }
        self.steps_left -= 1;
        Ok(())
    }

    fn call(&mut self, fn_name: &str, args: Vec<Value>) -> Result<Option<i64>, RuntimeFault> {
        let f = self
            .unit
            .function(fn_name)
            .expect("callee resolved during analysis");
        // bind params, pre-bind all locals to zero so every point schema is
        // total regardless of the taken path
        let mut frame: BTreeMap<String, Value> = BTreeMap::new();
        for (p, a) in f.params.iter().zip(args) {
            frame.insert(p.name.clone(), a);
        }
        for v in self.unit.vars.get(fn_name).into_iter().flatten() {
            if v.is_param {
                continue;
            }
            frame.insert(v.name.clone(), zero_value(&v.ty, self.unit));
        }
        self.sample(fn_name, PointKind::Entry, &frame, None);
        let flow = self.exec_stmts(&f.body.clone(), &mut frame, fn_name)?;
        let ret = match flow {
            Flow::Return(v) => v,
            // void function falling off the end
            Flow::Next => {
                self.sample(fn_name, PointKind::Exit, &frame, None);
                None
            }
        };
        Ok(ret)
    }

    fn exec_stmts(
        &mut self,
        stmts: &[Stmt],
        frame: &mut BTreeMap<String, Value>,
        fn_name: &str,
    ) -> Result<Flow, RuntimeFault> {
        for s in stmts {
            match self.exec_stmt(s, frame, fn_name)? {
                Flow::Next => {}
                r @ Flow::Return(_) => return Ok(r),
            }
        }
        Ok(Flow::Next)
    }

    fn exec_stmt(
        &mut self,
        s: &Stmt,
        frame: &mut BTreeMap<String, Value>,
        fn_name: &str,
    ) -> Result<Flow, RuntimeFault> {
        self.tick()?;
        match s {
            Stmt::DeclInt { name, init, span } => {
                let v = self.eval(init, frame)?;
                frame.insert(name.clone(), Value::Int(v));
                self.step(*span, vec![(name.clone(), v)]);
                Ok(Flow::Next)
            }
            // already zero-initialized at frame construction
            Stmt::DeclArray { .. } | Stmt::DeclRecord { .. } => Ok(Flow::Next),
            Stmt::Assign { target, value, span } => {
                let v = self.eval(value, frame)?;
                let updated = match target {
                    LValue::Var(n) => {
                        frame.insert(n.clone(), Value::Int(v));
                        (n.clone(), v)
                    }
                    LValue::Field(b, fld) => {
                        if let Some(Value::Rec(r)) = frame.get_mut(b) {
                            r.insert(fld.clone(), v);
                        }
                        (format!("{b}.{fld}"), v)
                    }
                    LValue::Index(b, idx) => {
                        let i = self.eval(idx, frame)?;
                        let len = match frame.get(b) {
                            Some(Value::Arr(a)) => a.len() as u32,
                            _ => 0,
                        };
                        if i < 0 || i >= len as i64 {
                            return Err(RuntimeFault::OutOfBounds {
                                array: b.clone(),
                                index: i,
                                len,
                                line: span.line,
                            });
                        }
                        if let Some(Value::Arr(a)) = frame.get_mut(b) {
                            a[i as usize] = v;
                        }
                        (format!("{b}.{i}"), v)
                    }
                };
                self.step(*span, vec![updated]);
                Ok(Flow::Next)
            }
            Stmt::If {
                cond,
                then_body,
                else_body,
                ..
            } => {
                let c = self.eval(cond, frame)?;
                if c != 0 {
                    self.exec_stmts(then_body, frame, fn_name)
                } else {
                    self.exec_stmts(else_body, frame, fn_name)
                }
            }
            Stmt::While {
                cond,
                body,
                ordinal,
                ..
            } => {
                loop {
                    // observed before every condition evaluation
                    self.sample(fn_name, PointKind::Loop(*ordinal), frame, None);
                    self.tick()?;
                    let c = self.eval(cond, frame)?;
                    if c == 0 {
                        break;
                    }
                    match self.exec_stmts(body, frame, fn_name)? {
                        Flow::Next => {}
                        r @ Flow::Return(_) => return Ok(r),
                    }
                }
                Ok(Flow::Next)
            }
            Stmt::Return { value, span } => {
                let v = match value {
                    Some(e) => Some(self.eval(e, frame)?),
                    None => None,
                };
                if let Some(rv) = v {
                    self.step(*span, vec![("return".to_string(), rv)]);
                }
                self.sample(fn_name, PointKind::Exit, frame, v);
                Ok(Flow::Return(v))
            }
            Stmt::ExprStmt { call, .. } => {
                self.eval_call_stmt(call, frame)?;
                Ok(Flow::Next)
            }
            Stmt::Assume { cond, span } => {
                let c = self.eval(cond, frame)?;
                if c == 0 {
                    Err(RuntimeFault::AssumeFailed(span.line))
                } else {
                    Ok(Flow::Next)
                }
            }
            // assertions are a model-checking construct; tracing ignores them
            Stmt::Assert { .. } => Ok(Flow::Next),
        }
    }

    fn eval_call_stmt(
        &mut self,
        call: &Expr,
        frame: &mut BTreeMap<String, Value>,
    ) -> Result<(), RuntimeFault> {
        if let ExprKind::Call(fname, args) = &call.kind {
            let vals = self.eval_args(fname, args, frame)?;
            self.call(fname, vals)?;
            Ok(())
        } else {
            unreachable!("expression statements are calls")
        }
    }

    fn eval_args(
        &mut self,
        fname: &str,
        args: &[Expr],
        frame: &mut BTreeMap<String, Value>,
    ) -> Result<Vec<Value>, RuntimeFault> {
        let callee = self.unit.function(fname).expect("callee resolved");
        let params = callee.params.clone();
        let mut vals = Vec::with_capacity(args.len());
        for (p, a) in params.iter().zip(args) {
            match &p.ty {
                TypeTag::Int => vals.push(Value::Int(self.eval(a, frame)?)),
                TypeTag::Record(_) | TypeTag::Array(_) => {
                    if let ExprKind::Var(n) = &a.kind {
                        vals.push(frame.get(n).expect("checked").clone());
                    } else {
                        unreachable!("aggregate arguments are variables")
                    }
                }
            }
        }
        Ok(vals)
    }

    fn eval(
        &mut self,
        e: &Expr,
        frame: &mut BTreeMap<String, Value>,
    ) -> Result<i64, RuntimeFault> {
        let w = self.w();
        Ok(match &e.kind {
            ExprKind::Int(v) => wrap(*v, w),
            ExprKind::Var(n) => match frame.get(n) {
                Some(Value::Int(v)) => *v,
                _ => unreachable!("scalar use checked"),
            },
            ExprKind::Field(b, f) => match frame.get(b) {
                Some(Value::Rec(r)) => *r.get(f).expect("field checked"),
                _ => unreachable!(),
            },
            ExprKind::Index(b, idx) => {
                let i = self.eval(idx, frame)?;
                match frame.get(b) {
                    Some(Value::Arr(a)) => {
                        if i < 0 || i >= a.len() as i64 {
                            return Err(RuntimeFault::OutOfBounds {
                                array: b.clone(),
                                index: i,
                                len: a.len() as u32,
                                line: e.span.line,
                            });
                        }
                        a[i as usize]
                    }
                    _ => unreachable!(),
                }
            }
            ExprKind::Unary(op, a) => {
                let v = self.eval(a, frame)?;
                match op {
                    UnOp::Neg => wrap(v.wrapping_neg(), w),
                    UnOp::Not => (v == 0) as i64,
                }
            }
            ExprKind::Binary(op, a, b) => match op {
                BinOp::And => {
                    let l = self.eval(a, frame)?;
                    if l == 0 {
                        0
                    } else {
                        (self.eval(b, frame)? != 0) as i64
                    }
                }
                BinOp::Or => {
                    let l = self.eval(a, frame)?;
                    if l != 0 {
                        1
                    } else {
                        (self.eval(b, frame)? != 0) as i64
                    }
                }
                _ => {
                    let l = self.eval(a, frame)?;
                    let r = self.eval(b, frame)?;
                    match op {
                        BinOp::Add => wrap(l.wrapping_add(r), w),
                        BinOp::Sub => wrap(l.wrapping_sub(r), w),
                        BinOp::Mul => wrap(l.wrapping_mul(r), w),
                        BinOp::Div => {
                            if r == 0 {
                                0
                            } else {
                                wrap(l.wrapping_div(r), w)
                            }
                        }
                        BinOp::Rem => {
                            if r == 0 {
                                l
                            } else {
                                wrap(l.wrapping_rem(r), w)
                            }
                        }
                        BinOp::Lt => (l < r) as i64,
                        BinOp::Le => (l <= r) as i64,
                        BinOp::Gt => (l > r) as i64,
                        BinOp::Ge => (l >= r) as i64,
                        BinOp::Eq => (l == r) as i64,
                        BinOp::Ne => (l != r) as i64,
                        BinOp::And | BinOp::Or => unreachable!(),
                    }
                }
            },
            ExprKind::Call(fname, args) => {
                let vals = self.eval_args(fname, args, frame)?;
                self.call(fname, vals)?.expect("non-void checked")
            }
        })
    }

    fn step(&mut self, span: Span, updated: Vec<(String, i64)>) {
        if !self.record_steps {
            return;
        }
        let text = self
            .unit
            .source_line(span.file, span.line)
            .unwrap_or_default();
        self.steps.push(Step {
            file: span.file,
            original_line: span.line,
            statement_text: text,
            updated,
        });
    }

    fn sample(
        &mut self,
        fn_name: &str,
        kind: PointKind,
        frame: &BTreeMap<String, Value>,
        return_value: Option<i64>,
    ) {
        if !self.monitored.contains(fn_name) {
            return;
        }
        let point = ProgramPoint::new(fn_name, kind);
        let schema = match self.unit.point_schema(&point) {
            Some(s) => s,
            None => return,
        };
        let mut flat: BTreeMap<String, i64> = BTreeMap::new();
        for (name, val) in frame {
            match val {
                Value::Int(v) => {
                    flat.insert(name.clone(), *v);
                }
                Value::Rec(r) => {
                    for (f, v) in r {
                        flat.insert(format!("{name}.{f}"), *v);
                    }
                }
                Value::Arr(a) => {
                    for (i, v) in a.iter().take(ARRAY_TRACE_CAP as usize).enumerate() {
                        flat.insert(format!("{name}.{i}"), *v);
                    }
                }
            }
        }
        if let Some(rv) = return_value {
            flat.insert("return".to_string(), rv);
        }
        let bindings: Vec<(String, i64)> = schema
            .iter()
            .map(|k| (k.clone(), flat.get(k).copied().unwrap_or(0)))
            .collect();
        self.samples.push(TraceSample {
            point,
            bindings,
            test: self.test_name.clone(),
            sequence: self.seq,
        });
        self.sample_step_marks.push(self.steps.len());
        self.seq += 1;
    }
}

pub fn zero_value(ty: &TypeTag, unit: &AnalyzedUnit) -> Value {
    match ty {
        TypeTag::Int => Value::Int(0),
        TypeTag::Record(r) => Value::Rec(
            unit.records
                .get(r)
                .map(|rd| rd.fields.iter().map(|f| (f.clone(), 0)).collect())
                .unwrap_or_default(),
        ),
        TypeTag::Array(len) => Value::Arr(vec![0; *len as usize]),
    }
}
