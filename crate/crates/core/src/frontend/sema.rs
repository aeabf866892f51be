//! Semantic analysis: name/type checking, recursion rejection, call-graph
//! construction, and enumeration of program points with their variable
//! schemas.

use super::ast::*;
use super::SemanticError;
use crate::point::ProgramPoint;
use std::collections::{BTreeMap, BTreeSet};

/// Arrays are traced through scalar derived views `arr.0 .. arr.k-1` with
/// `k = min(length, 8)`; this keeps the inference variable universe small.
pub const ARRAY_TRACE_CAP: u32 = 8;

/// Caller -> callee edges, one per syntactic call relationship.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CallGraph {
    pub nodes: BTreeSet<String>,
    pub edges: BTreeSet<(String, String)>,
}

impl CallGraph {
    /// Exact syntactic caller set of `g`.
    pub fn callers_of(&self, g: &str) -> Result<BTreeSet<String>, SemanticError> {
        if !self.nodes.contains(g) {
            return Err(SemanticError::UnknownFunction(g.to_string()));
        }
        Ok(self
            .edges
            .iter()
            .filter(|(_, callee)| callee == g)
            .map(|(caller, _)| caller.clone())
            .collect())
    }

    pub fn callees_of(&self, f: &str) -> BTreeSet<String> {
        self.edges
            .iter()
            .filter(|(caller, _)| caller == f)
            .map(|(_, callee)| callee.clone())
            .collect()
    }
}

/// A program point together with its statically computed in-scope variable
/// list (flattened names, in schema order).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointInfo {
    pub point: ProgramPoint,
    pub schema: Vec<String>,
}

/// Flattened view of one declared variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarInfo {
    pub name: String,
    pub ty: TypeTag,
    pub is_param: bool,
}

/// Type-checked abstract syntax of one program version plus its call graph
/// and program-point model. Immutable after construction.
#[derive(Clone, Debug)]
pub struct AnalyzedUnit {
    /// Merged source files, in input order.
    pub units: Vec<SourceUnit>,
    /// Raw text of each source file, for line lookups in counterexamples.
    pub texts: Vec<String>,
    pub records: BTreeMap<String, RecordDecl>,
    /// function name -> (unit index, function index)
    pub fn_index: BTreeMap<String, (usize, usize)>,
    pub call_graph: CallGraph,
    /// function name -> points in order ENTRY, LOOP(0..), EXIT.
    pub points: BTreeMap<String, Vec<PointInfo>>,
    /// function name -> declared variables (params then locals, in order).
    pub vars: BTreeMap<String, Vec<VarInfo>>,
}

impl AnalyzedUnit {
    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        let (u, f) = *self.fn_index.get(name)?;
        Some(&self.units[u].functions[f])
    }

    pub fn function_names(&self) -> BTreeSet<String> {
        self.fn_index.keys().cloned().collect()
    }

    pub fn point_schema(&self, point: &ProgramPoint) -> Option<&[String]> {
        self.points
            .get(&point.function)?
            .iter()
            .find(|pi| pi.point.kind == point.kind)
            .map(|pi| pi.schema.as_slice())
    }

    /// Source line text (trimmed) at a given file/line, e.g. for
    /// counterexample steps.
    pub fn source_line(&self, file: u32, line: u32) -> Option<String> {
        let text = self.texts.get(file as usize)?;
        text.lines().nth(line.saturating_sub(1) as usize).map(|l| l.trim().to_string())
    }
}

/// Flatten one variable to its scalar trace views.
pub fn flatten_var(
    name: &str,
    ty: &TypeTag,
    records: &BTreeMap<String, RecordDecl>,
) -> Vec<String> {
    match ty {
        TypeTag::Int => vec![name.to_string()],
        TypeTag::Record(r) => records
            .get(r)
            .map(|rd| rd.fields.iter().map(|f| format!("{name}.{f}")).collect())
            .unwrap_or_default(),
        TypeTag::Array(len) => (0..(*len).min(ARRAY_TRACE_CAP))
            .map(|i| format!("{name}.{i}"))
            .collect(),
    }
}

/// Analyze a single unit.
pub fn analyze(unit: SourceUnit, text: String) -> Result<AnalyzedUnit, SemanticError> {
    analyze_merged(vec![unit], vec![text])
}

/// Analyze several files as one program. Function and record names must be
/// unique across the whole set.
pub fn analyze_merged(
    units: Vec<SourceUnit>,
    texts: Vec<String>,
) -> Result<AnalyzedUnit, SemanticError> {
    assert_eq!(units.len(), texts.len());
    let mut records: BTreeMap<String, RecordDecl> = BTreeMap::new();
    let mut fn_index: BTreeMap<String, (usize, usize)> = BTreeMap::new();

    // fix up file indices on spans
    let mut units = units;
    for (ui, u) in units.iter_mut().enumerate() {
        set_file_indices(u, ui as u32);
    }

    for (ui, u) in units.iter().enumerate() {
        for r in &u.record_decls {
            if r.fields.is_empty() {
                return Err(SemanticError::EmptyRecord(r.name.clone()));
            }
            let mut seen = BTreeSet::new();
            for f in &r.fields {
                if !seen.insert(f) {
                    return Err(SemanticError::DuplicateName(format!(
                        "field `{f}` in record `{}`",
                        r.name
                    )));
                }
            }
            if records.insert(r.name.clone(), r.clone()).is_some() {
                return Err(SemanticError::DuplicateName(format!("record `{}`", r.name)));
            }
        }
        for (fi, f) in u.functions.iter().enumerate() {
            if fn_index.insert(f.name.clone(), (ui, fi)).is_some() {
                return Err(SemanticError::DuplicateName(format!(
                    "function `{}`",
                    f.name
                )));
            }
        }
    }

    let mut call_graph = CallGraph::default();
    let mut points = BTreeMap::new();
    let mut vars = BTreeMap::new();

    for u in &units {
        for f in u.functions.iter() {
            call_graph.nodes.insert(f.name.clone());
        }
    }

    for u in &units {
        for f in &u.functions {
            let checker = FnChecker {
                records: &records,
                fn_index: &fn_index,
                units: &units,
            };
            let fn_vars = checker.check_function(f)?;
            // call edges
            let mut callees = BTreeSet::new();
            collect_calls(&f.body, &mut callees);
            for c in callees {
                call_graph.edges.insert((f.name.clone(), c));
            }
            // points
            points.insert(f.name.clone(), build_points(f, &fn_vars, &records));
            vars.insert(f.name.clone(), fn_vars);
        }
    }

    // recursion (direct or mutual) is rejected
    check_acyclic(&call_graph)?;

    Ok(AnalyzedUnit {
        units,
        texts,
        records,
        fn_index,
        call_graph,
        points,
        vars,
    })
}

fn set_file_indices(u: &mut SourceUnit, file: u32) {
    fn fix_expr(e: &mut Expr, file: u32) {
        e.span.file = file;
        match &mut e.kind {
            ExprKind::Index(_, i) => fix_expr(i, file),
            ExprKind::Unary(_, a) => fix_expr(a, file),
            ExprKind::Binary(_, a, b) => {
                fix_expr(a, file);
                fix_expr(b, file);
            }
            ExprKind::Call(_, args) => args.iter_mut().for_each(|a| fix_expr(a, file)),
            _ => {}
        }
    }
    fn fix_stmts(stmts: &mut [Stmt], file: u32) {
        for s in stmts {
            match s {
                Stmt::DeclInt { init, span, .. } => {
                    span.file = file;
                    fix_expr(init, file);
                }
                Stmt::DeclArray { span, .. } | Stmt::DeclRecord { span, .. } => span.file = file,
                Stmt::Assign { target, value, span } => {
                    span.file = file;
                    if let LValue::Index(_, i) = target {
                        fix_expr(i, file);
                    }
                    fix_expr(value, file);
                }
                Stmt::If {
                    cond,
                    then_body,
                    else_body,
                    span,
                } => {
                    span.file = file;
                    fix_expr(cond, file);
                    fix_stmts(then_body, file);
                    fix_stmts(else_body, file);
                }
                Stmt::While { cond, body, span, .. } => {
                    span.file = file;
                    fix_expr(cond, file);
                    fix_stmts(body, file);
                }
                Stmt::Return { value, span } => {
                    span.file = file;
                    if let Some(e) = value {
                        fix_expr(e, file);
                    }
                }
                Stmt::ExprStmt { call, span } => {
                    span.file = file;
                    fix_expr(call, file);
                }
                Stmt::Assume { cond, span } => {
                    span.file = file;
                    fix_expr(cond, file);
                }
                Stmt::Assert { span, .. } => span.file = file,
            }
        }
    }
    for r in &mut u.record_decls {
        r.span.file = file;
    }
    for f in &mut u.functions {
        f.span.file = file;
        fix_stmts(&mut f.body, file);
    }
}

fn collect_calls(stmts: &[Stmt], out: &mut BTreeSet<String>) {
    fn expr_calls(e: &Expr, out: &mut BTreeSet<String>) {
        match &e.kind {
            ExprKind::Call(f, args) => {
                out.insert(f.clone());
                args.iter().for_each(|a| expr_calls(a, out));
            }
            ExprKind::Index(_, i) => expr_calls(i, out),
            ExprKind::Unary(_, a) => expr_calls(a, out),
            ExprKind::Binary(_, a, b) => {
                expr_calls(a, out);
                expr_calls(b, out);
            }
            _ => {}
        }
    }
    for s in stmts {
        match s {
            Stmt::DeclInt { init, .. } => expr_calls(init, out),
            Stmt::Assign { target, value, .. } => {
                if let LValue::Index(_, i) = target {
                    expr_calls(i, out);
                }
                expr_calls(value, out);
            }
            Stmt::If {
                cond,
                then_body,
                else_body,
                ..
            } => {
                expr_calls(cond, out);
                collect_calls(then_body, out);
                collect_calls(else_body, out);
            }
            Stmt::While { cond, body, .. } => {
                expr_calls(cond, out);
                collect_calls(body, out);
            }
            Stmt::Return { value: Some(e), .. } => expr_calls(e, out),
            Stmt::ExprStmt { call, .. } => expr_calls(call, out),
            Stmt::Assume { cond, .. } => expr_calls(cond, out),
            _ => {}
        }
    }
}

fn check_acyclic(cg: &CallGraph) -> Result<(), SemanticError> {
    fn dfs(
        n: &str,
        cg: &CallGraph,
        color: &mut BTreeMap<String, u8>,
    ) -> Result<(), SemanticError> {
        color.insert(n.to_string(), 1);
        for callee in cg.callees_of(n) {
            match color.get(&callee).copied().unwrap_or(0) {
                1 => return Err(SemanticError::RecursionDetected(callee)),
                0 => dfs(&callee, cg, color)?,
                _ => {}
            }
        }
        color.insert(n.to_string(), 2);
        Ok(())
    }
    let mut color: BTreeMap<String, u8> = BTreeMap::new();
    for n in cg.nodes.iter() {
        if color.get(n).copied().unwrap_or(0) == 0 {
            dfs(n, cg, &mut color)?;
        }
    }
    Ok(())
}

fn build_points(
    f: &FunctionDef,
    fn_vars: &[VarInfo],
    records: &BTreeMap<String, RecordDecl>,
) -> Vec<PointInfo> {
    let param_schema: Vec<String> = fn_vars
        .iter()
        .filter(|v| v.is_param)
        .flat_map(|v| flatten_var(&v.name, &v.ty, records))
        .collect();
    let full_schema: Vec<String> = fn_vars
        .iter()
        .flat_map(|v| flatten_var(&v.name, &v.ty, records))
        .collect();

    let mut out = vec![PointInfo {
        point: ProgramPoint::entry(&f.name),
        schema: param_schema,
    }];
    let n_loops = count_loops(&f.body);
    for k in 0..n_loops {
        out.push(PointInfo {
            point: ProgramPoint::loop_head(&f.name, k),
            schema: full_schema.clone(),
        });
    }
    let mut exit_schema = full_schema;
    if f.return_type.is_some() {
        exit_schema.push("return".to_string());
    }
    out.push(PointInfo {
        point: ProgramPoint::exit(&f.name),
        schema: exit_schema,
    });
    out
}

fn count_loops(stmts: &[Stmt]) -> u32 {
    let mut n = 0;
    for s in stmts {
        match s {
            Stmt::While { body, .. } => n += 1 + count_loops(body),
            Stmt::If {
                then_body,
                else_body,
                ..
            } => n += count_loops(then_body) + count_loops(else_body),
            _ => {}
        }
    }
    n
}

struct FnChecker<'a> {
    records: &'a BTreeMap<String, RecordDecl>,
    fn_index: &'a BTreeMap<String, (usize, usize)>,
    units: &'a [SourceUnit],
}

impl<'a> FnChecker<'a> {
    fn fn_def(&self, name: &str) -> Option<&FunctionDef> {
        let (u, f) = *self.fn_index.get(name)?;
        Some(&self.units[u].functions[f])
    }

    fn check_type(&self, ty: &TypeTag, at: Span) -> Result<(), SemanticError> {
        match ty {
            TypeTag::Int => Ok(()),
            TypeTag::Record(r) => {
                if self.records.contains_key(r) {
                    Ok(())
                } else {
                    Err(SemanticError::UndefinedName(format!("record `{r}`"), at.line))
                }
            }
            TypeTag::Array(len) => {
                if *len >= 1 {
                    Ok(())
                } else {
                    Err(SemanticError::BadArrayLength(at.line))
                }
            }
        }
    }

    fn check_function(&self, f: &FunctionDef) -> Result<Vec<VarInfo>, SemanticError> {
        match &f.return_type {
            None | Some(TypeTag::Int) => {}
            Some(_) => {
                return Err(SemanticError::TypeMismatch(format!(
                    "function `{}`: return type must be `int` or `void`",
                    f.name
                )))
            }
        }
        let mut vars: Vec<VarInfo> = Vec::new();
        let mut names: BTreeSet<String> = BTreeSet::new();
        for p in &f.params {
            self.check_type(&p.ty, f.span)?;
            if !names.insert(p.name.clone()) {
                return Err(SemanticError::DuplicateName(format!(
                    "parameter `{}` in function `{}`",
                    p.name, f.name
                )));
            }
            vars.push(VarInfo {
                name: p.name.clone(),
                ty: p.ty.clone(),
                is_param: true,
            });
        }
        // collect locals in preorder; names must be unique across the whole
        // function (no shadowing), so every point's schema is static
        self.collect_locals(&f.body, &mut vars, &mut names, &f.name)?;
        let env: BTreeMap<String, TypeTag> = vars
            .iter()
            .map(|v| (v.name.clone(), v.ty.clone()))
            .collect();
        self.check_stmts(&f.body, &env, f)?;
        if f.return_type.is_some() && !must_return(&f.body) {
            return Err(SemanticError::MissingReturn(f.name.clone()));
        }
        Ok(vars)
    }

    fn collect_locals(
        &self,
        stmts: &[Stmt],
        vars: &mut Vec<VarInfo>,
        names: &mut BTreeSet<String>,
        fn_name: &str,
    ) -> Result<(), SemanticError> {
        for s in stmts {
            let decl = match s {
                Stmt::DeclInt { name, span, .. } => Some((name, TypeTag::Int, *span)),
                Stmt::DeclArray { name, len, span } => Some((name, TypeTag::Array(*len), *span)),
                Stmt::DeclRecord { name, record, span } => {
                    Some((name, TypeTag::Record(record.clone()), *span))
                }
                _ => None,
            };
            if let Some((name, ty, span)) = decl {
                self.check_type(&ty, span)?;
                if !names.insert(name.clone()) {
                    return Err(SemanticError::DuplicateName(format!(
                        "variable `{name}` in function `{fn_name}`"
                    )));
                }
                vars.push(VarInfo {
                    name: name.clone(),
                    ty,
                    is_param: false,
                });
            }
            match s {
                Stmt::If {
                    then_body,
                    else_body,
                    ..
                } => {
                    self.collect_locals(then_body, vars, names, fn_name)?;
                    self.collect_locals(else_body, vars, names, fn_name)?;
                }
                Stmt::While { body, .. } => self.collect_locals(body, vars, names, fn_name)?,
                _ => {}
            }
        }
        Ok(())
    }

    fn check_stmts(
        &self,
        stmts: &[Stmt],
        env: &BTreeMap<String, TypeTag>,
        f: &FunctionDef,
    ) -> Result<(), SemanticError> {
        for s in stmts {
            match s {
                Stmt::DeclInt { init, .. } => self.check_int_expr(init, env)?,
                Stmt::DeclArray { .. } | Stmt::DeclRecord { .. } => {}
                Stmt::Assign { target, value, .. } => {
                    match target {
                        LValue::Var(n) => match env.get(n) {
                            Some(TypeTag::Int) => {}
                            Some(_) => {
                                return Err(SemanticError::TypeMismatch(format!(
                                    "cannot assign whole aggregate `{n}`"
                                )))
                            }
                            None => {
                                return Err(SemanticError::UndefinedName(
                                    format!("variable `{n}`"),
                                    s.span().line,
                                ))
                            }
                        },
                        LValue::Field(b, fld) => self.check_field(b, fld, env, s.span())?,
                        LValue::Index(b, idx) => {
                            self.check_array_base(b, env, s.span())?;
                            self.check_int_expr(idx, env)?;
                        }
                    }
                    self.check_int_expr(value, env)?;
                }
                Stmt::If {
                    cond,
                    then_body,
                    else_body,
                    ..
                } => {
                    self.check_int_expr(cond, env)?;
                    self.check_stmts(then_body, env, f)?;
                    self.check_stmts(else_body, env, f)?;
                }
                Stmt::While { cond, body, .. } => {
                    self.check_int_expr(cond, env)?;
                    self.check_stmts(body, env, f)?;
                }
                Stmt::Return { value, span } => match (&f.return_type, value) {
                    (Some(_), Some(e)) => self.check_int_expr(e, env)?,
                    (None, None) => {}
                    (Some(_), None) => {
                        return Err(SemanticError::TypeMismatch(format!(
                            "function `{}`: `return;` in non-void function (line {})",
                            f.name, span.line
                        )))
                    }
                    (None, Some(_)) => {
                        return Err(SemanticError::TypeMismatch(format!(
                            "function `{}`: value returned from void function (line {})",
                            f.name, span.line
                        )))
                    }
                },
                Stmt::ExprStmt { call, .. } => {
                    // type of a call statement may be int or void
                    self.check_expr(call, env, true)?;
                }
                Stmt::Assume { cond, .. } => self.check_int_expr(cond, env)?,
                Stmt::Assert { .. } => {}
            }
        }
        Ok(())
    }

    fn check_field(
        &self,
        base: &str,
        field: &str,
        env: &BTreeMap<String, TypeTag>,
        span: Span,
    ) -> Result<(), SemanticError> {
        match env.get(base) {
            Some(TypeTag::Record(r)) => {
                let rd = self.records.get(r).expect("record checked");
                if rd.fields.iter().any(|f| f == field) {
                    Ok(())
                } else {
                    Err(SemanticError::UndefinedName(
                        format!("field `{field}` of record `{r}`"),
                        span.line,
                    ))
                }
            }
            Some(_) => Err(SemanticError::TypeMismatch(format!(
                "`{base}` is not a record (line {})",
                span.line
            ))),
            None => Err(SemanticError::UndefinedName(
                format!("variable `{base}`"),
                span.line,
            )),
        }
    }

    fn check_array_base(
        &self,
        base: &str,
        env: &BTreeMap<String, TypeTag>,
        span: Span,
    ) -> Result<(), SemanticError> {
        match env.get(base) {
            Some(TypeTag::Array(_)) => Ok(()),
            Some(_) => Err(SemanticError::TypeMismatch(format!(
                "`{base}` is not an array (line {})",
                span.line
            ))),
            None => Err(SemanticError::UndefinedName(
                format!("variable `{base}`"),
                span.line,
            )),
        }
    }

    fn check_int_expr(
        &self,
        e: &Expr,
        env: &BTreeMap<String, TypeTag>,
    ) -> Result<(), SemanticError> {
        self.check_expr(e, env, false)
    }

    /// `allow_void`: permit a void call in statement position.
    fn check_expr(
        &self,
        e: &Expr,
        env: &BTreeMap<String, TypeTag>,
        allow_void: bool,
    ) -> Result<(), SemanticError> {
        match &e.kind {
            ExprKind::Int(_) => Ok(()),
            ExprKind::Var(n) => match env.get(n) {
                Some(TypeTag::Int) => Ok(()),
                Some(_) => Err(SemanticError::TypeMismatch(format!(
                    "aggregate `{n}` used as a scalar (line {})",
                    e.span.line
                ))),
                None => Err(SemanticError::UndefinedName(
                    format!("variable `{n}`"),
                    e.span.line,
                )),
            },
            ExprKind::Field(b, f) => self.check_field(b, f, env, e.span),
            ExprKind::Index(b, i) => {
                self.check_array_base(b, env, e.span)?;
                self.check_int_expr(i, env)
            }
            ExprKind::Unary(_, a) => self.check_int_expr(a, env),
            ExprKind::Binary(_, a, b) => {
                self.check_int_expr(a, env)?;
                self.check_int_expr(b, env)
            }
            ExprKind::Call(fname, args) => {
                let callee = self.fn_def(fname).ok_or_else(|| {
                    SemanticError::UndefinedName(format!("function `{fname}`"), e.span.line)
                })?;
                if callee.params.len() != args.len() {
                    return Err(SemanticError::ArityMismatch {
                        function: fname.clone(),
                        expected: callee.params.len(),
                        found: args.len(),
                        line: e.span.line,
                    });
                }
                for (p, a) in callee.params.iter().zip(args) {
                    match &p.ty {
                        TypeTag::Int => self.check_int_expr(a, env)?,
                        TypeTag::Record(r) => match &a.kind {
                            ExprKind::Var(n) if env.get(n) == Some(&TypeTag::Record(r.clone())) => {}
                            _ => {
                                return Err(SemanticError::TypeMismatch(format!(
                                    "argument for `{}` of `{fname}` must be a `{r}` variable (line {})",
                                    p.name, a.span.line
                                )))
                            }
                        },
                        TypeTag::Array(len) => match &a.kind {
                            ExprKind::Var(n) if env.get(n) == Some(&TypeTag::Array(*len)) => {}
                            _ => {
                                return Err(SemanticError::TypeMismatch(format!(
                                    "argument for `{}` of `{fname}` must be an `int[{len}]` variable (line {})",
                                    p.name, a.span.line
                                )))
                            }
                        },
                    }
                }
                if callee.return_type.is_none() && !allow_void {
                    return Err(SemanticError::TypeMismatch(format!(
                        "void call `{fname}` used as a value (line {})",
                        e.span.line
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Conservative definite-return analysis: true when every control path ends
/// in a `return`.
fn must_return(stmts: &[Stmt]) -> bool {
    for s in stmts {
        match s {
            Stmt::Return { .. } => return true,
            Stmt::If {
                then_body,
                else_body,
                ..
            } => {
                if !else_body.is_empty() && must_return(then_body) && must_return(else_body) {
                    return true;
                }
            }
            _ => {}
        }
    }
    false
}
