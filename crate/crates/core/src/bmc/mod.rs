//! Bounded model checking of properties against a program version: the
//! program is instrumented with assertions, executed symbolically into a
//! boolean circuit, and each assertion occurrence becomes one SAT query. A
//! satisfiable query is decoded into concrete entry inputs and replayed on
//! the uninstrumented program to produce a step-by-step counterexample.

pub mod circuit;
pub mod cnf;
pub mod instrument;
pub mod solver;
pub mod symexec;

use crate::frontend::sema::AnalyzedUnit;
use crate::property::{Property, PropertyId};
use crate::tracer::interp::{ExecOptions, Interp, Step, Value};
use circuit::Circuit;
use cnf::Cnf;
use solver::{solve, SolveResult, SolverBudget};
use std::collections::{BTreeMap, BTreeSet};
use symexec::{exec_entry, SymExecConfig, SymExecError, SymValue};
use thiserror::Error;

#[derive(Clone, Debug)]
pub struct BmcConfig {
    pub width: u32,
    pub unroll: u32,
    pub depth: u32,
    pub solver: SolverBudget,
}

impl Default for BmcConfig {
    fn default() -> Self {
        BmcConfig {
            width: 16,
            unroll: 5,
            depth: 16,
            solver: SolverBudget::default(),
        }
    }
}

impl BmcConfig {
    fn sym(&self) -> SymExecConfig {
        SymExecConfig {
            width: self.width,
            unroll: self.unroll,
            depth: self.depth,
        }
    }
}

/// Concrete run demonstrating a property violation.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Counterexample {
    pub entry: String,
    /// Flattened entry inputs, full arrays included.
    pub inputs: Vec<(String, i64)>,
    /// Executed statements up to and including the first violating state.
    pub steps: Vec<Step>,
}

#[derive(Clone, Debug)]
pub enum Verdict {
    /// No violation within the unrolling and inlining bounds.
    Valid,
    Violated(Counterexample),
    /// Solver budget exhausted or modeling bound exceeded.
    Unknown,
}

#[derive(Debug, Error)]
pub enum BmcError {
    #[error(
        "replay failed to reproduce the violation of property {property} from entry `{entry}`: {reason}"
    )]
    ReplayMismatch {
        property: PropertyId,
        entry: String,
        reason: String,
    },
}

/// Result of checking one entry function.
pub struct EntryOutcome {
    pub entry: String,
    /// Verdict per property that had at least one assertion occurrence on
    /// paths from this entry.
    pub verdicts: BTreeMap<PropertyId, Verdict>,
    /// Set when inlining exceeded the depth bound: no verdicts were produced
    /// and every property under check is inconclusive from this entry.
    pub aborted: bool,
    /// DIMACS dumps, one per query, when requested.
    pub cnf_dumps: Vec<(String, String)>,
}

/// Check all instrumented assertions reachable from `entry`.
///
/// `original` must be the same program without instrumentation; it is used to
/// replay counterexamples so reported steps reference real source lines.
pub fn check_entry(
    original: &AnalyzedUnit,
    instrumented: &AnalyzedUnit,
    entry: &str,
    props: &[Property],
    cfg: &BmcConfig,
    emit_cnf: bool,
) -> Result<EntryOutcome, BmcError> {
    let prop_index: BTreeMap<&str, &Property> =
        props.iter().map(|p| (p.id.as_str(), p)).collect();
    let sym = match exec_entry(instrumented, entry, &cfg.sym()) {
        Ok(r) => r,
        Err(SymExecError::DepthExceeded(_)) => {
            return Ok(EntryOutcome {
                entry: entry.to_string(),
                verdicts: BTreeMap::new(),
                aborted: true,
                cnf_dumps: Vec::new(),
            })
        }
    };

    let mut circuit = sym.circuit;
    let mut verdicts: BTreeMap<PropertyId, Verdict> = BTreeMap::new();
    let mut unknown: BTreeSet<PropertyId> = BTreeSet::new();
    let mut cnf_dumps = Vec::new();

    for (occ_idx, occ) in sym.asserts.iter().enumerate() {
        if matches!(verdicts.get(&occ.prop_id), Some(Verdict::Violated(_))) {
            continue;
        }
        verdicts.entry(occ.prop_id.clone()).or_insert(Verdict::Valid);
        let violated = circuit.not(occ.holds);
        let mut roots = sym.assumptions.clone();
        roots.push(occ.guard);
        roots.push(violated);
        let query = cnf::encode(&circuit, &roots);
        if emit_cnf {
            cnf_dumps.push((
                format!("{entry}.{}.{occ_idx}.cnf", occ.prop_id),
                cnf::to_dimacs(&query),
            ));
        }
        match solve(&query, &cfg.solver) {
            SolveResult::Unsat => {}
            SolveResult::Unknown => {
                unknown.insert(occ.prop_id.clone());
            }
            SolveResult::Sat(model) => {
                let prop = prop_index
                    .get(occ.prop_id.as_str())
                    .expect("occurrence for an unknown property");
                let inputs = decode_inputs(&circuit, &query, &model, &sym.inputs);
                let cex = replay(original, entry, &inputs, prop, cfg)?;
                verdicts.insert(occ.prop_id.clone(), Verdict::Violated(cex));
            }
        }
    }
    for id in unknown {
        if !matches!(verdicts.get(&id), Some(Verdict::Violated(_))) {
            verdicts.insert(id, Verdict::Unknown);
        }
    }
    Ok(EntryOutcome {
        entry: entry.to_string(),
        verdicts,
        aborted: false,
        cnf_dumps,
    })
}

/// Decode the entry parameters from a SAT model. Inputs absent from the CNF
/// were unconstrained; they decode as zero.
fn decode_inputs(
    circuit: &Circuit,
    query: &Cnf,
    model: &[bool],
    inputs: &[(String, SymValue)],
) -> Vec<(String, Value)> {
    let assign = |k: u32| {
        query
            .input_vars
            .get(&k)
            .is_some_and(|&v| model[v as usize])
    };
    inputs
        .iter()
        .map(|(name, sv)| {
            let v = match sv {
                SymValue::Int(b) => Value::Int(b.decode(circuit, &assign)),
                SymValue::Rec(m) => Value::Rec(
                    m.iter()
                        .map(|(f, b)| (f.clone(), b.decode(circuit, &assign)))
                        .collect(),
                ),
                SymValue::Arr(a) => {
                    Value::Arr(a.iter().map(|b| b.decode(circuit, &assign)).collect())
                }
            };
            (name.clone(), v)
        })
        .collect()
}

fn flatten_inputs(inputs: &[(String, Value)]) -> Vec<(String, i64)> {
    let mut out = Vec::new();
    for (name, v) in inputs {
        match v {
            Value::Int(x) => out.push((name.clone(), *x)),
            Value::Rec(m) => out.extend(m.iter().map(|(f, x)| (format!("{name}.{f}"), *x))),
            Value::Arr(a) => out.extend(
                a.iter()
                    .enumerate()
                    .map(|(i, x)| (format!("{name}.{i}"), *x)),
            ),
        }
    }
    out
}

/// Re-run the decoded inputs on the uninstrumented program and cut the step
/// trace at the first state falsifying the property. Failing to reproduce the
/// violation means the model and the interpreter disagree, which is a bug,
/// not an analysis result.
fn replay(
    original: &AnalyzedUnit,
    entry: &str,
    inputs: &[(String, Value)],
    prop: &Property,
    cfg: &BmcConfig,
) -> Result<Counterexample, BmcError> {
    let mismatch = |reason: &str| BmcError::ReplayMismatch {
        property: prop.id.clone(),
        entry: entry.to_string(),
        reason: reason.to_string(),
    };
    let mut interp = Interp::new(
        original,
        ExecOptions {
            width: cfg.width,
            ..ExecOptions::default()
        },
    );
    interp.set_monitored(std::iter::once(prop.point.function.clone()).collect());
    let args: Vec<Value> = inputs.iter().map(|(_, v)| v.clone()).collect();
    let outcome = interp
        .run_function(entry, args, true)
        .map_err(|e| mismatch(&format!("runtime fault: {e}")))?;
    for (i, sample) in outcome.samples.iter().enumerate() {
        if sample.point != prop.point {
            continue;
        }
        if prop.formula.eval(&sample.binding_map(), cfg.width) == Some(false) {
            let mut steps = outcome.steps;
            steps.truncate(outcome.sample_step_marks[i]);
            return Ok(Counterexample {
                entry: entry.to_string(),
                inputs: flatten_inputs(inputs),
                steps,
            });
        }
    }
    Err(mismatch("no falsifying state reached"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{analyze, parse};
    use crate::point::ProgramPoint;
    use crate::property::PropertyFormula;
    use instrument::instrument;

    fn analyzed(src: &str) -> AnalyzedUnit {
        let unit = parse(src, "test.mc", false).unwrap();
        analyze(unit, src.to_string()).unwrap()
    }

    fn check_one(src: &str, entry: &str, prop: Property) -> Verdict {
        let original = analyzed(src);
        let ins = instrument(&original, std::slice::from_ref(&prop));
        assert_eq!(ins.mappable, vec![prop.id.clone()], "property must map");
        let out = check_entry(
            &original,
            &ins.unit,
            entry,
            std::slice::from_ref(&prop),
            &BmcConfig::default(),
            false,
        )
        .unwrap();
        assert!(!out.aborted);
        out.verdicts.get(&prop.id).cloned().expect("prop reached")
    }

    const CLAMP: &str = "\
int clamp(int x) {
    if (x < 0) {
        return 0;
    }
    if (x > 10) {
        return 10;
    }
    return x;
}
";

    #[test]
    fn valid_bound_is_proved() {
        let p = Property::new(
            ProgramPoint::exit("clamp"),
            PropertyFormula::LowerBound { var: "return".into(), bound: 0 },
        );
        assert!(matches!(check_one(CLAMP, "clamp", p), Verdict::Valid));
    }

    #[test]
    fn overfit_bound_is_refuted_with_replayed_steps() {
        let p = Property::new(
            ProgramPoint::exit("clamp"),
            PropertyFormula::UpperBound { var: "return".into(), bound: 5 },
        );
        match check_one(CLAMP, "clamp", p) {
            Verdict::Violated(cex) => {
                assert_eq!(cex.entry, "clamp");
                assert_eq!(cex.inputs.len(), 1);
                let x = cex.inputs[0].1;
                assert!(x.clamp(0, 10) > 5, "input {x} must drive return above 5");
                let last = cex.steps.last().expect("steps recorded");
                assert!(last.updated.iter().any(|(n, v)| n == "return" && *v > 5));
            }
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn loop_property_checked_through_unrolling() {
        let src = "\
int sum3(int a, int b, int c) {
    int total = 0;
    int i = 0;
    while (i < 3) {
        if (i == 0) {
            total = total + a;
        }
        if (i == 1) {
            total = total + b;
        }
        if (i == 2) {
            total = total + c;
        }
        i = i + 1;
    }
    return total;
}
";
        // i stays within [0, 3] at every condition evaluation: valid
        let p_valid = Property::new(
            ProgramPoint::loop_head("sum3", 0),
            PropertyFormula::UpperBound { var: "i".into(), bound: 3 },
        );
        assert!(matches!(
            check_one(src, "sum3", p_valid),
            Verdict::Valid
        ));
        // total can go negative: violated
        let p_bad = Property::new(
            ProgramPoint::loop_head("sum3", 0),
            PropertyFormula::LowerBound { var: "total".into(), bound: 0 },
        );
        match check_one(src, "sum3", p_bad) {
            Verdict::Violated(cex) => {
                assert!(!cex.steps.is_empty());
            }
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn callee_property_checked_from_caller_entry() {
        let src = "\
int double_it(int v) {
    return v + v;
}

int twice_positive(int x) {
    if (x < 1) {
        return double_it(1);
    }
    return double_it(x);
}
";
        // from entry twice_positive, double_it is only called with v >= 1
        let p = Property::new(
            ProgramPoint::entry("double_it"),
            PropertyFormula::LowerBound { var: "v".into(), bound: 1 },
        );
        let original = analyzed(src);
        let ins = instrument(&original, std::slice::from_ref(&p));
        let out = check_entry(
            &original,
            &ins.unit,
            "twice_positive",
            std::slice::from_ref(&p),
            &BmcConfig::default(),
            false,
        )
        .unwrap();
        assert!(matches!(out.verdicts.get(&p.id), Some(Verdict::Valid)));
        // from entry double_it itself, the same property is violated
        let out2 = check_entry(
            &original,
            &ins.unit,
            "double_it",
            std::slice::from_ref(&p),
            &BmcConfig::default(),
            false,
        )
        .unwrap();
        assert!(matches!(
            out2.verdicts.get(&p.id),
            Some(Verdict::Violated(_))
        ));
    }

    #[test]
    fn array_and_record_inputs_decode_into_counterexamples() {
        let src = "\
record pair {
    int lo;
    int hi;
}

int pick(pair p, int a[3], int i) {
    if (i < 0) {
        return p.lo;
    }
    if (i > 2) {
        return p.hi;
    }
    return a[i];
}
";
        let p = Property::new(
            ProgramPoint::exit("pick"),
            PropertyFormula::EqConst { var: "return".into(), value: 0 },
        );
        match check_one(src, "pick", p) {
            Verdict::Violated(cex) => {
                // p.lo, p.hi, a.0..a.2, i
                assert_eq!(cex.inputs.len(), 6);
            }
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn wraparound_is_modeled() {
        let src = "\
int bump(int x) {
    return x + 1;
}
";
        // x + 1 >= x fails at x == INT_MAX under wraparound
        let p = Property::new(
            ProgramPoint::exit("bump"),
            PropertyFormula::RelVarVar {
                lhs: "return".into(),
                op: crate::property::RelOp::Ge,
                rhs: "x".into(),
            },
        );
        match check_one(src, "bump", p) {
            Verdict::Violated(cex) => {
                assert_eq!(cex.inputs[0].1, 32767);
            }
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn cnf_dump_is_emitted_per_query() {
        let p = Property::new(
            ProgramPoint::exit("clamp"),
            PropertyFormula::LowerBound { var: "return".into(), bound: 0 },
        );
        let original = analyzed(CLAMP);
        let ins = instrument(&original, std::slice::from_ref(&p));
        let out = check_entry(
            &original,
            &ins.unit,
            "clamp",
            std::slice::from_ref(&p),
            &BmcConfig::default(),
            true,
        )
        .unwrap();
        // three returns instrumented, three queries
        assert_eq!(out.cnf_dumps.len(), 3);
        assert!(out.cnf_dumps[0].1.contains("p cnf"));
    }
}
