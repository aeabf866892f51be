//! Acceptance gate: eight end-to-end checks over the shipped examples,
//! randomized program corpora, and the solver core. Each test prints a
//! single PASS line on success.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regsentry::bmc::instrument::instrument;
use regsentry::bmc::solver::{solve, SolveResult, SolverBudget};
use regsentry::bmc::{check_entry, BmcConfig, Counterexample, Verdict};
use regsentry::frontend::{analyze, parse, AnalyzedUnit, TypeTag};
use regsentry::inference::{holds, infer};
use regsentry::pipeline::config::PipelineConfig;
use regsentry::pipeline::report::Report;
use regsentry::pipeline::{self, ReportFormat};
use regsentry::point::ProgramPoint;
use regsentry::property::{Property, PropertyFormula, RelOp};
use regsentry::tracer::interp::{ExecOptions, Interp, Value};
use regsentry::tracer::{TraceLog, Version};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

fn testdata(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("testdata")
        .join(rel)
}

/// Run the pipeline for one shipped version pair, writing artifacts and
/// reports into a temporary directory.
fn run_pair(dir: &Path, tests_base: &str, tests_upgrade: &str) -> (Report, tempfile::TempDir) {
    let tmp = tempfile::tempdir().expect("tempdir");
    let conf = format!(
        "base_dir = {}\nupgraded_dir = {}\ntests_base = {}\ntests_upgrade = {}\noutput_dir = {}\n",
        dir.join("base").display(),
        dir.join("upgraded").display(),
        dir.join(tests_base).display(),
        dir.join(tests_upgrade).display(),
        tmp.path().join("out").display(),
    );
    let conf_path = tmp.path().join("run.conf");
    std::fs::write(&conf_path, conf).expect("write conf");
    let cfg = PipelineConfig::load(&conf_path).expect("config");
    let (report, versions) = pipeline::run(&cfg, 1, false).expect("pipeline");
    pipeline::write_reports(&cfg, &report, &versions, ReportFormat::Both).expect("reports");
    (report, tmp)
}

fn analyzed(src: &str) -> AnalyzedUnit {
    let unit = parse(src, "gen.mc", false).expect("parse");
    analyze(unit, src.to_string()).expect("analyze")
}

// --- randomized MiniC generator ---------------------------------------------
//
// Two scalar parameters, straight-line arithmetic, one guarded reassignment,
// and one loop with a fixed iteration count (always below the unroll bound),
// so exhaustive input enumeration is a complete oracle for bounded checking.

const GEN_VARS: [&str; 4] = ["a", "b", "x", "y"];

fn gen_expr(rng: &mut ChaCha8Rng, vars: &[&str]) -> String {
    let term = |rng: &mut ChaCha8Rng| -> String {
        if rng.gen_bool(0.6) {
            vars[rng.gen_range(0..vars.len())].to_string()
        } else {
            rng.gen_range(-8..=8i32).to_string()
        }
    };
    let op = ["+", "-", "*", "/", "%"][rng.gen_range(0..5)];
    format!("{} {} {}", term(rng), op, term(rng))
}

fn gen_program(rng: &mut ChaCha8Rng) -> String {
    let k = rng.gen_range(1..=4);
    let cmp = ["<", ">", "<=", ">=", "==", "!="][rng.gen_range(0..6)];
    format!(
        "int f(int a, int b) {{\n\
         \x20   int x = {};\n\
         \x20   int y = {};\n\
         \x20   if ({} {} {}) {{\n\
         \x20       x = {};\n\
         \x20   }}\n\
         \x20   int i = 0;\n\
         \x20   int acc = 0;\n\
         \x20   while (i < {k}) {{\n\
         \x20       acc = acc + ({});\n\
         \x20       i = i + 1;\n\
         \x20   }}\n\
         \x20   return {};\n\
         }}\n",
        gen_expr(rng, &GEN_VARS[..2]),
        gen_expr(rng, &GEN_VARS[..3]),
        GEN_VARS[rng.gen_range(0..4)],
        cmp,
        rng.gen_range(-6..=6i32),
        gen_expr(rng, &GEN_VARS),
        gen_expr(rng, &["x", "y", "i", "acc"]),
        gen_expr(rng, &["a", "b", "x", "y", "acc"]),
    )
}

fn gen_formula(rng: &mut ChaCha8Rng, vars: &[&str]) -> PropertyFormula {
    let v = |rng: &mut ChaCha8Rng| vars[rng.gen_range(0..vars.len())].to_string();
    match rng.gen_range(0..7) {
        0 => PropertyFormula::EqConst {
            var: v(rng),
            value: rng.gen_range(-4..=4),
        },
        1 => PropertyFormula::LowerBound {
            var: v(rng),
            bound: rng.gen_range(-20..=20),
        },
        2 => PropertyFormula::UpperBound {
            var: v(rng),
            bound: rng.gen_range(-20..=20),
        },
        3 => PropertyFormula::NonZero { var: v(rng) },
        4 => {
            let mut values: BTreeSet<i64> = BTreeSet::new();
            while values.len() < rng.gen_range(2..=3) {
                values.insert(rng.gen_range(-6..=6));
            }
            PropertyFormula::OneOf {
                var: v(rng),
                values: values.into_iter().collect(),
            }
        }
        5 => PropertyFormula::RelVarVar {
            lhs: v(rng),
            op: [RelOp::Eq, RelOp::Ne, RelOp::Ge, RelOp::Le][rng.gen_range(0..4)],
            rhs: v(rng),
        },
        _ => PropertyFormula::OffsetEq {
            lhs: v(rng),
            rhs: v(rng),
            offset: rng.gen_range(-4..=4),
        },
    }
}

fn gen_properties(rng: &mut ChaCha8Rng, count: usize) -> Vec<Property> {
    let mut props = Vec::new();
    for _ in 0..count {
        let (point, vars): (ProgramPoint, &[&str]) = if rng.gen_bool(0.3) {
            (
                ProgramPoint::loop_head("f", 0),
                &["a", "b", "x", "y", "i", "acc"],
            )
        } else {
            (
                ProgramPoint::exit("f"),
                &["a", "b", "x", "y", "acc", "return"],
            )
        };
        props.push(Property::new(point, gen_formula(rng, vars)));
    }
    props.sort_by(|p, q| p.id.cmp(&q.id));
    props.dedup_by(|p, q| p.id == q.id);
    props
}

/// Run `f(a, b)` on the interpreter and collect its trace samples.
fn trace_inputs(unit: &AnalyzedUnit, width: u32, a: i64, b: i64) -> Vec<regsentry::tracer::TraceSample> {
    let mut interp = Interp::new(
        unit,
        ExecOptions {
            width,
            ..ExecOptions::default()
        },
    );
    interp.set_monitored(BTreeSet::from(["f".to_string()]));
    interp
        .run_function("f", vec![Value::Int(a), Value::Int(b)], false)
        .expect("generated programs cannot fault")
        .samples
}

/// Exhaustive ground truth at small width: does any input falsify `p`?
fn enumerate_violated(unit: &AnalyzedUnit, p: &Property, width: u32) -> bool {
    let lo = -(1i64 << (width - 1));
    let hi = 1i64 << (width - 1);
    for a in lo..hi {
        for b in lo..hi {
            for s in trace_inputs(unit, width, a, b) {
                if s.point == p.point && !holds(p, &s, width).expect("schema match") {
                    return true;
                }
            }
        }
    }
    false
}

/// Reconstruct typed call arguments from a counterexample's flattened inputs.
fn unflatten_args(unit: &AnalyzedUnit, entry: &str, cex: &Counterexample) -> Vec<Value> {
    let lookup = |name: &str| -> i64 {
        cex.inputs
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| *v)
            .unwrap_or(0)
    };
    unit.function(entry)
        .expect("entry exists")
        .params
        .iter()
        .map(|p| match &p.ty {
            TypeTag::Int => Value::Int(lookup(&p.name)),
            TypeTag::Array(len) => Value::Arr(
                (0..*len)
                    .map(|i| lookup(&format!("{}.{i}", p.name)))
                    .collect(),
            ),
            TypeTag::Record(r) => Value::Rec(
                unit.records[r]
                    .fields
                    .iter()
                    .map(|f| (f.clone(), lookup(&format!("{}.{f}", p.name))))
                    .collect(),
            ),
        })
        .collect()
}

/// Replay a counterexample on the clean unit and confirm the property is
/// falsified at its program point.
fn replay_falsifies(unit: &AnalyzedUnit, entry: &str, p: &Property, cex: &Counterexample, width: u32) -> bool {
    let args = unflatten_args(unit, entry, cex);
    let mut interp = Interp::new(
        unit,
        ExecOptions {
            width,
            ..ExecOptions::default()
        },
    );
    interp.set_monitored(BTreeSet::from([p.point.function.clone()]));
    let out = match interp.run_function(entry, args, false) {
        Ok(o) => o,
        Err(_) => return false,
    };
    out.samples
        .iter()
        .any(|s| s.point == p.point && holds(p, s, width) == Ok(false))
}

fn row<'a>(report: &'a Report, function: &str, point: &str, formula: &str) -> &'a regsentry::pipeline::report::PropertyRow {
    report
        .properties
        .iter()
        .find(|r| r.function == function && r.point == point && r.formula == formula)
        .unwrap_or_else(|| panic!("missing property row {function} {point} {formula}"))
}

// --- criteria ----------------------------------------------------------------

#[test]
fn acceptance_1_running_example_reports_the_regression() {
    let start = Instant::now();
    let (report, _tmp) = run_pair(&testdata("store"), "tests_base.txt", "tests_upgrade.txt");

    let oneof = row(&report, "is_available", "EXIT", "return == 0 || return == 1");
    assert_eq!(oneof.status, "OUTDATED");
    assert_eq!(oneof.phase, 3);

    // `total >= 0` survives outdated filtering (so it reached phase 4 as a
    // non-regression property) and is then refuted on the upgraded version.
    let total = row(&report, "available_products", "LOOP 0", "total >= 0");
    assert_eq!(total.status, "VIOLATED");
    assert_eq!(total.phase, 4);
    let cex = total.counterexample.as_ref().expect("counterexample");
    assert!(
        cex.steps
            .iter()
            .any(|s| s.updated.iter().any(|(k, v)| k == "total" && *v == -1)),
        "counterexample must show `total` being assigned -1"
    );
    assert_eq!(report.exit_status, 1);

    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    println!("acceptance 1/8 running-example regression detection: PASS ({elapsed:?})");
}

#[test]
fn acceptance_2_overfit_bound_never_survives_phase_2() {
    let start = Instant::now();
    let (report, _tmp) = run_pair(&testdata("overfit"), "tests.txt", "tests.txt");

    let bound = row(&report, "scale", "EXIT", "return <= 25");
    assert_eq!(bound.status, "VIOLATED");
    assert_eq!(bound.phase, 2);
    assert!(
        !report
            .properties
            .iter()
            .any(|r| r.formula == "return <= 25" && r.status == "NON_REGRESSION"),
        "overfit bound must not survive as a non-regression property"
    );
    assert_eq!(report.exit_status, 0);

    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    println!("acceptance 2/8 overfit property elimination: PASS ({elapsed:?})");
}

#[test]
fn acceptance_3_bmc_agrees_with_exhaustive_enumeration() {
    let start = Instant::now();
    let width = 6;
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let cfg = BmcConfig {
        width,
        ..BmcConfig::default()
    };
    let mut programs = 0;
    let mut comparisons = 0;
    while programs < 24 {
        let src = gen_program(&mut rng);
        let unit = analyzed(&src);
        let props = gen_properties(&mut rng, 4);
        let inst = instrument(&unit, &props);
        assert!(inst.unmappable.is_empty(), "generated properties map");
        let outcome = check_entry(&unit, &inst.unit, "f", &props, &cfg, false)
            .unwrap_or_else(|e| panic!("replay must succeed: {e}\n{src}"));
        assert!(!outcome.aborted);
        for p in &props {
            let verdict = outcome.verdicts.get(&p.id).expect("verdict per property");
            let expect_violated = enumerate_violated(&unit, p, width);
            match verdict {
                Verdict::Valid => assert!(
                    !expect_violated,
                    "BMC says valid, enumeration disagrees: {} on\n{src}",
                    p.formula.text()
                ),
                Verdict::Violated(_) => assert!(
                    expect_violated,
                    "BMC says violated, enumeration disagrees: {} on\n{src}",
                    p.formula.text()
                ),
                Verdict::Unknown => panic!("budget exhausted on a tiny program:\n{src}"),
            }
            comparisons += 1;
        }
        programs += 1;
    }
    assert!(programs >= 20 && comparisons >= 60);

    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    println!(
        "acceptance 3/8 bounded checking vs exhaustive enumeration \
         ({programs} programs, {comparisons} verdicts): PASS ({elapsed:?})"
    );
}

#[test]
fn acceptance_4_sat_solver_agrees_with_truth_tables() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let budget = SolverBudget::default();
    let mut checked = 0;
    let mut sizes: Vec<u32> = Vec::new();
    for _ in 0..150 {
        sizes.push(rng.gen_range(1..=10));
    }
    for _ in 0..50 {
        sizes.push(rng.gen_range(11..=16));
    }
    for _ in 0..20 {
        sizes.push(rng.gen_range(17..=20));
    }
    for n in sizes {
        let m = if n >= 17 {
            rng.gen_range(n..=2 * n)
        } else {
            rng.gen_range(1..=4 * n)
        };
        let clauses: Vec<Vec<i32>> = (0..m)
            .map(|_| {
                (0..rng.gen_range(1..=3usize))
                    .map(|_| {
                        let v = rng.gen_range(1..=n as i32);
                        if rng.gen_bool(0.5) {
                            v
                        } else {
                            -v
                        }
                    })
                    .collect()
            })
            .collect();
        let cnf = regsentry::bmc::cnf::Cnf {
            clauses: clauses.clone(),
            var_count: n as i32,
            input_vars: Default::default(),
        };
        let brute_sat = (0u64..1 << n).any(|mask| {
            clauses.iter().all(|c| {
                c.iter().any(|&l| {
                    let bit = (mask >> (l.abs() - 1)) & 1 == 1;
                    if l > 0 {
                        bit
                    } else {
                        !bit
                    }
                })
            })
        });
        match solve(&cnf, &budget) {
            SolveResult::Sat(model) => {
                assert!(brute_sat, "solver sat, truth table unsat (n={n})");
                for c in &clauses {
                    assert!(
                        c.iter().any(|&l| model[l.unsigned_abs() as usize] == (l > 0)),
                        "model does not satisfy a clause"
                    );
                }
            }
            SolveResult::Unsat => assert!(!brute_sat, "solver unsat, truth table sat (n={n})"),
            SolveResult::Unknown => panic!("budget exhausted on a tiny formula"),
        }
        checked += 1;
    }
    assert!(checked >= 200);

    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    println!("acceptance 4/8 SAT core vs truth tables ({checked} formulas): PASS ({elapsed:?})");
}

#[test]
fn acceptance_5_inference_is_sound_on_its_own_traces() {
    let start = Instant::now();
    let width = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut checks: u64 = 0;
    for _ in 0..40 {
        let src = gen_program(&mut rng);
        let unit = analyzed(&src);
        let mut log = TraceLog::empty(Version::Base);
        for t in 0..20 {
            let a = rng.gen_range(-128..128);
            let b = rng.gen_range(-128..128);
            let mut samples = trace_inputs(&unit, width, a, b);
            for s in &mut samples {
                s.test = format!("t{t}");
            }
            log.samples.extend(samples);
            log.tests_run.push(format!("t{t}"));
        }
        let props = infer(&log, 1, width);
        for p in &props {
            for s in log.samples.iter().filter(|s| s.point == p.point) {
                assert_eq!(
                    holds(p, s, width),
                    Ok(true),
                    "inferred property {} fails a sample it was inferred from\n{src}",
                    p.formula.text()
                );
                checks += 1;
            }
        }
    }
    assert!(checks >= 10_000, "only {checks} property-sample checks");

    let elapsed = start.elapsed();
    println!(
        "acceptance 5/8 inference soundness ({checks} property-sample checks): PASS ({elapsed:?})"
    );
}

#[test]
fn acceptance_6_every_counterexample_replays_to_a_falsification() {
    let start = Instant::now();
    let width = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let cfg = BmcConfig {
        width,
        ..BmcConfig::default()
    };
    let mut replayed = 0;

    // randomized programs with randomized candidate properties
    for _ in 0..30 {
        let src = gen_program(&mut rng);
        let unit = analyzed(&src);
        let props = gen_properties(&mut rng, 4);
        let inst = instrument(&unit, &props);
        let outcome = check_entry(&unit, &inst.unit, "f", &props, &cfg, false)
            .unwrap_or_else(|e| panic!("replay must succeed: {e}\n{src}"));
        for p in &props {
            if let Some(Verdict::Violated(cex)) = outcome.verdicts.get(&p.id) {
                assert!(!cex.steps.is_empty());
                assert!(
                    replay_falsifies(&unit, "f", p, cex, width),
                    "counterexample does not replay: {} on\n{src}",
                    p.formula.text()
                );
                replayed += 1;
            }
        }
    }

    // the shipped running example, replayed on the clean upgraded sources
    let (report, _tmp) = run_pair(&testdata("store"), "tests_base.txt", "tests_upgrade.txt");
    let store_src =
        std::fs::read_to_string(testdata("store/upgraded/store.mc")).expect("store source");
    let store_unit = analyzed(&store_src);
    for r in report.properties.iter().filter(|r| r.status == "VIOLATED" && r.phase == 4) {
        let cex = r.counterexample.as_ref().expect("counterexample");
        let p = Property::parse_line(&format!("TRUE {} {} {}", r.function, r.point, r.formula))
            .expect("row round-trips to a property");
        assert!(
            replay_falsifies(&store_unit, &cex.entry, &p, cex, 16),
            "store counterexample does not replay: {} {} {}",
            r.function,
            r.point,
            r.formula
        );
        replayed += 1;
    }
    assert!(replayed > 0, "suite produced no violations to replay");

    let elapsed = start.elapsed();
    println!(
        "acceptance 6/8 counterexample replay ({replayed} counterexamples): PASS ({elapsed:?})"
    );
}

#[test]
fn acceptance_7_corpus_precision_and_recall() {
    let start = Instant::now();

    for i in 1..=10 {
        let dir = testdata(&format!("corpus/preserving/p{i:02}"));
        let (report, _tmp) = run_pair(&dir, "tests.txt", "tests.txt");
        assert_eq!(
            report.exit_status, 0,
            "false alarm on behavior-preserving pair p{i:02}"
        );
        assert!(
            !report.properties.iter().any(|r| r.status == "VIOLATED" && r.phase == 4),
            "false alarm on behavior-preserving pair p{i:02}"
        );
    }

    let (report, _tmp) = run_pair(&testdata("identical"), "tests.txt", "tests.txt");
    assert_eq!(report.exit_status, 0, "false alarm on identical versions");
    assert!(report.metadata.no_change);

    for i in 1..=10 {
        let dir = testdata(&format!("corpus/seeded/s{i:02}"));
        let (report, _tmp) = run_pair(&dir, "tests.txt", "tests.txt");
        assert_eq!(report.exit_status, 1, "missed seeded regression s{i:02}");
        assert!(
            report
                .properties
                .iter()
                .any(|r| r.status == "VIOLATED" && r.phase == 4 && r.counterexample.is_some()),
            "missed seeded regression s{i:02}"
        );
    }

    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(180), "took {elapsed:?}");
    println!(
        "acceptance 7/8 corpus precision (10 preserving + identical, 0 false alarms) \
         and recall (10/10 seeded faults): PASS ({elapsed:?})"
    );
}

#[test]
fn acceptance_8_reports_are_deterministic() {
    let start = Instant::now();
    let normalize = |tmp: &tempfile::TempDir| -> String {
        let text = std::fs::read_to_string(tmp.path().join("out/report.json")).expect("report");
        text.lines()
            .filter(|l| !l.contains("generated_at_unix"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let (_r1, tmp1) = run_pair(&testdata("store"), "tests_base.txt", "tests_upgrade.txt");
    let (_r2, tmp2) = run_pair(&testdata("store"), "tests_base.txt", "tests_upgrade.txt");
    let (a, b) = (normalize(&tmp1), normalize(&tmp2));
    assert!(!a.is_empty());
    assert_eq!(a, b, "reports differ beyond the timestamp");

    let elapsed = start.elapsed();
    println!("acceptance 8/8 byte-identical reports modulo timestamp: PASS ({elapsed:?})");
}
