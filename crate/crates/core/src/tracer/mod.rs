//! Test execution and trace collection. A deterministic MiniC interpreter
//! runs harness functions and snapshots in-scope variable values at the
//! monitored program points.

pub mod format;
pub mod interp;

pub use format::{read_trace, write_trace, TraceFormatError};
pub use interp::{ExecOptions, ExecOutcome, Interp, RuntimeFault, Step, Value};

use crate::change::AnalysisScope;
use crate::frontend::{analyze_merged, parse, AnalyzedUnit, ParseError, SemanticError};
use crate::point::ProgramPoint;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Suite {
    Base,
    Upgrade,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Version {
    Base,
    Upgraded,
}

impl Version {
    pub fn label(&self) -> &'static str {
        match self {
            Version::Base => "BASE",
            Version::Upgraded => "UPGRADED",
        }
    }
}

/// One test harness: a MiniC file containing exactly one zero-parameter
/// function named `test_<name>` that calls into the unit under analysis
/// with concrete arguments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TestCase {
    pub name: String,
    pub harness_path: PathBuf,
    pub suite: Suite,
}

/// One snapshot of in-scope variable values at a program point. Bindings are
/// kept in schema order; the key set equals the point's in-scope list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceSample {
    pub point: ProgramPoint,
    pub bindings: Vec<(String, i64)>,
    pub test: String,
    pub sequence: u64,
}

impl TraceSample {
    pub fn binding_map(&self) -> BTreeMap<String, i64> {
        self.bindings.iter().cloned().collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceLog {
    pub version: Version,
    pub samples: Vec<TraceSample>,
    pub tests_run: Vec<String>,
}

impl TraceLog {
    pub fn empty(version: Version) -> TraceLog {
        TraceLog {
            version,
            samples: Vec::new(),
            tests_run: Vec::new(),
        }
    }

    /// Merge several per-test logs; samples ordered by (test, sequence).
    pub fn merge(version: Version, logs: Vec<TraceLog>) -> TraceLog {
        let mut samples = Vec::new();
        let mut tests_run = Vec::new();
        for log in logs {
            debug_assert_eq!(log.version, version);
            samples.extend(log.samples);
            tests_run.extend(log.tests_run);
        }
        samples.sort_by(|a, b| (&a.test, a.sequence).cmp(&(&b.test, b.sequence)));
        tests_run.sort();
        TraceLog {
            version,
            samples,
            tests_run,
        }
    }
}

#[derive(Debug, Error)]
pub enum TracerError {
    #[error("harness `{0}`: {1}")]
    HarnessParse(String, ParseError),
    #[error("harness `{0}`: {1}")]
    HarnessSemantic(String, SemanticError),
    #[error("harness `{0}`: {1}")]
    HarnessShape(String, String),
    #[error("test `{test}`: {fault}")]
    Fault { test: String, fault: RuntimeFault },
    #[error("io error on `{0}`: {1}")]
    Io(String, std::io::Error),
}

/// Execute one test harness against a program version, sampling the
/// monitored functions. Deterministic: two runs produce identical logs.
pub fn run_test(
    unit: &AnalyzedUnit,
    test: &TestCase,
    scope: &AnalysisScope,
    version: Version,
    opts: &ExecOptions,
) -> Result<TraceLog, TracerError> {
    let path_str = test.harness_path.display().to_string();
    let text = std::fs::read_to_string(&test.harness_path)
        .map_err(|e| TracerError::Io(path_str.clone(), e))?;
    run_test_source(unit, test, &text, scope, version, opts)
}

/// Same as [`run_test`] but with the harness text supplied directly.
pub fn run_test_source(
    unit: &AnalyzedUnit,
    test: &TestCase,
    harness_text: &str,
    scope: &AnalysisScope,
    version: Version,
    opts: &ExecOptions,
) -> Result<TraceLog, TracerError> {
    let path_str = test.harness_path.display().to_string();
    // `assume` is forbidden in test harnesses: pass/fail is "ran to completion"
    let harness_unit = parse(harness_text, &path_str, false)
        .map_err(|e| TracerError::HarnessParse(path_str.clone(), e))?;

    let expected = format!("test_{}", test.name);
    let test_fns: Vec<&str> = harness_unit
        .functions
        .iter()
        .filter(|f| f.name.starts_with("test_"))
        .map(|f| f.name.as_str())
        .collect();
    if test_fns.len() != 1 || test_fns[0] != expected {
        return Err(TracerError::HarnessShape(
            path_str,
            format!("expected exactly one zero-parameter function `{expected}`"),
        ));
    }
    let tf = harness_unit
        .functions
        .iter()
        .find(|f| f.name == expected)
        .unwrap();
    if !tf.params.is_empty() {
        return Err(TracerError::HarnessShape(
            path_str,
            format!("`{expected}` must take no parameters"),
        ));
    }

    let mut units = unit.units.clone();
    let mut texts = unit.texts.clone();
    units.push(harness_unit);
    texts.push(harness_text.to_string());
    let combined =
        analyze_merged(units, texts).map_err(|e| TracerError::HarnessSemantic(path_str, e))?;

    let mut interp = Interp::new(&combined, opts.clone());
    interp.set_monitored(scope.monitored.clone());
    interp.set_test_name(test.name.clone());
    let outcome = interp
        .run_function(&expected, Vec::new(), false)
        .map_err(|fault| TracerError::Fault {
            test: test.name.clone(),
            fault,
        })?;

    Ok(TraceLog {
        version,
        samples: outcome.samples,
        tests_run: vec![test.name.clone()],
    })
}
