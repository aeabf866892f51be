//! The four analysis phases, each persisting its results under the output
//! directory so a run can be resumed at any phase boundary.
//!
//! 1. Generate: diff the versions, trace the base test suite on the base
//!    version, infer candidate properties.
//! 2. Identify true properties: model-check candidates on the base version;
//!    only proved ones survive.
//! 3. Filter outdated properties: trace the upgrade test suite on the
//!    upgraded version; properties the new tests falsify were invalidated on
//!    purpose and are dropped.
//! 4. Identify regressions: model-check the surviving non-regression
//!    properties on the upgraded version and report violations with
//!    replayed counterexamples.

use super::config::PipelineConfig;
use super::PipelineError;
use crate::bmc::instrument::{instrument, is_mappable};
use crate::bmc::solver::SolverBudget;
use crate::bmc::{check_entry, BmcConfig, Counterexample, EntryOutcome, Verdict};
use crate::change::{self, AnalysisScope, ChangeSet};
use crate::frontend::{analyze_merged, parse, AnalyzedUnit};
use crate::property::{Property, PropertyId, PropertyStatus};
use crate::tracer::{self, ExecOptions, Suite, TestCase, TraceLog, TraceSample, Version};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

pub struct Versions {
    pub base: AnalyzedUnit,
    pub upgraded: AnalyzedUnit,
    pub base_files: Vec<PathBuf>,
    pub upgraded_files: Vec<PathBuf>,
}

fn phase_err(phase: u8, message: impl ToString) -> PipelineError {
    PipelineError::Phase {
        phase,
        message: message.to_string(),
    }
}

/// Parse and analyze both program versions.
pub fn load_versions(cfg: &PipelineConfig) -> Result<Versions, PipelineError> {
    let load = |dir: &Path| -> Result<(AnalyzedUnit, Vec<PathBuf>), PipelineError> {
        let files = cfg.source_files(dir)?;
        let mut units = Vec::new();
        let mut texts = Vec::new();
        for f in &files {
            let text = std::fs::read_to_string(f)
                .map_err(|e| phase_err(1, format!("cannot read `{}`: {e}", f.display())))?;
            let unit = parse(&text, &f.display().to_string(), false)
                .map_err(|e| phase_err(1, format!("{}: {e}", f.display())))?;
            units.push(unit);
            texts.push(text);
        }
        let analyzed = analyze_merged(units, texts)
            .map_err(|e| phase_err(1, format!("{}: {e}", dir.display())))?;
        Ok((analyzed, files))
    };
    let (base, base_files) = load(&cfg.base_dir)?;
    let (upgraded, upgraded_files) = load(&cfg.upgraded_dir)?;
    Ok(Versions {
        base,
        upgraded,
        base_files,
        upgraded_files,
    })
}

// --- artifact io -----------------------------------------------------------

#[derive(Serialize, Deserialize)]
pub struct ScopeArtifact {
    pub change_set: ChangeSet,
    /// Absent when the diff is empty and phases 2-4 are skipped.
    pub scope: Option<AnalysisScope>,
}

#[derive(Serialize, Deserialize, Default)]
pub struct Phase4Artifact {
    pub violated: BTreeMap<PropertyId, Counterexample>,
    pub preserved: BTreeSet<PropertyId>,
    pub unchecked: BTreeSet<PropertyId>,
}

fn write_file(path: &Path, contents: &str) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| PipelineError::Io(parent.to_path_buf(), e))?;
    }
    std::fs::write(path, contents).map_err(|e| PipelineError::Io(path.to_path_buf(), e))
}

fn read_file(path: &Path, phase: u8) -> Result<String, PipelineError> {
    std::fs::read_to_string(path).map_err(|e| {
        phase_err(
            phase,
            format!(
                "missing artifact `{}` ({e}); run the earlier phases first",
                path.display()
            ),
        )
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serialization");
    s.push('\n');
    write_file(path, &s)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, phase: u8) -> Result<T, PipelineError> {
    let text = read_file(path, phase)?;
    serde_json::from_str(&text)
        .map_err(|e| phase_err(phase, format!("corrupt artifact `{}`: {e}", path.display())))
}

fn write_properties(path: &Path, props: &[Property]) -> Result<(), PipelineError> {
    let mut s = String::new();
    for p in props {
        s.push_str(&p.to_line());
        s.push('\n');
    }
    write_file(path, &s)
}

fn read_properties(path: &Path, phase: u8) -> Result<Vec<Property>, PipelineError> {
    let text = read_file(path, phase)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            Property::parse_line(l).ok_or_else(|| {
                phase_err(
                    phase,
                    format!("corrupt property line in `{}`: {l}", path.display()),
                )
            })
        })
        .collect()
}

pub fn scope_path(cfg: &PipelineConfig) -> PathBuf {
    cfg.output_dir.join("phase1").join("scope.json")
}

pub fn load_scope_artifact(cfg: &PipelineConfig, phase: u8) -> Result<ScopeArtifact, PipelineError> {
    read_json(&scope_path(cfg), phase)
}

pub fn load_properties_artifact(
    cfg: &PipelineConfig,
    phase_dir: u8,
    for_phase: u8,
) -> Result<Vec<Property>, PipelineError> {
    read_properties(
        &cfg.output_dir
            .join(format!("phase{phase_dir}"))
            .join("properties.txt"),
        for_phase,
    )
}

pub fn load_outdated_artifact(
    cfg: &PipelineConfig,
    for_phase: u8,
) -> Result<BTreeMap<PropertyId, TraceSample>, PipelineError> {
    read_json(
        &cfg.output_dir.join("phase3").join("outdated.json"),
        for_phase,
    )
}

pub fn load_phase4_artifact(cfg: &PipelineConfig) -> Result<Phase4Artifact, PipelineError> {
    read_json(&cfg.output_dir.join("phase4").join("verdicts.json"), 4)
}

// --- tracing helpers -------------------------------------------------------

fn test_cases(paths: &[PathBuf], suite: Suite) -> Result<Vec<TestCase>, PipelineError> {
    paths
        .iter()
        .map(|p| {
            let name = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .filter(|s| !s.is_empty())
                .ok_or_else(|| phase_err(1, format!("bad harness path `{}`", p.display())))?;
            Ok(TestCase {
                name,
                harness_path: p.clone(),
                suite,
            })
        })
        .collect()
}

fn run_suite(
    cfg: &PipelineConfig,
    unit: &AnalyzedUnit,
    tests: &[TestCase],
    scope: &AnalysisScope,
    version: Version,
    phase: u8,
) -> Result<TraceLog, PipelineError> {
    let opts = ExecOptions {
        width: cfg.bit_width,
        ..ExecOptions::default()
    };
    let logs: Result<Vec<TraceLog>, PipelineError> = thread_pool(cfg)?.install(|| {
        tests
            .par_iter()
            .map(|t| {
                tracer::run_test(unit, t, scope, version, &opts)
                    .map_err(|e| phase_err(phase, e))
            })
            .collect()
    });
    Ok(TraceLog::merge(version, logs?))
}

fn thread_pool(cfg: &PipelineConfig) -> Result<rayon::ThreadPool, PipelineError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if cfg.parallelism > 0 {
        builder = builder.num_threads(cfg.parallelism);
    }
    builder
        .build()
        .map_err(|e| phase_err(0, format!("thread pool: {e}")))
}

fn bmc_config(cfg: &PipelineConfig) -> BmcConfig {
    BmcConfig {
        width: cfg.bit_width,
        unroll: cfg.unroll_bound,
        depth: cfg.inline_depth,
        solver: SolverBudget {
            max_conflicts: cfg.solver_budget,
            ..SolverBudget::default()
        },
    }
}

// --- model-checking helpers ------------------------------------------------

/// Combine per-entry outcomes into one verdict per property. A violation from
/// any entry wins (first in entry order); otherwise any inconclusive answer,
/// including an aborted entry or a never-reached assertion, yields Unknown.
fn aggregate(
    outcomes: &[EntryOutcome],
    checked: &[Property],
) -> BTreeMap<PropertyId, Verdict> {
    let mut agg: BTreeMap<PropertyId, Verdict> = BTreeMap::new();
    for out in outcomes {
        let ids: Vec<&PropertyId> = if out.aborted {
            checked.iter().map(|p| &p.id).collect()
        } else {
            out.verdicts.keys().collect()
        };
        for id in ids {
            let v = if out.aborted {
                Verdict::Unknown
            } else {
                out.verdicts[id].clone()
            };
            // precedence: Violated > Unknown > Valid
            match (agg.get(id), &v) {
                (Some(Verdict::Violated(_)), _) => {}
                (_, Verdict::Violated(_)) => {
                    agg.insert(id.clone(), v);
                }
                (Some(Verdict::Unknown), _) => {}
                (_, Verdict::Unknown) => {
                    agg.insert(id.clone(), Verdict::Unknown);
                }
                (None, Verdict::Valid) => {
                    agg.insert(id.clone(), Verdict::Valid);
                }
                (Some(Verdict::Valid), Verdict::Valid) => {}
            }
        }
    }
    for p in checked {
        agg.entry(p.id.clone()).or_insert(Verdict::Unknown);
    }
    agg
}

/// Model-check `props` on `unit` from every entry, in parallel over entries.
fn check_all(
    cfg: &PipelineConfig,
    unit: &AnalyzedUnit,
    entries: &BTreeSet<String>,
    props: &[Property],
    emit_cnf: bool,
    phase: u8,
) -> Result<(BTreeMap<PropertyId, Verdict>, Vec<(String, String)>), PipelineError> {
    let ins = instrument(unit, props);
    let mappable: Vec<Property> = props
        .iter()
        .filter(|p| ins.mappable.contains(&p.id))
        .cloned()
        .collect();
    let bcfg = bmc_config(cfg);
    let entry_list: Vec<&String> = entries.iter().collect();
    let outcomes: Result<Vec<EntryOutcome>, PipelineError> = thread_pool(cfg)?.install(|| {
        entry_list
            .par_iter()
            .map(|entry| {
                check_entry(unit, &ins.unit, entry, &mappable, &bcfg, emit_cnf)
                    .map_err(|e| phase_err(phase, e))
            })
            .collect()
    });
    let outcomes = outcomes?;
    let dumps = outcomes
        .iter()
        .flat_map(|o| o.cnf_dumps.iter().cloned())
        .collect();
    Ok((aggregate(&outcomes, &mappable), dumps))
}

// --- phases ----------------------------------------------------------------

pub struct Phase1Out {
    pub change_set: ChangeSet,
    pub scope: Option<AnalysisScope>,
    pub properties: Vec<Property>,
    pub base_tests_run: Vec<String>,
}

pub fn phase1(cfg: &PipelineConfig, versions: &Versions) -> Result<Phase1Out, PipelineError> {
    let change_set = change::diff(&versions.base, &versions.upgraded);
    let dir = cfg.output_dir.join("phase1");
    if change_set.is_empty() {
        write_json(
            &scope_path(cfg),
            &ScopeArtifact {
                change_set: change_set.clone(),
                scope: None,
            },
        )?;
        write_properties(&dir.join("properties.txt"), &[])?;
        write_file(
            &dir.join("traces_base.txt"),
            &tracer::format::to_string(&TraceLog::empty(Version::Base)),
        )?;
        return Ok(Phase1Out {
            change_set,
            scope: None,
            properties: Vec::new(),
            base_tests_run: Vec::new(),
        });
    }
    let scope = change::scope(&change_set, &versions.base, &versions.upgraded)
        .map_err(|e| phase_err(1, e))?;
    let tests = test_cases(&cfg.base_tests()?, Suite::Base)?;
    let log = run_suite(cfg, &versions.base, &tests, &scope, Version::Base, 1)?;
    let properties = crate::inference::infer(&log, cfg.min_support, cfg.bit_width);

    write_json(
        &scope_path(cfg),
        &ScopeArtifact {
            change_set: change_set.clone(),
            scope: Some(scope.clone()),
        },
    )?;
    write_file(&dir.join("traces_base.txt"), &tracer::format::to_string(&log))?;
    write_properties(&dir.join("properties.txt"), &properties)?;
    Ok(Phase1Out {
        change_set,
        scope: Some(scope),
        properties,
        base_tests_run: log.tests_run,
    })
}

pub fn phase2(
    cfg: &PipelineConfig,
    versions: &Versions,
    scope: &AnalysisScope,
    dynamic: &[Property],
    emit_cnf: bool,
) -> Result<Vec<Property>, PipelineError> {
    let (verdicts, dumps) = check_all(
        cfg,
        &versions.base,
        &scope.entries_base,
        dynamic,
        emit_cnf,
        2,
    )?;
    write_cnf_dumps(cfg, 2, &dumps)?;
    let properties: Vec<Property> = dynamic
        .iter()
        .map(|p| {
            let mut p = p.clone();
            p.status = match verdicts.get(&p.id) {
                Some(Verdict::Valid) => PropertyStatus::True,
                Some(Verdict::Violated(_)) => PropertyStatus::Violated,
                // includes properties that never mapped or were never reached
                Some(Verdict::Unknown) | None => PropertyStatus::Unknown,
            };
            p
        })
        .collect();
    write_properties(
        &cfg.output_dir.join("phase2").join("properties.txt"),
        &properties,
    )?;
    Ok(properties)
}

pub struct Phase3Out {
    pub properties: Vec<Property>,
    pub outdated_samples: BTreeMap<PropertyId, TraceSample>,
    pub upgrade_tests_run: Vec<String>,
}

pub fn phase3(
    cfg: &PipelineConfig,
    versions: &Versions,
    scope: &AnalysisScope,
    after_phase2: &[Property],
) -> Result<Phase3Out, PipelineError> {
    let tests = test_cases(&cfg.upgrade_tests()?, Suite::Upgrade)?;
    let log = run_suite(
        cfg,
        &versions.upgraded,
        &tests,
        scope,
        Version::Upgraded,
        3,
    )?;

    let mut outdated_samples: BTreeMap<PropertyId, TraceSample> = BTreeMap::new();
    let properties: Vec<Property> = after_phase2
        .iter()
        .map(|p| {
            let mut p = p.clone();
            if p.status != PropertyStatus::True {
                return p; // discarded in phase 2, carried through unchanged
            }
            if !is_mappable(&versions.upgraded, &p) {
                p.status = PropertyStatus::Unmappable;
                return p;
            }
            let falsifier = log.samples.iter().find(|s| {
                s.point == p.point
                    && crate::inference::holds(&p, s, cfg.bit_width) == Ok(false)
            });
            p.status = match falsifier {
                Some(s) => {
                    outdated_samples.insert(p.id.clone(), s.clone());
                    PropertyStatus::Outdated
                }
                None => PropertyStatus::NonRegression,
            };
            p
        })
        .collect();

    let dir = cfg.output_dir.join("phase3");
    write_file(&dir.join("traces_upgrade.txt"), &tracer::format::to_string(&log))?;
    write_properties(&dir.join("properties.txt"), &properties)?;
    write_json(&dir.join("outdated.json"), &outdated_samples)?;
    Ok(Phase3Out {
        properties,
        outdated_samples,
        upgrade_tests_run: log.tests_run,
    })
}

pub fn phase4(
    cfg: &PipelineConfig,
    versions: &Versions,
    scope: &AnalysisScope,
    after_phase3: &[Property],
    emit_cnf: bool,
) -> Result<Phase4Artifact, PipelineError> {
    let non_regression: Vec<Property> = after_phase3
        .iter()
        .filter(|p| p.status == PropertyStatus::NonRegression)
        .cloned()
        .collect();
    let (verdicts, dumps) = check_all(
        cfg,
        &versions.upgraded,
        &scope.entries_upgraded,
        &non_regression,
        emit_cnf,
        4,
    )?;
    write_cnf_dumps(cfg, 4, &dumps)?;
    let mut artifact = Phase4Artifact::default();
    for p in &non_regression {
        match verdicts.get(&p.id) {
            Some(Verdict::Violated(cex)) => {
                artifact.violated.insert(p.id.clone(), cex.clone());
            }
            Some(Verdict::Valid) => {
                artifact.preserved.insert(p.id.clone());
            }
            Some(Verdict::Unknown) | None => {
                artifact.unchecked.insert(p.id.clone());
            }
        }
    }
    write_json(
        &cfg.output_dir.join("phase4").join("verdicts.json"),
        &artifact,
    )?;
    Ok(artifact)
}

fn write_cnf_dumps(
    cfg: &PipelineConfig,
    phase: u8,
    dumps: &[(String, String)],
) -> Result<(), PipelineError> {
    let dir = cfg.output_dir.join(format!("phase{phase}")).join("cnf");
    for (name, text) in dumps {
        write_file(&dir.join(name), text)?;
    }
    Ok(())
}
