//! Final report assembly and rendering: a machine-readable JSON document and
//! a human-readable text rendering with annotated source lines.

use super::config::PipelineConfig;
use super::phases::{Phase4Artifact, Versions};
use crate::bmc::Counterexample;
use crate::change::{AnalysisScope, ChangeSet};
use crate::frontend::ast::Stmt;
use crate::frontend::AnalyzedUnit;
use crate::point::{PointKind, ProgramPoint};
use crate::property::{Property, PropertyId, PropertyStatus};
use crate::tracer::TraceSample;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;

#[derive(Serialize, Clone)]
pub struct Bounds {
    pub bit_width: u32,
    pub unroll_bound: u32,
    pub inline_depth: u32,
    pub solver_budget: u64,
    pub min_support: usize,
}

#[derive(Serialize, Clone)]
pub struct VerdictBounds {
    pub bit_width: u32,
    pub unroll_bound: u32,
    pub inline_depth: u32,
    /// Entry functions the verdict quantifies over; empty for verdicts that
    /// did not involve model checking.
    pub entries: Vec<String>,
}

#[derive(Serialize, Clone)]
pub struct SampleRef {
    pub test: String,
    pub sequence: u64,
    pub bindings: Vec<(String, i64)>,
}

#[derive(Serialize)]
pub struct PropertyRow {
    pub id: PropertyId,
    pub function: String,
    pub point: String,
    pub formula: String,
    /// Final lifecycle status; `phase` disambiguates a phase-2 discard from a
    /// phase-4 regression and a phase-2 budget miss from a phase-4 unchecked
    /// property.
    pub status: String,
    pub phase: u8,
    pub verdict_bounds: VerdictBounds,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outdated_sample: Option<SampleRef>,
}

#[derive(Serialize)]
pub struct LineAnnotation {
    pub line: u32,
    pub property_ids: Vec<PropertyId>,
}

#[derive(Serialize)]
pub struct FileAnnotations {
    pub version: String,
    pub file: String,
    pub lines: Vec<LineAnnotation>,
}

#[derive(Serialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    /// The only field allowed to differ between reruns on identical inputs.
    pub generated_at_unix: u64,
    pub base_dir: String,
    pub upgraded_dir: String,
    pub base_sources: Vec<String>,
    pub upgraded_sources: Vec<String>,
    pub bounds: Bounds,
    /// Scoping choice: callers and callees are unioned over both versions'
    /// call graphs.
    pub scope_note: String,
    pub no_change: bool,
    pub tests_base: Vec<String>,
    pub tests_upgrade: Vec<String>,
    pub annotations: Vec<FileAnnotations>,
}

#[derive(Serialize)]
pub struct Report {
    pub metadata: Metadata,
    pub change_set: ChangeSet,
    pub scope: AnalysisScope,
    pub properties: Vec<PropertyRow>,
    pub exit_status: i32,
}

pub struct ReportInputs<'a> {
    pub cfg: &'a PipelineConfig,
    pub versions: &'a Versions,
    pub change_set: ChangeSet,
    pub scope: Option<AnalysisScope>,
    /// Property list with phase 1-3 statuses (empty when no change).
    pub after_phase3: Vec<Property>,
    pub outdated_samples: BTreeMap<PropertyId, TraceSample>,
    pub phase4: Phase4Artifact,
    pub tests_base: Vec<String>,
    pub tests_upgrade: Vec<String>,
    pub generated_at_unix: u64,
}

pub fn build(inp: ReportInputs<'_>) -> Report {
    let cfg = inp.cfg;
    let scope = inp.scope.clone().unwrap_or_default();
    let bounds = Bounds {
        bit_width: cfg.bit_width,
        unroll_bound: cfg.unroll_bound,
        inline_depth: cfg.inline_depth,
        solver_budget: cfg.solver_budget,
        min_support: cfg.min_support,
    };
    let vb = |entries: &std::collections::BTreeSet<String>| VerdictBounds {
        bit_width: cfg.bit_width,
        unroll_bound: cfg.unroll_bound,
        inline_depth: cfg.inline_depth,
        entries: entries.iter().cloned().collect(),
    };
    let no_entries = VerdictBounds {
        bit_width: cfg.bit_width,
        unroll_bound: cfg.unroll_bound,
        inline_depth: cfg.inline_depth,
        entries: Vec::new(),
    };

    let mut rows = Vec::new();
    for p in &inp.after_phase3 {
        let (status, phase, bounds_used, cex, sample) = match p.status {
            PropertyStatus::Violated => (
                PropertyStatus::Violated,
                2,
                vb(&scope.entries_base),
                None,
                None,
            ),
            PropertyStatus::Unknown => (
                PropertyStatus::Unknown,
                2,
                vb(&scope.entries_base),
                None,
                None,
            ),
            PropertyStatus::Outdated => (
                PropertyStatus::Outdated,
                3,
                no_entries.clone(),
                None,
                inp.outdated_samples.get(&p.id).map(|s| SampleRef {
                    test: s.test.clone(),
                    sequence: s.sequence,
                    bindings: s.bindings.clone(),
                }),
            ),
            PropertyStatus::Unmappable => {
                (PropertyStatus::Unmappable, 3, no_entries.clone(), None, None)
            }
            PropertyStatus::NonRegression => {
                if let Some(cex) = inp.phase4.violated.get(&p.id) {
                    (
                        PropertyStatus::Violated,
                        4,
                        vb(&scope.entries_upgraded),
                        Some(cex.clone()),
                        None,
                    )
                } else if inp.phase4.unchecked.contains(&p.id) {
                    (
                        PropertyStatus::Unknown,
                        4,
                        vb(&scope.entries_upgraded),
                        None,
                        None,
                    )
                } else {
                    (
                        PropertyStatus::NonRegression,
                        4,
                        vb(&scope.entries_upgraded),
                        None,
                        None,
                    )
                }
            }
            // phases stopped early; surfaced as-is
            other => (other, 1, no_entries.clone(), None, None),
        };
        rows.push(PropertyRow {
            id: p.id.clone(),
            function: p.point.function.clone(),
            point: p.point.kind.to_string(),
            formula: p.formula.text(),
            status: status.to_string(),
            phase,
            verdict_bounds: bounds_used,
            counterexample: cex,
            outdated_sample: sample,
        });
    }

    let exit_status = i32::from(!inp.phase4.violated.is_empty());
    let annotations = build_annotations(inp.versions, &inp.after_phase3, &rows);
    Report {
        metadata: Metadata {
            tool: "regsentry".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            generated_at_unix: inp.generated_at_unix,
            base_dir: cfg.base_dir.display().to_string(),
            upgraded_dir: cfg.upgraded_dir.display().to_string(),
            base_sources: inp
                .versions
                .base_files
                .iter()
                .map(|p| p.display().to_string())
                .collect(),
            upgraded_sources: inp
                .versions
                .upgraded_files
                .iter()
                .map(|p| p.display().to_string())
                .collect(),
            bounds,
            scope_note: "monitored set and entry points are one call hop around the change, \
                         unioned over both versions' call graphs"
                .to_string(),
            no_change: inp.change_set.is_empty(),
            tests_base: inp.tests_base,
            tests_upgrade: inp.tests_upgrade,
            annotations,
        },
        change_set: inp.change_set,
        scope,
        properties: rows,
        exit_status,
    }
}

/// Source line anchoring a program point: the function header for ENTRY and
/// EXIT, the loop header for LOOP points.
fn anchor(unit: &AnalyzedUnit, point: &ProgramPoint) -> Option<(String, u32)> {
    let f = unit.function(&point.function)?;
    let span = match point.kind {
        PointKind::Entry | PointKind::Exit => f.span,
        PointKind::Loop(k) => find_loop(&f.body, k)?,
    };
    let file = unit.units.get(span.file as usize)?.path.clone();
    Some((file, span.line))
}

fn find_loop(stmts: &[Stmt], ordinal: u32) -> Option<crate::frontend::Span> {
    for s in stmts {
        match s {
            Stmt::While {
                ordinal: o,
                span,
                body,
                ..
            } => {
                if *o == ordinal {
                    return Some(*span);
                }
                if let Some(found) = find_loop(body, ordinal) {
                    return Some(found);
                }
            }
            Stmt::If {
                then_body,
                else_body,
                ..
            } => {
                if let Some(found) =
                    find_loop(then_body, ordinal).or_else(|| find_loop(else_body, ordinal))
                {
                    return Some(found);
                }
            }
            _ => {}
        }
    }
    None
}

fn build_annotations(
    versions: &Versions,
    props: &[Property],
    rows: &[PropertyRow],
) -> Vec<FileAnnotations> {
    // (version, file) -> line -> ids
    let mut map: BTreeMap<(String, String), BTreeMap<u32, Vec<PropertyId>>> = BTreeMap::new();
    let phase_of: BTreeMap<&str, u8> = rows.iter().map(|r| (r.id.as_str(), r.phase)).collect();
    for p in props {
        let phase = phase_of.get(p.id.as_str()).copied().unwrap_or(1);
        let (unit, label) = if phase == 2 {
            (&versions.base, "BASE")
        } else {
            (&versions.upgraded, "UPGRADED")
        };
        if let Some((file, line)) = anchor(unit, &p.point) {
            map.entry((label.to_string(), file))
                .or_default()
                .entry(line)
                .or_default()
                .push(p.id.clone());
        }
    }
    map.into_iter()
        .map(|((version, file), lines)| FileAnnotations {
            version,
            file,
            lines: lines
                .into_iter()
                .map(|(line, property_ids)| LineAnnotation { line, property_ids })
                .collect(),
        })
        .collect()
}

pub fn to_json(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serialization");
    s.push('\n');
    s
}

/// Human-readable rendering: summary, per-status property sections, and
/// affected source lines prefixed with the properties anchored there.
pub fn to_text(report: &Report, versions: &Versions) -> String {
    let mut s = String::new();
    let w = &mut s;
    let _ = writeln!(w, "regsentry regression report");
    let _ = writeln!(w, "generated_at_unix: {}", report.metadata.generated_at_unix);
    let _ = writeln!(w, "base:     {}", report.metadata.base_dir);
    let _ = writeln!(w, "upgraded: {}", report.metadata.upgraded_dir);
    let b = &report.metadata.bounds;
    let _ = writeln!(
        w,
        "bounds: width={} unroll={} depth={} solver_budget={}",
        b.bit_width, b.unroll_bound, b.inline_depth, b.solver_budget
    );
    if report.metadata.no_change {
        let _ = writeln!(w, "\nno change detected between versions; nothing to analyze");
        let _ = writeln!(w, "exit status: {}", report.exit_status);
        return s;
    }
    let list = |set: &std::collections::BTreeSet<String>| {
        set.iter().cloned().collect::<Vec<_>>().join(", ")
    };
    let _ = writeln!(
        w,
        "change: modified=[{}] added=[{}] removed=[{}]",
        list(&report.change_set.modified),
        list(&report.change_set.added),
        list(&report.change_set.removed)
    );
    let _ = writeln!(w, "monitored: [{}]", list(&report.scope.monitored));
    let _ = writeln!(
        w,
        "entries: base=[{}] upgraded=[{}]",
        list(&report.scope.entries_base),
        list(&report.scope.entries_upgraded)
    );

    let section = |w: &mut String, title: &str, pred: &dyn Fn(&PropertyRow) -> bool| {
        let rows: Vec<&PropertyRow> = report.properties.iter().filter(|r| pred(r)).collect();
        let _ = writeln!(w, "\n{title} ({}):", rows.len());
        rows
    };

    for r in section(w, "violated properties (regressions)", &|r| {
        r.status == "VIOLATED" && r.phase == 4
    }) {
        let _ = writeln!(w, "  {} {}: {}", r.function, r.point, r.formula);
        if let Some(cex) = &r.counterexample {
            let _ = writeln!(w, "    entry: {}", cex.entry);
            let inputs: Vec<String> = cex
                .inputs
                .iter()
                .map(|(k, v)| format!("{k} = {v}"))
                .collect();
            let _ = writeln!(w, "    inputs: {}", inputs.join(", "));
            let _ = writeln!(w, "    steps:");
            for st in &cex.steps {
                let file = report
                    .metadata
                    .upgraded_sources
                    .get(st.file as usize)
                    .cloned()
                    .unwrap_or_default();
                let updates: Vec<String> = st
                    .updated
                    .iter()
                    .map(|(k, v)| format!("{k} = {v}"))
                    .collect();
                let _ = writeln!(
                    w,
                    "      {file}:{}: {}    [{}]",
                    st.original_line,
                    st.statement_text,
                    updates.join(", ")
                );
            }
        }
    }
    for r in section(w, "unchecked properties (solver budget exceeded)", &|r| {
        r.status == "UNKNOWN" && r.phase == 4
    }) {
        let _ = writeln!(w, "  {} {}: {}", r.function, r.point, r.formula);
    }
    for r in section(w, "non-regression properties (preserved)", &|r| {
        r.status == "NON_REGRESSION"
    }) {
        let _ = writeln!(w, "  {} {}: {}", r.function, r.point, r.formula);
    }
    for r in section(w, "outdated properties (invalidated by the change)", &|r| {
        r.status == "OUTDATED"
    }) {
        let _ = writeln!(w, "  {} {}: {}", r.function, r.point, r.formula);
        if let Some(sr) = &r.outdated_sample {
            let binds: Vec<String> = sr
                .bindings
                .iter()
                .map(|(k, v)| format!("{k} = {v}"))
                .collect();
            let _ = writeln!(
                w,
                "    falsified by test `{}` sample #{}: {}",
                sr.test,
                sr.sequence,
                binds.join(", ")
            );
        }
    }
    for r in section(w, "discarded in phase 2 (not provable on base)", &|r| {
        r.phase == 2
    }) {
        let _ = writeln!(w, "  {} {}: {}  [{}]", r.function, r.point, r.formula, r.status);
    }
    for r in section(w, "unmappable in upgraded version", &|r| {
        r.status == "UNMAPPABLE"
    }) {
        let _ = writeln!(w, "  {} {}: {}", r.function, r.point, r.formula);
    }

    // annotated sources
    let formula_of: BTreeMap<&str, (&str, &str)> = report
        .properties
        .iter()
        .map(|r| (r.id.as_str(), (r.formula.as_str(), r.status.as_str())))
        .collect();
    let _ = writeln!(w, "\nannotated sources:");
    for fa in &report.metadata.annotations {
        let unit = if fa.version == "BASE" {
            &versions.base
        } else {
            &versions.upgraded
        };
        let file_idx = unit.units.iter().position(|u| u.path == fa.file);
        let _ = writeln!(w, "--- {} ({}) ---", fa.file, fa.version);
        for la in &fa.lines {
            for id in &la.property_ids {
                if let Some((formula, status)) = formula_of.get(id.as_str()) {
                    let _ = writeln!(w, "    // {formula}  [{status}] ({id})");
                }
            }
            let text = file_idx
                .and_then(|fi| unit.source_line(fi as u32, la.line))
                .unwrap_or_default();
            let _ = writeln!(w, "    {:>4}: {}", la.line, text);
        }
    }
    let _ = writeln!(w, "\nexit status: {}", report.exit_status);
    s
}
