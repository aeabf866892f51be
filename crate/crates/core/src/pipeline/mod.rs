//! End-to-end orchestration of the four analysis phases, with artifact
//! persistence under the output directory so later phases can be rerun
//! without repeating earlier work.

pub mod config;
pub mod phases;
pub mod report;

use config::{ConfigError, PipelineConfig};
use phases::{Phase4Artifact, Versions};
use report::{Report, ReportInputs};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("phase {phase}: {message}")]
    Phase { phase: u8, message: String },
    #[error("io error at `{0}`: {1}")]
    Io(PathBuf, #[source] std::io::Error),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ReportFormat {
    Json,
    Text,
    Both,
}

fn test_names(paths: &[PathBuf]) -> Vec<String> {
    paths
        .iter()
        .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .collect()
}

/// Run phases `resume_from..=4`, loading persisted artifacts for earlier
/// phases, and assemble the final report. Does not write the report files.
pub fn run(
    cfg: &PipelineConfig,
    resume_from: u8,
    emit_cnf: bool,
) -> Result<(Report, Versions), PipelineError> {
    let versions = phases::load_versions(cfg)?;
    let generated_at_unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let tests_base = test_names(&cfg.base_tests()?);
    let tests_upgrade = test_names(&cfg.upgrade_tests()?);

    let (change_set, scope_opt, phase1_props) = if resume_from <= 1 {
        let out = phases::phase1(cfg, &versions)?;
        (out.change_set, out.scope, out.properties)
    } else {
        let art = phases::load_scope_artifact(cfg, resume_from)?;
        let props = if art.scope.is_some() {
            phases::load_properties_artifact(cfg, 1, resume_from)?
        } else {
            Vec::new()
        };
        (art.change_set, art.scope, props)
    };

    let Some(scope) = scope_opt else {
        // Identical versions: nothing to infer, check, or report on.
        let rep = report::build(ReportInputs {
            cfg,
            versions: &versions,
            change_set,
            scope: None,
            after_phase3: Vec::new(),
            outdated_samples: BTreeMap::new(),
            phase4: Phase4Artifact::default(),
            tests_base,
            tests_upgrade,
            generated_at_unix,
        });
        return Ok((rep, versions));
    };

    let after_phase2 = if resume_from <= 2 {
        phases::phase2(cfg, &versions, &scope, &phase1_props, emit_cnf)?
    } else {
        phases::load_properties_artifact(cfg, 2, resume_from)?
    };

    let (after_phase3, outdated_samples) = if resume_from <= 3 {
        let out = phases::phase3(cfg, &versions, &scope, &after_phase2)?;
        (out.properties, out.outdated_samples)
    } else {
        (
            phases::load_properties_artifact(cfg, 3, 4)?,
            phases::load_outdated_artifact(cfg, 4)?,
        )
    };

    let phase4 = phases::phase4(cfg, &versions, &scope, &after_phase3, emit_cnf)?;

    let rep = report::build(ReportInputs {
        cfg,
        versions: &versions,
        change_set,
        scope: Some(scope),
        after_phase3,
        outdated_samples,
        phase4,
        tests_base,
        tests_upgrade,
        generated_at_unix,
    });
    Ok((rep, versions))
}

/// Write `report.json` / `report.txt` under the output directory per the
/// requested format. Returns the paths written.
pub fn write_reports(
    cfg: &PipelineConfig,
    rep: &Report,
    versions: &Versions,
    format: ReportFormat,
) -> Result<Vec<PathBuf>, PipelineError> {
    let mut written = Vec::new();
    let write = |path: &Path, contents: &str| -> Result<(), PipelineError> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .map_err(|e| PipelineError::Io(parent.to_path_buf(), e))?;
        }
        std::fs::write(path, contents).map_err(|e| PipelineError::Io(path.to_path_buf(), e))
    };
    if matches!(format, ReportFormat::Json | ReportFormat::Both) {
        let path = cfg.output_dir.join("report.json");
        write(&path, &report::to_json(rep))?;
        written.push(path);
    }
    if matches!(format, ReportFormat::Text | ReportFormat::Both) {
        let path = cfg.output_dir.join("report.txt");
        write(&path, &report::to_text(rep, versions))?;
        written.push(path);
    }
    Ok(written)
}
