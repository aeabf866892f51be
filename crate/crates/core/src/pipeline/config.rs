//! Pipeline configuration: a plain UTF-8 `key = value` file with `#`
//! comments. Relative paths resolve against the config file's directory.

use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config `{0}`: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("config line {0}: expected `key = value`")]
    Malformed(usize),
    #[error("config line {line}: bad value for `{key}`: {value}")]
    BadValue {
        key: String,
        value: String,
        line: usize,
    },
    #[error("config: unknown key `{0}`")]
    UnknownKey(String),
    #[error("config: missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("`{0}` is not a directory")]
    NotADirectory(PathBuf),
    #[error("no sources matching `{pattern}` in `{dir}`")]
    NoSources { dir: PathBuf, pattern: String },
    #[error("cannot read test manifest `{0}`: {1}")]
    Manifest(PathBuf, std::io::Error),
    #[error("test manifest `{0}` is empty")]
    EmptyManifest(PathBuf),
    #[error("test harness file `{0}` does not exist")]
    MissingHarness(PathBuf),
}

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub base_dir: PathBuf,
    pub upgraded_dir: PathBuf,
    /// Filename glob selecting sources within each version directory.
    pub sources: String,
    pub tests_base: PathBuf,
    /// Absent or empty manifest: phase 3 filters nothing.
    pub tests_upgrade: Option<PathBuf>,
    pub unroll_bound: u32,
    pub inline_depth: u32,
    pub bit_width: u32,
    pub min_support: usize,
    /// Conflict budget per SAT query.
    pub solver_budget: u64,
    /// Worker threads for tracing and checking; 0 picks a default.
    pub parallelism: usize,
    pub output_dir: PathBuf,
}

impl PipelineConfig {
    /// Parse and validate a config file. Checks that both version
    /// directories exist and that the base test manifest is nonempty, so
    /// path mistakes surface before any execution.
    pub fn load(path: &Path) -> Result<PipelineConfig, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.to_path_buf(), e))?;
        let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let resolve = |s: &str| -> PathBuf {
            let p = PathBuf::from(s);
            if p.is_absolute() {
                p
            } else {
                dir.join(p)
            }
        };

        let mut base_dir = None;
        let mut upgraded_dir = None;
        let mut sources = "*.mc".to_string();
        let mut tests_base = None;
        let mut tests_upgrade = None;
        let mut unroll_bound = 5u32;
        let mut inline_depth = 16u32;
        let mut bit_width = 16u32;
        let mut min_support = 1usize;
        let mut solver_budget = 2_000_000u64;
        let mut parallelism = 0usize;
        let mut output_dir = None;

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::Malformed(line_no))?;
            let key = key.trim();
            let value = value.trim();
            let bad = || ConfigError::BadValue {
                key: key.to_string(),
                value: value.to_string(),
                line: line_no,
            };
            match key {
                "base_dir" => base_dir = Some(resolve(value)),
                "upgraded_dir" => upgraded_dir = Some(resolve(value)),
                "sources" => sources = value.to_string(),
                "tests_base" => tests_base = Some(resolve(value)),
                "tests_upgrade" => tests_upgrade = Some(resolve(value)),
                "unroll_bound" => unroll_bound = value.parse().map_err(|_| bad())?,
                "inline_depth" => inline_depth = value.parse().map_err(|_| bad())?,
                "bit_width" => {
                    bit_width = value.parse().map_err(|_| bad())?;
                    if !(2..=32).contains(&bit_width) {
                        return Err(bad());
                    }
                }
                "min_support" => min_support = value.parse().map_err(|_| bad())?,
                "solver_budget" => solver_budget = value.parse().map_err(|_| bad())?,
                "parallelism" => parallelism = value.parse().map_err(|_| bad())?,
                "output_dir" => output_dir = Some(resolve(value)),
                other => return Err(ConfigError::UnknownKey(other.to_string())),
            }
        }

        let cfg = PipelineConfig {
            base_dir: base_dir.ok_or(ConfigError::MissingKey("base_dir"))?,
            upgraded_dir: upgraded_dir.ok_or(ConfigError::MissingKey("upgraded_dir"))?,
            sources,
            tests_base: tests_base.ok_or(ConfigError::MissingKey("tests_base"))?,
            tests_upgrade,
            unroll_bound,
            inline_depth,
            bit_width,
            min_support,
            solver_budget,
            parallelism,
            output_dir: output_dir.ok_or(ConfigError::MissingKey("output_dir"))?,
        };
        for d in [&cfg.base_dir, &cfg.upgraded_dir] {
            if !d.is_dir() {
                return Err(ConfigError::NotADirectory(d.clone()));
            }
        }
        cfg.source_files(&cfg.base_dir)?;
        cfg.source_files(&cfg.upgraded_dir)?;
        let base_tests = read_manifest(&cfg.tests_base)?;
        if base_tests.is_empty() {
            return Err(ConfigError::EmptyManifest(cfg.tests_base.clone()));
        }
        for t in base_tests
            .iter()
            .chain(cfg.upgrade_tests()?.iter())
        {
            if !t.is_file() {
                return Err(ConfigError::MissingHarness(t.clone()));
            }
        }
        Ok(cfg)
    }

    /// Sorted source files in `dir` matching the configured glob.
    pub fn source_files(&self, dir: &Path) -> Result<Vec<PathBuf>, ConfigError> {
        let mut out = Vec::new();
        let entries =
            std::fs::read_dir(dir).map_err(|e| ConfigError::Io(dir.to_path_buf(), e))?;
        for entry in entries {
            let entry = entry.map_err(|e| ConfigError::Io(dir.to_path_buf(), e))?;
            let path = entry.path();
            if !path.is_file() {
                continue;
            }
            let name = entry.file_name();
            if glob_match(&self.sources, &name.to_string_lossy()) {
                out.push(path);
            }
        }
        out.sort();
        if out.is_empty() {
            return Err(ConfigError::NoSources {
                dir: dir.to_path_buf(),
                pattern: self.sources.clone(),
            });
        }
        Ok(out)
    }

    pub fn base_tests(&self) -> Result<Vec<PathBuf>, ConfigError> {
        read_manifest(&self.tests_base)
    }

    pub fn upgrade_tests(&self) -> Result<Vec<PathBuf>, ConfigError> {
        match &self.tests_upgrade {
            Some(p) => read_manifest(p),
            None => Ok(Vec::new()),
        }
    }
}

/// Read a test manifest: one harness path per line, `#` comments allowed,
/// relative paths resolved against the manifest's directory.
fn read_manifest(path: &Path) -> Result<Vec<PathBuf>, ConfigError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| ConfigError::Manifest(path.to_path_buf(), e))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let p = PathBuf::from(l);
            if p.is_absolute() {
                p
            } else {
                dir.join(p)
            }
        })
        .collect())
}

/// Filename glob with `*` as the only wildcard.
fn glob_match(pattern: &str, name: &str) -> bool {
    fn inner(p: &[u8], n: &[u8]) -> bool {
        match (p.first(), n.first()) {
            (None, None) => true,
            (Some(b'*'), _) => {
                inner(&p[1..], n) || (!n.is_empty() && inner(p, &n[1..]))
            }
            (Some(pc), Some(nc)) if pc == nc => inner(&p[1..], &n[1..]),
            _ => false,
        }
    }
    inner(pattern.as_bytes(), name.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn glob_semantics() {
        assert!(glob_match("*.mc", "store.mc"));
        assert!(glob_match("*", "anything"));
        assert!(glob_match("store*.mc", "store_v2.mc"));
        assert!(!glob_match("*.mc", "store.mcx"));
        assert!(!glob_match("*.mc", "storemc"));
    }

    #[test]
    fn load_resolves_relative_paths_and_applies_defaults() {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path();
        for d in ["base", "upgraded"] {
            fs::create_dir(root.join(d)).unwrap();
            fs::write(root.join(d).join("m.mc"), "int f(int x) { return x; }\n").unwrap();
        }
        fs::write(root.join("t.mc"), "void test_a() { f(1); }\n").unwrap();
        fs::write(root.join("tests_base.txt"), "t.mc\n").unwrap();
        fs::write(
            root.join("run.conf"),
            "# demo\nbase_dir = base\nupgraded_dir = upgraded\n\
             tests_base = tests_base.txt\noutput_dir = out\nbit_width = 8\n",
        )
        .unwrap();
        let cfg = PipelineConfig::load(&root.join("run.conf")).unwrap();
        assert_eq!(cfg.base_dir, root.join("base"));
        assert_eq!(cfg.unroll_bound, 5);
        assert_eq!(cfg.bit_width, 8);
        assert_eq!(cfg.min_support, 1);
        assert_eq!(
            cfg.source_files(&cfg.base_dir).unwrap(),
            vec![root.join("base").join("m.mc")]
        );
        assert_eq!(cfg.base_tests().unwrap(), vec![root.join("t.mc")]);
        assert!(cfg.upgrade_tests().unwrap().is_empty());
    }

    #[test]
    fn missing_harness_is_a_config_error() {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path();
        for d in ["base", "upgraded"] {
            fs::create_dir(root.join(d)).unwrap();
            fs::write(root.join(d).join("m.mc"), "int f(int x) { return x; }\n").unwrap();
        }
        fs::write(root.join("tests_base.txt"), "absent.mc\n").unwrap();
        fs::write(
            root.join("run.conf"),
            "base_dir = base\nupgraded_dir = upgraded\n\
             tests_base = tests_base.txt\noutput_dir = out\n",
        )
        .unwrap();
        let err = PipelineConfig::load(&root.join("run.conf")).unwrap_err();
        assert!(matches!(err, ConfigError::MissingHarness(_)));
    }

    #[test]
    fn unknown_key_and_bad_value_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let p = tmp.path().join("c.conf");
        fs::write(&p, "nonsense = 1\n").unwrap();
        assert!(matches!(
            PipelineConfig::load(&p),
            Err(ConfigError::UnknownKey(_))
        ));
        fs::write(&p, "bit_width = seven\n").unwrap();
        assert!(matches!(
            PipelineConfig::load(&p),
            Err(ConfigError::BadValue { .. })
        ));
    }
}
