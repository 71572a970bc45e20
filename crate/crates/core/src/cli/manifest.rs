use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::report::{render, write_atomic, Format, Outcome, Table};
use super::{exit_code, Cli, Command, GlobalArgs};
use crate::error::{Error, Result};
use crate::ledger::Check;

/// `{"runs": [...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub runs: Vec<ManifestRun>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRun {
    pub name: String,
    pub subcommand: String,
    /// Inline spec object, or a path relative to the manifest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<Value>,
    /// Flag name (without dashes) to value; `true` stands for a bare flag.
    #[serde(default)]
    pub parameters: BTreeMap<String, Value>,
    /// Report path relative to the manifest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub subcommand: String,
    pub exit_code: i32,
    pub passed: bool,
    pub failures: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

const MEASURE_KEYS: [&str; 2] = ["nu1", "nu2"];

fn resolve_spec(value: &Value, base: &Path, what: &str) -> Result<String> {
    match value {
        Value::Object(_) => Ok(value.to_string()),
        Value::String(p) => {
            let path = base.join(p);
            if !path.is_file() {
                return Err(Error::invalid(format!("{what}: measure spec `{}` not found", path.display())));
            }
            Ok(path.to_string_lossy().into_owned())
        }
        _ => Err(Error::invalid(format!("{what}: measure must be an object or a path"))),
    }
}

fn flag_value(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(_) | Value::Null => None,
        other => Some(other.to_string()),
    }
}

/// Turns a run into an argv, resolving every referenced file first.
fn argv_for(run: &ManifestRun, base: &Path) -> Result<Vec<String>> {
    let what = format!("run `{}`", run.name);
    let mut argv = vec![run.subcommand.clone()];
    if let Some(m) = &run.measure {
        argv.push("--measure".into());
        argv.push(resolve_spec(m, base, &what)?);
    }
    for (key, value) in &run.parameters {
        let flag = if key.len() == 1 && key.chars().all(|c| c.is_ascii_uppercase()) {
            format!("--{key}")
        } else {
            format!("--{}", key.replace('_', "-"))
        };
        if MEASURE_KEYS.contains(&key.as_str()) {
            argv.push(flag);
            argv.push(resolve_spec(value, base, &what)?);
            continue;
        }
        match value {
            Value::Bool(true) => argv.push(flag),
            Value::Bool(false) | Value::Null => {}
            v => {
                // `--alpha=-3/4` keeps negative values from reading as flags
                argv.push(format!("{flag}={}", flag_value(v).unwrap_or_default()));
            }
        }
    }
    if let Some(f) = run.format {
        argv.push(format!("--format={}", if f == Format::Json { "json" } else { "csv" }));
    }
    Ok(argv)
}

fn validate(manifest: &Manifest, base: &Path) -> Result<Vec<Vec<String>>> {
    let mut names = BTreeSet::new();
    let mut argvs = Vec::new();
    for run in &manifest.runs {
        if run.name.is_empty() || !names.insert(run.name.clone()) {
            return Err(Error::invalid(format!("run names must be unique and nonempty: `{}`", run.name)));
        }
        let argv = argv_for(run, base)?;
        let cli = Cli::try_parse_from(std::iter::once("dyadic-spectra".to_string()).chain(argv.iter().cloned()))
            .map_err(|e| Error::invalid(format!("run `{}`: {}", run.name, e.to_string().trim())))?;
        if matches!(cli.command, Command::Manifest(_)) {
            return Err(Error::invalid(format!("run `{}`: manifests cannot nest", run.name)));
        }
        argvs.push(argv);
    }
    Ok(argvs)
}

/// Validates the whole manifest, then runs the entries in order. Assertion
/// failures are recorded and do not stop later runs.
pub fn run_manifest(path: &Path, global: &GlobalArgs) -> Result<Vec<RunSummary>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("cannot read manifest `{}`: {e}", path.display())))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::invalid(format!("bad manifest: {e}")))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let argvs = validate(&manifest, base)?;

    let mut out = Vec::new();
    for (run, argv) in manifest.runs.iter().zip(argvs) {
        let cli = Cli::try_parse_from(std::iter::once("dyadic-spectra".to_string()).chain(argv.iter().cloned()))
            .map_err(|e| Error::invalid(e.to_string()))?;
        let mut g = cli.global.clone();
        if g.seed.is_none() {
            g.seed = global.seed;
        }
        let summary = match super::commands::execute(&cli.command, &g, argv) {
            Ok((report, table)) => {
                let target = run.out.as_ref().map(|o| base.join(o));
                let mut error = None;
                if let Some(t) = &target {
                    if let Err(e) = render(&report, table.as_ref(), g.format).and_then(|b| write_atomic(t, &b)) {
                        error = Some(e.to_string());
                    }
                }
                RunSummary {
                    name: run.name.clone(),
                    subcommand: run.subcommand.clone(),
                    exit_code: if error.is_some() {
                        2
                    } else if report.passed {
                        0
                    } else {
                        1
                    },
                    passed: report.passed && error.is_none(),
                    failures: report.failures().into_iter().map(str::to_string).collect(),
                    out: target,
                    error,
                }
            }
            Err(e) => RunSummary {
                name: run.name.clone(),
                subcommand: run.subcommand.clone(),
                exit_code: exit_code(&e),
                passed: false,
                failures: Vec::new(),
                out: None,
                error: Some(e.to_string()),
            },
        };
        out.push(summary);
    }
    Ok(out)
}

pub(super) fn manifest_cmd(path: &Path, global: &GlobalArgs) -> Result<Outcome> {
    let runs = run_manifest(path, global)?;
    let checks: Vec<Check> = runs
        .iter()
        .map(|r| Check::flag(format!("run_{}", r.name), r.passed))
        .collect();
    let mut t = Table::new(&["name", "subcommand", "exit_code", "passed", "failures"]);
    for r in &runs {
        t.push(vec![
            r.name.clone(),
            r.subcommand.clone(),
            r.exit_code.to_string(),
            r.passed.to_string(),
            r.failures.join(";"),
        ]);
    }
    Outcome::new(&serde_json::json!({ "runs": runs }), Some(t), checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn global() -> GlobalArgs {
        GlobalArgs {
            format: Format::Json,
            out: None,
            seed: None,
        }
    }

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn empty_manifest_passes() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "m.json", r#"{"runs": []}"#);
        let o = manifest_cmd(&p, &global()).unwrap();
        assert!(o.ledger.is_empty());
    }

    #[test]
    fn failing_run_is_marked() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "m.json",
            r#"{"runs": [
                {"name": "ok", "subcommand": "riesz", "parameters": {"kmax": 3, "level_set": 0.25}, "out": "ok.json"},
                {"name": "bad", "subcommand": "mountain-river",
                 "measure": {"type": "uniform", "resolution": 8},
                 "parameters": {"beta": "1/2", "alpha": "-3/4", "rho": "3/4", "k": 8}}
            ]}"#,
        );
        let runs = run_manifest(&p, &global()).unwrap();
        assert!(runs[0].passed);
        assert!(!runs[1].passed);
        assert!(dir.path().join("ok.json").is_file());
    }

    #[test]
    fn missing_spec_fails_before_running() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "m.json",
            r#"{"runs": [
                {"name": "first", "subcommand": "riesz", "parameters": {"kmax": 2}, "out": "first.json"},
                {"name": "second", "subcommand": "measure", "measure": "nowhere.json"}
            ]}"#,
        );
        assert!(run_manifest(&p, &global()).is_err());
        assert!(!dir.path().join("first.json").exists());
    }

    #[test]
    fn duplicate_names_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "m.json",
            r#"{"runs": [
                {"name": "a", "subcommand": "riesz", "parameters": {"kmax": 2}},
                {"name": "a", "subcommand": "riesz", "parameters": {"kmax": 3}}
            ]}"#,
        );
        assert!(run_manifest(&p, &global()).is_err());
    }
}
