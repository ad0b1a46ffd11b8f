use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::experiment::Summary;
use crate::CliError;

pub const REPORT_SCHEMA: &str = "hsssi.report.v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    /// Directory of the run, relative to the report root.
    pub path: String,
    pub name: String,
    pub regime: String,
    pub pass: bool,
    pub failed: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub pass: bool,
    pub runs: Vec<RunEntry>,
}

fn summaries(root: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    let direct = root.join("summary.json");
    if direct.is_file() {
        out.push(direct);
    }
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(|e| CliError::io(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    out.extend(dirs.into_iter().map(|d| d.join("summary.json")).filter(|p| p.is_file()));
    Ok(out)
}

/// Collects `summary.json` of `root` and of its immediate subdirectories.
pub fn report(root: &Path) -> Result<Report, CliError> {
    let files = summaries(root)?;
    if files.is_empty() {
        return Err(CliError::Config(format!("no summary.json under {}", root.display())));
    }
    let mut runs = Vec::new();
    for f in files {
        let text = std::fs::read_to_string(&f).map_err(|e| CliError::io(&f, e))?;
        let s: Summary =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", f.display())))?;
        let dir = f.parent().expect("file in a directory");
        let rel = dir.strip_prefix(root).unwrap_or(dir).display().to_string();
        runs.push(RunEntry {
            path: if rel.is_empty() { ".".into() } else { rel },
            name: s.name,
            regime: s.regime,
            pass: s.pass,
            failed: s.checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect(),
            warnings: s.warnings,
        });
    }
    Ok(Report {
        schema: REPORT_SCHEMA.into(),
        pass: runs.iter().all(|r| r.pass),
        runs,
    })
}
