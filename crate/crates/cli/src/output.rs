//! Artifacts of a run: `<command>.csv`, `checks.csv`, the normalized
//! `scenario.json` and `manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{num, Check, CliError, Command, Report, Rule, RunOptions, Scenario, Table};

pub fn table_csv(table: &Table) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.header).map_err(csv_error)?;
    for row in &table.rows {
        w.write_record(row).map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.into_error()))
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e))
}

fn rule_name(rule: Rule) -> String {
    match rule {
        Rule::AtMost => "at_most".into(),
        Rule::AtLeast => "at_least".into(),
        Rule::Exact => "exact".into(),
        Rule::Holds => "holds".into(),
        Rule::Near(target) => format!("near:{}", num(target)),
    }
}

pub fn checks_table(checks: &[Check]) -> Table {
    let mut t = Table::new(vec!["check", "value", "tolerance", "rule", "pass"]);
    for c in checks {
        t.push(vec![
            c.name.clone(),
            num(c.value),
            num(c.tolerance),
            rule_name(c.rule),
            c.pass().to_string(),
        ]);
    }
    t
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub scenario: String,
    pub config_sha256: String,
    pub versions: Versions,
    pub wall_time_s: f64,
    pub seed: u64,
    pub tol_scale: f64,
    pub jobs: usize,
    pub artifacts: Vec<String>,
    pub failed_checks: Vec<String>,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct Versions {
    pub eip_cli: &'static str,
    pub eip_core: &'static str,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Write every artifact into `dir` and return the paths written.
pub fn write_run(
    dir: &Path,
    command: Command,
    scenario: &Scenario,
    report: &Report,
    opts: RunOptions,
    wall: Duration,
) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir)?;
    let config = scenario.normalized_json();
    let files = [
        (format!("{command}.csv"), table_csv(&report.table)?),
        ("checks.csv".to_string(), table_csv(&checks_table(&report.checks))?),
        ("scenario.json".to_string(), config.clone().into_bytes()),
    ];
    let mut written = Vec::new();
    for (name, bytes) in &files {
        let path = dir.join(name);
        fs::write(&path, bytes)?;
        written.push(path);
    }
    let manifest = Manifest {
        command: command.to_string(),
        scenario: scenario.name.clone(),
        config_sha256: sha256_hex(config.as_bytes()),
        versions: Versions {
            eip_cli: env!("CARGO_PKG_VERSION"),
            eip_core: eip_core::VERSION,
        },
        wall_time_s: wall.as_secs_f64(),
        seed: opts.seed,
        tol_scale: opts.tol_scale,
        jobs: rayon::current_num_threads(),
        artifacts: files.iter().map(|f| f.0.clone()).collect(),
        failed_checks: report.checks.iter().filter(|c| !c.pass()).map(|c| c.name.clone()).collect(),
        pass: report.passed(),
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n")?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn cells_with_separators_are_quoted() {
        let mut t = Table::new(vec!["a", "b"]);
        t.push(vec!["x;y".into(), "f(k=1,2)".into()]);
        let text = String::from_utf8(table_csv(&t).unwrap()).unwrap();
        assert_eq!(text, "a,b\nx;y,\"f(k=1,2)\"\n");
    }
}
