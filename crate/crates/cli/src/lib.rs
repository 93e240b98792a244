//! Scenario-driven verification runs for `eip-core`.
//!
//! Each subcommand runs one study, returns a table plus pass/fail checks and
//! leaves the artifacts to [`output`].

pub mod config;
pub mod output;
pub mod studies;

use std::fmt;

pub use config::Scenario;
pub use eip_core;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] eip_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 validation, 3 numerical failure, 4 instability.
    pub fn exit_code(&self) -> i32 {
        use eip_core::Error as E;
        match self {
            CliError::Validation(_) | CliError::Core(E::Config(_) | E::Domain(_)) => 2,
            CliError::Core(E::Instability { .. }) => 4,
            CliError::Core(_) | CliError::Io(_) => 3,
        }
    }
}

/// Exit status when every check ran but at least one failed.
pub const EXIT_FAILED_CHECKS: i32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    CheckCalculus,
    Solve,
    Infsup,
    Convergence,
    Mollify,
    Shift,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::CheckCalculus => "check-calculus",
            Command::Solve => "solve",
            Command::Infsup => "infsup",
            Command::Convergence => "convergence",
            Command::Mollify => "mollify",
            Command::Shift => "shift",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One pass/fail flag: `value` against `tolerance` under `rule`.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub rule: Rule,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rule {
    /// `value ≤ tolerance`.
    AtMost,
    /// `value ≥ tolerance`.
    AtLeast,
    /// `value == tolerance` bit for bit.
    Exact,
    /// `value` is a 0/1 flag that must be 1.
    Holds,
    /// `|value − target| ≤ tolerance`.
    Near(f64),
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self::new(name, value, tolerance, Rule::AtMost)
    }

    pub fn at_least(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self::new(name, value, tolerance, Rule::AtLeast)
    }

    pub fn exact(name: impl Into<String>, value: f64, want: f64) -> Self {
        Self::new(name, value, want, Rule::Exact)
    }

    pub fn near(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        Self::new(name, value, tolerance, Rule::Near(target))
    }

    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self::new(name, if ok { 1.0 } else { 0.0 }, 1.0, Rule::Holds)
    }

    fn new(name: impl Into<String>, value: f64, tolerance: f64, rule: Rule) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            rule,
        }
    }

    pub fn pass(&self) -> bool {
        match self.rule {
            Rule::AtMost => self.value <= self.tolerance,
            Rule::AtLeast => self.value >= self.tolerance,
            Rule::Exact => self.value.to_bits() == self.tolerance.to_bits(),
            Rule::Holds => self.value == 1.0,
            Rule::Near(target) => (self.value - target).abs() <= self.tolerance,
        }
    }
}

/// A CSV table: header and already formatted cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Result of one subcommand.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub table: Table,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Round-trip float formatting, so equal values give equal bytes.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

/// Options shared by every run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub seed: u64,
    /// Multiplies every absolute tolerance.
    pub tol_scale: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { seed: 0, tol_scale: 1.0 }
    }
}

pub fn run(command: Command, scenario: &Scenario, opts: RunOptions) -> Result<Report, CliError> {
    match command {
        Command::CheckCalculus => studies::check_calculus(scenario, opts),
        Command::Solve => studies::solve(scenario, opts),
        Command::Infsup => studies::infsup(scenario, opts),
        Command::Convergence => studies::convergence(scenario, opts),
        Command::Mollify => studies::mollify(scenario, opts),
        Command::Shift => studies::shift(scenario, opts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_rules() {
        assert!(Check::at_most("a", 1.0, 1.0).pass());
        assert!(!Check::at_most("a", f64::NAN, 1.0).pass());
        assert!(!Check::at_least("a", 0.9, 1.0).pass());
        assert!(Check::exact("a", 7f64.sqrt(), 7f64.sqrt()).pass());
        assert!(!Check::exact("a", 1.0 + f64::EPSILON, 1.0).pass());
        assert!(!Check::holds("a", false).pass());
        assert!(Check::near("a", 1.8, 2.0, 0.3).pass());
        assert!(!Check::near("a", 1.0, 2.0, 0.3).pass());
    }

    #[test]
    fn exit_codes_by_class() {
        assert_eq!(CliError::Validation("x".into()).exit_code(), 2);
        assert_eq!(CliError::Core(eip_core::Error::numerical("x")).exit_code(), 3);
        let e = eip_core::Error::Instability {
            reason: "x".into(),
            n_x: 1,
            n_t: 1,
            dim: 1,
        };
        assert_eq!(CliError::Core(e).exit_code(), 4);
    }

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, -3.0e-17, 1.0 / 3.0, 0.0] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }
}
