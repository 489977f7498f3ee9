//! Reproducible experiment runner: config in, CSV tables, a manifest and a
//! plain-text report out.
//!
//! Tables are written in a fixed order and numbers use the shortest
//! round-trip formatting, so reruns with the same config give identical
//! CSV bodies. Wall-clock figures appear only in the manifest and report.

pub mod config;
mod scenarios;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub use config::{ExperimentConfig, Scenario};

use crate::error::{Error, Result};
use crate::levy_model::SupportVariant;

pub const CSV_SCHEMA: u32 = 1;

/// A CSV table; cells are preformatted.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width in {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("# schema={CSV_SCHEMA}\n{}\n", self.header.join(","));
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

pub(crate) fn num(v: f64) -> String {
    format!("{v:e}")
}

/// One pass/fail line of the report.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub id: String,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub elapsed_secs: f64,
    pub budget_secs: Option<f64>,
}

impl Check {
    pub fn within_budget(&self) -> bool {
        self.budget_secs.is_none_or(|b| self.elapsed_secs <= b)
    }

    /// Substance and runtime both.
    pub fn ok(&self) -> bool {
        self.passed && self.within_budget()
    }

    pub fn line(&self) -> String {
        let budget = match self.budget_secs {
            Some(b) => format!("{:.1}s of {b:.0}s", self.elapsed_secs),
            None => format!("{:.1}s", self.elapsed_secs),
        };
        format!("[{}] {} {}: {} ({budget})", if self.ok() { "PASS" } else { "FAIL" }, self.id, self.name, self.detail)
    }
}

#[derive(Clone, Debug, Default)]
pub struct Section {
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
}

impl Section {
    fn extend(&mut self, other: Section) {
        self.tables.extend(other.tables);
        self.checks.extend(other.checks);
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    pub report: String,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::ok)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }
}

/// Runs the configured scenario and writes `manifest.toml`, `report.txt`
/// and one CSV per table into the output directory.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let started = Instant::now();
    let section = match cfg.scenario {
        Scenario::FullSuite => scenarios::full_suite(cfg)?,
        s => scenarios::single(cfg, s)?,
    };
    let total = started.elapsed().as_secs_f64();
    let out_dir = cfg.output.dir.clone();
    std::fs::create_dir_all(&out_dir)?;
    let mut names = std::collections::BTreeSet::new();
    for t in &section.tables {
        if !names.insert(t.name.clone()) {
            return Err(Error::Io(format!("duplicate table name {}", t.name)));
        }
        std::fs::write(out_dir.join(format!("{}.csv", t.name)), t.to_csv())?;
    }
    let report = render_report(cfg, &section.checks, total);
    std::fs::write(out_dir.join("report.txt"), &report)?;
    std::fs::write(out_dir.join("manifest.toml"), render_manifest(cfg, &section, total))?;
    Ok(RunOutcome { out_dir, tables: section.tables, checks: section.checks, report })
}

fn render_report(cfg: &ExperimentConfig, checks: &[Check], total: f64) -> String {
    let mut s = format!("scenario {} seed {}\n", cfg.scenario.name(), cfg.sim.seed);
    for c in checks {
        let _ = writeln!(s, "{}", c.line());
    }
    let failed = checks.iter().filter(|c| !c.ok()).count();
    let _ = writeln!(s, "{} checks, {failed} failed, {total:.1}s", checks.len());
    s
}

fn render_manifest(cfg: &ExperimentConfig, section: &Section, total: f64) -> String {
    let now = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut s = String::new();
    let _ = writeln!(s, "[run]");
    let _ = writeln!(s, "package = \"{}\"", env!("CARGO_PKG_NAME"));
    let _ = writeln!(s, "version = \"{}\"", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "csv_schema = {CSV_SCHEMA}");
    let _ = writeln!(s, "unix_time = {now}");
    let _ = writeln!(s, "elapsed_secs = {total:.3}");
    let files: Vec<String> = section.tables.iter().map(|t| format!("\"{}.csv\"", t.name)).collect();
    let _ = writeln!(s, "tables = [{}]", files.join(", "));
    let _ = writeln!(s, "passed = {}", section.checks.iter().all(Check::ok));
    let _ = writeln!(s, "\n[config]");
    // nest the resolved config under [config]
    let body = cfg.to_toml();
    for line in body.lines() {
        if let Some(rest) = line.strip_prefix('[') {
            let _ = writeln!(s, "[config.{rest}");
        } else {
            let _ = writeln!(s, "{line}");
        }
    }
    s
}

/// The preset catalog printed by `presets`; the order is fixed.
pub fn list_presets() -> String {
    let mut s = String::from("models (support, parameters dim in 1..=3, alpha in (0,2), c0 > 0, eta in (0,1]):\n");
    for (v, d) in [
        (SupportVariant::FullSpace, "q0 = 1 on all of R^d"),
        (SupportVariant::Ball, "q0 = 1 on |z| <= eta"),
        (SupportVariant::HalfSlab, "q0 = 1 on 0 < z_1 <= eta, other coordinates free"),
        (SupportVariant::Slab, "q0 = 1 on |z_1| <= eta, other coordinates free"),
    ] {
        let _ = writeln!(s, "  {:<11} {d}", v.name());
    }
    s.push_str("drift presets:\n");
    for (n, d) in [
        ("zero", "b = 0"),
        ("linear", "b = -rate x, rate > 0 for dissipativity"),
        ("sin_perturbed", "b = -rate x + amp sin x, profile beta = 1"),
        ("sign_perturbed", "b = -rate x + amp sign x, profile beta = 0"),
        ("holder_perturbed", "b = -rate x + amp sign(x)|x|^beta, beta in (0,1]"),
    ] {
        let _ = writeln!(s, "  {n:<17} {d}");
    }
    s.push_str("diffusion presets:\n");
    for (n, d) in [
        ("constant", "sigma = scale I (additive noise)"),
        ("diagonal_sin", "sigma = diag(base + amp sin x_i), diagonal; needs base > |amp|"),
        ("rotation", "sigma = R(angle sin x_1) diag(base + amp sin x_i), not diagonal"),
    ] {
        let _ = writeln!(s, "  {n:<17} {d}");
    }
    s.push_str("scenarios:\n");
    for sc in Scenario::ALL {
        let _ = writeln!(s, "  {:<17} {}", sc.name(), sc.describe());
    }
    s
}

/// `out` replaced when given, seed replaced when given.
pub fn apply_overrides(mut cfg: ExperimentConfig, seed: Option<u64>, out: Option<&Path>) -> ExperimentConfig {
    if let Some(s) = seed {
        cfg.sim.seed = s;
    }
    if let Some(o) = out {
        cfg.output.dir = o.to_path_buf();
    }
    cfg
}
