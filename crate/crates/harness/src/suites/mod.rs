//! Property suites: each runs a family of explorations and checks, and
//! reports one pass/fail line per property. The acceptance tests and the
//! `ofuc check` CLI both drive these.

pub mod checkers;
pub mod consensus;
pub mod netsim_abd;
pub mod primitives;
pub mod racing;
pub mod registers;
pub mod universal;

use std::time::Instant;

use ofuc_core::{History, OpRec};

/// One checked property.
#[derive(Debug, Clone)]
pub struct CheckLine {
    pub label: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: String,
    pub lines: Vec<CheckLine>,
    pub seconds: f64,
}

impl SuiteReport {
    pub fn pass(&self) -> bool {
        self.lines.iter().all(|l| l.pass)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for l in &self.lines {
            let mark = if l.pass { "PASS" } else { "FAIL" };
            out.push_str(&format!("[{mark}] {}::{} — {}\n", self.name, l.label, l.detail));
        }
        out.push_str(&format!(
            "{}: {} in {:.2}s\n",
            self.name,
            if self.pass() { "ok" } else { "FAILED" },
            self.seconds
        ));
        out
    }
}

pub struct SuiteBuilder {
    name: String,
    lines: Vec<CheckLine>,
    started: Instant,
}

impl SuiteBuilder {
    pub fn new(name: &str) -> Self {
        SuiteBuilder { name: name.to_string(), lines: Vec::new(), started: Instant::now() }
    }

    pub fn check(&mut self, label: &str, pass: bool, detail: String) {
        self.lines.push(CheckLine { label: label.to_string(), pass, detail });
    }

    pub fn check_ok(&mut self, label: &str, result: Result<String, String>) {
        match result {
            Ok(d) => self.check(label, true, d),
            Err(d) => self.check(label, false, d),
        }
    }

    pub fn finish(self) -> SuiteReport {
        SuiteReport {
            name: self.name,
            lines: self.lines,
            seconds: self.started.elapsed().as_secs_f64(),
        }
    }
}

/// Effort knobs shared by the suites; the defaults match the documented
/// exhaustive bounds (3 processes, 24 steps, 3 laps) plus seeded batches.
#[derive(Debug, Clone)]
pub struct SuiteCfg {
    pub procs: usize,
    pub max_steps: u64,
    pub laps: u64,
    pub seeds: u64,
}

impl Default for SuiteCfg {
    fn default() -> Self {
        SuiteCfg { procs: 3, max_steps: 24, laps: 3, seeds: 2000 }
    }
}

/// Operations recorded at one level.
pub fn ops_at(h: &History, level: u32) -> Vec<OpRec> {
    h.ops().into_iter().filter(|o| o.meta.level == level).collect()
}

/// Run a named suite.
pub fn run_suite(name: &str, cfg: &SuiteCfg) -> Option<SuiteReport> {
    match name {
        "splitter" => Some(primitives::splitter_suite(cfg)),
        "grafarius" => Some(primitives::grafarius_suite(cfg)),
        "racing" => Some(racing::racing_suite(cfg)),
        "consensus" => Some(consensus::consensus_suite(cfg)),
        "runiv" => Some(universal::runiv_suite(cfg)),
        "buniv" => Some(universal::buniv_suite(cfg)),
        "abd" => Some(netsim_abd::abd_suite(cfg)),
        "registers" => Some(registers::registers_suite(cfg)),
        "complexity" => Some(universal::complexity_suite(cfg)),
        "checkers" => Some(checkers::checkers_suite(cfg)),
        "convoy" => Some(netsim_abd::convoy_suite(cfg)),
        _ => None,
    }
}

pub const SUITE_NAMES: &[&str] = &[
    "splitter",
    "grafarius",
    "racing",
    "consensus",
    "runiv",
    "buniv",
    "abd",
    "registers",
    "complexity",
    "checkers",
    "convoy",
];
