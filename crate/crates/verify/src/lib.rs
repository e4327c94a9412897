//! Support for the acceptance run: a PASS/FAIL tally and the location of
//! the command-line binary built alongside the tests.
//!
//! The run lives in its own package so that it executes after every other
//! test target of the workspace.

use std::fmt;
use std::path::PathBuf;
use std::time::{Duration, Instant};

/// Outcome of one acceptance criterion.
#[derive(Clone, Debug)]
pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Default)]
pub struct Tally {
    lines: Vec<(u32, Verdict, Duration)>,
}

impl Tally {
    /// Run one criterion, print its line immediately and record it.
    pub fn run(&mut self, number: u32, check: impl FnOnce() -> Verdict) {
        let start = Instant::now();
        let verdict = check();
        let elapsed = start.elapsed();
        println!("{}", Line(number, &verdict, elapsed));
        self.lines.push((number, verdict, elapsed));
    }

    pub fn failed(&self) -> Vec<u32> {
        self.lines
            .iter()
            .filter(|(_, v, _)| !v.pass)
            .map(|(n, _, _)| *n)
            .collect()
    }
}

struct Line<'a>(u32, &'a Verdict, Duration);

impl fmt::Display for Line<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.1.pass { "PASS" } else { "FAIL" };
        write!(
            f,
            "criterion {}: {status} ({:.1}s) {}",
            self.0,
            self.2.as_secs_f64(),
            self.1.detail
        )
    }
}

/// Path of the `ranslice` binary in the target directory that holds the
/// running test executable (`target/<profile>/deps/acceptance-*`).
pub fn ranslice_binary() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let profile_dir = exe.parent()?.parent()?;
    let bin = profile_dir.join(format!("ranslice{}", std::env::consts::EXE_SUFFIX));
    bin.is_file().then_some(bin)
}
