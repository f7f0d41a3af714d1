//! Verdict lines for acceptance criteria.

use std::fmt;
use std::time::{Duration, Instant};

/// Outcome of one criterion: the failed conditions and measured values.
#[derive(Debug, Clone)]
pub struct Criterion {
    pub id: u32,
    pub name: &'static str,
    pub failures: Vec<String>,
    pub measurements: Vec<String>,
    pub elapsed: Duration,
}

impl Criterion {
    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {} [{}]: {} ({:.1}s)",
            self.id,
            self.name,
            if self.pass() { "PASS" } else { "FAIL" },
            self.elapsed.as_secs_f64()
        )?;
        for m in &self.measurements {
            write!(f, "\n    {m}")?;
        }
        for e in &self.failures {
            write!(f, "\n    violated: {e}")?;
        }
        Ok(())
    }
}

/// Collects conditions and measurements while a criterion runs.
pub struct Recorder {
    id: u32,
    name: &'static str,
    start: Instant,
    failures: Vec<String>,
    measurements: Vec<String>,
}

impl Recorder {
    pub fn start(id: u32, name: &'static str) -> Self {
        Recorder { id, name, start: Instant::now(), failures: Vec::new(), measurements: Vec::new() }
    }

    pub fn measure(&mut self, line: impl Into<String>) {
        self.measurements.push(line.into());
    }

    /// Records `message` as a failure unless `ok`.
    pub fn require(&mut self, ok: bool, message: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(message());
        }
    }

    pub fn elapsed(&self) -> Duration {
        self.start.elapsed()
    }

    pub fn finish(self) -> Criterion {
        Criterion {
            id: self.id,
            name: self.name,
            failures: self.failures,
            measurements: self.measurements,
            elapsed: self.start.elapsed(),
        }
    }
}
