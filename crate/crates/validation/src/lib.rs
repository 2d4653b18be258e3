//! A small runner for pass/fail checks that prints one line per check and
//! keeps going after a failure, so a single run shows the whole picture.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

/// Result of one check: `Ok(detail)` passes, `Err(detail)` fails.
pub type CheckResult = Result<String, String>;

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub id: String,
    pub title: String,
    pub pass: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl Verdict {
    pub fn line(&self) -> String {
        format!(
            "{:<10} {} ({:.2} s) {}: {}",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.elapsed.as_secs_f64(),
            self.title,
            self.detail
        )
    }
}

#[derive(Debug, Default)]
pub struct Suite {
    verdicts: Vec<Verdict>,
}

impl Suite {
    pub fn new() -> Self {
        Self::default()
    }

    /// Runs `check`, failing it on panic or when it takes longer than
    /// `limit`, and prints its line immediately.
    pub fn run(
        &mut self,
        id: &str,
        title: &str,
        limit: Option<Duration>,
        check: impl FnOnce() -> CheckResult,
    ) -> &Verdict {
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|payload| {
            let message = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".to_string());
            Err(format!("panicked: {message}"))
        });
        let elapsed = started.elapsed();
        let (mut pass, mut detail) = match outcome {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        if let Some(limit) = limit {
            if elapsed > limit {
                pass = false;
                detail = format!("{detail}; took longer than {:.0} s", limit.as_secs_f64());
            }
        }
        let verdict = Verdict {
            id: id.to_string(),
            title: title.to_string(),
            pass,
            detail,
            elapsed,
        };
        println!("{}", verdict.line());
        self.verdicts.push(verdict);
        self.verdicts.last().expect("just pushed")
    }

    pub fn verdicts(&self) -> &[Verdict] {
        &self.verdicts
    }

    pub fn failures(&self) -> usize {
        self.verdicts.iter().filter(|v| !v.pass).count()
    }

    /// Prints a summary line; failure when any check failed.
    pub fn finish(&self) -> ExitCode {
        let failed = self.failures();
        println!("{} passed, {} failed", self.verdicts.len() - failed, failed);
        if failed == 0 {
            ExitCode::SUCCESS
        } else {
            ExitCode::FAILURE
        }
    }
}

/// Folds sub-results into one: passes only when every part passes.
pub fn all(parts: Vec<CheckResult>) -> CheckResult {
    let pass = parts.iter().all(Result::is_ok);
    let detail = parts
        .into_iter()
        .map(|r| match r {
            Ok(d) => d,
            Err(d) => format!("FAILED {d}"),
        })
        .collect::<Vec<_>>()
        .join("; ");
    if pass {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// `Ok(detail)` when `cond` holds.
pub fn expect(cond: bool, detail: String) -> CheckResult {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}
