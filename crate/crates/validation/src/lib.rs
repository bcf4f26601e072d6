//! Bookkeeping for the acceptance run: one verdict line per criterion.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub id: u32,
    pub title: String,
    pub pass: bool,
    /// Measured values against their limits.
    pub details: Vec<String>,
}

#[derive(Debug, Default)]
pub struct Scorecard {
    verdicts: Vec<Verdict>,
}

impl Scorecard {
    /// Records a criterion that passes only if every check does.
    pub fn record(&mut self, id: u32, title: &str, checks: Vec<(bool, String)>) -> &Verdict {
        let pass = !checks.is_empty() && checks.iter().all(|(ok, _)| *ok);
        let details = checks
            .into_iter()
            .map(|(ok, d)| if ok { d } else { format!("{d} [x]") })
            .collect();
        self.verdicts.push(Verdict {
            id,
            title: title.to_string(),
            pass,
            details,
        });
        self.verdicts.last().unwrap()
    }

    pub fn failed(&self) -> Vec<u32> {
        self.verdicts
            .iter()
            .filter(|v| !v.pass)
            .map(|v| v.id)
            .collect()
    }

    pub fn verdicts(&self) -> &[Verdict] {
        &self.verdicts
    }
}

impl Verdict {
    pub fn line(&self) -> String {
        let mut s = format!(
            "{} criterion {}: {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.title
        );
        for d in &self.details {
            let _ = write!(s, "\n       {d}");
        }
        s
    }
}

/// Fixed notation at the scale of `limit`, scientific for tolerances.
fn number(v: f64, limit: f64) -> String {
    if limit.abs() < 1e-3 {
        format!("{v:.2e}")
    } else {
        format!("{v:.4}")
    }
}

/// `name value <= limit` with its outcome.
pub fn at_most(name: &str, value: f64, limit: f64) -> (bool, String) {
    (
        value <= limit,
        format!(
            "{name} {} <= {}",
            number(value, limit),
            number(limit, limit)
        ),
    )
}

/// `name value < limit` with its outcome.
pub fn below(name: &str, value: f64, limit: f64) -> (bool, String) {
    (
        value < limit,
        format!("{name} {} < {}", number(value, limit), number(limit, limit)),
    )
}
