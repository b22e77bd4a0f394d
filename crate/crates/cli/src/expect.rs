//! Expectation files: one `quantity,target,tolerance,source` row per check.
//! A tolerance ending in `%` is relative to the target, otherwise absolute.
//! Lines starting with `#` are comments.

use crate::error::CliError;
use crate::summary::RunSummary;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Tolerance {
    Absolute(f64),
    Relative(f64),
}

impl Tolerance {
    fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        match s.strip_suffix('%') {
            Some(p) => p
                .trim()
                .parse::<f64>()
                .ok()
                .map(|x| Tolerance::Relative(x / 100.0)),
            None => s.parse::<f64>().ok().map(Tolerance::Absolute),
        }
        .filter(|t| match t {
            Tolerance::Absolute(x) | Tolerance::Relative(x) => x.is_finite() && *x >= 0.0,
        })
    }

    fn bound(&self, target: f64) -> f64 {
        match *self {
            Tolerance::Absolute(x) => x,
            Tolerance::Relative(x) => x * target.abs(),
        }
    }
}

impl fmt::Display for Tolerance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tolerance::Absolute(x) => write!(f, "±{x}"),
            Tolerance::Relative(x) => write!(f, "±{}%", x * 100.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expectation {
    pub quantity: String,
    pub target: f64,
    pub tolerance: Tolerance,
    pub source: String,
}

pub fn parse(text: &str) -> Result<Vec<Expectation>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CliError::Expectations(e.to_string()))?
        .clone();
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    let expected = ["quantity", "target", "tolerance", "source"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(CliError::Expectations(format!(
            "header must be `{}`, got `{}`",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| CliError::Expectations(e.to_string()))?;
        let line = i + 2;
        let bad = |what: &str| CliError::Expectations(format!("row {line}: {what}"));
        let target = row[1]
            .parse::<f64>()
            .map_err(|_| bad("target is not a number"))?;
        let tolerance = Tolerance::parse(&row[2])
            .ok_or_else(|| bad("tolerance must be a non-negative number or percentage"))?;
        out.push(Expectation {
            quantity: row[0].to_string(),
            target,
            tolerance,
            source: row[3].to_string(),
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckLine {
    pub expectation: Expectation,
    pub value: Option<f64>,
    pub pass: bool,
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = &self.expectation;
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        match self.value {
            Some(v) => write!(
                f,
                "{verdict} {} = {v:.6e} (target {:.6e} {}, {})",
                e.quantity, e.target, e.tolerance, e.source
            ),
            None => write!(
                f,
                "{verdict} {} missing from summary ({})",
                e.quantity, e.source
            ),
        }
    }
}

pub fn compare(summary: &RunSummary, expectations: &[Expectation]) -> Vec<CheckLine> {
    expectations
        .iter()
        .map(|e| {
            let value = summary.quantities.get(&e.quantity).copied();
            let pass = value.is_some_and(|v| (v - e.target).abs() <= e.tolerance.bound(e.target));
            CheckLine {
                expectation: e.clone(),
                value,
                pass,
            }
        })
        .collect()
}
