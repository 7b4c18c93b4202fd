//! Report records: every numerical claim names its invariant and tolerance.

use std::path::Path;

use serde::Serialize;

use crate::config::context_path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "==")]
    Equal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub invariant: String,
    pub value: f64,
    pub relation: Relation,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(invariant: impl Into<String>, value: f64, limit: f64) -> Self {
        Check {
            invariant: invariant.into(),
            value,
            relation: Relation::AtMost,
            limit,
            pass: value <= limit,
        }
    }

    pub fn at_least(invariant: impl Into<String>, value: f64, limit: f64) -> Self {
        Check {
            invariant: invariant.into(),
            value,
            relation: Relation::AtLeast,
            limit,
            pass: value >= limit,
        }
    }

    /// `|value − target| ≤ tol`, recorded as the deviation against `tol`.
    pub fn within(invariant: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Check::at_most(
            format!("|{} - {target}|", invariant.into()),
            (value - target).abs(),
            tol,
        )
    }

    pub fn count_zero(invariant: impl Into<String>, count: usize) -> Self {
        Check {
            invariant: invariant.into(),
            value: count as f64,
            relation: Relation::Equal,
            limit: 0.0,
            pass: count == 0,
        }
    }

    pub fn holds(invariant: impl Into<String>, ok: bool) -> Self {
        Check {
            invariant: invariant.into(),
            value: if ok { 1.0 } else { 0.0 },
            relation: Relation::Equal,
            limit: 1.0,
            pass: ok,
        }
    }
}

/// Non-finite values serialize as `null` in JSON, so they are spelled out instead.
fn finite_or_text(v: f64) -> serde_json::Value {
    if v.is_finite() {
        serde_json::json!(v)
    } else {
        serde_json::json!(v.to_string())
    }
}

pub fn checks_json(checks: &[Check]) -> serde_json::Value {
    serde_json::Value::Array(
        checks
            .iter()
            .map(|c| {
                serde_json::json!({
                    "invariant": c.invariant,
                    "value": finite_or_text(c.value),
                    "relation": c.relation,
                    "limit": finite_or_text(c.limit),
                    "pass": c.pass,
                })
            })
            .collect(),
    )
}

pub fn failing(checks: &[Check]) -> Vec<&str> {
    checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| c.invariant.as_str())
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    context_path(std::fs::write(path, text), path)
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> anyhow::Result<()> {
    let mut text = header.join(",");
    text.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    context_path(std::fs::write(path, text), path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relations() {
        assert!(Check::at_most("x", 1.0, 1.0).pass);
        assert!(!Check::at_least("x", 0.9, 1.0).pass);
        let w = Check::within("slope", 1.05, 1.0, 0.1);
        assert!(w.pass && w.invariant == "|slope - 1|");
        assert!(!Check::at_most("x", f64::NAN, 1.0).pass);
        assert!(!Check::count_zero("v", 2).pass);
        let j = checks_json(&[Check::at_most("x", f64::NAN, 1.0)]);
        assert_eq!(j[0]["value"], "NaN");
        assert_eq!(
            failing(&[Check::holds("a", true), Check::holds("b", false)]),
            vec!["b"]
        );
    }
}
