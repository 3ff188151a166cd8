//! Structured pass/fail records shared by the axiom, class and bound checks.

use serde::Serialize;
use std::time::Duration;

/// Outcome of a single check.
///
/// `Inconclusive` is reserved for resource exhaustion (horizon or window
/// budget exceeded); it never counts as a falsification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Inconclusive,
}

impl CheckStatus {
    pub fn combine(self, other: CheckStatus) -> CheckStatus {
        use CheckStatus::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Pass,
        }
    }
}

/// Start index and extent of a metastable window, together with the measured
/// diameter of the iterates over it.
#[derive(Debug, Clone, Serialize)]
pub struct WindowWitness {
    pub n: u64,
    pub window_end: u64,
    pub max_pairwise_distance: f64,
}

/// One line of a verification report.
#[derive(Debug, Clone, Serialize)]
pub struct CheckItem {
    pub label: String,
    pub status: CheckStatus,
    /// Measured quantity the item is about (max violation, distance, ...).
    pub measured: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "String::is_empty", default)]
    pub detail: String,
}

impl CheckItem {
    pub fn from_violation(label: impl Into<String>, violation: f64, tol: f64) -> Self {
        CheckItem {
            label: label.into(),
            status: if violation <= tol {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            measured: violation,
            tolerance: tol,
            detail: String::new(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

/// Structured result of a bound or axiom check.
///
/// Reports are replayable from their provenance string plus the original
/// seed; the wall-clock runtime is kept out of the serialized form so that
/// identical runs produce byte-identical report files.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub check_id: String,
    pub status: CheckStatus,
    pub items: Vec<CheckItem>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub witnesses: Vec<WindowWitness>,
    /// Extra tolerance granted by accumulated inner-solve residuals.
    pub measured_slack: f64,
    pub tolerance: f64,
    pub provenance: String,
    #[serde(skip)]
    pub runtime: Option<Duration>,
}

impl VerificationReport {
    pub fn new(check_id: impl Into<String>, provenance: impl Into<String>) -> Self {
        VerificationReport {
            check_id: check_id.into(),
            status: CheckStatus::Pass,
            items: Vec::new(),
            witnesses: Vec::new(),
            measured_slack: 0.0,
            tolerance: 0.0,
            provenance: provenance.into(),
            runtime: None,
        }
    }

    pub fn push(&mut self, item: CheckItem) {
        self.status = self.status.combine(item.status);
        self.items.push(item);
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }

    /// Largest measured value among items (e.g. max axiom violation).
    pub fn max_measured(&self) -> f64 {
        self.items.iter().fold(0.0_f64, |m, it| m.max(it.measured))
    }

    pub fn item(&self, label: &str) -> Option<&CheckItem> {
        self.items.iter().find(|it| it.label == label)
    }
}
