//! Axiom and compatibility reports shared by the window-system and
//! distribution-system checkers.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    NotApplicable,
}

/// Evidence for a failed check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    /// Indices of the offending objects (atoms for window systems, windows
    /// for distribution systems).
    pub indices: Vec<usize>,
    /// Time intervals involved, when the violation is geometric.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub intervals: Vec<[f64; 2]>,
    pub deviation: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomCheck {
    pub axiom: String,
    pub status: CheckStatus,
    /// Number of members, tuples or families inspected.
    pub checked: u64,
    pub max_deviation: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl AxiomCheck {
    pub(crate) fn new(axiom: impl Into<String>) -> Self {
        AxiomCheck {
            axiom: axiom.into(),
            status: CheckStatus::Pass,
            checked: 0,
            max_deviation: 0.0,
            witness: None,
            note: None,
        }
    }

    pub(crate) fn not_applicable(axiom: impl Into<String>, note: impl Into<String>) -> Self {
        AxiomCheck {
            status: CheckStatus::NotApplicable,
            note: Some(note.into()),
            ..AxiomCheck::new(axiom)
        }
    }

    /// Records a deviation. The first failure keeps its witness; later ones
    /// only raise `max_deviation` and replace the witness when larger.
    pub(crate) fn record(&mut self, deviation: f64, failed: bool, witness: impl FnOnce() -> Witness) {
        if deviation > self.max_deviation || deviation.is_nan() {
            self.max_deviation = if deviation.is_nan() { f64::INFINITY } else { deviation };
        }
        if failed {
            let replace = match &self.witness {
                None => true,
                Some(w) => deviation > w.deviation,
            };
            self.status = CheckStatus::Fail;
            if replace {
                self.witness = Some(witness());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.status != CheckStatus::Fail
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EvaluationMode {
    Exhaustive,
    Sampled { sample_size: u64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub mode: EvaluationMode,
    pub checks: Vec<AxiomCheck>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(AxiomCheck::passed)
    }

    pub fn check(&self, axiom: &str) -> Option<&AxiomCheck> {
        self.checks.iter().find(|c| c.axiom == axiom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityReport {
    pub compatible: bool,
    /// Largest mixture residual over all checked disjoint families.
    pub max_residual: f64,
    pub conditions: Vec<AxiomCheck>,
}

impl CompatibilityReport {
    pub fn condition(&self, name: &str) -> Option<&AxiomCheck> {
        self.conditions.iter().find(|c| c.axiom == name)
    }
}
