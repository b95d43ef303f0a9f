//! Effect vocabulary, the tolerance-parameterized equivalence relation,
//! effect-diff computation, and status predicates.

use serde::{Deserialize, Serialize};

pub const DEFAULT_TAU_LENGTH: f64 = 1e-3;
pub const DEFAULT_TAU_ANGLE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EffectKind {
    LateralOffset,
    VerticalOffset,
    RotationDelta,
    Clearance,
    ContainmentFlag,
    AttachmentFlag,
}

impl EffectKind {
    pub fn is_flag(self) -> bool {
        matches!(self, EffectKind::ContainmentFlag | EffectKind::AttachmentFlag)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectClaim {
    pub kind: EffectKind,
    /// Canonical ordered subject tuple.
    pub subjects: Vec<String>,
    /// Scalar quantity in meters/radians; absent for flag kinds.
    pub quantity: Option<f64>,
    /// Flag value; present exactly for flag kinds.
    pub flag: Option<bool>,
    pub verifier: Option<String>,
}

impl EffectClaim {
    pub fn quantity(kind: EffectKind, subjects: &[&str], q: f64, verifier: &str) -> Self {
        EffectClaim {
            kind,
            subjects: subjects.iter().map(|s| s.to_string()).collect(),
            quantity: Some(q),
            flag: None,
            verifier: Some(verifier.to_string()),
        }
    }

    pub fn flag(kind: EffectKind, subjects: &[&str], value: bool, verifier: &str) -> Self {
        EffectClaim {
            kind,
            subjects: subjects.iter().map(|s| s.to_string()).collect(),
            quantity: None,
            flag: Some(value),
            verifier: Some(verifier.to_string()),
        }
    }

    pub fn without_verifier(mut self) -> Self {
        self.verifier = None;
        self
    }

    /// Deterministic sort key used for greedy pairing and serialization.
    pub fn sort_key(&self) -> (EffectKind, Vec<String>, u64) {
        let bits = self
            .quantity
            .map(|q| q.to_bits())
            .unwrap_or(self.flag.map(u64::from).unwrap_or(0));
        (self.kind, self.subjects.clone(), bits)
    }
}

/// Tolerance table for the effect equivalence relation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceTable {
    pub tau_length: f64,
    pub tau_angle: f64,
}

impl Default for ToleranceTable {
    fn default() -> Self {
        ToleranceTable { tau_length: DEFAULT_TAU_LENGTH, tau_angle: DEFAULT_TAU_ANGLE }
    }
}

impl ToleranceTable {
    pub fn tau(&self, kind: EffectKind) -> f64 {
        match kind {
            EffectKind::RotationDelta => self.tau_angle,
            _ => self.tau_length,
        }
    }
}

/// The equivalence relation: same kind, same canonical subject tuple, and
/// equal flags or quantities within `tau(kind)`.
pub fn effects_equivalent(a: &EffectClaim, b: &EffectClaim, tol: &ToleranceTable) -> bool {
    if a.kind != b.kind || a.subjects != b.subjects {
        return false;
    }
    if a.kind.is_flag() {
        return a.flag == b.flag;
    }
    match (a.quantity, b.quantity) {
        (Some(qa), Some(qb)) => (qa - qb).abs() <= tol.tau(a.kind),
        _ => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiffStatus {
    Matched,
    Review,
    Violated,
    Unchecked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectDiff {
    pub predicted: Vec<EffectClaim>,
    pub observed: Vec<EffectClaim>,
    pub matched: Vec<EffectClaim>,
    pub unexpected: Vec<EffectClaim>,
    pub unchecked: Vec<EffectClaim>,
    pub missed: Vec<EffectClaim>,
    pub status: DiffStatus,
}

/// Computes the effect diff:
///
/// matched    = predicted claims with an equivalent observed claim
/// unexpected = observed claims with no equivalent predicted claim
/// unchecked  = predicted claims with no verifier
/// missed     = verifier-bearing predicted claims with no match
///
/// Claims are processed in deterministic sorted order.
pub fn compute_diff(
    predicted: &[EffectClaim],
    observed: &[EffectClaim],
    tol: &ToleranceTable,
) -> EffectDiff {
    let mut predicted = predicted.to_vec();
    let mut observed = observed.to_vec();
    predicted.sort_by_key(EffectClaim::sort_key);
    observed.sort_by_key(EffectClaim::sort_key);

    let mut matched = Vec::new();
    let mut unchecked = Vec::new();
    let mut missed = Vec::new();
    for p in &predicted {
        let has_match = observed.iter().any(|o| effects_equivalent(p, o, tol));
        if has_match {
            matched.push(p.clone());
        }
        if p.verifier.is_none() {
            unchecked.push(p.clone());
        } else if !has_match {
            missed.push(p.clone());
        }
    }
    let unexpected: Vec<EffectClaim> = observed
        .iter()
        .filter(|o| !predicted.iter().any(|p| effects_equivalent(p, o, tol)))
        .cloned()
        .collect();

    let status = if unexpected.is_empty() && unchecked.is_empty() {
        DiffStatus::Matched
    } else {
        DiffStatus::Review
    };
    EffectDiff { predicted, observed, matched, unexpected, unchecked, missed, status }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuditStatus {
    Passed,
    Failed,
    Absent,
}

/// Final status with priority violated > unchecked > review > matched.
pub fn assign_status(
    diff: &EffectDiff,
    any_invariant_violated: bool,
    audit: AuditStatus,
) -> DiffStatus {
    if any_invariant_violated {
        DiffStatus::Violated
    } else if audit == AuditStatus::Absent {
        DiffStatus::Unchecked
    } else if !diff.unexpected.is_empty() || !diff.unchecked.is_empty() || audit == AuditStatus::Failed
    {
        DiffStatus::Review
    } else {
        DiffStatus::Matched
    }
}
