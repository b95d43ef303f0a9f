//! Shared actuator surface: typed invocation schema, the Level 0-4 agency
//! gates, mark authoring, and derivation of the admissible set.
//!
//! Humans, models, backends, and imports all act through the same actuator
//! registry; the admissible set is independent of origin.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::canonical;
use crate::effects::EffectKind;
use crate::error::{Error, Result};
use crate::math::{Axis, Vec3};
use crate::scene::{EvidenceSourceKind, Origin, Resolved, SceneSnapshot};

pub const ACTUATOR_FORMAT: &str = "hylos-actuators/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamKind {
    FrameRef,
    EntityRef,
    AnchorRef,
    AssertionRef,
    Scalar,
    Axis,
    Mark,
    Text,
}

impl ParamKind {
    pub fn is_ref(self) -> bool {
        matches!(
            self,
            ParamKind::FrameRef | ParamKind::EntityRef | ParamKind::AnchorRef | ParamKind::AssertionRef
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
}

/// A subject slot of an effect template: either an invocation parameter
/// name or a literal element ref.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "from")]
pub enum SubjectSource {
    Param { name: String },
    Literal { id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuantitySource {
    TargetValue,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectTemplate {
    pub kind: EffectKind,
    pub subjects: Vec<SubjectSource>,
    pub quantity: QuantitySource,
    pub verifier: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActuatorSpec {
    pub actuator_id: String,
    pub min_level: u8,
    /// False for presentation-only actuators (highlight, evidence append).
    pub mutating: bool,
    pub params: Vec<ParamSpec>,
    /// Evidence source kinds accepted by Grounded; empty means any.
    pub allowed_evidence_kinds: Vec<EvidenceSourceKind>,
    pub effect_template: Vec<EffectTemplate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendCandidate {
    pub candidate_id: String,
    pub actuator_id: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ActuatorRegistry {
    pub actuators: BTreeMap<String, ActuatorSpec>,
    pub backend_candidates: BTreeMap<String, BackendCandidate>,
}

impl ActuatorRegistry {
    pub fn register(&mut self, spec: ActuatorSpec) {
        self.actuators.insert(spec.actuator_id.clone(), spec);
    }

    pub fn fingerprint(&self) -> String {
        canonical::digest_of(self)
    }

    pub fn has_backend_candidate(&self, actuator_id: &str) -> bool {
        self.backend_candidates
            .values()
            .any(|c| c.actuator_id == actuator_id)
    }

    pub fn to_registry_string(&self) -> String {
        #[derive(Serialize)]
        struct File<'a> {
            format: &'a str,
            registry: &'a ActuatorRegistry,
        }
        canonical::to_canonical_string(&File { format: ACTUATOR_FORMAT, registry: self })
    }

    pub fn from_registry_str(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct File {
            format: String,
            registry: ActuatorRegistry,
        }
        let file: File = serde_json::from_str(text)?;
        if file.format != ACTUATOR_FORMAT {
            return Err(Error::SchemaMismatch(format!(
                "unsupported registry format: {}",
                file.format
            )));
        }
        for spec in file.registry.actuators.values() {
            if spec.min_level > 4 {
                return Err(Error::SchemaMismatch(format!(
                    "actuator {} level {} outside 0-4",
                    spec.actuator_id, spec.min_level
                )));
            }
            if spec.min_level >= 1 && spec.params.is_empty() {
                return Err(Error::SchemaMismatch(format!(
                    "actuator {} at level >= 1 needs a parameter schema",
                    spec.actuator_id
                )));
            }
        }
        Ok(file.registry)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type", content = "value")]
pub enum ArgValue {
    Ref(String),
    Scalar(f64),
    Axis(Axis),
    Text(String),
    Mark(SpatialMark),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActuatorInvocation {
    pub invocation_id: String,
    pub actuator_id: String,
    pub origin: Origin,
    pub level: u8,
    pub arguments: BTreeMap<String, ArgValue>,
    pub evidence_refs: BTreeSet<String>,
    pub backend_candidate: Option<String>,
    /// Registered geometric alternative supplying the target value.
    pub value_alternative: Option<String>,
    pub review_flag: bool,
    pub validator: Option<String>,
    /// Artifact ingestion record id, required at Level 4.
    pub ingestion_record: Option<String>,
}

impl ActuatorInvocation {
    pub fn new(invocation_id: &str, actuator_id: &str, origin: Origin, level: u8) -> Self {
        ActuatorInvocation {
            invocation_id: invocation_id.to_string(),
            actuator_id: actuator_id.to_string(),
            origin,
            level,
            arguments: BTreeMap::new(),
            evidence_refs: BTreeSet::new(),
            backend_candidate: None,
            value_alternative: None,
            review_flag: false,
            validator: None,
            ingestion_record: None,
        }
    }

    pub fn with_arg(mut self, name: &str, value: ArgValue) -> Self {
        self.arguments.insert(name.to_string(), value);
        self
    }

    pub fn ref_arg(&self, name: &str) -> Result<&str> {
        match self.arguments.get(name) {
            Some(ArgValue::Ref(id)) => Ok(id),
            _ => Err(Error::SchemaMismatch(format!("missing ref argument {name}"))),
        }
    }

    pub fn scalar_arg(&self, name: &str) -> Result<f64> {
        match self.arguments.get(name) {
            Some(ArgValue::Scalar(v)) => Ok(*v),
            _ => Err(Error::SchemaMismatch(format!("missing scalar argument {name}"))),
        }
    }

    pub fn axis_arg(&self, name: &str) -> Result<Axis> {
        match self.arguments.get(name) {
            Some(ArgValue::Axis(a)) => Ok(*a),
            _ => Err(Error::SchemaMismatch(format!("missing axis argument {name}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarkTopology {
    Path,
    Region,
    Boundary,
    Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarkPurpose {
    UncertaintyArea,
    BlockedZone,
    AccessRoute,
    InspectionConcern,
    MissingInformation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialMark {
    pub mark_id: String,
    pub topology: MarkTopology,
    pub samples: Vec<Vec3>,
    pub purpose: MarkPurpose,
    pub confidence: f64,
    pub evidence_refs: BTreeSet<String>,
    /// Optional element this mark is anchored to.
    pub anchor: Option<String>,
}

impl SpatialMark {
    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::SchemaMismatch(format!(
                "mark {} has no geometry samples",
                self.mark_id
            )));
        }
        if self.samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::SchemaMismatch(format!(
                "mark {} has non-finite samples",
                self.mark_id
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleBinding {
    pub actuator_id: String,
    /// (parameter name, bound ref) for every ref-kind parameter.
    pub binding: Vec<(String, String)>,
}

/// Enumerates every actuator whose ref parameters can be bound against the
/// snapshot and whose level-gated supports exist. Ordering is deterministic:
/// actuator id, then binding tuple lexicographic.
pub fn derive_admissible(
    snapshot: &SceneSnapshot,
    registry: &ActuatorRegistry,
) -> Vec<AdmissibleBinding> {
    let mut out = Vec::new();
    for (id, spec) in &registry.actuators {
        // Level >= 2 actuators need a registered backend candidate before
        // any invocation of them can pass its gate.
        if spec.min_level == 2 && !registry.has_backend_candidate(id) {
            continue;
        }
        let ref_params: Vec<&ParamSpec> =
            spec.params.iter().filter(|p| p.kind.is_ref()).collect();
        let mut bindings: Vec<Vec<(String, String)>> = vec![Vec::new()];
        for param in &ref_params {
            let candidates = candidates_for(snapshot, param.kind);
            if candidates.is_empty() {
                bindings.clear();
                break;
            }
            let mut next = Vec::new();
            for partial in &bindings {
                for c in &candidates {
                    let mut b = partial.clone();
                    b.push((param.name.clone(), c.clone()));
                    next.push(b);
                }
            }
            bindings = next;
        }
        for binding in bindings {
            out.push(AdmissibleBinding { actuator_id: id.clone(), binding });
        }
    }
    out.sort_by(|a, b| (a.actuator_id.clone(), a.binding.clone()).cmp(&(b.actuator_id.clone(), b.binding.clone())));
    out
}

fn candidates_for(snapshot: &SceneSnapshot, kind: ParamKind) -> Vec<String> {
    match kind {
        ParamKind::FrameRef => snapshot.frames.keys().cloned().collect(),
        ParamKind::EntityRef => snapshot.entities.keys().cloned().collect(),
        ParamKind::AnchorRef => snapshot.anchors.keys().cloned().collect(),
        ParamKind::AssertionRef => snapshot.assertions.keys().cloned().collect(),
        _ => Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "gate")]
pub enum GateOutcome {
    Pass,
    Gated { reason: String },
}

impl GateOutcome {
    pub fn passed(&self) -> bool {
        matches!(self, GateOutcome::Pass)
    }
}

/// Checks the invocation against its schema and its agency-level commit rule.
pub fn gate_check(
    invocation: &ActuatorInvocation,
    snapshot: &SceneSnapshot,
    registry: &ActuatorRegistry,
) -> Result<GateOutcome> {
    let spec = registry
        .actuators
        .get(&invocation.actuator_id)
        .ok_or_else(|| Error::SchemaMismatch(format!(
            "unregistered actuator {}",
            invocation.actuator_id
        )))?;
    check_schema(invocation, spec)?;
    if invocation.level < spec.min_level {
        return Ok(GateOutcome::Gated {
            reason: format!(
                "claimed level {} below actuator minimum {}",
                invocation.level, spec.min_level
            ),
        });
    }
    let outcome = match invocation.level {
        0 => {
            if spec.mutating {
                GateOutcome::Gated { reason: "level 0 commits presentation only".into() }
            } else {
                GateOutcome::Pass
            }
        }
        1 => {
            if invocation.review_flag || invocation.validator.is_some() {
                GateOutcome::Pass
            } else {
                GateOutcome::Gated { reason: "level 1 requires review or validator".into() }
            }
        }
        2 => {
            if invocation.backend_candidate.is_some() {
                GateOutcome::Pass
            } else {
                GateOutcome::Gated { reason: "level 2 requires a backend candidate".into() }
            }
        }
        3 => {
            if invocation.evidence_refs.is_empty() {
                GateOutcome::Gated { reason: "level 3 requires evidence refs".into() }
            } else if !invocation.review_flag {
                GateOutcome::Gated { reason: "level 3 requires review".into() }
            } else {
                GateOutcome::Pass
            }
        }
        4 => {
            if invocation.ingestion_record.is_none() {
                GateOutcome::Gated { reason: "level 4 requires an ingestion record".into() }
            } else if !invocation.review_flag {
                GateOutcome::Gated { reason: "level 4 requires review".into() }
            } else {
                GateOutcome::Pass
            }
        }
        other => GateOutcome::Gated { reason: format!("unknown agency level {other}") },
    };
    // Gates never mutate the snapshot; touch it only to keep ref arguments
    // honest for mutating actuators.
    if outcome.passed() && spec.mutating {
        for param in &spec.params {
            if param.kind.is_ref() {
                let id = invocation.ref_arg(&param.name)?;
                snapshot.resolve_ref(id).map_err(|_| Error::SchemaMismatch(format!(
                    "argument {} names unknown ref {id}",
                    param.name
                )))?;
            }
        }
    }
    Ok(outcome)
}

fn check_schema(invocation: &ActuatorInvocation, spec: &ActuatorSpec) -> Result<()> {
    for param in &spec.params {
        let arg = invocation.arguments.get(&param.name).ok_or_else(|| {
            Error::SchemaMismatch(format!("missing argument {}", param.name))
        })?;
        let ok = matches!(
            (param.kind, arg),
            (ParamKind::FrameRef, ArgValue::Ref(_))
                | (ParamKind::EntityRef, ArgValue::Ref(_))
                | (ParamKind::AnchorRef, ArgValue::Ref(_))
                | (ParamKind::AssertionRef, ArgValue::Ref(_))
                | (ParamKind::Scalar, ArgValue::Scalar(_))
                | (ParamKind::Axis, ArgValue::Axis(_))
                | (ParamKind::Mark, ArgValue::Mark(_))
                | (ParamKind::Text, ArgValue::Text(_))
        );
        if !ok {
            return Err(Error::SchemaMismatch(format!(
                "argument {} does not match schema kind",
                param.name
            )));
        }
    }
    Ok(())
}

/// Normalizes a raw spatial mark into a draft invocation of the
/// `author_mark` actuator. Human marks draft at Level 1, model marks at
/// Level 3 (model marks always need evidence). Never mutates the snapshot.
pub fn normalize_mark(
    raw: &SpatialMark,
    origin: Origin,
    snapshot: &SceneSnapshot,
) -> Result<ActuatorInvocation> {
    raw.validate()?;
    if let Some(anchor) = &raw.anchor {
        snapshot.resolve_ref(anchor)?;
        if matches!(snapshot.resolve_ref(anchor)?, Resolved::Evidence(_)) {
            return Err(Error::SchemaMismatch(format!(
                "mark {} anchored to evidence record",
                raw.mark_id
            )));
        }
    }
    let level = match origin {
        Origin::Human => 1,
        _ => 3,
    };
    let mut inv = ActuatorInvocation::new(
        &format!("inv.mark.{}", raw.mark_id),
        "author_mark",
        origin,
        level,
    )
    .with_arg("mark", ArgValue::Mark(raw.clone()));
    inv.evidence_refs = raw.evidence_refs.clone();
    Ok(inv)
}

// ---------------------------------------------------------------------------
// Built-in actuator specs
// ---------------------------------------------------------------------------

/// The default actuator registry used by fixtures and the replay harness.
pub fn default_registry() -> ActuatorRegistry {
    let mut registry = ActuatorRegistry::default();
    registry.register(ActuatorSpec {
        actuator_id: "set_frame_offset".into(),
        min_level: 1,
        mutating: true,
        params: vec![
            ParamSpec { name: "frame".into(), kind: ParamKind::FrameRef },
            ParamSpec { name: "axis".into(), kind: ParamKind::Axis },
            ParamSpec { name: "value".into(), kind: ParamKind::Scalar },
        ],
        allowed_evidence_kinds: vec![
            EvidenceSourceKind::Measurement,
            EvidenceSourceKind::UserDeclaration,
            EvidenceSourceKind::Diagnostic,
        ],
        effect_template: vec![
            EffectTemplate {
                kind: EffectKind::LateralOffset,
                subjects: vec![
                    SubjectSource::Param { name: "frame".into() },
                    SubjectSource::Literal { id: "frame.body".into() },
                ],
                quantity: QuantitySource::TargetValue,
                verifier: "world-pose-offset".into(),
            },
            // Recentering claim for the dependent subtree; holds exactly
            // when the target value recenters it.
            EffectTemplate {
                kind: EffectKind::LateralOffset,
                subjects: vec![
                    SubjectSource::Literal { id: "entity.tray".into() },
                    SubjectSource::Literal { id: "entity.body".into() },
                ],
                quantity: QuantitySource::Zero,
                verifier: "world-pose-offset".into(),
            },
        ],
    });
    registry.register(ActuatorSpec {
        actuator_id: "move_entity".into(),
        min_level: 1,
        mutating: true,
        params: vec![
            ParamSpec { name: "entity".into(), kind: ParamKind::EntityRef },
            ParamSpec { name: "axis".into(), kind: ParamKind::Axis },
            ParamSpec { name: "value".into(), kind: ParamKind::Scalar },
        ],
        allowed_evidence_kinds: vec![
            EvidenceSourceKind::Measurement,
            EvidenceSourceKind::UserDeclaration,
            EvidenceSourceKind::Diagnostic,
        ],
        effect_template: vec![EffectTemplate {
            kind: EffectKind::LateralOffset,
            subjects: vec![
                SubjectSource::Param { name: "entity".into() },
                SubjectSource::Literal { id: "entity.body".into() },
            ],
            quantity: QuantitySource::Zero,
            verifier: "world-pose-offset".into(),
        }],
    });
    registry.register(ActuatorSpec {
        actuator_id: "highlight".into(),
        min_level: 0,
        mutating: false,
        params: vec![],
        allowed_evidence_kinds: vec![],
        effect_template: vec![],
    });
    registry.register(ActuatorSpec {
        actuator_id: "record_evidence".into(),
        min_level: 0,
        mutating: false,
        params: vec![],
        allowed_evidence_kinds: vec![],
        effect_template: vec![],
    });
    registry.register(ActuatorSpec {
        actuator_id: "author_mark".into(),
        min_level: 1,
        mutating: false,
        params: vec![ParamSpec { name: "mark".into(), kind: ParamKind::Mark }],
        allowed_evidence_kinds: vec![],
        effect_template: vec![],
    });
    registry.register(ActuatorSpec {
        actuator_id: "ingest_artifact".into(),
        min_level: 4,
        mutating: true,
        params: vec![ParamSpec { name: "artifact".into(), kind: ParamKind::Text }],
        allowed_evidence_kinds: vec![],
        effect_template: vec![],
    });
    registry
}
