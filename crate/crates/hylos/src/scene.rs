//! Canonical scene operability state: entities, frames, anchors, assertions,
//! evidence, capability gaps, protected invariants, and immutable snapshots.
//!
//! A [`SceneSnapshot`] is a versioned value. All mutation flows through
//! [`snapshot_commit`], which returns a new snapshot and leaves the parent
//! untouched. The content digest is a pure function of the contents and is
//! independent of element insertion order (storage is id-keyed ordered maps).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::canonical;
use crate::error::{Error, Result};
use crate::math::{Axis, Pose, Quat, Vec3};

pub const SCENE_FORMAT: &str = "hylos-scene/1";

// ---------------------------------------------------------------------------
// Element types
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntityKind {
    Body,
    Assembly,
    Component,
    Tray,
    Region,
    Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "shape")]
pub enum Geometry {
    /// Axis-aligned box in the entity's own frame; dimensions in meters.
    Box { w: f64, h: f64, d: f64 },
    Cylinder { r: f64, h: f64 },
    PointSet { points: Vec<Vec3> },
}

impl Geometry {
    fn validate(&self, id: &str) -> Result<()> {
        let ok = match self {
            Geometry::Box { w, h, d } => *w > 0.0 && *h > 0.0 && *d > 0.0,
            Geometry::Cylinder { r, h } => *r > 0.0 && *h > 0.0,
            Geometry::PointSet { points } => {
                !points.is_empty() && points.iter().all(|p| p.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidScene(format!("degenerate geometry on {id}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    Human,
    Model,
    Backend,
    Import,
    Derived,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceTag {
    pub origin: Origin,
    pub source_ref: Option<String>,
    pub created_at: u64,
}

impl ProvenanceTag {
    pub fn new(origin: Origin, created_at: u64) -> Self {
        ProvenanceTag { origin, source_ref: None, created_at }
    }

    fn validate(&self, id: &str) -> Result<()> {
        if self.origin == Origin::Derived && self.source_ref.is_none() {
            return Err(Error::InvalidScene(format!(
                "derived provenance on {id} has no source ref"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityNode {
    pub entity_id: String,
    pub kind: EntityKind,
    pub parent: Option<String>,
    pub pose_frame: String,
    pub geometry: Geometry,
    pub uncertainty: f64,
    pub provenance: ProvenanceTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameNode {
    pub frame_id: String,
    pub owner: Option<String>,
    pub parent: Option<String>,
    pub translation: Vec3,
    pub rotation: Quat,
    pub provenance: ProvenanceTag,
}

impl FrameNode {
    pub fn local_pose(&self) -> Pose {
        Pose::new(self.translation, self.rotation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnchorKind {
    Surface,
    Opening,
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorNode {
    pub anchor_id: String,
    /// Entity or frame ref.
    pub host: String,
    pub local_offset: Vec3,
    pub kind: AnchorKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClaimKind {
    Support,
    Attachment,
    Alignment,
    Clearance,
    Containment,
    Obstruction,
    Occlusion,
    Access,
}

impl ClaimKind {
    pub fn arity(self) -> usize {
        2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssertionStatus {
    Supported,
    Unresolved,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub assertion_id: String,
    pub kind: ClaimKind,
    pub subjects: Vec<String>,
    /// Named scalar parameters, units implied by name (meters/radians).
    pub parameters: BTreeMap<String, f64>,
    pub status: AssertionStatus,
    pub evidence_refs: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvidenceSourceKind {
    Measurement,
    UserDeclaration,
    Sensor,
    ModelProposal,
    Import,
    Diagnostic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceRecord {
    pub evidence_id: String,
    pub source_kind: EvidenceSourceKind,
    /// Named scalar payload values.
    pub payload: BTreeMap<String, f64>,
    /// Element refs this observation is about.
    pub subject_refs: Vec<String>,
    pub confidence: f64,
    pub sequence: u64,
}

/// The closed 7-member set of typed missing layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapKind {
    MissingMeasurement,
    MissingLegalTarget,
    MissingValueAcquisition,
    MissingCandidate,
    MissingLowerer,
    MissingBackendOperation,
    MissingVerification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapabilityGap {
    pub gap_id: String,
    pub kind: GapKind,
    pub transaction_id: Option<String>,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredicateKind {
    FrameForest,
    AttachmentPreserved,
    ClearanceMin,
    Containment,
    NoOverlap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantSpec {
    pub invariant_id: String,
    pub predicate: PredicateKind,
    pub parameters: BTreeMap<String, f64>,
    pub scope_refs: Vec<String>,
}

/// Minimal realization projection record: a view kind plus payload digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionRecord {
    pub projection_id: String,
    pub view_kind: String,
    pub payload_digest: String,
}

// ---------------------------------------------------------------------------
// Snapshot
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSnapshot {
    pub snapshot_id: String,
    pub parent_snapshot: Option<String>,
    pub entities: BTreeMap<String, EntityNode>,
    pub frames: BTreeMap<String, FrameNode>,
    pub anchors: BTreeMap<String, AnchorNode>,
    pub assertions: BTreeMap<String, Assertion>,
    pub evidence: BTreeMap<String, EvidenceRecord>,
    pub capability_gaps: BTreeMap<String, CapabilityGap>,
    pub protected_invariants: BTreeMap<String, InvariantSpec>,
    pub projections: BTreeMap<String, ProjectionRecord>,
    pub registry_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Resolved<'a> {
    Entity(&'a EntityNode),
    Frame(&'a FrameNode),
    Anchor(&'a AnchorNode),
    Assertion(&'a Assertion),
    Evidence(&'a EvidenceRecord),
    Gap(&'a CapabilityGap),
    Invariant(&'a InvariantSpec),
}

impl Resolved<'_> {
    pub fn type_tag(&self) -> &'static str {
        match self {
            Resolved::Entity(_) => "entity",
            Resolved::Frame(_) => "frame",
            Resolved::Anchor(_) => "anchor",
            Resolved::Assertion(_) => "assertion",
            Resolved::Evidence(_) => "evidence",
            Resolved::Gap(_) => "capability-gap",
            Resolved::Invariant(_) => "invariant",
        }
    }
}

/// Axis-aligned bounding box in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn center(&self) -> Vec3 {
        self.min.add(self.max).scale(0.5)
    }

    /// Largest axis separation; negative when the boxes overlap on all axes.
    pub fn gap_to(&self, o: &Aabb) -> f64 {
        let mut gap = f64::NEG_INFINITY;
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            let a = (o.min.component(axis) - self.max.component(axis))
                .max(self.min.component(axis) - o.max.component(axis));
            gap = gap.max(a);
        }
        gap
    }

    pub fn overlaps(&self, o: &Aabb) -> bool {
        self.gap_to(o) < 0.0
    }

    pub fn contains(&self, o: &Aabb) -> bool {
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            if o.min.component(axis) < self.min.component(axis)
                || o.max.component(axis) > self.max.component(axis)
            {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InvariantOutcome {
    Holds,
    Violated(String),
}

impl InvariantOutcome {
    pub fn holds(&self) -> bool {
        matches!(self, InvariantOutcome::Holds)
    }
}

impl SceneSnapshot {
    pub fn empty(snapshot_id: &str) -> Self {
        SceneSnapshot {
            snapshot_id: snapshot_id.to_string(),
            parent_snapshot: None,
            entities: BTreeMap::new(),
            frames: BTreeMap::new(),
            anchors: BTreeMap::new(),
            assertions: BTreeMap::new(),
            evidence: BTreeMap::new(),
            capability_gaps: BTreeMap::new(),
            protected_invariants: BTreeMap::new(),
            projections: BTreeMap::new(),
            registry_fingerprint: String::new(),
        }
    }

    pub fn resolve_ref(&self, id: &str) -> Result<Resolved<'_>> {
        if let Some(e) = self.entities.get(id) {
            return Ok(Resolved::Entity(e));
        }
        if let Some(f) = self.frames.get(id) {
            return Ok(Resolved::Frame(f));
        }
        if let Some(a) = self.anchors.get(id) {
            return Ok(Resolved::Anchor(a));
        }
        if let Some(a) = self.assertions.get(id) {
            return Ok(Resolved::Assertion(a));
        }
        if let Some(e) = self.evidence.get(id) {
            return Ok(Resolved::Evidence(e));
        }
        if let Some(g) = self.capability_gaps.get(id) {
            return Ok(Resolved::Gap(g));
        }
        if let Some(i) = self.protected_invariants.get(id) {
            return Ok(Resolved::Invariant(i));
        }
        Err(Error::UnknownRef(id.to_string()))
    }

    /// World pose of `frame_id`: left-to-right composition from the root.
    pub fn world_pose(&self, frame_id: &str) -> Result<Pose> {
        let mut chain = Vec::new();
        let mut seen = BTreeSet::new();
        let mut current = Some(frame_id.to_string());
        while let Some(id) = current {
            if !seen.insert(id.clone()) {
                return Err(Error::CyclicFrames(id));
            }
            let frame = self
                .frames
                .get(&id)
                .ok_or_else(|| Error::UnknownRef(id.clone()))?;
            chain.push(frame);
            current = frame.parent.clone();
        }
        let mut pose = Pose::IDENTITY;
        for frame in chain.iter().rev() {
            pose = pose.compose(frame.local_pose());
        }
        Ok(pose)
    }

    /// World pose of an entity's pose frame.
    pub fn entity_world_pose(&self, entity_id: &str) -> Result<Pose> {
        let entity = self
            .entities
            .get(entity_id)
            .ok_or_else(|| Error::UnknownRef(entity_id.to_string()))?;
        self.world_pose(&entity.pose_frame)
    }

    pub fn entity_aabb(&self, entity_id: &str) -> Result<Aabb> {
        let entity = self
            .entities
            .get(entity_id)
            .ok_or_else(|| Error::UnknownRef(entity_id.to_string()))?;
        let pose = self.world_pose(&entity.pose_frame)?;
        let local: Vec<Vec3> = match &entity.geometry {
            Geometry::Box { w, h, d } => box_corners(*w, *h, *d),
            Geometry::Cylinder { r, h } => box_corners(2.0 * r, *h, 2.0 * r),
            Geometry::PointSet { points } => points.clone(),
        };
        let mut min = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut max = Vec3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in local {
            let w = pose.apply(p);
            min = Vec3::new(min.x.min(w.x), min.y.min(w.y), min.z.min(w.z));
            max = Vec3::new(max.x.max(w.x), max.y.max(w.y), max.z.max(w.z));
        }
        Ok(Aabb { min, max })
    }

    /// World position of an anchor.
    pub fn anchor_world(&self, anchor_id: &str) -> Result<Vec3> {
        let anchor = self
            .anchors
            .get(anchor_id)
            .ok_or_else(|| Error::UnknownRef(anchor_id.to_string()))?;
        let host_pose = match self.resolve_ref(&anchor.host)? {
            Resolved::Entity(e) => self.world_pose(&e.pose_frame)?,
            Resolved::Frame(f) => self.world_pose(&f.frame_id)?,
            other => {
                return Err(Error::InvalidScene(format!(
                    "anchor {anchor_id} hosted on {} {}",
                    other.type_tag(),
                    anchor.host
                )))
            }
        };
        Ok(host_pose.apply(anchor.local_offset))
    }

    /// Pure evaluation of a protected-invariant predicate on this snapshot.
    ///
    /// `baseline` supplies the reference snapshot for attachment-preserved.
    pub fn check_invariant(
        &self,
        spec: &InvariantSpec,
        baseline: Option<&SceneSnapshot>,
    ) -> Result<InvariantOutcome> {
        match spec.predicate {
            PredicateKind::FrameForest => {
                for id in self.frames.keys() {
                    if let Err(Error::CyclicFrames(at)) = self.world_pose(id) {
                        return Ok(InvariantOutcome::Violated(format!("frame cycle at {at}")));
                    }
                }
                Ok(InvariantOutcome::Holds)
            }
            PredicateKind::AttachmentPreserved => {
                let frame_id = scope_ref(spec, 0)?;
                let frame = self
                    .frames
                    .get(frame_id)
                    .ok_or_else(|| Error::UnknownRef(frame_id.to_string()))?;
                let expected = match baseline {
                    Some(base) => base
                        .frames
                        .get(frame_id)
                        .ok_or_else(|| Error::UnknownRef(frame_id.to_string()))?
                        .parent
                        .clone(),
                    // Without a baseline the spec names the expected parent.
                    None => Some(scope_ref(spec, 1)?.to_string()),
                };
                if frame.parent == expected {
                    Ok(InvariantOutcome::Holds)
                } else {
                    Ok(InvariantOutcome::Violated(format!(
                        "frame {frame_id} reparented from {:?} to {:?}",
                        expected, frame.parent
                    )))
                }
            }
            PredicateKind::ClearanceMin => {
                let a = self.entity_aabb(scope_ref(spec, 0)?)?;
                let b = self.entity_aabb(scope_ref(spec, 1)?)?;
                let min_gap = *spec.parameters.get("min").unwrap_or(&0.0);
                let gap = a.gap_to(&b);
                if gap >= min_gap {
                    Ok(InvariantOutcome::Holds)
                } else {
                    Ok(InvariantOutcome::Violated(format!(
                        "clearance {gap:.6} below minimum {min_gap:.6}"
                    )))
                }
            }
            PredicateKind::Containment => {
                let inner = self.entity_aabb(scope_ref(spec, 0)?)?;
                let outer = self.entity_aabb(scope_ref(spec, 1)?)?;
                if outer.contains(&inner) {
                    Ok(InvariantOutcome::Holds)
                } else {
                    Ok(InvariantOutcome::Violated(format!(
                        "{} escapes {}",
                        scope_ref(spec, 0)?,
                        scope_ref(spec, 1)?
                    )))
                }
            }
            PredicateKind::NoOverlap => {
                let a = self.entity_aabb(scope_ref(spec, 0)?)?;
                let b = self.entity_aabb(scope_ref(spec, 1)?)?;
                if a.overlaps(&b) {
                    Ok(InvariantOutcome::Violated(format!(
                        "{} overlaps {}",
                        scope_ref(spec, 0)?,
                        scope_ref(spec, 1)?
                    )))
                } else {
                    Ok(InvariantOutcome::Holds)
                }
            }
        }
    }

    /// Content digest: pure function of contents, excluding identity fields.
    pub fn digest(&self) -> String {
        canonical::digest_bytes(self.content_canonical(false).as_bytes())
    }

    /// Digest of scene content with the evidence set excluded.
    ///
    /// Used by the acquisition-neutrality check: diagnostic evidence may be
    /// appended without touching geometry or assertions.
    pub fn digest_excluding_evidence(&self) -> String {
        canonical::digest_bytes(self.content_canonical(true).as_bytes())
    }

    fn content_canonical(&self, exclude_evidence: bool) -> String {
        let mut v = serde_json::to_value(self).expect("snapshot serializes");
        let map = v.as_object_mut().expect("snapshot is an object");
        map.remove("snapshot_id");
        map.remove("parent_snapshot");
        if exclude_evidence {
            map.remove("evidence");
        }
        let mut out = String::new();
        canonical::write_value(&v, &mut out);
        out
    }

    pub fn next_evidence_sequence(&self) -> u64 {
        self.evidence.values().map(|e| e.sequence).max().unwrap_or(0) + 1
    }

    /// Validates every structural invariant of the module. The loader calls
    /// this before returning a snapshot.
    pub fn validate(&self) -> Result<()> {
        for (key, e) in &self.entities {
            if key != &e.entity_id {
                return Err(Error::InvalidScene(format!("entity key {key} != id")));
            }
            e.geometry.validate(key)?;
            if !(0.0..=1.0).contains(&e.uncertainty) {
                return Err(Error::InvalidScene(format!("uncertainty out of range on {key}")));
            }
            e.provenance.validate(key)?;
            if !self.frames.contains_key(&e.pose_frame) {
                return Err(Error::InvalidScene(format!(
                    "entity {key} pose frame {} missing",
                    e.pose_frame
                )));
            }
            if let Some(p) = &e.parent {
                if !self.entities.contains_key(p) {
                    return Err(Error::InvalidScene(format!(
                        "entity {key} parent {p} missing"
                    )));
                }
            }
        }
        for (key, f) in &self.frames {
            if key != &f.frame_id {
                return Err(Error::InvalidScene(format!("frame key {key} != id")));
            }
            if !f.rotation.is_unit() {
                return Err(Error::InvalidScene(format!("frame {key} rotation not unit")));
            }
            if !f.translation.is_finite() {
                return Err(Error::InvalidScene(format!("frame {key} translation not finite")));
            }
            f.provenance.validate(key)?;
            if let Some(p) = &f.parent {
                if !self.frames.contains_key(p) {
                    return Err(Error::InvalidScene(format!("frame {key} parent {p} missing")));
                }
            }
            if let Some(o) = &f.owner {
                if !self.entities.contains_key(o) {
                    return Err(Error::InvalidScene(format!("frame {key} owner {o} missing")));
                }
            }
        }
        // Forest check: parent chains terminate without revisiting.
        for id in self.frames.keys() {
            if let Err(Error::CyclicFrames(at)) = self.world_pose(id) {
                return Err(Error::InvalidScene(format!("frame cycle at {at}")));
            }
        }
        for (key, a) in &self.anchors {
            if key != &a.anchor_id {
                return Err(Error::InvalidScene(format!("anchor key {key} != id")));
            }
            if !a.local_offset.is_finite() {
                return Err(Error::InvalidScene(format!("anchor {key} offset not finite")));
            }
            self.resolve_ref(&a.host)
                .map_err(|_| Error::InvalidScene(format!("anchor {key} host {} missing", a.host)))?;
        }
        for (key, a) in &self.assertions {
            if key != &a.assertion_id {
                return Err(Error::InvalidScene(format!("assertion key {key} != id")));
            }
            if a.subjects.len() != a.kind.arity() {
                return Err(Error::InvalidScene(format!(
                    "assertion {key} arity {} != {}",
                    a.subjects.len(),
                    a.kind.arity()
                )));
            }
            for s in &a.subjects {
                self.resolve_ref(s).map_err(|_| {
                    Error::InvalidScene(format!("assertion {key} subject {s} missing"))
                })?;
            }
            if a.status == AssertionStatus::Supported && a.evidence_refs.is_empty() {
                return Err(Error::InvalidScene(format!(
                    "assertion {key} supported without evidence"
                )));
            }
            for e in &a.evidence_refs {
                if !self.evidence.contains_key(e) {
                    return Err(Error::InvalidScene(format!(
                        "assertion {key} evidence {e} missing"
                    )));
                }
            }
        }
        let mut seqs = BTreeSet::new();
        for (key, e) in &self.evidence {
            if key != &e.evidence_id {
                return Err(Error::InvalidScene(format!("evidence key {key} != id")));
            }
            if !(0.0..=1.0).contains(&e.confidence) {
                return Err(Error::InvalidScene(format!("confidence out of range on {key}")));
            }
            if !seqs.insert(e.sequence) {
                return Err(Error::InvalidScene(format!(
                    "duplicate evidence sequence {} on {key}",
                    e.sequence
                )));
            }
        }
        for (key, g) in &self.capability_gaps {
            if key != &g.gap_id {
                return Err(Error::InvalidScene(format!("gap key {key} != id")));
            }
        }
        for (key, spec) in &self.protected_invariants {
            if key != &spec.invariant_id {
                return Err(Error::InvalidScene(format!("invariant key {key} != id")));
            }
            for r in &spec.scope_refs {
                self.resolve_ref(r).map_err(|_| {
                    Error::InvalidScene(format!("invariant {key} scope {r} missing"))
                })?;
            }
        }
        Ok(())
    }
}

fn scope_ref<'a>(spec: &'a InvariantSpec, idx: usize) -> Result<&'a str> {
    spec.scope_refs
        .get(idx)
        .map(|s| s.as_str())
        .ok_or_else(|| Error::InvalidScene(format!(
            "invariant {} missing scope ref {idx}",
            spec.invariant_id
        )))
}

fn box_corners(w: f64, h: f64, d: f64) -> Vec<Vec3> {
    let (hw, hh, hd) = (w / 2.0, h / 2.0, d / 2.0);
    let mut corners = Vec::with_capacity(8);
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                corners.push(Vec3::new(sx * hw, sy * hh, sz * hd));
            }
        }
    }
    corners
}

// ---------------------------------------------------------------------------
// Mutations and commit
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "op")]
pub enum MutationOp {
    SetFrameTranslation { frame_id: String, value: Vec3 },
    SetFrameTranslationComponent { frame_id: String, axis: Axis, value: f64 },
    SetFrameRotation { frame_id: String, value: Quat },
    SetFrameParent { frame_id: String, parent: Option<String> },
    AddEntity { entity: EntityNode },
    AddFrame { frame: FrameNode },
    AddAnchor { anchor: AnchorNode },
    AddAssertion { assertion: Assertion },
    AddEvidence { record: EvidenceRecord },
    AddCapabilityGap { gap: CapabilityGap },
    SetAssertionStatus { assertion_id: String, status: AssertionStatus },
    RemoveEntity { entity_id: String },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MutationSet {
    pub ops: Vec<MutationOp>,
}

impl MutationSet {
    pub fn single(op: MutationOp) -> Self {
        MutationSet { ops: vec![op] }
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// True when no op touches geometry (frames, entities, anchors).
    pub fn is_presentation_only(&self) -> bool {
        self.ops.iter().all(|op| {
            matches!(
                op,
                MutationOp::AddEvidence { .. }
                    | MutationOp::AddCapabilityGap { .. }
                    | MutationOp::SetAssertionStatus { .. }
                    | MutationOp::AddAssertion { .. }
            )
        })
    }
}

/// Applies a mutation set to `parent`, returning a new snapshot.
///
/// The parent is never modified. Every ref must resolve against the parent,
/// and a mutation that would introduce a frame cycle is rejected before the
/// child snapshot is created.
pub fn snapshot_commit(
    parent: &SceneSnapshot,
    mutation: &MutationSet,
    new_id: &str,
) -> Result<SceneSnapshot> {
    let mut next = parent.clone();
    next.snapshot_id = new_id.to_string();
    next.parent_snapshot = Some(parent.snapshot_id.clone());
    for op in &mutation.ops {
        apply_op(&mut next, op)?;
    }
    // Structural gate: no cycle may survive a commit.
    for id in next.frames.keys() {
        if matches!(next.world_pose(id), Err(Error::CyclicFrames(_))) {
            return Err(Error::InvariantBreakingStructure(format!(
                "frame cycle through {id}"
            )));
        }
    }
    Ok(next)
}

fn apply_op(next: &mut SceneSnapshot, op: &MutationOp) -> Result<()> {
    match op {
        MutationOp::SetFrameTranslation { frame_id, value } => {
            let frame = next
                .frames
                .get_mut(frame_id)
                .ok_or_else(|| Error::UnknownRef(frame_id.clone()))?;
            frame.translation = *value;
        }
        MutationOp::SetFrameTranslationComponent { frame_id, axis, value } => {
            let frame = next
                .frames
                .get_mut(frame_id)
                .ok_or_else(|| Error::UnknownRef(frame_id.clone()))?;
            frame.translation = frame.translation.with_component(*axis, *value);
        }
        MutationOp::SetFrameRotation { frame_id, value } => {
            if !value.is_unit() {
                return Err(Error::InvariantBreakingStructure(format!(
                    "non-unit rotation on {frame_id}"
                )));
            }
            let frame = next
                .frames
                .get_mut(frame_id)
                .ok_or_else(|| Error::UnknownRef(frame_id.clone()))?;
            frame.rotation = *value;
        }
        MutationOp::SetFrameParent { frame_id, parent } => {
            if let Some(p) = parent {
                if !next.frames.contains_key(p) {
                    return Err(Error::UnknownRef(p.clone()));
                }
            }
            let frame = next
                .frames
                .get_mut(frame_id)
                .ok_or_else(|| Error::UnknownRef(frame_id.clone()))?;
            frame.parent = parent.clone();
        }
        MutationOp::AddEntity { entity } => {
            entity.geometry.validate(&entity.entity_id)?;
            if !next.frames.contains_key(&entity.pose_frame) {
                return Err(Error::UnknownRef(entity.pose_frame.clone()));
            }
            next.entities.insert(entity.entity_id.clone(), entity.clone());
        }
        MutationOp::AddFrame { frame } => {
            if let Some(p) = &frame.parent {
                if !next.frames.contains_key(p) {
                    return Err(Error::UnknownRef(p.clone()));
                }
            }
            next.frames.insert(frame.frame_id.clone(), frame.clone());
        }
        MutationOp::AddAnchor { anchor } => {
            next.resolve_ref(&anchor.host)?;
            next.anchors.insert(anchor.anchor_id.clone(), anchor.clone());
        }
        MutationOp::AddAssertion { assertion } => {
            for s in &assertion.subjects {
                next.resolve_ref(s)?;
            }
            next.assertions
                .insert(assertion.assertion_id.clone(), assertion.clone());
        }
        MutationOp::AddEvidence { record } => {
            next.evidence.insert(record.evidence_id.clone(), record.clone());
        }
        MutationOp::AddCapabilityGap { gap } => {
            next.capability_gaps.insert(gap.gap_id.clone(), gap.clone());
        }
        MutationOp::SetAssertionStatus { assertion_id, status } => {
            let a = next
                .assertions
                .get_mut(assertion_id)
                .ok_or_else(|| Error::UnknownRef(assertion_id.clone()))?;
            a.status = *status;
        }
        MutationOp::RemoveEntity { entity_id } => {
            next.entities
                .remove(entity_id)
                .ok_or_else(|| Error::UnknownRef(entity_id.clone()))?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Scene file I/O
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SceneFile {
    format: String,
    snapshot: SceneSnapshot,
}

pub fn to_scene_string(snapshot: &SceneSnapshot) -> String {
    let file = SceneFile {
        format: SCENE_FORMAT.to_string(),
        snapshot: snapshot.clone(),
    };
    canonical::to_canonical_string(&file)
}

pub fn from_scene_str(text: &str) -> Result<SceneSnapshot> {
    let file: SceneFile = serde_json::from_str(text)?;
    if file.format != SCENE_FORMAT {
        return Err(Error::InvalidScene(format!(
            "unsupported scene format: {}",
            file.format
        )));
    }
    file.snapshot.validate()?;
    Ok(file.snapshot)
}

pub fn load_scene(path: &std::path::Path) -> Result<SceneSnapshot> {
    from_scene_str(&std::fs::read_to_string(path)?)
}

pub fn save_scene(snapshot: &SceneSnapshot, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, to_scene_string(snapshot))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn resolve_known_frame() {
        let scene = fixtures::canonical_scene(0.0, Axis::X);
        let resolved = scene.resolve_ref("frame.recv").unwrap();
        assert_eq!(resolved.type_tag(), "frame");
    }

    #[test]
    fn resolve_empty_id_fails() {
        let scene = fixtures::canonical_scene(0.0, Axis::X);
        assert!(matches!(scene.resolve_ref(""), Err(Error::UnknownRef(_))));
    }

    #[test]
    fn resolve_removed_entity_fails() {
        let scene = fixtures::canonical_scene(0.0, Axis::X);
        let next = snapshot_commit(
            &scene,
            &MutationSet::single(MutationOp::RemoveEntity { entity_id: "entity.tray".into() }),
            "snap-test",
        )
        .unwrap();
        assert!(matches!(next.resolve_ref("entity.tray"), Err(Error::UnknownRef(_))));
        // Parent still resolves it.
        assert!(scene.resolve_ref("entity.tray").is_ok());
    }

    #[test]
    fn world_pose_root_is_identity() {
        let scene = fixtures::canonical_scene(0.0, Axis::X);
        let pose = scene.world_pose("frame.world").unwrap();
        assert_eq!(pose.translation, Vec3::ZERO);
        assert_eq!(pose.rotation, Quat::IDENTITY);
    }

    #[test]
    fn world_pose_composes_chain() {
        let scene = fixtures::canonical_scene(0.03, Axis::X);
        let pose = scene.world_pose("frame.tray").unwrap();
        // recv perturbed by +0.03 in x; tray frame sits 0.02 above recv,
        // recv sits 0.12 above body.
        assert!((pose.translation.x - 0.03).abs() < 1e-12);
        assert!((pose.translation.y - 0.14).abs() < 1e-12);
    }

    #[test]
    fn clearance_invariant_on_separated_boxes() {
        let scene = fixtures::two_box_scene(0.005);
        let spec = InvariantSpec {
            invariant_id: "inv.clear".into(),
            predicate: PredicateKind::ClearanceMin,
            parameters: [("min".to_string(), 0.001)].into(),
            scope_refs: vec!["entity.a".into(), "entity.b".into()],
        };
        assert!(scene.check_invariant(&spec, None).unwrap().holds());
    }

    #[test]
    fn no_overlap_violated_for_coincident_boxes() {
        let scene = fixtures::two_box_scene(-0.1);
        let spec = InvariantSpec {
            invariant_id: "inv.overlap".into(),
            predicate: PredicateKind::NoOverlap,
            parameters: BTreeMap::new(),
            scope_refs: vec!["entity.a".into(), "entity.b".into()],
        };
        assert!(!scene.check_invariant(&spec, None).unwrap().holds());
    }

    #[test]
    fn attachment_preserved_after_translation_only_edit() {
        let scene = fixtures::canonical_scene(0.03, Axis::X);
        let next = snapshot_commit(
            &scene,
            &MutationSet::single(MutationOp::SetFrameTranslationComponent {
                frame_id: "frame.recv".into(),
                axis: Axis::X,
                value: 0.0,
            }),
            "snap-test",
        )
        .unwrap();
        let spec = InvariantSpec {
            invariant_id: "inv.attach".into(),
            predicate: PredicateKind::AttachmentPreserved,
            parameters: BTreeMap::new(),
            scope_refs: vec!["frame.tray".into(), "frame.recv".into()],
        };
        // Oracle: recompute parent links before/after; both are frame.recv.
        assert_eq!(
            scene.frames["frame.tray"].parent,
            next.frames["frame.tray"].parent
        );
        assert!(next.check_invariant(&spec, Some(&scene)).unwrap().holds());
    }

    #[test]
    fn empty_mutation_preserves_digest() {
        let scene = fixtures::canonical_scene(0.03, Axis::X);
        let next = snapshot_commit(&scene, &MutationSet::default(), "snap-child").unwrap();
        assert_eq!(scene.digest(), next.digest());
        assert_ne!(scene.snapshot_id, next.snapshot_id);
        assert_eq!(next.parent_snapshot.as_deref(), Some(scene.snapshot_id.as_str()));
    }

    #[test]
    fn commit_recenters_tray() {
        let scene = fixtures::canonical_scene(0.03, Axis::X);
        let next = snapshot_commit(
            &scene,
            &MutationSet::single(MutationOp::SetFrameTranslationComponent {
                frame_id: "frame.recv".into(),
                axis: Axis::X,
                value: 0.0,
            }),
            "snap-test",
        )
        .unwrap();
        let tray = next.entity_aabb("entity.tray").unwrap().center();
        let body = next.entity_aabb("entity.body").unwrap().center();
        assert!(tray.lateral_distance(body) < 1e-12);
        // Parent snapshot unchanged.
        let tray_before = scene.entity_aabb("entity.tray").unwrap().center();
        assert!((tray_before.x - 0.03).abs() < 1e-12);
    }

    #[test]
    fn reparent_to_descendant_rejected() {
        let scene = fixtures::canonical_scene(0.0, Axis::X);
        let err = snapshot_commit(
            &scene,
            &MutationSet::single(MutationOp::SetFrameParent {
                frame_id: "frame.recv".into(),
                parent: Some("frame.tray".into()),
            }),
            "snap-test",
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvariantBreakingStructure(_)));
    }

    #[test]
    fn scene_round_trip_is_byte_identical() {
        let scene = fixtures::canonical_scene(0.03, Axis::Z);
        let text = to_scene_string(&scene);
        let reloaded = from_scene_str(&text).unwrap();
        assert_eq!(to_scene_string(&reloaded), text);
    }

    #[test]
    fn loader_rejects_degenerate_geometry() {
        let mut scene = fixtures::canonical_scene(0.0, Axis::X);
        if let Geometry::Box { w, .. } = &mut scene.entities.get_mut("entity.tray").unwrap().geometry
        {
            *w = 0.0;
        }
        let text = to_scene_string(&scene);
        assert!(from_scene_str(&text).is_err());
    }

    #[test]
    fn snapshot_immutability_under_commit() {
        let scene = fixtures::canonical_scene(0.03, Axis::X);
        let digest_before = scene.digest();
        let pose_before = scene.world_pose("frame.recv").unwrap();
        let _child = snapshot_commit(
            &scene,
            &MutationSet::single(MutationOp::SetFrameTranslation {
                frame_id: "frame.recv".into(),
                value: Vec3::new(9.0, 9.0, 9.0),
            }),
            "snap-x",
        )
        .unwrap();
        assert_eq!(scene.digest(), digest_before);
        assert_eq!(scene.world_pose("frame.recv").unwrap(), pose_before);
    }
}
