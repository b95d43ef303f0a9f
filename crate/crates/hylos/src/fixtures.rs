//! Desk-scale fixture scenes shared by tests, examples, and the replay
//! harness.
//!
//! The canonical repair scene: a body with an opening anchor, a receiving
//! frame (`frame.recv`) that controls placement of a dependent tray, and the
//! assertions that make the dependency structure explicit. Perturbing
//! `frame.recv` laterally produces a visible symptom on the tray while the
//! supported repair lives upstream.

use std::collections::BTreeMap;

use crate::math::{Axis, Quat, Vec3};
use crate::scene::*;

/// Canonical body/opening/receiving-frame/tray scene, with the receiving
/// frame perturbed by `delta` meters along `axis`. `delta == 0.0` is the
/// aligned no-op control; no symptom assertion is present in that case.
pub fn canonical_scene(delta: f64, axis: Axis) -> SceneSnapshot {
    let mut scene = SceneSnapshot::empty("snap-canonical");

    let frame = |id: &str, parent: Option<&str>, t: Vec3, owner: Option<&str>, seq: u64| FrameNode {
        frame_id: id.to_string(),
        owner: owner.map(str::to_string),
        parent: parent.map(str::to_string),
        translation: t,
        rotation: Quat::IDENTITY,
        provenance: ProvenanceTag::new(Origin::Human, seq),
    };

    scene.frames.insert(
        "frame.world".into(),
        frame("frame.world", None, Vec3::ZERO, None, 1),
    );
    scene.frames.insert(
        "frame.body".into(),
        frame("frame.body", Some("frame.world"), Vec3::ZERO, Some("entity.body"), 2),
    );
    let recv_t = Vec3::new(0.0, 0.12, 0.0).with_component(axis, delta);
    scene.frames.insert(
        "frame.recv".into(),
        frame("frame.recv", Some("frame.body"), recv_t, None, 3),
    );
    scene.frames.insert(
        "frame.tray".into(),
        frame(
            "frame.tray",
            Some("frame.recv"),
            Vec3::new(0.0, 0.02, 0.0),
            Some("entity.tray"),
            4,
        ),
    );

    scene.entities.insert(
        "entity.body".into(),
        EntityNode {
            entity_id: "entity.body".into(),
            kind: EntityKind::Body,
            parent: None,
            pose_frame: "frame.body".into(),
            geometry: Geometry::Box { w: 0.4, h: 0.2, d: 0.3 },
            uncertainty: 0.0,
            provenance: ProvenanceTag::new(Origin::Human, 5),
        },
    );
    scene.entities.insert(
        "entity.tray".into(),
        EntityNode {
            entity_id: "entity.tray".into(),
            kind: EntityKind::Tray,
            parent: Some("entity.body".into()),
            pose_frame: "frame.tray".into(),
            geometry: Geometry::Box { w: 0.1, h: 0.02, d: 0.1 },
            uncertainty: 0.05,
            provenance: ProvenanceTag::new(Origin::Human, 6),
        },
    );

    scene.anchors.insert(
        "anchor.opening".into(),
        AnchorNode {
            anchor_id: "anchor.opening".into(),
            host: "entity.body".into(),
            local_offset: Vec3::new(0.05, 0.1, 0.0),
            kind: AnchorKind::Opening,
        },
    );

    scene.evidence.insert(
        "ev.attach".into(),
        EvidenceRecord {
            evidence_id: "ev.attach".into(),
            source_kind: EvidenceSourceKind::Measurement,
            payload: BTreeMap::new(),
            subject_refs: vec!["entity.tray".into(), "frame.recv".into()],
            confidence: 0.95,
            sequence: 1,
        },
    );
    scene.evidence.insert(
        "ev.align".into(),
        EvidenceRecord {
            evidence_id: "ev.align".into(),
            source_kind: EvidenceSourceKind::Measurement,
            payload: BTreeMap::new(),
            subject_refs: vec!["frame.recv".into(), "anchor.opening".into()],
            confidence: 0.9,
            sequence: 2,
        },
    );

    scene.assertions.insert(
        "assert.attach".into(),
        Assertion {
            assertion_id: "assert.attach".into(),
            kind: ClaimKind::Attachment,
            subjects: vec!["entity.tray".into(), "frame.recv".into()],
            parameters: BTreeMap::new(),
            status: AssertionStatus::Supported,
            evidence_refs: ["ev.attach".to_string()].into(),
        },
    );
    scene.assertions.insert(
        "assert.align".into(),
        Assertion {
            assertion_id: "assert.align".into(),
            kind: ClaimKind::Alignment,
            subjects: vec!["frame.recv".into(), "anchor.opening".into()],
            parameters: BTreeMap::new(),
            status: AssertionStatus::Supported,
            evidence_refs: ["ev.align".to_string()].into(),
        },
    );

    if delta != 0.0 {
        // Visible symptom: the tray looks laterally wrong relative to the
        // body. The apparent offset is observable, so it is scene data.
        scene.evidence.insert(
            "ev.symptom".into(),
            EvidenceRecord {
                evidence_id: "ev.symptom".into(),
                source_kind: EvidenceSourceKind::UserDeclaration,
                payload: [("observed-offset".to_string(), delta)].into(),
                subject_refs: vec!["entity.tray".into(), "entity.body".into()],
                confidence: 0.8,
                sequence: 3,
            },
        );
        scene.assertions.insert(
            "assert.symptom".into(),
            Assertion {
                assertion_id: "assert.symptom".into(),
                kind: ClaimKind::Alignment,
                subjects: vec!["entity.tray".into(), "entity.body".into()],
                parameters: [
                    ("observed-offset".to_string(), delta),
                    ("axis".to_string(), axis_index(axis)),
                ]
                .into(),
                status: AssertionStatus::Unresolved,
                evidence_refs: ["ev.symptom".to_string()].into(),
            },
        );
    }

    scene.protected_invariants.insert(
        "inv.attachment".into(),
        InvariantSpec {
            invariant_id: "inv.attachment".into(),
            predicate: PredicateKind::AttachmentPreserved,
            parameters: BTreeMap::new(),
            scope_refs: vec!["frame.tray".into(), "frame.recv".into()],
        },
    );
    scene.protected_invariants.insert(
        "inv.no-overlap".into(),
        InvariantSpec {
            invariant_id: "inv.no-overlap".into(),
            predicate: PredicateKind::NoOverlap,
            parameters: BTreeMap::new(),
            scope_refs: vec!["entity.tray".into(), "entity.body".into()],
        },
    );

    scene.validate().expect("canonical fixture is valid");
    scene
}

pub fn axis_index(axis: Axis) -> f64 {
    match axis {
        Axis::X => 0.0,
        Axis::Y => 1.0,
        Axis::Z => 2.0,
    }
}

pub fn axis_from_index(idx: f64) -> Axis {
    if idx == 0.0 {
        Axis::X
    } else if idx == 1.0 {
        Axis::Y
    } else {
        Axis::Z
    }
}

/// Two unit-free 0.1 m cubes along x with the given face gap (negative gap
/// means overlap; `-0.1` makes them coincident).
pub fn two_box_scene(gap: f64) -> SceneSnapshot {
    let mut scene = SceneSnapshot::empty("snap-two-box");
    let frame = |id: &str, t: Vec3, seq: u64| FrameNode {
        frame_id: id.to_string(),
        owner: None,
        parent: None,
        translation: t,
        rotation: Quat::IDENTITY,
        provenance: ProvenanceTag::new(Origin::Human, seq),
    };
    scene
        .frames
        .insert("frame.a".into(), frame("frame.a", Vec3::ZERO, 1));
    scene.frames.insert(
        "frame.b".into(),
        frame("frame.b", Vec3::new(0.1 + gap, 0.0, 0.0), 2),
    );
    for (id, f) in [("entity.a", "frame.a"), ("entity.b", "frame.b")] {
        scene.entities.insert(
            id.into(),
            EntityNode {
                entity_id: id.into(),
                kind: EntityKind::Body,
                parent: None,
                pose_frame: f.into(),
                geometry: Geometry::Box { w: 0.1, h: 0.1, d: 0.1 },
                uncertainty: 0.0,
                provenance: ProvenanceTag::new(Origin::Human, 3),
            },
        );
    }
    scene.validate().expect("two-box fixture is valid");
    scene
}
