//! Derived causal views over snapshots: symptom-to-driver tracing,
//! candidate physical interpretations, the reusable geometric-alternatives
//! library, scripted baseline policies, and bounded diagnostic acquisition.
//!
//! Views are pure projections of a snapshot; rebuilding one from the same
//! snapshot is idempotent.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::actuators::{derive_admissible, ActuatorRegistry};
use crate::error::{Error, Result};
use crate::fixtures;
use crate::math::Axis;
use crate::scene::{
    Assertion, AssertionStatus, ClaimKind, EvidenceRecord, EvidenceSourceKind, Resolved,
    SceneSnapshot,
};

pub const POLICY_FORMAT: &str = "hylos-policy/1";

// ---------------------------------------------------------------------------
// Causal view
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependencyEdge {
    pub driver: String,
    pub dependent: String,
    pub via: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalView {
    pub view_id: String,
    /// Refs that may change via admissible actuators.
    pub variables: BTreeSet<String>,
    pub edges: Vec<DependencyEdge>,
    pub unresolved: BTreeSet<String>,
}

/// Builds the causal view: a pure projection of the snapshot.
pub fn build_view(snapshot: &SceneSnapshot, registry: &ActuatorRegistry) -> CausalView {
    let mut variables = BTreeSet::new();
    for binding in derive_admissible(snapshot, registry) {
        for (_, id) in binding.binding {
            variables.insert(id);
        }
    }
    let mut edges = Vec::new();
    for assertion in snapshot.assertions.values() {
        if assertion.status != AssertionStatus::Supported {
            continue;
        }
        if let Some(edge) = edge_from_assertion(snapshot, assertion) {
            edges.push(edge);
        }
    }
    edges.sort_by(|a, b| (&a.via, &a.driver).cmp(&(&b.via, &b.driver)));
    let unresolved = snapshot
        .assertions
        .values()
        .filter(|a| a.status == AssertionStatus::Unresolved)
        .map(|a| a.assertion_id.clone())
        .collect();
    CausalView {
        view_id: format!("view.{}", snapshot.snapshot_id),
        variables,
        edges,
        unresolved,
    }
}

fn edge_from_assertion(snapshot: &SceneSnapshot, assertion: &Assertion) -> Option<DependencyEdge> {
    let (dependent, reference) = (assertion.subjects.first()?, assertion.subjects.get(1)?);
    let driver = match assertion.kind {
        // The dependent element is placed through the referenced frame.
        ClaimKind::Attachment => reference.clone(),
        // Alignment/support relations are driven by the reference side's frame.
        ClaimKind::Alignment | ClaimKind::Support => frame_of(snapshot, reference)?,
        _ => return None,
    };
    Some(DependencyEdge {
        driver,
        dependent: dependent.clone(),
        via: assertion.assertion_id.clone(),
    })
}

fn frame_of(snapshot: &SceneSnapshot, id: &str) -> Option<String> {
    match snapshot.resolve_ref(id).ok()? {
        Resolved::Frame(f) => Some(f.frame_id.clone()),
        Resolved::Entity(e) => Some(e.pose_frame.clone()),
        Resolved::Anchor(a) => frame_of(snapshot, &a.host.clone()),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpstreamDriver {
    pub driver: String,
    /// Dependency-edge assertion ids from the symptom subject up to the
    /// driver; empty for the trivial (path length 0) driver.
    pub path: Vec<String>,
}

/// Traces a symptom assertion upstream through dependency edges. Drivers are
/// ordered by path length ascending then id; the symptom's own subject is the
/// trivial driver.
pub fn trace_upstream(
    snapshot: &SceneSnapshot,
    view: &CausalView,
    symptom: &str,
) -> Result<Vec<UpstreamDriver>> {
    let assertion = snapshot
        .assertions
        .get(symptom)
        .ok_or_else(|| Error::UnknownRef(symptom.to_string()))?;
    let subject = assertion
        .subjects
        .first()
        .ok_or_else(|| Error::UnknownRef(format!("{symptom} has no subject")))?;

    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::new();
    queue.push_back((subject.clone(), Vec::new()));
    seen.insert(subject.clone());
    while let Some((node, path)) = queue.pop_front() {
        out.push(UpstreamDriver { driver: node.clone(), path: path.clone() });
        let mut nexts: Vec<&DependencyEdge> = view
            .edges
            .iter()
            .filter(|e| e.dependent == node || Some(&e.dependent) == frame_of(snapshot, &node).as_ref())
            .collect();
        nexts.sort_by_key(|e| &e.driver);
        for edge in nexts {
            if seen.insert(edge.driver.clone()) {
                let mut p = path.clone();
                p.push(edge.via.clone());
                queue.push_back((edge.driver.clone(), p));
            }
        }
    }
    out.sort_by(|a, b| (a.path.len(), &a.driver).cmp(&(b.path.len(), &b.driver)));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Geometric alternatives
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlternativeKind {
    AlignToReferenceAnchor,
    CenterOnParentBody,
}

/// A reusable, evidence-checkable value function over snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometricAlternative {
    pub alternative_id: String,
    pub kind: AlternativeKind,
    pub target_frame: String,
    pub axis: Axis,
    pub anchor: Option<String>,
    /// Root of the dependent subtree that should be centered.
    pub dependent: Option<String>,
    pub reference_body: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AltOutcome {
    Supported(f64),
    Unsupported(String),
}

impl AltOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            AltOutcome::Supported(v) => Some(*v),
            AltOutcome::Unsupported(_) => None,
        }
    }
}

/// Evaluates the alternative's target value for `target`, a frame ref.
pub fn evaluate_alternative(
    snapshot: &SceneSnapshot,
    alt: &GeometricAlternative,
    target: &str,
) -> Result<AltOutcome> {
    let frame = snapshot
        .frames
        .get(target)
        .ok_or_else(|| Error::UnknownRef(target.to_string()))?;
    if alt.target_frame != target {
        return Ok(AltOutcome::Unsupported(format!(
            "alternative {} targets {}",
            alt.alternative_id, alt.target_frame
        )));
    }
    let current = frame.translation.component(alt.axis);
    match alt.kind {
        AlternativeKind::CenterOnParentBody => {
            let (dep, body) = match (&alt.dependent, &alt.reference_body) {
                (Some(d), Some(b)) => (d, b),
                _ => return Ok(AltOutcome::Unsupported("missing inputs".into())),
            };
            let dep_center = match snapshot.entity_aabb(dep) {
                Ok(bb) => bb.center(),
                Err(_) => return Ok(AltOutcome::Unsupported(format!("{dep} not in scene"))),
            };
            let body_center = match snapshot.entity_aabb(body) {
                Ok(bb) => bb.center(),
                Err(_) => return Ok(AltOutcome::Unsupported(format!("{body} not in scene"))),
            };
            // The dependent subtree translates 1:1 with the target frame
            // coordinate; shift so the centers coincide along the axis.
            let value =
                current - (dep_center.component(alt.axis) - body_center.component(alt.axis));
            Ok(AltOutcome::Supported(value))
        }
        AlternativeKind::AlignToReferenceAnchor => {
            let anchor = match &alt.anchor {
                Some(a) => a,
                None => return Ok(AltOutcome::Unsupported("missing anchor input".into())),
            };
            let anchor_world = match snapshot.anchor_world(anchor) {
                Ok(p) => p,
                Err(_) => return Ok(AltOutcome::Unsupported(format!("{anchor} not in scene"))),
            };
            let frame_world = snapshot.world_pose(target)?.translation;
            let value =
                current + (anchor_world.component(alt.axis) - frame_world.component(alt.axis));
            Ok(AltOutcome::Supported(value))
        }
    }
}

// ---------------------------------------------------------------------------
// Candidates and policies
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateInterpretation {
    pub candidate_id: String,
    pub implicated: Vec<String>,
    /// The frame whose value the interaction would change.
    pub target_variable: String,
    pub actuator_id: String,
    pub alternative: Option<String>,
    pub supporting_evidence: BTreeSet<String>,
    pub risk_notes: String,
    pub score: f64,
    pub review_triggers: Vec<String>,
    pub upstream_depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub instruction: String,
    pub hint: Option<String>,
    /// Symptom assertion id, when one is visible.
    pub symptom: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "decision")]
pub enum Decision {
    Select { candidate: String },
    Defer { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankOutcome {
    pub candidates: Vec<CandidateInterpretation>,
    pub decision: Decision,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicyKind {
    DirectEdit,
    PromptHeuristic,
    StructureOnly,
    ContractBounded,
    ContractAcquisition,
    ContractAlternatives,
    External(String),
}

impl PolicyKind {
    pub fn parse(id: &str) -> Result<PolicyKind> {
        Ok(match id {
            "direct-edit" => PolicyKind::DirectEdit,
            "prompt-heuristic" => PolicyKind::PromptHeuristic,
            "structure-only" => PolicyKind::StructureOnly,
            "contract-bounded" => PolicyKind::ContractBounded,
            "contract-acquisition" => PolicyKind::ContractAcquisition,
            "contract-alternatives" => PolicyKind::ContractAlternatives,
            other => {
                if let Some(cmd) = other.strip_prefix("external:") {
                    PolicyKind::External(cmd.to_string())
                } else {
                    return Err(Error::UnknownPolicy(other.to_string()));
                }
            }
        })
    }

    pub fn id(&self) -> String {
        match self {
            PolicyKind::DirectEdit => "direct-edit".into(),
            PolicyKind::PromptHeuristic => "prompt-heuristic".into(),
            PolicyKind::StructureOnly => "structure-only".into(),
            PolicyKind::ContractBounded => "contract-bounded".into(),
            PolicyKind::ContractAcquisition => "contract-acquisition".into(),
            PolicyKind::ContractAlternatives => "contract-alternatives".into(),
            PolicyKind::External(cmd) => format!("external:{cmd}"),
        }
    }

    pub fn wants_acquisition(&self) -> bool {
        matches!(self, PolicyKind::ContractAcquisition)
    }

    pub fn uses_alternatives(&self) -> bool {
        matches!(self, PolicyKind::ContractAlternatives)
    }

    /// Contract-bounded policies route only gated, evidence-backed edits.
    pub fn contract_bounded(&self) -> bool {
        matches!(
            self,
            PolicyKind::ContractBounded
                | PolicyKind::ContractAcquisition
                | PolicyKind::ContractAlternatives
        )
    }
}

/// Generates candidate interpretations for a symptom: one per upstream
/// driver that maps onto an admissible actuator target.
pub fn generate_candidates(
    snapshot: &SceneSnapshot,
    view: &CausalView,
    symptom: &str,
    registry: &ActuatorRegistry,
    alternatives: &BTreeMap<String, GeometricAlternative>,
    use_alternatives: bool,
) -> Result<Vec<CandidateInterpretation>> {
    let drivers = trace_upstream(snapshot, view, symptom)?;
    let symptom_subjects: BTreeSet<String> = snapshot
        .assertions
        .get(symptom)
        .map(|a| a.subjects.iter().cloned().collect())
        .unwrap_or_default();
    let mut out = Vec::new();
    for (i, driver) in drivers.iter().enumerate() {
        let (actuator_id, target_frame) = match snapshot.resolve_ref(&driver.driver)? {
            Resolved::Entity(e) => ("move_entity".to_string(), e.pose_frame.clone()),
            Resolved::Frame(f) => ("set_frame_offset".to_string(), f.frame_id.clone()),
            _ => continue,
        };
        if !view.variables.contains(&driver.driver) && !view.variables.contains(&target_frame) {
            continue;
        }
        let supporting_evidence: BTreeSet<String> = snapshot
            .evidence
            .values()
            .filter(|e| {
                e.subject_refs.iter().any(|r| {
                    r == &driver.driver
                        || r == &target_frame
                        || symptom_subjects.contains(r)
                })
            })
            .map(|e| e.evidence_id.clone())
            .collect();
        let alternative = if use_alternatives {
            alternatives
                .values()
                .filter(|alt| alt.target_frame == target_frame)
                .map(|alt| alt.alternative_id.clone())
                .next()
        } else {
            None
        };
        out.push(CandidateInterpretation {
            candidate_id: format!("cand.{i}.{}", driver.driver),
            implicated: vec![driver.driver.clone()],
            target_variable: target_frame,
            actuator_id,
            alternative,
            supporting_evidence,
            risk_notes: if driver.path.is_empty() {
                "edits the visible symptom directly".into()
            } else {
                "edits an upstream placement driver".into()
            },
            score: 0.0,
            review_triggers: Vec::new(),
            upstream_depth: driver.path.len(),
        });
    }
    let _ = registry; // admissibility enters via view.variables
    Ok(out)
}

/// Scores and ranks candidates under a scripted policy, returning the
/// ordered candidates and a select/defer decision.
///
/// Contract scoring: evidence support (0.6) + upstream-depth bonus (0.3) +
/// supported-alternative bonus (0.1); ties break by candidate id. The defer
/// rule is structural: defer when the top candidate lacks supporting
/// evidence or its alternative is missing or unsupported.
pub fn rank_candidates(
    snapshot: &SceneSnapshot,
    view: &CausalView,
    task: &TaskRecord,
    policy: &PolicyKind,
    registry: &ActuatorRegistry,
    alternatives: &BTreeMap<String, GeometricAlternative>,
) -> Result<RankOutcome> {
    let symptom = match &task.symptom {
        Some(s) => s.clone(),
        None => {
            return Ok(RankOutcome {
                candidates: Vec::new(),
                decision: Decision::Defer { reason: "no visible symptom".into() },
            })
        }
    };
    let mut candidates = generate_candidates(
        snapshot,
        view,
        &symptom,
        registry,
        alternatives,
        policy.uses_alternatives(),
    )?;
    for cand in &mut candidates {
        cand.score = match policy {
            PolicyKind::DirectEdit => {
                if cand.upstream_depth == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            PolicyKind::PromptHeuristic => {
                let hinted = task
                    .hint
                    .as_deref()
                    .map(|h| cand.implicated.iter().any(|i| h.contains(short_name(i))))
                    .unwrap_or(false);
                if hinted {
                    1.0
                } else {
                    0.0
                }
            }
            PolicyKind::StructureOnly => {
                // Sees structure, ignores support: upstream depth only.
                if cand.upstream_depth >= 1 {
                    0.5
                } else {
                    0.2
                }
            }
            _ => {
                let evidence = if cand.supporting_evidence.is_empty() { 0.0 } else { 0.6 };
                let depth = if cand.upstream_depth >= 1 { 0.3 } else { 0.0 };
                let alt = cand
                    .alternative
                    .as_ref()
                    .and_then(|id| alternatives.get(id))
                    .map(|alt| {
                        matches!(
                            evaluate_alternative(snapshot, alt, &cand.target_variable),
                            Ok(AltOutcome::Supported(_))
                        )
                    })
                    .unwrap_or(false);
                evidence + depth + if alt { 0.1 } else { 0.0 }
            }
        };
        if cand.supporting_evidence.is_empty() {
            cand.review_triggers.push("no supporting evidence".into());
        }
        if cand.alternative.is_none() {
            cand.review_triggers.push("no geometric alternative".into());
        }
    }
    candidates.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.candidate_id.cmp(&b.candidate_id))
    });

    if let PolicyKind::External(cmd) = policy {
        let request = PolicyRequest::build(snapshot, view, task, &candidates);
        return Ok(RankOutcome {
            decision: run_external_policy(cmd, &request)?,
            candidates,
        });
    }

    let decision = match candidates.first() {
        None => Decision::Defer { reason: "no candidate interpretation".into() },
        Some(top) => {
            if policy.contract_bounded() {
                let alt_supported = top
                    .alternative
                    .as_ref()
                    .and_then(|id| alternatives.get(id))
                    .map(|alt| {
                        matches!(
                            evaluate_alternative(snapshot, alt, &top.target_variable),
                            Ok(AltOutcome::Supported(_))
                        )
                    })
                    .unwrap_or(false);
                if top.supporting_evidence.is_empty() {
                    Decision::Defer { reason: "top candidate lacks supporting evidence".into() }
                } else if !alt_supported {
                    Decision::Defer {
                        reason: "no supported geometric alternative for top candidate".into(),
                    }
                } else {
                    Decision::Select { candidate: top.candidate_id.clone() }
                }
            } else if top.score <= 0.0 {
                Decision::Defer { reason: "no candidate matched the policy heuristic".into() }
            } else {
                Decision::Select { candidate: top.candidate_id.clone() }
            }
        }
    };
    Ok(RankOutcome { candidates, decision })
}

fn short_name(id: &str) -> &str {
    id.rsplit('.').next().unwrap_or(id)
}

// ---------------------------------------------------------------------------
// Diagnostic acquisition
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub probe_id: String,
    /// Measured quantity, currently lateral offsets only.
    pub subjects: (String, String),
    pub axis: Axis,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSource {
    pub source_id: String,
    pub noise_sigma: f64,
}

/// Reads a diagnostic observation from the scene's ground-truth poses plus
/// seeded Gaussian noise. Returns evidence records only; geometry and
/// assertions stay untouched (the caller appends them through a
/// presentation-level transaction).
pub fn acquire_diagnostic(
    snapshot: &SceneSnapshot,
    probe: &ProbeSpec,
    sources: &BTreeMap<String, ObservationSource>,
    seed: u64,
) -> Result<Vec<EvidenceRecord>> {
    let source = sources
        .get(&probe.source)
        .ok_or_else(|| Error::MissingSource(probe.probe_id.clone()))?;
    let a = snapshot.entity_aabb(&probe.subjects.0)?.center();
    let b = snapshot.entity_aabb(&probe.subjects.1)?.center();
    let mut offset = a.component(probe.axis) - b.component(probe.axis);
    if source.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Box-Muller; one sample per probe keeps acquisition deterministic.
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        let gauss = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        offset += source.noise_sigma * gauss;
    }
    Ok(vec![EvidenceRecord {
        evidence_id: format!("ev.diag.{}", probe.probe_id),
        source_kind: EvidenceSourceKind::Diagnostic,
        payload: [
            ("observed-offset".to_string(), offset),
            ("axis".to_string(), fixtures::axis_index(probe.axis)),
        ]
        .into(),
        subject_refs: vec![probe.subjects.0.clone(), probe.subjects.1.clone()],
        confidence: 0.99,
        sequence: snapshot.next_evidence_sequence(),
    }])
}

// ---------------------------------------------------------------------------
// External policy protocol (hylos-policy/1)
// ---------------------------------------------------------------------------

/// The policy-visible exposure record. By construction it carries exposed
/// facts, legal targets, and candidates only; scenario ground truth never
/// enters this structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRequest {
    pub format: String,
    pub instruction: String,
    pub hint: Option<String>,
    pub facts: Vec<String>,
    pub legal_targets: Vec<String>,
    pub candidates: Vec<CandidateInterpretation>,
}

impl PolicyRequest {
    pub fn build(
        snapshot: &SceneSnapshot,
        view: &CausalView,
        task: &TaskRecord,
        candidates: &[CandidateInterpretation],
    ) -> PolicyRequest {
        let mut facts: Vec<String> = snapshot
            .assertions
            .values()
            .map(|a| {
                format!(
                    "{}: {:?} {:?} {:?}",
                    a.assertion_id, a.kind, a.subjects, a.status
                )
            })
            .collect();
        facts.sort();
        PolicyRequest {
            format: POLICY_FORMAT.to_string(),
            instruction: task.instruction.clone(),
            hint: task.hint.clone(),
            facts,
            legal_targets: view.variables.iter().cloned().collect(),
            candidates: candidates.to_vec(),
        }
    }
}

/// Runs one synchronous request/response exchange with an external policy
/// command over newline-delimited records.
pub fn run_external_policy(command: &str, request: &PolicyRequest) -> Result<Decision> {
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(command)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()?;
    {
        let stdin = child.stdin.as_mut().expect("piped stdin");
        let line = crate::canonical::to_canonical_string(request);
        stdin.write_all(line.as_bytes())?;
        stdin.write_all(b"\n")?;
    }
    let stdout = child.stdout.take().expect("piped stdout");
    let mut line = String::new();
    BufReader::new(stdout).read_line(&mut line)?;
    child.wait()?;
    let decision: Decision = serde_json::from_str(line.trim()).map_err(|e| {
        Error::UnknownPolicy(format!("external policy response unparseable: {e}"))
    })?;
    Ok(decision)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actuators::default_registry;
    use crate::fixtures::canonical_scene;

    fn alternatives() -> BTreeMap<String, GeometricAlternative> {
        let mut m = BTreeMap::new();
        m.insert(
            "alt.center".to_string(),
            GeometricAlternative {
                alternative_id: "alt.center".into(),
                kind: AlternativeKind::CenterOnParentBody,
                target_frame: "frame.recv".into(),
                axis: Axis::X,
                anchor: None,
                dependent: Some("entity.tray".into()),
                reference_body: Some("entity.body".into()),
            },
        );
        m
    }

    fn task() -> TaskRecord {
        TaskRecord {
            instruction: "The receiving assembly looks laterally wrong relative to the body. \
                          Fix the physical placement."
                .into(),
            hint: None,
            symptom: Some("assert.symptom".into()),
        }
    }

    #[test]
    fn view_is_idempotent() {
        let scene = canonical_scene(0.03, Axis::X);
        let registry = default_registry();
        assert_eq!(build_view(&scene, &registry), build_view(&scene, &registry));
    }

    #[test]
    fn trace_finds_three_level_chain() {
        let scene = canonical_scene(0.03, Axis::X);
        let registry = default_registry();
        let view = build_view(&scene, &registry);
        let drivers = trace_upstream(&scene, &view, "assert.symptom").unwrap();
        let ids: Vec<&str> = drivers.iter().map(|d| d.driver.as_str()).collect();
        assert_eq!(ids, vec!["entity.tray", "frame.recv", "frame.body"]);
        assert_eq!(drivers[0].path.len(), 0);
        assert_eq!(drivers[1].path.len(), 1);
        assert_eq!(drivers[2].path.len(), 2);
    }

    #[test]
    fn trace_without_edges_yields_subject_only() {
        let scene = canonical_scene(0.03, Axis::X);
        let registry = default_registry();
        let mut view = build_view(&scene, &registry);
        view.edges.clear();
        let drivers = trace_upstream(&scene, &view, "assert.symptom").unwrap();
        assert_eq!(drivers.len(), 1);
        assert_eq!(drivers[0].driver, "entity.tray");
    }

    #[test]
    fn center_on_parent_value() {
        let scene = canonical_scene(0.03, Axis::X);
        let alts = alternatives();
        let out = evaluate_alternative(&scene, &alts["alt.center"], "frame.recv").unwrap();
        // Closed form from the fixture: body centered at 0, tray shifted by
        // +0.03 through the recv frame, so the centering value is 0.
        match out {
            AltOutcome::Supported(v) => assert!(v.abs() < 1e-12),
            AltOutcome::Unsupported(r) => panic!("unsupported: {r}"),
        }
    }

    #[test]
    fn align_to_anchor_value() {
        let scene = canonical_scene(0.03, Axis::X);
        let alt = GeometricAlternative {
            alternative_id: "alt.align".into(),
            kind: AlternativeKind::AlignToReferenceAnchor,
            target_frame: "frame.recv".into(),
            axis: Axis::X,
            anchor: Some("anchor.opening".into()),
            dependent: None,
            reference_body: None,
        };
        match evaluate_alternative(&scene, &alt, "frame.recv").unwrap() {
            AltOutcome::Supported(v) => assert!((v - 0.05).abs() < 1e-12),
            AltOutcome::Unsupported(r) => panic!("unsupported: {r}"),
        }
    }

    #[test]
    fn center_on_parent_unsupported_without_body() {
        let mut scene = canonical_scene(0.03, Axis::X);
        scene.entities.remove("entity.body");
        scene.assertions.clear();
        scene.anchors.clear();
        let alts = alternatives();
        let out = evaluate_alternative(&scene, &alts["alt.center"], "frame.recv").unwrap();
        assert!(matches!(out, AltOutcome::Unsupported(_)));
    }

    #[test]
    fn contract_policy_selects_upstream_frame() {
        let scene = canonical_scene(0.03, Axis::X);
        let registry = default_registry();
        let view = build_view(&scene, &registry);
        let outcome = rank_candidates(
            &scene,
            &view,
            &task(),
            &PolicyKind::ContractAlternatives,
            &registry,
            &alternatives(),
        )
        .unwrap();
        match &outcome.decision {
            Decision::Select { candidate } => {
                let cand = outcome
                    .candidates
                    .iter()
                    .find(|c| &c.candidate_id == candidate)
                    .unwrap();
                assert_eq!(cand.target_variable, "frame.recv");
                assert!(cand.upstream_depth >= 1);
            }
            Decision::Defer { reason } => panic!("unexpected defer: {reason}"),
        }
    }

    #[test]
    fn contract_policy_defers_without_alternatives() {
        let scene = canonical_scene(0.03, Axis::X);
        let registry = default_registry();
        let view = build_view(&scene, &registry);
        let outcome = rank_candidates(
            &scene,
            &view,
            &task(),
            &PolicyKind::ContractAlternatives,
            &registry,
            &BTreeMap::new(),
        )
        .unwrap();
        assert!(matches!(outcome.decision, Decision::Defer { .. }));
    }

    #[test]
    fn direct_edit_policy_targets_symptom() {
        let scene = canonical_scene(0.03, Axis::X);
        let registry = default_registry();
        let view = build_view(&scene, &registry);
        let outcome = rank_candidates(
            &scene,
            &view,
            &task(),
            &PolicyKind::DirectEdit,
            &registry,
            &alternatives(),
        )
        .unwrap();
        match &outcome.decision {
            Decision::Select { candidate } => {
                let cand = outcome
                    .candidates
                    .iter()
                    .find(|c| &c.candidate_id == candidate)
                    .unwrap();
                assert_eq!(cand.upstream_depth, 0);
                assert_eq!(cand.implicated, vec!["entity.tray".to_string()]);
            }
            Decision::Defer { reason } => panic!("unexpected defer: {reason}"),
        }
    }

    #[test]
    fn policy_determinism() {
        let scene = canonical_scene(0.03, Axis::X);
        let registry = default_registry();
        let view = build_view(&scene, &registry);
        let a = rank_candidates(
            &scene, &view, &task(), &PolicyKind::ContractAlternatives, &registry, &alternatives(),
        )
        .unwrap();
        let b = rank_candidates(
            &scene, &view, &task(), &PolicyKind::ContractAlternatives, &registry, &alternatives(),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn diagnostic_probe_reads_ground_truth() {
        let scene = canonical_scene(0.03, Axis::X);
        let probe = ProbeSpec {
            probe_id: "probe.lat".into(),
            subjects: ("entity.tray".into(), "entity.body".into()),
            axis: Axis::X,
            source: "src.camera".into(),
        };
        let sources = [(
            "src.camera".to_string(),
            ObservationSource { source_id: "src.camera".into(), noise_sigma: 0.0 },
        )]
        .into();
        let records = acquire_diagnostic(&scene, &probe, &sources, 7).unwrap();
        assert_eq!(records.len(), 1);
        assert!((records[0].payload["observed-offset"] - 0.03).abs() < 1e-12);

        let aligned = canonical_scene(0.0, Axis::X);
        let records = acquire_diagnostic(&aligned, &probe, &sources, 7).unwrap();
        assert!(records[0].payload["observed-offset"].abs() < 1e-12);
    }

    #[test]
    fn probe_without_source_is_missing_source() {
        let scene = canonical_scene(0.03, Axis::X);
        let probe = ProbeSpec {
            probe_id: "probe.lat".into(),
            subjects: ("entity.tray".into(), "entity.body".into()),
            axis: Axis::X,
            source: "src.missing".into(),
        };
        assert!(matches!(
            acquire_diagnostic(&scene, &probe, &BTreeMap::new(), 0),
            Err(Error::MissingSource(_))
        ));
    }

    #[test]
    fn acquisition_leaves_scene_content_unchanged() {
        let scene = canonical_scene(0.03, Axis::X);
        let before = scene.digest_excluding_evidence();
        let probe = ProbeSpec {
            probe_id: "probe.lat".into(),
            subjects: ("entity.tray".into(), "entity.body".into()),
            axis: Axis::X,
            source: "src.camera".into(),
        };
        let sources = [(
            "src.camera".to_string(),
            ObservationSource { source_id: "src.camera".into(), noise_sigma: 0.0 },
        )]
        .into();
        let _ = acquire_diagnostic(&scene, &probe, &sources, 0).unwrap();
        assert_eq!(scene.digest_excluding_evidence(), before);
    }

    #[test]
    fn external_policy_round_trip() {
        let scene = canonical_scene(0.03, Axis::X);
        let registry = default_registry();
        let view = build_view(&scene, &registry);
        let request = PolicyRequest::build(&scene, &view, &task(), &[]);
        let decision = run_external_policy(
            r#"read _line; echo '{"decision":"defer","reason":"scripted"}'"#,
            &request,
        )
        .unwrap();
        assert_eq!(decision, Decision::Defer { reason: "scripted".into() });
    }
}
