//! Blind forward-replay benchmark harness: scenario family generation,
//! replay under the six policy conditions, the evaluation-criteria
//! checklist, and the metric suite (CRA, DP, effect precision/recall, TCS,
//! consistency and handle-preservation summaries).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::actuators::{ActuatorInvocation, ArgValue};
use crate::artifact::{self, fixture_artifact, fixture_decoder, Handle};
use crate::canonical;
use crate::causal::{
    acquire_diagnostic, build_view, evaluate_alternative, rank_candidates, AltOutcome,
    AlternativeKind, CandidateInterpretation, Decision, GeometricAlternative, ObservationSource,
    PolicyKind, ProbeSpec, TaskRecord,
};
use crate::effects::{EffectDiff, ToleranceTable};
use crate::error::{Error, Result};
use crate::fixtures::canonical_scene;
use crate::math::Axis;
use crate::scene::{MutationOp, MutationSet, Origin, SceneSnapshot};
use crate::txn::{CommitLogEntry, OutcomeKind, TxnKernel};

pub const CONFIG_FORMAT: &str = "hylos-config/1";

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HylosConfig {
    pub tau_length: f64,
    pub tau_angle: f64,
    pub seed: u64,
    /// Diagnostic observation noise; zero keeps acquisition exact.
    pub noise_sigma: f64,
    pub backtrack_depth: usize,
    pub max_sequence_len: usize,
}

impl Default for HylosConfig {
    fn default() -> Self {
        HylosConfig {
            tau_length: crate::effects::DEFAULT_TAU_LENGTH,
            tau_angle: crate::effects::DEFAULT_TAU_ANGLE,
            seed: 7,
            noise_sigma: 0.0,
            backtrack_depth: crate::guardrail::DEFAULT_BACKTRACK_DEPTH,
            max_sequence_len: crate::guardrail::MAX_SEQUENCE_LEN,
        }
    }
}

impl HylosConfig {
    pub fn tolerances(&self) -> ToleranceTable {
        ToleranceTable { tau_length: self.tau_length, tau_angle: self.tau_angle }
    }
}

pub fn to_config_string(config: &HylosConfig) -> String {
    #[derive(Serialize)]
    struct File<'a> {
        format: &'a str,
        config: &'a HylosConfig,
    }
    canonical::to_canonical_string(&File { format: CONFIG_FORMAT, config })
}

pub fn from_config_str(text: &str) -> Result<HylosConfig> {
    #[derive(Deserialize)]
    struct File {
        format: String,
        config: HylosConfig,
    }
    let file: File = serde_json::from_str(text)?;
    if file.format != CONFIG_FORMAT {
        return Err(Error::SchemaMismatch(format!(
            "unsupported config format: {}",
            file.format
        )));
    }
    Ok(file.config)
}

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub scenario_id: String,
    /// Lateral perturbation applied to frame.recv, in meters.
    pub delta: f64,
    pub axis: Axis,
    pub alternatives_present: bool,
    pub probe_available: bool,
    pub instruction: String,
    pub hint: Option<String>,
    /// Ground truth for scoring only: (actuator id, target frame). Never
    /// serialized into a policy request.
    pub expected_actuator: Option<(String, String)>,
    /// u_i: no supported alternative exists, so the correct action is to
    /// defer.
    pub under_supported: bool,
}

impl Scenario {
    pub fn scene(&self) -> SceneSnapshot {
        canonical_scene(self.delta, self.axis)
    }
}

/// The deterministic scenario family: the canonical scene across δ values,
/// both lateral axes, and the alternative/probe availability flags. The
/// δ = 0 no-op control appears once per flag pair (both axes coincide).
pub fn build_scenarios(_config: &HylosConfig) -> Vec<Scenario> {
    let mut out = Vec::new();
    for &delta in &[0.0, -0.05, -0.03, -0.01, 0.01, 0.03, 0.05] {
        for &axis in &[Axis::X, Axis::Z] {
            if delta == 0.0 && axis != Axis::X {
                continue; // δ = 0 is axis-free; keep one control
            }
            for &alternatives_present in &[false, true] {
                for &probe_available in &[false, true] {
                    let scenario_id = format!(
                        "scn-{:?}{:+.3}-a{}-p{}",
                        axis, delta, alternatives_present as u8, probe_available as u8
                    )
                    .to_lowercase();
                    out.push(Scenario {
                        scenario_id,
                        delta,
                        axis,
                        alternatives_present,
                        probe_available,
                        instruction: "The receiving assembly looks laterally wrong".into(),
                        hint: Some("nudge the tray back into place".into()),
                        expected_actuator: if delta == 0.0 {
                            None
                        } else {
                            Some(("set_frame_offset".into(), "frame.recv".into()))
                        },
                        under_supported: !alternatives_present,
                    });
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayResult {
    pub scenario_id: String,
    pub condition: String,
    /// â: (actuator id, target variable) when an interaction was selected.
    pub selected: Option<(String, String)>,
    pub deferred: bool,
    pub defer_reason: Option<String>,
    pub outcome: Option<OutcomeKind>,
    pub diff: Option<EffectDiff>,
    /// The five evaluation-criteria bullets: upstream driver, declared
    /// space, supported alternative, unsupported-deferred, realized scene.
    pub criteria: [bool; 5],
    /// Post-replay tray/body lateral offset.
    pub final_offset: f64,
}

fn center_alternative(axis: Axis) -> GeometricAlternative {
    GeometricAlternative {
        alternative_id: "alt.center".into(),
        kind: AlternativeKind::CenterOnParentBody,
        target_frame: "frame.recv".into(),
        axis,
        anchor: None,
        dependent: Some("entity.tray".into()),
        reference_body: Some("entity.body".into()),
    }
}

fn diagnostic_probe(axis: Axis) -> ProbeSpec {
    ProbeSpec {
        probe_id: "probe.diag".into(),
        subjects: ("entity.tray".into(), "entity.body".into()),
        axis,
        source: "depth-cam".into(),
    }
}

fn build_invocation(
    scenario: &Scenario,
    scene: &SceneSnapshot,
    cand: &CandidateInterpretation,
) -> ActuatorInvocation {
    let mut inv = ActuatorInvocation::new(
        &format!("inv.{}", scenario.scenario_id),
        &cand.actuator_id,
        Origin::Model,
        1,
    )
    .with_arg("axis", ArgValue::Axis(scenario.axis));
    inv.review_flag = true;
    inv.evidence_refs = cand.supporting_evidence.clone();
    match cand.actuator_id.as_str() {
        "move_entity" => {
            // Direct edit: zero the visible offset as reported by the
            // symptom evidence.
            let observed = scene
                .evidence
                .get("ev.symptom")
                .and_then(|e| e.payload.get("observed-offset"))
                .copied()
                .unwrap_or(0.0);
            inv = inv
                .with_arg("entity", ArgValue::Ref(cand.implicated[0].clone()))
                .with_arg("value", ArgValue::Scalar(-observed));
        }
        _ => {
            inv = inv
                .with_arg("frame", ArgValue::Ref(cand.target_variable.clone()))
                .with_arg("value", ArgValue::Scalar(0.0));
            inv.value_alternative = cand.alternative.clone();
        }
    }
    inv
}

fn tray_body_offset(scene: &SceneSnapshot) -> f64 {
    let tray = scene.entity_aabb("entity.tray").map(|a| a.center());
    let body = scene.entity_aabb("entity.body").map(|a| a.center());
    match (tray, body) {
        (Ok(t), Ok(b)) => t.lateral_distance(b),
        _ => f64::INFINITY,
    }
}

/// Replays one scenario under one condition with an isolated kernel. The
/// selection pipeline sees only exposed scene facts; scenario ground truth
/// enters exclusively in the post-hoc criteria checklist.
pub fn replay(
    scenario: &Scenario,
    condition: &PolicyKind,
    config: &HylosConfig,
) -> Result<(ReplayResult, Vec<CommitLogEntry>)> {
    let mut kernel = TxnKernel::with_defaults();
    kernel.tolerances = config.tolerances();
    if scenario.alternatives_present {
        kernel.register_alternative(center_alternative(scenario.axis));
    }
    let mut scene = scenario.scene();

    // Optional bounded diagnostic acquisition, recorded as presentation
    // evidence before ranking.
    if condition.wants_acquisition() && scenario.probe_available {
        let sources: BTreeMap<String, ObservationSource> = [(
            "depth-cam".to_string(),
            ObservationSource { source_id: "depth-cam".into(), noise_sigma: config.noise_sigma },
        )]
        .into();
        let records =
            acquire_diagnostic(&scene, &diagnostic_probe(scenario.axis), &sources, config.seed)?;
        let mutation = MutationSet {
            ops: records
                .into_iter()
                .map(|record| MutationOp::AddEvidence { record })
                .collect(),
        };
        scene = kernel.apply_presentation(&scene, &mutation)?;
    }

    let view = build_view(&scene, &kernel.registry);
    let task = TaskRecord {
        instruction: scenario.instruction.clone(),
        hint: scenario.hint.clone(),
        symptom: scene
            .assertions
            .get("assert.symptom")
            .map(|a| a.assertion_id.clone()),
    };
    let rank = rank_candidates(
        &scene,
        &view,
        &task,
        condition,
        &kernel.registry,
        &kernel.alternatives,
    )?;

    let (selected, deferred, defer_reason, outcome, diff, post, alt_supported) =
        match &rank.decision {
            Decision::Defer { reason } => {
                (None, true, Some(reason.clone()), None, None, scene.clone(), false)
            }
            Decision::Select { candidate } => {
                let cand = rank
                    .candidates
                    .iter()
                    .find(|c| &c.candidate_id == candidate)
                    .ok_or_else(|| Error::Other(format!("unknown candidate {candidate}")))?;
                let alt_supported = cand
                    .alternative
                    .as_ref()
                    .and_then(|id| kernel.alternatives.get(id))
                    .map(|alt| {
                        matches!(
                            evaluate_alternative(&scene, alt, &cand.target_variable),
                            Ok(AltOutcome::Supported(_))
                        )
                    })
                    .unwrap_or(false);
                let invocation = build_invocation(scenario, &scene, cand);
                let (next, report) = kernel.run(&scene, &invocation)?;
                (
                    Some((cand.actuator_id.clone(), cand.target_variable.clone())),
                    false,
                    None,
                    Some(report.outcome),
                    report.diff,
                    next,
                    alt_supported,
                )
            }
        };

    let committed = outcome == Some(OutcomeKind::Committed);
    let final_offset = tray_body_offset(&post);
    // Criteria checklist (ground truth enters here only, after the run):
    // 1. upstream driver selected, 2. inside the declared interaction
    // space, 3. alternative supported by scene evidence/structure,
    // 4. unsupported alternatives deferred not applied, 5. realized scene
    // shows the intended interpretation.
    let c1 = match (&selected, &scenario.expected_actuator) {
        (Some(sel), Some(expected)) => sel == expected,
        _ => false,
    };
    let c2 = selected.is_some();
    let c3 = alt_supported;
    let c4 = !(scenario.under_supported && committed);
    let c5 = final_offset <= config.tau_length;

    Ok((
        ReplayResult {
            scenario_id: scenario.scenario_id.clone(),
            condition: condition.id(),
            selected,
            deferred,
            defer_reason,
            outcome,
            diff,
            criteria: [c1, c2, c3, c4, c5],
            final_offset,
        },
        kernel.log,
    ))
}

/// One CRA success: correct deferral on a no-op control, or â = a* with a
/// committed transaction and criteria bullets 1-3 and 5 all holding.
pub fn cra_success(result: &ReplayResult, scenario: &Scenario) -> bool {
    match &scenario.expected_actuator {
        None => result.deferred,
        Some(expected) => {
            result.selected.as_ref() == Some(expected)
                && result.outcome == Some(OutcomeKind::Committed)
                && result.criteria[0]
                && result.criteria[1]
                && result.criteria[2]
                && result.criteria[4]
        }
    }
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionStats {
    pub scenarios: usize,
    pub cra: Option<f64>,
    pub dp: Option<f64>,
    pub effect_precision: Option<f64>,
    pub effect_recall: Option<f64>,
    pub tcs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenarios: usize,
    pub overall: ConditionStats,
    pub per_condition: BTreeMap<String, ConditionStats>,
    pub chi_gsc: Option<f64>,
    pub gamma_hip: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}

fn stats_for(results: &[&ReplayResult], scenarios: &BTreeMap<String, &Scenario>) -> ConditionStats {
    let mut cra_hits = 0usize;
    let mut deferred = 0usize;
    let mut good_deferred = 0usize;
    let mut matched = 0usize;
    let mut unexpected = 0usize;
    let mut missed = 0usize;
    let mut submitted = 0usize;
    let mut committed = 0usize;
    for r in results {
        let scenario = scenarios[&r.scenario_id];
        if cra_success(r, scenario) {
            cra_hits += 1;
        }
        if r.deferred {
            deferred += 1;
            if scenario.under_supported {
                good_deferred += 1;
            }
        }
        if let Some(diff) = &r.diff {
            matched += diff.matched.len();
            unexpected += diff.unexpected.len();
            missed += diff.missed.len();
        }
        if r.outcome.is_some() {
            submitted += 1;
            if r.outcome == Some(OutcomeKind::Committed) {
                committed += 1;
            }
        }
    }
    ConditionStats {
        scenarios: results.len(),
        cra: ratio(cra_hits, results.len()),
        dp: ratio(good_deferred, deferred),
        effect_precision: ratio(matched, matched + unexpected),
        effect_recall: ratio(matched, matched + missed),
        tcs: ratio(committed, submitted),
    }
}

pub fn score(results: &[ReplayResult], scenarios: &[Scenario]) -> MetricsReport {
    let by_id: BTreeMap<String, &Scenario> =
        scenarios.iter().map(|s| (s.scenario_id.clone(), s)).collect();
    let all: Vec<&ReplayResult> = results.iter().collect();
    let mut per_condition = BTreeMap::new();
    for r in results {
        per_condition
            .entry(r.condition.clone())
            .or_insert_with(Vec::new)
            .push(r);
    }
    let per_condition = per_condition
        .into_iter()
        .map(|(cond, rs)| (cond, stats_for(&rs, &by_id)))
        .collect();

    // Artifact-lab summaries on the reference fixtures: consistency over
    // the constraint set and handle preservation over the edit grid.
    let artifact = fixture_artifact();
    let chi_gsc = artifact::gsc(&artifact).ok().flatten();
    let decoder = fixture_decoder();
    let handle = Handle {
        handle_id: "h.tray-z".into(),
        slice: vec![2],
        local_constraints: vec!["con.contact".into()],
        step_scale: vec![0.005],
    };
    let gamma_hip = artifact::gamma_hip(&decoder, &[0.0; 4], &[handle], &artifact.constraints)
        .ok()
        .flatten();

    MetricsReport {
        scenarios: scenarios.len(),
        overall: stats_for(&all, &by_id),
        per_condition,
        chi_gsc,
        gamma_hip,
    }
}

fn fmt_metric(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.6}"),
        None => "undefined".into(),
    }
}

impl MetricsReport {
    /// Deterministic key-ordered text rendering.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("hylos metrics report\n");
        out.push_str("valid = committed\n");
        out.push_str(&format!("scenarios = {}\n", self.scenarios));
        out.push_str(&format!("chi_gsc = {}\n", fmt_metric(self.chi_gsc)));
        out.push_str(&format!("gamma_hip = {}\n", fmt_metric(self.gamma_hip)));
        let section = |name: &str, s: &ConditionStats| {
            format!(
                "[{name}]\nreplays = {}\ncra = {}\ndp = {}\neffect_precision = {}\neffect_recall = {}\ntcs = {}\n",
                s.scenarios,
                fmt_metric(s.cra),
                fmt_metric(s.dp),
                fmt_metric(s.effect_precision),
                fmt_metric(s.effect_recall),
                fmt_metric(s.tcs),
            )
        };
        out.push_str(&section("overall", &self.overall));
        for (cond, stats) in &self.per_condition {
            out.push_str(&section(&format!("condition {cond}"), stats));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Family runs
// ---------------------------------------------------------------------------

pub const ALL_CONDITIONS: [PolicyKind; 6] = [
    PolicyKind::DirectEdit,
    PolicyKind::PromptHeuristic,
    PolicyKind::StructureOnly,
    PolicyKind::ContractBounded,
    PolicyKind::ContractAcquisition,
    PolicyKind::ContractAlternatives,
];

pub struct FamilyRun {
    pub scenarios: Vec<Scenario>,
    pub results: Vec<ReplayResult>,
    pub log: Vec<CommitLogEntry>,
    pub metrics: MetricsReport,
}

/// Rechains per-scenario commit logs into one verifiable sequence.
pub fn merge_logs(chains: Vec<Vec<CommitLogEntry>>) -> Vec<CommitLogEntry> {
    let mut merged: Vec<CommitLogEntry> = Vec::new();
    for chain in chains {
        for mut entry in chain {
            entry.index = merged.len() as u64;
            entry.prev_hash = merged
                .last()
                .map(|e| e.entry_hash.clone())
                .unwrap_or_default();
            entry.entry_hash = String::new();
            entry.entry_hash = canonical::digest_of(&entry);
            merged.push(entry);
        }
    }
    merged
}

/// Replays the whole family under the given conditions; scenarios are
/// independent, the log merge is serialized.
pub fn run_family(config: &HylosConfig, conditions: &[PolicyKind]) -> Result<FamilyRun> {
    let scenarios = build_scenarios(config);
    let mut results = Vec::new();
    let mut chains = Vec::new();
    for condition in conditions {
        for scenario in &scenarios {
            let (result, log) = replay(scenario, condition, config)?;
            results.push(result);
            chains.push(log);
        }
    }
    let metrics = score(&results, &scenarios);
    Ok(FamilyRun { scenarios, results, log: merge_logs(chains), metrics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::causal::PolicyRequest;
    use crate::txn::verify_log;

    fn supported(s: &Scenario) -> bool {
        s.alternatives_present && s.delta != 0.0
    }

    #[test]
    fn family_has_golden_count() {
        let scenarios = build_scenarios(&HylosConfig::default());
        assert_eq!(scenarios.len(), 52);
        let mut ids: Vec<&str> = scenarios.iter().map(|s| s.scenario_id.as_str()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 52);
    }

    #[test]
    fn noop_control_has_no_symptom() {
        let config = HylosConfig::default();
        let control = build_scenarios(&config)
            .into_iter()
            .find(|s| s.delta == 0.0)
            .unwrap();
        assert!(control.expected_actuator.is_none());
        assert!(!control.scene().assertions.contains_key("assert.symptom"));
    }

    #[test]
    fn contract_alternatives_repairs_supported_scenarios() {
        let config = HylosConfig::default();
        for scenario in build_scenarios(&config).iter().filter(|s| supported(s)) {
            let (result, log) = replay(scenario, &PolicyKind::ContractAlternatives, &config).unwrap();
            assert_eq!(
                result.selected,
                Some(("set_frame_offset".into(), "frame.recv".into())),
                "scenario {}",
                scenario.scenario_id
            );
            assert_eq!(result.outcome, Some(OutcomeKind::Committed));
            assert!(result.criteria.iter().all(|c| *c));
            assert!(result.final_offset <= config.tau_length);
            verify_log(&log).unwrap();
        }
    }

    #[test]
    fn contract_alternatives_defers_when_unsupported() {
        let config = HylosConfig::default();
        for scenario in build_scenarios(&config)
            .iter()
            .filter(|s| !s.alternatives_present && s.delta != 0.0)
        {
            let (result, _) = replay(scenario, &PolicyKind::ContractAlternatives, &config).unwrap();
            assert!(result.deferred, "scenario {}", scenario.scenario_id);
            assert!(result.criteria[3]);
        }
    }

    #[test]
    fn direct_edit_lands_in_review() {
        let config = HylosConfig::default();
        let scenario = build_scenarios(&config)
            .into_iter()
            .find(|s| supported(s) && s.delta == 0.03 && s.axis == Axis::X)
            .unwrap();
        let (result, _) = replay(&scenario, &PolicyKind::DirectEdit, &config).unwrap();
        assert_eq!(
            result.selected,
            Some(("move_entity".into(), "frame.tray".into()))
        );
        assert_eq!(result.outcome, Some(OutcomeKind::Review));
        assert!(!result.diff.as_ref().unwrap().unexpected.is_empty());
        assert!(!cra_success(&result, &scenario));
    }

    #[test]
    fn acquisition_probe_adds_evidence_then_defers() {
        // Contract + acquisition: reads the diagnostic but still defers
        // because no alternative connects the evidence to an interaction.
        let config = HylosConfig::default();
        let scenario = build_scenarios(&config)
            .into_iter()
            .find(|s| s.delta == 0.03 && s.axis == Axis::X && s.probe_available && s.alternatives_present)
            .unwrap();
        let (result, log) = replay(&scenario, &PolicyKind::ContractAcquisition, &config).unwrap();
        assert!(result.deferred);
        // The acquisition itself was committed as presentation evidence.
        assert_eq!(log.len(), 1);
        assert_eq!(log[0].outcome, "committed");
    }

    #[test]
    fn policy_request_is_blind() {
        let config = HylosConfig::default();
        let scenario = build_scenarios(&config)
            .into_iter()
            .find(|s| supported(s))
            .unwrap();
        let mut kernel = TxnKernel::with_defaults();
        kernel.register_alternative(center_alternative(scenario.axis));
        let scene = scenario.scene();
        let view = build_view(&scene, &kernel.registry);
        let task = TaskRecord {
            instruction: scenario.instruction.clone(),
            hint: scenario.hint.clone(),
            symptom: Some("assert.symptom".into()),
        };
        let rank = rank_candidates(
            &scene,
            &view,
            &task,
            &PolicyKind::ContractAlternatives,
            &kernel.registry,
            &kernel.alternatives,
        )
        .unwrap();
        let request = PolicyRequest::build(&scene, &view, &task, &rank.candidates);
        let bytes = canonical::to_canonical_string(&request);
        for needle in ["expected", "under", "ground-truth", "a_i", "u_i"] {
            assert!(
                !bytes.contains(needle),
                "policy request leaks ground truth via {needle:?}: {bytes}"
            );
        }
    }

    #[test]
    fn scoring_formulas_on_handmade_results() {
        let config = HylosConfig::default();
        let scenarios = build_scenarios(&config);
        // Three supported scenarios: two correct commits, one wrong target.
        let sup: Vec<&Scenario> = scenarios.iter().filter(|s| supported(s)).take(3).collect();
        let mk = |s: &Scenario, good: bool| ReplayResult {
            scenario_id: s.scenario_id.clone(),
            condition: "contract-alternatives".into(),
            selected: Some(if good {
                ("set_frame_offset".into(), "frame.recv".into())
            } else {
                ("move_entity".into(), "frame.tray".into())
            }),
            deferred: false,
            defer_reason: None,
            outcome: Some(if good { OutcomeKind::Committed } else { OutcomeKind::Review }),
            diff: None,
            criteria: [good, true, good, true, good],
            final_offset: if good { 0.0 } else { 0.03 },
        };
        let results = vec![mk(sup[0], true), mk(sup[1], true), mk(sup[2], false)];
        let report = score(&results, &scenarios);
        let stats = &report.per_condition["contract-alternatives"];
        assert!((stats.cra.unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(stats.dp, None); // zero deferrals: undefined
        assert!((stats.tcs.unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!(report.metricsless_check());
    }

    #[test]
    fn full_family_is_deterministic() {
        let config = HylosConfig::default();
        let run1 = run_family(&config, &[PolicyKind::ContractAlternatives]).unwrap();
        let run2 = run_family(&config, &[PolicyKind::ContractAlternatives]).unwrap();
        assert_eq!(run1.metrics.render(), run2.metrics.render());
        assert_eq!(
            crate::txn::log_to_string(&run1.log),
            crate::txn::log_to_string(&run2.log)
        );
        verify_log(&run1.log).unwrap();
    }

    #[test]
    fn config_round_trip() {
        let config = HylosConfig::default();
        let text = to_config_string(&config);
        assert_eq!(from_config_str(&text).unwrap(), config);
        assert!(from_config_str("{\"format\":\"hylos-config/9\",\"config\":{}}").is_err());
    }

    impl MetricsReport {
        /// Render sanity used by the scoring test.
        fn metricsless_check(&self) -> bool {
            let text = self.render();
            text.starts_with("hylos metrics report\nvalid = committed\n")
                && text.contains("dp = undefined")
        }
    }
}
