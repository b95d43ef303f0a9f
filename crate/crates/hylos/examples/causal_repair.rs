//! Causal repair: derive the dependency view, trace the symptom upstream,
//! rank candidate interpretations, and watch the defer rule engage when
//! support is missing.

use hylos::causal::{
    build_view, rank_candidates, trace_upstream, AlternativeKind, Decision, GeometricAlternative,
    PolicyKind, TaskRecord,
};
use hylos::fixtures::canonical_scene;
use hylos::math::Axis;
use hylos::txn::TxnKernel;

fn main() -> hylos::Result<()> {
    let scene = canonical_scene(0.03, Axis::X);
    let mut kernel = TxnKernel::with_defaults();
    let view = build_view(&scene, &kernel.registry);
    println!("interaction variables: {:?}", view.variables);

    // The symptom sits on the tray, but its placement chain runs through
    // the receiving frame to the body.
    let drivers = trace_upstream(&scene, &view, "assert.symptom")?;
    for d in &drivers {
        println!("driver {} at depth {}", d.driver, d.path.len());
    }

    let task = TaskRecord {
        instruction: "The receiving assembly looks laterally wrong".into(),
        hint: Some("nudge the tray back into place".into()),
        symptom: Some("assert.symptom".into()),
    };

    // Without a registered alternative the contract policy must defer.
    let rank = rank_candidates(
        &scene,
        &view,
        &task,
        &PolicyKind::ContractAlternatives,
        &kernel.registry,
        &kernel.alternatives,
    )?;
    println!("without alternatives: {:?}", rank.decision);

    kernel.register_alternative(GeometricAlternative {
        alternative_id: "alt.center".into(),
        kind: AlternativeKind::CenterOnParentBody,
        target_frame: "frame.recv".into(),
        axis: Axis::X,
        anchor: None,
        dependent: Some("entity.tray".into()),
        reference_body: Some("entity.body".into()),
    });
    let rank = rank_candidates(
        &scene,
        &view,
        &task,
        &PolicyKind::ContractAlternatives,
        &kernel.registry,
        &kernel.alternatives,
    )?;
    for c in &rank.candidates {
        println!(
            "candidate {} -> {} (score {:.2}, depth {})",
            c.candidate_id, c.target_variable, c.score, c.upstream_depth
        );
    }
    match rank.decision {
        Decision::Select { candidate } => println!("selected: {candidate}"),
        Decision::Defer { reason } => println!("deferred: {reason}"),
    }

    // The prompt heuristic chases the hint to the visible tray instead.
    let heuristic = rank_candidates(
        &scene,
        &view,
        &task,
        &PolicyKind::PromptHeuristic,
        &kernel.registry,
        &kernel.alternatives,
    )?;
    println!("prompt heuristic picks: {:?}", heuristic.decision);
    Ok(())
}
