//! The full transaction lifecycle on the canonical repair: propose, gate,
//! admit, lower, realize, audit, finalize — with the hash-chained log.

use hylos::actuators::{ActuatorInvocation, ArgValue};
use hylos::causal::{AlternativeKind, GeometricAlternative};
use hylos::fixtures::canonical_scene;
use hylos::math::Axis;
use hylos::scene::Origin;
use hylos::txn::{verify_log, TxnKernel};

fn main() -> hylos::Result<()> {
    let scene = canonical_scene(0.03, Axis::X);
    let mut kernel = TxnKernel::with_defaults();
    kernel.register_alternative(GeometricAlternative {
        alternative_id: "alt.center".into(),
        kind: AlternativeKind::CenterOnParentBody,
        target_frame: "frame.recv".into(),
        axis: Axis::X,
        anchor: None,
        dependent: Some("entity.tray".into()),
        reference_body: Some("entity.body".into()),
    });

    // The repair targets the upstream frame, not the visibly wrong tray;
    // its value comes from a supported geometric alternative.
    let mut inv = ActuatorInvocation::new("inv.repair", "set_frame_offset", Origin::Model, 1)
        .with_arg("frame", ArgValue::Ref("frame.recv".into()))
        .with_arg("axis", ArgValue::Axis(Axis::X))
        .with_arg("value", ArgValue::Scalar(0.0));
    inv.review_flag = true;
    inv.evidence_refs.insert("ev.symptom".into());
    inv.value_alternative = Some("alt.center".into());

    let (next, report) = kernel.run(&scene, &inv)?;
    println!("outcome: {}", report.outcome.label());
    println!("detail:  {}", report.detail);
    if let Some(diff) = &report.diff {
        println!(
            "effect diff: {} matched, {} unexpected, {} missed",
            diff.matched.len(),
            diff.unexpected.len(),
            diff.missed.len()
        );
    }

    let tray = next.entity_aabb("entity.tray")?.center();
    let body = next.entity_aabb("entity.body")?.center();
    println!("post-commit tray/body offset: {:.9}", tray.lateral_distance(body));

    verify_log(&kernel.log)?;
    println!("commit log verified ({} entries)", kernel.log.len());
    for entry in &kernel.log {
        println!("  [{}] {} -> {}", entry.index, entry.txn_id, entry.outcome);
    }
    Ok(())
}
