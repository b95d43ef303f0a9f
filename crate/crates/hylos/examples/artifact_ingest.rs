//! Artifact ingestion: the three outcome classes (commit, review,
//! capability gap), plus the consistency and handle-preservation scores.

use hylos::artifact::{
    cycle_disagreement, fixture_artifact, gsc, ingest, AdapterKind, ConstraintKind,
    ConstraintSpec,
};
use hylos::math::Axis;
use hylos::scene::SceneSnapshot;
use hylos::txn::TxnKernel;

fn main() -> hylos::Result<()> {
    // 1. The consistent artifact: every constraint checks out, so the
    //    Level-4 ingestion transaction commits grounded scene state.
    let artifact = fixture_artifact();
    let mut kernel = TxnKernel::with_defaults();
    let empty = SceneSnapshot::empty("snap-empty");
    let (next, report) = ingest(&mut kernel, &empty, &artifact)?;
    println!(
        "consistent artifact: {} (chi_gsc = {:?}), {} entities grounded",
        report.outcome.label(),
        report.chi_gsc,
        next.entities.len()
    );

    // 2. A floating tray contradicts the declared contact: partial trust,
    //    routed to review instead of silently accepted.
    let mut floating = fixture_artifact();
    floating.geometry[1].center.y = 0.16;
    let mut kernel = TxnKernel::with_defaults();
    let (_, report) = ingest(&mut kernel, &empty, &floating)?;
    println!(
        "contradicted contact: {} (chi_gsc = {:?})",
        report.outcome.label(),
        report.chi_gsc
    );

    // 3. A constraint kind with no registered checker becomes a typed
    //    missing-verification gap, not fake geometry.
    let mut exotic = fixture_artifact();
    exotic.constraints.push(ConstraintSpec {
        constraint_id: "con.thermal".into(),
        constraint: ConstraintKind::CustomCheck { name: "thermal-flow".into() },
        subjects: ("part.tray".into(), "part.body".into()),
        axis: Axis::X,
    });
    let mut kernel = TxnKernel::with_defaults();
    let (_, report) = ingest(&mut kernel, &empty, &exotic)?;
    println!(
        "checker-less constraint: {} ({})",
        report.outcome.label(),
        report.gap.map(|g| g.detail).unwrap_or_default()
    );

    // Cycle consistency across projection adapters: the display view
    // recovers everything from geometry, the constructed-loss adapter
    // drops one contact edge.
    let d = cycle_disagreement(
        &fixture_artifact(),
        &[AdapterKind::Display, AdapterKind::ContactList, AdapterKind::DropFirstEdge],
    )?;
    println!("cycle disagreement: {d:?}");
    println!("gsc of fixture: {:?}", gsc(&fixture_artifact())?);
    Ok(())
}
