//! Effect diffs: predicted vs observed claims under the tolerance-based
//! equivalence, and the resulting status.

use hylos::effects::{
    assign_status, compute_diff, AuditStatus, EffectClaim, EffectKind, ToleranceTable,
};

fn main() {
    let tol = ToleranceTable::default();

    let predicted = vec![
        EffectClaim::quantity(
            EffectKind::LateralOffset,
            &["frame.recv", "frame.body"],
            0.0,
            "world-pose-offset",
        ),
        EffectClaim::quantity(
            EffectKind::LateralOffset,
            &["entity.tray", "entity.body"],
            0.0,
            "world-pose-offset",
        ),
    ];

    // Audit observes the tray recentered but the upstream frame still off:
    // one match, one miss, one unexpected observation.
    let observed = vec![
        EffectClaim::quantity(
            EffectKind::LateralOffset,
            &["entity.tray", "entity.body"],
            0.0002,
            "world-pose-offset",
        ),
        EffectClaim::quantity(
            EffectKind::LateralOffset,
            &["frame.recv", "frame.body"],
            0.03,
            "world-pose-offset",
        ),
    ];

    let diff = compute_diff(&predicted, &observed, &tol);
    println!("matched:    {}", diff.matched.len());
    println!("unexpected: {}", diff.unexpected.len());
    println!("missed:     {}", diff.missed.len());
    println!("unchecked:  {}", diff.unchecked.len());
    println!("status:     {:?}", diff.status);
    println!(
        "final status with passing audit: {:?}",
        assign_status(&diff, false, AuditStatus::Passed)
    );

    // A tighter tolerance flips the tray match into a miss.
    let tight = ToleranceTable { tau_length: 1e-5, ..tol };
    let strict = compute_diff(&predicted, &observed, &tight);
    println!("under tau_length = 1e-5: matched = {}", strict.matched.len());
}
