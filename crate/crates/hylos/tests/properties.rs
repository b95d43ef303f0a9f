//! Randomized invariants over the core value types.

use proptest::prelude::*;

use hylos::effects::{
    compute_diff, effects_equivalent, EffectClaim, EffectKind, ToleranceTable,
};
use hylos::fixtures::canonical_scene;
use hylos::guardrail::{masked_distribution, DecodeState, EnumerativeModel, Grid, Token};
use hylos::math::Axis;
use hylos::scene::{from_scene_str, snapshot_commit, to_scene_string, MutationOp, MutationSet};

fn claim_strategy() -> impl Strategy<Value = EffectClaim> {
    let kind = prop_oneof![
        Just(EffectKind::LateralOffset),
        Just(EffectKind::VerticalOffset),
        Just(EffectKind::RotationDelta),
        Just(EffectKind::Clearance),
        Just(EffectKind::ContainmentFlag),
        Just(EffectKind::AttachmentFlag),
    ];
    (kind, 0usize..3, 0usize..3, -0.02f64..0.02, any::<bool>(), any::<bool>()).prop_map(
        |(kind, s0, s1, q, flag, verified)| {
            let pool = ["a", "b", "c"];
            let subjects = vec![pool[s0].to_string(), pool[s1].to_string()];
            let verifier = verified.then(|| "v".to_string());
            if kind.is_flag() {
                EffectClaim { kind, subjects, quantity: None, flag: Some(flag), verifier }
            } else {
                EffectClaim { kind, subjects, quantity: Some(q), flag: None, verifier }
            }
        },
    )
}

fn axis_strategy() -> impl Strategy<Value = Axis> {
    prop_oneof![Just(Axis::X), Just(Axis::Y), Just(Axis::Z)]
}

proptest! {
    // Equivalence is symmetric and monotone in the tolerance.
    #[test]
    fn equivalence_symmetric_and_tau_monotone(
        a in claim_strategy(),
        b in claim_strategy(),
        tau in 1e-4f64..0.05,
    ) {
        let tight = ToleranceTable { tau_length: tau, tau_angle: tau };
        let loose = ToleranceTable { tau_length: 2.0 * tau, tau_angle: 2.0 * tau };
        prop_assert_eq!(effects_equivalent(&a, &b, &tight), effects_equivalent(&b, &a, &tight));
        if effects_equivalent(&a, &b, &tight) {
            prop_assert!(effects_equivalent(&a, &b, &loose));
        }
    }

    // The diff partitions cleanly: verified predictions land in matched or
    // missed, never both; a self-diff raises no discrepancies.
    #[test]
    fn diff_partitions_predictions(
        predicted in prop::collection::vec(claim_strategy(), 0..8),
        observed in prop::collection::vec(claim_strategy(), 0..8),
    ) {
        let tol = ToleranceTable::default();
        let diff = compute_diff(&predicted, &observed, &tol);
        for p in &predicted {
            let in_matched = diff.matched.contains(p);
            let in_missed = diff.missed.contains(p);
            prop_assert!(!(in_matched && in_missed));
            if p.verifier.is_some() {
                prop_assert!(in_matched || in_missed);
            } else {
                prop_assert!(diff.unchecked.contains(p));
            }
        }
        let self_diff = compute_diff(&predicted, &predicted, &tol);
        prop_assert!(self_diff.unexpected.is_empty());
        prop_assert!(self_diff.missed.is_empty());
    }

    // Snapshot digests survive a round-trip through the file format, and
    // commits never disturb the parent.
    #[test]
    fn snapshot_roundtrip_and_commit_isolation(
        delta in -0.05f64..0.05,
        axis in prop_oneof![Just(Axis::X), Just(Axis::Z)],
        value in -0.01f64..0.01,
        target_axis in axis_strategy(),
    ) {
        let scene = canonical_scene(delta, axis);
        let before = scene.digest();
        prop_assert_eq!(from_scene_str(&to_scene_string(&scene)).unwrap().digest(), before.clone());
        let child = snapshot_commit(
            &scene,
            &MutationSet::single(MutationOp::SetFrameTranslationComponent {
                frame_id: "frame.recv".into(),
                axis: target_axis,
                value,
            }),
            "snap-prop",
        ).unwrap();
        prop_assert_eq!(scene.digest(), before);
        prop_assert_eq!(child.parent_snapshot.as_deref(), Some(scene.snapshot_id.as_str()));
    }

    // Masked distributions carry total mass exactly 0 or 1, and every
    // surviving token extends the prefix into an admissible state.
    #[test]
    fn mask_renormalizes_and_preserves_invariants(
        prefix_choices in prop::collection::vec(0usize..64, 0..4),
        weights in prop::collection::vec(1e-3f64..1.0, 1..8),
    ) {
        let grid = Grid { width: 4, height: 4 };
        let model = EnumerativeModel { parts: vec!["a".into(), "b".into()] };
        // Grow an admissible prefix by indexing into the live vocabulary.
        let mut state = DecodeState::new(grid);
        let mut tokens: Vec<Token> = Vec::new();
        for choice in prefix_choices {
            let legal: Vec<Token> = model
                .vocabulary(&state)
                .into_iter()
                .filter(|t| state.admissible(t))
                .collect();
            if legal.is_empty() {
                break;
            }
            let token = legal[choice % legal.len()].clone();
            state.push(&token).unwrap();
            tokens.push(token);
        }
        prop_assert!(state.full_check());
        if state.ended {
            return Ok(());
        }
        let vocab = model.vocabulary(&state);
        let candidates: Vec<(Token, f64)> = {
            let total: f64 = weights.iter().cycle().take(vocab.len()).sum();
            vocab
                .iter()
                .cloned()
                .zip(weights.iter().cycle().map(|w| w / total))
                .collect()
        };
        let masked = masked_distribution(&state, &candidates, &[]).unwrap();
        let mass: f64 = masked.iter().sum();
        prop_assert!(mass.abs() <= 1e-9 || (mass - 1.0).abs() <= 1e-9);
        for ((token, _), weight) in candidates.iter().zip(&masked) {
            if *weight > 0.0 {
                let mut next = state.clone();
                next.push(token).unwrap();
                prop_assert!(next.full_check());
            }
        }
    }
}
