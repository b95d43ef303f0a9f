//! Constrained dual-stream decoding: masked token selection over the
//! block world, with a forced dead end resolved by backtracking.

use hylos::guardrail::{
    masked_distribution, Claim, DecodeState, Decoder, EnumerativeModel, Grid, Orientation,
    Placement, Selection, Token,
};

fn main() -> hylos::Result<()> {
    let grid = Grid { width: 4, height: 4 };

    // Masking in isolation: the claim stream only admits claims the
    // geometry supports, and the mask renormalizes what survives.
    let state = DecodeState::fold(
        grid,
        &[Token::Geom {
            placement: Placement {
                part_id: "a".into(),
                x: 0,
                y: 0,
                orientation: Orientation::Horizontal,
            },
        }],
    )?;
    let candidates = vec![
        (Token::Sym { claim: Claim::Clear { part: "a".into() } }, 0.5),
        (
            Token::Sym { claim: Claim::On { above: "a".into(), below: "a".into() } },
            0.3,
        ),
        (Token::Sym { claim: Claim::End }, 0.2),
    ];
    let p_h = masked_distribution(&state, &candidates, &[])?;
    println!("masked distribution: {p_h:?}");

    // A seeded sampled decode over three dominoes; the trace records how
    // much of the vocabulary the mask removed at each step.
    let mut model = EnumerativeModel {
        parts: vec!["a".into(), "b".into(), "c".into()],
    };
    let mut decoder = Decoder::new(grid);
    decoder.selection = Selection::Sample { seed: 42 };
    let report = decoder.decode(&mut model)?;
    println!("outcome: {:?}", report.outcome);
    for step in &report.trace {
        println!(
            "  step {:>2}: {:>3} candidates, {:>3} masked{}",
            step.step,
            step.candidates,
            step.masked_out,
            if step.backtracked { ", after backtrack" } else { "" }
        );
    }
    let final_state = DecodeState::fold(grid, &report.tokens)?;
    println!(
        "emitted {} placements, {} claims; full check passes: {}",
        final_state.placements.len(),
        final_state.claims.len(),
        final_state.full_check()
    );
    Ok(())
}
