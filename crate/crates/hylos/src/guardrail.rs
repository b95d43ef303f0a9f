//! Constrained dual-stream decoding guardrail on a grid block-world:
//! interleaved geometric/symbolic token streams, an admissibility mask
//! computed by incremental forward-chaining, masked renormalization, and
//! typed dead-end handling.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{CapabilityGap, GapKind};

pub const MAX_SEQUENCE_LEN: usize = 256;
pub const DEFAULT_BACKTRACK_DEPTH: usize = 32;
const PROB_SUM_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Tokens and state
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    Horizontal,
    Vertical,
}

/// A 1x2 domino placed at its anchor cell; horizontal extends +x, vertical
/// extends +y. Row y = 0 is the ground.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Placement {
    pub part_id: String,
    pub x: i64,
    pub y: i64,
    pub orientation: Orientation,
}

impl Placement {
    pub fn cells(&self) -> [(i64, i64); 2] {
        match self.orientation {
            Orientation::Horizontal => [(self.x, self.y), (self.x + 1, self.y)],
            Orientation::Vertical => [(self.x, self.y), (self.x, self.y + 1)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "claim")]
pub enum Claim {
    On { above: String, below: String },
    Clear { part: String },
    Attached { a: String, b: String },
    End,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "stream")]
pub enum Token {
    Geom { placement: Placement },
    Sym { claim: Claim },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub width: i64,
    pub height: i64,
}

impl Grid {
    pub fn contains(&self, cell: (i64, i64)) -> bool {
        (0..self.width).contains(&cell.0) && (0..self.height).contains(&cell.1)
    }
}

/// The symbolic store is a pure fold of the emitted prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeState {
    pub grid: Grid,
    pub placements: Vec<Placement>,
    pub claims: Vec<Claim>,
    /// Cell -> owning part.
    pub occupancy: BTreeMap<(i64, i64), String>,
    pub ended: bool,
}

impl DecodeState {
    pub fn new(grid: Grid) -> Self {
        DecodeState {
            grid,
            placements: Vec::new(),
            claims: Vec::new(),
            occupancy: BTreeMap::new(),
            ended: false,
        }
    }

    /// Strict interleave: geometric tokens at even positions, symbolic at
    /// odd.
    pub fn expects_geom(&self) -> bool {
        (self.placements.len() + self.claims.len()) % 2 == 0
    }

    pub fn placed(&self, part_id: &str) -> Option<&Placement> {
        self.placements.iter().find(|p| p.part_id == part_id)
    }

    pub fn fold(grid: Grid, tokens: &[Token]) -> Result<Self> {
        let mut state = DecodeState::new(grid);
        for t in tokens {
            state.push(t)?;
        }
        Ok(state)
    }

    pub fn push(&mut self, token: &Token) -> Result<()> {
        match token {
            Token::Geom { placement } => {
                for cell in placement.cells() {
                    self.occupancy.insert(cell, placement.part_id.clone());
                }
                self.placements.push(placement.clone());
            }
            Token::Sym { claim } => {
                if *claim == Claim::End {
                    self.ended = true;
                }
                self.claims.push(claim.clone());
            }
        }
        Ok(())
    }

    fn supported(&self, placement: &Placement) -> bool {
        placement.cells().iter().any(|&(x, y)| {
            y == 0
                || self
                    .occupancy
                    .get(&(x, y - 1))
                    .is_some_and(|owner| owner != &placement.part_id)
        })
    }

    fn cell_above_is_free(&self, part_id: &str) -> bool {
        self.placements
            .iter()
            .filter(|p| p.part_id == part_id)
            .flat_map(|p| p.cells())
            .all(|(x, y)| {
                self.occupancy
                    .get(&(x, y + 1))
                    .is_none_or(|owner| owner == part_id)
            })
    }

    fn rests_on(&self, above: &str, below: &str) -> bool {
        let (Some(a), Some(b)) = (self.placed(above), self.placed(below)) else {
            return false;
        };
        a.cells()
            .iter()
            .any(|&(x, y)| b.cells().contains(&(x, y - 1)))
    }

    fn adjacent(&self, a: &str, b: &str) -> bool {
        let (Some(pa), Some(pb)) = (self.placed(a), self.placed(b)) else {
            return false;
        };
        pa.cells().iter().any(|&(x, y)| {
            [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)]
                .iter()
                .any(|c| pb.cells().contains(c))
        })
    }

    fn claim_holds(&self, claim: &Claim) -> bool {
        match claim {
            Claim::On { above, below } => self.rests_on(above, below),
            Claim::Clear { part } => self.placed(part).is_some() && self.cell_above_is_free(part),
            Claim::Attached { a, b } => a != b && self.adjacent(a, b),
            Claim::End => true,
        }
    }

    /// Incremental forward-chaining admissibility: only the constraints the
    /// new token can affect are checked.
    pub fn admissible(&self, token: &Token) -> bool {
        if self.ended {
            return false;
        }
        match token {
            Token::Geom { placement } => {
                if !self.expects_geom() || self.placed(&placement.part_id).is_some() {
                    return false;
                }
                for cell in placement.cells() {
                    if !self.grid.contains(cell) || self.occupancy.contains_key(&cell) {
                        return false;
                    }
                }
                if !self.supported(placement) {
                    return false;
                }
                // A new block must not land on a part already claimed clear.
                for claim in &self.claims {
                    if let Claim::Clear { part } = claim {
                        let covers = self
                            .placements
                            .iter()
                            .filter(|p| &p.part_id == part)
                            .flat_map(|p| p.cells())
                            .any(|(x, y)| placement.cells().contains(&(x, y + 1)));
                        if covers {
                            return false;
                        }
                    }
                }
                true
            }
            Token::Sym { claim } => !self.expects_geom() && self.claim_holds(claim),
        }
    }

    /// From-scratch full check of every invariant over the whole store;
    /// the oracle the incremental mask must agree with.
    pub fn full_check(&self) -> bool {
        // No overlap, in bounds.
        let mut seen = BTreeMap::new();
        for p in &self.placements {
            for cell in p.cells() {
                if !self.grid.contains(cell) {
                    return false;
                }
                if seen.insert(cell, &p.part_id).is_some() {
                    return false;
                }
            }
        }
        // Every part supported.
        for p in &self.placements {
            if !self.supported(p) {
                return false;
            }
        }
        // Attachment/claim consistency: every emitted claim holds now.
        self.claims.iter().all(|c| self.claim_holds(c))
    }
}

// ---------------------------------------------------------------------------
// Masked decoding
// ---------------------------------------------------------------------------

/// Validates p0 and returns the masked, renormalized distribution p_H; the
/// mask entry is 1 exactly for admissible tokens.
pub fn masked_distribution(
    state: &DecodeState,
    candidates: &[(Token, f64)],
    banned: &[Token],
) -> Result<Vec<f64>> {
    let sum: f64 = candidates.iter().map(|(_, p)| p).sum();
    if candidates.iter().any(|(_, p)| !p.is_finite() || *p < 0.0) || (sum - 1.0).abs() > PROB_SUM_TOL
    {
        return Err(Error::MalformedDistribution(format!(
            "probabilities sum to {sum:.12}, expected 1"
        )));
    }
    let masked: Vec<f64> = candidates
        .iter()
        .map(|(t, p)| {
            if state.admissible(t) && !banned.contains(t) {
                *p
            } else {
                0.0
            }
        })
        .collect();
    let mass: f64 = masked.iter().sum();
    if mass == 0.0 {
        return Ok(masked);
    }
    Ok(masked.iter().map(|p| p / mass).collect())
}

pub trait TokenModel {
    /// Proposes the candidate vocabulary with model probabilities p0 for
    /// the next step.
    fn propose(&mut self, state: &DecodeState, step: usize) -> Vec<(Token, f64)>;
}

/// Fixed per-step candidate distributions.
pub struct ScriptedModel {
    pub steps: Vec<Vec<(Token, f64)>>,
}

impl TokenModel for ScriptedModel {
    fn propose(&mut self, _state: &DecodeState, step: usize) -> Vec<(Token, f64)> {
        self.steps.get(step).cloned().unwrap_or_default()
    }
}

/// Uniform proposals over the whole structured vocabulary: every placement
/// of every unplaced part plus every claim over placed parts plus end.
pub struct EnumerativeModel {
    pub parts: Vec<String>,
}

impl EnumerativeModel {
    pub fn vocabulary(&self, state: &DecodeState) -> Vec<Token> {
        let mut tokens = Vec::new();
        if state.expects_geom() {
            for part in &self.parts {
                if state.placed(part).is_some() {
                    continue;
                }
                for x in 0..state.grid.width {
                    for y in 0..state.grid.height {
                        for orientation in [Orientation::Horizontal, Orientation::Vertical] {
                            tokens.push(Token::Geom {
                                placement: Placement {
                                    part_id: part.clone(),
                                    x,
                                    y,
                                    orientation,
                                },
                            });
                        }
                    }
                }
            }
        } else {
            let placed: Vec<&str> =
                state.placements.iter().map(|p| p.part_id.as_str()).collect();
            for a in &placed {
                tokens.push(Token::Sym { claim: Claim::Clear { part: a.to_string() } });
                for b in &placed {
                    if a != b {
                        tokens.push(Token::Sym {
                            claim: Claim::On { above: a.to_string(), below: b.to_string() },
                        });
                        tokens.push(Token::Sym {
                            claim: Claim::Attached { a: a.to_string(), b: b.to_string() },
                        });
                    }
                }
            }
            tokens.push(Token::Sym { claim: Claim::End });
        }
        tokens
    }
}

impl TokenModel for EnumerativeModel {
    fn propose(&mut self, state: &DecodeState, _step: usize) -> Vec<(Token, f64)> {
        let vocab = self.vocabulary(state);
        let p = 1.0 / vocab.len() as f64;
        vocab.into_iter().map(|t| (t, p)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    Greedy,
    Sample { seed: u64 },
}

/// What to do when every candidate is masked out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeadEndStrategy {
    Halt,
    /// Pop and locally ban the last token, bounded by the depth budget.
    Backtrack { depth: usize },
    Review,
    CapabilityGap,
}

impl Default for DeadEndStrategy {
    fn default() -> Self {
        DeadEndStrategy::Backtrack { depth: DEFAULT_BACKTRACK_DEPTH }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "outcome")]
pub enum DecodeOutcome {
    Completed,
    Halted { step: usize },
    Review { step: usize },
    Gap { gap: CapabilityGap },
    LengthCapped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step: usize,
    pub candidates: usize,
    pub masked_out: usize,
    pub chosen: Option<Token>,
    pub backtracked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeReport {
    pub tokens: Vec<Token>,
    pub outcome: DecodeOutcome,
    pub trace: Vec<StepTrace>,
}

pub struct Decoder {
    pub grid: Grid,
    pub selection: Selection,
    pub strategy: DeadEndStrategy,
    pub max_len: usize,
}

impl Decoder {
    pub fn new(grid: Grid) -> Self {
        Decoder {
            grid,
            selection: Selection::Greedy,
            strategy: DeadEndStrategy::default(),
            max_len: MAX_SEQUENCE_LEN,
        }
    }

    pub fn decode(&self, model: &mut dyn TokenModel) -> Result<DecodeReport> {
        let mut tokens: Vec<Token> = Vec::new();
        // Per-step locally banned tokens, parallel to `tokens`.
        let mut banned: Vec<Vec<Token>> = vec![Vec::new()];
        let mut trace = Vec::new();
        let mut backtracks_left = match self.strategy {
            DeadEndStrategy::Backtrack { depth } => depth,
            _ => 0,
        };
        let mut rng = match self.selection {
            Selection::Sample { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
            Selection::Greedy => None,
        };
        let mut just_backtracked = false;
        loop {
            let state = DecodeState::fold(self.grid, &tokens)?;
            if state.ended {
                return Ok(DecodeReport { tokens, outcome: DecodeOutcome::Completed, trace });
            }
            let step = tokens.len();
            if step >= self.max_len {
                return Ok(DecodeReport { tokens, outcome: DecodeOutcome::LengthCapped, trace });
            }
            let candidates = model.propose(&state, step);
            let p_h = if candidates.is_empty() {
                Vec::new()
            } else {
                masked_distribution(&state, &candidates, &banned[step])?
            };
            let mass: f64 = p_h.iter().sum();
            if candidates.is_empty() || mass == 0.0 {
                // Typed dead end.
                if backtracks_left > 0 && !tokens.is_empty() {
                    backtracks_left -= 1;
                    let popped = tokens.pop().expect("nonempty");
                    banned.pop();
                    banned
                        .last_mut()
                        .expect("root ban list persists")
                        .push(popped);
                    just_backtracked = true;
                    continue;
                }
                let outcome = match self.strategy {
                    DeadEndStrategy::Halt => DecodeOutcome::Halted { step },
                    DeadEndStrategy::Review => DecodeOutcome::Review { step },
                    DeadEndStrategy::Backtrack { .. } | DeadEndStrategy::CapabilityGap => {
                        DecodeOutcome::Gap {
                            gap: CapabilityGap {
                                gap_id: format!("gap.decode.{step}"),
                                kind: GapKind::MissingCandidate,
                                transaction_id: None,
                                detail: format!("no admissible continuation at step {step}"),
                            },
                        }
                    }
                };
                return Ok(DecodeReport { tokens, outcome, trace });
            }
            let masked_out = p_h.iter().filter(|p| **p == 0.0).count();
            let chosen_index = match &mut rng {
                None => {
                    // Greedy argmax; ties break to the first candidate.
                    p_h.iter()
                        .enumerate()
                        .max_by(|(ia, a), (ib, b)| {
                            a.partial_cmp(b)
                                .unwrap()
                                .then(ib.cmp(ia))
                        })
                        .map(|(i, _)| i)
                        .expect("nonempty")
                }
                Some(rng) => {
                    let draw: f64 = rng.gen_range(0.0..1.0);
                    let mut acc = 0.0;
                    let mut idx = 0;
                    for (i, p) in p_h.iter().enumerate() {
                        acc += p;
                        if draw < acc {
                            idx = i;
                            break;
                        }
                        if *p > 0.0 {
                            idx = i;
                        }
                    }
                    idx
                }
            };
            let token = candidates[chosen_index].0.clone();
            trace.push(StepTrace {
                step,
                candidates: candidates.len(),
                masked_out,
                chosen: Some(token.clone()),
                backtracked: just_backtracked,
            });
            just_backtracked = false;
            tokens.push(token);
            banned.push(Vec::new());
        }
    }
}
