//! The model-native artifact lab: generated spatial artifacts with
//! geometry, symbolic structure, constraints, handles, provenance, and
//! uncertainty; runtime ingestion through a Level-4 transaction; handle
//! Jacobians with first-order validity; penalty-method latent repair; and
//! cycle-consistency disagreement across projection adapters.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::actuators::{gate_check, ActuatorInvocation, ArgValue, GateOutcome};
use crate::canonical;
use crate::effects::{EffectClaim, EffectKind};
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::scene::{
    Assertion, AssertionStatus, CapabilityGap, ClaimKind, EntityKind, EntityNode, EvidenceRecord,
    EvidenceSourceKind, FrameNode, GapKind, Geometry, MutationOp, MutationSet, Origin,
    ProvenanceTag, SceneSnapshot,
};
use crate::txn::{OutcomeKind, TxnKernel};

pub const ARTIFACT_FORMAT: &str = "hylos-artifact/1";

/// Per-kind geometric check tolerances.
pub const EPS_CONTACT: f64 = 1e-3;
pub const EPS_ALIGNMENT: f64 = 1e-3;

// ---------------------------------------------------------------------------
// Artifact types
// ---------------------------------------------------------------------------

/// A posed parametric primitive of the realization field, with per-element
/// provenance and uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactPart {
    pub part_id: String,
    pub center: Vec3,
    /// Full extents per axis.
    pub size: Vec3,
    pub uncertainty: f64,
    pub provenance: ProvenanceTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolicNode {
    pub node_id: String,
    /// Geometry part this node describes.
    pub describes: String,
    pub kind: EntityKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolicEdge {
    pub edge_id: String,
    pub kind: ClaimKind,
    pub subjects: (String, String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ConstraintKind {
    /// |gap| <= max along the axis.
    ContactDistance { max: f64 },
    /// gap >= min along the axis.
    ClearanceMin { min: f64 },
    /// |center offset| <= max along the axis.
    AlignmentOffset { max: f64 },
    /// Named check with no registered geometric checker.
    CustomCheck { name: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub constraint_id: String,
    pub constraint: ConstraintKind,
    pub subjects: (String, String),
    pub axis: crate::math::Axis,
}

/// An editable handle: a slice of the decoder latent with local constraints
/// it must preserve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Handle {
    pub handle_id: String,
    /// Latent indices this handle controls; dimension d = slice length.
    pub slice: Vec<usize>,
    /// Constraint ids the handle must preserve.
    pub local_constraints: Vec<String>,
    /// Step scale per dimension.
    pub step_scale: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedSpatialArtifact {
    pub artifact_id: String,
    pub geometry: Vec<ArtifactPart>,
    pub nodes: Vec<SymbolicNode>,
    pub edges: Vec<SymbolicEdge>,
    pub constraints: Vec<ConstraintSpec>,
    pub handles: Vec<Handle>,
}

impl GeneratedSpatialArtifact {
    pub fn part(&self, id: &str) -> Option<&ArtifactPart> {
        self.geometry.iter().find(|p| p.part_id == id)
    }

    pub fn validate(&self) -> Result<()> {
        for part in &self.geometry {
            if !(0.0..=1.0).contains(&part.uncertainty) {
                return Err(Error::MalformedArtifact(format!(
                    "part {} uncertainty out of [0,1]",
                    part.part_id
                )));
            }
            if !part.center.is_finite() || !part.size.is_finite() {
                return Err(Error::MalformedArtifact(format!(
                    "part {} has non-finite geometry",
                    part.part_id
                )));
            }
        }
        for node in &self.nodes {
            if self.part(&node.describes).is_none() {
                return Err(Error::MalformedArtifact(format!(
                    "node {} describes missing geometry {}",
                    node.node_id, node.describes
                )));
            }
        }
        for edge in &self.edges {
            for s in [&edge.subjects.0, &edge.subjects.1] {
                if !self.nodes.iter().any(|n| &n.node_id == s) {
                    return Err(Error::MalformedArtifact(format!(
                        "edge {} references missing node {s}",
                        edge.edge_id
                    )));
                }
            }
        }
        for c in &self.constraints {
            for s in [&c.subjects.0, &c.subjects.1] {
                if self.part(s).is_none() {
                    return Err(Error::MalformedArtifact(format!(
                        "constraint {} references missing part {s}",
                        c.constraint_id
                    )));
                }
            }
        }
        for h in &self.handles {
            if h.slice.len() != h.step_scale.len() {
                return Err(Error::MalformedArtifact(format!(
                    "handle {} slice/step length mismatch",
                    h.handle_id
                )));
            }
        }
        Ok(())
    }

    pub fn digest(&self) -> String {
        canonical::digest_of(self)
    }
}

pub fn to_artifact_string(artifact: &GeneratedSpatialArtifact) -> String {
    #[derive(Serialize)]
    struct File<'a> {
        format: &'a str,
        artifact: &'a GeneratedSpatialArtifact,
    }
    canonical::to_canonical_string(&File { format: ARTIFACT_FORMAT, artifact })
}

pub fn from_artifact_str(text: &str) -> Result<GeneratedSpatialArtifact> {
    #[derive(Deserialize)]
    struct File {
        format: String,
        artifact: GeneratedSpatialArtifact,
    }
    let file: File = serde_json::from_str(text)?;
    if file.format != ARTIFACT_FORMAT {
        return Err(Error::MalformedArtifact(format!(
            "unsupported artifact format: {}",
            file.format
        )));
    }
    file.artifact.validate()?;
    Ok(file.artifact)
}

// ---------------------------------------------------------------------------
// Geometric checks
// ---------------------------------------------------------------------------

fn part_pair<'a>(
    geometry: &'a [(String, Vec3, Vec3)],
    c: &ConstraintSpec,
) -> Result<(&'a (String, Vec3, Vec3), &'a (String, Vec3, Vec3))> {
    let find = |id: &str| {
        geometry
            .iter()
            .find(|(pid, _, _)| pid == id)
            .ok_or_else(|| Error::MalformedArtifact(format!("no part {id}")))
    };
    Ok((find(&c.subjects.0)?, find(&c.subjects.1)?))
}

pub fn has_checker(kind: &ConstraintKind) -> bool {
    !matches!(kind, ConstraintKind::CustomCheck { .. })
}

/// Hinge-form violation value: satisfied iff <= 0. Geometry is given as
/// (part id, center, size) triples so decoded states reuse the checks.
pub fn constraint_violation(
    geometry: &[(String, Vec3, Vec3)],
    c: &ConstraintSpec,
) -> Result<f64> {
    let ((_, ca, sa), (_, cb, sb)) = part_pair(geometry, c)?;
    let sep = ca.component(c.axis) - cb.component(c.axis);
    let half = (sa.component(c.axis) + sb.component(c.axis)) / 2.0;
    let gap = sep.abs() - half;
    Ok(match &c.constraint {
        ConstraintKind::ContactDistance { max } => gap.abs() - max,
        ConstraintKind::ClearanceMin { min } => min - gap,
        ConstraintKind::AlignmentOffset { max } => sep.abs() - max,
        ConstraintKind::CustomCheck { name } => {
            return Err(Error::MalformedArtifact(format!("no checker for {name}")))
        }
    })
}

fn artifact_geometry(artifact: &GeneratedSpatialArtifact) -> Vec<(String, Vec3, Vec3)> {
    artifact
        .geometry
        .iter()
        .map(|p| (p.part_id.clone(), p.center, p.size))
        .collect()
}

/// Geometric-symbolic consistency over the constraint set; `None` when the
/// artifact declares no checkable constraints (undefined, not 1.0).
pub fn gsc(artifact: &GeneratedSpatialArtifact) -> Result<Option<f64>> {
    let geometry = artifact_geometry(artifact);
    let checkable: Vec<&ConstraintSpec> = artifact
        .constraints
        .iter()
        .filter(|c| has_checker(&c.constraint))
        .collect();
    if checkable.is_empty() {
        return Ok(None);
    }
    let mut ok = 0usize;
    for c in &checkable {
        if constraint_violation(&geometry, c)? <= 0.0 {
            ok += 1;
        }
    }
    Ok(Some(ok as f64 / checkable.len() as f64))
}

// ---------------------------------------------------------------------------
// Toy decoder
// ---------------------------------------------------------------------------

/// One decoded box part: affine maps of the latent for center and size,
/// with optional smooth saturation on one center coordinate so the
/// Jacobian is non-constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartSpec {
    pub part_id: String,
    /// 3 x m weights.
    pub center_weights: Vec<Vec<f64>>,
    pub center_bias: Vec3,
    pub size_weights: Vec<Vec<f64>>,
    pub size_bias: Vec3,
    /// (center coordinate index, saturation scale s): c = s * tanh(a / s).
    pub saturation: Option<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyDecoder {
    pub latent_dim: usize,
    pub parts: Vec<PartSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedPart {
    pub part_id: String,
    pub center: Vec3,
    pub size: Vec3,
}

fn affine(weights: &[Vec<f64>], bias: Vec3, z: &[f64]) -> Vec3 {
    let row = |i: usize| -> f64 { weights[i].iter().zip(z).map(|(w, zi)| w * zi).sum() };
    Vec3::new(row(0), row(1), row(2)).add(bias)
}

impl ToyDecoder {
    pub fn decode(&self, z: &[f64]) -> Result<Vec<DecodedPart>> {
        if z.len() != self.latent_dim {
            return Err(Error::Other(format!(
                "latent dimension {} != {}",
                z.len(),
                self.latent_dim
            )));
        }
        let mut out = Vec::new();
        for part in &self.parts {
            let mut center = affine(&part.center_weights, part.center_bias, z);
            if let Some((coord, s)) = part.saturation {
                let axis = coord_axis(coord);
                let a = center.component(axis);
                center = center.with_component(axis, s * (a / s).tanh());
            }
            out.push(DecodedPart {
                part_id: part.part_id.clone(),
                center,
                size: affine(&part.size_weights, part.size_bias, z),
            });
        }
        Ok(out)
    }

    pub fn decoded_geometry(&self, z: &[f64]) -> Result<Vec<(String, Vec3, Vec3)>> {
        Ok(self
            .decode(z)?
            .iter()
            .map(|p| (p.part_id.clone(), p.center, p.size))
            .collect())
    }

    /// A surface point of a part: x(u; z) = center + u o size/2, u in
    /// [-1,1]^3.
    pub fn surface_point(&self, z: &[f64], part_index: usize, u: Vec3) -> Result<Vec3> {
        let decoded = self.decode(z)?;
        let p = decoded
            .get(part_index)
            .ok_or_else(|| Error::Other(format!("no part index {part_index}")))?;
        Ok(Vec3::new(
            p.center.x + u.x * p.size.x / 2.0,
            p.center.y + u.y * p.size.y / 2.0,
            p.center.z + u.z * p.size.z / 2.0,
        ))
    }

    /// Analytic 3 x m Jacobian of a surface point with respect to the full
    /// latent: d x_i / d z_k = d center_i / d z_k + (u_i / 2) d size_i / d z_k,
    /// with the saturation chain rule sech^2(a/s) on the saturated row.
    pub fn point_jacobian(&self, z: &[f64], part_index: usize, u: Vec3) -> Result<Vec<Vec<f64>>> {
        let part = self
            .parts
            .get(part_index)
            .ok_or_else(|| Error::Other(format!("no part index {part_index}")))?;
        let mut jac = vec![vec![0.0; self.latent_dim]; 3];
        let u_arr = [u.x, u.y, u.z];
        for (i, row) in jac.iter_mut().enumerate() {
            let sat_factor = match part.saturation {
                Some((coord, s)) if coord == i => {
                    let a = affine(&part.center_weights, part.center_bias, z)
                        .component(coord_axis(coord));
                    let t = (a / s).tanh();
                    1.0 - t * t
                }
                _ => 1.0,
            };
            for k in 0..self.latent_dim {
                row[k] = sat_factor * part.center_weights[i][k]
                    + u_arr[i] / 2.0 * part.size_weights[i][k];
            }
        }
        Ok(jac)
    }

    /// Jacobians of a part's center and size with respect to the latent.
    fn part_derivatives(&self, z: &[f64], part: &PartSpec) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut dc = part.center_weights.clone();
        if let Some((coord, s)) = part.saturation {
            let a = affine(&part.center_weights, part.center_bias, z).component(coord_axis(coord));
            let t = (a / s).tanh();
            let factor = 1.0 - t * t;
            for w in &mut dc[coord] {
                *w *= factor;
            }
        }
        (dc, part.size_weights.clone())
    }
}

fn coord_axis(coord: usize) -> crate::math::Axis {
    match coord {
        0 => crate::math::Axis::X,
        1 => crate::math::Axis::Y,
        _ => crate::math::Axis::Z,
    }
}

/// J_j(u; z): the 3 x d handle Jacobian — the point Jacobian restricted to
/// the handle's latent slice.
pub fn handle_jacobian(
    decoder: &ToyDecoder,
    z: &[f64],
    handle: &Handle,
    part_index: usize,
    u: Vec3,
) -> Result<Vec<Vec<f64>>> {
    let full = decoder.point_jacobian(z, part_index, u)?;
    Ok(full
        .iter()
        .map(|row| handle.slice.iter().map(|&k| row[k]).collect())
        .collect())
}

/// Applies a handle edit to the latent: z'[slice] = z[slice] + dh.
pub fn apply_edit(z: &[f64], handle: &Handle, dh: &[f64]) -> Vec<f64> {
    let mut out = z.to_vec();
    for (i, &k) in handle.slice.iter().enumerate() {
        out[k] += dh[i];
    }
    out
}

/// First-order handle validity: every local constraint evaluated on the
/// first-order-displaced geometry is satisfied.
pub fn handle_valid(
    decoder: &ToyDecoder,
    z: &[f64],
    handle: &Handle,
    dh: &[f64],
    constraints: &[ConstraintSpec],
) -> Result<bool> {
    let decoded = decoder.decode(z)?;
    let mut displaced = Vec::new();
    for (idx, part) in decoder.parts.iter().enumerate() {
        let (dc, ds) = decoder.part_derivatives(z, part);
        let shift = |rows: &[Vec<f64>]| -> Vec3 {
            let comp = |i: usize| -> f64 {
                handle
                    .slice
                    .iter()
                    .enumerate()
                    .map(|(j, &k)| rows[i][k] * dh[j])
                    .sum()
            };
            Vec3::new(comp(0), comp(1), comp(2))
        };
        displaced.push((
            decoded[idx].part_id.clone(),
            decoded[idx].center.add(shift(&dc)),
            decoded[idx].size.add(shift(&ds)),
        ));
    }
    for cid in &handle.local_constraints {
        let c = constraints
            .iter()
            .find(|c| &c.constraint_id == cid)
            .ok_or_else(|| Error::MalformedArtifact(format!("no constraint {cid}")))?;
        if constraint_violation(&displaced, c)? > 0.0 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Handle invariant preservation over the fixed edit grid
/// {±0.5, ±1.0}·step per dimension, judged on the full nonlinear
/// re-decode. `None` when the handle set is empty (undefined).
pub fn gamma_hip(
    decoder: &ToyDecoder,
    z: &[f64],
    handles: &[Handle],
    constraints: &[ConstraintSpec],
) -> Result<Option<f64>> {
    if handles.is_empty() {
        return Ok(None);
    }
    let mut total = 0usize;
    let mut preserved = 0usize;
    for handle in handles {
        for dim in 0..handle.slice.len() {
            for mult in [-1.0, -0.5, 0.5, 1.0] {
                let mut dh = vec![0.0; handle.slice.len()];
                dh[dim] = mult * handle.step_scale[dim];
                let edited = apply_edit(z, handle, &dh);
                let geometry = decoder.decoded_geometry(&edited)?;
                let mut ok = true;
                for cid in &handle.local_constraints {
                    let c = constraints
                        .iter()
                        .find(|c| &c.constraint_id == cid)
                        .ok_or_else(|| {
                            Error::MalformedArtifact(format!("no constraint {cid}"))
                        })?;
                    if constraint_violation(&geometry, c)? > 0.0 {
                        ok = false;
                        break;
                    }
                }
                total += 1;
                if ok {
                    preserved += 1;
                }
            }
        }
    }
    Ok(Some(preserved as f64 / total as f64))
}

// ---------------------------------------------------------------------------
// Latent repair
// ---------------------------------------------------------------------------

pub struct RepairProblem<'a> {
    pub decoder: &'a ToyDecoder,
    /// Target part centers, flattened [x0,y0,z0, x1,...] — the preserved
    /// intent.
    pub target: Vec<f64>,
    pub violations: Vec<ConstraintSpec>,
    pub lambda: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairTrace {
    pub objective: Vec<f64>,
    pub final_violations: Vec<f64>,
    pub iterations: usize,
}

const REPAIR_MAX_ITERS: usize = 500;
const REPAIR_INIT_STEP: f64 = 0.1;
const REPAIR_SHRINK: f64 = 0.5;
const REPAIR_ARMIJO: f64 = 1e-4;
const REPAIR_GRAD_TOL: f64 = 1e-8;
const REPAIR_DECREASE_TOL: f64 = 1e-12;

fn repair_objective(problem: &RepairProblem, z0: &[f64], z: &[f64]) -> Result<f64> {
    let decoded = problem.decoder.decode(z)?;
    let mut task = 0.0;
    for (i, p) in decoded.iter().enumerate() {
        for (j, c) in [p.center.x, p.center.y, p.center.z].iter().enumerate() {
            let idx = 3 * i + j;
            if idx < problem.target.len() {
                task += (c - problem.target[idx]).powi(2);
            }
        }
    }
    let geometry: Vec<(String, Vec3, Vec3)> = decoded
        .iter()
        .map(|p| (p.part_id.clone(), p.center, p.size))
        .collect();
    let mut penalty = 0.0;
    for c in &problem.violations {
        let v = constraint_violation(&geometry, c)?;
        penalty += v.max(0.0).powi(2);
    }
    let prox: f64 = z.iter().zip(z0).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(task + problem.lambda * penalty + problem.beta * prox)
}

fn repair_gradient(problem: &RepairProblem, z0: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    let m = problem.decoder.latent_dim;
    let decoded = problem.decoder.decode(z)?;
    let mut grad = vec![0.0; m];
    // Task term: 2 (c_i - y_i) dc_i/dz.
    for (i, (spec, p)) in problem.decoder.parts.iter().zip(&decoded).enumerate() {
        let (dc, _) = problem.decoder.part_derivatives(z, spec);
        for (j, c) in [p.center.x, p.center.y, p.center.z].iter().enumerate() {
            let idx = 3 * i + j;
            if idx < problem.target.len() {
                let diff = 2.0 * (c - problem.target[idx]);
                for k in 0..m {
                    grad[k] += diff * dc[j][k];
                }
            }
        }
    }
    // Penalty term: 2 lambda max(0, v) dv/dz; piecewise-smooth via sign
    // subgradients on the absolute values.
    let geometry: Vec<(String, Vec3, Vec3)> = decoded
        .iter()
        .map(|p| (p.part_id.clone(), p.center, p.size))
        .collect();
    for c in &problem.violations {
        let v = constraint_violation(&geometry, c)?;
        if v <= 0.0 {
            continue;
        }
        let axis = c.axis;
        let coord = match axis {
            crate::math::Axis::X => 0,
            crate::math::Axis::Y => 1,
            crate::math::Axis::Z => 2,
        };
        let index_of = |id: &str| decoded.iter().position(|p| p.part_id == id);
        let (ia, ib) = match (index_of(&c.subjects.0), index_of(&c.subjects.1)) {
            (Some(a), Some(b)) => (a, b),
            _ => continue,
        };
        let sep = decoded[ia].center.component(axis) - decoded[ib].center.component(axis);
        let (dca, dsa) = problem.decoder.part_derivatives(z, &problem.decoder.parts[ia]);
        let (dcb, dsb) = problem.decoder.part_derivatives(z, &problem.decoder.parts[ib]);
        for k in 0..m {
            let dsep = dca[coord][k] - dcb[coord][k];
            let dhalf = (dsa[coord][k] + dsb[coord][k]) / 2.0;
            let dgap = sep.signum() * dsep - dhalf;
            let gap = sep.abs()
                - (decoded[ia].size.component(axis) + decoded[ib].size.component(axis)) / 2.0;
            let dv = match &c.constraint {
                ConstraintKind::ContactDistance { .. } => gap.signum() * dgap,
                ConstraintKind::ClearanceMin { .. } => -dgap,
                ConstraintKind::AlignmentOffset { .. } => sep.signum() * dsep,
                ConstraintKind::CustomCheck { .. } => 0.0,
            };
            grad[k] += 2.0 * problem.lambda * v * dv;
        }
    }
    for k in 0..m {
        grad[k] += 2.0 * problem.beta * (z[k] - z0[k]);
    }
    Ok(grad)
}

/// Penalty-method latent repair: gradient descent with Armijo backtracking.
/// Returns the repaired latent and the (non-increasing) objective trace.
/// The repaired artifact still must pass ingestion before commit.
pub fn latent_repair(problem: &RepairProblem, z0: &[f64]) -> Result<(Vec<f64>, RepairTrace)> {
    let mut z = z0.to_vec();
    let mut f = repair_objective(problem, z0, &z)?;
    if !f.is_finite() {
        return Err(Error::NonFinite(0));
    }
    let mut trace = vec![f];
    let mut iterations = 0;
    for iter in 0..REPAIR_MAX_ITERS {
        iterations = iter + 1;
        let grad = repair_gradient(problem, z0, &z)?;
        let gnorm: f64 = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm <= REPAIR_GRAD_TOL {
            break;
        }
        let mut step = REPAIR_INIT_STEP;
        let mut accepted = false;
        while step > 1e-16 {
            let candidate: Vec<f64> = z.iter().zip(&grad).map(|(zi, g)| zi - step * g).collect();
            let fc = repair_objective(problem, z0, &candidate)?;
            if !fc.is_finite() {
                return Err(Error::NonFinite(iter));
            }
            if fc <= f - REPAIR_ARMIJO * step * gnorm * gnorm {
                let decrease = f - fc;
                z = candidate;
                f = fc;
                trace.push(f);
                accepted = true;
                if decrease <= REPAIR_DECREASE_TOL {
                    let t = finish_trace(problem, &z, trace, iter + 1)?;
                    return Ok((z, t));
                }
                break;
            }
            step *= REPAIR_SHRINK;
        }
        if !accepted {
            break;
        }
    }
    let trace = finish_trace(problem, &z, trace, iterations)?;
    Ok((z, trace))
}

fn finish_trace(
    problem: &RepairProblem,
    z: &[f64],
    objective: Vec<f64>,
    iterations: usize,
) -> Result<RepairTrace> {
    let geometry = problem.decoder.decoded_geometry(z)?;
    let mut final_violations = Vec::new();
    for c in &problem.violations {
        final_violations.push(constraint_violation(&geometry, c)?.max(0.0));
    }
    Ok(RepairTrace { objective, final_violations, iterations })
}

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub outcome: OutcomeKind,
    pub detail: String,
    pub gap: Option<CapabilityGap>,
    pub chi_gsc: Option<f64>,
}

fn constraint_claim_kind(kind: &ConstraintKind) -> ClaimKind {
    match kind {
        ConstraintKind::ContactDistance { .. } => ClaimKind::Support,
        ConstraintKind::ClearanceMin { .. } => ClaimKind::Clearance,
        ConstraintKind::AlignmentOffset { .. } => ClaimKind::Alignment,
        ConstraintKind::CustomCheck { .. } => ClaimKind::Access,
    }
}

/// Runtime ingestion Φ: grounds the artifact into the scene graph through a
/// Level-4 transaction. Outcomes: committed snapshot, review (contradicted
/// claims), or a missing-verification capability gap (checker-less
/// constraint kind). Never commits a supported assertion without a passing
/// check behind it.
pub fn ingest(
    kernel: &mut TxnKernel,
    snapshot: &SceneSnapshot,
    artifact: &GeneratedSpatialArtifact,
) -> Result<(SceneSnapshot, IngestReport)> {
    artifact.validate()?;

    // A constraint kind without a registered checker is a typed missing
    // layer, recorded before any geometry moves.
    if let Some(c) = artifact.constraints.iter().find(|c| !has_checker(&c.constraint)) {
        let gap = CapabilityGap {
            gap_id: format!("gap.ingest.{}", artifact.artifact_id),
            kind: GapKind::MissingVerification,
            transaction_id: None,
            detail: format!("constraint {} has no registered checker", c.constraint_id),
        };
        let next = kernel.apply_presentation(
            snapshot,
            &MutationSet::single(MutationOp::AddCapabilityGap { gap: gap.clone() }),
        )?;
        return Ok((
            next,
            IngestReport {
                outcome: OutcomeKind::CapabilityGap,
                detail: gap.detail.clone(),
                gap: Some(gap),
                chi_gsc: gsc(artifact).ok().flatten(),
            },
        ));
    }

    let geometry = artifact_geometry(artifact);
    let mut mutation = MutationSet::default();
    let mut seq = snapshot.next_evidence_sequence();
    let provenance = |created_at: u64| ProvenanceTag {
        origin: Origin::Model,
        source_ref: Some(artifact.artifact_id.clone()),
        created_at,
    };
    for (i, part) in artifact.geometry.iter().enumerate() {
        let frame_id = format!("frame.{}", part.part_id);
        mutation.ops.push(MutationOp::AddFrame {
            frame: FrameNode {
                frame_id: frame_id.clone(),
                owner: None,
                parent: None,
                translation: part.center,
                rotation: crate::math::Quat::IDENTITY,
                provenance: provenance(i as u64),
            },
        });
    }
    for node in &artifact.nodes {
        let part = artifact.part(&node.describes).expect("validated");
        mutation.ops.push(MutationOp::AddEntity {
            entity: EntityNode {
                entity_id: node.node_id.clone(),
                kind: node.kind,
                parent: None,
                pose_frame: format!("frame.{}", part.part_id),
                geometry: Geometry::Box { w: part.size.x, h: part.size.y, d: part.size.z },
                uncertainty: part.uncertainty,
                provenance: provenance(0),
            },
        });
    }

    // Constraints become assertions; supported status requires a passing
    // geometric check, recorded as evidence.
    let mut predicted = Vec::new();
    let mut observed = Vec::new();
    for c in &artifact.constraints {
        let violation = constraint_violation(&geometry, c)?;
        let passes = violation <= 0.0;
        let evidence_id = format!("ev.check.{}", c.constraint_id);
        mutation.ops.push(MutationOp::AddEvidence {
            record: EvidenceRecord {
                evidence_id: evidence_id.clone(),
                source_kind: EvidenceSourceKind::Measurement,
                payload: [("violation".to_string(), violation)].into(),
                subject_refs: vec![c.subjects.0.clone(), c.subjects.1.clone()],
                confidence: 0.99,
                sequence: seq,
            },
        });
        seq += 1;
        let node_for = |part_id: &str| {
            artifact
                .nodes
                .iter()
                .find(|n| n.describes == part_id)
                .map(|n| n.node_id.clone())
                .unwrap_or_else(|| part_id.to_string())
        };
        mutation.ops.push(MutationOp::AddAssertion {
            assertion: Assertion {
                assertion_id: format!("assert.{}", c.constraint_id),
                kind: constraint_claim_kind(&c.constraint),
                subjects: vec![node_for(&c.subjects.0), node_for(&c.subjects.1)],
                parameters: [("violation".to_string(), violation)].into(),
                status: if passes { AssertionStatus::Supported } else { AssertionStatus::Unresolved },
                evidence_refs: [evidence_id].into(),
            },
        });
        // Effect contract of ingestion: every constraint's hinge violation
        // is predicted zero; the audit observes the measured value.
        predicted.push(EffectClaim {
            kind: EffectKind::Clearance,
            subjects: vec![c.constraint_id.clone()],
            quantity: Some(0.0),
            flag: None,
            verifier: Some("constraint-check".into()),
        });
        observed.push(EffectClaim {
            kind: EffectKind::Clearance,
            subjects: vec![c.constraint_id.clone()],
            quantity: Some(violation.max(0.0)),
            flag: None,
            verifier: Some("constraint-check".into()),
        });
    }

    // Level-4 transaction: ingestion record plus review, routed through the
    // kernel so the lifecycle is logged like any other edit.
    let lowered = mutation.clone();
    kernel.register_lowerer(
        "ingest_artifact",
        Box::new(move |_, _, _| Ok(lowered.clone())),
    );
    let mut invocation = ActuatorInvocation::new(
        &format!("inv.ingest.{}", artifact.artifact_id),
        "ingest_artifact",
        Origin::Model,
        4,
    )
    .with_arg("artifact", ArgValue::Text(artifact.artifact_id.clone()));
    invocation.review_flag = true;
    invocation.ingestion_record = Some(format!("ingest.{}", artifact.digest()));

    let mut txn = kernel.propose(snapshot, &invocation)?;
    txn.predicted_effects = predicted.clone();
    match gate_check(&invocation, snapshot, &kernel.registry)? {
        GateOutcome::Pass => {}
        GateOutcome::Gated { reason } => {
            return Ok((
                snapshot.clone(),
                IngestReport {
                    outcome: OutcomeKind::Gated,
                    detail: reason,
                    gap: None,
                    chi_gsc: gsc(artifact)?,
                },
            ))
        }
    }
    kernel.lower(snapshot, &mut txn)?;
    let candidate = kernel.realize(snapshot, &txn)?;
    let diff = crate::effects::compute_diff(&predicted, &observed, &kernel.tolerances);
    let (next, report) = kernel.finalize(snapshot, candidate, &txn, diff)?;
    Ok((
        next,
        IngestReport {
            outcome: report.outcome,
            detail: report.detail,
            gap: None,
            chi_gsc: gsc(artifact)?,
        },
    ))
}

// ---------------------------------------------------------------------------
// Cycle consistency
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdapterKind {
    /// Flat posed-primitive view; contacts recovered from geometry.
    Display,
    /// Simulation stub: primitives plus explicit contact pairs.
    ContactList,
    /// Constructed-loss adapter: contact list with the first edge dropped.
    DropFirstEdge,
}

/// Intended operability structure Op(A): entities, contact edges, and one
/// support frame per entity.
#[derive(Debug, Clone, PartialEq)]
pub struct OperabilityStructure {
    pub entities: Vec<String>,
    pub edges: Vec<(String, String)>,
    pub frames: Vec<(String, Vec3)>,
}

impl OperabilityStructure {
    pub fn size(&self) -> usize {
        self.entities.len() + self.edges.len() + self.frames.len()
    }
}

pub fn intended_structure(artifact: &GeneratedSpatialArtifact) -> OperabilityStructure {
    let mut entities: Vec<String> = artifact.nodes.iter().map(|n| n.node_id.clone()).collect();
    entities.sort();
    let mut edges: Vec<(String, String)> = artifact
        .edges
        .iter()
        .map(|e| ordered_pair(&e.subjects.0, &e.subjects.1))
        .collect();
    edges.sort();
    let mut frames: Vec<(String, Vec3)> = artifact
        .nodes
        .iter()
        .filter_map(|n| artifact.part(&n.describes).map(|p| (n.node_id.clone(), p.center)))
        .collect();
    frames.sort_by(|a, b| a.0.cmp(&b.0));
    OperabilityStructure { entities, edges, frames }
}

fn ordered_pair(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

fn node_of_part(artifact: &GeneratedSpatialArtifact, part_id: &str) -> String {
    artifact
        .nodes
        .iter()
        .find(|n| n.describes == part_id)
        .map(|n| n.node_id.clone())
        .unwrap_or_else(|| part_id.to_string())
}

/// Recovered structure after a projection round-trip Ψ(Π_j(A)).
fn recover(artifact: &GeneratedSpatialArtifact, adapter: AdapterKind) -> OperabilityStructure {
    let geometry = artifact_geometry(artifact);
    let mut entities: Vec<String> = artifact
        .geometry
        .iter()
        .map(|p| node_of_part(artifact, &p.part_id))
        .collect();
    entities.sort();
    let mut frames: Vec<(String, Vec3)> = artifact
        .geometry
        .iter()
        .map(|p| (node_of_part(artifact, &p.part_id), p.center))
        .collect();
    frames.sort_by(|a, b| a.0.cmp(&b.0));
    let mut edges: Vec<(String, String)> = match adapter {
        AdapterKind::Display => {
            // Geometric recovery: contact wherever boxes touch within the
            // contact tolerance on some axis and overlap on the others.
            let mut found = Vec::new();
            for i in 0..geometry.len() {
                for j in (i + 1)..geometry.len() {
                    if boxes_in_contact(&geometry[i], &geometry[j]) {
                        found.push(ordered_pair(
                            &node_of_part(artifact, &geometry[i].0),
                            &node_of_part(artifact, &geometry[j].0),
                        ));
                    }
                }
            }
            found
        }
        AdapterKind::ContactList => artifact
            .edges
            .iter()
            .map(|e| ordered_pair(&e.subjects.0, &e.subjects.1))
            .collect(),
        AdapterKind::DropFirstEdge => {
            let mut all: Vec<(String, String)> = artifact
                .edges
                .iter()
                .map(|e| ordered_pair(&e.subjects.0, &e.subjects.1))
                .collect();
            all.sort();
            if !all.is_empty() {
                all.remove(0);
            }
            all
        }
    };
    edges.sort();
    OperabilityStructure { entities, edges, frames }
}

fn boxes_in_contact(a: &(String, Vec3, Vec3), b: &(String, Vec3, Vec3)) -> bool {
    let mut touching_axes = 0;
    let mut overlapping_axes = 0;
    for axis in [crate::math::Axis::X, crate::math::Axis::Y, crate::math::Axis::Z] {
        let sep = (a.1.component(axis) - b.1.component(axis)).abs();
        let half = (a.2.component(axis) + b.2.component(axis)) / 2.0;
        let gap = sep - half;
        if gap.abs() <= EPS_CONTACT {
            touching_axes += 1;
        } else if gap < 0.0 {
            overlapping_axes += 1;
        }
    }
    touching_axes >= 1 && touching_axes + overlapping_axes == 3
}

/// Count-based disagreement d(Ψ(Π_j(A)), Op(A)), normalized by |Op(A)|:
/// mismatched entities + mismatched contact edges + frames differing beyond
/// the length tolerance.
pub fn cycle_disagreement(
    artifact: &GeneratedSpatialArtifact,
    adapters: &[AdapterKind],
) -> Result<BTreeMap<String, f64>> {
    artifact.validate()?;
    let intended = intended_structure(artifact);
    if intended.size() == 0 {
        return Err(Error::MalformedArtifact("empty operability structure".into()));
    }
    let mut out = BTreeMap::new();
    for adapter in adapters {
        let recovered = recover(artifact, *adapter);
        let mut mismatches = 0usize;
        mismatches += symmetric_diff(&intended.entities, &recovered.entities);
        mismatches += symmetric_diff(&intended.edges, &recovered.edges);
        for (id, center) in &intended.frames {
            match recovered.frames.iter().find(|(rid, _)| rid == id) {
                Some((_, rcenter)) if center.sub(*rcenter).norm() <= EPS_ALIGNMENT => {}
                _ => mismatches += 1,
            }
        }
        out.insert(
            format!("{adapter:?}").to_lowercase(),
            mismatches as f64 / intended.size() as f64,
        );
    }
    Ok(out)
}

fn symmetric_diff<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    a.iter().filter(|x| !b.contains(x)).count() + b.iter().filter(|x| !a.contains(x)).count()
}

// ---------------------------------------------------------------------------
// Fixtures
// ---------------------------------------------------------------------------

/// The consistent two-part fixture: a tray resting centered on a body, with
/// contact and alignment constraints that all hold.
pub fn fixture_artifact() -> GeneratedSpatialArtifact {
    let provenance = ProvenanceTag {
        origin: Origin::Model,
        source_ref: Some("artifact.fixture".into()),
        created_at: 0,
    };
    GeneratedSpatialArtifact {
        artifact_id: "artifact.fixture".into(),
        geometry: vec![
            ArtifactPart {
                part_id: "part.body".into(),
                center: Vec3::ZERO,
                size: Vec3::new(0.4, 0.2, 0.3),
                uncertainty: 0.1,
                provenance: provenance.clone(),
            },
            ArtifactPart {
                part_id: "part.tray".into(),
                center: Vec3::new(0.0, 0.11, 0.0),
                size: Vec3::new(0.1, 0.02, 0.1),
                uncertainty: 0.2,
                provenance,
            },
        ],
        nodes: vec![
            SymbolicNode {
                node_id: "art.body".into(),
                describes: "part.body".into(),
                kind: EntityKind::Body,
            },
            SymbolicNode {
                node_id: "art.tray".into(),
                describes: "part.tray".into(),
                kind: EntityKind::Tray,
            },
        ],
        edges: vec![SymbolicEdge {
            edge_id: "edge.support".into(),
            kind: ClaimKind::Support,
            subjects: ("art.tray".into(), "art.body".into()),
        }],
        constraints: vec![
            ConstraintSpec {
                constraint_id: "con.contact".into(),
                constraint: ConstraintKind::ContactDistance { max: EPS_CONTACT },
                subjects: ("part.tray".into(), "part.body".into()),
                axis: crate::math::Axis::Y,
            },
            ConstraintSpec {
                constraint_id: "con.align-x".into(),
                constraint: ConstraintKind::AlignmentOffset { max: EPS_ALIGNMENT },
                subjects: ("part.tray".into(), "part.body".into()),
                axis: crate::math::Axis::X,
            },
            ConstraintSpec {
                constraint_id: "con.align-z".into(),
                constraint: ConstraintKind::AlignmentOffset { max: EPS_ALIGNMENT },
                subjects: ("part.tray".into(), "part.body".into()),
                axis: crate::math::Axis::Z,
            },
        ],
        handles: Vec::new(),
    }
}

/// The 1-D clearance repair fixture: a latent-driven part at x = 0.009
/// violating a 0.01 clearance from a wall face at x = 0.001. Returns the
/// decoder, constraints, starting latent, and task target.
pub fn clearance_fixture() -> (ToyDecoder, Vec<ConstraintSpec>, Vec<f64>, Vec<f64>) {
    let decoder = ToyDecoder {
        latent_dim: 1,
        parts: vec![
            PartSpec {
                part_id: "part".into(),
                center_weights: vec![vec![1.0], vec![0.0], vec![0.0]],
                center_bias: Vec3::ZERO,
                size_weights: vec![vec![0.0]; 3],
                size_bias: Vec3::new(0.002, 0.002, 0.002),
                saturation: None,
            },
            PartSpec {
                part_id: "wall".into(),
                center_weights: vec![vec![0.0]; 3],
                center_bias: Vec3::ZERO,
                size_weights: vec![vec![0.0]; 3],
                size_bias: Vec3::ZERO,
                saturation: None,
            },
        ],
    };
    let violations = vec![ConstraintSpec {
        constraint_id: "con.clear".into(),
        constraint: ConstraintKind::ClearanceMin { min: 0.01 },
        subjects: ("part".into(), "wall".into()),
        axis: crate::math::Axis::X,
    }];
    (decoder, violations, vec![0.009], vec![0.009, 0.0, 0.0])
}

/// The fixture decoder: a static body and a latent-driven tray with a
/// saturated x coordinate, so the Jacobian is non-constant.
pub fn fixture_decoder() -> ToyDecoder {
    ToyDecoder {
        latent_dim: 4,
        parts: vec![
            PartSpec {
                part_id: "part.body".into(),
                center_weights: vec![vec![0.0; 4]; 3],
                center_bias: Vec3::ZERO,
                size_weights: vec![vec![0.0; 4]; 3],
                size_bias: Vec3::new(0.4, 0.2, 0.3),
                saturation: None,
            },
            PartSpec {
                part_id: "part.tray".into(),
                center_weights: vec![
                    vec![1.0, 0.0, 0.0, 0.0],
                    vec![0.0, 0.05, 0.0, 0.0],
                    vec![0.0, 0.0, 1.0, 0.0],
                ],
                center_bias: Vec3::new(0.0, 0.11, 0.0),
                size_weights: vec![
                    vec![0.0, 0.0, 0.0, 0.02],
                    vec![0.0; 4],
                    vec![0.0; 4],
                ],
                size_bias: Vec3::new(0.1, 0.02, 0.1),
                saturation: Some((0, 0.5)),
            },
        ],
    }
}
