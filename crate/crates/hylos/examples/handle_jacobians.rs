//! Handle Jacobians on the toy decoder: analytic sensitivities, a
//! finite-difference cross-check, first-order edit validity, and the
//! handle-preservation score over the fixed edit grid.

use hylos::artifact::{
    fixture_artifact, fixture_decoder, gamma_hip, handle_jacobian, handle_valid, Handle,
};
use hylos::math::Vec3;

fn main() -> hylos::Result<()> {
    let decoder = fixture_decoder();
    let z = vec![0.2, 0.0, 0.0, 0.0];
    let u = Vec3::new(1.0, 0.0, 0.0); // right face of the tray

    let handle = Handle {
        handle_id: "h.tray-x".into(),
        slice: vec![0],
        local_constraints: vec!["con.align-x".into()],
        step_scale: vec![0.0005],
    };
    let jac = handle_jacobian(&decoder, &z, &handle, 1, u)?;
    println!("analytic handle Jacobian at z0 = 0.2: {jac:?}");

    // Finite-difference cross-check on the saturated coordinate.
    let h = 1e-5;
    let xp = decoder.surface_point(&[z[0] + h, 0.0, 0.0, 0.0], 1, u)?;
    let xm = decoder.surface_point(&[z[0] - h, 0.0, 0.0, 0.0], 1, u)?;
    println!("central difference:                  {:.9}", (xp.x - xm.x) / (2.0 * h));

    // First-order validity against the artifact's alignment constraint:
    // small edits stay inside, large ones break out.
    let constraints = fixture_artifact().constraints;
    for dh in [0.0, 0.0005, 0.5] {
        println!(
            "edit dh = {dh:<7}: valid = {}",
            handle_valid(&decoder, &[0.0; 4], &handle, &[dh], &constraints)?
        );
    }

    // Preservation over the fixed {±0.5, ±1.0}·step grid.
    let score = gamma_hip(&decoder, &[0.0; 4], &[handle], &constraints)?;
    println!("handle preservation over the edit grid: {score:?}");
    Ok(())
}
