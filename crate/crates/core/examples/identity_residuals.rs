//! Finite-difference residuals of the derivative identities along one shot.

use boundstate_lab::functionals::{identity_residuals, inner_probe_radius, probe_radii, Identity};
use boundstate_lab::verify::verification_controls;
use boundstate_lab::{detect_events, integrate, FieldParams, ProblemParams, StopPolicy};

pub fn main() {
    let field = FieldParams::new(4, 2.0).unwrap();
    let alpha = 5.0;
    let controls = verification_controls().with_r_max(12.0);
    let traj = integrate(&ProblemParams::new(field, alpha).with_controls(controls), StopPolicy::full_range()).unwrap();
    let portrait = detect_events(&traj).unwrap();
    let probes = probe_radii(&portrait, inner_probe_radius(&field, alpha), 11.5, 60);
    let report = identity_residuals(&traj, &Identity::all(), &probes).unwrap();
    for id in &report.identities {
        println!("{:<14} {:.2e}  (worst at r = {:.4})", id.identity, id.max_rel, id.worst_r);
    }
    println!("connection     {:.2e}", report.connection_max_rel);
}
