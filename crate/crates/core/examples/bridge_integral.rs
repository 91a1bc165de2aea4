//! The bridge integral on the first phase of bracket midpoints for n = 3, p < 2.
//! When the zero of v comes before b_1 the integration range is empty.

use boundstate_lab::functionals::bridge_integral;
use boundstate_lab::ladder::find_alpha_k;
use boundstate_lab::verify::verification_controls;
use boundstate_lab::{detect_events, integrate, FieldParams, ProblemParams, StopPolicy};

pub fn main() {
    let controls = verification_controls();
    for p in [1.2, 1.5, 1.8] {
        let field = FieldParams::new(3, p).unwrap();
        let alpha = find_alpha_k(&field, 1, 1e-12, &controls).unwrap().midpoint();
        let shot = ProblemParams::new(field, alpha).with_controls(controls.with_r_max(15.0));
        let traj = integrate(&shot, StopPolicy::full_range()).unwrap();
        let portrait = detect_events(&traj).unwrap();
        let bi = bridge_integral(&traj, &portrait, 1, None).unwrap();
        println!(
            "p = {p}: alpha = {alpha:.8}, b_1 = {:.5}, tau_1 = {:.5}, I_1 = {:.6e} ({:?})",
            bi.b, bi.tau, bi.value, bi.flag
        );
    }
}
