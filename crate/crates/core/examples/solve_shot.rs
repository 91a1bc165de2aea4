//! Integrates one shot, prints its phase labels and the first CSV rows.

use boundstate_lab::io::write_trajectory_csv;
use boundstate_lab::{detect_events, integrate, FieldParams, IntegratorControls, ProblemParams, StopPolicy};

pub fn main() {
    let field = FieldParams::new(3, 3.0).unwrap();
    let controls = IntegratorControls { r_max: 20.0, ..Default::default() };
    let traj = integrate(&ProblemParams::new(field, 20.0).with_controls(controls), StopPolicy::classify()).unwrap();
    println!("{} samples, stopped by {:?} at r = {:.6}", traj.samples.len(), traj.termination.cause, traj.r_stop());

    let portrait = detect_events(&traj).unwrap();
    for ph in &portrait.phases {
        println!(
            "phase {}: start {:.5} b {:?} r {:?} z {:?} rbar {:?} bbar {:?} end {:?}",
            ph.index, ph.start, ph.b, ph.r, ph.z, ph.r_bar, ph.b_bar, ph.end
        );
    }

    let mut csv = Vec::new();
    write_trajectory_csv(&traj, &mut csv).unwrap();
    for line in String::from_utf8(csv).unwrap().lines().take(4) {
        println!("{line}");
    }
}
