//! Functional traces along a shot in CSV, then the Pohozaev-type quantities
//! at a few radii.

use boundstate_lab::functionals::eval_aux;
use boundstate_lab::io::write_functionals_csv;
use boundstate_lab::{integrate, FieldParams, IntegratorControls, ProblemParams, StopPolicy};

pub fn main() {
    let field = FieldParams::new(3, 3.0).unwrap();
    let controls = IntegratorControls { r_max: 8.0, ..Default::default() };
    let traj = integrate(&ProblemParams::new(field, 8.0).with_controls(controls), StopPolicy::full_range()).unwrap();

    let mut csv = Vec::new();
    write_functionals_csv(&traj, &mut csv).unwrap();
    println!("{} bytes of CSV, header:", csv.len());
    println!("{}", String::from_utf8_lossy(&csv).lines().next().unwrap());

    for r in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let a = eval_aux(&traj, r).unwrap();
        println!("r = {r:<4}  E = {:>12.5e}  P = {:>12.5e}  Q = {:>12.5e}  M = {:>12.5e}", a.e, a.p, a.q, a.m);
    }
}
