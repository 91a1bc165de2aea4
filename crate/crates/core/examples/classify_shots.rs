//! Classifies a handful of initial values, including one just inside the
//! first ladder bracket.

use boundstate_lab::ladder::{classify, find_alpha_k};
use boundstate_lab::{FieldParams, IntegratorControls, ProblemParams};

pub fn main() {
    let field = FieldParams::new(3, 3.0).unwrap();
    let controls = IntegratorControls::default();
    let k1 = find_alpha_k(&field, 1, 1e-10, &controls).unwrap();
    for alpha in [0.5, 1.0, 3.0, 6.0, 20.0, k1.midpoint()] {
        let class = classify(&ProblemParams::new(field, alpha).with_controls(controls)).unwrap();
        let stop = class.witness().map(|w| format!("{:?} at r = {:.4}", w.termination, w.r_stop)).unwrap_or_default();
        println!("alpha = {alpha:<20} {}({})  {stop}", class.tag(), class.node_count());
    }
}
