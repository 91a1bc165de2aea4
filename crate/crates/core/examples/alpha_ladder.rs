//! Brackets the initial values of the first bound states and checks the
//! node-count jump just above each bracket.

use boundstate_lab::ladder::{compute_ladder, node_count_of_alpha};
use boundstate_lab::{FieldParams, IntegratorControls};

pub fn main() {
    let field = FieldParams::new(3, 3.0).unwrap();
    let controls = IntegratorControls::default();
    let ladder = compute_ladder(&field, &[0, 1, 2, 3], 1e-10, &controls).unwrap();
    for e in &ladder.entries {
        let above = node_count_of_alpha(&field, e.alpha_hi + 1e-4 * e.midpoint(), &controls).unwrap();
        println!(
            "k={}  [{:.12}, {:.12}]  {} evaluations, N just above = {}",
            e.k, e.alpha_lo, e.alpha_hi, e.evaluations, above.count
        );
    }
}
