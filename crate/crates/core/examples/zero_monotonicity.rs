//! The first zero of u moves inward as the initial value grows.

use boundstate_lab::ladder::{linspace, zero_monotonicity_scan};
use boundstate_lab::{FieldParams, IntegratorControls};

pub fn main() {
    let field = FieldParams::new(3, 3.0).unwrap();
    let scan = zero_monotonicity_scan(&field, &linspace(6.0, 40.0, 12), 1, &IntegratorControls::default()).unwrap();
    for (alpha, z) in &scan.points {
        println!("alpha = {alpha:>9.4}  z_1 = {}", z.map(|z| format!("{z:.8}")).unwrap_or_else(|| "-".into()));
    }
    println!("strictly decreasing: {}", scan.decreasing);
}
