//! The two amplitude thresholds for a few `(n, p)` pairs.

use boundstate_lab::FieldParams;

pub fn main() {
    for (n, p) in [(3, 3.0), (3, 1.5), (4, 2.0), (5, 1.5), (10, 1.1)] {
        let fp = FieldParams::new(n, p).expect("subcritical");
        let a = fp.critical_amplitudes();
        println!("n={n:<2} p={p:<4} alpha_* = {:.10}  alpha^* = {:.10}", a.alpha_lower, a.alpha_upper);
    }
    match FieldParams::new(3, 5.0) {
        Ok(_) => unreachable!(),
        Err(e) => println!("n=3 p=5 rejected: {e}"),
    }
}
