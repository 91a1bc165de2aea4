//! Zeros of u and of its variation v on bracket midpoints: they alternate,
//! and v picks up one extra zero after the last critical point.

use boundstate_lab::verify::{prepare_case, CaseFamily, VerificationCase, VerificationPlan};
use boundstate_lab::FieldParams;

pub fn main() {
    let field = FieldParams::new(3, 3.0).unwrap();
    for k in 1..=3 {
        let case = VerificationCase { field, family: CaseFamily::BoundBracket(k) };
        let plan = VerificationPlan::new(vec![case], vec![]);
        let d = prepare_case(&case, &plan).unwrap();
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ");
        println!("k={k} alpha={:.10} truncated at r={:.3}", d.alpha, d.r_end);
        println!("  zeros of u: {}", fmt(&d.portrait.zeros_u));
        println!("  zeros of v: {}", fmt(&d.portrait.zeros_v));
        println!("  critical:   {}", fmt(&d.portrait.crits_u));
        println!("  |v| at truncation: {:.3e}", d.traj.last().v.abs());
    }
}
