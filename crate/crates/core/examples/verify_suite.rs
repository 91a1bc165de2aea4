//! A small verification plan plus the per-phase renewability audit.

use boundstate_lab::verify::{
    prepare_case, renewability_audit, run_checks, CaseFamily, CheckId, VerificationCase, VerificationPlan,
};
use boundstate_lab::FieldParams;

pub fn main() {
    let field = FieldParams::new(3, 3.0).unwrap();
    let cases = [CaseFamily::BoundBracket(2), CaseFamily::Oscillatory(20.0), CaseFamily::Explicit(1.0)]
        .map(|family| VerificationCase { field, family })
        .to_vec();
    let checks = vec![CheckId::PositivityEpp, CheckId::Tango, CheckId::Reflection, CheckId::PhaseTransitions];
    let plan = VerificationPlan::new(cases.clone(), checks);
    let report = run_checks(&plan).unwrap();
    print!("{}", report.table());

    let d = prepare_case(&cases[0], &plan).unwrap();
    for ph in renewability_audit(&d.traj, &d.portrait, 2).phases {
        println!(
            "phase {}: {:?}  Q(c) = {:.4e}  M(c) = {:.4e}  T2(c) = {:.4e}  Q(b) = {:.4e}  Q(bbar) = {:.4e}",
            ph.index,
            ph.status,
            ph.q_c.unwrap(),
            ph.m_c.unwrap(),
            ph.t2_c.unwrap(),
            ph.q_b.unwrap(),
            ph.q_b_bar.unwrap()
        );
    }
}
