//! Acceptance criteria 1 to 10. Runs without the libtest harness so every
//! criterion prints exactly one PASS/FAIL line; exits nonzero if any fails.

use std::time::{Duration, Instant};

use boundstate_lab::functionals::bridge_integral;
use boundstate_lab::ladder::{compute_ladder, find_alpha_k, linspace, node_count_of_alpha, sweep, zero_monotonicity_scan, SolutionClass};
use boundstate_lab::verify::{run_checks, verification_controls, CaseFamily, CheckId, CheckStatus, VerificationCase, VerificationPlan};
use boundstate_lab::{detect_events, integrate, FieldParams, IntegratorControls, ProblemParams, StopPolicy, Trajectory};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn cubic3() -> FieldParams {
    FieldParams::new(3, 3.0).unwrap()
}

/// Records that are not `Pass`, as printable lines.
fn non_passing(plan: &VerificationPlan) -> Vec<String> {
    let rep = run_checks(plan).unwrap();
    assert_eq!(rep.records.len(), plan.cases.len() * plan.checks.len());
    rep.records
        .iter()
        .filter(|r| r.status != CheckStatus::Pass)
        .map(|r| format!("{} / {}: {:?} {}", r.case, r.check.name(), r.status, r.notes))
        .collect()
}

fn criterion_1() -> Verdict {
    let t = Instant::now();
    let a = cubic3().critical_amplitudes();
    let dt = t.elapsed();
    let ok = (a.alpha_lower - std::f64::consts::SQRT_2).abs() < 1e-6 && (a.alpha_upper - 2.0).abs() < 1e-6 && dt < Duration::from_millis(1);
    verdict(ok, format!("alpha_* = {:.10}, alpha^* = {:.10}, {dt:?}", a.alpha_lower, a.alpha_upper))
}

/// Oracle for the first zero: does the shot cross zero before its energy
/// turns nonpositive? Counts sign changes on the raw samples.
fn crosses_zero(field: &FieldParams, alpha: f64, controls: &IntegratorControls) -> bool {
    let t: Trajectory = integrate(&ProblemParams::new(*field, alpha).with_controls(*controls), StopPolicy::energy_only()).unwrap();
    t.samples.windows(2).any(|w| w[0].u * w[1].u < 0.0)
}

fn criterion_2() -> Verdict {
    let t = Instant::now();
    let field = cubic3();
    let entry = match find_alpha_k(&field, 0, 1e-8, &IntegratorControls::default()) {
        Ok(e) => e,
        Err(e) => return verdict(false, format!("ladder failed: {e}")),
    };
    let tight = IntegratorControls::default().tightened(10.0);
    let grid: Vec<f64> = (0..=40).map(|i| 2.0 + 0.25 * i as f64).collect();
    let Some(j) = grid.iter().position(|&a| crosses_zero(&field, a, &tight)) else {
        return verdict(false, "oracle grid found no crossing");
    };
    let (mut lo, mut hi) = (grid[j - 1], grid[j]);
    while hi - lo > 1e-11 * hi {
        let mid = 0.5 * (lo + hi);
        if crosses_zero(&field, mid, &tight) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let oracle = 0.5 * (lo + hi);
    let dt = t.elapsed();
    let ok = entry.alpha_lo <= oracle && oracle <= entry.alpha_hi && entry.alpha_lo > 2.0 && dt < Duration::from_secs(10);
    verdict(ok, format!("bracket [{:.12}, {:.12}], oracle {oracle:.12}, {dt:?}", entry.alpha_lo, entry.alpha_hi))
}

fn criterion_3() -> Verdict {
    let t = Instant::now();
    let field = cubic3();
    let controls = IntegratorControls::default();
    let ladder = match compute_ladder(&field, &[0, 1, 2], 1e-8, &controls) {
        Ok(l) => l,
        Err(e) => return verdict(false, format!("ladder failed: {e}")),
    };
    let ordered = ladder.entries.windows(2).all(|w| w[0].alpha_hi < w[1].alpha_lo);
    let mut jumps = Vec::new();
    for e in &ladder.entries {
        let nc = node_count_of_alpha(&field, e.alpha_hi + 1e-4 * e.midpoint(), &controls).unwrap();
        jumps.push(nc.is_final && nc.count == e.k + 1);
    }
    let dt = t.elapsed();
    let mids: Vec<String> = ladder.entries.iter().map(|e| format!("{:.9}", e.midpoint())).collect();
    let ok = ordered && jumps.iter().all(|&j| j) && dt < Duration::from_secs(60);
    verdict(ok, format!("midpoints {}, ordered {ordered}, jumps {jumps:?}, {dt:?}", mids.join(" < ")))
}

fn criterion_4() -> Verdict {
    let t = Instant::now();
    let mut cases = Vec::new();
    for (n, p) in [(3, 3.0), (4, 2.0)] {
        for a in [0.5, 3.0, 5.0, 8.0] {
            cases.push(VerificationCase { field: FieldParams::new(n, p).unwrap(), family: CaseFamily::Explicit(a) });
        }
    }
    let plan = VerificationPlan::new(cases, vec![CheckId::IdentityResiduals, CheckId::ConnectionIdentity]);
    let rep = run_checks(&plan).unwrap();
    let worst = |c: CheckId| {
        rep.records.iter().filter(|r| r.check == c).filter_map(|r| r.worst_margin).fold(0f64, f64::max)
    };
    let enough = rep.records.iter().all(|r| r.probes >= 50);
    let bad: Vec<_> = rep.failures().map(|r| format!("{} / {}: {}", r.case, r.check.name(), r.notes)).collect();
    let dt = t.elapsed();
    let ok = bad.is_empty() && enough && dt < Duration::from_secs(30);
    verdict(
        ok,
        format!(
            "worst identity {:.2e}, worst connection {:.2e}, >=50 probes {enough}, {dt:?} {}",
            worst(CheckId::IdentityResiduals),
            worst(CheckId::ConnectionIdentity),
            bad.join("; ")
        ),
    )
}

fn bound_cases(ks: &[usize]) -> Vec<VerificationCase> {
    ks.iter().map(|&k| VerificationCase { field: cubic3(), family: CaseFamily::BoundBracket(k) }).collect()
}

fn criterion_5() -> Verdict {
    let t = Instant::now();
    let plan = VerificationPlan::new(bound_cases(&[1, 2, 3]), vec![CheckId::Tango, CheckId::VDivergence]);
    let bad = non_passing(&plan);
    let dt = t.elapsed();
    verdict(bad.is_empty() && dt < Duration::from_secs(60), format!("k = 1, 2, 3, {dt:?} {}", bad.join("; ")))
}

fn criterion_6() -> Verdict {
    let checks = vec![CheckId::PositivityEpp, CheckId::OmegaIncreasing, CheckId::PhaseOneWindows, CheckId::PhaseTransitions];
    let plan = VerificationPlan::new(bound_cases(&[1, 2, 3]), checks);
    let bad = non_passing(&plan);
    verdict(bad.is_empty(), format!("E, P, P1, P2, omega, Q, M, Q1, Q2, renewability on k = 1, 2, 3 {}", bad.join("; ")))
}

fn criterion_7() -> Verdict {
    let t = Instant::now();
    let controls = verification_controls();
    let mut ok = true;
    let mut parts = Vec::new();
    for p in [1.5, 1.2] {
        let field = FieldParams::new(3, p).unwrap();
        let alpha = find_alpha_k(&field, 1, 1e-12, &controls).unwrap().midpoint();
        let shot = ProblemParams::new(field, alpha).with_controls(controls.with_r_max(20.0));
        let traj = integrate(&shot, StopPolicy::full_range()).unwrap();
        let portrait = detect_events(&traj).unwrap();
        let u_tilde = traj.eval(portrait.phases[0].b.unwrap()).unwrap().u.abs();
        let bi = bridge_integral(&traj, &portrait, 1, Some(u_tilde)).unwrap();
        ok &= bi.value > 0.0;
        parts.push(format!("p = {p}: b_1 = {:.5}, tau_1 = {:.5}, I_1 = {:.4e} ({:?})", bi.b, bi.tau, bi.value, bi.flag));
    }
    let dt = t.elapsed();
    verdict(ok && dt < Duration::from_secs(20), format!("{}, {dt:?}", parts.join("; ")))
}

fn criterion_8() -> Verdict {
    let alphas = [5.0, 6.0, 8.0, 10.0, 15.0];
    let scan = zero_monotonicity_scan(&cubic3(), &alphas, 1, &IntegratorControls::default()).unwrap();
    let zs: Vec<String> = scan.points.iter().map(|(_, z)| z.map(|z| format!("{z:.6}")).unwrap_or("-".into())).collect();
    verdict(scan.decreasing, format!("z_1 = {}", zs.join(" > ")))
}

fn criterion_9() -> Verdict {
    let plan = VerificationPlan::new(bound_cases(&[1, 2, 3]), vec![CheckId::TailAsymptotics]);
    let rep = run_checks(&plan).unwrap();
    let lines: Vec<String> = rep.records.iter().map(|r| format!("{}: {}", r.case, r.notes)).collect();
    verdict(rep.all_passed() && rep.records.iter().all(|r| r.status == CheckStatus::Pass), lines.join("; "))
}

fn criterion_10() -> Verdict {
    let t = Instant::now();
    let atlas = sweep(&cubic3(), &linspace(0.1, 20.0, 200), &IntegratorControls::default()).unwrap();
    let mut problems = Vec::new();
    for row in &atlas.rows {
        match &row.class {
            SolutionClass::Constant if row.alpha != 1.0 => problems.push(format!("Constant at {}", row.alpha)),
            SolutionClass::Oscillatory { witness, .. } if witness.energy_nonpositive_at.is_none() => {
                problems.push(format!("no energy witness at {}", row.alpha))
            }
            SolutionClass::Indeterminate { .. } => problems.push(format!("Indeterminate at {}", row.alpha)),
            _ => {}
        }
    }
    let dt = t.elapsed();
    let counts: Vec<usize> = atlas.rows.iter().map(|r| r.class.node_count()).collect();
    let ok = problems.is_empty() && atlas.monotone && dt < Duration::from_secs(120);
    verdict(
        ok,
        format!("200 rows, node counts {}..={}, monotone {}, {dt:?} {}", counts[0], counts[199], atlas.monotone, problems.join("; ")),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("critical amplitudes", criterion_1),
        ("ground-state ladder entry", criterion_2),
        ("ladder ordering and jumps", criterion_3),
        ("identity residual suite", criterion_4),
        ("tango structure", criterion_5),
        ("positivity ledger", criterion_6),
        ("residual-case integral", criterion_7),
        ("zero monotonicity", criterion_8),
        ("tail asymptotics", criterion_9),
        ("classification dichotomy", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let v = run();
        failed += usize::from(!v.pass);
        println!("criterion {:>2} {:<28} {}  {}", i + 1, name, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
