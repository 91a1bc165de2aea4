//! Shot classification, node counting and the bisection ladder of initial
//! values `alpha_0 < alpha_1 < ...` where the node count jumps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::FieldParams;
use crate::integrator::{integrate, IntegratorControls, ProblemParams, StopPolicy, TerminationCause};
use crate::portrait::{decay_evidence, detect_events, zero_count, DECAY_EPS, SLOPE_EPS};

/// Evidence attached to a classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub termination: TerminationCause,
    pub r_stop: f64,
    /// First radius with nonpositive energy.
    pub energy_nonpositive_at: Option<f64>,
    pub u_stop: f64,
    pub log_slope_stop: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class")]
pub enum SolutionClass {
    /// `alpha = 1`.
    Constant,
    /// Energy became nonpositive: `u` ends up oscillating about `center = ±1`.
    Oscillatory { node_count: usize, center: i8, witness: Witness },
    /// Positive energy out to `r_max` on a decaying tail.
    BoundStateCandidate { node_count: usize, witness: Witness },
    Indeterminate { node_count: usize, witness: Witness },
}

impl SolutionClass {
    pub fn tag(&self) -> &'static str {
        match self {
            SolutionClass::Constant => "Constant",
            SolutionClass::Oscillatory { .. } => "Oscillatory",
            SolutionClass::BoundStateCandidate { .. } => "BoundStateCandidate",
            SolutionClass::Indeterminate { .. } => "Indeterminate",
        }
    }

    pub fn node_count(&self) -> usize {
        match *self {
            SolutionClass::Constant => 0,
            SolutionClass::Oscillatory { node_count, .. }
            | SolutionClass::BoundStateCandidate { node_count, .. }
            | SolutionClass::Indeterminate { node_count, .. } => node_count,
        }
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            SolutionClass::Constant => None,
            SolutionClass::Oscillatory { witness, .. }
            | SolutionClass::BoundStateCandidate { witness, .. }
            | SolutionClass::Indeterminate { witness, .. } => Some(witness),
        }
    }
}

/// Classifies the shot `u(0) = alpha`.
pub fn classify(params: &ProblemParams) -> Result<SolutionClass> {
    if params.alpha == 1.0 {
        return Ok(SolutionClass::Constant);
    }
    let traj = integrate(params, StopPolicy::classify())?;
    let last = *traj.last();
    let witness = Witness {
        termination: traj.termination.cause,
        r_stop: traj.r_stop(),
        energy_nonpositive_at: traj.termination.energy_witness,
        u_stop: last.u,
        log_slope_stop: (last.u != 0.0).then(|| last.up / last.u),
    };
    let node_count = zero_count(&traj);
    Ok(match traj.termination.cause {
        TerminationCause::EnergyNonpositive => {
            SolutionClass::Oscillatory { node_count, center: if last.u >= 0.0 { 1 } else { -1 }, witness }
        }
        TerminationCause::ReachedRMax if decay_evidence(&traj, DECAY_EPS, SLOPE_EPS) => {
            SolutionClass::BoundStateCandidate { node_count, witness }
        }
        _ => SolutionClass::Indeterminate { node_count, witness },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeCount {
    pub count: usize,
    /// Energy reached zero, so no further zeros can appear.
    pub is_final: bool,
}

/// Zeros of the shot `u(0) = alpha`. A run that reaches `r_max` with positive
/// energy is repeated once with `r_max` doubled.
pub fn node_count_of_alpha(field: &FieldParams, alpha: f64, controls: &IntegratorControls) -> Result<NodeCount> {
    let mut ctl = *controls;
    for attempt in 0..2 {
        let traj = integrate(&ProblemParams::new(*field, alpha).with_controls(ctl), StopPolicy::energy_only())?;
        let count = zero_count(&traj);
        match traj.termination.cause {
            TerminationCause::EnergyNonpositive => return Ok(NodeCount { count, is_final: true }),
            TerminationCause::ReachedRMax if attempt == 0 => ctl.r_max *= 2.0,
            TerminationCause::ReachedRMax => return Ok(NodeCount { count, is_final: false }),
            cause => {
                return Err(LabError::IndeterminateCount {
                    alpha,
                    cause: format!("integration stopped with {cause:?} at r = {}", traj.r_stop()),
                })
            }
        }
    }
    unreachable!()
}

fn final_count(field: &FieldParams, alpha: f64, controls: &IntegratorControls) -> Result<usize> {
    let nc = node_count_of_alpha(field, alpha, controls)?;
    if !nc.is_final {
        return Err(LabError::IndeterminateCount {
            alpha,
            cause: format!("energy still positive at r = {}", 2.0 * controls.r_max),
        });
    }
    Ok(nc.count)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderEntry {
    pub k: usize,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub nodes_lo: usize,
    pub nodes_hi: usize,
    pub evaluations: usize,
}

impl LadderEntry {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.alpha_lo + self.alpha_hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaLadder {
    pub field: FieldParams,
    pub tol: f64,
    pub entries: Vec<LadderEntry>,
}

/// Largest upper bracket end tried, in units of `alpha_upper`.
pub const BRACKET_CAP: f64 = 1e4;

fn check_monotone(history: &mut Vec<(f64, usize)>) -> Result<()> {
    history.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in history.windows(2) {
        if w[1].1 < w[0].1 {
            return Err(LabError::MonotonicityViolation { a1: w[0].0, n1: w[0].1, a2: w[1].0, n2: w[1].1 });
        }
    }
    Ok(())
}

/// Brackets the `k`-th jump of the node count to relative width `tol`.
pub fn find_alpha_k(field: &FieldParams, k: usize, tol: f64, controls: &IntegratorControls) -> Result<LadderEntry> {
    if !(tol > 0.0) {
        return Err(LabError::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    let au = field.critical_amplitudes().alpha_upper;
    let mut history: Vec<(f64, usize)> = Vec::new();
    let eval = |a: f64, history: &mut Vec<(f64, usize)>| -> Result<usize> {
        let n = final_count(field, a, controls)?;
        history.push((a, n));
        Ok(n)
    };

    let mut lo = 1.01 * au;
    let mut n_lo = eval(lo, &mut history)?;
    if n_lo > k {
        // Below alpha_upper the shot cannot change sign.
        lo = au;
        n_lo = eval(lo, &mut history)?;
    }
    let mut hi = 2.0 * au;
    let mut n_hi = eval(hi, &mut history)?;
    while n_hi < k + 1 {
        lo = hi;
        n_lo = n_hi;
        hi *= 2.0;
        if hi > BRACKET_CAP * au {
            return Err(LabError::BracketNotFound { k, cap: BRACKET_CAP * au });
        }
        n_hi = eval(hi, &mut history)?;
    }
    if n_lo > k {
        check_monotone(&mut history)?;
        return Err(LabError::BracketNotFound { k, cap: lo });
    }
    while hi - lo > tol * lo {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let n = eval(mid, &mut history)?;
        if n <= k {
            lo = mid;
            n_lo = n;
        } else {
            hi = mid;
            n_hi = n;
        }
    }
    let evaluations = history.len();
    check_monotone(&mut history)?;
    if n_lo != k || n_hi != k + 1 {
        return Err(LabError::IndeterminateCount {
            alpha: 0.5 * (lo + hi),
            cause: format!("bracket ends have {n_lo} and {n_hi} zeros, expected {k} and {}", k + 1),
        });
    }
    Ok(LadderEntry { k, alpha_lo: lo, alpha_hi: hi, nodes_lo: n_lo, nodes_hi: n_hi, evaluations })
}

/// Ladder entries for each `k`, computed in parallel and returned in `k` order.
pub fn compute_ladder(field: &FieldParams, ks: &[usize], tol: f64, controls: &IntegratorControls) -> Result<AlphaLadder> {
    let entries: Result<Vec<LadderEntry>> = ks.par_iter().map(|&k| find_alpha_k(field, k, tol, controls)).collect();
    let mut entries = entries?;
    entries.sort_by_key(|e| e.k);
    Ok(AlphaLadder { field: *field, tol, entries })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroScan {
    pub index: usize,
    pub points: Vec<(f64, Option<f64>)>,
    pub decreasing: bool,
}

/// The `i`-th zero of `u` (1-based) for each `alpha`; `decreasing` holds when
/// every zero exists and they strictly decrease with increasing `alpha`.
pub fn zero_monotonicity_scan(field: &FieldParams, alphas: &[f64], i: usize, controls: &IntegratorControls) -> Result<ZeroScan> {
    if i == 0 {
        return Err(LabError::InvalidParameter("zero index is 1-based".into()));
    }
    let mut sorted = alphas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let points: Result<Vec<(f64, Option<f64>)>> = sorted
        .par_iter()
        .map(|&a| {
            let traj = integrate(&ProblemParams::new(*field, a).with_controls(*controls), StopPolicy::classify())?;
            let pp = detect_events(&traj)?;
            Ok((a, pp.zeros_u.get(i - 1).copied()))
        })
        .collect();
    let points = points?;
    let decreasing = points.iter().all(|p| p.1.is_some())
        && points.windows(2).all(|w| w[1].1.unwrap() < w[0].1.unwrap());
    Ok(ZeroScan { index: i, points, decreasing })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub class: SolutionClass,
    pub zeros: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAtlas {
    pub field: FieldParams,
    pub rows: Vec<SweepRow>,
    pub monotone: bool,
    pub indeterminate: usize,
}

/// `count` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect(),
    }
}

/// Classifies every `alpha` (in parallel, output in input order).
pub fn sweep(field: &FieldParams, alphas: &[f64], controls: &IntegratorControls) -> Result<SweepAtlas> {
    let rows: Result<Vec<SweepRow>> = alphas
        .par_iter()
        .map(|&alpha| {
            let pp = ProblemParams::new(*field, alpha).with_controls(*controls);
            let class = classify(&pp)?;
            let zeros = if matches!(class, SolutionClass::Constant) {
                vec![]
            } else {
                detect_events(&integrate(&pp, StopPolicy::classify())?)?.zeros_u
            };
            Ok(SweepRow { alpha, class, zeros })
        })
        .collect();
    let rows = rows?;
    // Indeterminate counts are lower bounds only, so they stay out of the monotonicity test.
    let mut by_alpha: Vec<&SweepRow> =
        rows.iter().filter(|r| !matches!(r.class, SolutionClass::Indeterminate { .. })).collect();
    by_alpha.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    let monotone = by_alpha.windows(2).all(|w| w[1].class.node_count() >= w[0].class.node_count());
    let indeterminate = rows.iter().filter(|r| matches!(r.class, SolutionClass::Indeterminate { .. })).count();
    Ok(SweepAtlas { field: *field, rows, monotone, indeterminate })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic3() -> FieldParams {
        FieldParams::new(3, 3.0).unwrap()
    }

    #[test]
    fn classify_examples() {
        let fp = cubic3();
        assert_eq!(classify(&ProblemParams::new(fp, 1.0)).unwrap(), SolutionClass::Constant);
        match classify(&ProblemParams::new(fp, 0.5)).unwrap() {
            SolutionClass::Oscillatory { node_count, center, witness } => {
                assert_eq!((node_count, center), (0, 1));
                assert!(witness.energy_nonpositive_at.is_some());
            }
            c => panic!("{c:?}"),
        }
        match classify(&ProblemParams::new(fp, 6.0)).unwrap() {
            SolutionClass::Oscillatory { node_count, center, .. } => assert_eq!((node_count, center), (1, -1)),
            c => panic!("{c:?}"),
        }
    }

    #[test]
    fn ground_bracket() {
        let e = find_alpha_k(&cubic3(), 0, 1e-8, &IntegratorControls::default()).unwrap();
        assert!(e.alpha_hi - e.alpha_lo <= 1e-8 * e.alpha_lo);
        // Coarse value of the cubic three-dimensional ground state amplitude.
        assert!(e.alpha_lo < 4.3374 && e.alpha_hi > 4.3373);
    }

    #[test]
    fn ladder_is_ordered_and_jumps() {
        let fp = cubic3();
        let ctl = IntegratorControls::default();
        let lad = compute_ladder(&fp, &[0, 1, 2], 1e-6, &ctl).unwrap();
        assert_eq!(lad.entries.iter().map(|e| e.k).collect::<Vec<_>>(), vec![0, 1, 2]);
        for w in lad.entries.windows(2) {
            assert!(w[0].alpha_hi < w[1].alpha_lo);
        }
        for e in &lad.entries {
            let n = node_count_of_alpha(&fp, e.alpha_hi + 1e-4 * e.midpoint(), &ctl).unwrap();
            assert_eq!(n, NodeCount { count: e.k + 1, is_final: true });
        }
    }

    #[test]
    fn nonpositive_tolerance_rejected() {
        assert!(find_alpha_k(&cubic3(), 0, 0.0, &IntegratorControls::default()).is_err());
    }

    #[test]
    fn short_runs_are_not_final() {
        let ctl = IntegratorControls { r_max: 0.5, ..Default::default() };
        let nc = node_count_of_alpha(&cubic3(), 6.0, &ctl).unwrap();
        assert!(!nc.is_final);
    }

    #[test]
    fn first_zero_moves_inward() {
        let scan = zero_monotonicity_scan(&cubic3(), &[15.0, 5.0, 8.0], 1, &IntegratorControls::default()).unwrap();
        assert!(scan.decreasing);
        assert_eq!(scan.points[0].0, 5.0);
    }

    #[test]
    fn linspace_endpoints() {
        let v = linspace(0.1, 20.0, 200);
        assert_eq!(v.len(), 200);
        assert_eq!(v[0], 0.1);
        assert_eq!(v[199], 20.0);
    }
}
