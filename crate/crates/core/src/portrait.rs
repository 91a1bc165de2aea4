//! Event detection on a trajectory and the phase decomposition
//! `c_{i-1} < b_i < r_i < z_i < r̄_i < b̄_i < c_i`.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::integrator::{State, TerminationCause, Trajectory};
use crate::roots;

/// Relative tolerance for event radii.
pub const EVENT_TOL: f64 = 1e-12;
/// Critical values this close to a level make the neighbouring labels uncertain.
pub const TANGENCY_GUARD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    ZeroU,
    CritU,
    ZeroV,
    InflectionU,
    /// `|u| = alpha_lower`.
    LevelLower,
    /// `|u| = 1`.
    LevelOne,
}

impl EventKind {
    pub const ALL: [EventKind; 6] = [
        EventKind::ZeroU,
        EventKind::CritU,
        EventKind::ZeroV,
        EventKind::InflectionU,
        EventKind::LevelLower,
        EventKind::LevelOne,
    ];

    fn eval(self, traj: &Trajectory, alpha_lower: f64, s: &State) -> f64 {
        match self {
            EventKind::ZeroU => s.u,
            EventKind::CritU => s.up,
            EventKind::ZeroV => s.v,
            EventKind::InflectionU => traj.upp(s),
            EventKind::LevelLower => s.u.abs() - alpha_lower,
            EventKind::LevelOne => s.u.abs() - 1.0,
        }
    }
}

/// A located root with the bracket it came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventLocator {
    pub kind: EventKind,
    pub bracket: (f64, f64),
    pub r: f64,
    pub u: f64,
    pub up: f64,
    pub v: f64,
    /// `|g(r)|` for the located root.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseKind {
    /// Energy stays positive over the resolved range.
    SemiTail,
    /// Energy has become nonpositive; the shot is trapped in one well.
    TailOscillatory,
}

/// Labels of phase `i`, the interval `(c_{i-1}, c_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseLabels {
    pub index: usize,
    pub start: f64,
    /// `c_i`, absent when the run stops inside the phase.
    pub end: Option<f64>,
    pub b: Option<f64>,
    pub r: Option<f64>,
    pub z: Option<f64>,
    pub r_bar: Option<f64>,
    pub b_bar: Option<f64>,
    pub complete: bool,
    pub uncertain: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledEvent {
    pub label: String,
    pub kind: EventKind,
    pub r: f64,
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePortrait {
    pub alpha: f64,
    pub alpha_lower: f64,
    pub r_stop: f64,
    pub kind: PhaseKind,
    pub zeros_u: Vec<f64>,
    pub crits_u: Vec<f64>,
    pub crit_values: Vec<f64>,
    pub zeros_v: Vec<f64>,
    pub inflections_u: Vec<f64>,
    pub phases: Vec<PhaseLabels>,
    pub events: Vec<LabeledEvent>,
}

/// All strict sign changes of one event function, refined on the dense output.
pub fn locate(traj: &Trajectory, kind: EventKind) -> Vec<EventLocator> {
    let al = traj.field.critical_amplitudes().alpha_lower;
    let g = |s: &State| kind.eval(traj, al, s);
    let mut out = Vec::new();
    let samples = &traj.samples;
    for w in samples.windows(2) {
        let (g0, g1) = (g(&w[0]), g(&w[1]));
        if !(g0 * g1 < 0.0) {
            continue;
        }
        let (lo, hi) = (w[0].r, w[1].r);
        let tol = EVENT_TOL * hi.max(1.0);
        let root = roots::refine(|r| traj.eval(r).map(|s| g(&s)).unwrap_or(f64::NAN), lo, hi, tol);
        let s = traj.eval(root).expect("root inside range");
        out.push(EventLocator { kind, bracket: (lo, hi), r: root, u: s.u, up: s.up, v: s.v, residual: g(&s).abs() });
    }
    out
}

fn check_separation(kind: EventKind, ev: &[EventLocator]) -> Result<()> {
    for w in ev.windows(2) {
        if w[1].r - w[0].r <= 10.0 * EVENT_TOL * w[1].r.max(1.0) {
            return Err(LabError::AmbiguousEvent { kind: format!("{kind:?}"), r: w[1].r });
        }
    }
    Ok(())
}

fn first_in<'a>(ev: &'a [EventLocator], lo: f64, hi: f64, pred: impl Fn(&EventLocator) -> bool) -> Option<&'a EventLocator> {
    ev.iter().find(|e| e.r > lo && e.r < hi && pred(e))
}

fn near_level(x: f64, level: f64) -> bool {
    (x.abs() - level).abs() < TANGENCY_GUARD
}

/// Detects all events and assembles the phases that contain a zero of `u`,
/// plus the phase after the last zero.
pub fn detect_events(traj: &Trajectory) -> Result<PhasePortrait> {
    let al = traj.field.critical_amplitudes().alpha_lower;
    let by_kind: Vec<Vec<EventLocator>> = EventKind::ALL.iter().map(|&k| locate(traj, k)).collect();
    for (k, ev) in EventKind::ALL.iter().zip(&by_kind) {
        check_separation(*k, ev)?;
    }
    let [zeros, crits, zeros_v, infl, lower, one] = <[Vec<EventLocator>; 6]>::try_from(by_kind).unwrap();

    // Between consecutive zeros there must be exactly one critical point, and none before the first.
    for (i, z) in zeros.iter().enumerate() {
        let lo = if i == 0 { 0.0 } else { zeros[i - 1].r };
        let between = crits.iter().filter(|c| c.r > lo && c.r < z.r).count();
        let expected = usize::from(i > 0);
        if between != expected {
            return Err(LabError::InterlacingViolation(format!(
                "{between} critical points between r = {lo} and zero r = {}",
                z.r
            )));
        }
    }

    let r_stop = traj.r_stop();
    let mut phases = Vec::new();
    for i in 1..=zeros.len() + 1 {
        let start = if i == 1 { 0.0 } else { crits[i - 2].r };
        let end = crits.get(i - 1).map(|c| c.r);
        let hi = end.unwrap_or(r_stop + 1.0);
        let z = zeros.get(i - 1).filter(|z| z.r > start && z.r < hi).map(|z| z.r);
        let split = z.unwrap_or(hi);
        let decreasing = |e: &EventLocator| e.u * e.up < 0.0;
        let increasing = |e: &EventLocator| e.u * e.up > 0.0;
        let b = first_in(&lower, start, split, decreasing).map(|e| e.r);
        let r = first_in(&one, start, split, decreasing).map(|e| e.r);
        let (r_bar, b_bar) = match z {
            Some(zr) => (
                first_in(&one, zr, hi, increasing).map(|e| e.r),
                first_in(&lower, zr, hi, increasing).map(|e| e.r),
            ),
            None => (None, None),
        };
        let mut uncertain = false;
        if i >= 2 {
            let prev = crits[i - 2].u;
            uncertain |= near_level(prev, al) || near_level(prev, 1.0);
        }
        if let Some(c) = crits.get(i - 1) {
            uncertain |= near_level(c.u, al) || near_level(c.u, 1.0);
        }
        phases.push(PhaseLabels {
            index: i,
            start,
            end,
            b,
            r,
            z,
            r_bar,
            b_bar,
            complete: end.is_some(),
            uncertain,
        });
        if end.is_none() {
            break;
        }
    }

    let trapped = traj.termination.cause == TerminationCause::EnergyNonpositive
        || traj.samples.iter().any(|s| traj.energy_at(s) <= 0.0);
    let kind = if trapped { PhaseKind::TailOscillatory } else { PhaseKind::SemiTail };

    let mut events = Vec::new();
    let mut push = |label: String, kind: EventKind, e: &EventLocator| {
        events.push(LabeledEvent { label, kind, r: e.r, u: e.u });
    };
    for (i, e) in zeros.iter().enumerate() {
        push(format!("z{}", i + 1), EventKind::ZeroU, e);
    }
    for (i, e) in crits.iter().enumerate() {
        push(format!("c{}", i + 1), EventKind::CritU, e);
    }
    for (i, e) in zeros_v.iter().enumerate() {
        push(format!("tau{}", i + 1), EventKind::ZeroV, e);
    }
    for (i, e) in infl.iter().enumerate() {
        push(format!("infl{}", i + 1), EventKind::InflectionU, e);
    }
    for ph in &phases {
        let i = ph.index;
        let tagged = [(format!("b{i}"), ph.b, &lower), (format!("r{i}"), ph.r, &one), (format!("rbar{i}"), ph.r_bar, &one), (format!("bbar{i}"), ph.b_bar, &lower)];
        for (label, r, src) in tagged {
            if let Some(e) = r.and_then(|r| src.iter().find(|e| e.r == r)) {
                let kind = e.kind;
                push(label, kind, e);
            }
        }
    }
    events.sort_by(|a, b| a.r.total_cmp(&b.r));

    Ok(PhasePortrait {
        alpha: traj.alpha,
        alpha_lower: al,
        r_stop,
        kind,
        zeros_u: zeros.iter().map(|e| e.r).collect(),
        crits_u: crits.iter().map(|e| e.r).collect(),
        crit_values: crits.iter().map(|e| e.u).collect(),
        zeros_v: zeros_v.iter().map(|e| e.r).collect(),
        inflections_u: infl.iter().map(|e| e.r).collect(),
        phases,
        events,
    })
}

/// Sign changes of `u` over the samples.
pub fn zero_count(traj: &Trajectory) -> usize {
    traj.samples.windows(2).filter(|w| w[0].u * w[1].u < 0.0).count()
}

/// Decaying-tail evidence at the end of a run: `|u| < decay_eps` and `|u'/u + 1| < slope_eps`.
pub fn decay_evidence(traj: &Trajectory, decay_eps: f64, slope_eps: f64) -> bool {
    let s = traj.last();
    s.u != 0.0 && s.u.abs() < decay_eps && (s.up / s.u + 1.0).abs() < slope_eps
}

pub const DECAY_EPS: f64 = 1e-6;
pub const SLOPE_EPS: f64 = 0.05;

/// Number of zeros of `u`; defined once the energy has become nonpositive
/// (no further zeros are possible) or the run ended on a decaying tail.
pub fn count_nodes(traj: &Trajectory) -> Result<usize> {
    let n = zero_count(traj);
    match traj.termination.cause {
        TerminationCause::EnergyNonpositive => Ok(n),
        TerminationCause::ReachedRMax if decay_evidence(traj, DECAY_EPS, SLOPE_EPS) => Ok(n),
        cause => Err(LabError::IndeterminateCount {
            alpha: traj.alpha,
            cause: format!("run ended with {cause:?} at r = {} and positive energy", traj.r_stop()),
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InflectionInterval {
    pub lo: f64,
    pub hi: f64,
    pub inflections: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InflectionReport {
    pub intervals: Vec<InflectionInterval>,
    pub pass: bool,
}

/// `u''` must change sign exactly once on each `(c_{i-1}, z_i)`.
pub fn unique_inflection_check(portrait: &PhasePortrait) -> InflectionReport {
    let mut intervals = Vec::new();
    for ph in &portrait.phases {
        if let Some(z) = ph.z {
            let inflections: Vec<f64> =
                portrait.inflections_u.iter().copied().filter(|&r| r > ph.start && r < z).collect();
            intervals.push(InflectionInterval { lo: ph.start, hi: z, inflections });
        }
    }
    let pass = intervals.iter().all(|iv| iv.inflections.len() == 1);
    InflectionReport { intervals, pass }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldParams;
    use crate::integrator::{integrate, IntegratorControls, ProblemParams, StopPolicy};

    fn run(n: u32, p: f64, alpha: f64, r_max: f64, policy: StopPolicy) -> Trajectory {
        let fp = FieldParams::new(n, p).unwrap();
        let c = IntegratorControls { r_max, ..Default::default() };
        integrate(&ProblemParams::new(fp, alpha).with_controls(c), policy).unwrap()
    }

    #[test]
    fn small_amplitude_is_a_positive_tail() {
        let t = run(3, 3.0, 0.5, 30.0, StopPolicy::full_range());
        let pp = detect_events(&t).unwrap();
        assert!(pp.zeros_u.is_empty());
        assert!(!pp.crits_u.is_empty());
        assert_eq!(pp.kind, PhaseKind::TailOscillatory);
        for w in pp.crit_values.windows(2) {
            assert!((w[0] - 1.0) * (w[1] - 1.0) < 0.0);
        }
    }

    #[test]
    fn constant_solution_has_no_u_events() {
        let t = run(3, 3.0, 1.0, 20.0, StopPolicy::full_range());
        let pp = detect_events(&t).unwrap();
        assert!(pp.zeros_u.is_empty() && pp.crits_u.is_empty() && pp.inflections_u.is_empty());
        assert!(pp.phases.iter().all(|ph| ph.b.is_none() && ph.r.is_none()));
    }

    #[test]
    fn labels_are_ordered_within_phases() {
        let t = run(3, 3.0, 20.0, 30.0, StopPolicy::classify());
        let pp = detect_events(&t).unwrap();
        assert_eq!(pp.zeros_u.len(), 2);
        for ph in pp.phases.iter().filter(|p| p.z.is_some() && p.complete) {
            let seq = [Some(ph.start), ph.b, ph.r, ph.z, ph.r_bar, ph.b_bar, ph.end];
            let vals: Vec<f64> = seq.iter().map(|x| x.unwrap()).collect();
            assert!(vals.windows(2).all(|w| w[0] < w[1]), "{vals:?}");
        }
    }

    #[test]
    fn located_zero_is_tight() {
        let t = run(3, 3.0, 6.0, 30.0, StopPolicy::classify());
        let z = locate(&t, EventKind::ZeroU);
        assert_eq!(z.len(), 1);
        assert!(z[0].residual < 1e-11);
        assert!(z[0].r > z[0].bracket.0 && z[0].r < z[0].bracket.1);
    }

    #[test]
    fn node_count_needs_a_final_run() {
        let t = run(3, 3.0, 6.0, 100.0, StopPolicy::energy_only());
        assert_eq!(count_nodes(&t).unwrap(), 1);
        let t = run(3, 3.0, 6.0, 1.0, StopPolicy::energy_only());
        assert!(count_nodes(&t).is_err());
    }

    #[test]
    fn inflection_is_unique_before_each_zero() {
        let t = run(3, 3.0, 40.0, 30.0, StopPolicy::classify());
        let pp = detect_events(&t).unwrap();
        let rep = unique_inflection_check(&pp);
        assert!(!rep.intervals.is_empty());
        assert!(rep.pass, "{rep:?}");
    }
}
