//! Radial shooting for `u'' + (n-1)/r u' + f(u) = 0`, `u(0) = alpha`, `u'(0) = 0`,
//! carried together with the variation `v = du/dalpha`.
//!
//! The run starts at a small radius from the Taylor expansion about the
//! origin and proceeds with an adaptive Dormand-Prince 5(4) scheme whose
//! continuous extension is kept for every accepted step.

mod dopri5;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::FieldParams;
use dopri5::{trial_step, DenseStep, Vec4};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorControls {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub r_max: f64,
    /// Base start radius; the run starts at `r0 * max(1, alpha)`.
    pub r0: f64,
    pub v_guard: f64,
    pub max_steps: usize,
}

impl Default for IntegratorControls {
    fn default() -> Self {
        Self { abs_tol: 1e-12, rel_tol: 1e-10, r_max: 100.0, r0: 1e-6, v_guard: 1e12, max_steps: 2_000_000 }
    }
}

impl IntegratorControls {
    pub fn validate(&self) -> Result<()> {
        let ok = self.abs_tol > 0.0
            && self.rel_tol > 0.0
            && self.r0 > 0.0
            && self.r_max.is_finite()
            && self.r_max > self.r0
            && self.v_guard > 0.0
            && self.max_steps > 0;
        if ok {
            Ok(())
        } else {
            Err(LabError::InvalidParameter(format!("bad integrator controls {self:?}")))
        }
    }

    /// Same controls with both tolerances divided by `factor`.
    pub fn tightened(&self, factor: f64) -> Self {
        Self { abs_tol: self.abs_tol / factor, rel_tol: self.rel_tol / factor, ..*self }
    }

    pub fn with_r_max(&self, r_max: f64) -> Self {
        Self { r_max, ..*self }
    }
}

/// Which early exits are armed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopPolicy {
    /// Stop at the first accepted step with `E <= 0`.
    pub energy: bool,
    /// Stop once `|v|` exceeds the guard.
    pub variation: bool,
}

impl StopPolicy {
    /// Energy and variation exits armed; used when classifying a shot.
    pub fn classify() -> Self {
        Self { energy: true, variation: true }
    }

    /// Energy exit only; used for node counting.
    pub fn energy_only() -> Self {
        Self { energy: true, variation: false }
    }

    /// No early exits: the run always reaches `r_max` unless the step control fails.
    pub fn full_range() -> Self {
        Self { energy: false, variation: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub field: FieldParams,
    pub alpha: f64,
    pub controls: IntegratorControls,
}

impl ProblemParams {
    pub fn new(field: FieldParams, alpha: f64) -> Self {
        Self { field, alpha, controls: IntegratorControls::default() }
    }

    pub fn with_controls(mut self, controls: IntegratorControls) -> Self {
        self.controls = controls;
        self
    }

    pub fn start_radius(&self) -> f64 {
        self.controls.r0 * self.alpha.abs().max(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub r: f64,
    pub u: f64,
    pub up: f64,
    pub v: f64,
    pub vp: f64,
}

impl State {
    fn from_vec(r: f64, y: &Vec4) -> Self {
        Self { r, u: y[0], up: y[1], v: y[2], vp: y[3] }
    }

    fn to_vec(self) -> Vec4 {
        [self.u, self.up, self.v, self.vp]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TerminationCause {
    ReachedRMax,
    EnergyNonpositive,
    VariationDiverged,
    StepLimit,
    StepUnderflow,
}

impl TerminationCause {
    pub fn is_failure(self) -> bool {
        matches!(self, TerminationCause::StepLimit | TerminationCause::StepUnderflow)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Termination {
    pub cause: TerminationCause,
    pub r_stop: f64,
    /// First radius with `E <= 0`, located on the dense output, when seen.
    pub energy_witness: Option<f64>,
}

/// Samples at accepted steps plus the continuous extension between them.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub field: FieldParams,
    pub alpha: f64,
    pub controls: IntegratorControls,
    pub samples: Vec<State>,
    steps: Vec<DenseStep>,
    pub termination: Termination,
}

/// Right-hand side of the first-order system in `(u, u', v, v')`.
pub fn rhs(field: &FieldParams, r: f64, y: &[f64; 4]) -> Result<[f64; 4]> {
    if !(r > 0.0) {
        return Err(LabError::Domain(format!("radius must be positive, got {r}")));
    }
    Ok(rhs_unchecked(field, r, y))
}

#[inline]
fn rhs_unchecked(field: &FieldParams, r: f64, y: &Vec4) -> Vec4 {
    let c = (field.nf() - 1.0) / r;
    [y[1], -c * y[1] - field.f(y[0]), y[3], -c * y[3] - field.f_prime(y[0]) * y[2]]
}

/// Second-order Taylor start at `r0`.
pub fn series_start(field: &FieldParams, alpha: f64, r0: f64) -> State {
    let n = field.nf();
    let fa = field.f(alpha);
    let fpa = field.f_prime(alpha);
    State {
        r: r0,
        u: alpha - fa * r0 * r0 / (2.0 * n),
        up: -fa * r0 / n,
        v: 1.0 - fpa * r0 * r0 / (2.0 * n),
        vp: -fpa * r0 / n,
    }
}

pub fn energy(field: &FieldParams, s: &State) -> f64 {
    0.5 * s.up * s.up + field.big_f(s.u)
}

/// Integrates outward from the origin until `r_max` or an armed exit fires.
pub fn integrate(params: &ProblemParams, policy: StopPolicy) -> Result<Trajectory> {
    let field = params.field;
    let ctl = params.controls;
    ctl.validate()?;
    if !params.alpha.is_finite() {
        return Err(LabError::InvalidParameter(format!("alpha = {} is not finite", params.alpha)));
    }
    let r_start = params.start_radius();
    if r_start >= ctl.r_max {
        return Err(LabError::InvalidParameter("start radius beyond r_max".into()));
    }

    let start = series_start(&field, params.alpha, r_start);
    let mut traj = Trajectory {
        field,
        alpha: params.alpha,
        controls: ctl,
        samples: vec![start],
        steps: Vec::new(),
        termination: Termination { cause: TerminationCause::ReachedRMax, r_stop: r_start, energy_witness: None },
    };
    if policy.energy && energy(&field, &start) <= 0.0 {
        traj.termination =
            Termination { cause: TerminationCause::EnergyNonpositive, r_stop: r_start, energy_witness: Some(r_start) };
        return Ok(traj);
    }

    let mut f = |r: f64, y: &Vec4| rhs_unchecked(&field, r, y);
    let mut r = r_start;
    let mut y = start.to_vec();
    let mut k1 = f(r, &y);
    let mut h = (0.01f64).min(ctl.r_max - r);
    let mut n_steps = 0usize;
    let mut last_rejected = false;

    loop {
        if n_steps >= ctl.max_steps {
            traj.termination.cause = TerminationCause::StepLimit;
            traj.termination.r_stop = r;
            return Ok(traj);
        }
        if h < 16.0 * f64::EPSILON * r.abs().max(1.0) {
            traj.termination.cause = TerminationCause::StepUnderflow;
            traj.termination.r_stop = r;
            return Ok(traj);
        }
        let last = r + h >= ctl.r_max;
        if last {
            h = ctl.r_max - r;
        }
        let trial = trial_step(&mut f, r, &y, &k1, h, ctl.abs_tol, ctl.rel_tol);
        n_steps += 1;
        let finite = trial.y_new.iter().all(|x| x.is_finite()) && trial.err.is_finite();
        if !finite || trial.err > 1.0 {
            let fac = if finite { (0.9 * trial.err.powf(-0.2)).clamp(0.2, 1.0) } else { 0.2 };
            h *= fac;
            last_rejected = true;
            continue;
        }

        let r_new = if last { ctl.r_max } else { r + h };
        let y_old = y;
        y = trial.y_new;
        k1 = trial.k7;
        traj.steps.push(trial.dense);
        let s = State::from_vec(r_new, &y);
        traj.samples.push(s);
        let r_old = r;
        r = r_new;

        if policy.energy && energy(&field, &s) <= 0.0 {
            let step = traj.steps.last().unwrap();
            let e_of = |x: f64| {
                let z = step.eval(x);
                0.5 * z[1] * z[1] + field.big_f(z[0])
            };
            let witness = if energy(&field, &State::from_vec(r_old, &y_old)) > 0.0 {
                first_nonpositive(e_of, r_old, r)
            } else {
                r
            };
            traj.termination =
                Termination { cause: TerminationCause::EnergyNonpositive, r_stop: r, energy_witness: Some(witness) };
            return Ok(traj);
        }
        if policy.variation && s.v.abs() > ctl.v_guard {
            traj.termination.cause = TerminationCause::VariationDiverged;
            traj.termination.r_stop = r;
            return Ok(traj);
        }
        if last {
            traj.termination.cause = TerminationCause::ReachedRMax;
            traj.termination.r_stop = r;
            return Ok(traj);
        }

        let mut fac = (0.9 * trial.err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
        if last_rejected {
            fac = fac.min(1.0);
        }
        last_rejected = false;
        h *= fac;
    }
}

/// Bisects for the left edge of `{x : g(x) <= 0}` given `g(lo) > 0 >= g(hi)`.
fn first_nonpositive<G: Fn(f64) -> f64>(g: G, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

impl Trajectory {
    pub fn r_start(&self) -> f64 {
        self.samples[0].r
    }

    pub fn r_stop(&self) -> f64 {
        self.samples.last().unwrap().r
    }

    pub fn last(&self) -> &State {
        self.samples.last().unwrap()
    }

    pub fn dense_steps(&self) -> usize {
        self.steps.len()
    }

    /// State at any radius in `[r_start, r_stop]` from the continuous extension.
    pub fn eval(&self, r: f64) -> Result<State> {
        let lo = self.r_start();
        let hi = self.r_stop();
        if !(r >= lo && r <= hi) {
            return Err(LabError::OutOfRange { r, lo, hi });
        }
        if self.steps.is_empty() {
            return Ok(State { r, ..self.samples[0] });
        }
        let idx = self.steps.partition_point(|s| s.r1() < r).min(self.steps.len() - 1);
        let y = self.steps[idx].eval(r);
        Ok(State::from_vec(r, &y))
    }

    /// `u''` from the equation at a state.
    pub fn upp(&self, s: &State) -> f64 {
        -(self.field.nf() - 1.0) / s.r * s.up - self.field.f(s.u)
    }

    pub fn energy_at(&self, s: &State) -> f64 {
        energy(&self.field, s)
    }

    /// Copy of the trajectory cut at `r_cut` (kept steps end at or before it,
    /// plus the sample at `r_cut` itself).
    pub fn truncated(&self, r_cut: f64) -> Result<Trajectory> {
        let cut = self.eval(r_cut)?;
        let mut out = self.clone();
        let keep = self.steps.partition_point(|s| s.r1() < r_cut);
        out.steps.truncate(keep + 1);
        out.samples.retain(|s| s.r < r_cut);
        out.samples.push(cut);
        out.termination = Termination { cause: self.termination.cause, r_stop: r_cut, energy_witness: None };
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic3() -> FieldParams {
        FieldParams::new(3, 3.0).unwrap()
    }

    #[test]
    fn rhs_rejects_origin() {
        assert!(rhs(&cubic3(), 0.0, &[1.0, 0.0, 1.0, 0.0]).is_err());
        let d = rhs(&cubic3(), 1.0, &[1.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(d, [0.0, 0.0, 0.0, -2.0]);
    }

    #[test]
    fn constant_solution_stays_put() {
        let pp = ProblemParams::new(cubic3(), 1.0).with_controls(IntegratorControls { r_max: 20.0, ..Default::default() });
        let t = integrate(&pp, StopPolicy::full_range()).unwrap();
        assert_eq!(t.termination.cause, TerminationCause::ReachedRMax);
        assert_eq!(t.r_stop(), 20.0);
        assert!(t.samples.iter().all(|s| s.u == 1.0 && s.up == 0.0));
    }

    #[test]
    fn low_amplitude_stops_on_energy_at_start() {
        let t = integrate(&ProblemParams::new(cubic3(), 0.5), StopPolicy::classify()).unwrap();
        assert_eq!(t.termination.cause, TerminationCause::EnergyNonpositive);
        assert!(t.samples.iter().all(|s| s.u > 0.0));
    }

    /// Linearised check: for tiny oscillations about u = 1 in n = 3 the
    /// perturbation w = u - 1 solves w'' + 2w'/r + (p-1)w = 0, i.e.
    /// w = w0 sin(kr)/(kr) with k = sqrt(p-1).
    #[test]
    fn small_oscillation_matches_sinc() {
        let w0 = 1e-7;
        let pp = ProblemParams::new(cubic3(), 1.0 + w0).with_controls(IntegratorControls { r_max: 10.0, ..Default::default() });
        let t = integrate(&pp, StopPolicy::full_range()).unwrap();
        let k = 2f64.sqrt();
        for r in [0.5, 2.0, 5.0, 9.5] {
            let s = t.eval(r).unwrap();
            let w = w0 * (k * r).sin() / (k * r);
            assert!(((s.u - 1.0) - w).abs() < 1e-3 * w0, "r = {r}");
            assert!((s.v - (k * r).sin() / (k * r)).abs() < 1e-3);
        }
    }

    #[test]
    fn dense_output_hits_samples_and_rejects_outside() {
        let pp = ProblemParams::new(cubic3(), 3.0).with_controls(IntegratorControls { r_max: 8.0, ..Default::default() });
        let t = integrate(&pp, StopPolicy::full_range()).unwrap();
        for s in t.samples.iter().skip(1).step_by(7) {
            let d = t.eval(s.r).unwrap();
            assert!((d.u - s.u).abs() < 1e-14 * (1.0 + s.u.abs()));
            assert!((d.v - s.v).abs() < 1e-13 * (1.0 + s.v.abs()));
        }
        assert!(t.eval(0.0).is_err());
        assert!(t.eval(8.5).is_err());
    }

    /// Energy dissipation law `E' = -(n-1) u'^2 / r` along the discrete samples.
    #[test]
    fn energy_never_increases() {
        let pp = ProblemParams::new(cubic3(), 5.0).with_controls(IntegratorControls { r_max: 30.0, ..Default::default() });
        let t = integrate(&pp, StopPolicy::full_range()).unwrap();
        let e: Vec<f64> = t.samples.iter().map(|s| t.energy_at(s)).collect();
        let scale = e.iter().fold(0f64, |m, x| m.max(x.abs()));
        assert!(e.windows(2).all(|w| w[1] <= w[0] + 1e-9 * scale));
    }

    #[test]
    fn halving_tolerances_barely_moves_the_state() {
        let fp = FieldParams::new(4, 2.0).unwrap();
        let base = IntegratorControls { r_max: 6.0, ..Default::default() };
        let a = integrate(&ProblemParams::new(fp, 4.0).with_controls(base), StopPolicy::full_range()).unwrap();
        let b = integrate(&ProblemParams::new(fp, 4.0).with_controls(base.tightened(2.0)), StopPolicy::full_range()).unwrap();
        for r in [1.0, 3.0, 5.9] {
            let (sa, sb) = (a.eval(r).unwrap(), b.eval(r).unwrap());
            assert!((sa.u - sb.u).abs() < 10.0 * (base.abs_tol + base.rel_tol * sa.u.abs()));
        }
    }
}
