//! Numerical verification of the structural claims on sets of shots.
//!
//! A plan lists cases (an `(n, p)` point plus a trajectory family) and
//! checks. Every check produces exactly one record per case. Claims whose
//! hypotheses do not apply to a case pass vacuously; checks that need a
//! phase the run never resolved are `SkippedUndefined`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::FieldParams;
use crate::functionals::{
    aux_from_state, bridge_integral, identity_residuals, inner_probe_radius, probe_radii, velocity_bound, BridgeFlag,
    Identity,
};
use crate::integrator::{integrate, IntegratorControls, ProblemParams, State, StopPolicy, Trajectory};
use crate::ladder::{find_alpha_k, node_count_of_alpha, LadderEntry};
use crate::portrait::{detect_events, PhasePortrait, DECAY_EPS};
use crate::roots;

/// Strict-positivity claims pass when `value > -POSITIVITY_MARGIN * scale`.
pub const POSITIVITY_MARGIN: f64 = 1e-9;
pub const RESIDUAL_LIMIT: f64 = 1e-6;
pub const CONNECTION_LIMIT: f64 = 1e-9;
pub const TAIL_SLOPE_LIMIT: f64 = 0.05;
pub const V_GROWTH: f64 = 1e3;
pub const JUMP_OFFSET: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CaseFamily {
    GroundBracket,
    BoundBracket(usize),
    Oscillatory(f64),
    Explicit(f64),
}

impl CaseFamily {
    fn bracket_k(&self) -> Option<usize> {
        match *self {
            CaseFamily::GroundBracket => Some(0),
            CaseFamily::BoundBracket(k) => Some(k),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerificationCase {
    pub field: FieldParams,
    pub family: CaseFamily,
}

impl VerificationCase {
    pub fn label(&self) -> String {
        let fam = match self.family {
            CaseFamily::GroundBracket => "ground".to_string(),
            CaseFamily::BoundBracket(k) => format!("bound(k={k})"),
            CaseFamily::Oscillatory(a) => format!("oscillatory(alpha={a})"),
            CaseFamily::Explicit(a) => format!("explicit(alpha={a})"),
        };
        format!("n={} p={} {fam}", self.field.n(), self.field.p())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckId {
    EnergyMonotone,
    VelocityBound,
    PositivityEpp,
    OmegaIncreasing,
    PohozaevRatio,
    PhaseOneWindows,
    PhaseTransitions,
    Tango,
    TauLocalization,
    UniqueInflection,
    Reflection,
    BridgeIntegral,
    IdentityResiduals,
    ConnectionIdentity,
    TailAsymptotics,
    VDivergence,
    LadderJump,
    ToleranceAgreement,
}

impl CheckId {
    pub const ALL: [CheckId; 18] = [
        CheckId::EnergyMonotone,
        CheckId::VelocityBound,
        CheckId::PositivityEpp,
        CheckId::OmegaIncreasing,
        CheckId::PohozaevRatio,
        CheckId::PhaseOneWindows,
        CheckId::PhaseTransitions,
        CheckId::Tango,
        CheckId::TauLocalization,
        CheckId::UniqueInflection,
        CheckId::Reflection,
        CheckId::BridgeIntegral,
        CheckId::IdentityResiduals,
        CheckId::ConnectionIdentity,
        CheckId::TailAsymptotics,
        CheckId::VDivergence,
        CheckId::LadderJump,
        CheckId::ToleranceAgreement,
    ];

    pub fn name(&self) -> String {
        serde_json::to_value(self).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
    }

    pub fn parse(s: &str) -> Result<CheckId> {
        serde_json::from_value(serde_json::Value::String(s.trim().to_string()))
            .map_err(|_| LabError::MalformedPlan(format!("unknown check id '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationPlan {
    pub cases: Vec<VerificationCase>,
    pub checks: Vec<CheckId>,
    pub controls: IntegratorControls,
    /// Relative width of the brackets behind `GroundBracket` and `BoundBracket` cases.
    pub bracket_tol: f64,
    /// Probe count per trajectory for the identity checks.
    pub probes: usize,
}

/// Controls used by verification runs: tolerances ten times tighter than the
/// integrator defaults so that difference quotients resolve the identities.
pub fn verification_controls() -> IntegratorControls {
    IntegratorControls::default().tightened(10.0)
}

impl VerificationPlan {
    pub fn new(cases: Vec<VerificationCase>, checks: Vec<CheckId>) -> Self {
        Self { cases, checks, controls: verification_controls(), bracket_tol: 1e-12, probes: 64 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cases.is_empty() {
            return Err(LabError::MalformedPlan("no cases".into()));
        }
        if self.checks.is_empty() {
            return Err(LabError::MalformedPlan("no checks".into()));
        }
        if !(self.bracket_tol > 0.0) || self.probes == 0 {
            return Err(LabError::MalformedPlan("bracket tolerance and probe count must be positive".into()));
        }
        self.controls.validate().map_err(|e| LabError::MalformedPlan(e.to_string()))
    }

    /// Named presets. `core` runs every check on the reference families,
    /// `residual` runs the identity, connection and bridge checks on the first
    /// three bracket families, `full` is `core` plus the constant shot.
    pub fn preset(name: &str, field: FieldParams) -> Result<Self> {
        let mut fams = vec![
            CaseFamily::GroundBracket,
            CaseFamily::BoundBracket(1),
            CaseFamily::BoundBracket(2),
            CaseFamily::BoundBracket(3),
            CaseFamily::Oscillatory(0.5),
            CaseFamily::Oscillatory(3.0),
            CaseFamily::Oscillatory(5.0),
            CaseFamily::Oscillatory(8.0),
        ];
        match name {
            "core" => {}
            "residual" => fams.truncate(3),
            "full" => fams.push(CaseFamily::Explicit(1.0)),
            _ => return Err(LabError::MalformedPlan(format!("unknown preset '{name}'"))),
        }
        let checks = if name == "residual" {
            vec![CheckId::IdentityResiduals, CheckId::ConnectionIdentity, CheckId::BridgeIntegral]
        } else {
            CheckId::ALL.to_vec()
        };
        let cases = fams.into_iter().map(|family| VerificationCase { field, family }).collect();
        Ok(Self::new(cases, checks))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    SkippedUndefined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub case: String,
    pub check: CheckId,
    pub status: CheckStatus,
    /// Smallest normalised margin seen (negative means violated), or the largest
    /// residual for residual checks.
    pub worst_margin: Option<f64>,
    pub probes: usize,
    pub notes: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub records: Vec<CheckRecord>,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.records.iter().all(|r| r.status != CheckStatus::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.records.iter().filter(|r| r.status == CheckStatus::Fail)
    }

    pub fn find(&self, case: &str, check: CheckId) -> Option<&CheckRecord> {
        self.records.iter().find(|r| r.case == case && r.check == check)
    }

    /// Fixed-width text table, one line per record.
    pub fn table(&self) -> String {
        let mut out = format!("{:<40} {:<22} {:<18} {:>12} {:>6}  notes\n", "case", "check", "status", "worst", "probes");
        for r in &self.records {
            let status = serde_json::to_value(r.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            let worst = r.worst_margin.map(|w| format!("{w:.3e}")).unwrap_or_else(|| "-".into());
            out.push_str(&format!(
                "{:<40} {:<22} {:<18} {:>12} {:>6}  {}\n",
                r.case,
                r.check.name(),
                status,
                worst,
                r.probes,
                r.notes
            ));
        }
        out
    }
}

/// Everything the checks need about one case.
pub struct CaseData {
    pub case: VerificationCase,
    pub alpha: f64,
    pub entry: Option<LadderEntry>,
    /// Trajectory over the resolved range (truncated for bracket families).
    pub traj: Trajectory,
    pub full: Trajectory,
    pub portrait: PhasePortrait,
    /// Zeros of `u` on the resolved range.
    pub k: usize,
    pub r_end: f64,
}

impl CaseData {
    fn is_bound(&self) -> bool {
        self.case.family.bracket_k().is_some()
    }

    fn zero(&self, i: usize) -> Option<f64> {
        i.checked_sub(1).and_then(|j| self.portrait.zeros_u.get(j).copied())
    }

    fn crit(&self, i: usize) -> Option<f64> {
        if i == 0 {
            Some(0.0)
        } else {
            self.portrait.crits_u.get(i - 1).copied()
        }
    }

    /// Right end of the range where energy and Pohozaev positivity is claimed.
    fn positivity_end(&self) -> Option<f64> {
        if self.is_bound() {
            Some(self.r_end)
        } else if self.k >= 1 {
            self.zero(self.k)
        } else {
            None
        }
    }

    /// Number of phases covered by the phase transition claims.
    fn transition_phases(&self) -> usize {
        if self.is_bound() {
            self.k
        } else {
            self.k.saturating_sub(1)
        }
    }

    /// Below this radius the auxiliary functionals are differences of nearly
    /// equal terms and rounding dominates their sign.
    fn inner(&self) -> f64 {
        inner_probe_radius(&self.case.field, self.alpha)
    }

    fn is_constant(&self) -> bool {
        self.alpha == 1.0
    }

    fn state(&self, r: f64) -> State {
        self.traj.eval(r.clamp(self.traj.r_start(), self.traj.r_stop())).expect("clamped")
    }
}

/// Last radius on the decaying tail after `c_k` where `|u| > 10 decay_eps`,
/// stopping early if `|u|` turns back up.
pub fn truncation_radius(traj: &Trajectory, c_k: f64) -> f64 {
    let floor = 10.0 * DECAY_EPS;
    let mut last = traj.r_stop();
    let mut prev: Option<&State> = None;
    for s in traj.samples.iter().filter(|s| s.r > c_k) {
        let turned = s.u * s.up >= 0.0;
        let crossed = prev.map(|p| p.u * s.u <= 0.0).unwrap_or(false);
        if s.u.abs() <= floor || turned || crossed {
            return prev.map(|p| p.r).unwrap_or(s.r);
        }
        last = s.r;
        prev = Some(s);
    }
    last
}

pub fn prepare_case(case: &VerificationCase, plan: &VerificationPlan) -> Result<CaseData> {
    let field = case.field;
    let ctl = plan.controls;
    let (alpha, entry) = match case.family.bracket_k() {
        Some(k) => {
            let e = find_alpha_k(&field, k, plan.bracket_tol, &ctl)?;
            (e.midpoint(), Some(e))
        }
        None => match case.family {
            CaseFamily::Oscillatory(a) | CaseFamily::Explicit(a) => (a, None),
            _ => unreachable!(),
        },
    };
    let full = integrate(&ProblemParams::new(field, alpha).with_controls(ctl), StopPolicy::full_range())?;
    let (traj, r_end) = match case.family.bracket_k() {
        Some(k) => {
            let pp_full = detect_events(&full)?;
            let c_k = if k == 0 { 0.0 } else { pp_full.crits_u.get(k - 1).copied().unwrap_or(0.0) };
            let r_cut = truncation_radius(&full, c_k);
            (full.truncated(r_cut)?, r_cut)
        }
        None => (full.clone(), full.r_stop()),
    };
    let portrait = detect_events(&traj)?;
    let k = portrait.zeros_u.len();
    Ok(CaseData { case: *case, alpha, entry, traj, full, portrait, k, r_end })
}

struct Outcome {
    status: CheckStatus,
    worst: Option<f64>,
    probes: usize,
    notes: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self { status: CheckStatus::Pass, worst: None, probes: 0, notes: Vec::new() }
    }

    fn vacuous(note: &str) -> Self {
        Self { notes: vec![format!("vacuous: {note}")], ..Self::new() }
    }

    fn skipped(note: impl Into<String>) -> Self {
        Self { status: CheckStatus::SkippedUndefined, notes: vec![note.into()], ..Self::new() }
    }

    fn fail(&mut self, note: impl Into<String>) {
        self.status = CheckStatus::Fail;
        self.notes.push(note.into());
    }

    fn skip(&mut self, note: impl Into<String>) {
        if self.status == CheckStatus::Pass {
            self.status = CheckStatus::SkippedUndefined;
        }
        self.notes.push(note.into());
    }

    fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    fn margin(&mut self, m: f64) {
        if m.is_finite() {
            self.worst = Some(self.worst.map_or(m, |w| w.min(m)));
        }
    }

    /// Requires every value positive up to the running-max margin.
    fn positive(&mut self, name: &str, values: impl IntoIterator<Item = (f64, f64)>) {
        let mut scale = f64::MIN_POSITIVE;
        for (r, x) in values {
            self.probes += 1;
            scale = scale.max(x.abs());
            self.margin(x / scale);
            if !(x > -POSITIVITY_MARGIN * scale) {
                self.fail(format!("{name} = {x:.3e} at r = {r:.6}"));
                return;
            }
        }
    }

    /// Requires the sequence to be nondecreasing (`sign = 1`) or nonincreasing
    /// (`sign = -1`) up to the running-max margin.
    fn monotone(&mut self, name: &str, sign: f64, values: &[(f64, f64)]) {
        let mut scale = f64::MIN_POSITIVE;
        for w in values.windows(2) {
            self.probes += 1;
            scale = scale.max(w[0].1.abs()).max(w[1].1.abs());
            let step = sign * (w[1].1 - w[0].1);
            self.margin(step / scale);
            if !(step > -POSITIVITY_MARGIN * scale) {
                self.fail(format!("{name} not monotone between r = {:.6} and {:.6}", w[0].0, w[1].0));
                return;
            }
        }
    }

    fn record(self, case: &str, check: CheckId) -> CheckRecord {
        CheckRecord {
            case: case.to_string(),
            check,
            status: self.status,
            worst_margin: self.worst,
            probes: self.probes,
            notes: self.notes.join("; "),
        }
    }
}

/// Samples with `lo < r <= hi` (or `lo <= r` when `closed`), plus both ends.
fn states_on(d: &CaseData, lo: f64, hi: f64, closed: bool) -> Vec<State> {
    let mut out = Vec::new();
    if closed && lo > d.traj.r_start() {
        out.push(d.state(lo));
    }
    out.extend(d.traj.samples.iter().filter(|s| s.r > lo && s.r < hi).copied());
    out.push(d.state(hi));
    out
}

fn aux_values(d: &CaseData, states: &[State], pick: impl Fn(&crate::functionals::AuxSample) -> f64) -> Vec<(f64, f64)> {
    states.iter().map(|s| (s.r, pick(&aux_from_state(&d.case.field, s)))).collect()
}

fn check_energy(d: &CaseData) -> Outcome {
    let mut o = Outcome::new();
    let e: Vec<(f64, f64)> = d.traj.samples.iter().map(|s| (s.r, d.traj.energy_at(s))).collect();
    o.monotone("E", -1.0, &e);
    o
}

fn check_velocity(d: &CaseData) -> Outcome {
    let mut o = Outcome::new();
    let bound = velocity_bound(&d.case.field, d.alpha);
    let slack = POSITIVITY_MARGIN * bound.max(1.0);
    for s in &d.traj.samples {
        o.probes += 1;
        let m = bound - s.up.abs();
        o.margin(m / bound.max(1.0));
        if !(m > -slack) {
            o.fail(format!("|u'| = {:.6e} exceeds D = {bound:.6e} at r = {:.6}", s.up.abs(), s.r));
            break;
        }
    }
    o
}

fn check_positivity(d: &CaseData) -> Outcome {
    let Some(end) = d.positivity_end() else { return Outcome::vacuous("no zeros and not a bound state") };
    let states = states_on(d, d.inner(), end, true);
    let mut o = Outcome::new();
    o.positive("E", aux_values(d, &states, |a| a.e));
    o.positive("P", aux_values(d, &states, |a| a.p));
    o.positive("P1", aux_values(d, &states, |a| a.p1));
    o.positive("P2", aux_values(d, &states, |a| a.p2));
    o.note(format!("range [{:.4e}, {end:.6}]", d.inner()));
    o
}

fn check_omega(d: &CaseData) -> Outcome {
    let Some(end) = d.positivity_end() else { return Outcome::vacuous("no zeros and not a bound state") };
    let mut o = Outcome::new();
    let mut cuts = vec![d.inner()];
    cuts.extend(d.portrait.zeros_u.iter().copied().filter(|&z| z < end));
    cuts.push(end);
    for w in cuts.windows(2) {
        let vals: Vec<(f64, f64)> = d
            .traj
            .samples
            .iter()
            .filter(|s| s.r > w[0] && s.r < w[1] && s.u != 0.0)
            .map(|s| (s.r, -s.r * s.up / s.u))
            .collect();
        o.monotone("omega", 1.0, &vals);
    }
    o
}

fn check_pohozaev_ratio(d: &CaseData) -> Outcome {
    let Some(end) = d.positivity_end() else { return Outcome::vacuous("no zeros and not a bound state") };
    let states = states_on(d, d.inner(), end, true);
    let n = d.case.field.n() as i32;
    let vals = aux_values(d, &states, |a| a.p / a.r.powi(n));
    let mut o = Outcome::new();
    o.monotone("P/r^n", -1.0, &vals);
    o
}

fn phase_one_applies(d: &CaseData) -> bool {
    if d.is_bound() {
        d.k >= 1
    } else {
        d.k >= 2
    }
}

fn check_phase_one(d: &CaseData) -> Outcome {
    if !phase_one_applies(d) {
        return Outcome::vacuous("needs a bound state with a zero or at least two zeros");
    }
    let ph = &d.portrait.phases[0];
    let (Some(c1), Some(z1), Some(bb1), Some(r1)) = (ph.end, ph.z, ph.b_bar, ph.r) else {
        return Outcome::skipped("phase 1 not resolved");
    };
    let mut o = Outcome::new();
    let to_z1 = states_on(d, d.inner(), z1, true);
    let to_c1 = states_on(d, d.inner(), c1, true);
    let tail = states_on(d, bb1, c1, true);
    o.positive("Q on (0, z1]", aux_values(d, &to_z1, |a| a.q));
    o.positive("Q on [bbar1, c1]", aux_values(d, &tail, |a| a.q));
    o.positive("M", aux_values(d, &to_c1, |a| a.m));
    o.positive("Q1", aux_values(d, &to_c1, |a| a.q1));
    o.positive("Q2", aux_values(d, &to_c1, |a| a.q2));
    let taus: Vec<f64> = d.portrait.zeros_v.iter().copied().filter(|&t| t <= c1).collect();
    if taus.len() != 1 || taus[0] >= r1 {
        o.fail(format!("zeros of v on (0, c1]: {taus:?}, r1 = {r1:.6}"));
    }
    o
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseAudit {
    pub index: usize,
    pub status: CheckStatus,
    pub q_c: Option<f64>,
    pub m_c: Option<f64>,
    pub t2_c: Option<f64>,
    pub q_b: Option<f64>,
    pub q_b_bar: Option<f64>,
    /// Sign changes of `Q` inside `(b_i, b̄_i)`, recorded as data only.
    pub q_sign_changes_inside: Option<usize>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewabilityReport {
    pub phases: Vec<PhaseAudit>,
}

impl RenewabilityReport {
    pub fn status(&self) -> CheckStatus {
        if self.phases.iter().any(|p| p.status == CheckStatus::Fail) {
            CheckStatus::Fail
        } else if self.phases.iter().any(|p| p.status == CheckStatus::SkippedUndefined) {
            CheckStatus::SkippedUndefined
        } else {
            CheckStatus::Pass
        }
    }
}

fn positive_margin(x: f64, scale: f64) -> bool {
    x > -POSITIVITY_MARGIN * scale.abs().max(f64::MIN_POSITIVE)
}

/// Audits `phases` phases: `Q, M, T2 > 0` at `c_i`, `Q(b̄_i) > Q(b_i)`, and
/// for `i >= 2` the windows `Q > 0` on `[c_{i-1}, b_i] ∪ [b̄_i, c_i]`,
/// `M, Q1, Q2 > 0` on `[c_{i-1}, c_i]` and `T2 > 0` on `[c_{i-1}, b_i]`.
pub fn renewability_audit(traj: &Trajectory, portrait: &PhasePortrait, phases: usize) -> RenewabilityReport {
    let field = traj.field;
    let at = |r: f64| aux_from_state(&field, &traj.eval(r).expect("event inside range"));
    let mut out = Vec::new();
    for i in 1..=phases {
        let mut audit = PhaseAudit {
            index: i,
            status: CheckStatus::Pass,
            q_c: None,
            m_c: None,
            t2_c: None,
            q_b: None,
            q_b_bar: None,
            q_sign_changes_inside: None,
            notes: Vec::new(),
        };
        let Some(ph) = portrait.phases.iter().find(|p| p.index == i) else {
            audit.status = CheckStatus::SkippedUndefined;
            audit.notes.push("phase not reached".into());
            out.push(audit);
            continue;
        };
        let (Some(c), Some(b), Some(bb)) = (ph.end, ph.b, ph.b_bar) else {
            audit.status = CheckStatus::SkippedUndefined;
            audit.notes.push("phase truncated".into());
            out.push(audit);
            continue;
        };
        let fail = |audit: &mut PhaseAudit, note: String| {
            audit.status = CheckStatus::Fail;
            audit.notes.push(note);
        };
        let ac = at(c);
        let (qb, qbb) = (at(b).q, at(bb).q);
        audit.q_c = Some(ac.q);
        audit.m_c = Some(ac.m);
        audit.t2_c = ac.t2;
        audit.q_b = Some(qb);
        audit.q_b_bar = Some(qbb);
        let scale_c = ac.q.abs().max(ac.m.abs());
        for (name, x) in [("Q(c)", Some(ac.q)), ("M(c)", Some(ac.m)), ("T2(c)", ac.t2)] {
            match x {
                Some(x) if x > 0.0 || positive_margin(x, scale_c) => {}
                Some(x) => fail(&mut audit, format!("{name} = {x:.3e}")),
                None => fail(&mut audit, format!("{name} undefined")),
            }
        }
        if !(qbb - qb > -POSITIVITY_MARGIN * qb.abs().max(qbb.abs())) {
            fail(&mut audit, format!("Q(bbar) = {qbb:.6e} <= Q(b) = {qb:.6e}"));
        }
        let inside: Vec<f64> =
            traj.samples.iter().filter(|s| s.r > b && s.r < bb).map(|s| aux_from_state(&field, s).q).collect();
        audit.q_sign_changes_inside = Some(inside.windows(2).filter(|w| w[0] * w[1] < 0.0).count());
        if i >= 2 {
            let lo = ph.start;
            let grid = |a: f64, z: f64| -> Vec<State> {
                let mut v: Vec<State> = traj.samples.iter().filter(|s| s.r > a && s.r < z).copied().collect();
                v.push(traj.eval(a).expect("inside"));
                v.push(traj.eval(z).expect("inside"));
                v
            };
            let windows: [(&str, Vec<State>, fn(&crate::functionals::AuxSample) -> Option<f64>); 6] = [
                ("Q on [c, b]", grid(lo, b), |a| Some(a.q)),
                ("Q on [bbar, c]", grid(bb, c), |a| Some(a.q)),
                ("M", grid(lo, c), |a| Some(a.m)),
                ("Q1", grid(lo, c), |a| Some(a.q1)),
                ("Q2", grid(lo, c), |a| Some(a.q2)),
                ("T2 on [c, b]", grid(lo, b), |a| a.t2),
            ];
            for (name, states, pick) in windows {
                let vals: Vec<(f64, f64)> = states
                    .iter()
                    .filter_map(|s| pick(&aux_from_state(&field, s)).map(|x| (s.r, x)))
                    .collect();
                let scale = vals.iter().fold(f64::MIN_POSITIVE, |m, v| m.max(v.1.abs()));
                if let Some(bad) = vals.iter().find(|v| !positive_margin(v.1, scale)) {
                    fail(&mut audit, format!("{name} = {:.3e} at r = {:.6}", bad.1, bad.0));
                }
            }
        }
        out.push(audit);
    }
    RenewabilityReport { phases: out }
}

fn check_phase_transitions(d: &CaseData) -> Outcome {
    let phases = d.transition_phases();
    if phases == 0 {
        return Outcome::vacuous("no complete nodal phase is claimed");
    }
    let rep = renewability_audit(&d.traj, &d.portrait, phases);
    let mut o = Outcome::new();
    for p in &rep.phases {
        o.probes += 1;
        if let (Some(t2), Some(q)) = (p.t2_c, p.q_c) {
            o.margin(t2 / q.abs().max(f64::MIN_POSITIVE));
        }
        let inside = p.q_sign_changes_inside.map(|n| format!(", Q sign changes in (b, bbar): {n}")).unwrap_or_default();
        let head = format!("phase {}{inside}", p.index);
        match p.status {
            CheckStatus::Fail => o.fail(format!("{head}: {}", p.notes.join(", "))),
            CheckStatus::SkippedUndefined => o.skip(format!("{head}: {}", p.notes.join(", "))),
            CheckStatus::Pass => o.note(head),
        }
    }
    o
}

fn check_tango(d: &CaseData) -> Outcome {
    let mut o = Outcome::new();
    let taus = &d.portrait.zeros_v;
    let zs = &d.portrait.zeros_u;
    let k = d.k;
    if k >= 1 {
        let zk = zs[k - 1];
        let inner: Vec<f64> = taus.iter().copied().filter(|&t| t <= zk).collect();
        o.note(format!("{} zero(s) of v on [0, z_{k}]", inner.len()));
        if inner.len() != k {
            o.fail(format!("expected {k} zeros of v on [0, z_k], found {}", inner.len()));
        } else {
            for (i, &t) in inner.iter().enumerate() {
                let lo = if i == 0 { 0.0 } else { zs[i - 1] };
                if !(t > lo && t < zs[i]) {
                    o.fail(format!("tau_{} = {t:.6} not in ({lo:.6}, {:.6})", i + 1, zs[i]));
                }
            }
        }
        let vmax = states_on(d, 0.0, zk, false).iter().fold(0f64, |m, s| m.max(s.v.abs()));
        for (i, &z) in zs.iter().enumerate() {
            let v = d.state(z).v;
            o.margin(v.abs() / vmax);
            if !(v.abs() > POSITIVITY_MARGIN * vmax) {
                o.fail(format!("v(z_{}) = {v:.3e}", i + 1));
            }
        }
    } else if !d.is_bound() {
        return Outcome::vacuous("no zeros of u");
    }
    let relevant: Vec<f64> = if d.is_bound() { taus.clone() } else { taus.iter().copied().filter(|&t| t <= zs[k - 1]).collect() };
    for &t in &relevant {
        let s = d.state(t);
        o.probes += 1;
        if !(s.up * s.vp > 0.0) {
            o.fail(format!("u'v' = {:.3e} at tau = {t:.6}", s.up * s.vp));
        }
    }
    if d.is_bound() {
        let ck = d.crit(k).unwrap_or(0.0);
        let zk = if k == 0 { 0.0 } else { zs[k - 1] };
        let extra: Vec<f64> = taus.iter().copied().filter(|&t| t > zk).collect();
        o.note(format!("zeros of v beyond z_k: {extra:?}, c_k = {ck:.6}"));
        if extra.len() != 1 {
            o.fail(format!("expected one zero of v beyond z_k, found {}", extra.len()));
        } else if !(extra[0] > ck) {
            o.fail(format!("tau_(k+1) = {:.6} not beyond c_k = {ck:.6}", extra[0]));
        }
    }
    o
}

fn check_tau_localization(d: &CaseData) -> Outcome {
    if d.k == 0 {
        return Outcome::vacuous("no zeros of u");
    }
    let mut o = Outcome::new();
    for i in 1..=d.k {
        let ph = &d.portrait.phases[i - 1];
        let Some(r_i) = ph.r else {
            o.skip(format!("r_{i} missing"));
            continue;
        };
        let found: Vec<f64> = d.portrait.zeros_v.iter().copied().filter(|&t| t > ph.start && t < r_i).collect();
        o.probes += 1;
        if found.len() != 1 {
            o.fail(format!("phase {i}: zeros of v in (c_{{i-1}}, r_i) = {found:?}"));
        }
    }
    o
}

fn check_inflection(d: &CaseData) -> Outcome {
    let mut o = Outcome::new();
    if d.k == 0 {
        if !d.is_bound() {
            return Outcome::vacuous("no zeros of u");
        }
        let n = d.portrait.inflections_u.len();
        o.probes = 1;
        if n != 1 {
            o.fail(format!("{n} inflection points on the ground profile"));
        }
        return o;
    }
    let rep = crate::portrait::unique_inflection_check(&d.portrait);
    for iv in &rep.intervals {
        o.probes += 1;
        if iv.inflections.len() != 1 {
            o.fail(format!("{} inflections on ({:.6}, {:.6})", iv.inflections.len(), iv.lo, iv.hi));
        }
    }
    o
}

fn level_crossing(d: &CaseData, lo: f64, hi: f64, mu: f64) -> Option<f64> {
    let g = |r: f64| d.state(r).u.abs() - mu;
    let (glo, ghi) = (g(lo), g(hi));
    if glo == 0.0 {
        return Some(lo);
    }
    if ghi == 0.0 {
        return Some(hi);
    }
    (glo * ghi < 0.0).then(|| roots::refine(g, lo, hi, 1e-13 * hi.max(1.0)))
}

fn phi(d: &CaseData, r: f64) -> f64 {
    let s = d.state(r);
    let a = aux_from_state(&d.case.field, &s);
    a.q / (r.powi(d.case.field.n() as i32 - 1) * s.up.abs())
}

fn check_reflection(d: &CaseData) -> Outcome {
    let phases = if phase_one_applies(d) { d.transition_phases().max(1) } else { 0 };
    if phases == 0 {
        return Outcome::vacuous("needs a bound state with a zero or at least two zeros");
    }
    let al = d.case.field.critical_amplitudes().alpha_lower;
    let mut o = Outcome::new();
    for i in 1..=phases {
        let ph = &d.portrait.phases[i - 1];
        let (Some(c), Some(b), Some(bb)) = (ph.end, ph.b, ph.b_bar) else {
            o.skip(format!("phase {i} truncated"));
            continue;
        };
        let top = d.state(c).u.abs();
        for j in 0..16 {
            let mu = al + (top - al) * j as f64 / 16.0;
            let left = if j == 0 { Some(b) } else { level_crossing(d, ph.start.max(d.traj.r_start()), b, mu) };
            let right = if j == 0 { Some(bb) } else { level_crossing(d, bb, c, mu) };
            let (Some(rl), Some(rr)) = (left, right) else {
                o.fail(format!("phase {i}: level {mu:.6} not crossed"));
                continue;
            };
            let (pl, pr) = (phi(d, rl), phi(d, rr));
            o.probes += 1;
            let scale = pl.abs().max(pr.abs());
            o.margin((pr - pl) / scale);
            if !(pr - pl > -POSITIVITY_MARGIN * scale) {
                o.fail(format!("phase {i}, mu = {mu:.6}: phi(rbar) = {pr:.6e} <= phi(r) = {pl:.6e}"));
            }
        }
    }
    o
}

fn check_bridge(d: &CaseData) -> Outcome {
    let f = d.case.field;
    if !(f.n() == 3 && f.p() < 2.0) {
        return Outcome::vacuous("only claimed for n = 3, p < 2");
    }
    let phases = d.transition_phases();
    if phases == 0 {
        return Outcome::vacuous("no complete nodal phase is claimed");
    }
    let mut o = Outcome::new();
    for i in 1..=phases {
        match bridge_integral(&d.traj, &d.portrait, i, None) {
            Ok(bi) => {
                o.probes += 1;
                let head = format!("I_{i} = {:.6e} over ({:.6}, {:.6})", bi.value, bi.b, bi.tau);
                match bi.flag {
                    BridgeFlag::EmptyRange => o.note(format!("{head}: tau_{i} <= b_{i}, integral empty")),
                    BridgeFlag::SingularityWarning => o.fail(format!("{head}: u' vanishes inside")),
                    BridgeFlag::Ok => {
                        o.margin(bi.value);
                        if bi.value > 0.0 {
                            o.note(head);
                        } else {
                            o.fail(head);
                        }
                    }
                }
            }
            Err(e) => o.skip(format!("phase {i}: {e}")),
        }
    }
    o
}

fn residual_probes(d: &CaseData, plan: &VerificationPlan) -> Vec<f64> {
    let lo = inner_probe_radius(&d.case.field, d.alpha);
    let hi = d.r_end - 1e-3 * d.r_end.max(1.0);
    probe_radii(&d.portrait, lo, hi, plan.probes)
}

fn check_residuals(d: &CaseData, plan: &VerificationPlan) -> Outcome {
    if d.is_constant() {
        return Outcome::vacuous("constant solution, u' vanishes identically");
    }
    let probes = residual_probes(d, plan);
    let mut o = Outcome::new();
    o.probes = probes.len();
    match identity_residuals(&d.traj, &Identity::all(), &probes) {
        Ok(rep) => {
            let worst = rep.identities.iter().max_by(|a, b| a.max_rel.total_cmp(&b.max_rel));
            o.worst = Some(rep.max_rel());
            if let Some(w) = worst {
                o.note(format!("worst {} = {:.3e} at r = {:.6}", w.identity, w.max_rel, w.worst_r));
            }
            for id in rep.identities.iter().filter(|x| !(x.max_rel < RESIDUAL_LIMIT)) {
                o.fail(format!("{} residual {:.3e}", id.identity, id.max_rel));
            }
        }
        Err(e) => o.fail(e.to_string()),
    }
    o
}

fn check_connection(d: &CaseData, plan: &VerificationPlan) -> Outcome {
    if d.is_constant() {
        return Outcome::vacuous("constant solution, u' vanishes identically");
    }
    let probes = residual_probes(d, plan);
    let mut o = Outcome::new();
    o.probes = probes.len();
    match identity_residuals(&d.traj, &[], &probes) {
        Ok(rep) => {
            o.worst = Some(rep.connection_max_rel);
            if !(rep.connection_max_rel < CONNECTION_LIMIT) {
                o.fail(format!("relative residual {:.3e}", rep.connection_max_rel));
            }
        }
        Err(e) => o.fail(e.to_string()),
    }
    o
}

fn check_tail(d: &CaseData) -> Outcome {
    if !matches!(d.case.family, CaseFamily::BoundBracket(_)) {
        return Outcome::vacuous("only claimed for BoundBracket cases");
    }
    let Some(s) = d.traj.samples.iter().rev().find(|s| s.u.abs() > 1e-5 && s.u.abs() < 1e-3) else {
        return Outcome::skipped("|u| never entered (1e-5, 1e-3)");
    };
    let dev = (s.up / s.u + 1.0).abs();
    let mut o = Outcome::new();
    o.probes = 1;
    o.worst = Some(dev);
    let head = format!("|u'/u + 1| = {dev:.4} at r = {:.4}, |u| = {:.3e}", s.r, s.u.abs());
    if dev < TAIL_SLOPE_LIMIT {
        o.note(head);
    } else {
        o.fail(head);
    }
    o
}

fn check_v_divergence(d: &CaseData) -> Outcome {
    if !matches!(d.case.family, CaseFamily::BoundBracket(_)) {
        return Outcome::vacuous("only claimed for BoundBracket cases");
    }
    let zk = if d.k == 0 { 0.0 } else { d.portrait.zeros_u[d.k - 1] };
    let Some(&tau) = d.portrait.zeros_v.iter().find(|&&t| t > zk) else {
        return Outcome::skipped("no zero of v beyond z_k");
    };
    if tau + 1.0 >= d.r_end {
        return Outcome::skipped("tau_(k+1) + 1 beyond the resolved range");
    }
    let (v_ref, v_end) = (d.state(tau + 1.0).v.abs(), d.state(d.r_end).v.abs());
    let ratio = v_end / v_ref;
    let mut o = Outcome::new();
    o.probes = 2;
    o.worst = Some(ratio);
    let head = format!("|v(r_end)| / |v(tau+1)| = {ratio:.3e} (r_end = {:.4})", d.r_end);
    if ratio > V_GROWTH {
        o.note(head);
    } else {
        o.fail(head);
    }
    o
}

fn check_ladder_jump(d: &CaseData, plan: &VerificationPlan) -> Outcome {
    let (Some(e), Some(k)) = (d.entry, d.case.family.bracket_k()) else {
        return Outcome::vacuous("not a bracket family");
    };
    let mut o = Outcome::new();
    let a = e.midpoint();
    for (alpha, want) in [(e.alpha_hi + JUMP_OFFSET * a, k + 1), (e.alpha_lo - JUMP_OFFSET * a, k)] {
        o.probes += 1;
        match node_count_of_alpha(&d.case.field, alpha, &plan.controls) {
            Ok(nc) if nc.is_final && nc.count == want => {}
            Ok(nc) => o.fail(format!("N({alpha:.10}) = {} (final: {}), expected {want}", nc.count, nc.is_final)),
            Err(err) => o.fail(err.to_string()),
        }
    }
    o
}

fn check_tolerance_agreement(d: &CaseData, plan: &VerificationPlan) -> Outcome {
    let mut o = Outcome::new();
    let tight = VerificationPlan { controls: plan.controls.tightened(10.0), ..plan.clone() };
    let other = match prepare_case(&d.case, &tight) {
        Ok(x) => x,
        Err(e) => {
            o.fail(format!("tighter run failed: {e}"));
            return o;
        }
    };
    let level = plan.controls.rel_tol.max(plan.controls.abs_tol);
    if let (Some(a), Some(b)) = (d.entry, other.entry) {
        let allowed = 10.0 * plan.bracket_tol.max(level) * a.midpoint();
        let diff = (a.midpoint() - b.midpoint()).abs();
        o.probes += 1;
        o.margin(1.0 - diff / allowed);
        if diff > allowed {
            o.fail(format!("bracket midpoints differ by {diff:.3e} (allowed {allowed:.3e})"));
        }
    }
    let (za, zb) = (&d.portrait.zeros_u, &other.portrait.zeros_u);
    if za.len() != zb.len() {
        o.fail(format!("zero counts differ: {} vs {}", za.len(), zb.len()));
        return o;
    }
    let span = d.positivity_end().unwrap_or(d.r_end);
    let pairs = za.iter().zip(zb).chain(d.portrait.crits_u.iter().zip(&other.portrait.crits_u));
    for (x, y) in pairs.filter(|(x, _)| **x <= span) {
        o.probes += 1;
        let allowed = 10.0 * level * x.max(1.0);
        o.margin(1.0 - (x - y).abs() / allowed);
        if (x - y).abs() > allowed {
            o.fail(format!("event at {x:.10} moved by {:.3e}", (x - y).abs()));
        }
    }
    o
}

fn run_check(d: &CaseData, plan: &VerificationPlan, check: CheckId) -> Outcome {
    match check {
        CheckId::EnergyMonotone => check_energy(d),
        CheckId::VelocityBound => check_velocity(d),
        CheckId::PositivityEpp => check_positivity(d),
        CheckId::OmegaIncreasing => check_omega(d),
        CheckId::PohozaevRatio => check_pohozaev_ratio(d),
        CheckId::PhaseOneWindows => check_phase_one(d),
        CheckId::PhaseTransitions => check_phase_transitions(d),
        CheckId::Tango => check_tango(d),
        CheckId::TauLocalization => check_tau_localization(d),
        CheckId::UniqueInflection => check_inflection(d),
        CheckId::Reflection => check_reflection(d),
        CheckId::BridgeIntegral => check_bridge(d),
        CheckId::IdentityResiduals => check_residuals(d, plan),
        CheckId::ConnectionIdentity => check_connection(d, plan),
        CheckId::TailAsymptotics => check_tail(d),
        CheckId::VDivergence => check_v_divergence(d),
        CheckId::LadderJump => check_ladder_jump(d, plan),
        CheckId::ToleranceAgreement => check_tolerance_agreement(d, plan),
    }
}

/// Runs every check on every case. Cases run in parallel; the report lists
/// records in plan order.
pub fn run_checks(plan: &VerificationPlan) -> Result<VerificationReport> {
    plan.validate()?;
    let per_case: Vec<Vec<CheckRecord>> = plan
        .cases
        .par_iter()
        .map(|case| {
            let label = case.label();
            match prepare_case(case, plan) {
                Ok(d) => plan.checks.iter().map(|&c| run_check(&d, plan, c).record(&label, c)).collect(),
                Err(e) => plan
                    .checks
                    .iter()
                    .map(|&c| {
                        let mut o = Outcome::new();
                        o.fail(format!("case setup failed: {e}"));
                        o.record(&label, c)
                    })
                    .collect(),
            }
        })
        .collect();
    Ok(VerificationReport { records: per_case.into_iter().flatten().collect() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic3() -> FieldParams {
        FieldParams::new(3, 3.0).unwrap()
    }

    #[test]
    fn constant_case_passes_vacuously() {
        let plan = VerificationPlan::new(
            vec![VerificationCase { field: cubic3(), family: CaseFamily::Explicit(1.0) }],
            CheckId::ALL.to_vec(),
        );
        let rep = run_checks(&plan).unwrap();
        assert_eq!(rep.records.len(), CheckId::ALL.len());
        for r in &rep.records {
            assert_eq!(r.status, CheckStatus::Pass, "{r:?}");
        }
    }

    #[test]
    fn empty_plans_are_malformed() {
        let case = VerificationCase { field: cubic3(), family: CaseFamily::Explicit(2.0) };
        assert!(run_checks(&VerificationPlan::new(vec![], CheckId::ALL.to_vec())).is_err());
        assert!(run_checks(&VerificationPlan::new(vec![case], vec![])).is_err());
    }

    #[test]
    fn check_ids_round_trip_through_names() {
        for c in CheckId::ALL {
            assert_eq!(CheckId::parse(&c.name()).unwrap(), c);
        }
        assert!(CheckId::parse("nope").is_err());
    }

    #[test]
    fn nodal_shot_structure() {
        let plan = VerificationPlan::new(
            vec![VerificationCase { field: cubic3(), family: CaseFamily::Oscillatory(20.0) }],
            vec![
                CheckId::EnergyMonotone,
                CheckId::VelocityBound,
                CheckId::PositivityEpp,
                CheckId::OmegaIncreasing,
                CheckId::PohozaevRatio,
                CheckId::PhaseOneWindows,
                CheckId::PhaseTransitions,
                CheckId::Tango,
                CheckId::TauLocalization,
                CheckId::UniqueInflection,
                CheckId::Reflection,
            ],
        );
        let rep = run_checks(&plan).unwrap();
        for r in &rep.records {
            assert_eq!(r.status, CheckStatus::Pass, "{r:?}");
        }
    }

    #[test]
    fn truncated_phase_is_skipped() {
        let fp = cubic3();
        let ctl = IntegratorControls { r_max: 0.2, ..verification_controls() };
        let t = integrate(&ProblemParams::new(fp, 20.0).with_controls(ctl), StopPolicy::full_range()).unwrap();
        let pp = detect_events(&t).unwrap();
        let rep = renewability_audit(&t, &pp, 1);
        assert_eq!(rep.status(), CheckStatus::SkippedUndefined);
    }
}
