//! Energy, Pohozaev and variation functionals evaluated pointwise on a
//! trajectory, the derivative identities they satisfy, and the bridge
//! integral used in low-exponent three-dimensional cases.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::{pow_abs, FieldParams};
use crate::integrator::{State, Trajectory};
use crate::portrait::PhasePortrait;
use crate::quadrature;

/// Values of every functional at one radius. Entries that divide by `u` or `u'`
/// are `None` where that factor vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxSample {
    pub r: f64,
    pub e: f64,
    pub e_hat: f64,
    pub p: f64,
    pub p1: f64,
    pub p2: f64,
    pub omega: Option<f64>,
    pub rho: f64,
    pub q: f64,
    pub q1: f64,
    pub q2: f64,
    pub qn: f64,
    pub m: f64,
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub b0: Option<f64>,
    pub phi_n: Option<f64>,
    pub varpi: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParametricSample {
    pub a: f64,
    pub w_a: f64,
    pub f_a: f64,
    pub b_a: Option<f64>,
}

fn nonzero(x: f64) -> Option<f64> {
    (x != 0.0).then_some(x)
}

/// Pointwise functionals from a state; the core of [`eval_aux`].
pub fn aux_from_state(field: &FieldParams, s: &State) -> AuxSample {
    let n = field.nf();
    let p = field.p();
    let State { r, u, up, v, vp } = *s;
    let rn1 = r.powi(field.n() as i32 - 1);
    let rn = rn1 * r;
    let f = field.f(u);
    let fp = field.f_prime(u);
    let big_f = field.big_f(u);
    let e = 0.5 * up * up + big_f;
    let pz = 2.0 * rn * e + (n - 2.0) * rn1 * u * up;
    let q = rn * (up * vp + f * v) + (n - 2.0) * rn1 * up * v;
    let m = rn1 * (up * v - u * vp);
    let inv_up = nonzero(up).map(|x| 1.0 / x);
    AuxSample {
        r,
        e,
        e_hat: rn1 * rn1 * e,
        p: pz,
        p1: pz + rn * (u * f - 2.0 * big_f),
        p2: pz + rn * ((n - 2.0) / n * u * f - 2.0 * big_f),
        omega: nonzero(u).map(|u| -r * up / u),
        rho: rn1 * (fp * up * v - f * vp),
        q,
        q1: q + rn1 * up * v,
        q2: q + 2.0 * rn1 * up * v,
        qn: q + n * rn1 * up * v,
        m,
        t1: field.g1(u).ok().map(|g| q - g * m),
        t2: field.g2(u).ok().map(|g| q - g * m),
        b0: inv_up.map(|iu| q - 2.0 * big_f * rn1 * v * iu),
        phi_n: inv_up.map(|iu| (q + n * rn1 * up * v) * iu * iu / r),
        varpi: inv_up.map(|iu| (p - 1.0) / (p + 1.0) * rn1 * v * iu * pow_abs(u, p + 1.0)),
    }
}

pub fn eval_aux(traj: &Trajectory, r: f64) -> Result<AuxSample> {
    let s = traj.eval(r)?;
    Ok(aux_from_state(&traj.field, &s))
}

pub fn parametric_from_state(field: &FieldParams, s: &State, a: f64) -> ParametricSample {
    let aux = aux_from_state(field, s);
    let rn1 = s.r.powi(field.n() as i32 - 1);
    let w_a = aux.q - a * aux.m;
    let f_a = field.big_f_a(s.u, a);
    ParametricSample { a, w_a, f_a, b_a: nonzero(s.up).map(|up| w_a - 2.0 * f_a * rn1 * s.v / up) }
}

pub fn eval_parametric(traj: &Trajectory, r: f64, a: f64) -> Result<ParametricSample> {
    let s = traj.eval(r)?;
    Ok(parametric_from_state(&traj.field, &s, a))
}

/// Derivative identities `G' = R` checked by finite differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Identity {
    Ep,
    Pr,
    Prd,
    P2p,
    Prn,
    Rhop,
    Qp,
    Q1p,
    Q2p,
    Qnp,
    Mp,
    Wap(f64),
    T1p,
    T2p,
    T2pVarpi,
    Bop,
    Bap(f64),
    Rnup,
    Rnvp,
    Uvp,
    Varp,
    H,
    Dvarn,
    Dvup,
    Omega,
    Riccati,
}

/// Deformation parameters used for the `a`-families.
pub const SAMPLE_A: [f64; 3] = [-0.5, 0.75, 1.5];

impl Identity {
    pub fn all() -> Vec<Identity> {
        use Identity::*;
        let mut v = vec![Ep, Pr, Prd, P2p, Prn, Rhop, Qp, Q1p, Q2p, Qnp, Mp];
        v.extend(SAMPLE_A.iter().map(|&a| Wap(a)));
        v.extend([T1p, T2p, T2pVarpi, Bop]);
        v.extend(SAMPLE_A.iter().map(|&a| Bap(a)));
        v.extend([Rnup, Rnvp, Uvp, Varp, H, Dvarn, Dvup, Omega, Riccati]);
        v
    }

    pub fn name(&self) -> String {
        use Identity::*;
        match self {
            Ep => "ep".into(),
            Pr => "Pr".into(),
            Prd => "prd".into(),
            P2p => "P2p".into(),
            Prn => "prn".into(),
            Rhop => "rhop".into(),
            Qp => "qp".into(),
            Q1p => "q1p".into(),
            Q2p => "q2p".into(),
            Qnp => "qnp".into(),
            Mp => "mp".into(),
            Wap(a) => format!("wap[a={a}]"),
            T1p => "t1p".into(),
            T2p => "t2p".into(),
            T2pVarpi => "t2p-varpi".into(),
            Bop => "bop".into(),
            Bap(a) => format!("bap[a={a}]"),
            Rnup => "rnup".into(),
            Rnvp => "rnvp".into(),
            Uvp => "uvp".into(),
            Varp => "varp".into(),
            H => "H".into(),
            Dvarn => "dvarn".into(),
            Dvup => "dvup".into(),
            Omega => "omega".into(),
            Riccati => "riccati".into(),
        }
    }

    fn needs_u(&self) -> bool {
        use Identity::*;
        matches!(self, Rhop | T1p | T2p | T2pVarpi | Omega | Riccati)
    }

    fn needs_up(&self) -> bool {
        use Identity::*;
        matches!(self, T2pVarpi | Bop | Bap(_) | Varp | Dvarn | Dvup)
    }

    /// `G` alone, used for the difference quotient.
    fn lhs(&self, field: &FieldParams, s: &State) -> Option<f64> {
        self.eval(field, s).map(|(g, _)| g)
    }

    /// `(G, R)` at one state.
    pub fn eval(&self, field: &FieldParams, s: &State) -> Option<(f64, f64)> {
        use Identity::*;
        let n = field.nf();
        let p = field.p();
        let crit = field.critical_amplitudes();
        let State { r, u, up, v, vp } = *s;
        let rn1 = r.powi(field.n() as i32 - 1);
        let rn = rn1 * r;
        let f = field.f(u);
        let fp = field.f_prime(u);
        let big_f = field.big_f(u);
        let a = aux_from_state(field, s);
        let up_ok = up != 0.0;
        let u_ok = u != 0.0;
        let upu = |den_u: f64| -> f64 { u * up / pow_abs(u, p + 1.0) * den_u };
        Some(match self {
            Ep => (a.e, -(n - 1.0) * up * up / r),
            Pr => (a.p, rn1 * (2.0 * n * big_f - (n - 2.0) * u * f)),
            Prd => (a.p, 2.0 * rn1 * u * u * (pow_abs(u / crit.alpha_upper, p - 1.0) - 1.0)),
            P2p => (
                a.p2,
                -(4.0 / n) * rn * u * up * (pow_abs(crit.alpha_lower * u / crit.alpha_upper, p - 1.0) - 1.0),
            ),
            Prn => (a.p / rn, -n * a.p2 / (rn * r)),
            Rhop => (a.rho, field.f_second(u)? * rn1 * up * up * v),
            Qp => (a.q, 2.0 * rn1 * f * v),
            Q1p => (a.q1, rn1 * (up * vp + f * v)),
            Q2p => (a.q2, 2.0 * rn1 * up * vp),
            Qnp => (a.qn, rn1 * (n * up * vp - (n - 2.0) * f * v)),
            Mp => (a.m, (p - 1.0) * rn1 * u * pow_abs(u, p - 1.0) * v),
            Wap(k) => (a.q - k * a.m, 2.0 * rn1 * u * v * field.kappa_a(u, *k)),
            T1p if u_ok => (a.t1?, -2.0 * upu(a.m)),
            T2p if u_ok => (a.t2?, (p - 1.0) * rn1 * u * v - (p + 1.0) * upu(a.m)),
            T2pVarpi if u_ok && up_ok => (a.t2?, -(p + 1.0) * upu(a.m - a.varpi?)),
            Bop => (a.b0?, -2.0 * big_f * a.phi_n?),
            Bap(k) => {
                let ps = parametric_from_state(field, s, *k);
                (ps.b_a?, -2.0 * ps.f_a * a.phi_n?)
            }
            Rnup => (rn1 * up, -rn1 * f),
            Rnvp => (rn1 * vp, -rn1 * fp * v),
            Uvp => (up * vp + f * v, -2.0 * (n - 1.0) / r * up * vp),
            Varp if up_ok => (a.q / (rn1 * up), f * a.q2 / (rn1 * up * up)),
            H => (a.e_hat, 2.0 * (n - 1.0) * r.powi(2 * field.n() as i32 - 3) * big_f),
            Dvarn => (rn1 * v / nonzero(up)?, a.phi_n?),
            Dvup if up_ok => (v / up, a.q1 / (rn * up * up)),
            Omega => (a.omega?, a.p1 / (rn1 * u * u)),
            Riccati if u_ok => {
                let w = -up / u;
                (w, w * w - (n - 1.0) / r * w - 1.0 + pow_abs(u, p - 1.0))
            }
            _ => return None,
        })
    }
}

/// Finite-difference step for a probe at `r`.
pub fn fd_step(r: f64) -> f64 {
    1e-5 * r.max(1.0)
}

/// Half-width of the stencil neighbourhood that must be free of zeros of `u`
/// (or `u'`) for singular identities.
pub fn exclusion_radius(r: f64) -> f64 {
    4.0 * fd_step(r) + 1e-6 * r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityResidual {
    pub identity: String,
    pub max_rel: f64,
    pub worst_r: f64,
    pub probes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub identities: Vec<IdentityResidual>,
    pub connection_max_rel: f64,
    pub probes: usize,
}

impl ResidualReport {
    pub fn max_rel(&self) -> f64 {
        self.identities.iter().map(|x| x.max_rel).fold(0.0, f64::max)
    }
}

/// Relative size of `|fd - R|`, scaled by `max(|R|, |G|/r)` so that
/// identities whose right side passes through zero stay meaningful.
fn relative(fd: f64, rhs: f64, g: f64, r: f64) -> f64 {
    let scale = rhs.abs().max(g.abs() / r).max(f64::MIN_POSITIVE);
    (fd - rhs).abs() / scale
}

fn sign_changes_near(traj: &Trajectory, r: f64, pick: impl Fn(&State) -> f64) -> Result<bool> {
    let d = exclusion_radius(r);
    let lo = traj.eval((r - d).max(traj.r_start()))?;
    let mid = traj.eval(r)?;
    let hi = traj.eval((r + d).min(traj.r_stop()))?;
    let (a, b, c) = (pick(&lo), pick(&mid), pick(&hi));
    Ok(a * b <= 0.0 || b * c <= 0.0)
}

/// Residual of one identity at one probe.
pub fn identity_residual_at(traj: &Trajectory, id: Identity, r: f64) -> Result<f64> {
    let h = fd_step(r);
    let undefined = || LabError::ProbeUndefined { identity: id.name(), r };
    if r - 2.0 * h <= traj.r_start() || r + 2.0 * h >= traj.r_stop() {
        return Err(LabError::OutOfRange { r, lo: traj.r_start() + 2.0 * h, hi: traj.r_stop() - 2.0 * h });
    }
    if id.needs_u() && sign_changes_near(traj, r, |s| s.u)? {
        return Err(undefined());
    }
    if id.needs_up() && sign_changes_near(traj, r, |s| s.up)? {
        return Err(undefined());
    }
    let field = &traj.field;
    let s = traj.eval(r)?;
    let (g, rhs) = id.eval(field, &s).ok_or_else(undefined)?;
    let at = |x: f64| -> Result<f64> { id.lhs(field, &traj.eval(x)?).ok_or_else(undefined) };
    let fd = (at(r - 2.0 * h)? - 8.0 * at(r - h)? + 8.0 * at(r + h)? - at(r + 2.0 * h)?) / (12.0 * h);
    Ok(relative(fd, rhs, g, r))
}

/// Residual of `Q - P v/u = omega (M - varpi)` relative to `|Q| + |P v/u|`.
pub fn connection_residual(field: &FieldParams, s: &State) -> Option<f64> {
    let a = aux_from_state(field, s);
    if s.u == 0.0 || s.up == 0.0 {
        return None;
    }
    let pvu = a.p * s.v / s.u;
    let lhs = a.q - pvu;
    let rhs = a.omega? * (a.m - a.varpi?);
    Some((lhs - rhs).abs() / (a.q.abs() + pvu.abs()).max(f64::MIN_POSITIVE))
}

/// Residuals of the given identities over the given probes.
pub fn identity_residuals(traj: &Trajectory, identities: &[Identity], probes: &[f64]) -> Result<ResidualReport> {
    let mut out = Vec::with_capacity(identities.len());
    for &id in identities {
        let mut worst = (0.0f64, f64::NAN);
        for &r in probes {
            let rel = identity_residual_at(traj, id, r)?;
            if !(rel <= worst.0) {
                worst = (rel, r);
            }
        }
        out.push(IdentityResidual { identity: id.name(), max_rel: worst.0, worst_r: worst.1, probes: probes.len() });
    }
    let mut conn = 0.0f64;
    for &r in probes {
        let s = traj.eval(r)?;
        if let Some(c) = connection_residual(&traj.field, &s) {
            conn = conn.max(c);
        }
    }
    Ok(ResidualReport { identities: out, connection_max_rel: conn, probes: probes.len() })
}

/// Smallest probe radius. Closer to the origin several functionals are
/// `O(r^{n+2})` differences of `O(r^n)` terms and lose most of their digits.
/// The length scale is the local oscillation length `|f'(alpha)|^{-1/2}`.
pub fn inner_probe_radius(field: &FieldParams, alpha: f64) -> f64 {
    0.3 / field.f_prime(alpha).abs().max(1.0).sqrt()
}

/// Van der Corput sequence in base 2.
pub fn van_der_corput(mut i: u64) -> f64 {
    let mut x = 0.0;
    let mut denom = 1.0;
    while i > 0 {
        denom *= 2.0;
        x += (i & 1) as f64 / denom;
        i >>= 1;
    }
    x
}

/// Distance probes keep from zeros of `u` and `u'`. Identities that divide by
/// these blow up like `(r - e)^-2`, and the five-point quotient resolves them
/// to about `12 (h / |r - e|)^4`.
pub fn probe_clearance(r: f64) -> f64 {
    200.0 * fd_step(r)
}

/// `count` low-discrepancy probe radii in `[lo, hi]` that keep clear of the
/// zeros of `u` and `u'` listed in the portrait.
pub fn probe_radii(portrait: &PhasePortrait, lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let events: Vec<f64> = portrait.zeros_u.iter().chain(&portrait.crits_u).copied().collect();
    let clear = |r: f64| events.iter().all(|&e| (e - r).abs() > probe_clearance(r));
    let mut out = Vec::with_capacity(count);
    let mut i = 1u64;
    while out.len() < count && i < 1_000_000 {
        let r = lo + (hi - lo) * van_der_corput(i);
        i += 1;
        if clear(r) {
            out.push(r);
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BridgeFlag {
    Ok,
    /// `tau_i <= b_i`: the integral is over an empty range and reported as 0.
    EmptyRange,
    /// `u'` vanishes inside the range.
    SingularityWarning,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeIntegral {
    pub index: usize,
    pub b: f64,
    pub tau: f64,
    pub u_tilde: f64,
    pub value: f64,
    pub error: f64,
    pub flag: BridgeFlag,
}

/// `I_i = ∫_{b_i}^{tau_i} u^2 (1 - |u/ũ|^{p-1}) Q_n / (r u'^2) dr`, where
/// `tau_i` is the zero of `v` in `(c_{i-1}, r_i)`.
pub fn bridge_integral(traj: &Trajectory, portrait: &PhasePortrait, i: usize, u_tilde: Option<f64>) -> Result<BridgeIntegral> {
    let ph = portrait
        .phases
        .iter()
        .find(|ph| ph.index == i)
        .ok_or_else(|| LabError::MissingEvents(format!("phase {i} not resolved")))?;
    let b = ph.b.ok_or_else(|| LabError::MissingEvents(format!("b_{i} not found")))?;
    let r_i = ph.r.ok_or_else(|| LabError::MissingEvents(format!("r_{i} not found")))?;
    let tau = portrait
        .zeros_v
        .iter()
        .copied()
        .find(|&t| t > ph.start && t < r_i)
        .ok_or_else(|| LabError::MissingEvents(format!("no zero of v in phase {i} before r_{i}")))?;
    let field = traj.field;
    let u_tilde = u_tilde.unwrap_or_else(|| traj.eval(b).map(|s| s.u.abs()).unwrap_or(field.critical_amplitudes().alpha_lower));
    if tau <= b {
        return Ok(BridgeIntegral { index: i, b, tau, u_tilde, value: 0.0, error: 0.0, flag: BridgeFlag::EmptyRange });
    }
    let crosses = portrait.crits_u.iter().any(|&c| c > b && c < tau);
    let p = field.p();
    let integrand = |r: f64| {
        let s = traj.eval(r).expect("inside range");
        let a = aux_from_state(&field, &s);
        let w = 1.0 - pow_abs(s.u / u_tilde, p - 1.0);
        s.u * s.u * w * a.phi_n.unwrap_or(f64::NAN)
    };
    let q = quadrature::integrate(integrand, b, tau, 1e-14, 1e-10, 4000);
    let flag = if crosses || !q.value.is_finite() { BridgeFlag::SingularityWarning } else { BridgeFlag::Ok };
    Ok(BridgeIntegral { index: i, b, tau, u_tilde, value: q.value, error: q.error, flag })
}

/// `D_alpha = sqrt(2 (F(alpha) + |F(1)|))`, a bound on `|u'|`.
pub fn velocity_bound(field: &FieldParams, alpha: f64) -> f64 {
    (2.0 * (field.big_f(alpha) + field.big_f(1.0).abs())).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{integrate, IntegratorControls, ProblemParams, StopPolicy};
    use crate::portrait::detect_events;

    fn traj(n: u32, p: f64, alpha: f64, r_max: f64) -> Trajectory {
        let fp = FieldParams::new(n, p).unwrap();
        let c = IntegratorControls { r_max, ..Default::default() };
        integrate(&ProblemParams::new(fp, alpha).with_controls(c), StopPolicy::full_range()).unwrap()
    }

    #[test]
    fn start_values_follow_the_series() {
        let t = traj(3, 3.0, 5.0, 5.0);
        let s = t.samples[0];
        let a = aux_from_state(&t.field, &s);
        let e0 = t.field.big_f(5.0);
        assert!((a.e - e0).abs() < 1e-9 * e0);
        // Q ~ 2 f(alpha) r^n / n and M ~ (alpha f'(alpha) - f(alpha)) r^n / n near the origin.
        let rn = s.r.powi(3);
        assert!((a.q / (2.0 * t.field.f(5.0) * rn / 3.0) - 1.0).abs() < 1e-6);
        let m0 = (5.0 * t.field.f_prime(5.0) - t.field.f(5.0)) * rn / 3.0;
        assert!((a.m / m0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn deformed_bridge_at_g2_is_t2() {
        let t = traj(3, 3.0, 5.0, 5.0);
        let r = 0.4;
        let s = t.eval(r).unwrap();
        let a = t.field.g2(s.u).unwrap();
        let ps = eval_parametric(&t, r, a).unwrap();
        let aux = eval_aux(&t, r).unwrap();
        assert!(ps.f_a.abs() < 1e-12);
        assert!((ps.b_a.unwrap() - aux.t2.unwrap()).abs() < 1e-10 * aux.t2.unwrap().abs());
    }

    #[test]
    fn undefined_entries_at_zeros() {
        let fp = FieldParams::new(3, 3.0).unwrap();
        let a = aux_from_state(&fp, &State { r: 1.0, u: 0.0, up: -1.0, v: 1.0, vp: 0.5 });
        assert!(a.omega.is_none() && a.t1.is_none() && a.t2.is_none());
        assert!(a.b0.is_some());
        let a = aux_from_state(&fp, &State { r: 1.0, u: 2.0, up: 0.0, v: 1.0, vp: 0.5 });
        assert!(a.b0.is_none() && a.phi_n.is_none() && a.varpi.is_none());
    }

    #[test]
    fn identities_hold_on_a_nodal_shot() {
        let t = traj(3, 3.0, 8.0, 12.0);
        let pp = detect_events(&t).unwrap();
        let probes = probe_radii(&pp, inner_probe_radius(&t.field, 8.0), 11.9, 60);
        assert_eq!(probes.len(), 60);
        let rep = identity_residuals(&t, &Identity::all(), &probes).unwrap();
        for id in &rep.identities {
            assert!(id.max_rel < 1e-6, "{id:?}");
        }
        assert!(rep.connection_max_rel < 1e-9, "{}", rep.connection_max_rel);
    }

    #[test]
    fn probe_at_a_zero_is_undefined() {
        let t = traj(3, 3.0, 8.0, 12.0);
        let pp = detect_events(&t).unwrap();
        let z = pp.zeros_u[0];
        assert!(matches!(identity_residual_at(&t, Identity::Omega, z), Err(LabError::ProbeUndefined { .. })));
        assert!(identity_residual_at(&t, Identity::Qp, z).is_ok());
    }

    #[test]
    fn van_der_corput_prefix() {
        let v: Vec<f64> = (1..6).map(van_der_corput).collect();
        assert_eq!(v, vec![0.5, 0.25, 0.75, 0.125, 0.625]);
    }

    #[test]
    fn velocity_bound_for_cubic() {
        let fp = FieldParams::new(3, 3.0).unwrap();
        // F(2) = -2 + 4 = 2, |F(1)| = 1/4.
        assert!((velocity_bound(&fp, 2.0) - 4.5f64.sqrt()).abs() < 1e-14);
    }
}
