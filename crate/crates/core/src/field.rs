//! The nonlinearity `f(u) = -u + |u|^{p-1} u`, its potential and the
//! amplitude thresholds that organise the phase portrait.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// `|u|^e`, computed as `exp(e ln|u|)` so integer and fractional exponents
/// take the same path. Returns 0 at `u = 0` (only meaningful for `e > 0`).
#[inline]
pub fn pow_abs(u: f64, e: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        (e * u.abs().ln()).exp()
    }
}

/// Dimension and exponent of the problem, validated on construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawField")]
pub struct FieldParams {
    n: u32,
    p: f64,
}

#[derive(Deserialize)]
struct RawField {
    n: u32,
    p: f64,
}

impl TryFrom<RawField> for FieldParams {
    type Error = LabError;
    fn try_from(raw: RawField) -> Result<Self> {
        FieldParams::new(raw.n, raw.p)
    }
}

/// The two amplitudes `alpha_lower` (where `F` vanishes) and `alpha_upper`
/// (where the Pohozaev rate changes sign).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalAmplitudes {
    pub alpha_lower: f64,
    pub alpha_upper: f64,
}

impl FieldParams {
    /// Requires `n >= 3` and `1 < p < (n+2)/(n-2)`.
    pub fn new(n: u32, p: f64) -> Result<Self> {
        if n < 3 {
            return Err(LabError::InvalidParameter(format!("dimension n = {n} must be at least 3")));
        }
        if !p.is_finite() || p <= 1.0 {
            return Err(LabError::InvalidParameter(format!("exponent p = {p} must exceed 1")));
        }
        let pc = Self::critical_exponent_for(n);
        if p >= pc {
            return Err(LabError::InvalidParameter(format!(
                "exponent p = {p} is not subcritical (needs p < {pc})"
            )));
        }
        Ok(Self { n, p })
    }

    pub fn critical_exponent_for(n: u32) -> f64 {
        (n as f64 + 2.0) / (n as f64 - 2.0)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn nf(&self) -> f64 {
        self.n as f64
    }

    pub fn f(&self, u: f64) -> f64 {
        -u + u * pow_abs(u, self.p - 1.0)
    }

    pub fn f_prime(&self, u: f64) -> f64 {
        -1.0 + self.p * pow_abs(u, self.p - 1.0)
    }

    /// `f''(u) = p(p-1) u |u|^{p-3}`; `None` at `u = 0`.
    pub fn f_second(&self, u: f64) -> Option<f64> {
        if u == 0.0 {
            return None;
        }
        Some(self.p * (self.p - 1.0) * u.signum() * pow_abs(u, self.p - 2.0))
    }

    /// Potential `F(u) = -u^2/2 + |u|^{p+1}/(p+1)`.
    pub fn big_f(&self, u: f64) -> f64 {
        -0.5 * u * u + pow_abs(u, self.p + 1.0) / (self.p + 1.0)
    }

    /// Deformed potential `F_a(u) = -u^2/2 + (1 - a(p-1)/2)|u|^{p+1}/(p+1)`.
    pub fn big_f_a(&self, u: f64, a: f64) -> f64 {
        let c = 1.0 - 0.5 * a * (self.p - 1.0);
        -0.5 * u * u + c * pow_abs(u, self.p + 1.0) / (self.p + 1.0)
    }

    /// `kappa_a(u) = (1 - a(p-1)/2)|u|^{p-1} - 1`, so that `u kappa_a(u) = F_a'(u)`.
    pub fn kappa_a(&self, u: f64, a: f64) -> f64 {
        (1.0 - 0.5 * a * (self.p - 1.0)) * pow_abs(u, self.p - 1.0) - 1.0
    }

    /// `g1(u) = 2(1 - |u|^{1-p})/(p-1)`.
    pub fn g1(&self, u: f64) -> Result<f64> {
        if u == 0.0 || !u.is_finite() {
            return Err(LabError::SingularInput(format!("g1 undefined at u = {u}")));
        }
        Ok(2.0 * (1.0 - pow_abs(u, 1.0 - self.p)) / (self.p - 1.0))
    }

    /// `g2(u) = g1(u) - |u|^{1-p}`.
    pub fn g2(&self, u: f64) -> Result<f64> {
        let g1 = self.g1(u)?;
        Ok(g1 - pow_abs(u, 1.0 - self.p))
    }

    pub fn critical_amplitudes(&self) -> CriticalAmplitudes {
        let p = self.p;
        let n = self.nf();
        let e = 1.0 / (p - 1.0);
        CriticalAmplitudes {
            alpha_lower: ((p + 1.0) / 2.0).powf(e),
            alpha_upper: (2.0 * (p + 1.0) / ((n + 2.0) - p * (n - 2.0))).powf(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cubic3() -> FieldParams {
        FieldParams::new(3, 3.0).unwrap()
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(FieldParams::new(2, 3.0).is_err());
        assert!(FieldParams::new(3, 1.0).is_err());
        assert!(FieldParams::new(3, 5.0).is_err());
        assert!(FieldParams::new(4, 3.0).is_err());
        assert!(FieldParams::new(4, 2.9).is_ok());
    }

    #[test]
    fn cubic_thresholds() {
        let c = cubic3().critical_amplitudes();
        assert!((c.alpha_lower - 2f64.sqrt()).abs() < 1e-14);
        assert!((c.alpha_upper - 2.0).abs() < 1e-14);
        let c = FieldParams::new(4, 2.0).unwrap().critical_amplitudes();
        assert!((c.alpha_lower - 1.5).abs() < 1e-14);
        assert!((c.alpha_upper - 3.0).abs() < 1e-14);
    }

    #[test]
    fn point_values() {
        let fp = cubic3();
        assert_eq!(fp.f(1.0), 0.0);
        assert!((fp.f(2.0) - 6.0).abs() < 1e-13);
        assert!((fp.f_prime(1.0) - 2.0).abs() < 1e-14);
        assert!((fp.big_f(1.0) + 0.25).abs() < 1e-15);
        assert!(fp.big_f(2f64.sqrt()).abs() < 1e-14);
        assert!(fp.g1(0.0).is_err());
        assert!(fp.g2(0.0).is_err());
        assert_eq!(fp.g1(1.0).unwrap(), 0.0);
    }

    #[test]
    fn fractional_exponent_is_continuous_at_zero() {
        let fp = FieldParams::new(3, 1.2).unwrap();
        assert_eq!(fp.f(0.0), 0.0);
        assert!(fp.f(1e-300).abs() < 1e-299);
        assert_eq!(fp.f_prime(0.0), -1.0);
    }

    fn field_strategy() -> impl Strategy<Value = FieldParams> {
        (3u32..7, 0.0f64..1.0).prop_map(|(n, t)| {
            let pc = FieldParams::critical_exponent_for(n);
            FieldParams::new(n, 1.05 + t * (pc - 1.1)).unwrap()
        })
    }

    proptest! {
        #[test]
        fn thresholds_ordered(fp in field_strategy()) {
            let c = fp.critical_amplitudes();
            prop_assert!(1.0 < c.alpha_lower && c.alpha_lower < c.alpha_upper);
            prop_assert!(fp.big_f(c.alpha_lower).abs() < 1e-12 * c.alpha_lower.powi(2));
        }

        #[test]
        fn kappa_is_scaled_derivative(fp in field_strategy(), u in 0.05f64..4.0, a in -1.0f64..3.0) {
            let h = 1e-6 * u;
            let fd = (fp.big_f_a(u + h, a) - fp.big_f_a(u - h, a)) / (2.0 * h);
            let k = u * fp.kappa_a(u, a);
            prop_assert!((fd - k).abs() <= 1e-6 * (1.0 + k.abs()));
        }

        #[test]
        fn g2_matches_potential_ratio(fp in field_strategy(), u in 0.05f64..5.0) {
            let p = fp.p();
            let lhs = fp.g2(u).unwrap();
            let rhs = (p + 1.0) / (p - 1.0) * 2.0 * fp.big_f(u) / pow_abs(u, p + 1.0);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
        }

        #[test]
        fn deformed_potential_vanishes_at_g2(fp in field_strategy(), mu in 0.1f64..5.0) {
            let a = fp.g2(mu).unwrap();
            prop_assert!(fp.big_f_a(mu, a).abs() <= 1e-10 * mu * mu);
        }

        #[test]
        fn f_is_odd_and_derivative_consistent(fp in field_strategy(), u in 0.05f64..4.0) {
            prop_assert!((fp.f(-u) + fp.f(u)).abs() <= 1e-14 * (1.0 + fp.f(u).abs()));
            let h = 1e-6 * u;
            let fd = (fp.f(u + h) - fp.f(u - h)) / (2.0 * h);
            prop_assert!((fd - fp.f_prime(u)).abs() <= 1e-6 * (1.0 + fd.abs()));
        }
    }
}
