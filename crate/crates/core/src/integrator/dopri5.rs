//! Dormand-Prince 5(4) tableau with the standard quartic continuous extension.

pub(crate) const C2: f64 = 1.0 / 5.0;
pub(crate) const C3: f64 = 3.0 / 10.0;
pub(crate) const C4: f64 = 4.0 / 5.0;
pub(crate) const C5: f64 = 8.0 / 9.0;

pub(crate) const A21: f64 = 1.0 / 5.0;
pub(crate) const A31: f64 = 3.0 / 40.0;
pub(crate) const A32: f64 = 9.0 / 40.0;
pub(crate) const A41: f64 = 44.0 / 45.0;
pub(crate) const A42: f64 = -56.0 / 15.0;
pub(crate) const A43: f64 = 32.0 / 9.0;
pub(crate) const A51: f64 = 19372.0 / 6561.0;
pub(crate) const A52: f64 = -25360.0 / 2187.0;
pub(crate) const A53: f64 = 64448.0 / 6561.0;
pub(crate) const A54: f64 = -212.0 / 729.0;
pub(crate) const A61: f64 = 9017.0 / 3168.0;
pub(crate) const A62: f64 = -355.0 / 33.0;
pub(crate) const A63: f64 = 46732.0 / 5247.0;
pub(crate) const A64: f64 = 49.0 / 176.0;
pub(crate) const A65: f64 = -5103.0 / 18656.0;
pub(crate) const A71: f64 = 35.0 / 384.0;
pub(crate) const A73: f64 = 500.0 / 1113.0;
pub(crate) const A74: f64 = 125.0 / 192.0;
pub(crate) const A75: f64 = -2187.0 / 6784.0;
pub(crate) const A76: f64 = 11.0 / 84.0;

pub(crate) const E1: f64 = 71.0 / 57600.0;
pub(crate) const E3: f64 = -71.0 / 16695.0;
pub(crate) const E4: f64 = 71.0 / 1920.0;
pub(crate) const E5: f64 = -17253.0 / 339200.0;
pub(crate) const E6: f64 = 22.0 / 525.0;
pub(crate) const E7: f64 = -1.0 / 40.0;

pub(crate) const D1: f64 = -12715105075.0 / 11282082432.0;
pub(crate) const D3: f64 = 87487479700.0 / 32700410799.0;
pub(crate) const D4: f64 = -10690763975.0 / 1880347072.0;
pub(crate) const D5: f64 = 701980252875.0 / 199316789632.0;
pub(crate) const D6: f64 = -1453857185.0 / 822651844.0;
pub(crate) const D7: f64 = 69997945.0 / 29380423.0;

pub(crate) type Vec4 = [f64; 4];

/// Dense-output coefficients of one accepted step on `[r0, r0 + h]`.
#[derive(Debug, Clone)]
pub(crate) struct DenseStep {
    pub r0: f64,
    pub h: f64,
    pub c: [Vec4; 5],
}

impl DenseStep {
    pub fn eval(&self, r: f64) -> Vec4 {
        let s = (r - self.r0) / self.h;
        let s1 = 1.0 - s;
        let c = &self.c;
        let mut y = [0.0; 4];
        for i in 0..4 {
            y[i] = c[0][i] + s * (c[1][i] + s1 * (c[2][i] + s * (c[3][i] + s1 * c[4][i])));
        }
        y
    }

    pub fn r1(&self) -> f64 {
        self.r0 + self.h
    }
}

#[inline]
pub(crate) fn axpy(y: &Vec4, h: f64, terms: &[(f64, &Vec4)]) -> Vec4 {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..4 {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Outcome of a single trial step.
pub(crate) struct Trial {
    pub y_new: Vec4,
    pub k7: Vec4,
    pub err: f64,
    pub dense: DenseStep,
}

/// One Dormand-Prince trial step from `(r, y)` with derivative `k1`.
/// The error is the max-norm ratio against `atol + rtol * max(|y|, |y_new|)`.
pub(crate) fn trial_step<F: FnMut(f64, &Vec4) -> Vec4>(
    rhs: &mut F,
    r: f64,
    y: &Vec4,
    k1: &Vec4,
    h: f64,
    atol: f64,
    rtol: f64,
) -> Trial {
    let k2 = rhs(r + C2 * h, &axpy(y, h, &[(A21, k1)]));
    let k3 = rhs(r + C3 * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = rhs(r + C4 * h, &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = rhs(r + C5 * h, &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = rhs(
        r + h,
        &axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
    );
    let y_new = axpy(y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    let k7 = rhs(r + h, &y_new);

    let mut err: f64 = 0.0;
    for i in 0..4 {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let sk = atol + rtol * y[i].abs().max(y_new[i].abs());
        err = err.max((e / sk).abs());
    }

    let mut c = [[0.0; 4]; 5];
    for i in 0..4 {
        let ydiff = y_new[i] - y[i];
        let bspl = h * k1[i] - ydiff;
        c[0][i] = y[i];
        c[1][i] = ydiff;
        c[2][i] = bspl;
        c[3][i] = ydiff - h * k7[i] - bspl;
        c[4][i] = h
            * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
    }
    Trial { y_new, k7, err, dense: DenseStep { r0: r, h, c } }
}
