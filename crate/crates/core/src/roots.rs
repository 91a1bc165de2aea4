//! Bracketed scalar root refinement: bisection down to a coarse width, then
//! safeguarded secant steps.

/// Root of `g` in `[lo, hi]` given a strict sign change, to within `tol`.
pub fn refine<G: Fn(f64) -> f64>(g: G, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut glo = g(lo);
    let mut ghi = g(hi);
    if glo == 0.0 {
        return lo;
    }
    if ghi == 0.0 {
        return hi;
    }
    let coarse = (1e4 * tol).max(1e-6 * (hi - lo));
    while hi - lo > coarse {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if (gm < 0.0) == (glo < 0.0) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
            ghi = gm;
        }
    }
    for _ in 0..100 {
        if hi - lo <= tol {
            break;
        }
        let mut x = hi - ghi * (hi - lo) / (ghi - glo);
        if !(x > lo && x < hi) || !x.is_finite() {
            x = 0.5 * (lo + hi);
        }
        // Keep the secant point off the bracket ends so the bracket keeps shrinking.
        let guard = 0.25 * tol;
        x = x.clamp(lo + guard, hi - guard);
        let gx = g(x);
        if gx == 0.0 {
            return x;
        }
        let left = (gx < 0.0) == (glo < 0.0);
        if left {
            lo = x;
            glo = gx;
        } else {
            hi = x;
            ghi = gx;
        }
        // Probe just across the new point to collapse one-sided convergence.
        let probe = if left { (x + tol).min(hi) } else { (x - tol).max(lo) };
        let gp = g(probe);
        if gp == 0.0 {
            return probe;
        }
        if (gp < 0.0) == (glo < 0.0) {
            lo = probe;
            glo = gp;
        } else {
            hi = probe;
            ghi = gp;
        }
    }
    if glo.abs() <= ghi.abs() {
        lo
    } else {
        hi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn finds_sqrt2() {
        let r = refine(|x| x * x - 2.0, 0.0, 3.0, 1e-14);
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn handles_flat_tangent_side() {
        let r = refine(|x| (x - 1.0).powi(3), 0.0, 5.0, 1e-12);
        assert!((r - 1.0).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn cosine_roots(a in 0.1f64..1.4, b in 1.7f64..3.0) {
            let r = refine(f64::cos, a, b, 1e-13);
            prop_assert!((r - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        }
    }
}
