//! Normal-distribution helpers and a safeguarded scalar root finder.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::erfc;

/// Standard normal CDF.
pub(crate) fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// `ln Φ(-b)` for `b >= 0`, accurate far into the tail.
pub(crate) fn ln_norm_sf(b: f64) -> f64 {
    if b < 35.0 {
        (0.5 * erfc(b * FRAC_1_SQRT_2)).ln()
    } else {
        // Mills-ratio expansion; the truncation error is below 1e-13 here.
        let b2 = b * b;
        let series = 1.0 - 1.0 / b2 + 3.0 / (b2 * b2) - 15.0 / (b2 * b2 * b2)
            + 105.0 / (b2 * b2 * b2 * b2);
        -0.5 * b2 - (b * (2.0 * PI).sqrt()).ln() + series.ln()
    }
}

/// Finds `x` in `(lo, hi)` with `g(x) = 0` for a nondecreasing `g`, using
/// Newton steps from `x0` that fall back to bisection when they leave the
/// bracket. `dg` is the derivative of `g`.
///
/// `hi` may be `+inf`; the bracket is then grown from `x0` by doubling.
pub(crate) fn solve_increasing<G, D>(g: G, dg: D, lo: f64, hi: f64, x0: f64) -> f64
where
    G: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut lo = lo;
    let mut hi = hi;
    let mut x = x0.clamp(lo, hi);
    if !hi.is_finite() {
        let mut probe = x.max(lo + 1.0).max(1e-300);
        for _ in 0..2000 {
            if g(probe) >= 0.0 {
                break;
            }
            lo = probe;
            probe *= 2.0;
        }
        hi = probe;
    }
    if !(x > lo && x < hi) {
        x = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let gx = g(x);
        if gx == 0.0 {
            return x;
        }
        if gx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = dg(x);
        let mut next = if d > 0.0 && d.is_finite() {
            x - gx / d
        } else {
            f64::NAN
        };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(f64::MIN_POSITIVE) || hi - lo <= 4.0 * f64::EPSILON * hi.abs() {
            return next;
        }
        x = next;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_cdf_reference_values() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((norm_cdf(1.959963984540054) - 0.975).abs() < 1e-14);
        assert!((norm_cdf(-3.0) - 1.3498980316300933e-3).abs() < 1e-17);
    }

    #[test]
    fn tail_expansion_joins_direct_evaluation() {
        // Both branches agree where they overlap.
        for b in [30.0, 34.0, 34.99] {
            let direct = (0.5 * erfc(b * FRAC_1_SQRT_2)).ln();
            let b2 = b * b;
            let series = 1.0 - 1.0 / b2 + 3.0 / (b2 * b2) - 15.0 / (b2 * b2 * b2)
                + 105.0 / (b2 * b2 * b2 * b2);
            let asym = -0.5 * b2 - (b * (2.0 * PI).sqrt()).ln() + series.ln();
            assert!((direct - asym).abs() < 1e-10 * direct.abs(), "{b}");
        }
        assert!(ln_norm_sf(100.0).is_finite());
    }

    #[test]
    fn root_finder_inverts_cubic() {
        let x = solve_increasing(|x| x * x * x - 8.0, |x| 3.0 * x * x, 0.0, f64::INFINITY, 0.1);
        assert!((x - 2.0).abs() < 1e-13);
    }
}
