//! Safeguarded scalar root finding for monotone functions.

use crate::error::{Error, Result};

/// Finds the root of an increasing function `g` in `[lo, hi]` with
/// `g(lo) <= 0 <= g(hi)`.
///
/// Bisection drives the bracket down; once it is below `polish_width`
/// Newton steps (through `dg`) take over, falling back to bisection whenever
/// a step leaves the bracket. Stops when the bracket width or the last step
/// is below `rtol * |x| + atol`.
pub fn monotone_root<G, D>(
    g: G,
    dg: D,
    mut lo: f64,
    mut hi: f64,
    rtol: f64,
    atol: f64,
) -> Result<f64>
where
    G: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let glo = g(lo);
    let ghi = g(hi);
    if glo == 0.0 {
        return Ok(lo);
    }
    if ghi == 0.0 {
        return Ok(hi);
    }
    if !(glo < 0.0 && ghi > 0.0) {
        return Err(Error::RootFinding(format!(
            "no sign change on [{lo:.6e}, {hi:.6e}]: g = ({glo:.3e}, {ghi:.3e})"
        )));
    }
    let polish_width = 1e-6 * (hi - lo).abs().max(1.0);
    let mut x = 0.5 * (lo + hi);
    for _ in 0..400 {
        let width = hi - lo;
        if width <= rtol * x.abs() + atol {
            return Ok(x);
        }
        let gx = g(x);
        if gx == 0.0 {
            return Ok(x);
        }
        if gx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = 0.5 * (lo + hi);
        if hi - lo < polish_width {
            let d = dg(x);
            if d > 0.0 && d.is_finite() {
                let cand = x - gx / d;
                if cand > lo && cand < hi {
                    let step = (cand - x).abs();
                    next = cand;
                    if step <= rtol * cand.abs() + atol {
                        return Ok(cand);
                    }
                }
            }
        }
        x = next;
    }
    Ok(x)
}

/// Plain bisection to a fixed absolute tolerance; used by oracles and the
/// interface curve.
pub fn bisect<G: Fn(f64) -> f64>(g: G, mut lo: f64, mut hi: f64, atol: f64) -> Result<f64> {
    let mut glo = g(lo);
    let ghi = g(hi);
    if glo == 0.0 {
        return Ok(lo);
    }
    if ghi == 0.0 {
        return Ok(hi);
    }
    if glo.signum() == ghi.signum() {
        return Err(Error::RootFinding(format!(
            "no sign change on [{lo:.6e}, {hi:.6e}]"
        )));
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= atol || mid == lo || mid == hi {
            return Ok(mid);
        }
        let gm = g(mid);
        if gm == 0.0 {
            return Ok(mid);
        }
        if gm.signum() == glo.signum() {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_root() {
        let r = monotone_root(|x| x * x * x - 2.0, |x| 3.0 * x * x, 0.0, 2.0, 1e-15, 0.0).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn tiny_root_keeps_relative_accuracy() {
        let target = 1e-30;
        let r = monotone_root(|x| x - target, |_| 1.0, 0.0, 1.0, 1e-14, 1e-300).unwrap();
        assert!((r - target).abs() / target < 1e-12);
    }

    #[test]
    fn missing_bracket_is_error() {
        assert!(monotone_root(|x| x + 1.0, |_| 1.0, 0.0, 1.0, 1e-12, 0.0).is_err());
        assert!(bisect(|x| x + 1.0, 0.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn bisect_decreasing() {
        let r = bisect(|x| 1.0 - x, 0.0, 3.0, 1e-14).unwrap();
        assert!((r - 1.0).abs() < 1e-13);
    }
}
