//! Bracketed scalar root finding (Brent's method).

use crate::error::{LabError, Result};

/// Root of `f` in `[a, b]` where `f(a)` and `f(b)` differ in sign.
///
/// Terminates when the bracket is narrower than `rel_tol·|x| + abs_tol`.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return Err(LabError::Numerical(format!(
            "root not bracketed on [{a}, {b}]: f = ({fa}, {fb})"
        )));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * (rel_tol * b.abs() + abs_tol);
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(xm) };
        fb = f(b);
        if !fb.is_finite() {
            return Err(LabError::Numerical(format!("non-finite function value at {b}")));
        }
    }
    Err(LabError::Numerical("Brent iteration limit reached".into()))
}

/// Solve `f(x) = y` for increasing `f` with `f(0) = 0`, growing the bracket geometrically.
pub fn invert_increasing<F: Fn(f64) -> f64>(f: F, y: f64, guess: f64, rel_tol: f64) -> Result<f64> {
    if y == 0.0 {
        return Ok(0.0);
    }
    let mut lo = guess.max(f64::MIN_POSITIVE);
    let mut hi = lo;
    while f(lo) > y {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(LabError::Numerical(format!("cannot bracket inverse at y = {y}")));
        }
    }
    while f(hi) < y {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(LabError::Numerical(format!("cannot bracket inverse at y = {y}")));
        }
    }
    if lo == hi {
        return Ok(lo);
    }
    brent(|x| f(x) - y, lo, hi, rel_tol, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_root() {
        let x = brent(|x| x * x * x - 2.0, 0.0, 2.0, 1e-15, 0.0).unwrap();
        assert!((x - 2f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn unbracketed_is_error() {
        assert!(brent(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 0.0).is_err());
    }

    #[test]
    fn inverse_of_exp_minus_one() {
        for y in [1e-8, 0.3, 5.0, 1e6] {
            let x = invert_increasing(|x: f64| x.exp_m1(), y, 1.0, 1e-14).unwrap();
            assert!((x - y.ln_1p()).abs() <= 1e-13 * y.ln_1p(), "{y}");
        }
    }
}
