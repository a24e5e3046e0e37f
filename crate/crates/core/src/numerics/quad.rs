//! Adaptive quadrature: Simpson with Richardson correction and Gauss–Kronrod 7/15.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{LabError, Result};

/// Integral estimate with an estimate of its absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

const SIMPSON_MAX_DEPTH: u32 = 60;

/// Adaptive Simpson on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<Quadrature> {
    if a == b {
        return Ok(Quadrature { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let fa = f(a);
    let fb = f(b);
    let c = 0.5 * (a + b);
    let fc = f(c);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
    let mut state = SimpsonState { evaluations: 3, error: 0.0, hit_depth: false };
    let value = simpson_rec(&f, a, b, fa, fb, fc, whole, tol, SIMPSON_MAX_DEPTH, &mut state);
    if !value.is_finite() {
        return Err(LabError::Numerical(format!("non-finite integrand on [{a}, {b}]")));
    }
    if state.hit_depth && state.error > tol.max(1e-300) * 1e3 {
        return Err(LabError::Numerical(format!(
            "adaptive Simpson did not converge on [{a}, {b}] (error {:.3e})",
            state.error
        )));
    }
    Ok(Quadrature { value, error: state.error, evaluations: state.evaluations })
}

struct SimpsonState {
    evaluations: usize,
    error: f64,
    hit_depth: bool,
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    fc: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    st: &mut SimpsonState,
) -> f64 {
    let c = 0.5 * (a + b);
    let d = 0.5 * (a + c);
    let e = 0.5 * (c + b);
    let fd = f(d);
    let fe = f(e);
    st.evaluations += 2;
    let left = (c - a) / 6.0 * (fa + 4.0 * fd + fc);
    let right = (b - c) / 6.0 * (fc + 4.0 * fe + fb);
    let delta = left + right - whole;
    if depth == 0 || (d - a) == 0.0 || e == b {
        st.hit_depth = true;
        st.error += delta.abs() / 15.0;
        return left + right + delta / 15.0;
    }
    if delta.abs() <= 15.0 * tol {
        st.error += delta.abs() / 15.0;
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, c, fa, fc, fd, left, 0.5 * tol, depth - 1, st)
        + simpson_rec(f, c, b, fc, fb, fe, right, 0.5 * tol, depth - 1, st)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = hw * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * hw, ((kron - gauss) * hw).abs())
}

#[derive(Debug)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod 7/15 on `[a, b]`.
///
/// Stops when the summed error estimate is below `max(abs_tol, rel_tol·|I|)`.
pub fn gauss_kronrod<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Quadrature> {
    const MAX_SEGMENTS: usize = 2000;
    if a == b {
        return Ok(Quadrature { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let (v, e) = gk15(&f, a, b);
    let mut evaluations = 15;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value: v, error: e });
    let (mut total, mut err) = (v, e);
    while err > abs_tol.max(rel_tol * total.abs()) {
        if heap.len() >= MAX_SEGMENTS {
            return Err(LabError::Numerical(format!(
                "Gauss-Kronrod did not converge on [{a}, {b}]: error {err:.3e}"
            )));
        }
        let seg = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (seg.a + seg.b);
        let (lv, le) = gk15(&f, seg.a, mid);
        let (rv, re) = gk15(&f, mid, seg.b);
        evaluations += 30;
        total += lv + rv - seg.value;
        err += le + re - seg.error;
        heap.push(Segment { a: seg.a, b: mid, value: lv, error: le });
        heap.push(Segment { a: mid, b: seg.b, value: rv, error: re });
    }
    // re-sum to shed the drift of the incremental updates
    let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
    if !value.is_finite() {
        return Err(LabError::Numerical(format!("non-finite integrand on [{a}, {b}]")));
    }
    Ok(Quadrature { value, error, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_polynomial_exact() {
        let q = adaptive_simpson(|x| x * x * x - 2.0 * x, 0.0, 2.0, 1e-12).unwrap();
        assert!((q.value - 0.0).abs() < 1e-13);
    }

    #[test]
    fn simpson_sqrt_singular_derivative() {
        let q = adaptive_simpson(f64::sqrt, 0.0, 1.0, 1e-12).unwrap();
        assert!((q.value - 2.0 / 3.0).abs() < 1e-10, "{}", q.value);
    }

    #[test]
    fn kronrod_smooth() {
        let q = gauss_kronrod(f64::exp, 0.0, 1.0, 0.0, 1e-12).unwrap();
        assert!((q.value - (1f64.exp() - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn kronrod_power() {
        let s = -1.25;
        let b = 3.0f64;
        let exact = (b.powf(s + 1.0) - 1.0) / (s + 1.0);
        let q = gauss_kronrod(|x: f64| x.powf(s), 1.0, b, 0.0, 1e-10).unwrap();
        assert!((q.value - exact).abs() < 1e-12 * exact.abs());
    }
}
