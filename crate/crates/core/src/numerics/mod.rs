//! Small numerical kernels shared by the other modules: adaptive quadrature,
//! bracketed root finding, cubic Hermite interpolation and fast powers.

pub mod interp;
pub mod quad;
pub mod roots;

/// `x^e` that uses `powi` when the exponent is an integer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Power {
    exp: f64,
    int: Option<i32>,
}

impl Power {
    pub fn new(exp: f64) -> Self {
        let int = if exp.fract() == 0.0 && exp.abs() < 64.0 { Some(exp as i32) } else { None };
        Self { exp, int }
    }

    pub fn exponent(&self) -> f64 {
        self.exp
    }

    /// The exponent when it is a small integer.
    pub fn integer(&self) -> Option<i32> {
        self.int
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match self.int {
            Some(0) => 1.0,
            Some(1) => x,
            Some(2) => x * x,
            Some(3) => x * x * x,
            Some(4) => {
                let y = x * x;
                y * y
            }
            Some(5) => {
                let y = x * x;
                y * y * x
            }
            Some(k) => x.powi(k),
            None => x.powf(self.exp),
        }
    }
}

/// Volume of the unit ball in `R^N`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(n - 2) * 2.0 * std::f64::consts::PI / n as f64,
    }
}
