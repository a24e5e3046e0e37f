//! Piecewise cubic Hermite interpolation.

/// Cubic Hermite interpolant through `(x_i, y_i)` with slopes `d_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hermite {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Hermite {
    /// `x` must be strictly increasing and all three slices equally long (≥ 2).
    pub fn new(x: Vec<f64>, y: Vec<f64>, d: Vec<f64>) -> Self {
        assert!(x.len() >= 2 && x.len() == y.len() && y.len() == d.len());
        debug_assert!(x.windows(2).all(|w| w[0] < w[1]));
        Self { x, y, d }
    }

    /// Same nodes with slopes limited so monotone data stay monotone (Fritsch–Carlson).
    pub fn monotone(x: Vec<f64>, y: Vec<f64>, mut d: Vec<f64>) -> Self {
        let n = x.len();
        for k in 0..n - 1 {
            let delta = (y[k + 1] - y[k]) / (x[k + 1] - x[k]);
            if delta == 0.0 {
                d[k] = 0.0;
                d[k + 1] = 0.0;
                continue;
            }
            let a = d[k] / delta;
            let b = d[k + 1] / delta;
            if a < 0.0 {
                d[k] = 0.0;
            }
            if b < 0.0 {
                d[k + 1] = 0.0;
            }
            let s = a * a + b * b;
            if s > 9.0 {
                let t = 3.0 / s.sqrt();
                d[k] = t * a * delta;
                d[k + 1] = t * b * delta;
            }
        }
        Self::new(x, y, d)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn slopes(&self) -> &[f64] {
        &self.d
    }

    /// Evaluate; outside the node range the end cubic is extended.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let k = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        };
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[k] + h * h10 * self.d[k] + h01 * self.y[k + 1] + h * h11 * self.d[k + 1]
    }
}
