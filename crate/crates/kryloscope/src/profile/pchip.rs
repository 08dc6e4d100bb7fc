//! Monotone cubic (Fritsch–Carlson) interpolation on the unit-spaced grid
//! `0, 1, 2, ...`, used to extend tabulated Lanczos coefficients to real
//! arguments.

/// Piecewise cubic Hermite interpolant with shape-preserving slopes.
#[derive(Debug, Clone)]
pub struct Pchip {
    /// Values at knots 0, 1, ..., len-1.
    values: Vec<f64>,
    /// Knot derivatives.
    slopes: Vec<f64>,
}

impl Pchip {
    /// Build the interpolant through `(0, 0), (1, b[0]), (2, b[1]), ...`.
    pub fn from_couplings(couplings: &[f64]) -> Self {
        let mut values = Vec::with_capacity(couplings.len() + 1);
        values.push(0.0);
        values.extend_from_slice(couplings);
        Self::new(values)
    }

    fn new(values: Vec<f64>) -> Self {
        let n = values.len();
        assert!(n >= 2, "interpolant needs at least two knots");
        // Secant slopes on unit spacing.
        let d: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
        let mut slopes = vec![0.0; n];
        for i in 1..n - 1 {
            let (s0, s1) = (d[i - 1], d[i]);
            slopes[i] = if s0 * s1 <= 0.0 {
                0.0
            } else {
                // Weighted harmonic mean; uniform grid weights reduce to 3/3.
                2.0 * s0 * s1 / (s0 + s1)
            };
        }
        slopes[0] = endpoint_slope(d[0], d.get(1).copied().unwrap_or(d[0]));
        slopes[n - 1] = endpoint_slope(d[n - 2], if n >= 3 { d[n - 3] } else { d[n - 2] });
        Self { values, slopes }
    }

    fn segment(&self, x: f64) -> (usize, f64) {
        let last = self.values.len() - 1;
        let i = (x.floor() as usize).min(last - 1);
        (i, x - i as f64)
    }

    pub fn value(&self, x: f64) -> f64 {
        let last = (self.values.len() - 1) as f64;
        if x <= 0.0 {
            return self.values[0] + self.slopes[0] * x;
        }
        if x >= last {
            // Linear extrapolation with the end slope.
            let n = self.values.len() - 1;
            return self.values[n] + self.slopes[n] * (x - last);
        }
        let (i, t) = self.segment(x);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i], self.slopes[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let last = (self.values.len() - 1) as f64;
        if x <= 0.0 {
            return self.slopes[0];
        }
        if x >= last {
            return self.slopes[self.values.len() - 1];
        }
        let (i, t) = self.segment(x);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i], self.slopes[i + 1]);
        let t2 = t * t;
        (6.0 * t2 - 6.0 * t) * y0 + (3.0 * t2 - 4.0 * t + 1.0) * m0 + (6.0 * t - 6.0 * t2) * y1
            + (3.0 * t2 - 2.0 * t) * m1
    }
}

/// Three-point endpoint formula with the usual monotonicity clamps.
fn endpoint_slope(d_near: f64, d_far: f64) -> f64 {
    let m = (3.0 * d_near - d_far) / 2.0;
    if m * d_near <= 0.0 {
        0.0
    } else if d_near * d_far <= 0.0 && m.abs() > 3.0 * d_near.abs() {
        3.0 * d_near
    } else {
        m
    }
}
