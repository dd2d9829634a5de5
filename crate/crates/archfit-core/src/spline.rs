//! Natural cubic spline interpolation and arclength resampling.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{self, Vec3};

/// Natural cubic spline through `(t_i, y_i)` with free-end boundary
/// conditions (second derivative zero at both ends).
#[derive(Debug, Clone)]
pub struct CubicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl CubicSpline {
    /// Knots must be strictly increasing and at least two.
    pub fn natural(knots: &[f64], values: &[f64]) -> Self {
        let n = knots.len();
        assert!(n >= 2 && values.len() == n, "need >= 2 samples");
        for w in knots.windows(2) {
            assert!(w[1] > w[0], "knots must be strictly increasing");
        }
        if n == 2 {
            return Self {
                knots: knots.to_vec(),
                values: values.to_vec(),
                second: vec![0.0; 2],
            };
        }
        // Tridiagonal system for interior second derivatives.
        let m = n - 2;
        let mut lower = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        for i in 0..m {
            let h0 = knots[i + 1] - knots[i];
            let h1 = knots[i + 2] - knots[i + 1];
            lower[i] = h0;
            diag[i] = 2.0 * (h0 + h1);
            upper[i] = h1;
            rhs[i] = 6.0
                * ((values[i + 2] - values[i + 1]) / h1 - (values[i + 1] - values[i]) / h0);
        }
        let interior = math::solve_tridiagonal(&lower, &diag, &upper, &rhs);
        let mut second = vec![0.0; n];
        second[1..(m + 1)].copy_from_slice(&interior);
        Self {
            knots: knots.to_vec(),
            values: values.to_vec(),
            second,
        }
    }

    /// Evaluates the spline; clamps `t` to the knot range.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.knots.len();
        let t = t.clamp(self.knots[0], self.knots[n - 1]);
        let seg = self.segment(t);
        let (t0, t1) = (self.knots[seg], self.knots[seg + 1]);
        let h = t1 - t0;
        let a = (t1 - t) / h;
        let b = (t - t0) / h;
        a * self.values[seg]
            + b * self.values[seg + 1]
            + ((a * a * a - a) * self.second[seg] + (b * b * b - b) * self.second[seg + 1])
                * (h * h)
                / 6.0
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    fn segment(&self, t: f64) -> usize {
        let n = self.knots.len();
        match self.knots.binary_search_by(|k| k.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }
}

/// Natural cubic spline through 3-D points sharing one parameterization.
#[derive(Debug, Clone)]
pub struct CubicSpline3 {
    x: CubicSpline,
    y: CubicSpline,
    z: CubicSpline,
}

impl CubicSpline3 {
    pub fn natural(knots: &[f64], points: &[Vec3]) -> Self {
        let xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
        let ys: Vec<f64> = points.iter().map(|p| p[1]).collect();
        let zs: Vec<f64> = points.iter().map(|p| p[2]).collect();
        Self {
            x: CubicSpline::natural(knots, &xs),
            y: CubicSpline::natural(knots, &ys),
            z: CubicSpline::natural(knots, &zs),
        }
    }

    /// Chord-length parameterization; points must be pairwise distinct in
    /// sequence.
    pub fn through_points(points: &[Vec3]) -> Self {
        let knots = chord_lengths(points);
        Self::natural(&knots, points)
    }

    pub fn eval(&self, t: f64) -> Vec3 {
        [self.x.eval(t), self.y.eval(t), self.z.eval(t)]
    }

    pub fn domain(&self) -> (f64, f64) {
        self.x.domain()
    }

    /// Dense polyline sampling, uniform in the spline parameter.
    pub fn sample_uniform_param(&self, n: usize) -> Vec<Vec3> {
        let (lo, hi) = self.domain();
        (0..n)
            .map(|i| self.eval(lo + (hi - lo) * i as f64 / (n - 1) as f64))
            .collect()
    }
}

/// Cumulative chord lengths of a point sequence (starts at zero).
pub fn chord_lengths(points: &[Vec3]) -> Vec<f64> {
    let mut out = Vec::with_capacity(points.len());
    let mut s = 0.0;
    out.push(0.0);
    for w in points.windows(2) {
        s += math::dist(w[0], w[1]);
        out.push(s);
    }
    out
}

/// Resamples a polyline to `n` points at equal arclength spacing.
///
/// The first and last input vertices are reproduced exactly.
pub fn resample_by_arclength(points: &[Vec3], n: usize) -> Vec<Vec3> {
    assert!(points.len() >= 2 && n >= 2);
    let cum = chord_lengths(points);
    let total = cum[points.len() - 1];
    let mut out = Vec::with_capacity(n);
    out.push(points[0]);
    let mut seg = 0usize;
    for i in 1..n - 1 {
        let target = total * i as f64 / (n - 1) as f64;
        while seg + 2 < points.len() && cum[seg + 1] < target {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let f = if len > 0.0 { (target - cum[seg]) / len } else { 0.0 };
        out.push(math::add(
            math::scale(points[seg], 1.0 - f),
            math::scale(points[seg + 1], f),
        ));
    }
    out.push(points[points.len() - 1]);
    out
}

/// Basis-weight matrix of a natural cubic spline with uniform knots
/// `0..=n_in-1`, evaluated at `n_out` uniform parameters.
///
/// Row `i` holds the weights such that `out_i = Σ_j w[i][j] · y_j`; the
/// interpolation is linear in the data for fixed knots, which makes any
/// consumer of this operator exactly differentiable with respect to the
/// interpolated points.
pub fn uniform_spline_weights(n_in: usize, n_out: usize) -> Vec<Vec<f64>> {
    let knots: Vec<f64> = (0..n_in).map(|i| i as f64).collect();
    let mut weights = vec![vec![0.0; n_in]; n_out];
    for j in 0..n_in {
        let mut unit = vec![0.0; n_in];
        unit[j] = 1.0;
        let s = CubicSpline::natural(&knots, &unit);
        for (i, row) in weights.iter_mut().enumerate() {
            let t = (n_in - 1) as f64 * i as f64 / (n_out - 1) as f64;
            row[j] = s.eval(t);
        }
    }
    weights
}
