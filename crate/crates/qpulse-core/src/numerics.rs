//! Small numerical building blocks shared across the crate.
//!
//! Uniform-grid quadrature, cumulative trapezoids, fourth-order finite
//! differences, natural cubic splines, Gauss-Legendre panels, and a Brent
//! root bracketer. Nothing here knows about quantum mechanics.

use alloc::vec;
use alloc::vec::Vec;
// on hosted targets the inherent f64 methods shadow this trait,
// but builds without std resolve float math through it
#[allow(unused_imports)]
use num_traits::Float;

/// Error conditions for the numerical utilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NumericsError {
    /// Input slice lengths or grid shapes are unusable.
    BadInput(&'static str),
    /// Root bracket does not contain a sign change.
    NoBracket,
    /// Iteration cap reached without meeting the tolerance.
    MaxIterations(&'static str),
}

impl core::fmt::Display for NumericsError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            NumericsError::BadInput(what) => write!(f, "bad input: {what}"),
            NumericsError::NoBracket => write!(f, "root is not bracketed"),
            NumericsError::MaxIterations(what) => write!(f, "iteration cap reached: {what}"),
        }
    }
}

/// `n` evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "linspace needs at least two points");
    let h = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { b } else { a + h * i as f64 })
        .collect()
}

/// Composite Simpson integral of uniformly spaced samples with spacing `h`.
///
/// Even panel counts use plain Simpson; an odd trailing panel is closed with
/// the 3/8 rule so accuracy stays at fourth order for any `len >= 3`.
pub fn integrate_uniform(y: &[f64], h: f64) -> f64 {
    let n = y.len();
    assert!(n >= 2, "integrate_uniform needs at least two samples");
    if n == 2 {
        return 0.5 * h * (y[0] + y[1]);
    }
    let panels = n - 1;
    let (simpson_end, tail) = if panels % 2 == 0 {
        (n - 1, 0.0)
    } else {
        // 3/8 rule over the last three panels
        let t = 3.0 * h / 8.0 * (y[n - 4] + 3.0 * y[n - 3] + 3.0 * y[n - 2] + y[n - 1]);
        (n - 4, t)
    };
    let mut sum = 0.0;
    if simpson_end >= 2 {
        sum = y[0] + y[simpson_end];
        let mut odd = 0.0;
        let mut even = 0.0;
        for (i, &v) in y.iter().enumerate().take(simpson_end).skip(1) {
            if i % 2 == 1 {
                odd += v;
            } else {
                even += v;
            }
        }
        sum = (sum + 4.0 * odd + 2.0 * even) * h / 3.0;
    }
    sum + tail
}

/// Trapezoid integral on a possibly non-uniform grid.
pub fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    assert_eq!(t.len(), y.len());
    let mut acc = 0.0;
    for i in 1..t.len() {
        acc += 0.5 * (t[i] - t[i - 1]) * (y[i] + y[i - 1]);
    }
    acc
}

/// Running trapezoid integral; output has the same length as the input and
/// starts at zero.
pub fn cumulative_trapezoid(t: &[f64], y: &[f64]) -> Vec<f64> {
    assert_eq!(t.len(), y.len());
    let mut out = Vec::with_capacity(t.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..t.len() {
        acc += 0.5 * (t[i] - t[i - 1]) * (y[i] + y[i - 1]);
        out.push(acc);
    }
    out
}

/// Fourth-order first derivative of uniform samples.
///
/// Interior points use the five-point central stencil; the two points at
/// each end use one-sided five-point stencils of the same order.
pub fn derivative_uniform(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    assert!(n >= 5, "derivative_uniform needs at least five samples");
    let mut d = vec![0.0; n];
    let inv12h = 1.0 / (12.0 * h);
    for i in 2..n - 2 {
        d[i] = (y[i - 2] - 8.0 * y[i - 1] + 8.0 * y[i + 1] - y[i + 2]) * inv12h;
    }
    // one-sided stencils, coefficients over 12h
    d[0] = (-25.0 * y[0] + 48.0 * y[1] - 36.0 * y[2] + 16.0 * y[3] - 3.0 * y[4]) * inv12h;
    d[1] = (-3.0 * y[0] - 10.0 * y[1] + 18.0 * y[2] - 6.0 * y[3] + y[4]) * inv12h;
    d[n - 2] =
        (3.0 * y[n - 1] + 10.0 * y[n - 2] - 18.0 * y[n - 3] + 6.0 * y[n - 4] - y[n - 5]) * inv12h;
    d[n - 1] = (25.0 * y[n - 1] - 48.0 * y[n - 2] + 36.0 * y[n - 3] - 16.0 * y[n - 4]
        + 3.0 * y[n - 5])
        * inv12h;
    d
}

/// Shift each phase sample by a multiple of 2 pi so consecutive samples
/// differ by less than pi, removing branch-cut jumps in place.
pub fn unwrap_phases(phi: &mut [f64]) {
    use core::f64::consts::PI;
    let mut offset = 0.0;
    for i in 1..phi.len() {
        let raw = phi[i] + offset;
        let mut jump = raw - phi[i - 1];
        while jump > PI {
            offset -= 2.0 * PI;
            jump -= 2.0 * PI;
        }
        while jump < -PI {
            offset += 2.0 * PI;
            jump += 2.0 * PI;
        }
        phi[i] += offset;
    }
}

/// Natural cubic spline through `(x_i, y_i)` with strictly increasing knots.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots (zero at both ends).
    d2: Vec<f64>,
}

impl CubicSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self, NumericsError> {
        let n = x.len();
        if n < 3 || y.len() != n {
            return Err(NumericsError::BadInput("spline needs >= 3 matching knots"));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(NumericsError::BadInput("spline knots must increase"));
        }
        // Thomas algorithm on the tridiagonal system for the second derivatives
        let mut d2 = vec![0.0; n];
        let mut u = vec![0.0; n];
        for i in 1..n - 1 {
            let sig = (x[i] - x[i - 1]) / (x[i + 1] - x[i - 1]);
            let p = sig * d2[i - 1] + 2.0;
            d2[i] = (sig - 1.0) / p;
            let rhs = (y[i + 1] - y[i]) / (x[i + 1] - x[i]) - (y[i] - y[i - 1]) / (x[i] - x[i - 1]);
            u[i] = (6.0 * rhs / (x[i + 1] - x[i - 1]) - sig * u[i - 1]) / p;
        }
        d2[n - 1] = 0.0;
        for i in (0..n - 1).rev() {
            d2[i] = d2[i] * d2[i + 1] + u[i];
        }
        Ok(Self { x, y, d2 })
    }

    /// Index of the interval containing `t` (clamped to the knot range).
    fn interval(&self, t: f64) -> usize {
        let n = self.x.len();
        match self
            .x
            .binary_search_by(|v| v.partial_cmp(&t).expect("spline knots are ordered"))
        {
            Ok(i) => i.min(n - 2),
            Err(i) => i.clamp(1, n - 1) - 1,
        }
    }

    /// Spline value at `t` (extrapolates the end cubics outside the knots).
    pub fn eval(&self, t: f64) -> f64 {
        let i = self.interval(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.d2[i] + (b * b * b - b) * self.d2[i + 1]) * h * h / 6.0
    }

    /// First derivative at `t`.
    pub fn deriv(&self, t: f64) -> f64 {
        let i = self.interval(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        (self.y[i + 1] - self.y[i]) / h
            + ((3.0 * b * b - 1.0) * self.d2[i + 1] - (3.0 * a * a - 1.0) * self.d2[i]) * h / 6.0
    }

    /// Second derivative at `t`.
    pub fn second_deriv(&self, t: f64) -> f64 {
        let i = self.interval(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.d2[i] + b * self.d2[i + 1]
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
///
/// Nodes are the roots of the Legendre polynomial `P_n`, found by Newton
/// iteration on the three-term recurrence from the Chebyshev-like initial
/// guesses. Exact for polynomials of degree `2n - 1`.
pub fn gauss_legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    use core::f64::consts::PI;
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            // recurrence (j+1) P_{j+1} = (2j+1) z P_j - j P_{j-1}
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Integrate `f` over `[a, b]` with a single Gauss-Legendre panel.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, nodes: &[f64], weights: &[f64]) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (&z, &w) in nodes.iter().zip(weights) {
        acc += w * f(mid + half * z);
    }
    acc * half
}

const BRENT_MAX_ITER: usize = 200;

/// Brent's method for a root of `f` on the bracket `[a, b]`.
///
/// Requires a sign change on the bracket; converges to `tol` absolute in `x`.
pub fn brent_root<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64, NumericsError> {
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 {
        return Err(NumericsError::NoBracket);
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..BRENT_MAX_ITER {
        if fb * fc > 0.0 {
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
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // inverse quadratic interpolation, falling back to secant
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * xm * s, 1.0 - s)
            } else {
                let q = fa / fc;
                let r = fb / fc;
                (
                    s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0)),
                    (q - 1.0) * (r - 1.0) * (s - 1.0),
                )
            };
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
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
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    Err(NumericsError::MaxIterations("brent_root"))
}
