//! Unconstrained minimizers used by the design solvers.
//!
//! [`lbfgs`] is a limited-memory quasi-Newton method with a strong-Wolfe
//! line search, used as the inner solver of the geodesic augmented
//! Lagrangian. [`nelder_mead`] is a derivative-free simplex method for the
//! non-smooth minimax objective of the sine-coefficient optimizer. Both are
//! deterministic: no randomness enters the iterations.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
// on hosted targets the inherent f64 methods shadow this trait,
// but builds without std resolve float math through it
#[allow(unused_imports)]
use num_traits::Float;

/// Settings for [`lbfgs`].
#[derive(Debug, Clone)]
pub struct LbfgsOptions {
    /// Number of curvature pairs kept for the two-loop recursion.
    pub memory: usize,
    /// Iteration cap.
    pub max_iters: usize,
    /// Stop when the gradient sup-norm falls below this.
    pub gtol: f64,
    /// Stop when the relative objective decrease falls below this.
    pub ftol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iters: 3000,
            gtol: 1e-11,
            ftol: 1e-16,
        }
    }
}

/// Outcome of an [`lbfgs`] run.
#[derive(Debug, Clone)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    /// Gradient sup-norm at the returned point.
    pub grad_norm: f64,
    pub iters: usize,
    /// True when a tolerance was met (not the iteration cap).
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

const WOLFE_C1: f64 = 1e-4;
const WOLFE_C2: f64 = 0.9;
const LS_MAX_EVALS: usize = 40;

/// Strong-Wolfe line search along `d` from `x`. Returns the accepted step
/// and the objective/gradient at the new point, or `None` when no
/// acceptable step exists (objective at rounding level).
fn wolfe_search<F>(
    obj: &mut F,
    x: &[f64],
    d: &[f64],
    f0: f64,
    g0d: f64,
    xtrial: &mut [f64],
    gtrial: &mut [f64],
) -> Option<f64>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let mut eval = |a: f64, xt: &mut [f64], gt: &mut [f64]| -> (f64, f64) {
        for i in 0..x.len() {
            xt[i] = x[i] + a * d[i];
        }
        let f = obj(xt, gt);
        (f, dot(gt, d))
    };

    let mut a_prev = 0.0;
    let mut f_prev = f0;
    let mut g_prev = g0d;
    let mut a = 1.0;
    let mut bracket = None;
    for i in 0..LS_MAX_EVALS {
        let (fa, ga) = eval(a, xtrial, gtrial);
        if fa > f0 + WOLFE_C1 * a * g0d || (i > 0 && fa >= f_prev) {
            bracket = Some((a_prev, f_prev, g_prev, a, fa, ga));
            break;
        }
        if ga.abs() <= -WOLFE_C2 * g0d {
            return Some(a);
        }
        if ga >= 0.0 {
            bracket = Some((a, fa, ga, a_prev, f_prev, g_prev));
            break;
        }
        a_prev = a;
        f_prev = fa;
        g_prev = ga;
        a *= 2.0;
    }
    let (mut lo, mut flo, mut glo, mut hi, mut fhi, _ghi) = bracket?;
    for _ in 0..LS_MAX_EVALS {
        // quadratic interpolation with a bisection safeguard
        let mut am = lo - 0.5 * glo * (hi - lo) * (hi - lo) / (fhi - flo - glo * (hi - lo));
        let span = (hi - lo).abs();
        if !am.is_finite() || (am - lo).abs() < 0.1 * span || (am - hi).abs() < 0.1 * span {
            am = 0.5 * (lo + hi);
        }
        let (fa, ga) = eval(am, xtrial, gtrial);
        if fa > f0 + WOLFE_C1 * am * g0d || fa >= flo {
            hi = am;
            fhi = fa;
        } else {
            if ga.abs() <= -WOLFE_C2 * g0d {
                return Some(am);
            }
            if ga * (hi - lo) >= 0.0 {
                hi = lo;
                fhi = flo;
            }
            lo = am;
            flo = fa;
            glo = ga;
        }
        if (hi - lo).abs() < 1e-16 * (1.0 + lo.abs()) {
            break;
        }
    }
    // fall back to the best sufficient-decrease point found
    if flo < f0 {
        let (_, _) = eval(lo, xtrial, gtrial);
        return Some(lo);
    }
    None
}

/// Limited-memory BFGS minimization of `obj(x, grad) -> f`.
///
/// `obj` must write the gradient into its second argument and return the
/// objective value.
pub fn lbfgs<F>(mut obj: F, x0: &[f64], opts: &LbfgsOptions) -> LbfgsResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut f = obj(&x, &mut g);
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut d = vec![0.0; n];
    let mut xtrial = vec![0.0; n];
    let mut gtrial = vec![0.0; n];
    let mut alpha_buf = vec![0.0; opts.memory];
    let mut converged = false;
    let mut iters = 0;

    while iters < opts.max_iters {
        let gnorm = sup_norm(&g);
        if gnorm <= opts.gtol {
            converged = true;
            break;
        }
        // two-loop recursion for d = -H g
        d.copy_from_slice(&g);
        for (idx, (s, y, rho)) in pairs.iter().enumerate().rev() {
            let a = rho * dot(s, &d);
            alpha_buf[idx] = a;
            for i in 0..n {
                d[i] -= a * y[i];
            }
        }
        if let Some((s, y, _)) = pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            for v in d.iter_mut() {
                *v *= gamma;
            }
        }
        for (idx, (s, y, rho)) in pairs.iter().enumerate() {
            let b = rho * dot(y, &d);
            let a = alpha_buf[idx];
            for i in 0..n {
                d[i] += (a - b) * s[i];
            }
        }
        for v in d.iter_mut() {
            *v = -*v;
        }
        let mut g0d = dot(&g, &d);
        if g0d >= 0.0 {
            // not a descent direction; restart from steepest descent
            pairs.clear();
            for i in 0..n {
                d[i] = -g[i];
            }
            g0d = -dot(&g, &g);
            if g0d == 0.0 {
                converged = true;
                break;
            }
        }
        let step = match wolfe_search(&mut obj, &x, &d, f, g0d, &mut xtrial, &mut gtrial) {
            Some(a) => a,
            None => {
                // objective is flat along every tried step: rounding floor
                converged = true;
                break;
            }
        };
        let fnew = obj(&xtrial, &mut gtrial);
        let mut s = vec![0.0; n];
        let mut y = vec![0.0; n];
        for i in 0..n {
            s[i] = step * d[i];
            y[i] = gtrial[i] - g[i];
        }
        let sy = dot(&s, &y);
        if sy > 1e-10 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if pairs.len() == opts.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        x.copy_from_slice(&xtrial);
        g.copy_from_slice(&gtrial);
        let df = f - fnew;
        f = fnew;
        iters += 1;
        if df.abs() <= opts.ftol * f.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    LbfgsResult {
        grad_norm: sup_norm(&g),
        x,
        f,
        iters,
        converged,
    }
}

/// Settings for [`nelder_mead`].
#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    pub max_iters: usize,
    /// Stop when the simplex objective spread falls below this (absolute).
    pub ftol: f64,
    /// Initial simplex displacement per coordinate.
    pub init_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            ftol: 1e-12,
            init_step: 0.1,
        }
    }
}

/// Outcome of a [`nelder_mead`] run.
#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iters: usize,
    pub converged: bool,
}

/// Derivative-free Nelder-Mead simplex minimization.
///
/// Standard reflect/expand/contract/shrink coefficients; handles infinite
/// objective values (used as infeasibility penalties) by treating them as
/// worst. Deterministic for fixed inputs.
pub fn nelder_mead<F>(mut obj: F, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert!(n >= 1, "nelder_mead needs at least one variable");
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += if v[i].abs() > 1e-12 {
            opts.init_step * v[i].abs()
        } else {
            opts.init_step
        };
        simplex.push(v);
    }
    let mut fvals: Vec<f64> = simplex.iter().map(|v| obj(v)).collect();
    let mut iters = 0;
    let mut converged = false;

    let order = |simplex: &mut Vec<Vec<f64>>, fvals: &mut Vec<f64>| {
        let mut idx: Vec<usize> = (0..simplex.len()).collect();
        idx.sort_by(|&a, &b| fvals[a].partial_cmp(&fvals[b]).unwrap_or(core::cmp::Ordering::Equal));
        let new_s: Vec<Vec<f64>> = idx.iter().map(|&i| simplex[i].clone()).collect();
        let new_f: Vec<f64> = idx.iter().map(|&i| fvals[i]).collect();
        *simplex = new_s;
        *fvals = new_f;
    };
    order(&mut simplex, &mut fvals);

    while iters < opts.max_iters {
        let spread = fvals[n] - fvals[0];
        if spread.is_finite() && spread.abs() <= opts.ftol {
            converged = true;
            break;
        }
        // centroid of all but the worst
        let mut cen = vec![0.0; n];
        for v in simplex.iter().take(n) {
            for i in 0..n {
                cen[i] += v[i];
            }
        }
        for c in cen.iter_mut() {
            *c /= n as f64;
        }
        let point = |t: f64, cen: &[f64], worst: &[f64]| -> Vec<f64> {
            (0..n).map(|i| cen[i] + t * (cen[i] - worst[i])).collect()
        };
        let xr = point(1.0, &cen, &simplex[n]);
        let fr = obj(&xr);
        if fr < fvals[0] {
            let xe = point(2.0, &cen, &simplex[n]);
            let fe = obj(&xe);
            if fe < fr {
                simplex[n] = xe;
                fvals[n] = fe;
            } else {
                simplex[n] = xr;
                fvals[n] = fr;
            }
        } else if fr < fvals[n - 1] {
            simplex[n] = xr;
            fvals[n] = fr;
        } else {
            let (xc, fc) = if fr < fvals[n] {
                let xc = point(0.5, &cen, &simplex[n]);
                let fc = obj(&xc);
                (xc, fc)
            } else {
                let xc = point(-0.5, &cen, &simplex[n]);
                let fc = obj(&xc);
                (xc, fc)
            };
            if fc < fvals[n].min(fr) {
                simplex[n] = xc;
                fvals[n] = fc;
            } else {
                // shrink toward the best vertex
                for k in 1..=n {
                    for i in 0..n {
                        simplex[k][i] = simplex[0][i] + 0.5 * (simplex[k][i] - simplex[0][i]);
                    }
                    fvals[k] = obj(&simplex[k]);
                }
            }
        }
        order(&mut simplex, &mut fvals);
        iters += 1;
    }
    NelderMeadResult {
        x: simplex[0].clone(),
        f: fvals[0],
        iters,
        converged,
    }
}
