//! Time-contracted adiabatic passage.
//!
//! The base design is parallel adiabatic passage: a Gaussian Rabi envelope
//! with the detuning chosen so the eigenvalue gap stays constant. A
//! monotone time map g with unit slope at both window edges contracts the
//! schedule by a factor `a` while keeping the traversed state path, and
//! the pulse area, exactly invariant. Two families of g are provided: a
//! linear-plus-sine expansion whose free coefficients minimize the
//! contracted peak amplitude, and the closed-form inversion that forces
//! the contracted pulse to be a hyper-Gaussian.

use crate::model::{ControlWaveforms, ModelError, HyperGaussianSpec};
use crate::numerics::linspace;
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::specfun;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
// on hosted targets the inherent f64 methods shadow this trait,
// but builds without std resolve float math through it
#[allow(unused_imports)]
use num_traits::Float;

/// Grid density used to certify monotonicity of a rescale function.
const MONOTONE_GRID: usize = 10_001;
/// Fixed-point budget for the hyper-Gaussian inversion parameters.
const FIXED_POINT_MAX_ITER: usize = 200;
/// Grid used by the peak-minimization objective.
const PEAK_GRID: usize = 4096;

/// Errors from contraction design.
#[derive(Debug, Clone, PartialEq)]
pub enum TcapError {
    BadInput(&'static str),
    /// The sine coefficients violate the endpoint-slope sum rule.
    ConstraintViolation { sum: f64, required: f64 },
    /// g' drops to zero or below: not a valid time map.
    NonMonotone { tau: f64 },
    /// A window boundary identity failed beyond tolerance.
    Boundary { what: &'static str, error: f64 },
    /// The (sigma, peak ratio) fixed point did not converge.
    NoFixedPoint,
    /// Control sampling failed downstream.
    Model(ModelError),
}

impl core::fmt::Display for TcapError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            TcapError::BadInput(what) => write!(f, "bad input: {what}"),
            TcapError::ConstraintViolation { sum, required } => {
                write!(f, "coefficient sum rule violated: got {sum}, need {required}")
            }
            TcapError::NonMonotone { tau } => {
                write!(f, "rescale function is non-monotone near tau = {tau}")
            }
            TcapError::Boundary { what, error } => {
                write!(f, "boundary condition {what} off by {error:e}")
            }
            TcapError::NoFixedPoint => write!(f, "no fixed point for the inversion parameters"),
            TcapError::Model(e) => write!(f, "control sampling failed: {e}"),
        }
    }
}

impl From<ModelError> for TcapError {
    fn from(e: ModelError) -> Self {
        TcapError::Model(e)
    }
}

/// Instantaneous adiabatic frame of a control pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdiabaticFrame {
    /// Mixing angle atan2(Omega, -Delta), in [0, pi] for Omega >= 0.
    pub mixing: f64,
    /// Eigenvalue gap sqrt(Omega^2 + Delta^2).
    pub gap: f64,
}

impl AdiabaticFrame {
    pub fn from_controls(omega: f64, delta: f64) -> Self {
        Self {
            mixing: omega.atan2(-delta),
            gap: (omega * omega + delta * delta).sqrt(),
        }
    }
}

/// Parallel adiabatic controls: Gaussian envelope, constant-gap detuning.
///
/// Omega = peak exp(-(t/T)^2), Delta = peak sign(t) sqrt(1 - exp(-2(t/T)^2)),
/// so the gap equals `peak` at every time.
pub fn parallel_controls(peak: f64, width: f64, t: f64) -> (f64, f64) {
    let lam = (-(t / width) * (t / width)).exp();
    let delta = peak * (t / width).signum() * (1.0 - lam * lam).sqrt();
    (peak * lam, delta)
}

/// Gaussian peak whose full pulse area equals `area`.
pub fn gaussian_peak_for_area(area: f64, width: f64) -> f64 {
    area / (width * core::f64::consts::PI.sqrt())
}

/// Required value of `sum n C_n` for unit endpoint slope.
pub fn sine_coefficient_constraint(contraction: f64, window: (f64, f64)) -> f64 {
    (1.0 - contraction) * (window.1 - window.0) / (2.0 * core::f64::consts::PI * contraction)
}

/// Linear-plus-sine time map and its derivative at `tau`.
///
/// g(tau) = a tau + sum C_n sin(2 n pi a (tau - t_i/a) / (t_f - t_i)).
/// The endpoint values g(t_i/a) = t_i and g(t_f/a) = t_f hold for any
/// coefficients; unit endpoint slope needs the sum rule from
/// [`sine_coefficient_constraint`].
pub fn sine_expansion_g(
    contraction: f64,
    coeffs: &[f64],
    window: (f64, f64),
    tau: f64,
) -> (f64, f64) {
    use core::f64::consts::PI;
    let (ti, tf) = window;
    let base = 2.0 * PI * contraction / (tf - ti);
    let x = tau - ti / contraction;
    let mut g = contraction * tau;
    let mut gp = contraction;
    for (k, &c) in coeffs.iter().enumerate() {
        let wn = base * (k + 1) as f64;
        g += c * (wn * x).sin();
        gp += c * wn * (wn * x).cos();
    }
    (g, gp)
}

/// The supported rescale families, with their parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum RescaleKind {
    Identity,
    SineExpansion { coeffs: Vec<f64> },
    HyperGaussianInversion {
        sigma: f64,
        order: u32,
        /// Contracted peak over base peak.
        peak_ratio: f64,
        base_width: f64,
        /// erf(t_f/T) / gamma_lower(1/n, x_edge); maps accumulated area to erf(g/T).
        scale_k: f64,
        /// (t_f / (a sigma))^n, the abscissa where the map saturates.
        x_edge: f64,
        /// erfc(t_f/T), the complement value at the window edge.
        erfc_edge: f64,
        /// Gamma_upper(1/n, x_edge).
        upper_edge: f64,
    },
}

/// A monotone time map g on [t_i/a, t_f/a] with g(t_i/a) = t_i,
/// g(t_f/a) = t_f and unit slope at both edges.
#[derive(Debug, Clone, PartialEq)]
pub struct RescaleFunction {
    pub kind: RescaleKind,
    pub contraction: f64,
    /// The uncontracted window (t_i, t_f).
    pub window: (f64, f64),
}

impl RescaleFunction {
    pub fn identity(window: (f64, f64)) -> Self {
        Self {
            kind: RescaleKind::Identity,
            contraction: 1.0,
            window,
        }
    }

    /// Validated sine-expansion rescale.
    pub fn sine_expansion(
        contraction: f64,
        coeffs: Vec<f64>,
        window: (f64, f64),
    ) -> Result<Self, TcapError> {
        if !(contraction >= 1.0) || !(window.1 > window.0) {
            return Err(TcapError::BadInput("need contraction >= 1 and a real window"));
        }
        let required = sine_coefficient_constraint(contraction, window);
        let sum: f64 = coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| (k + 1) as f64 * c)
            .sum();
        if (sum - required).abs() > 1e-12 {
            return Err(TcapError::ConstraintViolation { sum, required });
        }
        let out = Self {
            kind: RescaleKind::SineExpansion { coeffs },
            contraction,
            window,
        };
        out.validate()?;
        Ok(out)
    }

    /// Contracted-time window (t_i/a, t_f/a).
    pub fn contracted_window(&self) -> (f64, f64) {
        (self.window.0 / self.contraction, self.window.1 / self.contraction)
    }

    /// The map value and derivative at contracted time `tau`.
    pub fn eval(&self, tau: f64) -> (f64, f64) {
        match &self.kind {
            RescaleKind::Identity => (tau, 1.0),
            RescaleKind::SineExpansion { coeffs } => {
                sine_expansion_g(self.contraction, coeffs, self.window, tau)
            }
            RescaleKind::HyperGaussianInversion {
                sigma,
                order,
                peak_ratio,
                base_width,
                scale_k,
                x_edge,
                erfc_edge,
                upper_edge,
            } => {
                let t_cap = *base_width;
                let s = 1.0 / *order as f64;
                // antisymmetric branch through g(0) = 0; the cap makes the
                // map saturate exactly at the window edge
                let x = (tau.abs() / sigma).powi(*order as i32).min(*x_edge);
                let arg = scale_k
                    * specfun::lower_incomplete_gamma(s, x)
                        .expect("inversion arguments stay in domain");
                let g_abs = if arg <= 0.9 {
                    t_cap * specfun::erf_inv(arg).expect("argument stays inside (-1, 1)")
                } else {
                    // near the edge erf(g/T) is within ulps of its limit and
                    // the inverse amplifies each one by exp((t_f/T)^2); the
                    // complement erfc(g/T) = erfc_edge + K (Gamma(s,x) -
                    // Gamma(s,x_edge)) keeps full relative precision instead
                    let upper = specfun::upper_incomplete_gamma(s, x)
                        .expect("inversion arguments stay in domain");
                    let w = (erfc_edge + scale_k * (upper - upper_edge)).max(*erfc_edge);
                    t_cap * specfun::erfc_inv(w).expect("complement stays inside (0, 1)")
                };
                let g = if tau >= 0.0 { g_abs } else { -g_abs };
                let gp = peak_ratio * ((g / t_cap) * (g / t_cap) - x).exp();
                (g, gp)
            }
        }
    }

    /// Check the four boundary identities and monotonicity on a dense grid.
    pub fn validate(&self) -> Result<(), TcapError> {
        let (ci, cf) = self.contracted_window();
        let (ti, tf) = self.window;
        let span = tf - ti;
        let checks = [
            ("g at left edge", self.eval(ci).0 - ti),
            ("g at right edge", self.eval(cf).0 - tf),
            ("slope at left edge", self.eval(ci).1 - 1.0),
            ("slope at right edge", self.eval(cf).1 - 1.0),
        ];
        for (what, err) in checks {
            if err.abs() > 1e-10 * (1.0 + span) {
                return Err(TcapError::Boundary { what, error: err });
            }
        }
        for tau in linspace(ci, cf, MONOTONE_GRID) {
            if !(self.eval(tau).1 > 0.0) {
                return Err(TcapError::NonMonotone { tau });
            }
        }
        Ok(())
    }
}

/// Contracted controls Omega_c = base_peak g' Lambda(g/T) and
/// Delta_c = base_peak g' sign(g) sqrt(1 - Lambda^2(g/T)), sampled on a
/// uniform grid over the contracted window.
pub fn rescaled_controls(
    base: (f64, f64),
    rescale: &RescaleFunction,
    grid: usize,
) -> Result<ControlWaveforms, TcapError> {
    let (peak, width) = base;
    if !(peak > 0.0) || !(width > 0.0) {
        return Err(TcapError::BadInput("base peak and width must be positive"));
    }
    if grid < 2 {
        return Err(TcapError::BadInput("need at least two grid samples"));
    }
    let (ci, cf) = rescale.contracted_window();
    let times = linspace(ci, cf, grid);
    let mut rabi = Vec::with_capacity(grid);
    let mut detuning = Vec::with_capacity(grid);
    for &tau in &times {
        let (g, gp) = rescale.eval(tau);
        let (omega, delta) = parallel_controls(peak, width, g);
        rabi.push(gp * omega);
        detuning.push(gp * delta);
    }
    let label = match &rescale.kind {
        RescaleKind::Identity => format!("tcap-identity"),
        RescaleKind::SineExpansion { coeffs } => format!("tcap-sine-n{}", coeffs.len()),
        RescaleKind::HyperGaussianInversion { order, .. } => format!("tcap-hg-n{order}"),
    };
    Ok(ControlWaveforms::new(times, rabi, detuning, label)?)
}

/// A complete contraction design.
#[derive(Debug, Clone)]
pub struct TcapDesign {
    pub base_peak: f64,
    pub base_width: f64,
    pub rescale: RescaleFunction,
    pub controls: ControlWaveforms,
}

impl TcapDesign {
    pub fn new(
        base: (f64, f64),
        rescale: RescaleFunction,
        grid: usize,
    ) -> Result<Self, TcapError> {
        let controls = rescaled_controls(base, &rescale, grid)?;
        Ok(Self {
            base_peak: base.0,
            base_width: base.1,
            rescale,
            controls,
        })
    }
}

/// Peak of the contracted Rabi envelope, the minimization objective.
/// Non-monotone candidates are rejected with an infinite peak.
fn contracted_peak(base: (f64, f64), contraction: f64, coeffs: &[f64], window: (f64, f64)) -> f64 {
    let (peak, width) = base;
    let ci = window.0 / contraction;
    let cf = window.1 / contraction;
    let mut worst = 0.0f64;
    for i in 0..=PEAK_GRID {
        let tau = ci + (cf - ci) * i as f64 / PEAK_GRID as f64;
        let (g, gp) = sine_expansion_g(contraction, coeffs, window, tau);
        if gp <= 0.0 {
            return f64::INFINITY;
        }
        worst = worst.max(gp * peak * (-(g / width) * (g / width)).exp());
    }
    worst
}

/// Minimize the contracted peak amplitude over the sine coefficients.
///
/// C_1..C_{N-1} are free; C_N absorbs the endpoint-slope sum rule. The
/// seed spreads the rule uniformly (C_n proportional to 1/n), and the
/// simplex search rejects non-monotone iterates with an infinite penalty.
pub fn optimize_sine_coefficients(
    n_terms: usize,
    contraction: f64,
    base: (f64, f64),
    window: (f64, f64),
) -> Result<Vec<f64>, TcapError> {
    if n_terms < 2 {
        return Err(TcapError::BadInput("need at least two sine terms"));
    }
    if !(contraction >= 1.0) {
        return Err(TcapError::BadInput("contraction must be >= 1"));
    }
    let required = sine_coefficient_constraint(contraction, window);
    if required == 0.0 {
        // identity contraction: the unmodified map is already optimal
        return Ok(vec![0.0; n_terms]);
    }
    // seed: C_n = S / (n N) satisfies sum n C_n = S
    let seed: Vec<f64> = (1..=n_terms)
        .map(|n| required / (n as f64 * n_terms as f64))
        .collect();
    let assemble = |free: &[f64]| -> Vec<f64> {
        let mut c = free.to_vec();
        let partial: f64 = free
            .iter()
            .enumerate()
            .map(|(k, &v)| (k + 1) as f64 * v)
            .sum();
        c.push((required - partial) / n_terms as f64);
        c
    };
    let objective = |free: &[f64]| contracted_peak(base, contraction, &assemble(free), window);
    let seed_peak = contracted_peak(base, contraction, &seed, window);
    let res = nelder_mead(
        objective,
        &seed[..n_terms - 1],
        &NelderMeadOptions {
            max_iters: 40_000,
            ftol: 1e-10,
            init_step: 0.1 * required.abs(),
        },
    );
    let coeffs = assemble(&res.x);
    if !(res.f <= seed_peak) {
        return Err(TcapError::BadInput("peak search failed to improve on the seed"));
    }
    // final validation: the optimum must be a legal monotone rescale
    RescaleFunction::sine_expansion(contraction, coeffs.clone(), window)?;
    Ok(coeffs)
}

/// Hyper-Gaussian-imposed contraction: find (sigma, peak ratio) so the
/// contracted pulse is exactly `ratio * base_peak * exp(-(tau/sigma)^n)`.
///
/// Two conditions pin the pair: the accumulated areas match at the window
/// edge (so g lands on t_f), and the edge slope is one. Both are enforced
/// on the finite window exactly, which reproduces the asymptotic values
/// sigma = 1.095 T and ratio = 0.84 at (n = 14, a = 3, t_f = 4T) to within
/// a fraction of a percent. The fixed point iterates the ratio: the edge
/// abscissa is x_f = ln(ratio) + (t_f/T)^2 independent of sigma, then
/// sigma follows from the slope condition and the ratio from the area
/// condition.
pub fn hg_rescale(
    order: u32,
    contraction: f64,
    t_f: f64,
    base: (f64, f64),
) -> Result<(RescaleFunction, HyperGaussianSpec), TcapError> {
    use core::f64::consts::PI;
    if order < 2 || order % 2 != 0 {
        return Err(TcapError::BadInput("order must be even and >= 2"));
    }
    if !(contraction > 1.0) || !(t_f > 0.0) {
        return Err(TcapError::BadInput("need contraction > 1 and t_f > 0"));
    }
    let (peak, width) = base;
    if !(peak > 0.0) || !(width > 0.0) {
        return Err(TcapError::BadInput("base peak and width must be positive"));
    }
    let n = order as f64;
    let s = 1.0 / n;
    let erf_edge = specfun::erf(t_f / width);
    let mut ratio = 0.84f64;
    let mut converged = false;
    for _ in 0..FIXED_POINT_MAX_ITER {
        let x_f = ratio.ln() + (t_f / width) * (t_f / width);
        if !(x_f > 0.0) {
            return Err(TcapError::NoFixedPoint);
        }
        let sigma = (t_f / contraction) / x_f.powf(s);
        let inc = specfun::lower_incomplete_gamma(s, x_f)
            .map_err(|_| TcapError::NoFixedPoint)?;
        let next = erf_edge * PI.sqrt() * width * n / (2.0 * sigma * inc);
        let done = (next - ratio).abs() <= 1e-14 * ratio.abs();
        ratio = next;
        if done {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(TcapError::NoFixedPoint);
    }
    // freeze the edge constants from the converged ratio so eval's branch
    // arithmetic reuses the exact values the boundary identities need
    let x_edge = ratio.ln() + (t_f / width) * (t_f / width);
    let sigma = (t_f / contraction) / x_edge.powf(s);
    let inc = specfun::lower_incomplete_gamma(s, x_edge).map_err(|_| TcapError::NoFixedPoint)?;
    let upper_edge =
        specfun::upper_incomplete_gamma(s, x_edge).map_err(|_| TcapError::NoFixedPoint)?;
    let rescale = RescaleFunction {
        kind: RescaleKind::HyperGaussianInversion {
            sigma,
            order,
            peak_ratio: ratio,
            base_width: width,
            scale_k: erf_edge / inc,
            x_edge,
            erfc_edge: specfun::erfc(t_f / width),
            upper_edge,
        },
        contraction,
        window: (-t_f, t_f),
    };
    rescale.validate()?;
    let spec = HyperGaussianSpec::new(ratio * peak, sigma, order)?;
    Ok((rescale, spec))
}

/// Distance between the final states of the contracted and uncontracted
/// dynamics, both from the ground state; exactly zero in theory for
/// multiplicative (alpha) perturbations, bounded by integrator error.
pub fn rescaling_equivalence_check(
    base: (f64, f64),
    rescale: &RescaleFunction,
    p: &crate::model::PerturbationParams,
) -> Result<f64, TcapError> {
    use crate::tdse::{propagate, AnalyticField, PropagationOptions};
    use num_complex::Complex64;
    let (peak, width) = base;
    let (ti, tf) = rescale.window;
    let ground = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    let opts = PropagationOptions {
        n_outputs: 2,
        ..PropagationOptions::default()
    };
    let original = AnalyticField {
        eval_fn: |t: f64| parallel_controls(peak, width, t),
        t_start: ti,
        t_end: tf,
        kinks: vec![0.0],
    };
    let a = propagate(&original, p, ground, &opts)
        .map_err(|_| TcapError::BadInput("original propagation failed"))?;
    let (ci, cf) = rescale.contracted_window();
    let contracted = AnalyticField {
        eval_fn: |tau: f64| {
            let (g, gp) = rescale.eval(tau);
            let (omega, delta) = parallel_controls(peak, width, g);
            (gp * omega, gp * delta)
        },
        t_start: ci,
        t_end: cf,
        kinks: vec![0.0],
    };
    let b = propagate(&contracted, p, ground, &opts)
        .map_err(|_| TcapError::BadInput("contracted propagation failed"))?;
    let fa = a.final_state();
    let fb = b.final_state();
    Ok(((fb[0] - fa[0]).norm_sqr() + (fb[1] - fa[1]).norm_sqr()).sqrt())
}
