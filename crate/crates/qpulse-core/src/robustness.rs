//! Perturbative error integrands and robustness scans.
//!
//! For a trajectory expressed through its dynamical angles, static
//! Hamiltonian perturbations enter the transfer probability through two
//! time integrals: a real dephasing integrand e (first order in the
//! phase) and a complex transfer integrand f whose modulus squared gives
//! the leading infidelity. Scans propagate the full dynamics on a grid of
//! perturbation strengths and fit the scaling exponent on a log-log
//! window.

use crate::model::{ControlWaveforms, DynamicalAngles, PerturbationParams};
use crate::numerics::{derivative_uniform, integrate_uniform};
use crate::tdse::{self, PropagationOptions, TdseError};
use alloc::string::String;
use alloc::vec::Vec;
use num_complex::Complex64;
// on hosted targets the inherent f64 methods shadow this trait,
// but builds without std resolve float math through it
#[allow(unused_imports)]
use num_traits::Float;

/// Which perturbation parameter a scan sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationAxis {
    Alpha,
    Delta,
    Beta,
}

impl PerturbationAxis {
    pub fn name(&self) -> &'static str {
        match self {
            PerturbationAxis::Alpha => "alpha",
            PerturbationAxis::Delta => "delta",
            PerturbationAxis::Beta => "beta",
        }
    }

    /// Perturbation with `value` on this axis and zero elsewhere.
    pub fn params(&self, value: f64) -> PerturbationParams {
        let mut p = PerturbationParams::NONE;
        match self {
            PerturbationAxis::Alpha => p.alpha = value,
            PerturbationAxis::Delta => p.delta = value,
            PerturbationAxis::Beta => p.beta = value,
        }
        p
    }
}

/// Errors from scans and fits.
#[derive(Debug, Clone, PartialEq)]
pub enum RobustnessError {
    BadInput(&'static str),
    /// Propagation failed at one scan point.
    Propagation { value: f64, source: TdseError },
    /// Too few usable points in the fit window.
    DegenerateFit { usable: usize },
}

impl core::fmt::Display for RobustnessError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            RobustnessError::BadInput(what) => write!(f, "bad input: {what}"),
            RobustnessError::Propagation { value, source } => {
                write!(f, "propagation failed at scan value {value}: {source}")
            }
            RobustnessError::DegenerateFit { usable } => {
                write!(f, "slope fit needs at least 3 usable points, found {usable}")
            }
        }
    }
}

/// First-order dephasing integrand
/// e = -(delta cos(theta) - alpha gammadot sin^2(theta)
///     - beta sin(theta) cos(varphi)) / 2.
///
/// `rates` carries (thetadot, gammadot); linear in the perturbation.
pub fn error_integrand_e(
    angles: &DynamicalAngles,
    rates: (f64, f64),
    p: &PerturbationParams,
) -> f64 {
    let (_, gammadot) = rates;
    let st = angles.theta.sin();
    -0.5 * (p.delta * angles.theta.cos()
        - p.alpha * gammadot * st * st
        - p.beta * st * angles.varphi.cos())
}

/// Transfer-error integrand
/// f = (delta sin(theta) + alpha (gammadot sin(2 theta) / 2 - i thetadot)
///     + beta (cos(varphi) cos(theta) - i sin(varphi))) e^{i gamma} / 2.
pub fn error_integrand_f(
    angles: &DynamicalAngles,
    rates: (f64, f64),
    p: &PerturbationParams,
) -> Complex64 {
    let (thetadot, gammadot) = rates;
    let bracket = Complex64::new(
        p.delta * angles.theta.sin()
            + p.alpha * 0.5 * gammadot * (2.0 * angles.theta).sin()
            + p.beta * angles.varphi.cos() * angles.theta.cos(),
        -p.alpha * thetadot - p.beta * angles.varphi.sin(),
    );
    0.5 * bracket * Complex64::new(0.0, angles.gamma).exp()
}

fn angle_rates(time_grid: &[f64], angles: &[DynamicalAngles]) -> (Vec<f64>, Vec<f64>) {
    let h = time_grid[1] - time_grid[0];
    let theta: Vec<f64> = angles.iter().map(|a| a.theta).collect();
    let gamma: Vec<f64> = angles.iter().map(|a| a.gamma).collect();
    (derivative_uniform(&theta, h), derivative_uniform(&gamma, h))
}

fn check_uniform(time_grid: &[f64], angles: &[DynamicalAngles]) -> Result<(), RobustnessError> {
    if time_grid.len() != angles.len() || time_grid.len() < 5 {
        return Err(RobustnessError::BadInput(
            "need matching grids with at least five samples",
        ));
    }
    let h = time_grid[1] - time_grid[0];
    let tol = 1e-9 * (1.0 + h.abs());
    for i in 1..time_grid.len() {
        if ((time_grid[i] - time_grid[i - 1]) - h).abs() > tol {
            return Err(RobustnessError::BadInput("time grid must be uniform"));
        }
    }
    Ok(())
}

/// First-order phase error -i * integral of e over the trajectory.
pub fn first_order_term(
    time_grid: &[f64],
    angles: &[DynamicalAngles],
    p: &PerturbationParams,
) -> Result<Complex64, RobustnessError> {
    check_uniform(time_grid, angles)?;
    let (dtheta, dgamma) = angle_rates(time_grid, angles);
    let h = time_grid[1] - time_grid[0];
    let e: Vec<f64> = angles
        .iter()
        .zip(dtheta.iter().zip(&dgamma))
        .map(|(a, (&td, &gd))| error_integrand_e(a, (td, gd), p))
        .collect();
    Ok(Complex64::new(0.0, -1.0) * integrate_uniform(&e, h))
}

/// Integral of f over the trajectory; its squared modulus is the
/// leading-order transfer infidelity.
pub fn transfer_error_integral(
    time_grid: &[f64],
    angles: &[DynamicalAngles],
    p: &PerturbationParams,
) -> Result<Complex64, RobustnessError> {
    check_uniform(time_grid, angles)?;
    let (dtheta, dgamma) = angle_rates(time_grid, angles);
    let h = time_grid[1] - time_grid[0];
    let mut fre = Vec::with_capacity(angles.len());
    let mut fim = Vec::with_capacity(angles.len());
    for (a, (&td, &gd)) in angles.iter().zip(dtheta.iter().zip(&dgamma)) {
        let v = error_integrand_f(a, (td, gd), p);
        fre.push(v.re);
        fim.push(v.im);
    }
    Ok(Complex64::new(
        integrate_uniform(&fre, h),
        integrate_uniform(&fim, h),
    ))
}

/// Infidelity of a design against one perturbation axis.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessCurve {
    pub axis: PerturbationAxis,
    pub values: Vec<f64>,
    pub infidelity: Vec<f64>,
    pub design_label: String,
    pub pulse_area: f64,
}

/// Propagate the design from the ground state at each perturbation value
/// and record the final transfer infidelity. Deterministic: same design
/// and grid give bitwise identical curves.
pub fn fidelity_scan(
    design: &ControlWaveforms,
    axis: PerturbationAxis,
    grid: &[f64],
) -> Result<RobustnessCurve, RobustnessError> {
    fidelity_scan_with(design, axis, grid, &PropagationOptions::default())
}

/// [`fidelity_scan`] with explicit integrator tolerances. Infidelities near
/// the default integration floor (around 1e-11) need tighter settings to be
/// trusted, e.g. when fitting small-perturbation slopes.
pub fn fidelity_scan_with(
    design: &ControlWaveforms,
    axis: PerturbationAxis,
    grid: &[f64],
    base_opts: &PropagationOptions,
) -> Result<RobustnessCurve, RobustnessError> {
    if grid.is_empty() {
        return Err(RobustnessError::BadInput("empty scan grid"));
    }
    let ground = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    let excited = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
    let opts = PropagationOptions {
        n_outputs: 2,
        ..base_opts.clone()
    };
    let mut infidelity = Vec::with_capacity(grid.len());
    for &value in grid {
        let p = axis.params(value);
        let traj = tdse::propagate(design, &p, ground, &opts)
            .map_err(|source| RobustnessError::Propagation { value, source })?;
        infidelity.push(tdse::transfer_infidelity(&traj, &excited).max(0.0));
    }
    Ok(RobustnessCurve {
        axis,
        values: grid.to_vec(),
        infidelity,
        design_label: design.label.clone(),
        pulse_area: design.pulse_area(),
    })
}

/// Least-squares slope of log10(infidelity) against log10(|value|) over
/// the window `lo <= |value| <= hi`. Zero-infidelity and zero-value
/// points are skipped; fewer than three usable points is an error.
pub fn infidelity_slope(
    curve: &RobustnessCurve,
    window: (f64, f64),
) -> Result<f64, RobustnessError> {
    let (lo, hi) = window;
    if !(lo > 0.0) || !(hi > lo) {
        return Err(RobustnessError::BadInput("need 0 < lo < hi"));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&v, &inf) in curve.values.iter().zip(&curve.infidelity) {
        let mag = v.abs();
        if mag >= lo && mag <= hi && inf > 0.0 {
            xs.push(mag.log10());
            ys.push(inf.log10());
        }
    }
    if xs.len() < 3 {
        return Err(RobustnessError::DegenerateFit { usable: xs.len() });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return Err(RobustnessError::DegenerateFit { usable: xs.len() });
    }
    Ok(sxy / sxx)
}
