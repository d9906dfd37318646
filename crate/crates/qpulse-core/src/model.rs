//! Two-level control model: domain types and pure maps.
//!
//! The state convention used everywhere is
//! `c1 = e^{i(phi - gamma)/2} cos(theta/2)`, `c2 = e^{-i(phi + gamma)/2} sin(theta/2)`,
//! with mixing angle theta, internal phase phi (`varphi`), and global phase
//! gamma. Controls are the Rabi amplitude Omega >= 0 and the detuning Delta;
//! hbar = 1 throughout, so energies and rates share units.
//!
//! The inverse map [`angles_to_controls`] turns a sampled state trajectory
//! back into the `(Omega, Delta)` pair that generates it.

use crate::numerics::{self, derivative_uniform};
use crate::specfun;
use alloc::string::String;
use alloc::vec::Vec;
use num_complex::Complex64;
// on hosted targets the inherent f64 methods shadow this trait,
// but builds without std resolve float math through it
#[allow(unused_imports)]
use num_traits::Float;

/// Errors from the model-layer constructors and maps.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    /// Structural problems in inputs (lengths, ordering, signs).
    BadInput(&'static str),
    /// Both theta-dot and gamma-dot*sin(theta) vanish on an interior
    /// subinterval, so the internal phase there is unrecoverable.
    DegenerateTrajectory { t_start: f64, t_end: f64 },
    /// The sampled trajectory grid is not uniform enough for the fixed
    /// finite-difference stencils.
    NonUniformGrid,
}

impl core::fmt::Display for ModelError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ModelError::BadInput(what) => write!(f, "bad input: {what}"),
            ModelError::DegenerateTrajectory { t_start, t_end } => write!(
                f,
                "degenerate trajectory: controls vanish on the interior interval [{t_start}, {t_end}]"
            ),
            ModelError::NonUniformGrid => write!(f, "trajectory grid is not uniform"),
        }
    }
}

/// Sampled control pair (Omega(t), Delta(t)) on a shared time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlWaveforms {
    /// Strictly increasing sample times.
    pub time_grid: Vec<f64>,
    /// Rabi amplitude, non-negative everywhere (signs live in the phase).
    pub rabi: Vec<f64>,
    /// Detuning.
    pub detuning: Vec<f64>,
    /// Free-form tag carried into output files.
    pub label: String,
}

impl ControlWaveforms {
    pub fn new(
        time_grid: Vec<f64>,
        rabi: Vec<f64>,
        detuning: Vec<f64>,
        label: impl Into<String>,
    ) -> Result<Self, ModelError> {
        let n = time_grid.len();
        if n < 2 {
            return Err(ModelError::BadInput("need at least two samples"));
        }
        if rabi.len() != n || detuning.len() != n {
            return Err(ModelError::BadInput("array lengths differ"));
        }
        if time_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ModelError::BadInput("time grid must strictly increase"));
        }
        if time_grid.iter().any(|v| !v.is_finite())
            || rabi.iter().any(|v| !v.is_finite())
            || detuning.iter().any(|v| !v.is_finite())
        {
            return Err(ModelError::BadInput("non-finite sample"));
        }
        if rabi.iter().any(|&v| v < 0.0) {
            return Err(ModelError::BadInput("rabi must be non-negative"));
        }
        Ok(Self {
            time_grid,
            rabi,
            detuning,
            label: label.into(),
        })
    }

    /// Accumulated laser phase, the running integral of the detuning.
    pub fn laser_phase(&self) -> Vec<f64> {
        numerics::cumulative_trapezoid(&self.time_grid, &self.detuning)
    }

    /// Pulse area, the integral of the Rabi amplitude over the grid.
    pub fn pulse_area(&self) -> f64 {
        numerics::trapezoid(&self.time_grid, &self.rabi)
    }

    /// Largest Rabi sample.
    pub fn peak_rabi(&self) -> f64 {
        self.rabi.iter().fold(0.0f64, |m, &v| m.max(v))
    }

    /// First and last grid times.
    pub fn span(&self) -> (f64, f64) {
        (self.time_grid[0], self.time_grid[self.time_grid.len() - 1])
    }
}

/// Bloch-sphere angles with an explicit global phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicalAngles {
    /// Mixing angle in [0, pi].
    pub theta: f64,
    /// Internal (relative) phase.
    pub varphi: f64,
    /// Global phase, kept unwrapped along trajectories.
    pub gamma: f64,
}

/// Static perturbations of the nominal Hamiltonian: a relative Rabi
/// amplitude error, a detuning offset, and a transverse offset.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PerturbationParams {
    /// Relative amplitude error: Omega -> (1 + alpha) Omega.
    pub alpha: f64,
    /// Additive detuning offset.
    pub delta: f64,
    /// Additive transverse coupling offset.
    pub beta: f64,
}

impl PerturbationParams {
    pub const NONE: Self = Self {
        alpha: 0.0,
        delta: 0.0,
        beta: 0.0,
    };
}

/// Smooth quasi-square envelope `peak * exp(-(t/width)^order)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperGaussianSpec {
    pub peak: f64,
    pub width: f64,
    /// Even exponent; large values approach a square pulse.
    pub order: u32,
}

impl HyperGaussianSpec {
    pub fn new(peak: f64, width: f64, order: u32) -> Result<Self, ModelError> {
        if !(peak > 0.0) || !(width > 0.0) {
            return Err(ModelError::BadInput("peak and width must be positive"));
        }
        if order < 2 || order % 2 != 0 {
            return Err(ModelError::BadInput("order must be even and >= 2"));
        }
        Ok(Self { peak, width, order })
    }

    /// Total pulse area `2 * peak * width * Gamma(1/n) / n`.
    pub fn area(&self) -> f64 {
        let n = self.order as f64;
        let g = specfun::gamma(1.0 / n).expect("1/order is a valid gamma argument");
        2.0 * self.peak * self.width * g / n
    }
}

/// Envelope value at time `t`; even in `t` by construction.
pub fn hyper_gaussian_value(spec: &HyperGaussianSpec, t: f64) -> f64 {
    let x = (t / spec.width).powi(spec.order as i32);
    spec.peak * (-x).exp()
}

/// Hyper-Gaussian of order `n` whose peak is `omega0` and whose total area
/// is `area`: the width follows from the closed-form area expression.
pub fn hyper_gaussian_matched(n: u32, omega0: f64, area: f64) -> Result<HyperGaussianSpec, ModelError> {
    if !(omega0 > 0.0) || !(area > 0.0) {
        return Err(ModelError::BadInput("peak and area must be positive"));
    }
    if n < 2 || n % 2 != 0 {
        return Err(ModelError::BadInput("order must be even and >= 2"));
    }
    let nf = n as f64;
    let g = specfun::gamma(1.0 / nf).expect("1/n is a valid gamma argument");
    let width = nf * (area / omega0) / (2.0 * g);
    HyperGaussianSpec::new(omega0, width, n)
}

/// Two-by-two Hamiltonian matrix in row-major order.
pub type Hamiltonian = [[Complex64; 2]; 2];

/// Perturbed two-level Hamiltonian: diagonal -/+ (Delta + delta)/2,
/// off-diagonal ((1 + alpha) Omega + beta)/2. Exactly Hermitian (real
/// symmetric) by construction.
pub fn hamiltonian_matrix(omega: f64, delta_ctrl: f64, p: &PerturbationParams) -> Hamiltonian {
    let w = 0.5 * ((1.0 + p.alpha) * omega + p.beta);
    let d = 0.5 * (delta_ctrl + p.delta);
    [
        [Complex64::new(-d, 0.0), Complex64::new(w, 0.0)],
        [Complex64::new(w, 0.0), Complex64::new(d, 0.0)],
    ]
}

/// State vector for the given angles; unit norm for any input.
pub fn angles_to_state(a: &DynamicalAngles) -> [Complex64; 2] {
    let half = 0.5 * a.theta;
    let c1 = Complex64::from_polar(half.cos(), 0.5 * (a.varphi - a.gamma));
    let c2 = Complex64::from_polar(half.sin(), -0.5 * (a.varphi + a.gamma));
    [c1, c2]
}

/// Fraction of the peak Rabi value below which a sample counts as a dead
/// zone for phase recovery. Sits above the differentiation noise floor of
/// finely sampled trajectories so tail jitter cannot pass for signal.
const DEAD_ZONE_REL: f64 = 1e-9;

/// Interior dead runs at most this many samples wide are bridged by holding
/// the phase; anything longer is a genuine hold with unrecoverable phase.
const DEAD_BRIDGE_MAX: usize = 8;

/// Recover the controls that generate a sampled angle trajectory.
///
/// On a uniform grid, differentiates theta and gamma with fourth-order
/// stencils and applies the inverse formulas
/// `Omega = sqrt(thetadot^2 + gammadot^2 sin^2 theta)`,
/// `phi = atan2(thetadot, gammadot sin theta)`,
/// `Delta = phidot - gammadot cos theta`.
/// Where Omega vanishes (outside the pulse support) phi is extended
/// constantly from the nearest defined sample, so Delta stays zero there;
/// an interior stretch with vanishing Omega is reported as degenerate.
pub fn angles_to_controls(
    time_grid: &[f64],
    theta: &[f64],
    gamma: &[f64],
    label: &str,
) -> Result<ControlWaveforms, ModelError> {
    let n = time_grid.len();
    if n < 5 {
        return Err(ModelError::BadInput("need at least five samples"));
    }
    if theta.len() != n || gamma.len() != n {
        return Err(ModelError::BadInput("array lengths differ"));
    }
    let h = (time_grid[n - 1] - time_grid[0]) / (n - 1) as f64;
    if h <= 0.0 {
        return Err(ModelError::BadInput("time grid must strictly increase"));
    }
    for (i, w) in time_grid.windows(2).enumerate() {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs() {
            let _ = i;
            return Err(ModelError::NonUniformGrid);
        }
    }

    let theta_dot = derivative_uniform(theta, h);
    let gamma_dot = derivative_uniform(gamma, h);
    let mut rabi = Vec::with_capacity(n);
    for i in 0..n {
        let gs = gamma_dot[i] * theta[i].sin();
        rabi.push((theta_dot[i] * theta_dot[i] + gs * gs).sqrt());
    }
    let peak = rabi.iter().fold(0.0f64, |m, &v| m.max(v));
    let cut = DEAD_ZONE_REL * peak;

    // phase where defined, NaN in dead zones
    let mut phi: Vec<f64> = (0..n)
        .map(|i| {
            if rabi[i] > cut {
                theta_dot[i].atan2(gamma_dot[i] * theta[i].sin())
            } else {
                f64::NAN
            }
        })
        .collect();

    // reject interior dead zones, fill boundary ones by constant extension
    let first_def = phi.iter().position(|v| !v.is_nan());
    let last_def = phi.iter().rposition(|v| !v.is_nan());
    match (first_def, last_def) {
        (Some(a), Some(b)) => {
            let mut i = a;
            while i <= b {
                if !phi[i].is_nan() {
                    i += 1;
                    continue;
                }
                let start = i;
                while phi[i].is_nan() {
                    i += 1; // phi[b] is defined, so this stops at or before b
                }
                if i - start > DEAD_BRIDGE_MAX {
                    return Err(ModelError::DegenerateTrajectory {
                        t_start: time_grid[start],
                        t_end: time_grid[i - 1],
                    });
                }
                // a short interior dip is jitter around the cut, not a hold:
                // keep the phase flat through it, the controls there vanish
                for k in start..i {
                    phi[k] = phi[start - 1];
                }
            }
            for i in 0..a {
                phi[i] = phi[a];
            }
            for i in b + 1..n {
                phi[i] = phi[b];
            }
        }
        _ => {
            // the whole trajectory is stationary: null controls
            phi.iter_mut().for_each(|v| *v = core::f64::consts::FRAC_PI_2);
        }
    }
    numerics::unwrap_phases(&mut phi);
    let phi_dot = derivative_uniform(&phi, h);
    let detuning: Vec<f64> = (0..n)
        .map(|i| phi_dot[i] - gamma_dot[i] * theta[i].cos())
        .collect();

    ControlWaveforms::new(time_grid.to_vec(), rabi, detuning, String::from(label))
}
