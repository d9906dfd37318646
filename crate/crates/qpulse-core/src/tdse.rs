//! Propagation of the driven two-level Schroedinger equation and
//! extraction of the dynamical angles from state trajectories.
//!
//! Controls enter through the [`ControlField`] trait: sampled waveforms
//! ([`ControlWaveforms`], piecewise-linear between knots) and analytic
//! closures ([`AnalyticField`]) share the same propagation path. Every
//! field knot is a mandatory integrator breakpoint, so interpolation kinks
//! never sit inside a step.

use crate::model::{
    ControlWaveforms, DynamicalAngles, PerturbationParams,
};
use crate::numerics::{cumulative_trapezoid, linspace};
use crate::ode::{self, OdeError, OdeOptions};
use alloc::vec::Vec;
use num_complex::Complex64;
// on hosted targets the inherent f64 methods shadow this trait,
// but builds without std resolve float math through it
#[allow(unused_imports)]
use num_traits::Float;

/// Errors from propagation and angle integration.
#[derive(Debug, Clone, PartialEq)]
pub enum TdseError {
    /// Structural problems in inputs.
    BadInput(&'static str),
    /// The underlying ODE solver failed.
    Integration(OdeError),
    /// Angle ODEs asked to launch from a pole with a transverse-free phase
    /// (sin(varphi) = 0), where the regularized first step cannot move.
    SingularLaunch { theta: f64 },
}

impl core::fmt::Display for TdseError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            TdseError::BadInput(what) => write!(f, "bad input: {what}"),
            TdseError::Integration(e) => write!(f, "integration failure: {e}"),
            TdseError::SingularLaunch { theta } => {
                write!(f, "angle equations are singular at launch (theta = {theta})")
            }
        }
    }
}

impl From<OdeError> for TdseError {
    fn from(e: OdeError) -> Self {
        TdseError::Integration(e)
    }
}

/// A control pair (Omega, Delta) defined over a time window.
pub trait ControlField {
    /// Control values at time `t`.
    fn eval(&self, t: f64) -> (f64, f64);
    /// Start and end of the defined window.
    fn span(&self) -> (f64, f64);
    /// Interior times where the controls are non-smooth.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Analytic control field from a closure, with declared kink times.
pub struct AnalyticField<F: Fn(f64) -> (f64, f64)> {
    pub eval_fn: F,
    pub t_start: f64,
    pub t_end: f64,
    pub kinks: Vec<f64>,
}

impl<F: Fn(f64) -> (f64, f64)> ControlField for AnalyticField<F> {
    fn eval(&self, t: f64) -> (f64, f64) {
        (self.eval_fn)(t)
    }
    fn span(&self) -> (f64, f64) {
        (self.t_start, self.t_end)
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.kinks.clone()
    }
}

/// Piecewise-linear interpolation on the sample grid, clamped outside it.
fn lerp(grid: &[f64], vals: &[f64], t: f64) -> f64 {
    let n = grid.len();
    if t <= grid[0] {
        return vals[0];
    }
    if t >= grid[n - 1] {
        return vals[n - 1];
    }
    let i = match grid.binary_search_by(|v| v.partial_cmp(&t).expect("finite grid")) {
        Ok(i) => return vals[i],
        Err(i) => i - 1,
    };
    let w = (t - grid[i]) / (grid[i + 1] - grid[i]);
    vals[i] + w * (vals[i + 1] - vals[i])
}

impl ControlField for ControlWaveforms {
    fn eval(&self, t: f64) -> (f64, f64) {
        (
            lerp(&self.time_grid, &self.rabi, t),
            lerp(&self.time_grid, &self.detuning, t),
        )
    }
    fn span(&self) -> (f64, f64) {
        ControlWaveforms::span(self)
    }
    fn breakpoints(&self) -> Vec<f64> {
        // every interior knot is a kink of the interpolant
        self.time_grid[1..self.time_grid.len() - 1].to_vec()
    }
}

/// Tolerances and output sampling for [`propagate`].
#[derive(Debug, Clone)]
pub struct PropagationOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Number of uniformly spaced output samples across the window.
    pub n_outputs: usize,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            n_outputs: 2001,
        }
    }
}

/// Complex two-component state sampled over time.
#[derive(Debug, Clone)]
pub struct StateTrajectory {
    pub time_grid: Vec<f64>,
    pub states: Vec<[Complex64; 2]>,
    /// (p_ground, p_excited) at each sample.
    pub populations: Vec<(f64, f64)>,
}

impl StateTrajectory {
    pub fn final_state(&self) -> [Complex64; 2] {
        self.states[self.states.len() - 1]
    }

    /// Largest deviation of the state norm from one across all samples.
    pub fn max_norm_error(&self) -> f64 {
        self.states
            .iter()
            .map(|s| ((s[0].norm_sqr() + s[1].norm_sqr()).sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Propagate the two-level TDSE under the given field and perturbation.
///
/// The complex state is integrated as four real components; the state is
/// recorded on a uniform output grid covering the field's window.
pub fn propagate<C: ControlField + ?Sized>(
    field: &C,
    p: &PerturbationParams,
    initial_state: [Complex64; 2],
    opts: &PropagationOptions,
) -> Result<StateTrajectory, TdseError> {
    let norm = (initial_state[0].norm_sqr() + initial_state[1].norm_sqr()).sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(TdseError::BadInput("initial state must be unit norm"));
    }
    if opts.n_outputs < 2 {
        return Err(TdseError::BadInput("need at least two output samples"));
    }
    let (t0, tf) = field.span();
    let outputs = linspace(t0, tf, opts.n_outputs);
    let y0 = [
        initial_state[0].re,
        initial_state[0].im,
        initial_state[1].re,
        initial_state[1].im,
    ];
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let (omega, delta) = field.eval(t);
        let w = 0.5 * ((1.0 + p.alpha) * omega + p.beta);
        let d = 0.5 * (delta + p.delta);
        // cdot = -i H c with H = [[-d, w], [w, d]]
        dy[0] = -d * y[1] + w * y[3];
        dy[1] = d * y[0] - w * y[2];
        dy[2] = w * y[1] + d * y[3];
        dy[3] = -w * y[0] - d * y[2];
    };
    let sol = ode::integrate(
        rhs,
        t0,
        tf,
        &y0,
        &field.breakpoints(),
        &outputs,
        &OdeOptions {
            rtol: opts.rtol,
            atol: opts.atol,
            ..OdeOptions::default()
        },
    )?;
    let states: Vec<[Complex64; 2]> = sol
        .states
        .iter()
        .map(|y| {
            [
                Complex64::new(y[0], y[1]),
                Complex64::new(y[2], y[3]),
            ]
        })
        .collect();
    let populations = states
        .iter()
        .map(|s| (s[0].norm_sqr(), s[1].norm_sqr()))
        .collect();
    Ok(StateTrajectory {
        time_grid: sol.times,
        states,
        populations,
    })
}

/// One minus the transfer probability into `target` at the final time.
pub fn transfer_infidelity(traj: &StateTrajectory, target: &[Complex64; 2]) -> f64 {
    let fin = traj.final_state();
    let overlap = target[0].conj() * fin[0] + target[1].conj() * fin[1];
    1.0 - overlap.norm_sqr()
}

/// Amplitude below which a component's phase is treated as undefined.
const PHASE_TOL: f64 = 1e-10;

/// NaN-aware sequential unwrap: defined samples are shifted by multiples of
/// 2 pi to stay within pi of the previous defined sample.
fn unwrap_with_gaps(vals: &mut [f64]) {
    use core::f64::consts::PI;
    let mut last: Option<f64> = None;
    let mut offset = 0.0;
    for v in vals.iter_mut() {
        if v.is_nan() {
            continue;
        }
        *v += offset;
        if let Some(prev) = last {
            while *v - prev > PI {
                *v -= 2.0 * PI;
                offset -= 2.0 * PI;
            }
            while *v - prev < -PI {
                *v += 2.0 * PI;
                offset += 2.0 * PI;
            }
        }
        last = Some(*v);
    }
}

/// Recover the dynamical angles along a state trajectory.
///
/// theta is always well defined; the two component phases are unwrapped
/// where their amplitudes are resolvable. Near the poles one phase
/// combination is meaningless: there gamma (near theta = 0) or varphi
/// (near theta = pi) is frozen at its last defined value, matching the
/// pi/2 endpoint conventions when the trajectory starts at a pole.
pub fn extract_angles(traj: &StateTrajectory) -> Vec<DynamicalAngles> {
    use core::f64::consts::FRAC_PI_2;
    let n = traj.states.len();
    let mut a1: Vec<f64> = Vec::with_capacity(n);
    let mut a2: Vec<f64> = Vec::with_capacity(n);
    for s in &traj.states {
        a1.push(if s[0].norm() > PHASE_TOL {
            s[0].arg()
        } else {
            f64::NAN
        });
        a2.push(if s[1].norm() > PHASE_TOL {
            s[1].arg()
        } else {
            f64::NAN
        });
    }
    unwrap_with_gaps(&mut a1);
    unwrap_with_gaps(&mut a2);

    let mut out = Vec::with_capacity(n);
    let mut phi_prev = FRAC_PI_2;
    let mut gamma_prev = FRAC_PI_2;
    for k in 0..n {
        let s = &traj.states[k];
        let theta = 2.0 * s[1].norm().atan2(s[0].norm());
        let (varphi, gamma) = match (a1[k].is_nan(), a2[k].is_nan()) {
            (false, false) => (a1[k] - a2[k], -(a1[k] + a2[k])),
            // c2 unresolvable: keep gamma, recover varphi from arg(c1)
            (false, true) => (2.0 * a1[k] + gamma_prev, gamma_prev),
            // c1 unresolvable: keep varphi, recover gamma from arg(c2)
            (true, false) => (phi_prev, -2.0 * a2[k] - phi_prev),
            (true, true) => (phi_prev, gamma_prev),
        };
        phi_prev = varphi;
        gamma_prev = gamma;
        out.push(DynamicalAngles {
            theta,
            varphi,
            gamma,
        });
    }
    out
}

/// Mixing angle below which the angle ODEs are entered via the analytic
/// launch (theta grows as the running pulse area while the phases hold).
const THETA_LAUNCH: f64 = 1e-6;

/// Guard against division blowup at the poles; the retained dynamics there
/// is negligible at this scale.
const SIN_FLOOR: f64 = 1e-12;

/// Integrate the angle equations
/// `thetadot = Omega sin(varphi)`,
/// `varphidot = Delta + Omega cos(varphi) cot(theta)`,
/// `gammadot = Omega cos(varphi) / sin(theta)`
/// under the given field, returning samples on a uniform grid.
///
/// A launch at theta < 1e-6 is regularized: varphi and gamma are held at
/// their initial values and theta follows the running area
/// `integral Omega sin(varphi_0)` until it reaches 1e-6, where the ODE
/// integration takes over.
pub fn integrate_angle_odes<C: ControlField + ?Sized>(
    field: &C,
    initial: &DynamicalAngles,
    opts: &PropagationOptions,
) -> Result<(Vec<f64>, Vec<DynamicalAngles>), TdseError> {
    let (t0, tf) = field.span();
    if opts.n_outputs < 2 {
        return Err(TdseError::BadInput("need at least two output samples"));
    }
    let outputs = linspace(t0, tf, opts.n_outputs);
    let mut theta0 = initial.theta;
    let phi0 = initial.varphi;
    let gamma0 = initial.gamma;
    let mut t_enter = t0;
    let mut prefix: Vec<(f64, f64)> = Vec::new();

    if theta0 < THETA_LAUNCH {
        let s_phi = phi0.sin();
        if s_phi.abs() < 1e-12 {
            return Err(TdseError::SingularLaunch { theta: theta0 });
        }
        // running area on a fine grid until theta reaches the entry value
        let fine = linspace(t0, tf, 20_001);
        let omega_sin: Vec<f64> = fine.iter().map(|&t| field.eval(t).0 * s_phi).collect();
        let cum = cumulative_trapezoid(&fine, &omega_sin);
        let need = THETA_LAUNCH - theta0;
        let idx = cum.iter().position(|&v| v >= need);
        match idx {
            None => {
                // the whole pulse cannot lift theta to the entry value:
                // the trajectory is the frozen launch throughout
                let angles = outputs
                    .iter()
                    .map(|&t| {
                        let th = theta0 + lerp(&fine, &cum, t);
                        DynamicalAngles {
                            theta: th,
                            varphi: phi0,
                            gamma: gamma0,
                        }
                    })
                    .collect();
                return Ok((outputs, angles));
            }
            Some(i) => {
                // linear interpolation of the crossing time
                let (ta, tb) = (fine[i - 1], fine[i]);
                let (ca, cb) = (cum[i - 1], cum[i]);
                t_enter = ta + (need - ca) / (cb - ca) * (tb - ta);
                for (&t, &c) in fine.iter().zip(&cum) {
                    if t >= t_enter {
                        break;
                    }
                    prefix.push((t, theta0 + c));
                }
                theta0 = THETA_LAUNCH;
            }
        }
    }

    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let (omega, delta) = field.eval(t);
        let (sp, cp) = (y[1].sin(), y[1].cos());
        let s_th = y[0].sin().max(SIN_FLOOR);
        let cot = y[0].cos() / s_th;
        dy[0] = omega * sp;
        dy[1] = delta + omega * cp * cot;
        dy[2] = omega * cp / s_th;
    };
    let tail_outputs: Vec<f64> = outputs.iter().copied().filter(|&t| t > t_enter).collect();
    let sol = ode::integrate(
        rhs,
        t_enter,
        tf,
        &[theta0, phi0, gamma0],
        &field.breakpoints(),
        &tail_outputs,
        &OdeOptions {
            rtol: opts.rtol,
            atol: opts.atol,
            ..OdeOptions::default()
        },
    )?;

    // stitch launch-phase samples (interpolated on the fine area grid) with
    // the integrated tail
    let mut angles = Vec::with_capacity(outputs.len());
    let mut it = sol.times.iter().zip(&sol.states);
    for &t in &outputs {
        if t <= t_enter {
            let th = if prefix.is_empty() {
                theta0
            } else {
                let ts: Vec<f64> = prefix.iter().map(|p| p.0).collect();
                let vs: Vec<f64> = prefix.iter().map(|p| p.1).collect();
                lerp(&ts, &vs, t)
            };
            angles.push(DynamicalAngles {
                theta: th,
                varphi: phi0,
                gamma: gamma0,
            });
        } else {
            let (_tt, y) = it.next().expect("every late output was integrated");
            angles.push(DynamicalAngles {
                theta: y[0],
                varphi: y[1],
                gamma: y[2],
            });
        }
    }
    Ok((outputs, angles))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::angles_to_state;
    use core::f64::consts::{FRAC_PI_2, PI};

    fn ground() -> [Complex64; 2] {
        [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]
    }

    fn excited() -> [Complex64; 2] {
        [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]
    }

    fn flat_field(omega: f64, delta: f64, t_end: f64) -> AnalyticField<impl Fn(f64) -> (f64, f64)> {
        AnalyticField {
            eval_fn: move |_t| (omega, delta),
            t_start: 0.0,
            t_end,
            kinks: Vec::new(),
        }
    }

    #[test]
    fn resonant_pi_pulse_inverts_population() {
        let traj = propagate(
            &flat_field(1.0, 0.0, PI),
            &PerturbationParams::NONE,
            ground(),
            &PropagationOptions::default(),
        )
        .unwrap();
        let inf = transfer_infidelity(&traj, &excited());
        assert!(inf < 1e-10, "infidelity {inf:e}");
    }

    #[test]
    fn resonant_two_pi_pulse_returns_to_ground() {
        let traj = propagate(
            &flat_field(1.0, 0.0, 2.0 * PI),
            &PerturbationParams::NONE,
            ground(),
            &PropagationOptions::default(),
        )
        .unwrap();
        let inf = transfer_infidelity(&traj, &ground());
        assert!(inf < 1e-10);
    }

    #[test]
    fn detuned_rabi_formula_holds() {
        let (omega, delta, dur) = (0.9, 0.7, 3.3);
        let w = (omega * omega + delta * delta).sqrt();
        let expected = (omega / w).powi(2) * (0.5 * w * dur).sin().powi(2);
        let traj = propagate(
            &flat_field(omega, delta, dur),
            &PerturbationParams::NONE,
            ground(),
            &PropagationOptions::default(),
        )
        .unwrap();
        let p2 = traj.populations[traj.populations.len() - 1].1;
        assert!((p2 - expected).abs() < 1e-9, "p2 = {p2}, expected {expected}");
    }

    #[test]
    fn amplitude_error_enters_through_alpha() {
        // area pi at alpha = 0.1 leaves infidelity cos^2(1.1 pi / 2)
        let traj = propagate(
            &flat_field(1.0, 0.0, PI),
            &PerturbationParams {
                alpha: 0.1,
                ..Default::default()
            },
            ground(),
            &PropagationOptions::default(),
        )
        .unwrap();
        let inf = transfer_infidelity(&traj, &excited());
        let expected = (1.1 * FRAC_PI_2).cos().powi(2);
        assert!((inf - expected).abs() < 1e-9);
    }

    #[test]
    fn norm_is_conserved() {
        let field = AnalyticField {
            eval_fn: |t: f64| (2.0 * (-t * t).exp(), 0.8 * t),
            t_start: -4.0,
            t_end: 4.0,
            kinks: Vec::new(),
        };
        let traj = propagate(
            &field,
            &PerturbationParams::NONE,
            ground(),
            &PropagationOptions::default(),
        )
        .unwrap();
        assert!(traj.max_norm_error() < 1e-10);
        for (p1, p2) in &traj.populations {
            assert!((p1 + p2 - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn backward_propagation_recovers_initial_state() {
        let fwd_field = AnalyticField {
            eval_fn: |t: f64| (1.5 * (-(t - 1.0) * (t - 1.0)).exp(), 0.3),
            t_start: 0.0,
            t_end: 2.0,
            kinks: Vec::new(),
        };
        let traj = propagate(
            &fwd_field,
            &PerturbationParams::NONE,
            ground(),
            &PropagationOptions::default(),
        )
        .unwrap();
        let fin = traj.final_state();
        // same controls traversed in reverse
        let back_field = AnalyticField {
            eval_fn: |t: f64| (1.5 * (-(t - 1.0) * (t - 1.0)).exp(), 0.3),
            t_start: 2.0,
            t_end: 0.0,
            kinks: Vec::new(),
        };
        let back = propagate(
            &back_field,
            &PerturbationParams::NONE,
            fin,
            &PropagationOptions::default(),
        )
        .unwrap();
        let b = back.final_state();
        assert!((b[0] - Complex64::new(1.0, 0.0)).norm() < 1e-8);
        assert!(b[1].norm() < 1e-8);
    }

    #[test]
    fn tighter_tolerance_improves_final_state() {
        let run = |rtol: f64| {
            let traj = propagate(
                &flat_field(1.0, 0.4, 10.0),
                &PerturbationParams::NONE,
                ground(),
                &PropagationOptions {
                    rtol,
                    atol: rtol * 1e-2,
                    n_outputs: 2,
                },
            )
            .unwrap();
            traj.final_state()
        };
        let reference = run(1e-13);
        let err = |s: [Complex64; 2]| {
            ((s[0] - reference[0]).norm_sqr() + (s[1] - reference[1]).norm_sqr()).sqrt()
        };
        let coarse = err(run(1e-5));
        let fine = err(run(1e-9));
        assert!(fine < coarse * 1e-2, "coarse {coarse:e}, fine {fine:e}");
    }

    #[test]
    fn rejects_non_unit_initial_state() {
        let bad = [Complex64::new(0.5, 0.0), Complex64::new(0.0, 0.0)];
        assert!(matches!(
            propagate(
                &flat_field(1.0, 0.0, 1.0),
                &PerturbationParams::NONE,
                bad,
                &PropagationOptions::default()
            ),
            Err(TdseError::BadInput(_))
        ));
    }

    #[test]
    fn extract_angles_round_trips_synthetic_states() {
        // analytic angle trajectory with a gamma sweep crossing 2 pi
        let n = 400;
        let times = linspace(0.0, 1.0, n);
        let states: Vec<[Complex64; 2]> = times
            .iter()
            .map(|&t| {
                angles_to_state(&DynamicalAngles {
                    theta: 0.2 + 2.5 * t,
                    varphi: 0.4 * (3.0 * t).sin(),
                    gamma: 9.0 * t,
                })
            })
            .collect();
        let traj = StateTrajectory {
            time_grid: times.clone(),
            populations: states.iter().map(|s| (s[0].norm_sqr(), s[1].norm_sqr())).collect(),
            states,
        };
        let angles = extract_angles(&traj);
        for (k, a) in angles.iter().enumerate() {
            let t = times[k];
            assert!((a.theta - (0.2 + 2.5 * t)).abs() < 1e-12);
            assert!((a.varphi - 0.4 * (3.0 * t).sin()).abs() < 1e-10, "k={k}");
            assert!((a.gamma - 9.0 * t).abs() < 1e-10, "k={k}");
        }
    }

    #[test]
    fn extract_angles_freezes_phases_at_poles() {
        // pure ground state: theta 0, phases at the pi/2 convention
        let traj = StateTrajectory {
            time_grid: alloc::vec![0.0, 1.0],
            states: alloc::vec![ground(), ground()],
            populations: alloc::vec![(1.0, 0.0), (1.0, 0.0)],
        };
        let a = extract_angles(&traj);
        assert_eq!(a[0].theta, 0.0);
        assert!((a[0].varphi - FRAC_PI_2).abs() < 1e-14);
        assert!((a[0].gamma - FRAC_PI_2).abs() < 1e-14);
    }

    #[test]
    fn angle_odes_reduce_to_linear_ramp_on_resonance() {
        let field = flat_field(0.7, 0.0, 3.0);
        let (times, angles) = integrate_angle_odes(
            &field,
            &DynamicalAngles {
                theta: 1e-9,
                varphi: FRAC_PI_2,
                gamma: FRAC_PI_2,
            },
            &PropagationOptions::default(),
        )
        .unwrap();
        for (k, a) in angles.iter().enumerate() {
            let expected = 1e-9 + 0.7 * times[k];
            if expected < PI - 0.01 {
                assert!((a.theta - expected).abs() < 1e-7, "k={k}");
                assert!((a.varphi - FRAC_PI_2).abs() < 1e-7);
                assert!((a.gamma - FRAC_PI_2).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn angle_odes_reject_transverse_free_pole_launch() {
        let field = flat_field(1.0, 0.0, 1.0);
        let res = integrate_angle_odes(
            &field,
            &DynamicalAngles {
                theta: 0.0,
                varphi: 0.0,
                gamma: 0.0,
            },
            &PropagationOptions::default(),
        );
        assert!(matches!(res, Err(TdseError::SingularLaunch { .. })));
    }

    #[test]
    fn angle_route_agrees_with_state_route_on_parallel_sweep() {
        // Gaussian pulse with the constant-gap detuning; adiabatic transfer
        let w0 = 6.0;
        let field = AnalyticField {
            eval_fn: move |t: f64| {
                let lam = (-t * t).exp();
                let delta = w0 * t.signum() * (1.0 - lam * lam).sqrt();
                (w0 * lam, delta)
            },
            t_start: -4.0,
            t_end: 4.0,
            kinks: alloc::vec![0.0],
        };
        let traj = propagate(
            &field,
            &PerturbationParams::NONE,
            ground(),
            &PropagationOptions::default(),
        )
        .unwrap();
        let from_state = extract_angles(&traj);
        let (_times, from_odes) = integrate_angle_odes(
            &field,
            &DynamicalAngles {
                theta: 0.0,
                varphi: FRAC_PI_2,
                gamma: FRAC_PI_2,
            },
            &PropagationOptions::default(),
        )
        .unwrap();
        assert_eq!(from_state.len(), from_odes.len());
        let mut sup = 0.0f64;
        for (a, b) in from_state.iter().zip(&from_odes) {
            sup = sup.max((a.theta - b.theta).abs());
        }
        assert!(sup < 1e-5, "theta sup-norm difference {sup:e}");
    }

    #[test]
    fn inverse_controls_close_the_loop_on_a_synthetic_trajectory() {
        // smooth angles -> controls -> propagation -> extracted angles
        let n = 3001;
        let t_end = 4.0;
        let times = linspace(0.0, t_end, n);
        let theta_of = |t: f64| PI * t / t_end;
        let gamma_of = |t: f64| FRAC_PI_2 + 0.3 * (1.0 - (2.0 * PI * t / t_end).cos());
        let theta: Vec<f64> = times.iter().map(|&t| theta_of(t)).collect();
        let gamma: Vec<f64> = times.iter().map(|&t| gamma_of(t)).collect();
        let controls =
            crate::model::angles_to_controls(&times, &theta, &gamma, "synthetic").unwrap();
        let init = angles_to_state(&DynamicalAngles {
            theta: theta[0],
            varphi: controls_phi_at_start(&theta, &gamma, &times),
            gamma: gamma[0],
        });
        let traj = propagate(
            &controls,
            &PerturbationParams::NONE,
            init,
            &PropagationOptions {
                n_outputs: 1001,
                ..Default::default()
            },
        )
        .unwrap();
        let angles = extract_angles(&traj);
        let mut sup_theta = 0.0f64;
        let mut sup_gamma = 0.0f64;
        for (k, a) in angles.iter().enumerate() {
            let t = traj.time_grid[k];
            // interior only: the poles carry convention-dependent phases
            if a.theta > 0.05 && a.theta < PI - 0.05 {
                sup_theta = sup_theta.max((a.theta - theta_of(t)).abs());
                sup_gamma = sup_gamma.max((a.gamma - gamma_of(t)).abs());
            }
        }
        assert!(sup_theta < 1e-5, "theta deviation {sup_theta:e}");
        assert!(sup_gamma < 1e-5, "gamma deviation {sup_gamma:e}");
    }

    /// Initial varphi implied by the sampled trajectory derivatives.
    fn controls_phi_at_start(theta: &[f64], gamma: &[f64], times: &[f64]) -> f64 {
        let h = times[1] - times[0];
        let td = (theta[1] - theta[0]) / h;
        let gd = (gamma[1] - gamma[0]) / h;
        td.atan2(gd * theta[0].sin())
    }
}
