//! Robust two-level quantum control with smooth quasi-square pulses.
//!
//! The crate designs and analyzes population-transfer protocols for a
//! two-level system driven by a Rabi frequency Ω(t) and a detuning Δ(t):
//!
//! * [`rio`] derives pulse-robust controls by inverse optimization of a
//!   constrained geodesic in the dynamical-angle space, then maps an
//!   arbitrary smooth pulse envelope onto that trajectory.
//! * [`tcap`] contracts an adiabatic reference protocol in time while
//!   keeping the dynamics exactly invariant, shaping the contracted pulse
//!   either by a sine-series rescaling or by imposing a hyper-Gaussian
//!   envelope in closed form.
//! * [`robustness`] quantifies transfer infidelity under amplitude,
//!   offset, and detuning errors via direct propagation and via the
//!   second-order error integrals.
//!
//! Supporting layers: [`specfun`] (error function and incomplete gamma
//! family implemented from first principles), [`ode`] (adaptive embedded
//! Runge-Kutta pair), [`numerics`] (quadrature, finite differences,
//! splines, root finding), [`optim`] (quasi-Newton, augmented Lagrangian,
//! Nelder-Mead), [`model`] (system types and control maps), and [`tdse`]
//! (propagation and angle extraction).
//!
//! The crate is `no_std` (with `alloc`); IO and the command line live in
//! the companion `qpulse` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod model;
pub mod numerics;
pub mod ode;
pub mod optim;
pub mod rio;
pub mod robustness;
pub mod specfun;
pub mod tcap;
pub mod tdse;
