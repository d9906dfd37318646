//! Command implementations: design, simulate, scan, reproduce.

use std::path::Path;

use qpulse_core::model::{
    hyper_gaussian_value, ControlWaveforms, HyperGaussianSpec, PerturbationParams,
};
use qpulse_core::numerics::linspace;
use qpulse_core::rio::{self, GeodesicBasin, RioDesign};
use qpulse_core::robustness::{self, PerturbationAxis};
use qpulse_core::tcap::{self, RescaleFunction};
use qpulse_core::tdse::{extract_angles, propagate, transfer_infidelity, PropagationOptions};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::io;

use num_complex::Complex64;

const GROUND: [Complex64; 2] = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
const EXCITED: [Complex64; 2] = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];

/// Slope-fit window on |alpha| shared by scan summaries and figure checks.
const SLOPE_WINDOW: (f64, f64) = (1e-3, 1e-2);

// ---------------------------------------------------------------- design

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Units {
    /// Peak Rabi frequency fixed to one.
    Omega0,
    /// Time measured in the equivalent-area Gaussian width T, peak 2.77/T.
    Fig2,
}

impl Units {
    fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "omega0" => Ok(Units::Omega0),
            "fig2" => Ok(Units::Fig2),
            other => Err(CliError::BadInput(format!(
                "units must be omega0 or fig2, got {other:?}"
            ))),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Units::Omega0 => "omega0",
            Units::Fig2 => "fig2",
        }
    }
}

#[derive(Serialize)]
struct BasinReport {
    seed_gamma_f: f64,
    area: f64,
    gamma_f: f64,
    max_residual: f64,
    refined: bool,
}

#[derive(Serialize)]
struct GeodesicReport {
    area: f64,
    gamma_f: f64,
    residuals: [f64; 2],
    basins: Vec<BasinReport>,
}

#[derive(Serialize)]
struct HgReport {
    order: u32,
    width: f64,
    peak: f64,
}

#[derive(Serialize)]
struct SineReport {
    terms: usize,
    coefficients: Vec<f64>,
    weighted_sum: f64,
    required_sum: f64,
}

#[derive(Serialize)]
struct RescaleReport {
    contraction: f64,
    window: [f64; 2],
    base_peak: f64,
    base_width: f64,
    contracted_peak: f64,
    peak_ratio: f64,
}

/// Everything design writes into design.json.
#[derive(Serialize)]
struct DesignReport<'a> {
    protocol: &'a str,
    units: &'a str,
    label: &'a str,
    pulse_area: f64,
    peak_rabi: f64,
    window: [f64; 2],
    resolved: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    geodesic: Option<GeodesicReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hyper_gaussian: Option<HgReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sine: Option<SineReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rescale: Option<RescaleReport>,
}

fn reject_if_set<T>(field: &Option<T>, message: &str) -> Result<(), CliError> {
    if field.is_some() {
        return Err(CliError::BadInput(message.to_owned()));
    }
    Ok(())
}

/// Scale a control table from peak-one units to a new time unit: times
/// divide by `lambda`, frequencies multiply by it; the area is unchanged.
fn scale_units(c: &ControlWaveforms, lambda: f64) -> ControlWaveforms {
    ControlWaveforms::new(
        c.time_grid.iter().map(|t| t / lambda).collect(),
        c.rabi.iter().map(|v| v * lambda).collect(),
        c.detuning.iter().map(|v| v * lambda).collect(),
        c.label.clone(),
    )
    .expect("a uniform rescale preserves waveform validity")
}

/// Solved RIO design plus the multistart summary and the applied time scale.
struct RioBundle {
    design: RioDesign,
    basins: Vec<GeodesicBasin>,
    table: ControlWaveforms,
    lambda: f64,
}

fn build_rio(
    order: u32,
    grid_points: usize,
    tolerance: f64,
    samples: usize,
    units: Units,
) -> Result<RioBundle, CliError> {
    if order < 2 || order % 2 != 0 {
        return Err(CliError::BadInput(
            "hyper-Gaussian order must be even and at least 2".into(),
        ));
    }
    let (geodesic, basins) = rio::solve_geodesic_with_report(grid_points, tolerance)?;
    let pulse = qpulse_core::model::hyper_gaussian_matched(order, 1.0, geodesic.area)
        .map_err(|e| CliError::BadInput(e.to_string()))?;
    let design = rio::parametrize_by_pulse(&geodesic, &pulse, samples)?;
    let lambda = match units {
        Units::Omega0 => 1.0,
        Units::Fig2 => {
            // the Fig. 2 time unit T is the width of the base Gaussian whose
            // hyper-Gaussian contraction reproduces this pulse shape
            let (_, href) = tcap::hg_rescale(order, 3.0, 4.0, (1.0, 1.0))?;
            design.pulse.width / href.width
        }
    };
    let table = if lambda == 1.0 {
        design.controls.clone()
    } else {
        scale_units(&design.controls, lambda)
    };
    Ok(RioBundle {
        design,
        basins,
        table,
        lambda,
    })
}

/// Endpoint gamma of the refined minimum-area basin.
fn best_gamma_f(geodesic_area: f64, basins: &[GeodesicBasin], fallback: f64) -> f64 {
    basins
        .iter()
        .filter(|b| b.refined && (b.area - geodesic_area).abs() < 1e-9)
        .map(|b| b.gamma_f)
        .next()
        .unwrap_or(fallback)
}

fn flat_pi_table(samples: usize) -> Result<ControlWaveforms, CliError> {
    let t = linspace(0.0, core::f64::consts::PI, samples);
    let n = t.len();
    ControlWaveforms::new(t, vec![1.0; n], vec![0.0; n], "flat-pi")
        .map_err(|e| CliError::BadInput(e.to_string()))
}

pub fn run_design(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let protocol = cfg
        .protocol
        .as_deref()
        .ok_or_else(|| CliError::BadInput("missing --protocol".into()))?;
    let samples = cfg.samples.unwrap_or(2001);
    if samples < 5 {
        return Err(CliError::BadInput("need at least five samples".into()));
    }
    std::fs::create_dir_all(out)?;

    let mut resolved = cfg.clone();
    resolved.protocol = Some(protocol.to_owned());
    resolved.samples = Some(samples);

    let (table, geodesic, hyper_gaussian, sine, rescale, units_name) = match protocol {
        "rio" => {
            reject_if_set(
                &cfg.area,
                "the rio pulse area is fixed by the geodesic; --area is not accepted",
            )?;
            reject_if_set(&cfg.terms, "--terms applies to tcap-sine")?;
            reject_if_set(&cfg.contraction, "--a applies to tcap protocols")?;
            reject_if_set(&cfg.t_f, "--tf applies to tcap protocols")?;
            let order = cfg.order.unwrap_or(14);
            let grid_points = cfg.grid_points.unwrap_or(512);
            let tolerance = cfg.tolerance.unwrap_or(1e-10);
            let units = Units::parse(cfg.units.as_deref().unwrap_or("fig2"))?;
            resolved.order = Some(order);
            resolved.grid_points = Some(grid_points);
            resolved.tolerance = Some(tolerance);
            resolved.units = Some(units.name().to_owned());
            let bundle = build_rio(order, grid_points, tolerance, samples, units)?;
            let g = &bundle.design.geodesic;
            let report = GeodesicReport {
                area: g.area,
                gamma_f: best_gamma_f(g.area, &bundle.basins, *g.gamma_grid.last().unwrap()),
                residuals: [g.residuals.0, g.residuals.1],
                basins: bundle
                    .basins
                    .iter()
                    .map(|b| BasinReport {
                        seed_gamma_f: b.seed_gamma_f,
                        area: b.area,
                        gamma_f: b.gamma_f,
                        max_residual: b.max_residual,
                        refined: b.refined,
                    })
                    .collect(),
            };
            let hg = HgReport {
                order,
                width: bundle.design.pulse.width / bundle.lambda,
                peak: bundle.design.pulse.peak * bundle.lambda,
            };
            (
                bundle.table,
                Some(report),
                Some(hg),
                None,
                None,
                units.name(),
            )
        }
        "tcap-sine" => {
            reject_if_set(
                &cfg.units,
                "--units applies to rio; tcap output is in units of the base width",
            )?;
            reject_if_set(&cfg.order, "--n applies to rio and tcap-hg")?;
            let terms = cfg.terms.unwrap_or(3);
            let contraction = cfg.contraction.unwrap_or(3.0);
            let t_f = cfg.t_f.unwrap_or(4.0);
            let area = cfg.area.unwrap_or(5.84);
            resolved.terms = Some(terms);
            resolved.contraction = Some(contraction);
            resolved.t_f = Some(t_f);
            resolved.area = Some(area);
            let peak = tcap::gaussian_peak_for_area(area, 1.0);
            let window = (-t_f, t_f);
            let base = (peak, 1.0);
            let coeffs = tcap::optimize_sine_coefficients(terms, contraction, base, window)?;
            let weighted_sum: f64 = coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| (k + 1) as f64 * c)
                .sum();
            let required_sum = tcap::sine_coefficient_constraint(contraction, window);
            let rf = RescaleFunction::sine_expansion(contraction, coeffs.clone(), window)?;
            let table = tcap::rescaled_controls(base, &rf, samples)?;
            let rescale = RescaleReport {
                contraction,
                window: [window.0, window.1],
                base_peak: peak,
                base_width: 1.0,
                contracted_peak: table.peak_rabi(),
                peak_ratio: table.peak_rabi() / peak,
            };
            let sine = SineReport {
                terms,
                coefficients: coeffs,
                weighted_sum,
                required_sum,
            };
            (table, None, None, Some(sine), Some(rescale), "T")
        }
        "tcap-hg" => {
            reject_if_set(
                &cfg.units,
                "--units applies to rio; tcap output is in units of the base width",
            )?;
            reject_if_set(&cfg.terms, "--terms applies to tcap-sine")?;
            let order = cfg.order.unwrap_or(14);
            let contraction = cfg.contraction.unwrap_or(3.0);
            let t_f = cfg.t_f.unwrap_or(4.0);
            let area = cfg.area.unwrap_or(5.84);
            resolved.order = Some(order);
            resolved.contraction = Some(contraction);
            resolved.t_f = Some(t_f);
            resolved.area = Some(area);
            let peak = tcap::gaussian_peak_for_area(area, 1.0);
            let base = (peak, 1.0);
            let (rf, spec) = tcap::hg_rescale(order, contraction, t_f, base)?;
            let table = tcap::rescaled_controls(base, &rf, samples)?;
            let hg = HgReport {
                order,
                width: spec.width,
                peak: spec.peak,
            };
            let rescale = RescaleReport {
                contraction,
                window: [-t_f, t_f],
                base_peak: peak,
                base_width: 1.0,
                contracted_peak: table.peak_rabi(),
                peak_ratio: spec.peak / peak,
            };
            (table, None, Some(hg), None, Some(rescale), "T")
        }
        "flat-pi" => {
            reject_if_set(&cfg.area, "flat-pi has area pi by definition")?;
            reject_if_set(&cfg.units, "--units applies to rio")?;
            reject_if_set(&cfg.order, "--n applies to rio and tcap-hg")?;
            reject_if_set(&cfg.terms, "--terms applies to tcap-sine")?;
            reject_if_set(&cfg.contraction, "--a applies to tcap protocols")?;
            reject_if_set(&cfg.t_f, "--tf applies to tcap protocols")?;
            (flat_pi_table(samples)?, None, None, None, None, "omega0")
        }
        other => {
            return Err(CliError::BadInput(format!(
                "unknown protocol {other:?}; expected rio, tcap-sine, tcap-hg or flat-pi"
            )))
        }
    };
    resolved.units = Some(units_name.to_owned());

    io::write_controls_csv(&out.join("controls.csv"), &table)?;
    let report = DesignReport {
        protocol,
        units: units_name,
        label: &table.label,
        pulse_area: table.pulse_area(),
        peak_rabi: table.peak_rabi(),
        window: [table.span().0, table.span().1],
        resolved: &resolved,
        geodesic,
        hyper_gaussian,
        sine,
        rescale,
    };
    io::write_json(&out.join("design.json"), &report)?;
    Ok(())
}

// -------------------------------------------------------------- simulate

pub fn run_simulate(controls: &Path, cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let table = io::read_controls_csv(controls)?;
    let p = PerturbationParams {
        alpha: cfg.alpha.unwrap_or(0.0),
        delta: cfg.delta.unwrap_or(0.0),
        beta: cfg.beta.unwrap_or(0.0),
    };
    let opts = PropagationOptions {
        n_outputs: table.time_grid.len().max(2),
        ..PropagationOptions::default()
    };
    let traj = propagate(&table, &p, GROUND, &opts)?;
    let angles = extract_angles(&traj);
    std::fs::create_dir_all(out)?;
    io::write_trajectory_csv(&out.join("trajectory.csv"), &traj, &angles)?;
    println!("{:.16e}", transfer_infidelity(&traj, &EXCITED));
    Ok(())
}

// ------------------------------------------------------------------ scan

fn parse_axis(s: &str) -> Result<PerturbationAxis, CliError> {
    match s {
        "alpha" => Ok(PerturbationAxis::Alpha),
        "delta" => Ok(PerturbationAxis::Delta),
        "beta" => Ok(PerturbationAxis::Beta),
        other => Err(CliError::BadInput(format!(
            "axis must be alpha, delta or beta, got {other:?}"
        ))),
    }
}

pub fn run_scan(controls: &Path, cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let table = io::read_controls_csv(controls)?;
    let axis = parse_axis(cfg.axis.as_deref().unwrap_or("alpha"))?;
    let lo = cfg.range_min.unwrap_or(-0.2);
    let hi = cfg.range_max.unwrap_or(0.2);
    let points = cfg.points.unwrap_or(161);
    if !(hi > lo) || points < 2 {
        return Err(CliError::BadInput(
            "need range_max > range_min and at least two points".into(),
        ));
    }
    let grid = linspace(lo, hi, points);
    let curve = robustness::fidelity_scan(&table, axis, &grid)?;
    std::fs::create_dir_all(out)?;
    io::write_scan_csv(&out.join(format!("scan_{}.csv", axis.name())), &curve)?;
    if matches!(axis, PerturbationAxis::Alpha) {
        match robustness::infidelity_slope(&curve, SLOPE_WINDOW) {
            Ok(slope) => println!(
                "alpha log-log slope on [{}, {}]: {slope:.6}",
                SLOPE_WINDOW.0, SLOPE_WINDOW.1
            ),
            Err(e) => println!("alpha slope fit unavailable: {e}"),
        }
    }
    Ok(())
}

// ------------------------------------------------------------- reproduce

#[derive(Serialize)]
struct Check {
    name: String,
    value: f64,
    bound: String,
    pass: bool,
}

impl Check {
    fn upper(name: &str, value: f64, bound: f64) -> Self {
        Check {
            name: name.to_owned(),
            value,
            bound: format!("<= {bound:e}"),
            pass: value <= bound,
        }
    }

    fn window(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Check {
            name: name.to_owned(),
            value,
            bound: format!("in [{lo}, {hi}]"),
            pass: (lo..=hi).contains(&value),
        }
    }
}

#[derive(Serialize)]
struct Manifest {
    figure: String,
    files: Vec<String>,
    checks: Vec<Check>,
}

fn finish_manifest(out: &Path, manifest: &Manifest) -> Result<(), CliError> {
    io::write_json(&out.join(format!("{}_manifest.json", manifest.figure)), manifest)?;
    let failed: Vec<&str> = manifest
        .checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| c.name.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::CheckFailed(failed.join(", ")))
    }
}

fn populations_csv(
    out: &Path,
    name: &str,
    table: &ControlWaveforms,
    n_outputs: usize,
) -> Result<(f64, Vec<String>), CliError> {
    let opts = PropagationOptions {
        n_outputs,
        ..PropagationOptions::default()
    };
    let traj = propagate(table, &PerturbationParams::NONE, GROUND, &opts)?;
    let rows: Vec<(f64, f64)> = traj
        .time_grid
        .iter()
        .zip(&traj.populations)
        .map(|(&t, &(pg, _))| (t, pg))
        .collect();
    // two files keep the pair-table writer simple: ground and excited
    let g = format!("{name}_p_ground.csv");
    let e = format!("{name}_p_excited.csv");
    io::write_pairs_csv(&out.join(&g), "t,p_ground", &rows)?;
    let rows_e: Vec<(f64, f64)> = traj
        .time_grid
        .iter()
        .zip(&traj.populations)
        .map(|(&t, &(_, pe))| (t, pe))
        .collect();
    io::write_pairs_csv(&out.join(&e), "t,p_excited", &rows_e)?;
    Ok((transfer_infidelity(&traj, &EXCITED), vec![g, e]))
}

pub fn run_reproduce(figure: &str, out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out)?;
    match figure {
        "fig1" => reproduce_fig1(out),
        "fig2" => reproduce_fig2(out),
        "fig3" => reproduce_fig3(out),
        "fig4" => reproduce_fig4(out),
        "fig5" => reproduce_fig5(out),
        other => Err(CliError::BadInput(format!(
            "unknown figure {other:?}; expected fig1..fig5"
        ))),
    }
}

/// Geodesic path in the (gamma, theta) plane with its area and endpoint.
fn reproduce_fig1(out: &Path) -> Result<(), CliError> {
    use core::f64::consts::PI;
    let (g, basins) = rio::solve_geodesic_with_report(512, 1e-10)?;
    let rows: Vec<(f64, f64)> = g
        .gamma_grid
        .iter()
        .zip(&g.theta)
        .map(|(&gm, &th)| (gm, th))
        .collect();
    io::write_pairs_csv(&out.join("fig1_geodesic.csv"), "gamma,theta", &rows)?;
    let gamma_f = best_gamma_f(g.area, &basins, *g.gamma_grid.last().unwrap());
    let target = 5.0 * PI / 3.0;
    let manifest = Manifest {
        figure: "fig1".into(),
        files: vec!["fig1_geodesic.csv".into()],
        checks: vec![
            Check::window("pulse_area", g.area, 5.79, 5.89),
            Check::upper(
                "gamma_f_relative_error",
                (gamma_f - target).abs() / target,
                0.01,
            ),
            Check::upper("residual_c1", g.residuals.0.abs(), 1e-6),
            Check::upper("residual_c2", g.residuals.1.abs(), 1e-6),
        ],
    };
    finish_manifest(out, &manifest)
}

/// Smooth-pulse controls and the unperturbed transfer they drive.
fn reproduce_fig2(out: &Path) -> Result<(), CliError> {
    let bundle = build_rio(14, 512, 1e-10, 2001, Units::Fig2)?;
    io::write_controls_csv(&out.join("fig2_controls.csv"), &bundle.table)?;
    let (infidelity, mut files) = populations_csv(out, "fig2", &bundle.table, 2001)?;
    files.insert(0, "fig2_controls.csv".into());

    // the emitted envelope must be the imposed hyper-Gaussian
    let spec = HyperGaussianSpec::new(
        bundle.design.pulse.peak * bundle.lambda,
        bundle.design.pulse.width / bundle.lambda,
        bundle.design.pulse.order,
    )
    .expect("scaled spec stays valid");
    let sup_rel = bundle
        .table
        .time_grid
        .iter()
        .zip(&bundle.table.rabi)
        .map(|(&t, &r)| (r - hyper_gaussian_value(&spec, t)).abs())
        .fold(0.0f64, f64::max)
        / spec.peak;

    let manifest = Manifest {
        figure: "fig2".into(),
        files,
        checks: vec![
            Check::upper("closed_loop_infidelity", infidelity, 1e-6),
            Check::upper(
                "peak_rabi_relative_error",
                (bundle.table.peak_rabi() - 2.77).abs() / 2.77,
                0.01,
            ),
            Check::upper("envelope_sup_norm_relative", sup_rel, 1e-8),
        ],
    };
    finish_manifest(out, &manifest)
}

/// A tcap design set at a fixed base area, shared by fig3 and fig4.
struct TcapSet {
    base: (f64, f64),
    identity: RescaleFunction,
    sines: Vec<(usize, RescaleFunction)>,
    hg: RescaleFunction,
    hg_spec: HyperGaussianSpec,
}

fn tcap_set(area: f64) -> Result<TcapSet, CliError> {
    let window = (-4.0, 4.0);
    let base = (tcap::gaussian_peak_for_area(area, 1.0), 1.0);
    let mut sines = Vec::new();
    for terms in [2usize, 3, 6] {
        let coeffs = tcap::optimize_sine_coefficients(terms, 3.0, base, window)?;
        sines.push((
            terms,
            RescaleFunction::sine_expansion(3.0, coeffs, window)?,
        ));
    }
    let (hg, hg_spec) = tcap::hg_rescale(14, 3.0, 4.0, base)?;
    Ok(TcapSet {
        base,
        identity: RescaleFunction::identity(window),
        sines,
        hg,
        hg_spec,
    })
}

/// Base Gaussian and the contracted pulse shapes at a = 3.
fn reproduce_fig3(out: &Path) -> Result<(), CliError> {
    let set = tcap_set(5.84)?;
    let samples = 8001;
    let base_table = tcap::rescaled_controls(set.base, &set.identity, samples)?;
    io::write_controls_csv(&out.join("fig3_base_gaussian.csv"), &base_table)?;
    let mut files = vec!["fig3_base_gaussian.csv".into()];
    let mut checks = Vec::new();
    let base_area = base_table.pulse_area();

    let mut peaks = Vec::new();
    for (terms, rf) in &set.sines {
        let table = tcap::rescaled_controls(set.base, rf, samples)?;
        let name = format!("fig3_sine_n{terms}.csv");
        io::write_controls_csv(&out.join(&name), &table)?;
        checks.push(Check::upper(
            &format!("area_invariance_sine_n{terms}"),
            (table.pulse_area() - base_area).abs() / base_area,
            1e-6,
        ));
        peaks.push(table.peak_rabi());
        files.push(name);
    }
    let hg_table = tcap::rescaled_controls(set.base, &set.hg, samples)?;
    io::write_controls_csv(&out.join("fig3_hg_n14.csv"), &hg_table)?;
    files.push("fig3_hg_n14.csv".into());
    checks.push(Check::upper(
        "area_invariance_hg_n14",
        (hg_table.pulse_area() - base_area).abs() / base_area,
        1e-6,
    ));

    // adding terms lowers the optimized peak; the smooth inversion beats N=2
    checks.push(Check::upper("peak_drop_n2_to_n3", peaks[1] - peaks[0], -1e-12));
    checks.push(Check::upper("peak_drop_n3_to_n6", peaks[2] - peaks[1], -1e-12));
    checks.push(Check::upper(
        "hg_peak_below_n2",
        hg_table.peak_rabi() - peaks[0],
        -1e-12,
    ));

    let manifest = Manifest {
        figure: "fig3".into(),
        files,
        checks,
    };
    finish_manifest(out, &manifest)
}

/// Adiabatic transfer dynamics, uncontracted and contracted.
fn reproduce_fig4(out: &Path) -> Result<(), CliError> {
    let set = tcap_set(5.84)?;
    let samples = 2001;
    let base_table = tcap::rescaled_controls(set.base, &set.identity, samples)?;
    let hg_table = tcap::rescaled_controls(set.base, &set.hg, samples)?;
    io::write_controls_csv(&out.join("fig4_base_controls.csv"), &base_table)?;
    io::write_controls_csv(&out.join("fig4_contracted_controls.csv"), &hg_table)?;
    let (_, base_files) = populations_csv(out, "fig4_base", &base_table, samples)?;
    let (_, hg_files) = populations_csv(out, "fig4_contracted", &hg_table, samples)?;

    let mut files = vec![
        "fig4_base_controls.csv".to_owned(),
        "fig4_contracted_controls.csv".to_owned(),
    ];
    files.extend(base_files);
    files.extend(hg_files);

    // gap constancy of the parallel base design
    let gap_err = base_table
        .rabi
        .iter()
        .zip(&base_table.detuning)
        .map(|(&o, &d)| ((o * o + d * d).sqrt() - set.base.0).abs())
        .fold(0.0f64, f64::max)
        / set.base.0;
    let mut checks = vec![Check::upper("gap_constancy", gap_err, 1e-12)];

    // contraction preserves the final state exactly
    for (terms, rf) in &set.sines {
        let dist = tcap::rescaling_equivalence_check(set.base, rf, &PerturbationParams::NONE)?;
        checks.push(Check::upper(
            &format!("state_equivalence_sine_n{terms}"),
            dist,
            1e-6,
        ));
    }
    let dist = tcap::rescaling_equivalence_check(set.base, &set.hg, &PerturbationParams::NONE)?;
    checks.push(Check::upper("state_equivalence_hg_n14", dist, 1e-6));
    checks.push(Check::upper(
        "hg_width_reference",
        (set.hg_spec.width - 1.095).abs() / 1.095,
        0.01,
    ));

    let manifest = Manifest {
        figure: "fig4".into(),
        files,
        checks,
    };
    finish_manifest(out, &manifest)
}

/// Logarithmic two-sided grid over the slope-fit window.
fn slope_grid() -> Vec<f64> {
    let (lo, hi) = SLOPE_WINDOW;
    let n = 9;
    let mut grid = Vec::with_capacity(2 * n);
    for i in 0..n {
        let mag = lo * (hi / lo).powf(i as f64 / (n - 1) as f64);
        grid.push(-mag);
        grid.push(mag);
    }
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid
}

/// Slope of a design's infidelity in |alpha| over the fit window, measured
/// above the integration floor so the smallest points carry real signal.
fn measure_alpha_slope(table: &ControlWaveforms) -> Result<f64, CliError> {
    let opts = PropagationOptions {
        rtol: 1e-12,
        atol: 1e-14,
        ..PropagationOptions::default()
    };
    let curve =
        robustness::fidelity_scan_with(table, PerturbationAxis::Alpha, &slope_grid(), &opts)?;
    robustness::infidelity_slope(&curve, SLOPE_WINDOW)
        .map_err(|e| CliError::Integration(e.to_string()))
}

/// Robustness comparison scans at matched pulse areas.
fn reproduce_fig5(out: &Path) -> Result<(), CliError> {
    // dense tables keep the interpolation floor of the quartic design near
    // 3e-14, two decades under the smallest fitted infidelity
    let samples = 8001;
    let bundle = build_rio(14, 512, 1e-10, samples, Units::Fig2)?;
    let area_eq = bundle.design.geodesic.area;

    let tcap_eq = {
        let base = (tcap::gaussian_peak_for_area(area_eq, 1.0), 1.0);
        let (rf, _) = tcap::hg_rescale(14, 3.0, 4.0, base)?;
        tcap::rescaled_controls(base, &rf, samples)?
    };
    let tcap_hi = {
        let base = (tcap::gaussian_peak_for_area(9.22, 1.0), 1.0);
        let (rf, _) = tcap::hg_rescale(14, 3.0, 4.0, base)?;
        tcap::rescaled_controls(base, &rf, samples)?
    };
    let flat = flat_pi_table(samples)?;

    let grid = linspace(-0.2, 0.2, 161);
    let designs: [(&str, &ControlWaveforms); 4] = [
        ("fig5_rio_scan.csv", &bundle.table),
        ("fig5_tcap_area584_scan.csv", &tcap_eq),
        ("fig5_tcap_area922_scan.csv", &tcap_hi),
        ("fig5_flat_pi_scan.csv", &flat),
    ];
    let mut files = Vec::new();
    for (name, table) in designs {
        let curve = robustness::fidelity_scan(table, PerturbationAxis::Alpha, &grid)?;
        io::write_scan_csv(&out.join(name), &curve)?;
        files.push(name.to_owned());
    }

    // ordering on the comparison grids
    let grid_eq = linspace(-0.15, 0.15, 31);
    let rio_eq = robustness::fidelity_scan(&bundle.table, PerturbationAxis::Alpha, &grid_eq)?;
    let tcap_on_eq = robustness::fidelity_scan(&tcap_eq, PerturbationAxis::Alpha, &grid_eq)?;
    let worst_margin = rio_eq
        .infidelity
        .iter()
        .zip(&tcap_on_eq.infidelity)
        .map(|(&r, &t)| r - t)
        .fold(f64::NEG_INFINITY, f64::max);

    let grid_left = linspace(-0.15, 0.0, 16);
    let rio_left = robustness::fidelity_scan(&bundle.table, PerturbationAxis::Alpha, &grid_left)?;
    let tcap_hi_left = robustness::fidelity_scan(&tcap_hi, PerturbationAxis::Alpha, &grid_left)?;
    let worst_excess = tcap_hi_left
        .infidelity
        .iter()
        .zip(&rio_left.infidelity)
        .map(|(&t, &r)| t - 2.0 * r)
        .fold(f64::NEG_INFINITY, f64::max);

    let slope_rio = measure_alpha_slope(&bundle.table)?;
    let slope_flat = measure_alpha_slope(&flat)?;

    // The two ordering checks encode the headline comparison literally; the
    // adiabatic curve has a fidelity revival near alpha = -0.05 that dips
    // under the quartic curve, and near alpha = 0 the quartic design is so
    // accurate that no adiabatic pulse stays within a fixed factor of it,
    // so these report their true margins rather than being loosened.
    let manifest = Manifest {
        figure: "fig5".into(),
        files,
        checks: vec![
            Check::upper("rio_below_tcap_at_equal_area", worst_margin, 0.0),
            Check::upper("tcap_922_left_side_excess", worst_excess, 0.0),
            Check::window("rio_alpha_slope", slope_rio, 3.7, 4.3),
            Check::window("flat_pi_alpha_slope", slope_flat, 1.9, 2.1),
        ],
    };
    finish_manifest(out, &manifest)
}
