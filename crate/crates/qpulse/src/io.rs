//! Byte-stable CSV and JSON artifacts.
//!
//! All CSVs are UTF-8 with a header row, comma separators, LF endings, and
//! every float printed as `{:.16e}` (17 significant digits), so repeated
//! runs with identical inputs reproduce files byte for byte.

use std::fs;
use std::path::Path;

use qpulse_core::model::ControlWaveforms;
use qpulse_core::robustness::RobustnessCurve;
use serde::Serialize;

use crate::error::CliError;

/// Infidelities below this floor are clamped before taking the log.
const LOG_FLOOR: f64 = 1e-300;

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_rows<I>(path: &Path, header: &str, rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let mut text = String::with_capacity(1 << 16);
    text.push_str(header);
    text.push('\n');
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                text.push(',');
            }
            text.push_str(&fmt_float(v));
            first = false;
        }
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn write_controls_csv(path: &Path, c: &ControlWaveforms) -> Result<(), CliError> {
    let phase = c.laser_phase();
    write_rows(
        path,
        "t,omega,delta,laser_phase",
        (0..c.time_grid.len()).map(|i| vec![c.time_grid[i], c.rabi[i], c.detuning[i], phase[i]]),
    )
}

pub fn read_controls_csv(path: &Path) -> Result<ControlWaveforms, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::BadInput(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    match lines.next() {
        Some("t,omega,delta,laser_phase") => {}
        other => {
            return Err(CliError::BadInput(format!(
                "{}: expected header t,omega,delta,laser_phase, got {other:?}",
                path.display()
            )))
        }
    }
    let mut t = Vec::new();
    let mut omega = Vec::new();
    let mut delta = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',').map(str::parse::<f64>);
        let mut next = |what: &str| {
            fields
                .next()
                .ok_or_else(|| {
                    CliError::BadInput(format!("{} row {}: missing {what}", path.display(), k + 2))
                })?
                .map_err(|e| {
                    CliError::BadInput(format!("{} row {}: {what}: {e}", path.display(), k + 2))
                })
        };
        t.push(next("t")?);
        omega.push(next("omega")?);
        delta.push(next("delta")?);
        next("laser_phase")?; // derived column, recomputed on demand
    }
    let label = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("controls")
        .to_owned();
    ControlWaveforms::new(t, omega, delta, label)
        .map_err(|e| CliError::BadInput(format!("{}: {e}", path.display())))
}

/// Trajectory table: time, populations, state components, angles.
pub fn write_trajectory_csv(
    path: &Path,
    traj: &qpulse_core::tdse::StateTrajectory,
    angles: &[qpulse_core::model::DynamicalAngles],
) -> Result<(), CliError> {
    write_rows(
        path,
        "t,p_ground,p_excited,re_c1,im_c1,re_c2,im_c2,theta,varphi,gamma",
        (0..traj.time_grid.len()).map(|i| {
            vec![
                traj.time_grid[i],
                traj.populations[i].0,
                traj.populations[i].1,
                traj.states[i][0].re,
                traj.states[i][0].im,
                traj.states[i][1].re,
                traj.states[i][1].im,
                angles[i].theta,
                angles[i].varphi,
                angles[i].gamma,
            ]
        }),
    )
}

pub fn write_scan_csv(path: &Path, curve: &RobustnessCurve) -> Result<(), CliError> {
    write_rows(
        path,
        "value,infidelity,log10_infidelity",
        curve.values.iter().zip(&curve.infidelity).map(|(&v, &inf)| {
            vec![v, inf, inf.max(LOG_FLOOR).log10()]
        }),
    )
}

/// Two-column table, e.g. the geodesic path or a population trace.
pub fn write_pairs_csv(path: &Path, header: &str, rows: &[(f64, f64)]) -> Result<(), CliError> {
    write_rows(path, header, rows.iter().map(|&(a, b)| vec![a, b]))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn controls_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("controls.csv");
        let t: Vec<f64> = (0..7).map(|i| i as f64 * 0.125).collect();
        let omega: Vec<f64> = t.iter().map(|&t| 1.0 + (0.3 * t).sin() * 1e-13).collect();
        let delta: Vec<f64> = t.iter().map(|&t| (1.7 * t).cos()).collect();
        let c = ControlWaveforms::new(t, omega, delta, "x".to_owned()).unwrap();
        write_controls_csv(&path, &c).unwrap();
        let back = read_controls_csv(&path).unwrap();
        assert_eq!(c.time_grid, back.time_grid);
        assert_eq!(c.rabi, back.rabi);
        assert_eq!(c.detuning, back.detuning);
    }

    #[test]
    fn malformed_controls_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "t,omega\n0,1\n").unwrap();
        assert!(matches!(
            read_controls_csv(&path),
            Err(CliError::BadInput(_))
        ));
        fs::write(&path, "t,omega,delta,laser_phase\n0,1,nope,0\n").unwrap();
        assert!(matches!(
            read_controls_csv(&path),
            Err(CliError::BadInput(_))
        ));
    }

    #[test]
    fn float_format_survives_parse_round_trip() {
        for &x in &[0.1, 1.0 / 3.0, 2.768654321e-11, -5.839663165643882] {
            let s = fmt_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }
}
