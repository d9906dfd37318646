//! Run configuration: an optional JSON file merged with command line flags.
//!
//! Flags always override file values; the fully resolved configuration is
//! echoed into design.json so every artifact records how it was produced.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// rio | tcap-sine | tcap-hg | flat-pi.
    pub protocol: Option<String>,
    /// Hyper-Gaussian order n (rio, tcap-hg).
    pub order: Option<u32>,
    /// Sine-expansion term count N (tcap-sine).
    pub terms: Option<usize>,
    /// Time contraction factor a (tcap protocols).
    pub contraction: Option<f64>,
    /// Window edge t_f in units of the base width (tcap protocols).
    pub t_f: Option<f64>,
    /// Base pulse area (tcap protocols).
    pub area: Option<f64>,
    /// Geodesic collocation nodes (rio).
    pub grid_points: Option<usize>,
    /// Rows in the emitted control table.
    pub samples: Option<usize>,
    /// Geodesic solver tolerance (rio).
    pub tolerance: Option<f64>,
    /// Output unit convention for rio: "omega0" or "fig2".
    pub units: Option<String>,
    /// Amplitude error for simulate.
    pub alpha: Option<f64>,
    /// Detuning error for simulate.
    pub delta: Option<f64>,
    /// Transverse field error for simulate.
    pub beta: Option<f64>,
    /// Scan axis: alpha | delta | beta.
    pub axis: Option<String>,
    /// Scan range lower edge.
    pub range_min: Option<f64>,
    /// Scan range upper edge.
    pub range_max: Option<f64>,
    /// Scan grid size.
    pub points: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::BadInput(format!("config {}: {e}", path.display())))
    }

    /// Merge flag values over file values; `Some` in `flags` wins.
    pub fn merged_over(self, flags: RunConfig) -> RunConfig {
        RunConfig {
            protocol: flags.protocol.or(self.protocol),
            order: flags.order.or(self.order),
            terms: flags.terms.or(self.terms),
            contraction: flags.contraction.or(self.contraction),
            t_f: flags.t_f.or(self.t_f),
            area: flags.area.or(self.area),
            grid_points: flags.grid_points.or(self.grid_points),
            samples: flags.samples.or(self.samples),
            tolerance: flags.tolerance.or(self.tolerance),
            units: flags.units.or(self.units),
            alpha: flags.alpha.or(self.alpha),
            delta: flags.delta.or(self.delta),
            beta: flags.beta.or(self.beta),
            axis: flags.axis.or(self.axis),
            range_min: flags.range_min.or(self.range_min),
            range_max: flags.range_max.or(self.range_max),
            points: flags.points.or(self.points),
        }
    }
}
