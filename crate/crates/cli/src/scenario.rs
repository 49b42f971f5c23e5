//! Scenario files: everything a run needs, in one JSON document.

use std::f64::consts::PI;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use ccphase_core::{
    DeviceSpec, DragCalibration, GateKind, NoiseModel, PhaseCalibration, PhaseVector, SimConfig,
};
use ccphase_core::CalibrationRoute;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub device: DeviceSpec,
    pub sim: SimConfig,
    pub gate: GateSpec,
    pub noise: Option<NoiseModel>,
    pub spectrum: SpectrumGrid,
    pub calibration: CalibrationSettings,
    pub sweep: Option<SweepSpec>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            device: DeviceSpec::default(),
            sim: SimConfig::default(),
            gate: GateSpec::default(),
            noise: None,
            spectrum: SpectrumGrid::default(),
            calibration: CalibrationSettings::default(),
            sweep: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateSpec {
    pub kind: GateKind,
    /// Target phases (φ_011, φ_101, φ_110, φ_CCP), rad.
    pub target: PhaseVector,
}

impl Default for GateSpec {
    fn default() -> Self {
        GateSpec { kind: GateKind::Ccphase, target: PhaseVector::new(0.0, 0.0, 0.0, PI) }
    }
}

/// Coupler-frequency grid of the spectrum command, GHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Default for SpectrumGrid {
    fn default() -> Self {
        SpectrumGrid { start: 4.2, stop: 6.2, points: 601 }
    }
}

impl SpectrumGrid {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        (0..self.points)
            .map(|i| self.start + (self.stop - self.start) * i as f64 / (self.points - 1) as f64)
            .collect()
    }
}

/// Calibration source: computed with `route`, or supplied inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSettings {
    pub route: CalibrationRoute,
    pub phase: Option<PhaseCalibration>,
    pub drag: Option<[DragCalibration; 3]>,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        CalibrationSettings { route: CalibrationRoute::Simulate, phase: None, drag: None }
    }
}

/// What each sweep point evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    /// Plan and simulate the scenario gate.
    Gate,
    /// A single flux pulse of `probe_width`.
    Probe,
    /// Conditional shifts at the operation point.
    Shifts,
}

/// One path or several paths set to the same value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParameterPaths {
    One(String),
    Many(Vec<String>),
}

impl ParameterPaths {
    pub fn paths(&self) -> Vec<&str> {
        match self {
            ParameterPaths::One(p) => vec![p.as_str()],
            ParameterPaths::Many(v) => v.iter().map(String::as_str).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Dotted path(s) into the scenario, e.g. `gate.target.phi_ccp` or
    /// `device.couplings.0.g`; numeric segments index arrays.
    pub parameter: ParameterPaths,
    pub values: Vec<f64>,
    #[serde(default = "default_measure")]
    pub measure: Measure,
    /// Flux-pulse width for `probe` sweeps, ns.
    #[serde(default = "default_probe_width")]
    pub probe_width: f64,
}

fn default_measure() -> Measure {
    Measure::Gate
}

fn default_probe_width() -> f64 {
    60.0
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let sc: Scenario =
            serde_json::from_str(&text).with_context(|| format!("parsing scenario {}", path.display()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        let g = &self.spectrum;
        if g.points == 0 || !g.start.is_finite() || !g.stop.is_finite() || (g.points > 1 && g.stop <= g.start) {
            bail!("spectrum grid must be non-empty, finite and ascending");
        }
        if !(self.sim.sim_rate > 0.0 && self.sim.awg_rate > 0.0) {
            bail!("sample rates must be positive");
        }
        if let Some(n) = &self.noise {
            n.validate()?;
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                bail!("sweep grid is empty");
            }
            if s.values.iter().any(|v| !v.is_finite()) {
                bail!("sweep grid has non-finite values");
            }
            let paths = s.parameter.paths();
            if paths.is_empty() {
                bail!("sweep names no parameter");
            }
            // Resolving once against the first value checks every path.
            self.with_parameter(&paths, s.values[0])?;
        }
        Ok(())
    }

    /// Copy of the scenario with each path set to `value`.
    pub fn with_parameter(&self, paths: &[&str], value: f64) -> Result<Scenario> {
        let mut doc = serde_json::to_value(self)?;
        for p in paths {
            set_path(&mut doc, p, value)?;
        }
        let mut sc: Scenario = serde_json::from_value(doc)?;
        sc.sweep = None;
        sc.device.validate().with_context(|| format!("device invalid at value {value}"))?;
        Ok(sc)
    }
}

fn set_path(doc: &mut Value, path: &str, value: f64) -> Result<()> {
    let mut cur = doc;
    for seg in path.split('.') {
        cur = match cur {
            Value::Object(m) => m.get_mut(seg).ok_or_else(|| anyhow!("unknown parameter path `{path}` at `{seg}`"))?,
            Value::Array(a) => {
                let i: usize = seg.parse().map_err(|_| anyhow!("`{seg}` in `{path}` must index an array"))?;
                a.get_mut(i).ok_or_else(|| anyhow!("index {i} out of range in `{path}`"))?
            }
            _ => bail!("`{path}` descends into a scalar at `{seg}`"),
        };
    }
    match cur {
        Value::Number(n) if n.is_u64() || n.is_i64() => {
            // Integer fields (level counts, cutoffs) only take integral values.
            if value.fract() != 0.0 || value.abs() > 9.0e15 {
                bail!("parameter `{path}` is an integer; got {value}");
            }
            *cur = Value::from(value as i64);
            Ok(())
        }
        Value::Number(_) | Value::Null => {
            *cur = serde_json::Number::from_f64(value)
                .map(Value::Number)
                .ok_or_else(|| anyhow!("non-finite sweep value"))?;
            Ok(())
        }
        _ => bail!("parameter `{path}` is not numeric"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let sc = Scenario::default();
        let text = serde_json::to_string(&sc).unwrap();
        let back: Scenario = serde_json::from_str(&text).unwrap();
        assert_eq!(sc, back);
    }

    #[test]
    fn partial_documents_fill_defaults() {
        let sc: Scenario = serde_json::from_str(r#"{"sim": {"sim_rate": 60}, "gate": {"kind": {"type": "generalized"}}}"#).unwrap();
        assert_eq!(sc.sim.sim_rate, 60.0);
        assert_eq!(sc.sim.awg_rate, 2.4);
        assert_eq!(sc.gate.kind, GateKind::Ccphase);
    }

    #[test]
    fn documented_scenario_parses() {
        let sc: Scenario = serde_json::from_str(
            r#"{
              "gate": {
                "kind": {"type": "cphase", "pair": "13"},
                "target": {"phi_011": 0.0, "phi_101": 3.14159, "phi_110": 0.0, "phi_ccp": 0.0}
              },
              "noise": {
                "modes": [
                  {"t1": 84, "t_phi": 124, "charge_noise": true, "dispersion_freq": 4.5},
                  {"t1": 84, "t_phi": 124},
                  {"t1": 84, "t_phi": 124},
                  {"t1": 84, "t_phi": 124}
                ],
                "charge_noise_amplitude": 6e-5
              },
              "calibration": {"route": "simulate"},
              "sweep": {
                "parameter": ["device.couplings.0.g", "device.couplings.1.g", "device.couplings.2.g"],
                "values": [0.10, 0.12, 0.14],
                "measure": "probe",
                "probe_width": 60
              }
            }"#,
        )
        .unwrap();
        sc.validate().unwrap();
        assert_eq!(sc.gate.kind, GateKind::Cphase { pair: ccphase_core::Pair::P13 });
        let noise = sc.noise.unwrap();
        assert!(noise.modes[0].charge_noise);
        let p = sc.with_parameter(&sc.sweep.as_ref().unwrap().parameter.paths(), 0.12).unwrap();
        assert!(p.device.couplings[..3].iter().all(|c| c.g == 0.12));
    }

    #[test]
    fn parameter_paths() {
        let sc = Scenario::default();
        let s = sc.with_parameter(&["gate.target.phi_ccp", "device.modes.0.anharmonicity"], -0.25).unwrap();
        assert_eq!(s.gate.target.phi_ccp, -0.25);
        assert_eq!(s.device.modes[0].anharmonicity, -0.25);
        assert!(sc.with_parameter(&["device.nothing"], 1.0).is_err());
        assert!(sc.with_parameter(&["device.couplings.9.g"], 1.0).is_err());
        assert!(sc.with_parameter(&["device.coupling_sign"], 1.0).is_err());
    }
}
