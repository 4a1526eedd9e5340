//! Unit prices, material properties, capacities and load intensities used by
//! the surrogate evaluator. Units: kN, m, t, kPa (kN/m2), s.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MATERIALS_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub format_version: u32,

    /// Structural steel, EUR/kg.
    pub steel_price: f64,
    /// Cable steel, EUR/kg.
    pub cable_price: f64,
    /// EUR/m3.
    pub concrete_price: f64,
    /// EUR per kN/m of tower-deck link stiffness.
    pub link_stiffness_price: f64,
    /// EUR per kN s/m of tower-deck link damping.
    pub link_damping_price: f64,

    /// kg/m3
    pub steel_density: f64,
    /// kg/m3
    pub concrete_density: f64,
    /// kPa
    pub steel_modulus: f64,
    /// kPa
    pub cable_modulus: f64,

    /// kPa
    pub steel_yield: f64,
    pub steel_safety_factor: f64,
    /// kPa
    pub cable_strength: f64,
    /// Allowed fraction of `cable_strength`.
    pub cable_utilisation: f64,
    /// Live-load deflection limit is `central_span / deflection_divisor`.
    pub deflection_divisor: f64,
    /// A cable is at its slack limit when its force drops to this fraction
    /// of its prestress.
    pub slack_fraction: f64,

    /// m/s2
    pub gravity: f64,
    /// kN/m2 over the deck width.
    pub live_load: f64,

    pub comfort_enabled: bool,
    /// Harmonic pedestrian load amplitude, kN/m2.
    pub pedestrian_load: f64,
    /// Vertical acceleration limit, m/s2.
    pub comfort_limit: f64,
    pub structural_damping: f64,
    /// Pacing frequency (Hz) at which device damping is expressed as a ratio.
    pub pacing_frequency: f64,
    /// Full resonant load up to this frequency (Hz) ...
    pub resonance_full_below: f64,
    /// ... tapering linearly to none at this frequency (Hz).
    pub resonance_none_above: f64,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        Self {
            format_version: MATERIALS_FORMAT_VERSION,
            steel_price: 3.0,
            cable_price: 6.0,
            concrete_price: 150.0,
            link_stiffness_price: 0.02,
            link_damping_price: 10.0,
            steel_density: 7850.0,
            concrete_density: 2500.0,
            steel_modulus: 210e6,
            cable_modulus: 195e6,
            steel_yield: 235e3,
            steel_safety_factor: 1.1,
            cable_strength: 1570e3,
            cable_utilisation: 0.45,
            deflection_divisor: 400.0,
            slack_fraction: 0.05,
            gravity: 9.81,
            live_load: 5.0,
            comfort_enabled: true,
            pedestrian_load: 0.4,
            comfort_limit: 0.7,
            structural_damping: 0.005,
            pacing_frequency: 2.0,
            resonance_full_below: 1.7,
            resonance_none_above: 2.5,
        }
    }
}

impl MaterialConfig {
    pub fn steel_allowable(&self) -> f64 {
        self.steel_yield / self.steel_safety_factor
    }

    pub fn cable_allowable(&self) -> f64 {
        self.cable_strength * self.cable_utilisation
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != MATERIALS_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "materials format_version {} unsupported (expected {MATERIALS_FORMAT_VERSION})",
                self.format_version
            )));
        }
        let positive = [
            ("steel_price", self.steel_price),
            ("cable_price", self.cable_price),
            ("concrete_price", self.concrete_price),
            ("steel_density", self.steel_density),
            ("concrete_density", self.concrete_density),
            ("steel_modulus", self.steel_modulus),
            ("cable_modulus", self.cable_modulus),
            ("steel_yield", self.steel_yield),
            ("steel_safety_factor", self.steel_safety_factor),
            ("cable_strength", self.cable_strength),
            ("cable_utilisation", self.cable_utilisation),
            ("deflection_divisor", self.deflection_divisor),
            ("slack_fraction", self.slack_fraction),
            ("gravity", self.gravity),
            ("comfort_limit", self.comfort_limit),
            ("structural_damping", self.structural_damping),
            ("pacing_frequency", self.pacing_frequency),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        let non_negative = [
            ("link_stiffness_price", self.link_stiffness_price),
            ("link_damping_price", self.link_damping_price),
            ("live_load", self.live_load),
            ("pedestrian_load", self.pedestrian_load),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.resonance_full_below > 0.0 && self.resonance_none_above > self.resonance_full_below) {
            return Err(Error::Config(
                "need 0 < resonance_full_below < resonance_none_above".into(),
            ));
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> std::result::Result<Self, String> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text).map_err(|reason| Error::parse(path, reason))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("materials serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_validate() {
        let m = MaterialConfig::default();
        m.validate().unwrap();
        assert_eq!(MaterialConfig::from_json_str(&m.to_json()).unwrap(), m);
        assert!((m.steel_allowable() - 235e3 / 1.1).abs() < 1e-9);
        assert!((m.cable_allowable() - 706_500.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_values() {
        let mut m = MaterialConfig::default();
        m.steel_price = -1.0;
        assert!(m.validate().is_err());
        let mut m = MaterialConfig::default();
        m.resonance_none_above = 1.0;
        assert!(m.validate().is_err());
        assert!(MaterialConfig::from_json_str("{\"format_version\": 1}").is_err());
    }
}
