//! Model constants and network state for the coupled Morris-Lecar pair.
//!
//! Defaults are the standard Type II parameter set. Parameter files are JSON
//! objects keyed by the conventional symbol names (`"g_Ca"`, `"v_syn"`, ...);
//! missing keys keep their default and unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constants of the two-neuron Morris-Lecar network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MLParams {
    /// Membrane capacitance (µF/cm²).
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "g_Ca")]
    pub g_ca: f64,
    #[serde(rename = "g_K")]
    pub g_k: f64,
    #[serde(rename = "g_L")]
    pub g_l: f64,
    #[serde(rename = "v_Ca")]
    pub v_ca: f64,
    #[serde(rename = "v_K")]
    pub v_k: f64,
    #[serde(rename = "v_L")]
    pub v_l: f64,
    #[serde(rename = "v_syn")]
    pub v_syn: f64,
    /// Half-activation potential of m∞ (mV).
    pub v11: f64,
    /// Slope of m∞ (mV).
    pub v22: f64,
    /// Half-activation potential of w∞ and λ (mV).
    pub v3: f64,
    /// Slope of w∞ and λ (mV).
    pub v4: f64,
    /// Midpoint of the synaptic logistic s∞ (mV).
    #[serde(rename = "v_t")]
    pub vt: f64,
    /// Slope of the synaptic logistic s∞ (mV).
    #[serde(rename = "v_s")]
    pub vs: f64,
    /// Gating rate (1/ms).
    pub phi: f64,
    /// Synaptic time constant (ms).
    pub tau: f64,
    /// Applied current (µA/cm²).
    #[serde(rename = "I_app")]
    pub iapp: f64,
    /// Synaptic coupling strength (mS/cm²).
    #[serde(rename = "g_syn")]
    pub gsyn: f64,
    /// Additive voltage noise intensity; zero for the deterministic system.
    pub delta: f64,
    /// Use the leak term exactly as commonly printed, `g_L·w1·(v_k − v_L)`
    /// in both voltage equations, instead of the ungated `g_L·(v_k − v_L)`.
    pub paper_literal_leak: bool,
}

impl Default for MLParams {
    fn default() -> Self {
        Self {
            c: 20.0,
            g_ca: 4.0,
            g_k: 8.0,
            g_l: 2.0,
            v_ca: 120.0,
            v_k: -84.0,
            v_l: -60.0,
            v_syn: 70.0,
            v11: -1.2,
            v22: 18.0,
            v3: 2.0,
            v4: 30.0,
            vt: 15.0,
            vs: 5.0,
            phi: 0.04,
            tau: 8.0,
            iapp: 120.0,
            gsyn: 7.5,
            delta: 0.0,
            paper_literal_leak: false,
        }
    }
}

impl MLParams {
    /// Default constants with the two estimated parameters replaced.
    pub fn with_drive(iapp: f64, gsyn: f64) -> Self {
        Self {
            iapp,
            gsyn,
            ..Self::default()
        }
    }

    /// Type I variant: identical except `v3 = v4 = 15`.
    pub fn type_one() -> Self {
        Self {
            v3: 15.0,
            v4: 15.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.c, self.g_ca, self.g_k, self.g_l, self.v_ca, self.v_k, self.v_l, self.v_syn,
            self.v11, self.v22, self.v3, self.v4, self.vt, self.vs, self.phi, self.tau, self.iapp,
            self.gsyn, self.delta,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("all constants must be finite".into()));
        }
        if self.c <= 0.0 || self.tau <= 0.0 {
            return Err(Error::InvalidParams("C and tau must be positive".into()));
        }
        if self.v22 == 0.0 || self.v4 == 0.0 || self.vs == 0.0 {
            return Err(Error::InvalidParams("v22, v4 and v_s must be non-zero".into()));
        }
        let nonneg = [
            ("g_Ca", self.g_ca),
            ("g_K", self.g_k),
            ("g_L", self.g_l),
            ("g_syn", self.gsyn),
            ("I_app", self.iapp),
            ("delta", self.delta),
        ];
        if let Some((name, v)) = nonneg.iter().find(|(_, v)| *v < 0.0) {
            return Err(Error::InvalidParams(format!("{name} = {v} must be >= 0")));
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }
}

/// The six state variables `(v1, v2, w1, w2, s1, s2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    pub v1: f64,
    pub v2: f64,
    pub w1: f64,
    pub w2: f64,
    pub s1: f64,
    pub s2: f64,
}

impl Default for NetworkState {
    /// Standard initial conditions.
    fn default() -> Self {
        Self::from_array([-20.0, 20.0, 0.3, 0.5, 0.2, 0.1])
    }
}

impl NetworkState {
    pub const fn from_array(a: [f64; 6]) -> Self {
        Self {
            v1: a[0],
            v2: a[1],
            w1: a[2],
            w2: a[3],
            s1: a[4],
            s2: a[5],
        }
    }

    pub const fn to_array(self) -> [f64; 6] {
        [self.v1, self.v2, self.w1, self.w2, self.s1, self.s2]
    }

    /// Swap the roles of the two neurons.
    pub fn swapped(self) -> Self {
        Self {
            v1: self.v2,
            v2: self.v1,
            w1: self.w2,
            w2: self.w1,
            s1: self.s2,
            s2: self.s1,
        }
    }

    /// Parse `"v1,v2,w1,w2,s1,s2"`.
    pub fn parse_csv(s: &str) -> Result<Self> {
        let vals: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidParams(format!("initial conditions {s:?}: {e}")))?;
        let arr: [f64; 6] = vals.try_into().map_err(|v: Vec<f64>| {
            Error::InvalidParams(format!("expected 6 initial conditions, got {}", v.len()))
        })?;
        Ok(Self::from_array(arr))
    }
}
