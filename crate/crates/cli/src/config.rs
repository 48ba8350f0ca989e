//! Run configuration file: `[plate.top]`, `[plate.back]`, `[cavity]`,
//! `[input]` and `[sweep]`. Missing keys take default values; unknown keys
//! are rejected.

use phfsi_bench::SweepConfig;
use phfsi_core::model::{CavityParams, ModelParams, PlateParams};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Plates {
    pub top: PlateParams,
    pub back: PlateParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    /// Excitation point as fractions of the plate size.
    pub excitation: [f64; 2],
    pub amplitude: f64,
    pub dt: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub plate: Plates,
    pub cavity: CavityParams,
    pub input: InputSection,
    pub sweep: SweepConfig,
}

/// Keys that live under `[input]` and must not be repeated in `[sweep]`.
const INPUT_OWNED: [&str; 3] = ["amplitude", "dt", "t_end"];

impl Default for RunConfig {
    fn default() -> Self {
        let m = ModelParams::default();
        let s = SweepConfig::default();
        Self {
            plate: Plates { top: m.top, back: m.back },
            cavity: m.cavity,
            input: InputSection {
                excitation: m.excitation,
                amplitude: s.amplitude,
                dt: s.dt,
                t_end: s.t_end,
            },
            sweep: s,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let user: Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        if let Some(Value::Table(sweep)) = user.get("sweep") {
            if let Some(k) = INPUT_OWNED.iter().find(|k| sweep.contains_key(**k)) {
                return Err(CliError::Config(format!(
                    "{}`{k}` belongs in [input], not [sweep]",
                    line_of(text, k)
                )));
            }
        }
        let mut merged = Value::try_from(Self::default()).expect("default config serializes");
        merge(&mut merged, Value::Table(user));
        let mut cfg: Self = merged
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(format!("{}{}", locate(text, e.message()), e.message().trim())))?;
        cfg.sweep.amplitude = cfg.input.amplitude;
        cfg.sweep.dt = cfg.input.dt;
        cfg.sweep.t_end = cfg.input.t_end;
        Ok(cfg)
    }

    pub fn model(&self) -> ModelParams {
        ModelParams {
            top: self.plate.top.clone(),
            back: self.plate.back.clone(),
            cavity: self.cavity.clone(),
            excitation: self.input.excitation,
        }
    }

    /// Canonical text form, used for hashing and for the workspace copy.
    pub fn render(&self) -> String {
        let mut v = Value::try_from(self).expect("config serializes");
        if let Some(Value::Table(s)) = v.get_mut("sweep") {
            for k in INPUT_OWNED {
                s.remove(k);
            }
        }
        toml::to_string(&v).expect("config renders")
    }
}

fn merge(base: &mut Value, user: Value) {
    match (base, user) {
        (Value::Table(b), Value::Table(u)) => {
            for (k, v) in u {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// `"line N: "` for the first backquoted name in `message` that starts a
/// key line of `text`.
fn locate(text: &str, message: &str) -> String {
    message
        .split('`')
        .nth(1)
        .map(|key| line_of(text, key))
        .unwrap_or_default()
}

fn line_of(text: &str, key: &str) -> String {
    text.lines()
        .position(|l| {
            let l = l.trim_start();
            l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| format!("line {}: ", i + 1))
        .unwrap_or_default()
}
