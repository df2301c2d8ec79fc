//! Self-describing run scenarios, their TOML form, and the study presets.
//!
//! A scenario stores everything needed to rebuild a [`Problem`] in the
//! caller's channel order, so a serialized preset re-runs bit-exactly.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{EscError, Result};
use crate::model::{
    ControllerMode, DelayVector, FilterDiscretization, GainConfig, QuadraticMap, SimConfig,
};
use crate::simulator::Problem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub y_star: f64,
    pub theta_star: Vec<f64>,
    /// Rows of `H`.
    pub hessian: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainSpec {
    pub k: Vec<f64>,
    pub c: Vec<f64>,
    pub omega_r: f64,
    pub a: Vec<f64>,
    pub omega: f64,
    /// Washout corner in rad/s; omit to demodulate the raw output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub washout: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub dt: f64,
    pub t_end: f64,
    pub theta_hat0: Vec<f64>,
    pub gamma0: Vec<Vec<f64>>,
    pub seed: u64,
    pub controller: ControllerMode,
    pub divergence_guard: f64,
    pub log_stride: usize,
    #[serde(default)]
    pub filter: FilterDiscretization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub map: MapSpec,
    pub delays: Vec<f64>,
    pub gains: GainSpec,
    pub sim: SimSpec,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn matrix(context: &'static str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if let Some(bad) = rows.iter().find(|r| r.len() != n) {
        return Err(EscError::Dimension {
            context,
            expected: n,
            got: bad.len(),
        });
    }
    Ok(DMatrix::from_row_iterator(n, n, rows.iter().flatten().copied()))
}

impl Scenario {
    pub fn new(
        name: impl Into<String>,
        description: impl Into<String>,
        map: &QuadraticMap,
        delays: &[f64],
        gains: &GainConfig,
        sim: &SimConfig,
    ) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            map: MapSpec {
                y_star: map.y_star(),
                theta_star: map.theta_star().iter().copied().collect(),
                hessian: rows(map.hessian()),
            },
            delays: delays.to_vec(),
            gains: GainSpec {
                k: gains.k.clone(),
                c: gains.c.clone(),
                omega_r: gains.omega_r,
                a: gains.a.clone(),
                omega: gains.omega,
                washout: gains.washout,
            },
            sim: SimSpec {
                dt: sim.dt,
                t_end: sim.t_end,
                theta_hat0: sim.theta_hat0.iter().copied().collect(),
                gamma0: rows(&sim.gamma0),
                seed: sim.seed,
                controller: sim.controller,
                divergence_guard: sim.divergence_guard,
                log_stride: sim.log_stride,
                filter: sim.filter,
            },
        }
    }

    pub fn quadratic_map(&self) -> Result<QuadraticMap> {
        QuadraticMap::new(
            self.map.y_star,
            DVector::from_vec(self.map.theta_star.clone()),
            matrix("hessian", &self.map.hessian)?,
        )
    }

    pub fn gain_config(&self) -> GainConfig {
        let g = &self.gains;
        GainConfig {
            k: g.k.clone(),
            c: g.c.clone(),
            omega_r: g.omega_r,
            a: g.a.clone(),
            omega: g.omega,
            washout: g.washout,
        }
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let s = &self.sim;
        Ok(SimConfig {
            dt: s.dt,
            t_end: s.t_end,
            theta_hat0: DVector::from_vec(s.theta_hat0.clone()),
            gamma0: matrix("gamma0", &s.gamma0)?,
            seed: s.seed,
            controller: s.controller,
            divergence_guard: s.divergence_guard,
            log_stride: s.log_stride,
            filter: s.filter,
        })
    }

    /// Validates the scenario and builds the simulation problem.
    pub fn to_problem(&self) -> Result<Problem> {
        Problem::new(
            self.quadratic_map()?,
            DelayVector::new(self.delays.clone())?,
            self.gain_config(),
            self.sim_config()?,
        )
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| EscError::Parse(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| EscError::Parse(e.to_string()))
    }

    /// Applies `key=value`, where `key` is a dotted path such as
    /// `gains.omega` or `sim.seed` and `value` is a TOML literal
    /// (`20`, `[50.0, 100.0]`, `"gradient-predictor"`). Bare words are taken
    /// as strings.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| EscError::Parse(format!("override `{assignment}` is not key=value")))?;
        let (key, raw) = (key.trim(), raw.trim());
        let value = parse_literal(raw);

        let mut doc = toml::Value::try_from(&*self).map_err(|e| EscError::Parse(e.to_string()))?;
        let mut slot = &mut doc;
        for part in key.split('.') {
            slot = slot
                .get_mut(part)
                .ok_or_else(|| EscError::Parse(format!("unknown override key `{key}`")))?;
        }
        *slot = coerce(slot, value);
        *self = doc
            .try_into()
            .map_err(|e: toml::de::Error| EscError::Parse(format!("override `{key}`: {e}")))?;
        Ok(())
    }
}

fn parse_literal(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Integers written where the current value is a float stay floats, so
/// `sim.t_end=100` works as expected.
fn coerce(current: &toml::Value, value: toml::Value) -> toml::Value {
    use toml::Value;
    match (current, value) {
        (Value::Float(_), Value::Integer(i)) => Value::Float(i as f64),
        (Value::Array(cur), Value::Array(items)) => {
            let proto = cur.first();
            Value::Array(
                items
                    .into_iter()
                    .map(|v| match proto {
                        Some(p) => coerce(p, v),
                        None => v,
                    })
                    .collect(),
            )
        }
        (_, v) => v,
    }
}

/// Gain of the gradient comparator in the comparison presets.
pub const GRADIENT_GAIN: f64 = 0.0005;
/// Horizon of the delay-unaware baseline preset.
pub const BASELINE_HORIZON: f64 = 20_000.0;
/// Horizon of the Newton/gradient comparison presets.
pub const COMPARISON_HORIZON: f64 = 4_000.0;

const PRESET_NAMES: &[&str] = &[
    "fig2",
    "fig3",
    "fig4",
    "fig5",
    "fig6",
    "fig7",
    "fig8",
    "fig9",
    "fig10",
    "fig11",
    "fig13-newton",
    "fig13-gradient",
    "fig14-newton",
    "fig14-gradient",
];

/// Names accepted by [`preset`].
pub fn preset_names() -> &'static [&'static str] {
    PRESET_NAMES
}

/// Preset pairs for the Newton/gradient comparison, `(newton, gradient)`.
pub fn comparison_pair(name: &str) -> Option<(&'static str, &'static str)> {
    match name {
        "fig13" => Some(("fig13-newton", "fig13-gradient")),
        "fig14" => Some(("fig14-newton", "fig14-gradient")),
        _ => None,
    }
}

fn study(
    name: &str,
    description: &str,
    delays: [f64; 2],
    mode: ControllerMode,
    adjust: impl FnOnce(&mut GainConfig, &mut SimConfig),
) -> Scenario {
    let mut gains = GainConfig::study(2);
    let mut sim = SimConfig::study();
    sim.controller = mode;
    adjust(&mut gains, &mut sim);
    Scenario::new(
        name,
        description,
        &QuadraticMap::source_seeking(),
        &delays,
        &gains,
        &sim,
    )
}

/// Study presets. Several figures share one run and differ only in the
/// columns plotted.
pub fn preset(name: &str) -> Option<Scenario> {
    use ControllerMode::*;
    let same = |_: &mut GainConfig, _: &mut SimConfig| {};
    let distinct = [50.0, 100.0];
    let equal = [100.0, 100.0];
    let s = match name {
        "fig2" => study(name, "no delays, Newton: parameters theta_1, theta_2", [0.0; 2], NewtonPredictor, same),
        "fig3" => study(name, "no delays, Newton: output y", [0.0; 2], NewtonPredictor, same),
        "fig4" => study(
            name,
            "distinct delays, Newton designed without delay compensation: diverges",
            distinct,
            NewtonNoPredictor,
            |_, s| s.t_end = BASELINE_HORIZON,
        ),
        "fig5" => study(name, "distinct delays, Newton predictor: parameters theta", distinct, NewtonPredictor, same),
        "fig6" => study(name, "distinct delays, Newton predictor: estimates theta_hat", distinct, NewtonPredictor, same),
        "fig7" => study(name, "distinct delays, Newton predictor: output y", distinct, NewtonPredictor, same),
        "fig8" => study(name, "distinct delays, Newton predictor: control U", distinct, NewtonPredictor, same),
        "fig9" => study(name, "distinct delays, Newton predictor: Hessian estimate Hhat", distinct, NewtonPredictor, same),
        "fig10" => study(name, "distinct delays, Newton predictor: Riccati estimate Gamma", distinct, NewtonPredictor, same),
        "fig11" => study(name, "equal delays, Newton predictor: output y", equal, NewtonPredictor, same),
        "fig13-newton" => study(name, "no delays, Newton half of the comparison", [0.0; 2], NewtonPredictor, |_, s| {
            s.t_end = COMPARISON_HORIZON
        }),
        "fig13-gradient" => study(name, "no delays, gradient half of the comparison", [0.0; 2], GradientPredictor, |g, s| {
            g.k = vec![GRADIENT_GAIN; 2];
            s.t_end = COMPARISON_HORIZON;
        }),
        "fig14-newton" => study(name, "equal delays, Newton half of the comparison", equal, NewtonPredictor, |_, s| {
            s.t_end = COMPARISON_HORIZON
        }),
        "fig14-gradient" => study(name, "equal delays, gradient half of the comparison", equal, GradientPredictor, |g, s| {
            g.k = vec![GRADIENT_GAIN; 2];
            s.t_end = COMPARISON_HORIZON;
        }),
        _ => return None,
    };
    Some(s)
}
