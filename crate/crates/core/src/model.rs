//! Plant, delay, gain and run configuration types.
//!
//! The plant is a static quadratic map with a maximum at `theta_star`:
//!
//! ```text
//! y = y* + ½ (θ − θ*)ᵀ H (θ − θ*)
//! ```
//!
//! where each input channel reaches the map through its own constant delay.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, EscError, Result};

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticMap {
    y_star: f64,
    theta_star: DVector<f64>,
    hessian: DMatrix<f64>,
}

impl QuadraticMap {
    /// Builds a map, checking that the Hessian is symmetric and negative definite.
    pub fn new(y_star: f64, theta_star: DVector<f64>, hessian: DMatrix<f64>) -> Result<Self> {
        let n = theta_star.len();
        if n == 0 {
            return Err(EscError::config("map needs at least one channel"));
        }
        if hessian.nrows() != n || hessian.ncols() != n {
            return Err(EscError::Dimension {
                context: "hessian",
                expected: n,
                got: hessian.nrows().max(hessian.ncols()),
            });
        }
        if !y_star.is_finite()
            || theta_star.iter().any(|v| !v.is_finite())
            || hessian.iter().any(|v| !v.is_finite())
        {
            return Err(EscError::config("map parameters must be finite"));
        }
        if !is_symmetric(&hessian, SYMMETRY_TOL) {
            return Err(EscError::config("hessian must be symmetric"));
        }
        let eig = hessian.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| l >= 0.0) {
            return Err(EscError::config(
                "hessian must be negative definite (maximum seeking)",
            ));
        }
        Ok(Self {
            y_star,
            theta_star,
            hessian,
        })
    }

    /// The two-input map used throughout the simulation study:
    /// `y* = 5`, `θ* = (0, 1)`, `H = −[[2, 2], [2, 4]]`.
    pub fn source_seeking() -> Self {
        Self::new(
            5.0,
            DVector::from_vec(vec![0.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[-2.0, -2.0, -2.0, -4.0]),
        )
        .expect("source-seeking map is valid")
    }

    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }

    pub fn y_star(&self) -> f64 {
        self.y_star
    }

    pub fn theta_star(&self) -> &DVector<f64> {
        &self.theta_star
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    /// Evaluates the map at the (already delayed) input vector.
    pub fn evaluate(&self, theta_delayed: &[f64]) -> Result<f64> {
        check_len("evaluate_map", self.dim(), theta_delayed.len())?;
        Ok(self.evaluate_unchecked(theta_delayed))
    }

    pub(crate) fn evaluate_unchecked(&self, theta: &[f64]) -> f64 {
        let n = self.dim();
        let mut quad = 0.0;
        for i in 0..n {
            let ei = theta[i] - self.theta_star[i];
            let mut row = 0.0;
            for j in 0..n {
                row += self.hessian[(i, j)] * (theta[j] - self.theta_star[j]);
            }
            quad += ei * row;
        }
        self.y_star + 0.5 * quad
    }

    pub fn hessian_inverse(&self) -> Result<DMatrix<f64>> {
        let inv = self
            .hessian
            .clone()
            .try_inverse()
            .ok_or_else(|| EscError::config("hessian is singular"))?;
        // symmetric input, symmetric output
        Ok((&inv + inv.transpose()) * 0.5)
    }

    /// Returns the same map with channels reordered: channel `i` of the
    /// result is channel `order[i]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        Ok(Self {
            y_star: self.y_star,
            theta_star: permute_vector(&self.theta_star, order)?,
            hessian: permute_matrix(&self.hessian, order)?,
        })
    }
}

pub(crate) fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = m.amax().max(1.0);
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > tol * scale {
                return false;
            }
        }
    }
    true
}

/// Per-channel input delays in seconds, stored in non-decreasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayVector {
    delays: Vec<f64>,
    order: Vec<usize>,
}

impl DelayVector {
    /// Sorts the delays ascending. `order()` records which original channel
    /// ended up in each slot so the caller can permute the rest of the problem.
    pub fn new(raw: Vec<f64>) -> Result<Self> {
        if raw.is_empty() {
            return Err(EscError::config("delay vector is empty"));
        }
        if let Some(d) = raw.iter().find(|d| !d.is_finite() || **d < 0.0) {
            return Err(EscError::config(format!(
                "delays must be finite and non-negative, got {d}"
            )));
        }
        let mut order: Vec<usize> = (0..raw.len()).collect();
        // stable: equal delays keep their relative order
        order.sort_by(|&i, &j| raw[i].total_cmp(&raw[j]));
        let delays = order.iter().map(|&i| raw[i]).collect();
        Ok(Self { delays, order })
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![0.0; n]).expect("zero delays are valid")
    }

    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.delays
    }

    pub fn get(&self, i: usize) -> f64 {
        self.delays[i]
    }

    /// Longest delay `D_n`.
    pub fn max(&self) -> f64 {
        *self.delays.last().expect("non-empty")
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn is_identity_order(&self) -> bool {
        self.order.iter().enumerate().all(|(i, &o)| i == o)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainConfig {
    /// Diagonal of the feedback gain K.
    pub k: Vec<f64>,
    /// Low-pass filter poles.
    pub c: Vec<f64>,
    /// Riccati gain of the Hessian-inverse estimator.
    pub omega_r: f64,
    /// Dither amplitudes. Zero switches a channel's dither off, which also
    /// blinds its demodulation; only useful for equilibrium checks.
    pub a: Vec<f64>,
    /// Time scale of the dither phase process.
    pub omega: f64,
    /// Corner frequency (rad/s) of the high-pass washout applied to the
    /// measured output before demodulation. `None` demodulates raw `y`.
    pub washout: Option<f64>,
}

impl GainConfig {
    /// Gains from the simulation study for `n` channels.
    pub fn study(n: usize) -> Self {
        Self {
            k: vec![0.005; n],
            c: vec![20.0; n],
            omega_r: 0.007,
            a: vec![0.22; n],
            omega: DEFAULT_OMEGA,
            washout: Some(DEFAULT_WASHOUT),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        check_len("gain k", n, self.k.len())?;
        check_len("filter pole c", n, self.c.len())?;
        check_len("dither amplitude a", n, self.a.len())?;
        if self.k.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
            return Err(EscError::config("all k must be positive"));
        }
        if self.c.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(EscError::config("all c must be positive"));
        }
        if !(self.omega_r > 0.0 && self.omega_r.is_finite()) {
            return Err(EscError::config("omega_r must be positive"));
        }
        if self.a.iter().any(|&a| !a.is_finite()) {
            return Err(EscError::config("dither amplitudes must be finite"));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(EscError::config("omega must be positive"));
        }
        if let Some(h) = self.washout {
            if !(h > 0.0 && h.is_finite()) {
                return Err(EscError::config("washout corner must be positive"));
            }
        }
        Ok(())
    }

    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        Ok(Self {
            k: permute_slice(&self.k, order)?,
            c: permute_slice(&self.c, order)?,
            a: permute_slice(&self.a, order)?,
            ..self.clone()
        })
    }
}

/// Default dither time scale. With `W` uniform on the circle the phase
/// `ωπ(1 + sin W)` gives `E[cos 2η] = cos 2πω · J₀(2πω)`; on the
/// integer-plus-seven-eighths family both this and `E[cos 4η]` stay near zero,
/// so the demodulated Hessian is nearly unbiased (under 1% at 5.875).
pub const DEFAULT_OMEGA: f64 = 5.875;
pub const DEFAULT_WASHOUT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerMode {
    /// Newton step with the filtered distributed-delay predictor.
    NewtonPredictor,
    /// Gradient step with a Hessian-estimate-weighted predictor.
    GradientPredictor,
    /// Newton step designed as if there were no delays: the output is
    /// demodulated with the current dither phases and no predictor is used.
    NewtonNoPredictor,
}

impl ControllerMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ControllerMode::NewtonPredictor => "newton-predictor",
            ControllerMode::GradientPredictor => "gradient-predictor",
            ControllerMode::NewtonNoPredictor => "newton-no-predictor",
        }
    }
}

/// How the first-order low-pass `c/(s + c)` is stepped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterDiscretization {
    #[default]
    Euler,
    /// Zero-order-hold exact update `U ← e^{−c dt} U + (1 − e^{−c dt}) v`.
    Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub theta_hat0: DVector<f64>,
    pub gamma0: DMatrix<f64>,
    pub seed: u64,
    pub controller: ControllerMode,
    /// Run halts once `|y|` exceeds this bound.
    pub divergence_guard: f64,
    /// Log every `log_stride` steps.
    pub log_stride: usize,
    pub filter: FilterDiscretization,
}

impl SimConfig {
    /// Defaults of the study presets for a two-channel problem.
    pub fn study() -> Self {
        Self {
            dt: 0.01,
            t_end: 2000.0,
            theta_hat0: DVector::from_vec(vec![0.5, -0.5]),
            gamma0: DMatrix::from_row_slice(2, 2, &[-1.0 / 100.0, 0.0, 0.0, -1.0 / 200.0]),
            seed: 1,
            controller: ControllerMode::NewtonPredictor,
            divergence_guard: 1e6,
            log_stride: 10,
            filter: FilterDiscretization::Euler,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(EscError::config("dt must be positive"));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(EscError::config("t_end must be positive"));
        }
        check_len("theta_hat0", n, self.theta_hat0.len())?;
        if self.gamma0.nrows() != n || self.gamma0.ncols() != n {
            return Err(EscError::Dimension {
                context: "gamma0",
                expected: n,
                got: self.gamma0.nrows().max(self.gamma0.ncols()),
            });
        }
        if !is_symmetric(&self.gamma0, SYMMETRY_TOL) {
            return Err(EscError::config("gamma0 must be symmetric"));
        }
        if !(self.divergence_guard > 0.0) {
            return Err(EscError::config("divergence_guard must be positive"));
        }
        if self.log_stride == 0 {
            return Err(EscError::config("log_stride must be at least 1"));
        }
        Ok(())
    }

    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        Ok(Self {
            theta_hat0: permute_vector(&self.theta_hat0, order)?,
            gamma0: permute_matrix(&self.gamma0, order)?,
            ..self.clone()
        })
    }
}

/// Number of whole `dt` steps in `delay`; rejects delays off the grid.
pub fn delay_steps(delay: f64, dt: f64) -> Result<usize> {
    let ratio = delay / dt;
    let steps = ratio.round();
    if (ratio - steps).abs() > 1e-9 * steps.max(1.0) {
        return Err(EscError::config(format!(
            "delay {delay} is not a whole multiple of dt = {dt}"
        )));
    }
    Ok(steps as usize)
}

fn check_perm(order: &[usize], n: usize) -> Result<()> {
    check_len("channel order", n, order.len())?;
    let mut seen = vec![false; n];
    for &o in order {
        if o >= n || seen[o] {
            return Err(EscError::config("channel order is not a permutation"));
        }
        seen[o] = true;
    }
    Ok(())
}

pub(crate) fn permute_slice(v: &[f64], order: &[usize]) -> Result<Vec<f64>> {
    check_perm(order, v.len())?;
    Ok(order.iter().map(|&i| v[i]).collect())
}

pub(crate) fn permute_vector(v: &DVector<f64>, order: &[usize]) -> Result<DVector<f64>> {
    Ok(DVector::from_vec(permute_slice(v.as_slice(), order)?))
}

pub(crate) fn permute_matrix(m: &DMatrix<f64>, order: &[usize]) -> Result<DMatrix<f64>> {
    check_perm(order, m.nrows())?;
    let n = order.len();
    Ok(DMatrix::from_fn(n, n, |i, j| m[(order[i], order[j])]))
}
