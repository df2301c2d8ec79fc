//! Gradient/Hessian demodulation, the Riccati Hessian-inverse filter and the
//! Newton signal `z = Γ G`.

use nalgebra::{DMatrix, DVector};

use crate::error::{EscError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    /// Riccati estimate of `H⁻¹`.
    pub gamma: DMatrix<f64>,
    /// Latest instantaneous Hessian estimate.
    pub hhat: DMatrix<f64>,
    /// Latest demodulated gradient signal.
    pub g: DVector<f64>,
    /// Latest Newton signal.
    pub z: DVector<f64>,
}

impl EstimatorState {
    pub fn new(gamma0: DMatrix<f64>) -> Self {
        let n = gamma0.nrows();
        Self {
            gamma: gamma0,
            hhat: DMatrix::zeros(n, n),
            g: DVector::zeros(n),
            z: DVector::zeros(n),
        }
    }

    /// `Γ − H⁻¹`.
    pub fn gamma_error(&self, hessian_inverse: &DMatrix<f64>) -> DMatrix<f64> {
        &self.gamma - hessian_inverse
    }
}

/// `θ = θ̂ + S`.
pub fn perturbed_input(theta_hat: &DVector<f64>, s: &DVector<f64>) -> DVector<f64> {
    theta_hat + s
}

/// `G = M·y` and `Ĥ = N·y`.
pub fn demodulate(
    y: f64,
    m_delayed: &DVector<f64>,
    n_delayed: &DMatrix<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    (m_delayed * y, n_delayed * y)
}

/// One explicit Euler step of `Γ̇ = ω_r Γ − ω_r Γ Ĥ Γ`, re-symmetrized.
pub fn riccati_step(
    gamma: &DMatrix<f64>,
    hhat: &DMatrix<f64>,
    omega_r: f64,
    dt: f64,
) -> Result<DMatrix<f64>> {
    let rate = gamma - gamma * hhat * gamma;
    let next = gamma + rate * (dt * omega_r);
    let sym = (&next + next.transpose()) * 0.5;
    if sym.iter().all(|v| v.is_finite()) {
        Ok(sym)
    } else {
        Err(EscError::NonFinite("riccati state"))
    }
}

/// `z = Γ·G`.
pub fn newton_signal(gamma: &DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    gamma * g
}

/// First-order high-pass `s/(s + h)` on the measured output, removing the
/// unknown extremum level before demodulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Washout {
    corner: f64,
    /// Low-pass tracker of `y`; seeded by the first sample.
    level: Option<f64>,
}

impl Washout {
    pub fn new(corner: f64) -> Self {
        Self {
            corner,
            level: None,
        }
    }

    pub fn level(&self) -> Option<f64> {
        self.level
    }

    /// Returns the high-passed sample and advances the tracker by `dt`.
    pub fn filter(&mut self, y: f64, dt: f64) -> f64 {
        let level = *self.level.get_or_insert(y);
        let out = y - level;
        self.level = Some(level + dt * self.corner * out);
        out
    }
}
