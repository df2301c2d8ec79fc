//! Per-channel control laws. Each one forms a target `v` and passes it
//! through the unity-gain low-pass `c_i/(s + c_i)`, whose output `U` drives
//! the parameter integrator `θ̂̇ = U`.

use nalgebra::{DMatrix, DVector};

use crate::error::{EscError, Result};
use crate::model::{ControllerMode, FilterDiscretization};

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub u: DVector<f64>,
    pub mode: ControllerMode,
}

impl ControllerState {
    pub fn new(n: usize, mode: ControllerMode) -> Self {
        Self {
            u: DVector::zeros(n),
            mode,
        }
    }
}

/// One step of `U̇ = −c U + c v`.
#[inline]
pub fn low_pass(u: f64, v: f64, c: f64, dt: f64, disc: FilterDiscretization) -> f64 {
    match disc {
        FilterDiscretization::Euler => u + dt * c * (v - u),
        FilterDiscretization::Exact => {
            // written so that u = v is an exact fixed point
            v + (-c * dt).exp() * (u - v)
        }
    }
}

fn filter_all(
    u: &DVector<f64>,
    v: impl Iterator<Item = f64>,
    c: &[f64],
    dt: f64,
    disc: FilterDiscretization,
) -> Result<DVector<f64>> {
    let next = DVector::from_iterator(
        u.len(),
        u.iter()
            .zip(v)
            .zip(c)
            .map(|((&u, v), &c)| low_pass(u, v, c, dt, disc)),
    );
    if next.iter().all(|x| x.is_finite()) {
        Ok(next)
    } else {
        Err(EscError::NonFinite("control signal"))
    }
}

/// Newton predictor feedback: `v_i = −k_i (z_i + ∫_{t−D_i}^t U_i)`.
pub fn newton_predictor_step(
    u: &DVector<f64>,
    z: &DVector<f64>,
    window: &[f64],
    k: &[f64],
    c: &[f64],
    dt: f64,
    disc: FilterDiscretization,
) -> Result<DVector<f64>> {
    let v = (0..u.len()).map(|i| -k[i] * (z[i] + window[i]));
    filter_all(u, v, c, dt, disc)
}

/// Gradient predictor feedback: `v_i = K_i (G_i + Σ_j Ĥ_ij ∫_{t−D_j}^t U_j)`.
pub fn gradient_predictor_step(
    u: &DVector<f64>,
    g: &DVector<f64>,
    hhat: &DMatrix<f64>,
    window: &[f64],
    k: &[f64],
    c: &[f64],
    dt: f64,
    disc: FilterDiscretization,
) -> Result<DVector<f64>> {
    let n = u.len();
    let v = (0..n).map(|i| {
        let pred: f64 = (0..n).map(|j| hhat[(i, j)] * window[j]).sum();
        k[i] * (g[i] + pred)
    });
    filter_all(u, v, c, dt, disc)
}

/// Newton feedback without delay compensation: `v_i = −k_i z_i`.
pub fn unpredicted_step(
    u: &DVector<f64>,
    z: &DVector<f64>,
    k: &[f64],
    c: &[f64],
    dt: f64,
    disc: FilterDiscretization,
) -> Result<DVector<f64>> {
    let v = (0..u.len()).map(|i| -k[i] * z[i]);
    filter_all(u, v, c, dt, disc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const E: FilterDiscretization = FilterDiscretization::Euler;

    #[test]
    fn newton_equilibrium() {
        let u = DVector::zeros(2);
        let next =
            newton_predictor_step(&u, &DVector::zeros(2), &[0.0, 0.0], &[0.005; 2], &[20.0; 2], 0.01, E)
                .unwrap();
        assert_eq!(next, DVector::zeros(2));
    }

    #[test]
    fn newton_single_step() {
        let u = DVector::zeros(1);
        let z = DVector::from_vec(vec![1.0]);
        let next = newton_predictor_step(&u, &z, &[0.0], &[0.005], &[20.0], 0.01, E).unwrap();
        assert_abs_diff_eq!(next[0], -0.001, epsilon = 1e-18);
    }

    #[test]
    fn filter_dc_gain_is_one() {
        for disc in [FilterDiscretization::Euler, FilterDiscretization::Exact] {
            let mut u = 0.3;
            for _ in 0..2000 {
                u = low_pass(u, -1.7, 20.0, 0.01, disc);
            }
            assert_abs_diff_eq!(u, -1.7, epsilon = 1e-12);
        }
    }

    #[test]
    fn filter_decay_bound() {
        // |U − v| ≤ e^{−c t}|U(0) − v| + O(dt)
        let (c, dt, v, u0) = (20.0, 0.01, 0.4, -0.6);
        let mut u = u0;
        for step in 1..=50 {
            u = low_pass(u, v, c, dt, E);
            let t = step as f64 * dt;
            assert!((u - v).abs() <= (-c * t).exp() * (u0 - v).abs() + 10.0 * dt);
        }
        let exact = low_pass(u0, v, c, dt, FilterDiscretization::Exact);
        assert_abs_diff_eq!(exact - v, (-c * dt).exp() * (u0 - v), epsilon = 1e-15);
    }

    #[test]
    fn gradient_zero_inputs() {
        let u = DVector::zeros(2);
        let next = gradient_predictor_step(
            &u,
            &DVector::zeros(2),
            &DMatrix::from_row_slice(2, 2, &[-2.0, -2.0, -2.0, -4.0]),
            &[0.0, 0.0],
            &[0.005; 2],
            &[20.0; 2],
            0.01,
            E,
        )
        .unwrap();
        assert_eq!(next, DVector::zeros(2));
    }

    #[test]
    fn gradient_uses_hessian_weighted_window() {
        let u = DVector::zeros(2);
        let g = DVector::from_vec(vec![1.0, 0.0]);
        let hh = DMatrix::from_row_slice(2, 2, &[-2.0, -2.0, -2.0, -4.0]);
        let next =
            gradient_predictor_step(&u, &g, &hh, &[0.5, 0.25], &[1.0; 2], &[1.0; 2], 0.1, E).unwrap();
        // v = (1 − 1 − 0.5, −1 − 1) = (−0.5, −2)
        assert_abs_diff_eq!(next[0], 0.1 * -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(next[1], 0.1 * -2.0, epsilon = 1e-15);
    }

    #[test]
    fn unpredicted_matches_predictor_with_empty_window() {
        let u = DVector::from_vec(vec![0.2, -0.1]);
        let z = DVector::from_vec(vec![0.4, 1.5]);
        let a = unpredicted_step(&u, &z, &[0.005; 2], &[20.0; 2], 0.01, E).unwrap();
        let b = newton_predictor_step(&u, &z, &[0.0, 0.0], &[0.005; 2], &[20.0; 2], 0.01, E).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unpredicted_decays_without_input() {
        let mut u = DVector::from_vec(vec![1.0]);
        for _ in 0..100 {
            u = unpredicted_step(&u, &DVector::zeros(1), &[0.005], &[20.0], 0.01, E).unwrap();
        }
        assert_abs_diff_eq!(u[0], 0.8f64.powi(100), epsilon = 1e-15);
    }

    #[test]
    fn non_finite_is_reported() {
        let u = DVector::zeros(1);
        let z = DVector::from_vec(vec![f64::INFINITY]);
        assert!(unpredicted_step(&u, &z, &[1.0], &[1.0], 0.1, E).is_err());
    }
}
