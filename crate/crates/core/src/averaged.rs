//! Deterministic averaged closed loop, used as an oracle for the stochastic
//! simulator.
//!
//! Averaging over the dither's invariant distribution replaces `G` by
//! `H ϑ̃` and `Ĥ` by `H`, where `ϑ̃_i(t) = θ̃_i(t − D_i)`. The filtered
//! predictor then reads
//!
//! ```text
//! U̇_i = −c_i U_i − c_i k_i [ z_i + ∫_{t−D_i}^t U_i ]
//! ```
//!
//! with `z = ϑ̃` in the linearized model, or `z = Γ H ϑ̃` when the averaged
//! Riccati flow `Γ̇ = ω_r Γ (I − H Γ)` is carried along.

use nalgebra::{DMatrix, DVector};

use crate::controller::{gradient_predictor_step, newton_predictor_step};
use crate::error::{EscError, Result};
use crate::history::HistoryBuffer;
use crate::metrics::{euclidean, fitted_decay_rate, rms};
use crate::model::{ControllerMode, DelayVector, GainConfig, QuadraticMap, SimConfig};
use crate::simulator::Problem;
use crate::trajectory::{DivergenceEvent, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AveragedModel {
    /// `z_av = ϑ̃_av`; the Hessian-inverse error decays on its own as
    /// `Γ̃̇ = −ω_r Γ̃`.
    #[default]
    Linearized,
    /// `z_av = Γ_av H ϑ̃_av` with the full averaged Riccati flow, for
    /// comparison with runs whose `Γ(0)` is far from `H⁻¹`.
    WithRiccati,
}

#[derive(Debug, Clone)]
pub struct AveragedState {
    pub t: f64,
    pub theta_tilde: DVector<f64>,
    pub u: DVector<f64>,
    /// `Γ_av − H⁻¹`.
    pub gamma_tilde: DMatrix<f64>,
    theta_history: HistoryBuffer,
    u_history: HistoryBuffer,
}

/// Averaged run of the linearized model.
pub fn run_averaged(
    map: QuadraticMap,
    delays: DelayVector,
    gains: GainConfig,
    sim: SimConfig,
) -> Result<Trajectory> {
    let problem = Problem::new(map, delays, gains, sim)?;
    run_averaged_problem(&problem, AveragedModel::Linearized)
}

/// Averaged counterpart of `problem`. Logged columns: `θ` and `θ̂` both hold
/// `θ* + θ̃_av`, `y` is the map at the delayed average input, `Ĥ` is the
/// true Hessian and `Γ` is `H⁻¹ + Γ̃_av`.
pub fn run_averaged_problem(problem: &Problem, model: AveragedModel) -> Result<Trajectory> {
    let map = problem.map();
    let sim = problem.sim();
    let gains = problem.gains();
    let (n, dt) = (problem.dim(), sim.dt);
    let mode = sim.controller;
    if mode == ControllerMode::NewtonNoPredictor {
        return Err(EscError::config(
            "the delay-unaware baseline has no averaged counterpart",
        ));
    }
    let h = map.hessian().clone();
    let h_inv = map.hessian_inverse()?;
    let delays = problem.delays();
    let lags = problem.lags();

    let theta_tilde0 = &sim.theta_hat0 - map.theta_star();
    let mut u_history = HistoryBuffer::new(n, dt, delays.max(), 0.0)?;
    for ch in 0..n {
        u_history.track_window(ch, delays.get(ch))?;
    }
    let mut st = AveragedState {
        t: 0.0,
        theta_history: HistoryBuffer::with_prefill(dt, delays.max(), theta_tilde0.as_slice())?,
        theta_tilde: theta_tilde0,
        u: DVector::zeros(n),
        gamma_tilde: &sim.gamma0 - &h_inv,
        u_history,
    };

    let mut traj = Trajectory::new(n, dt, sim.log_stride, delays.order().to_vec());
    let h_row = h.transpose();
    let mut lagged = DVector::zeros(n);
    for m in 0..=problem.steps() {
        let t = m as f64 * dt;
        st.t = t;
        st.theta_history.push_all(st.theta_tilde.as_slice())?;
        for i in 0..n {
            lagged[i] = st.theta_history.sample_lag(i, lags[i]);
        }
        let theta_delayed = &lagged + map.theta_star();
        let y = map.evaluate_unchecked(theta_delayed.as_slice());
        if !y.is_finite() || y.abs() > sim.divergence_guard {
            traj.divergence = Some(DivergenceEvent {
                t,
                reason: format!("averaged output |y| = {:.3e} out of bounds", y.abs()),
            });
            break;
        }

        let gamma = &h_inv + &st.gamma_tilde;
        let window: Vec<f64> = (0..n)
            .map(|i| st.u_history.integral_window(i, delays.get(i)))
            .collect::<Result<_>>()?;
        st.u = match mode {
            ControllerMode::GradientPredictor => {
                let g = &h * &lagged;
                gradient_predictor_step(&st.u, &g, &h, &window, &gains.k, &gains.c, dt, sim.filter)?
            }
            _ => {
                let z = match model {
                    AveragedModel::Linearized => lagged.clone(),
                    AveragedModel::WithRiccati => &gamma * (&h * &lagged),
                };
                newton_predictor_step(&st.u, &z, &window, &gains.k, &gains.c, dt, sim.filter)?
            }
        };
        st.u_history.push_all(st.u.as_slice())?;

        if m % sim.log_stride == 0 {
            let gamma_row = gamma.transpose();
            let theta = &st.theta_tilde + map.theta_star();
            traj.push_canonical(
                t,
                theta.as_slice(),
                theta.as_slice(),
                y,
                st.u.as_slice(),
                h_row.as_slice(),
                gamma_row.as_slice(),
            );
        }

        st.theta_tilde.axpy(dt, &st.u, 1.0);
        st.gamma_tilde = match model {
            AveragedModel::Linearized => &st.gamma_tilde * (1.0 - dt * gains.omega_r),
            AveragedModel::WithRiccati => {
                let next = &gamma + (&gamma - &gamma * &h * &gamma) * (dt * gains.omega_r);
                (&next + next.transpose()) * 0.5 - &h_inv
            }
        };
    }
    Ok(traj)
}

/// Closed form of the linearized Hessian-inverse error, `e^{−ω_r t} Γ̃(0)`.
pub fn linearized_gamma_error(gamma_tilde0: &DMatrix<f64>, omega_r: f64, t: f64) -> DMatrix<f64> {
    gamma_tilde0 * (-omega_r * t).exp()
}

/// Distance between an averaged and a stochastic run of the same problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    /// RMS of `‖θ̂_stoch − θ̂_av‖` over each consecutive window, keyed by the
    /// window start.
    pub windows: Vec<(f64, f64)>,
    /// RMS of `‖θ̂_stoch − θ̂_av‖` over every common row.
    pub rms_distance: f64,
    /// Fitted decay rates of `‖θ̃‖`; `None` when no transient could be fitted.
    pub averaged_rate: Option<f64>,
    pub stochastic_rate: Option<f64>,
}

impl ComparisonReport {
    /// Relative gap between the fitted rates.
    pub fn rate_mismatch(&self) -> Option<f64> {
        let (a, s) = (self.averaged_rate?, self.stochastic_rate?);
        Some((s - a).abs() / a.abs())
    }
}

/// Compares the `θ̂` columns row by row. Both trajectories must share the
/// sampling grid; the stochastic one may be shorter if it diverged.
///
/// Rates are fitted on `‖θ̂ − θ*‖` from `fit_start` until it first drops to
/// `fit_floor` times its value at `fit_start`.
pub fn compare_to_stochastic(
    avg: &Trajectory,
    stoch: &Trajectory,
    theta_star: &[f64],
    window: f64,
    fit_start: f64,
    fit_floor: f64,
) -> Result<ComparisonReport> {
    if avg.dim() != stoch.dim() || theta_star.len() != avg.dim() {
        return Err(EscError::Comparison("channel counts differ".into()));
    }
    if avg.sample_period() != stoch.sample_period() {
        return Err(EscError::Comparison(format!(
            "sampling periods differ: {} vs {}",
            avg.sample_period(),
            stoch.sample_period()
        )));
    }
    if !(window > 0.0) {
        return Err(EscError::Comparison("window must be positive".into()));
    }
    let rows = avg.len().min(stoch.len());
    let mut dist = Vec::with_capacity(rows);
    for k in 0..rows {
        let (ra, rs) = (avg.row(k), stoch.row(k));
        if ra.t() != rs.t() {
            return Err(EscError::Comparison(format!(
                "row {k}: times {} and {} differ",
                ra.t(),
                rs.t()
            )));
        }
        let d: Vec<f64> = ra.theta_hat().iter().zip(rs.theta_hat()).map(|(a, s)| s - a).collect();
        dist.push((ra.t(), euclidean(&d)));
    }

    let mut windows = Vec::new();
    let mut start = 0;
    while start < dist.len() {
        let from = dist[start].0;
        let end = dist[start..]
            .iter()
            .position(|&(t, _)| t >= from + window)
            .map_or(dist.len(), |p| start + p);
        windows.push((from, rms(dist[start..end].iter().map(|p| p.1))));
        start = end;
    }

    let error_norm = |traj: &Trajectory| -> Vec<(f64, f64)> {
        traj.rows()
            .map(|r| {
                let e: Vec<f64> = r.theta_hat().iter().zip(theta_star).map(|(a, b)| a - b).collect();
                (r.t(), euclidean(&e))
            })
            .collect()
    };
    let rate = |traj: &Trajectory| {
        let samples = error_norm(traj);
        let v0 = samples.iter().find(|&&(t, _)| t >= fit_start)?.1;
        fitted_decay_rate(&samples, fit_start, fit_floor * v0)
    };

    Ok(ComparisonReport {
        windows,
        rms_distance: rms(dist.iter().map(|p| p.1)),
        averaged_rate: rate(avg),
        stochastic_rate: rate(stoch),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn problem(delays: [f64; 2], c: f64) -> Problem {
        let mut gains = GainConfig::study(2);
        gains.c = vec![c; 2];
        Problem::new(
            QuadraticMap::source_seeking(),
            DelayVector::new(delays.to_vec()).unwrap(),
            gains,
            SimConfig::study(),
        )
        .unwrap()
    }

    #[test]
    fn origin_is_an_equilibrium() {
        let mut p = problem([50.0, 100.0], 20.0);
        let mut sim = p.sim().clone();
        sim.theta_hat0 = DVector::from_vec(vec![0.0, 1.0]);
        sim.t_end = 300.0;
        p = Problem::new(p.map().clone(), p.delays().clone(), p.gains().clone(), sim).unwrap();
        let traj = run_averaged_problem(&p, AveragedModel::Linearized).unwrap();
        for r in traj.rows() {
            assert_eq!(r.theta_hat(), &[0.0, 1.0]);
            assert_eq!(r.y(), 5.0);
        }
    }

    #[test]
    fn decays_at_the_designed_rate() {
        let p = problem([50.0, 100.0], 20.0);
        let traj = run_averaged_problem(&p, AveragedModel::Linearized).unwrap();
        let err: Vec<(f64, f64)> = traj
            .rows()
            .map(|r| (r.t(), euclidean(&[r.theta_hat()[0], r.theta_hat()[1] - 1.0])))
            .collect();
        let rate = fitted_decay_rate(&err, 100.0, 1e-12).unwrap();
        assert_abs_diff_eq!(rate, 0.005, epsilon = 0.005 * 0.05);
    }

    #[test]
    fn riccati_error_follows_closed_form() {
        let p = problem([0.0, 0.0], 20.0);
        let traj = run_averaged_problem(&p, AveragedModel::Linearized).unwrap();
        let h_inv = p.map().hessian_inverse().unwrap();
        let g0 = &p.sim().gamma0 - &h_inv;
        let last = traj.last().unwrap();
        let expect = &h_inv + linearized_gamma_error(&g0, 0.007, last.t());
        for (got, want) in last.gamma().iter().zip(expect.transpose().iter()) {
            assert_abs_diff_eq!(*got, *want, epsilon = 1e-4);
        }
    }

    #[test]
    fn with_riccati_gamma_reaches_inverse() {
        let p = problem([0.0, 0.0], 20.0);
        let traj = run_averaged_problem(&p, AveragedModel::WithRiccati).unwrap();
        let g = traj.last().unwrap().gamma().to_vec();
        for (got, want) in g.iter().zip([-1.0, 0.5, 0.5, -0.5]) {
            assert_abs_diff_eq!(*got, want, epsilon = 0.01);
        }
    }

    #[test]
    fn self_comparison_is_zero() {
        let p = problem([50.0, 100.0], 20.0);
        let traj = run_averaged_problem(&p, AveragedModel::Linearized).unwrap();
        let rep = compare_to_stochastic(&traj, &traj, &[0.0, 1.0], 100.0, 100.0, 0.05).unwrap();
        assert_eq!(rep.rms_distance, 0.0);
        assert!(rep.windows.iter().all(|w| w.1 == 0.0));
        assert_eq!(rep.rate_mismatch(), Some(0.0));
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let p = problem([0.0, 0.0], 20.0);
        let a = run_averaged_problem(&p, AveragedModel::Linearized).unwrap();
        let mut sim = p.sim().clone();
        sim.log_stride = 20;
        let q = Problem::new(p.map().clone(), p.delays().clone(), p.gains().clone(), sim).unwrap();
        let b = run_averaged_problem(&q, AveragedModel::Linearized).unwrap();
        assert!(matches!(
            compare_to_stochastic(&a, &b, &[0.0, 1.0], 10.0, 0.0, 0.1),
            Err(EscError::Comparison(_))
        ));
    }

    #[test]
    fn baseline_has_no_average() {
        let p = problem([50.0, 100.0], 20.0).with_mode(ControllerMode::NewtonNoPredictor);
        assert!(run_averaged_problem(&p, AveragedModel::Linearized).is_err());
    }
}
