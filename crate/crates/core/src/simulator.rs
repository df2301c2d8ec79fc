//! Closed-loop simulation: dither → delayed plant → demodulation → Riccati
//! → control law → integrator, advanced with a fixed step.

use nalgebra::{DMatrix, DVector};

use crate::controller::{
    gradient_predictor_step, newton_predictor_step, unpredicted_step, ControllerState,
};
use crate::dither::{gradient_demodulator, hessian_demodulator, perturbation, DitherState};
use crate::error::{EscError, Result};
use crate::estimator::{demodulate, newton_signal, riccati_step, EstimatorState, Washout};
use crate::history::HistoryBuffer;
use crate::model::{
    delay_steps, ControllerMode, DelayVector, GainConfig, QuadraticMap, SimConfig,
};
use crate::trajectory::{DivergenceEvent, Trajectory};

/// A validated problem with channels in ascending-delay order.
#[derive(Debug, Clone)]
pub struct Problem {
    map: QuadraticMap,
    delays: DelayVector,
    gains: GainConfig,
    sim: SimConfig,
    lags: Vec<usize>,
}

impl Problem {
    /// Validates everything and reorders the channels so delays are
    /// non-decreasing. `map`, `gains` and `sim` are given in the caller's
    /// channel order, matching the unsorted input to `DelayVector::new`.
    pub fn new(
        map: QuadraticMap,
        delays: DelayVector,
        gains: GainConfig,
        sim: SimConfig,
    ) -> Result<Self> {
        let n = map.dim();
        crate::error::check_len("delays", n, delays.len())?;
        gains.validate(n)?;
        sim.validate(n)?;
        let lags = delays
            .as_slice()
            .iter()
            .map(|&d| delay_steps(d, sim.dt))
            .collect::<Result<Vec<_>>>()?;
        if lags.iter().zip(delays.as_slice()).any(|(&l, &d)| d > 0.0 && l == 0) {
            return Err(EscError::config("non-zero delay shorter than dt"));
        }
        let order = delays.order().to_vec();
        Ok(Self {
            map: map.permuted(&order)?,
            gains: gains.permuted(&order)?,
            sim: sim.permuted(&order)?,
            delays,
            lags,
        })
    }

    pub fn dim(&self) -> usize {
        self.map.dim()
    }

    /// Map in canonical (ascending-delay) channel order.
    pub fn map(&self) -> &QuadraticMap {
        &self.map
    }

    pub fn delays(&self) -> &DelayVector {
        &self.delays
    }

    pub fn gains(&self) -> &GainConfig {
        &self.gains
    }

    pub fn sim(&self) -> &SimConfig {
        &self.sim
    }

    /// Delay of each canonical channel in whole steps.
    pub fn lags(&self) -> &[usize] {
        &self.lags
    }

    /// Total number of steps after `t = 0` covered by a run.
    pub fn steps(&self) -> usize {
        (self.sim.t_end / self.sim.dt).round() as usize
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut p = self.clone();
        p.sim.seed = seed;
        p
    }

    pub fn with_mode(&self, mode: ControllerMode) -> Self {
        let mut p = self.clone();
        p.sim.controller = mode;
        p
    }
}

/// Everything that evolves during a run.
#[derive(Debug, Clone)]
pub struct LoopState {
    pub t: f64,
    pub step: usize,
    pub theta_hat: DVector<f64>,
    /// Perturbed input `θ̂ + S(η)` at the current step.
    pub theta: DVector<f64>,
    /// Per-channel delayed input `θ_i(t − D_i)` seen by the plant.
    pub theta_delayed: DVector<f64>,
    pub y: f64,
    pub dither: DitherState,
    pub eta_history: HistoryBuffer,
    pub theta_history: HistoryBuffer,
    pub u_history: HistoryBuffer,
    pub est: EstimatorState,
    pub ctrl: ControllerState,
    pub washout: Option<Washout>,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    problem: Problem,
    state: LoopState,
    trajectory: Trajectory,
    /// Next step to execute.
    next_step: usize,
    halted: bool,
}

impl Simulation {
    pub fn new(problem: Problem) -> Result<Self> {
        let n = problem.dim();
        let sim = problem.sim();
        let gains = problem.gains();
        let dt = sim.dt;
        let max_delay = problem.delays().max();

        let mut eta_history = HistoryBuffer::new(n, dt, max_delay, 0.0)?;
        let mut theta_history = HistoryBuffer::with_prefill(dt, max_delay, sim.theta_hat0.as_slice())?;
        let mut u_history = HistoryBuffer::new(n, dt, max_delay, 0.0)?;
        for (ch, &d) in problem.delays().as_slice().iter().enumerate() {
            u_history.track_window(ch, d)?;
        }

        // Dither warm-up over [−D_n, 0) with the estimate held at θ̂(0).
        let mut dither = DitherState::new(n, sim.seed, gains.omega);
        let warmup = problem.lags().iter().copied().max().unwrap_or(0);
        for j in 0..warmup {
            if j > 0 {
                dither.step(dt);
            }
            eta_history.push_all(dither.eta())?;
            let theta = &sim.theta_hat0 + perturbation(dither.eta(), &gains.a);
            theta_history.push_all(theta.as_slice())?;
        }

        let theta_hat = sim.theta_hat0.clone();
        let state = LoopState {
            t: 0.0,
            step: 0,
            theta: theta_hat.clone(),
            theta_delayed: theta_hat.clone(),
            theta_hat,
            y: f64::NAN,
            dither,
            eta_history,
            theta_history,
            u_history,
            est: EstimatorState::new(sim.gamma0.clone()),
            ctrl: ControllerState::new(n, sim.controller),
            washout: gains.washout.map(Washout::new),
        };
        let trajectory = Trajectory::new(n, dt, sim.log_stride, problem.delays().order().to_vec());
        Ok(Self {
            problem,
            state,
            trajectory,
            next_step: 0,
            halted: false,
        })
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn state(&self) -> &LoopState {
        &self.state
    }

    /// Mutable access for test harnesses that inject perturbations.
    pub fn state_mut(&mut self) -> &mut LoopState {
        &mut self.state
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    /// Executes one closed-loop step. Returns `false` once the run has
    /// halted on divergence.
    pub fn step(&mut self) -> bool {
        if self.halted {
            return false;
        }
        let m = self.next_step;
        let t = m as f64 * self.problem.sim.dt;
        let outcome = self.advance(m, t).and_then(|()| {
            if m.is_multiple_of(self.problem.sim.log_stride) {
                self.trajectory.push_state(&self.state);
            }
            self.integrate()
        });
        match outcome {
            Ok(()) => {
                self.next_step += 1;
                true
            }
            Err(reason) => {
                self.trajectory.divergence = Some(DivergenceEvent { t, reason });
                self.halted = true;
                false
            }
        }
    }

    fn advance(&mut self, m: usize, t: f64) -> std::result::Result<(), String> {
        let p = &self.problem;
        let (dt, n) = (p.sim.dt, p.dim());
        let gains = &p.gains;
        let s = &mut self.state;
        s.t = t;
        s.step = m;

        // (1) dither and its history
        s.dither.step(dt);
        s.eta_history.push_all(s.dither.eta()).map_err(|e| e.to_string())?;

        // (2)–(3) perturbed input and its per-channel delayed copy
        s.theta = &s.theta_hat + perturbation(s.dither.eta(), &gains.a);
        s.theta_history.push_all(s.theta.as_slice()).map_err(|e| e.to_string())?;
        for i in 0..n {
            s.theta_delayed[i] = s.theta_history.sample_lag(i, p.lags[i]);
        }

        // (4) plant
        s.y = p.map.evaluate_unchecked(s.theta_delayed.as_slice());
        if !s.y.is_finite() {
            return Err("non-finite output".into());
        }
        if s.y.abs() > p.sim.divergence_guard {
            return Err(format!(
                "|y| = {:.3e} exceeded guard {:.3e}",
                s.y.abs(),
                p.sim.divergence_guard
            ));
        }

        // (5)–(6) demodulation at the delayed phases; the delay-unaware
        // baseline pairs y with the phases it is currently applying
        let eta_delayed: Vec<f64> = match s.ctrl.mode {
            ControllerMode::NewtonNoPredictor => s.dither.eta().to_vec(),
            _ => (0..n).map(|i| s.eta_history.sample_lag(i, p.lags[i])).collect(),
        };
        let y_demod = match s.washout.as_mut() {
            Some(w) => w.filter(s.y, dt),
            None => s.y,
        };
        let (g, hhat) = demodulate(
            y_demod,
            &gradient_demodulator(&eta_delayed, &gains.a),
            &hessian_demodulator(&eta_delayed, &gains.a),
        );

        // (7) Hessian-inverse filter and Newton signal
        s.est.gamma =
            riccati_step(&s.est.gamma, &hhat, gains.omega_r, dt).map_err(|e| e.to_string())?;
        s.est.z = newton_signal(&s.est.gamma, &g);
        s.est.g = g;
        s.est.hhat = hhat;

        // (8) control law on the history of U up to t − dt
        let window: Vec<f64> = (0..n)
            .map(|i| s.u_history.integral_window(i, p.delays.get(i)))
            .collect::<Result<_>>()
            .map_err(|e| e.to_string())?;
        let disc = p.sim.filter;
        let u = match s.ctrl.mode {
            ControllerMode::NewtonPredictor => {
                newton_predictor_step(&s.ctrl.u, &s.est.z, &window, &gains.k, &gains.c, dt, disc)
            }
            ControllerMode::GradientPredictor => gradient_predictor_step(
                &s.ctrl.u, &s.est.g, &s.est.hhat, &window, &gains.k, &gains.c, dt, disc,
            ),
            ControllerMode::NewtonNoPredictor => {
                unpredicted_step(&s.ctrl.u, &s.est.z, &gains.k, &gains.c, dt, disc)
            }
        }
        .map_err(|e| e.to_string())?;
        s.ctrl.u = u;

        // (9) the new control enters its own history
        s.u_history.push_all(s.ctrl.u.as_slice()).map_err(|e| e.to_string())
    }

    /// (10) integrator `1/s`, applied after the step's row is logged.
    fn integrate(&mut self) -> std::result::Result<(), String> {
        let s = &mut self.state;
        s.theta_hat.axpy(self.problem.sim.dt, &s.ctrl.u, 1.0);
        if s.theta_hat.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err("non-finite parameter estimate".into())
        }
    }

    /// Runs to `t_end` or the first divergence event.
    pub fn run_to_end(mut self) -> Trajectory {
        let total = self.problem.steps();
        while self.next_step <= total && self.step() {}
        self.trajectory
    }
}

/// Runs one closed-loop simulation.
pub fn run(
    map: QuadraticMap,
    delays: DelayVector,
    gains: GainConfig,
    sim: SimConfig,
) -> Result<Trajectory> {
    let problem = Problem::new(map, delays, gains, sim)?;
    run_problem(&problem)
}

pub fn run_problem(problem: &Problem) -> Result<Trajectory> {
    Ok(Simulation::new(problem.clone())?.run_to_end())
}

/// `H⁻¹` of the problem's map in the caller's channel order.
pub fn hessian_inverse_user_order(problem: &Problem) -> Result<DMatrix<f64>> {
    let inv = problem.map().hessian_inverse()?;
    let order = problem.delays().order();
    let n = order.len();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(order[i], order[j])] = inv[(i, j)];
        }
    }
    Ok(out)
}
