//! Stochastic dither: one Brownian motion per channel, wrapped onto the
//! circle, drives the phase `η_i = ω π (1 + sin W_i)`.
//!
//! The wrapped process is ergodic with a uniform invariant law, which is what
//! the demodulation identities for `M·y` and `N·y` rely on.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Stream id offset so dither substreams never collide with other users of
/// the same master seed.
const DITHER_STREAM_BASE: u64 = 0x0d17_4e00;

#[derive(Debug, Clone)]
pub struct DitherState {
    wiener: Vec<f64>,
    eta: Vec<f64>,
    omega: f64,
    streams: Vec<ChaCha8Rng>,
}

impl DitherState {
    /// Each channel gets its own ChaCha substream of `seed`; `W_i(0)` is drawn
    /// uniformly on `[0, 2π)` from that substream.
    pub fn new(n: usize, seed: u64, omega: f64) -> Self {
        let mut streams: Vec<ChaCha8Rng> = (0..n)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(DITHER_STREAM_BASE + i as u64);
                rng
            })
            .collect();
        let wiener: Vec<f64> = streams
            .iter_mut()
            .map(|rng| wrap_angle(rng.random::<f64>() * TAU))
            .collect();
        let eta = wiener.iter().map(|&w| phase(w, omega)).collect();
        Self {
            wiener,
            eta,
            omega,
            streams,
        }
    }

    /// Starts from explicit Wiener values; the substreams are still seeded.
    pub fn with_wiener(wiener: Vec<f64>, seed: u64, omega: f64) -> Self {
        let mut state = Self::new(wiener.len(), seed, omega);
        state.wiener = wiener.into_iter().map(wrap_angle).collect();
        state.refresh_eta();
        state
    }

    pub fn dim(&self) -> usize {
        self.wiener.len()
    }

    pub fn wiener(&self) -> &[f64] {
        &self.wiener
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Advances every channel by one Euler–Maruyama increment
    /// `√(ω dt)·ξ_i` and re-derives the phases.
    pub fn step(&mut self, dt: f64) {
        if dt == 0.0 {
            return;
        }
        let scale = (self.omega * dt).sqrt();
        for (w, rng) in self.wiener.iter_mut().zip(self.streams.iter_mut()) {
            let xi: f64 = rng.sample(StandardNormal);
            *w = wrap_angle(*w + scale * xi);
        }
        self.refresh_eta();
    }

    /// Like [`step`](Self::step) but also returns the unwrapped increments,
    /// for checking the variance law.
    pub fn step_with_increments(&mut self, dt: f64) -> Vec<f64> {
        let scale = (self.omega * dt).sqrt();
        let mut incs = Vec::with_capacity(self.dim());
        for (w, rng) in self.wiener.iter_mut().zip(self.streams.iter_mut()) {
            let xi: f64 = rng.sample(StandardNormal);
            let inc = scale * xi;
            incs.push(inc);
            *w = wrap_angle(*w + inc);
        }
        self.refresh_eta();
        incs
    }

    fn refresh_eta(&mut self) {
        for (e, &w) in self.eta.iter_mut().zip(&self.wiener) {
            *e = phase(w, self.omega);
        }
    }
}

/// `η = ω π (1 + sin W)`.
#[inline]
pub fn phase(wiener: f64, omega: f64) -> f64 {
    omega * PI * (1.0 + wiener.sin())
}

/// Maps an angle into `[0, 2π)`.
#[inline]
pub fn wrap_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Perturbation `S_i = a_i sin η_i`.
pub fn perturbation(eta: &[f64], a: &[f64]) -> DVector<f64> {
    debug_assert_eq!(eta.len(), a.len());
    DVector::from_iterator(eta.len(), eta.iter().zip(a).map(|(e, a)| a * e.sin()))
}

/// Reciprocal amplitude; a channel with `a_i = 0` has its dither switched
/// off and contributes nothing to the demodulated signals.
#[inline]
fn inv(a: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        1.0 / a
    }
}

/// Gradient demodulation `M_i = (2 / a_i) sin η_i(t − D_i)`.
pub fn gradient_demodulator(eta_delayed: &[f64], a: &[f64]) -> DVector<f64> {
    debug_assert_eq!(eta_delayed.len(), a.len());
    DVector::from_iterator(
        eta_delayed.len(),
        eta_delayed.iter().zip(a).map(|(e, &a)| 2.0 * inv(a) * e.sin()),
    )
}

/// Hessian demodulation matrix:
/// `N_ii = 16/a_i² (sin² η_i − ½)`, `N_ij = 4/(a_i a_j) sin η_i sin η_j`.
pub fn hessian_demodulator(eta_delayed: &[f64], a: &[f64]) -> DMatrix<f64> {
    let n = eta_delayed.len();
    debug_assert_eq!(n, a.len());
    let s: Vec<f64> = eta_delayed.iter().map(|e| e.sin()).collect();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            16.0 * inv(a[i]).powi(2) * (s[i] * s[i] - 0.5)
        } else {
            // paired products keep N exactly symmetric
            4.0 * (inv(a[i]) * inv(a[j])) * (s[i] * s[j])
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn zero_step_leaves_state_unchanged() {
        let mut d = DitherState::new(3, 9, 5.75);
        let before = (d.wiener().to_vec(), d.eta().to_vec());
        d.step(0.0);
        assert_eq!(before, (d.wiener().to_vec(), d.eta().to_vec()));
    }

    #[test]
    fn wiener_stays_on_circle_and_eta_is_derived() {
        let mut d = DitherState::new(2, 3, 5.75);
        for _ in 0..10_000 {
            d.step(0.01);
            for (w, e) in d.wiener().iter().zip(d.eta()) {
                assert!((0.0..TAU).contains(w));
                assert_eq!(*e, phase(*w, 5.75));
            }
        }
    }

    #[test]
    fn wrap_past_two_pi() {
        let w = wrap_angle(1.5 * PI + PI);
        assert_abs_diff_eq!(w, 0.5 * PI, epsilon = 1e-12);
        assert!((0.0..TAU).contains(&wrap_angle(-1e-300)));
        assert_eq!(wrap_angle(TAU), 0.0);
    }

    #[test]
    fn same_seed_same_sequence() {
        let mut a = DitherState::new(2, 77, 5.75);
        let mut b = DitherState::new(2, 77, 5.75);
        for _ in 0..1000 {
            a.step(0.01);
            b.step(0.01);
            assert_eq!(a.wiener(), b.wiener());
        }
        let c = DitherState::new(2, 78, 5.75);
        assert_ne!(a.wiener(), c.wiener());
    }

    #[test]
    fn perturbation_examples() {
        let s = perturbation(&[FRAC_PI_2, FRAC_PI_2], &[0.22, 0.22]);
        assert_abs_diff_eq!(s[0], 0.22, epsilon = 1e-15);
        assert_abs_diff_eq!(s[1], 0.22, epsilon = 1e-15);
        assert_eq!(perturbation(&[0.0, 0.0], &[0.22, 0.22]).as_slice(), &[0.0, 0.0]);
        assert_abs_diff_eq!(perturbation(&[PI / 6.0], &[2.0])[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn gradient_demodulator_examples() {
        assert_abs_diff_eq!(
            gradient_demodulator(&[FRAC_PI_2], &[0.22])[0],
            9.090909090909092,
            epsilon = 1e-12
        );
        assert_eq!(gradient_demodulator(&[0.0], &[0.22])[0], 0.0);
        for &e in &[0.1, 1.0, 2.5, 4.0] {
            let ms = gradient_demodulator(&[e], &[0.3])[0] * perturbation(&[e], &[0.3])[0];
            assert!((0.0..=2.0 + 1e-12).contains(&ms));
            assert_abs_diff_eq!(ms, 2.0 * e.sin().powi(2), epsilon = 1e-12);
        }
    }

    #[test]
    fn hessian_demodulator_examples() {
        let n = hessian_demodulator(&[FRAC_PI_2], &[0.22]);
        assert_abs_diff_eq!(n[(0, 0)], 16.0 / 0.0484 * 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(n[(0, 0)], 165.28925619834712, epsilon = 1e-9);

        let n = hessian_demodulator(&[0.0, 0.0], &[0.22, 0.5]);
        assert_abs_diff_eq!(n[(0, 0)], -8.0 / 0.0484, epsilon = 1e-9);
        assert_abs_diff_eq!(n[(1, 1)], -8.0 / 0.25, epsilon = 1e-12);
        assert_eq!(n[(0, 1)], 0.0);
        assert_eq!(n[(1, 0)], 0.0);

        let n = hessian_demodulator(&[0.3, 2.1, 4.4], &[0.22, 0.1, 1.5]);
        assert_eq!(n, n.transpose());
    }
}
