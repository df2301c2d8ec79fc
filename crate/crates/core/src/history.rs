//! Fixed-step signal histories.
//!
//! A channel's ring buffer holds the samples `U(t − m·dt)` for
//! `m = 0..capacity`, which is the transport-PDE state `u(x, t) = U(t + x − D)`
//! on the grid `x = D − m·dt`. Delayed reads are exact slot lookups and the
//! distributed-delay integral is a left Riemann sum over the same slots.

use crate::error::{EscError, Result};
use crate::model::delay_steps;

/// Running window sums are rebuilt from scratch this often.
const RESUM_INTERVAL: u64 = 100_000;

#[derive(Debug, Clone)]
struct DelayLine {
    slots: Vec<f64>,
    /// Index of the most recent sample.
    head: usize,
    pushes: u64,
    /// Window length in samples tracked by the running sum, if any.
    window: Option<usize>,
    window_sum: f64,
}

impl DelayLine {
    fn new(capacity: usize, prefill: f64) -> Self {
        Self {
            slots: vec![prefill; capacity],
            head: capacity - 1,
            pushes: 0,
            window: None,
            window_sum: 0.0,
        }
    }

    #[inline]
    fn lagged(&self, lag: usize) -> f64 {
        let cap = self.slots.len();
        debug_assert!(lag < cap);
        self.slots[(self.head + cap - lag) % cap]
    }

    fn direct_sum(&self, len: usize) -> f64 {
        (0..len).map(|m| self.lagged(m)).sum()
    }

    fn track_window(&mut self, len: usize) {
        self.window = Some(len);
        self.window_sum = self.direct_sum(len);
    }

    fn push(&mut self, value: f64) {
        let cap = self.slots.len();
        let next = (self.head + 1) % cap;
        if let Some(len) = self.window {
            if len > 0 {
                // the sample at lag len−1 falls out once the new one lands
                self.window_sum += value - self.lagged(len - 1);
            }
        }
        self.slots[next] = value;
        self.head = next;
        self.pushes += 1;
        if self.pushes.is_multiple_of(RESUM_INTERVAL) {
            if let Some(len) = self.window {
                self.window_sum = self.direct_sum(len);
            }
        }
    }
}

/// Per-channel histories sharing one time grid.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    dt: f64,
    lines: Vec<DelayLine>,
    /// Completed steps; each channel may be at most one push ahead.
    steps: u64,
}

impl HistoryBuffer {
    /// Buffer covering delays up to `max_delay`, every slot set to `prefill`.
    pub fn new(channels: usize, dt: f64, max_delay: f64, prefill: f64) -> Result<Self> {
        Self::with_prefill(dt, max_delay, &vec![prefill; channels])
    }

    /// Like [`new`](Self::new) with a distinct pre-fill per channel.
    pub fn with_prefill(dt: f64, max_delay: f64, prefill: &[f64]) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(EscError::config("history dt must be positive"));
        }
        if prefill.is_empty() {
            return Err(EscError::config("history needs at least one channel"));
        }
        let capacity = delay_steps(max_delay, dt)? + 1;
        Ok(Self {
            dt,
            lines: prefill.iter().map(|&p| DelayLine::new(capacity, p)).collect(),
            steps: 0,
        })
    }

    pub fn channels(&self) -> usize {
        self.lines.len()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Slots per channel; always `≥ max_delay / dt + 1`.
    pub fn capacity(&self) -> usize {
        self.lines[0].slots.len()
    }

    /// Longest delay the buffer can serve.
    pub fn max_delay(&self) -> f64 {
        (self.capacity() - 1) as f64 * self.dt
    }

    /// Keeps an O(1) running sum for `integral_window(channel, delay)`.
    pub fn track_window(&mut self, channel: usize, delay: f64) -> Result<()> {
        let len = self.lag(delay)?;
        self.lines[channel].track_window(len);
        Ok(())
    }

    /// Appends the newest sample of one channel. Pushing the same channel
    /// twice before the others have caught up is an error.
    pub fn push(&mut self, channel: usize, value: f64) -> Result<()> {
        let line = &self.lines[channel];
        if line.pushes > self.steps {
            return Err(EscError::DoublePush { channel });
        }
        self.lines[channel].push(value);
        if self.lines.iter().all(|l| l.pushes > self.steps) {
            self.steps += 1;
        }
        Ok(())
    }

    /// Pushes one sample for every channel.
    pub fn push_all(&mut self, values: &[f64]) -> Result<()> {
        crate::error::check_len("history push", self.channels(), values.len())?;
        for (ch, &v) in values.iter().enumerate() {
            self.push(ch, v)?;
        }
        Ok(())
    }

    /// Sample stored `delay` seconds before the newest one.
    pub fn sample_delayed(&self, channel: usize, delay: f64) -> Result<f64> {
        let lag = self.lag(delay)?;
        Ok(self.lines[channel].lagged(lag))
    }

    /// Sample stored `lag` pushes before the newest one.
    #[inline]
    pub fn sample_lag(&self, channel: usize, lag: usize) -> f64 {
        self.lines[channel].lagged(lag)
    }

    /// Left Riemann sum `dt·Σ_{m=1}^{D/dt} U(t − m·dt)` of the window
    /// `[t − D, t]`, where `t` is one step after the newest sample.
    pub fn integral_window(&self, channel: usize, delay: f64) -> Result<f64> {
        let len = self.lag(delay)?;
        let line = &self.lines[channel];
        let sum = match line.window {
            Some(w) if w == len => line.window_sum,
            _ => line.direct_sum(len),
        };
        Ok(sum * self.dt)
    }

    /// Exact re-summation of the window, bypassing the running sum.
    pub fn integral_window_direct(&self, channel: usize, delay: f64) -> Result<f64> {
        let len = self.lag(delay)?;
        Ok(self.lines[channel].direct_sum(len) * self.dt)
    }

    fn lag(&self, delay: f64) -> Result<usize> {
        let lag = delay_steps(delay, self.dt)?;
        if lag >= self.capacity() {
            return Err(EscError::config(format!(
                "delay {delay} exceeds buffer span {}",
                self.max_delay()
            )));
        }
        Ok(lag)
    }
}
