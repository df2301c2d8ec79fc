//! Logged simulation output and its CSV form.

use std::fmt::Write as _;
use std::io::{self, Write};

use crate::simulator::LoopState;

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceEvent {
    pub t: f64,
    pub reason: String,
}

/// Uniformly sampled rows of `(t, θ, θ̂, y, U, Ĥ, Γ)`, stored flat.
///
/// Channels appear in the caller's original order even though the
/// simulation runs them sorted by delay.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    n: usize,
    dt: f64,
    stride: usize,
    /// `order[i]` is the caller's index of canonical channel `i`.
    order: Vec<usize>,
    data: Vec<f64>,
    pub divergence: Option<DivergenceEvent>,
}

/// Borrowed view of one logged row.
#[derive(Debug, Clone, Copy)]
pub struct Row<'a> {
    n: usize,
    values: &'a [f64],
}

impl<'a> Row<'a> {
    pub fn t(&self) -> f64 {
        self.values[0]
    }

    pub fn theta(&self) -> &'a [f64] {
        &self.values[1..1 + self.n]
    }

    pub fn theta_hat(&self) -> &'a [f64] {
        &self.values[1 + self.n..1 + 2 * self.n]
    }

    pub fn y(&self) -> f64 {
        self.values[1 + 2 * self.n]
    }

    pub fn u(&self) -> &'a [f64] {
        &self.values[2 + 2 * self.n..2 + 3 * self.n]
    }

    /// Row-major `Ĥ`.
    pub fn hhat(&self) -> &'a [f64] {
        let start = 2 + 3 * self.n;
        &self.values[start..start + self.n * self.n]
    }

    /// Row-major `Γ`.
    pub fn gamma(&self) -> &'a [f64] {
        let start = 2 + 3 * self.n + self.n * self.n;
        &self.values[start..start + self.n * self.n]
    }

    pub fn values(&self) -> &'a [f64] {
        self.values
    }
}

impl Trajectory {
    pub fn new(n: usize, dt: f64, stride: usize, order: Vec<usize>) -> Self {
        Self {
            n,
            dt,
            stride,
            order,
            data: Vec::new(),
            divergence: None,
        }
    }

    pub fn width(n: usize) -> usize {
        2 + 3 * n + 2 * n * n
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    /// Time between logged rows.
    pub fn sample_period(&self) -> f64 {
        self.dt * self.stride as f64
    }

    pub fn len(&self) -> usize {
        self.data.len() / Self::width(self.n)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> Row<'_> {
        let w = Self::width(self.n);
        Row {
            n: self.n,
            values: &self.data[i * w..(i + 1) * w],
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = Row<'_>> + '_ {
        self.data.chunks_exact(Self::width(self.n)).map(move |values| Row {
            n: self.n,
            values,
        })
    }

    pub fn last(&self) -> Option<Row<'_>> {
        (!self.is_empty()).then(|| self.row(self.len() - 1))
    }

    pub fn diverged(&self) -> bool {
        self.divergence.is_some()
    }

    /// Appends a row given in canonical channel order.
    pub fn push_canonical(
        &mut self,
        t: f64,
        theta: &[f64],
        theta_hat: &[f64],
        y: f64,
        u: &[f64],
        hhat: &[f64],
        gamma: &[f64],
    ) {
        let n = self.n;
        let w = Self::width(n);
        let base = self.data.len();
        self.data.resize(base + w, 0.0);
        let row = &mut self.data[base..];
        row[0] = t;
        for i in 0..n {
            let o = self.order[i];
            row[1 + o] = theta[i];
            row[1 + n + o] = theta_hat[i];
            row[2 + 2 * n + o] = u[i];
            for j in 0..n {
                let oj = self.order[j];
                row[2 + 3 * n + o * n + oj] = hhat[i * n + j];
                row[2 + 3 * n + n * n + o * n + oj] = gamma[i * n + j];
            }
        }
        row[1 + 2 * n] = y;
    }

    pub(crate) fn push_state(&mut self, s: &LoopState) {
        // nalgebra is column-major; transpose to row-major
        let hhat = s.est.hhat.transpose();
        let gamma = s.est.gamma.transpose();
        self.push_canonical(
            s.t,
            s.theta.as_slice(),
            s.theta_hat.as_slice(),
            s.y,
            s.ctrl.u.as_slice(),
            hhat.as_slice(),
            gamma.as_slice(),
        );
    }

    /// Column names, in CSV order.
    pub fn header(n: usize) -> Vec<String> {
        let mut cols = vec!["t".to_string()];
        cols.extend((1..=n).map(|i| format!("theta_{i}")));
        cols.extend((1..=n).map(|i| format!("theta_hat_{i}")));
        cols.push("y".into());
        cols.extend((1..=n).map(|i| format!("U_{i}")));
        for prefix in ["Hhat", "Gamma"] {
            for i in 1..=n {
                for j in 1..=n {
                    cols.push(format!("{prefix}_{i}{j}"));
                }
            }
        }
        cols
    }

    /// Writes a header row and one line per logged row. Values use Rust's
    /// shortest round-trip float formatting, so re-parsing is bit-exact.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", Self::header(self.n).join(","))?;
        let mut line = String::new();
        for row in self.rows() {
            line.clear();
            for (k, v) in row.values().iter().enumerate() {
                if k > 0 {
                    line.push(',');
                }
                let _ = write!(line, "{v}");
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Parses the output of [`write_csv`](Self::write_csv).
    pub fn read_csv(text: &str, dt: f64, stride: usize) -> Result<Self, String> {
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().ok_or("empty file")?.split(',').collect();
        let n = (1..16)
            .find(|&n| Self::width(n) == header.len())
            .ok_or_else(|| format!("unexpected column count {}", header.len()))?;
        if header != Self::header(n) {
            return Err("header does not match the trajectory layout".into());
        }
        let mut traj = Self::new(n, dt, stride, (0..n).collect());
        for (k, line) in lines.enumerate() {
            let before = traj.data.len();
            for field in line.split(',') {
                let v: f64 = field
                    .parse()
                    .map_err(|e| format!("line {}: {e}", k + 2))?;
                traj.data.push(v);
            }
            if traj.data.len() - before != header.len() {
                return Err(format!("line {}: wrong field count", k + 2));
            }
        }
        Ok(traj)
    }
}
