//! Summary statistics over logged trajectories.

use crate::trajectory::{Row, Trajectory};

/// Mean of `f(row)` over rows with `t ∈ [from, to]`.
pub fn window_mean<F>(traj: &Trajectory, from: f64, to: f64, f: F) -> Option<f64>
where
    F: Fn(&Row<'_>) -> f64,
{
    let (sum, count) = traj
        .rows()
        .filter(|r| r.t() >= from && r.t() <= to)
        .fold((0.0, 0usize), |(s, c), r| (s + f(&r), c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Entry-wise mean of a vector-valued column over `t ∈ [from, to]`.
pub fn window_mean_vec<F>(traj: &Trajectory, from: f64, to: f64, f: F) -> Option<Vec<f64>>
where
    F: for<'a> Fn(&Row<'a>) -> &'a [f64],
{
    let mut acc: Option<Vec<f64>> = None;
    let mut count = 0usize;
    for r in traj.rows().filter(|r| r.t() >= from && r.t() <= to) {
        let v = f(&r);
        let a = acc.get_or_insert_with(|| vec![0.0; v.len()]);
        for (x, y) in a.iter_mut().zip(v) {
            *x += y;
        }
        count += 1;
    }
    acc.map(|mut a| {
        a.iter_mut().for_each(|x| *x /= count as f64);
        a
    })
}

/// Averages over the last `fraction` of the horizon `[0, t_end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalWindow {
    pub from: f64,
    pub to: f64,
    pub y: f64,
    pub theta: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub hhat: Vec<f64>,
    pub gamma: Vec<f64>,
}

pub fn final_window(traj: &Trajectory, t_end: f64, fraction: f64) -> Option<FinalWindow> {
    let from = t_end * (1.0 - fraction);
    Some(FinalWindow {
        from,
        to: t_end,
        y: window_mean(traj, from, t_end, |r| r.y())?,
        theta: window_mean_vec(traj, from, t_end, |r| r.theta())?,
        theta_hat: window_mean_vec(traj, from, t_end, |r| r.theta_hat())?,
        hhat: window_mean_vec(traj, from, t_end, |r| r.hhat())?,
        gamma: window_mean_vec(traj, from, t_end, |r| r.gamma())?,
    })
}

/// Trailing moving average of `y` over `window` seconds.
pub fn smoothed_output(traj: &Trajectory, window: f64) -> Vec<(f64, f64)> {
    let len = ((window / traj.sample_period()).round() as usize).max(1);
    let ys: Vec<(f64, f64)> = traj.rows().map(|r| (r.t(), r.y())).collect();
    let mut out = Vec::with_capacity(ys.len());
    let mut sum = 0.0;
    for k in 0..ys.len() {
        sum += ys[k].1;
        if k >= len {
            sum -= ys[k - len].1;
        }
        let count = (k + 1).min(len);
        out.push((ys[k].0, sum / count as f64));
    }
    out
}

/// First time after which the smoothed output stays within
/// `band·|y*|` of `y*` for the remainder of the run. `None` if it never
/// settles or the run diverged.
pub fn time_to_band(traj: &Trajectory, y_star: f64, band: f64, smoothing: f64) -> Option<f64> {
    if traj.diverged() {
        return None;
    }
    let tol = band * y_star.abs();
    let series = smoothed_output(traj, smoothing);
    let last_out = series.iter().rposition(|&(_, y)| (y - y_star).abs() > tol);
    match last_out {
        None => series.first().map(|&(t, _)| t),
        Some(k) if k + 1 < series.len() => Some(series[k + 1].0),
        Some(_) => None,
    }
}

/// Least-squares slope of `ln v` against `t`. Non-positive values are skipped.
pub fn log_slope(samples: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|&&(_, v)| v > 0.0 && v.is_finite())
        .map(|&(t, v)| (t, v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Decay rate (positive for decay) fitted on the middle 60% of the interval
/// that starts at `start` and ends when `v` first falls below `floor`.
pub fn fitted_decay_rate(samples: &[(f64, f64)], start: f64, floor: f64) -> Option<f64> {
    let transient: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|&(t, _)| t >= start)
        .take_while(|&(_, v)| v > floor)
        .collect();
    let (t0, t1) = (transient.first()?.0, transient.last()?.0);
    let (lo, hi) = (t0 + 0.2 * (t1 - t0), t0 + 0.8 * (t1 - t0));
    let middle: Vec<(f64, f64)> = transient
        .into_iter()
        .filter(|&(t, _)| t >= lo && t <= hi)
        .collect();
    log_slope(&middle).map(|s| -s)
}

pub fn rms(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, count) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, c), v| (s + v * v, c + 1));
    if count == 0 {
        0.0
    } else {
        (sum / count as f64).sqrt()
    }
}

pub fn euclidean(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
