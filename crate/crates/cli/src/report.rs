//! Run summaries and the side-by-side comparison CSV.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use esc_core::metrics::{final_window, time_to_band};
use esc_core::scenario::Scenario;
use esc_core::{DivergenceEvent, Trajectory};

/// Share of the horizon averaged for the final-window figures.
const FINAL_FRACTION: f64 = 0.10;
const BAND: f64 = 0.05;
const SMOOTHING: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct Summary {
    pub y_star: f64,
    pub y_final: Option<f64>,
    pub theta_err: Option<f64>,
    pub time_to_band: Option<f64>,
    pub divergence: Option<DivergenceEvent>,
}

impl Summary {
    pub fn of(s: &Scenario, traj: &Trajectory) -> Self {
        let y_star = s.map.y_star;
        let window = (!traj.diverged())
            .then(|| final_window(traj, s.sim.t_end, FINAL_FRACTION))
            .flatten();
        Self {
            y_star,
            y_final: window.as_ref().map(|w| w.y),
            theta_err: window.as_ref().map(|w| {
                w.theta
                    .iter()
                    .zip(&s.map.theta_star)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            }),
            time_to_band: time_to_band(traj, y_star, BAND, SMOOTHING),
            divergence: traj.divergence.clone(),
        }
    }

    pub fn csv_line(&self, omega: f64, seed: u64) -> String {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        format!(
            "{omega},{seed},{},{},{},{}",
            opt(self.y_final),
            opt(self.theta_err),
            opt(self.time_to_band),
            opt(self.divergence.as_ref().map(|d| d.t)),
        )
    }
}

pub fn fmt_time(t: Option<f64>) -> String {
    t.map_or_else(|| "never".into(), |t| format!("{t:.1} s"))
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(d) = &self.divergence {
            return writeln!(f, "DIVERGED   at t = {:.2} s: {}", d.t, d.reason);
        }
        match (self.y_final, self.theta_err) {
            (Some(y), Some(e)) => {
                writeln!(f, "final y    {y:.4} (y* = {}, |y - y*| = {:.4})", self.y_star, (y - self.y_star).abs())?;
                writeln!(f, "|θ - θ*|∞  {e:.4}")?;
            }
            _ => writeln!(f, "final y    n/a (run shorter than the averaging window)")?,
        }
        writeln!(f, "5% band    {}", fmt_time(self.time_to_band))
    }
}

/// Writes several trajectories as one CSV, each column prefixed by
/// `<label>.`. Rows are joined by index; shorter runs leave empty cells.
pub fn write_joined<W: Write>(mut out: W, runs: &[(&str, &Trajectory)]) -> std::io::Result<()> {
    let mut header = vec!["t".to_string()];
    for (label, traj) in runs {
        header.extend(Trajectory::header(traj.dim()).into_iter().skip(1).map(|c| format!("{label}.{c}")));
    }
    writeln!(out, "{}", header.join(","))?;
    let len = runs.iter().map(|(_, t)| t.len()).max().unwrap_or(0);
    for i in 0..len {
        let t = runs
            .iter()
            .find(|(_, traj)| i < traj.len())
            .map(|(_, traj)| traj.row(i).t())
            .unwrap_or_default();
        let mut line = t.to_string();
        for (_, traj) in runs {
            let width = Trajectory::width(traj.dim()) - 1;
            if i < traj.len() {
                for v in &traj.row(i).values()[1..] {
                    line.push(',');
                    line.push_str(&v.to_string());
                }
            } else {
                line.push_str(&",".repeat(width));
            }
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn write_joined_file(path: &Path, runs: &[(&str, &Trajectory)]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    write_joined(&mut w, runs)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use esc_core::scenario::preset;

    fn short(name: &str) -> (Scenario, Trajectory) {
        let mut s = preset(name).unwrap();
        s.sim.t_end = 2.0;
        let traj = esc_core::run_problem(&s.to_problem().unwrap()).unwrap();
        (s, traj)
    }

    #[test]
    fn joined_csv_pads_short_runs() {
        let (_, a) = short("fig7");
        let (mut s, _) = short("fig7");
        s.sim.t_end = 1.0;
        let b = esc_core::run_problem(&s.to_problem().unwrap()).unwrap();
        let mut buf = Vec::new();
        write_joined(&mut buf, &[("a", &a), ("b", &b)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        let cols = lines[0].split(',').count();
        assert_eq!(cols, 1 + 2 * (Trajectory::width(2) - 1));
        assert!(lines[0].starts_with("t,a.theta_1,"));
        assert!(lines.iter().all(|l| l.split(',').count() == cols));
        assert_eq!(lines.len(), 1 + a.len());
        assert!(lines.last().unwrap().ends_with(','));
    }

    #[test]
    fn summary_csv_has_fixed_fields() {
        let (s, traj) = short("fig7");
        let line = Summary::of(&s, &traj).csv_line(s.gains.omega, 1);
        assert_eq!(line.split(',').count(), 6);
    }
}
