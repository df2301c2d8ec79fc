//! `esc` — run, compare, sweep and validate extremum-seeking scenarios.
//!
//! Exit status: 0 success, 1 usage or configuration error, 2 a run
//! diverged, 3 a validation suite missed a tolerance.

mod report;

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use esc_core::scenario::{comparison_pair, preset, preset_names, Scenario};
use esc_core::validation::{run_suite, SUITES};
use esc_core::{run_problem, Trajectory};

use report::Summary;

/// Environment variable naming the default output directory.
const OUT_DIR_VAR: &str = "ESC_OUT_DIR";

const EXIT_CONFIG: u8 = 1;
const EXIT_DIVERGED: u8 = 2;
const EXIT_VALIDATION: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "esc", version, about = "Newton-based stochastic extremum seeking with delay compensation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one scenario and write its trajectory as CSV.
    Run {
        #[command(flatten)]
        source: Source,
        /// Output CSV (default: $ESC_OUT_DIR/<name>-seed<seed>.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Newton/gradient pair and report time to the 5% band.
    Compare {
        /// A pair name (fig13, fig14) or two preset names.
        #[arg(required = true, num_args = 1..=2)]
        presets: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output CSV with both trajectories side by side.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one scenario over several seeds (and optionally ω values) in parallel.
    Sweep {
        #[command(flatten)]
        source: Source,
        /// Seeds, e.g. `1-10` or `1,4,9`.
        #[arg(long, default_value = "1-10")]
        seeds: String,
        /// Comma-separated dither time scales; default keeps the scenario's.
        #[arg(long)]
        omega: Option<String>,
        /// Directory for the per-run CSV files (default: $ESC_OUT_DIR).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Worker threads (default: available parallelism).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run a property suite (or `all`) with fixed seeds.
    Validate { suite: String },
    /// List presets.
    Presets,
    /// Print a scenario as TOML, ready for `--config`.
    Show {
        #[command(flatten)]
        source: Source,
    },
}

#[derive(Debug, Args)]
struct Source {
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Dotted-path override such as `gains.omega=10`; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

/// A failure that maps to a specific exit status.
#[derive(Debug)]
struct Exit(u8);

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "exit {}", self.0)
    }
}

impl std::error::Error for Exit {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => match e.downcast_ref::<Exit>() {
            Some(Exit(code)) => ExitCode::from(*code),
            None => {
                eprintln!("error: {e:#}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { source, out } => cmd_run(&source, out),
        Command::Compare {
            presets,
            seed,
            overrides,
            out,
        } => cmd_compare(&presets, seed, &overrides, out),
        Command::Sweep {
            source,
            seeds,
            omega,
            out_dir,
            jobs,
        } => cmd_sweep(&source, &seeds, omega.as_deref(), out_dir, jobs),
        Command::Validate { suite } => cmd_validate(&suite),
        Command::Presets => {
            for name in preset_names() {
                let s = preset(name).expect("listed preset exists");
                println!("{name:<16} {}", s.description);
            }
            println!("{:<16} pair fig13-newton / fig13-gradient", "fig13");
            println!("{:<16} pair fig14-newton / fig14-gradient", "fig14");
            Ok(())
        }
        Command::Show { source } => {
            print!("{}", load(&source)?.to_toml()?);
            Ok(())
        }
    }
}

fn named_preset(name: &str) -> Result<Scenario> {
    preset(name).with_context(|| {
        format!("unknown preset `{name}` (known: {})", preset_names().join(", "))
    })
}

fn customize(mut s: Scenario, seed: Option<u64>, overrides: &[String]) -> Result<Scenario> {
    for o in overrides {
        s.apply_override(o)?;
    }
    if let Some(seed) = seed {
        s.sim.seed = seed;
    }
    Ok(s)
}

fn load(src: &Source) -> Result<Scenario> {
    let base = match (&src.preset, &src.config) {
        (Some(name), _) => named_preset(name)?,
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            Scenario::from_toml(&text).with_context(|| format!("in {}", path.display()))?
        }
        (None, None) => bail!("either --preset or --config is required"),
    };
    customize(base, src.seed, &src.overrides)
}

fn out_dir(explicit: Option<PathBuf>) -> PathBuf {
    explicit
        .or_else(|| std::env::var_os(OUT_DIR_VAR).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn write_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    traj.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn simulate(s: &Scenario) -> Result<Trajectory> {
    let problem = s.to_problem().with_context(|| format!("scenario `{}`", s.name))?;
    Ok(run_problem(&problem)?)
}

fn cmd_run(src: &Source, out: Option<PathBuf>) -> Result<()> {
    let s = load(src)?;
    let traj = simulate(&s)?;
    let path = out.unwrap_or_else(|| out_dir(None).join(format!("{}-seed{}.csv", s.name, s.sim.seed)));
    write_csv(&path, &traj)?;
    let summary = Summary::of(&s, &traj);
    println!("scenario   {} (seed {})", s.name, s.sim.seed);
    print!("{summary}");
    println!("trajectory {}", path.display());
    if traj.diverged() {
        return Err(Exit(EXIT_DIVERGED).into());
    }
    Ok(())
}

fn cmd_compare(names: &[String], seed: Option<u64>, overrides: &[String], out: Option<PathBuf>) -> Result<()> {
    let (a, b) = match names {
        [pair] => {
            let (a, b) = comparison_pair(pair)
                .with_context(|| format!("`{pair}` is not a comparison pair (fig13, fig14)"))?;
            (a.to_string(), b.to_string())
        }
        [a, b] => (a.clone(), b.clone()),
        _ => bail!("compare takes a pair name or two presets"),
    };
    let sa = customize(named_preset(&a)?, seed, overrides)?;
    let sb = customize(named_preset(&b)?, seed, overrides)?;
    let (ta, tb) = std::thread::scope(|scope| {
        let ha = scope.spawn(|| simulate(&sa));
        let tb = simulate(&sb);
        (ha.join().expect("simulation thread panicked"), tb)
    });
    let (ta, tb) = (ta?, tb?);
    let (ma, mb) = (Summary::of(&sa, &ta), Summary::of(&sb, &tb));
    for (s, m) in [(&sa, &ma), (&sb, &mb)] {
        println!("{:<16} time to 5% band: {}", s.name, report::fmt_time(m.time_to_band));
    }
    match (ma.time_to_band, mb.time_to_band) {
        (Some(x), Some(y)) if x < y => println!("faster: {}", sa.name),
        (Some(x), Some(y)) if y < x => println!("faster: {}", sb.name),
        (Some(_), Some(_)) => println!("faster: tie"),
        (Some(_), None) => println!("faster: {}", sa.name),
        (None, Some(_)) => println!("faster: {}", sb.name),
        (None, None) => println!("faster: neither settled"),
    }
    let path = out.unwrap_or_else(|| out_dir(None).join(format!("{}-vs-{}-seed{}.csv", sa.name, sb.name, sa.sim.seed)));
    report::write_joined_file(&path, &[(&sa.name, &ta), (&sb.name, &tb)])?;
    println!("trajectory {}", path.display());
    if ta.diverged() || tb.diverged() {
        return Err(Exit(EXIT_DIVERGED).into());
    }
    Ok(())
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((lo, hi)) => {
                let (lo, hi): (u64, u64) = (lo.trim().parse()?, hi.trim().parse()?);
                if lo > hi {
                    bail!("empty seed range `{part}`");
                }
                seeds.extend(lo..=hi);
            }
            None => seeds.push(part.parse().with_context(|| format!("bad seed `{part}`"))?),
        }
    }
    if seeds.is_empty() {
        bail!("no seeds given");
    }
    Ok(seeds)
}

fn cmd_sweep(
    src: &Source,
    seeds: &str,
    omegas: Option<&str>,
    dir: Option<PathBuf>,
    jobs: Option<usize>,
) -> Result<()> {
    let base = load(src)?;
    let seeds = parse_seeds(seeds)?;
    let omegas: Vec<Option<f64>> = match omegas {
        None => vec![None],
        Some(list) => list
            .split(',')
            .map(|w| w.trim().parse::<f64>().map(Some).with_context(|| format!("bad omega `{w}`")))
            .collect::<Result<_>>()?,
    };
    let mut runs = Vec::new();
    for &omega in &omegas {
        for &seed in &seeds {
            let mut s = base.clone();
            s.sim.seed = seed;
            if let Some(w) = omega {
                s.gains.omega = w;
            }
            s.to_problem().with_context(|| format!("scenario `{}`", s.name))?;
            runs.push(s);
        }
    }
    let dir = out_dir(dir);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let workers = jobs
        .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
        .unwrap_or(1)
        .clamp(1, runs.len());

    // Each worker takes every `workers`-th run; results are re-sorted after.
    let results: Vec<(usize, Result<Summary>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let (runs, dir) = (&runs, &dir);
                scope.spawn(move || {
                    runs.iter()
                        .enumerate()
                        .skip(w)
                        .step_by(workers)
                        .map(|(i, s)| {
                            let r = simulate(s).and_then(|traj| {
                                let name = format!("{}-omega{}-seed{}.csv", s.name, s.gains.omega, s.sim.seed);
                                write_csv(&dir.join(name), &traj)?;
                                Ok(Summary::of(s, &traj))
                            });
                            (i, r)
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        let mut all: Vec<_> = handles
            .into_iter()
            .flat_map(|h| h.join().expect("sweep worker panicked"))
            .collect();
        all.sort_by_key(|(i, _)| *i);
        all
    });

    let stdout = io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "omega,seed,y_final,theta_err_inf,time_to_band,diverged_at")?;
    let mut diverged = 0;
    for (i, r) in results {
        let s = &runs[i];
        let m = r?;
        diverged += usize::from(m.divergence.is_some());
        writeln!(out, "{}", m.csv_line(s.gains.omega, s.sim.seed))?;
    }
    writeln!(out, "# {} runs, {} diverged, files in {}", runs.len(), diverged, dir.display())?;
    if diverged > 0 {
        return Err(Exit(EXIT_DIVERGED).into());
    }
    Ok(())
}

fn cmd_validate(suite: &str) -> Result<()> {
    let names: Vec<&str> = if suite == "all" { SUITES.to_vec() } else { vec![suite] };
    let mut ok = true;
    for name in names {
        let rep = run_suite(name)?;
        print!("{rep}");
        ok &= rep.passed();
    }
    if !ok {
        return Err(Exit(EXIT_VALIDATION).into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("1-3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_seeds("4, 9,1-2").unwrap(), vec![4, 9, 1, 2]);
        assert!(parse_seeds("3-1").is_err());
        assert!(parse_seeds("x").is_err());
        assert!(parse_seeds("").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn overrides_then_seed() {
        let s = customize(named_preset("fig7").unwrap(), Some(7), &["sim.seed=3".into()]).unwrap();
        assert_eq!(s.sim.seed, 7);
    }
}
