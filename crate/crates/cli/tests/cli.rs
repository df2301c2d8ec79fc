use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn esc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_esc"))
        .args(args)
        .env("ESC_OUT_DIR", dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn short_run_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = esc(dir.path(), &["run", "--preset", "fig7", "--override", "sim.t_end=30"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("fig7-seed1.csv")).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("t,theta_1,theta_2,theta_hat_1,theta_hat_2,y,U_1,U_2,Hhat_11"));
    assert_eq!(text.lines().count(), 1 + 301);
    assert!(stdout(&o).contains("final y"));
}

#[test]
fn uncompensated_preset_exits_with_divergence_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = esc(dir.path(), &["run", "--preset", "fig4", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("DIVERGED"));
    assert!(dir.path().join("fig4-seed1.csv").exists());
}

#[test]
fn shown_config_reproduces_the_preset_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--preset", "fig11", "--override", "sim.t_end=40", "--seed", "5"];
    let shown = esc(dir.path(), &[&["show"][..], &args].concat());
    assert!(shown.status.success());
    let cfg = dir.path().join("fig11.toml");
    fs::write(&cfg, &shown.stdout).unwrap();

    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let run_a = esc(dir.path(), &[&["run", "--out", a.to_str().unwrap()][..], &args].concat());
    let run_b = esc(dir.path(), &["run", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert!(run_a.status.success() && run_b.status.success());
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["run", "--preset", "fig7", "--override", "gains.bogus=1"][..],
        &["run", "--preset", "fig12"],
        &["run", "--preset", "fig7", "--override", "sim.dt=-1"],
        &["run"],
        &["frobnicate"],
        &["validate", "nope"],
        &["sweep", "--preset", "fig7", "--seeds", "5-1"],
    ] {
        let o = esc(dir.path(), args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
    }
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "name = \"x\"\nunexpected = 1\n").unwrap();
    let o = esc(dir.path(), &["run", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_and_version_succeed() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(esc(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(esc(dir.path(), &["--version"]).status.code(), Some(0));
}

#[test]
fn buffer_suite_validates() {
    let dir = tempfile::tempdir().unwrap();
    let o = esc(dir.path(), &["validate", "buffers"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.lines().all(|l| l.starts_with("PASS buffers/")), "{out}");
}

#[test]
fn comparing_a_preset_with_itself_ties() {
    let dir = tempfile::tempdir().unwrap();
    let o = esc(
        dir.path(),
        &["compare", "fig13-newton", "fig13-newton", "--override", "sim.t_end=1500"],
    );
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let times: Vec<&str> = out.lines().filter(|l| l.contains("time to 5% band")).map(|l| l.rsplit(':').next().unwrap()).collect();
    assert_eq!(times.len(), 2);
    assert_eq!(times[0], times[1]);
    assert!(out.contains("faster: tie"));
    let joined = fs::read_to_string(dir.path().join("fig13-newton-vs-fig13-newton-seed1.csv")).unwrap();
    assert!(joined.lines().next().unwrap().contains("fig13-newton.y"));
}

#[test]
fn sweep_reports_one_line_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = esc(
        dir.path(),
        &["sweep", "--preset", "fig2", "--seeds", "1-3", "--omega", "5,10", "--override", "sim.t_end=20", "--jobs", "2"],
    );
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().skip(1).filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 6);
    assert!(rows[0].starts_with("5,1,") && rows[5].starts_with("10,3,"));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 6);
}

#[test]
fn presets_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let out = stdout(&esc(dir.path(), &["presets"]));
    for name in ["fig2", "fig4", "fig7", "fig11", "fig13", "fig14-gradient"] {
        assert!(out.lines().any(|l| l.split_whitespace().next() == Some(name)), "{name}");
    }
}
