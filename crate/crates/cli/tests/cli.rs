use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use starlike::mmatrix::CompactModel;
use starlike_cli::{
    emit_plot_data, parse_grid, ConfigFile, PlotKind, RunConfig, RunSection, Task, CSV_HEADER,
};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_starlike"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run_in(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = bin().args(args).arg("--out").arg(dir).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn csv(dir: &Path) -> String {
    fs::read_to_string(dir.join("results.csv")).unwrap()
}

#[test]
fn csv_is_identical_across_job_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("free-star.toml");
    let mut outputs = Vec::new();
    for jobs in ["1", "4", "8"] {
        for rep in 0..2 {
            let d = tmp.path().join(format!("j{jobs}-{rep}"));
            let (code, err) = run_in(
                &d,
                &[
                    "--config",
                    cfg.to_str().unwrap(),
                    "--jobs",
                    jobs,
                    "--seed",
                    "11",
                    "--grid",
                    "-2.5:2.5:101",
                ],
            );
            assert_eq!(code, 0, "{err}");
            outputs.push((csv(&d), fs::read(d.join("evidence/scan.toml")).unwrap()));
        }
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn free_half_line_scan_has_ac_band() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("free-half-line.toml");
    let (code, err) = run_in(
        tmp.path(),
        &["--config", cfg.to_str().unwrap(), "--plot", "im-trace"],
    );
    assert_eq!(code, 0, "{err}");
    let text = csv(tmp.path());
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let mut n = 0;
    for l in lines {
        let f: Vec<&str> = l.split(',').collect();
        let e: f64 = f[0].parse().unwrap();
        if (e.abs() - 2.0).abs() < 0.05 {
            continue;
        }
        assert_eq!(f[3] == "1", e.abs() < 2.0, "{l}");
        assert_eq!(f[4], "0", "{l}");
        n += 1;
    }
    assert!(n > 570, "{n}");
    let trace = fs::read_to_string(tmp.path().join("im-trace.dat")).unwrap();
    for l in trace.lines().skip(1) {
        let v: Vec<f64> = l.split(' ').map(|x| x.parse().unwrap()).collect();
        let want = if v[0].abs() < 2.0 {
            (4.0 - v[0] * v[0]).sqrt() / 2.0
        } else {
            0.0
        };
        if (v[0].abs() - 2.0).abs() > 0.05 {
            assert!((v[1] - want).abs() < 1e-6, "{l}");
        }
    }
    let summary = fs::read_to_string(tmp.path().join("summary")).unwrap();
    assert!(summary.contains("errors 0"));
}

#[test]
fn command_line_wins_over_file() {
    let file = ConfigFile::load(&configs().join("free-star.toml")).unwrap();
    assert_eq!(file.run.task, Some(Task::Scan));
    let over = RunSection {
        grid: Some("0:1:3".into()),
        threshold: Some(1e-6),
        ..Default::default()
    };
    let cfg = RunConfig::resolve(file.run.overridden_by(over), file.model).unwrap();
    assert_eq!(cfg.energies, vec![0.0, 0.5, 1.0]);
    assert_eq!(cfg.threshold, 1e-6);
    assert_eq!(cfg.out, PathBuf::from("out/free-star"));
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "[run]\ntask = \"scan\"\ngrid = \"0:1:3\"\n[[graph.compact]]\nid = \"v\"\nb = 0.0\n[halflines.v]\n").unwrap();
    assert_eq!(
        run_in(&tmp.path().join("a"), &["--config", bad.to_str().unwrap()]).0,
        2
    );
    fs::write(&bad, "not toml [").unwrap();
    assert_eq!(
        run_in(&tmp.path().join("b"), &["--config", bad.to_str().unwrap()]).0,
        2
    );
    assert_eq!(
        run_in(
            &tmp.path().join("c"),
            &["--task", "scan", "--grid", "0:1:3"]
        )
        .0,
        2
    );
    let cfg = configs().join("free-star.toml");
    assert_eq!(
        run_in(
            &tmp.path().join("d"),
            &["--config", cfg.to_str().unwrap(), "--grid", "1:0:3"]
        )
        .0,
        2
    );
    assert_eq!(
        run_in(
            &tmp.path().join("e"),
            &["--config", cfg.to_str().unwrap(), "--eps-min", "0.01"]
        )
        .0,
        2
    );
    assert_eq!(
        run_in(
            &tmp.path().join("f"),
            &["--config", cfg.to_str().unwrap(), "--threshold", "-1"]
        )
        .0,
        2
    );
    assert!(parse_grid("0:1").is_err());
    assert!(parse_grid("0:1:0").is_err());
}

#[test]
fn selftest_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, err) = run_in(tmp.path(), &["--task", "selftest", "--seed", "5"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(csv(tmp.path()).lines().count(), 501);
    assert!(fs::read_to_string(tmp.path().join("summary"))
        .unwrap()
        .contains("failed 0"));
}

#[test]
fn multiplicity_on_bound_state() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("line-with-bump.toml");
    let (code, err) = run_in(tmp.path(), &["--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let text = csv(tmp.path());
    let first: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&first[4..9], &["1", "1", "1", "1", "1"]);
    assert!(first[9].contains("eigenvalue"));
    assert!(tmp.path().join("evidence/0000.toml").exists());
}

#[test]
fn star_overlap_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("free-star.toml");
    let (code, err) = run_in(
        tmp.path(),
        &[
            "--config",
            cfg.to_str().unwrap(),
            "--task",
            "star-overlap",
            "--grid",
            "2.1213203435596424:2.1213203435596424:1",
        ],
    );
    assert_eq!(code, 0, "{err}");
    let text = csv(tmp.path());
    assert_eq!(text.lines().count(), 4);
    assert!(text
        .lines()
        .skip(1)
        .all(|l| l.contains("class=S2nS") && l.split(',').nth(4) == Some("1")));
}

#[test]
fn plot_data_errors() {
    let file = ConfigFile::load(&configs().join("free-half-line.toml")).unwrap();
    let (g, c) = file.model.unwrap().build().unwrap();
    let model = CompactModel::new(&g, &c).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let ladder = starlike::boundary::EpsLadder::default();
    assert!(emit_plot_data(&model, &[], PlotKind::ImTrace, &ladder, None, tmp.path()).is_err());
    assert!("histogram".parse::<PlotKind>().is_err());
    let p = emit_plot_data(
        &model,
        &[0.0, 1.0],
        PlotKind::Density,
        &ladder,
        None,
        tmp.path(),
    )
    .unwrap();
    let text = fs::read_to_string(p).unwrap();
    let row: Vec<f64> = text
        .lines()
        .nth(2)
        .unwrap()
        .split(' ')
        .map(|x| x.parse().unwrap())
        .collect();
    assert!((row[1] - 3f64.sqrt() / (2.0 * std::f64::consts::PI)).abs() < 1e-7);
    let p = emit_plot_data(
        &model,
        &[0.0, 3.0],
        PlotKind::RatioEvidence,
        &ladder,
        Some("v"),
        tmp.path(),
    )
    .unwrap();
    assert_eq!(fs::read_to_string(p).unwrap().lines().count(), 3);
    assert!(emit_plot_data(
        &model,
        &[0.0],
        PlotKind::Density,
        &ladder,
        Some("nope"),
        tmp.path()
    )
    .is_err());
}
