use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ra-ddp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn check_exit_codes() {
    assert_eq!(code(&run(&["check", path(&fixture("line5.toml"))])), 0);
    assert_eq!(code(&run(&["check", path(&fixture("walls20.toml"))])), 0);
    let gap = run(&["check", path(&fixture("gap9.toml"))]);
    assert_eq!(code(&gap), 1);
    assert!(stdout(&gap).contains("perforation_width=0"));
}

#[test]
fn malformed_task_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[arena]\nlo = [0]\nhi = \"wide\"\n").unwrap();
    for sub in ["check", "solve", "play"] {
        assert_eq!(code(&run(&[sub, path(&bad)])), 2, "{sub}");
    }
    assert_eq!(code(&run(&["check", "/nonexistent/task.toml"])), 2);
}

#[test]
fn solve_line5_dumps_every_row() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("v.csv");
    let pgm = dir.path().join("regions");
    let o = run(&[
        "solve",
        path(&fixture("line5.toml")),
        "--dump-values",
        path(&csv),
        "--dump-region",
        path(&pgm),
        "--oracle",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("value_x0=4"));
    assert!(out.contains("oracle_mismatches=0"));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 26);
    assert!(text.lines().any(|l| l == "5,4,0,NONE"));
    assert_eq!(std::fs::read_dir(&pgm).unwrap().count(), 5);
}

#[test]
fn solve_gapless_is_unsolvable() {
    let o = run(&["solve", path(&fixture("gap9_gapless.toml"))]);
    assert_eq!(code(&o), 3);
    assert!(stdout(&o).contains("solvable=false"));
}

#[test]
fn solve_rejects_missing_segment() {
    assert_eq!(
        code(&run(&["solve", path(&fixture("line5.toml")), "--segment", "7"])),
        2
    );
}

#[test]
fn play_wide_gap_under_every_adversary() {
    for adv in ["zero", "random", "worst"] {
        let o = run(&["play", path(&fixture("gap9_wide.toml")), "--adversary", adv]);
        assert_eq!(code(&o), 0, "{adv}: {}", stdout(&o));
        assert!(stdout(&o).contains("termination=Finished"));
    }
}

#[test]
fn play_gapless_exits_3() {
    assert_eq!(code(&run(&["play", path(&fixture("gap9_gapless.toml"))])), 3);
}

#[test]
fn seeded_play_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let traces: Vec<Vec<u8>> = (0..2)
        .map(|i| {
            let f = dir.path().join(format!("t{i}.csv"));
            let o = run(&[
                "play",
                path(&fixture("walls20.toml")),
                "--adversary",
                "random",
                "--seed",
                "7",
                "--trace-out",
                path(&f),
            ]);
            assert_eq!(code(&o), 0);
            std::fs::read(&f).unwrap()
        })
        .collect();
    assert!(!traces[0].is_empty());
    assert_eq!(traces[0], traces[1]);
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let dumps: Vec<Vec<u8>> = ["1", "4"]
        .iter()
        .map(|t| {
            let f = dir.path().join(format!("v{t}.csv"));
            let o = run(&[
                "--threads",
                t,
                "solve",
                path(&fixture("walls20.toml")),
                "--dump-values",
                path(&f),
            ]);
            assert_eq!(code(&o), 0);
            std::fs::read(&f).unwrap()
        })
        .collect();
    assert_eq!(dumps[0], dumps[1]);
}

#[test]
fn solve_then_audit_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["line5", "gap9_wide", "walls20"] {
        let task = fixture(&format!("{name}.toml"));
        let csv = dir.path().join(format!("{name}.csv"));
        assert_eq!(
            code(&run(&["solve", path(&task), "--dump-values", path(&csv)])),
            0,
            "{name}"
        );
        let o = run(&["audit", path(&task), "--values", path(&csv)]);
        assert_eq!(code(&o), 0, "{name}: {}", stdout(&o));
        assert!(stdout(&o).contains("hji_identity=true"));
    }
}

#[test]
fn audit_catches_a_tampered_dump() {
    let dir = tempfile::tempdir().unwrap();
    let task = fixture("line5.toml");
    let csv = dir.path().join("v.csv");
    assert_eq!(
        code(&run(&["solve", path(&task), "--dump-values", path(&csv)])),
        0
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    let tampered = text.replacen("\n3,3,1,0\n", "\n3,3,5,0\n", 1);
    assert_ne!(text, tampered);
    std::fs::write(&csv, tampered).unwrap();
    let o = run(&["audit", path(&task), "--values", path(&csv)]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("monotonicity=false"));
}

#[test]
fn every_fixture_parses_and_checks() {
    for entry in std::fs::read_dir(fixture("")).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "toml") {
            let c = code(&run(&["check", path(&p)]));
            assert!(c == 0 || c == 1, "{}: exit {c}", p.display());
        }
    }
}
