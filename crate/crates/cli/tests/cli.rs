use std::path::Path;
use std::process::{Command, Output};

use longtrack::config::Config;
use longtrack::synth::{Path2, SceneScript, TargetSpec};

fn longtrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_longtrack")).args(args).output().unwrap()
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

#[test]
fn default_config_dump_round_trips() {
    let flag = longtrack(&["--dump-default-config"]);
    let sub = longtrack(&["dump-default-config"]);
    assert!(flag.status.success() && sub.status.success());
    assert_eq!(flag.stdout, sub.stdout);
    let text = String::from_utf8(flag.stdout).unwrap();
    assert_eq!(Config::from_text(&text).unwrap(), Config::default());
}

#[test]
fn exit_codes() {
    assert_eq!(longtrack(&["--help"]).status.code(), Some(0));
    assert_eq!(longtrack(&[]).status.code(), Some(1));
    assert_eq!(longtrack(&["run", "--out", "x"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "no_such_key = 1\n").unwrap();
    let out = longtrack(&["run", "--seq", "x", "--config", &s(&cfg), "--out", &s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let out = longtrack(&["run", "--seq", &s(&dir.path().join("missing")), "--out", &s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synth_run_eval() {
    let dir = tempfile::tempdir().unwrap();
    let mut script = SceneScript::new("walk", 30, TargetSpec {
        size: (18, 18),
        texture_seed: 12,
        path: Path2::fixed(90.0, 80.0),
    });
    script.absences = vec![(12, 16)];
    let sp = dir.path().join("walk.txt");
    std::fs::write(&sp, script.to_text()).unwrap();
    let seqs = dir.path().join("seqs");
    assert!(longtrack(&["synth", "--script", &s(&sp), "--out", &s(&seqs)]).status.success());
    let seq = seqs.join("walk");
    for f in ["groundtruth.txt", "attributes.txt", "script.txt"] {
        assert!(seq.join(f).is_file(), "{f}");
    }

    let pred = dir.path().join("pred");
    let out = longtrack(&["--jobs", "1", "run", "--seq", &s(&seq), "--out", &s(&pred)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let boxes = std::fs::read_to_string(pred.join("walk_bbox.txt")).unwrap();
    let conf = std::fs::read_to_string(pred.join("walk_confidence.txt")).unwrap();
    assert_eq!(boxes.lines().count(), 30);
    assert_eq!(conf.lines().count(), 30);

    let csv = dir.path().join("walk.csv");
    let out = longtrack(&["eval", "--seq", &s(&seq), "--pred", &s(&pred), "--out", &s(&csv)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("tau,precision,recall,f"));
    let rest: Vec<&str> = lines.collect();
    assert_eq!(rest.len(), 103);
    assert_eq!(rest[101], "f_max,tau_star");

    std::fs::write(pred.join("walk_confidence.txt"), "1\n").unwrap();
    let out = longtrack(&["eval", "--seq", &s(&seq), "--pred", &s(&pred), "--out", &s(&csv)]);
    assert_eq!(out.status.code(), Some(2));
}
