use std::path::Path;
use std::process::{Command, Output};

use motionfactor::json::layout_from_json;
use motionfactor::trace::read_trace;

const SCENE: &str = "a parked car, a man walking and a flag waving";

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_motionfactor"))
        .args(args)
        .current_dir(dir)
        .env_remove("PLANNER_BASE_URL")
        .env_remove("PLANNER_API_KEY")
        .env_remove("PLANNER_MODEL")
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Plans the reference scene and synthesizes its features in `dir`.
fn scene(dir: &Path, frames: &str) {
    let out = run(dir, &["plan", "--prompt", SCENE, "--frames", frames, "--out", "layout.json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = run(
        dir,
        &[
            "synth",
            "--layout",
            "layout.json",
            "--grid",
            "8x8x4",
            "--seed",
            "7",
            "--noise",
            "0.05",
            "--out",
            "features.fvol",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn pipeline_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    scene(d, "4");

    let out = run(d, &["masks", "--layout", "layout.json", "--features", "features.fvol", "--out", "masks"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for name in ["m_0", "r_1", "nr_2", "composed"] {
        assert!(d.join(format!("masks/{name}.gmsk")).is_file(), "{name}.gmsk");
        assert!(d.join(format!("masks/{name}.json")).is_file(), "{name}.json");
    }
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("masks/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["masks"].as_array().unwrap().len(), 3);
    assert_eq!(summary["composed"]["branch"], "composed");

    let out = run(
        d,
        &[
            "guide",
            "--layout",
            "layout.json",
            "--features",
            "features.fvol",
            "--steps",
            "1:5",
            "--eta",
            "5",
            "--out",
            "trace.csv",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let trace = read_trace(std::fs::File::open(d.join("trace.csv")).unwrap()).unwrap();
    assert_eq!(trace.iter().map(|r| r.step).collect::<Vec<_>>(), [1, 2, 3, 4, 5]);
    assert!(trace.windows(2).all(|w| w[1].loss <= w[0].loss && w[1].wall_ms >= w[0].wall_ms));

    let out = run(
        d,
        &[
            "guide",
            "--layout",
            "layout.json",
            "--features",
            "features.fvol",
            "--mode",
            "dit",
            "--total-steps",
            "12",
            "--no-timing",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let trace = read_trace(out.stdout.as_slice()).unwrap();
    assert_eq!(trace.len(), 12);
    assert!(trace.iter().all(|r| r.wall_ms == 0.0));

    let out = run(d, &["render", "--layout", "layout.json", "--out", "layout.svg"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let svg = std::fs::read_to_string(d.join("layout.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.matches("class=\"frame\"").count() == 4);
}

#[test]
fn outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    scene(d, "3");
    let layout = std::fs::read(d.join("layout.json")).unwrap();
    let features = std::fs::read(d.join("features.fvol")).unwrap();
    scene(d, "3");
    assert_eq!(std::fs::read(d.join("layout.json")).unwrap(), layout);
    assert_eq!(std::fs::read(d.join("features.fvol")).unwrap(), features);

    let guide = ["guide", "--layout", "layout.json", "--features", "features.fvol", "--steps", "1:3", "--no-timing"];
    assert_eq!(run(d, &guide).stdout, run(d, &guide).stdout);
    let render = ["render", "--layout", "layout.json", "--style", "ascii"];
    let first = run(d, &render);
    assert_eq!(code(&first), 0);
    assert_eq!(first.stdout, run(d, &render).stdout);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("run.conf"), format!("# scene\nprompt = {SCENE}\nframes = 5\nout = from-config.json\n"))
        .unwrap();
    let out = run(d, &["--config", "run.conf", "plan"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let layout = layout_from_json(&std::fs::read_to_string(d.join("from-config.json")).unwrap()).unwrap();
    assert_eq!(layout.frames, 5);

    let out = run(d, &["plan", "--config", "run.conf", "--frames", "2", "--out", "flag.json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let layout = layout_from_json(&std::fs::read_to_string(d.join("flag.json")).unwrap()).unwrap();
    assert_eq!(layout.frames, 2);

    std::fs::write(d.join("bad.conf"), "colour = red\n").unwrap();
    assert_eq!(code(&run(d, &["--config", "bad.conf", "plan"])), 2);
    assert_eq!(code(&run(d, &["--config", "missing.conf", "plan"])), 2);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    scene(d, "2");
    let cases: &[&[&str]] = &[
        &[],
        &["bogus"],
        &["plan", "--prompt", SCENE],
        &["plan", "--prompt", SCENE, "--frames", "0"],
        &["plan", "--prompt", SCENE, "--frames", "two"],
        &["synth", "--layout", "layout.json", "--grid", "8x8", "--out", "x.fvol"],
        &["guide", "--layout", "layout.json", "--features", "features.fvol", "--steps", "5:2"],
        &["guide", "--layout", "layout.json", "--features", "features.fvol", "--mode", "vit"],
        &["guide", "--layout", "layout.json", "--features", "features.fvol", "--steps", "1:30", "--total-steps", "10"],
        &["masks", "--layout", "layout.json", "--features", "features.fvol", "--alpha", "-1", "--out", "m"],
        &["render", "--layout", "layout.json", "--style", "png"],
    ];
    for args in cases {
        let out = run(d, args);
        assert_eq!(code(&out), 2, "{args:?}: {}", stderr(&out));
    }
    assert_eq!(code(&run(d, &["--help"])), 0);
    assert_eq!(code(&run(d, &["--version"])), 0);
}

#[test]
fn data_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    scene(d, "2");
    std::fs::write(d.join("garbage.fvol"), b"FVOL\x01\x00\x02").unwrap();
    std::fs::write(d.join("broken.json"), b"{\"frames\": 2, \"tracks\": [").unwrap();
    let out = run(d, &["plan", "--prompt", SCENE, "--frames", "4", "--out", "four.json"]);
    assert_eq!(code(&out), 0);
    let cases: &[&[&str]] = &[
        &["masks", "--layout", "missing.json", "--features", "features.fvol", "--out", "m"],
        &["masks", "--layout", "layout.json", "--features", "garbage.fvol", "--out", "m"],
        &["masks", "--layout", "broken.json", "--features", "features.fvol", "--out", "m"],
        &["masks", "--layout", "four.json", "--features", "features.fvol", "--out", "m"],
        &["guide", "--layout", "four.json", "--features", "features.fvol"],
        &["plan", "--prompt", "and the", "--frames", "2"],
        &["plan", "--prompt", SCENE, "--frames", "2", "--lexicon", "no-such.tsv"],
    ];
    for args in cases {
        let out = run(d, args);
        assert_eq!(code(&out), 3, "{args:?}: {}", stderr(&out));
    }
}

#[test]
fn planner_endpoint_modes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let plan = ["plan", "--prompt", "a man walking", "--frames", "3", "--use-llm"];

    // No endpoint configured.
    assert_eq!(code(&run(d, &plan)), 4);

    let unreachable = |extra: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_motionfactor"))
            .args(plan.iter().chain(extra))
            .current_dir(d)
            .env("PLANNER_BASE_URL", "http://127.0.0.1:9")
            .env("PLANNER_API_KEY", "sk-do-not-print")
            .output()
            .unwrap()
    };
    let out = unreachable(&[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let local = run(d, &["plan", "--prompt", "a man walking", "--frames", "3"]);
    assert_eq!(out.stdout, local.stdout, "fallback equals the local planner");
    assert!(stderr(&out).contains("local parser"));

    let out = unreachable(&["--no-fallback", "-vv"]);
    assert_eq!(code(&out), 4);
    assert!(!stderr(&out).contains("sk-do-not-print"));
}

#[test]
fn empty_layout_runs_with_constant_loss() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("empty.json"), r#"{"frames": 2, "tracks": []}"#).unwrap();
    let out = run(d, &["synth", "--layout", "empty.json", "--grid", "4x4x2", "--out", "f.fvol"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = run(d, &["guide", "--layout", "empty.json", "--features", "f.fvol", "--steps", "1:3", "--no-timing"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let trace = read_trace(out.stdout.as_slice()).unwrap();
    assert!(trace.iter().all(|r| r.loss == 1.0 && r.fg_mass == 0.0));
    assert!(stderr(&out).contains("empty"));
}
