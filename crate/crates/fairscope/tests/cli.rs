//! End-to-end runs of the `fairscope` binary on a small dataset.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fairscope::report::{CssEntry, FrameScore, RunReport};
use fairscope::commands::AblationCell;
use fairscope::PipelineConfig;
use fairscope_core::concepts::SamplingMode;
use fairscope_core::pipeline::{Mode, VariantAxes};
use serde_json::Value;
use tempfile::TempDir;

fn small_config(root: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.data_dir = root.join("data");
    cfg.out_dir = root.join("run");
    cfg.gen.train_videos = 48;
    cfg.gen.val_videos = 12;
    cfg.gen.test_videos = 24;
    cfg.gen.frames = 4;
    cfg.gen.concept_images = 40;
    cfg.run.concepts = 3;
    cfg.run.k = 2;
    cfg.run.train.epochs = 2;
    cfg.run.train.batch_size = 16;
    cfg.run.train.hidden = 16;
    cfg
}

fn write_config(root: &Path, cfg: &PipelineConfig) -> PathBuf {
    let path = root.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn fairscope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairscope")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = fairscope(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A tempdir holding a generated small dataset and its config.
fn workspace() -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), &small_config(dir.path()));
    ok(&["generate", "--config", s(&config)]);
    (dir, config)
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn read<T: serde::de::DeserializeOwned>(path: &Path) -> T {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn generation_is_reproducible() {
    let (a, _) = workspace();
    let (b, _) = workspace();
    let (ta, tb) = (tree(&a.path().join("data")), tree(&b.path().join("data")));
    assert!(ta.len() > 10);
    assert_eq!(ta, tb);
}

#[test]
fn train_evaluate_explain() {
    let (dir, config) = workspace();
    let run = dir.path().join("run");
    ok(&["train", "--config", s(&config)]);
    for f in ["phase1.bin", "checkpoint.bin", "clusters.json", "css.json", "concepts.json", "run_report.json"] {
        assert!(run.join(f).exists(), "{f} missing");
    }
    ok(&["evaluate", "--config", s(&config)]);

    let metrics: Value = read(&run.join("metrics.json"));
    for key in ["f_fpr", "f_tpr", "f_eo", "auc", "f1"] {
        assert!(metrics.get(key).is_some(), "metrics.json lacks {key}");
        assert!(metrics["video"].get(key).is_some(), "video block lacks {key}");
    }
    assert!(fs::read_to_string(run.join("metrics.md")).unwrap().contains("| F_EO |"));

    // video AUC from scores.json by counting ordered pairs
    let scores: Vec<FrameScore> = read(&run.join("scores.json"));
    let mut videos: BTreeMap<String, (usize, f64, usize)> = BTreeMap::new();
    for f in &scores {
        let v = videos.entry(f.video_id.clone()).or_insert((f.label, 0.0, 0));
        v.1 += f.score;
        v.2 += 1;
    }
    let means: Vec<(usize, f64)> = videos.values().map(|&(l, sum, n)| (l, sum / n as f64)).collect();
    let (mut wins, mut pairs) = (0.0, 0.0);
    for &(_, sf) in means.iter().filter(|m| m.0 == 1) {
        for &(_, sr) in means.iter().filter(|m| m.0 == 0) {
            pairs += 1.0;
            wins += if sf > sr { 1.0 } else if sf == sr { 0.5 } else { 0.0 };
        }
    }
    let video_auc = metrics["video"]["auc"].as_f64().unwrap();
    assert!((video_auc - wins / pairs).abs() < 1e-12, "{video_auc} vs {}", wins / pairs);

    let id = &scores[0].video_id;
    let explain = dir.path().join("explain");
    ok(&["explain", "--config", s(&config), "--video", id, "--out", s(&explain)]);
    let pgms: Vec<PathBuf> = fs::read_dir(&explain).unwrap().map(|e| e.unwrap().path()).filter(|p| p.extension().is_some_and(|e| e == "pgm")).collect();
    assert!(!pgms.is_empty() && pgms.len() <= 5);
    for p in &pgms {
        let bytes = fs::read(p).unwrap();
        let header = b"P5\n32 32\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(bytes.len(), header.len() + 1024);
    }
    let css: Vec<CssEntry> = read(&explain.join("css_report.json"));
    assert_eq!(css.len(), 3);
    assert!(css.windows(2).all(|w| w[0].rank < w[1].rank && w[0].score >= w[1].score));
}

#[test]
fn usage_errors_exit_with_two() {
    let (dir, config) = workspace();
    let empty = dir.path().join("nothing");
    let cases: Vec<Vec<&str>> = vec![
        vec!["train", "--config", s(&config), "--data", s(&empty)],
        vec!["train", "--config", s(&config), "--mode", "bogus"],
        vec!["evaluate", "--config", s(&config), "--split", "holdout"],
        vec!["frobnicate"],
    ];
    for args in &cases {
        assert_eq!(fairscope(args).status.code(), Some(2), "{args:?}");
    }

    // vanilla runs write no concept scores, so explain has nothing to show
    let vanilla = dir.path().join("vanilla");
    ok(&["train", "--config", s(&config), "--mode", "vanilla", "--out", s(&vanilla)]);
    assert!(!vanilla.join("css.json").exists());
    assert_eq!(fairscope(&["explain", "--config", s(&config), "--run", s(&vanilla), "--video", "x"]).status.code(), Some(2));

    let mut cfg = small_config(dir.path());
    cfg.run.mode = Mode::Variant;
    cfg.run.variant = VariantAxes { concepts: false, sampling: SamplingMode::BiasAware, ..VariantAxes::PROPOSED };
    let bad = write_config(dir.path(), &cfg);
    assert_eq!(fairscope(&["train", "--config", s(&bad)]).status.code(), Some(2));
}

#[test]
fn unknown_video_is_a_usage_error() {
    let (dir, config) = workspace();
    ok(&["train", "--config", s(&config)]);
    let out = fairscope(&["explain", "--config", s(&config), "--video", "no-such-video", "--out", s(&dir.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn training_ignores_group_attributes() {
    let (dir, config) = workspace();
    let manifest = dir.path().join("data/train/manifest.json");
    let original: Value = read(&manifest);

    let run = |tag: &str, edit: &dyn Fn(&mut Value, usize)| {
        let mut m = original.clone();
        for (i, v) in m["videos"].as_array_mut().unwrap().iter_mut().enumerate() {
            edit(v, i);
        }
        fs::write(&manifest, serde_json::to_string(&m).unwrap()).unwrap();
        let out = dir.path().join(tag);
        ok(&["train", "--config", s(&config), "--out", s(&out)]);
        fs::read(out.join("checkpoint.bin")).unwrap()
    };
    let base = run("base", &|_, _| {});
    let stripped = run("stripped", &|v, _| {
        v.as_object_mut().unwrap().remove("group");
    });
    let scrambled = run("scrambled", &|v, i| v["group"] = Value::from((i * 7 + 3) % 5));
    assert_eq!(base, stripped);
    assert_eq!(base, scrambled);
}

#[test]
fn ablation_shares_one_phase_one() {
    let (dir, config) = workspace();
    let train_out = dir.path().join("proposed");
    ok(&["train", "--config", s(&config), "--out", s(&train_out)]);
    let report: RunReport = read(&train_out.join("run_report.json"));

    let ablate_out = dir.path().join("ablate");
    ok(&["ablate", "--config", s(&config), "--grid", "table3", "--out", s(&ablate_out)]);
    let cells: Vec<AblationCell> = read(&ablate_out.join("ablation.json"));
    assert_eq!(cells.len(), 4);
    for c in &cells {
        assert!(c.error.is_none(), "{}: {:?}", c.variant, c.error);
        assert_eq!(c.phase1_sha256, report.phase1_sha256);
    }
    assert!(fs::read_to_string(ablate_out.join("ablation.md")).unwrap().contains("NC+BS+PF"));
}

#[test]
fn preview_writes_five_images() {
    let (dir, config) = workspace();
    let out = dir.path().join("preview");
    ok(&["preview-augment", "--config", s(&config), "--out", s(&out)]);
    assert_eq!(fs::read_dir(&out).unwrap().count(), 5);
}
