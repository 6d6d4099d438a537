//! The subcommands as library functions.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use fairscope_core::augment::{self, CutPatch};
use fairscope_core::clustering::ClusterInput;
use fairscope_core::concepts::SamplingMode;
use fairscope_core::data::{ConceptImages, Label, Split, TrainVideo, VideoSample};
use fairscope_core::model::saliency_map;
use fairscope_core::pipeline::{
    self, evaluate as evaluate_params, phase_four, phase_one, phase_three, phase_two, training_css, validation_frames, Augmenter, Mode,
    PhaseOne, RunConfig, TrainingSet, VariantAxes,
};
use fairscope_core::{Rng, Tensor2D};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::dataset::{generate_dataset, load_concept_bank, load_eval_split, load_train_split, manifest_path, read_json, write_json};
use crate::error::{AppError, AppResult};
use crate::formats::{checkpoint_bytes, read_checkpoint, write_checkpoint, write_pgm};
use crate::report::{
    css_report, frame_scores, metrics_markdown, ClusterDumpEntry, CssEntry, LossHistory, MetricsFile, PhaseTimings, RunReport,
};

pub const CHECKPOINT: &str = "checkpoint.bin";
pub const PHASE1_CHECKPOINT: &str = "phase1.bin";
pub const CSS_FILE: &str = "css.json";
pub const SALIENCY_FRAMES: usize = 5;

fn create_dir(path: &Path) -> AppResult<()> {
    fs::create_dir_all(path).map_err(AppError::io(path))
}

pub fn generate(cfg: &PipelineConfig) -> AppResult<PathBuf> {
    cfg.gen.validate()?;
    generate_dataset(&cfg.data_dir, &cfg.gen)?;
    log::info!("dataset written to {}", cfg.data_dir.display());
    Ok(cfg.data_dir.clone())
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn load_bank(cfg: &PipelineConfig) -> AppResult<Vec<ConceptImages>> {
    if !cfg.run.needs_concepts() {
        return Ok(Vec::new());
    }
    let dir = cfg.concepts();
    if !dir.join("concepts.json").exists() {
        return Err(AppError::Usage(format!("mode {:?} needs a concept bank at {}", cfg.run.mode, dir.display())));
    }
    load_concept_bank(&dir)
}

/// Everything a run needs from the data directory.
pub struct Inputs {
    pub train: Vec<TrainVideo>,
    pub val: Vec<VideoSample>,
    pub bank: Vec<ConceptImages>,
}

pub fn load_inputs(cfg: &PipelineConfig) -> AppResult<Inputs> {
    if !manifest_path(&cfg.data_dir, Split::Train).exists() {
        return Err(AppError::Usage(format!("no dataset at {}; run `fairscope generate` first", cfg.data_dir.display())));
    }
    Ok(Inputs { train: load_train_split(&cfg.data_dir)?, val: load_eval_split(&cfg.data_dir, Split::Val)?, bank: load_bank(cfg)? })
}

fn early_stop_frames<'a>(run: &RunConfig, val: &'a [VideoSample]) -> Option<fairscope_core::model::LabeledFrames<'a>> {
    run.train.early_stop_patience.map(|_| validation_frames(val))
}

pub fn train(cfg: &PipelineConfig) -> AppResult<RunReport> {
    cfg.run.validate()?;
    let start = Instant::now();
    let inputs = load_inputs(cfg)?;
    let out = &cfg.out_dir;
    create_dir(out)?;
    let data = TrainingSet::new(&inputs.train)?;
    let val = early_stop_frames(&cfg.run, &inputs.val);
    let seed = cfg.run.train.seed;
    let mut timings = PhaseTimings::default();

    let t = Instant::now();
    let one = phase_one(&cfg.run, &data, val.as_ref())?;
    timings.phase1 = PhaseTimings::secs(t.elapsed());
    let phase1_bytes = checkpoint_bytes(&one.params, seed, one.loss_history.len());
    fs::write(out.join(PHASE1_CHECKPOINT), &phase1_bytes).map_err(AppError::io(&out.join(PHASE1_CHECKPOINT)))?;
    let mut artifacts = vec![PHASE1_CHECKPOINT.to_string()];

    let mut params = one.params.clone();
    let mut phase4_loss = Vec::new();
    let mut top_css = Vec::new();
    if cfg.run.mode != Mode::Vanilla {
        let t = Instant::now();
        let two = phase_two(&cfg.run, &one.params, &data)?;
        timings.phase2 = PhaseTimings::secs(t.elapsed());

        let t = Instant::now();
        let concepts = if cfg.run.needs_concepts() { phase_three(&cfg.run, &one.params, &inputs.bank)? } else { Vec::new() };
        timings.phase3 = PhaseTimings::secs(t.elapsed());

        let t = Instant::now();
        let four = phase_four(&cfg.run, &one.params, &data, &two, &concepts, val.as_ref())?;
        timings.phase4 = PhaseTimings::secs(t.elapsed());
        params = four.params.clone();
        phase4_loss = four.loss_history.clone();

        let dump: Vec<ClusterDumpEntry> = two
            .clusters
            .slots
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let v = data.video_of[i];
                ClusterDumpEntry { video_id: inputs.train[v].id.clone(), frame: i - data.video_start[v], class: s.class, cluster: s.cluster }
            })
            .collect();
        write_json(&out.join("clusters.json"), &dump)?;
        artifacts.push("clusters.json".into());

        if !concepts.is_empty() {
            let records = training_css(&cfg.run, &params, &data, &two.clusters, &concepts)?;
            let ranked = css_report(&records);
            write_json(&out.join(CSS_FILE), &ranked)?;
            write_json(&out.join("concepts.json"), &concepts)?;
            artifacts.extend([CSS_FILE.to_string(), "concepts.json".to_string()]);
            top_css = ranked.into_iter().take(3).collect();
        }
    }
    let epochs = one.loss_history.len() + phase4_loss.len();
    write_checkpoint(&out.join(CHECKPOINT), &params, seed, epochs)?;
    artifacts.push(CHECKPOINT.into());

    let validation = if inputs.val.is_empty() { None } else { Some(evaluate_params(&params, &inputs.val, cfg.run.threshold)?.frame_report) };
    timings.total = PhaseTimings::secs(start.elapsed());
    artifacts.push("run_report.json".into());
    let report = RunReport {
        config: cfg.clone(),
        timings,
        loss_history: LossHistory { phase1: one.loss_history, phase4: phase4_loss },
        validation,
        top_css,
        phase1_sha256: sha256_hex(&phase1_bytes),
        artifacts,
    };
    write_json(&out.join("run_report.json"), &report)?;
    Ok(report)
}

/// Scores `split` with a checkpoint and writes `metrics.json`, `metrics.md`
/// and the per-frame `scores.json`.
pub fn evaluate(checkpoint: &Path, data_dir: &Path, split: Split, threshold: f64, out: &Path, run_name: &str) -> AppResult<MetricsFile> {
    let (_, params) = read_checkpoint(checkpoint)?;
    let videos = load_eval_split(data_dir, split)?;
    let eval = evaluate_params(&params, &videos, threshold)?;
    let metrics = MetricsFile { frame: eval.frame_report.clone(), video: eval.video_report.clone() };
    create_dir(out)?;
    write_json(&out.join("metrics.json"), &metrics)?;
    let md = out.join("metrics.md");
    fs::write(&md, metrics_markdown(run_name, &metrics)).map_err(AppError::io(&md))?;
    write_json(&out.join("scores.json"), &frame_scores(&videos, &eval))?;
    Ok(metrics)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub video_id: String,
    pub saliency: Vec<PathBuf>,
    pub css_report: PathBuf,
}

fn find_video(data_dir: &Path, id: &str) -> AppResult<Vec<Tensor2D>> {
    for split in [Split::Test, Split::Val] {
        if let Some(v) = load_eval_split(data_dir, split)?.into_iter().find(|v| v.id == id) {
            return Ok(v.frames);
        }
    }
    load_train_split(data_dir)?
        .into_iter()
        .find(|v| v.id == id)
        .map(|v| v.frames)
        .ok_or_else(|| AppError::Usage(format!("no video with id {id:?} in {}", data_dir.display())))
}

/// Saliency images for up to five frames of one video plus the run's ranked CSS.
pub fn explain(run_dir: &Path, data_dir: &Path, video_id: &str, out: &Path) -> AppResult<Explanation> {
    let css_path = run_dir.join(CSS_FILE);
    if !css_path.exists() {
        return Err(AppError::Usage(format!("{} has no concept scores; train with concepts on", run_dir.display())));
    }
    let (_, params) = read_checkpoint(&run_dir.join(CHECKPOINT))?;
    let frames = find_video(data_dir, video_id)?;
    create_dir(out)?;
    let mut saliency = Vec::new();
    for (t, frame) in frames.iter().take(SALIENCY_FRAMES).enumerate() {
        let path = out.join(format!("{video_id}_frame{t}.pgm"));
        write_pgm(&path, &saliency_map(&params, frame)?)?;
        saliency.push(path);
    }
    let mut ranked: Vec<CssEntry> = read_json(&css_path)?;
    ranked.sort_by_key(|e| e.rank);
    let css_report = out.join("css_report.json");
    write_json(&css_report, &ranked)?;
    Ok(Explanation { video_id: video_id.into(), saliency, css_report })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Grid {
    Table3,
    Table4,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub table: String,
    pub name: String,
    pub variant: String,
    pub f_eo: Option<f64>,
    pub auc: Option<f64>,
    pub video_f_eo: Option<f64>,
    pub video_auc: Option<f64>,
    pub phase1_sha256: String,
    pub error: Option<String>,
}

fn axes(clustering: ClusterInput, concepts: bool, augment: Augmenter) -> VariantAxes {
    let sampling = if concepts { SamplingMode::BiasAware } else { SamplingMode::Proportional };
    VariantAxes { clustering, concepts, sampling, augment }
}

/// `(table, name, axes)` for the requested grid.
pub fn grid_cells(grid: Grid) -> Vec<(&'static str, &'static str, VariantAxes)> {
    use Augmenter::*;
    use ClusterInput::*;
    let table3 = [
        ("VariantA", axes(Naive, true, FreqCutMix)),
        ("VariantB", axes(Naive, false, FreqCutMix)),
        ("VariantC", axes(Temporal, false, FreqCutMix)),
        ("VariantD", axes(Temporal, true, FreqCutMix)),
    ];
    let table4 = [
        ("VariantA", axes(Temporal, true, MixUp)),
        ("VariantB", axes(Temporal, true, CutMix)),
        ("VariantC", axes(Temporal, true, FreqMasking)),
        ("VariantD", axes(Temporal, true, FreqCutMix)),
    ];
    let mut cells = Vec::new();
    if grid != Grid::Table4 {
        cells.extend(table3.map(|(n, a)| ("table3", n, a)));
    }
    if grid != Grid::Table3 {
        cells.extend(table4.map(|(n, a)| ("table4", n, a)));
    }
    cells
}

#[derive(Serialize, Deserialize)]
struct CachedHistory {
    loss_history: Vec<f64>,
    validation_history: Vec<f64>,
    stopped_early: bool,
}

/// Phase 1 keyed by the training data and training config; reused when the
/// cache already holds it.
pub fn cached_phase_one(cfg: &PipelineConfig, inputs: &Inputs, data: &TrainingSet<'_>, cache: &Path) -> AppResult<(PhaseOne, String)> {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(&cfg.run.train).expect("train config serializes"));
    for v in &inputs.train {
        hasher.update(v.id.as_bytes());
        hasher.update([v.label.index() as u8]);
        for f in &v.frames {
            for x in f.values() {
                hasher.update(x.to_le_bytes());
            }
        }
    }
    let key = hex::encode(&hasher.finalize()[..12]);
    create_dir(cache)?;
    let ckpt = cache.join(format!("phase1-{key}.bin"));
    let meta = cache.join(format!("phase1-{key}.json"));
    if ckpt.exists() && meta.exists() {
        let (_, params) = read_checkpoint(&ckpt)?;
        let h: CachedHistory = read_json(&meta)?;
        let bytes = fs::read(&ckpt).map_err(AppError::io(&ckpt))?;
        log::info!("phase 1 reused from {}", ckpt.display());
        let one = PhaseOne { params, loss_history: h.loss_history, validation_history: h.validation_history, stopped_early: h.stopped_early };
        return Ok((one, sha256_hex(&bytes)));
    }
    let val = early_stop_frames(&cfg.run, &inputs.val);
    let one = phase_one(&cfg.run, data, val.as_ref())?;
    let bytes = checkpoint_bytes(&one.params, cfg.run.train.seed, one.loss_history.len());
    fs::write(&ckpt, &bytes).map_err(AppError::io(&ckpt))?;
    write_json(
        &meta,
        &CachedHistory { loss_history: one.loss_history.clone(), validation_history: one.validation_history.clone(), stopped_early: one.stopped_early },
    )?;
    Ok((one, sha256_hex(&bytes)))
}

/// Worker count from `FAIRSCOPE_THREADS`, default 1.
pub fn grid_threads() -> usize {
    std::env::var("FAIRSCOPE_THREADS").ok().and_then(|s| s.parse().ok()).filter(|&n| n > 0).unwrap_or(1)
}

/// Runs the grid on the test split. A failing cell is recorded and the grid
/// carries on. Writes `ablation.json` and `ablation.md` to `cfg.out_dir`.
pub fn ablate(cfg: &PipelineConfig, grid: Grid, threads: usize) -> AppResult<Vec<AblationCell>> {
    cfg.run.train.validate()?;
    let mut base = cfg.clone();
    base.run.mode = Mode::Variant;
    base.run.variant = VariantAxes::PROPOSED;
    let inputs = load_inputs(&base)?;
    let test = load_eval_split(&cfg.data_dir, Split::Test)?;
    let data = TrainingSet::new(&inputs.train)?;
    let (one, sha) = cached_phase_one(&base, &inputs, &data, &cfg.out_dir.join("cache"))?;

    let cells = grid_cells(grid);
    // Table 4's proposed row repeats Table 3's; each distinct variant runs once.
    let mut unique: Vec<VariantAxes> = Vec::new();
    for (_, _, v) in &cells {
        if !unique.contains(v) {
            unique.push(*v);
        }
    }
    let results: Mutex<Vec<Option<Result<(Option<f64>, Option<f64>, Option<f64>, Option<f64>), String>>>> =
        Mutex::new(vec![None; unique.len()]);
    let next = AtomicUsize::new(0);
    let run_variant = |variant: &VariantAxes| {
        let mut run = base.run.clone();
        run.variant = *variant;
        pipeline::run(&run, &inputs.train, Some(&inputs.val), &inputs.bank, Some(one.clone()))
            .and_then(|o| evaluate_params(o.params(), &test, run.threshold))
            .map(|e| (e.frame_report.f_eo, e.frame_report.auc, e.video_report.f_eo, e.video_report.auc))
            .map_err(|err| {
                log::warn!("{} failed: {err}", variant.label());
                err.to_string()
            })
    };
    std::thread::scope(|s| {
        for _ in 0..threads.max(1).min(unique.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(variant) = unique.get(i) else { break };
                let outcome = run_variant(variant);
                results.lock().expect("no worker panicked")[i] = Some(outcome);
            });
        }
    });
    let results = results.into_inner().expect("no worker panicked");
    let cells: Vec<AblationCell> = cells
        .iter()
        .map(|(table, name, variant)| {
            let i = unique.iter().position(|u| u == variant).expect("listed above");
            let outcome = results[i].clone().expect("every variant ran");
            let (f_eo, auc, video_f_eo, video_auc) = outcome.clone().unwrap_or_default();
            AblationCell {
                table: table.to_string(),
                name: name.to_string(),
                variant: variant.label(),
                f_eo,
                auc,
                video_f_eo,
                video_auc,
                phase1_sha256: sha.clone(),
                error: outcome.err(),
            }
        })
        .collect();

    create_dir(&cfg.out_dir)?;
    write_json(&cfg.out_dir.join("ablation.json"), &cells)?;
    let md = cfg.out_dir.join("ablation.md");
    fs::write(&md, ablation_markdown(&cells)).map_err(AppError::io(&md))?;
    Ok(cells)
}

pub fn ablation_markdown(cells: &[AblationCell]) -> String {
    let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".into(), |x| format!("{x:.4}"));
    let mut out = String::from("| Table | Name | Variant | F_EO | AUC | Video F_EO | Video AUC |\n|---|---|---|---|---|---|---|\n");
    for c in cells {
        let tail = match &c.error {
            Some(e) => format!("failed: {e} | | | |"),
            None => format!("{} | {} | {} | {} |", fmt(c.f_eo), fmt(c.auc), fmt(c.video_f_eo), fmt(c.video_auc)),
        };
        out += &format!("| {} | {} | {} | {tail}\n", c.table, c.name, c.variant);
    }
    out
}

/// Writes `x_i`, `x_j`, `LF(x_i)`, `HF(x_i)` and the PF mix of the first frames
/// of the first two fake training videos.
pub fn preview_augment(cfg: &PipelineConfig, out: &Path) -> AppResult<Vec<PathBuf>> {
    let videos = load_train_split(&cfg.data_dir)?;
    let mut fakes = videos.iter().filter(|v| v.label == Label::Fake);
    let (Some(a), Some(b)) = (fakes.next(), fakes.next()) else {
        return Err(AppError::Usage("preview needs two fake training videos".into()));
    };
    let (x_i, x_j) = (&a.frames[0], &b.frames[0]);
    let mask = cfg.run.mask()?;
    let (lf_i, hf_i) = augment::decompose(x_i, &mask)?;
    let lf_j = augment::low_pass(x_j, &mask)?;
    let patch = CutPatch::sample(x_i.height(), x_i.width(), &mut Rng::new(cfg.run.train.seed));
    let mixed = augment::freq_cutmix_decomposed(x_i, &lf_i, &lf_j, &patch)?;
    create_dir(out)?;
    let mut written = Vec::new();
    for (name, img) in [("x_i", x_i), ("x_j", x_j), ("lf_i", &lf_i), ("hf_i", &hf_i), ("mixed", &mixed)] {
        let path = out.join(format!("{name}.pgm"));
        write_pgm(&path, img)?;
        written.push(path);
    }
    Ok(written)
}
