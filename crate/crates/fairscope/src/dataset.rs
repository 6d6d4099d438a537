//! On-disk dataset layout.
//!
//! ```text
//! <root>/gen_config.json
//! <root>/<split>/manifest.json
//! <root>/<split>/frames/<id>.f32
//! <root>/concepts/concepts.json
//! <root>/concepts/<name>/{pos,neg}/<nnnnn>.f32
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use fairscope_core::data::{
    default_concept_bank, generate_concept_bank, generate_split, ConceptImages, ConceptPattern, ConceptSpec, GenConfig,
    Label, Split, TrainVideo, VideoSample,
};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};
use crate::formats::{read_frames, write_frames};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub height: usize,
    pub width: usize,
    pub split: Split,
    pub videos: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub label: u8,
    pub group: usize,
    pub frames: usize,
    /// Relative to the split directory.
    pub file: String,
}

/// The training view of a manifest. It has no `group` field, so whatever a
/// manifest stores there is never parsed.
#[derive(Debug, Deserialize)]
struct TrainManifest {
    version: u32,
    height: usize,
    width: usize,
    videos: Vec<TrainEntry>,
}

#[derive(Debug, Deserialize)]
struct TrainEntry {
    id: String,
    label: u8,
    frames: usize,
    file: String,
}

pub fn split_dir(root: &Path, split: Split) -> PathBuf {
    root.join(split.name())
}

pub fn manifest_path(root: &Path, split: Split) -> PathBuf {
    split_dir(root, split).join("manifest.json")
}

pub fn concept_dir(root: &Path) -> PathBuf {
    root.join("concepts")
}

pub fn write_json(path: &Path, value: &impl Serialize) -> AppResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(AppError::json(path))?;
    text.push('\n');
    fs::write(path, text).map_err(AppError::io(path))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> AppResult<T> {
    let text = fs::read_to_string(path).map_err(AppError::io(path))?;
    serde_json::from_str(&text).map_err(AppError::json(path))
}

fn create_dir(path: &Path) -> AppResult<()> {
    fs::create_dir_all(path).map_err(AppError::io(path))
}

pub fn write_split(root: &Path, split: Split, videos: &[VideoSample], height: usize, width: usize) -> AppResult<()> {
    let dir = split_dir(root, split);
    create_dir(&dir.join("frames"))?;
    let mut entries = Vec::with_capacity(videos.len());
    for v in videos {
        let file = format!("frames/{}.f32", v.id);
        write_frames(&dir.join(&file), &v.frames)?;
        entries.push(ManifestEntry {
            id: v.id.clone(),
            label: v.label.index() as u8,
            group: v.group,
            frames: v.frames.len(),
            file,
        });
    }
    let manifest = Manifest { version: MANIFEST_VERSION, height, width, split, videos: entries };
    write_json(&dir.join("manifest.json"), &manifest)
}

fn label_of(path: &Path, label: u8) -> AppResult<Label> {
    Label::from_index(label as usize).map_err(|e| AppError::corrupt(path, e.to_string()))
}

fn check_version(path: &Path, version: u32) -> AppResult<()> {
    if version != MANIFEST_VERSION {
        return Err(AppError::corrupt(path, format!("manifest version {version}, expected {MANIFEST_VERSION}")));
    }
    Ok(())
}

/// Loads a split with its group attributes, for evaluation only.
pub fn load_eval_split(root: &Path, split: Split) -> AppResult<Vec<VideoSample>> {
    let path = manifest_path(root, split);
    let manifest: Manifest = read_json(&path)?;
    check_version(&path, manifest.version)?;
    let dir = split_dir(root, split);
    manifest
        .videos
        .iter()
        .map(|e| {
            let frames = read_frames(&dir.join(&e.file), e.frames, manifest.height, manifest.width)?;
            let video = VideoSample { id: e.id.clone(), frames, label: label_of(&path, e.label)?, group: e.group, seed: 0 };
            video.validate().map_err(|err| AppError::corrupt(&path, err.to_string()))?;
            Ok(video)
        })
        .collect()
}

/// Loads the training split without reading any group attribute.
pub fn load_train_split(root: &Path) -> AppResult<Vec<TrainVideo>> {
    let path = manifest_path(root, Split::Train);
    let manifest: TrainManifest = read_json(&path)?;
    check_version(&path, manifest.version)?;
    let dir = split_dir(root, Split::Train);
    manifest
        .videos
        .iter()
        .map(|e| {
            let frames = read_frames(&dir.join(&e.file), e.frames, manifest.height, manifest.width)?;
            if frames.is_empty() {
                return Err(AppError::corrupt(&path, format!("video {} has no frames", e.id)));
            }
            Ok(TrainVideo { id: e.id.clone(), frames, label: label_of(&path, e.label)? })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptEntry {
    pub name: String,
    pub pattern: ConceptPattern,
    #[serde(default)]
    pub group: Option<usize>,
    pub pos_dir: String,
    pub neg_dir: String,
    pub count: usize,
    pub height: usize,
    pub width: usize,
}

fn image_file(index: usize) -> String {
    format!("{index:05}.f32")
}

pub fn write_concept_bank(root: &Path, bank: &[ConceptImages]) -> AppResult<()> {
    let dir = concept_dir(root);
    let mut entries = Vec::with_capacity(bank.len());
    for set in bank {
        let (pos_dir, neg_dir) = (format!("{}/pos", set.spec.name), format!("{}/neg", set.spec.name));
        for (sub, images) in [(&pos_dir, &set.positives), (&neg_dir, &set.negatives)] {
            create_dir(&dir.join(sub))?;
            for (i, img) in images.iter().enumerate() {
                write_frames(&dir.join(sub).join(image_file(i)), std::slice::from_ref(img))?;
            }
        }
        let first = &set.positives[0];
        entries.push(ConceptEntry {
            name: set.spec.name.clone(),
            pattern: set.spec.pattern,
            group: set.spec.group,
            pos_dir,
            neg_dir,
            count: set.positives.len(),
            height: first.height(),
            width: first.width(),
        });
    }
    write_json(&dir.join("concepts.json"), &entries)
}

pub fn load_concept_bank(dir: &Path) -> AppResult<Vec<ConceptImages>> {
    let index = dir.join("concepts.json");
    let entries: Vec<ConceptEntry> = read_json(&index)?;
    entries
        .into_iter()
        .map(|e| {
            let load = |sub: &str| -> AppResult<Vec<_>> {
                (0..e.count)
                    .map(|i| Ok(read_frames(&dir.join(sub).join(image_file(i)), 1, e.height, e.width)?.remove(0)))
                    .collect()
            };
            Ok(ConceptImages {
                spec: ConceptSpec { name: e.name.clone(), pattern: e.pattern, group: e.group },
                positives: load(&e.pos_dir)?,
                negatives: load(&e.neg_dir)?,
            })
        })
        .collect()
}

/// Writes all three splits, the concept bank and the generator config.
pub fn generate_dataset(root: &Path, cfg: &GenConfig) -> AppResult<()> {
    cfg.validate()?;
    create_dir(root)?;
    for split in Split::ALL {
        let videos = generate_split(cfg, split)?;
        write_split(root, split, &videos, cfg.height, cfg.width)?;
    }
    let bank = generate_concept_bank(&default_concept_bank(cfg.groups), cfg)?;
    write_concept_bank(root, &bank)?;
    write_json(&root.join("gen_config.json"), cfg)
}
