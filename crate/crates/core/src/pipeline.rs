//! The four training phases and evaluation, with the ablation axes as
//! configuration.
//!
//! Phase 1 trains a plain detector. Phase 2 clusters its training features
//! per class. Phase 3 fits concept vectors. Phase 4 retrains with
//! per-batch partner sampling and pair augmentation.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::augment::{self, CutPatch, FreqMask, MaskLayout};
use crate::clustering::{build_cluster_inputs, environment_lookup, form_environments, ClusterInput, ClusterModel, Standardizer};
use crate::concepts::{
    bias_aware_weights, cluster_sizes, concept_presence, css, fit_concept_vector, head_gradient, mean_projections,
    proportional_weights, sample_partner, ConceptVector, CssRecord, GradientMatrix, SamplingMode, SamplingWeights,
};
use crate::data::{ConceptImages, Label, TrainVideo, VideoSample};
use crate::fairness::{group_report, video_records, FairnessReport, PredictionRecord};
use crate::model::{features, forward, forward_values, train, BatchAugment, LabeledFrames, MlpParams, NoAugment, TrainConfig, CLASSES};
use crate::numerics::{Matrix, PcaModel, Tensor2D};
use crate::{Error, Result, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Phase 1 only.
    Vanilla,
    /// All phases with PC clustering, concepts, BS sampling and PF augmentation.
    #[default]
    Proposed,
    /// All phases with the axes in [`VariantAxes`].
    Variant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Augmenter {
    #[serde(rename = "MU")]
    MixUp,
    #[serde(rename = "CM")]
    CutMix,
    #[serde(rename = "FM")]
    FreqMasking,
    #[default]
    #[serde(rename = "PF")]
    FreqCutMix,
}

impl Augmenter {
    pub const ALL: [Augmenter; 4] = [Augmenter::MixUp, Augmenter::CutMix, Augmenter::FreqMasking, Augmenter::FreqCutMix];

    pub fn code(self) -> &'static str {
        match self {
            Augmenter::MixUp => "MU",
            Augmenter::CutMix => "CM",
            Augmenter::FreqMasking => "FM",
            Augmenter::FreqCutMix => "PF",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct VariantAxes {
    pub clustering: ClusterInput,
    pub concepts: bool,
    pub sampling: SamplingMode,
    pub augment: Augmenter,
}

impl Default for VariantAxes {
    fn default() -> Self {
        VariantAxes::PROPOSED
    }
}

impl VariantAxes {
    pub const PROPOSED: VariantAxes = VariantAxes {
        clustering: ClusterInput::Temporal,
        concepts: true,
        sampling: SamplingMode::BiasAware,
        augment: Augmenter::FreqCutMix,
    };

    pub fn validate(&self) -> Result<()> {
        if !self.concepts && self.sampling == SamplingMode::BiasAware {
            return Err(Error::Config("bias-aware sampling needs concepts; use PS when concepts are off".into()));
        }
        Ok(())
    }

    /// Short label such as `PC+BS+PF` or `NC+PS+MU`.
    pub fn label(&self) -> String {
        let c = match self.clustering {
            ClusterInput::Naive => "NC",
            ClusterInput::Temporal => "PC",
        };
        let s = match self.sampling {
            SamplingMode::Proportional => "PS",
            SamplingMode::BiasAware => "BS",
        };
        format!("{c}+{s}+{}", self.augment.code())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub mode: Mode,
    pub variant: VariantAxes,
    /// Clusters per class.
    pub k: usize,
    pub alpha: f64,
    pub mask_layout: MaskLayout,
    pub pca_dim: usize,
    /// Concepts taken from the bank, in bank order.
    pub concepts: usize,
    /// Phase-4 epochs; `None` reuses `train.epochs`.
    pub retrain_epochs: Option<usize>,
    /// Restart phase 4 from a fresh initialization instead of the phase-1 weights.
    pub retrain_fresh: bool,
    /// `train.seed` is the root of every stream in the run.
    pub train: TrainConfig,
    pub threshold: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::Proposed,
            variant: VariantAxes::PROPOSED,
            k: 4,
            alpha: augment::DEFAULT_ALPHA,
            mask_layout: MaskLayout::default(),
            pca_dim: 8,
            concepts: 8,
            retrain_epochs: None,
            retrain_fresh: false,
            train: TrainConfig::default(),
            threshold: crate::fairness::DEFAULT_THRESHOLD,
        }
    }
}

impl RunConfig {
    pub fn axes(&self) -> VariantAxes {
        match self.mode {
            Mode::Variant => self.variant,
            _ => VariantAxes::PROPOSED,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.axes().validate()?;
        if self.k == 0 {
            return Err(Error::Config("k must be positive".into()));
        }
        if self.pca_dim == 0 {
            return Err(Error::Config("PCA dimension must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        Ok(())
    }

    pub fn mask(&self) -> Result<FreqMask> {
        FreqMask::new(self.alpha, self.mask_layout)
    }

    pub fn needs_concepts(&self) -> bool {
        self.mode != Mode::Vanilla && self.axes().concepts
    }

    fn stream(&self, index: u64) -> u64 {
        Rng::child_seed(self.train.seed, index)
    }
}

/// Training frames in video-major order with the offsets of each video.
pub struct TrainingSet<'a> {
    pub frames: LabeledFrames<'a>,
    /// `video_start[v]..video_start[v + 1]` are video `v`'s frames.
    pub video_start: Vec<usize>,
    /// Owning video of each frame.
    pub video_of: Vec<usize>,
}

impl<'a> TrainingSet<'a> {
    pub fn new(videos: &'a [TrainVideo]) -> Result<Self> {
        let first = videos.first().ok_or_else(|| Error::invalid("no training videos"))?;
        let extent = first.frames.first().ok_or_else(|| Error::invalid("training video without frames"))?;
        let mut video_start = vec![0];
        let mut video_of = Vec::new();
        for (v, video) in videos.iter().enumerate() {
            if video.frames.iter().any(|f| !f.same_extent(extent)) {
                return Err(Error::invalid(format!("video {} has a different frame extent", video.id)));
            }
            video_of.extend(core::iter::repeat(v).take(video.frames.len()));
            video_start.push(video_of.len());
        }
        let frames = LabeledFrames::from_videos(videos, |v| (v.frames.as_slice(), v.label));
        Ok(TrainingSet { frames, video_start, video_of })
    }

    pub fn input_dim(&self) -> usize {
        self.frames.frames[0].len()
    }

    pub fn videos(&self) -> usize {
        self.video_start.len() - 1
    }
}

pub fn validation_frames(videos: &[VideoSample]) -> LabeledFrames<'_> {
    LabeledFrames::from_videos(videos, |v| (v.frames.as_slice(), v.label))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOne {
    pub params: MlpParams,
    pub loss_history: Vec<f64>,
    pub validation_history: Vec<f64>,
    pub stopped_early: bool,
}

fn fresh_params(cfg: &RunConfig, input: usize, stream: u64) -> MlpParams {
    MlpParams::init(input, cfg.train.hidden, cfg.train.feature_dim, CLASSES, &mut Rng::new(cfg.stream(stream)))
}

fn phase_train_config(cfg: &RunConfig, stream: u64, epochs: usize) -> TrainConfig {
    TrainConfig { seed: cfg.stream(stream), epochs, ..cfg.train.clone() }
}

/// Phase 1: plain training. Depends only on `cfg.train` and the data, so the
/// result can be shared by every mode with the same training config.
pub fn phase_one(cfg: &RunConfig, data: &TrainingSet<'_>, validation: Option<&LabeledFrames<'_>>) -> Result<PhaseOne> {
    cfg.train.validate()?;
    let init = fresh_params(cfg, data.input_dim(), 0);
    let out = train(init, &data.frames, &phase_train_config(cfg, 1, cfg.train.epochs), &mut NoAugment, validation)?;
    Ok(PhaseOne {
        params: out.params,
        loss_history: out.loss_history,
        validation_history: out.validation_history,
        stopped_early: out.stopped_early,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTwo {
    /// Feature `h` of every training frame under the phase-1 model.
    #[serde(skip)]
    pub features: Vec<Vec<f64>>,
    pub pca: PcaModel,
    pub standardizer: Standardizer,
    pub clusters: ClusterModel,
    /// Mean temporal difference over real and fake frames (0 under NC).
    pub mean_temporal_difference: [f64; 2],
}

/// Phase 2: features, PCA, standardization, temporal differences and
/// per-class k-means.
pub fn phase_two(cfg: &RunConfig, params: &MlpParams, data: &TrainingSet<'_>) -> Result<PhaseTwo> {
    let feats = data.frames.frames.iter().map(|f| features(params, f)).collect::<Result<Vec<_>>>()?;
    let components = cfg.pca_dim.min(cfg.train.feature_dim);
    let pca = PcaModel::fit(&Matrix::from_rows(&feats)?, components)?;
    if pca.is_rank_deficient() {
        log::warn!("training features span fewer than {components} directions");
    }
    let reduced_flat = feats.iter().map(|h| pca.transform(h)).collect::<Result<Vec<_>>>()?;
    let standardizer = Standardizer::fit(&reduced_flat)?;
    let reduced: Vec<Vec<Vec<f64>>> = data
        .video_start
        .windows(2)
        .map(|w| reduced_flat[w[0]..w[1]].to_vec())
        .collect();
    let mode = cfg.axes().clustering;
    let vectors = build_cluster_inputs(&reduced, &standardizer, mode)?;
    let clusters = ClusterModel::fit(&vectors, &data.frames.labels, cfg.k, mode, cfg.stream(2))?;

    let mut td = [0.0; 2];
    let mut counts = [0usize; 2];
    if mode == ClusterInput::Temporal {
        for (z, y) in vectors.iter().zip(&data.frames.labels) {
            td[y.index()] += z[z.len() - 1];
            counts[y.index()] += 1;
        }
    }
    let mean_temporal_difference = [td[0] / counts[0].max(1) as f64, td[1] / counts[1].max(1) as f64];
    Ok(PhaseTwo { features: feats, pca, standardizer, clusters, mean_temporal_difference })
}

/// Phase 3: one probe per concept in the model's feature space. Concept `l`
/// draws its holdout split from child stream `l` of the phase's stream.
pub fn phase_three(cfg: &RunConfig, params: &MlpParams, bank: &[ConceptImages]) -> Result<Vec<ConceptVector>> {
    if bank.len() < cfg.concepts {
        return Err(Error::Config(format!("concept bank holds {} concepts, {} requested", bank.len(), cfg.concepts)));
    }
    let root = Rng::new(cfg.stream(3));
    bank[..cfg.concepts]
        .iter()
        .enumerate()
        .map(|(l, set)| {
            let embed = |imgs: &[Tensor2D]| imgs.iter().map(|x| features(params, x)).collect::<Result<Vec<_>>>();
            fit_concept_vector(&set.spec.name, &embed(&set.positives)?, &embed(&set.negatives)?, root.split(l as u64).seed())
        })
        .collect()
}

/// Phase-4 batch hook: environments, CSS, weights, partners and augmentation.
pub struct DebiasAugment<'a> {
    data: &'a TrainingSet<'a>,
    clusters: &'a ClusterModel,
    concepts: &'a [ConceptVector],
    presence: Vec<Vec<Vec<usize>>>,
    sampling: SamplingMode,
    augmenter: Augmenter,
    /// Low-pass part of every training frame, for PF.
    low: Vec<Tensor2D>,
    last_css: Option<Vec<CssRecord>>,
    pub batches: usize,
    pub reused_css: usize,
    /// Partner draws per `[class][cluster]`.
    pub partner_counts: Vec<Vec<usize>>,
}

impl<'a> DebiasAugment<'a> {
    pub fn new(
        cfg: &RunConfig,
        data: &'a TrainingSet<'a>,
        two: &'a PhaseTwo,
        concepts: &'a [ConceptVector],
    ) -> Result<Self> {
        let axes = cfg.axes();
        let clusters = &two.clusters;
        let presence = if axes.concepts {
            let global = mean_projections(two.features.iter().map(|h| h.as_slice()), concepts);
            clusters
                .members
                .iter()
                .map(|class| {
                    class
                        .iter()
                        .map(|m| concept_presence(m.iter().map(|&i| two.features[i].as_slice()), concepts, &global))
                        .collect()
                })
                .collect()
        } else {
            vec![vec![Vec::new(); cfg.k]; CLASSES]
        };
        let low = if axes.augment == Augmenter::FreqCutMix {
            let mask = cfg.mask()?;
            data.frames.frames.iter().map(|f| augment::low_pass(f, &mask)).collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        Ok(DebiasAugment {
            data,
            clusters,
            concepts,
            presence,
            sampling: axes.sampling,
            augmenter: axes.augment,
            low,
            last_css: None,
            batches: 0,
            reused_css: 0,
            partner_counts: vec![vec![0; cfg.k]; CLASSES],
        })
    }

    pub fn presence(&self) -> &[Vec<Vec<usize>>] {
        &self.presence
    }

    pub fn last_css(&self) -> Option<&[CssRecord]> {
        self.last_css.as_deref()
    }

    fn weights(&mut self, params: &MlpParams, batch: &[usize], rng: &mut Rng) -> Result<SamplingWeights> {
        let sizes = cluster_sizes(self.clusters);
        if self.sampling == SamplingMode::Proportional {
            return Ok(proportional_weights(&sizes));
        }
        let envs = form_environments(self.clusters.k, rng);
        let lookup = environment_lookup(&envs);
        let traces = batch
            .iter()
            .map(|&i| forward(params, self.data.frames.frames[i]))
            .collect::<Result<Vec<_>>>()?;
        let mut members: Vec<Vec<(&[f64], &[f64], Label)>> = vec![Vec::new(); envs.len()];
        for (t, &i) in traces.iter().zip(batch) {
            let slot = self.clusters.slots[i];
            members[lookup[slot.class][slot.cluster]].push((&t.feature, &t.logits, self.data.frames.labels[i]));
        }
        let matrices = members
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.is_empty())
            .map(|(k, m)| head_gradient(k, m))
            .collect::<Result<Vec<GradientMatrix>>>()?;
        if matrices.len() >= 2 {
            self.last_css = Some(css(self.concepts, &matrices)?);
        } else {
            self.reused_css += 1;
        }
        let records = match &self.last_css {
            Some(r) => r.clone(),
            // no scores yet: every concept probability is zero and sampling falls back to uniform
            None => self
                .concepts
                .iter()
                .map(|c| CssRecord { concept: c.name.clone(), score: 0.0, class: 0, masked: vec![0.0; CLASSES], projections: Vec::new() })
                .collect(),
        };
        Ok(bias_aware_weights(&sizes, &records, &self.presence))
    }
}

impl BatchAugment for DebiasAugment<'_> {
    fn augment(&mut self, params: &MlpParams, batch: &[usize], rng: &mut Rng) -> Result<Option<Vec<Tensor2D>>> {
        self.batches += 1;
        let weights = self.weights(params, batch, rng)?;
        let frames = &self.data.frames;
        let mut out = Vec::with_capacity(batch.len());
        for &i in batch {
            let x_i = frames.frames[i];
            let y = frames.labels[i];
            if self.augmenter == Augmenter::FreqMasking {
                out.push(augment::freq_mask(x_i, rng)?);
                continue;
            }
            let j = sample_partner(i, y, &weights, self.clusters, rng)?;
            self.partner_counts[y.index()][self.clusters.slots[j].cluster] += 1;
            let x_j = frames.frames[j];
            out.push(match self.augmenter {
                Augmenter::MixUp => augment::mixup(x_i, x_j, rng)?,
                Augmenter::CutMix => augment::cutmix(x_i, x_j, rng)?,
                Augmenter::FreqCutMix => {
                    let patch = CutPatch::sample(x_i.height(), x_i.width(), rng);
                    augment::freq_cutmix_decomposed(x_i, &self.low[i], &self.low[j], &patch)?
                }
                Augmenter::FreqMasking => unreachable!(),
            });
        }
        Ok(Some(out))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseFour {
    pub params: MlpParams,
    pub loss_history: Vec<f64>,
    pub validation_history: Vec<f64>,
    pub stopped_early: bool,
    pub batches: usize,
    pub reused_css: usize,
    pub partner_counts: Vec<Vec<usize>>,
    pub presence: Vec<Vec<Vec<usize>>>,
}

/// Phase 4: retraining with the debiasing hook.
pub fn phase_four(
    cfg: &RunConfig,
    start: &MlpParams,
    data: &TrainingSet<'_>,
    two: &PhaseTwo,
    concepts: &[ConceptVector],
    validation: Option<&LabeledFrames<'_>>,
) -> Result<PhaseFour> {
    cfg.validate()?;
    if cfg.axes().concepts && concepts.is_empty() {
        return Err(Error::Config("concept-driven sampling without concept vectors".into()));
    }
    let init = if cfg.retrain_fresh { fresh_params(cfg, data.input_dim(), 5) } else { start.clone() };
    let mut hook = DebiasAugment::new(cfg, data, two, concepts)?;
    let epochs = cfg.retrain_epochs.unwrap_or(cfg.train.epochs);
    let out = train(init, &data.frames, &phase_train_config(cfg, 4, epochs), &mut hook, validation)?;
    Ok(PhaseFour {
        params: out.params,
        loss_history: out.loss_history,
        validation_history: out.validation_history,
        stopped_early: out.stopped_early,
        batches: hook.batches,
        reused_css: hook.reused_css,
        partner_counts: hook.partner_counts,
        presence: hook.presence,
    })
}

/// CSS of the given model over the whole training set under one seeded
/// environment draw; the explanation payload after training.
pub fn training_css(cfg: &RunConfig, params: &MlpParams, data: &TrainingSet<'_>, clusters: &ClusterModel, concepts: &[ConceptVector]) -> Result<Vec<CssRecord>> {
    let envs = form_environments(clusters.k, &mut Rng::new(cfg.stream(6)));
    let lookup = environment_lookup(&envs);
    let traces = data.frames.frames.iter().map(|f| forward(params, f)).collect::<Result<Vec<_>>>()?;
    let mut members: Vec<Vec<(&[f64], &[f64], Label)>> = vec![Vec::new(); envs.len()];
    for (i, t) in traces.iter().enumerate() {
        let slot = clusters.slots[i];
        members[lookup[slot.class][slot.cluster]].push((&t.feature, &t.logits, data.frames.labels[i]));
    }
    let matrices = members
        .iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(k, m)| head_gradient(k, m))
        .collect::<Result<Vec<_>>>()?;
    css(concepts, &matrices)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub phase_one: PhaseOne,
    pub phase_two: Option<PhaseTwo>,
    pub concepts: Vec<ConceptVector>,
    pub phase_four: Option<PhaseFour>,
    pub css: Vec<CssRecord>,
}

impl RunOutcome {
    pub fn params(&self) -> &MlpParams {
        self.phase_four.as_ref().map_or(&self.phase_one.params, |p| &p.params)
    }
}

/// All phases the mode calls for, starting from an existing phase-1 result
/// when one is given.
pub fn run(
    cfg: &RunConfig,
    train_videos: &[TrainVideo],
    validation: Option<&[VideoSample]>,
    bank: &[ConceptImages],
    cached_phase_one: Option<PhaseOne>,
) -> Result<RunOutcome> {
    cfg.validate()?;
    let data = TrainingSet::new(train_videos)?;
    let val = validation.map(validation_frames);
    let one = match cached_phase_one {
        Some(p) => p,
        None => phase_one(cfg, &data, val.as_ref())?,
    };
    if cfg.mode == Mode::Vanilla {
        return Ok(RunOutcome { phase_one: one, phase_two: None, concepts: Vec::new(), phase_four: None, css: Vec::new() });
    }
    let two = phase_two(cfg, &one.params, &data)?;
    let concepts = if cfg.needs_concepts() { phase_three(cfg, &one.params, bank)? } else { Vec::new() };
    let four = phase_four(cfg, &one.params, &data, &two, &concepts, val.as_ref())?;
    let css = if concepts.is_empty() { Vec::new() } else { training_css(cfg, &four.params, &data, &two.clusters, &concepts)? };
    Ok(RunOutcome { phase_one: one, phase_two: Some(two), concepts, phase_four: Some(four), css })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub frames: Vec<PredictionRecord>,
    /// Index into the evaluated videos for every frame record.
    pub video_of: Vec<usize>,
    pub videos: Vec<PredictionRecord>,
    pub frame_report: FairnessReport,
    pub video_report: FairnessReport,
}

/// Frame- and video-level reports. Videos are scored by their mean frame score.
pub fn evaluate(params: &MlpParams, videos: &[VideoSample], threshold: f64) -> Result<Evaluation> {
    let mut frames = Vec::new();
    let mut video_of = Vec::new();
    for (v, video) in videos.iter().enumerate() {
        for f in &video.frames {
            if f.len() != params.input {
                return Err(Error::invalid(format!(
                    "video {}: frame has {} pixels, model expects {}",
                    video.id,
                    f.len(),
                    params.input
                )));
            }
            let score = forward_values(params, f.values())?.fake_score();
            frames.push(PredictionRecord::new(score, video.label, video.group, threshold));
            video_of.push(v);
        }
    }
    let video_level = video_records(&frames, &video_of)?;
    Ok(Evaluation {
        frame_report: group_report(&frames)?,
        video_report: group_report(&video_level)?,
        frames,
        video_of,
        videos: video_level,
    })
}
