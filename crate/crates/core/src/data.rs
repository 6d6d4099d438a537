//! Synthetic video frames with a planted high-frequency forgery artifact and a
//! low-frequency group signature, plus synthetic concept-bank images.
//!
//! Every frame is `background + blob + group signature (+ artifact) + noise`,
//! clipped to `[0, 1]`:
//!
//! * the group signature is a planar brightness gradient whose direction is
//!   `2 pi a / G`, so it lives on the two spectral axes at low frequency;
//! * the artifact (fake videos only) is a cosine grating at signed frequency
//!   `(f_u, f_v)` with both `|f_u|, |f_v|` inside the configured band, and its
//!   phase is redrawn around a per-video phase on every frame;
//! * real videos only drift: the blob moves a fraction of a pixel per frame.
//!
//! Group membership follows quotas rather than independent draws: of the fake
//! videos in a split, `round(b * n_fake)` belong to group 0 and the rest are
//! dealt round-robin over the remaining groups; real videos use `1 - b` for
//! group 0. With two groups the real and fake group mixes are mirror images.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::augment::{signed_frequency, FreqMask};
use crate::numerics::Tensor2D;
use crate::{Error, Result, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Real = 0,
    Fake = 1,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Real, Label::Fake];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Label> {
        match i {
            0 => Ok(Label::Real),
            1 => Ok(Label::Fake),
            _ => Err(Error::invalid(format!("label {i} is neither 0 (real) nor 1 (fake)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    fn stream(self) -> u64 {
        match self {
            Split::Train => 0,
            Split::Val => 1,
            Split::Test => 2,
        }
    }
}

/// A video with its held-out group attribute. Only evaluation splits are
/// handled in this form; training code receives [`TrainVideo`].
#[derive(Debug, Clone, PartialEq)]
pub struct VideoSample {
    pub id: String,
    pub frames: Vec<Tensor2D>,
    pub label: Label,
    pub group: usize,
    pub seed: u64,
}

/// A training video. There is deliberately no group field.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainVideo {
    pub id: String,
    pub frames: Vec<Tensor2D>,
    pub label: Label,
}

impl VideoSample {
    pub fn validate(&self) -> Result<()> {
        if self.frames.len() < 2 {
            return Err(Error::invalid(format!("video {} has fewer than two frames", self.id)));
        }
        let first = &self.frames[0];
        if self.frames.iter().any(|f| !f.same_extent(first)) {
            return Err(Error::invalid(format!("video {} mixes frame extents", self.id)));
        }
        Ok(())
    }

    pub fn into_train(self) -> TrainVideo {
        TrainVideo { id: self.id, frames: self.frames, label: self.label }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub height: usize,
    pub width: usize,
    pub train_videos: usize,
    pub val_videos: usize,
    pub test_videos: usize,
    pub frames: usize,
    pub groups: usize,
    pub fake_fraction: f64,
    /// Fraction of fake videos drawn from group 0; 0.5 is balanced.
    pub bias: f64,
    pub artifact_amplitude: f64,
    /// Inclusive range of `|signed frequency|` for the artifact grating on both
    /// axes. `None` picks `[first excluded + 2, n/2 - 1]` for the default mask.
    pub artifact_band: Option<[usize; 2]>,
    pub signature_amplitude: f64,
    /// Standard deviation of the per-frame artifact phase, radians.
    pub temporal_jitter: f64,
    /// Standard deviation of the per-frame blob velocity, pixels.
    pub drift: f64,
    pub noise: f64,
    pub concept_images: usize,
    pub concept_amplitude: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            height: 32,
            width: 32,
            train_videos: 400,
            val_videos: 100,
            test_videos: 200,
            frames: 8,
            groups: 2,
            fake_fraction: 0.5,
            bias: 0.8,
            artifact_amplitude: 0.05,
            artifact_band: None,
            signature_amplitude: 0.3,
            temporal_jitter: 0.6,
            drift: 0.3,
            noise: 0.02,
            concept_images: 200,
            concept_amplitude: 0.15,
            seed: 42,
        }
    }
}

impl GenConfig {
    pub fn videos(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train_videos,
            Split::Val => self.val_videos,
            Split::Test => self.test_videos,
        }
    }

    /// The artifact band after defaults are applied, as `[min, max]` of `|f|`.
    pub fn resolved_band(&self) -> [usize; 2] {
        self.artifact_band.unwrap_or_else(|| {
            let n = self.height.min(self.width);
            let lo = FreqMask::default().first_excluded_frequency(n) + 2;
            [lo, (n / 2).saturating_sub(1)]
        })
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: String| Err(Error::Config(m));
        if self.height < 4 || self.width < 4 {
            return cfg_err(format!("frames of {}x{} are too small", self.height, self.width));
        }
        for split in Split::ALL {
            if self.videos(split) == 0 {
                return cfg_err(format!("{} split has zero videos", split.name()));
            }
        }
        if self.frames < 2 {
            return cfg_err("videos need at least two frames".to_string());
        }
        if !(1..=8).contains(&self.groups) {
            return cfg_err(format!("{} groups; supported range is 1..=8", self.groups));
        }
        for (name, v) in [("fake_fraction", self.fake_fraction), ("bias", self.bias)] {
            if !(0.0..=1.0).contains(&v) {
                return cfg_err(format!("{name} = {v} is outside [0, 1]"));
            }
        }
        for (name, v) in [
            ("artifact_amplitude", self.artifact_amplitude),
            ("signature_amplitude", self.signature_amplitude),
            ("temporal_jitter", self.temporal_jitter),
            ("drift", self.drift),
            ("noise", self.noise),
            ("concept_amplitude", self.concept_amplitude),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return cfg_err(format!("{name} = {v} must be finite and non-negative"));
            }
        }
        if self.concept_images < 2 {
            return cfg_err("concept sets need at least two images per side".to_string());
        }
        let [lo, hi] = self.resolved_band();
        let mask = FreqMask::default();
        for n in [self.height, self.width] {
            let guard = mask.first_excluded_frequency(n) + 2;
            if lo < guard {
                return cfg_err(format!(
                    "artifact band starts at |f| = {lo}, inside or next to the default low-frequency mask (needs >= {guard})"
                ));
            }
            if hi < lo || 2 * hi >= n {
                return cfg_err(format!("artifact band [{lo}, {hi}] does not fit below Nyquist of {n}"));
            }
        }
        Ok(())
    }

    /// Whether spectral bin `(u, v)` lies in the artifact band.
    pub fn in_artifact_band(&self, u: usize, v: usize) -> bool {
        let [lo, hi] = self.resolved_band();
        let fu = signed_frequency(u, self.height).unsigned_abs() as usize;
        let fv = signed_frequency(v, self.width).unsigned_abs() as usize;
        (lo..=hi).contains(&fu) && (lo..=hi).contains(&fv)
    }
}

/// Splits `n` items between group 0 (`round(share0 * n)` of them) and the
/// other groups in round-robin order.
fn group_quota(n: usize, share0: f64, groups: usize) -> Vec<usize> {
    if groups == 1 {
        return alloc::vec![0; n];
    }
    let zeros = libm::round(share0 * n as f64) as usize;
    let mut out = alloc::vec![0; zeros.min(n)];
    out.extend((0..n.saturating_sub(zeros)).map(|i| 1 + i % (groups - 1)));
    out
}

fn gaussian_blob(r: f64, c: f64, cy: f64, cx: f64, sigma: f64) -> f64 {
    let d2 = (r - cy) * (r - cy) + (c - cx) * (c - cx);
    libm::exp(-d2 / (2.0 * sigma * sigma))
}

/// Planar gradient in `[-0.5, 0.5]`-ish units along direction `angle`.
fn planar_gradient(r: usize, c: usize, h: usize, w: usize, angle: f64) -> f64 {
    let y = r as f64 / (h - 1) as f64 - 0.5;
    let x = c as f64 / (w - 1) as f64 - 0.5;
    libm::cos(angle) * y + libm::sin(angle) * x
}

pub fn group_angle(group: usize, groups: usize) -> f64 {
    TAU * group as f64 / groups.max(1) as f64
}

fn generate_video(cfg: &GenConfig, id: String, label: Label, group: usize, seed: u64) -> Result<VideoSample> {
    let (h, w) = (cfg.height, cfg.width);
    let mut rng = Rng::new(seed);
    let background = rng.uniform_range(0.35, 0.55);
    let mut cy = rng.uniform_range(0.3, 0.7) * h as f64;
    let mut cx = rng.uniform_range(0.3, 0.7) * w as f64;
    let sigma = rng.uniform_range(0.12, 0.22) * h.min(w) as f64;
    let blob_amp = rng.uniform_range(0.1, 0.25);
    let (vy, vx) = (rng.normal() * cfg.drift, rng.normal() * cfg.drift);
    let angle = group_angle(group, cfg.groups);
    let signature_amp = cfg.signature_amplitude * rng.uniform_range(0.8, 1.2);

    let [lo, hi] = cfg.resolved_band();
    let band_freq = |rng: &mut Rng| {
        let f = (lo + rng.below(hi - lo + 1)) as f64;
        if rng.below(2) == 0 {
            f
        } else {
            -f
        }
    };
    let fu = band_freq(&mut rng);
    let fv = band_freq(&mut rng);
    let artifact_amp = match label {
        Label::Fake => cfg.artifact_amplitude * rng.uniform_range(0.8, 1.2),
        Label::Real => 0.0,
    };

    let mut frames = Vec::with_capacity(cfg.frames);
    for _ in 0..cfg.frames {
        // Upsampling artifacts sit on the pixel grid, so only the jitter moves the phase.
        let phase = cfg.temporal_jitter * rng.normal();
        let frame = Tensor2D::from_fn(h, w, |r, c| {
            let mut v = background
                + blob_amp * gaussian_blob(r as f64, c as f64, cy, cx, sigma)
                + signature_amp * planar_gradient(r, c, h, w, angle);
            if artifact_amp > 0.0 {
                v += artifact_amp
                    * libm::cos(TAU * (fu * r as f64 / h as f64 + fv * c as f64 / w as f64) + phase);
            }
            v
        })?;
        let frame = Tensor2D::new(
            h,
            w,
            frame
                .values()
                .iter()
                .map(|&v| (v + cfg.noise * rng.normal()).clamp(0.0, 1.0))
                .collect(),
        )?;
        frames.push(frame);
        cy += vy;
        cx += vx;
    }
    Ok(VideoSample { id, frames, label, group, seed })
}

/// Generates one split. Deterministic in `(cfg, split)`.
pub fn generate_split(cfg: &GenConfig, split: Split) -> Result<Vec<VideoSample>> {
    cfg.validate()?;
    let n = cfg.videos(split);
    let n_fake = libm::round(cfg.fake_fraction * n as f64) as usize;
    let mut slots: Vec<(Label, usize)> = group_quota(n_fake, cfg.bias, cfg.groups)
        .into_iter()
        .map(|g| (Label::Fake, g))
        .collect();
    slots.extend(
        group_quota(n - n_fake, 1.0 - cfg.bias, cfg.groups)
            .into_iter()
            .map(|g| (Label::Real, g)),
    );
    let split_rng = Rng::new(cfg.seed).split(split.stream());
    let mut order_rng = split_rng.split(u64::MAX);
    order_rng.shuffle(&mut slots);
    slots
        .into_iter()
        .enumerate()
        .map(|(i, (label, group))| {
            let seed = split_rng.split(i as u64).seed();
            generate_video(cfg, format!("{}-{:05}", split.name(), i), label, group, seed)
        })
        .collect()
}

/// Pattern family a concept is rendered with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConceptPattern {
    /// Planar brightness gradient along `angle` (radians).
    Gradient { angle: f64 },
    BrightBlob,
    DarkSpot,
    HorizontalStripes,
    VerticalStripes,
    Ring,
    FineChecker,
    Vignette,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptSpec {
    pub name: String,
    pub pattern: ConceptPattern,
    /// Group whose signature this concept resembles, if any.
    pub group: Option<usize>,
}

/// The default eight-concept bank. The two gradient concepts mirror the
/// signatures of groups 0 and 1.
pub fn default_concept_bank(groups: usize) -> Vec<ConceptSpec> {
    let spec = |name: &str, pattern, group| ConceptSpec { name: name.to_string(), pattern, group };
    let mut bank = alloc::vec![spec(
        "gradient_group0",
        ConceptPattern::Gradient { angle: group_angle(0, groups) },
        Some(0)
    )];
    let second = if groups >= 2 { group_angle(1, groups) } else { PI };
    bank.push(spec(
        "gradient_group1",
        ConceptPattern::Gradient { angle: second },
        if groups >= 2 { Some(1) } else { None },
    ));
    bank.extend([
        spec("bright_blob", ConceptPattern::BrightBlob, None),
        spec("dark_spot", ConceptPattern::DarkSpot, None),
        spec("horizontal_stripes", ConceptPattern::HorizontalStripes, None),
        spec("vertical_stripes", ConceptPattern::VerticalStripes, None),
        spec("ring", ConceptPattern::Ring, None),
        spec("fine_checker", ConceptPattern::FineChecker, None),
    ]);
    bank
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConceptImages {
    pub spec: ConceptSpec,
    pub positives: Vec<Tensor2D>,
    pub negatives: Vec<Tensor2D>,
}

fn render_pattern(pattern: ConceptPattern, h: usize, w: usize, rng: &mut Rng) -> Result<Tensor2D> {
    let (hf, wf) = (h as f64, w as f64);
    let phase = rng.uniform_range(0.0, TAU);
    let cy = rng.uniform_range(0.25, 0.75) * hf;
    let cx = rng.uniform_range(0.25, 0.75) * wf;
    let scale = h.min(w) as f64;
    Tensor2D::from_fn(h, w, |r, c| {
        let (y, x) = (r as f64, c as f64);
        match pattern {
            ConceptPattern::Gradient { angle } => 2.0 * planar_gradient(r, c, h, w, angle),
            ConceptPattern::BrightBlob => gaussian_blob(y, x, cy, cx, 0.08 * scale),
            ConceptPattern::DarkSpot => -gaussian_blob(y, x, cy, cx, 0.08 * scale),
            ConceptPattern::HorizontalStripes => libm::cos(TAU * 3.0 * y / hf + phase),
            ConceptPattern::VerticalStripes => libm::cos(TAU * 3.0 * x / wf + phase),
            ConceptPattern::Ring => {
                let d = libm::sqrt((y - cy) * (y - cy) + (x - cx) * (x - cx));
                libm::exp(-(d - 0.2 * scale) * (d - 0.2 * scale) / (2.0 * 1.5 * 1.5))
            }
            ConceptPattern::FineChecker => {
                libm::cos(TAU * 8.0 * y / hf + phase) * libm::cos(TAU * 8.0 * x / wf)
            }
            ConceptPattern::Vignette => {
                let d2 = ((y - hf / 2.0) / hf) * ((y - hf / 2.0) / hf)
                    + ((x - wf / 2.0) / wf) * ((x - wf / 2.0) / wf);
                -4.0 * d2
            }
        }
    })
}

fn concept_background(h: usize, w: usize, noise: f64, rng: &mut Rng) -> Result<Tensor2D> {
    let level = rng.uniform_range(0.3, 0.6);
    let cy = rng.uniform_range(0.3, 0.7) * h as f64;
    let cx = rng.uniform_range(0.3, 0.7) * w as f64;
    let sigma = rng.uniform_range(0.12, 0.22) * h.min(w) as f64;
    let amp = rng.uniform_range(0.1, 0.25);
    let base = Tensor2D::from_fn(h, w, |r, c| level + amp * gaussian_blob(r as f64, c as f64, cy, cx, sigma))?;
    Ok(base.map(|v| v + noise * rng.normal()))
}

/// `count` positives (pattern over a background) and `count` negatives (the
/// same backgrounds without the pattern).
pub fn generate_concept_set(
    spec: &ConceptSpec,
    count: usize,
    height: usize,
    width: usize,
    amplitude: f64,
    noise: f64,
    seed: u64,
) -> Result<ConceptImages> {
    if count < 2 {
        return Err(Error::invalid("concept sets need at least two images per side"));
    }
    let mut rng = Rng::new(seed);
    let mut positives = Vec::with_capacity(count);
    let mut negatives = Vec::with_capacity(count);
    for _ in 0..count {
        let background = concept_background(height, width, noise, &mut rng)?;
        let pattern = render_pattern(spec.pattern, height, width, &mut rng)?;
        let strength = amplitude * rng.uniform_range(0.7, 1.3);
        positives.push(
            background
                .zip_with(&pattern, |b, p| b + strength * p)?
                .clamp(0.0, 1.0),
        );
        negatives.push(background.clamp(0.0, 1.0));
    }
    Ok(ConceptImages { spec: spec.clone(), positives, negatives })
}

/// Concept sets for a whole bank; concept `l` uses child stream `l` of `seed`.
pub fn generate_concept_bank(bank: &[ConceptSpec], cfg: &GenConfig) -> Result<Vec<ConceptImages>> {
    let mut names: Vec<&str> = bank.iter().map(|c| c.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|p| p[0] == p[1]) {
        return Err(Error::Config("concept names must be unique".to_string()));
    }
    let root = Rng::new(cfg.seed).split(100);
    bank.iter()
        .enumerate()
        .map(|(l, spec)| {
            generate_concept_set(
                spec,
                cfg.concept_images,
                cfg.height,
                cfg.width,
                cfg.concept_amplitude,
                cfg.noise,
                root.split(l as u64).seed(),
            )
        })
        .collect()
}
