use std::path::{Path, PathBuf};

use fairscope_core::clustering::ClusterInput;
use fairscope_core::concepts::SamplingMode;
use fairscope_core::data::GenConfig;
use fairscope_core::pipeline::{Augmenter, Mode, RunConfig, VariantAxes};
use serde::{Deserialize, Serialize};

use crate::dataset::{concept_dir, read_json};
use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    /// Defaults to `<data_dir>/concepts`.
    pub concept_dir: Option<PathBuf>,
    pub gen: GenConfig,
    #[serde(flatten)]
    pub run: RunConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            data_dir: PathBuf::from("data"),
            out_dir: PathBuf::from("runs/latest"),
            concept_dir: None,
            gen: GenConfig::default(),
            run: RunConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> AppResult<Self> {
        match path {
            Some(p) => read_json(p),
            None => Ok(PipelineConfig::default()),
        }
    }

    pub fn concepts(&self) -> PathBuf {
        self.concept_dir.clone().unwrap_or_else(|| concept_dir(&self.data_dir))
    }

    /// One seed for generation and training alike.
    pub fn set_seed(&mut self, seed: u64) {
        self.gen.seed = seed;
        self.run.train.seed = seed;
    }

    pub fn set_mode(&mut self, name: &str) -> AppResult<()> {
        let (mode, variant) = parse_mode(name)?;
        self.run.mode = mode;
        if let Some(v) = variant {
            self.run.variant = v;
        }
        Ok(())
    }

    pub fn validate(&self) -> AppResult<()> {
        self.gen.validate()?;
        self.run.validate()?;
        Ok(())
    }
}

/// `vanilla`, `proposed`, `variant`, or a variant label such as `NC+PS+MU`.
/// A label's concept switch follows its sampling code.
pub fn parse_mode(name: &str) -> AppResult<(Mode, Option<VariantAxes>)> {
    match name {
        "vanilla" => return Ok((Mode::Vanilla, None)),
        "proposed" => return Ok((Mode::Proposed, None)),
        "variant" => return Ok((Mode::Variant, None)),
        _ => {}
    }
    let parts: Vec<&str> = name.split('+').collect();
    let bad = || AppError::Usage(format!("unknown mode {name:?}; expected vanilla, proposed, variant or e.g. PC+BS+PF"));
    let [c, s, a] = parts.as_slice() else { return Err(bad()) };
    let clustering = match *c {
        "NC" => ClusterInput::Naive,
        "PC" => ClusterInput::Temporal,
        _ => return Err(bad()),
    };
    let sampling = match *s {
        "PS" => SamplingMode::Proportional,
        "BS" => SamplingMode::BiasAware,
        _ => return Err(bad()),
    };
    let augment = Augmenter::ALL.into_iter().find(|x| x.code() == *a).ok_or_else(bad)?;
    let axes = VariantAxes { clustering, concepts: sampling == SamplingMode::BiasAware, sampling, augment };
    Ok((Mode::Variant, Some(axes)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_roundtrips_through_json() {
        let cfg = PipelineConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: PipelineConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let partial: PipelineConfig = serde_json::from_str(r#"{"k": 3, "mode": "vanilla"}"#).unwrap();
        assert_eq!((partial.run.k, partial.run.mode), (3, Mode::Vanilla));
        assert_eq!(partial.gen, GenConfig::default());
    }

    #[test]
    fn mode_names() {
        assert_eq!(parse_mode("vanilla").unwrap().0, Mode::Vanilla);
        let (m, v) = parse_mode("NC+PS+MU").unwrap();
        assert_eq!(m, Mode::Variant);
        assert_eq!(v.unwrap().label(), "NC+PS+MU");
        assert!(!v.unwrap().concepts);
        assert!(parse_mode("PC+XX+PF").is_err());
        assert!(parse_mode("fast").is_err());
    }
}
