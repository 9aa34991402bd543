//! The temporal user-level classifier.
//!
//! A user becomes a [`Sequence`] of per-episode vectors built by
//! [`assemble_sequence`]; [`TudModel`] encodes it with a BiLSTM, pools the
//! states with additive attention and emits a probability. [`HtsModel`] is
//! the history-embedding logistic baseline.

mod checkpoint;
mod gradcheck;
mod hts;
mod linalg;
mod model;
mod train;

use serde::{Deserialize, Serialize};

pub use checkpoint::{
    load_checkpoint, read_model, save_checkpoint, sidecar_path, write_model, Checkpoint,
    CheckpointMeta, CHECKPOINT_VERSION,
};
pub use gradcheck::{gradient_check, GradCheckReport, FD_STEP};
pub use hts::HtsModel;
pub use model::{
    Dims, Forward, ModelConfig, TudModel, BLOCK_NAMES, DEFAULT_DROPOUT, DEFAULT_HIDDEN,
};
pub use train::{fit, predict_label, Adam, TrainConfig, TrainReport, Trainable};

use crate::pipeline::UserFeatures;
use crate::scoring::{ScoringMode, Slide};
use crate::{Error, Result};

/// Episode vectors of one user, row-major `len × dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    dim: usize,
    values: Vec<f32>,
}

impl Sequence {
    pub fn new(values: Vec<f32>, dim: usize) -> Result<Self> {
        if dim == 0 || !values.len().is_multiple_of(dim) {
            return Err(Error::Validation(format!(
                "{} values cannot form rows of width {dim}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(
                "non-finite value in episode vector".into(),
            ));
        }
        Ok(Sequence { dim, values })
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn episode(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fusion {
    Concat,
    /// Scale the episode embedding by the normalized depression score.
    MultiplyDsIntoEs,
}

/// Which per-episode features enter the model and how they are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub use_ds: bool,
    pub use_ar: bool,
    pub use_is: bool,
    pub use_drfs: bool,
    pub use_es: bool,
    pub fusion: Fusion,
    pub mode: ScoringMode,
    pub slide: Slide,
}

impl FeatureConfig {
    pub fn all_features(mode: ScoringMode, slide: Slide) -> Self {
        FeatureConfig {
            use_ds: true,
            use_ar: true,
            use_is: true,
            use_drfs: true,
            use_es: true,
            fusion: Fusion::Concat,
            mode,
            slide,
        }
    }

    /// No features enabled; combine with the `with_*` setters.
    pub fn none(mode: ScoringMode, slide: Slide) -> Self {
        FeatureConfig {
            use_ds: false,
            use_ar: false,
            use_is: false,
            use_drfs: false,
            use_es: false,
            fusion: Fusion::Concat,
            mode,
            slide,
        }
    }

    pub fn with_ds(mut self, on: bool) -> Self {
        self.use_ds = on;
        self
    }

    pub fn with_ar(mut self, on: bool) -> Self {
        self.use_ar = on;
        self
    }

    /// Both temporal-pattern scalars.
    pub fn with_tp(mut self, on: bool) -> Self {
        self.use_is = on;
        self.use_drfs = on;
        self
    }

    pub fn with_is(mut self, on: bool) -> Self {
        self.use_is = on;
        self
    }

    pub fn with_drfs(mut self, on: bool) -> Self {
        self.use_drfs = on;
        self
    }

    pub fn with_es(mut self, on: bool) -> Self {
        self.use_es = on;
        self
    }

    pub fn with_fusion(mut self, fusion: Fusion) -> Self {
        self.fusion = fusion;
        self
    }

    pub fn use_tp(&self) -> bool {
        self.use_is || self.use_drfs
    }

    pub fn validate(&self) -> Result<()> {
        match self.fusion {
            Fusion::Concat => {
                if !(self.use_ds || self.use_ar || self.use_is || self.use_drfs || self.use_es) {
                    return Err(Error::Config("at least one feature must be enabled".into()));
                }
            }
            Fusion::MultiplyDsIntoEs => {
                if !(self.use_ds && self.use_es) {
                    return Err(Error::Config(
                        "multiplicative fusion needs both DS and ES".into(),
                    ));
                }
                if self.use_ar || self.use_tp() {
                    return Err(Error::Config(
                        "multiplicative fusion takes only DS and ES".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Width of one episode vector for embeddings of dimension `embed_dim`.
    pub fn episode_dim(&self, embed_dim: usize) -> usize {
        match self.fusion {
            Fusion::MultiplyDsIntoEs => embed_dim,
            Fusion::Concat => {
                embed_dim * usize::from(self.use_es)
                    + usize::from(self.use_ds)
                    + usize::from(self.use_ar)
                    + usize::from(self.use_is)
                    + usize::from(self.use_drfs)
            }
        }
    }
}

/// Build the model input for one user.
pub fn assemble_sequence(user: &UserFeatures, config: &FeatureConfig) -> Result<Sequence> {
    config.validate()?;
    if user.settings.mode != config.mode || user.settings.slide != config.slide {
        return Err(Error::Config(format!(
            "features of {} were computed for {} / slide {}, config asks for {} / slide {}",
            user.user_id,
            user.settings.mode.label(),
            user.settings.slide,
            config.mode.label(),
            config.slide
        )));
    }
    if user.episodes.is_empty() {
        return Err(Error::Validation(format!(
            "user {} has no episodes",
            user.user_id
        )));
    }
    let embed_dim = user.atea.dim();
    let dim = config.episode_dim(embed_dim);
    let max_score = config.mode.max_score() as f32;
    let mut values = Vec::with_capacity(dim * user.episodes.len());
    for e in &user.episodes {
        if e.embedding.dim() != embed_dim {
            return Err(Error::Validation(format!(
                "user {} mixes embedding dimensions",
                user.user_id
            )));
        }
        let ds = e.dep_score as f32 / max_score;
        match config.fusion {
            Fusion::MultiplyDsIntoEs => {
                values.extend(e.embedding.as_slice().iter().map(|v| v * ds))
            }
            Fusion::Concat => {
                if config.use_es {
                    values.extend_from_slice(e.embedding.as_slice());
                }
                if config.use_ds {
                    values.push(ds);
                }
                if config.use_ar {
                    values.push(e.absence_ratio as f32);
                }
                if config.use_is {
                    values.push(user.profile.is as f32);
                }
                if config.use_drfs {
                    values.push(user.profile.drfs as f32);
                }
            }
        }
    }
    Sequence::new(values, dim)
}

#[cfg(test)]
mod tests {
    use chrono::NaiveDate;

    use super::*;
    use crate::corpus::Label;
    use crate::pipeline::{EpisodeFeatures, FeatureSettings};
    use crate::scoring::{Clinical, Denominator, Level, Sensitivity};
    use crate::semantics::Embedding;
    use crate::temporal::TemporalProfile;

    fn user(dim: usize, scores: &[u32], mode: ScoringMode) -> UserFeatures {
        let day = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let episodes = scores
            .iter()
            .enumerate()
            .map(|(i, &s)| EpisodeFeatures {
                start_day: day,
                end_day: day,
                total_days: 14,
                active_days: 7,
                dep_score: s,
                level: Level::None,
                clinically_depressed: false,
                inactive: false,
                absence_ratio: 0.5,
                embedding: Embedding((0..dim).map(|k| (k + i) as f32 * 0.01).collect()),
            })
            .collect();
        UserFeatures {
            user_id: "u".into(),
            label: Label::Depressed,
            settings: FeatureSettings {
                mode,
                slide: Slide::Fourteen,
                denominator: Denominator::ActiveDays,
            },
            episodes,
            bte: vec![1, 0],
            profile: TemporalProfile {
                is: 0.25,
                drfs: 0.5,
            },
            atea: Embedding::zeros(dim),
        }
    }

    #[test]
    fn all_features_width() {
        let mode = ScoringMode::standard(Clinical::NonClinical);
        let cfg = FeatureConfig::all_features(mode, Slide::Fourteen);
        assert_eq!(cfg.episode_dim(512), 516);
        let seq = assemble_sequence(&user(512, &[27, 9], mode), &cfg).unwrap();
        assert_eq!((seq.len(), seq.dim()), (2, 516));
        assert_eq!(&seq.episode(0)[512..], &[1.0, 0.5, 0.25, 0.5]);
        assert_eq!(&seq.episode(1)[512..], &[9.0 / 27.0, 0.5, 0.25, 0.5]);
        assert_eq!(cfg.with_es(false).episode_dim(512), 4);
    }

    #[test]
    fn es_only_passes_embedding_through() {
        let mode = ScoringMode::standard(Clinical::Clinical);
        let u = user(16, &[3, 4, 5], mode);
        let seq = assemble_sequence(
            &u,
            &FeatureConfig::none(mode, Slide::Fourteen).with_es(true),
        )
        .unwrap();
        for (i, e) in u.episodes.iter().enumerate() {
            assert_eq!(seq.episode(i), e.embedding.as_slice());
        }
    }

    #[test]
    fn multiplicative_fusion() {
        let mode = ScoringMode::new(Clinical::NonClinical, Sensitivity::Mde);
        let cfg = FeatureConfig::none(mode, Slide::Fourteen)
            .with_ds(true)
            .with_es(true)
            .with_fusion(Fusion::MultiplyDsIntoEs);
        let u = user(8, &[0, 9, 3], mode);
        let seq = assemble_sequence(&u, &cfg).unwrap();
        assert_eq!(seq.dim(), 8);
        assert!(seq.episode(0).iter().all(|&v| v == 0.0));
        assert_eq!(seq.episode(1), u.episodes[1].embedding.as_slice());
        let third: Vec<f32> = u.episodes[2]
            .embedding
            .as_slice()
            .iter()
            .map(|v| v * (3.0 / 9.0))
            .collect();
        assert_eq!(seq.episode(2), third.as_slice());
    }

    #[test]
    fn invalid_configs() {
        let mode = ScoringMode::standard(Clinical::NonClinical);
        assert!(FeatureConfig::none(mode, Slide::One).validate().is_err());
        let mult = FeatureConfig::none(mode, Slide::One)
            .with_es(true)
            .with_fusion(Fusion::MultiplyDsIntoEs);
        assert!(mult.validate().is_err());
        assert!(mult.with_ds(true).with_ar(true).validate().is_err());
        let u = user(4, &[], mode);
        let cfg = FeatureConfig::all_features(mode, Slide::Fourteen);
        assert!(matches!(
            assemble_sequence(&u, &cfg),
            Err(Error::Validation(_))
        ));
        let u = user(4, &[1], mode);
        assert!(matches!(
            assemble_sequence(
                &u,
                &FeatureConfig {
                    slide: Slide::Seven,
                    ..cfg
                }
            ),
            Err(Error::Config(_))
        ));
    }
}
