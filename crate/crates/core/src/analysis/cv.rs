//! Stratified k-fold evaluation of the classifier and its baselines.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ttest::{mean, sample_std};
use crate::corpus::Label;
use crate::derive_seed;
use crate::pipeline::{user_features, FeatureSettings, PreparedUser};
use crate::scoring::Denominator;
use crate::semantics::Embedding;
use crate::tud::{
    assemble_sequence, fit, predict_label, FeatureConfig, HtsModel, ModelConfig, Sequence,
    TrainConfig, TudModel,
};
use crate::{Error, Result};

pub const DEFAULT_FOLDS: usize = 10;

/// Confusion counts for the depressed (positive) class plus derived metrics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Metrics {
            tp,
            fp,
            fn_,
            tn,
            precision,
            recall,
            f1,
        }
    }

    pub fn from_predictions(truth: &[bool], predicted: &[bool]) -> Self {
        let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
        for (&t, &p) in truth.iter().zip(predicted) {
            match (t, p) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                (false, false) => tn += 1,
            }
        }
        Self::from_counts(tp, fp, fn_, tn)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Self {
        MeanStd {
            mean: mean(xs),
            std: sample_std(xs),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
}

impl MetricSummary {
    pub fn of(ms: &[Metrics]) -> Self {
        let col = |f: fn(&Metrics) -> f64| MeanStd::of(&ms.iter().map(f).collect::<Vec<_>>());
        MetricSummary {
            precision: col(|m| m.precision),
            recall: col(|m| m.recall),
            f1: col(|m| m.f1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub heldout: Metrics,
    pub test: Option<Metrics>,
    pub final_train_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub folds: Vec<FoldResult>,
    pub heldout: MetricSummary,
    pub test: Option<MetricSummary>,
}

impl CvResult {
    pub fn heldout_f1(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.heldout.f1).collect()
    }

    pub fn test_f1(&self) -> Option<Vec<f64>> {
        self.folds.iter().map(|f| f.test.map(|m| m.f1)).collect()
    }
}

/// What to train inside each fold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Tud {
        features: FeatureConfig,
        model: ModelConfig,
        train: TrainConfig,
    },
    /// Logistic regression over the whole-history embedding.
    Hts { train: TrainConfig, seed: u64 },
    /// Predicts the same label for everyone.
    Constant { depressed: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub folds: usize,
    pub seed: u64,
    #[serde(default)]
    pub denominator: Denominator,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            folds: DEFAULT_FOLDS,
            seed: 0,
            denominator: Denominator::ActiveDays,
        }
    }
}

/// Fold index per user: each class is shuffled with its own seeded stream
/// and dealt round-robin.
pub fn stratified_folds(labels: &[Label], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {folds}")));
    }
    let mut out = vec![0usize; labels.len()];
    for (stream, class) in [Label::Depressed, Label::Control].into_iter().enumerate() {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < folds {
            return Err(Error::Validation(format!(
                "{} {class} users cannot fill {folds} folds",
                idx.len()
            )));
        }
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(
            seed,
            stream as u64,
        )));
        for (k, i) in idx.into_iter().enumerate() {
            out[i] = k % folds;
        }
    }
    Ok(out)
}

/// Model inputs for one population under one spec.
pub enum Inputs {
    Sequences(Vec<Sequence>),
    Histories(Vec<Embedding>),
    Count(usize),
}

impl Inputs {
    pub fn build(
        users: &[PreparedUser],
        spec: &ModelSpec,
        denominator: Denominator,
    ) -> Result<Self> {
        match spec {
            ModelSpec::Tud { features, .. } => {
                let settings = FeatureSettings {
                    mode: features.mode,
                    slide: features.slide,
                    denominator,
                };
                let seqs = users
                    .par_iter()
                    .map(|u| assemble_sequence(&user_features(u, settings), features))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Inputs::Sequences(seqs))
            }
            ModelSpec::Hts { .. } => Ok(Inputs::Histories(
                users.iter().map(|u| u.atea.clone()).collect(),
            )),
            ModelSpec::Constant { .. } => Ok(Inputs::Count(users.len())),
        }
    }

    fn len(&self) -> usize {
        match self {
            Inputs::Sequences(s) => s.len(),
            Inputs::Histories(h) => h.len(),
            Inputs::Count(n) => *n,
        }
    }
}

enum Trained {
    Tud(TudModel),
    Hts(HtsModel),
    Constant(bool),
}

impl Trained {
    fn predict(&self, inputs: &Inputs, idx: &[usize]) -> Result<Vec<bool>> {
        match (self, inputs) {
            (Trained::Tud(m), Inputs::Sequences(s)) => idx
                .iter()
                .map(|&i| m.probability(&s[i]).map(predict_label))
                .collect(),
            (Trained::Hts(m), Inputs::Histories(h)) => idx
                .iter()
                .map(|&i| m.probability(&h[i]).map(predict_label))
                .collect(),
            (Trained::Constant(d), _) => Ok(vec![*d; idx.len()]),
            _ => unreachable!("inputs are built from the same spec as the model"),
        }
    }
}

fn train_fold(
    spec: &ModelSpec,
    inputs: &Inputs,
    labels: &[bool],
    idx: &[usize],
    fold: u64,
) -> Result<(Trained, f64)> {
    match (spec, inputs) {
        (ModelSpec::Tud { model, train, .. }, Inputs::Sequences(seqs)) => {
            let dim = seqs[idx[0]].dim();
            let mut m = TudModel::new(
                dim,
                &ModelConfig {
                    seed: derive_seed(model.seed, fold),
                    ..*model
                },
            )?;
            let data: Vec<(&Sequence, bool)> = idx.iter().map(|&i| (&seqs[i], labels[i])).collect();
            let report = fit(
                &mut m,
                &data,
                &TrainConfig {
                    seed: derive_seed(train.seed, fold),
                    ..*train
                },
            )?;
            Ok((
                Trained::Tud(m),
                report.epoch_loss.last().copied().unwrap_or(f64::NAN),
            ))
        }
        (ModelSpec::Hts { train, seed }, Inputs::Histories(hist)) => {
            let mut m = HtsModel::new(hist[idx[0]].dim(), derive_seed(*seed, fold))?;
            let data: Vec<(&Embedding, bool)> =
                idx.iter().map(|&i| (&hist[i], labels[i])).collect();
            let report = fit(
                &mut m,
                &data,
                &TrainConfig {
                    seed: derive_seed(train.seed, fold),
                    ..*train
                },
            )?;
            Ok((
                Trained::Hts(m),
                report.epoch_loss.last().copied().unwrap_or(f64::NAN),
            ))
        }
        (ModelSpec::Constant { depressed }, _) => Ok((Trained::Constant(*depressed), 0.0)),
        _ => unreachable!("inputs are built from the same spec as the model"),
    }
}

/// k-fold evaluation on `users`, optionally also scoring every fold model on
/// an external test population.
pub fn cross_validate(
    users: &[PreparedUser],
    spec: &ModelSpec,
    external: Option<&[PreparedUser]>,
    options: &CvOptions,
) -> Result<CvResult> {
    let inputs = Inputs::build(users, spec, options.denominator)?;
    let test = external
        .map(|t| Inputs::build(t, spec, options.denominator))
        .transpose()?;
    let labels: Vec<bool> = users.iter().map(|u| u.label.is_depressed()).collect();
    let test_labels: Option<Vec<bool>> =
        external.map(|t| t.iter().map(|u| u.label.is_depressed()).collect());
    cross_validate_inputs(
        &inputs,
        &labels,
        test.as_ref().zip(test_labels.as_deref()),
        spec,
        options,
    )
}

/// As [`cross_validate`] for prebuilt inputs.
pub fn cross_validate_inputs(
    inputs: &Inputs,
    labels: &[bool],
    external: Option<(&Inputs, &[bool])>,
    spec: &ModelSpec,
    options: &CvOptions,
) -> Result<CvResult> {
    if inputs.len() != labels.len() {
        return Err(Error::Validation(
            "inputs and labels differ in length".into(),
        ));
    }
    let classes: Vec<Label> = labels
        .iter()
        .map(|&d| if d { Label::Depressed } else { Label::Control })
        .collect();
    let assignment = stratified_folds(&classes, options.folds, options.seed)?;
    let folds = (0..options.folds)
        .into_par_iter()
        .map(|k| {
            let (held, train): (Vec<usize>, Vec<usize>) =
                (0..labels.len()).partition(|&i| assignment[i] == k);
            let (model, loss) = train_fold(spec, inputs, labels, &train, k as u64)?;
            let truth: Vec<bool> = held.iter().map(|&i| labels[i]).collect();
            let heldout = Metrics::from_predictions(&truth, &model.predict(inputs, &held)?);
            let test = match external {
                Some((t, tl)) => {
                    let all: Vec<usize> = (0..tl.len()).collect();
                    Some(Metrics::from_predictions(tl, &model.predict(t, &all)?))
                }
                None => None,
            };
            Ok(FoldResult {
                fold: k,
                heldout,
                test,
                final_train_loss: loss,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let heldout = MetricSummary::of(&folds.iter().map(|f| f.heldout).collect::<Vec<_>>());
    let test = external
        .map(|_| MetricSummary::of(&folds.iter().filter_map(|f| f.test).collect::<Vec<_>>()));
    Ok(CvResult {
        folds,
        heldout,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_edge_cases() {
        let m = Metrics::from_counts(0, 0, 5, 5);
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        let m = Metrics::from_counts(5, 5, 0, 0);
        assert_eq!((m.precision, m.recall), (0.5, 1.0));
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn folds_are_stratified_and_seeded() {
        let labels: Vec<Label> = (0..45)
            .map(|i| {
                if i % 3 == 0 {
                    Label::Depressed
                } else {
                    Label::Control
                }
            })
            .collect();
        let a = stratified_folds(&labels, 5, 1).unwrap();
        assert_eq!(a, stratified_folds(&labels, 5, 1).unwrap());
        assert_ne!(a, stratified_folds(&labels, 5, 2).unwrap());
        for k in 0..5 {
            let d = (0..45)
                .filter(|&i| a[i] == k && labels[i] == Label::Depressed)
                .count();
            let c = (0..45)
                .filter(|&i| a[i] == k && labels[i] == Label::Control)
                .count();
            assert_eq!((d, c), (3, 6));
        }
        assert!(stratified_folds(&labels[..20], 10, 0).is_err());
    }

    #[test]
    fn always_depressed_on_balanced_data() {
        let labels: Vec<bool> = (0..40).map(|i| i % 2 == 0).collect();
        let r = cross_validate_inputs(
            &Inputs::Count(40),
            &labels,
            None,
            &ModelSpec::Constant { depressed: true },
            &CvOptions::default(),
        )
        .unwrap();
        assert_eq!(r.folds.len(), 10);
        assert!((r.heldout.precision.mean - 0.5).abs() < 1e-12);
        assert!((r.heldout.recall.mean - 1.0).abs() < 1e-12);
        assert!((r.heldout.f1.mean - 2.0 / 3.0).abs() < 1e-12);
        assert!(r.heldout.f1.std < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn f1_is_harmonic_mean(tp in 0usize..50, fp in 0usize..50, fn_ in 0usize..50, tn in 0usize..50) {
                let m = Metrics::from_counts(tp, fp, fn_, tn);
                prop_assert!((0.0..=1.0).contains(&m.f1));
                if m.precision > 0.0 && m.recall > 0.0 {
                    let p = tp as f64 / (tp + fp) as f64;
                    let r = tp as f64 / (tp + fn_) as f64;
                    prop_assert!((m.f1 - 2.0 / (1.0 / p + 1.0 / r)).abs() < 1e-12);
                }
            }
        }
    }
}
