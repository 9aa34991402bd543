//! Ablation, single-feature and baseline experiments over slide lengths and
//! clinical settings.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cv::{cross_validate_inputs, CvOptions, CvResult, Inputs, MetricSummary, ModelSpec};
use super::ttest::paired_t;
use crate::pipeline::PreparedUser;
use crate::scoring::{Clinical, ScoringMode, Sensitivity, Slide};
use crate::tud::{FeatureConfig, Fusion, ModelConfig, TrainConfig};
use crate::{derive_seed, Error, Result};

pub const SIGNIFICANCE: f64 = 0.05;
pub const REFERENCE_VARIANT: &str = "all-feats";
pub const HTS_VARIANT: &str = "HTS";

/// Per-cell variants as `(category, name)`, in report order.
pub const VARIANTS: [(&str, &str); 14] = [
    ("Ablation", "all-feats"),
    ("Ablation", "all-feats(MDE)"),
    ("Ablation", "-DS"),
    ("Ablation", "-IS"),
    ("Ablation", "-DRFS"),
    ("Ablation", "-TP"),
    ("Ablation", "-AR"),
    ("Ablation", "-ES"),
    ("Single Feature", "DS"),
    ("Single Feature", "DS(MDE)"),
    ("Single Feature", "TP"),
    ("Single Feature", "TP(MDE)"),
    ("Single Feature", "AR"),
    ("Baseline", "ES"),
];

/// Feature selection for a named variant.
pub fn variant_features(name: &str, clinical: Clinical, slide: Slide) -> Result<FeatureConfig> {
    let standard = ScoringMode::standard(clinical);
    let mde = ScoringMode::new(clinical, Sensitivity::Mde);
    let all = FeatureConfig::all_features(standard, slide);
    let none = FeatureConfig::none(standard, slide);
    Ok(match name {
        "all-feats" => all,
        "all-feats(MDE)" => FeatureConfig::none(mde, slide)
            .with_ds(true)
            .with_es(true)
            .with_fusion(Fusion::MultiplyDsIntoEs),
        "-DS" => all.with_ds(false),
        "-IS" => all.with_is(false),
        "-DRFS" => all.with_drfs(false),
        "-TP" => all.with_tp(false),
        "-AR" => all.with_ar(false),
        "-ES" => all.with_es(false),
        "DS" => none.with_ds(true),
        "DS(MDE)" => FeatureConfig::none(mde, slide).with_ds(true),
        "TP" => none.with_tp(true),
        "TP(MDE)" => FeatureConfig::none(mde, slide).with_tp(true),
        "AR" => none.with_ar(true),
        "ES" => none.with_es(true),
        other => {
            return Err(Error::Config(format!(
                "unknown experiment variant {other:?}"
            )))
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub slides: Vec<Slide>,
    pub settings: Vec<Clinical>,
    pub cv: CvOptions,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            slides: Slide::ALL.to_vec(),
            settings: vec![Clinical::Clinical, Clinical::NonClinical],
            cv: CvOptions::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    /// Paired t-test p-value of per-fold F1 against all-feats.
    pub p: f64,
    pub significantly_worse: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub category: String,
    pub experiment: String,
    pub heldout: MetricSummary,
    pub test: Option<MetricSummary>,
    pub heldout_vs_reference: Option<Significance>,
    pub test_vs_reference: Option<Significance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub slide: Slide,
    pub setting: Clinical,
    pub rows: Vec<GridRow>,
    pub results: Vec<CvResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub config: GridConfig,
    pub train_users: usize,
    pub test_users: Option<usize>,
    /// The history-embedding baseline is independent of slide and setting.
    pub hts: CvResult,
    pub cells: Vec<GridCell>,
}

impl GridReport {
    /// Cross-validation runs inside the cells (HTS excluded).
    pub fn cell_result_count(&self) -> usize {
        self.cells.iter().map(|c| c.results.len()).sum()
    }
}

fn with_context(e: Error, what: &str) -> Error {
    match e {
        Error::Numerical(m) => Error::Numerical(format!("{what}: {m}")),
        Error::Validation(m) => Error::Validation(format!("{what}: {m}")),
        Error::Config(m) => Error::Config(format!("{what}: {m}")),
        other => other,
    }
}

fn significance(variant: &[f64], reference: &[f64]) -> Result<Significance> {
    let p = paired_t(variant, reference)?.p;
    let worse = super::ttest::mean(variant) < super::ttest::mean(reference);
    Ok(Significance {
        p,
        significantly_worse: p < SIGNIFICANCE && worse,
    })
}

fn row(category: &str, experiment: &str, r: &CvResult, reference: &CvResult) -> Result<GridRow> {
    let is_reference = experiment == REFERENCE_VARIANT;
    let heldout_vs_reference = if is_reference {
        None
    } else {
        Some(significance(&r.heldout_f1(), &reference.heldout_f1())?)
    };
    let test_vs_reference = match (is_reference, r.test_f1(), reference.test_f1()) {
        (false, Some(a), Some(b)) => Some(significance(&a, &b)?),
        _ => None,
    };
    Ok(GridRow {
        category: category.to_string(),
        experiment: experiment.to_string(),
        heldout: r.heldout,
        test: r.test,
        heldout_vs_reference,
        test_vs_reference,
    })
}

/// Run every variant in every (slide, setting) cell plus the HTS baseline.
pub fn run_experiment_grid(
    train: &[PreparedUser],
    test: Option<&[PreparedUser]>,
    config: &GridConfig,
) -> Result<GridReport> {
    let labels: Vec<bool> = train.iter().map(|u| u.label.is_depressed()).collect();
    let test_labels: Option<Vec<bool>> =
        test.map(|t| t.iter().map(|u| u.label.is_depressed()).collect());

    let mut jobs: Vec<(usize, Clinical, Slide, &str)> = Vec::new();
    let mut cell = 0;
    for &slide in &config.slides {
        for &setting in &config.settings {
            for (_, name) in VARIANTS {
                jobs.push((cell, setting, slide, name));
            }
            cell += 1;
        }
    }

    let run = |spec: ModelSpec, what: &str| -> Result<CvResult> {
        let inputs = Inputs::build(train, &spec, config.cv.denominator)
            .map_err(|e| with_context(e, what))?;
        let ext = test
            .map(|t| Inputs::build(t, &spec, config.cv.denominator))
            .transpose()?;
        cross_validate_inputs(
            &inputs,
            &labels,
            ext.as_ref().zip(test_labels.as_deref()),
            &spec,
            &config.cv,
        )
        .map_err(|e| with_context(e, what))
    };

    let hts_spec = ModelSpec::Hts {
        train: config.train,
        seed: derive_seed(config.model.seed, u64::MAX),
    };
    let hts = run(hts_spec, HTS_VARIANT)?;
    let results = jobs
        .par_iter()
        .enumerate()
        .map(|(j, &(_, setting, slide, name))| {
            let what = format!("{name} (slide {slide}, {setting:?})");
            let features = variant_features(name, setting, slide)?;
            let model = ModelConfig {
                seed: derive_seed(config.model.seed, j as u64),
                ..config.model
            };
            let train_cfg = TrainConfig {
                seed: derive_seed(config.train.seed, j as u64),
                ..config.train
            };
            run(
                ModelSpec::Tud {
                    features,
                    model,
                    train: train_cfg,
                },
                &what,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::new();
    let mut it = jobs.iter().zip(results);
    for &slide in &config.slides {
        for &setting in &config.settings {
            let cell_results: Vec<CvResult> =
                it.by_ref().take(VARIANTS.len()).map(|(_, r)| r).collect();
            let reference = &cell_results[0];
            let mut rows = VARIANTS
                .iter()
                .zip(&cell_results)
                .map(|((cat, name), r)| row(cat, name, r, reference))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row("Baseline", HTS_VARIANT, &hts, reference)?);
            cells.push(GridCell {
                slide,
                setting,
                rows,
                results: cell_results,
            });
        }
    }
    Ok(GridReport {
        config: config.clone(),
        train_users: train.len(),
        test_users: test.map(<[_]>::len),
        hts,
        cells,
    })
}

pub const GRID_CSV_HEADER: [&str; 11] = [
    "slide",
    "setting",
    "category",
    "experiment",
    "precision_mean",
    "precision_std",
    "recall_mean",
    "recall_std",
    "f1_mean",
    "f1_std",
    "significantly_worse",
];

/// One table row per experiment and cell; `test` selects the external-set
/// columns instead of held-out folds.
pub fn write_grid_csv(w: impl Write, report: &GridReport, test: bool) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(GRID_CSV_HEADER)?;
    for cell in &report.cells {
        for r in &cell.rows {
            let (summary, sig) = if test {
                match r.test {
                    Some(s) => (s, &r.test_vs_reference),
                    None => continue,
                }
            } else {
                (r.heldout, &r.heldout_vs_reference)
            };
            let setting = match cell.setting {
                Clinical::Clinical => "clinical",
                Clinical::NonClinical => "nonclinical",
            };
            out.write_record([
                cell.slide.to_string(),
                setting.to_string(),
                r.category.clone(),
                r.experiment.clone(),
                format!("{:.4}", summary.precision.mean),
                format!("{:.4}", summary.precision.std),
                format!("{:.4}", summary.recall.mean),
                format!("{:.4}", summary.recall.std),
                format!("{:.4}", summary.f1.mean),
                format!("{:.4}", summary.f1.std),
                sig.as_ref()
                    .is_some_and(|s| s.significantly_worse)
                    .to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_dimensions() {
        let dim = |n: &str| {
            variant_features(n, Clinical::Clinical, Slide::Seven)
                .unwrap()
                .episode_dim(512)
        };
        assert_eq!(dim("all-feats"), 516);
        assert_eq!(dim("all-feats(MDE)"), 512);
        assert_eq!(dim("-ES"), 4);
        assert_eq!(dim("-TP"), 514);
        assert_eq!(dim("-IS"), 515);
        assert_eq!(dim("TP"), 2);
        assert_eq!(dim("ES"), 512);
        for (_, name) in VARIANTS {
            variant_features(name, Clinical::NonClinical, Slide::One)
                .unwrap()
                .validate()
                .unwrap();
        }
        assert!(variant_features("nope", Clinical::Clinical, Slide::One).is_err());
    }

    #[test]
    fn mde_variants_use_mde_scoring() {
        for n in ["all-feats(MDE)", "DS(MDE)", "TP(MDE)"] {
            let f = variant_features(n, Clinical::Clinical, Slide::Fourteen).unwrap();
            assert_eq!(f.mode.sensitivity, Sensitivity::Mde);
        }
    }
}
