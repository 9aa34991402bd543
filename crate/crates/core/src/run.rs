//! Command line definitions and subcommand handlers for the `tud` binary.
//!
//! Every subcommand reads its inputs, echoes the resolved [`RunConfig`] as
//! JSON on stdout, writes it next to its outputs and then writes its
//! artifacts, all inside `--out-dir`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Component, Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::analysis::{
    build_digest, cross_validate, dataset_stats, lci_across_datasets, lci_analysis,
    level_distribution, run_experiment_grid, write_grid_csv, CategoryLexicon, CvOptions,
    GridConfig, ModelSpec,
};
use crate::corpus::{
    filter_users, load_corpus, save_corpus, synthesize, Corpus, FilterConfig, Label, SynthSpec,
};
use crate::pipeline::{
    corpus_features, prepare_corpus, user_features, write_feature_csv, FeatureSettings,
    PreparedUser,
};
use crate::preprocess::{preprocess_timeline, PreprocessReport};
use crate::scoring::{Clinical, Denominator, ScoringMode, Sensitivity, Slide};
use crate::semantics::encoder_from_selector;
use crate::symptoms::detector_from_selector;
use crate::tud::{
    assemble_sequence, fit, load_checkpoint, predict_label, save_checkpoint, sidecar_path,
    CheckpointMeta, FeatureConfig, Fusion, ModelConfig, Sequence, TrainConfig, TudModel,
    CHECKPOINT_VERSION,
};
use crate::{derive_seed, Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "tud",
    version,
    about = "Temporal user-level depression modelling pipeline"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Directory that receives every artifact of the run.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Master seed for all randomness.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Symptom detector: `lexicon:builtin` or `lexicon:<path>`.
    #[arg(long, global = true, default_value = "lexicon:builtin")]
    pub detector: String,
    /// Sentence encoder: `hash:<dim>:<seed>`.
    #[arg(long, global = true, default_value = "hash:512:0")]
    pub encoder: String,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labelled corpus.
    Synth(SynthArgs),
    /// Filter users and clean posts.
    Preprocess(PreprocessArgs),
    /// Dump per-episode features as CSV.
    Features(FeaturesArgs),
    /// Train a model on a corpus and save a checkpoint.
    Train(TrainArgs),
    /// Score a corpus with a saved checkpoint.
    Predict(PredictArgs),
    /// Cross-validate one model configuration.
    Evaluate(EvaluateArgs),
    /// Run the ablation / single-feature / baseline grid.
    Grid(GridArgs),
    /// Dataset statistics and lexicon intensity analysis.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output corpus file (JSON lines).
    #[arg(long, default_value = "corpus.jsonl")]
    pub out: PathBuf,
    /// JSON synthesis spec; overrides the size flags below.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub n_depressed: usize,
    #[arg(long, default_value_t = 50)]
    pub n_control: usize,
    /// History length in days.
    #[arg(long, default_value_t = 120)]
    pub days: u32,
    /// Alternate symptomatic and remission phases of this many days (depressed users).
    #[arg(long)]
    pub recurrence_days: Option<u32>,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value = "preprocessed.jsonl")]
    pub out: PathBuf,
    /// Keep every user regardless of the inclusion criteria.
    #[arg(long)]
    pub no_filter: bool,
    #[arg(long, default_value_t = 50)]
    pub min_posts: usize,
    #[arg(long, default_value_t = 30)]
    pub min_days: u32,
    #[arg(long, default_value_t = 0.2)]
    pub max_non_english: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClinicalArg {
    Clinical,
    Nonclinical,
}

impl From<ClinicalArg> for Clinical {
    fn from(c: ClinicalArg) -> Self {
        match c {
            ClinicalArg::Clinical => Clinical::Clinical,
            ClinicalArg::Nonclinical => Clinical::NonClinical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SensitivityArg {
    Standard,
    Mde,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DenominatorArg {
    ActiveDays,
    WindowDays,
}

impl From<DenominatorArg> for Denominator {
    fn from(d: DenominatorArg) -> Self {
        match d {
            DenominatorArg::ActiveDays => Denominator::ActiveDays,
            DenominatorArg::WindowDays => Denominator::WindowDays,
        }
    }
}

fn parse_slide(s: &str) -> std::result::Result<Slide, String> {
    let v: u32 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    Slide::try_from(v).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct ScoringArgs {
    #[arg(long, value_enum, default_value_t = ClinicalArg::Nonclinical)]
    pub mode: ClinicalArg,
    #[arg(long, value_enum, default_value_t = SensitivityArg::Standard)]
    pub sensitivity: SensitivityArg,
    /// Slide length in days: 1, 7 or 14.
    #[arg(long, value_parser = parse_slide, default_value = "14")]
    pub slide: Slide,
    /// Denominator of the per-symptom day percentage.
    #[arg(long, value_enum, default_value_t = DenominatorArg::ActiveDays)]
    pub denominator: DenominatorArg,
}

impl ScoringArgs {
    fn mode(&self) -> ScoringMode {
        let sensitivity = match self.sensitivity {
            SensitivityArg::Standard => Sensitivity::Standard,
            SensitivityArg::Mde => Sensitivity::Mde,
        };
        ScoringMode::new(self.mode.into(), sensitivity)
    }

    fn settings(&self) -> FeatureSettings {
        FeatureSettings {
            mode: self.mode(),
            slide: self.slide,
            denominator: self.denominator.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FusionArg {
    Concat,
    Multiply,
}

#[derive(Debug, Clone, Args)]
pub struct FeatureArgs {
    #[arg(long)]
    pub no_ds: bool,
    #[arg(long)]
    pub no_ar: bool,
    #[arg(long)]
    pub no_is: bool,
    #[arg(long)]
    pub no_drfs: bool,
    #[arg(long)]
    pub no_es: bool,
    /// `multiply` scales the episode embedding by the depression score.
    #[arg(long, value_enum, default_value_t = FusionArg::Concat)]
    pub fusion: FusionArg,
}

impl FeatureArgs {
    fn config(&self, scoring: &ScoringArgs) -> Result<FeatureConfig> {
        let fusion = match self.fusion {
            FusionArg::Concat => Fusion::Concat,
            FusionArg::Multiply => Fusion::MultiplyDsIntoEs,
        };
        let mut cfg = FeatureConfig::all_features(scoring.mode(), scoring.slide)
            .with_ds(!self.no_ds)
            .with_ar(!self.no_ar)
            .with_is(!self.no_is)
            .with_drfs(!self.no_drfs)
            .with_es(!self.no_es)
            .with_fusion(fusion);
        if fusion == Fusion::MultiplyDsIntoEs {
            cfg = cfg.with_ar(false).with_tp(false);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainingArgs {
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 100)]
    pub hidden: usize,
    /// Dropout on episode input vectors during training.
    #[arg(long, default_value_t = 0.1)]
    pub dropout: f64,
}

impl TrainingArgs {
    fn configs(&self, seed: u64) -> Result<(ModelConfig, TrainConfig)> {
        let model = ModelConfig {
            hidden: self.hidden,
            dropout: self.dropout,
            seed: derive_seed(seed, 1),
        };
        let train = TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.lr,
            seed: derive_seed(seed, 2),
        };
        model.validate()?;
        train.validate()?;
        Ok((model, train))
    }
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value = "features.csv")]
    pub out: PathBuf,
    #[command(flatten)]
    pub scoring: ScoringArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Checkpoint file; the config sidecar is written to `<file>.json`.
    #[arg(long, default_value = "model.bin")]
    pub model_out: PathBuf,
    #[command(flatten)]
    pub scoring: ScoringArgs,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value = "predictions.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Tud,
    Hts,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// External test corpus scored by every fold model.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, value_enum, default_value_t = ModelKind::Tud)]
    pub model_kind: ModelKind,
    #[arg(long, default_value = "evaluation.json")]
    pub out: PathBuf,
    #[command(flatten)]
    pub scoring: ScoringArgs,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', value_parser = parse_slide, default_value = "1,7,14")]
    pub slides: Vec<Slide>,
    #[arg(
        long,
        value_delimiter = ',',
        value_enum,
        default_value = "clinical,nonclinical"
    )]
    pub settings: Vec<ClinicalArg>,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, value_enum, default_value_t = DenominatorArg::ActiveDays)]
    pub denominator: DenominatorArg,
    #[arg(long, default_value = "grid_report.json")]
    pub out: PathBuf,
    #[arg(long, default_value = "grid_heldout.csv")]
    pub heldout_csv: PathBuf,
    #[arg(long, default_value = "grid_test.csv")]
    pub test_csv: PathBuf,
    #[command(flatten)]
    pub training: TrainingArgs,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// One or more corpora; lexicon deviations are summarized across them.
    #[arg(long = "in", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Category lexicon JSON (category -> words, `*` suffix for prefixes).
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long, default_value = "stats.json")]
    pub out: PathBuf,
    #[command(flatten)]
    pub scoring: ScoringArgs,
}

/// Resolved configuration of one invocation.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub inputs: Vec<PathBuf>,
    pub test_input: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub outputs: Vec<PathBuf>,
    pub seed: u64,
    pub workers: Option<usize>,
    pub detector: String,
    pub encoder: String,
    pub mode: Option<ScoringMode>,
    pub slide: Option<Slide>,
    pub denominator: Option<Denominator>,
    pub features: Option<FeatureConfig>,
    pub model: Option<ModelConfig>,
    pub train: Option<TrainConfig>,
    /// Subcommand-specific settings.
    pub extra: serde_json::Value,
}

impl RunConfig {
    fn new(name: &str, g: &GlobalArgs) -> Self {
        RunConfig {
            subcommand: name.to_string(),
            inputs: Vec::new(),
            test_input: None,
            out_dir: g.out_dir.clone(),
            outputs: Vec::new(),
            seed: g.seed,
            workers: g.workers,
            detector: g.detector.clone(),
            encoder: g.encoder.clone(),
            mode: None,
            slide: None,
            denominator: None,
            features: None,
            model: None,
            train: None,
            extra: serde_json::Value::Null,
        }
    }

    fn with_scoring(mut self, s: &ScoringArgs) -> Self {
        self.mode = Some(s.mode());
        self.slide = Some(s.slide);
        self.denominator = Some(s.denominator.into());
        self
    }

    /// Print to stdout and store as `<subcommand>_run_config.json`.
    fn announce(&self) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        println!("{text}");
        let path = output_path(
            &self.out_dir,
            Path::new(&format!("{}_run_config.json", self.subcommand)),
        )?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// Resolve a relative output path inside `out_dir`, refusing escapes.
pub fn output_path(out_dir: &Path, rel: &Path) -> Result<PathBuf> {
    let escapes = rel
        .components()
        .any(|c| !matches!(c, Component::Normal(_) | Component::CurDir));
    if escapes || rel.as_os_str().is_empty() {
        return Err(Error::Config(format!(
            "output path {} must be relative and stay inside --out-dir",
            rel.display()
        )));
    }
    let full = out_dir.join(rel);
    if let Some(parent) = full.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(full)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn prepare(path: &Path, g: &GlobalArgs) -> Result<(Corpus, Vec<PreparedUser>)> {
    let corpus = load_corpus(path)?;
    if corpus.users.is_empty() {
        return Err(Error::Validation(format!(
            "{} contains no users",
            path.display()
        )));
    }
    let detector = detector_from_selector(&g.detector)?;
    let encoder = encoder_from_selector(&g.encoder)?;
    let prepared = prepare_corpus(&corpus, detector.as_ref(), encoder.as_ref());
    Ok((corpus, prepared))
}

fn synth(g: &GlobalArgs, a: &SynthArgs) -> Result<()> {
    let spec = match &a.spec {
        Some(p) => SynthSpec {
            seed: g.seed,
            ..serde_json::from_str(&std::fs::read_to_string(p)?)?
        },
        None => SynthSpec {
            n_depressed: a.n_depressed,
            n_control: a.n_control,
            history_days: a.days,
            recurrence_cycle_days: a.recurrence_days,
            seed: g.seed,
            ..Default::default()
        },
    };
    spec.validate()?;
    let out = output_path(&g.out_dir, &a.out)?;
    let mut cfg = RunConfig::new("synth", g);
    cfg.outputs = vec![out.clone()];
    cfg.extra = json!({ "spec": spec });
    cfg.announce()?;
    save_corpus(&synthesize(&spec)?, &out)?;
    eprintln!(
        "wrote {} users to {}",
        spec.n_depressed + spec.n_control,
        out.display()
    );
    Ok(())
}

fn preprocess(g: &GlobalArgs, a: &PreprocessArgs) -> Result<()> {
    let corpus = load_corpus(&a.input)?;
    let filter = FilterConfig {
        min_posts: a.min_posts,
        min_days: a.min_days,
        max_non_english_ratio: a.max_non_english,
    };
    let out = output_path(&g.out_dir, &a.out)?;
    let mut cfg = RunConfig::new("preprocess", g);
    cfg.inputs = vec![a.input.clone()];
    cfg.outputs = vec![out.clone()];
    cfg.extra = json!({ "filter": if a.no_filter { None } else { Some(filter) } });
    cfg.announce()?;
    let kept = if a.no_filter {
        corpus.clone()
    } else {
        filter_users(&corpus, &filter)
    };
    let results: Vec<_> = kept.users.par_iter().map(preprocess_timeline).collect();
    let mut report = PreprocessReport::default();
    let mut users = Vec::with_capacity(results.len());
    for (u, r) in results {
        report.merge(&r);
        users.push(u);
    }
    let mut cleaned = Corpus::new(corpus.name.clone(), users)?;
    cleaned.metadata = corpus.metadata.clone();
    save_corpus(&cleaned, &out)?;
    eprintln!(
        "kept {} of {} users; {} of {} posts are proper",
        cleaned.users.len(),
        corpus.users.len(),
        report.kept_count,
        report.input_count
    );
    Ok(())
}

fn features(g: &GlobalArgs, a: &FeaturesArgs) -> Result<()> {
    let out = output_path(&g.out_dir, &a.out)?;
    let mut cfg = RunConfig::new("features", g).with_scoring(&a.scoring);
    cfg.inputs = vec![a.input.clone()];
    cfg.outputs = vec![out.clone()];
    let (_, prepared) = prepare(&a.input, g)?;
    cfg.announce()?;
    let feats = corpus_features(&prepared, a.scoring.settings());
    write_feature_csv(create(&out)?, &feats)?;
    Ok(())
}

fn sequences(
    prepared: &[PreparedUser],
    settings: FeatureSettings,
    fc: &FeatureConfig,
) -> Result<Vec<Sequence>> {
    prepared
        .par_iter()
        .map(|u| assemble_sequence(&user_features(u, settings), fc))
        .collect()
}

fn train(g: &GlobalArgs, a: &TrainArgs) -> Result<()> {
    let fc = a.features.config(&a.scoring)?;
    let (model_cfg, train_cfg) = a.training.configs(g.seed)?;
    let out = output_path(&g.out_dir, &a.model_out)?;
    let mut cfg = RunConfig::new("train", g).with_scoring(&a.scoring);
    cfg.inputs = vec![a.input.clone()];
    cfg.features = Some(fc);
    cfg.model = Some(model_cfg);
    cfg.train = Some(train_cfg);
    let curve = output_path(&g.out_dir, Path::new("training_loss.json"))?;
    cfg.outputs = vec![out.clone(), sidecar_path(&out), curve.clone()];
    let (_, prepared) = prepare(&a.input, g)?;
    cfg.announce()?;
    let seqs = sequences(&prepared, a.scoring.settings(), &fc)?;
    let data: Vec<(&Sequence, bool)> = seqs
        .iter()
        .zip(&prepared)
        .map(|(s, u)| (s, u.label.is_depressed()))
        .collect();
    let mut model = TudModel::new(
        fc.episode_dim(encoder_from_selector(&g.encoder)?.dim()),
        &model_cfg,
    )?;
    let report = fit(&mut model, &data, &train_cfg)?;
    let meta = CheckpointMeta {
        version: CHECKPOINT_VERSION,
        dims: model.dims(),
        model: model_cfg,
        features: fc,
        train: train_cfg,
        denominator: a.scoring.denominator.into(),
        detector: g.detector.clone(),
        encoder: g.encoder.clone(),
    };
    save_checkpoint(&out, &model, &meta)?;
    write_json(&curve, &report)?;
    eprintln!(
        "final training loss {:.4}",
        report.epoch_loss.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn predict(g: &GlobalArgs, a: &PredictArgs) -> Result<()> {
    let ckpt = load_checkpoint(&a.model)?;
    let meta = &ckpt.meta;
    let out = output_path(&g.out_dir, &a.out)?;
    let mut cfg = RunConfig::new("predict", g);
    cfg.detector = meta.detector.clone();
    cfg.encoder = meta.encoder.clone();
    cfg.inputs = vec![a.input.clone(), a.model.clone()];
    cfg.outputs = vec![out.clone()];
    cfg.mode = Some(meta.features.mode);
    cfg.slide = Some(meta.features.slide);
    cfg.denominator = Some(meta.denominator);
    cfg.features = Some(meta.features);
    cfg.model = Some(meta.model);
    let resolved = GlobalArgs {
        detector: meta.detector.clone(),
        encoder: meta.encoder.clone(),
        ..g.clone()
    };
    let (_, prepared) = prepare(&a.input, &resolved)?;
    cfg.announce()?;
    let settings = FeatureSettings {
        mode: meta.features.mode,
        slide: meta.features.slide,
        denominator: meta.denominator,
    };
    let seqs = sequences(&prepared, settings, &meta.features)?;
    let probs: Vec<f64> = seqs
        .par_iter()
        .map(|s| ckpt.model.probability(s))
        .collect::<Result<_>>()?;
    let mut w = csv::Writer::from_writer(create(&out)?);
    w.write_record(["user_id", "label", "probability", "predicted"])?;
    for (u, p) in prepared.iter().zip(&probs) {
        let predicted = if predict_label(*p) {
            Label::Depressed
        } else {
            Label::Control
        };
        w.write_record([
            u.user_id.as_str(),
            u.label.as_str(),
            &format!("{p:.6}"),
            predicted.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn evaluate(g: &GlobalArgs, a: &EvaluateArgs) -> Result<()> {
    let (model_cfg, train_cfg) = a.training.configs(g.seed)?;
    let mut cfg = RunConfig::new("evaluate", g).with_scoring(&a.scoring);
    let spec = match a.model_kind {
        ModelKind::Tud => {
            let fc = a.features.config(&a.scoring)?;
            cfg.features = Some(fc);
            cfg.model = Some(model_cfg);
            ModelSpec::Tud {
                features: fc,
                model: model_cfg,
                train: train_cfg,
            }
        }
        ModelKind::Hts => ModelSpec::Hts {
            train: train_cfg,
            seed: model_cfg.seed,
        },
    };
    let options = CvOptions {
        folds: a.folds,
        seed: g.seed,
        denominator: a.scoring.denominator.into(),
    };
    let out = output_path(&g.out_dir, &a.out)?;
    cfg.inputs = vec![a.input.clone()];
    cfg.test_input = a.test.clone();
    cfg.outputs = vec![out.clone()];
    cfg.train = Some(train_cfg);
    cfg.extra =
        json!({ "folds": a.folds, "model_kind": format!("{:?}", a.model_kind).to_lowercase() });
    let (_, prepared) = prepare(&a.input, g)?;
    let test = a.test.as_ref().map(|t| prepare(t, g)).transpose()?;
    cfg.announce()?;
    let result = cross_validate(
        &prepared,
        &spec,
        test.as_ref().map(|(_, p)| p.as_slice()),
        &options,
    )?;
    write_json(
        &out,
        &json!({ "spec": spec, "options": options, "result": result }),
    )?;
    eprintln!(
        "held-out F1 {:.4} ± {:.4} over {} folds",
        result.heldout.f1.mean, result.heldout.f1.std, a.folds
    );
    Ok(())
}

fn grid(g: &GlobalArgs, a: &GridArgs) -> Result<()> {
    let (model, train) = a.training.configs(g.seed)?;
    let config = GridConfig {
        slides: a.slides.clone(),
        settings: a.settings.iter().map(|&s| s.into()).collect(),
        cv: CvOptions {
            folds: a.folds,
            seed: g.seed,
            denominator: a.denominator.into(),
        },
        model,
        train,
    };
    let out = output_path(&g.out_dir, &a.out)?;
    let held_csv = output_path(&g.out_dir, &a.heldout_csv)?;
    let test_csv = output_path(&g.out_dir, &a.test_csv)?;
    let mut cfg = RunConfig::new("grid", g);
    cfg.inputs = vec![a.input.clone()];
    cfg.test_input = a.test.clone();
    cfg.outputs = vec![out.clone(), held_csv.clone()];
    if a.test.is_some() {
        cfg.outputs.push(test_csv.clone());
    }
    cfg.denominator = Some(a.denominator.into());
    cfg.model = Some(model);
    cfg.train = Some(train);
    cfg.extra = json!({ "grid": config });
    let (_, prepared) = prepare(&a.input, g)?;
    let test = a.test.as_ref().map(|t| prepare(t, g)).transpose()?;
    cfg.announce()?;
    let report = run_experiment_grid(&prepared, test.as_ref().map(|(_, p)| p.as_slice()), &config)?;
    write_json(&out, &report)?;
    write_grid_csv(create(&held_csv)?, &report, false)?;
    if a.test.is_some() {
        write_grid_csv(create(&test_csv)?, &report, true)?;
    }
    Ok(())
}

fn stats(g: &GlobalArgs, a: &StatsArgs) -> Result<()> {
    let lexicon = match &a.lexicon {
        Some(p) => CategoryLexicon::load(p)?,
        None => CategoryLexicon::builtin(),
    };
    let out = output_path(&g.out_dir, &a.out)?;
    let mut cfg = RunConfig::new("stats", g).with_scoring(&a.scoring);
    cfg.inputs = a.inputs.clone();
    cfg.outputs = vec![out.clone()];
    cfg.extra = json!({ "lexicon": a.lexicon.as_ref().map_or("builtin".to_string(), |p| p.display().to_string()) });
    let mut datasets = Vec::new();
    let mut lci_reports = Vec::new();
    let mut levels = Vec::new();
    for path in &a.inputs {
        let (corpus, prepared) = prepare(path, g)?;
        let cleaned: Vec<_> = corpus
            .users
            .iter()
            .map(|u| {
                if u.is_preprocessed() {
                    u.clone()
                } else {
                    preprocess_timeline(u).0
                }
            })
            .collect();
        let cleaned = Corpus {
            users: cleaned,
            ..corpus
        };
        datasets.push(dataset_stats(&cleaned)?);
        lci_reports.push(lci_analysis(
            &cleaned.name,
            &build_digest(&cleaned.users, Label::Depressed),
            &build_digest(&cleaned.users, Label::Control),
            &lexicon,
        )?);
        levels.push(json!({
            "dataset": cleaned.name,
            "levels": level_distribution(&corpus_features(&prepared, a.scoring.settings())),
        }));
    }
    cfg.announce()?;
    let summary = lci_across_datasets(&lci_reports)?;
    write_json(
        &out,
        &json!({ "datasets": datasets, "lci": lci_reports, "lci_summary": summary, "level_distribution": levels }),
    )?;
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    if let Some(n) = g.workers {
        if n == 0 {
            return Err(Error::Config("--workers must be positive".into()));
        }
        // a global pool can only be installed once per process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    std::fs::create_dir_all(&g.out_dir)?;
    match &cli.command {
        Command::Synth(a) => synth(g, a),
        Command::Preprocess(a) => preprocess(g, a),
        Command::Features(a) => features(g, a),
        Command::Train(a) => train(g, a),
        Command::Predict(a) => predict(g, a),
        Command::Evaluate(a) => evaluate(g, a),
        Command::Grid(a) => grid(g, a),
        Command::Stats(a) => stats(g, a),
    }
}

/// Parse `args` and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
