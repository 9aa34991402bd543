//! Build episode sequences, train the BiLSTM-attention classifier, inspect
//! its attention and round-trip a checkpoint.

use tud::corpus::{synthesize, SynthSpec};
use tud::pipeline::{prepare_corpus, user_features, FeatureSettings};
use tud::scoring::{Clinical, Denominator, ScoringMode, Slide};
use tud::semantics::reference_encoder;
use tud::symptoms::LexiconDetector;
use tud::tud::{
    assemble_sequence, fit, load_checkpoint, save_checkpoint, CheckpointMeta, FeatureConfig,
    ModelConfig, Sequence, TrainConfig, TudModel, CHECKPOINT_VERSION,
};

fn main() -> tud::Result<()> {
    let corpus = synthesize(&SynthSpec {
        n_depressed: 30,
        n_control: 30,
        seed: 1,
        ..Default::default()
    })?;
    let encoder = reference_encoder(128, 0)?;
    let users = prepare_corpus(&corpus, &LexiconDetector::builtin(), encoder.as_ref());

    let mode = ScoringMode::standard(Clinical::NonClinical);
    let settings = FeatureSettings {
        mode,
        slide: Slide::Fourteen,
        denominator: Denominator::ActiveDays,
    };
    let features = FeatureConfig::all_features(mode, Slide::Fourteen);
    let seqs: Vec<Sequence> = users
        .iter()
        .map(|u| assemble_sequence(&user_features(u, settings), &features))
        .collect::<Result<_, _>>()?;
    let data: Vec<_> = seqs
        .iter()
        .zip(&users)
        .map(|(s, u)| (s, u.label.is_depressed()))
        .collect();

    let model_cfg = ModelConfig {
        hidden: 32,
        ..Default::default()
    };
    let train_cfg = TrainConfig {
        epochs: 8,
        learning_rate: 3e-3,
        ..Default::default()
    };
    let mut model = TudModel::new(features.episode_dim(encoder.dim()), &model_cfg)?;
    println!(
        "{} parameters, episode width {}",
        model.params().len(),
        features.episode_dim(encoder.dim())
    );
    let report = fit(&mut model, &data, &train_cfg)?;
    for (e, l) in report.epoch_loss.iter().enumerate() {
        println!("epoch {:>2}  loss {l:.4}", e + 1);
    }

    let f = model.forward(&seqs[0])?;
    let peak = f.attention.iter().cloned().fold(0.0, f64::max);
    println!(
        "{} ({}): p = {:.3}, {} episodes, peak attention {peak:.3}",
        users[0].user_id,
        users[0].label,
        f.probability,
        f.attention.len()
    );

    let dir = std::env::temp_dir().join("tud_example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("model.bin");
    let meta = CheckpointMeta {
        version: CHECKPOINT_VERSION,
        dims: model.dims(),
        model: model_cfg,
        features,
        train: train_cfg,
        denominator: Denominator::ActiveDays,
        detector: "lexicon:builtin".into(),
        encoder: "hash:128:0".into(),
    };
    save_checkpoint(&path, &model, &meta)?;
    let restored = load_checkpoint(&path)?;
    println!(
        "checkpoint {} restores p = {:.3}",
        path.display(),
        restored.model.probability(&seqs[0])?
    );
    Ok(())
}
