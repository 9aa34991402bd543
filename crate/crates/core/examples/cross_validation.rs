//! Stratified k-fold evaluation of the classifier against the history
//! embedding baseline, with a paired t-test over per-fold F1.

use tud::analysis::{cross_validate, paired_t, CvOptions, ModelSpec};
use tud::corpus::{synthesize, SynthSpec};
use tud::pipeline::prepare_corpus;
use tud::scoring::{Clinical, ScoringMode, Slide};
use tud::semantics::reference_encoder;
use tud::symptoms::LexiconDetector;
use tud::tud::{FeatureConfig, ModelConfig, TrainConfig};

fn main() -> tud::Result<()> {
    let detector = LexiconDetector::builtin();
    let encoder = reference_encoder(128, 0)?;
    let train = synthesize(&SynthSpec {
        n_depressed: 40,
        n_control: 40,
        seed: 3,
        ..Default::default()
    })?;
    let test = synthesize(&SynthSpec {
        n_depressed: 15,
        n_control: 15,
        seed: 4,
        ..Default::default()
    })?;
    let train = prepare_corpus(&train, &detector, encoder.as_ref());
    let test = prepare_corpus(&test, &detector, encoder.as_ref());

    let options = CvOptions {
        folds: 5,
        seed: 0,
        ..Default::default()
    };
    let train_cfg = TrainConfig {
        epochs: 6,
        learning_rate: 3e-3,
        ..Default::default()
    };
    let tud = ModelSpec::Tud {
        features: FeatureConfig::all_features(
            ScoringMode::standard(Clinical::NonClinical),
            Slide::Fourteen,
        ),
        model: ModelConfig {
            hidden: 32,
            ..Default::default()
        },
        train: train_cfg,
    };
    let hts = ModelSpec::Hts {
        train: train_cfg,
        seed: 0,
    };

    let a = cross_validate(&train, &tud, Some(&test), &options)?;
    let b = cross_validate(&train, &hts, Some(&test), &options)?;
    for (name, r) in [("all-feats", &a), ("HTS", &b)] {
        let t = r.test.expect("external set given");
        println!(
            "{name:<10} held-out F1 {:.3} ± {:.3}   test F1 {:.3} ± {:.3}",
            r.heldout.f1.mean, r.heldout.f1.std, t.f1.mean, t.f1.std
        );
    }
    let t = paired_t(&a.heldout_f1(), &b.heldout_f1())?;
    println!("paired t = {:.3}, p = {:.4}", t.t, t.p);
    Ok(())
}
