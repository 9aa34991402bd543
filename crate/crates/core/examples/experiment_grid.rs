//! A reduced ablation / single-feature / baseline grid, written as CSV.

use tud::analysis::{run_experiment_grid, write_grid_csv, CvOptions, GridConfig};
use tud::corpus::{synthesize, SynthSpec};
use tud::pipeline::prepare_corpus;
use tud::scoring::{Clinical, Slide};
use tud::semantics::reference_encoder;
use tud::symptoms::LexiconDetector;
use tud::tud::{ModelConfig, TrainConfig};

fn main() -> tud::Result<()> {
    let corpus = synthesize(&SynthSpec {
        n_depressed: 16,
        n_control: 16,
        seed: 5,
        ..Default::default()
    })?;
    let encoder = reference_encoder(64, 0)?;
    let users = prepare_corpus(&corpus, &LexiconDetector::builtin(), encoder.as_ref());

    let config = GridConfig {
        slides: vec![Slide::Fourteen],
        settings: vec![Clinical::Clinical, Clinical::NonClinical],
        cv: CvOptions {
            folds: 4,
            seed: 0,
            ..Default::default()
        },
        model: ModelConfig {
            hidden: 16,
            ..Default::default()
        },
        train: TrainConfig {
            epochs: 4,
            learning_rate: 5e-3,
            ..Default::default()
        },
    };
    let report = run_experiment_grid(&users, None, &config)?;
    println!("{} cell runs plus HTS", report.cell_result_count());
    write_grid_csv(std::io::stdout().lock(), &report, false)?;
    Ok(())
}
