//! Per-class corpus statistics, lexicon category intensity and the
//! distribution of episode levels.

use tud::analysis::{
    build_digest, dataset_stats, lci_analysis, level_distribution, CategoryLexicon,
};
use tud::corpus::{synthesize, Corpus, Label, SynthSpec};
use tud::pipeline::{corpus_features, prepare_corpus, FeatureSettings};
use tud::preprocess::preprocess_timeline;
use tud::scoring::{Clinical, Denominator, ScoringMode, Slide};
use tud::semantics::reference_encoder;
use tud::symptoms::LexiconDetector;

fn main() -> tud::Result<()> {
    let raw = synthesize(&SynthSpec {
        n_depressed: 25,
        n_control: 25,
        seed: 9,
        ..Default::default()
    })?;
    let corpus = Corpus {
        users: raw.users.iter().map(|u| preprocess_timeline(u).0).collect(),
        ..raw
    };

    let stats = dataset_stats(&corpus)?;
    println!(
        "{:<16} {:>16} {:>16} {:>9}",
        "statistic", "depressed", "control", "p"
    );
    for r in &stats.rows {
        println!(
            "{:<16} {:>8.2} ± {:<5.2} {:>8.2} ± {:<5.2} {:>9.2e}",
            r.name,
            r.depressed_mean,
            r.depressed_std,
            r.control_mean,
            r.control_std,
            r.p.unwrap_or(f64::NAN)
        );
    }

    let lex = CategoryLexicon::builtin();
    let lci = lci_analysis(
        &corpus.name,
        &build_digest(&corpus.users, Label::Depressed),
        &build_digest(&corpus.users, Label::Control),
        &lex,
    )?;
    println!(
        "\n{:<18} {:>7} {:>7} {:>7}",
        "category", "LCI_d", "LCI_c", "dev"
    );
    for r in &lci.rows {
        println!(
            "{:<18} {:>7.2} {:>7.2} {:>+7.2}",
            r.category, r.lci_d, r.lci_c, r.lci_dev
        );
    }

    let encoder = reference_encoder(32, 0)?;
    let users = prepare_corpus(&corpus, &LexiconDetector::builtin(), encoder.as_ref());
    let settings = FeatureSettings {
        mode: ScoringMode::standard(Clinical::NonClinical),
        slide: Slide::Fourteen,
        denominator: Denominator::ActiveDays,
    };
    println!(
        "\nlevel shares: {:#?}",
        level_distribution(&corpus_features(&users, settings))
    );
    Ok(())
}
