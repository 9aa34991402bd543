//! Slide two-week episodes over a timeline and score them in every mode.

use tud::corpus::{synthesize, SynthSpec};
use tud::preprocess::preprocess_timeline;
use tud::scoring::{
    absence_ratio, build_episodes, daily_records, depression_score, level_for, Clinical,
    ScoringMode, Sensitivity, Slide,
};
use tud::symptoms::LexiconDetector;

fn main() {
    let corpus = synthesize(&SynthSpec {
        n_depressed: 1,
        n_control: 1,
        history_days: 60,
        ..Default::default()
    })
    .unwrap();
    let (user, _) = preprocess_timeline(&corpus.users[0]);
    let days = daily_records(&user, &LexiconDetector::builtin());
    let episodes = build_episodes(&days, Slide::Seven);

    let modes = [
        ScoringMode::standard(Clinical::Clinical),
        ScoringMode::standard(Clinical::NonClinical),
        ScoringMode::new(Clinical::NonClinical, Sensitivity::Mde),
    ];
    println!(
        "{} active days, {} episodes (slide 7)",
        days.len(),
        episodes.len()
    );
    println!(
        "{:<12} {:>6} {:>6}  {:>18} {:>18} {:>18}",
        "start", "active", "AR", modes[0], modes[1], modes[2]
    );
    for ep in &episodes {
        let cells: Vec<String> = modes
            .iter()
            .map(|&m| {
                let s = depression_score(ep, m);
                format!(
                    "{:>2} {}",
                    s.dep_score,
                    level_for(s.dep_score, m.sensitivity)
                )
            })
            .collect();
        println!(
            "{:<12} {:>6} {:>6.2}  {:>18} {:>18} {:>18}",
            ep.start_day.to_string(),
            ep.active_days,
            absence_ratio(ep),
            cells[0],
            cells[1],
            cells[2]
        );
    }
}
