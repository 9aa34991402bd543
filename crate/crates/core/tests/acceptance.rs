//! Acceptance criteria. Each check prints one `PASS`/`FAIL` line; the
//! process exits non-zero when any check fails.

use std::time::{Duration, Instant};

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use tud::analysis::lci::summarize_deviations;
use tud::analysis::{
    cross_validate, paired_t, run_experiment_grid, welch_t, CvOptions, GridConfig, ModelSpec,
};
use tud::corpus::{synthesize, SynthSpec};
use tud::pipeline::{prepare_corpus, PreparedUser};
use tud::preprocess::{preprocess_post, Cleaned, RemovalRule};
use tud::scoring::{
    depression_score_with, level_of, symptom_score_for_percent, Clinical, Denominator, Episode,
    Level, ScoringMode, Sensitivity, Slide,
};
use tud::semantics::reference_encoder;
use tud::symptoms::{Dsev, LexiconDetector, Symptom, SymptomSet};
use tud::temporal::{compress, drfs, inertia};
use tud::tud::{gradient_check, FeatureConfig, ModelConfig, Sequence, TrainConfig, TudModel};

const SCORING_EPISODES: usize = 10_000;
const SCORING_BUDGET: Duration = Duration::from_secs(10);
const BTE_LEN: usize = 12;
const TEMPORAL_BUDGET: Duration = Duration::from_secs(5);
const LCI_TOL: f64 = 0.01;
const TTEST_TOL: f64 = 1e-6;
const GRAD_FIXTURES: usize = 50;
const GRAD_TOL: f64 = 1e-4;
const GRAD_BUDGET: Duration = Duration::from_secs(60);
const ATTN_FORWARDS: usize = 1000;
const ATTN_TOL: f64 = 1e-9;
const E2E_USERS_PER_CLASS: usize = 200;
const E2E_ALL_FEATS_F1: f64 = 0.90;
const E2E_NO_ES_F1: f64 = 0.75;
const E2E_BUDGET: Duration = Duration::from_secs(15 * 60);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn d0() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 1).unwrap()
}

// --- 1 -------------------------------------------------------------------

struct RawEpisode {
    total_days: u32,
    /// Per window day: `None` inactive, `Some(None)` active without proper
    /// posts, `Some(Some(bits))` active with the expressed symptom bits.
    days: Vec<Option<Option<[bool; 10]>>>,
}

fn random_episode(rng: &mut impl Rng) -> RawEpisode {
    let total_days = rng.random_range(1..=14);
    let p_active = rng.random::<f64>();
    let p_symptom = rng.random::<f64>();
    let days = (0..total_days)
        .map(|_| {
            if !rng.random_bool(p_active) {
                return None;
            }
            if rng.random_bool(0.15) {
                return Some(None);
            }
            Some(Some(std::array::from_fn(|_| rng.random_bool(p_symptom))))
        })
        .collect();
    RawEpisode { total_days, days }
}

fn to_episode(raw: &RawEpisode) -> Episode {
    let mut dsevs = Vec::new();
    let mut active = 0;
    for (i, d) in raw.days.iter().enumerate() {
        let day = d0() + chrono::Duration::days(i as i64);
        match d {
            None => {}
            Some(None) => active += 1,
            Some(Some(bits)) => {
                active += 1;
                let set: SymptomSet = (0..10)
                    .filter(|&k| bits[k])
                    .map(|k| Symptom::from_id(k).unwrap())
                    .collect();
                dsevs.push(Dsev::from_set(day, set));
            }
        }
    }
    Episode {
        start_day: d0(),
        end_day: d0() + chrono::Duration::days(raw.total_days as i64 - 1),
        dsevs,
        active_days: active,
        total_days: raw.total_days,
    }
}

/// Integer-only recount: symptom score from `100·days` against `threshold·denominator`.
fn brute_score(raw: &RawEpisode, clinical: bool, mde: bool, window_denominator: bool) -> u32 {
    let active = raw.days.iter().filter(|d| d.is_some()).count() as u32;
    if active == 0 {
        return 0;
    }
    let denom = if window_denominator {
        raw.total_days
    } else {
        active
    };
    // columns: 0..=6 as is, 7 = agitation or retardation, 8 = suicidal ideation
    let mut counts = [0u32; 9];
    for bits in raw.days.iter().flatten().flatten() {
        for (k, c) in counts.iter_mut().enumerate() {
            let hit = match k {
                0..=6 => bits[k],
                7 => bits[7] || bits[8],
                _ => bits[9],
            };
            *c += u32::from(hit);
        }
    }
    let gate = counts[0] * 2 >= denom || counts[1] * 2 >= denom;
    if clinical && !gate {
        return 0;
    }
    if mde {
        return counts.iter().filter(|&&c| c > 0).count() as u32;
    }
    counts
        .iter()
        .map(|&c| {
            let pct100 = 100 * c;
            if pct100 >= 85 * denom {
                3
            } else if pct100 >= 50 * denom {
                2
            } else if pct100 >= 20 * denom {
                1
            } else {
                0
            }
        })
        .sum()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0usize;
    let mut comparisons = 0usize;
    for _ in 0..SCORING_EPISODES {
        let raw = random_episode(&mut rng);
        let ep = to_episode(&raw);
        for clinical in [true, false] {
            for mde in [true, false] {
                for window in [true, false] {
                    let mode = ScoringMode::new(
                        if clinical {
                            Clinical::Clinical
                        } else {
                            Clinical::NonClinical
                        },
                        if mde {
                            Sensitivity::Mde
                        } else {
                            Sensitivity::Standard
                        },
                    );
                    let denom = if window {
                        Denominator::WindowDays
                    } else {
                        Denominator::ActiveDays
                    };
                    let got = depression_score_with(&ep, mode, denom).dep_score;
                    comparisons += 1;
                    mismatches += usize::from(got != brute_score(&raw, clinical, mde, window));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        mismatches == 0 && elapsed < SCORING_BUDGET,
        format!(
            "{mismatches} mismatches in {comparisons} comparisons, {:.2?}",
            elapsed
        ),
    )
}

// --- 2 -------------------------------------------------------------------

fn bte_string(bte: &[u8]) -> String {
    bte.iter()
        .map(|&b| if b == 1 { '1' } else { '0' })
        .collect()
}

fn naive_drfs(s: &str) -> f64 {
    let mut c = s.to_string();
    loop {
        let next = c.replace("00", "0").replace("11", "1");
        if next == c {
            break;
        }
        c = next;
    }
    if c.is_empty() {
        return 0.0;
    }
    let cycles = (0..c.len())
        .filter(|&i| c.get(i..i + 3) == Some("101"))
        .count();
    cycles as f64 / c.len() as f64
}

fn naive_inertia(s: &str) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    let pairs = (0..s.len())
        .filter(|&i| s.get(i..i + 2) == Some("11"))
        .count();
    pairs as f64 / s.len() as f64
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut bad = 0;
    for mask in 0u32..(1 << BTE_LEN) {
        let bte: Vec<u8> = (0..BTE_LEN).map(|i| ((mask >> i) & 1) as u8).collect();
        let s = bte_string(&bte);
        let c = compress(&bte);
        let ok =
            drfs(&bte) == naive_drfs(&s) && inertia(&bte) == naive_inertia(&s) && compress(&c) == c;
        bad += usize::from(!ok);
    }
    let elapsed = start.elapsed();
    outcome(
        bad == 0 && elapsed < TEMPORAL_BUDGET,
        format!("{bad} of {} BTEs disagree, {:.2?}", 1 << BTE_LEN, elapsed),
    )
}

// --- 3 -------------------------------------------------------------------

fn criterion_3() -> Outcome {
    let just_below = |x: f64| x - 1e-9;
    let fractions = [
        0.0,
        just_below(20.0),
        20.0,
        just_below(50.0),
        50.0,
        just_below(85.0),
        85.0,
        100.0,
    ];
    let scores: Vec<u32> = fractions
        .iter()
        .map(|&p| symptom_score_for_percent(p))
        .collect();
    let scores_ok = scores == [0, 0, 1, 1, 2, 2, 3, 3];
    let boundaries = [0, 3, 4, 8, 9, 13, 14, 18, 19, 26, 27];
    let expected = [
        Level::None,
        Level::None,
        Level::Minimal,
        Level::Minimal,
        Level::Mild,
        Level::Mild,
        Level::Moderate,
        Level::Moderate,
        Level::ModeratelySevere,
        Level::ModeratelySevere,
        Level::Severe,
    ];
    let levels: Vec<Level> = boundaries.iter().map(|&s| level_of(s)).collect();
    let levels_ok = levels == expected;
    outcome(
        scores_ok && levels_ok,
        format!("symptom scores {scores:?}, levels {levels:?}"),
    )
}

// --- 4 -------------------------------------------------------------------

fn criterion_4() -> Outcome {
    let s = summarize_deviations("authentic", &[13.74, 7.40, 7.61]);
    let pass = (s.lci_dev_avg - 9.58).abs() <= LCI_TOL && (s.lci_dev_std - 3.60).abs() <= LCI_TOL;
    outcome(
        pass,
        format!("avg {:.4}, std {:.4}", s.lci_dev_avg, s.lci_dev_std),
    )
}

// --- 5 -------------------------------------------------------------------

#[derive(Deserialize)]
struct TCase {
    a: Vec<f64>,
    b: Vec<f64>,
    welch_t: f64,
    welch_p: f64,
    paired_t: Option<f64>,
    paired_p: Option<f64>,
}

#[derive(Deserialize)]
struct TFixtures {
    cases: Vec<TCase>,
}

fn criterion_5() -> Outcome {
    let text = include_str!("fixtures/ttest.json");
    let fx: TFixtures = serde_json::from_str(text).expect("fixture file parses");
    let mut worst: f64 = 0.0;
    let mut paired_cases = 0;
    for c in &fx.cases {
        let w = welch_t(&c.a, &c.b).expect("welch");
        worst = worst
            .max((w.t - c.welch_t).abs())
            .max((w.p - c.welch_p).abs());
        if let (Some(t), Some(p)) = (c.paired_t, c.paired_p) {
            let r = paired_t(&c.a, &c.b).expect("paired");
            worst = worst.max((r.t - t).abs()).max((r.p - p).abs());
            paired_cases += 1;
        }
    }
    outcome(
        worst <= TTEST_TOL && paired_cases >= 20 && fx.cases.len() >= 20,
        format!(
            "{} Welch and {paired_cases} paired cases, max |Δ| {worst:.2e}",
            fx.cases.len()
        ),
    )
}

// --- 6 -------------------------------------------------------------------

fn random_sequence(rng: &mut impl Rng, len: usize, dim: usize) -> Sequence {
    let values = (0..len * dim)
        .map(|_| rng.random_range(-1.0f32..1.0))
        .collect();
    Sequence::new(values, dim).unwrap()
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for k in 0..GRAD_FIXTURES {
        let dim = rng.random_range(1..=6);
        let hidden = rng.random_range(1..=8);
        let len = rng.random_range(1..=6);
        let config = ModelConfig {
            hidden,
            dropout: 0.0,
            seed: k as u64,
        };
        let model = TudModel::new(dim, &config).unwrap();
        let seq = random_sequence(&mut rng, len, dim);
        let report = gradient_check(&model, &seq, rng.random_bool(0.5)).unwrap();
        worst = worst.max(report.max_rel_error);
        checked += report.checked;
    }
    let elapsed = start.elapsed();
    outcome(
        worst < GRAD_TOL && elapsed < GRAD_BUDGET,
        format!(
            "{GRAD_FIXTURES} fixtures, {checked} entries, max rel error {worst:.2e}, {:.2?}",
            elapsed
        ),
    )
}

// --- 7 -------------------------------------------------------------------

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_sum: f64 = 0.0;
    for k in 0..ATTN_FORWARDS {
        let dim = rng.random_range(1..=8);
        let hidden = rng.random_range(1..=8);
        let len = rng.random_range(1..=20);
        let model = TudModel::new(
            dim,
            &ModelConfig {
                hidden,
                dropout: 0.0,
                seed: k as u64,
            },
        )
        .unwrap();
        let f = model.forward(&random_sequence(&mut rng, len, dim)).unwrap();
        worst_sum = worst_sum.max((f.attention.iter().sum::<f64>() - 1.0).abs());
    }

    // identical hidden states must receive identical weight
    let mut worst_uniform: f64 = 0.0;
    for k in 0..50 {
        let hidden = rng.random_range(1..=8);
        let len = rng.random_range(1..=20);
        let model = TudModel::new(
            3,
            &ModelConfig {
                hidden,
                dropout: 0.0,
                seed: 1000 + k,
            },
        )
        .unwrap();
        let state: Vec<f64> = (0..2 * hidden)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let states: Vec<f64> = state
            .iter()
            .copied()
            .cycle()
            .take(len * 2 * hidden)
            .collect();
        let (alpha, _) = model.attention_over(&states, &state).unwrap();
        let u = 1.0 / len as f64;
        worst_uniform = alpha
            .iter()
            .fold(worst_uniform, |m, a| m.max((a - u).abs()));
    }
    outcome(
        worst_sum <= ATTN_TOL && worst_uniform <= ATTN_TOL,
        format!("max |Σα−1| {worst_sum:.2e} over {ATTN_FORWARDS} forwards, max |α−1/T| {worst_uniform:.2e}"),
    )
}

// --- 8 -------------------------------------------------------------------

fn synthetic_users(n: usize, days: u32, seed: u64) -> Vec<PreparedUser> {
    let spec = SynthSpec {
        n_depressed: n,
        n_control: n,
        history_days: days,
        seed,
        ..Default::default()
    };
    let corpus = synthesize(&spec).unwrap();
    let encoder = reference_encoder(512, 0).unwrap();
    prepare_corpus(&corpus, &LexiconDetector::builtin(), encoder.as_ref())
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let users = synthetic_users(E2E_USERS_PER_CLASS, 120, 7);
    let mode = ScoringMode::standard(Clinical::NonClinical);
    let options = CvOptions {
        folds: 10,
        seed: 0,
        denominator: Denominator::ActiveDays,
    };
    let run = |features: FeatureConfig| {
        let spec = ModelSpec::Tud {
            features,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
        };
        cross_validate(&users, &spec, None, &options)
            .unwrap()
            .heldout
            .f1
            .mean
    };
    let all = run(FeatureConfig::all_features(mode, Slide::Fourteen));
    let no_es = run(FeatureConfig::all_features(mode, Slide::Fourteen).with_es(false));
    let elapsed = start.elapsed();
    outcome(
        all >= E2E_ALL_FEATS_F1 && no_es >= E2E_NO_ES_F1 && elapsed < E2E_BUDGET,
        format!("all-feats F1 {all:.4}, -ES F1 {no_es:.4}, {:.1?}", elapsed),
    )
}

// --- 9 -------------------------------------------------------------------

fn criterion_9() -> Outcome {
    let train = synthetic_users(6, 60, 11);
    let test = synthetic_users(3, 60, 12);
    let config = GridConfig {
        slides: vec![Slide::Seven, Slide::Fourteen],
        settings: vec![Clinical::Clinical, Clinical::NonClinical],
        cv: CvOptions {
            folds: 3,
            seed: 5,
            denominator: Denominator::ActiveDays,
        },
        model: ModelConfig {
            hidden: 4,
            dropout: 0.1,
            seed: 9,
        },
        train: TrainConfig {
            epochs: 2,
            batch_size: 4,
            learning_rate: 1e-2,
            seed: 10,
        },
    };
    let render = || {
        serde_json::to_string_pretty(&run_experiment_grid(&train, Some(&test), &config).unwrap())
            .unwrap()
    };
    let first = render();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap();
    let second = pool.install(render);
    outcome(
        first == second,
        format!("{} bytes, identical: {}", first.len(), first == second),
    )
}

// --- 10 ------------------------------------------------------------------

fn criterion_10() -> Outcome {
    let cases: [(&str, Cleaned); 4] = [
        ("I've been sad", Cleaned::Kept("i have been sad".into())),
        ("Looong day today", Cleaned::Kept("long day today".into())),
        (
            "I was just diagnosed with depression",
            Cleaned::Removed(RemovalRule::SelfDisclosure),
        ),
        ("ok", Cleaned::Removed(RemovalRule::MinLength)),
    ];
    let failures: Vec<String> = cases
        .iter()
        .filter_map(|(input, want)| {
            let got = preprocess_post(input, false, false);
            (got != *want).then(|| format!("{input:?} gave {got:?}"))
        })
        .collect();
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "4 goldens".into()
        } else {
            failures.join("; ")
        },
    )
}

type Check = fn() -> Outcome;

fn main() {
    let criteria: [(&str, Check); 10] = [
        ("scoring oracle equivalence", criterion_1),
        ("temporal-pattern exhaustive check", criterion_2),
        ("threshold table", criterion_3),
        ("LCI deviation summary", criterion_4),
        ("t-test reference values", criterion_5),
        ("gradient check", criterion_6),
        ("attention normalization", criterion_7),
        ("synthetic end-to-end", criterion_8),
        ("grid reproducibility", criterion_9),
        ("preprocessing goldens", criterion_10),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = format!("criterion {}", i + 1);
        if !filter.is_empty()
            && !filter
                .iter()
                .any(|f| id.ends_with(&format!(" {f}")) || name.contains(f.as_str()))
        {
            continue;
        }
        let o = check();
        failed += usize::from(!o.pass);
        println!(
            "{} {id}: {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
