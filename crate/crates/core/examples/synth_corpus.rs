//! Generate a small synthetic corpus and write it as JSON lines.
//!
//! `cargo run --example synth_corpus -- out.jsonl`

use tud::corpus::{save_corpus, synthesize, Label, SynthSpec};

fn main() -> tud::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "synthetic.jsonl".into());
    let spec = SynthSpec {
        n_depressed: 20,
        n_control: 20,
        history_days: 90,
        recurrence_cycle_days: Some(21),
        seed: 42,
        ..Default::default()
    };
    let corpus = synthesize(&spec)?;

    for label in [Label::Depressed, Label::Control] {
        let users: Vec<_> = corpus.users.iter().filter(|u| u.label == label).collect();
        let posts: usize = users.iter().map(|u| u.posts.len()).sum();
        let span: u32 = users.iter().map(|u| u.span_days()).sum();
        println!(
            "{label:>9}: {} users, {:.1} posts/user, {:.1} days/user (expected {:.1} posts)",
            users.len(),
            posts as f64 / users.len() as f64,
            span as f64 / users.len() as f64,
            spec.expected_posts(label),
        );
    }
    save_corpus(&corpus, out.as_ref())?;
    println!("wrote {} posts to {out}", corpus.post_count());
    Ok(())
}
