//! Clean individual posts and a whole timeline.

use tud::corpus::{synthesize, SynthSpec};
use tud::preprocess::{preprocess_post, preprocess_timeline, Cleaned};

fn main() {
    let posts = [
        (
            "I've been sooo tired lately... https://t.co/x #mood",
            false,
            false,
        ),
        ("Looong day today", false, false),
        ("I was just diagnosed with depression", false, false),
        ("RT @friend: great game tonight", false, false),
        ("ok", false, false),
        ("can't sleep again, 3am and wide awake 😞", false, false),
        ("thanks for the help!", false, true),
    ];
    for (text, retweet, reply) in posts {
        match preprocess_post(text, retweet, reply) {
            Cleaned::Kept(clean) => println!("kept    {text:?}\n     -> {clean:?}"),
            Cleaned::Removed(rule) => println!("removed {text:?} ({rule})"),
        }
    }

    let corpus = synthesize(&SynthSpec {
        n_depressed: 1,
        n_control: 1,
        ..Default::default()
    })
    .unwrap();
    let (clean, report) = preprocess_timeline(&corpus.users[0]);
    println!(
        "\n{}: {} of {} posts kept, removed {:?}",
        clean.user_id, report.kept_count, report.input_count, report.removed_by_rule
    );
}
