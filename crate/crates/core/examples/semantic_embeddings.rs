//! Day, episode and whole-history sentence embedding averages.

use tud::corpus::{synthesize, SynthSpec};
use tud::preprocess::preprocess_timeline;
use tud::semantics::{atea, dlsea, elsea, reference_encoder};

fn main() -> tud::Result<()> {
    let encoder = reference_encoder(64, 0)?;
    let a = encoder.encode("i can not sleep at night");
    let b = encoder.encode("no sleep again tonight");
    let c = encoder.encode("the match was great fun");
    println!("cos(sleep, sleep) = {:.3}", a.cosine(&b));
    println!("cos(sleep, match) = {:.3}", a.cosine(&c));

    let day1 = dlsea(&["so tired today", "need more sleep"], encoder.as_ref());
    let day2 = dlsea(&["great day at the park"], encoder.as_ref());
    let episode = elsea([&day1, &day2], encoder.dim());
    println!("episode embedding norm {:.3} over two days", episode.norm());

    let corpus = synthesize(&SynthSpec {
        n_depressed: 1,
        n_control: 1,
        ..Default::default()
    })?;
    let histories: Vec<_> = corpus
        .users
        .iter()
        .map(|u| atea(&preprocess_timeline(u).0, encoder.as_ref()))
        .collect();
    println!(
        "history similarity depressed vs control: {:.3}",
        histories[0].cosine(&histories[1])
    );
    Ok(())
}
