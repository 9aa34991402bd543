//! Detect symptoms in posts and build per-day expression vectors.

use chrono::NaiveDate;
use tud::symptoms::{dsev_for_day, LexiconDetector, SymptomDetector};

fn main() {
    let detector = LexiconDetector::builtin();
    let day = NaiveDate::from_ymd_opt(2021, 3, 14).unwrap();
    let posts = [
        "i lost interest in everything, nothing is fun anymore",
        "cannot sleep again, awake all night and so tired",
        "feel so sad and worthless today",
        "great run this morning with friends",
    ];
    for p in posts {
        let found: Vec<_> = detector.detect(p).iter().map(|s| s.name()).collect();
        println!("{p:?} -> {found:?}");
    }
    let dsev = dsev_for_day(day, &posts, &detector);
    println!("\nDSEV for {day}: {:?}", dsev.bits());
}
