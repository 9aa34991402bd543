//! Recurrence frequency and inertia of binarized episode series.

use tud::temporal::{compress, cycle_count, drfs, inertia};

fn show(bte: &[u8]) {
    let cbte = compress(bte);
    println!(
        "{:<28} cbte {:<14} cycles {}  drfs {:.3}  is {:.3}",
        format!("{bte:?}"),
        format!("{cbte:?}"),
        cycle_count(&cbte),
        drfs(bte),
        inertia(bte)
    );
}

fn main() {
    show(&[0, 0, 0, 0, 0, 0]);
    show(&[1, 1, 1, 1, 1, 1]);
    show(&[1, 0, 1, 0, 1, 0]);
    show(&[1, 1, 0, 0, 1, 1, 1, 0, 1]);
    show(&[0, 1, 1, 1, 0, 0]);
}
