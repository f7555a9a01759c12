//! Noise-induced drift coefficient against the delay/noise-time ratio.
//!
//! Prints the OU-limit curve next to harmonic-noise curves for a few
//! `(Γ, Ω²)` pairs.

use sddekit::limit::{coeff_general, coeff_ou};

fn main() {
    let rows = [(1.0, 1.0), (10.0, 10.0), (1.0, 4.0), (100.0, 100.0)];
    print!("{:>6} {:>9}", "ratio", "ou");
    for (g, o) in rows {
        print!(" {:>14}", format!("G={g},O2={o}"));
    }
    println!();
    for i in 0..=20 {
        let r = i as f64 * 0.5;
        print!("{r:>6.1} {:>9.5}", coeff_ou(r));
        for (g, o) in rows {
            print!(" {:>14.5}", coeff_general(g, o, r));
        }
        println!();
    }
}
