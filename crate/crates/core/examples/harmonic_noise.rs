//! Harmonic noise: one path, then stationary statistics against theory.

use sddekit::noise::{noise_statistics, sample_stationary, theoretical_autocovariance, ExactTransition, HarmonicParams};
use sddekit::rng::stream;

fn main() -> sddekit::Result<()> {
    let params = HarmonicParams::new(1.0, 4.0, 0.5)?;
    let dt = 0.025;

    let mut rng = stream(1, 0);
    let step = ExactTransition::new(&params, dt);
    let mut s = sample_stationary(&params, &mut rng);
    println!("t,eta,z");
    for k in 0..=40 {
        println!("{:.3},{:.5},{:.5}", k as f64 * dt, s.eta, s.z);
        s = step.step(s, &mut rng);
    }

    let lags = [0.0, 0.25, 0.5, 1.0];
    println!("\nautocovariance of eta, theory:");
    for l in lags {
        println!("  lag {l:<5} {:.5}", theoretical_autocovariance(&params, l));
    }
    println!("\nestimated from 100 stationary paths:");
    for row in noise_statistics(&params, &lags, 100, 100.0, dt, 2)? {
        println!(
            "  {:<12} lag {:<5} theory {:>8.5} estimate {:>8.5} +- {:.5}",
            row.quantity, row.lag, row.theory, row.estimate, row.stderr
        );
    }
    Ok(())
}
