//! The same multiplicative-noise model under Itô, Stratonovich and
//! delay-dependent interpretations.

use sddekit::limit::{total_drift, DriftCoefficients};
use sddekit::model::{builtin, params};
use sddekit::noise::GammaOmega;
use sddekit::sdde::DelayConfig;

fn main() -> sddekit::Result<()> {
    let model = builtin("lotka_volterra", &params([("A", 0.1), ("B", 0.1), ("sigma", 0.2)]))?;
    let x = [1.0 / 1.1, 1.0 / 1.1];
    let go = GammaOmega::new(1.0, 1.0)?;
    let mut modes = vec![DriftCoefficients::ito(2, 2), DriftCoefficients::stratonovich(2, 2)];
    for c in [0.1, 1.0, 10.0] {
        let dc = DelayConfig::new(vec![c, c], vec![1.0, 1.0], 1.0)?;
        modes.push(DriftCoefficients::ou_limit(&dc));
        modes.push(DriftCoefficients::general(go, &dc));
    }
    println!("total drift at the deterministic equilibrium");
    for m in &modes {
        let d = total_drift(&model, m, &x)?;
        println!("  {:<32} C11={:.4}  drift=({:.5}, {:.5})", m.mode().to_string(), m.get(0, 0), d[0], d[1]);
    }
    Ok(())
}
