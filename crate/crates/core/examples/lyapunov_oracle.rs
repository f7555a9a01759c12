//! Noise-induced drift two ways: the closed-form coefficients, and the
//! matrix route through a Lyapunov solve.

use sddekit::limit::{noise_induced_drift, DriftCoefficients};
use sddekit::matrix_forms::{assemble, drift_via_lyapunov, gamma_eigenvalues};
use sddekit::model::{builtin, params};
use sddekit::noise::GammaOmega;
use sddekit::sdde::DelayConfig;

fn main() -> sddekit::Result<()> {
    let model = builtin("lotka_volterra", &params([("A", 0.1), ("B", 0.1), ("sigma", 0.2)]))?;
    let go = GammaOmega::new(2.0, 1.0)?;
    let dc = DelayConfig::new(vec![0.5, 1.5], vec![1.0, 2.0], 1.0)?;
    let coeffs = DriftCoefficients::general(go, &dc);

    println!("closed-form eigenvalues of gamma:");
    for z in gamma_eigenvalues(&dc, go) {
        println!("  {:.6} {:+.6}i", z.re, z.im);
    }
    let sys = assemble(&model, &dc, go, &[0.9, 1.1])?;
    println!("numerical eigenvalues at y = (0.9, 1.1):");
    for z in sys.gamma.complex_eigenvalues().iter() {
        println!("  {:.6} {:+.6}i", z.re, z.im);
    }

    println!("\n{:>12} {:>24} {:>24}", "y", "closed form", "lyapunov");
    for y in [[0.6, 0.6], [1.0, 0.8], [1.4, 1.2]] {
        let a = noise_induced_drift(&model, &coeffs, &y)?;
        let b = drift_via_lyapunov(&model, &dc, go, &y)?;
        println!("{:>12} {:>24} {:>24}", format!("{y:?}"), format!("{:.8},{:.8}", a[0], a[1]), format!("{:.8},{:.8}", b[0], b[1]));
    }
    Ok(())
}
