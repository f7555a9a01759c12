//! Drift field of the limiting Lotka-Volterra equation and the shift of
//! its zero as the noise-induced drift coefficient α grows.

use sddekit::analysis::{find_zero_drift, GridSpec};
use sddekit::ensemble::limit_drift;
use sddekit::limit::DriftCoefficients;
use sddekit::model::{builtin, params};
use sddekit::sdde::RunConfig;

fn main() -> sddekit::Result<()> {
    let (a, b, sigma) = (0.1, 0.1, 0.2);
    let model = builtin("lotka_volterra", &params([("A", a), ("B", b), ("sigma", sigma)]))?;
    let grid = GridSpec::uniform(2, 0.5, 1.5, 50)?;
    let x_eq = [1.0 / (1.0 + b); 2];
    let rc = RunConfig::new(2000.0, 0.05, vec![1.0, 1.0]).seed(1).n_traj(500);

    println!("alpha  displacement  analytic   method");
    for alpha in [0.0, 0.25, 0.5] {
        let coeffs = DriftCoefficients::custom(2, 2, vec![alpha; 4])?;
        let field = limit_drift(&model, &coeffs, &rc, &grid, 1)?.finish(20).smoothed(5);
        let r = find_zero_drift(&field, &[1.0, 1.0], &x_eq)?;
        let analytic = 2f64.sqrt() * sigma * sigma * alpha / (a * (1.0 + b));
        println!("{alpha:<6} {:<13.4} {analytic:<10.4} {}", r.displacement, r.method);
    }
    Ok(())
}
