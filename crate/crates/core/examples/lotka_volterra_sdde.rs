//! Competitive Lotka-Volterra with delayed response to harmonic noise.
//!
//! Writes one trajectory as CSV to stdout (every 100th step).

use sddekit::model::{builtin, params};
use sddekit::noise::GammaOmega;
use sddekit::rng::stream;
use sddekit::sdde::{simulate_sdde, DelayConfig, RunConfig};

fn main() -> sddekit::Result<()> {
    let model = builtin("lotka_volterra", &params([("A", 0.1), ("B", 0.1), ("sigma", 0.2)]))?;
    // δ_i = c_i ε, τ_j = k_j ε.
    let dc = DelayConfig::new(vec![0.1, 0.2], vec![1.0, 1.0], 0.1)?;
    let noise = dc.harmonic_params(GammaOmega::new(1.0, 1.0)?)?;
    let rc = RunConfig::new(100.0, 0.01, vec![1.0, 1.0]).save_stride(100);
    let traj = simulate_sdde(&model, &dc, &noise, &rc, &mut stream(5, 0))?;
    traj.write_csv(&mut std::io::stdout().lock(), &["lotka_volterra delays 0.01,0.02 tau 0.1".into()])?;
    Ok(())
}
