//! Ensembles give the same paths regardless of the worker count.

use sddekit::ensemble::limit_ensemble;
use sddekit::limit::DriftCoefficients;
use sddekit::model::{builtin, params};
use sddekit::sdde::RunConfig;

fn main() -> sddekit::Result<()> {
    let model = builtin("lotka_volterra", &params([("A", 0.1), ("B", 0.1), ("sigma", 0.2)]))?;
    let coeffs = DriftCoefficients::stratonovich(2, 2);
    let rc = RunConfig::new(50.0, 0.01, vec![1.0, 1.0]).seed(9).n_traj(32);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool")
            .install(|| limit_ensemble(&model, &coeffs, &rc))
    };
    let (one, four) = (run(1)?, run(4)?);
    println!("identical across 1 and 4 threads: {}", one == four);
    let last = one[0].last().unwrap_or(&[]);
    println!("path 0 ends at {last:?}");
    Ok(())
}
