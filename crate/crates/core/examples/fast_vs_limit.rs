//! Small-delay limit: the fast system approaches the limiting Itô
//! equation as ε shrinks, on shared Wiener increments.

use sddekit::analysis::convergence_study;
use sddekit::model::{builtin, params};
use sddekit::noise::GammaOmega;
use sddekit::sdde::{DelayConfig, RunConfig};

fn main() -> sddekit::Result<()> {
    let model = builtin("tanh1d", &params([("a", 1.0), ("sigma", 1.0)]))?;
    let dc = DelayConfig::new(vec![1.0], vec![1.0], 0.1)?;
    let go = GammaOmega::new(1.0, 1.0)?;
    let eps = [0.2, 0.1, 0.05, 0.025];
    // dt is the step at the smallest ε; coarser ε use proportionally larger steps.
    let rc = RunConfig::new(5.0, 0.025 / 50.0, vec![0.5]).seed(3);
    println!("epsilon  median    q1        q3");
    for row in convergence_study(&model, &dc, go, &eps, &rc, 100)? {
        println!("{:<8} {:.5}  {:.5}  {:.5}", row.epsilon, row.median, row.q1, row.q3);
    }
    Ok(())
}
