//! Ensembles of independent paths.
//!
//! Path `i` always draws from `stream(seed, i)`, and reductions run in a
//! fixed order over fixed-size chunks, so results do not depend on the
//! number of worker threads.

use rayon::prelude::*;

use crate::analysis::{DriftAccumulator, GridSpec};
use crate::error::{Error, Result};
use crate::fast::{simulate_fast, FastState};
use crate::limit::{simulate_limit, DriftCoefficients};
use crate::model::Model;
use crate::noise::{sample_stationary, GammaOmega, HarmonicParams, NoiseState};
use crate::rng::stream;
use crate::sdde::{simulate_sdde, simulate_sdde_driven, DelayConfig, RunConfig};
use crate::trajectory::Trajectory;
use crate::wiener::WienerPath;

/// Paths per reduction chunk.
const CHUNK: usize = 16;

/// `f(0), …, f(n-1)` evaluated in parallel, returned in index order.
pub fn par_indexed<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..n).into_par_iter().map(f).collect()
}

fn check_n(rc: &RunConfig) -> Result<()> {
    if rc.n_traj == 0 {
        return Err(Error::EmptyEnsemble);
    }
    Ok(())
}

/// Limiting-equation paths; path `i` uses increments from `stream(seed, i)`.
pub fn limit_ensemble(model: &Model, coeffs: &DriftCoefficients, rc: &RunConfig) -> Result<Vec<Trajectory>> {
    check_n(rc)?;
    let steps = rc.steps()?;
    par_indexed(rc.n_traj, |i| {
        let w = WienerPath::generate(steps, model.channels(), rc.dt, &mut stream(rc.seed, i as u64));
        simulate_limit(model, coeffs, rc, &w)
    })
}

pub fn sdde_ensemble(
    model: &Model,
    dc: &DelayConfig,
    noise: &[HarmonicParams],
    rc: &RunConfig,
) -> Result<Vec<Trajectory>> {
    check_n(rc)?;
    par_indexed(rc.n_traj, |i| simulate_sdde(model, dc, noise, rc, &mut stream(rc.seed, i as u64)))
}

/// Fast-system paths from `v = 0` and a stationary noise draw.
pub fn fast_ensemble(model: &Model, dc: &DelayConfig, go: GammaOmega, rc: &RunConfig) -> Result<Vec<Trajectory>> {
    check_n(rc)?;
    let steps = rc.steps()?;
    par_indexed(rc.n_traj, |i| {
        let mut rng = stream(rc.seed, i as u64);
        let w = WienerPath::generate(steps, model.channels(), rc.dt, &mut rng);
        let init = FastState::stationary(&rc.x0, dc, go, &mut rng)?;
        simulate_fast(model, dc, go, rc, &w, &init)
    })
}

/// Runs `per_path` for every index, folding each chunk of paths into its
/// own accumulators, then merges chunks in order.
fn chunked_accumulate<const K: usize>(
    n: usize,
    grid: &GridSpec,
    per_path: impl Fn(usize, &mut [DriftAccumulator; K]) -> Result<()> + Sync + Send,
) -> Result<[DriftAccumulator; K]> {
    let chunks = n.div_ceil(CHUNK);
    let partial: Vec<[DriftAccumulator; K]> = par_indexed(chunks, |c| {
        let mut acc: [DriftAccumulator; K] = std::array::from_fn(|_| DriftAccumulator::new(grid.clone()));
        for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
            per_path(i, &mut acc)?;
        }
        Ok(acc)
    })?;
    let mut total: [DriftAccumulator; K] = std::array::from_fn(|_| DriftAccumulator::new(grid.clone()));
    for part in &partial {
        for (t, p) in total.iter_mut().zip(part) {
            t.merge(p)?;
        }
    }
    Ok(total)
}

/// Drift sums of a limiting-equation ensemble, streamed so paths are never
/// held all at once. Increments are taken over `lag` saved samples.
pub fn limit_drift(
    model: &Model,
    coeffs: &DriftCoefficients,
    rc: &RunConfig,
    grid: &GridSpec,
    lag: usize,
) -> Result<DriftAccumulator> {
    check_n(rc)?;
    let steps = rc.steps()?;
    let [acc] = chunked_accumulate::<1>(rc.n_traj, grid, |i, acc| {
        let w = WienerPath::generate(steps, model.channels(), rc.dt, &mut stream(rc.seed, i as u64));
        acc[0].add_trajectory(&simulate_limit(model, coeffs, rc, &w)?, lag)
    })?;
    Ok(acc)
}

/// Drift sums of a delay-equation ensemble (independent noise per path).
pub fn sdde_drift(
    model: &Model,
    dc: &DelayConfig,
    noise: &[HarmonicParams],
    rc: &RunConfig,
    grid: &GridSpec,
    lag: usize,
) -> Result<DriftAccumulator> {
    check_n(rc)?;
    let [acc] = chunked_accumulate::<1>(rc.n_traj, grid, |i, acc| {
        acc[0].add_trajectory(&simulate_sdde(model, dc, noise, rc, &mut stream(rc.seed, i as u64))?, lag)
    })?;
    Ok(acc)
}

/// Drift sums of the delay equation and of its limiting equation
/// (harmonic coefficients at the ratios of `dc`), each pair of paths
/// driven by the same Wiener increments from the same initial state.
/// Returns `(sdde, limit)`.
pub fn coupled_drift(
    model: &Model,
    dc: &DelayConfig,
    go: GammaOmega,
    rc: &RunConfig,
    grid: &GridSpec,
    lag: usize,
) -> Result<(DriftAccumulator, DriftAccumulator)> {
    check_n(rc)?;
    let steps = rc.steps()?;
    let noise = dc.harmonic_params(go)?;
    let coeffs = DriftCoefficients::general(go, dc);
    let [sdde, limit] = chunked_accumulate::<2>(rc.n_traj, grid, |i, acc| {
        let mut rng = stream(rc.seed, i as u64);
        let w = WienerPath::generate(steps, model.channels(), rc.dt, &mut rng);
        let eta0: Vec<NoiseState> = noise.iter().map(|p| sample_stationary(p, &mut rng)).collect();
        acc[0].add_trajectory(&simulate_sdde_driven(model, dc, &noise, rc, &w, &eta0)?, lag)?;
        acc[1].add_trajectory(&simulate_limit(model, &coeffs, rc, &w)?, lag)
    })?;
    Ok((sdde, limit))
}
