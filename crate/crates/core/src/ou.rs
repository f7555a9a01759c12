//! The Ornstein–Uhlenbeck limit of harmonic noise: `Γ, Ω² → ∞` with
//! `Γ/Ω²` fixed, compared pathwise on shared increments.

use std::io::Write;

use crate::analysis::quantile;
use crate::ensemble::par_indexed;
use crate::error::{Error, Result};
use crate::noise::{em_step, sample_stationary, theoretical_autocovariance, HarmonicParams};
use crate::rng::stream;
use crate::sdde::RunConfig;
use crate::trajectory::Trajectory;
use crate::wiener::WienerPath;

/// `dχ = -(1/τ) χ dt + amplitude dW`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OUParams {
    pub tau: f64,
    pub amplitude: f64,
}

impl OUParams {
    /// The process with `amplitude = 1/τ`, whose stationary variance
    /// `1/(2τ)` matches harmonic noise.
    pub fn new(tau: f64) -> Result<Self> {
        Self::with_amplitude(tau, 1.0 / tau)
    }

    pub fn with_amplitude(tau: f64, amplitude: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) || !amplitude.is_finite() {
            return Err(Error::InvalidParameter(format!("ou process needs tau > 0, got {tau}")));
        }
        Ok(OUParams { tau, amplitude })
    }

    pub fn stationary_variance(&self) -> f64 {
        self.amplitude * self.amplitude * self.tau / 2.0
    }

    pub fn autocovariance(&self, lag: f64) -> f64 {
        self.stationary_variance() * (-lag.abs() / self.tau).exp()
    }

    /// Exact update over `h` driven by the Wiener increment `dw`.
    fn step(&self, chi: f64, h: f64, dw: f64) -> f64 {
        let decay = (-h / self.tau).exp();
        // Sd of the exact noise term divided by sd of dw.
        let scale = self.amplitude * (self.tau * (-(-2.0 * h / self.tau).exp_m1()) / (2.0 * h)).sqrt();
        decay * chi + scale * dw
    }
}

/// Exact Gaussian steps from `rc.x0[0]`, one increment of channel 0 of `w`
/// per step.
pub fn simulate_ou(params: &OUParams, rc: &RunConfig, w: &WienerPath) -> Result<Trajectory> {
    if rc.x0.len() != 1 || w.channels() < 1 {
        return Err(Error::Dimension("ou paths are scalar".into()));
    }
    let steps = rc.steps()?;
    crate::limit::check_wiener(w, rc.dt, steps, w.channels())?;
    let mut chi = rc.x0[0];
    let mut out = Trajectory::with_capacity(rc.dt * rc.save_stride as f64, 1, steps / rc.save_stride + 1);
    out.push(&[chi]);
    for k in 0..steps {
        chi = params.step(chi, rc.dt, w.increment(k)[0]);
        if (k + 1) % rc.save_stride == 0 {
            out.push(&[chi]);
        }
    }
    Ok(out)
}

/// Settings of [`ou_convergence_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct OuCheck {
    pub tau: f64,
    /// Fixed `c = Γ/Ω²`.
    pub ratio: f64,
    /// Increasing `Γ` values; `Ω² = Γ/c`.
    pub gammas: Vec<f64>,
    /// Lags at which to report autocovariance gaps.
    pub lags: Vec<f64>,
    pub n_paths: usize,
    pub t_end: f64,
    pub dt: f64,
    pub seed: u64,
}

impl OuCheck {
    /// Lags `0` and `τ`, horizon `τ`, and a step resolving the fastest
    /// harmonic rate by a factor 100.
    pub fn new(tau: f64, ratio: f64, gammas: Vec<f64>, n_paths: usize) -> Self {
        let fastest = gammas.iter().copied().fold(0.0, f64::max) * ratio / tau;
        OuCheck {
            tau,
            ratio,
            lags: vec![0.0, tau],
            n_paths,
            t_end: tau,
            dt: tau / (100.0 * fastest.max(1.0 / tau) * tau).ceil(),
            seed: 0,
            gammas,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuRow {
    pub gamma: f64,
    /// `E[(sup_t |η̃ - χ̃|)²]` in the rescaled variables `τ (Ω²/Γ) ·`.
    pub ms_sup_dist: f64,
    /// The same without rescaling.
    pub ms_sup_dist_raw: f64,
    /// Median over paths of the rescaled sup distance.
    pub median_sup_dist: f64,
    /// `|C_η(lag) - C_χ(lag)|` in rescaled units, one per requested lag.
    pub cov_gaps: Vec<f64>,
}

/// For each `Γ`, simulates harmonic noise by Euler–Maruyama and the OU
/// process exactly on the same increments, both started from the same
/// stationary draw of `η`.
///
/// Autocovariance gaps use the closed forms of both processes.
pub fn ou_convergence_check(check: &OuCheck) -> Result<Vec<OuRow>> {
    if check.gammas.is_empty() || check.gammas.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter("gamma list must be non-empty and increasing".into()));
    }
    if check.n_paths == 0 {
        return Err(Error::EmptyEnsemble);
    }
    if !(check.ratio > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma/omega_sq must be positive, got {}", check.ratio)));
    }
    let ou = OUParams::new(check.tau)?;
    let rc = RunConfig::new(check.t_end, check.dt, vec![0.0]);
    let steps = rc.steps()?;
    let scale = check.tau / check.ratio;
    let mut rows = Vec::with_capacity(check.gammas.len());
    for (gi, &gamma) in check.gammas.iter().enumerate() {
        let params = HarmonicParams::new(gamma, gamma / check.ratio, check.tau)?;
        crate::sdde::noise_step_check(&[params], check.dt)?;
        let sups = par_indexed(check.n_paths, |p| {
            let mut rng = stream(check.seed, p as u64);
            let mut state = sample_stationary(&params, &mut rng);
            let w = WienerPath::generate(steps, 1, check.dt, &mut rng);
            let mut chi = state.eta;
            let mut sup: f64 = 0.0;
            for k in 0..steps {
                let dw = w.increment(k)[0];
                state = em_step(state, &params, check.dt, dw).map_err(|_| Error::NonFinite { step: k + 1 })?;
                chi = ou.step(chi, check.dt, dw);
                sup = sup.max((state.eta - chi).abs());
            }
            Ok(sup)
        })
        .map_err(|e| match e {
            Error::NonFinite { step } => Error::Stability(format!("harmonic path blew up at step {step} for gamma {gamma} (row {})", gi + 1)),
            other => other,
        })?;
        let ms_raw = sups.iter().map(|s| s * s).sum::<f64>() / sups.len() as f64;
        let mut sorted = sups.clone();
        sorted.sort_by(f64::total_cmp);
        let cov_gaps = check
            .lags
            .iter()
            .map(|&lag| scale * scale * (theoretical_autocovariance(&params, lag) - ou.autocovariance(lag)).abs())
            .collect();
        rows.push(OuRow {
            gamma,
            ms_sup_dist: scale * scale * ms_raw,
            ms_sup_dist_raw: ms_raw,
            median_sup_dist: scale * quantile(&sorted, 0.5),
            cov_gaps,
        });
    }
    Ok(rows)
}

/// CSV `gamma,ms_sup_dist,cov_gap_lag0,cov_gap_lag_tau` using the first
/// two requested lags.
pub fn write_ou_table<W: Write>(rows: &[OuRow], w: &mut W, comments: &[String]) -> Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "gamma,ms_sup_dist,cov_gap_lag0,cov_gap_lag_tau")?;
    for r in rows {
        let gap = |i: usize| r.cov_gaps.get(i).map_or(String::new(), f64::to_string);
        writeln!(w, "{},{},{},{}", r.gamma, r.ms_sup_dist, gap(0), gap(1))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_decay() {
        let p = OUParams::new(0.5).unwrap();
        let rc = RunConfig::new(2.0, 0.01, vec![1.0]);
        let t = simulate_ou(&p, &rc, &WienerPath::zeros(200, 1, 0.01)).unwrap();
        for (k, x) in t.states().enumerate() {
            assert!((x[0] - (-(k as f64) * 0.01 / 0.5).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn stationary_variance_matches_harmonic() {
        let tau = 0.7;
        let p = OUParams::new(tau).unwrap();
        assert!((p.stationary_variance() - 1.0 / (2.0 * tau)).abs() < 1e-15);
        let h = HarmonicParams::new(3.0, 2.0, tau).unwrap();
        assert!((theoretical_autocovariance(&h, 0.0) - p.autocovariance(0.0)).abs() < 1e-15);

        let mut rng = stream(1, 0);
        let rc = RunConfig::new(20_000.0, 0.2, vec![0.0]);
        let w = WienerPath::generate(100_000, 1, 0.2, &mut rng);
        let t = simulate_ou(&p, &RunConfig { x0: vec![crate::rng::standard_normal(&mut rng) * p.stationary_variance().sqrt()], ..rc }, &w).unwrap();
        let xs = t.component(0);
        let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
        assert!((var - p.stationary_variance()).abs() < 0.05 * p.stationary_variance(), "{var}");
    }

    #[test]
    fn lag_tau_autocovariance() {
        let tau = 1.0;
        let p = OUParams::new(tau).unwrap();
        let dt = 0.05;
        let lag = (tau / dt) as usize;
        let paths = 200;
        let per_path: Vec<f64> = (0..paths)
            .map(|i| {
                let mut rng = stream(2, i);
                let x0 = crate::rng::standard_normal(&mut rng) * p.stationary_variance().sqrt();
                let w = WienerPath::generate(4000, 1, dt, &mut rng);
                let t = simulate_ou(&p, &RunConfig::new(200.0, dt, vec![x0]), &w).unwrap().component(0);
                (0..t.len() - lag).map(|k| t[k] * t[k + lag]).sum::<f64>() / (t.len() - lag) as f64
            })
            .collect();
        let mean = per_path.iter().sum::<f64>() / paths as f64;
        let sd = (per_path.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (paths - 1) as f64).sqrt();
        let se = sd / (paths as f64).sqrt();
        let expected = (-1f64).exp() / (2.0 * tau);
        assert!((mean - expected).abs() < 3.0 * se, "{mean} vs {expected} (se {se})");
    }

    #[test]
    fn convergence_table_shapes() {
        let mut check = OuCheck::new(1.0, 1.0, vec![10.0, 100.0], 8);
        check.t_end = 0.5;
        check.dt = 1e-4;
        let rows = ou_convergence_check(&check).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.cov_gaps[0] < 1e-12));
        assert!(rows[0].cov_gaps[1] > rows[1].cov_gaps[1]);
        let mut buf = Vec::new();
        write_ou_table(&rows, &mut buf, &[]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("gamma,ms_sup_dist,cov_gap_lag0,cov_gap_lag_tau\n10,"));
        check.gammas = vec![100.0, 10.0];
        assert!(ou_convergence_check(&check).is_err());
    }

    #[test]
    fn coarse_step_is_rejected() {
        let mut check = OuCheck::new(1.0, 1.0, vec![1000.0], 2);
        check.dt = 0.01;
        assert_eq!(ou_convergence_check(&check).unwrap_err().kind(), "stability");
    }
}
