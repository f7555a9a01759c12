//! Forward-Euler integration of the delay equation
//!
//! ```text
//! dx^i/dt = f^i(x_t) + Σ_j g^{ij}(x^1_{t-δ_1}, …, x^m_{t-δ_m}) η^j_t
//! ```
//!
//! driven by harmonic noise. Delays are snapped to whole steps and the
//! history on `[-max δ, 0]` is held constant at `x0`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::noise::{em_step, sample_stationary, GammaOmega, HarmonicParams, NoiseState};
use crate::rng::standard_normal;
use crate::limit::check_wiener;
use crate::trajectory::Trajectory;
use crate::wiener::WienerPath;

/// Delays `δ_i = c_i ε` and correlation times `τ_j = k_j ε`, all tied to
/// one characteristic time `ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayConfig {
    c: Vec<f64>,
    k: Vec<f64>,
    epsilon: f64,
    delta: Vec<f64>,
}

impl DelayConfig {
    pub fn new(c: Vec<f64>, k: Vec<f64>, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
        }
        if c.is_empty() || k.is_empty() {
            return Err(Error::Dimension("c and k must be non-empty".into()));
        }
        if let Some(bad) = c.iter().chain(&k).find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(format!("delay and correlation scales must be positive, got {bad}")));
        }
        let delta = c.iter().map(|ci| ci * epsilon).collect();
        Ok(DelayConfig { c, k, epsilon, delta })
    }

    /// Same `c`, `k` at a different `ε`.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        DelayConfig::new(self.c.clone(), self.k.clone(), epsilon)
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn k(&self) -> &[f64] {
        &self.k
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn tau(&self, j: usize) -> f64 {
        self.k[j] * self.epsilon
    }

    pub fn taus(&self) -> Vec<f64> {
        self.k.iter().map(|kj| kj * self.epsilon).collect()
    }

    /// `δ_p / τ_j = c_p / k_j`, indexed `[j][p]`.
    pub fn ratios(&self) -> Vec<Vec<f64>> {
        self.k
            .iter()
            .map(|kj| self.c.iter().map(|cp| cp / kj).collect())
            .collect()
    }

    /// Harmonic parameters for every channel.
    pub fn harmonic_params(&self, go: GammaOmega) -> Result<Vec<HarmonicParams>> {
        self.taus().into_iter().map(|t| go.with_tau(t)).collect()
    }

    pub(crate) fn check_dims(&self, model: &Model) -> Result<()> {
        if self.c.len() != model.dim() || self.k.len() != model.channels() {
            return Err(Error::Dimension(format!(
                "delay config has {} delays / {} correlation times, model is {}x{}",
                self.c.len(),
                self.k.len(),
                model.dim(),
                model.channels()
            )));
        }
        Ok(())
    }
}

/// Time span, step, initial state and ensemble settings for a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub t_end: f64,
    pub dt: f64,
    pub x0: Vec<f64>,
    pub seed: u64,
    pub n_traj: usize,
    /// Keep every `save_stride`-th step in the returned trajectory.
    pub save_stride: usize,
}

impl RunConfig {
    pub fn new(t_end: f64, dt: f64, x0: Vec<f64>) -> Self {
        RunConfig { t_end, dt, x0, seed: 0, n_traj: 1, save_stride: 1 }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn n_traj(mut self, n: usize) -> Self {
        self.n_traj = n;
        self
    }

    pub fn save_stride(mut self, stride: usize) -> Self {
        self.save_stride = stride;
        self
    }

    /// Number of steps; errors unless `dt` divides `t_end` to 1e-9 relative.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) || !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParameter("t_end and dt must be positive".into()));
        }
        if self.save_stride == 0 {
            return Err(Error::InvalidParameter("save_stride must be positive".into()));
        }
        let n = (self.t_end / self.dt).round();
        if (n * self.dt - self.t_end).abs() > 1e-9 * self.t_end || n < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "dt = {} does not divide t_end = {}",
                self.dt, self.t_end
            )));
        }
        Ok(n as usize)
    }
}

/// Whole-step lag for each delay; errors if `δ_i` is off the grid by more
/// than 1e-9 relative.
pub fn delay_lags(dc: &DelayConfig, dt: f64) -> Result<Vec<usize>> {
    dc.delta()
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let r = (d / dt).round();
            if r < 1.0 || (r * dt - d).abs() > 1e-9 * d {
                Err(Error::DelayNotMultiple { index: i + 1, delay: d, dt })
            } else {
                Ok(r as usize)
            }
        })
        .collect()
}

/// Step-size gate for Euler–Maruyama on the noise:
/// `dt ≤ 0.1 τ_j Ω²/Γ²` and `dt ≤ 0.1 τ_j` for every channel.
pub fn noise_step_check(noise: &[HarmonicParams], dt: f64) -> Result<()> {
    for (j, p) in noise.iter().enumerate() {
        let limit = 0.1 * p.tau() * (p.omega_sq() / (p.gamma() * p.gamma())).min(1.0);
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::Stability(format!(
                "dt = {dt} exceeds noise limit {limit} on channel {}",
                j + 1
            )));
        }
    }
    Ok(())
}

/// Integrate the delay equation once.
///
/// The initial noise state is drawn from the stationary law, then every
/// step draws one `N(0, dt)` increment per channel, all from `rng`.
pub fn simulate_sdde<R: Rng + ?Sized>(
    model: &Model,
    dc: &DelayConfig,
    noise: &[HarmonicParams],
    rc: &RunConfig,
    rng: &mut R,
) -> Result<Trajectory> {
    check_setup(model, dc, noise, rc)?;
    let eta0: Vec<NoiseState> = noise.iter().map(|p| sample_stationary(p, rng)).collect();
    let sqrt_dt = rc.dt.sqrt();
    integrate(model, dc, noise, rc, eta0, |_, dw| {
        for d in dw.iter_mut() {
            *d = sqrt_dt * standard_normal(rng);
        }
    })
}

/// As [`simulate_sdde`], but driven by the increments of `w` from the
/// noise state `eta0`, so the run can share a probability space with the
/// limiting equation.
pub fn simulate_sdde_driven(
    model: &Model,
    dc: &DelayConfig,
    noise: &[HarmonicParams],
    rc: &RunConfig,
    w: &WienerPath,
    eta0: &[NoiseState],
) -> Result<Trajectory> {
    check_setup(model, dc, noise, rc)?;
    if eta0.len() != noise.len() {
        return Err(Error::Dimension(format!("expected {} initial noise states, got {}", noise.len(), eta0.len())));
    }
    check_wiener(w, rc.dt, rc.steps()?, noise.len())?;
    integrate(model, dc, noise, rc, eta0.to_vec(), |k, dw| dw.copy_from_slice(w.increment(k)))
}

fn check_setup(model: &Model, dc: &DelayConfig, noise: &[HarmonicParams], rc: &RunConfig) -> Result<()> {
    let (m, n) = (model.dim(), model.channels());
    dc.check_dims(model)?;
    if noise.len() != n {
        return Err(Error::Dimension(format!("expected {n} noise channels, got {}", noise.len())));
    }
    for (j, p) in noise.iter().enumerate() {
        let tau = dc.tau(j);
        if (p.tau() - tau).abs() > 1e-9 * tau {
            return Err(Error::Dimension(format!(
                "channel {} has tau {} but the delay config implies {tau}",
                j + 1,
                p.tau()
            )));
        }
    }
    if rc.x0.len() != m {
        return Err(Error::Dimension(format!("x0 has {} entries, model has {m}", rc.x0.len())));
    }
    rc.steps()?;
    delay_lags(dc, rc.dt)?;
    noise_step_check(noise, rc.dt)
}

fn integrate(
    model: &Model,
    dc: &DelayConfig,
    noise: &[HarmonicParams],
    rc: &RunConfig,
    mut eta: Vec<NoiseState>,
    mut next_dw: impl FnMut(usize, &mut [f64]),
) -> Result<Trajectory> {
    let (m, n) = (model.dim(), model.channels());
    let steps = rc.steps()?;
    let dt = rc.dt;
    let lags = delay_lags(dc, dt)?;

    let window = lags.iter().copied().max().unwrap_or(0) + 1;
    let mut history = vec![0.0; window * m];
    history[..m].copy_from_slice(&rc.x0);

    let mut out = Trajectory::with_capacity(dt * rc.save_stride as f64, m, steps / rc.save_stride + 1);
    out.push(&rc.x0);

    let mut x = rc.x0.clone();
    let mut next = vec![0.0; m];
    let mut delayed = vec![0.0; m];
    let mut fbuf = vec![0.0; m];
    let mut gbuf = vec![0.0; m * n];
    let mut dw = vec![0.0; n];

    for k in 0..steps {
        for i in 0..m {
            delayed[i] = if k >= lags[i] {
                history[((k - lags[i]) % window) * m + i]
            } else {
                rc.x0[i]
            };
        }
        model.drift(&x, &mut fbuf)?;
        model.diffusion(&delayed, &mut gbuf)?;
        for i in 0..m {
            let forcing: f64 = (0..n).map(|j| gbuf[i * n + j] * eta[j].eta).sum::<f64>() * dt;
            next[i] = x[i] + fbuf[i] * dt + forcing;
        }
        next_dw(k, &mut dw);
        for (j, p) in noise.iter().enumerate() {
            eta[j] = em_step(eta[j], p, dt, dw[j]).map_err(|_| Error::NonFinite { step: k + 1 })?;
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: k + 1 });
        }
        std::mem::swap(&mut x, &mut next);
        let slot = (k + 1) % window;
        history[slot * m..(slot + 1) * m].copy_from_slice(&x);
        if (k + 1) % rc.save_stride == 0 {
            out.push(&x);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin, params};
    use crate::rng::stream;

    fn lv(sigma: f64) -> Model {
        builtin("lotka_volterra", &params([("A", 0.1), ("B", 0.1), ("sigma", sigma)])).unwrap()
    }

    fn go() -> GammaOmega {
        GammaOmega::new(1.0, 1.0).unwrap()
    }

    fn euler_ode(model: &Model, x0: &[f64], dt: f64, steps: usize) -> Vec<f64> {
        let mut x = x0.to_vec();
        let mut f = vec![0.0; x.len()];
        for _ in 0..steps {
            model.drift(&x, &mut f).unwrap();
            for i in 0..x.len() {
                x[i] += f[i] * dt;
            }
        }
        x
    }

    #[test]
    fn delay_config_products() {
        let dc = DelayConfig::new(vec![1.0, 2.0], vec![0.5], 0.1).unwrap();
        assert_eq!(dc.delta(), &[0.1, 0.2]);
        assert_eq!(dc.tau(0), 0.05);
        assert_eq!(dc.ratios(), vec![vec![2.0, 4.0]]);
        assert!(DelayConfig::new(vec![1.0], vec![-1.0], 0.1).is_err());
        assert!(DelayConfig::new(vec![1.0], vec![1.0], 0.0).is_err());
    }

    #[test]
    fn run_config_divisibility() {
        assert_eq!(RunConfig::new(1.0, 0.01, vec![0.0]).steps().unwrap(), 100);
        assert!(RunConfig::new(1.0, 0.3, vec![0.0]).steps().is_err());
    }

    #[test]
    fn delays_must_sit_on_the_grid() {
        let dc = DelayConfig::new(vec![1.0, 1.5], vec![1.0, 1.0], 0.01).unwrap();
        assert_eq!(delay_lags(&dc, 0.005).unwrap(), vec![2, 3]);
        assert!(matches!(
            delay_lags(&dc, 0.004),
            Err(Error::DelayNotMultiple { index: 1, .. })
        ));
    }

    #[test]
    fn noise_step_gate() {
        let p = HarmonicParams::new(3.0, 1.0, 0.1).unwrap();
        assert!(noise_step_check(&[p], 0.1 * 0.1 / 9.0).is_ok());
        assert!(matches!(noise_step_check(&[p], 0.002), Err(Error::Stability(_))));
    }

    #[test]
    fn noise_free_run_matches_ode_euler_bitwise() {
        let model = lv(0.0);
        let dc = DelayConfig::new(vec![3.0, 7.0], vec![1.0, 2.0], 0.05).unwrap();
        let noise = dc.harmonic_params(go()).unwrap();
        let rc = RunConfig::new(20.0, 0.005, vec![0.5, 0.3]);
        let traj = simulate_sdde(&model, &dc, &noise, &rc, &mut stream(3, 0)).unwrap();
        let ode = euler_ode(&model, &[0.5, 0.3], 0.005, 4000);
        assert_eq!(traj.last().unwrap(), ode.as_slice());
    }

    #[test]
    fn noise_free_run_settles_at_fixed_point() {
        let model = lv(0.0);
        let dc = DelayConfig::new(vec![1.0, 1.0], vec![1.0, 1.0], 0.1).unwrap();
        let noise = dc.harmonic_params(go()).unwrap();
        let rc = RunConfig::new(500.0, 0.01, vec![0.5, 0.5]).save_stride(1000);
        let traj = simulate_sdde(&model, &dc, &noise, &rc, &mut stream(0, 0)).unwrap();
        let x_eq = 1.0 / 1.1;
        for v in traj.last().unwrap() {
            assert!((v - x_eq).abs() < 1e-3, "{v}");
        }
        assert_eq!(traj.len(), 51);
    }

    #[test]
    fn same_seed_same_path() {
        let model = lv(0.2);
        let dc = DelayConfig::new(vec![1.0, 2.0], vec![1.0, 1.0], 0.1).unwrap();
        let noise = dc.harmonic_params(go()).unwrap();
        let rc = RunConfig::new(10.0, 0.01, vec![0.9, 0.9]);
        let a = simulate_sdde(&model, &dc, &noise, &rc, &mut stream(9, 2)).unwrap();
        let b = simulate_sdde(&model, &dc, &noise, &rc, &mut stream(9, 2)).unwrap();
        assert_eq!(a, b);
        let c = simulate_sdde(&model, &dc, &noise, &rc, &mut stream(9, 3)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn dimension_and_tau_checks() {
        let model = lv(0.2);
        let dc = DelayConfig::new(vec![1.0, 1.0], vec![1.0, 1.0], 0.1).unwrap();
        let wrong_tau = vec![go().with_tau(0.2).unwrap(); 2];
        let rc = RunConfig::new(1.0, 0.01, vec![0.9, 0.9]);
        assert!(matches!(
            simulate_sdde(&model, &dc, &wrong_tau, &rc, &mut stream(0, 0)),
            Err(Error::Dimension(_))
        ));
        let rc1 = RunConfig::new(1.0, 0.01, vec![0.9]);
        let noise = dc.harmonic_params(go()).unwrap();
        assert!(simulate_sdde(&model, &dc, &noise, &rc1, &mut stream(0, 0)).is_err());
    }

    #[test]
    fn driven_run_uses_given_increments() {
        let model = lv(0.2);
        let dc = DelayConfig::new(vec![1.0, 1.0], vec![1.0, 1.0], 0.1).unwrap();
        let noise = dc.harmonic_params(go()).unwrap();
        let rc = RunConfig::new(5.0, 0.01, vec![0.9, 0.9]);
        let w = WienerPath::generate(500, 2, 0.01, &mut stream(5, 0));
        let eta0 = [NoiseState::new(0.3, -0.1), NoiseState::new(0.0, 0.2)];
        let a = simulate_sdde_driven(&model, &dc, &noise, &rc, &w, &eta0).unwrap();
        let b = simulate_sdde_driven(&model, &dc, &noise, &rc, &w, &eta0).unwrap();
        assert_eq!(a, b);
        let quiet = simulate_sdde_driven(&model, &dc, &noise, &rc, &WienerPath::zeros(500, 2, 0.01), &eta0).unwrap();
        assert_ne!(a, quiet);
        assert!(simulate_sdde_driven(&model, &dc, &noise, &rc, &WienerPath::zeros(10, 2, 0.01), &eta0).is_err());
    }

    #[test]
    fn blow_up_reports_step() {
        let model = Model::from_strings(1, 1, &["x1^2"], &[vec!["0"]]).unwrap();
        let dc = DelayConfig::new(vec![1.0], vec![1.0], 0.1).unwrap();
        let noise = dc.harmonic_params(go()).unwrap();
        let rc = RunConfig::new(100.0, 0.01, vec![10.0]);
        assert!(matches!(
            simulate_sdde(&model, &dc, &noise, &rc, &mut stream(0, 0)),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn halving_dt_converges_at_first_order() {
        let model = lv(0.0);
        let dc = DelayConfig::new(vec![1.0, 1.0], vec![1.0, 1.0], 0.08).unwrap();
        let noise = dc.harmonic_params(go()).unwrap();
        let end = |dt: f64| {
            let rc = RunConfig::new(10.0, dt, vec![0.5, 0.2]);
            simulate_sdde(&model, &dc, &noise, &rc, &mut stream(0, 0)).unwrap().last().unwrap().to_vec()
        };
        let (a, b, c) = (end(0.008), end(0.004), end(0.002));
        let ratio = (b[0] - c[0]).abs() / (a[0] - b[0]).abs();
        assert!((0.3..=0.7).contains(&ratio), "{ratio}");
    }
}
