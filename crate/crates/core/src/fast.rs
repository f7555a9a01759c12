//! The first-order fast system
//!
//! ```text
//! dy^i = v^i dt
//! dv^i = (1/δ_i) [-v^i + f^i(y) + Σ_k δ_k ∂f^i/∂y_k v^k + Σ_j g^{ij}(y) η^j] dt
//! ```
//!
//! driven by harmonic noise `η` with `τ_j = k_j ε`.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::limit::check_wiener;
use crate::matrix_forms::gamma_eigenvalues;
use crate::model::Model;
use crate::noise::{em_step, sample_stationary, GammaOmega, NoiseState};
use crate::sdde::{DelayConfig, RunConfig};
use crate::trajectory::Trajectory;
use crate::wiener::WienerPath;

#[derive(Debug, Clone, PartialEq)]
pub struct FastState {
    pub y: Vec<f64>,
    pub v: Vec<f64>,
    pub eta: Vec<f64>,
    pub z: Vec<f64>,
}

impl FastState {
    /// `v = 0`, noise drawn from its stationary law.
    pub fn stationary<R: Rng + ?Sized>(y0: &[f64], dc: &DelayConfig, go: GammaOmega, rng: &mut R) -> Result<Self> {
        let noise = dc.harmonic_params(go)?;
        let draws: Vec<NoiseState> = noise.iter().map(|p| sample_stationary(p, rng)).collect();
        Ok(FastState {
            y: y0.to_vec(),
            v: vec![0.0; y0.len()],
            eta: draws.iter().map(|s| s.eta).collect(),
            z: draws.iter().map(|s| s.z).collect(),
        })
    }

    /// Everything zero except `y`.
    pub fn at_rest(y0: &[f64], channels: usize) -> Self {
        FastState { y: y0.to_vec(), v: vec![0.0; y0.len()], eta: vec![0.0; channels], z: vec![0.0; channels] }
    }
}

/// Outcome of the explicit-Euler step-size gate.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// Largest real part among the (ε-free) eigenvalues of `γ`.
    pub rho: f64,
    /// Human-readable name of the eigenvalue attaining `rho`.
    pub binding: String,
    /// `dt ρ / ε`.
    pub ratio: f64,
    pub ok: bool,
}

impl StabilityReport {
    pub fn into_result(self) -> Result<Self> {
        if self.ok {
            Ok(self)
        } else {
            Err(Error::Stability(self.to_string()))
        }
    }
}

impl fmt::Display for StabilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "dt*rho/eps = {} ({}; rho = {} from {})",
            self.ratio,
            if self.ok { "ok" } else { "exceeds 0.1" },
            self.rho,
            self.binding
        )
    }
}

/// Passes iff `dt ρ / ε ≤ 0.1`.
pub fn stability_check(dc: &DelayConfig, go: GammaOmega, dt: f64) -> StabilityReport {
    let m = dc.c().len();
    let eig = gamma_eigenvalues(dc, go);
    let (idx, rho) = eig
        .iter()
        .map(|z| z.re)
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, re)| if re > best.1 { (i, re) } else { best });
    let binding = if idx < m {
        format!("1/c_{}", idx + 1)
    } else {
        let j = (idx - m) / 2 + 1;
        format!("noise eigenvalue of channel {j}")
    };
    let ratio = dt * rho / dc.epsilon();
    StabilityReport { rho, binding, ratio, ok: ratio <= 0.1 * (1.0 + 1e-12) }
}

/// Euler–Maruyama on `(y, v, η, z)`, using `w` for the noise increments.
/// Returns the `y` path.
pub fn simulate_fast(
    model: &Model,
    dc: &DelayConfig,
    go: GammaOmega,
    rc: &RunConfig,
    w: &WienerPath,
    init: &FastState,
) -> Result<Trajectory> {
    let (m, n) = (model.dim(), model.channels());
    dc.check_dims(model)?;
    if init.y.len() != m || init.v.len() != m || init.eta.len() != n || init.z.len() != n {
        return Err(Error::Dimension("initial fast state does not match the model".into()));
    }
    let steps = rc.steps()?;
    check_wiener(w, rc.dt, steps, n)?;
    stability_check(dc, go, rc.dt).into_result()?;

    let dt = rc.dt;
    let delta = dc.delta();
    let noise = dc.harmonic_params(go)?;
    let mut y = init.y.clone();
    let mut v = init.v.clone();
    let mut eta: Vec<NoiseState> = init.eta.iter().zip(&init.z).map(|(&e, &z)| NoiseState::new(e, z)).collect();

    let mut fbuf = vec![0.0; m];
    let mut jac = vec![0.0; m * m];
    let mut gbuf = vec![0.0; m * n];
    let mut v_next = vec![0.0; m];

    let mut out = Trajectory::with_capacity(dt * rc.save_stride as f64, m, steps / rc.save_stride + 1);
    out.push(&y);
    for k in 0..steps {
        model.drift(&y, &mut fbuf)?;
        model.drift_jacobian(&y, &mut jac)?;
        model.diffusion(&y, &mut gbuf)?;
        for i in 0..m {
            let feedback: f64 = (0..m).map(|q| delta[q] * jac[i * m + q] * v[q]).sum();
            let forcing: f64 = (0..n).map(|j| gbuf[i * n + j] * eta[j].eta).sum();
            v_next[i] = v[i] + (-v[i] + fbuf[i] + feedback + forcing) / delta[i] * dt;
        }
        for i in 0..m {
            y[i] += v[i] * dt;
        }
        std::mem::swap(&mut v, &mut v_next);
        let dw = w.increment(k);
        for (j, p) in noise.iter().enumerate() {
            eta[j] = em_step(eta[j], p, dt, dw[j]).map_err(|_| Error::NonFinite { step: k + 1 })?;
        }
        if y.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { step: k + 1 });
        }
        if (k + 1) % rc.save_stride == 0 {
            out.push(&y);
        }
    }
    Ok(out)
}
