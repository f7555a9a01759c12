//! Harmonic noise: the stationary solution of
//!
//! ```text
//! dη = (Γ / (Ω² τ)) z dt
//! dz = -(Γ² / (Ω² τ)) z dt - (Γ / τ) η dt + (Γ / τ) dW
//! ```
//!
//! Stationary law: zero mean, `Var η = 1/(2τ)`, `Var z = Ω²/(2τ)`,
//! `Cov(η, z) = 0`.

use nalgebra::{DMatrix, Matrix2, Matrix4};
use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix_forms::solve_lyapunov;
use crate::rng::standard_normal;

/// Parameters `(Γ, Ω², τ)` of one harmonic-noise channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicParams {
    gamma: f64,
    omega_sq: f64,
    tau: f64,
}

impl HarmonicParams {
    pub fn new(gamma: f64, omega_sq: f64, tau: f64) -> Result<Self> {
        for (name, v) in [("gamma", gamma), ("omega_sq", omega_sq), ("tau", tau)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(HarmonicParams { gamma, omega_sq, tau })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn omega_sq(&self) -> f64 {
        self.omega_sq
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Drift generator `M` of the linear system `d(η, z) = M (η, z) dt + b dW`.
    pub fn generator(&self) -> Matrix2<f64> {
        let (g, o2, t) = (self.gamma, self.omega_sq, self.tau);
        Matrix2::new(0.0, g / (o2 * t), -g / t, -g * g / (o2 * t))
    }

    /// Noise loading `Γ/τ` on the `z` equation.
    pub fn noise_loading(&self) -> f64 {
        self.gamma / self.tau
    }

    /// Exponential decay rate `Γ²/(2Ω²τ)` of the autocovariance envelope.
    pub fn decay_rate(&self) -> f64 {
        self.gamma * self.gamma / (2.0 * self.omega_sq * self.tau)
    }

    /// Signed discriminant `μ² - Γ²/(Ω²τ²)` of the characteristic
    /// polynomial: negative underdamped, positive overdamped, zero critical.
    pub fn discriminant(&self) -> f64 {
        let mu = self.decay_rate();
        mu * mu - self.gamma * self.gamma / (self.omega_sq * self.tau * self.tau)
    }
}

/// The shape pair `(Γ, Ω²)` shared by all channels; each channel adds its
/// own correlation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaOmega {
    pub gamma: f64,
    pub omega_sq: f64,
}

impl GammaOmega {
    pub fn new(gamma: f64, omega_sq: f64) -> Result<Self> {
        HarmonicParams::new(gamma, omega_sq, 1.0)?;
        Ok(GammaOmega { gamma, omega_sq })
    }

    pub fn with_tau(&self, tau: f64) -> Result<HarmonicParams> {
        HarmonicParams::new(self.gamma, self.omega_sq, tau)
    }
}

/// State `(η, z)` of one channel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseState {
    pub eta: f64,
    pub z: f64,
}

impl NoiseState {
    pub fn new(eta: f64, z: f64) -> Self {
        NoiseState { eta, z }
    }
}

/// Stationary covariance of `(η, z)`, obtained by solving
/// `(-M) P + P (-M)ᵀ = b bᵀ`.
pub fn stationary_covariance(params: &HarmonicParams) -> Matrix2<f64> {
    let m = params.generator();
    let a = DMatrix::from_fn(2, 2, |i, j| -m[(i, j)]);
    let b = params.noise_loading();
    let c = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, b * b]);
    let p = solve_lyapunov(&a, &c).expect("harmonic generator is Hurwitz for positive parameters");
    let p = Matrix2::new(p[(0, 0)], p[(0, 1)], p[(1, 0)], p[(1, 1)]);
    debug_assert!({
        let closed = closed_form_covariance(params);
        (p - closed).norm() <= 1e-9 * closed.norm()
    });
    p
}

/// `diag(1/(2τ), Ω²/(2τ))`.
pub fn closed_form_covariance(params: &HarmonicParams) -> Matrix2<f64> {
    let t2 = 2.0 * params.tau;
    Matrix2::new(1.0 / t2, 0.0, 0.0, params.omega_sq / t2)
}

/// `E[η_t η_{t+lag}]` for the stationary process.
///
/// Underdamped (`Γ² < 4Ω²`) this is
/// `1/(2τ) e^{-μ s} [cos(ω s) + (μ/ω) sin(ω s)]`; overdamped uses the
/// hyperbolic continuation and the critical case its limit
/// `1/(2τ) e^{-μ s} (1 + μ s)`. Near the critical point the bracket is
/// summed as a power series in `disc · s²` so the three branches join
/// continuously.
pub fn theoretical_autocovariance(params: &HarmonicParams, lag: f64) -> f64 {
    let s = lag.abs();
    let var = 1.0 / (2.0 * params.tau);
    let mu = params.decay_rate();
    let disc = params.discriminant();
    let u = disc * s * s;
    if u.abs() <= 0.5 {
        // cosh(√u) + μ s sinh(√u)/√u as series in u (valid for either sign).
        let (mut c, mut sh) = (0.0, 0.0);
        let mut term = 1.0;
        for k in 0..30 {
            let kf = k as f64;
            if k > 0 {
                term *= u / ((2.0 * kf - 1.0) * (2.0 * kf));
            }
            c += term;
            sh += term / (2.0 * kf + 1.0);
            if term.abs() < 1e-18 {
                break;
            }
        }
        return var * (-mu * s).exp() * (c + mu * s * sh);
    }
    if disc < 0.0 {
        let w = (-disc).sqrt();
        var * (-mu * s).exp() * ((w * s).cos() + mu / w * (w * s).sin())
    } else {
        // e^{-μs}(cosh ws + (μ/w) sinh ws) written with decaying exponentials.
        let w = disc.sqrt();
        let up = ((w - mu) * s).exp();
        let down = (-(w + mu) * s).exp();
        var * (0.5 * (up + down) + 0.5 * mu / w * (up - down))
    }
}

/// Draw `(η, z)` from the stationary law.
pub fn sample_stationary<R: Rng + ?Sized>(params: &HarmonicParams, rng: &mut R) -> NoiseState {
    let cov = stationary_covariance(params);
    NoiseState {
        eta: cov[(0, 0)].sqrt() * standard_normal(rng),
        z: cov[(1, 1)].sqrt() * standard_normal(rng),
    }
}

/// One Euler–Maruyama step driven by the Wiener increment `dw`.
pub fn em_step(state: NoiseState, params: &HarmonicParams, dt: f64, dw: f64) -> Result<NoiseState> {
    let (g, o2, t) = (params.gamma, params.omega_sq, params.tau);
    let next = NoiseState {
        eta: state.eta + g / (o2 * t) * state.z * dt,
        z: state.z - g * g / (o2 * t) * state.z * dt - g / t * state.eta * dt + g / t * dw,
    };
    if next.eta.is_finite() && next.z.is_finite() {
        Ok(next)
    } else {
        Err(Error::NonFinite { step: 0 })
    }
}

/// Exact Gaussian transition over a fixed step, precomputed once.
///
/// `state' = e^{M dt} state + L ξ` with `L Lᵀ = Q(dt)`, where both the
/// propagator and the increment covariance come from one exponential of
/// the augmented matrix `[[-M, b bᵀ], [0, Mᵀ]] dt`.
#[derive(Debug, Clone, Copy)]
pub struct ExactTransition {
    propagator: Matrix2<f64>,
    chol: Matrix2<f64>,
}

impl ExactTransition {
    pub fn new(params: &HarmonicParams, dt: f64) -> Self {
        let m = params.generator();
        let b = params.noise_loading();
        // The augmented exponential loses everything to cancellation once
        // ‖M‖ dt is large, so evaluate it on a short step and double up:
        // F(2h) = F(h)², Q(2h) = F(h) Q(h) F(h)ᵀ + Q(h).
        let halvings = (m.norm() * dt / 0.5).log2().ceil().max(0.0) as i32;
        let h = dt / 2f64.powi(halvings);
        let mut aug = Matrix4::<f64>::zeros();
        for i in 0..2 {
            for j in 0..2 {
                aug[(i, j)] = -m[(i, j)] * h;
                aug[(i + 2, j + 2)] = m[(j, i)] * h;
            }
        }
        aug[(1, 3)] = b * b * h;
        let e = aug.exp();
        let e12 = e.fixed_view::<2, 2>(0, 2).into_owned();
        let mut propagator = e.fixed_view::<2, 2>(2, 2).transpose();
        let mut q = propagator * e12;
        for _ in 0..halvings {
            q += propagator * q * propagator.transpose();
            propagator = propagator * propagator;
        }
        let q = 0.5 * (q + q.transpose());
        ExactTransition {
            propagator,
            chol: cholesky_psd(&q),
        }
    }

    pub fn propagator(&self) -> &Matrix2<f64> {
        &self.propagator
    }

    /// Increment covariance `Q(dt)`.
    pub fn increment_covariance(&self) -> Matrix2<f64> {
        self.chol * self.chol.transpose()
    }

    pub fn step<R: Rng + ?Sized>(&self, state: NoiseState, rng: &mut R) -> NoiseState {
        let (x1, x2) = (standard_normal(rng), standard_normal(rng));
        let p = &self.propagator;
        let l = &self.chol;
        NoiseState {
            eta: p[(0, 0)] * state.eta + p[(0, 1)] * state.z + l[(0, 0)] * x1,
            z: p[(1, 0)] * state.eta + p[(1, 1)] * state.z + l[(1, 0)] * x1 + l[(1, 1)] * x2,
        }
    }
}

/// Single exact step; build an [`ExactTransition`] once for repeated use.
pub fn exact_step<R: Rng + ?Sized>(state: NoiseState, params: &HarmonicParams, dt: f64, rng: &mut R) -> NoiseState {
    ExactTransition::new(params, dt).step(state, rng)
}

// Lower Cholesky factor of a 2x2 positive semidefinite matrix, tolerating
// round-off that pushes tiny pivots below zero.
/// One line of [`noise_statistics`].
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseStatRow {
    /// `var_eta`, `var_z`, `cov_eta_z` or `autocov_eta`.
    pub quantity: &'static str,
    pub lag: f64,
    pub theory: f64,
    pub estimate: f64,
    /// Standard error across paths.
    pub stderr: f64,
}

impl NoiseStatRow {
    pub fn within(&self, n_se: f64) -> bool {
        (self.estimate - self.theory).abs() <= n_se * self.stderr
    }
}

/// Stationary moments and autocovariances of `η` from `n_paths`
/// stationary paths of exact steps of length `dt` up to `t_end`.
///
/// Each path yields its own time average; estimates are the mean over
/// paths and errors the spread of the per-path averages. Lags must be
/// whole multiples of `dt`.
pub fn noise_statistics(
    params: &HarmonicParams,
    lags: &[f64],
    n_paths: usize,
    t_end: f64,
    dt: f64,
    seed: u64,
) -> Result<Vec<NoiseStatRow>> {
    if n_paths < 2 {
        return Err(Error::InvalidParameter("noise statistics need at least two paths".into()));
    }
    let steps = crate::sdde::RunConfig::new(t_end, dt, vec![0.0]).steps()?;
    let lag_steps: Vec<usize> = lags
        .iter()
        .map(|&l| {
            let r = (l / dt).round();
            if l < 0.0 || (r * dt - l).abs() > 1e-9 * l.max(dt) || r as usize >= steps {
                Err(Error::InvalidParameter(format!("lag {l} is not a whole multiple of dt = {dt} inside the run")))
            } else {
                Ok(r as usize)
            }
        })
        .collect::<Result<_>>()?;
    let transition = ExactTransition::new(params, dt);
    let per_path: Vec<Vec<f64>> = crate::ensemble::par_indexed(n_paths, |p| {
        let mut rng = crate::rng::stream(seed, p as u64);
        let mut state = sample_stationary(params, &mut rng);
        let mut eta = Vec::with_capacity(steps + 1);
        let (mut zz, mut ez) = (0.0, 0.0);
        for k in 0..=steps {
            if k > 0 {
                state = transition.step(state, &mut rng);
            }
            eta.push(state.eta);
            zz += state.z * state.z;
            ez += state.eta * state.z;
        }
        let n = (steps + 1) as f64;
        let mut out = vec![eta.iter().map(|e| e * e).sum::<f64>() / n, zz / n, ez / n];
        for &l in &lag_steps {
            out.push((0..=steps - l).map(|k| eta[k] * eta[k + l]).sum::<f64>() / (steps + 1 - l) as f64);
        }
        Ok(out)
    })?;
    let cov = closed_form_covariance(params);
    let mut spec: Vec<(&'static str, f64, f64)> =
        vec![("var_eta", 0.0, cov[(0, 0)]), ("var_z", 0.0, cov[(1, 1)]), ("cov_eta_z", 0.0, 0.0)];
    spec.extend(lags.iter().map(|&l| ("autocov_eta", l, theoretical_autocovariance(params, l))));
    let n = n_paths as f64;
    Ok(spec
        .into_iter()
        .enumerate()
        .map(|(i, (quantity, lag, theory))| {
            let mean = per_path.iter().map(|v| v[i]).sum::<f64>() / n;
            let var = per_path.iter().map(|v| (v[i] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            NoiseStatRow { quantity, lag, theory, estimate: mean, stderr: (var / n).sqrt() }
        })
        .collect())
}

fn cholesky_psd(q: &Matrix2<f64>) -> Matrix2<f64> {
    let l11 = q[(0, 0)].max(0.0).sqrt();
    let l21 = if l11 > 0.0 { q[(1, 0)] / l11 } else { 0.0 };
    let l22 = (q[(1, 1)] - l21 * l21).max(0.0).sqrt();
    Matrix2::new(l11, 0.0, l21, l22)
}
