//! The limiting Itô equation
//!
//! ```text
//! dy^i = [f^i(y) + Σ_{p,j} g^{pj}(y) ∂g^{ij}/∂y_p (y) C_{jp}] dt + Σ_j g^{ij}(y) dW^j
//! ```
//!
//! and its noise-induced drift coefficients `C_{jp}`.

use std::fmt;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::noise::GammaOmega;
use crate::sdde::{DelayConfig, RunConfig};
use crate::trajectory::Trajectory;
use crate::wiener::WienerPath;

/// Coefficient for harmonic noise with shape `(Γ, Ω²)` at ratio
/// `r = δ_p/τ_j`:
///
/// ```text
/// [(Γ/Ω²) r + (1/Γ)(1 - r)] / (2 [(Γ/Ω²) r (1 + r) + 1/Γ])
/// ```
pub fn coeff_general(gamma: f64, omega_sq: f64, ratio: f64) -> f64 {
    if ratio.is_infinite() {
        return 0.0;
    }
    let q = gamma / omega_sq;
    let num = q * ratio + (1.0 - ratio) / gamma;
    let den = 2.0 * (q * ratio * (1.0 + ratio) + 1.0 / gamma);
    num / den
}

/// Ornstein–Uhlenbeck limit `½ (1 + r)⁻¹`: `½` (Stratonovich) at `r = 0`,
/// tending to `0` (Itô) as `r → ∞`.
pub fn coeff_ou(ratio: f64) -> f64 {
    0.5 / (1.0 + ratio)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoefficientMode {
    General(GammaOmega),
    OuLimit,
    Stratonovich,
    Ito,
    /// Caller-supplied matrix, e.g. a sweep over `α` directly.
    Custom,
}

impl fmt::Display for CoefficientMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoefficientMode::General(go) => write!(f, "general(gamma={},omega_sq={})", go.gamma, go.omega_sq),
            CoefficientMode::OuLimit => write!(f, "ou_limit"),
            CoefficientMode::Stratonovich => write!(f, "stratonovich"),
            CoefficientMode::Ito => write!(f, "ito"),
            CoefficientMode::Custom => write!(f, "custom"),
        }
    }
}

fn check_ratios(ratios: &[Vec<f64>]) -> Result<(usize, usize)> {
    let n = ratios.len();
    let m = ratios.first().map_or(0, Vec::len);
    if n == 0 || m == 0 || ratios.iter().any(|r| r.len() != m) {
        return Err(Error::Dimension("ratio matrix must be non-empty and rectangular".into()));
    }
    if let Some(bad) = ratios.iter().flatten().find(|r| !(**r >= 0.0)) {
        return Err(Error::InvalidParameter(format!("ratio must be non-negative, got {bad}")));
    }
    Ok((n, m))
}

/// `n x m` matrix of `C_{jp}`, the weight of `g^{pj} ∂g^{ij}/∂y_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftCoefficients {
    mode: CoefficientMode,
    n: usize,
    m: usize,
    matrix: Vec<f64>,
}

impl DriftCoefficients {
    fn from_fn(mode: CoefficientMode, n: usize, m: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let matrix = (0..n).flat_map(|j| (0..m).map(move |p| (j, p))).map(|(j, p)| f(j, p)).collect();
        DriftCoefficients { mode, n, m, matrix }
    }

    /// Harmonic-noise coefficients at the ratios `c_p / k_j` of `dc`.
    pub fn general(go: GammaOmega, dc: &DelayConfig) -> Self {
        let r = dc.ratios();
        Self::from_fn(CoefficientMode::General(go), dc.k().len(), dc.c().len(), |j, p| {
            coeff_general(go.gamma, go.omega_sq, r[j][p])
        })
    }

    /// OU-limit coefficients `α_{jp}` at the ratios of `dc`.
    pub fn ou_limit(dc: &DelayConfig) -> Self {
        let r = dc.ratios();
        Self::from_fn(CoefficientMode::OuLimit, dc.k().len(), dc.c().len(), |j, p| coeff_ou(r[j][p]))
    }

    /// OU-limit coefficients from explicit ratios `[j][p]`.
    pub fn ou_from_ratios(ratios: &[Vec<f64>]) -> Result<Self> {
        let (n, m) = check_ratios(ratios)?;
        Ok(Self::from_fn(CoefficientMode::OuLimit, n, m, |j, p| coeff_ou(ratios[j][p])))
    }

    /// Harmonic-noise coefficients from explicit ratios `[j][p]`.
    pub fn general_from_ratios(go: GammaOmega, ratios: &[Vec<f64>]) -> Result<Self> {
        let (n, m) = check_ratios(ratios)?;
        Ok(Self::from_fn(CoefficientMode::General(go), n, m, |j, p| {
            coeff_general(go.gamma, go.omega_sq, ratios[j][p])
        }))
    }

    pub fn stratonovich(n: usize, m: usize) -> Self {
        Self::from_fn(CoefficientMode::Stratonovich, n, m, |_, _| 0.5)
    }

    pub fn ito(n: usize, m: usize) -> Self {
        Self::from_fn(CoefficientMode::Ito, n, m, |_, _| 0.0)
    }

    /// Arbitrary coefficients, row-major `n x m`.
    pub fn custom(n: usize, m: usize, matrix: Vec<f64>) -> Result<Self> {
        if matrix.len() != n * m {
            return Err(Error::Dimension(format!("expected {} coefficients, got {}", n * m, matrix.len())));
        }
        Ok(DriftCoefficients { mode: CoefficientMode::Custom, n, m, matrix })
    }

    pub fn mode(&self) -> CoefficientMode {
        self.mode
    }

    pub fn get(&self, j: usize, p: usize) -> f64 {
        self.matrix[j * self.m + p]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    /// `key=value` lines describing these coefficients.
    pub fn metadata(&self, seed: u64) -> String {
        let coeffs: Vec<String> = self.matrix.iter().map(f64::to_string).collect();
        format!(
            "mode={}\nshape={}x{}\ncoefficients={}\nseed={seed}\n",
            self.mode,
            self.n,
            self.m,
            coeffs.join(",")
        )
    }

    fn check(&self, model: &Model) -> Result<()> {
        if (self.n, self.m) != (model.channels(), model.dim()) {
            return Err(Error::Dimension(format!(
                "coefficients are {}x{}, model needs {}x{}",
                self.n,
                self.m,
                model.channels(),
                model.dim()
            )));
        }
        Ok(())
    }
}

/// Scratch buffers for repeated drift evaluation.
#[derive(Debug, Clone)]
pub struct DriftWorkspace {
    g: Vec<f64>,
    dg: Vec<f64>,
    f: Vec<f64>,
}

impl DriftWorkspace {
    pub fn new(model: &Model) -> Self {
        let (m, n) = (model.dim(), model.channels());
        DriftWorkspace { g: vec![0.0; m * n], dg: vec![0.0; m * n * m], f: vec![0.0; m] }
    }

    /// Writes the noise-induced drift into `out`; leaves `g(x)` in the
    /// workspace for reuse.
    fn noise_induced(&mut self, model: &Model, coeffs: &DriftCoefficients, x: &[f64], out: &mut [f64]) -> Result<()> {
        let (m, n) = (model.dim(), model.channels());
        model.diffusion(x, &mut self.g)?;
        model.diffusion_jacobian(x, &mut self.dg)?;
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for p in 0..m {
                for j in 0..n {
                    acc += self.g[p * n + j] * self.dg[(i * n + j) * m + p] * coeffs.get(j, p);
                }
            }
            *o = acc;
        }
        Ok(())
    }
}

/// `Σ_{p,j} g^{pj}(x) ∂g^{ij}/∂y_p(x) C_{jp}` for each component `i`.
pub fn noise_induced_drift(model: &Model, coeffs: &DriftCoefficients, x: &[f64]) -> Result<Vec<f64>> {
    coeffs.check(model)?;
    let mut out = vec![0.0; model.dim()];
    DriftWorkspace::new(model).noise_induced(model, coeffs, x, &mut out)?;
    Ok(out)
}

/// `f(x)` plus the noise-induced drift.
pub fn total_drift(model: &Model, coeffs: &DriftCoefficients, x: &[f64]) -> Result<Vec<f64>> {
    let mut out = noise_induced_drift(model, coeffs, x)?;
    let mut f = vec![0.0; model.dim()];
    model.drift(x, &mut f)?;
    for (o, fi) in out.iter_mut().zip(f) {
        *o += fi;
    }
    Ok(out)
}

/// Euler–Maruyama on the limiting equation using the increments in `w`.
pub fn simulate_limit(model: &Model, coeffs: &DriftCoefficients, rc: &RunConfig, w: &WienerPath) -> Result<Trajectory> {
    coeffs.check(model)?;
    let (m, n) = (model.dim(), model.channels());
    if rc.x0.len() != m {
        return Err(Error::Dimension(format!("x0 has {} entries, model has {m}", rc.x0.len())));
    }
    let steps = rc.steps()?;
    check_wiener(w, rc.dt, steps, n)?;
    let dt = rc.dt;
    let mut ws = DriftWorkspace::new(model);
    let mut nid = vec![0.0; m];
    let mut x = rc.x0.clone();
    let mut out = Trajectory::with_capacity(dt * rc.save_stride as f64, m, steps / rc.save_stride + 1);
    out.push(&x);
    for k in 0..steps {
        ws.noise_induced(model, coeffs, &x, &mut nid)?;
        model.drift(&x, &mut ws.f)?;
        let dw = w.increment(k);
        for i in 0..m {
            let diffusion: f64 = (0..n).map(|j| ws.g[i * n + j] * dw[j]).sum();
            x[i] += (ws.f[i] + nid[i]) * dt + diffusion;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: k + 1 });
        }
        if (k + 1) % rc.save_stride == 0 {
            out.push(&x);
        }
    }
    Ok(out)
}

pub(crate) fn check_wiener(w: &WienerPath, dt: f64, steps: usize, channels: usize) -> Result<()> {
    if w.channels() != channels {
        return Err(Error::Dimension(format!("wiener path has {} channels, need {channels}", w.channels())));
    }
    if (w.dt() - dt).abs() > 1e-9 * dt {
        return Err(Error::Dimension(format!("wiener path step {} differs from run step {dt}", w.dt())));
    }
    if w.steps() < steps {
        return Err(Error::Dimension(format!("wiener path has {} steps, need {steps}", w.steps())));
    }
    Ok(())
}
