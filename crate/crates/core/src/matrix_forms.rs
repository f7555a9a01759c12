//! Block matrices of the fast system written as a second-order equation in
//! `X = (y, ξ, ζ)`, and the noise-induced drift computed from them.
//!
//! Layout of every `(m + 2n)`-dimensional object: rows/columns `0..m` are
//! the state `y`, `m..m+n` the integrated noise `ξ`, `m+n..m+2n` the
//! integrated auxiliary `ζ`. Only the `y` block depends on the state, so
//! `ξ` and `ζ` are never materialized.
//!
//! `γ` is
//!
//! ```text
//! [ D¹   -ĝ(y)      0          ]
//! [ 0     0       -(Γ/Ω²) D²   ]
//! [ 0     Γ D²     (Γ²/Ω²) D²  ]
//! ```
//!
//! with `D¹ = diag(1/c_i)`, `D² = diag(1/k_j)`, `ĝ_ij = g^{ij}/c_i`.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::noise::GammaOmega;
use crate::sdde::DelayConfig;

/// `γ`, `κ`, `σ` and `F` evaluated at one state.
#[derive(Debug, Clone)]
pub struct SystemMatrices {
    pub gamma: DMatrix<f64>,
    pub kappa: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    pub force: DVector<f64>,
}

fn check(model: &Model, dc: &DelayConfig, y: &[f64]) -> Result<()> {
    dc.check_dims(model)?;
    if y.len() != model.dim() {
        return Err(Error::Dimension(format!("state has {} entries, model has {}", y.len(), model.dim())));
    }
    Ok(())
}

pub fn assemble(model: &Model, dc: &DelayConfig, go: GammaOmega, y: &[f64]) -> Result<SystemMatrices> {
    check(model, dc, y)?;
    let (m, n) = (model.dim(), model.channels());
    let d = m + 2 * n;
    let (c, k) = (dc.c(), dc.k());
    let (g_, o2) = (go.gamma, go.omega_sq);

    let mut gbuf = vec![0.0; m * n];
    model.diffusion(y, &mut gbuf)?;
    let mut gamma = DMatrix::zeros(d, d);
    for i in 0..m {
        gamma[(i, i)] = 1.0 / c[i];
        for j in 0..n {
            gamma[(i, m + j)] = -gbuf[i * n + j] / c[i];
        }
    }
    for j in 0..n {
        gamma[(m + j, m + n + j)] = -(g_ / o2) / k[j];
        gamma[(m + n + j, m + j)] = g_ / k[j];
        gamma[(m + n + j, m + n + j)] = (g_ * g_ / o2) / k[j];
    }

    let mut jac = vec![0.0; m * m];
    model.drift_jacobian(y, &mut jac)?;
    let mut kappa = DMatrix::zeros(d, d);
    for i in 0..m {
        for kk in 0..m {
            kappa[(i, kk)] = c[kk] / c[i] * jac[i * m + kk];
        }
    }

    let mut sigma = DMatrix::zeros(d, n);
    for j in 0..n {
        sigma[(m + n + j, j)] = g_ / k[j];
    }

    let mut fbuf = vec![0.0; m];
    model.drift(y, &mut fbuf)?;
    let mut force = DVector::zeros(d);
    for i in 0..m {
        force[i] = fbuf[i] / c[i];
    }
    Ok(SystemMatrices { gamma, kappa, sigma, force })
}

/// Closed-form `γ⁻¹`:
///
/// ```text
/// [ (D¹)⁻¹   g̃(y)               g̃(y)/Γ        ]
/// [ 0        (D²)⁻¹             (D²)⁻¹/Γ      ]
/// [ 0        -(Ω²/Γ)(D²)⁻¹      0             ]
/// ```
///
/// with `g̃_ij = k_j g^{ij}`.
pub fn gamma_inverse_closed(model: &Model, dc: &DelayConfig, go: GammaOmega, y: &[f64]) -> Result<DMatrix<f64>> {
    check(model, dc, y)?;
    let (m, n) = (model.dim(), model.channels());
    let d = m + 2 * n;
    let (c, k) = (dc.c(), dc.k());
    let (g_, o2) = (go.gamma, go.omega_sq);
    let mut gbuf = vec![0.0; m * n];
    model.diffusion(y, &mut gbuf)?;

    let mut inv = DMatrix::zeros(d, d);
    for i in 0..m {
        inv[(i, i)] = c[i];
        for j in 0..n {
            let gt = k[j] * gbuf[i * n + j];
            inv[(i, m + j)] = gt;
            inv[(i, m + n + j)] = gt / g_;
        }
    }
    for j in 0..n {
        inv[(m + j, m + j)] = k[j];
        inv[(m + j, m + n + j)] = k[j] / g_;
        inv[(m + n + j, m + j)] = -(o2 / g_) * k[j];
    }
    Ok(inv)
}

/// Eigenvalues of `γ` in closed form: `1/c_i` and
/// `(Γ²/(2 k_j Ω²)) (1 ± √(1 - 4Ω²/Γ²))`. None depend on the state.
pub fn gamma_eigenvalues(dc: &DelayConfig, go: GammaOmega) -> Vec<Complex<f64>> {
    let mut out: Vec<Complex<f64>> = dc.c().iter().map(|ci| Complex::new(1.0 / ci, 0.0)).collect();
    let (g_, o2) = (go.gamma, go.omega_sq);
    let disc = 1.0 - 4.0 * o2 / (g_ * g_);
    let root = if disc >= 0.0 {
        Complex::new(disc.sqrt(), 0.0)
    } else {
        Complex::new(0.0, (-disc).sqrt())
    };
    for kj in dc.k() {
        let scale = g_ * g_ / (2.0 * kj * o2);
        out.push((Complex::new(1.0, 0.0) + root) * scale);
        out.push((Complex::new(1.0, 0.0) - root) * scale);
    }
    out
}

/// Solve `A J + J Aᵀ = C` for `J`, where the spectrum of `A` lies in the
/// open right half-plane.
///
/// The equation is vectorized (column-major) into
/// `(I ⊗ A + A ⊗ I) vec J = vec C` and solved by LU; dimensions here are
/// at most a few tens, so the `d² x d²` system is small.
pub fn solve_lyapunov(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = a.nrows();
    if a.ncols() != d || c.nrows() != d || c.ncols() != d {
        return Err(Error::Dimension("lyapunov operands must be square and equal-sized".into()));
    }
    if let Some(bad) = a.complex_eigenvalues().iter().find(|z| !(z.re > 0.0)) {
        return Err(Error::Lyapunov(format!("eigenvalue {bad} is not in the open right half-plane")));
    }
    let eye = DMatrix::<f64>::identity(d, d);
    let op = eye.kronecker(a) + a.kronecker(&eye);
    let rhs = DVector::from_column_slice(c.as_slice());
    let sol = op
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Lyapunov("singular Kronecker system".into()))?;
    Ok(DMatrix::from_column_slice(d, d, sol.as_slice()))
}

/// Noise-induced drift through the matrix machinery:
///
/// `S_i(y) = Σ_{l,j} ∂(γ⁻¹)_{ij}/∂Y_l · J_{jl}` with `γ J + J γᵀ = σ σᵀ`.
///
/// The derivative is a central difference (step 1e-6) of the closed-form
/// inverse in the `y` coordinates; `γ⁻¹` does not depend on `ξ, ζ`.
/// Returns the first `m` components.
pub fn drift_via_lyapunov(model: &Model, dc: &DelayConfig, go: GammaOmega, y: &[f64]) -> Result<Vec<f64>> {
    const STEP: f64 = 1e-6;
    let sys = assemble(model, dc, go, y)?;
    let j = solve_lyapunov(&sys.gamma, &(&sys.sigma * sys.sigma.transpose()))?;
    let m = model.dim();
    let d = sys.gamma.nrows();
    let mut s = vec![0.0; m];
    let mut up = y.to_vec();
    let mut dn = y.to_vec();
    for l in 0..m {
        up[l] = y[l] + STEP;
        dn[l] = y[l] - STEP;
        let dinv = (gamma_inverse_closed(model, dc, go, &up)? - gamma_inverse_closed(model, dc, go, &dn)?)
            / (2.0 * STEP);
        up[l] = y[l];
        dn[l] = y[l];
        for (i, si) in s.iter_mut().enumerate() {
            *si += (0..d).map(|jj| dinv[(i, jj)] * j[(jj, l)]).sum::<f64>();
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin, params};
    use crate::rng::stream;
    use rand::Rng;

    fn go(g: f64, o: f64) -> GammaOmega {
        GammaOmega::new(g, o).unwrap()
    }

    #[test]
    fn scalar_gamma_layout() {
        let model = builtin("additive1d", &params([("a", 1.0), ("sigma", 0.3)])).unwrap();
        let dc = DelayConfig::new(vec![1.0], vec![1.0], 0.1).unwrap();
        let sys = assemble(&model, &dc, go(2.0, 1.0), &[0.4]).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[1.0, -0.3, 0.0, 0.0, 0.0, -2.0, 0.0, 2.0, 4.0]);
        assert_eq!(sys.gamma, expected);
        assert_eq!(sys.sigma, DMatrix::from_row_slice(3, 1, &[0.0, 0.0, 2.0]));
    }

    #[test]
    fn zero_drift_gives_zero_kappa_and_force() {
        let model = Model::from_strings(2, 1, &["0", "0"], &[vec!["x1"], vec!["x2"]]).unwrap();
        let dc = DelayConfig::new(vec![1.0, 2.0], vec![0.5], 0.1).unwrap();
        let sys = assemble(&model, &dc, go(2.0, 1.0), &[0.3, -0.2]).unwrap();
        assert!(sys.kappa.iter().all(|v| *v == 0.0));
        assert!(sys.force.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn kappa_scales_jacobian() {
        let model = Model::from_strings(2, 1, &["x1*x2", "x1"], &[vec!["1"], vec!["1"]]).unwrap();
        let dc = DelayConfig::new(vec![1.0, 2.0], vec![1.0], 0.1).unwrap();
        let sys = assemble(&model, &dc, go(2.0, 1.0), &[3.0, 5.0]).unwrap();
        // (c_k / c_i) ∂f^i/∂y_k
        assert_eq!(sys.kappa[(0, 0)], 5.0);
        assert_eq!(sys.kappa[(0, 1)], 2.0 * 3.0);
        assert_eq!(sys.kappa[(1, 0)], 0.5);
        assert_eq!(sys.force[0], 15.0);
        assert_eq!(sys.force[1], 1.5);
    }

    #[test]
    fn inverse_identity_at_random_points() {
        let model = builtin("lotka_volterra", &params([("A", 0.1), ("B", 0.1), ("sigma", 0.2)])).unwrap();
        let dc = DelayConfig::new(vec![0.7, 1.3], vec![2.0, 0.4], 0.05).unwrap();
        let mut rng = stream(1, 0);
        for _ in 0..20 {
            let y = [rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)];
            let g = go(3.0, 1.7);
            let sys = assemble(&model, &dc, g, &y).unwrap();
            let inv = gamma_inverse_closed(&model, &dc, g, &y).unwrap();
            let err = (&sys.gamma * &inv - DMatrix::identity(6, 6)).norm();
            assert!(err < 1e-10, "{err}");
        }
    }

    #[test]
    fn scalar_inverse_without_diffusion() {
        let model = Model::from_strings(1, 1, &["0"], &[vec!["0"]]).unwrap();
        let dc = DelayConfig::new(vec![1.0], vec![1.0], 1.0).unwrap();
        let g = go(2.0, 1.0);
        let inv = gamma_inverse_closed(&model, &dc, g, &[0.0]).unwrap();
        let direct = assemble(&model, &dc, g, &[0.0]).unwrap().gamma.try_inverse().unwrap();
        assert!((inv - direct).norm() < 1e-14);
    }

    #[test]
    fn lyapunov_small_cases() {
        let eye = DMatrix::<f64>::identity(2, 2);
        let j = solve_lyapunov(&eye, &eye).unwrap();
        assert!((j - 0.5 * &eye).norm() < 1e-15);
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let c = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let j = solve_lyapunov(&a, &c).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.0, 1.0 / 3.0, 1.0 / 3.0, 0.0]);
        assert!((j - expected).norm() < 1e-15);
    }

    #[test]
    fn lyapunov_rejects_unstable_spectrum() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let eye = DMatrix::<f64>::identity(2, 2);
        assert!(matches!(solve_lyapunov(&a, &eye), Err(Error::Lyapunov(_))));
    }

    #[test]
    fn lyapunov_residual_on_random_instances() {
        let mut rng = stream(17, 0);
        for _ in 0..100 {
            let d = rng.random_range(1..=8);
            // Shifted random matrix: spectrum in the right half-plane.
            let mut a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
            for i in 0..d {
                a[(i, i)] += d as f64 + 1.0;
            }
            let b = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
            let c = &b * b.transpose();
            let j = solve_lyapunov(&a, &c).unwrap();
            let resid = (&a * &j + &j * a.transpose() - &c).norm();
            assert!(resid <= 1e-10 * c.norm().max(1.0), "{resid}");
        }
    }

    #[test]
    fn gamma_spectrum_matches_closed_form() {
        let model = builtin("lotka_volterra", &params([("A", 0.1), ("B", 0.1), ("sigma", 0.2)])).unwrap();
        let dc = DelayConfig::new(vec![0.5, 2.0], vec![1.0, 3.0], 0.05).unwrap();
        for g in [go(3.0, 1.0), go(2.0, 1.0 + 1e-3), go(1.0, 1.0)] {
            let closed = gamma_eigenvalues(&dc, g);
            for y in [[0.3, 1.7], [1.2, 0.1]] {
                let mut num: Vec<_> = assemble(&model, &dc, g, &y).unwrap().gamma.complex_eigenvalues().iter().copied().collect();
                for b in &closed {
                    let (idx, dist) = num
                        .iter()
                        .map(|a| (a - b).norm())
                        .enumerate()
                        .fold((0, f64::INFINITY), |best, (i, d)| if d < best.1 { (i, d) } else { best });
                    assert!(dist < 1e-8, "{b} unmatched in {num:?}");
                    num.swap_remove(idx);
                }
            }
        }
    }

    #[test]
    fn constant_diffusion_has_no_drift() {
        let model = builtin("additive1d", &params([("a", 1.0), ("sigma", 0.7)])).unwrap();
        let dc = DelayConfig::new(vec![1.0], vec![1.0], 0.1).unwrap();
        for y in [-1.0, 0.0, 0.8] {
            assert_eq!(drift_via_lyapunov(&model, &dc, go(2.0, 1.0), &[y]).unwrap(), vec![0.0]);
        }
    }
}
