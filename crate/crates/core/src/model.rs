//! Drift and diffusion models with symbolic Jacobians.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::expr::{parse_expr, Expr};

/// A model `dx = f(x) dt + g(x) (noise) dt` with `m` state components and
/// `n` noise channels.
///
/// `df[i][k]` is `∂f^i/∂x_k` and `dg[i][j][p]` is `∂g^{ij}/∂x_p`, both
/// derived symbolically at construction.
#[derive(Debug, Clone)]
pub struct Model {
    m: usize,
    n: usize,
    f: Vec<Expr>,
    g: Vec<Vec<Expr>>,
    df: Vec<Vec<Expr>>,
    dg: Vec<Vec<Vec<Expr>>>,
}

impl Model {
    pub fn new(m: usize, n: usize, f: Vec<Expr>, g: Vec<Vec<Expr>>) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::Dimension("m and n must be positive".into()));
        }
        if f.len() != m {
            return Err(Error::Dimension(format!("expected {m} drift expressions, got {}", f.len())));
        }
        if g.len() != m || g.iter().any(|row| row.len() != n) {
            return Err(Error::Dimension(format!("diffusion must be {m}x{n}")));
        }
        for e in f.iter().chain(g.iter().flatten()) {
            if let Some(i) = e.max_var() {
                if i >= m {
                    return Err(Error::VariableOutOfRange { index: i + 1, m });
                }
            }
        }
        let df = f
            .iter()
            .map(|fi| (0..m).map(|k| fi.diff(k)).collect())
            .collect();
        let dg = g
            .iter()
            .map(|row| {
                row.iter()
                    .map(|gij| (0..m).map(|p| gij.diff(p)).collect())
                    .collect()
            })
            .collect();
        Ok(Model { m, n, f, g, df, dg })
    }

    /// Build from expression strings.
    pub fn from_strings<S: AsRef<str>>(m: usize, n: usize, f: &[S], g: &[Vec<S>]) -> Result<Self> {
        let f = f
            .iter()
            .map(|s| parse_expr(s.as_ref(), m))
            .collect::<Result<Vec<_>>>()?;
        let g = g
            .iter()
            .map(|row| row.iter().map(|s| parse_expr(s.as_ref(), m)).collect())
            .collect::<Result<Vec<Vec<_>>>>()?;
        Model::new(m, n, f, g)
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn channels(&self) -> usize {
        self.n
    }

    pub fn drift_exprs(&self) -> &[Expr] {
        &self.f
    }

    pub fn diffusion_exprs(&self) -> &[Vec<Expr>] {
        &self.g
    }

    /// `out[i] = f^i(x)`.
    pub fn drift(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        for (o, e) in out.iter_mut().zip(&self.f) {
            *o = e.eval(x)?;
        }
        Ok(())
    }

    /// Row-major `m x n`: `out[i * n + j] = g^{ij}(x)`.
    pub fn diffusion(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        for (i, row) in self.g.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                out[i * self.n + j] = e.eval(x)?;
            }
        }
        Ok(())
    }

    /// Row-major `m x m`: `out[i * m + k] = ∂f^i/∂x_k`.
    pub fn drift_jacobian(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        for (i, row) in self.df.iter().enumerate() {
            for (k, e) in row.iter().enumerate() {
                out[i * self.m + k] = e.eval(x)?;
            }
        }
        Ok(())
    }

    /// `out[(i * n + j) * m + p] = ∂g^{ij}/∂x_p`.
    pub fn diffusion_jacobian(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let (m, n) = (self.m, self.n);
        for i in 0..m {
            for j in 0..n {
                for p in 0..m {
                    out[(i * n + j) * m + p] = self.dg[i][j][p].eval(x)?;
                }
            }
        }
        Ok(())
    }

    /// True when every `∂g^{ij}/∂x_p` folded to the literal zero.
    pub fn has_constant_diffusion(&self) -> bool {
        self.dg.iter().flatten().flatten().all(Expr::is_zero)
    }
}

fn param(name: &str, params: &BTreeMap<String, f64>, key: &str) -> Result<f64> {
    params.get(key).copied().ok_or_else(|| Error::MissingParameter {
        model: name.to_string(),
        param: key.to_string(),
    })
}

/// Names accepted by [`builtin`].
pub const BUILTIN_MODELS: [&str; 3] = ["lotka_volterra", "tanh1d", "additive1d"];

/// Built-in models.
///
/// * `lotka_volterra` (`A`, `B`, `sigma`): two competing populations with
///   diagonal multiplicative noise `g = diag(sigma x1, sigma x2)`.
/// * `tanh1d` (`a`, `sigma`): `f = -a tanh(x1)`, `g = sigma tanh(x1)`; both
///   bounded with bounded derivatives.
/// * `additive1d` (`a`, `sigma`): `f = -a tanh(x1)`, `g = sigma`.
pub fn builtin(name: &str, params: &BTreeMap<String, f64>) -> Result<Model> {
    match name {
        "lotka_volterra" => {
            let a = param(name, params, "A")?;
            let b = param(name, params, "B")?;
            let s = param(name, params, "sigma")?;
            Model::from_strings(
                2,
                2,
                &[
                    format!("{a}*x1*(1 - x1 - {b}*x2)"),
                    format!("{a}*x2*(1 - x2 - {b}*x1)"),
                ],
                &[
                    vec![format!("{s}*x1"), "0".to_string()],
                    vec!["0".to_string(), format!("{s}*x2")],
                ],
            )
        }
        "tanh1d" => {
            let a = param(name, params, "a")?;
            let s = param(name, params, "sigma")?;
            Model::from_strings(1, 1, &[format!("-{a}*tanh(x1)")], &[vec![format!("{s}*tanh(x1)")]])
        }
        "additive1d" => {
            let a = param(name, params, "a")?;
            let s = param(name, params, "sigma")?;
            Model::from_strings(1, 1, &[format!("-{a}*tanh(x1)")], &[vec![format!("{s}")]])
        }
        other => Err(Error::UnknownModel(other.to_string())),
    }
}

/// Convenience for building parameter maps.
pub fn params<const N: usize>(pairs: [(&str, f64); N]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}
