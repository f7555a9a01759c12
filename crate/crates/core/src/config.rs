//! TOML run configuration.
//!
//! ```toml
//! [model]
//! builtin = "lotka_volterra"
//! params = { A = 0.1, B = 0.1, sigma = 0.2 }
//! # or: m = 1, n = 1, f = ["-x1"], g = [["0.5*tanh(x1)"]]
//!
//! [noise]
//! gamma = 1.0
//! omega_sq = 1.0
//! k = [1.0, 1.0]        # or tau = [...]
//! epsilon = 0.1
//!
//! [delays]
//! c = [0.1, 0.1]        # or delta = [...]
//!
//! [run]
//! t_end = 100.0
//! x0 = [1.0, 1.0]
//! seed = 7
//! n_traj = 4
//! mode = "sdde"         # sdde | fast | limit
//!
//! [output]
//! grid_min = [0.5, 0.5]
//! grid_max = [1.5, 1.5]
//! bins = [50, 50]
//! min_samples = 20
//! save_stride = 10
//! ```
//!
//! Command-specific lists (ratio grids, ε lists, …) live in `[study]`.
//! Unknown keys anywhere are errors.

use std::collections::BTreeMap;

use serde::Deserialize;
use toml::{Table, Value};

use crate::analysis::GridSpec;
use crate::error::{Error, Result};
use crate::model::{builtin, Model};
use crate::noise::GammaOmega;
use crate::sdde::DelayConfig;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelRaw {
    builtin: Option<String>,
    #[serde(default)]
    params: BTreeMap<String, f64>,
    m: Option<usize>,
    n: Option<usize>,
    f: Option<Vec<String>>,
    g: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseRaw {
    gamma: Option<f64>,
    omega_sq: Option<f64>,
    tau: Option<Vec<f64>>,
    k: Option<Vec<f64>>,
    epsilon: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DelaysRaw {
    delta: Option<Vec<f64>>,
    c: Option<Vec<f64>>,
    epsilon: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunRaw {
    t_end: Option<f64>,
    dt: Option<f64>,
    x0: Option<Vec<f64>>,
    seed: Option<u64>,
    n_traj: Option<usize>,
    mode: Option<String>,
    coefficients: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputRaw {
    grid_min: Option<Vec<f64>>,
    grid_max: Option<Vec<f64>>,
    bins: Option<Vec<usize>>,
    min_samples: Option<u64>,
    save_stride: Option<usize>,
}

/// Lists used by individual commands.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Study {
    /// coeff-table: ratio grid.
    pub ratios: Option<Vec<f64>>,
    /// coeff-table: `[Γ, Ω²]` pairs.
    pub rows: Option<Vec<[f64; 2]>>,
    /// converge: strictly decreasing `ε` values.
    pub epsilons: Option<Vec<f64>>,
    /// ou-check: increasing `Γ` values.
    pub gammas: Option<Vec<f64>>,
    /// ou-check: fixed `Γ/Ω²`.
    pub gamma_over_omega_sq: Option<f64>,
    /// noise-stats / ou-check: lags.
    pub lags: Option<Vec<f64>>,
    /// drift-field / zero-drift: per-component `δ_i/τ_i` panels.
    pub panels: Option<Vec<Vec<f64>>>,
    /// zero-drift: Newton start.
    pub x_init: Option<Vec<f64>>,
    /// zero-drift: point displacements are measured from.
    pub reference: Option<Vec<f64>>,
    /// drift-field: increment lag in saved samples.
    pub lag: Option<usize>,
    /// zero-drift: smoothing radius in cells (0 disables).
    pub smoothing: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimMode {
    Sdde,
    Fast,
    Limit,
}

impl SimMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sdde" => Some(SimMode::Sdde),
            "fast" => Some(SimMode::Fast),
            "limit" => Some(SimMode::Limit),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SimMode::Sdde => "sdde",
            SimMode::Fast => "fast",
            SimMode::Limit => "limit",
        }
    }
}

/// Which drift coefficients a limiting run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientChoice {
    General,
    Ou,
    Stratonovich,
    Ito,
}

impl CoefficientChoice {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "general" => Some(CoefficientChoice::General),
            "ou" => Some(CoefficientChoice::Ou),
            "stratonovich" => Some(CoefficientChoice::Stratonovich),
            "ito" => Some(CoefficientChoice::Ito),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub t_end: Option<f64>,
    /// As given; see [`Config::dt`] for the default.
    pub dt: Option<f64>,
    pub x0: Option<Vec<f64>>,
    pub seed: u64,
    pub n_traj: usize,
    pub mode: SimMode,
    pub coefficients: Option<CoefficientChoice>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSettings {
    pub grid: Option<GridSpec>,
    pub min_samples: u64,
    pub save_stride: usize,
}

/// A validated configuration. Sections a command does not need may be
/// absent; commands report what they miss.
#[derive(Debug, Clone)]
pub struct Config {
    pub model: Option<Model>,
    pub gamma_omega: Option<GammaOmega>,
    /// Present when both noise times and delays are given.
    pub delays: Option<DelayConfig>,
    /// `τ_j` when noise times are given without delays.
    pub taus: Option<Vec<f64>>,
    pub epsilon: Option<f64>,
    pub run: RunSettings,
    pub output: OutputSettings,
    pub study: Study,
    /// The merged document (after overrides), for echoing into outputs.
    pub echo: String,
}

impl Config {
    pub fn model(&self) -> Result<&Model> {
        self.model.as_ref().ok_or_else(|| Error::config("model", "section is required"))
    }

    pub fn gamma_omega(&self) -> Result<GammaOmega> {
        self.gamma_omega.ok_or_else(|| Error::config("noise.gamma", "noise gamma and omega_sq are required"))
    }

    pub fn delay_config(&self) -> Result<&DelayConfig> {
        self.delays.as_ref().ok_or_else(|| Error::config("delays", "delays and noise times are required"))
    }

    pub fn t_end(&self) -> Result<f64> {
        self.run.t_end.ok_or_else(|| Error::config("run.t_end", "required"))
    }

    /// `run.dt`, defaulting to `ε/50`.
    pub fn dt(&self) -> Result<f64> {
        self.run
            .dt
            .or(self.epsilon.map(|e| e / 50.0))
            .ok_or_else(|| Error::config("run.dt", "required when no epsilon is given"))
    }

    pub fn x0(&self) -> Result<Vec<f64>> {
        let x0 = self.run.x0.clone().ok_or_else(|| Error::config("run.x0", "required"))?;
        if let Some(m) = &self.model {
            if x0.len() != m.dim() {
                return Err(Error::config("run.x0", format!("has {} entries, model has {}", x0.len(), m.dim())));
            }
        }
        Ok(x0)
    }

    pub fn grid(&self) -> Result<&GridSpec> {
        self.output.grid.as_ref().ok_or_else(|| Error::config("output.grid_min", "grid_min, grid_max and bins are required"))
    }
}

/// Parses `text` and applies `key.path=value` overrides.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<Config> {
    let mut table: Table = text.parse().map_err(|e: toml::de::Error| Error::config("<document>", e.message().to_string()))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    validate(table)
}

fn apply_override(table: &mut Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::config(spec, "override must look like key.path=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(key, "empty key segment"));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| Error::config(key, format!("'{p}' is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn section<T: for<'de> Deserialize<'de> + Default>(table: &Table, name: &str) -> Result<T> {
    match table.get(name) {
        None => Ok(T::default()),
        Some(v) => v.clone().try_into().map_err(|e: toml::de::Error| Error::config(name, e.message().to_string())),
    }
}

fn positive(path: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(path, format!("must be positive and finite, got {v}")))
    }
}

fn positive_list(path: &str, v: &[f64]) -> Result<()> {
    for (i, x) in v.iter().enumerate() {
        positive(&format!("{path}[{}]", i + 1), *x)?;
    }
    Ok(())
}

fn validate(table: Table) -> Result<Config> {
    const SECTIONS: [&str; 6] = ["model", "noise", "delays", "run", "output", "study"];
    if let Some(k) = table.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
        return Err(Error::config(k.clone(), "unknown section"));
    }
    let model_raw: Option<ModelRaw> = table.contains_key("model").then(|| section(&table, "model")).transpose()?;
    let noise: NoiseRaw = section(&table, "noise")?;
    let delays: DelaysRaw = section(&table, "delays")?;
    let run: RunRaw = section(&table, "run")?;
    let output: OutputRaw = section(&table, "output")?;
    let study: Study = section(&table, "study")?;

    let model = model_raw.map(build_model).transpose()?;

    let gamma_omega = match (noise.gamma, noise.omega_sq) {
        (Some(g), Some(o)) => {
            positive("noise.gamma", g)?;
            positive("noise.omega_sq", o)?;
            Some(GammaOmega::new(g, o)?)
        }
        (None, None) => None,
        (Some(_), None) => return Err(Error::config("noise.omega_sq", "required with noise.gamma")),
        (None, Some(_)) => return Err(Error::config("noise.gamma", "required with noise.omega_sq")),
    };

    let epsilon = match (noise.epsilon, delays.epsilon) {
        (Some(a), Some(b)) if (a - b).abs() > 1e-12 * a.abs().max(b.abs()) => {
            return Err(Error::config("delays.epsilon", format!("{b} disagrees with noise.epsilon = {a}")))
        }
        (Some(a), _) => Some(positive("noise.epsilon", a)?),
        (None, Some(b)) => Some(positive("delays.epsilon", b)?),
        (None, None) => None,
    };

    let k = scaled_list("noise", "tau", "k", noise.tau, noise.k, epsilon)?;
    let c = scaled_list("delays", "delta", "c", delays.delta, delays.c, epsilon)?;
    let eps_or_one = epsilon.unwrap_or(1.0);
    if let (Some(m), Some(c)) = (&model, &c) {
        if c.len() != m.dim() {
            return Err(Error::config("delays", format!("{} delays given, model has {} components", c.len(), m.dim())));
        }
    }
    if let (Some(m), Some(k)) = (&model, &k) {
        if k.len() != m.channels() {
            return Err(Error::config("noise", format!("{} noise times given, model has {} channels", k.len(), m.channels())));
        }
    }
    let dc = match (&c, &k) {
        (Some(c), Some(k)) => Some(DelayConfig::new(c.clone(), k.clone(), eps_or_one)?),
        _ => None,
    };
    let taus = k.as_ref().map(|k| k.iter().map(|v| v * eps_or_one).collect());

    let mode = match run.mode.as_deref() {
        None => SimMode::Sdde,
        Some(s) => SimMode::parse(s).ok_or_else(|| Error::config("run.mode", format!("unknown mode '{s}', expected sdde, fast or limit")))?,
    };
    let coefficients = run
        .coefficients
        .as_deref()
        .map(|s| {
            CoefficientChoice::parse(s)
                .ok_or_else(|| Error::config("run.coefficients", format!("unknown choice '{s}', expected general, ou, stratonovich or ito")))
        })
        .transpose()?;
    if let Some(t) = run.t_end {
        positive("run.t_end", t)?;
    }
    let dt = run.dt.map(|dt| positive("run.dt", dt)).transpose()?;
    if run.n_traj == Some(0) {
        return Err(Error::config("run.n_traj", "must be at least 1"));
    }

    let grid = match (output.grid_min, output.grid_max, output.bins) {
        (Some(lo), Some(hi), Some(b)) => Some(GridSpec::new(lo, hi, b).map_err(|e| Error::config("output", e.to_string()))?),
        (None, None, None) => None,
        _ => return Err(Error::config("output", "grid_min, grid_max and bins go together")),
    };
    if output.save_stride == Some(0) {
        return Err(Error::config("output.save_stride", "must be at least 1"));
    }

    let echo = toml::to_string(&table).map_err(|e| Error::config("<document>", e.to_string()))?;
    Ok(Config {
        model,
        gamma_omega,
        delays: dc,
        taus,
        epsilon,
        run: RunSettings {
            t_end: run.t_end,
            dt,
            x0: run.x0,
            seed: run.seed.unwrap_or(0),
            n_traj: run.n_traj.unwrap_or(1),
            mode,
            coefficients,
        },
        output: OutputSettings {
            grid,
            min_samples: output.min_samples.unwrap_or(20),
            save_stride: output.save_stride.unwrap_or(1),
        },
        study,
        echo,
    })
}

/// Resolves `absolute` (e.g. `tau`) or `relative` (e.g. `k`) into the
/// relative list, dividing by `ε` (1 when absent). Both together must be
/// consistent.
fn scaled_list(
    sec: &str,
    abs_key: &str,
    rel_key: &str,
    absolute: Option<Vec<f64>>,
    relative: Option<Vec<f64>>,
    epsilon: Option<f64>,
) -> Result<Option<Vec<f64>>> {
    let eps = epsilon.unwrap_or(1.0);
    if let Some(a) = &absolute {
        positive_list(&format!("{sec}.{abs_key}"), a)?;
    }
    if let Some(r) = &relative {
        positive_list(&format!("{sec}.{rel_key}"), r)?;
    }
    match (absolute, relative) {
        (Some(a), Some(r)) => {
            if a.len() != r.len() {
                return Err(Error::config(format!("{sec}.{abs_key}"), format!("length differs from {sec}.{rel_key}")));
            }
            for (i, (x, y)) in a.iter().zip(&r).enumerate() {
                if (x - y * eps).abs() > 1e-9 * x.abs() {
                    return Err(Error::config(
                        format!("{sec}.{abs_key}[{}]", i + 1),
                        format!("{x} is inconsistent with {sec}.{rel_key} x epsilon = {}", y * eps),
                    ));
                }
            }
            Ok(Some(r))
        }
        (Some(a), None) => Ok(Some(a.iter().map(|x| x / eps).collect())),
        (None, r) => Ok(r),
    }
}

fn build_model(raw: ModelRaw) -> Result<Model> {
    match (raw.builtin, raw.m, raw.n, raw.f, raw.g) {
        (Some(name), None, None, None, None) => builtin(&name, &raw.params).map_err(|e| Error::config("model", e.to_string())),
        (None, Some(m), Some(n), Some(f), Some(g)) => {
            if !raw.params.is_empty() {
                return Err(Error::config("model.params", "only used with builtin models"));
            }
            if f.len() != m {
                return Err(Error::config("model.f", format!("expected {m} expressions, got {}", f.len())));
            }
            if g.len() != m {
                return Err(Error::config("model.g", format!("expected {m} rows, got {}", g.len())));
            }
            for (i, row) in g.iter().enumerate() {
                if row.len() != n {
                    return Err(Error::config(format!("model.g[{}]", i + 1), format!("expected {n} entries, got {}", row.len())));
                }
            }
            for (i, e) in f.iter().enumerate() {
                crate::expr::parse_expr(e, m).map_err(|err| Error::config(format!("model.f[{}]", i + 1), err.to_string()))?;
            }
            for (i, row) in g.iter().enumerate() {
                for (j, e) in row.iter().enumerate() {
                    crate::expr::parse_expr(e, m)
                        .map_err(|err| Error::config(format!("model.g[{}][{}]", i + 1, j + 1), err.to_string()))?;
                }
            }
            Model::from_strings(m, n, &f, &g)
        }
        _ => Err(Error::config("model", "give either builtin (+ params) or all of m, n, f, g")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TANH: &str = r#"
        [model]
        builtin = "tanh1d"
        params = { a = 1.0, sigma = 0.5 }

        [noise]
        gamma = 1.0
        omega_sq = 1.0
        k = [1.0]
        epsilon = 0.05

        [delays]
        c = [1.0]

        [run]
        t_end = 5.0
        x0 = [0.5]
    "#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(TANH, &[]).unwrap();
        assert_eq!(c.dt().unwrap(), 0.001);
        assert_eq!(c.run.dt, None);
        assert_eq!(c.run.seed, 0);
        assert_eq!(c.run.n_traj, 1);
        assert_eq!(c.run.mode, SimMode::Sdde);
        assert_eq!(c.output.min_samples, 20);
        assert_eq!(c.delay_config().unwrap().delta(), &[0.05]);
        assert_eq!(c.model().unwrap().dim(), 1);
    }

    #[test]
    fn inconsistent_delta_and_c() {
        let e = parse_config(TANH, &["delays.delta=[0.2]".into()]).unwrap_err();
        assert!(matches!(&e, Error::Config { path, .. } if path == "delays.delta[1]"), "{e}");
        assert!(parse_config(TANH, &["delays.delta=[0.05]".into()]).is_ok());
    }

    #[test]
    fn negative_tau_is_rejected() {
        let e = parse_config(TANH, &["noise.tau=[-0.05]".into()]).unwrap_err();
        assert!(matches!(&e, Error::Config { path, .. } if path == "noise.tau[1]"), "{e}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = parse_config(&format!("{TANH}\n[extra]\nx = 1\n"), &[]).unwrap_err();
        assert!(matches!(&e, Error::Config { path, .. } if path == "extra"));
        let e = parse_config(TANH, &["run.speed=3".into()]).unwrap_err();
        assert!(matches!(&e, Error::Config { path, msg } if path == "run" && msg.contains("speed")), "{e}");
    }

    #[test]
    fn overrides_apply_before_validation() {
        let c = parse_config(TANH, &["run.seed=42".into(), "run.mode=limit".into(), "output.save_stride=5".into()]).unwrap();
        assert_eq!(c.run.seed, 42);
        assert_eq!(c.run.mode, SimMode::Limit);
        assert_eq!(c.output.save_stride, 5);
        assert!(c.echo.contains("seed = 42"));
        assert!(parse_config(TANH, &["run.mode=warp".into()]).is_err());
        assert!(parse_config(TANH, &["noequals".into()]).is_err());
    }

    #[test]
    fn inline_model() {
        let text = r#"
            [model]
            m = 1
            n = 1
            f = ["-x1"]
            g = [["0.5*tanh(x1)"]]
        "#;
        let c = parse_config(text, &[]).unwrap();
        assert_eq!(c.model().unwrap().channels(), 1);
        let bad = text.replace("-x1", "-x2");
        let e = parse_config(&bad, &[]).unwrap_err();
        assert!(matches!(&e, Error::Config { path, .. } if path == "model.f[1]"), "{e}");
    }

    #[test]
    fn epsilon_mismatch_between_sections() {
        let e = parse_config(TANH, &["delays.epsilon=0.1".into()]).unwrap_err();
        assert!(matches!(&e, Error::Config { path, .. } if path == "delays.epsilon"));
    }

    #[test]
    fn tau_only_without_epsilon() {
        let text = "[noise]\ngamma = 2.0\nomega_sq = 1.0\ntau = [0.3]\n";
        let c = parse_config(text, &[]).unwrap();
        assert_eq!(c.taus, Some(vec![0.3]));
        assert!(c.dt().is_err());
    }
}
