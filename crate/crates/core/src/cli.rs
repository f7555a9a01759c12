//! Command dispatch behind the `sdde` binary.
//!
//! Every command reads a [`Config`](crate::config::Config), writes CSV
//! files into an output directory, and returns their paths. CSVs start
//! with `#` comment lines carrying the tool version, the command and the
//! full merged configuration.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::analysis::{convergence_study, find_zero_drift, DriftField};
use crate::config::{parse_config, CoefficientChoice, Config, SimMode};
use crate::ensemble::{fast_ensemble, limit_drift, limit_ensemble, sdde_drift, sdde_ensemble};
use crate::error::{Error, Result};
use crate::fast::stability_check;
use crate::limit::{coeff_general, coeff_ou, DriftCoefficients};
use crate::noise::{noise_statistics, GammaOmega};
use crate::ou::{ou_convergence_check, write_ou_table, OuCheck};
use crate::sdde::{DelayConfig, RunConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    CoeffTable,
    NoiseStats,
    Simulate,
    Converge,
    DriftField,
    ZeroDrift,
    OuCheck,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::CoeffTable,
        Command::NoiseStats,
        Command::Simulate,
        Command::Converge,
        Command::DriftField,
        Command::ZeroDrift,
        Command::OuCheck,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::CoeffTable => "coeff-table",
            Command::NoiseStats => "noise-stats",
            Command::Simulate => "simulate",
            Command::Converge => "converge",
            Command::DriftField => "drift-field",
            Command::ZeroDrift => "zero-drift",
            Command::OuCheck => "ou-check",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub command: Command,
    /// Without a file the configuration is empty (plus overrides).
    pub config_path: Option<PathBuf>,
    /// `key.path=value` entries applied on top of the file.
    pub overrides: Vec<String>,
    pub out_dir: PathBuf,
}

/// 1 for configuration and input errors, 2 for numerical failures.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        2
    } else {
        1
    }
}

/// Single machine-readable line for standard error.
pub fn error_line(e: &Error) -> String {
    let msg = e.to_string().replace('\n', " ");
    format!("sdde-error kind={} exit={} message={msg}", e.kind(), exit_code(e))
}

/// Runs one command and returns the files written.
pub fn run(spec: &RunSpec) -> Result<Vec<PathBuf>> {
    let text = match &spec.config_path {
        Some(p) => fs::read_to_string(p).map_err(|e| Error::config(p.display().to_string(), e.to_string()))?,
        None => String::new(),
    };
    let cfg = parse_config(&text, &spec.overrides)?;
    fs::create_dir_all(&spec.out_dir).map_err(|e| Error::config(spec.out_dir.display().to_string(), e.to_string()))?;
    let ctx = Ctx { cfg: &cfg, out: &spec.out_dir, command: spec.command };
    match spec.command {
        Command::CoeffTable => ctx.coeff_table(),
        Command::NoiseStats => ctx.noise_stats(),
        Command::Simulate => ctx.simulate(),
        Command::Converge => ctx.converge(),
        Command::DriftField => ctx.drift_fields(false),
        Command::ZeroDrift => ctx.drift_fields(true),
        Command::OuCheck => ctx.ou_check(),
    }
}

/// Default fast-system step at `eps`: `ε/50`, or smaller when needed to
/// pass the stability check.
fn fast_dt(dc: &DelayConfig, go: GammaOmega, eps: f64) -> f64 {
    let rho = stability_check(dc, go, 1.0).rho;
    (eps / 50.0).min(0.1 * eps / rho)
}

struct Ctx<'a> {
    cfg: &'a Config,
    out: &'a Path,
    command: Command,
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

impl Ctx<'_> {
    fn comments(&self, extra: &[String]) -> Vec<String> {
        let mut c = vec![format!("sddekit {VERSION} {}", self.command)];
        c.extend(self.cfg.echo.lines().filter(|l| !l.trim().is_empty()).map(|l| format!("config: {l}")));
        c.extend(extra.iter().cloned());
        c
    }

    fn create(&self, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
        let path = self.out.join(name);
        let f = File::create(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Ok((path, BufWriter::new(f)))
    }

    fn write_csv(&self, name: &str, extra: &[String], header: &str, rows: &[String]) -> Result<PathBuf> {
        let (path, mut w) = self.create(name)?;
        for c in self.comments(extra) {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "{header}")?;
        for r in rows {
            writeln!(w, "{r}")?;
        }
        w.flush()?;
        Ok(path)
    }

    fn run_config(&self) -> Result<RunConfig> {
        Ok(RunConfig::new(self.cfg.t_end()?, self.cfg.dt()?, self.cfg.x0()?)
            .seed(self.cfg.run.seed)
            .n_traj(self.cfg.run.n_traj)
            .save_stride(self.cfg.output.save_stride))
    }

    fn coeff_table(&self) -> Result<Vec<PathBuf>> {
        let ratios = self.cfg.study.ratios.clone().unwrap_or_else(|| (0..=100).map(|i| i as f64 * 0.1).collect());
        if let Some((i, r)) = ratios.iter().enumerate().find(|(_, r)| !(**r >= 0.0)) {
            return Err(Error::config(format!("study.ratios[{}]", i + 1), format!("must be non-negative, got {r}")));
        }
        let rows: Vec<[f64; 2]> = match (&self.cfg.study.rows, self.cfg.gamma_omega) {
            (Some(r), _) => r.clone(),
            (None, Some(go)) => vec![[go.gamma, go.omega_sq]],
            (None, None) => vec![[1.0, 1.0]],
        };
        let mut files = Vec::new();
        let table = |f: &dyn Fn(f64) -> f64| ratios.iter().map(|&r| format!("{r},{}", f(r))).collect::<Vec<_>>();
        files.push(self.write_csv("coeff_ou.csv", &["curve=ou_limit".into()], "ratio,coeff", &table(&coeff_ou))?);
        for (i, [g, o]) in rows.iter().copied().enumerate() {
            GammaOmega::new(g, o).map_err(|e| Error::config(format!("study.rows[{}]", i + 1), e.to_string()))?;
            files.push(self.write_csv(
                &format!("coeff_general_{i:03}.csv"),
                &[format!("curve=general gamma={g} omega_sq={o}")],
                "ratio,coeff",
                &table(&|r| coeff_general(g, o, r)),
            )?);
        }
        Ok(files)
    }

    fn noise_stats(&self) -> Result<Vec<PathBuf>> {
        let go = self.cfg.gamma_omega()?;
        let taus = self.cfg.taus.clone().ok_or_else(|| Error::config("noise.tau", "tau or k is required"))?;
        let t_end = self.cfg.t_end()?;
        let mut rows = Vec::new();
        for (j, &tau) in taus.iter().enumerate() {
            let params = go.with_tau(tau)?;
            let dt = self.cfg.run.dt.unwrap_or(tau / 20.0);
            let lags = self.cfg.study.lags.clone().unwrap_or_else(|| vec![0.0, tau / 2.0, tau, 2.0 * tau]);
            let seed = self.cfg.run.seed.wrapping_add(j as u64);
            for r in noise_statistics(&params, &lags, self.cfg.run.n_traj, t_end, dt, seed)? {
                rows.push(format!(
                    "{},{},{},{},{},{},{}",
                    j + 1,
                    r.quantity,
                    r.lag,
                    r.theory,
                    r.estimate,
                    r.stderr,
                    r.within(3.0)
                ));
            }
        }
        Ok(vec![self.write_csv(
            "noise_stats.csv",
            &[],
            "channel,quantity,lag,theory,estimate,stderr,within_3se",
            &rows,
        )?])
    }

    fn limit_coefficients(&self, ratios: Option<&[Vec<f64>]>) -> Result<DriftCoefficients> {
        let model = self.cfg.model()?;
        let (n, m) = (model.channels(), model.dim());
        let from_dc = || -> Result<Vec<Vec<f64>>> { Ok(self.cfg.delay_config()?.ratios()) };
        let choice = self.cfg.run.coefficients.unwrap_or(if self.cfg.gamma_omega.is_some() {
            CoefficientChoice::General
        } else {
            CoefficientChoice::Ou
        });
        let ratios = match ratios {
            Some(r) => r.to_vec(),
            None if matches!(choice, CoefficientChoice::General | CoefficientChoice::Ou) => from_dc()?,
            None => Vec::new(),
        };
        match choice {
            CoefficientChoice::Stratonovich => Ok(DriftCoefficients::stratonovich(n, m)),
            CoefficientChoice::Ito => Ok(DriftCoefficients::ito(n, m)),
            CoefficientChoice::Ou => DriftCoefficients::ou_from_ratios(&ratios),
            CoefficientChoice::General => DriftCoefficients::general_from_ratios(self.cfg.gamma_omega()?, &ratios),
        }
    }

    fn simulate(&self) -> Result<Vec<PathBuf>> {
        let model = self.cfg.model()?;
        let rc = self.run_config()?;
        let mode = self.cfg.run.mode;
        let (trajs, meta) = match mode {
            SimMode::Sdde => {
                let dc = self.cfg.delay_config()?;
                let noise = dc.harmonic_params(self.cfg.gamma_omega()?)?;
                (sdde_ensemble(model, dc, &noise, &rc)?, None)
            }
            SimMode::Fast => {
                let (dc, go) = (self.cfg.delay_config()?, self.cfg.gamma_omega()?);
                let rc = RunConfig { dt: self.cfg.run.dt.unwrap_or(fast_dt(dc, go, dc.epsilon())), ..rc };
                (fast_ensemble(model, dc, go, &rc)?, None)
            }
            SimMode::Limit => {
                let coeffs = self.limit_coefficients(None)?;
                (limit_ensemble(model, &coeffs, &rc)?, Some(coeffs.metadata(rc.seed)))
            }
        };
        let mut files = Vec::with_capacity(trajs.len() + 1);
        for (i, t) in trajs.iter().enumerate() {
            let (path, mut w) = self.create(&format!("traj_{i:04}.csv"))?;
            t.write_csv(&mut w, &self.comments(&[format!("mode={} trajectory={i}", mode.as_str())]))?;
            w.flush()?;
            files.push(path);
        }
        if let Some(meta) = meta {
            let (path, mut w) = self.create("limit.meta")?;
            w.write_all(meta.as_bytes())?;
            w.flush()?;
            files.push(path);
        }
        Ok(files)
    }

    fn converge(&self) -> Result<Vec<PathBuf>> {
        let model = self.cfg.model()?;
        let dc = self.cfg.delay_config()?;
        let go = self.cfg.gamma_omega()?;
        let eps = self.cfg.study.epsilons.clone().unwrap_or_else(|| vec![0.1, 0.05, 0.025]);
        let eps_min = eps.iter().copied().fold(f64::INFINITY, f64::min);
        let dt = self.cfg.run.dt.unwrap_or(fast_dt(dc, go, eps_min));
        let rc = RunConfig::new(self.cfg.t_end()?, dt, self.cfg.x0()?).seed(self.cfg.run.seed);
        let rows = convergence_study(model, dc, go, &eps, &rc, self.cfg.run.n_traj)?;
        let lines: Vec<String> =
            rows.iter().map(|r| format!("{},{},{},{},{}", r.epsilon, r.median, r.q1, r.q3, r.iqr())).collect();
        Ok(vec![self.write_csv("converge.csv", &[], "epsilon,median,q1,q3,iqr", &lines)?])
    }

    /// Field for one panel of ratios `δ_i/τ`, or for the configured delays
    /// when `panel` is `None`.
    fn panel_field(&self, panel: Option<&[f64]>) -> Result<DriftField> {
        let model = self.cfg.model()?;
        let grid = self.cfg.grid()?;
        let rc = self.run_config()?;
        let lag = self.cfg.study.lag.unwrap_or(1);
        let (m, n) = (model.dim(), model.channels());
        if let Some(p) = panel.filter(|p| p.len() != m) {
            return Err(Error::config("study.panels", format!("each panel needs {m} ratios, got {}", p.len())));
        }
        let acc = match self.cfg.run.mode {
            SimMode::Limit => {
                // τ_j = 1, δ_p = r_p: the coefficient matrix sees ratio r_p in every row.
                let ratios = panel.map(|p| vec![p.to_vec(); n]);
                let coeffs = self.limit_coefficients(ratios.as_deref())?;
                limit_drift(model, &coeffs, &rc, grid, lag)?
            }
            SimMode::Sdde => {
                let dc = match panel {
                    None => self.cfg.delay_config()?.clone(),
                    Some(p) => {
                        let eps = self
                            .cfg
                            .epsilon
                            .ok_or_else(|| Error::config("noise.epsilon", "sdde drift fields need epsilon"))?;
                        DelayConfig::new(p.to_vec(), vec![1.0; n], eps)
                            .map_err(|e| Error::config("study.panels", e.to_string()))?
                    }
                };
                let noise = dc.harmonic_params(self.cfg.gamma_omega()?)?;
                sdde_drift(model, &dc, &noise, &rc, grid, lag)?
            }
            SimMode::Fast => return Err(Error::config("run.mode", "drift fields support sdde and limit")),
        };
        Ok(acc.finish(self.cfg.output.min_samples))
    }

    fn drift_fields(&self, zero: bool) -> Result<Vec<PathBuf>> {
        let m = self.cfg.model()?.dim();
        let panels: Vec<Option<Vec<f64>>> = match &self.cfg.study.panels {
            Some(p) => p.iter().cloned().map(Some).collect(),
            None => vec![None],
        };
        let mut files = Vec::new();
        let mut summary = Vec::new();
        for (i, panel) in panels.iter().enumerate() {
            let field = self.panel_field(panel.as_deref())?;
            let shown = panel.as_deref().map_or_else(|| vec![String::new(); m].join(","), join);
            let tag = format!("panel={}", panel.as_deref().map_or_else(|| "configured".to_string(), join));
            if !zero {
                let (path, mut w) = self.create(&format!("drift_field_{i:03}.csv"))?;
                field.write_csv(&mut w, &self.comments(&[tag]))?;
                w.flush()?;
                files.push(path);
                continue;
            }
            let radius = self.cfg.study.smoothing.unwrap_or(5);
            let field = if radius > 0 { field.smoothed(radius) } else { field };
            let x0 = self.cfg.x0()?;
            let x_init = self.cfg.study.x_init.clone().unwrap_or_else(|| x0.clone());
            let reference = self.cfg.study.reference.clone().unwrap_or(x0);
            let report = find_zero_drift(&field, &x_init, &reference)?;
            let (path, mut w) = self.create(&format!("zero_drift_{i:03}.txt"))?;
            writeln!(w, "{tag}")?;
            w.write_all(report.to_key_values().as_bytes())?;
            w.flush()?;
            files.push(path);
            summary.push(format!("{shown},{},{},{}", join(&report.point), report.displacement, report.method));
        }
        if zero {
            let mut header: Vec<String> = (1..=m).map(|i| format!("r{i}")).collect();
            header.extend((1..=m).map(|i| format!("x{i}")));
            header.extend(["displacement".to_string(), "method".to_string()]);
            files.push(self.write_csv("zero_drift.csv", &[], &header.join(","), &summary)?);
        }
        Ok(files)
    }

    fn ou_check(&self) -> Result<Vec<PathBuf>> {
        let tau = self.cfg.taus.as_ref().and_then(|t| t.first().copied()).unwrap_or(1.0);
        let ratio = self
            .cfg
            .study
            .gamma_over_omega_sq
            .or(self.cfg.gamma_omega.map(|go| go.gamma / go.omega_sq))
            .unwrap_or(1.0);
        let gammas = self.cfg.study.gammas.clone().unwrap_or_else(|| vec![10.0, 100.0, 1000.0]);
        let mut check = OuCheck::new(tau, ratio, gammas, self.cfg.run.n_traj);
        check.seed = self.cfg.run.seed;
        if let Some(t) = self.cfg.run.t_end {
            check.t_end = t;
        }
        if let Some(dt) = self.cfg.run.dt {
            check.dt = dt;
        }
        if let Some(l) = &self.cfg.study.lags {
            check.lags = l.clone();
        }
        let rows = ou_convergence_check(&check)?;
        let (path, mut w) = self.create("ou_table.csv")?;
        write_ou_table(&rows, &mut w, &self.comments(&[format!("tau={tau} gamma_over_omega_sq={ratio} dt={}", check.dt)]))?;
        w.flush()?;
        Ok(vec![path])
    }
}
