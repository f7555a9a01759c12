//! Drift-field estimation on a rectangular grid, zero-drift search, and
//! pathwise convergence statistics.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fast::{simulate_fast, stability_check, FastState};
use crate::limit::{simulate_limit, DriftCoefficients};
use crate::model::Model;
use crate::noise::GammaOmega;
use crate::rng::stream;
use crate::sdde::{DelayConfig, RunConfig};
use crate::trajectory::Trajectory;
use crate::wiener::WienerPath;

/// Axis-aligned box split into `bins[i]` equal cells per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    min: Vec<f64>,
    max: Vec<f64>,
    bins: Vec<usize>,
}

impl GridSpec {
    pub fn new(min: Vec<f64>, max: Vec<f64>, bins: Vec<usize>) -> Result<Self> {
        if min.is_empty() || min.len() != max.len() || min.len() != bins.len() {
            return Err(Error::Dimension("grid min, max and bins must have equal non-zero length".into()));
        }
        for i in 0..min.len() {
            if !(min[i] < max[i]) || !min[i].is_finite() || !max[i].is_finite() || bins[i] == 0 {
                return Err(Error::InvalidParameter(format!(
                    "grid axis {}: need finite min < max and bins > 0",
                    i + 1
                )));
            }
        }
        Ok(GridSpec { min, max, bins })
    }

    /// Same range and bin count on each of `dim` axes.
    pub fn uniform(dim: usize, lo: f64, hi: f64, bins: usize) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim], vec![bins; dim])
    }

    pub fn dim(&self) -> usize {
        self.bins.len()
    }

    pub fn bins(&self) -> &[usize] {
        &self.bins
    }

    pub fn n_cells(&self) -> usize {
        self.bins.iter().product()
    }

    pub fn cell_width(&self, axis: usize) -> f64 {
        (self.max[axis] - self.min[axis]) / self.bins[axis] as f64
    }

    /// Largest cell width over the axes.
    pub fn max_cell_width(&self) -> f64 {
        (0..self.dim()).map(|a| self.cell_width(a)).fold(0.0, f64::max)
    }

    fn axis_bin(&self, axis: usize, v: f64) -> Option<usize> {
        let b = ((v - self.min[axis]) / self.cell_width(axis)).floor();
        (b >= 0.0 && b < self.bins[axis] as f64).then_some(b as usize)
    }

    /// Flat index of the cell holding `x` (last axis fastest), if inside.
    pub fn cell_index(&self, x: &[f64]) -> Option<usize> {
        let mut idx = 0;
        for (axis, v) in x.iter().enumerate() {
            idx = idx * self.bins[axis] + self.axis_bin(axis, *v)?;
        }
        Some(idx)
    }

    fn unflatten(&self, mut cell: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for axis in (0..self.dim()).rev() {
            out[axis] = cell % self.bins[axis];
            cell /= self.bins[axis];
        }
        out
    }

    fn flatten(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.bins).fold(0, |acc, (b, n)| acc * n + b)
    }

    fn axis_center(&self, axis: usize, b: usize) -> f64 {
        self.min[axis] + (b as f64 + 0.5) * self.cell_width(axis)
    }

    pub fn center(&self, cell: usize) -> Vec<f64> {
        self.unflatten(cell).iter().enumerate().map(|(a, b)| self.axis_center(a, *b)).collect()
    }
}

/// Streaming sums of `(x_{k+lag} - x_k) / (lag dt)` per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftAccumulator {
    grid: GridSpec,
    sum: Vec<f64>,
    sumsq: Vec<f64>,
    count: Vec<u64>,
}

impl DriftAccumulator {
    pub fn new(grid: GridSpec) -> Self {
        let (c, m) = (grid.n_cells(), grid.dim());
        DriftAccumulator { grid, sum: vec![0.0; c * m], sumsq: vec![0.0; c * m], count: vec![0; c] }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Adds every increment of `traj` taken over `lag` samples.
    pub fn add_trajectory(&mut self, traj: &Trajectory, lag: usize) -> Result<()> {
        let m = self.grid.dim();
        if traj.dim() != m {
            return Err(Error::Dimension(format!("trajectory has dim {}, grid has {m}", traj.dim())));
        }
        if lag == 0 {
            return Err(Error::InvalidParameter("lag must be positive".into()));
        }
        let h = traj.dt() * lag as f64;
        for k in 0..traj.len().saturating_sub(lag) {
            let x = traj.state(k);
            let Some(cell) = self.grid.cell_index(x) else { continue };
            let y = traj.state(k + lag);
            self.count[cell] += 1;
            for i in 0..m {
                let d = (y[i] - x[i]) / h;
                self.sum[cell * m + i] += d;
                self.sumsq[cell * m + i] += d * d;
            }
        }
        Ok(())
    }

    /// Adds another accumulator over the same grid.
    pub fn merge(&mut self, other: &DriftAccumulator) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Dimension("cannot merge accumulators over different grids".into()));
        }
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sumsq.iter_mut().zip(&other.sumsq) {
            *a += b;
        }
        for (a, b) in self.count.iter_mut().zip(&other.count) {
            *a += b;
        }
        Ok(())
    }

    pub fn finish(&self, min_samples: u64) -> DriftField {
        let m = self.grid.dim();
        let cells = self.grid.n_cells();
        let mut mean = vec![f64::NAN; cells * m];
        let mut stderr = vec![f64::NAN; cells * m];
        for c in 0..cells {
            let n = self.count[c];
            if n == 0 || n < min_samples {
                continue;
            }
            let nf = n as f64;
            for i in 0..m {
                let mu = self.sum[c * m + i] / nf;
                mean[c * m + i] = mu;
                if n > 1 {
                    let var = ((self.sumsq[c * m + i] - nf * mu * mu) / (nf - 1.0)).max(0.0);
                    stderr[c * m + i] = (var / nf).sqrt();
                }
            }
        }
        DriftField { grid: self.grid.clone(), min_samples, count: self.count.clone(), mean, stderr }
    }
}

/// Per-cell drift estimates; cells below `min_samples` are empty.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftField {
    grid: GridSpec,
    min_samples: u64,
    count: Vec<u64>,
    mean: Vec<f64>,
    stderr: Vec<f64>,
}

impl DriftField {
    /// Field sampled exactly from `f` at the cell centers.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Self {
        let m = grid.dim();
        let cells = grid.n_cells();
        let mut mean = Vec::with_capacity(cells * m);
        for c in 0..cells {
            let d = f(&grid.center(c));
            assert_eq!(d.len(), m);
            mean.extend(d);
        }
        DriftField { grid, min_samples: 1, count: vec![1; cells], mean, stderr: vec![0.0; cells * m] }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn count(&self, cell: usize) -> u64 {
        self.count[cell]
    }

    pub fn is_populated(&self, cell: usize) -> bool {
        self.count[cell] > 0 && self.count[cell] >= self.min_samples && !self.mean[cell * self.grid.dim()].is_nan()
    }

    pub fn drift(&self, cell: usize) -> Option<&[f64]> {
        let m = self.grid.dim();
        self.is_populated(cell).then(|| &self.mean[cell * m..(cell + 1) * m])
    }

    /// Standard error of each drift component; `NaN` where unknown.
    pub fn stderr(&self, cell: usize) -> Option<&[f64]> {
        let m = self.grid.dim();
        self.is_populated(cell).then(|| &self.stderr[cell * m..(cell + 1) * m])
    }

    pub fn populated_cells(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.grid.n_cells()).filter(|c| self.is_populated(*c))
    }

    /// Mean Euclidean norm of the drift over populated cells.
    pub fn typical_magnitude(&self) -> f64 {
        let (sum, n) = self
            .populated_cells()
            .fold((0.0, 0usize), |(s, n), c| (s + norm(self.drift(c).unwrap()), n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    /// Count-weighted local-linear fit over the cells within `radius`
    /// cells (per axis) of each populated cell, evaluated at its center.
    /// Counts of the result are the neighborhood totals; standard errors
    /// are not carried over.
    pub fn smoothed(&self, radius: usize) -> DriftField {
        let m = self.grid.dim();
        let cells = self.grid.n_cells();
        let mut mean = vec![f64::NAN; cells * m];
        let mut count = vec![0; cells];
        for c in self.populated_cells() {
            let centre = self.grid.center(c);
            let multi = self.grid.unflatten(c);
            let mut ata = DMatrix::<f64>::zeros(m + 1, m + 1);
            let mut atb = DMatrix::<f64>::zeros(m + 1, m);
            let mut total = 0;
            for nb in neighbourhood(&multi, self.grid.bins(), radius) {
                let cell = self.grid.flatten(&nb);
                let Some(d) = self.drift(cell) else { continue };
                let w = self.count[cell] as f64;
                total += self.count[cell];
                let mut row = vec![1.0];
                row.extend(nb.iter().enumerate().map(|(a, b)| self.grid.axis_center(a, *b) - centre[a]));
                for r in 0..=m {
                    for s in 0..=m {
                        ata[(r, s)] += w * row[r] * row[s];
                    }
                    for i in 0..m {
                        atb[(r, i)] += w * row[r] * d[i];
                    }
                }
            }
            let fit = ata.clone().lu().solve(&atb).filter(|f| f.iter().all(|v| v.is_finite()));
            let value: Vec<f64> = match fit {
                Some(f) => (0..m).map(|i| f[(0, i)]).collect(),
                None => (0..m).map(|i| atb[(0, i)] / ata[(0, 0)]).collect(),
            };
            mean[c * m..(c + 1) * m].copy_from_slice(&value);
            count[c] = total;
        }
        DriftField { grid: self.grid.clone(), min_samples: 1, count, mean, stderr: vec![f64::NAN; cells * m] }
    }

    /// Multilinear interpolation between cell centers. `None` outside the
    /// hull of centers or when any stencil cell is empty.
    pub fn interpolate(&self, x: &[f64]) -> Option<Vec<f64>> {
        let m = self.grid.dim();
        if x.len() != m {
            return None;
        }
        let mut lower = vec![0usize; m];
        let mut frac = vec![0.0; m];
        for a in 0..m {
            let u = (x[a] - self.grid.min[a]) / self.grid.cell_width(a) - 0.5;
            if !(u >= 0.0 && u <= (self.grid.bins[a] - 1) as f64) {
                return None;
            }
            let b = (u.floor() as usize).min(self.grid.bins[a].saturating_sub(2));
            lower[a] = b;
            frac[a] = u - b as f64;
        }
        let mut out = vec![0.0; m];
        let mut corner = vec![0usize; m];
        for mask in 0..(1usize << m) {
            let mut w = 1.0;
            for a in 0..m {
                let up = (mask >> a) & 1 == 1;
                corner[a] = lower[a] + usize::from(up);
                if corner[a] >= self.grid.bins[a] {
                    // Single-bin axis: only the lower corner exists.
                    if frac[a] != 0.0 {
                        return None;
                    }
                    w = 0.0;
                    corner[a] = lower[a];
                }
                w *= if up { frac[a] } else { 1.0 - frac[a] };
            }
            if w == 0.0 {
                continue;
            }
            let d = self.drift(self.grid.flatten(&corner))?;
            for i in 0..m {
                out[i] += w * d[i];
            }
        }
        Some(out)
    }

    /// Populated cell with the smallest drift norm.
    pub fn grid_argmin(&self) -> Result<usize> {
        self.populated_cells()
            .map(|c| (c, norm(self.drift(c).unwrap())))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(c, _)| c)
            .ok_or(Error::NoPopulatedCells)
    }

    /// CSV `x1_center,…,xm_center,d1,…,dm,count`; empty cells leave the
    /// drift columns blank.
    pub fn write_csv<W: Write>(&self, w: &mut W, comments: &[String]) -> Result<()> {
        let m = self.grid.dim();
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        let mut header: Vec<String> = (1..=m).map(|i| format!("x{i}_center")).collect();
        header.extend((1..=m).map(|i| format!("d{i}")));
        header.push("count".into());
        writeln!(w, "{}", header.join(","))?;
        for c in 0..self.grid.n_cells() {
            let mut fields: Vec<String> = self.grid.center(c).iter().map(f64::to_string).collect();
            match self.drift(c) {
                Some(d) => fields.extend(d.iter().map(f64::to_string)),
                None => fields.extend(std::iter::repeat_n(String::new(), m)),
            }
            fields.push(self.count[c].to_string());
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

fn neighbourhood(centre: &[usize], bins: &[usize], radius: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for (a, &c) in centre.iter().enumerate() {
        let lo = c.saturating_sub(radius);
        let hi = (c + radius).min(bins[a] - 1);
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (lo..=hi).map(move |b| {
                    let mut p = prefix.clone();
                    p.push(b);
                    p
                })
            })
            .collect();
    }
    out
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One-step (`lag = 1`) drift field of an ensemble sharing `dt`.
pub fn estimate_drift_field(ensemble: &[Trajectory], grid: &GridSpec, min_samples: u64) -> Result<DriftField> {
    estimate_drift_field_lagged(ensemble, grid, min_samples, 1)
}

/// Drift field from increments over `lag` samples.
pub fn estimate_drift_field_lagged(
    ensemble: &[Trajectory],
    grid: &GridSpec,
    min_samples: u64,
    lag: usize,
) -> Result<DriftField> {
    let first = ensemble.first().ok_or(Error::EmptyEnsemble)?;
    let mut acc = DriftAccumulator::new(grid.clone());
    for t in ensemble {
        if (t.dt() - first.dt()).abs() > 1e-12 * first.dt() {
            return Err(Error::GridMismatch("trajectories in an ensemble must share dt".into()));
        }
        acc.add_trajectory(t, lag)?;
    }
    Ok(acc.finish(min_samples))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZeroDriftMethod {
    Newton,
    GridArgmin,
}

impl std::fmt::Display for ZeroDriftMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ZeroDriftMethod::Newton => "newton",
            ZeroDriftMethod::GridArgmin => "grid_argmin",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroDriftReport {
    pub point: Vec<f64>,
    /// Distance from the reference point (normally the deterministic
    /// equilibrium).
    pub displacement: f64,
    pub method: ZeroDriftMethod,
}

impl ZeroDriftReport {
    /// `key=value` lines.
    pub fn to_key_values(&self) -> String {
        let point: Vec<String> = self.point.iter().map(f64::to_string).collect();
        format!(
            "point={}\ndisplacement={}\nmethod={}\n",
            point.join(","),
            self.displacement,
            self.method
        )
    }
}

/// Zero of the interpolated field by damped Newton from `x_init`, with a
/// finite-difference Jacobian at a tenth of a cell. Falls back to the
/// populated cell of smallest drift when Newton leaves the populated
/// region or stalls.
pub fn find_zero_drift(field: &DriftField, x_init: &[f64], reference: &[f64]) -> Result<ZeroDriftReport> {
    let m = field.grid.dim();
    if x_init.len() != m || reference.len() != m {
        return Err(Error::Dimension(format!("points must have {m} components")));
    }
    let fallback = field.grid_argmin()?;
    let tol = 1e-4 * field.typical_magnitude();
    let report = |point: Vec<f64>, method| {
        let displacement = norm(&point.iter().zip(reference).map(|(a, b)| a - b).collect::<Vec<_>>());
        ZeroDriftReport { point, displacement, method }
    };
    match newton(field, x_init, tol) {
        Some(point) => Ok(report(point, ZeroDriftMethod::Newton)),
        None => Ok(report(field.grid.center(fallback), ZeroDriftMethod::GridArgmin)),
    }
}

fn newton(field: &DriftField, x_init: &[f64], tol: f64) -> Option<Vec<f64>> {
    let m = field.grid.dim();
    let mut x = x_init.to_vec();
    let mut d = field.interpolate(&x)?;
    for _ in 0..100 {
        let dn = norm(&d);
        if dn <= tol {
            return Some(x);
        }
        let mut jac = DMatrix::zeros(m, m);
        for k in 0..m {
            let h = 0.1 * field.grid.cell_width(k);
            let mut up = x.clone();
            let mut dn_ = x.clone();
            up[k] += h;
            dn_[k] -= h;
            let (a, b) = match (field.interpolate(&up), field.interpolate(&dn_)) {
                (Some(a), Some(b)) => (a, b),
                (Some(a), None) => (a, d.clone()),
                (None, Some(b)) => (d.clone(), b),
                (None, None) => return None,
            };
            let span = if field.interpolate(&up).is_some() && field.interpolate(&dn_).is_some() { 2.0 * h } else { h };
            for i in 0..m {
                jac[(i, k)] = (a[i] - b[i]) / span;
            }
        }
        let step = jac.lu().solve(&DVector::from_column_slice(&d))?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(xi, si)| xi - lambda * si).collect();
            if let Some(dt) = field.interpolate(&trial) {
                if norm(&dt) < dn {
                    x = trial;
                    d = dt;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    (norm(&d) <= tol).then_some(x)
}

/// Largest Euclidean distance between the states of two paths on the same
/// time grid.
pub fn sup_distance(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.len() != b.len() || a.dim() != b.dim() || (a.dt() - b.dt()).abs() > 1e-12 * a.dt().max(b.dt()) {
        return Err(Error::GridMismatch(format!(
            "{} samples at dt {} vs {} samples at dt {}",
            a.len(),
            a.dt(),
            b.len(),
            b.dt()
        )));
    }
    Ok(a.states()
        .zip(b.states())
        .map(|(x, y)| norm(&x.iter().zip(y).map(|(p, q)| p - q).collect::<Vec<_>>()))
        .fold(0.0, f64::max))
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl ConvergenceRow {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Sup-distance statistics between the fast system and the limiting
/// equation (harmonic coefficients at the same ratios) for each `ε`.
///
/// `dc` fixes `c` and `k`; its own `ε` is ignored. `rc.dt` is the step
/// at the smallest `ε`; larger `ε` use a step scaled by `ε / ε_min`, which
/// must be a whole multiple, and coarsened copies of the same increments.
/// The limiting path is integrated at `rc.dt` and subsampled.
pub fn convergence_study(
    model: &Model,
    dc: &DelayConfig,
    go: GammaOmega,
    epsilons: &[f64],
    rc: &RunConfig,
    n_paths: usize,
) -> Result<Vec<ConvergenceRow>> {
    if epsilons.is_empty() || epsilons.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::InvalidParameter("epsilon list must be non-empty and strictly decreasing".into()));
    }
    if n_paths == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let eps_min = *epsilons.last().unwrap();
    let mut factors = Vec::with_capacity(epsilons.len());
    let mut configs = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let f = (eps / eps_min).round();
        if (f * eps_min - eps).abs() > 1e-9 * eps {
            return Err(Error::InvalidParameter(format!("epsilon {eps} is not a whole multiple of {eps_min}")));
        }
        let f = f as usize;
        let dce = dc.with_epsilon(eps)?;
        stability_check(&dce, go, rc.dt * f as f64).into_result()?;
        let rce = RunConfig { dt: rc.dt * f as f64, save_stride: 1, ..rc.clone() };
        rce.steps()?;
        factors.push(f);
        configs.push((dce, rce));
    }
    let n = model.channels();
    let limit_rc = RunConfig { save_stride: 1, ..rc.clone() };
    let steps = limit_rc.steps()?;
    let coeffs = DriftCoefficients::general(go, dc);

    let distances: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|p| -> Result<Vec<f64>> {
            let mut rng = stream(rc.seed, p as u64);
            let w = WienerPath::generate(steps, n, rc.dt, &mut rng);
            let limit = simulate_limit(model, &coeffs, &limit_rc, &w)?;
            let mut out = Vec::with_capacity(epsilons.len());
            for ((dce, rce), &f) in configs.iter().zip(&factors) {
                // Same normal draws for every ε, rescaled to its τ.
                let init = FastState::stationary(&rc.x0, dce, go, &mut rng.clone())?;
                let fast = simulate_fast(model, dce, go, rce, &w.coarsen(f), &init)?;
                out.push(sup_distance(&fast, &limit.subsample(f))?);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    Ok(epsilons
        .iter()
        .enumerate()
        .map(|(e, &epsilon)| {
            let mut d: Vec<f64> = distances.iter().map(|row| row[e]).collect();
            d.sort_by(f64::total_cmp);
            ConvergenceRow { epsilon, median: quantile(&d, 0.5), q1: quantile(&d, 0.25), q3: quantile(&d, 0.75) }
        })
        .collect())
}
