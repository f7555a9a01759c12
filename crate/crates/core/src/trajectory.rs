use std::io::Write;

use crate::error::{Error, Result};

/// Uniformly sampled path: `t_k = k * dt` for `k = 0..=N`, with an
/// `m`-vector of state per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dt: f64,
    dim: usize,
    states: Vec<f64>,
}

impl Trajectory {
    pub fn new(dt: f64, dim: usize) -> Self {
        Trajectory { dt, dim, states: Vec::new() }
    }

    pub fn with_capacity(dt: f64, dim: usize, samples: usize) -> Self {
        Trajectory { dt, dim, states: Vec::with_capacity(samples * dim) }
    }

    pub fn from_states(dt: f64, dim: usize, states: Vec<f64>) -> Result<Self> {
        if dim == 0 || !states.len().is_multiple_of(dim) {
            return Err(Error::Dimension("state buffer length must be a multiple of dim".into()));
        }
        Ok(Trajectory { dt, dim, states })
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim);
        self.states.extend_from_slice(x);
    }

    /// Sampling interval.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn last(&self) -> Option<&[f64]> {
        (!self.is_empty()).then(|| self.state(self.len() - 1))
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks_exact(self.dim)
    }

    /// Every `stride`-th sample.
    pub fn subsample(&self, stride: usize) -> Trajectory {
        assert!(stride > 0);
        let mut out = Trajectory::new(self.dt * stride as f64, self.dim);
        for k in (0..self.len()).step_by(stride) {
            out.push(self.state(k));
        }
        out
    }

    /// Component `i` over time.
    pub fn component(&self, i: usize) -> Vec<f64> {
        self.states().map(|x| x[i]).collect()
    }

    /// CSV with header `t,x1,…,xm`, preceded by `# ` comment lines.
    /// Floats use Rust's shortest round-trip formatting.
    pub fn write_csv<W: Write>(&self, w: &mut W, comments: &[String]) -> Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        let header: Vec<String> = (1..=self.dim).map(|i| format!("x{i}")).collect();
        writeln!(w, "t,{}", header.join(","))?;
        let mut line = String::new();
        for (k, x) in self.states().enumerate() {
            line.clear();
            line.push_str(&self.time(k).to_string());
            for v in x {
                line.push(',');
                line.push_str(&v.to_string());
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}
