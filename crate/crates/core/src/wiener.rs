use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::standard_normal;

/// Pre-generated Wiener increments, `steps x channels`, each `N(0, dt)`.
///
/// Sharing one path between the fast system and the limiting equation puts
/// both on the same probability space, so their paths can be compared
/// pointwise.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerPath {
    dt: f64,
    channels: usize,
    increments: Vec<f64>,
}

impl WienerPath {
    pub fn generate<R: Rng + ?Sized>(steps: usize, channels: usize, dt: f64, rng: &mut R) -> Self {
        let sd = dt.sqrt();
        let increments = (0..steps * channels).map(|_| sd * standard_normal(rng)).collect();
        WienerPath { dt, channels, increments }
    }

    pub fn from_increments(dt: f64, channels: usize, increments: Vec<f64>) -> Result<Self> {
        if channels == 0 || !increments.len().is_multiple_of(channels) {
            return Err(Error::Dimension("increment count must be a multiple of the channel count".into()));
        }
        Ok(WienerPath { dt, channels, increments })
    }

    /// All-zero increments (deterministic runs).
    pub fn zeros(steps: usize, channels: usize, dt: f64) -> Self {
        WienerPath { dt, channels, increments: vec![0.0; steps * channels] }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn steps(&self) -> usize {
        self.increments.len() / self.channels
    }

    /// Increments of step `k`, one per channel.
    pub fn increment(&self, k: usize) -> &[f64] {
        &self.increments[k * self.channels..(k + 1) * self.channels]
    }

    /// Path on a grid `factor` times coarser, summing consecutive increments.
    /// A trailing partial block is dropped.
    pub fn coarsen(&self, factor: usize) -> WienerPath {
        assert!(factor > 0);
        let steps = self.steps() / factor;
        let mut increments = vec![0.0; steps * self.channels];
        for k in 0..steps {
            for f in 0..factor {
                let src = self.increment(k * factor + f);
                for (dst, s) in increments[k * self.channels..].iter_mut().zip(src) {
                    *dst += s;
                }
            }
        }
        WienerPath { dt: self.dt * factor as f64, channels: self.channels, increments }
    }

    /// `W` at grid points `0, dt, 2dt, …` for channel `j`.
    pub fn cumulative(&self, j: usize) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.steps() + 1);
        let mut acc = 0.0;
        w.push(acc);
        for k in 0..self.steps() {
            acc += self.increment(k)[j];
            w.push(acc);
        }
        w
    }
}
