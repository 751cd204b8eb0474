//! Space-time grid description.
//!
//! Space is the periodic box `[-L, L)^n` sampled at `N` nodes per axis
//! (`h = 2L/N`); time is the window `[0, T]` sampled at `Mt + 1` levels
//! (`dt = T/Mt`). Fields carry every time level including both endpoints,
//! so their flat storage has `(Mt + 1) · N^n` samples.

use serde::{Deserialize, Serialize};

/// Hard cap on total samples per field, to keep accidental or hostile
/// configurations from exhausting memory before validation can reject them.
pub const MAX_TOTAL_SAMPLES: usize = 1 << 28;

/// Space-time grid: periodic box `[-L, L)^n` × time window `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Spatial dimension, 1–3.
    pub n: usize,
    /// Half-width of the box; nodes span `[-L, L)`.
    pub l: f64,
    /// Nodes per spatial axis (even, ≥ 8).
    pub nx: usize,
    /// Final time of the window.
    pub t: f64,
    /// Time steps; the window carries `mt + 1` levels.
    pub mt: usize,
    /// Whether the box is treated as a torus. Spectral routes require it;
    /// the quadrature route adds periodic images only when set.
    #[serde(default = "default_periodic")]
    pub periodic: bool,
}

fn default_periodic() -> bool {
    true
}

impl GridSpec {
    /// Validated constructor. `n ∈ {1,2,3}`, `nx` even and ≥ 8, `mt ≥ 2`,
    /// `l > 0`, `t > 0`.
    pub fn new(n: usize, l: f64, nx: usize, t: f64, mt: usize) -> crate::Result<Self> {
        let spec = GridSpec {
            n,
            l,
            nx,
            t,
            mt,
            periodic: true,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Re-check all structural invariants (used after deserialization).
    pub fn validate(&self) -> crate::Result<()> {
        use crate::Error;
        if !(1..=3).contains(&self.n) {
            return Err(Error::InvalidGrid(format!(
                "dimension n = {} not in 1..=3",
                self.n
            )));
        }
        if self.nx < 8 || self.nx % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "nx = {} must be even and ≥ 8",
                self.nx
            )));
        }
        if self.mt < 2 || self.mt > MAX_TOTAL_SAMPLES {
            return Err(Error::InvalidGrid(format!(
                "mt = {} must be in 2..={}",
                self.mt, MAX_TOTAL_SAMPLES
            )));
        }
        if !(self.l.is_finite() && self.l > 0.0) {
            return Err(Error::InvalidGrid(format!("l = {} must be positive", self.l)));
        }
        if !(self.t.is_finite() && self.t > 0.0) {
            return Err(Error::InvalidGrid(format!("t = {} must be positive", self.t)));
        }
        if self
            .nx
            .checked_pow(self.n as u32)
            .and_then(|s| s.checked_mul(self.mt + 1))
            .map_or(true, |total| total > MAX_TOTAL_SAMPLES)
        {
            return Err(Error::InvalidGrid(format!(
                "grid of {}^{} × {} samples exceeds the {} cap",
                self.nx,
                self.n,
                self.mt + 1,
                MAX_TOTAL_SAMPLES
            )));
        }
        Ok(())
    }

    /// Spatial mesh width `h = 2L/N`.
    pub fn h(&self) -> f64 {
        2.0 * self.l / self.nx as f64
    }

    /// Time step `dt = T/Mt`.
    pub fn dt(&self) -> f64 {
        self.t / self.mt as f64
    }

    /// Number of nodes in one spatial slice, `N^n`.
    pub fn spatial_len(&self) -> usize {
        self.nx.pow(self.n as u32)
    }

    /// Number of time levels stored, `Mt + 1`.
    pub fn time_len(&self) -> usize {
        self.mt + 1
    }

    /// Total samples per field.
    pub fn total_len(&self) -> usize {
        self.spatial_len() * self.time_len()
    }

    /// Coordinate of node `j` on a spatial axis: `x_j = -L + j·h`.
    pub fn axis_coord(&self, j: usize) -> f64 {
        -self.l + j as f64 * self.h()
    }

    /// Time of level `m`: `t_m = m·dt`.
    pub fn time_coord(&self, m: usize) -> f64 {
        m as f64 * self.dt()
    }

    /// Full coordinate vector of a spatial multi-index (row-major over axes).
    pub fn coords(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().map(|&j| self.axis_coord(j)).collect()
    }

    /// Flatten a spatial multi-index (row-major, axis 0 slowest).
    pub fn flatten(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.n);
        idx.iter().fold(0, |acc, &j| acc * self.nx + j)
    }

    /// Inverse of [`GridSpec::flatten`].
    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0usize; self.n];
        for ax in (0..self.n).rev() {
            idx[ax] = flat % self.nx;
            flat /= self.nx;
        }
        idx
    }

    /// Signed integer wavenumber for FFT bin `k` on an axis:
    /// `k` for `k < N/2`, `k − N` otherwise.
    pub fn signed_bin(&self, k: usize) -> i64 {
        if k < self.nx / 2 {
            k as i64
        } else {
            k as i64 - self.nx as i64
        }
    }

    /// Angular spatial frequency of FFT bin `k`: `ξ_k = π·k_signed / L`
    /// (period `2L`).
    pub fn xi(&self, k: usize) -> f64 {
        std::f64::consts::PI * self.signed_bin(k) as f64 / self.l
    }

    /// Angular temporal frequency of FFT bin `m` over the first `Mt` levels
    /// (period `T`): `ω_m = 2π·m_signed / T`.
    pub fn omega(&self, m: usize) -> f64 {
        let signed = if m < self.mt / 2 {
            m as i64
        } else {
            m as i64 - self.mt as i64
        };
        2.0 * std::f64::consts::PI * signed as f64 / self.t
    }

    /// `|ξ|²` for a flat spatial mode index (row-major over axes).
    pub fn xi_norm_sq(&self, flat_mode: usize) -> f64 {
        let idx = self.unflatten(flat_mode);
        idx.iter().map(|&k| self.xi(k).powi(2)).sum()
    }
}
