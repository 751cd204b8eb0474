//! Synthetic data: closed-form initial slices, seeded band-limited random
//! slices and space-time fields, and the serializable initial-condition
//! dispatcher used by run configurations.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::fft;
use crate::field::Field;
use crate::grid::GridSpec;
use crate::{Error, Result};

/// Centred Gaussian bump `amplitude · exp(−|x|² / width²)`.
pub fn bump_slice(grid: &GridSpec, amplitude: f64, width: f64) -> Result<Vec<f64>> {
    if !(width.is_finite() && width > 0.0) {
        return Err(Error::param(format!("bump width {width} must be positive")));
    }
    let mut out = Vec::with_capacity(grid.spatial_len());
    for j in 0..grid.spatial_len() {
        let r2: f64 = grid
            .unflatten(j)
            .iter()
            .map(|&ji| {
                let x = grid.axis_coord(ji);
                x * x
            })
            .sum();
        out.push(amplitude * (-r2 / (width * width)).exp());
    }
    Ok(out)
}

/// Product of axis cosines `amplitude · Π cos(π kᵢ xᵢ / L)` — an exact torus
/// eigenfunction of the spatial symbol.
pub fn cosine_slice(grid: &GridSpec, amplitude: f64, k: &[i64]) -> Result<Vec<f64>> {
    if k.len() != grid.n {
        return Err(Error::ShapeMismatch(format!(
            "cosine mode vector has {} entries, grid has {} axes",
            k.len(),
            grid.n
        )));
    }
    let mut out = Vec::with_capacity(grid.spatial_len());
    for j in 0..grid.spatial_len() {
        let mut v = amplitude;
        for (ax, &ji) in grid.unflatten(j).iter().enumerate() {
            let x = grid.axis_coord(ji);
            v *= (std::f64::consts::PI * k[ax] as f64 * x / grid.l).cos();
        }
        out.push(v);
    }
    Ok(out)
}

/// Mean-free random slice with spectrum supported on `0 < |kᵢ| ≤ kmax`
/// (signed per-axis bins), coefficients damped like `1/(1+|k|²)` and
/// Hermitian-paired so the result is exactly real. The slice is rescaled to
/// the requested sup norm.
pub fn random_slice(
    grid: &GridSpec,
    kmax: usize,
    amplitude: f64,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<f64>> {
    if kmax == 0 || kmax >= grid.nx / 2 {
        return Err(Error::param(format!(
            "band limit kmax = {kmax} must lie in 1..{}",
            grid.nx / 2
        )));
    }
    let spatial = grid.spatial_len();
    let shape: Vec<usize> = std::iter::repeat(grid.nx).take(grid.n).collect();
    let mut spec = vec![Complex64::ZERO; spatial];
    for flat in 0..spatial {
        let idx = grid.unflatten(flat);
        let signed: Vec<i64> = idx.iter().map(|&ji| grid.signed_bin(ji)).collect();
        if signed.iter().all(|&b| b == 0) || signed.iter().any(|&b| b.unsigned_abs() as usize > kmax)
        {
            continue;
        }
        // Visit each ± pair once, from its canonical member.
        let mirror_idx: Vec<usize> = idx.iter().map(|&ji| (grid.nx - ji) % grid.nx).collect();
        let mirror = grid.flatten(&mirror_idx);
        if mirror < flat {
            continue;
        }
        let damp = 1.0 / (1.0 + signed.iter().map(|&b| (b * b) as f64).sum::<f64>());
        let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * damp;
        if mirror == flat {
            spec[flat] = Complex64::new(c.re, 0.0);
        } else {
            spec[flat] = c;
            spec[mirror] = c.conj();
        }
    }
    fft::inverse(&mut spec, &shape);
    let sup = spec.iter().map(|v| v.re.abs()).fold(0.0, f64::max).max(1e-300);
    Ok(spec.iter().map(|v| v.re * amplitude / sup).collect())
}

/// Random space-time field: a sum of `modes` separable waves
/// `a cos(ξ·x + φ) cos(ω t + ψ)` with per-axis spatial bins `|k| ≤ kmax`
/// and time bins `|kt| ≤ kt_max`, rescaled to the requested sup norm.
pub fn random_field(
    grid: &GridSpec,
    kmax: usize,
    kt_max: usize,
    amplitude: f64,
    modes: usize,
    rng: &mut ChaCha12Rng,
) -> Result<Field> {
    if kmax == 0 || kmax >= grid.nx / 2 {
        return Err(Error::param(format!(
            "band limit kmax = {kmax} must lie in 1..{}",
            grid.nx / 2
        )));
    }
    if modes == 0 {
        return Err(Error::param("need at least one mode".into()));
    }
    struct Wave {
        k: Vec<f64>,
        phase_x: f64,
        omega: f64,
        phase_t: f64,
        amp: f64,
    }
    let waves: Vec<Wave> = (0..modes)
        .map(|_| {
            let k: Vec<f64> = (0..grid.n)
                .map(|_| {
                    let b = rng.random_range(-(kmax as i64)..=kmax as i64) as f64;
                    std::f64::consts::PI * b / grid.l
                })
                .collect();
            let kt = rng.random_range(0..=kt_max as i64) as f64;
            Wave {
                k,
                phase_x: rng.random_range(0.0..std::f64::consts::TAU),
                omega: std::f64::consts::TAU * kt / grid.t,
                phase_t: rng.random_range(0.0..std::f64::consts::TAU),
                amp: rng.random_range(-1.0..1.0),
            }
        })
        .collect();
    let field = Field::sample_real(grid, |x, t| {
        waves
            .iter()
            .map(|w| {
                let dot: f64 = w.k.iter().zip(x).map(|(ki, xi)| ki * xi).sum();
                w.amp * (dot + w.phase_x).cos() * (w.omega * t + w.phase_t).cos()
            })
            .sum()
    })?;
    let sup = field.linf_norm_all().max(1e-300);
    let values = field
        .values()
        .iter()
        .map(|v| v * (amplitude / sup))
        .collect();
    Field::from_values(grid.clone(), crate::field::FieldKind::Real, values)
}

/// Serializable initial-condition recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum InitialSpec {
    /// `amplitude · exp(−|x|²/width²)`.
    Bump {
        amplitude: f64,
        #[serde(default = "default_width")]
        width: f64,
    },
    /// `amplitude · Π cos(π kᵢ xᵢ / L)`.
    Cosine { amplitude: f64, k: Vec<i64> },
    /// Seeded band-limited random slice with the given sup norm.
    RandomBand { amplitude: f64, kmax: usize },
    /// One value per spatial node, row-major.
    Tabulated { values: Vec<f64> },
    /// `u₀ ≡ 0`.
    Zero,
}

fn default_width() -> f64 {
    1.0
}

impl InitialSpec {
    /// Materialise the slice on a grid. The seed only affects random shapes.
    pub fn sample(&self, grid: &GridSpec, seed: u64) -> Result<Vec<f64>> {
        match self {
            InitialSpec::Bump { amplitude, width } => bump_slice(grid, *amplitude, *width),
            InitialSpec::Cosine { amplitude, k } => cosine_slice(grid, *amplitude, k),
            InitialSpec::RandomBand { amplitude, kmax } => {
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                random_slice(grid, *kmax, *amplitude, &mut rng)
            }
            InitialSpec::Tabulated { values } => {
                if values.len() != grid.spatial_len() {
                    return Err(Error::ShapeMismatch(format!(
                        "tabulated initial slice has {} values, grid has {} nodes",
                        values.len(),
                        grid.spatial_len()
                    )));
                }
                if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteSample {
                        index: bad,
                        value: values[bad],
                    });
                }
                Ok(values.clone())
            }
            InitialSpec::Zero => Ok(vec![0.0; grid.spatial_len()]),
        }
    }
}
