//! Spatial weights `a(x)` multiplying the nonlinearity.
//!
//! Supported closed forms act through the first coordinate only (odd
//! monomials, signed and absolute powers); tabulated weights carry one value
//! per spatial node. Declared structure (monotonicity along `x₁`, evenness,
//! radiality, growth bound) is auditable against the sampled grid.

use serde::{Deserialize, Serialize};

use crate::grid::GridSpec;
use crate::{Error, Result};

/// Functional form of the weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum WeightForm {
    /// `a(x) = x₁^k`, `k` odd.
    OddMonomial { k: u32 },
    /// `a(x) = sign(x₁) |x₁|^alpha`.
    SignedPower { alpha: f64 },
    /// `a(x) = |x₁|^alpha`.
    MagnitudePower { alpha: f64 },
    /// One value per spatial node of the target grid (row-major).
    Tabulated { values: Vec<f64> },
}

/// Declared structural properties, audited by [`WeightSpec::audit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct WeightFlags {
    /// Nondecreasing along `x₁` — globally, or on `x₁ > 0` when combined
    /// with `even_in_x1` or `radial`.
    pub increasing_in_x1: bool,
    /// `a(-x₁, x') = a(x₁, x')`.
    pub even_in_x1: bool,
    /// Function of `|x|` only.
    pub radial: bool,
    /// Metadata only, never asserted: records a declared far-field
    /// smallness condition on the negative `x₁` axis.
    pub nonpositive_far_left: bool,
}

/// A weight with its declared structure and growth envelope
/// `|a(x)| ≤ bound_c · (1 + |x₁|^growth_alpha)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    #[serde(flatten)]
    pub form: WeightForm,
    #[serde(default)]
    pub flags: WeightFlags,
    #[serde(default = "one")]
    pub bound_c: f64,
    #[serde(default)]
    pub growth_alpha: f64,
}

fn one() -> f64 {
    1.0
}

impl WeightSpec {
    /// `a(x) = x₁^k` with canonical flags (`k` odd ⇒ increasing, odd).
    pub fn odd_monomial(k: u32) -> Result<Self> {
        let spec = WeightSpec {
            form: WeightForm::OddMonomial { k },
            flags: WeightFlags {
                increasing_in_x1: true,
                ..Default::default()
            },
            bound_c: 1.0,
            growth_alpha: k as f64,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `a(x) = sign(x₁)|x₁|^alpha` with canonical flags.
    pub fn signed_power(alpha: f64) -> Result<Self> {
        let spec = WeightSpec {
            form: WeightForm::SignedPower { alpha },
            flags: WeightFlags {
                increasing_in_x1: true,
                ..Default::default()
            },
            bound_c: 1.0,
            growth_alpha: alpha,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `a(x) = |x₁|^alpha`: even, increasing on `x₁ > 0`.
    pub fn magnitude_power(alpha: f64) -> Result<Self> {
        let spec = WeightSpec {
            form: WeightForm::MagnitudePower { alpha },
            flags: WeightFlags {
                increasing_in_x1: true,
                even_in_x1: true,
                ..Default::default()
            },
            bound_c: 1.0,
            growth_alpha: alpha,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Constant weight `a ≡ c` (a zero-power magnitude form scaled by `c`
    /// would lose the sign; tabulated form is exact and auditable).
    pub fn constant(grid: &GridSpec, c: f64) -> Result<Self> {
        let spec = WeightSpec {
            form: WeightForm::Tabulated {
                values: vec![c; grid.spatial_len()],
            },
            flags: WeightFlags {
                increasing_in_x1: true,
                even_in_x1: true,
                ..Default::default()
            },
            bound_c: c.abs().max(1.0),
            growth_alpha: 0.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Structural validation (exponent domains, flag compatibility).
    pub fn validate(&self) -> Result<()> {
        match &self.form {
            WeightForm::OddMonomial { k } => {
                if k % 2 == 0 {
                    return Err(Error::param(format!("odd-monomial degree {k} is even")));
                }
            }
            WeightForm::SignedPower { alpha } | WeightForm::MagnitudePower { alpha } => {
                if !alpha.is_finite() || *alpha < 0.0 {
                    return Err(Error::param(format!("weight exponent {alpha} must be ≥ 0")));
                }
            }
            WeightForm::Tabulated { values } => {
                if values.is_empty() {
                    return Err(Error::param("tabulated weight has no values".into()));
                }
                if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteSample {
                        index: bad,
                        value: values[bad],
                    });
                }
            }
        }
        if self.flags.even_in_x1 && self.flags.radial {
            return Err(Error::param(
                "flags even_in_x1 and radial are mutually exclusive".into(),
            ));
        }
        if !(self.bound_c.is_finite() && self.bound_c > 0.0) {
            return Err(Error::param(format!("bound_c = {} must be positive", self.bound_c)));
        }
        if !self.growth_alpha.is_finite() || self.growth_alpha < 0.0 {
            return Err(Error::param(format!(
                "growth_alpha = {} must be ≥ 0",
                self.growth_alpha
            )));
        }
        Ok(())
    }

    /// Evaluate a closed-form weight at a point. Tabulated weights are only
    /// defined on grid nodes; use [`WeightSpec::sample`].
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let x1 = x[0];
        match &self.form {
            WeightForm::OddMonomial { k } => Ok(x1.powi(*k as i32)),
            WeightForm::SignedPower { alpha } => Ok(x1.signum() * x1.abs().powf(*alpha)),
            WeightForm::MagnitudePower { alpha } => Ok(x1.abs().powf(*alpha)),
            WeightForm::Tabulated { .. } => Err(Error::param(
                "tabulated weight has no off-grid evaluation; sample it on its grid".into(),
            )),
        }
    }

    /// One value per spatial node of `grid` (row-major).
    pub fn sample(&self, grid: &GridSpec) -> Result<Vec<f64>> {
        if let WeightForm::Tabulated { values } = &self.form {
            if values.len() != grid.spatial_len() {
                return Err(Error::ShapeMismatch(format!(
                    "tabulated weight has {} values, grid has {} nodes",
                    values.len(),
                    grid.spatial_len()
                )));
            }
            return Ok(values.clone());
        }
        let mut out = Vec::with_capacity(grid.spatial_len());
        let mut coords = vec![0.0; grid.n];
        for j in 0..grid.spatial_len() {
            let idx = grid.unflatten(j);
            for (ax, &ji) in idx.iter().enumerate() {
                coords[ax] = grid.axis_coord(ji);
            }
            out.push(self.eval(&coords)?);
        }
        Ok(out)
    }

    /// Check every declared flag and the growth bound against the sampled
    /// grid. Returns the first violation as an error.
    pub fn audit(&self, grid: &GridSpec) -> Result<()> {
        let values = self.sample(grid)?;
        let nx = grid.nx;
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let tol = 1e-12 * scale;
        let lines = grid.spatial_len() / nx;
        // x₁ is axis 0 (slowest): stride between consecutive x₁ nodes is
        // the size of one x'-hyperplane.
        let stride = grid.spatial_len() / nx;
        let at = |j1: usize, line: usize| values[j1 * stride + line];

        if self.flags.increasing_in_x1 {
            let on_positive_only = self.flags.even_in_x1 || self.flags.radial;
            let start = if on_positive_only { nx / 2 } else { 0 };
            for line in 0..lines {
                for j1 in start..nx - 1 {
                    if at(j1 + 1, line) < at(j1, line) - tol {
                        return Err(Error::param(format!(
                            "weight not increasing along x₁ at node {j1}→{} (line {line})",
                            j1 + 1
                        )));
                    }
                }
            }
        }
        if self.flags.even_in_x1 {
            for line in 0..lines {
                for j1 in 0..nx {
                    let mirror = (nx - j1) % nx;
                    if (at(j1, line) - at(mirror, line)).abs() > tol {
                        return Err(Error::param(format!(
                            "weight not even in x₁ at node {j1} (line {line})"
                        )));
                    }
                }
            }
        }
        if self.flags.radial {
            // Nodes in the same half-mesh shell must agree.
            use std::collections::HashMap;
            let mut shells: HashMap<i64, (usize, f64)> = HashMap::new();
            let h = grid.h();
            for (j, &v) in values.iter().enumerate() {
                let idx = grid.unflatten(j);
                let r = idx
                    .iter()
                    .map(|&ji| grid.axis_coord(ji).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let key = (2.0 * r / h).round() as i64;
                match shells.get(&key) {
                    None => {
                        shells.insert(key, (j, v));
                    }
                    Some(&(j0, v0)) => {
                        if (v - v0).abs() > tol {
                            return Err(Error::param(format!(
                                "weight not radial: nodes {j0} and {j} in shell {key} differ"
                            )));
                        }
                    }
                }
            }
        }
        // Growth envelope |a| ≤ bound_c (1 + |x₁|^alpha).
        for (j, &v) in values.iter().enumerate() {
            let idx = grid.unflatten(j);
            let x1 = grid.axis_coord(idx[0]).abs();
            let cap = self.bound_c * (1.0 + x1.powf(self.growth_alpha));
            if v.abs() > cap * (1.0 + 1e-12) {
                return Err(Error::param(format!(
                    "weight value {v} at node {j} violates declared bound {cap}"
                )));
            }
        }
        Ok(())
    }
}
