//! Nonlinearities `f(u)` for the reaction term `a(x) f(u)`.
//!
//! The power form uses the odd extension `f(u) = |u|^{r-1} u`, which is
//! nondecreasing with `f(0) = 0` and, for `r > 1`, `f'(0) = 0`. Tabulated
//! nonlinearities are piecewise-linear interpolants with a pinned zero at
//! the origin; they are only defined on their tabulated interval.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Finite-difference step for derivative queries on tabulated forms.
const FD_STEP: f64 = 1e-6;

/// Functional form of the nonlinearity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum NonlinForm {
    /// `f(u) = |u|^{r-1} u` with `r ≥ 1`.
    Power { r: f64 },
    /// Piecewise-linear `(u_i, f_i)` with strictly increasing `u_i`.
    Tabulated { us: Vec<f64>, fs: Vec<f64> },
}

/// A nonlinearity with structural metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearitySpec {
    #[serde(flatten)]
    pub form: NonlinForm,
}

impl NonlinearitySpec {
    /// `f(u) = |u|^{r-1} u`.
    pub fn power(r: f64) -> Result<Self> {
        let spec = NonlinearitySpec {
            form: NonlinForm::Power { r },
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Piecewise-linear nonlinearity through the given points.
    pub fn tabulated(us: Vec<f64>, fs: Vec<f64>) -> Result<Self> {
        let spec = NonlinearitySpec {
            form: NonlinForm::Tabulated { us, fs },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.form {
            NonlinForm::Power { r } => {
                if !r.is_finite() || *r < 1.0 {
                    return Err(Error::param(format!("power exponent r = {r} must be ≥ 1")));
                }
            }
            NonlinForm::Tabulated { us, fs } => {
                if us.len() != fs.len() || us.len() < 2 {
                    return Err(Error::param(
                        "tabulated nonlinearity needs ≥ 2 matched points".into(),
                    ));
                }
                for w in us.windows(2) {
                    if !(w[1] > w[0]) {
                        return Err(Error::param("tabulated abscissae must strictly increase".into()));
                    }
                }
                if us[0] > 0.0 || *us.last().unwrap() < 0.0 {
                    return Err(Error::param(
                        "tabulated interval must contain u = 0 to pin f(0) = 0".into(),
                    ));
                }
                for (&u, &f) in us.iter().zip(fs) {
                    if !u.is_finite() || !f.is_finite() {
                        return Err(Error::param("tabulated nonlinearity has non-finite entries".into()));
                    }
                }
                for w in fs.windows(2) {
                    if w[1] < w[0] {
                        return Err(Error::param("tabulated nonlinearity must be nondecreasing".into()));
                    }
                }
                // Interpolated value at 0 must vanish.
                let spec = NonlinearitySpec { form: self.form.clone() };
                let f0 = spec.eval_unchecked(0.0);
                let scale = fs.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
                if f0.abs() > 1e-12 * scale {
                    return Err(Error::param(format!("tabulated f(0) = {f0} is not zero")));
                }
            }
        }
        Ok(())
    }

    /// Whether `f'(0) = 0` (superlinear at the origin).
    pub fn flat_at_origin(&self) -> bool {
        match &self.form {
            NonlinForm::Power { r } => *r > 1.0,
            NonlinForm::Tabulated { .. } => self.derivative(0.0).map(|d| d == 0.0).unwrap_or(false),
        }
    }

    /// Declared domain: `ℝ` for powers, the tabulated interval otherwise.
    pub fn domain(&self) -> (f64, f64) {
        match &self.form {
            NonlinForm::Power { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            NonlinForm::Tabulated { us, .. } => (us[0], *us.last().unwrap()),
        }
    }

    fn check_domain(&self, u: f64) -> Result<()> {
        let (lo, hi) = self.domain();
        if u < lo || u > hi {
            return Err(Error::OutsideLipschitzDomain { value: u, lo, hi });
        }
        Ok(())
    }

    fn eval_unchecked(&self, u: f64) -> f64 {
        match &self.form {
            NonlinForm::Power { r } => u.abs().powf(r - 1.0) * u,
            NonlinForm::Tabulated { us, fs } => {
                // Clamp to the end segments (callers have already domain-checked).
                let k = match us.binary_search_by(|v| v.partial_cmp(&u).unwrap()) {
                    Ok(i) => return fs[i],
                    Err(0) => 0,
                    Err(i) if i >= us.len() => us.len() - 2,
                    Err(i) => i - 1,
                };
                let w = (u - us[k]) / (us[k + 1] - us[k]);
                fs[k] + w * (fs[k + 1] - fs[k])
            }
        }
    }

    /// Evaluate `f(u)`, rejecting queries outside the declared domain.
    pub fn eval(&self, u: f64) -> Result<f64> {
        self.check_domain(u)?;
        Ok(self.eval_unchecked(u))
    }

    /// Derivative `f'(u)`: closed form for powers, centred finite
    /// difference (step `1e-6`) for tabulated forms.
    pub fn derivative(&self, u: f64) -> Result<f64> {
        self.check_domain(u)?;
        match &self.form {
            NonlinForm::Power { r } => Ok(r * u.abs().powf(r - 1.0)),
            NonlinForm::Tabulated { us, .. } => {
                let lo = us[0];
                let hi = *us.last().unwrap();
                let a = (u - FD_STEP).max(lo);
                let b = (u + FD_STEP).min(hi);
                if b <= a {
                    return Err(Error::param("tabulated interval too small for derivative".into()));
                }
                Ok((self.eval_unchecked(b) - self.eval_unchecked(a)) / (b - a))
            }
        }
    }

    /// Local Lipschitz constant of `f` on `[lo, hi]` (finite for every
    /// compact interval inside the domain).
    pub fn lipschitz(&self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo <= hi) {
            return Err(Error::param(format!("empty interval [{lo}, {hi}]")));
        }
        self.check_domain(lo)?;
        self.check_domain(hi)?;
        match &self.form {
            NonlinForm::Power { r } => Ok(r * lo.abs().max(hi.abs()).powf(r - 1.0)),
            NonlinForm::Tabulated { us, fs } => {
                let mut max_slope = 0.0f64;
                for k in 0..us.len() - 1 {
                    if us[k + 1] < lo || us[k] > hi {
                        continue;
                    }
                    max_slope = max_slope.max((fs[k + 1] - fs[k]).abs() / (us[k + 1] - us[k]));
                }
                Ok(max_slope)
            }
        }
    }
}
