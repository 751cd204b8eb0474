//! Criticality classification and the quantitative probes attached to it:
//! the threshold exponent, the first eigenvalue of the fractional Dirichlet
//! problem on the unit ball, a supersolution barrier check, rescaled
//! test-function diagnostics, and an energy-concavity blow-up monitor.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::fft;
use crate::field::{Field, FieldKind};
use crate::grid::GridSpec;
use crate::nonlin::NonlinearitySpec;
use crate::operator::{
    apply_quadrature, cns_closed_form, frac_laplacian_slice, marchaud_apply, HistoryPolicy,
    OperatorParams,
};
use crate::solver::{decay_exponent, picard_solve, SolveOutcome, SolveParams, Trajectory};
use crate::special::{gamma, quintic_step, reg_lower_gamma, reg_upper_gamma};
use crate::weight::WeightSpec;
use crate::{Error, Result};

/// Threshold exponent for `(∂t − Δ)^s u ≥ |x₁|^α u^r`-type problems:
/// `r* = min( 1 + 4s²/n , (n + 2 + 2s − 2α) / (n + 2 − 2s) )`.
pub fn r_star(n: usize, s: f64, alpha: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::param(format!("s = {s} outside (0, 1)")));
    }
    if !(1..=3).contains(&n) {
        return Err(Error::InvalidGrid(format!("dimension n = {n} not in 1..=3")));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::param(format!("alpha = {alpha} must be ≥ 0")));
    }
    let nf = n as f64;
    let first = 1.0 + 4.0 * s * s / nf;
    // Writing the numerator n + 2 + 2s − 2α as den + 2(2s − α) makes the
    // degenerate weight growth α = 2s collapse the quotient to exactly 1.
    let den = nf + 2.0 - 2.0 * s;
    let second = (den + 2.0 * (2.0 * s - alpha)) / den;
    Ok(first.min(second))
}

/// Position of an exponent relative to the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticalityClass {
    Subcritical,
    Critical,
    Supercritical,
}

/// Classify `r` against `r*(n, s, α)`. Ties within `1e-12` relative count
/// as critical, so exponents computed from the same rationals land exactly.
pub fn classify(n: usize, s: f64, alpha: f64, r: f64) -> Result<CriticalityClass> {
    if !(r >= 1.0 && r.is_finite()) {
        return Err(Error::param(format!("exponent r = {r} must be ≥ 1")));
    }
    let rs = r_star(n, s, alpha)?;
    let tol = 1e-12 * rs.max(1.0);
    Ok(if (r - rs).abs() <= tol {
        CriticalityClass::Critical
    } else if r < rs {
        CriticalityClass::Subcritical
    } else {
        CriticalityClass::Supercritical
    })
}

/// Self-similar rescaling rate `β = n (1 − 1/r) / (4s)` associated with an
/// exponent `r`.
pub fn scaling_beta(n: usize, s: f64, r: f64) -> f64 {
    n as f64 * (1.0 - 1.0 / r) / (4.0 * s)
}

// ---------------------------------------------------------------------------
// First eigenvalue of the zero-extension fractional Laplacian on the ball.
// ---------------------------------------------------------------------------

/// Outcome of the inverse-iteration eigenvalue solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenReport {
    /// First eigenvalue of `(−Δ)^s` with exterior condition `u = 0` outside
    /// the unit ball (zero-extension / restricted form on the box).
    pub lambda1: f64,
    /// Relative Rayleigh residual `‖Av − λv‖ / (λ‖v‖)`.
    pub residual: f64,
    /// Inverse-iteration steps used.
    pub iterations: usize,
    pub nx: usize,
    pub l: f64,
}

/// Acceptable relative Rayleigh residual.
pub const EIGEN_RESIDUAL_LIMIT: f64 = 1e-6;

/// Compute the first eigenvalue of the zero-extension `(−Δ)^s` on the unit
/// ball, embedded in the periodic box `[−l, l)^n`, by inverse iteration with
/// conjugate-gradient solves. `s ∈ (0, 1]`; `s = 1` reproduces the classical
/// Dirichlet problem (the form is local there, so the box size drops out).
pub fn eigen_ball(n: usize, s: f64, nx: usize, l: f64) -> Result<EigenReport> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::param(format!("s = {s} outside (0, 1]")));
    }
    if l <= 1.0 {
        return Err(Error::InvalidGrid(format!(
            "box half-width {l} must exceed the unit ball"
        )));
    }
    let grid = GridSpec::new(n, l, nx, 1.0, 2)?;
    let spatial = grid.spatial_len();

    // Interior nodes |x| < 1 (strictly; boundary nodes carry the exterior
    // condition).
    let mut interior = Vec::new();
    for j in 0..spatial {
        let r2: f64 = grid
            .unflatten(j)
            .iter()
            .map(|&ji| {
                let x = grid.axis_coord(ji);
                x * x
            })
            .sum();
        if r2 < 1.0 {
            interior.push(j);
        }
    }
    if interior.len() < 8 {
        return Err(Error::InvalidGrid(
            "grid too coarse: fewer than 8 nodes inside the ball".into(),
        ));
    }

    // A v = restrict ∘ |ξ|^{2s} ∘ zero-extend.
    let apply = |v: &[f64]| -> Vec<f64> {
        let mut full = vec![Complex64::ZERO; spatial];
        for (i, &j) in interior.iter().enumerate() {
            full[j] = Complex64::new(v[i], 0.0);
        }
        frac_laplacian_slice(&grid, &mut full, s);
        interior.iter().map(|&j| full[j].re).collect()
    };
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };

    // Plain conjugate gradients (A is symmetric positive definite on the
    // interior subspace).
    let cg_solve = |b: &[f64]| -> Vec<f64> {
        let m = b.len();
        let mut x = vec![0.0; m];
        let mut r = b.to_vec();
        let mut p = r.clone();
        let mut rs = dot(&r, &r);
        let b_norm = rs.sqrt().max(1e-300);
        for _ in 0..4000 {
            let ap = apply(&p);
            let alpha = rs / dot(&p, &ap).max(1e-300);
            for i in 0..m {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let rs_new = dot(&r, &r);
            if rs_new.sqrt() <= 1e-12 * b_norm {
                break;
            }
            let beta = rs_new / rs;
            rs = rs_new;
            for i in 0..m {
                p[i] = r[i] + beta * p[i];
            }
        }
        x
    };

    // Start from a positive bump; inverse iteration converges to the ground
    // state, which has a sign.
    let mut v: Vec<f64> = interior
        .iter()
        .map(|&j| {
            let r2: f64 = grid
                .unflatten(j)
                .iter()
                .map(|&ji| {
                    let x = grid.axis_coord(ji);
                    x * x
                })
                .sum();
            (1.0 - r2).max(0.0)
        })
        .collect();
    let norm0 = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm0);

    let mut lambda = 0.0;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    for it in 1..=60 {
        iterations = it;
        let w = cg_solve(&v);
        let wn = dot(&w, &w).sqrt().max(1e-300);
        let vn: Vec<f64> = w.iter().map(|x| x / wn).collect();
        let av = apply(&vn);
        lambda = dot(&vn, &av);
        let mut res2 = 0.0;
        for i in 0..vn.len() {
            let d = av[i] - lambda * vn[i];
            res2 += d * d;
        }
        residual = res2.sqrt() / lambda.abs().max(1e-300);
        v = vn;
        if residual <= EIGEN_RESIDUAL_LIMIT {
            break;
        }
    }
    if residual > EIGEN_RESIDUAL_LIMIT {
        return Err(Error::EigenNoConvergence {
            residual,
            iterations,
        });
    }
    Ok(EigenReport {
        lambda1: lambda,
        residual,
        iterations,
        nx,
        l,
    })
}

// ---------------------------------------------------------------------------
// Supersolution barrier probe.
// ---------------------------------------------------------------------------

/// Result of the barrier inequality chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BarrierReport {
    pub s: f64,
    /// Slow time exponent `β = 1/(2k+1)`.
    pub beta: f64,
    /// Closed-form fractional derivative constant `Γ(β+1)/Γ(β+1−s)` scaled
    /// by the probe window's `t^{β−s}` supremum.
    pub c_s_sup: f64,
    /// Relative mismatch between the product-integration derivative of
    /// `t^β − 1` and its closed form (sampled over the probe window).
    pub marchaud_rel_err: f64,
    /// Largest spatial symbol of the barrier's profile, to the power `s`.
    pub lambda_top: f64,
    /// Combined supersolution bound `λ_top (T^β − 1) + c_s_sup`.
    pub c_t: f64,
    /// Worst ratio of the measured operator value to its separated bound
    /// (≤ 1 within budget when the chain holds).
    pub worst_bound_ratio: f64,
    pub bound_holds: bool,
    /// `|A · max φ · (T^β − 1) − M| / M` for the peak normalisation `A`.
    pub normalization_err: f64,
    pub passed: bool,
}

/// Verify the barrier inequality chain for `v(x, t) = A φ(x)(t^β − 1)` with
/// frozen past `v(·, t ≤ 0) = −A φ`:
///
/// * `β = 1/(2k+1)` must stay below `s` (otherwise the slow-time bound
///   fails and the probe refuses to run);
/// * the fractional time derivative of `t^β − 1` matches its closed form;
/// * the measured operator value stays below the separated bound
///   `A φ(x) [λ_top max(η, 0) + C_s(t)]`, which holds because the profile
///   `φ(x) = Π (1 + cos(π x_i / L))/2` is a positive combination of
///   cosines and `η` is increasing;
/// * scaling `A` so the barrier's terminal peak equals `m_peak` is exact.
pub fn barrier_probe(s: f64, k: u32, t_horizon: f64, m_peak: f64) -> Result<BarrierReport> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::param(format!("s = {s} outside (0, 1)")));
    }
    let beta = 1.0 / (2.0 * k as f64 + 1.0);
    if beta >= s {
        return Err(Error::BarrierExponent {
            beta,
            reason: format!("β = 1/(2k+1) = {beta} must stay below s = {s}"),
        });
    }
    if !(t_horizon > 1.0) {
        return Err(Error::param(format!(
            "horizon T = {t_horizon} must exceed 1 so the barrier peak is positive"
        )));
    }
    if !(m_peak > 0.0) {
        return Err(Error::param("peak level must be positive".into()));
    }

    let grid = GridSpec::new(1, 4.0, 64, t_horizon, 64)?;
    let l = grid.l;
    let eta = |t: f64| t.powf(beta) - 1.0;
    let amp = m_peak / (eta(t_horizon)).max(1e-300);
    let profile = |x: f64| 0.5 * (1.0 + (std::f64::consts::PI * x / l).cos());
    let v = Field::sample_real(&grid, |x, t| amp * profile(x[0]) * eta(t))?;

    // Closed-form fractional derivative of the time factor and its
    // product-integration check on a fine series.
    let c_closed = |t: f64| gamma(beta + 1.0) / gamma(beta + 1.0 - s) * t.powf(beta - s);
    let fine = 2048usize;
    let fine_dt = t_horizon / fine as f64;
    let series: Vec<f64> = (0..=fine).map(|m| eta(m as f64 * fine_dt)).collect();
    let mut marchaud_rel_err: f64 = 0.0;
    for frac in [0.5, 0.75, 1.0] {
        let m = ((fine as f64) * frac) as usize;
        let t = m as f64 * fine_dt;
        let got = marchaud_apply(&series, fine_dt, m, s, HistoryPolicy::ConstantPast)?;
        marchaud_rel_err = marchaud_rel_err.max((got - c_closed(t)).abs() / c_closed(t).abs());
    }

    // Probe the full operator against the separated bound on the late
    // window, away from both the t^β kink at zero and the profile's zeros.
    let lambda_top = (std::f64::consts::PI / l).powi(2).powf(s);
    let params = OperatorParams::new(s, cns_closed_form(1, s))?;
    let c_s_sup = c_closed(0.5 * t_horizon);
    let mut worst_ratio: f64 = 0.0;
    for &frac in &[0.5f64, 0.75, 1.0] {
        let m = ((grid.mt as f64) * frac) as usize;
        let t = grid.time_coord(m);
        for &j in &[grid.nx / 2, grid.nx / 2 + 3, grid.nx / 2 - 5] {
            let x = grid.axis_coord(j);
            if x.abs() > 0.45 * l {
                continue;
            }
            let qv = apply_quadrature(&v, &[j], m, &params, HistoryPolicy::ConstantPast)?;
            let bound = amp
                * profile(x)
                * (lambda_top * eta(t).max(0.0) + c_closed(t))
                + qv.near_residual
                + qv.tail_bound
                + 1e-9 * amp;
            worst_ratio = worst_ratio.max(qv.value / bound);
        }
    }
    let bound_holds = worst_ratio <= 1.0;

    // Normalisation identity: the barrier's terminal peak is m_peak exactly
    // (max φ = 1 at the origin).
    let normalization_err = (amp * 1.0 * eta(t_horizon) - m_peak).abs() / m_peak;

    let c_t = lambda_top * eta(t_horizon) + c_s_sup;
    let passed =
        bound_holds && marchaud_rel_err <= 2e-2 && normalization_err <= 1e-12;
    Ok(BarrierReport {
        s,
        beta,
        c_s_sup,
        marchaud_rel_err,
        lambda_top,
        c_t,
        worst_bound_ratio: worst_ratio,
        bound_holds,
        normalization_err,
        passed,
    })
}

// ---------------------------------------------------------------------------
// Rescaled test functions and the pairing identity.
// ---------------------------------------------------------------------------

/// Smooth rescaled test function `φ_R(x, t) = ψ(|x|/R) η(t/R^{2s})`:
/// `ψ` is 1 inside radius `R/2` and falls to 0 at `R`; `η` ramps up on the
/// first quarter of the scaled window, holds 1 to the half, and falls to 0
/// at 1. `η(0) = 0` with two vanishing derivatives, so the function is
/// compatible with an empty past.
pub fn test_function(grid: &GridSpec, r: f64, s: f64) -> Result<Field> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::param(format!("s = {s} outside (0, 1)")));
    }
    if !(r > 0.0 && r <= 0.9 * grid.l) {
        return Err(Error::OutsideDomain(format!(
            "radius {r} must fit inside the box (≤ {})",
            0.9 * grid.l
        )));
    }
    let t_support = r.powf(2.0 * s);
    if t_support > grid.t * (1.0 + 1e-12) {
        return Err(Error::OutsideDomain(format!(
            "time support R^{{2s}} = {t_support} exceeds the window T = {}",
            grid.t
        )));
    }
    Field::sample_real(grid, |x, t| {
        let q = x.iter().map(|v| v * v).sum::<f64>().sqrt() / r;
        let psi = if q <= 0.5 {
            1.0
        } else {
            1.0 - quintic_step(2.0 * q - 1.0)
        };
        psi * time_profile(t / t_support)
    })
}

fn time_profile(theta: f64) -> f64 {
    if theta <= 0.0 {
        0.0
    } else if theta < 0.25 {
        quintic_step(4.0 * theta)
    } else if theta <= 0.5 {
        1.0
    } else {
        1.0 - quintic_step(2.0 * (theta - 0.5))
    }
}

/// Exact time mass of the scaled profile: `∫ η(t/R^{2s}) dt = (5/8) R^{2s}`.
pub fn test_function_time_mass(r: f64, s: f64) -> f64 {
    0.625 * r.powf(2.0 * s)
}

/// One radius of the rescaling diagnostic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RescaleRow {
    pub r: f64,
    /// Forcing pairing `∫∫ a f(u) φ_R / N_R`.
    pub lhs: f64,
    /// Adjoint pairing `[∫∫ u · (adjoint op) φ_R + frozen-past term] / N_R`.
    pub rhs: f64,
    /// Literal forward pairing `∫∫ u · (op φ_R) / N_R` (reported for
    /// comparison; the adjoint pairing is the one the identity controls).
    pub forward_pairing: f64,
    /// Frozen-past contribution to `rhs` (before normalisation it is
    /// `∫_{τ<0} ⟨u₀, (adjoint op) φ_R⟩ dτ`).
    pub past_term: f64,
    /// `|rhs − lhs|` relative to the larger of the two (or the error
    /// budget when both nearly vanish).
    pub identity_rel_err: f64,
    /// Accumulated quadrature error proxy per unit `N_R`.
    pub quad_budget: f64,
}

/// Rescaling diagnostic across radii.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RescalingReport {
    pub rows: Vec<RescaleRow>,
    /// Log-log slope of the forcing pairing against `R`.
    pub slope_lhs: Option<f64>,
    /// Log-log slope of the adjoint pairing against `R`.
    pub slope_rhs: Option<f64>,
    pub max_identity_err: f64,
}

/// Pair a trajectory against rescaled test functions.
///
/// For each radius the diagnostic computes the forcing pairing
/// `∫∫ a f(u) φ_R`, the adjoint pairing `∫∫ u · Op*φ_R` plus the
/// frozen-past term `∫_{τ<0} ⟨u₀, Op*φ_R⟩` (evaluated spectrally), and the
/// literal forward pairing. For a trajectory that solves the equation the
/// first two agree up to quadrature error; both are normalised per unit
/// time mass `N_R = (5/8) R^{2s}` so that a spatial envelope `|x₁|^α` makes
/// the pairings scale like `R^{n+α}`.
pub fn rescaling_diagnostic(
    field: &Field,
    u0: &[f64],
    weight: &WeightSpec,
    nonlin: &NonlinearitySpec,
    params: &OperatorParams,
    radii: &[f64],
) -> Result<RescalingReport> {
    params.validate()?;
    let grid = field.grid();
    if field.kind() != FieldKind::Real {
        return Err(Error::param("the pairing diagnostic needs a real field".into()));
    }
    if u0.len() != grid.spatial_len() {
        return Err(Error::ShapeMismatch(format!(
            "initial slice has {} samples, grid has {}",
            u0.len(),
            grid.spatial_len()
        )));
    }
    if radii.is_empty() {
        return Err(Error::param("need at least one radius".into()));
    }
    let w = weight.sample(grid)?;
    let s = params.s;
    let spatial = grid.spatial_len();
    let levels = grid.time_len();
    let dt = grid.dt();
    let cell = grid.h().powi(grid.n as i32);
    let trap = |m: usize| if m == 0 || m == grid.mt { 0.5 } else { 1.0 };

    let mut rows = Vec::with_capacity(radii.len());
    for &r in radii {
        let phi = test_function(grid, r, s)?;
        let n_r = test_function_time_mass(r, s);

        // Forcing pairing ∫∫ a f(u) φ.
        let mut lhs = 0.0;
        for m in 0..levels {
            let mut acc = 0.0;
            for j in 0..spatial {
                let p = phi.real_at(m, j);
                if p != 0.0 {
                    acc += w[j] * nonlin.eval(field.real_at(m, j))? * p;
                }
            }
            lhs += trap(m) * dt * cell * acc;
        }

        // Adjoint pairing ∫∫ u · Op*φ: the adjoint value at level m is the
        // forward evaluation of the time-reversed φ at level Mt − m, with
        // zero past (φ vanishes beyond its support).
        let phi_rev = phi.reverse_time();
        let mut adjoint = 0.0;
        let mut budget = 0.0;
        let mut forward = 0.0;
        for m in 0..levels {
            let mut acc = 0.0;
            let mut acc_fwd = 0.0;
            let mut acc_budget = 0.0;
            for j in 0..spatial {
                let idx = grid.unflatten(j);
                let star =
                    apply_quadrature(&phi_rev, &idx, grid.mt - m, params, HistoryPolicy::ZeroPast)?;
                let fwd = apply_quadrature(&phi, &idx, m, params, HistoryPolicy::ZeroPast)?;
                let uv = field.real_at(m, j);
                acc += uv * star.value;
                acc_fwd += uv * fwd.value;
                acc_budget += uv.abs() * (star.near_residual + star.tail_bound.min(star.value.abs().max(1e-12)));
            }
            adjoint += trap(m) * dt * cell * acc;
            forward += trap(m) * dt * cell * acc_fwd;
            budget += trap(m) * dt * cell * acc_budget;
        }

        let past = frozen_past_pairing(grid, u0, &phi, params)?;
        let rhs = adjoint + past;

        let scale = lhs.abs().max(rhs.abs());
        let denom = scale.max(budget).max(1e-12);
        let identity_rel_err = (rhs - lhs).abs() / denom;
        rows.push(RescaleRow {
            r,
            lhs: lhs / n_r,
            rhs: rhs / n_r,
            forward_pairing: forward / n_r,
            past_term: past / n_r,
            identity_rel_err,
            quad_budget: budget / n_r,
        });
    }

    let rs: Vec<f64> = rows.iter().map(|row| row.r).collect();
    let lhs_vals: Vec<f64> = rows.iter().map(|row| row.lhs).collect();
    let rhs_vals: Vec<f64> = rows.iter().map(|row| row.rhs).collect();
    let slope_lhs = decay_exponent(&rs, &lhs_vals);
    let slope_rhs = decay_exponent(&rs, &rhs_vals);
    let max_identity_err = rows.iter().map(|r| r.identity_rel_err).fold(0.0, f64::max);
    Ok(RescalingReport {
        rows,
        slope_lhs,
        slope_rhs,
        max_identity_err,
    })
}

/// `∫_{−∞}^0 ⟨u₀, Op*φ(·, τ)⟩ dτ`, the pairing of the frozen past with the
/// adjoint operator, evaluated spectrally:
///
/// ```text
/// −C (4π)^{n/2} ∫_0^T ⟨u₀, e^{δΔ} φ(·, σ)⟩ weighted by
///     E(a, σ) = ∫_σ^∞ δ^{−1−s} e^{−aδ} dδ  per mode a = |ξ|².
/// ```
///
/// The `σ → 0` panel is integrated analytically (`E ~ σ^{−s}/s` is
/// integrable but unbounded).
fn frozen_past_pairing(
    grid: &GridSpec,
    u0: &[f64],
    phi: &Field,
    params: &OperatorParams,
) -> Result<f64> {
    let s = params.s;
    let spatial = grid.spatial_len();
    let shape: Vec<usize> = std::iter::repeat(grid.nx).take(grid.n).collect();
    let mut u0_hat: Vec<Complex64> = u0.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft::forward(&mut u0_hat, &shape);
    let a: Vec<f64> = (0..spatial).map(|k| grid.xi_norm_sq(k)).collect();
    let dt = grid.dt();
    let cell = grid.h().powi(grid.n as i32);
    let norm = cell / spatial as f64; // Parseval factor for the discrete pairing

    // Mode-wise inner products ⟨û₀, φ̂(σ_m)⟩ per level.
    let mut inner = vec![vec![0.0f64; spatial]; grid.time_len()];
    let mut buf = vec![Complex64::ZERO; spatial];
    for m in 0..grid.time_len() {
        buf.copy_from_slice(phi.slice(m));
        fft::forward(&mut buf, &shape);
        for k in 0..spatial {
            inner[m][k] = (u0_hat[k] * buf[k].conj()).re * norm;
        }
    }

    // E(a, σ) = [σ^{−s} e^{−aσ} − a^s Γ(1−s) Q(1−s, aσ)] / s.
    let g1s = gamma(1.0 - s);
    let e_weight = |ak: f64, sigma: f64| -> f64 {
        if ak == 0.0 {
            sigma.powf(-s) / s
        } else {
            (sigma.powf(-s) * (-ak * sigma).exp()
                - ak.powf(s) * g1s * reg_upper_gamma(1.0 - s, ak * sigma))
                / s
        }
    };
    // ∫_0^X E(a, σ) dσ = a^{s−1} Γ(1−s) P(1−s, aX) + X E(a, X).
    let e_mass = |ak: f64, x: f64| -> f64 {
        if ak == 0.0 {
            x.powf(1.0 - s) / (s * (1.0 - s))
        } else {
            ak.powf(s - 1.0) * g1s * reg_lower_gamma(1.0 - s, ak * x) + x * e_weight(ak, x)
        }
    };

    let mut total = 0.0;
    for k in 0..spatial {
        // Analytic first panel with the mode's φ̂ averaged over [0, dt].
        let avg0 = 0.5 * (inner[0][k] + inner[1][k]);
        let mut acc = avg0 * e_mass(a[k], dt);
        // Composite trapezoid over [dt, T].
        for m in 1..grid.time_len() {
            let wgt = if m == 1 || m == grid.mt { 0.5 } else { 1.0 };
            acc += wgt * dt * inner[m][k] * e_weight(a[k], grid.time_coord(m));
        }
        total += acc;
    }
    let pref = params.cns * (4.0 * std::f64::consts::PI).powf(grid.n as f64 / 2.0);
    Ok(-pref * total)
}

// ---------------------------------------------------------------------------
// Energy-concavity blow-up monitor.
// ---------------------------------------------------------------------------

/// Concavity statistics of the cumulative energy `J(t) = ∫_0^t ½‖u‖² dτ`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlowupReport {
    /// `min J J'' / (J')² − 1` over the monitored window; a strictly
    /// positive margin means `J^{−ε}` is concave for `ε` up to the margin —
    /// the finite-time blow-up certificate.
    pub epsilon_margin: f64,
    /// First level of the monitored window (the initial transient and the
    /// window edges are excluded).
    pub window_start: usize,
    /// One past the last monitored level.
    pub window_end: usize,
    pub samples: usize,
    pub blowup_indicated: bool,
}

/// One interior level of the energy-concavity series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlowupSample {
    pub level: usize,
    pub t: f64,
    /// Cumulative energy `J(t) = ∫_0^t ½‖u‖² dτ` (trapezoid).
    pub j: f64,
    /// `J' = ½‖u‖²`.
    pub j_prime: f64,
    /// Centred second difference of `J`.
    pub j_second: f64,
    /// `J J''/(J')² − 1` where `J` and `J'` are both positive.
    pub margin: Option<f64>,
}

/// Per-level concavity series for a norm history: `J` by cumulative
/// trapezoid, `J''` by centred differences (so the first and last levels
/// carry no sample). Levels at or beyond `valid_levels` (e.g. past an
/// escape) are ignored.
pub fn blowup_series(
    dt: f64,
    l2_norms: &[f64],
    valid_levels: Option<usize>,
) -> Result<Vec<BlowupSample>> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::param(format!("dt = {dt} must be positive")));
    }
    let n = valid_levels.unwrap_or(l2_norms.len()).min(l2_norms.len());
    if n < 3 {
        return Err(Error::InsufficientHistory(format!(
            "need at least 3 usable levels, have {n}"
        )));
    }
    if let Some(bad) = l2_norms[..n].iter().find(|v| !v.is_finite()) {
        return Err(Error::param(format!("non-finite norm sample {bad}")));
    }
    let jp: Vec<f64> = l2_norms[..n].iter().map(|v| 0.5 * v * v).collect();
    let mut j = vec![0.0; n];
    for m in 1..n {
        j[m] = j[m - 1] + 0.5 * dt * (jp[m - 1] + jp[m]);
    }
    Ok((1..n - 1)
        .map(|m| {
            let jpp = (jp[m + 1] - jp[m - 1]) / (2.0 * dt);
            let margin = if jp[m] > 0.0 && j[m] > 0.0 {
                Some(j[m] * jpp / (jp[m] * jp[m]) - 1.0)
            } else {
                None
            };
            BlowupSample {
                level: m,
                t: m as f64 * dt,
                j: j[m],
                j_prime: jp[m],
                j_second: jpp,
                margin,
            }
        })
        .collect())
}

/// Evaluate the concavity margin on a norm history. `l2_norms` holds
/// `‖u(·, t_m)‖₂` per level; levels at or beyond `valid_levels` (e.g. past
/// an escape) are ignored.
pub fn blowup_monitor(
    dt: f64,
    l2_norms: &[f64],
    valid_levels: Option<usize>,
) -> Result<BlowupReport> {
    let n = valid_levels.unwrap_or(l2_norms.len()).min(l2_norms.len());
    if n < 8 {
        return Err(Error::InsufficientHistory(format!(
            "need at least 8 usable levels, have {n}"
        )));
    }
    let series = blowup_series(dt, l2_norms, Some(n))?;
    // Monitor the trailing eighth of the usable window (at least four
    // samples). J(0) = 0 forces the concavity ratio through 1 from below,
    // so early levels are uninformative even for genuinely blowing-up
    // histories; what certifies blow-up is the margin staying positive as
    // the window closes on the escape.
    let tail = (n / 8).max(4);
    let end = n - 1;
    let start = end.saturating_sub(tail).max(2);
    if end <= start {
        return Err(Error::InsufficientHistory(
            "window too short after excluding the transient".into(),
        ));
    }
    let mut margin = f64::INFINITY;
    let mut samples = 0;
    for row in &series {
        if row.level >= start && row.level < end {
            if let Some(m) = row.margin {
                margin = margin.min(m);
                samples += 1;
            }
        }
    }
    if samples == 0 {
        return Err(Error::InsufficientHistory(
            "no levels with positive energy in the window".into(),
        ));
    }
    Ok(BlowupReport {
        epsilon_margin: margin,
        window_start: start,
        window_end: end,
        samples,
        blowup_indicated: margin > 0.0,
    })
}

// ---------------------------------------------------------------------------
// Classification-consistency probe.
// ---------------------------------------------------------------------------

/// Observed behaviour of a solve, set against its criticality class.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NonexistenceReport {
    pub r: f64,
    pub r_star: f64,
    pub class: CriticalityClass,
    /// Fitted exponent of the sup-norm history (negative = decay).
    pub growth_exponent: Option<f64>,
    pub escaped: bool,
    pub escape_time: Option<f64>,
    /// Final-to-initial sup ratio over the usable window.
    pub amplification: f64,
    /// Whether the observed behaviour is the one the classification
    /// predicts for this data regime (decay for small subcritical data,
    /// escape for large supercritical data).
    pub consistent: bool,
}

/// Solve and compare the outcome against the classification. `expect_decay`
/// states the regime the caller prepared (small data expecting decay, or
/// large supercritical data expecting escape).
pub fn nonexistence_probe(
    grid: &GridSpec,
    u0: &[f64],
    weight: &WeightSpec,
    nonlin: &NonlinearitySpec,
    solve: &SolveParams,
    alpha: f64,
    r: f64,
    expect_decay: bool,
) -> Result<NonexistenceReport> {
    let rs = r_star(grid.n, solve.s, alpha)?;
    let class = classify(grid.n, solve.s, alpha, r)?;
    let traj: Trajectory = picard_solve(grid, u0, weight, nonlin, solve)?;
    let n_use = traj.escape_level.unwrap_or(traj.sup_norms.len());
    let times: Vec<f64> = (0..n_use).map(|m| grid.time_coord(m)).collect();
    let tail_start = n_use / 2;
    let growth_exponent = decay_exponent(&times[tail_start..], &traj.sup_norms[tail_start..n_use]);
    let (escaped, escape_time) = match traj.outcome {
        SolveOutcome::BlowupSuspected { t_escape, .. } => (true, Some(t_escape)),
        _ => (false, None),
    };
    let first = traj.sup_norms.first().copied().unwrap_or(0.0).max(1e-300);
    let last = traj.sup_norms[..n_use].last().copied().unwrap_or(0.0);
    let amplification = last / first;
    let consistent = if expect_decay {
        !escaped && amplification <= 1.0 + 1e-6
    } else {
        escaped
    };
    Ok(NonexistenceReport {
        r,
        r_star: rs,
        class,
        growth_exponent,
        escaped,
        escape_time,
        amplification,
        consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn r_star_reference_values() {
        // n=1, s=1/2, α=0: both branches give 2 (a genuine tie).
        assert_relative_eq!(r_star(1, 0.5, 0.0).unwrap(), 2.0, max_relative = 1e-15);
        // n=2, s=1/2, α=0: min(1.5, 5/3) = 1.5.
        assert_relative_eq!(r_star(2, 0.5, 0.0).unwrap(), 1.5, max_relative = 1e-15);
        // α = 2s collapses the second branch to 1.
        assert_relative_eq!(r_star(3, 0.7, 1.4).unwrap(), 1.0, max_relative = 1e-15);
        assert!(r_star(4, 0.5, 0.0).is_err());
        assert!(r_star(1, 1.0, 0.0).is_err());
    }

    #[test]
    fn classification_is_exact_at_ties() {
        let rs = r_star(2, 0.5, 0.0).unwrap();
        assert_eq!(classify(2, 0.5, 0.0, rs).unwrap(), CriticalityClass::Critical);
        assert_eq!(
            classify(2, 0.5, 0.0, rs * (1.0 - 1e-6)).unwrap(),
            CriticalityClass::Subcritical
        );
        assert_eq!(
            classify(2, 0.5, 0.0, rs * (1.0 + 1e-6)).unwrap(),
            CriticalityClass::Supercritical
        );
        assert!(classify(1, 0.5, 0.0, 0.5).is_err());
    }

    #[test]
    fn scaling_beta_reference() {
        assert_relative_eq!(scaling_beta(1, 0.5, 2.0), 0.25, max_relative = 1e-15);
        assert_relative_eq!(scaling_beta(2, 0.25, 4.0), 1.5, max_relative = 1e-15);
    }

    #[test]
    fn eigen_interval_classical_limit() {
        // s = 1 on the interval (−1, 1): Dirichlet eigenvalue (π/2)².
        let rep = eigen_ball(1, 1.0, 128, 2.0).unwrap();
        let exact = (std::f64::consts::PI / 2.0) * (std::f64::consts::PI / 2.0);
        assert_relative_eq!(rep.lambda1, exact, max_relative = 1e-2);
        assert!(rep.residual <= EIGEN_RESIDUAL_LIMIT);
    }

    #[test]
    fn eigen_interval_half_laplacian() {
        // Established numerical value for the half-Laplacian ground state
        // on (−1, 1) is ≈ 1.15777; the periodic embedding and mesh allow a
        // few percent.
        let rep = eigen_ball(1, 0.5, 256, 4.0).unwrap();
        assert_relative_eq!(rep.lambda1, 1.15777, max_relative = 3e-2);
        // The eigenvalue grows with the order.
        let rep1 = eigen_ball(1, 1.0, 128, 2.0).unwrap();
        assert!(rep.lambda1 < rep1.lambda1);
    }

    #[test]
    fn barrier_chain_holds_and_rejects_fast_exponents() {
        let rep = barrier_probe(0.5, 1, 2.0, 1.0).unwrap();
        assert!(rep.passed, "report {rep:?}");
        assert!(rep.beta < rep.s);
        assert!(rep.normalization_err <= 1e-12);
        // β = 1/3 ≥ s = 0.3 must be refused.
        assert!(matches!(
            barrier_probe(0.3, 1, 2.0, 1.0),
            Err(Error::BarrierExponent { .. })
        ));
    }

    #[test]
    fn test_function_support_and_mass() {
        let grid = GridSpec::new(1, 8.0, 64, 1.0, 32).unwrap();
        let s = 0.5;
        let phi = test_function(&grid, 1.0, s).unwrap();
        // Unit value in the core, zero outside the support.
        let center = grid.nx / 2; // x = 0
        let m_plateau = (0.3 * grid.mt as f64) as usize; // θ ∈ [0.25, 0.5]
        assert_relative_eq!(phi.real_at(m_plateau, center), 1.0, max_relative = 1e-12);
        for j in 0..grid.nx {
            if grid.axis_coord(j).abs() >= 1.0 {
                assert_eq!(phi.real_at(m_plateau, j), 0.0);
            }
        }
        // Discrete time mass ≈ (5/8) R^{2s}.
        let dt = grid.dt();
        let mass: f64 = (0..grid.time_len())
            .map(|m| {
                let w = if m == 0 || m == grid.mt { 0.5 } else { 1.0 };
                w * dt * phi.real_at(m, center)
            })
            .sum();
        assert_relative_eq!(mass, test_function_time_mass(1.0, s), max_relative = 2e-2);
        // Radii outside the box or window are refused.
        assert!(test_function(&grid, 7.9, s).is_err());
        assert!(test_function(&grid, 1.2, 0.9).is_err()); // R^{1.8} > T
    }

    #[test]
    fn pairing_identity_vanishes_for_steady_constant() {
        // u ≡ 1 with zero forcing solves the equation; the adjoint pairing
        // plus the frozen-past term must cancel to quadrature accuracy.
        let grid = GridSpec::new(1, 4.0, 32, 1.0, 24).unwrap();
        let field = Field::sample_real(&grid, |_, _| 1.0).unwrap();
        let u0 = vec![1.0; grid.spatial_len()];
        let weight = WeightSpec::constant(&grid, 0.0).unwrap();
        let nonlin = NonlinearitySpec::power(2.0).unwrap();
        let params = OperatorParams::new(0.5, cns_closed_form(1, 0.5)).unwrap();
        let rep =
            rescaling_diagnostic(&field, &u0, &weight, &nonlin, &params, &[0.8, 1.0]).unwrap();
        for row in &rep.rows {
            assert_relative_eq!(row.lhs, 0.0, epsilon = 1e-12);
            // rhs = adjoint + past term: cancellation is limited by the
            // quadrature budget.
            assert!(
                row.rhs.abs() <= row.quad_budget.max(0.02),
                "rhs {} budget {}",
                row.rhs,
                row.quad_budget
            );
        }
    }

    #[test]
    fn blowup_monitor_distinguishes_growth_from_decay() {
        // ‖u‖₂ = (1−t)^{−0.7} gives J J''/(J')² → 3.5 near the blow-up:
        // a comfortably positive margin.
        let dt = 1.0 / 128.0;
        let blow: Vec<f64> = (0..120).map(|m| (1.0 - m as f64 * dt).powf(-0.7)).collect();
        let rep = blowup_monitor(dt, &blow, None).unwrap();
        assert!(rep.blowup_indicated, "margin {}", rep.epsilon_margin);
        assert!(rep.epsilon_margin > 0.5);

        let decay: Vec<f64> = (0..120).map(|m| (-(m as f64) * dt).exp()).collect();
        let rep2 = blowup_monitor(dt, &decay, None).unwrap();
        assert!(!rep2.blowup_indicated);
        assert!(blowup_monitor(dt, &decay[..4], None).is_err());
    }

    #[test]
    fn probe_matches_expected_regimes() {
        // Small subcritical data decays.
        let grid = GridSpec::new(1, 4.0, 32, 1.0, 24).unwrap();
        let u0: Vec<f64> = (0..32)
            .map(|j| 0.05 * (std::f64::consts::PI * grid.axis_coord(j) / 4.0).cos())
            .collect();
        let weight = WeightSpec::constant(&grid, 0.5).unwrap();
        let sub = NonlinearitySpec::power(1.5).unwrap();
        let sp = SolveParams {
            s: 0.5,
            ..SolveParams::default()
        };
        let rep = nonexistence_probe(&grid, &u0, &weight, &sub, &sp, 0.0, 1.5, true).unwrap();
        assert_eq!(rep.class, CriticalityClass::Subcritical);
        assert!(rep.consistent, "report {rep:?}");

        // Large supercritical data escapes.
        let big: Vec<f64> = (0..32)
            .map(|j| {
                let x = grid.axis_coord(j);
                60.0 * (-x * x).exp()
            })
            .collect();
        let sup = NonlinearitySpec::power(3.0).unwrap();
        let grid2 = GridSpec::new(1, 4.0, 32, 2.0, 48).unwrap();
        let rep2 = nonexistence_probe(&grid2, &big, &weight, &sup, &sp, 0.0, 3.0, false).unwrap();
        assert_eq!(rep2.class, CriticalityClass::Supercritical);
        assert!(rep2.consistent, "report {rep2:?}");
    }
}
