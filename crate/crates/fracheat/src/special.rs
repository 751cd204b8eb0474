//! Special functions and quadrature nodes used across the crate.
//!
//! Gamma-family evaluations delegate to `statrs`; this module pins the
//! conventions (regularised lower `P`, upper `Q`) and adds the
//! principal-branch complex power and Gauss–Legendre rules.

use num_complex::Complex64;

/// Euler gamma function `Γ(x)`.
pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// Natural log of `|Γ(x)|` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Regularised lower incomplete gamma `P(a, x) = γ(a, x)/Γ(a)`.
pub fn reg_lower_gamma(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    statrs::function::gamma::gamma_lr(a, x)
}

/// Regularised upper incomplete gamma `Q(a, x) = Γ(a, x)/Γ(a)`.
pub fn reg_upper_gamma(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 1.0;
    }
    statrs::function::gamma::gamma_ur(a, x)
}

/// Principal-branch complex power `z^s` with the convention `0^s = 0`.
///
/// For `z = iω + |ξ|²` the real part is non-negative, so
/// `arg z ∈ [-π/2, π/2]` and `Re z^s ≥ 0` for `s ∈ (0, 1]`.
pub fn principal_power(z: Complex64, s: f64) -> Complex64 {
    if z == Complex64::ZERO {
        return Complex64::ZERO;
    }
    Complex64::from_polar(z.norm().powf(s), s * z.arg())
}

/// Quintic smoothstep: `0 ↦ 0`, `1 ↦ 1`, monotone, with vanishing first and
/// second derivatives at both ends (C² when used as a ramp). Input is
/// clamped to `[0, 1]`.
pub fn quintic_step(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
///
/// Newton iteration on the Legendre recurrence; plenty for the panel sizes
/// used here (`4 ≤ n ≤ 64`). Rules are cached per thread — panel quadrature
/// requests the same sizes millions of times.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    use std::cell::RefCell;
    use std::collections::HashMap;
    thread_local! {
        static CACHE: RefCell<HashMap<usize, (Vec<f64>, Vec<f64>)>> =
            RefCell::new(HashMap::new());
    }
    CACHE.with(|c| {
        c.borrow_mut()
            .entry(n)
            .or_insert_with(|| gauss_legendre_uncached(n))
            .clone()
    })
}

fn gauss_legendre_uncached(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi-style initial guess for the i-th positive root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n(x) and P_n'(x) via the recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            dp = n as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Integrate `f` over `[a, b]` with an `n`-point Gauss–Legendre rule.
pub fn gauss_panel(a: f64, b: f64, n: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let (nodes, weights) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(&weights) {
        acc += w * f(mid + half * x);
    }
    acc * half
}
