//! Randomized invariants of the public library surface.
//!
//! Each property encodes a structural identity the numerics must satisfy
//! for *every* admissible input, not just the tuned reference cases in the
//! unit suites: linearity and eigenrelations of the spectral route, the
//! sign constraint at past minima, reflection/permutation exactness,
//! mode-multiplier identities, and codec round-trips.

use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use fracheat::criticality::{blowup_series, test_function};
use fracheat::field::{Field, FieldKind};
use fracheat::grid::GridSpec;
use fracheat::nonlin::NonlinearitySpec;
use fracheat::operator::{
    apply_quadrature, apply_spectral, cns_closed_form, symbol_eval, HistoryPolicy, OperatorParams,
};
use fracheat::planes::{commensurate_planes, deficit_field, lipschitz_quotient, reflect_field};
use fracheat::solver::{kappa_kernel, sigma_multiplier};
use fracheat::synth::random_field;
use fracheat::{io, report};

const PI: f64 = std::f64::consts::PI;

/// A small grid for randomized spectral work (kept tiny so hundreds of
/// cases stay fast).
fn small_grid(n: usize) -> GridSpec {
    match n {
        1 => GridSpec::new(1, 4.0, 16, 1.0, 8).unwrap(),
        2 => GridSpec::new(2, 4.0, 8, 1.0, 4).unwrap(),
        _ => unreachable!(),
    }
}

fn seeded_field(grid: &GridSpec, seed: u64, amplitude: f64) -> Field {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    random_field(grid, 3.min(grid.nx / 2 - 1), 2, amplitude, 4, &mut rng).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    // ----- grid ---------------------------------------------------------

    #[test]
    fn flatten_unflatten_roundtrip(
        n in 1usize..=3,
        nx in prop::sample::select(vec![8usize, 10, 16]),
        raw in prop::collection::vec(0usize..1000, 3),
    ) {
        let grid = GridSpec::new(n, 4.0, nx, 1.0, 4).unwrap();
        let idx: Vec<usize> = raw[..n].iter().map(|r| r % nx).collect();
        let flat = grid.flatten(&idx);
        prop_assert_eq!(grid.unflatten(flat), idx);
        prop_assert!(flat < grid.spatial_len());
    }

    #[test]
    fn sampling_reads_back_node_values(
        coeffs in prop::collection::vec(-3.0f64..3.0, 4),
        j in 0usize..16,
        m in 0usize..=8,
    ) {
        let grid = small_grid(1);
        let f = |x: &[f64], t: f64| coeffs[0] + coeffs[1] * x[0] + coeffs[2] * t + coeffs[3] * x[0] * t;
        let field = Field::sample_real(&grid, f).unwrap();
        let x = grid.axis_coord(j);
        prop_assert_eq!(field.real_at(m, j), f(&[x], grid.time_coord(m)));
    }

    // ----- field norms ----------------------------------------------------

    #[test]
    fn l2_norm_homogeneity_and_triangle(
        seed_u in 0u64..1000,
        seed_v in 1000u64..2000,
        alpha in -4.0f64..4.0,
    ) {
        let grid = small_grid(1);
        let u = seeded_field(&grid, seed_u, 1.0);
        let v = seeded_field(&grid, seed_v, 1.0);
        let zero = Field::zeros(&grid, FieldKind::Real);
        let scaled = u.linear_combination(alpha, &zero, 0.0).unwrap();
        let sum = u.linear_combination(1.0, &v, 1.0).unwrap();
        for m in 0..=grid.mt {
            let nu = u.l2_norm(m);
            prop_assert!((scaled.l2_norm(m) - alpha.abs() * nu).abs() <= 1e-12 * (1.0 + nu));
            prop_assert!(sum.l2_norm(m) <= nu + v.l2_norm(m) + 1e-12);
        }
    }

    // ----- spectral operator ---------------------------------------------

    #[test]
    fn spectral_route_is_linear(
        seed_u in 0u64..500,
        seed_v in 500u64..1000,
        alpha in -2.0f64..2.0,
        beta in -2.0f64..2.0,
        s in 0.15f64..0.95,
    ) {
        let grid = small_grid(1);
        let u = seeded_field(&grid, seed_u, 1.0);
        let v = seeded_field(&grid, seed_v, 1.0);
        let combo = u.linear_combination(alpha, &v, beta).unwrap();
        let lhs = apply_spectral(&combo, s).unwrap();
        let rhs = apply_spectral(&u, s).unwrap()
            .linear_combination(alpha, &apply_spectral(&v, s).unwrap(), beta).unwrap();
        let diff = lhs.linear_combination(1.0, &rhs, -1.0).unwrap();
        let scale = lhs.linf_norm_all().max(1.0);
        prop_assert!(diff.linf_norm_all() <= 1e-10 * scale);
    }

    #[test]
    fn plane_waves_are_spectral_eigenfunctions(
        k in -3i64..=3,
        kt in -2i64..=2,
        s in 0.15f64..0.95,
    ) {
        let grid = small_grid(1);
        let xi = PI * k as f64 / grid.l;
        let omega = 2.0 * PI * kt as f64 / grid.t;
        let wave = Field::sample_complex(&grid, |x, t| {
            Complex64::new(0.0, xi * x[0] + omega * t).exp()
        }).unwrap();
        let sym = symbol_eval(&[xi], omega, s);
        let got = apply_spectral(&wave, s).unwrap();
        for (a, b) in got.values().iter().zip(wave.values()) {
            prop_assert!((a - sym * b).norm() <= 1e-10 * (1.0 + sym.norm()));
        }
    }

    #[test]
    fn reflection_commutes_with_spectral_route(
        seed in 0u64..500,
        plane_pick in 0usize..64,
        s in 0.15f64..0.95,
    ) {
        let grid = small_grid(1);
        let u = seeded_field(&grid, seed, 1.0);
        let planes = commensurate_planes(&grid, 0.9 * grid.l);
        let lambda = planes[plane_pick % planes.len()];
        let a = reflect_field(&apply_spectral(&u, s).unwrap(), lambda).unwrap();
        let b = apply_spectral(&reflect_field(&u, lambda).unwrap(), s).unwrap();
        let diff = a.linear_combination(1.0, &b, -1.0).unwrap();
        prop_assert!(diff.linf_norm_all() <= 1e-10 * (1.0 + a.linf_norm_all()));
    }

    // ----- reflection bookkeeping ----------------------------------------

    #[test]
    fn deficit_is_exactly_antisymmetric(
        seed in 0u64..500,
        plane_pick in 0usize..64,
    ) {
        let grid = small_grid(1);
        let u = seeded_field(&grid, seed, 1.0);
        let planes = commensurate_planes(&grid, 0.9 * grid.l);
        let lambda = planes[plane_pick % planes.len()];
        let w = deficit_field(&u, lambda).unwrap();
        let rw = reflect_field(&w, lambda).unwrap();
        for (a, b) in rw.values().iter().zip(w.values()) {
            prop_assert_eq!(a.re, -b.re);
            prop_assert_eq!(a.im, -b.im);
        }
    }

    #[test]
    fn reflection_reindexing_preserves_sums(
        seed in 0u64..500,
        plane_pick in 0usize..64,
    ) {
        let grid = small_grid(2);
        let u = seeded_field(&grid, seed, 1.0);
        let planes = commensurate_planes(&grid, 0.9 * grid.l);
        let lambda = planes[plane_pick % planes.len()];
        let r = reflect_field(&u, lambda).unwrap();
        let total: f64 = u.values().iter().map(|v| v.re).sum();
        let total_r: f64 = r.values().iter().map(|v| v.re).sum();
        prop_assert!((total - total_r).abs() <= 1e-10 * (1.0 + total.abs()));
    }

    #[test]
    fn deficit_quotient_respects_lipschitz_bound(
        seed in 0u64..500,
        plane_pick in 0usize..64,
        level in 0usize..=8,
    ) {
        let grid = small_grid(1);
        let u = seeded_field(&grid, seed, 1.0);
        let planes = commensurate_planes(&grid, 0.5 * grid.l);
        let lambda = planes[plane_pick % planes.len()];
        let rep = lipschitz_quotient(&u, lambda, level.min(grid.mt)).unwrap();
        prop_assert!(rep.max_quotient >= 0.0);
        prop_assert!(rep.passed, "quotient {} vs bound {}", rep.max_quotient, rep.lipschitz_bound);
    }

    // ----- minimum principle ----------------------------------------------

    #[test]
    fn operator_is_nonpositive_at_global_past_minima(
        seed in 0u64..200,
        s in prop::sample::select(vec![0.3f64, 0.5, 0.7]),
        j0 in 0usize..16,
        m_frac in 0.3f64..1.0,
    ) {
        let grid = small_grid(1);
        let mut u = seeded_field(&grid, seed, 1.0);
        let m0 = ((grid.mt as f64 * m_frac) as usize).clamp(1, grid.mt);
        // Depress the chosen node strictly below everything in its past.
        let past_min = (0..=m0)
            .flat_map(|m| (0..grid.spatial_len()).map(move |j| (m, j)))
            .map(|(m, j)| u.real_at(m, j))
            .fold(f64::INFINITY, f64::min);
        let mut vals = u.values().to_vec();
        vals[m0 * grid.spatial_len() + j0] = Complex64::new(past_min - 0.5, 0.0);
        u = Field::from_values(grid.clone(), FieldKind::Real, vals).unwrap();
        let params = OperatorParams::new(s, cns_closed_form(grid.n, s)).unwrap();
        let qv = apply_quadrature(&u, &[j0], m0, &params, HistoryPolicy::ConstantPast).unwrap();
        let tol = 10.0 * qv.near_residual + qv.tail_bound + 1e-9 * u.linf_norm_all();
        prop_assert!(
            qv.value <= tol,
            "operator {} exceeds tolerance {} at a global past minimum",
            qv.value, tol
        );
    }

    // ----- mode multipliers ------------------------------------------------

    #[test]
    fn relaxation_is_monotone_in_the_mode(
        s in 0.15f64..0.95,
        a1 in 0.0f64..40.0,
        gap in 0.0f64..40.0,
        t in 1e-3f64..5.0,
    ) {
        let lo = sigma_multiplier(s, a1 + gap, t);
        let hi = sigma_multiplier(s, a1, t);
        prop_assert!(lo <= hi + 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&hi));
    }

    #[test]
    fn constants_are_preserved_by_the_mode_split(
        s in 0.2f64..0.9,
        log_a in -1.0f64..2.0,
        log_t in -1.5f64..0.7,
    ) {
        // σ(t;a) + a^s ∫₀ᵗ κ(τ;a) dτ = 1: the kernel mass must exactly
        // complement the relaxation so that time-constant states feel only
        // the spatial part of the operator. The τ^{s−1} singularity is
        // handled with an analytic head on [0, t·2⁻⁶⁰] (where e^{−aτ} ≈ 1
        // to far below tolerance) and geometrically graded composite
        // Simpson panels up to t.
        let a = 10f64.powf(log_a);
        let t = 10f64.powf(log_t);
        let gamma_s = fracheat::special::gamma(s);
        let head_cut = t * 2f64.powi(-60);
        let mut integral = head_cut.powf(s) / s;
        let f = |tau: f64| tau.powf(s - 1.0) * (-a * tau).exp();
        for k in (0..60).rev() {
            let lo = t * 2f64.powi(-(k + 1));
            let hi = t * 2f64.powi(-k);
            let sub = 64;
            let w = (hi - lo) / sub as f64;
            for p in 0..sub {
                let x0 = lo + p as f64 * w;
                integral += w / 6.0 * (f(x0) + 4.0 * f(x0 + 0.5 * w) + f(x0 + w));
            }
        }
        let kernel_mass = integral / gamma_s;
        // Spot-check the closed-form kernel against its definition.
        let tau = 0.5 * t;
        prop_assert!(
            (kappa_kernel(s, a, tau) - f(tau) / gamma_s).abs()
                <= 1e-12 * kappa_kernel(s, a, tau).abs().max(1.0)
        );
        let identity = sigma_multiplier(s, a, t) + a.powf(s) * kernel_mass;
        prop_assert!((identity - 1.0).abs() <= 1e-8, "identity residual {}", identity - 1.0);
    }

    // ----- criticality helpers ---------------------------------------------

    #[test]
    fn test_function_is_clamped_and_monotone(
        r in 0.5f64..2.0,
        s in 0.25f64..0.9,
    ) {
        let grid = GridSpec::new(1, 4.0, 32, 4.0, 16).unwrap();
        let phi = test_function(&grid, r, s).unwrap();
        let center = grid.nx / 2;
        for m in 0..=grid.mt {
            let mut prev = f64::INFINITY;
            for j in center..grid.nx {
                let v = phi.real_at(m, j);
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
                prop_assert!(v <= prev + 1e-12, "radial increase at j={j}");
                prev = v;
            }
        }
        // Beyond the plateau the time profile is nonincreasing.
        let horizon = r.powf(2.0 * s);
        let mut prev = f64::INFINITY;
        for m in 0..=grid.mt {
            let theta = grid.time_coord(m) / horizon;
            if theta >= 0.5 {
                let v = phi.real_at(m, center);
                prop_assert!(v <= prev + 1e-12, "temporal increase at m={m}");
                prev = v;
            }
        }
    }

    #[test]
    fn energy_is_convex_for_nondecreasing_norms(
        increments in prop::collection::vec(0.0f64..1.0, 8..40),
        base in 0.0f64..2.0,
        dt in 1e-3f64..0.5,
    ) {
        let mut norms = Vec::with_capacity(increments.len());
        let mut acc = base;
        for inc in &increments {
            acc += inc;
            norms.push(acc);
        }
        let series = blowup_series(dt, &norms, None).unwrap();
        for row in &series {
            prop_assert!(
                row.j_second >= -1e-9 * (1.0 + row.j_prime.abs()),
                "J'' = {} at level {}",
                row.j_second, row.level
            );
        }
    }

    // ----- nonlinearity -----------------------------------------------------

    #[test]
    fn lipschitz_constant_dominates_difference_quotients(
        r in 1.0f64..3.0,
        u in -5.0f64..5.0,
        v in -5.0f64..5.0,
    ) {
        let nl = NonlinearitySpec::power(r).unwrap();
        let lo = u.min(v) - 0.1;
        let hi = u.max(v) + 0.1;
        let lip = nl.lipschitz(lo, hi).unwrap();
        let df = (nl.eval(u).unwrap() - nl.eval(v).unwrap()).abs();
        prop_assert!(df <= lip * (u - v).abs() * (1.0 + 1e-9) + 1e-12);
    }

    // ----- codecs -------------------------------------------------------------

    #[test]
    fn field_codec_roundtrips_bit_exactly(
        seed in 0u64..1000,
        complex in proptest::bool::ANY,
    ) {
        let grid = small_grid(1);
        let u = if complex {
            let base = seeded_field(&grid, seed, 1.0);
            let vals = base.values().iter()
                .map(|v| Complex64::new(v.re, 0.25 * v.re))
                .collect();
            Field::from_values(grid.clone(), FieldKind::Complex, vals).unwrap()
        } else {
            seeded_field(&grid, seed, 1.0)
        };
        let (sidecar, payload) = io::encode_field(&u);
        let sidecar_bytes = serde_json::to_vec(&sidecar).unwrap();
        let reparsed = io::parse_sidecar(&sidecar_bytes).unwrap();
        let back = io::decode_field_bytes(&reparsed, &payload).unwrap();
        prop_assert_eq!(back.kind(), u.kind());
        for (a, b) in back.values().iter().zip(u.values()) {
            prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
            prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn report_envelope_roundtrips(
        key in "[a-z]{1,8}",
        x in -1e6f64..1e6,
        flag in proptest::bool::ANY,
    ) {
        let results = serde_json::json!({ key.clone(): x, "ok": flag });
        let rep = report::Report::new("apply", &results).unwrap();
        let text = rep.to_json_pretty().unwrap();
        let back = report::parse_report(&text).unwrap();
        prop_assert_eq!(back.command.as_str(), "apply");
        prop_assert_eq!(
            serde_json::to_string(&back.deterministic_part().results).unwrap(),
            serde_json::to_string(&results).unwrap()
        );
    }
}
