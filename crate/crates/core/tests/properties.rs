use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rdrop::ballmodel::{
    ball_potential, configuration_energy, cross_interaction, mc_nonlocal_oracle, potential_sup_bound,
    single_ball_energy,
};
use rdrop::coefficients::{mu_closed_form, mu_ratio, mu_sequence};
use rdrop::landscape::{breakpoints, landscape_table, mglob_upper_bound, optimal_partition, rescale_to_unit_volume};
use rdrop::stability::{
    coercivity_bounds, critical_mass, critical_radius, g_function, mode_eigenvalue, monotonicity_switch_degree,
    quadratic_form_spectral, truncation_degree,
};
use rdrop::{
    Ball, BallConfiguration, HarmonicPerturbation, ModelParams, QuadratureSpec, RieszCoefficients, SampleStream,
};

fn coeffs(n: u32, a: f64, g: f64) -> RieszCoefficients {
    RieszCoefficients::compute(ModelParams::new(n, a, g).unwrap()).unwrap()
}

fn spec() -> QuadratureSpec {
    QuadratureSpec::tanh_sinh(1e-12)
}

/// `(N, alpha)` with `alpha` strictly inside `(0, N - 1)`.
fn model() -> impl Strategy<Value = (u32, f64)> {
    (2u32..=6).prop_flat_map(|n| (Just(n), 0.02..0.98f64)).prop_map(|(n, t)| (n, t * (n - 1) as f64))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mu_recurrence_positive_decreasing((n, a) in model(), d_max in 2usize..300) {
        let p = ModelParams::new(n, a, 1.0).unwrap();
        let mu = mu_sequence(&p, d_max);
        for d in 0..d_max {
            let next = mu_ratio(&p, d) * mu[d];
            prop_assert!((mu[d + 1] - next).abs() <= 1e-12 * mu[d]);
            prop_assert!(mu[d + 1] > 0.0 && mu[d + 1] < mu[d]);
            prop_assert!((mu_closed_form(&p, d) / mu[d] - 1.0).abs() < 1e-11);
        }
    }

    #[test]
    fn eigenvalue_grows_like_d_squared((n, a) in model(), r in 0.1..3.0f64) {
        let c = coeffs(n, a, 1.0);
        let d = 200_000usize;
        let ratio = mode_eigenvalue(&c, r, d) / (d as f64 * (d + n as usize - 2) as f64);
        prop_assert!((ratio - 1.0).abs() < 1e-3);
        prop_assert!(mode_eigenvalue(&c, r, 1).abs() < 1e-7 * (1.0 + c.mu(1) * r.powf(n as f64 + 1.0 - a)));
    }

    #[test]
    fn critical_radius_is_a_root_and_scales_with_gamma((n, a) in model(), g in 0.1..10.0f64) {
        let c = coeffs(n, a, g);
        let r_bar = critical_radius(&c).unwrap();
        let d_star = 2.max(monotonicity_switch_degree(&c).unwrap());
        prop_assert!(mode_eigenvalue(&c, r_bar, d_star).abs() < 1e-8 * (d_star * d_star) as f64);
        let doubled = critical_radius(&coeffs(n, a, 2.0 * g)).unwrap();
        let expected = r_bar * 2f64.powf(-1.0 / (n as f64 + 1.0 - a));
        prop_assert!((doubled / expected - 1.0).abs() < 1e-9);
    }

    #[test]
    fn spectral_form_bounded_by_lowest_mode(seed in any::<u64>(), a in 0.1..1.9f64) {
        let c = coeffs(3, a, 1.0);
        let r = 0.9 * critical_radius(&c).unwrap();
        let bounds = coercivity_bounds(&c, r).unwrap();
        let d_star = truncation_degree(&c, r).unwrap();
        let direct_min = (2..=d_star.max(20)).map(|d| mode_eigenvalue(&c, r, d)).fold(f64::INFINITY, f64::min);
        prop_assert!((bounds.l2 - direct_min).abs() <= 1e-12 * direct_min.abs().max(1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut phi = HarmonicPerturbation::new(3);
        for _ in 0..8 {
            let d = rng.random_range(2..=20usize);
            let i = rng.random_range(1..=(2 * d + 1) as u64);
            phi.set(d, i, rng.random_range(-1.0..1.0)).unwrap();
        }
        let norm = phi.norm_sq();
        let value = quadratic_form_spectral(&c, r, &phi).unwrap();
        prop_assert!(value >= 0.9 * bounds.l2 * norm);
        prop_assert!(value > 0.0);
    }

    #[test]
    fn potential_below_sup_bound_and_radially_decreasing((n, a) in model(), big_r in 0.2..2.0f64) {
        let p = ModelParams::new(n, a, 1.0).unwrap();
        let bound = potential_sup_bound(&p, p.omega_n * big_r.powi(n as i32));
        let mut prev = f64::INFINITY;
        for k in 0..=20 {
            let s = 0.15 * k as f64 * big_r;
            let v = ball_potential(&p, big_r, s, &spec()).unwrap();
            prop_assert!(v <= bound);
            prop_assert!(v <= prev * (1.0 + 1e-12));
            prev = v;
        }
    }
}

#[test]
fn g_is_unimodal_around_switch_degree() {
    for (n, a) in [(3, 0.5), (3, 1.5), (2, 0.5), (4, 1.0), (5, 3.0)] {
        let c = coeffs(n, a, 1.0);
        let di = monotonicity_switch_degree(&c).unwrap();
        let g: Vec<f64> = (2..=51).map(|d| g_function(&c, d).unwrap()).collect();
        for d in 2..=50usize {
            let (now, next) = (g[d - 2], g[d - 1]);
            if d < di {
                assert!(next < now, "N {n}, alpha {a}, d {d}");
            } else {
                assert!(next > now, "N {n}, alpha {a}, d {d}");
            }
        }
    }
}

#[test]
fn g_diverges_along_powers_of_ten() {
    let c = coeffs(3, 1.0, 1.0);
    let g: Vec<f64> = (2..=5).map(|k| g_function(&c, 10usize.pow(k)).unwrap()).collect();
    assert!(g.windows(2).all(|w| w[1] > w[0]), "{g:?}");
}

#[test]
fn small_alpha_mass_growth() {
    let a = critical_mass(&coeffs(3, 0.5, 1.0)).unwrap();
    let b = critical_mass(&coeffs(3, 0.05, 1.0)).unwrap();
    assert!(b > 4.0 * a);
    for alpha in [0.1, 0.5, 0.9, 1.25] {
        let c = coeffs(3, alpha, 1.0);
        let exact = 4.0 / 3.0 * PI
            * ((6.0 - alpha) * (4.0 - alpha) / (2f64.powf(3.0 - alpha) * alpha * PI)).powf(3.0 / (4.0 - alpha));
        assert!((critical_mass(&c).unwrap() / exact - 1.0).abs() < 1e-8);
    }
}

#[test]
fn cross_interaction_symmetry_and_far_field() {
    let p = ModelParams::new(3, 1.0, 1.0).unwrap();
    let b1 = Ball::new(vec![0.0, 0.0, 0.0], 1.0).unwrap();
    let b2 = Ball::new(vec![2.0, 1.5, 0.0], 0.5).unwrap();
    let ab = cross_interaction(&p, &b1, &b2, &spec()).unwrap();
    let ba = cross_interaction(&p, &b2, &b1, &spec()).unwrap();
    assert!((ab / ba - 1.0).abs() < 1e-9);

    let q = ModelParams::new(3, 0.5, 1.0).unwrap();
    let d = 150.0;
    let far = Ball::new(vec![d, 0.0, 0.0], 0.5).unwrap();
    let v = cross_interaction(&q, &b1, &far, &spec()).unwrap();
    let monopole = b1.volume(&q) * far.volume(&q) / d.powf(0.5);
    assert!((v / monopole - 1.0).abs() < 5e-3);
}

#[test]
fn configuration_energy_bounds() {
    let c = coeffs(3, 1.0, 1.0);
    let p = c.params;
    let single = BallConfiguration::new(p, vec![Ball::new(vec![0.0; 3], 1.3).unwrap()]).unwrap();
    let e = configuration_energy(&single, &c, &spec()).unwrap();
    let direct = single_ball_energy(&p, single.total_volume(), &c);
    assert!((e.total / direct.total - 1.0).abs() < 1e-12);

    let mut totals = Vec::new();
    for dist in [4.0, 8.0, 16.0] {
        let balls = vec![Ball::new(vec![0.0; 3], 1.0).unwrap(), Ball::new(vec![dist, 0.0, 0.0], 1.0).unwrap()];
        let config = BallConfiguration::new(p, balls).unwrap();
        let e = configuration_energy(&config, &c, &spec()).unwrap();
        assert!(e.nonlocal >= 2.0 * c.c_alpha);
        let iso = 3.0 * p.omega_n.cbrt() * config.total_volume().powf(2.0 / 3.0);
        assert!(e.perimeter >= iso - 1e-9);
        totals.push(e.total);
    }
    assert!(totals[0] > totals[1] && totals[1] > totals[2]);

    let balls = vec![Ball::new(vec![0.0; 3], 1.0).unwrap(), Ball::new(vec![10.0, 0.0, 0.0], 1.0).unwrap()];
    let e = configuration_energy(&BallConfiguration::new(p, balls).unwrap(), &c, &spec()).unwrap();
    let expected = 2.0 * c.c_alpha + 2.0 * (4.0 * PI / 3.0f64).powi(2) / 10.0;
    assert!((e.nonlocal / expected - 1.0).abs() < 1e-9);
}

#[test]
fn monte_carlo_agrees_with_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (seed, a) in [(1, 0.5), (2, 1.0), (3, 0.5), (4, 1.0), (5, 0.5)] {
        let c = coeffs(3, a, 1.0);
        let r1: f64 = rng.random_range(0.5..1.5);
        let r2: f64 = rng.random_range(0.3..1.0);
        let gap: f64 = rng.random_range(0.1..2.0);
        let balls = vec![
            Ball::new(vec![0.0; 3], r1).unwrap(),
            Ball::new(vec![r1 + r2 + gap, 0.0, 0.0], r2).unwrap(),
        ];
        let config = BallConfiguration::new(c.params, balls).unwrap();
        let quad = configuration_energy(&config, &c, &spec()).unwrap().nonlocal;
        let mc = mc_nonlocal_oracle(&config, SampleStream::new(seed, 0), 1_000_000).unwrap();
        assert!(!mc.variance_warning);
        assert!((mc.estimate - quad).abs() <= 4.0 * mc.std_error, "seed {seed}: {mc:?} vs {quad}");
    }
}

#[test]
fn monte_carlo_scaling() {
    let p = ModelParams::new(3, 1.0, 1.0).unwrap();
    let one = BallConfiguration::new(p, vec![Ball::new(vec![0.0; 3], 1.0).unwrap()]).unwrap();
    let two = BallConfiguration::new(p, vec![Ball::new(vec![0.0; 3], 2.0).unwrap()]).unwrap();
    let a = mc_nonlocal_oracle(&one, SampleStream::new(1, 0), 1_000_000).unwrap();
    let b = mc_nonlocal_oracle(&two, SampleStream::new(1, 1), 1_000_000).unwrap();
    let ratio = b.estimate / a.estimate;
    let sigma = ratio * ((a.std_error / a.estimate).powi(2) + (b.std_error / b.estimate).powi(2)).sqrt();
    assert!((ratio - 32.0).abs() <= 4.0 * sigma, "{ratio} ± {sigma}");
    let warn = BallConfiguration::new(ModelParams::new(3, 1.6, 1.0).unwrap(), one.balls.clone()).unwrap();
    assert!(mc_nonlocal_oracle(&warn, SampleStream::new(1, 0), 100).unwrap().variance_warning);
}

#[test]
fn self_energy_lower_bound() {
    for (n, a) in [(2, 0.5), (3, 0.5), (3, 1.5), (4, 2.0), (5, 1.0)] {
        let c = coeffs(n, a, 1.0);
        assert!(c.c_alpha >= c.params.omega_n.powi(2) * 2f64.powf(-a));
        c.check_invariants().unwrap();
    }
}

#[test]
fn landscape_subadditivity() {
    let c = coeffs(3, 1.0, 1.0);
    let masses: Vec<f64> = (1..=20).map(|i| 0.4 * i as f64).collect();
    let f = |m: f64, k: usize| optimal_partition(&c, m, k).unwrap().value;
    let values: Vec<f64> = masses.iter().map(|&m| f(m, 4)).collect();
    for (i, &m1) in masses.iter().enumerate() {
        for (j, &m2) in masses.iter().enumerate().skip(i) {
            let joint = f(m1 + m2, 8);
            assert!(joint <= values[i] + values[j] + 1e-9, "{m1} + {m2}");
        }
    }
}

#[test]
fn landscape_linear_upper_bound_and_monotone_in_k() {
    let c = coeffs(3, 1.0, 1.0);
    let slope = (0..10)
        .map(|i| 1.0 + 0.1 * i as f64)
        .map(|m| optimal_partition(&c, m, 1).unwrap().value)
        .fold(0.0, f64::max);
    for m in [1.0, 3.3, 10.0, 25.0, 50.0] {
        let v = optimal_partition(&c, m, 50).unwrap().value;
        assert!(v / m <= slope + 1e-9, "m {m}: {}", v / m);
        let mut prev = f64::INFINITY;
        for k in 1..=6 {
            let fk = optimal_partition(&c, m, k).unwrap().value;
            assert!(fk <= prev + 1e-12 * prev);
            prev = fk;
        }
    }
}

#[test]
fn landscape_table_structure() {
    let c = coeffs(3, 1.0, 1.0);
    let grid: Vec<f64> = (1..=40).map(|i| 0.25 * i as f64).collect();
    let table = landscape_table(&c, &grid, 6).unwrap();
    assert!(table.grid.windows(2).all(|w| w[1].best_k >= w[0].best_k));
    assert!(table.breakpoints.windows(2).all(|w| w[1] > w[0]));
    let first = table.breakpoints[0];
    for row in &table.grid {
        if row.m < first {
            assert_eq!(row.best_k, 1);
        }
        assert!((row.masses.iter().sum::<f64>() / row.m - 1.0).abs() < 1e-10);
    }
    // continuity across the first crossing
    let below = optimal_partition(&c, first * (1.0 - 1e-9), 1).unwrap().value;
    let above = optimal_partition(&c, first * (1.0 + 1e-9), 2).unwrap();
    assert!((below - above.value).abs() < 1e-6);
    assert!((above.masses[0] - above.masses[1]).abs() < 1e-3 * first);
    assert!(mglob_upper_bound(&c.params) >= first);
}

#[test]
fn breakpoints_move_down_with_gamma() {
    let a = breakpoints(&coeffs(3, 1.0, 1.0), 2, 5.0).unwrap()[0];
    let b = breakpoints(&coeffs(3, 1.0, 2.0), 2, 5.0).unwrap()[0];
    assert!(b < a);
    assert!(breakpoints(&coeffs(3, 1.0, 1.0), 2, 1.0).is_err());
}

#[test]
fn rescaling_matches_single_ball_energy() {
    let c = coeffs(3, 0.7, 1.3);
    let p = c.params;
    let m = 5.0;
    let scaled = rescale_to_unit_volume(&p, m).unwrap();
    let cs = RieszCoefficients::compute(scaled).unwrap();
    let lhs = single_ball_energy(&p, m, &c).total / (m / p.omega_n).powf(2.0 / 3.0);
    let rhs = single_ball_energy(&scaled, p.omega_n, &cs).total;
    assert!((lhs / rhs - 1.0).abs() < 1e-12);
}

#[test]
fn mglob_bound_below_local_threshold_for_alpha_up_to_one() {
    for a in [0.25, 0.5, 0.75, 1.0] {
        for g in [0.5, 1.0, 2.0] {
            let c = coeffs(3, a, g);
            assert!(mglob_upper_bound(&c.params) < critical_mass(&c).unwrap(), "alpha {a}, gamma {g}");
        }
    }
}
