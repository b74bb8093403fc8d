//! Potentials and energies of balls and of disjoint ball clusters.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{ModelParams, RieszCoefficients};
use crate::error::{Error, Result};
use crate::numerics::{integrate_nodes, log_gamma_unchecked, sample_ball_into, Node, QuadratureSpec, SampleStream, CHUNK_DRAWS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Domain(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn volume(&self, params: &ModelParams) -> f64 {
        params.omega_n * self.radius.powi(params.dim as i32)
    }

    pub fn center_distance(&self, other: &Ball) -> f64 {
        self.center
            .iter()
            .zip(&other.center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Touching is allowed; interpenetration beyond this fraction of `r1 + r2` is not.
pub const OVERLAP_TOLERANCE: f64 = 1e-12;

fn check_disjoint(b1: &Ball, b2: &Ball) -> bool {
    let reach = b1.radius + b2.radius;
    b1.center_distance(b2) >= reach * (1.0 - OVERLAP_TOLERANCE)
}

/// Pairwise disjoint balls in `R^N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallConfiguration {
    pub params: ModelParams,
    pub balls: Vec<Ball>,
}

impl BallConfiguration {
    /// Validates dimensions, radii and disjointness.
    pub fn new(params: ModelParams, balls: Vec<Ball>) -> Result<Self> {
        for (i, b) in balls.iter().enumerate() {
            if b.center.len() != params.dim as usize {
                return Err(Error::Schema(format!(
                    "ball {i}: center has {} coordinates, expected {}",
                    b.center.len(),
                    params.dim
                )));
            }
            if !(b.radius > 0.0) || !b.radius.is_finite() {
                return Err(Error::Schema(format!("ball {i}: radius must be positive, got {}", b.radius)));
            }
        }
        for i in 0..balls.len() {
            for j in i + 1..balls.len() {
                if !check_disjoint(&balls[i], &balls[j]) {
                    return Err(Error::Overlap { first: i, second: j });
                }
            }
        }
        Ok(Self { params, balls })
    }

    pub fn total_volume(&self) -> f64 {
        self.balls.iter().map(|b| b.volume(&self.params)).sum()
    }
}

/// Perimeter, Riesz energy and `total = perimeter + gamma * nonlocal`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub perimeter: f64,
    pub nonlocal: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn new(params: &ModelParams, perimeter: f64, nonlocal: f64) -> Self {
        Self { perimeter, nonlocal, total: perimeter + params.gamma * nonlocal }
    }
}

// ∫_0^π sin^k
fn wallis(k: u32) -> f64 {
    let k = k as f64;
    (0.5 * PI.ln() + log_gamma_unchecked(0.5 * (k + 1.0)) - log_gamma_unchecked(0.5 * k + 1.0)).exp()
}

// ∫_0^θ sin^k for θ <= π/2; 24-point Gauss-Legendre is exact to rounding there.
fn sine_power_integral(k: u32, theta: f64) -> f64 {
    const X: [f64; 12] = [
        0.064_056_892_862_605_63,
        0.191_118_867_473_616_3,
        0.315_042_679_696_163_4,
        0.433_793_507_626_045_1,
        0.545_421_471_388_839_5,
        0.648_093_651_936_975_6,
        0.740_124_191_578_554_4,
        0.820_001_985_973_902_9,
        0.886_415_527_004_401,
        0.938_274_552_002_732_8,
        0.974_728_555_971_309_5,
        0.995_187_219_997_021_4,
    ];
    const W: [f64; 12] = [
        0.127_938_195_346_752_16,
        0.125_837_456_346_828_3,
        0.121_670_472_927_803_4,
        0.115_505_668_053_725_6,
        0.107_444_270_115_965_63,
        0.097_618_652_104_113_89,
        0.086_190_161_531_953_28,
        0.073_346_481_411_080_31,
        0.059_298_584_915_436_78,
        0.044_277_438_817_419_81,
        0.028_531_388_628_933_66,
        0.012_341_229_799_987_2,
    ];
    let h = 0.5 * theta;
    let mut s = 0.0;
    for (x, w) in X.iter().zip(W) {
        s += w * ((h * (1.0 - x)).sin().powi(k as i32) + (h * (1.0 + x)).sin().powi(k as i32));
    }
    s * h
}

/// `(N-1)`-measure of the part of a radius-`r` sphere lying in a ball of
/// radius `big_r`, for a sphere centre at distance `s` from the ball centre.
///
/// `half_lo = (r + s - R)(r + s + R) / (2 r s) = 1 + cos θ*` and
/// `half_hi = (R - s + r)(R + s - r) / (2 r s) = 1 - cos θ*` are passed
/// precomputed so that both ends of the cap range stay accurate.
fn cap_area(params: &ModelParams, r: f64, one_plus: f64, one_minus: f64) -> f64 {
    let k = params.dim - 2;
    let angular = match k {
        0 => {
            // θ* itself
            2.0 * (0.5 * one_minus).clamp(0.0, 1.0).sqrt().asin()
        }
        1 => one_minus.clamp(0.0, 2.0),
        _ => {
            if one_minus <= 1.0 {
                let theta = 2.0 * (0.5 * one_minus).clamp(0.0, 1.0).sqrt().asin();
                sine_power_integral(k, theta)
            } else {
                let comp = 2.0 * (0.5 * one_plus).clamp(0.0, 1.0).sqrt().asin();
                wallis(k) - sine_power_integral(k, comp)
            }
        }
    };
    params.equator_area() * r.powi(params.dim as i32 - 1) * angular
}

/// Integrates `weight(r) * cap_area(r)` over the spherical shells around a
/// point at distance `s` from the centre of a radius-`big_r` ball, for the
/// shells that only partially meet the ball: `r` in `[|s - R|, s + R]`.
fn integrate_caps<W>(params: &ModelParams, big_r: f64, s: f64, weight: W, spec: &QuadratureSpec) -> Result<f64>
where
    W: Fn(f64) -> f64,
{
    let lo = (s - big_r).abs();
    let hi = s + big_r;
    let outside = s > big_r;
    integrate_nodes(
        |node: Node| {
            let r = lo + node.from_a;
            if !(r > 0.0) || node.from_b <= 0.0 {
                return 0.0;
            }
            let inv = 1.0 / (2.0 * r * s);
            // (R - s + r) vanishes at r = s - R when the point is outside.
            let a1 = if outside { node.from_a } else { big_r - s + r };
            // (r + s - R) vanishes at r = R - s when the point is inside.
            let b1 = if outside { r + s - big_r } else { node.from_a };
            let one_minus = a1 * node.from_b * inv;
            let one_plus = b1 * (r + s + big_r) * inv;
            weight(r) * cap_area(params, r, one_plus, one_minus)
        },
        lo,
        hi,
        spec,
    )
}

/// Riesz potential `v(x) = ∫_{B_R} |x - y|^(-alpha) dy` at distance `s` from
/// the centre of the ball.
pub fn ball_potential(params: &ModelParams, big_r: f64, s: f64, spec: &QuadratureSpec) -> Result<f64> {
    if !(big_r > 0.0) || !(s >= 0.0) {
        return Err(Error::Domain(format!("ball_potential requires R > 0 and s >= 0 (R = {big_r}, s = {s})")));
    }
    let n = params.n();
    let a = params.alpha;
    // Shells of radius r < R - s lie entirely in the ball.
    let full = if s < big_r { params.sphere_area() * (big_r - s).powf(n - a) / (n - a) } else { 0.0 };
    if s == 0.0 {
        return Ok(full);
    }
    let caps = integrate_caps(params, big_r, s, |r| r.powf(-a), spec)?;
    Ok(full + caps)
}

/// Upper bound `N w_N / (N - alpha) + m` for the potential of any set of volume at most `m`.
pub fn potential_sup_bound(params: &ModelParams, m: f64) -> f64 {
    params.sphere_area() / (params.n() - params.alpha) + m
}

/// Energy of a single ball of volume `m`:
/// `N w_N^(1/N) m^((N-1)/N) + gamma c_alpha (m / w_N)^((2N - alpha)/N)`.
pub fn single_ball_energy(params: &ModelParams, m: f64, coeffs: &RieszCoefficients) -> EnergyBreakdown {
    if m <= 0.0 {
        return EnergyBreakdown { perimeter: 0.0, nonlocal: 0.0, total: 0.0 };
    }
    let n = params.n();
    let perimeter = n * params.omega_n.powf(1.0 / n) * m.powf((n - 1.0) / n);
    let nonlocal = coeffs.c_alpha * (m / params.omega_n).powf((2.0 * n - params.alpha) / n);
    EnergyBreakdown::new(params, perimeter, nonlocal)
}

/// `∫_{b1} ∫_{b2} |x - y|^(-alpha)` for disjoint balls, as the potential
/// of `b1` integrated over the shells around its centre that cross `b2`.
pub fn cross_interaction(params: &ModelParams, b1: &Ball, b2: &Ball, spec: &QuadratureSpec) -> Result<f64> {
    if !check_disjoint(b1, b2) {
        return Err(Error::Overlap { first: 0, second: 1 });
    }
    let dist = b1.center_distance(b2);
    let inner = spec.with_tol(spec.abs_tol / 100.0);
    let err = std::cell::Cell::new(None);
    let value = integrate_caps(
        params,
        b2.radius,
        dist,
        |rho| match ball_potential(params, b1.radius, rho, &inner) {
            Ok(v) => v,
            Err(e) => {
                err.set(Some(e));
                0.0
            }
        },
        spec,
    )?;
    match err.into_inner() {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

/// Perimeter and Riesz energy of a union of disjoint balls.
///
/// Cross terms are evaluated in parallel and summed in pair order.
pub fn configuration_energy(
    config: &BallConfiguration,
    coeffs: &RieszCoefficients,
    spec: &QuadratureSpec,
) -> Result<EnergyBreakdown> {
    let params = &config.params;
    let singles: Vec<EnergyBreakdown> = config
        .balls
        .iter()
        .map(|b| single_ball_energy(params, b.volume(params), coeffs))
        .collect();
    let pairs: Vec<(usize, usize)> = (0..config.balls.len())
        .flat_map(|i| (i + 1..config.balls.len()).map(move |j| (i, j)))
        .collect();
    let cross: Vec<Result<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            cross_interaction(params, &config.balls[i], &config.balls[j], spec).map_err(|e| match e {
                Error::Overlap { .. } => Error::Overlap { first: i, second: j },
                other => other,
            })
        })
        .collect();
    let mut perimeter = 0.0;
    let mut nonlocal = 0.0;
    for s in &singles {
        perimeter += s.perimeter;
        nonlocal += s.nonlocal;
    }
    for c in cross {
        nonlocal += 2.0 * c?;
    }
    Ok(EnergyBreakdown::new(params, perimeter, nonlocal))
}

/// Pair-sampling estimate of the Riesz energy of a ball cluster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    /// Set when `2 alpha >= N`: the estimator then has infinite variance.
    pub variance_warning: bool,
}

/// Running mean and sum of squared deviations, merged in a fixed order.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Moments {
    pub count: f64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.count;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(self, other: Moments) -> Moments {
        if self.count == 0.0 {
            return other;
        }
        if other.count == 0.0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        Moments {
            count,
            mean: self.mean + delta * other.count / count,
            m2: self.m2 + other.m2 + delta * delta * self.count * other.count / count,
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count < 2.0 {
            return f64::INFINITY;
        }
        (self.m2 / (self.count - 1.0) / self.count).sqrt()
    }
}

/// Draws `pairs` independent pairs `(x, y)` uniformly from the union of the
/// balls and averages `|x - y|^(-alpha)`, scaled by the squared volume.
pub fn mc_nonlocal_oracle(config: &BallConfiguration, stream: SampleStream, pairs: usize) -> Result<McEstimate> {
    if pairs < 2 {
        return Err(Error::Domain(format!("need at least 2 pairs, got {pairs}")));
    }
    let params = &config.params;
    let dim = params.dim as usize;
    let volumes: Vec<f64> = config.balls.iter().map(|b| b.volume(params)).collect();
    let total: f64 = volumes.iter().sum();
    let mut cumulative = Vec::with_capacity(volumes.len());
    let mut acc = 0.0;
    for v in &volumes {
        acc += v / total;
        cumulative.push(acc);
    }
    let pick = |u: f64| cumulative.iter().position(|&c| u < c).unwrap_or(cumulative.len() - 1);
    let alpha = params.alpha;

    let chunks = pairs.div_ceil(CHUNK_DRAWS);
    let moments: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            use rand::Rng;
            let mut rng = stream.chunk_rng(c as u64);
            let len = CHUNK_DRAWS.min(pairs - c * CHUNK_DRAWS);
            let mut x = vec![0.0; dim];
            let mut y = vec![0.0; dim];
            let mut m = Moments::default();
            for _ in 0..len {
                let bx = &config.balls[pick(rng.random())];
                sample_ball_into(&mut rng, &bx.center, bx.radius, &mut x);
                let by = &config.balls[pick(rng.random())];
                sample_ball_into(&mut rng, &by.center, by.radius, &mut y);
                let d2: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
                if d2 > 0.0 {
                    m.push(d2.powf(-0.5 * alpha));
                } else {
                    m.push(0.0);
                }
            }
            m
        })
        .collect();
    let m = moments.into_iter().fold(Moments::default(), Moments::merge);
    let scale = total * total;
    Ok(McEstimate {
        estimate: scale * m.mean,
        std_error: scale * m.std_error(),
        variance_warning: 2.0 * alpha >= params.n(),
    })
}

/// Volume of the symmetric difference of two balls after optimal
/// translation (concentric): `|w_N R1^N - w_N R2^N|`.
pub fn ball_asymmetry(params: &ModelParams, r1: f64, r2: f64) -> f64 {
    let n = params.dim as i32;
    (params.omega_n * r1.powi(n) - params.omega_n * r2.powi(n)).abs()
}

/// Both sides of `|N(B_R1) - N(B_R2)| <= 2 C |B_R1 Δ B_R2|` with the explicit
/// constant `C = potential_sup_bound(m)`, `m` the larger volume.
pub fn lipschitz_gap(params: &ModelParams, r1: f64, r2: f64, coeffs: &RieszCoefficients) -> (f64, f64) {
    let n = params.n();
    let e = 2.0 * n - params.alpha;
    let lhs = (coeffs.c_alpha * r1.powf(e) - coeffs.c_alpha * r2.powf(e)).abs();
    let m = params.omega_n * r1.max(r2).powf(n);
    let rhs = 2.0 * potential_sup_bound(params, m) * ball_asymmetry(params, r1, r2);
    (lhs, rhs)
}
