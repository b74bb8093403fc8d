//! Funk-Hecke eigenvalues `mu_d` of the Riesz kernel on the unit sphere, the
//! confinement coefficient `I = ∫_{B_1} <x-y, x> / |x-y|^(alpha+2) dy` and the
//! unit-ball self-energy `c_alpha`.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::ballmodel::ball_potential;
use crate::error::{Error, Result};
use crate::numerics::{
    integrate_1d, integrate_nodes, legendre_unchecked, log_gamma_unchecked, unit_ball_volume,
    Node, QuadratureSpec,
};

/// Space dimension, Riesz exponent and coupling of the functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(rename = "N")]
    pub dim: u32,
    pub alpha: f64,
    pub gamma: f64,
    /// Volume of the unit ball in `R^N`.
    #[serde(rename = "omega_N")]
    pub omega_n: f64,
    /// Volume of the unit ball in `R^(N-1)`.
    #[serde(rename = "omega_Nm1")]
    pub omega_nm1: f64,
}

impl ModelParams {
    /// Validates `N >= 2`, `0 < alpha < N - 1` and `gamma > 0`.
    pub fn new(dim: u32, alpha: f64, gamma: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidParams(format!("dimension must be >= 2, got {dim}")));
        }
        let upper = (dim - 1) as f64;
        if !(alpha > 0.0 && alpha < upper) {
            return Err(Error::InvalidParams(format!(
                "alpha must lie in (0, {upper}) for dimension {dim}, got {alpha}"
            )));
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParams(format!("gamma must be positive, got {gamma}")));
        }
        Ok(Self {
            dim,
            alpha,
            gamma,
            omega_n: unit_ball_volume(dim),
            omega_nm1: unit_ball_volume(dim - 1),
        })
    }

    pub fn n(&self) -> f64 {
        self.dim as f64
    }

    /// `(N - 1) * omega_{N-1}`, the area of `S^{N-2}`.
    pub fn equator_area(&self) -> f64 {
        (self.n() - 1.0) * self.omega_nm1
    }

    /// `N * omega_N`, the area of `S^{N-1}`.
    pub fn sphere_area(&self) -> f64 {
        self.n() * self.omega_n
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.dim, self.alpha, gamma)
    }
}

/// Closed form for `mu_d`, assembled in log space:
///
/// ```text
/// mu_d = 2^(N-1-a) (N-1) w_{N-1} / 2 * prod_{i<d} (a/2 + i)
///        * Γ((N-1-a)/2) Γ((N-1)/2) / Γ(N-1-a/2+d)
/// ```
pub fn mu_closed_form(params: &ModelParams, d: usize) -> f64 {
    let n = params.n();
    let a = params.alpha;
    let df = d as f64;
    let log_prod = if d == 0 {
        0.0
    } else {
        log_gamma_unchecked(0.5 * a + df) - log_gamma_unchecked(0.5 * a)
    };
    let log_mu = (n - 1.0 - a) * LN_2 + (0.5 * params.equator_area()).ln()
        + log_prod
        + log_gamma_unchecked(0.5 * (n - 1.0 - a))
        + log_gamma_unchecked(0.5 * (n - 1.0))
        - log_gamma_unchecked(n - 1.0 - 0.5 * a + df);
    let mu = log_mu.exp();
    debug_assert!(mu.is_finite());
    mu
}

/// Ratio `mu_{d+1} / mu_d = (a/2 + d) / (N - 1 - a/2 + d)`.
pub fn mu_ratio(params: &ModelParams, d: usize) -> f64 {
    let df = d as f64;
    (0.5 * params.alpha + df) / (params.n() - 1.0 - 0.5 * params.alpha + df)
}

/// `mu_0 ..= mu_{d_max}`: closed form for `mu_0`, recurrence afterwards.
pub fn mu_sequence(params: &ModelParams, d_max: usize) -> Vec<f64> {
    let mut mu = Vec::with_capacity(d_max + 1);
    mu.push(mu_closed_form(params, 0));
    for d in 0..d_max {
        let next = mu[d] * mu_ratio(params, d);
        mu.push(next);
    }
    mu
}

/// Funk-Hecke integral for `mu_d` evaluated by quadrature.
///
/// With `1 - t = u²` the integral becomes
/// `2^(1-a/2) ∫_0^√2 u^(N-2-a) (2-u²)^((N-3)/2) P_{N,d}(1-u²) du`,
/// whose remaining endpoint singularities are left to tanh-sinh.
pub fn mu_quadrature_oracle(params: &ModelParams, d: usize) -> Result<f64> {
    let n = params.n();
    let a = params.alpha;
    let upper = 2f64.sqrt();
    let p_u = n - 2.0 - a;
    let p_w = 0.5 * (n - 3.0);
    let scale = params.equator_area() * 2f64.powf(1.0 - 0.5 * a);
    let spec = QuadratureSpec::tanh_sinh(1e-13);
    let integral = integrate_nodes(
        |node: Node| {
            let u = node.from_a;
            // 2 - u² = (√2 - u)(√2 + u)
            let w = node.from_b * (upper + u);
            let t = (1.0 - u * u).clamp(-1.0, 1.0);
            u.powf(p_u) * w.powf(p_w) * legendre_unchecked(params.dim, d, t)
        },
        0.0,
        upper,
        &spec,
    )?;
    Ok(scale * integral)
}

/// `I^{N,alpha}` by nested quadrature of the coarea representation
///
/// ```text
/// I = (N-1) w_{N-1} ∫_0^2 s ∫_s^{√(2s)} (r² - s²)^((N-3)/2) r^(-a-1) dr ds,   s = 1 - t.
/// ```
///
/// The inner integral is taken in `w = exp(-acosh(r / s))`, which maps it to
///
/// ```text
/// s^(N-3-a) 2^(a+3-N) ∫_{w0}^1 (1-w²)^(N-2) (1+w²)^(-a-1) w^(a+2-N) dw,
/// w0 = √(s/2) / (1 + √(1 - s/2)),
/// ```
///
/// a bounded interval whose only irregularity sits at the endpoints. Both
/// levels use tanh-sinh; the inner tolerance is a hundredth of the outer.
/// The outer range is split at `s = 1`.
pub fn i_coefficient(params: &ModelParams, spec: &QuadratureSpec) -> Result<f64> {
    let n = params.n();
    let a = params.alpha;
    let p_w = a + 2.0 - n;
    // outer weight s^(q-1); as alpha approaches N - 1 it nears 1/s
    let q = n - 1.0 - a;
    let outer = QuadratureSpec::tanh_sinh(spec.abs_tol);
    let inner = outer.with_tol(spec.abs_tol / 100.0);
    let inner_err = std::cell::Cell::new(None);

    // inner integral at s as (value, log scale), given half_gap = 1 - s/2
    let inner_at = |s: f64, half_gap: f64| -> (f64, f64) {
        let w0 = (0.5 * s).sqrt() / (1.0 + half_gap.sqrt());
        // The inner integrand peaks at w0 when p_w < 0; normalize by that
        // peak so the inner tolerance acts as a relative one.
        let log_peak = if p_w < 0.0 { p_w * w0.ln() } else { 0.0 };
        let value = integrate_nodes(
            |inode: Node| {
                let w = w0 + inode.from_a;
                let one_minus_w2 = inode.from_b * (1.0 + w);
                let mut log = p_w * w.ln() - (a + 1.0) * (w * w).ln_1p() - log_peak;
                if params.dim > 2 {
                    log += (n - 2.0) * one_minus_w2.ln();
                }
                log.exp()
            },
            w0,
            1.0,
            &inner,
        );
        match value {
            Ok(v) => (v, log_peak),
            Err(e) => {
                inner_err.set(Some(e));
                (0.0, 0.0)
            }
        }
    };
    let weighted = |s: f64, half_gap: f64| -> f64 {
        if !(s > 0.0) {
            return 0.0;
        }
        let (v, log_scale) = inner_at(s, half_gap);
        v * ((q - 1.0) * s.ln() + log_scale).exp()
    };

    // For q < 1 the limit f(0) is finite (p_w > 0) and carries the singular
    // part: ∫_0^1 s^(q-1) f = f(0) / q + ∫_0^1 s^(q-1) (f - f(0)).
    let f0 = if q < 1.0 {
        integrate_nodes(
            |node: Node| {
                let w = node.from_a;
                let mut log = p_w * w.ln() - (a + 1.0) * (w * w).ln_1p();
                if params.dim > 2 {
                    log += (n - 2.0) * (node.from_b * (1.0 + w)).ln();
                }
                log.exp()
            },
            0.0,
            1.0,
            &inner,
        )?
    } else {
        0.0
    };
    let near = integrate_nodes(
        |node: Node| {
            let s = node.from_a;
            if q < 1.0 && s > 0.0 {
                // p_w > 0 here, so the inner value is unscaled
                s.powf(q - 1.0) * (inner_at(s, 1.0 - 0.5 * s).0 - f0)
            } else {
                weighted(s, 1.0 - 0.5 * s)
            }
        },
        0.0,
        1.0,
        &outer,
    )? + f0 / q;
    let far = integrate_nodes(
        |node: Node| weighted(node.x, 0.5 * node.from_b),
        1.0,
        2.0,
        &outer,
    )?;
    if let Some(e) = inner_err.into_inner() {
        return Err(e);
    }
    Ok(params.equator_area() * 2f64.powf(a + 3.0 - n) * (near + far))
}

/// Closed form of `I^{3,alpha} = 2 pi 2^(2-a) / ((4-a)(2-a))`.
pub fn i_coefficient_closed_n3(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 2), got {alpha}")));
    }
    Ok(2.0 * PI * 2f64.powf(2.0 - alpha) / ((4.0 - alpha) * (2.0 - alpha)))
}

/// `c_alpha = ∫_{B_1} ∫_{B_1} |x-y|^(-alpha)`, reduced to
/// `∫_0^1 v_{B_1}(s) N w_N s^(N-1) ds` with the radial potential of the ball.
pub fn ball_self_energy(params: &ModelParams, spec: &QuadratureSpec) -> Result<f64> {
    let outer = QuadratureSpec::tanh_sinh(spec.abs_tol);
    let inner = spec.with_tol(spec.abs_tol / 100.0);
    let area = params.sphere_area();
    let n = params.n();
    let inner_err = std::cell::Cell::new(None);
    let value = integrate_1d(
        |s| match ball_potential(params, 1.0, s, &inner) {
            Ok(v) => v * area * s.powf(n - 1.0),
            Err(e) => {
                inner_err.set(Some(e));
                0.0
            }
        },
        0.0,
        1.0,
        &outer,
    )?;
    if let Some(e) = inner_err.into_inner() {
        return Err(e);
    }
    Ok(value)
}

/// Default number of tabulated Funk-Hecke eigenvalues.
pub const DEFAULT_D_MAX: usize = 64;

/// Immutable table of the scalars the spectral analysis needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RieszCoefficients {
    pub params: ModelParams,
    pub mu: Vec<f64>,
    pub i_coeff: f64,
    pub c_alpha: f64,
    pub d_max: usize,
}

impl RieszCoefficients {
    /// Builds the table with `I` and `c_alpha` from quadrature.
    pub fn new(params: ModelParams, d_max: usize, spec: &QuadratureSpec) -> Result<Self> {
        let d_max = d_max.max(1);
        let mu = mu_sequence(&params, d_max);
        let i_coeff = i_coefficient(&params, spec)?;
        let c_alpha = ball_self_energy(&params, spec)?;
        Ok(Self { params, mu, i_coeff, c_alpha, d_max })
    }

    /// Table with default degree range and tolerance `1e-12`.
    pub fn compute(params: ModelParams) -> Result<Self> {
        Self::new(params, DEFAULT_D_MAX, &QuadratureSpec::tanh_sinh(1e-12))
    }

    /// `mu_d`; degrees beyond the table use the log-space closed form.
    pub fn mu(&self, d: usize) -> f64 {
        match self.mu.get(d) {
            Some(&v) => v,
            None => mu_closed_form(&self.params, d),
        }
    }

    /// `alpha * I`, the level `mu_d` is compared against.
    pub fn alpha_i(&self) -> f64 {
        self.params.alpha * self.i_coeff
    }

    /// Checks positivity, strict decrease, the translation zero mode and the
    /// lower bound `c_alpha >= w_N² 2^(-alpha)`.
    pub fn check_invariants(&self) -> Result<()> {
        for (d, pair) in self.mu.windows(2).enumerate() {
            if !(pair[0] > 0.0 && pair[1] > 0.0 && pair[1] < pair[0]) {
                return Err(Error::Domain(format!("mu not strictly decreasing at d = {d}")));
            }
        }
        let mu1 = self.mu[1];
        if (mu1 - self.alpha_i()).abs() > 1e-8 * mu1 {
            return Err(Error::Domain(format!(
                "translation mode violated: mu_1 = {mu1}, alpha I = {}",
                self.alpha_i()
            )));
        }
        let floor = self.params.omega_n.powi(2) * 2f64.powf(-self.params.alpha);
        if self.c_alpha < floor {
            return Err(Error::Domain(format!("c_alpha = {} below {floor}", self.c_alpha)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: u32, a: f64) -> ModelParams {
        ModelParams::new(n, a, 1.0).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(1, 0.5, 1.0).is_err());
        assert!(ModelParams::new(3, 2.0, 1.0).is_err());
        assert!(ModelParams::new(3, 0.0, 1.0).is_err());
        assert!(ModelParams::new(3, 1.0, 0.0).is_err());
        let e = ModelParams::new(3, 2.5, 1.0).unwrap_err().to_string();
        assert!(e.contains("(0, 2)"), "{e}");
        let q = p(3, 1.0);
        assert!((q.omega_n - 4.0 * PI / 3.0).abs() < 1e-15);
        assert!((q.omega_nm1 - PI).abs() < 1e-15);
    }

    #[test]
    fn mu_n3_alpha1() {
        let q = p(3, 1.0);
        assert!((mu_closed_form(&q, 0) / (4.0 * PI) - 1.0).abs() < 1e-13);
        assert!((mu_closed_form(&q, 1) / (4.0 * PI / 3.0) - 1.0).abs() < 1e-13);
        assert!((mu_closed_form(&q, 2) / (4.0 * PI / 5.0) - 1.0).abs() < 1e-13);
        let seq = mu_sequence(&q, 5);
        assert_eq!(seq[0], mu_closed_form(&q, 0));
        assert!((seq[2] / seq[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn recurrence_matches_closed_form_far_out() {
        let q = p(4, 1.5);
        let seq = mu_sequence(&q, 50);
        assert!((seq[50] / mu_closed_form(&q, 50) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn mu_survives_huge_degree() {
        let q = p(3, 1.0);
        let v = mu_closed_form(&q, 1_000_000);
        assert!(v > 0.0 && v.is_finite() && v < 1e-5);
    }

    #[test]
    fn oracle_examples() {
        let q = p(3, 1.0);
        assert!((mu_quadrature_oracle(&q, 0).unwrap() / (4.0 * PI) - 1.0).abs() < 1e-6);
        assert!((mu_quadrature_oracle(&q, 1).unwrap() / (4.0 * PI / 3.0) - 1.0).abs() < 1e-6);
        let q = p(4, 0.5);
        let rel = mu_quadrature_oracle(&q, 3).unwrap() / mu_closed_form(&q, 3) - 1.0;
        assert!(rel.abs() < 1e-6, "{rel}");
    }

    #[test]
    fn closed_n3_examples() {
        assert!((i_coefficient_closed_n3(1.0).unwrap() - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((i_coefficient_closed_n3(1.5).unwrap() - 7.108_612_7).abs() < 1e-6);
        assert!((i_coefficient_closed_n3(0.5).unwrap() - 3.385_053_67).abs() < 1e-6);
        assert!((i_coefficient_closed_n3(1e-12).unwrap() - PI).abs() < 1e-9);
        assert!(i_coefficient_closed_n3(2.0).is_err());
        assert!(i_coefficient_closed_n3(0.0).is_err());
    }

    #[test]
    fn i_coefficient_n3() {
        let spec = QuadratureSpec::tanh_sinh(1e-12);
        for a in [0.5, 1.0] {
            let v = i_coefficient(&p(3, a), &spec).unwrap();
            let exact = i_coefficient_closed_n3(a).unwrap();
            assert!((v / exact - 1.0).abs() < 1e-9, "alpha {a}: {v} vs {exact}");
        }
    }

    #[test]
    fn i_coefficient_near_upper_alpha() {
        let spec = QuadratureSpec::tanh_sinh(1e-12);
        let v = i_coefficient(&p(3, 1.99), &spec).unwrap();
        assert!((v / i_coefficient_closed_n3(1.99).unwrap() - 1.0).abs() < 1e-12);
        for (n, a) in [(2, 0.99), (4, 2.995), (6, 0.1)] {
            let q = p(n, a);
            let mu1 = mu_closed_form(&q, 1);
            assert!((mu1 / (a * i_coefficient(&q, &spec).unwrap()) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_mode_identity_n2_n4() {
        let spec = QuadratureSpec::tanh_sinh(1e-12);
        for (n, a) in [(2, 0.5), (4, 1.0), (4, 2.5)] {
            let q = p(n, a);
            let i = i_coefficient(&q, &spec).unwrap();
            let mu1 = mu_closed_form(&q, 1);
            assert!((mu1 - a * i).abs() <= 1e-7 * mu1, "N={n} a={a}: {mu1} vs {}", a * i);
        }
    }

    #[test]
    fn self_energy_coulomb() {
        // ∫∫ |x-y|^-1 over the unit ball is twice the electrostatic energy (3/5) Q²:
        // (6/5) (4π/3)² = 32π²/15.
        let c = ball_self_energy(&p(3, 1.0), &QuadratureSpec::tanh_sinh(1e-12)).unwrap();
        assert!((c / (32.0 * PI * PI / 15.0) - 1.0).abs() < 1e-9, "{c}");
    }

    #[test]
    fn coefficients_table_invariants() {
        let c = RieszCoefficients::compute(p(3, 1.0)).unwrap();
        c.check_invariants().unwrap();
        assert_eq!(c.mu(10), c.mu[10]);
        assert!((c.mu(1000) / mu_closed_form(&c.params, 1000) - 1.0).abs() < 1e-15);
    }
}
