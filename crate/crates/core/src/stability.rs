//! Second variation of the ball `B_R`: the mode eigenvalues
//! `lambda_d(R) = d(d+N-2) - (N-1) + 2 gamma R^(N+1-alpha) (mu_d - alpha I)`,
//! the degree thresholds `d_A`, `d_I`, the neutral radius `g(d)`, the critical
//! radius and mass, and a direct evaluation of the quadratic form on `S²`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ballmodel::Moments;
use crate::coefficients::{mu_ratio, ModelParams, RieszCoefficients};
use crate::error::{Error, Result};
use crate::numerics::{harmonic_space_dim, legendre_unchecked, sample_sphere_into, SampleStream, CHUNK_DRAWS};

/// Hard cap for degree searches.
pub const DEGREE_CAP: usize = 1_000_000;

/// Radii within this fraction of `R_bar` are reported as marginal.
pub const MARGINAL_BAND: f64 = 1e-9;

/// Reports list eigenvalues up to this degree at most.
pub const REPORT_MAX_DEGREE: usize = 64;

/// Relative margin for the monotonicity criterion. At `d = 1` both sides
/// coincide identically (the translation mode), so a rounding-level excess
/// must not count.
const SWITCH_MARGIN: f64 = 1e-10;

fn radial_factor(params: &ModelParams, r: f64) -> f64 {
    2.0 * params.gamma * r.powf(params.n() + 1.0 - params.alpha)
}

fn perimeter_part(params: &ModelParams, d: usize) -> f64 {
    let df = d as f64;
    df * (df + params.n() - 2.0) - (params.n() - 1.0)
}

/// `lambda_d(R)`, the eigenvalue on degree-`d` harmonics without the
/// `R^(N-3) |c_d|²` weight.
pub fn mode_eigenvalue(coeffs: &RieszCoefficients, r: f64, d: usize) -> f64 {
    let params = &coeffs.params;
    perimeter_part(params, d) + radial_factor(params, r) * (coeffs.mu(d) - coeffs.alpha_i())
}

/// Walks `mu_d` from `d = start` upward by the ratio recurrence until `stop`
/// returns true.
fn search_degree(
    coeffs: &RieszCoefficients,
    start: usize,
    mut stop: impl FnMut(usize, f64) -> bool,
) -> Result<usize> {
    let mut mu = coeffs.mu(start);
    for d in start..=DEGREE_CAP {
        if stop(d, mu) {
            return Ok(d);
        }
        mu = if d + 1 < coeffs.mu.len() { coeffs.mu[d + 1] } else { mu * mu_ratio(&coeffs.params, d) };
    }
    Err(Error::CapExceeded { cap: DEGREE_CAP })
}

/// `d_A = min{d >= 2 : mu_d < alpha I}`.
pub fn first_unstable_degree(coeffs: &RieszCoefficients) -> Result<usize> {
    let ai = coeffs.alpha_i();
    search_degree(coeffs, 2, |_, mu| mu < ai)
}

/// Right-hand side of the switch criterion `alpha I > h(d) mu_d`.
fn switch_threshold(params: &ModelParams, d: usize, mu: f64) -> f64 {
    let n = params.n();
    let a = params.alpha;
    let df = d as f64;
    let num = df * df * (n - a + 1.0) + df * (n * n - a * n + a - 1.0) + 0.5 * a * (n - 1.0);
    let den = (n - 1.0 - 0.5 * a + df) * (2.0 * df + n - 1.0);
    num / den * mu
}

/// `d_I`: the smallest `d >= 1` from which `g` increases.
pub fn monotonicity_switch_degree(coeffs: &RieszCoefficients) -> Result<usize> {
    let ai = coeffs.alpha_i();
    let params = coeffs.params;
    search_degree(coeffs, 1, |d, mu| ai > switch_threshold(&params, d, mu) * (1.0 + SWITCH_MARGIN))
}

/// `g(d) = [(d(d+N-2) - (N-1)) / (2 gamma (alpha I - mu_d))]^(1/(N+1-alpha))`,
/// the radius at which mode `d` turns neutral.
pub fn g_function(coeffs: &RieszCoefficients, d: usize) -> Result<f64> {
    let params = &coeffs.params;
    let gap = coeffs.alpha_i() - coeffs.mu(d);
    if !(gap > 0.0) || d < 2 {
        return Err(Error::Domain(format!("g undefined at d = {d}: mu_d >= alpha I")));
    }
    let ratio = perimeter_part(params, d) / (2.0 * params.gamma * gap);
    Ok(ratio.powf(1.0 / (params.n() + 1.0 - params.alpha)))
}

/// Critical radius `R_bar = g(max(d_A, d_I))`, cross-checked against a
/// direct minimum of `g` a few degrees past the switch.
pub fn critical_radius(coeffs: &RieszCoefficients) -> Result<f64> {
    let d_a = first_unstable_degree(coeffs)?;
    let d_i = monotonicity_switch_degree(coeffs)?;
    let r_bar = g_function(coeffs, d_a.max(d_i))?;
    let mut direct = f64::INFINITY;
    for d in d_a..=d_a.max(d_i) + 5 {
        direct = direct.min(g_function(coeffs, d)?);
    }
    if (direct - r_bar).abs() > 1e-10 * r_bar {
        return Err(Error::Domain(format!(
            "min of g ({direct}) disagrees with g at the switch degree ({r_bar})"
        )));
    }
    Ok(r_bar)
}

/// `m_loc = w_N R_bar^N`.
pub fn critical_mass(coeffs: &RieszCoefficients) -> Result<f64> {
    let r_bar = critical_radius(coeffs)?;
    Ok(coeffs.params.omega_n * r_bar.powi(coeffs.params.dim as i32))
}

/// `D*(R) = min{d >= 2 : d(d+N-2) - (N-1) >= 2 gamma R^(N+1-alpha) alpha I}`.
/// Past it every `lambda_d` is positive because `mu_d > 0`.
pub fn truncation_degree(coeffs: &RieszCoefficients, r: f64) -> Result<usize> {
    let params = &coeffs.params;
    let target = radial_factor(params, r) * coeffs.alpha_i();
    let n = params.n();
    // positive root of d² + (N-2) d - (N-1) - target = 0, then fix rounding
    let root = 0.5 * (-(n - 2.0) + ((n - 2.0).powi(2) + 4.0 * (n - 1.0 + target)).sqrt());
    if !root.is_finite() || root > DEGREE_CAP as f64 {
        return Err(Error::CapExceeded { cap: DEGREE_CAP });
    }
    let mut d = (root.floor() as usize).max(2);
    while d > 2 && perimeter_part(params, d - 1) >= target {
        d -= 1;
    }
    while perimeter_part(params, d) < target {
        d += 1;
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    StrictlyStable,
    Unstable,
    Marginal,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::StrictlyStable => "strictly_stable",
            Verdict::Unstable => "unstable",
            Verdict::Marginal => "marginal",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeEigenvalue {
    pub d: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub params: ModelParams,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "d_A")]
    pub d_a: usize,
    #[serde(rename = "d_I")]
    pub d_i: usize,
    #[serde(rename = "R_bar")]
    pub r_bar: f64,
    pub m_loc: f64,
    pub eigenvalues: Vec<ModeEigenvalue>,
    pub verdict: Verdict,
    pub truncation_degree: usize,
}

impl StabilityReport {
    /// Most negative (or smallest) listed eigenvalue.
    pub fn min_eigenvalue(&self) -> Option<ModeEigenvalue> {
        self.eigenvalues.iter().copied().min_by(|a, b| a.lambda.total_cmp(&b.lambda))
    }
}

/// Decides positivity of the second variation on degrees `>= 2` by an
/// explicit scan up to `D*(R)`.
pub fn stability_verdict(coeffs: &RieszCoefficients, r: f64) -> Result<StabilityReport> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("radius must be positive, got {r}")));
    }
    let d_a = first_unstable_degree(coeffs)?;
    let d_i = monotonicity_switch_degree(coeffs)?;
    let r_bar = critical_radius(coeffs)?;
    let d_star = truncation_degree(coeffs, r)?;

    let eigenvalues: Vec<ModeEigenvalue> = (2..=d_star.min(REPORT_MAX_DEGREE))
        .map(|d| ModeEigenvalue { d, lambda: mode_eigenvalue(coeffs, r, d) })
        .collect();
    let mut verdict = if eigenvalues.iter().any(|e| e.lambda <= 0.0) {
        Verdict::Unstable
    } else {
        let tail_negative = (REPORT_MAX_DEGREE + 1..=d_star).any(|d| mode_eigenvalue(coeffs, r, d) <= 0.0);
        if tail_negative { Verdict::Unstable } else { Verdict::StrictlyStable }
    };
    if (r - r_bar).abs() <= MARGINAL_BAND * r_bar {
        verdict = Verdict::Marginal;
    }
    Ok(StabilityReport {
        params: coeffs.params,
        r,
        d_a,
        d_i,
        r_bar,
        m_loc: coeffs.params.omega_n * r_bar.powi(coeffs.params.dim as i32),
        eigenvalues,
        verdict,
        truncation_degree: d_star,
    })
}

/// Lower bounds for the second variation at `B_R` over all admissible
/// perturbations, in two norms: the coefficient `l²` norm and the
/// gradient norm, which weights degree `d` by `d(d+N-2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoercivityBounds {
    pub l2: f64,
    pub h1: f64,
    /// Last degree inspected; beyond it neither minimum can change.
    pub scanned_degree: usize,
}

/// Exact infima of `R^(N-3) lambda_d` and `R^(N-3) lambda_d / (d(d+N-2))`
/// over `d >= 2`. The scan stops once the bound
/// `lambda_d >= d(d+N-2) - (N-1) - 2 gamma R^(N+1-alpha) alpha I`
/// cannot undercut either running minimum.
pub fn coercivity_bounds(coeffs: &RieszCoefficients, r: f64) -> Result<CoercivityBounds> {
    let params = &coeffs.params;
    let weight = r.powf(params.n() - 3.0);
    let c = radial_factor(params, r) * coeffs.alpha_i();
    let mut l2 = f64::INFINITY;
    let mut h1 = f64::INFINITY;
    for d in 2..=DEGREE_CAP {
        let lambda = mode_eigenvalue(coeffs, r, d);
        let grad = (d * (d + params.dim as usize - 2)) as f64;
        l2 = l2.min(weight * lambda);
        h1 = h1.min(weight * lambda / grad);
        let floor = perimeter_part(params, d) - c;
        if weight * floor >= l2 && weight * floor / grad >= h1 {
            return Ok(CoercivityBounds { l2, h1, scanned_degree: d });
        }
    }
    Err(Error::CapExceeded { cap: DEGREE_CAP })
}

/// Finite expansion `sum c_d^i Y_d^i` in a real orthonormal basis of
/// spherical harmonics on `S^{N-1}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HarmonicPerturbation {
    dim: u32,
    entries: BTreeMap<(usize, u64), f64>,
}

impl HarmonicPerturbation {
    pub fn new(dim: u32) -> Self {
        Self { dim, entries: BTreeMap::new() }
    }

    /// Sets `c_d^i`. Degrees 0 and 1 are rejected: constants change the
    /// volume and degree-1 modes are translations.
    pub fn set(&mut self, d: usize, i: u64, c: f64) -> Result<()> {
        if d < 2 {
            return Err(Error::Domain(format!("degree must be >= 2, got {d}")));
        }
        let size = harmonic_space_dim(self.dim, d);
        if i == 0 || i > size {
            return Err(Error::Domain(format!("index {i} outside 1..={size} for degree {d}")));
        }
        self.entries.insert((d, i), c);
        Ok(())
    }

    pub fn with(mut self, d: usize, i: u64, c: f64) -> Result<Self> {
        self.set(d, i, c)?;
        Ok(self)
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn entries(&self) -> impl Iterator<Item = ((usize, u64), f64)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `sum (c_d^i)²`.
    pub fn norm_sq(&self) -> f64 {
        self.entries.values().map(|c| c * c).sum()
    }
}

/// `∂²F(B_R)[phi] = sum R^(N-3) (c_d^i)² lambda_d(R)`, where the
/// coefficients describe `phi(R x)` on the unit sphere.
pub fn quadratic_form_spectral(coeffs: &RieszCoefficients, r: f64, phi: &HarmonicPerturbation) -> Result<f64> {
    if phi.is_empty() {
        return Err(Error::Domain("empty perturbation".into()));
    }
    if phi.dim() != coeffs.params.dim {
        return Err(Error::Domain(format!(
            "perturbation lives in dimension {}, model in {}",
            phi.dim(),
            coeffs.params.dim
        )));
    }
    let weight = r.powf(coeffs.params.n() - 3.0);
    Ok(phi.entries().map(|((d, _), c)| weight * c * c * mode_eigenvalue(coeffs, r, d)).sum())
}

/// Orthonormal zonal harmonic `sqrt((2d+1)/4π) P_d(x_3)` on `S²`.
pub fn zonal_harmonic(d: usize) -> impl Fn(&[f64; 3]) -> f64 + Sync + Send + Copy {
    let norm = ((2 * d + 1) as f64 / (4.0 * PI)).sqrt();
    move |x: &[f64; 3]| norm * legendre_unchecked(3, d, x[2])
}

/// Result of the direct evaluation of the quadratic form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    pub value: f64,
    /// Monte Carlo standard error of the double-layer term.
    pub std_error: f64,
    /// Disagreement of two Richardson extrapolations of the grid terms.
    pub grid_error: f64,
    /// Set when `alpha > 1`, where the pair estimator's variance diverges.
    pub variance_warning: bool,
}

/// Agreement required between successive Richardson extrapolations,
/// relative to the size of the gradient term.
const RICHARDSON_TOL: f64 = 1e-4;

fn sphere_point(theta: f64, phi: f64) -> [f64; 3] {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [st * cp, st * sp, ct]
}

/// Midpoint rule on an `n x 2n` latitude-longitude grid for
/// `∫ |∇φ|²` and `∫ φ²`, tangential derivatives by central differences.
fn grid_terms(phi: &(dyn Fn(&[f64; 3]) -> f64 + Sync), n: usize) -> (f64, f64) {
    let h = PI / n as f64;
    let delta = 0.5 * h;
    let rows: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let theta = (i as f64 + 0.5) * h;
            let st = theta.sin();
            let mut grad = 0.0;
            let mut sq = 0.0;
            for j in 0..2 * n {
                let p = (j as f64 + 0.5) * h;
                let f = phi(&sphere_point(theta, p));
                let ft = (phi(&sphere_point(theta + delta, p)) - phi(&sphere_point(theta - delta, p))) / (2.0 * delta);
                let fp = (phi(&sphere_point(theta, p + delta)) - phi(&sphere_point(theta, p - delta))) / (2.0 * delta * st);
                grad += (ft * ft + fp * fp) * st;
                sq += f * f * st;
            }
            (grad * h * h, sq * h * h)
        })
        .collect();
    rows.into_iter().fold((0.0, 0.0), |acc, (g, s)| (acc.0 + g, acc.1 + s))
}

/// Direct evaluation of the second variation of `B_R` in `R³` for a
/// perturbation given as a function on the unit sphere:
///
/// ```text
/// T1 = R^(N-3) ∫ (|∇φ|² - (N-1) φ²)
/// T2 = 2 gamma R^(2N-2-alpha) ∫∫ φ(x) φ(y) |x-y|^(-alpha)
/// T3 = -2 gamma R^(2N-2-alpha) alpha I ∫ φ²
/// ```
///
/// `T1` and `T3` come from grids of `grid`, `2 grid` and `4 grid`
/// latitudes with Richardson extrapolation, `T2` from `pairs` uniform
/// pairs on the sphere.
pub fn quadratic_form_oracle(
    coeffs: &RieszCoefficients,
    r: f64,
    phi: &(dyn Fn(&[f64; 3]) -> f64 + Sync),
    grid: usize,
    stream: SampleStream,
    pairs: usize,
) -> Result<OracleEstimate> {
    let params = &coeffs.params;
    if params.dim != 3 {
        return Err(Error::Domain(format!("oracle is implemented for N = 3 only, got N = {}", params.dim)));
    }
    if grid < 4 || pairs < 2 {
        return Err(Error::Domain(format!("need grid >= 4 and pairs >= 2, got {grid} and {pairs}")));
    }
    let n = params.n();
    let coarse = grid_terms(phi, grid);
    let mid = grid_terms(phi, 2 * grid);
    let fine = grid_terms(phi, 4 * grid);
    let extrapolate = |a: (f64, f64), b: (f64, f64)| (b.0 + (b.0 - a.0) / 3.0, b.1 + (b.1 - a.1) / 3.0);
    let first = extrapolate(coarse, mid);
    let second = extrapolate(mid, fine);
    let grad_err = (first.0 - second.0).abs();
    let sq_err = (first.1 - second.1).abs();
    let scale = second.0.abs() + (n - 1.0) * second.1.abs();
    if grad_err + (n - 1.0) * sq_err > RICHARDSON_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::GridResolution(format!(
            "Richardson estimates differ by {:e} (gradient) and {:e} (L2)",
            grad_err, sq_err
        )));
    }
    let (grad, sq) = second;

    let alpha = params.alpha;
    let chunks = pairs.div_ceil(CHUNK_DRAWS);
    let moments = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream.chunk_rng(c as u64);
            let len = CHUNK_DRAWS.min(pairs - c * CHUNK_DRAWS);
            let mut x = [0.0; 3];
            let mut y = [0.0; 3];
            let mut m = Moments::default();
            for _ in 0..len {
                sample_sphere_into(&mut rng, &mut x);
                sample_sphere_into(&mut rng, &mut y);
                let d2: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
                m.push(if d2 > 0.0 { phi(&x) * phi(&y) * d2.powf(-0.5 * alpha) } else { 0.0 });
            }
            m
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Moments::default(), Moments::merge);
    let area = params.sphere_area();
    let double_layer = area * area * moments.mean;
    let double_layer_err = area * area * moments.std_error();

    let nonlocal = params.gamma * 2.0 * r.powf(2.0 * n - 2.0 - alpha);
    let t1 = r.powf(n - 3.0) * (grad - (n - 1.0) * sq);
    let t2 = nonlocal * double_layer;
    let t3 = -nonlocal * coeffs.alpha_i() * sq;
    Ok(OracleEstimate {
        value: t1 + t2 + t3,
        std_error: nonlocal * double_layer_err,
        grid_error: r.powf(n - 3.0) * (grad_err + (n - 1.0) * sq_err) + nonlocal * coeffs.alpha_i() * sq_err,
        variance_warning: alpha > 1.0,
    })
}
