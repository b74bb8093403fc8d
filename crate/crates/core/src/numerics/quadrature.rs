use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Quadrature rule family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    GaussLegendre,
    /// Double-exponential rule; handles algebraic endpoint singularities.
    TanhSinh,
}

/// Settings for [`integrate_1d`].
///
/// For Gauss-Legendre, `node_count` is the initial rule size and each
/// refinement doubles it. For tanh-sinh, the initial step is
/// `4 / node_count` and each refinement halves it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub node_count: usize,
    pub scheme: Scheme,
    pub abs_tol: f64,
    pub max_refinements: u32,
}

impl QuadratureSpec {
    pub fn new(node_count: usize, scheme: Scheme, abs_tol: f64, max_refinements: u32) -> Result<Self> {
        if node_count < 2 {
            return Err(Error::Domain(format!("node_count must be >= 2, got {node_count}")));
        }
        if !(abs_tol >= 1e-15) || !abs_tol.is_finite() {
            return Err(Error::Domain(format!("abs_tol must be >= 1e-15, got {abs_tol}")));
        }
        if max_refinements == 0 {
            return Err(Error::Domain("max_refinements must be positive".into()));
        }
        Ok(Self { node_count, scheme, abs_tol, max_refinements })
    }

    pub fn gauss_legendre(abs_tol: f64) -> Self {
        Self { node_count: 16, scheme: Scheme::GaussLegendre, abs_tol, max_refinements: 8 }
    }

    pub fn tanh_sinh(abs_tol: f64) -> Self {
        Self { node_count: 8, scheme: Scheme::TanhSinh, abs_tol, max_refinements: 12 }
    }

    pub fn with_tol(self, abs_tol: f64) -> Self {
        Self { abs_tol: abs_tol.max(1e-15), ..self }
    }

    pub fn with_scheme(self, scheme: Scheme) -> Self {
        match scheme {
            Scheme::GaussLegendre => Self::gauss_legendre(self.abs_tol),
            Scheme::TanhSinh => Self::tanh_sinh(self.abs_tol),
        }
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self::tanh_sinh(1e-12)
    }
}

/// Abscissa handed to endpoint-aware integrands.
///
/// `from_a` and `from_b` are the exact distances to the interval ends, which
/// are not recoverable from `x` once they fall below `ulp(x)`.
#[derive(Debug, Clone, Copy)]
pub struct Node {
    pub x: f64,
    pub from_a: f64,
    pub from_b: f64,
}

/// Integrates `f` over `[a, b]`.
///
/// Refinement continues until two successive estimates differ by at most
/// `spec.abs_tol`; otherwise [`Error::NonConvergence`] is returned after
/// `spec.max_refinements` refinements. Nodes that round onto an endpoint
/// are skipped so endpoint singularities are never evaluated.
pub fn integrate_1d<F>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    integrate_nodes(
        |node: Node| {
            if node.x <= a || node.x >= b {
                0.0
            } else {
                f(node.x)
            }
        },
        a,
        b,
        spec,
    )
}

/// Like [`integrate_1d`] but the integrand sees each node's distance to
/// both endpoints.
pub fn integrate_nodes<F>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(Node) -> f64,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("integration limits must be finite: [{a}, {b}]")));
    }
    if a > b {
        return Err(Error::Domain(format!("integration requires a <= b, got [{a}, {b}]")));
    }
    if a == b {
        return Ok(0.0);
    }
    match spec.scheme {
        Scheme::GaussLegendre => gauss_legendre(&f, a, b, spec),
        Scheme::TanhSinh => tanh_sinh(&f, a, b, spec),
    }
}

fn converged(diff: f64, tol: f64) -> bool {
    diff <= tol
}

fn gauss_legendre<F: Fn(Node) -> f64>(f: &F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    let half = 0.5 * (b - a);
    let eval = |n: usize| -> f64 {
        let rule = gl_rule(n);
        let mut sum = 0.0;
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let node = if x < 0.0 {
                let from_a = half * (1.0 + x);
                Node { x: a + from_a, from_a, from_b: half * (1.0 - x) }
            } else {
                let from_b = half * (1.0 - x);
                Node { x: b - from_b, from_a: half * (1.0 + x), from_b }
            };
            sum += w * f(node);
        }
        sum * half
    };
    let mut n = spec.node_count;
    let mut prev = eval(n);
    let mut diff = f64::INFINITY;
    for _ in 0..spec.max_refinements {
        n *= 2;
        let cur = eval(n);
        diff = (cur - prev).abs();
        if converged(diff, spec.abs_tol) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::NonConvergence { diff, tol: spec.abs_tol })
}

struct GlRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

fn gl_rule(n: usize) -> Arc<GlRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GlRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().expect("rule cache poisoned").get(&n) {
        return Arc::clone(rule);
    }
    let rule = Arc::new(compute_gl_rule(n));
    cache
        .lock()
        .expect("rule cache poisoned")
        .entry(n)
        .or_insert_with(|| Arc::clone(&rule))
        .clone()
}

/// Newton iteration on `P_n` from Tricomi-style initial guesses.
fn compute_gl_rule(n: usize) -> GlRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    GlRule { nodes, weights }
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    (p1, nf * (x * p1 - p0) / (x * x - 1.0))
}

// Stop once the distance to the endpoint drops below this fraction of the half-width.
const TS_MIN_OFFSET: f64 = 1e-300;

fn tanh_sinh<F: Fn(Node) -> f64>(f: &F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    let half = 0.5 * (b - a);
    let h0 = 4.0 / spec.node_count as f64;

    // Contribution of the symmetric node pair at t and -t (or the centre for t = 0).
    let pair = |t: f64| -> Option<f64> {
        let u = FRAC_PI_2 * t.sinh();
        let cu = u.cosh();
        let offset = half * (-u).exp() / cu;
        if !(offset > TS_MIN_OFFSET * half) {
            return None;
        }
        let w = half * FRAC_PI_2 * t.cosh() / (cu * cu);
        if t == 0.0 {
            return Some(w * f(Node { x: a + half, from_a: half, from_b: half }));
        }
        let far = 2.0 * half - offset;
        let right = f(Node { x: b - offset, from_a: far, from_b: offset });
        let left = f(Node { x: a + offset, from_a: offset, from_b: far });
        Some(w * (left + right))
    };

    let mut sum = pair(0.0).unwrap_or(0.0);
    let mut k = 1;
    while let Some(v) = pair(k as f64 * h0) {
        sum += v;
        k += 1;
    }
    let mut h = h0;
    let mut prev = sum * h;
    let mut diff = f64::INFINITY;
    for level in 1..=spec.max_refinements {
        h *= 0.5;
        let mut k = 1u64;
        while let Some(v) = pair(k as f64 * h) {
            sum += v;
            k += 2;
        }
        let cur = sum * h;
        diff = (cur - prev).abs();
        if level >= 2 && converged(diff, spec.abs_tol) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::NonConvergence { diff, tol: spec.abs_tol })
}
