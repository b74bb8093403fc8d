//! Ground-state landscape of ball clusters at infinite mutual distance:
//! `f_k(m) = min { sum e(m_i) : m_1 + ... + m_k = m, m_i >= 0 }` with `e` the
//! single-ball energy, the breakpoints where the optimal ball count grows,
//! and the explicit upper bound for the global-minimality threshold.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ballmodel::single_ball_energy;
use crate::coefficients::{ModelParams, RieszCoefficients};
use crate::error::{Error, Result};
use crate::stability::{critical_radius, first_unstable_degree, monotonicity_switch_degree};

/// Masses below this fraction of the total are treated as absent balls.
pub const SNAP_FRACTION: f64 = 1e-12;

/// Resolution of the brute-force simplex grid (step `m / BRUTE_STEPS`).
pub const BRUTE_STEPS: usize = 400;

/// Bracketing grid density for breakpoints, in points per unit mass.
pub const BRACKET_DENSITY: f64 = 64.0;

/// Relative bisection tolerance for breakpoints.
pub const BREAKPOINT_TOL: f64 = 1e-8;

/// Fixed-volume rescaling: minimizing at volume `m` is minimizing at volume
/// `w_N` with `gamma' = gamma (m / w_N)^((N - alpha + 1) / N)`.
pub fn rescale_to_unit_volume(params: &ModelParams, m: f64) -> Result<ModelParams> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::Domain(format!("mass must be positive, got {m}")));
    }
    let n = params.n();
    params.with_gamma(params.gamma * (m / params.omega_n).powf((n - params.alpha + 1.0) / n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionMethod {
    EqualSplitScan,
    LocalSearch,
    BruteGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionResult {
    pub m: f64,
    pub k: usize,
    /// Ball masses in decreasing order, zeros for absent balls.
    pub masses: Vec<f64>,
    pub value: f64,
    pub method: PartitionMethod,
}

impl PartitionResult {
    pub fn ball_count(&self) -> usize {
        self.masses.iter().filter(|&&x| x > 0.0).count()
    }
}

/// `e(x) = a x^p + b x^q` and its derivative.
struct BallEnergy<'a> {
    coeffs: &'a RieszCoefficients,
    a: f64,
    b: f64,
    p: f64,
    q: f64,
}

impl<'a> BallEnergy<'a> {
    fn new(coeffs: &'a RieszCoefficients) -> Self {
        let params = &coeffs.params;
        let n = params.n();
        let q = (2.0 * n - params.alpha) / n;
        Self {
            coeffs,
            a: n * params.omega_n.powf(1.0 / n),
            b: params.gamma * coeffs.c_alpha * params.omega_n.powf(-q),
            p: (n - 1.0) / n,
            q,
        }
    }

    fn value(&self, x: f64) -> f64 {
        single_ball_energy(&self.coeffs.params, x, self.coeffs).total
    }

    fn slope(&self, x: f64) -> f64 {
        self.a * self.p * x.powf(self.p - 1.0) + self.b * self.q * x.powf(self.q - 1.0)
    }

    fn total(&self, xs: &[f64]) -> f64 {
        xs.iter().map(|&x| self.value(x)).sum()
    }
}

/// Euclidean projection onto `{x >= 0, sum x = m}`.
fn project_simplex(v: &[f64], m: f64) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        acc += ui;
        let t = (acc - m) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Projected gradient descent with Armijo backtracking over the support of
/// `start`. Balls never appear from nothing: `e'(0) = +inf`.
fn local_search(e: &BallEnergy, m: f64, start: &[f64]) -> Vec<f64> {
    let mut x: Vec<f64> = start.iter().copied().filter(|&v| v > SNAP_FRACTION * m).collect();
    let mut fx = e.total(&x);
    let mut step = m;
    for _ in 0..2000 {
        let g: Vec<f64> = x.iter().map(|&v| e.slope(v)).collect();
        let mut moved = false;
        while step > 1e-18 * m {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(v, gi)| v - step * gi).collect();
            let y = project_simplex(&trial, m);
            let decrease: f64 = g.iter().zip(x.iter().zip(&y)).map(|(gi, (a, b))| gi * (a - b)).sum();
            let fy = e.total(&y);
            if decrease > 0.0 && fy <= fx - 1e-4 * decrease {
                let shift = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                x = y.into_iter().filter(|&v| v > SNAP_FRACTION * m).collect();
                fx = e.total(&x);
                moved = shift > 1e-15 * m;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    x
}

fn finish(m: f64, k: usize, mut masses: Vec<f64>, e: &BallEnergy, method: PartitionMethod) -> PartitionResult {
    for x in masses.iter_mut() {
        if *x < SNAP_FRACTION * m {
            *x = 0.0;
        }
    }
    masses.resize(k, 0.0);
    masses.sort_by(|a, b| b.total_cmp(a));
    let value = e.total(&masses);
    PartitionResult { m, k, masses, value, method }
}

fn equal_split(m: f64, j: usize) -> Vec<f64> {
    vec![m / j as f64; j]
}

fn search_partition(coeffs: &RieszCoefficients, m: f64, k: usize, brute: bool) -> Result<PartitionResult> {
    if !(m > 0.0) || !m.is_finite() || k == 0 {
        return Err(Error::Domain(format!("need m > 0 and k >= 1, got m = {m}, k = {k}")));
    }
    let e = BallEnergy::new(coeffs);
    let mut best = finish(m, k, vec![m], &e, PartitionMethod::EqualSplitScan);
    let mut consider = |masses: Vec<f64>, method: PartitionMethod| {
        let cand = finish(m, k, masses, &e, method);
        if cand.value < best.value * (1.0 - 1e-15) {
            best = cand;
        }
    };
    for j in 2..=k {
        consider(equal_split(m, j), PartitionMethod::EqualSplitScan);
    }
    for j in 1..=k {
        let mut starts = vec![equal_split(m, j)];
        if j >= 2 {
            for scale in [0.5, 1.5] {
                let first = scale * m / j as f64;
                let mut s = vec![(m - first) / (j - 1) as f64; j - 1];
                s.push(first);
                starts.push(s);
            }
        }
        for s in starts {
            consider(local_search(&e, m, &s), PartitionMethod::LocalSearch);
        }
    }
    if brute && k >= 2 && k <= 3 {
        let (grid_best, _) = brute_grid(&e, m, k);
        consider(local_search(&e, m, &grid_best), PartitionMethod::BruteGrid);
    }
    Ok(best)
}

/// Minimum of `sum e` over the simplex grid with step `m / BRUTE_STEPS`,
/// `k <= 3`, masses taken in decreasing order.
fn brute_grid(e: &BallEnergy, m: f64, k: usize) -> (Vec<f64>, f64) {
    let h = m / BRUTE_STEPS as f64;
    let mut best = (vec![m], e.value(m));
    let mut keep = |xs: Vec<f64>| {
        let v = e.total(&xs);
        if v < best.1 {
            best = (xs, v);
        }
    };
    for i in 0..=BRUTE_STEPS {
        if k == 2 {
            if 2 * i <= BRUTE_STEPS {
                keep(vec![(BRUTE_STEPS - i) as f64 * h, i as f64 * h]);
            }
            continue;
        }
        for j in 0..=i {
            let rest = BRUTE_STEPS as isize - i as isize - j as isize;
            if rest >= i as isize {
                keep(vec![rest as f64 * h, i as f64 * h, j as f64 * h]);
            }
        }
    }
    best
}

/// `f_k(m)`: best of the equal splits, projected-gradient refinements from
/// several starts and, for `k <= 3`, a polished brute simplex grid.
pub fn optimal_partition(coeffs: &RieszCoefficients, m: f64, k: usize) -> Result<PartitionResult> {
    search_partition(coeffs, m, k, true)
}

/// Brute simplex-grid minimum (step `m / 400`, no polish) for `k` in 2..=3.
pub fn brute_grid_partition(coeffs: &RieszCoefficients, m: f64, k: usize) -> Result<PartitionResult> {
    if !(2..=3).contains(&k) || !(m > 0.0) {
        return Err(Error::Domain(format!("brute grid needs k in 2..=3 and m > 0, got k = {k}, m = {m}")));
    }
    let e = BallEnergy::new(coeffs);
    let (masses, _) = brute_grid(&e, m, k);
    Ok(finish(m, k, masses, &e, PartitionMethod::BruteGrid))
}

fn splits_below(coeffs: &RieszCoefficients, m: f64, j: usize) -> Result<bool> {
    let fj = search_partition(coeffs, m, j, false)?.value;
    let fnext = search_partition(coeffs, m, j + 1, false)?.value;
    Ok(fnext < fj - 1e-12 * fj.max(1.0))
}

/// Masses `m_1 < m_2 < ...` where `f_{j+1}` first drops below `f_j`, for
/// `j < k_max`, searched on `(0, m_max]`. Returns the breakpoints found;
/// fails only if not even the first one lies below `m_max`.
pub fn breakpoints(coeffs: &RieszCoefficients, k_max: usize, m_max: f64) -> Result<Vec<f64>> {
    if k_max < 2 {
        return Err(Error::Domain(format!("k_max must be >= 2, got {k_max}")));
    }
    let h = 1.0 / BRACKET_DENSITY;
    let mut found: Vec<f64> = Vec::new();
    let mut lo = h;
    for j in 1..k_max {
        let mut bracket = None;
        let mut m = lo;
        while m <= m_max {
            if splits_below(coeffs, m, j)? {
                bracket = Some((m - h, m));
                break;
            }
            m += h;
        }
        let Some((mut a, mut b)) = bracket else { break };
        a = a.max(found.last().copied().unwrap_or(0.0));
        while b - a > BREAKPOINT_TOL * b {
            let mid = 0.5 * (a + b);
            if splits_below(coeffs, mid, j)? {
                b = mid;
            } else {
                a = mid;
            }
        }
        if found.last().is_some_and(|&prev| b <= prev) {
            return Err(Error::Domain(format!("breakpoint {j} at {b} does not exceed the previous one")));
        }
        found.push(b);
        lo = b;
    }
    if found.is_empty() {
        return Err(Error::BracketNotFound { m_max });
    }
    Ok(found)
}

/// Explicit bound `m_glob < w_N (2^alpha N (2^(1/N) - 1) / (w_N gamma (1 - 2^(-(N-alpha)/N))))^(N/(N+1-alpha))`,
/// obtained by comparing one ball with two half balls using `c_alpha >= w_N² 2^(-alpha)`.
pub fn mglob_upper_bound(params: &ModelParams) -> f64 {
    let n = params.n();
    let a = params.alpha;
    let inner = 2f64.powf(a) * n * (2f64.powf(1.0 / n) - 1.0)
        / (params.omega_n * params.gamma * (1.0 - 0.5f64.powf((n - a) / n)));
    params.omega_n * inner.powf(n / (n + 1.0 - a))
}

/// Thresholds at one value of `alpha`; `error` is set and the numbers are
/// `NaN` when the row could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub alpha: f64,
    #[serde(rename = "d_A")]
    pub d_a: Option<usize>,
    #[serde(rename = "d_I")]
    pub d_i: Option<usize>,
    #[serde(rename = "R_bar")]
    pub r_bar: f64,
    pub m_loc: f64,
    pub m_glob_upper: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn threshold_row(dim: u32, alpha: f64, gamma: f64) -> Result<ThresholdRow> {
    let params = ModelParams::new(dim, alpha, gamma)?;
    let coeffs = RieszCoefficients::compute(params)?;
    let r_bar = critical_radius(&coeffs)?;
    Ok(ThresholdRow {
        alpha,
        d_a: Some(first_unstable_degree(&coeffs)?),
        d_i: Some(monotonicity_switch_degree(&coeffs)?),
        r_bar,
        m_loc: params.omega_n * r_bar.powi(dim as i32),
        m_glob_upper: mglob_upper_bound(&params),
        error: None,
    })
}

/// One row per `alpha`, computed in parallel and returned in grid order.
/// Failing rows carry their error instead of aborting the sweep.
pub fn sweep_thresholds(dim: u32, alpha_grid: &[f64], gamma: f64) -> Vec<ThresholdRow> {
    alpha_grid
        .par_iter()
        .map(|&alpha| {
            threshold_row(dim, alpha, gamma).unwrap_or_else(|e| ThresholdRow {
                alpha,
                d_a: None,
                d_i: None,
                r_bar: f64::NAN,
                m_loc: f64::NAN,
                m_glob_upper: f64::NAN,
                error: Some(e.to_string()),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeRow {
    pub m: f64,
    pub best_k: usize,
    pub value: f64,
    pub masses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeTable {
    pub params: ModelParams,
    pub grid: Vec<LandscapeRow>,
    /// Breakpoints below the largest grid mass; these are crossings of the
    /// ball-cluster energies, not certified thresholds for general sets.
    pub breakpoints: Vec<f64>,
    pub mglob_upper: f64,
}

/// Optimal partition with at most `k_max` balls at each grid mass;
/// `best_k` counts the balls actually used.
pub fn landscape_table(coeffs: &RieszCoefficients, m_grid: &[f64], k_max: usize) -> Result<LandscapeTable> {
    if k_max == 0 {
        return Err(Error::Domain("k_max must be >= 1".into()));
    }
    if m_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("mass grid must be strictly increasing".into()));
    }
    let grid = m_grid
        .par_iter()
        .map(|&m| {
            let p = search_partition(coeffs, m, k_max, false)?;
            Ok(LandscapeRow { m, best_k: p.ball_count(), value: p.value, masses: p.masses })
        })
        .collect::<Result<Vec<_>>>()?;
    let breakpoints = match m_grid.last() {
        Some(&m_max) if k_max >= 2 => match breakpoints(coeffs, k_max, m_max) {
            Ok(b) => b,
            Err(Error::BracketNotFound { .. }) => Vec::new(),
            Err(e) => return Err(e),
        },
        _ => Vec::new(),
    };
    Ok(LandscapeTable { params: coeffs.params, grid, breakpoints, mglob_upper: mglob_upper_bound(&coeffs.params) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coeffs(a: f64, g: f64) -> RieszCoefficients {
        RieszCoefficients::compute(ModelParams::new(3, a, g).unwrap()).unwrap()
    }

    #[test]
    fn rescaling() {
        let p = ModelParams::new(3, 1.0, 1.5).unwrap();
        assert_eq!(rescale_to_unit_volume(&p, p.omega_n).unwrap().gamma, 1.5);
        let q = rescale_to_unit_volume(&p, 8.0 * p.omega_n).unwrap();
        assert!((q.gamma - 12.0).abs() < 1e-12);
        assert!(rescale_to_unit_volume(&p, 0.0).is_err());
    }

    #[test]
    fn simplex_projection() {
        let y = project_simplex(&[0.5, 2.0, -1.0], 1.0);
        assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(y, vec![0.0, 1.0, 0.0]);
        let y = project_simplex(&[0.4, 0.4], 1.0);
        assert!((y[0] - 0.5).abs() < 1e-15 && (y[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_ball_partition() {
        let c = coeffs(1.0, 1.0);
        let p = optimal_partition(&c, 3.0, 1).unwrap();
        assert_eq!(p.masses, vec![3.0]);
        assert_eq!(p.value, single_ball_energy(&c.params, 3.0, &c).total);
    }

    #[test]
    fn two_balls_at_mass_ten() {
        let c = coeffs(1.0, 1.0);
        let p = optimal_partition(&c, 10.0, 2).unwrap();
        assert!((p.masses[0] - 5.0).abs() < 1e-6 && (p.masses[1] - 5.0).abs() < 1e-6, "{:?}", p.masses);
        assert!(p.value < single_ball_energy(&c.params, 10.0, &c).total);
        let brute = brute_grid_partition(&c, 10.0, 2).unwrap();
        assert!((brute.value / p.value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn more_balls_never_hurt() {
        let c = coeffs(0.5, 1.0);
        for m in [0.5, 2.0, 7.0, 20.0] {
            let mut prev = f64::INFINITY;
            for k in 1..=5 {
                let v = optimal_partition(&c, m, k).unwrap().value;
                assert!(v <= prev + 1e-12 * prev, "m = {m}, k = {k}");
                prev = v;
            }
        }
    }

    #[test]
    fn mglob_bound_example() {
        let p = ModelParams::new(3, 1.0, 1.0).unwrap();
        let expected = 6.0 * (2f64.cbrt() - 1.0) / (1.0 - 2f64.powf(-2.0 / 3.0));
        assert!((mglob_upper_bound(&p) / expected - 1.0).abs() < 1e-13);
        assert!((expected - 4.2145).abs() < 1e-4);
    }

    #[test]
    fn sweep_flags_bad_rows() {
        let rows = sweep_thresholds(3, &[1.0, 2.5], 1.0);
        assert!(rows[0].error.is_none());
        assert!((rows[0].m_loc - 5.0).abs() < 1e-8);
        assert!(rows[1].error.as_deref().unwrap().contains("(0, 2)"));
    }

    #[test]
    fn table_rejects_unsorted_grid() {
        let c = coeffs(1.0, 1.0);
        assert!(landscape_table(&c, &[2.0, 1.0], 2).is_err());
    }
}
