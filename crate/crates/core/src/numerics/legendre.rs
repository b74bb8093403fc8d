use crate::error::{Error, Result};

/// Legendre polynomial of dimension `n` and degree `d`, normalized so that
/// `P_{n,d}(1) = 1`.
///
/// These are Gegenbauer polynomials `C_d^{(n-2)/2}` rescaled to unit value
/// at `t = 1` (Chebyshev `T_d` for `n = 2`, classical Legendre for `n = 3`),
/// evaluated with the normalized three-term recurrence
///
/// ```text
/// P_k(t) = (2k + n - 4)/(k + n - 3) * t * P_{k-1}(t) - (k - 1)/(k + n - 3) * P_{k-2}(t)
/// ```
pub fn legendre_poly(n: u32, d: usize, t: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!("dimension must be >= 2, got {n}")));
    }
    if !(t.abs() <= 1.0) {
        return Err(Error::Domain(format!("legendre_poly requires |t| <= 1, got {t}")));
    }
    Ok(legendre_unchecked(n, d, t))
}

pub(crate) fn legendre_unchecked(n: u32, d: usize, t: f64) -> f64 {
    if d == 0 {
        return 1.0;
    }
    let nf = n as f64;
    let mut prev = 1.0;
    let mut cur = t;
    for k in 2..=d {
        let kf = k as f64;
        let denom = kf + nf - 3.0;
        let next = ((2.0 * kf + nf - 4.0) * t * cur - (kf - 1.0) * prev) / denom;
        prev = cur;
        cur = next;
    }
    cur
}

/// Dimension of the space of degree-`d` spherical harmonics on `S^{n-1}`.
pub fn harmonic_space_dim(n: u32, d: usize) -> u64 {
    // C(d + n - 1, n - 1) - C(d + n - 3, n - 1)
    let n = n as u64;
    let d = d as u64;
    let total = binomial(d + n - 1, n - 1);
    if d >= 2 {
        total - binomial(d + n - 3, n - 1)
    } else {
        total
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Rodrigues-type formula, expanded by hand for d <= 3:
    // P_{N,d}(t) = (-1)^d Γ((N-1)/2) / (2^d Γ(d+(N-1)/2)) (1-t²)^{-(N-3)/2} (d/dt)^d (1-t²)^{d+(N-3)/2}
    fn rodrigues(n: u32, d: usize, t: f64) -> f64 {
        let nu = (n as f64 - 3.0) / 2.0;
        match d {
            0 => 1.0,
            1 => t,
            // d = 2: with q = 1 - t², (d/dt)² q^{2+ν} = (2+ν)[-2 q^{1+ν} + 4(1+ν) t² q^ν]
            // prefactor: 1 / (4 (ν+1)(ν+2)) after Γ cancellation
            2 => {
                let q = 1.0 - t * t;
                (-2.0 * q + 4.0 * (1.0 + nu) * t * t) / (4.0 * (nu + 1.0))
            }
            // d = 3: (d/dt)³ q^{3+ν} = -4 t (ν+2)(ν+3) ((2ν+5) t² - 3) q^ν,
            // prefactor -1 / (8 (ν+1)(ν+2)(ν+3))
            3 => {
                let third = -4.0 * t * (nu + 2.0) * (nu + 3.0) * ((2.0 * nu + 5.0) * t * t - 3.0);
                -third / (8.0 * (nu + 1.0) * (nu + 2.0) * (nu + 3.0))
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn spec_examples() {
        assert_eq!(legendre_poly(3, 0, 0.3).unwrap(), 1.0);
        assert!((legendre_poly(5, 1, 0.7).unwrap() - 0.7).abs() < 1e-15);
        // (3t² - 1)/2 at t = 1/2
        assert!((legendre_poly(3, 2, 0.5).unwrap() + 0.125).abs() < 1e-15);
    }

    #[test]
    fn matches_rodrigues_low_degree() {
        for n in 3..=7 {
            for d in 0..=3 {
                for k in 0..=20 {
                    let t = -1.0 + 0.1 * k as f64;
                    let a = legendre_poly(n, d, t).unwrap();
                    let b = rodrigues(n, d, t);
                    assert!((a - b).abs() < 1e-12, "n={n} d={d} t={t}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn chebyshev_in_the_plane() {
        for d in 0..20 {
            for k in 0..=10 {
                let theta = 0.3 * k as f64;
                let p = legendre_poly(2, d, theta.cos()).unwrap();
                assert!((p - (d as f64 * theta).cos()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn endpoint_values() {
        for n in 2..=7 {
            for d in 0..=50 {
                let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
                assert!((legendre_poly(n, d, 1.0).unwrap() - 1.0).abs() < 1e-12);
                assert!((legendre_poly(n, d, -1.0).unwrap() - sign).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(legendre_poly(3, 2, 1.5).is_err());
        assert!(legendre_poly(1, 2, 0.5).is_err());
    }

    #[test]
    fn harmonic_dimensions() {
        for d in 0..30 {
            assert_eq!(harmonic_space_dim(3, d), 2 * d as u64 + 1);
        }
        for d in 1..10 {
            assert_eq!(harmonic_space_dim(2, d), 2);
        }
        assert_eq!(harmonic_space_dim(4, 2), 9);
        assert_eq!(harmonic_space_dim(5, 1), 5);
    }
}
