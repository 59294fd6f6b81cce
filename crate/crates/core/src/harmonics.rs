//! Special functions: associated Legendre functions, real spherical
//! harmonics, the Bessel-polynomial coefficients and spherical
//! Bessel/Hankel functions of the second kind.
//!
//! Conventions used throughout the crate:
//!
//! * Associated Legendre functions carry no Condon–Shortley phase.
//! * Time dependence is `e^{+iωt}`, so outgoing waves are described by the
//!   spherical Hankel function of the second kind, `h_μ = j_μ − i y_μ`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

pub use rustfft::num_complex::Complex64;

/// Complex value used for spectra and Hankel functions.
pub type ComplexValue = Complex64;

/// Highest order the special functions are specified for.
pub const MAX_ORDER: usize = 32;

// Factorials are exact in f64 up to 22!; beyond that they carry one rounding
// each, which is plenty for orders up to MAX_ORDER.
const FACTORIAL_TABLE_LEN: usize = 2 * MAX_ORDER + 3;

fn factorial_table() -> &'static [f64; FACTORIAL_TABLE_LEN] {
    static TABLE: OnceLock<[f64; FACTORIAL_TABLE_LEN]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [1.0; FACTORIAL_TABLE_LEN];
        for k in 1..FACTORIAL_TABLE_LEN {
            t[k] = t[k - 1] * k as f64;
        }
        t
    })
}

/// `n!` as a float. Tabulated for small `n`, log-gamma based beyond.
pub fn factorial(n: usize) -> f64 {
    if n < FACTORIAL_TABLE_LEN {
        factorial_table()[n]
    } else {
        ln_factorial(n).exp()
    }
}

/// `ln(n!)`.
pub fn ln_factorial(n: usize) -> f64 {
    if n < FACTORIAL_TABLE_LEN {
        factorial_table()[n].ln()
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

// Lanczos approximation (g = 7, n = 9), accurate to ~1e-15 for x > 0.5.
fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Order/degree pair `(μ, ν)` of a real spherical harmonic, `|ν| ≤ μ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HarmonicIndex {
    pub mu: usize,
    pub nu: i32,
}

impl HarmonicIndex {
    pub fn new(mu: usize, nu: i32) -> Result<Self> {
        if nu.unsigned_abs() as usize > mu {
            return Err(Error::Domain(format!("|nu| = {} exceeds mu = {mu}", nu.abs())));
        }
        Ok(Self { mu, nu })
    }

    /// Position in the flat `μ² + μ + ν` enumeration.
    pub fn flat(self) -> usize {
        ((self.mu * self.mu + self.mu) as i64 + self.nu as i64) as usize
    }

    pub fn from_flat(k: usize) -> Self {
        let mu = (k as f64).sqrt().floor() as usize;
        // guard against sqrt rounding for large k
        let mu = if (mu + 1) * (mu + 1) <= k { mu + 1 } else { mu };
        let nu = k as i64 - (mu * mu + mu) as i64;
        Self { mu, nu: nu as i32 }
    }

    /// Number of harmonics up to and including `order`.
    pub fn count(order: usize) -> usize {
        (order + 1) * (order + 1)
    }

    /// All indices up to `order` in flat order.
    pub fn iter(order: usize) -> impl Iterator<Item = HarmonicIndex> {
        (0..Self::count(order)).map(Self::from_flat)
    }
}

/// Associated Legendre function `P_μ^{|ν|}(x)` without the Condon–Shortley
/// phase, by upward recurrence in `μ`.
pub fn assoc_legendre(mu: usize, abs_nu: usize, x: f64) -> Result<f64> {
    if abs_nu > mu {
        return Err(Error::Domain(format!("degree {abs_nu} exceeds order {mu}")));
    }
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("|x| = {} > 1", x.abs())));
    }
    Ok(legendre_unchecked(mu, abs_nu, x))
}

fn legendre_unchecked(l: usize, m: usize, x: f64) -> f64 {
    let s = (1.0 - x * x).max(0.0).sqrt();
    // P_m^m = (2m-1)!! s^m
    let mut pmm = 1.0;
    for i in 0..m {
        pmm *= (2 * i + 1) as f64 * s;
    }
    if l == m {
        return pmm;
    }
    let mut pm1 = x * (2 * m + 1) as f64 * pmm;
    if l == m + 1 {
        return pm1;
    }
    let mut pm2 = pmm;
    for ll in (m + 2)..=l {
        let p = ((2 * ll - 1) as f64 * x * pm1 - (ll + m - 1) as f64 * pm2) / (ll - m) as f64;
        pm2 = pm1;
        pm1 = p;
    }
    pm1
}

fn sh_norm(mu: usize, abs_nu: usize) -> f64 {
    let ratio = (ln_factorial(mu - abs_nu) - ln_factorial(mu + abs_nu)).exp();
    ((2 * mu + 1) as f64 * ratio / (4.0 * PI)).sqrt()
}

/// Real spherical harmonic `Y_{μν}(θ, φ)`: cosine branch for `ν > 0`, sine
/// branch for `ν < 0`, orthonormal over the unit sphere.
pub fn real_sh(idx: HarmonicIndex, theta: f64, phi: f64) -> f64 {
    let m = idx.nu.unsigned_abs() as usize;
    let base = sh_norm(idx.mu, m) * legendre_unchecked(idx.mu, m, theta.cos());
    match idx.nu {
        0 => base,
        nu if nu > 0 => std::f64::consts::SQRT_2 * base * (m as f64 * phi).cos(),
        _ => std::f64::consts::SQRT_2 * base * (m as f64 * phi).sin(),
    }
}

/// Fills `out` (length `(order+1)²`, flat order) with every `Y_{μν}(θ, φ)`
/// up to `order`. One Legendre sweep per degree, so much cheaper than calling
/// [`real_sh`] in a loop.
pub fn sh_basis_into(order: usize, theta: f64, phi: f64, out: &mut [f64]) {
    assert_eq!(out.len(), HarmonicIndex::count(order));
    let x = theta.cos();
    let s = theta.sin().abs();
    let mut pmm = 1.0;
    for m in 0..=order {
        if m > 0 {
            pmm *= (2 * m - 1) as f64 * s;
        }
        let (c, sn) = if m == 0 {
            (1.0, 0.0)
        } else {
            let a = m as f64 * phi;
            (std::f64::consts::SQRT_2 * a.cos(), std::f64::consts::SQRT_2 * a.sin())
        };
        let mut p_prev = 0.0;
        let mut p_cur = pmm;
        for l in m..=order {
            if l > m {
                let p_next = if l == m + 1 {
                    x * (2 * m + 1) as f64 * pmm
                } else {
                    ((2 * l - 1) as f64 * x * p_cur - (l + m - 1) as f64 * p_prev) / (l - m) as f64
                };
                p_prev = p_cur;
                p_cur = p_next;
            }
            let base = sh_norm(l, m) * p_cur;
            let centre = l * l + l;
            if m == 0 {
                out[centre] = base;
            } else {
                out[centre + m] = base * c;
                out[centre - m] = base * sn;
            }
        }
    }
}

/// Convenience wrapper around [`sh_basis_into`].
pub fn sh_basis(order: usize, theta: f64, phi: f64) -> Vec<f64> {
    let mut out = vec![0.0; HarmonicIndex::count(order)];
    sh_basis_into(order, theta, phi, &mut out);
    out
}

/// Bessel-polynomial coefficient `φ_ν(μ) = (μ+ν)! / (2^ν ν! (μ−ν)!)`.
pub fn phi_coeff(nu: i64, mu: i64) -> Result<f64> {
    if nu < 0 || mu < 0 || nu > mu {
        return Err(Error::Domain(format!("phi_coeff needs 0 <= nu <= mu, got nu={nu}, mu={mu}")));
    }
    Ok(phi_unchecked(nu as usize, mu as usize))
}

pub(crate) fn phi_unchecked(nu: usize, mu: usize) -> f64 {
    if mu <= 20 {
        factorial(mu + nu) / (2f64.powi(nu as i32) * factorial(nu) * factorial(mu - nu))
    } else {
        (ln_factorial(mu + nu)
            - nu as f64 * std::f64::consts::LN_2
            - ln_factorial(nu)
            - ln_factorial(mu - nu))
        .exp()
    }
}

fn i_pow(k: i64) -> Complex64 {
    match k.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Spherical Hankel function of the second kind, from its terminating sum
/// `h_μ(x) = e^{−ix} i^{μ+2} Σ_ν φ_ν(μ) / (ix)^{ν+1}`.
pub fn sph_hankel2(mu: usize, x: f64) -> Result<Complex64> {
    if x == 0.0 {
        return Err(Error::Singularity(format!("h_{mu}(0) is unbounded")));
    }
    let ix = Complex64::new(0.0, x);
    let inv = ix.inv();
    let mut pow = inv;
    let mut sum = Complex64::new(0.0, 0.0);
    for nu in 0..=mu {
        sum += pow * phi_unchecked(nu, mu);
        pow *= inv;
    }
    Ok(Complex64::from_polar(1.0, -x) * i_pow(mu as i64 + 2) * sum)
}

// Below this the real part of h_μ loses too many digits to cancellation.
fn use_series(mu: usize, x: f64) -> bool {
    x * x < 2.0 * (2 * mu + 3) as f64
}

fn bessel_j_series(mu: usize, x: f64) -> f64 {
    let mut lead = 1.0;
    for k in 0..mu {
        lead *= x / (2 * k + 3) as f64;
    }
    // lead = x^μ / (2μ+1)!!
    let half_x2 = -0.5 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= half_x2 / (k as f64 * (2 * mu + 2 * k + 1) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    lead * sum
}

/// Spherical Bessel function of the first kind, `j_μ(x) = Re h_μ(x)`.
/// Small arguments use the ascending series, where the Hankel combination
/// would cancel catastrophically.
pub fn sph_bessel_j(mu: usize, x: f64) -> f64 {
    if x == 0.0 {
        return if mu == 0 { 1.0 } else { 0.0 };
    }
    if x < 0.0 {
        let sign = if mu % 2 == 0 { 1.0 } else { -1.0 };
        return sign * sph_bessel_j(mu, -x);
    }
    if use_series(mu, x) {
        bessel_j_series(mu, x)
    } else {
        sph_bessel_j_hankel(mu, x)
    }
}

/// `j_μ(x)` strictly via `(h_μ* + h_μ)/2`, without the small-argument switch.
pub fn sph_bessel_j_hankel(mu: usize, x: f64) -> f64 {
    // x != 0 is the only failure mode of sph_hankel2
    sph_hankel2(mu, x).map(|h| h.re).unwrap_or(if mu == 0 { 1.0 } else { 0.0 })
}

/// `j'_μ(x) = (μ/x) j_μ(x) − j_{μ+1}(x)`.
pub fn sph_bessel_j_prime(mu: usize, x: f64) -> f64 {
    if x == 0.0 {
        return if mu == 1 { 1.0 / 3.0 } else { 0.0 };
    }
    mu as f64 / x * sph_bessel_j(mu, x) - sph_bessel_j(mu + 1, x)
}

/// `h'_μ(x) = h_{μ−1}(x) − (μ+1)/x h_μ(x)`, with `h_{−1} = −i h_0`.
pub fn sph_hankel2_prime(mu: usize, x: f64) -> Result<Complex64> {
    let h = sph_hankel2(mu, x)?;
    let lower = if mu == 0 {
        Complex64::new(0.0, -1.0) * h
    } else {
        sph_hankel2(mu - 1, x)?
    };
    Ok(lower - h * ((mu + 1) as f64 / x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Rodrigues: P_l^m(x) = (1-x^2)^{m/2} d^{l+m}/dx^{l+m} (x^2-1)^l / (2^l l!)
    fn rodrigues(l: usize, m: usize, x: f64) -> f64 {
        // coefficients of (x^2 - 1)^l, index = power of x
        let mut poly = vec![0.0f64; 2 * l + 1];
        for k in 0..=l {
            let binom = (0..k).fold(1.0, |acc, i| acc * (l - i) as f64 / (i + 1) as f64);
            let sign = if (l - k) % 2 == 0 { 1.0 } else { -1.0 };
            poly[2 * k] = binom * sign;
        }
        for _ in 0..(l + m) {
            poly = poly.iter().enumerate().skip(1).map(|(p, c)| c * p as f64).collect();
            if poly.is_empty() {
                return 0.0;
            }
        }
        let val: f64 = poly.iter().rev().fold(0.0, |acc, c| acc * x + c);
        let scale = (0..l).fold(1.0, |acc, i| acc * 2.0 * (i + 1) as f64);
        (1.0 - x * x).powf(m as f64 / 2.0) * val / scale
    }

    #[test]
    fn legendre_trivial_values() {
        assert_eq!(assoc_legendre(0, 0, 0.3).unwrap(), 1.0);
        for &x in &[-0.9, -0.2, 0.0, 0.4, 1.0] {
            assert_eq!(assoc_legendre(1, 0, x).unwrap(), x);
        }
    }

    #[test]
    fn legendre_matches_rodrigues() {
        let v = assoc_legendre(2, 1, 0.5).unwrap();
        assert!((v - rodrigues(2, 1, 0.5)).abs() < 1e-13, "{v}");
        // no Condon-Shortley phase: P_2^1(x) = 3 x sqrt(1-x^2) > 0
        assert!(v > 0.0);
        for l in 0..=8 {
            for m in 0..=l {
                for &x in &[-0.95, -0.3, 0.1, 0.77] {
                    let a = assoc_legendre(l, m, x).unwrap();
                    let b = rodrigues(l, m, x);
                    assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "l={l} m={m} x={x}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn legendre_domain_errors() {
        assert!(matches!(assoc_legendre(2, 1, 1.2), Err(Error::Domain(_))));
        assert!(matches!(assoc_legendre(1, 2, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn real_sh_trivial_values() {
        let y00 = 1.0 / (4.0 * PI).sqrt();
        for &(t, p) in &[(0.0, 0.0), (1.1, 2.0), (PI, 5.0)] {
            assert!((real_sh(HarmonicIndex { mu: 0, nu: 0 }, t, p) - y00).abs() < 1e-15);
        }
        let y10 = real_sh(HarmonicIndex { mu: 1, nu: 0 }, 0.0, 0.0);
        assert!((y10 - (3.0 / (4.0 * PI)).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn basis_matches_single_evaluation() {
        let order = 7;
        for &(t, p) in &[(0.3, 0.2), (2.0, -1.0), (std::f64::consts::FRAC_PI_2, 4.0), (0.0, 1.0)] {
            let basis = sh_basis(order, t, p);
            for idx in HarmonicIndex::iter(order) {
                let single = real_sh(idx, t, p);
                assert!((basis[idx.flat()] - single).abs() < 1e-13, "{idx:?}");
            }
        }
    }

    #[test]
    fn phi_coeff_examples() {
        for mu in 0..10 {
            assert_eq!(phi_coeff(0, mu).unwrap(), 1.0);
        }
        assert_eq!(phi_coeff(1, 1).unwrap(), 1.0);
        // 5! / (2^2 2! 1!)
        assert_eq!(phi_coeff(2, 3).unwrap(), 15.0);
        assert!(phi_coeff(3, 2).is_err());
        assert!(phi_coeff(-1, 2).is_err());
    }

    fn phi_exact(nu: u128, mu: u128) -> u128 {
        let f = |n: u128| (1..=n).product::<u128>();
        f(mu + nu) / ((1u128 << nu) * f(nu) * f(mu - nu))
    }

    #[test]
    fn phi_ratio_recurrence_exact() {
        for mu in 0..=12u128 {
            for nu in 0..mu {
                let a = phi_exact(nu, mu);
                let b = phi_exact(nu + 1, mu);
                // phi_{nu+1}/phi_nu = (mu+nu+1)(mu-nu) / (2(nu+1))
                assert_eq!(b * 2 * (nu + 1), a * (mu + nu + 1) * (mu - nu));
                assert_eq!(phi_coeff(nu as i64, mu as i64).unwrap(), a as f64);
            }
        }
    }

    #[test]
    fn phi_log_space_continuity() {
        // mu > 20 goes through log space; compare with the direct product
        for mu in 21..=32usize {
            for nu in 0..=mu {
                let direct = factorial(mu + nu) / (2f64.powi(nu as i32) * factorial(nu) * factorial(mu - nu));
                let v = phi_coeff(nu as i64, mu as i64).unwrap();
                assert!((v / direct - 1.0).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn j0_closed_form() {
        assert!((sph_bessel_j(0, 1.0) - 1f64.sin()).abs() < 1e-15);
        for &x in &[0.01, 0.5, 2.0, 3.3, 9.7] {
            assert!((sph_bessel_j(0, x) - x.sin() / x).abs() < 1e-14);
        }
        assert_eq!(sph_bessel_j(0, 0.0), 1.0);
        assert_eq!(sph_bessel_j(3, 0.0), 0.0);
    }

    #[test]
    fn h0_at_one() {
        // h_0(1) = e^{-i} i^2 / i = i e^{-i}
        let h = sph_hankel2(0, 1.0).unwrap();
        let expected = Complex64::new(0.0, 1.0) * Complex64::from_polar(1.0, -1.0);
        assert!((h - expected).norm() < 1e-15);
        // and j_0 is its real part
        assert!((h.re - 1f64.sin()).abs() < 1e-15);
        assert!(matches!(sph_hankel2(2, 0.0), Err(Error::Singularity(_))));
    }

    // j_n(x) = 2^n x^n Σ_k (-1)^k (k+n)! x^{2k} / (k! (2k+2n+1)!)
    fn series_oracle(n: usize, x: f64) -> f64 {
        let mut sum = 0.0;
        for k in 0..40usize {
            let num = ln_factorial(k + n) + (2 * k) as f64 * x.ln();
            let den = ln_factorial(k) + ln_factorial(2 * k + 2 * n + 1);
            let t = (num - den).exp();
            sum += if k % 2 == 0 { t } else { -t };
        }
        2f64.powi(n as i32) * x.powi(n as i32) * sum
    }

    #[test]
    fn bessel_small_argument_matches_series_oracle() {
        for mu in 0..=6 {
            for &x in &[0.05, 0.1, 0.3, 0.6, 0.99] {
                let a = sph_bessel_j(mu, x);
                let b = series_oracle(mu, x);
                assert!((a / b - 1.0).abs() < 1e-8, "mu={mu} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn hankel_route_agrees_with_series_near_crossover() {
        for mu in 0..=6usize {
            let x0 = (2.0 * (2 * mu + 3) as f64).sqrt();
            for &x in &[0.9 * x0, x0, 1.2 * x0] {
                let via_h = sph_bessel_j_hankel(mu, x);
                let via_s = bessel_j_series(mu, x);
                assert!((via_h - via_s).abs() < 1e-10 * via_s.abs().max(1e-3), "mu={mu} x={x}");
            }
        }
    }

    #[test]
    fn wronskian_modulus() {
        // j h' - j' h = -i / x^2
        for mu in 0..=8 {
            for k in 0..=90 {
                let x = 1.0 + 0.1 * k as f64;
                let w = sph_bessel_j(mu, x) * sph_hankel2_prime(mu, x).unwrap()
                    - sph_hankel2(mu, x).unwrap() * sph_bessel_j_prime(mu, x);
                let target = Complex64::new(0.0, -1.0 / (x * x));
                assert!((w - target).norm() < 1e-10 / (x * x), "mu={mu} x={x}: {w}");
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for mu in 0..=5 {
            for &x in &[0.4, 1.3, 4.0, 8.5] {
                let eps = 1e-6;
                let fd = (sph_bessel_j(mu, x + eps) - sph_bessel_j(mu, x - eps)) / (2.0 * eps);
                assert!((fd - sph_bessel_j_prime(mu, x)).abs() < 1e-8);
                let fdh = (sph_hankel2(mu, x + eps).unwrap() - sph_hankel2(mu, x - eps).unwrap()) / (2.0 * eps);
                let h = sph_hankel2_prime(mu, x).unwrap();
                assert!((fdh - h).norm() < 1e-6 * h.norm().max(1.0));
            }
        }
    }

    proptest! {
        #[test]
        fn flat_index_round_trip(k in 0usize..2000) {
            let idx = HarmonicIndex::from_flat(k);
            prop_assert!(idx.nu.unsigned_abs() as usize <= idx.mu);
            prop_assert_eq!(idx.flat(), k);
        }

        #[test]
        fn flat_index_is_dense(order in 0usize..20) {
            let flats: Vec<usize> = HarmonicIndex::iter(order).map(|i| i.flat()).collect();
            prop_assert_eq!(flats, (0..(order + 1) * (order + 1)).collect::<Vec<_>>());
        }
    }
}
