//! Closed-form time-domain separation filters `g₀ … g₄`, their tap tables,
//! and an inverse-DFT oracle built from the frequency-domain products.

use std::f64::consts::PI;
use std::io::Write;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::{factorial, phi_unchecked, sph_bessel_j, sph_hankel2};
use crate::separator::{tap_count, SeparatorConfig};

/// Which of the five separation filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Filter {
    G0,
    G1,
    G2,
    G3,
    G4,
}

impl Filter {
    pub const ALL: [Filter; 5] = [Filter::G0, Filter::G1, Filter::G2, Filter::G3, Filter::G4];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(k: usize) -> Result<Self> {
        Self::ALL
            .get(k)
            .copied()
            .ok_or_else(|| Error::Domain(format!("filter id {k} is not in 0..=4")))
    }
}

/// `scale · [Sign(t) Σ a_m u^m/m! + Sign(t−2τ) Σ b_m w^m/m!]` with
/// `u = t/τ`, `w = (t−2τ)/τ`. `scale` is `prefactor` or `prefactor/τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterPoly {
    prefactor: f64,
    per_tau: bool,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl FilterPoly {
    pub fn new(filter: Filter, mu: usize) -> Self {
        let m = mu as f64;
        let odd = |k: usize| if k % 2 == 0 { 1.0 } else { -1.0 };
        // (prefactor, per_tau, A, B, sign of the delayed term)
        let (prefactor, per_tau, big_a, big_b, s) = match filter {
            Filter::G0 => (m / 4.0, true, mu, mu, odd(mu + 1)),
            Filter::G1 => (0.25, false, mu + 1, mu, odd(mu)),
            Filter::G2 => (0.25, false, mu, mu, odd(mu + 1)),
            Filter::G3 => ((m + 1.0) / 4.0, true, mu, mu, odd(mu + 1)),
            // μ = 0 with A = B = 0 and s = −1 is exactly the boxcar branch
            Filter::G4 if mu == 0 => (0.25, false, 0, 0, -1.0),
            Filter::G4 => (0.25, false, mu, mu - 1, odd(mu - 1)),
        };
        let len = big_a + big_b + 1;
        let mut a = vec![0.0; len];
        let mut b = vec![0.0; len];
        for nu in 0..=big_a {
            let pa = phi_unchecked(nu, big_a);
            for vs in 0..=big_b {
                let prod = pa * phi_unchecked(vs, big_b);
                a[nu + vs] += odd(nu) * prod;
                b[nu + vs] += s * prod;
            }
        }
        Self { prefactor, per_tau, a, b }
    }

    fn scale(&self, tau: f64) -> f64 {
        if self.per_tau {
            self.prefactor / tau
        } else {
            self.prefactor
        }
    }

    /// Depth-`d` symmetric antiderivative of the raw sign form (no
    /// short-circuit outside the support). Depth 0 is the filter itself.
    pub fn eval_raw(&self, t: f64, tau: f64, depth: usize) -> f64 {
        let u = t / tau;
        let w = (t - 2.0 * tau) / tau;
        let s0 = sign(t);
        let s1 = sign(t - 2.0 * tau);
        let mut acc = 0.0;
        if s0 != 0.0 {
            acc += s0 * series(&self.a, u, depth);
        }
        if s1 != 0.0 {
            acc += s1 * series(&self.b, w, depth);
        }
        self.scale(tau) * tau.powi(depth as i32) * acc
    }

    /// The filter value, exactly zero outside `[0, 2τ]`.
    pub fn eval(&self, t: f64, tau: f64) -> f64 {
        if t < 0.0 || t > 2.0 * tau {
            0.0
        } else {
            self.eval_raw(t, tau, 0)
        }
    }
}

/// Odd sign convention, `Sign(0) = 0`.
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

// Σ c_m x^{m+d}/(m+d)!
fn series(c: &[f64], x: f64, depth: usize) -> f64 {
    let mut acc = 0.0;
    let mut pow = x.powi(depth as i32);
    for (m, cm) in c.iter().enumerate() {
        acc += cm * pow / factorial(m + depth);
        pow *= x;
    }
    acc
}

/// Evaluates `g_k^μ(t)` for support half-width `tau`.
pub fn g_eval(filter: Filter, mu: usize, t: f64, tau: f64) -> f64 {
    FilterPoly::new(filter, mu).eval(t, tau)
}

/// How the continuous convolution integrals are turned into tap weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quadrature {
    /// Filters sampled at `t = n δt`, as in the rectangle-rule sums.
    PointSampled,
    /// The exact convolution of each filter with the linearly interpolated
    /// sample history.
    #[default]
    CellIntegrated,
}

/// Tap tables `taps[k][μ][n] = g_k^μ(n/f_s)` for `n ∈ 0..T_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterBank {
    pub r: f64,
    pub c: f64,
    pub tau_r: f64,
    pub fs: f64,
    pub tap_count: usize,
    pub order: usize,
    taps: Vec<Vec<Vec<f64>>>,
}

impl FilterBank {
    pub fn new(r: f64, c: f64, fs: f64, order: usize) -> Result<Self> {
        for (name, v) in [("r", r), ("c", c), ("fs", fs)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        let tau_r = r / c;
        let tn = tap_count(r, c, fs);
        let taps = Filter::ALL
            .iter()
            .map(|&f| {
                (0..=order)
                    .map(|mu| {
                        let p = FilterPoly::new(f, mu);
                        (0..tn).map(|n| p.eval(n as f64 / fs, tau_r)).collect()
                    })
                    .collect()
            })
            .collect();
        Ok(Self { r, c, tau_r, fs, tap_count: tn, order, taps })
    }

    pub fn taps(&self, filter: Filter, mu: usize) -> &[f64] {
        &self.taps[filter.index()][mu]
    }

    pub fn tap(&self, filter: Filter, mu: usize, n: usize) -> f64 {
        self.taps[filter.index()][mu][n]
    }

    /// Convolution weights for the engine. `w[k][μ][m]` multiplies the
    /// channel value `m` samples back: `λ` for `g₀, g₃`, `Δλ` for `g₁, g₄`
    /// and `Δη` for `g₂`. The `δt` of the `g₀, g₃` sums is folded in.
    pub fn kernels(&self, quadrature: Quadrature) -> Kernels {
        let dt = 1.0 / self.fs;
        let tn = self.tap_count;
        let w = Filter::ALL
            .iter()
            .map(|&f| {
                (0..=self.order)
                    .map(|mu| match quadrature {
                        Quadrature::PointSampled => {
                            let taps = self.taps(f, mu);
                            match f {
                                Filter::G0 | Filter::G3 => taps.iter().map(|g| g * dt).collect(),
                                _ => taps.to_vec(),
                            }
                        }
                        Quadrature::CellIntegrated => {
                            let p = FilterPoly::new(f, mu);
                            let tau = self.tau_r;
                            match f {
                                Filter::G0 | Filter::G3 => (0..tn)
                                    .map(|m| {
                                        let t = m as f64 * dt;
                                        (p.eval_raw(t + dt, tau, 2) - 2.0 * p.eval_raw(t, tau, 2)
                                            + p.eval_raw(t - dt, tau, 2))
                                            / dt
                                    })
                                    .collect(),
                                _ => (0..tn)
                                    .map(|m| {
                                        let t = m as f64 * dt;
                                        (p.eval_raw(t + dt, tau, 1) - p.eval_raw(t, tau, 1)) / dt
                                    })
                                    .collect(),
                            }
                        }
                    })
                    .collect()
            })
            .collect();
        Kernels { quadrature, tap_count: tn, order: self.order, w }
    }

    /// CSV rows `k, mu, n, t_seconds, value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "k,mu,n,t_seconds,value")?;
        for f in Filter::ALL {
            for mu in 0..=self.order {
                for (n, v) in self.taps(f, mu).iter().enumerate() {
                    writeln!(out, "{},{mu},{n},{:.17e},{:.17e}", f.index(), n as f64 / self.fs, v)?;
                }
            }
        }
        Ok(())
    }
}

/// Builds the tap tables for a separator configuration.
pub fn build_filter_bank(cfg: &SeparatorConfig) -> Result<FilterBank> {
    FilterBank::new(cfg.r, cfg.c, cfg.fs, cfg.order)
}

/// Engine convolution weights derived from a [`FilterBank`].
#[derive(Debug, Clone, PartialEq)]
pub struct Kernels {
    pub quadrature: Quadrature,
    pub tap_count: usize,
    pub order: usize,
    w: Vec<Vec<Vec<f64>>>,
}

impl Kernels {
    pub fn weights(&self, filter: Filter, mu: usize) -> &[f64] {
        &self.w[filter.index()][mu]
    }
}

/// Frequency response `ĝ_k^μ(ω) = ∫ g_k^μ(t) e^{−iωt} dt` from spherical
/// Bessel and Hankel products, `x = ωτ`.
pub fn filter_response(filter: Filter, mu: usize, omega: f64, tau: f64) -> Complex64 {
    let x = omega * tau;
    let m = mu as f64;
    let i = Complex64::new(0.0, 1.0);
    if x == 0.0 {
        // small-x limits of the products below
        let d = 2.0 * m + 1.0;
        return Complex64::new(
            match filter {
                Filter::G0 => m / d,
                Filter::G1 => 0.0,
                Filter::G2 => tau / d,
                Filter::G3 => (m + 1.0) / d,
                Filter::G4 if mu == 0 => tau,
                Filter::G4 => 0.0,
            },
            0.0,
        );
    }
    // x ≠ 0 here, so the Hankel calls cannot fail
    let h = sph_hankel2(mu, x).expect("nonzero argument");
    let jh = h * sph_bessel_j(mu, x);
    match filter {
        Filter::G0 => -i * x * m * jh,
        Filter::G1 => h * (tau * x * sph_bessel_j(mu + 1, x)),
        Filter::G2 => -i * x * tau * jh,
        Filter::G3 => -i * x * (m + 1.0) * jh,
        Filter::G4 => {
            let lower = if mu == 0 { -i * h } else { sph_hankel2(mu - 1, x).expect("nonzero argument") };
            lower * (tau * x * sph_bessel_j(mu, x))
        }
    }
}

/// Oversampling factor of the oracle's frequency grid.
const ORACLE_OVERSAMPLE: usize = 64;

/// Tap table of `g_k^μ` recovered by inverse DFT of its frequency response.
///
/// The response is sampled on a grid oversampled in time by
/// [`ORACLE_OVERSAMPLE`], tapered with Lanczos σ factors to suppress Gibbs
/// ringing at the support edges, inverted, and decimated back to `f_s`.
pub fn filter_oracle_dft(filter: Filter, mu: usize, cfg: &SeparatorConfig, dft_len: usize) -> Result<Vec<f64>> {
    let tn = cfg.tap_count();
    if dft_len < 4 * tn {
        return Err(Error::Config(format!("dft_len {dft_len} is below 4·T_n = {}", 4 * tn)));
    }
    let tau = cfg.tau_r();
    let m = dft_len * ORACLE_OVERSAMPLE;
    let fs_fine = cfg.fs * ORACLE_OVERSAMPLE as f64;
    let half = m / 2;
    let mut spec = vec![Complex64::new(0.0, 0.0); m];
    for k in 0..=half {
        let omega = 2.0 * PI * k as f64 * fs_fine / m as f64;
        let z = k as f64 / half as f64;
        let sigma = if k == 0 { 1.0 } else { (PI * z).sin() / (PI * z) };
        let g = filter_response(filter, mu, omega, tau) * sigma;
        spec[k] = g;
        if k != 0 && k != half {
            spec[m - k] = g.conj();
        }
    }
    spec[half].im = 0.0;
    FftPlanner::new().plan_fft_inverse(m).process(&mut spec);
    let norm = fs_fine / m as f64;
    Ok((0..tn).map(|n| spec[n * ORACLE_OVERSAMPLE].re * norm).collect())
}

/// Relative L2 distance `‖a − b‖ / ‖b‖`; zero when both vanish.
pub fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (num / den).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TAU: f64 = 0.5 / 343.0;

    #[test]
    fn trivial_values() {
        for t in [-1.0, 0.0, 0.3 * TAU, TAU, 3.0 * TAU] {
            assert_eq!(g_eval(Filter::G0, 0, t, TAU), 0.0);
        }
        assert!((g_eval(Filter::G2, 0, TAU, TAU) - 0.5).abs() < 1e-15);
        assert!((g_eval(Filter::G4, 0, TAU, TAU) - 0.5).abs() < 1e-15);
        assert_eq!(g_eval(Filter::G2, 0, 0.0, TAU), 0.25);
    }

    #[test]
    fn order_zero_g1_is_a_ramp() {
        let eps = 1e-9 * TAU;
        assert!((g_eval(Filter::G1, 0, eps, TAU) - 0.5).abs() < 1e-8);
        assert!((g_eval(Filter::G1, 0, 2.0 * TAU - eps, TAU) + 0.5).abs() < 1e-8);
        for k in 1..20 {
            let t = 2.0 * TAU * k as f64 / 20.0;
            let expect = 0.5 - t / (2.0 * TAU);
            assert!((g_eval(Filter::G1, 0, t, TAU) - expect).abs() < 1e-14);
        }
    }

    // direct transcription of the double sum, term by term
    fn double_sum(filter: Filter, mu: usize, t: f64, tau: f64) -> f64 {
        let (pre, a, b, s): (f64, usize, usize, i32) = match filter {
            Filter::G0 => (mu as f64 / (4.0 * tau), mu, mu, mu as i32 + 1),
            Filter::G1 => (0.25, mu + 1, mu, mu as i32),
            Filter::G2 => (0.25, mu, mu, mu as i32 + 1),
            Filter::G3 => ((mu + 1) as f64 / (4.0 * tau), mu, mu, mu as i32 + 1),
            Filter::G4 => {
                if mu == 0 {
                    return 0.25 * sign(t) - 0.25 * sign(t - 2.0 * tau);
                }
                (0.25, mu, mu - 1, mu as i32 - 1)
            }
        };
        let mut acc = 0.0;
        for nu in 0..=a {
            for vs in 0..=b {
                let c = phi_unchecked(nu, a) * phi_unchecked(vs, b) / factorial(nu + vs);
                let p = (nu + vs) as i32;
                acc += c
                    * ((-1f64).powi(nu as i32) * (t / tau).powi(p) * sign(t)
                        + (-1f64).powi(s) * ((t - 2.0 * tau) / tau).powi(p) * sign(t - 2.0 * tau));
            }
        }
        pre * acc
    }

    #[test]
    fn matches_term_by_term_double_sum() {
        for f in Filter::ALL {
            for mu in 0..=6 {
                for k in 0..=40 {
                    let t = 2.0 * TAU * k as f64 / 40.0;
                    let a = g_eval(f, mu, t, TAU);
                    let b = double_sum(f, mu, t, TAU);
                    assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "{f:?} mu={mu} t={t}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn raw_polynomial_cancels_outside_support() {
        for f in Filter::ALL {
            for mu in 0..=5 {
                let p = FilterPoly::new(f, mu);
                let scale = (0..=40)
                    .map(|k| p.eval(2.0 * TAU * k as f64 / 40.0, TAU).abs())
                    .fold(0.0, f64::max)
                    .max(1e-300);
                for t in [-0.5 * TAU, -1e-3 * TAU, 2.001 * TAU, 2.5 * TAU] {
                    assert!(p.eval_raw(t, TAU, 0).abs() <= 1e-11 * scale, "{f:?} mu={mu} t={t}");
                }
            }
        }
    }

    #[test]
    fn tap_counts() {
        let n = |r: f64| FilterBank::new(r, 343.0, 48_000.0, 0).unwrap().tap_count;
        assert_eq!(n(0.65), 183);
        assert_eq!(n(0.5), 141);
        assert_eq!(n(0.35), 99);
    }

    #[test]
    fn bank_rejects_bad_geometry() {
        assert!(matches!(FilterBank::new(0.0, 343.0, 48_000.0, 2), Err(Error::Config(_))));
        assert!(matches!(FilterBank::new(0.5, -1.0, 48_000.0, 2), Err(Error::Config(_))));
    }

    #[test]
    fn bank_identities() {
        let bank = FilterBank::new(0.5, 343.0, 48_000.0, 6).unwrap();
        let tau = bank.tau_r;
        for mu in 0..=6 {
            for n in 0..bank.tap_count {
                let g2 = bank.tap(Filter::G2, mu, n);
                let g0 = bank.tap(Filter::G0, mu, n);
                let g3 = bank.tap(Filter::G3, mu, n);
                let tol = 1e-13 * (1.0 + g2.abs() / tau);
                assert!((g0 - mu as f64 / tau * g2).abs() <= tol);
                assert!((g3 - (mu + 1) as f64 / tau * g2).abs() <= tol);
            }
        }
    }

    #[test]
    fn frequency_response_matches_boxcar() {
        // order-0 g₂ is a height-1/2 boxcar on (0, 2τ)
        for omega in [10.0, 1000.0, 20_000.0] {
            let expect = Complex64::new(0.0, -omega * 2.0 * TAU).exp();
            let expect = (Complex64::new(1.0, 0.0) - expect) / Complex64::new(0.0, 2.0 * omega);
            let got = filter_response(Filter::G2, 0, omega, TAU);
            assert!((got - expect).norm() < 1e-12 * expect.norm().max(1e-6));
        }
    }

    #[test]
    fn frequency_response_continuous_at_dc() {
        for f in Filter::ALL {
            for mu in 0..=4 {
                let at0 = filter_response(f, mu, 0.0, TAU);
                let near = filter_response(f, mu, 1e-7 / TAU, TAU);
                assert!((at0 - near).norm() < 1e-5 * (1.0 + at0.norm()), "{f:?} mu={mu}");
            }
        }
    }

    #[test]
    fn cell_weights_reduce_to_integrals() {
        // the cell weights of g₁, g₂, g₄ sum to ∫g/δt and the hat weights
        // of g₀, g₃ sum to ∫g
        let bank = FilterBank::new(0.5, 343.0, 48_000.0, 4).unwrap();
        let k = bank.kernels(Quadrature::CellIntegrated);
        let dt = 1.0 / bank.fs;
        for f in Filter::ALL {
            for mu in 0..=4 {
                let total = filter_response(f, mu, 0.0, bank.tau_r).re;
                let sum: f64 = k.weights(f, mu).iter().sum();
                let sum = match f {
                    Filter::G0 | Filter::G3 => sum,
                    _ => sum * dt,
                };
                assert!((sum - total).abs() < 1e-9 * (1.0 + total.abs()), "{f:?} {mu}: {sum} vs {total}");
            }
        }
    }

    #[test]
    fn oracle_recovers_boxcar() {
        let cfg = SeparatorConfig { order: 2, ..Default::default() };
        let bank = build_filter_bank(&cfg).unwrap();
        let o = filter_oracle_dft(Filter::G2, 0, &cfg, 1024).unwrap();
        assert!(relative_l2(&o, bank.taps(Filter::G2, 0)) < 1e-2);
        let z = filter_oracle_dft(Filter::G0, 0, &cfg, 1024).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn oracle_rejects_short_dft() {
        let cfg = SeparatorConfig::default();
        assert!(filter_oracle_dft(Filter::G1, 1, &cfg, 100).is_err());
    }

    #[test]
    fn filter_ids() {
        assert_eq!(Filter::from_index(3).unwrap(), Filter::G3);
        assert!(Filter::from_index(5).is_err());
    }

    proptest! {
        #[test]
        fn support_is_exact(k in 0usize..5, mu in 0usize..8, s in 0.0f64..1.0, after in proptest::bool::ANY) {
            let t = if after { 2.0 * TAU * (1.0 + 1e-9 + 5.0 * s) } else { -TAU * (1e-9 + 5.0 * s) };
            prop_assert_eq!(g_eval(Filter::from_index(k).unwrap(), mu, t, TAU), 0.0);
        }

        #[test]
        fn proportionality_pointwise(mu in 0usize..10, s in 0.0f64..1.0) {
            let t = 2.0 * TAU * s;
            let g2 = g_eval(Filter::G2, mu, t, TAU);
            let tol = 1e-13 * (1.0 + g2.abs() / TAU);
            prop_assert!((g_eval(Filter::G0, mu, t, TAU) - mu as f64 * g2 / TAU).abs() <= tol);
            prop_assert!((g_eval(Filter::G3, mu, t, TAU) - (mu + 1) as f64 * g2 / TAU).abs() <= tol);
        }
    }
}
