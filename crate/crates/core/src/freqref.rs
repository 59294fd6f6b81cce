//! Frequency-domain separation, per bin and by block STFT processing.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::harmonics::{sph_bessel_j, sph_bessel_j_prime, sph_hankel2, sph_hankel2_prime, HarmonicIndex};
use crate::sampling::{SamplingScheme, ShtMatrix};
use crate::separator::SeparatorConfig;

/// Pressure and velocity coefficients at one frequency with their
/// separated outgoing and incoming parts. Flat `μ² + μ + ν` layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqCoefficients {
    pub omega: f64,
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
    pub a_out: Vec<Complex64>,
    pub a_in: Vec<Complex64>,
}

/// Per-order transfer factors `[out ← A, out ← B, in ← A, in ← B]`.
pub fn bin_response(mu: usize, omega: f64, cfg: &SeparatorConfig) -> Result<[Complex64; 4]> {
    if !(omega > 0.0) {
        return Err(Error::Domain(format!("omega must be positive, got {omega}")));
    }
    let x = omega * cfg.r / cfg.c;
    let i = Complex64::new(0.0, 1.0);
    let h = sph_hankel2(mu, x)?;
    let hp = sph_hankel2_prime(mu, x)?;
    let j = sph_bessel_j(mu, x);
    let jp = sph_bessel_j_prime(mu, x);
    let x2 = x * x;
    let rho_c = cfg.rho0 * cfg.c;
    let vel = h * (rho_c * x2 * j);
    Ok([-i * x2 * jp * h, vel, i * x2 * j * hp, -vel])
}

/// `A_out = −i x² j'_μ h_μ A + ρ₀c x² j_μ h_μ B`,
/// `A_in = i x² j_μ h'_μ A − ρ₀c x² j_μ h_μ B`, with `x = ωR/c`.
pub fn separate_bin(a: &[Complex64], b: &[Complex64], omega: f64, cfg: &SeparatorConfig) -> Result<FreqCoefficients> {
    check_len(a.len(), b.len())?;
    let mut a_out = Vec::with_capacity(a.len());
    let mut a_in = Vec::with_capacity(a.len());
    let mut cached: Option<(usize, [Complex64; 4])> = None;
    for (k, (&ak, &bk)) in a.iter().zip(b).enumerate() {
        let mu = HarmonicIndex::from_flat(k).mu;
        let r = match cached {
            Some((m, r)) if m == mu => r,
            _ => {
                let r = bin_response(mu, omega, cfg)?;
                cached = Some((mu, r));
                r
            }
        };
        a_out.push(r[0] * ak + r[1] * bk);
        a_in.push(r[2] * ak + r[3] * bk);
    }
    Ok(FreqCoefficients { omega, a: a.to_vec(), b: b.to_vec(), a_out, a_in })
}

// ω → 0 limits of the transfer factors.
fn dc_response(mu: usize) -> [Complex64; 4] {
    let d = (2 * mu + 1) as f64;
    let re = |v: f64| Complex64::new(v, 0.0);
    [re(mu as f64 / d), re(0.0), re((mu + 1) as f64 / d), re(0.0)]
}

// Transfer factors per order and FFT bin; negative frequencies are conjugated.
fn response_table(cfg: &SeparatorConfig, nfft: usize) -> Result<Vec<Vec<[Complex64; 4]>>> {
    (0..=cfg.order)
        .map(|mu| {
            (0..nfft)
                .map(|b| {
                    let kb = if b <= nfft / 2 { b as f64 } else { b as f64 - nfft as f64 };
                    let omega = 2.0 * PI * kb * cfg.fs / nfft as f64;
                    if b == 0 {
                        Ok(dc_response(mu))
                    } else if omega < 0.0 {
                        bin_response(mu, -omega, cfg).map(|r| r.map(|z| z.conj()))
                    } else {
                        bin_response(mu, omega, cfg)
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

/// Block parameters of the STFT reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub window: usize,
    pub hop: usize,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self { window: 1024, hop: 256 }
    }
}

/// Separated coefficient time series from the STFT reference.
#[derive(Debug, Clone, PartialEq)]
pub struct StftOutput {
    pub order: usize,
    /// `a_out[k][n]`, harmonic `k` at sample `n`.
    pub a_out: Vec<Vec<f64>>,
    pub a_in: Vec<Vec<f64>>,
    /// Frame latency of the block method, seconds.
    pub latency_s: f64,
}

/// Hann-windowed overlap-add separation of per-sensor pressure `p[q][n]`
/// and radial velocity `v[q][n]`.
///
/// Frames are zero padded to twice the window so the per-bin products act
/// as linear rather than circular convolutions.
pub fn stft_separate(
    p: &[Vec<f64>],
    v: &[Vec<f64>],
    scheme: &SamplingScheme,
    cfg: &SeparatorConfig,
    stft: StftConfig,
) -> Result<StftOutput> {
    let w = stft.window;
    if !w.is_power_of_two() || stft.hop == 0 || stft.hop > w {
        return Err(Error::Config(format!("window {w} must be a power of two and 0 < hop {} ≤ window", stft.hop)));
    }
    check_len(scheme.len(), p.len())?;
    check_len(scheme.len(), v.len())?;
    let len = p.first().map_or(0, Vec::len);
    for s in p.iter().chain(v) {
        check_len(len, s.len())?;
    }
    let sht = ShtMatrix::new(scheme, cfg.order)?;
    let k_count = sht.harmonics();

    // harmonic channel series, padded by a window on both sides
    let padded = len + 2 * w;
    let mut lam = vec![vec![0.0; padded]; k_count];
    let mut eta = vec![vec![0.0; padded]; k_count];
    let mut col_p = vec![0.0; scheme.len()];
    let mut col_v = vec![0.0; scheme.len()];
    let mut out_l = vec![0.0; k_count];
    let mut out_e = vec![0.0; k_count];
    for n in 0..len {
        for q in 0..scheme.len() {
            col_p[q] = p[q][n];
            col_v[q] = v[q][n];
        }
        sht.forward_into(&col_p, &mut out_l)?;
        sht.forward_into(&col_v, &mut out_e)?;
        for k in 0..k_count {
            lam[k][w + n] = out_l[k];
            eta[k][w + n] = out_e[k];
        }
    }

    let nfft = 2 * w;
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(nfft);
    let inv = planner.plan_fft_inverse(nfft);
    let window: Vec<f64> = (0..w).map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / w as f64).cos()).collect();

    let responses = response_table(cfg, nfft)?;

    let mut acc_out = vec![vec![0.0; padded + nfft]; k_count];
    let mut acc_in = vec![vec![0.0; padded + nfft]; k_count];
    let mut wsum = vec![0.0; padded + nfft];
    let mut fa = vec![Complex64::new(0.0, 0.0); nfft];
    let mut fb = vec![Complex64::new(0.0, 0.0); nfft];
    let mut fo = vec![Complex64::new(0.0, 0.0); nfft];
    let mut fi = vec![Complex64::new(0.0, 0.0); nfft];
    let mut start = 0;
    while start + w <= padded {
        for (i, wv) in window.iter().enumerate() {
            wsum[start + i] += wv;
        }
        for k in 0..k_count {
            let mu = HarmonicIndex::from_flat(k).mu;
            for i in 0..nfft {
                let (x, y) = if i < w { (lam[k][start + i] * window[i], eta[k][start + i] * window[i]) } else { (0.0, 0.0) };
                fa[i] = Complex64::new(x, 0.0);
                fb[i] = Complex64::new(y, 0.0);
            }
            fwd.process(&mut fa);
            fwd.process(&mut fb);
            for i in 0..nfft {
                let r = &responses[mu][i];
                fo[i] = r[0] * fa[i] + r[1] * fb[i];
                fi[i] = r[2] * fa[i] + r[3] * fb[i];
            }
            inv.process(&mut fo);
            inv.process(&mut fi);
            for i in 0..nfft {
                acc_out[k][start + i] += fo[i].re / nfft as f64;
                acc_in[k][start + i] += fi[i].re / nfft as f64;
            }
        }
        start += stft.hop;
    }
    // the padded interior sees a constant window sum
    let norm = wsum[w + len / 2];
    let a_out = acc_out.iter().map(|s| s[w..w + len].iter().map(|x| x / norm).collect()).collect();
    let a_in = acc_in.iter().map(|s| s[w..w + len].iter().map(|x| x / norm).collect()).collect();
    Ok(StftOutput { order: cfg.order, a_out, a_in, latency_s: w as f64 / cfg.fs })
}
