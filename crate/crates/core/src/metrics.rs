//! Normalized separation errors in time, over a grid, and per order and
//! frequency.

use std::ops::Range;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::harmonics::HarmonicIndex;
use crate::sampling::{Direction, SynthesisMatrix};
use crate::separator::CoefficientFrame;

/// Value reported when the error energy is exactly zero, dB.
pub const XI_FLOOR_DB: f64 = -120.0;

/// Error and reference energies; sums pool across runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorEnergy {
    pub error: f64,
    pub truth: f64,
}

impl ErrorEnergy {
    pub fn between(truth: &[f64], estimate: &[f64]) -> Result<Self> {
        check_len(truth.len(), estimate.len())?;
        let mut e = Self::default();
        for (t, x) in truth.iter().zip(estimate) {
            e.error += (t - x) * (t - x);
            e.truth += t * t;
        }
        Ok(e)
    }

    pub fn add(&mut self, other: Self) {
        self.error += other.error;
        self.truth += other.truth;
    }

    /// `10 log10(error / truth)`, floored at [`XI_FLOOR_DB`].
    pub fn db(&self) -> Result<f64> {
        if !(self.truth > 0.0) {
            return Err(Error::Domain("ground truth has zero energy".into()));
        }
        if self.error <= 0.0 {
            return Ok(XI_FLOOR_DB);
        }
        Ok((10.0 * (self.error / self.truth).log10()).max(XI_FLOOR_DB))
    }
}

/// Normalized error of a time series over `window`.
pub fn xi_time(truth: &[f64], estimate: &[f64], window: Range<usize>) -> Result<f64> {
    check_len(truth.len(), estimate.len())?;
    if window.end > truth.len() || window.start >= window.end {
        return Err(Error::Length { expected: window.end, got: truth.len() });
    }
    ErrorEnergy::between(&truth[window.clone()], &estimate[window])?.db()
}

/// Normalized error over grid values at one instant.
pub fn xi_sphere(truth_grid: &[f64], estimate_grid: &[f64]) -> Result<f64> {
    ErrorEnergy::between(truth_grid, estimate_grid)?.db()
}

/// Evaluation window of `len` samples starting after the `taps`-sample
/// warm-up.
pub fn post_warmup_window(taps: usize, len: usize) -> Range<usize> {
    taps + 1..taps + 1 + len
}

/// Error energies per order and frequency, `energy[N][k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiTable {
    pub orders: Vec<usize>,
    pub freqs: Vec<f64>,
    pub energy: Vec<Vec<ErrorEnergy>>,
}

impl XiTable {
    pub fn db(&self) -> Result<Vec<Vec<f64>>> {
        self.energy.iter().map(|row| row.iter().map(ErrorEnergy::db).collect()).collect()
    }

    /// Mean of the dB values per order, over frequencies `[f_lo, f_hi)`.
    pub fn band_mean(&self, f_lo: f64, f_hi: f64) -> Result<Vec<f64>> {
        let db = self.db()?;
        Ok(db
            .iter()
            .map(|row| {
                let sel: Vec<f64> = row.iter().zip(&self.freqs).filter(|(_, &f)| f >= f_lo && f < f_hi).map(|(v, _)| *v).collect();
                sel.iter().sum::<f64>() / sel.len().max(1) as f64
            })
            .collect())
    }

    pub fn pool(&mut self, other: &XiTable) -> Result<()> {
        if self.orders != other.orders || self.freqs != other.freqs {
            return Err(Error::Config("cannot pool tables over different grids".into()));
        }
        for (a, b) in self.energy.iter_mut().zip(&other.energy) {
            for (x, y) in a.iter_mut().zip(b) {
                x.add(*y);
            }
        }
        Ok(())
    }
}

// Hann-tapered spectra of each row, zero-padded to `nfft`, at the given bins
fn spectra(rows: &[Vec<f64>], window: &Range<usize>, nfft: usize, bins: &[usize]) -> Vec<Vec<Complex64>> {
    let len = window.end - window.start;
    let fft = FftPlanner::new().plan_fft_forward(nfft);
    let taper: Vec<f64> = (0..len).map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * (i as f64 + 0.5) / len as f64).cos()).collect();
    let mut buf = vec![Complex64::default(); nfft];
    rows.iter()
        .map(|r| {
            buf.iter_mut().for_each(|z| *z = Complex64::default());
            for (i, (z, w)) in buf.iter_mut().zip(&taper).enumerate() {
                *z = Complex64::new(r[window.start + i] * w, 0.0);
            }
            fft.process(&mut buf);
            bins.iter().map(|&b| buf[b]).collect()
        })
        .collect()
}

/// `ξ^N(ω)` over a set of evaluation points: the truncated outgoing
/// synthesis of `coeffs` against `truth[q][n]`, compared in the frequency
/// domain over `window`. Frequencies are rounded to the nearest bin of a
/// transform of `fs` samples (1 Hz spacing) when the window is shorter.
pub fn xi_order_freq(
    truth: &[Vec<f64>],
    coeffs: &[CoefficientFrame],
    points: &[Direction],
    orders: &[usize],
    freqs: &[f64],
    fs: f64,
    window: Range<usize>,
) -> Result<XiTable> {
    check_len(points.len(), truth.len())?;
    let top = *orders.iter().max().ok_or_else(|| Error::Config("no orders requested".into()))?;
    let have = coeffs.first().map_or(0, |c| c.order);
    if top > have {
        return Err(Error::Order { requested: top, available: have });
    }
    for t in truth {
        check_len(coeffs.len(), t.len())?;
    }
    if window.end > coeffs.len() || window.start >= window.end {
        return Err(Error::Length { expected: window.end, got: coeffs.len() });
    }
    let len = window.end - window.start;
    let nfft = len.max(fs.round() as usize);
    let df = fs / nfft as f64;
    let bins: Vec<usize> = freqs
        .iter()
        .map(|&f| {
            if !(f > 0.0 && f < fs / 2.0) {
                return Err(Error::Domain(format!("frequency {f} Hz outside (0, fs/2)")));
            }
            Ok((f / df).round() as usize)
        })
        .collect::<Result<_>>()?;

    let k = HarmonicIndex::count(top);
    let coeff_rows: Vec<Vec<f64>> = (0..k).map(|i| coeffs.iter().map(|c| c.a_out[i]).collect()).collect();
    let a_spec = spectra(&coeff_rows, &window, nfft, &bins);
    let t_spec = spectra(truth, &window, nfft, &bins);
    let synth = SynthesisMatrix::new(points, top);

    let mut energy = vec![vec![ErrorEnergy::default(); freqs.len()]; orders.len()];
    let unit = |i: usize| {
        let mut e = vec![0.0; k];
        e[i] = 1.0;
        e
    };
    // Y_{μν}(Θ_q) for every point
    let basis: Vec<Vec<f64>> = (0..points.len()).map(|q| (0..k).map(|i| synth.eval(q, &unit(i), top)).collect()).collect();
    for (oi, &order) in orders.iter().enumerate() {
        let used = HarmonicIndex::count(order);
        for (fi, e) in energy[oi].iter_mut().enumerate() {
            for (q, yq) in basis.iter().enumerate() {
                let est: Complex64 = (0..used).map(|i| a_spec[i][fi] * yq[i]).sum();
                let t = t_spec[q][fi];
                e.error += (t - est).norm_sqr();
                e.truth += t.norm_sqr();
            }
        }
    }
    Ok(XiTable { orders: orders.to_vec(), freqs: freqs.to_vec(), energy })
}

/// Results of a scenario, pooled over runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    /// `(sensor index, ξ dB)` for each point metric.
    pub xi_point: Vec<(usize, f64)>,
    pub xi_point_runs: Vec<Vec<f64>>,
    pub xi_sphere: Option<f64>,
    pub xi_n_omega: Option<XiTable>,
    pub warmup_excluded: bool,
    /// Evaluation window in samples.
    pub window: (usize, usize),
    pub runs: usize,
}
