//! Streaming separation of outgoing and incoming harmonic coefficients.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::filters::{build_filter_bank, Filter, FilterBank, Kernels, Quadrature};
use crate::harmonics::{sh_basis, HarmonicIndex};
use crate::sampling::{Direction, SamplingScheme, ShtMatrix};

/// Geometry and timing of a separation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeparatorConfig {
    /// Radius of the separation sphere, m.
    pub r: f64,
    /// Half gap between the two measurement spheres of a two-sphere array, m.
    pub delta_r: f64,
    /// Speed of sound, m/s.
    pub c: f64,
    /// Air density, kg/m³.
    pub rho0: f64,
    /// Sampling rate, Hz.
    pub fs: f64,
    /// Truncation order.
    pub order: usize,
}

impl Default for SeparatorConfig {
    fn default() -> Self {
        Self { r: 0.5, delta_r: 0.005, c: 343.0, rho0: 1.225, fs: 48_000.0, order: 5 }
    }
}

impl SeparatorConfig {
    pub fn tau_r(&self) -> f64 {
        self.r / self.c
    }

    pub fn delta_t(&self) -> f64 {
        1.0 / self.fs
    }

    /// `ceil(2 f_s τ_R) + 1`.
    pub fn tap_count(&self) -> usize {
        tap_count(self.r, self.c, self.fs)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("r", self.r), ("c", self.c), ("rho0", self.rho0), ("fs", self.fs), ("delta_r", self.delta_r)];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.delta_r >= self.r / 10.0 {
            return Err(Error::Config(format!(
                "delta_r = {} must be below r/10 = {}",
                self.delta_r,
                self.r / 10.0
            )));
        }
        if self.order > crate::harmonics::MAX_ORDER {
            return Err(Error::Config(format!("order {} above {}", self.order, crate::harmonics::MAX_ORDER)));
        }
        Ok(())
    }
}

pub(crate) fn tap_count(r: f64, c: f64, fs: f64) -> usize {
    // the small slack keeps exact integers such as 2·fs·τ = 140 from
    // rounding up through representation error
    let span = 2.0 * fs * r / c;
    (span - 1e-9 * span.max(1.0)).ceil() as usize + 1
}

/// Pressure and radial velocity on the separation sphere at one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldFrame {
    pub n: u64,
    pub p: Vec<f64>,
    pub v: Vec<f64>,
}

/// Pressure on the outer (`R + δ_R`) and inner (`R − δ_R`) spheres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSphereFrame {
    pub n: u64,
    pub p_out: Vec<f64>,
    pub p_in: Vec<f64>,
}

/// Outgoing and incoming harmonic coefficients at one sample, flat
/// `μ² + μ + ν` layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientFrame {
    pub n: u64,
    pub order: usize,
    pub a_out: Vec<f64>,
    pub a_in: Vec<f64>,
    /// Set while the filter history still holds startup zeros.
    pub warm_up: bool,
}

impl CoefficientFrame {
    pub fn zeros(order: usize) -> Self {
        let k = HarmonicIndex::count(order);
        Self { n: 0, order, a_out: vec![0.0; k], a_in: vec![0.0; k], warm_up: true }
    }

    pub fn out(&self, idx: HarmonicIndex) -> f64 {
        self.a_out[idx.flat()]
    }

    pub fn inc(&self, idx: HarmonicIndex) -> f64 {
        self.a_in[idx.flat()]
    }
}

/// Synthesis of outgoing and incoming pressure at `direction`.
pub fn reconstruct(coeffs: &CoefficientFrame, direction: Direction) -> (f64, f64) {
    let basis = sh_basis(coeffs.order, direction.theta, direction.phi);
    let dot = |c: &[f64]| basis.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
    (dot(&coeffs.a_out), dot(&coeffs.a_in))
}

/// Mid-sphere pressure and velocity from a two-sphere array.
#[derive(Debug, Clone)]
pub struct MidsphereApprox {
    dt_over_rho: f64,
    inv_gap: f64,
    v: Vec<f64>,
    blocker: Option<DcBlocker>,
    next_n: Option<u64>,
}

#[derive(Debug, Clone)]
struct DcBlocker {
    pole: f64,
    x_prev: Vec<f64>,
    y_prev: Vec<f64>,
}

impl MidsphereApprox {
    pub fn new(cfg: &SeparatorConfig, points: usize) -> Result<Self> {
        if !(cfg.delta_r > 0.0) {
            return Err(Error::Config("delta_r must be positive for a two-sphere array".into()));
        }
        Ok(Self {
            dt_over_rho: cfg.delta_t() / cfg.rho0,
            inv_gap: 1.0 / (2.0 * cfg.delta_r),
            v: vec![0.0; points],
            blocker: None,
            next_n: None,
        })
    }

    /// Enables a first-order DC blocker on the integrated velocity.
    pub fn with_dc_blocker(mut self, cutoff_hz: f64, fs: f64) -> Self {
        let q = self.v.len();
        self.blocker = Some(DcBlocker {
            pole: 1.0 - 2.0 * PI * cutoff_hz / fs,
            x_prev: vec![0.0; q],
            y_prev: vec![0.0; q],
        });
        self
    }

    /// `p = (p_out + p_in)/2` and the Euler-equation update
    /// `v(n) = v(n−1) − (δt/ρ₀)(p_out − p_in)/(2δ_R)`.
    pub fn approx(&mut self, two: &TwoSphereFrame) -> Result<FieldFrame> {
        let q = self.v.len();
        check_len(q, two.p_out.len())?;
        check_len(q, two.p_in.len())?;
        check_sequence(&mut self.next_n, two.n)?;
        let mut p = Vec::with_capacity(q);
        for i in 0..q {
            p.push(0.5 * (two.p_out[i] + two.p_in[i]));
            self.v[i] -= self.dt_over_rho * (two.p_out[i] - two.p_in[i]) * self.inv_gap;
        }
        let v = match &mut self.blocker {
            None => self.v.clone(),
            Some(b) => (0..q)
                .map(|i| {
                    let y = self.v[i] - b.x_prev[i] + b.pole * b.y_prev[i];
                    b.x_prev[i] = self.v[i];
                    b.y_prev[i] = y;
                    y
                })
                .collect(),
        };
        Ok(FieldFrame { n: two.n, p, v })
    }
}

fn check_sequence(next: &mut Option<u64>, got: u64) -> Result<()> {
    if let Some(expected) = *next {
        if got != expected {
            return Err(Error::Sequence { expected, got });
        }
    }
    *next = Some(got + 1);
    Ok(())
}

/// Tap-major history of all harmonic signals. Each frame is stored twice
/// so the newest-first window is always one contiguous block of rows.
#[derive(Debug, Clone)]
struct History {
    len: usize,
    channels: usize,
    pos: usize,
    buf: Vec<f64>,
}

impl History {
    fn new(len: usize, channels: usize) -> Self {
        Self { len, channels, pos: 0, buf: vec![0.0; 2 * len * channels] }
    }

    fn push(&mut self, values: &[f64]) {
        self.pos = if self.pos == 0 { self.len - 1 } else { self.pos - 1 };
        let k = self.channels;
        self.buf[self.pos * k..(self.pos + 1) * k].copy_from_slice(values);
        let twin = self.pos + self.len;
        self.buf[twin * k..(twin + 1) * k].copy_from_slice(values);
    }

    /// Row `m` of the window holds every channel `m` samples back.
    fn window(&self) -> &[f64] {
        &self.buf[self.pos * self.channels..(self.pos + self.len) * self.channels]
    }

    fn clear(&mut self) {
        self.buf.iter_mut().for_each(|x| *x = 0.0);
        self.pos = 0;
    }
}

/// Adds the filter sums of the `2μ + 1` harmonics of one order, columns
/// `c0..c0 + width` of each history row.
#[inline(always)]
fn accumulate_order_generic(
    w: [&[f64]; 5],
    rho_c: f64,
    hist: [&[f64]; 3],
    stride: usize,
    c0: usize,
    a_out: &mut [f64],
    a_in: &mut [f64],
) {
    let width = a_out.len();
    let [w0, w1, w2, w3, w4] = w;
    let [lam, dlam, deta] = hist;
    for m in 0..w0.len() {
        let row = m * stride + c0;
        let (l, dl, de) = (&lam[row..row + width], &dlam[row..row + width], &deta[row..row + width]);
        let (g0, g1, g2, g3, g4) = (w0[m], w1[m], rho_c * w2[m], w3[m], w4[m]);
        for j in 0..width {
            let vel = g2 * de[j];
            a_out[j] += g0 * l[j] + g1 * dl[j] + vel;
            a_in[j] += g3 * l[j] + g4 * dl[j] - vel;
        }
    }
}

// Same arithmetic, compiled for wider vectors. Lanes are independent, so
// results are bit-identical to the baseline build.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn accumulate_order_avx2(w: [&[f64]; 5], rho_c: f64, hist: [&[f64]; 3], stride: usize, c0: usize, a_out: &mut [f64], a_in: &mut [f64]) {
    accumulate_order_generic(w, rho_c, hist, stride, c0, a_out, a_in)
}

fn wide_vectors() -> bool {
    #[cfg(target_arch = "x86_64")]
    {
        std::arch::is_x86_feature_detected!("avx2")
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        false
    }
}

fn accumulate_order(wide: bool, w: [&[f64]; 5], rho_c: f64, hist: [&[f64]; 3], stride: usize, c0: usize, a_out: &mut [f64], a_in: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    if wide {
        // SAFETY: `wide` is only set when the CPU reports AVX2.
        return unsafe { accumulate_order_avx2(w, rho_c, hist, stride, c0, a_out, a_in) };
    }
    let _ = wide;
    accumulate_order_generic(w, rho_c, hist, stride, c0, a_out, a_in)
}

/// The streaming separation engine.
#[derive(Debug, Clone)]
pub struct Separator {
    cfg: SeparatorConfig,
    kernels: Kernels,
    sht: ShtMatrix,
    lambda: History,
    d_lambda: History,
    d_eta: History,
    lam_now: Vec<f64>,
    eta_now: Vec<f64>,
    lam_prev: Vec<f64>,
    eta_prev: Vec<f64>,
    scratch: Vec<f64>,
    next_n: Option<u64>,
    processed: u64,
    mid: Option<MidsphereApprox>,
    wide: bool,
}

impl Separator {
    pub fn new(cfg: SeparatorConfig, scheme: &SamplingScheme, quadrature: Quadrature) -> Result<Self> {
        cfg.validate()?;
        let bank = build_filter_bank(&cfg)?;
        Self::from_bank(cfg, &bank, scheme, quadrature)
    }

    pub fn from_bank(cfg: SeparatorConfig, bank: &FilterBank, scheme: &SamplingScheme, quadrature: Quadrature) -> Result<Self> {
        cfg.validate()?;
        if bank.order < cfg.order {
            return Err(Error::Order { requested: cfg.order, available: bank.order });
        }
        let sht = ShtMatrix::new(scheme, cfg.order)?;
        let k = sht.harmonics();
        let tn = bank.tap_count;
        Ok(Self {
            cfg,
            kernels: bank.kernels(quadrature),
            sht,
            lambda: History::new(tn, k),
            d_lambda: History::new(tn, k),
            d_eta: History::new(tn, k),
            lam_now: vec![0.0; k],
            eta_now: vec![0.0; k],
            lam_prev: vec![0.0; k],
            eta_prev: vec![0.0; k],
            scratch: vec![0.0; k],
            next_n: None,
            processed: 0,
            mid: None,
            wide: wide_vectors(),
        })
    }

    pub fn config(&self) -> &SeparatorConfig {
        &self.cfg
    }

    pub fn tap_count(&self) -> usize {
        self.kernels.tap_count
    }

    pub fn points(&self) -> usize {
        self.sht.points()
    }

    /// Adds the two-sphere front end used by [`Separator::step_two_sphere`].
    pub fn with_midsphere(mut self, mid: MidsphereApprox) -> Self {
        self.mid = Some(mid);
        self
    }

    /// Back to the zero initial state.
    pub fn reset(&mut self) -> Result<()> {
        for h in [&mut self.lambda, &mut self.d_lambda, &mut self.d_eta] {
            h.clear();
        }
        for v in [&mut self.lam_prev, &mut self.eta_prev] {
            v.iter_mut().for_each(|x| *x = 0.0);
        }
        self.next_n = None;
        self.processed = 0;
        if let Some(mid) = &self.mid {
            self.mid = Some(MidsphereApprox::new(&self.cfg, mid.v.len())?);
        }
        Ok(())
    }

    pub fn step(&mut self, frame: &FieldFrame) -> Result<CoefficientFrame> {
        let mut out = CoefficientFrame::zeros(self.cfg.order);
        self.step_into(frame, &mut out)?;
        Ok(out)
    }

    /// As [`Separator::step`], writing into an existing frame.
    pub fn step_into(&mut self, frame: &FieldFrame, out: &mut CoefficientFrame) -> Result<()> {
        let q = self.sht.points();
        check_len(q, frame.p.len())?;
        check_len(q, frame.v.len())?;
        check_len(self.lam_now.len(), out.a_out.len())?;
        check_len(self.lam_now.len(), out.a_in.len())?;
        let mut next = self.next_n;
        check_sequence(&mut next, frame.n)?;
        self.next_n = next;

        self.sht.forward_into(&frame.p, &mut self.lam_now)?;
        self.sht.forward_into(&frame.v, &mut self.eta_now)?;
        self.lambda.push(&self.lam_now);
        for (s, (a, b)) in self.scratch.iter_mut().zip(self.lam_now.iter().zip(&self.lam_prev)) {
            *s = a - b;
        }
        self.d_lambda.push(&self.scratch);
        for (s, (a, b)) in self.scratch.iter_mut().zip(self.eta_now.iter().zip(&self.eta_prev)) {
            *s = a - b;
        }
        self.d_eta.push(&self.scratch);
        std::mem::swap(&mut self.lam_now, &mut self.lam_prev);
        std::mem::swap(&mut self.eta_now, &mut self.eta_prev);

        let rho_c = self.cfg.rho0 * self.cfg.c;
        let k = self.lam_now.len();
        let hist = [self.lambda.window(), self.d_lambda.window(), self.d_eta.window()];
        out.a_out.iter_mut().chain(out.a_in.iter_mut()).for_each(|x| *x = 0.0);
        for mu in 0..=self.cfg.order {
            let kn = &self.kernels;
            let w = [
                kn.weights(Filter::G0, mu),
                kn.weights(Filter::G1, mu),
                kn.weights(Filter::G2, mu),
                kn.weights(Filter::G3, mu),
                kn.weights(Filter::G4, mu),
            ];
            let span = mu * mu..(mu + 1) * (mu + 1);
            accumulate_order(self.wide, w, rho_c, hist, k, span.start, &mut out.a_out[span.clone()], &mut out.a_in[span]);
        }
        self.processed += 1;
        out.n = frame.n;
        out.order = self.cfg.order;
        out.warm_up = self.processed < self.kernels.tap_count as u64;
        Ok(())
    }

    /// Two-sphere input through the mid-sphere approximation.
    pub fn step_two_sphere(&mut self, frame: &TwoSphereFrame) -> Result<CoefficientFrame> {
        let q = self.sht.points();
        let field = {
            let cfg = self.cfg;
            let mid = match &mut self.mid {
                Some(m) => m,
                None => self.mid.insert(MidsphereApprox::new(&cfg, q)?),
            };
            mid.approx(frame)?
        };
        self.step(&field)
    }

    /// One coefficient frame per input frame.
    pub fn run_stream<I>(&mut self, frames: I) -> Result<Vec<CoefficientFrame>>
    where
        I: IntoIterator<Item = InputFrame>,
    {
        frames
            .into_iter()
            .map(|f| match f {
                InputFrame::Field(f) => self.step(&f),
                InputFrame::TwoSphere(f) => self.step_two_sphere(&f),
            })
            .collect()
    }
}

/// Either measurement layout.
#[derive(Debug, Clone, PartialEq)]
pub enum InputFrame {
    Field(FieldFrame),
    TwoSphere(TwoSphereFrame),
}
