//! Ground-truth scene synthesis: point sources, plane waves, rectangular
//! rooms by image sources, band-limited source signals and sensor noise.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::sampling::{Direction, SamplingScheme};
use crate::separator::{FieldFrame, InputFrame, SeparatorConfig, TwoSphereFrame};

pub type Vec3 = [f64; 3];

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot3(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm3(a: Vec3) -> f64 {
    dot3(a, a).sqrt()
}

/// Euclidean length.
pub fn norm(a: Vec3) -> f64 {
    norm3(a)
}

/// Half-length of the fractional-delay kernel; the kernel has twice this
/// many taps.
pub const FD_HALF: usize = 16;
const FD_BETA: f64 = 8.0;

// modified Bessel function I₀ by its power series
fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

/// Kaiser-windowed sinc kernel for a delay of `frac ∈ [0, 1)` samples.
/// `kernel[j]` multiplies `x[n − i − (j − FD_HALF + 1)]` for integer part `i`.
/// Normalized to unit DC gain.
pub fn fractional_delay_kernel(frac: f64) -> [f64; 2 * FD_HALF] {
    let mut h = [0.0; 2 * FD_HALF];
    let i0b = bessel_i0(FD_BETA);
    let mut sum = 0.0;
    for (j, hj) in h.iter_mut().enumerate() {
        let k = j as f64 - (FD_HALF as f64 - 1.0);
        let x = k - frac;
        let sinc = if x.abs() < 1e-12 { 1.0 } else { (PI * x).sin() / (PI * x) };
        let r = x / FD_HALF as f64;
        let w = if r.abs() >= 1.0 { 0.0 } else { bessel_i0(FD_BETA * (1.0 - r * r).sqrt()) / i0b };
        *hj = sinc * w;
        sum += *hj;
    }
    h.iter_mut().for_each(|v| *v /= sum);
    h
}

/// Adds `gain · x(t − delay)` into `out` where `x` is stored with
/// `pre_roll` leading samples (`signal[pre_roll + n]` is time `n`).
pub fn add_delayed(out: &mut [f64], signal: &[f64], pre_roll: usize, delay: f64, gain: f64) {
    let whole = delay.floor();
    let h = fractional_delay_kernel(delay - whole);
    let base = pre_roll as i64 - whole as i64 + FD_HALF as i64 - 1;
    for (n, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, hj) in h.iter().enumerate() {
            let idx = base + n as i64 - j as i64;
            if idx >= 0 && (idx as usize) < signal.len() {
                acc += hj * signal[idx as usize];
            }
        }
        *o += gain * acc;
    }
}

/// One sample of `gain · x(t − delay)` at time `n`.
pub fn delayed_sample(signal: &[f64], pre_roll: usize, n: usize, delay: f64, gain: f64) -> f64 {
    let mut out = [0.0];
    let whole = delay.floor();
    let h = fractional_delay_kernel(delay - whole);
    let base = pre_roll as i64 - whole as i64 + FD_HALF as i64 - 1 + n as i64;
    for (j, hj) in h.iter().enumerate() {
        let idx = base - j as i64;
        if idx >= 0 && (idx as usize) < signal.len() {
            out[0] += hj * signal[idx as usize];
        }
    }
    gain * out[0]
}

fn add_kernel(ir: &mut [f64], delay: f64, gain: f64) {
    let whole = delay.floor();
    let h = fractional_delay_kernel(delay - whole);
    let start = whole as i64 - (FD_HALF as i64 - 1);
    for (j, hj) in h.iter().enumerate() {
        let idx = start + j as i64;
        if idx >= 0 && (idx as usize) < ir.len() {
            ir[idx as usize] += gain * hj;
        }
    }
}

/// Sensor positions with their outward radial unit vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorArray {
    pub positions: Vec<Vec3>,
    pub normals: Vec<Vec3>,
}

impl SensorArray {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            positions: idx.iter().map(|&i| self.positions[i]).collect(),
            normals: idx.iter().map(|&i| self.normals[i]).collect(),
        }
    }
}

/// Sensors at `radius` along each scheme direction.
pub fn sphere_sensors(points: &[Direction], radius: f64) -> SensorArray {
    let normals: Vec<Vec3> = points.iter().map(|d| d.unit_vector()).collect();
    let positions = normals.iter().map(|n| [radius * n[0], radius * n[1], radius * n[2]]).collect();
    SensorArray { positions, normals }
}

/// Impulse responses from a point source to one sensor. The measured
/// velocity is `velocity * s + velocity_nearfield * S` with `S` the
/// running integral of the source signal.
#[derive(Debug, Clone, PartialEq)]
pub struct PointIr {
    pub pressure: Vec<f64>,
    pub velocity: Vec<f64>,
    pub velocity_nearfield: Vec<f64>,
}

impl PointIr {
    fn zeros(len: usize) -> Self {
        Self { pressure: vec![0.0; len], velocity: vec![0.0; len], velocity_nearfield: vec![0.0; len] }
    }

    fn add_source(&mut self, image: Vec3, sensor: Vec3, normal: Vec3, gain: f64, cfg: &SeparatorConfig) {
        let d_vec = sub(sensor, image);
        let d = norm3(d_vec);
        let delay = d / cfg.c * cfg.fs;
        let amp = gain / (4.0 * PI * d);
        let cos_a = dot3(d_vec, normal) / d;
        let v_amp = amp * cos_a / (cfg.rho0 * cfg.c);
        add_kernel(&mut self.pressure, delay, amp);
        add_kernel(&mut self.velocity, delay, v_amp);
        add_kernel(&mut self.velocity_nearfield, delay, v_amp * cfg.c / d);
    }
}

/// Free-space responses, `p = s(t − d/c)/(4πd)` and the radial velocity
/// from Euler's equation,
/// `v = cos α/(ρ₀c 4πd) [s(t − d/c) + (c/d) S(t − d/c)]`.
pub fn freefield_irs(source: Vec3, sensors: &SensorArray, cfg: &SeparatorConfig, ir_len: usize) -> Result<Vec<PointIr>> {
    sensors
        .positions
        .iter()
        .zip(&sensors.normals)
        .map(|(&x, &n)| {
            if norm3(sub(x, source)) < 1e-9 {
                return Err(Error::Geometry(format!("source {source:?} coincides with a sensor")));
            }
            let mut ir = PointIr::zeros(ir_len);
            ir.add_source(source, x, n, 1.0, cfg);
            Ok(ir)
        })
        .collect()
}

/// Shoebox room with one corner at `corner` and walls parallel to the axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomSpec {
    pub dims: Vec3,
    /// Position of the corner nearest `−∞` relative to the origin.
    pub corner: Vec3,
    /// Reflection coefficients `[x_lo, x_hi, y_lo, y_hi, z_lo, z_hi]`.
    pub reflection: [f64; 6],
    /// Image order bound per axis; `14³ = 2744` images for 3.
    pub max_order: usize,
    pub ir_len: usize,
}

impl RoomSpec {
    pub fn uniform(dims: Vec3, corner: Vec3, beta: f64, max_order: usize, ir_len: usize) -> Self {
        Self { dims, corner, reflection: [beta; 6], max_order, ir_len }
    }

    /// Images enumerated per source: `(2(2n+1))³`.
    pub fn image_count(&self) -> usize {
        (2 * (2 * self.max_order + 1)).pow(3)
    }

    fn check_inside(&self, p: Vec3, what: &str) -> Result<()> {
        for a in 0..3 {
            let x = p[a] - self.corner[a];
            if !(-1e-12..=self.dims[a] + 1e-12).contains(&x) {
                return Err(Error::Geometry(format!("{what} at {p:?} is outside the room")));
            }
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        if self.reflection.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(Error::Config("reflection coefficients must lie in [0, 1]".into()));
        }
        if self.dims.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::Config("room dimensions must be positive".into()));
        }
        self.check_inside([0.0; 3], "the origin")
    }

    /// Image positions and reflection gains for a source.
    pub fn images(&self, source: Vec3) -> Vec<(Vec3, f64)> {
        let n = self.max_order as i64;
        let s = sub(source, self.corner);
        let per_axis = |a: usize| -> Vec<(f64, f64)> {
            let mut v = Vec::new();
            for u in 0..2i64 {
                for l in -n..=n {
                    let x = (1 - 2 * u) as f64 * s[a] + 2.0 * l as f64 * self.dims[a] + self.corner[a];
                    let g = self.reflection[2 * a].powi((l - u).abs() as i32) * self.reflection[2 * a + 1].powi(l.abs() as i32);
                    v.push((x, g));
                }
            }
            v
        };
        let (ax, ay, az) = (per_axis(0), per_axis(1), per_axis(2));
        let mut out = Vec::with_capacity(ax.len() * ay.len() * az.len());
        for &(x, gx) in &ax {
            for &(y, gy) in &ay {
                for &(z, gz) in &az {
                    out.push(([x, y, z], gx * gy * gz));
                }
            }
        }
        out
    }
}

/// Image-source responses (Allen–Berkley enumeration); arrivals beyond
/// `ir_len` are dropped.
pub fn image_source_irs(source: Vec3, sensors: &SensorArray, room: &RoomSpec, cfg: &SeparatorConfig) -> Result<Vec<PointIr>> {
    room.validate()?;
    room.check_inside(source, "source")?;
    for &x in &sensors.positions {
        room.check_inside(x, "sensor")?;
    }
    let images = room.images(source);
    let horizon = room.ir_len as f64 / cfg.fs * cfg.c;
    sensors
        .positions
        .iter()
        .zip(&sensors.normals)
        .map(|(&x, &n)| {
            let mut ir = PointIr::zeros(room.ir_len);
            for &(img, g) in &images {
                let d = norm3(sub(x, img));
                if d < 1e-9 {
                    return Err(Error::Geometry("an image source coincides with a sensor".into()));
                }
                if g == 0.0 || d > horizon {
                    continue;
                }
                ir.add_source(img, x, n, g, cfg);
            }
            Ok(ir)
        })
        .collect()
}

/// Band-pass Butterworth filter as a cascade of biquads with numerators
/// `1 − z⁻²`, from the bilinear transform with prewarped band edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Butterworth {
    /// `[a1, a2]` of each `1 + a1 z⁻¹ + a2 z⁻²` denominator.
    sections: Vec<[f64; 2]>,
    gain: f64,
}

impl Butterworth {
    /// Band-pass from a low-pass prototype of order `order`; the result has
    /// `order` sections.
    pub fn bandpass(order: usize, f_lo: f64, f_hi: f64, fs: f64) -> Result<Self> {
        if !(0.0 < f_lo && f_lo < f_hi && f_hi < fs / 2.0) || order == 0 {
            return Err(Error::Config(format!("invalid band [{f_lo}, {f_hi}] Hz at fs = {fs}")));
        }
        let k = 2.0 * fs;
        let w1 = k * (PI * f_lo / fs).tan();
        let w2 = k * (PI * f_hi / fs).tan();
        let w0 = (w1 * w2).sqrt();
        let bw = w2 - w1;
        let mut sections = Vec::with_capacity(order);
        for i in 0..order {
            let theta = PI * (2 * i + order + 1) as f64 / (2 * order) as f64;
            let p = Complex64::from_polar(1.0, theta);
            let pb = p * bw;
            let disc = (pb * pb - 4.0 * w0 * w0).sqrt();
            for s in [(pb + disc) / 2.0, (pb - disc) / 2.0] {
                let z = (k + s) / (k - s);
                if z.im > 0.0 {
                    sections.push([-2.0 * z.re, z.norm_sqr()]);
                }
            }
        }
        if sections.len() != order {
            return Err(Error::Config(format!("band-pass design produced {} sections for order {order}", sections.len())));
        }
        let mut f = Self { sections, gain: 1.0 };
        let centre = 2.0 * (w0 / k).atan();
        f.gain = 1.0 / f.response(centre).norm();
        Ok(f)
    }

    /// Complex response at digital frequency `w` rad/sample.
    pub fn response(&self, w: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        let mut h = Complex64::new(self.gain, 0.0);
        for s in &self.sections {
            h *= (1.0 - z2) / (1.0 + s[0] * z1 + s[1] * z2);
        }
        h
    }

    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = x.iter().map(|v| v * self.gain).collect();
        for s in &self.sections {
            // direct form II transposed
            let (mut d1, mut d2) = (0.0, 0.0);
            for v in y.iter_mut() {
                let input = *v;
                let out = input + d1;
                d1 = -s[0] * out + d2;
                d2 = -input - s[1] * out;
                *v = out;
            }
        }
        y
    }
}

/// Prototype order of the source band-pass filters.
pub const NOISE_FILTER_ORDER: usize = 8;
/// Filter settling time discarded at the head of each noise signal, s.
pub const NOISE_SETTLE_S: f64 = 0.25;

/// Unit-variance white Gaussian noise through a band-pass Butterworth
/// filter; deterministic in `seed`.
pub fn bandlimited_noise(band: [f64; 2], order: usize, len: usize, fs: f64, seed: u64) -> Result<Vec<f64>> {
    let filt = Butterworth::bandpass(order, band[0], band[1], fs)?;
    let settle = (NOISE_SETTLE_S * fs) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let white: Vec<f64> = (0..settle + len).map(|_| StandardNormal.sample(&mut rng)).collect();
    Ok(filt.filter(&white).split_off(settle))
}

/// Near-uniform directions on the sphere (spherical Fibonacci lattice).
pub fn spherical_packing(n: usize) -> Vec<Vec3> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

/// Whether a point source is the separation target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Target,
    Interferer,
}

/// A point source; `signal[pre_roll + n]` is the strength at sample `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    pub position: Vec3,
    pub signal: Vec<f64>,
    pub role: Role,
}

/// A plane wave travelling along `direction`; `signal` shares the scene's
/// pre-roll and is the pressure at the wave's reference plane.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneWaveSpec {
    pub direction: Vec3,
    pub signal: Vec<f64>,
}

impl PlaneWaveSpec {
    fn check(&self) -> Result<()> {
        if (norm3(self.direction) - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("plane-wave direction {:?} is not a unit vector", self.direction)));
        }
        Ok(())
    }
}

/// Sources, plane waves and the optional room of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub sources: Vec<SourceSpec>,
    pub plane_waves: Vec<PlaneWaveSpec>,
    pub room: Option<RoomSpec>,
    /// Leading samples of every signal before time zero.
    pub pre_roll: usize,
    /// Samples of output.
    pub len: usize,
    /// IR length for free-field sources.
    pub ir_len: usize,
}

/// Pressure `p[i][n]` and radial velocity `v[i][n]` per sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Fields {
    pub p: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl Fields {
    pub fn zeros(sensors: usize, len: usize) -> Self {
        Self { p: vec![vec![0.0; len]; sensors], v: vec![vec![0.0; len]; sensors] }
    }

    fn add(&mut self, other: &Fields) {
        for (a, b) in self.p.iter_mut().zip(&other.p).chain(self.v.iter_mut().zip(&other.v)) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

/// Running integral by the trapezoid rule, starting from zero.
pub fn running_integral(x: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    let mut prev = 0.0;
    for &v in x {
        acc += 0.5 * (v + prev) * dt;
        prev = v;
        out.push(acc);
    }
    out
}

// out[n] += Σ_k ir[k] x[pre + n − k] over the nonzero span of `ir`
fn convolve_into(out: &mut [f64], ir: &[f64], x: &[f64], pre: usize) {
    let Some(first) = ir.iter().position(|&v| v != 0.0) else { return };
    let last = ir.iter().rposition(|&v| v != 0.0).unwrap_or(first);
    for (n, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for k in first..=last {
            let idx = pre as i64 + n as i64 - k as i64;
            if idx >= 0 && (idx as usize) < x.len() {
                acc += ir[k] * x[idx as usize];
            }
        }
        *o += acc;
    }
}

fn apply_irs(irs: &[PointIr], signal: &[f64], pre: usize, len: usize, cfg: &SeparatorConfig) -> Fields {
    let integral = running_integral(signal, cfg.delta_t());
    let mut f = Fields::zeros(irs.len(), len);
    for (i, ir) in irs.iter().enumerate() {
        convolve_into(&mut f.p[i], &ir.pressure, signal, pre);
        convolve_into(&mut f.v[i], &ir.velocity, signal, pre);
        convolve_into(&mut f.v[i], &ir.velocity_nearfield, &integral, pre);
    }
    f
}

/// Pressure and radial velocity of a plane wave at the sensors. The wave
/// reaches the origin `bulk` samples after its reference plane.
pub fn planewave_field(spec: &PlaneWaveSpec, sensors: &SensorArray, cfg: &SeparatorConfig, pre: usize, len: usize, bulk: f64) -> Result<Fields> {
    spec.check()?;
    let mut f = Fields::zeros(sensors.len(), len);
    for (i, (&x, &n)) in sensors.positions.iter().zip(&sensors.normals).enumerate() {
        let delay = bulk + dot3(spec.direction, x) / cfg.c * cfg.fs;
        add_delayed(&mut f.p[i], &spec.signal, pre, delay, 1.0);
        let k = dot3(spec.direction, n) / (cfg.rho0 * cfg.c);
        f.v[i] = f.p[i].iter().map(|p| p * k).collect();
    }
    Ok(f)
}

impl Scene {
    fn check_signals(&self) -> Result<()> {
        let need = self.pre_roll + self.len;
        for s in self.sources.iter().map(|s| &s.signal).chain(self.plane_waves.iter().map(|w| &w.signal)) {
            if s.len() < need {
                return Err(Error::Config(format!("signal has {} samples, scene needs {need}", s.len())));
            }
        }
        Ok(())
    }

    /// Bulk delay keeping every plane-wave arrival causal over `radius`.
    pub fn planewave_bulk(radius: f64, cfg: &SeparatorConfig) -> f64 {
        radius / cfg.c * cfg.fs + FD_HALF as f64
    }

    fn source_irs(&self, src: &SourceSpec, sensors: &SensorArray, cfg: &SeparatorConfig) -> Result<Vec<PointIr>> {
        match &self.room {
            Some(room) => image_source_irs(src.position, sensors, room, cfg),
            None => freefield_irs(src.position, sensors, cfg, self.ir_len),
        }
    }

    /// Noiseless pressure and velocity of one source.
    pub fn source_field(&self, src: &SourceSpec, sensors: &SensorArray, cfg: &SeparatorConfig) -> Result<Fields> {
        self.check_signals()?;
        let irs = self.source_irs(src, sensors, cfg)?;
        Ok(apply_irs(&irs, &src.signal, self.pre_roll, self.len, cfg))
    }

    /// Noiseless field of every source and plane wave.
    pub fn measure(&self, sensors: &SensorArray, cfg: &SeparatorConfig) -> Result<Fields> {
        self.check_signals()?;
        let mut total = Fields::zeros(sensors.len(), self.len);
        for s in &self.sources {
            total.add(&self.source_field(s, sensors, cfg)?);
        }
        let radius = sensors.positions.iter().map(|&x| norm3(x)).fold(0.0, f64::max);
        let bulk = Self::planewave_bulk(radius, cfg);
        for w in &self.plane_waves {
            total.add(&planewave_field(w, sensors, cfg, self.pre_roll, self.len, bulk)?);
        }
        Ok(total)
    }

    /// Target sources and their images lying inside `radius`.
    fn interior_images(&self, radius: f64) -> Vec<(&SourceSpec, Vec3, f64)> {
        let mut out = Vec::new();
        for s in self.sources.iter().filter(|s| s.role == Role::Target) {
            match &self.room {
                None => out.push((s, s.position, 1.0)),
                Some(room) => {
                    for (img, g) in room.images(s.position) {
                        if norm3(img) < radius && g != 0.0 {
                            out.push((s, img, g));
                        }
                    }
                }
            }
        }
        out
    }

    /// Outgoing pressure at `points` for every sample: the field radiated by
    /// target sources and their images inside the sphere of `radius`.
    pub fn outgoing_truth(&self, points: &[Vec3], radius: f64, cfg: &SeparatorConfig) -> Result<Vec<Vec<f64>>> {
        self.check_signals()?;
        let images = self.interior_images(radius);
        let mut out = vec![vec![0.0; self.len]; points.len()];
        for (row, &x) in out.iter_mut().zip(points) {
            for &(s, img, g) in &images {
                let d = norm3(sub(x, img));
                if d < 1e-9 {
                    return Err(Error::Geometry("evaluation point coincides with a source".into()));
                }
                add_delayed(row, &s.signal, self.pre_roll, d / cfg.c * cfg.fs, g / (4.0 * PI * d));
            }
        }
        Ok(out)
    }

    /// Outgoing pressure at `points` at sample `n` only.
    pub fn outgoing_truth_at(&self, points: &[Vec3], n: usize, radius: f64, cfg: &SeparatorConfig) -> Result<Vec<f64>> {
        self.check_signals()?;
        let images = self.interior_images(radius);
        points
            .iter()
            .map(|&x| {
                let mut acc = 0.0;
                for &(s, img, g) in &images {
                    let d = norm3(sub(x, img));
                    if d < 1e-9 {
                        return Err(Error::Geometry("evaluation point coincides with a source".into()));
                    }
                    acc += delayed_sample(&s.signal, self.pre_roll, n, d / cfg.c * cfg.fs, g / (4.0 * PI * d));
                }
                Ok(acc)
            })
            .collect()
    }
}

/// Direct plus floor-image field of a source on a reflecting floor `z = 0`
/// with reflection coefficient `beta`.
pub fn halfspace_truth(
    signal: &[f64],
    pre_roll: usize,
    len: usize,
    source: Vec3,
    points: &[Vec3],
    beta: f64,
    cfg: &SeparatorConfig,
) -> Result<Vec<Vec<f64>>> {
    let mirror = [source[0], source[1], -source[2]];
    let mut out = vec![vec![0.0; len]; points.len()];
    for (row, &x) in out.iter_mut().zip(points) {
        for (img, g) in [(source, 1.0), (mirror, beta)] {
            let d = norm3(sub(x, img));
            if d < 1e-9 {
                return Err(Error::Geometry("evaluation point coincides with a source".into()));
            }
            add_delayed(row, signal, pre_roll, d / cfg.c * cfg.fs, g / (4.0 * PI * d));
        }
    }
    Ok(out)
}

/// How the array measures the field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// Pressure and radial velocity on the separation sphere.
    PressureVelocity,
    /// Pressure on spheres of radius `R ± δ_R`.
    TwoSphere,
}

/// Noisy measurements in either layout, per-sensor series.
#[derive(Debug, Clone, PartialEq)]
pub enum Measurements {
    PressureVelocity { p: Vec<Vec<f64>>, v: Vec<Vec<f64>> },
    TwoSphere { p_out: Vec<Vec<f64>>, p_in: Vec<Vec<f64>> },
}

impl Measurements {
    pub fn sensors(&self) -> usize {
        match self {
            Self::PressureVelocity { p, .. } => p.len(),
            Self::TwoSphere { p_out, .. } => p_out.len(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::PressureVelocity { p, .. } => p.first().map_or(0, Vec::len),
            Self::TwoSphere { p_out, .. } => p_out.first().map_or(0, Vec::len),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Re-indexes sensors: output sensor `i` takes input sensor `map[i]`.
    pub fn remap(&self, map: &[usize]) -> Self {
        let pick = |s: &Vec<Vec<f64>>| map.iter().map(|&i| s[i].clone()).collect::<Vec<_>>();
        match self {
            Self::PressureVelocity { p, v } => Self::PressureVelocity { p: pick(p), v: pick(v) },
            Self::TwoSphere { p_out, p_in } => Self::TwoSphere { p_out: pick(p_out), p_in: pick(p_in) },
        }
    }

    /// Frame `n` in the engine's input format.
    pub fn frame(&self, n: usize) -> InputFrame {
        let col = |s: &Vec<Vec<f64>>| s.iter().map(|c| c[n]).collect::<Vec<_>>();
        match self {
            Self::PressureVelocity { p, v } => InputFrame::Field(FieldFrame { n: n as u64, p: col(p), v: col(v) }),
            Self::TwoSphere { p_out, p_in } => {
                InputFrame::TwoSphere(TwoSphereFrame { n: n as u64, p_out: col(p_out), p_in: col(p_in) })
            }
        }
    }

    pub fn frames(&self) -> impl Iterator<Item = InputFrame> + '_ {
        (0..self.len()).map(|n| self.frame(n))
    }

    fn channels_mut(&mut self) -> Vec<&mut Vec<f64>> {
        match self {
            Self::PressureVelocity { p, v } => p.iter_mut().chain(v.iter_mut()).collect(),
            Self::TwoSphere { p_out, p_in } => p_out.iter_mut().chain(p_in.iter_mut()).collect(),
        }
    }
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt()
}

/// Adds white Gaussian noise to every channel at `snr_db` relative to that
/// channel's RMS. Channel `c` draws from stream `c` of the seeded generator.
pub fn add_noise(m: &mut Measurements, snr_db: f64, seed: u64) {
    if snr_db.is_infinite() && snr_db > 0.0 {
        return;
    }
    for (c, ch) in m.channels_mut().into_iter().enumerate() {
        let sigma = rms(ch) * 10f64.powf(-snr_db / 20.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        for x in ch.iter_mut() {
            let e: f64 = StandardNormal.sample(&mut rng);
            *x += sigma * e;
        }
    }
}

/// One realization: measurements and the outgoing truth at the sensor
/// directions on the separation sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneTruth {
    pub measurements: Measurements,
    /// Outgoing pressure `truth[i][n]` at sensor direction `i`, radius `R`.
    pub truth: Vec<Vec<f64>>,
    pub fs: f64,
}

/// Synthesizes the measurements of `scene` at the scheme points (or the
/// subset `sensors`), adds noise, and evaluates the outgoing truth.
pub fn assemble_scene(
    scene: &Scene,
    points: &[Direction],
    cfg: &SeparatorConfig,
    layout: Layout,
    snr_db: f64,
    seed: u64,
) -> Result<SceneTruth> {
    cfg.validate()?;
    let mut measurements = match layout {
        Layout::PressureVelocity => {
            let f = scene.measure(&sphere_sensors(points, cfg.r), cfg)?;
            Measurements::PressureVelocity { p: f.p, v: f.v }
        }
        Layout::TwoSphere => {
            let outer = scene.measure(&sphere_sensors(points, cfg.r + cfg.delta_r), cfg)?;
            let inner = scene.measure(&sphere_sensors(points, cfg.r - cfg.delta_r), cfg)?;
            Measurements::TwoSphere { p_out: outer.p, p_in: inner.p }
        }
    };
    add_noise(&mut measurements, snr_db, seed);
    let truth_points = sphere_sensors(points, cfg.r).positions;
    let truth = scene.outgoing_truth(&truth_points, cfg.r, cfg)?;
    check_len(points.len(), truth.len())?;
    Ok(SceneTruth { measurements, truth, fs: cfg.fs })
}

/// Mean pressure power over sensors and samples.
pub fn mean_power(p: &[Vec<f64>]) -> f64 {
    let n: usize = p.iter().map(Vec::len).sum();
    p.iter().flatten().map(|x| x * x).sum::<f64>() / n.max(1) as f64
}

/// Scheme points on or above the floor, for half-space arrays.
pub fn upper_points(scheme: &SamplingScheme) -> Vec<Direction> {
    scheme.upper_hemisphere().into_iter().map(|i| scheme.points[i]).collect()
}
