//! End-to-end scenarios: free-field and room separation, the order and
//! frequency sweep, and the closure and cross-method checks.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::Quadrature;
use crate::freqref::separate_bin;
use crate::harmonics::HarmonicIndex;
use crate::metrics::{post_warmup_window, xi_order_freq, ErrorEnergy, SeparationReport, XiTable};
use crate::sampling::{equal_angle_grid, gauss_scheme, Direction, SamplingScheme, ShtMatrix, SynthesisMatrix};
use crate::scenesim::{
    add_noise, bandlimited_noise, mean_power, planewave_field, sphere_sensors, spherical_packing, Fields, Layout, Measurements,
    PlaneWaveSpec, Role, RoomSpec, Scene, SensorArray, SourceSpec, Vec3, FD_HALF, NOISE_FILTER_ORDER,
};
use crate::separator::{CoefficientFrame, InputFrame, MidsphereApprox, Separator, SeparatorConfig};

/// Independent seed for component `k` of run `run`.
pub fn derive_seed(seed: u64, run: u64, k: u64) -> u64 {
    // splitmix64 finalizer over a mixed key
    let mut z = seed ^ run.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ k.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Interior point source inside a bath of plane waves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FreefieldConfig {
    pub separator: SeparatorConfig,
    /// Order of the Gauss sampling scheme.
    pub scheme_order: usize,
    pub quadrature: Quadrature,
    pub layout: Layout,
    /// High-pass cutoff on the two-sphere velocity estimate, Hz.
    pub dc_blocker_hz: Option<f64>,
    pub target: Vec3,
    pub plane_waves: usize,
    pub band: [f64; 2],
    pub snr_db: f64,
    pub ir_len: usize,
    /// Zero-based sensor for the point metric.
    pub eval_sensor: usize,
    /// Point-metric window length after warm-up, samples.
    pub window_len: usize,
    /// `[n_θ, n_φ]` of the sphere grid; `[0, 0]` skips the sphere metric.
    pub sphere_grid: [usize; 2],
    /// Sample at which the sphere metric is taken.
    pub sphere_time: usize,
}

impl Default for FreefieldConfig {
    fn default() -> Self {
        Self {
            separator: SeparatorConfig { r: 0.65, order: 5, ..Default::default() },
            scheme_order: 6,
            quadrature: Quadrature::default(),
            layout: Layout::PressureVelocity,
            dc_blocker_hz: None,
            target: [0.0, 0.0, 0.3],
            plane_waves: 100,
            band: [100.0, 600.0],
            snr_db: 40.0,
            ir_len: 1024,
            eval_sensor: 16,
            window_len: 480,
            sphere_grid: [180, 360],
            sphere_time: 480,
        }
    }
}

impl FreefieldConfig {
    pub fn validate(&self) -> Result<()> {
        self.separator.validate()?;
        let q = gauss_scheme(self.scheme_order).len();
        if self.eval_sensor >= q {
            return Err(Error::Config(format!("eval_sensor {} outside the {q}-point scheme", self.eval_sensor)));
        }
        if self.separator.order > self.scheme_order {
            return Err(Error::Order { requested: self.separator.order, available: self.scheme_order });
        }
        if crate::scenesim::norm(self.target) >= self.separator.r {
            return Err(Error::Config("target must lie inside the separation sphere".into()));
        }
        if self.window_len == 0 {
            return Err(Error::Config("window_len must be positive".into()));
        }
        Ok(())
    }

    fn samples(&self) -> usize {
        let k = self.separator.tap_count();
        (k + 1 + self.window_len).max(self.sphere_time + 1)
    }
}

/// Samples kept ahead of time zero so every convolution starts full.
fn pre_roll(ir_len: usize, radius: f64, cfg: &SeparatorConfig) -> usize {
    let bulk = Scene::planewave_bulk(radius, cfg) + radius / cfg.c * cfg.fs;
    ir_len.max(bulk.ceil() as usize) + 2 * FD_HALF
}

fn scaled_sum(a: &Fields, b: &Fields, k: f64) -> Fields {
    let mix = |x: &Vec<Vec<f64>>, y: &Vec<Vec<f64>>| {
        x.iter().zip(y).map(|(u, v)| u.iter().zip(v).map(|(p, q)| p + k * q).collect()).collect()
    };
    Fields { p: mix(&a.p, &b.p), v: mix(&a.v, &b.v) }
}

/// One free-field realization.
pub struct FreefieldScene {
    pub scene: Scene,
    pub measurements: Measurements,
    /// Plane-wave to target pressure power on the sphere, dB.
    pub balance_db: f64,
}

/// Builds the measured field of run `run`: target plus plane waves scaled to
/// the target's pressure power on the sphere, plus sensor noise.
pub fn freefield_scene(cfg: &FreefieldConfig, scheme: &SamplingScheme, seed: u64, run: u64, len: usize) -> Result<FreefieldScene> {
    let sep = &cfg.separator;
    let reach = sep.r + sep.delta_r;
    let pre = pre_roll(cfg.ir_len, reach, sep);
    let total = pre + len;
    let target = SourceSpec {
        position: cfg.target,
        signal: bandlimited_noise(cfg.band, NOISE_FILTER_ORDER, total, sep.fs, derive_seed(seed, run, 0))?,
        role: Role::Target,
    };
    let waves = spherical_packing(cfg.plane_waves)
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            Ok(PlaneWaveSpec {
                direction: d,
                signal: bandlimited_noise(cfg.band, NOISE_FILTER_ORDER, total, sep.fs, derive_seed(seed, run, 1 + i as u64))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let src_scene = Scene { sources: vec![target], plane_waves: vec![], room: None, pre_roll: pre, len, ir_len: cfg.ir_len };
    let bulk = Scene::planewave_bulk(reach, sep);
    let fields_at = |radius: f64| -> Result<(Fields, Fields)> {
        let sensors = sphere_sensors(&scheme.points, radius);
        let t = src_scene.measure(&sensors, sep)?;
        let mut pw = Fields::zeros(sensors.len(), len);
        for w in &waves {
            let f = planewave_field(w, &sensors, sep, pre, len, bulk)?;
            pw = scaled_sum(&pw, &f, 1.0);
        }
        Ok((t, pw))
    };
    let (t_mid, pw_mid) = fields_at(sep.r)?;
    let p_pw = mean_power(&pw_mid.p);
    let gain = if p_pw > 0.0 { (mean_power(&t_mid.p) / p_pw).sqrt() } else { 0.0 };
    // the gain is fitted on all samples; the balance is checked after warm-up
    let tail = |f: &Vec<Vec<f64>>| f.iter().map(|r| r[(sep.tap_count() + 1).min(len)..].to_vec()).collect::<Vec<_>>();
    let balance_db = if cfg.plane_waves == 0 {
        f64::NEG_INFINITY
    } else {
        10.0 * (gain * gain * mean_power(&tail(&pw_mid.p)) / mean_power(&tail(&t_mid.p))).log10()
    };
    let mut measurements = match cfg.layout {
        Layout::PressureVelocity => {
            let f = scaled_sum(&t_mid, &pw_mid, gain);
            Measurements::PressureVelocity { p: f.p, v: f.v }
        }
        Layout::TwoSphere => {
            let (t_o, pw_o) = fields_at(sep.r + sep.delta_r)?;
            let (t_i, pw_i) = fields_at(sep.r - sep.delta_r)?;
            Measurements::TwoSphere { p_out: scaled_sum(&t_o, &pw_o, gain).p, p_in: scaled_sum(&t_i, &pw_i, gain).p }
        }
    };
    add_noise(&mut measurements, cfg.snr_db, derive_seed(seed, run, u64::MAX));
    let mut waves = waves;
    for w in &mut waves {
        w.signal.iter_mut().for_each(|x| *x *= gain);
    }
    let scene = Scene { plane_waves: waves, ..src_scene };
    Ok(FreefieldScene { scene, measurements, balance_db })
}

fn engine(cfg: &SeparatorConfig, scheme: &SamplingScheme, quadrature: Quadrature, dc_blocker_hz: Option<f64>) -> Result<Separator> {
    let mut sep = Separator::new(*cfg, scheme, quadrature)?;
    if let Some(fc) = dc_blocker_hz {
        sep = sep.with_midsphere(MidsphereApprox::new(cfg, scheme.len())?.with_dc_blocker(fc, cfg.fs));
    }
    Ok(sep)
}

/// Runs the engine over every frame of `m`.
pub fn separate(m: &Measurements, cfg: &SeparatorConfig, scheme: &SamplingScheme, quadrature: Quadrature, dc_blocker_hz: Option<f64>) -> Result<Vec<CoefficientFrame>> {
    engine(cfg, scheme, quadrature, dc_blocker_hz)?.run_stream(m.frames())
}

/// Outgoing synthesis at one direction for every frame.
pub fn outgoing_series(coeffs: &[CoefficientFrame], direction: Direction) -> Vec<f64> {
    let order = coeffs.first().map_or(0, |c| c.order);
    let synth = SynthesisMatrix::new(&[direction], order);
    coeffs.iter().map(|c| synth.eval(0, &c.a_out, order)).collect()
}

/// Outgoing truth, separated estimate and measured total pressure at the
/// evaluation sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSeries {
    pub truth: Vec<f64>,
    pub estimate: Vec<f64>,
    pub total: Vec<f64>,
}

fn total_pressure(m: &Measurements, q: usize) -> Vec<f64> {
    match m {
        Measurements::PressureVelocity { p, .. } => p[q].clone(),
        Measurements::TwoSphere { p_out, p_in } => p_out[q].iter().zip(&p_in[q]).map(|(a, b)| 0.5 * (a + b)).collect(),
    }
}

/// Per-run diagnostics of the free-field scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreefieldRun {
    pub point: ErrorEnergy,
    pub sphere: Option<ErrorEnergy>,
    pub balance_db: f64,
    pub series: PointSeries,
}

/// A single free-field realization with the point and sphere metrics.
pub fn freefield_run(cfg: &FreefieldConfig, seed: u64, run: u64) -> Result<FreefieldRun> {
    cfg.validate()?;
    let scheme = gauss_scheme(cfg.scheme_order);
    let sep = cfg.separator;
    let len = cfg.samples();
    let fs = freefield_scene(cfg, &scheme, seed, run, len)?;
    let coeffs = separate(&fs.measurements, &sep, &scheme, cfg.quadrature, cfg.dc_blocker_hz)?;
    let dir = scheme.points[cfg.eval_sensor];
    let truth = fs.scene.outgoing_truth(&sphere_sensors(&[dir], sep.r).positions, sep.r, &sep)?;
    let est = outgoing_series(&coeffs, dir);
    let w = post_warmup_window(sep.tap_count(), cfg.window_len);
    let point = ErrorEnergy::between(&truth[0][w.clone()], &est[w.clone()])?;
    let sphere = if cfg.sphere_grid[0] * cfg.sphere_grid[1] > 0 {
        let grid = equal_angle_grid(cfg.sphere_grid[0], cfg.sphere_grid[1]);
        let positions = sphere_sensors(&grid, sep.r).positions;
        let t = fs.scene.outgoing_truth_at(&positions, cfg.sphere_time, sep.r, &sep)?;
        let e = SynthesisMatrix::new(&grid, sep.order).eval_all(&coeffs[cfg.sphere_time].a_out, sep.order);
        Some(ErrorEnergy::between(&t, &e)?)
    } else {
        None
    };
    let series = PointSeries { truth: truth[0].clone(), estimate: est, total: total_pressure(&fs.measurements, cfg.eval_sensor) };
    Ok(FreefieldRun { point, sphere, balance_db: fs.balance_db, series })
}

fn pooled_report(
    points: Vec<(usize, Vec<ErrorEnergy>)>,
    sphere: Option<Vec<ErrorEnergy>>,
    window: std::ops::Range<usize>,
    runs: usize,
) -> Result<SeparationReport> {
    let mut xi_point = Vec::new();
    let mut xi_point_runs = Vec::new();
    for (q, es) in points {
        let mut pooled = ErrorEnergy::default();
        es.iter().for_each(|e| pooled.add(*e));
        xi_point.push((q, pooled.db()?));
        xi_point_runs.push(es.iter().map(ErrorEnergy::db).collect::<Result<Vec<_>>>()?);
    }
    let xi_sphere = match sphere {
        Some(es) => {
            let mut pooled = ErrorEnergy::default();
            es.iter().for_each(|e| pooled.add(*e));
            Some(pooled.db()?)
        }
        None => None,
    };
    Ok(SeparationReport {
        xi_point,
        xi_point_runs,
        xi_sphere,
        xi_n_omega: None,
        warmup_excluded: true,
        window: (window.start, window.end),
        runs,
    })
}

/// Free-field scenario pooled over `runs` realizations.
pub fn run_freefield(cfg: &FreefieldConfig, seed: u64, runs: usize) -> Result<SeparationReport> {
    Ok(run_freefield_detailed(cfg, seed, runs)?.0)
}

/// As [`run_freefield`], also returning each run.
pub fn run_freefield_detailed(cfg: &FreefieldConfig, seed: u64, runs: usize) -> Result<(SeparationReport, Vec<FreefieldRun>)> {
    if runs == 0 {
        return Err(Error::Config("at least one run is required".into()));
    }
    let results = (0..runs as u64).map(|r| freefield_run(cfg, seed, r)).collect::<Result<Vec<_>>>()?;
    let sphere = results.iter().map(|r| r.sphere).collect::<Option<Vec<_>>>();
    let report = pooled_report(
        vec![(cfg.eval_sensor, results.iter().map(|r| r.point).collect())],
        sphere,
        post_warmup_window(cfg.separator.tap_count(), cfg.window_len),
        runs,
    )?;
    Ok((report, results))
}

/// Source on the floor of a reverberant room with a floor-mounted
/// hemispherical array, mirrored to a full sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoomConfig {
    pub separator: SeparatorConfig,
    pub scheme_order: usize,
    pub quadrature: Quadrature,
    pub room: RoomSpec,
    pub target: Vec3,
    pub interferer: Vec3,
    pub band: [f64; 2],
    pub snr_db: f64,
    pub eval_sensor: usize,
    pub window_len: usize,
}

impl Default for RoomConfig {
    fn default() -> Self {
        Self {
            separator: SeparatorConfig { r: 0.5, order: 0, ..Default::default() },
            scheme_order: 1,
            quadrature: Quadrature::default(),
            room: RoomSpec::uniform([4.0, 5.0, 3.0], [-1.8, -1.5, 0.0], 0.99, 3, 8192),
            target: [0.0; 3],
            interferer: [0.7, 0.8, 0.7],
            band: [100.0, 300.0],
            snr_db: 40.0,
            eval_sensor: 0,
            window_len: 480,
        }
    }
}

impl RoomConfig {
    pub fn validate(&self) -> Result<()> {
        self.separator.validate()?;
        if self.separator.order > self.scheme_order {
            return Err(Error::Order { requested: self.separator.order, available: self.scheme_order });
        }
        if self.target[2] != 0.0 {
            return Err(Error::Config("the target must sit on the floor z = 0".into()));
        }
        let upper = gauss_scheme(self.scheme_order).upper_hemisphere();
        if !upper.contains(&self.eval_sensor) {
            return Err(Error::Config(format!("eval_sensor {} is not an upper-hemisphere sensor", self.eval_sensor)));
        }
        Ok(())
    }
}

/// Per-run diagnostics of the room scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomRun {
    pub point: ErrorEnergy,
    pub series: PointSeries,
}

/// A single room realization. Only the upper sensors are simulated; the
/// lower half of the scheme reuses the mirrored readings.
pub fn room_run(cfg: &RoomConfig, seed: u64, run: u64) -> Result<RoomRun> {
    cfg.validate()?;
    let sep = cfg.separator;
    let scheme = gauss_scheme(cfg.scheme_order);
    let upper = scheme.upper_hemisphere();
    let map = scheme.floor_mirror_map()?;
    let all = sphere_sensors(&scheme.points, sep.r);
    let sensors: SensorArray = all.subset(&upper);
    let len = sep.tap_count() + 1 + cfg.window_len;
    let pre = cfg.room.ir_len + 2 * FD_HALF;
    let signal = |k| bandlimited_noise(cfg.band, NOISE_FILTER_ORDER, pre + len, sep.fs, derive_seed(seed, run, k));
    let target = SourceSpec { position: cfg.target, signal: signal(0)?, role: Role::Target };
    let mut interferer = SourceSpec { position: cfg.interferer, signal: signal(1)?, role: Role::Interferer };
    let scene = Scene { sources: vec![], plane_waves: vec![], room: Some(cfg.room.clone()), pre_roll: pre, len, ir_len: cfg.room.ir_len };
    let f_t = scene.source_field(&target, &sensors, &sep)?;
    let f_i = scene.source_field(&interferer, &sensors, &sep)?;
    let p_i = mean_power(&f_i.p);
    let gain = if p_i > 0.0 { (mean_power(&f_t.p) / p_i).sqrt() } else { 0.0 };
    interferer.signal.iter_mut().for_each(|x| *x *= gain);
    let f = scaled_sum(&f_t, &f_i, gain);
    let mut upper_m = Measurements::PressureVelocity { p: f.p, v: f.v };
    add_noise(&mut upper_m, cfg.snr_db, derive_seed(seed, run, u64::MAX));
    // scheme sensor q reads upper sensor position(map[q]) in `upper`
    let idx: Vec<usize> = map
        .iter()
        .map(|m| upper.iter().position(|u| u == m).ok_or_else(|| Error::Geometry("mirror map leaves the upper hemisphere".into())))
        .collect::<Result<_>>()?;
    let measurements = upper_m.remap(&idx);
    let coeffs = separate(&measurements, &sep, &scheme, cfg.quadrature, None)?;
    let scene = Scene { sources: vec![target, interferer], ..scene };
    let dir = scheme.points[cfg.eval_sensor];
    let truth = scene.outgoing_truth(&sphere_sensors(&[dir], sep.r).positions, sep.r, &sep)?;
    let est = outgoing_series(&coeffs, dir);
    let w = post_warmup_window(sep.tap_count(), cfg.window_len);
    let point = ErrorEnergy::between(&truth[0][w.clone()], &est[w])?;
    let series = PointSeries { truth: truth[0].clone(), estimate: est, total: total_pressure(&measurements, cfg.eval_sensor) };
    Ok(RoomRun { point, series })
}

/// Room scenario pooled over `runs` realizations.
pub fn run_room(cfg: &RoomConfig, seed: u64, runs: usize) -> Result<SeparationReport> {
    Ok(run_room_detailed(cfg, seed, runs)?.0)
}

/// As [`run_room`], also returning each run.
pub fn run_room_detailed(cfg: &RoomConfig, seed: u64, runs: usize) -> Result<(SeparationReport, Vec<RoomRun>)> {
    if runs == 0 {
        return Err(Error::Config("at least one run is required".into()));
    }
    let results = (0..runs as u64).map(|r| room_run(cfg, seed, r)).collect::<Result<Vec<_>>>()?;
    let report = pooled_report(
        vec![(cfg.eval_sensor, results.iter().map(|r| r.point).collect())],
        None,
        post_warmup_window(cfg.separator.tap_count(), cfg.window_len),
        runs,
    )?;
    Ok((report, results))
}

/// Order and frequency sweep over the scheme points of the free-field scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub scene: FreefieldConfig,
    pub orders: Vec<usize>,
    pub f_start: f64,
    pub f_stop: f64,
    pub f_step: f64,
    /// Analysis length after warm-up, samples.
    pub analysis_len: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            scene: FreefieldConfig { sphere_grid: [0, 0], ..Default::default() },
            orders: (0..=5).collect(),
            f_start: 100.0,
            f_stop: 600.0,
            f_step: 1.0,
            analysis_len: 12_000,
        }
    }
}

impl SweepConfig {
    pub fn freqs(&self) -> Vec<f64> {
        let n = ((self.f_stop - self.f_start) / self.f_step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.f_start + i as f64 * self.f_step).collect()
    }
}

/// `ξ^N(ω)` for one realization; lower orders are partial sums of a single
/// run at the highest order.
pub fn sweep_run(cfg: &SweepConfig, seed: u64, run: u64) -> Result<XiTable> {
    let ff = &cfg.scene;
    ff.validate()?;
    let top = *cfg.orders.iter().max().ok_or_else(|| Error::Config("no orders requested".into()))?;
    let sep = SeparatorConfig { order: top, ..ff.separator };
    let ff = FreefieldConfig { separator: sep, ..ff.clone() };
    ff.validate()?;
    let scheme = gauss_scheme(ff.scheme_order);
    let k = sep.tap_count();
    let len = k + 1 + cfg.analysis_len;
    let fs = freefield_scene(&ff, &scheme, seed, run, len)?;
    let coeffs = separate(&fs.measurements, &sep, &scheme, ff.quadrature, ff.dc_blocker_hz)?;
    let truth = fs.scene.outgoing_truth(&sphere_sensors(&scheme.points, sep.r).positions, sep.r, &sep)?;
    xi_order_freq(&truth, &coeffs, &scheme.points, &cfg.orders, &cfg.freqs(), sep.fs, post_warmup_window(k, cfg.analysis_len))
}

/// Sweep pooled over runs.
pub fn run_sweep(cfg: &SweepConfig, seed: u64, runs: usize) -> Result<SeparationReport> {
    if runs == 0 {
        return Err(Error::Config("at least one run is required".into()));
    }
    let mut table = sweep_run(cfg, seed, 0)?;
    for r in 1..runs as u64 {
        table.pool(&sweep_run(cfg, seed, r)?)?;
    }
    let k = cfg.scene.separator.tap_count();
    let w = post_warmup_window(k, cfg.analysis_len);
    Ok(SeparationReport {
        xi_point: vec![],
        xi_point_runs: vec![],
        xi_sphere: None,
        xi_n_omega: Some(table),
        warmup_excluded: true,
        window: (w.start, w.end),
        runs,
    })
}

/// Energy of `a_out + a_in − a` relative to `a` after warm-up, where `a` is
/// the harmonic transform of the measured pressure. Noiseless free-field
/// scene.
pub fn closure_db(cfg: &FreefieldConfig, seed: u64) -> Result<f64> {
    let ff = FreefieldConfig { snr_db: f64::INFINITY, layout: Layout::PressureVelocity, ..cfg.clone() };
    ff.validate()?;
    let scheme = gauss_scheme(ff.scheme_order);
    let sep = ff.separator;
    let len = sep.tap_count() + 1 + ff.window_len;
    let fs = freefield_scene(&ff, &scheme, seed, 0, len)?;
    let coeffs = separate(&fs.measurements, &sep, &scheme, ff.quadrature, None)?;
    let sht = ShtMatrix::new(&scheme, sep.order)?;
    let mut e = ErrorEnergy::default();
    let mut lam = vec![0.0; sht.harmonics()];
    for n in post_warmup_window(sep.tap_count(), ff.window_len) {
        let InputFrame::Field(frame) = fs.measurements.frame(n) else { unreachable!() };
        sht.forward_into(&frame.p, &mut lam)?;
        let c = &coeffs[n];
        let sum: Vec<f64> = c.a_out.iter().zip(&c.a_in).map(|(o, i)| o + i).collect();
        e.add(ErrorEnergy::between(&lam, &sum)?);
    }
    e.db()
}

/// Complex amplitude `X` of `x[n] = Re(X e^{iωn/fs})` over whole periods.
pub fn tone_amplitude(x: &[f64], freq: f64, fs: f64) -> Complex64 {
    let w = 2.0 * PI * freq / fs;
    let sum: Complex64 = x.iter().enumerate().map(|(n, &v)| v * Complex64::from_polar(1.0, -w * n as f64)).sum();
    sum * (2.0 / x.len() as f64)
}

/// Relative amplitude difference between the streaming outgoing
/// coefficients and the frequency-domain reference on a single tone.
pub fn cross_check(cfg: &FreefieldConfig, freq: f64, periods: usize) -> Result<f64> {
    cfg.validate()?;
    let sep = cfg.separator;
    let scheme = gauss_scheme(cfg.scheme_order);
    let period = sep.fs / freq;
    if (period - period.round()).abs() > 1e-9 {
        return Err(Error::Config(format!("{freq} Hz is not a whole number of samples per period")));
    }
    let span = periods * period.round() as usize;
    let k = sep.tap_count();
    let len = k + 1 + span;
    let pre = pre_roll(cfg.ir_len, sep.r, &sep);
    let tone = |phase: f64| (0..pre + len).map(|n| (2.0 * PI * freq * n as f64 / sep.fs + phase).cos()).collect::<Vec<_>>();
    let target = SourceSpec { position: cfg.target, signal: tone(0.0), role: Role::Target };
    let waves: Vec<PlaneWaveSpec> = spherical_packing(cfg.plane_waves.max(1))
        .into_iter()
        .enumerate()
        .map(|(i, d)| PlaneWaveSpec { direction: d, signal: tone(2.399 * i as f64) })
        .collect();
    let sensors = sphere_sensors(&scheme.points, sep.r);
    let scene = Scene { sources: vec![target], plane_waves: vec![], room: None, pre_roll: pre, len, ir_len: cfg.ir_len };
    let ft = scene.measure(&sensors, &sep)?;
    let fw = Scene { sources: vec![], plane_waves: waves, ..scene }.measure(&sensors, &sep)?;
    // incoming and outgoing of equal power on the sphere
    let gain = (mean_power(&ft.p) / mean_power(&fw.p)).sqrt();
    let f = scaled_sum(&ft, &fw, gain);
    let m = Measurements::PressureVelocity { p: f.p.clone(), v: f.v.clone() };
    let coeffs = separate(&m, &sep, &scheme, cfg.quadrature, None)?;
    let tail = k + 1..len;
    let h = HarmonicIndex::count(sep.order);
    let time_out: Vec<Complex64> = (0..h)
        .map(|i| {
            let s: Vec<f64> = coeffs[tail.clone()].iter().map(|c| c.a_out[i]).collect();
            tone_amplitude(&s, freq, sep.fs)
        })
        .collect();
    let sht = ShtMatrix::new(&scheme, sep.order)?;
    let amp = |series: &Vec<Vec<f64>>| -> Result<Vec<Complex64>> {
        let c: Vec<Complex64> = series.iter().map(|s| tone_amplitude(&s[tail.clone()], freq, sep.fs)).collect();
        let re = sht.forward(&c.iter().map(|z| z.re).collect::<Vec<_>>())?;
        let im = sht.forward(&c.iter().map(|z| z.im).collect::<Vec<_>>())?;
        Ok(re.data.iter().zip(&im.data).map(|(&a, &b)| Complex64::new(a, b)).collect())
    };
    let reference = separate_bin(&amp(&f.p)?, &amp(&f.v)?, 2.0 * PI * freq, &sep)?;
    let num: f64 = time_out.iter().zip(&reference.a_out).map(|(a, b)| (a - b).norm_sqr()).sum();
    let den: f64 = reference.a_out.iter().map(|b| b.norm_sqr()).sum();
    Ok((num / den).sqrt())
}
