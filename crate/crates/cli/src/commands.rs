use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;
use sfsep_core::experiment::{run_freefield_detailed, run_room_detailed, run_sweep, separate, PointSeries};
use sfsep_core::filters::{filter_oracle_dft, relative_l2};
use sfsep_core::io::{write_coefficients_csv, FrameStream};
use sfsep_core::{build_filter_bank, gauss_scheme, Error, FieldFrame, Filter, SeparationReport, Separator};

use crate::config::ExperimentConfig;

/// Outcome of a command: the threshold checks it evaluated.
pub struct Outcome {
    pub checks: Vec<(String, bool)>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }
}

pub type CmdResult = Result<Outcome, Error>;

fn create(out: &Path, name: &str) -> Result<BufWriter<File>, Error> {
    fs::create_dir_all(out)?;
    Ok(BufWriter::new(File::create(out.join(name))?))
}

fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> Result<(), Error> {
    let mut w = create(out, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Parse(e.to_string()))?;
    writeln!(w)?;
    Ok(())
}

fn write_summary(out: &Path, lines: &[String]) -> Result<(), Error> {
    let mut w = create(out, "summary.txt")?;
    for l in lines {
        println!("{l}");
        writeln!(w, "{l}")?;
    }
    Ok(())
}

fn check_line(name: &str, value: f64, limit: f64) -> (String, bool) {
    let ok = value <= limit;
    (format!("{name} = {value:.2} dB (limit {limit} dB)"), ok)
}

/// Tap tables and their agreement with the inverse-DFT oracle.
pub fn gen_filters(cfg: &ExperimentConfig, out: &Path) -> CmdResult {
    let fc = &cfg.filters;
    let sep = fc.separator;
    sep.validate()?;
    let bank = build_filter_bank(&sep)?;
    bank.write_csv(create(out, "filters.csv")?)?;
    let dft_len = if fc.dft_len == 0 { (8 * bank.tap_count).next_power_of_two() } else { fc.dft_len };
    let mut w = create(out, "filter_oracle.csv")?;
    writeln!(w, "k,mu,rel_l2")?;
    let mut checks = Vec::new();
    let mut worst: f64 = 0.0;
    for mu in 0..=fc.oracle_order.min(sep.order) {
        for f in Filter::ALL {
            let oracle = filter_oracle_dft(f, mu, &sep, dft_len)?;
            let err = relative_l2(bank.taps(f, mu), &oracle);
            writeln!(w, "{},{mu},{err:e}", f.index())?;
            worst = worst.max(err);
        }
    }
    w.flush()?;
    checks.push((format!("worst oracle relative L2 = {worst:.2e} (limit 1e-2)"), worst < 1e-2));
    let mut lines = vec![format!("filters: R = {} m, c = {} m/s, fs = {} Hz, {} taps", sep.r, sep.c, sep.fs, bank.tap_count)];
    lines.extend(checks.iter().map(|(l, _)| l.clone()));
    write_summary(out, &lines)?;
    write_json(out, "report.json", &json!({ "scenario": "filters", "config": cfg, "worst_rel_l2": worst, "dft_len": dft_len }))?;
    Ok(Outcome { checks })
}

fn write_series(out: &Path, s: &PointSeries) -> Result<(), Error> {
    let mut w = create(out, "point_series.csv")?;
    writeln!(w, "n,truth,estimate,total")?;
    for (n, ((t, e), p)) in s.truth.iter().zip(&s.estimate).zip(&s.total).enumerate() {
        writeln!(w, "{n},{t},{e},{p}")?;
    }
    w.flush()?;
    Ok(())
}

fn write_xi_table(out: &Path, report: &SeparationReport, points: &str) -> Result<(), Error> {
    let mut w = create(out, "xi.csv")?;
    writeln!(w, "metric,point,N,omega,run,xi_db")?;
    for ((q, pooled), runs) in report.xi_point.iter().zip(&report.xi_point_runs) {
        for (r, v) in runs.iter().enumerate() {
            writeln!(w, "xi_point,{q},,,{r},{v}")?;
        }
        writeln!(w, "xi_point,{q},,,pooled,{pooled}")?;
    }
    if let Some(v) = report.xi_sphere {
        writeln!(w, "xi_sphere,grid,,,pooled,{v}")?;
    }
    if let Some(t) = &report.xi_n_omega {
        let db = t.db()?;
        for (n, row) in t.orders.iter().zip(&db) {
            for (f, v) in t.freqs.iter().zip(row) {
                writeln!(w, "xi_N_omega,{points},{n},{},pooled,{v}", 2.0 * std::f64::consts::PI * f)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn freefield(cfg: &ExperimentConfig, out: &Path) -> CmdResult {
    let (report, runs) = run_freefield_detailed(&cfg.freefield, cfg.seed, cfg.runs)?;
    write_series(out, &runs[0].series)?;
    write_xi_table(out, &report, "")?;
    let (q, xi) = report.xi_point[0];
    let mut checks = vec![check_line(&format!("xi_{} (sensor {})", q + 1, q + 1), xi, -25.0)];
    if let Some(s) = report.xi_sphere {
        checks.push(check_line("xi_sphere", s, -25.0));
    }
    let worst_balance = runs.iter().map(|r| r.balance_db.abs()).fold(0.0, f64::max);
    let mut lines = vec![format!(
        "free field: {} runs, window samples [{}, {}), plane-wave balance within {worst_balance:.2} dB",
        report.runs, report.window.0, report.window.1
    )];
    lines.extend(checks.iter().map(|(l, _)| l.clone()));
    write_summary(out, &lines)?;
    write_json(out, "report.json", &json!({ "scenario": "freefield", "config": cfg, "report": report }))?;
    Ok(Outcome { checks })
}

pub fn room(cfg: &ExperimentConfig, out: &Path) -> CmdResult {
    let (report, runs) = run_room_detailed(&cfg.room, cfg.seed, cfg.runs)?;
    write_series(out, &runs[0].series)?;
    write_xi_table(out, &report, "")?;
    let (q, xi) = report.xi_point[0];
    let checks = vec![check_line(&format!("xi_{} (sensor {})", q + 1, q + 1), xi, -25.0)];
    let mut lines = vec![format!("room: {} runs, window samples [{}, {})", report.runs, report.window.0, report.window.1)];
    lines.extend(checks.iter().map(|(l, _)| l.clone()));
    write_summary(out, &lines)?;
    write_json(out, "report.json", &json!({ "scenario": "room", "config": cfg, "report": report }))?;
    Ok(Outcome { checks })
}

pub fn sweep(cfg: &ExperimentConfig, out: &Path) -> CmdResult {
    let report = run_sweep(&cfg.sweep, cfg.seed, cfg.runs)?;
    let points = format!("gauss{}", cfg.sweep.scene.scheme_order);
    write_xi_table(out, &report, &points)?;
    let table = report.xi_n_omega.as_ref().expect("sweep fills the table");
    let f_hi = cfg.sweep.f_stop + cfg.sweep.f_step / 2.0;
    let means = table.band_mean(cfg.sweep.f_start, f_hi)?;
    let monotone = means.windows(2).all(|w| w[1] <= w[0]);
    let mut checks = vec![(format!("band-mean xi per order {:?} non-increasing", round2(&means)), monotone)];
    if let (Some(i4), Some(i5)) = (table.orders.iter().position(|&n| n == 4), table.orders.iter().position(|&n| n == 5)) {
        let db = table.db()?;
        let gap = table
            .freqs
            .iter()
            .enumerate()
            .filter(|(_, &f)| f < 400.0)
            .map(|(k, _)| (db[i5][k] - db[i4][k]).abs())
            .fold(0.0, f64::max);
        checks.push((format!("max |xi5 - xi4| below 400 Hz = {gap:.2} dB (limit 2 dB)"), gap < 2.0));
    }
    let mut lines = vec![format!("sweep: {} runs, orders {:?}, {} frequencies", report.runs, table.orders, table.freqs.len())];
    lines.extend(checks.iter().map(|(l, _)| l.clone()));
    write_summary(out, &lines)?;
    write_json(out, "report.json", &json!({ "scenario": "sweep", "config": cfg, "report": report }))?;
    Ok(Outcome { checks })
}

fn round2(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 100.0).round() / 100.0).collect()
}

pub fn custom(cfg: &ExperimentConfig, out: &Path) -> CmdResult {
    let c = &cfg.custom;
    let path = c.frames.as_ref().ok_or_else(|| Error::Config("custom scenario needs `custom.frames`".into()))?;
    let file = File::open(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let stream = if path.extension().is_some_and(|e| e == "csv") {
        FrameStream::read_csv(BufReader::new(file), c.separator.fs)?
    } else {
        FrameStream::read_binary(BufReader::new(file))?
    };
    if stream.header.fs != c.separator.fs {
        return Err(Error::Config(format!("frames are sampled at {} Hz, configuration says {}", stream.header.fs, c.separator.fs)));
    }
    let scheme = gauss_scheme(c.scheme_order);
    let m = stream.into_measurements()?;
    let coeffs = separate(&m, &c.separator, &scheme, c.quadrature, c.dc_blocker_hz)?;
    write_coefficients_csv(&coeffs, create(out, "coefficients.csv")?)?;
    write_summary(out, &[format!("custom: {} frames separated to order {}", coeffs.len(), c.separator.order)])?;
    write_json(out, "report.json", &json!({ "scenario": "custom", "config": cfg, "frames": coeffs.len() }))?;
    Ok(Outcome { checks: vec![] })
}

/// Per-step latency statistics in nanoseconds.
#[derive(Debug, Clone, Serialize)]
pub struct StepStats {
    pub order: usize,
    pub sensors: usize,
    pub taps: usize,
    pub steps: usize,
    pub mean_ns: f64,
    pub p50_ns: f64,
    pub p99_ns: f64,
    pub max_ns: f64,
    pub budget_ns: f64,
}

pub fn time_steps(sep_cfg: sfsep_core::SeparatorConfig, scheme_order: usize, steps: usize) -> Result<StepStats, Error> {
    let scheme = gauss_scheme(scheme_order);
    let mut sep = Separator::new(sep_cfg, &scheme, Default::default())?;
    let q = scheme.len();
    let frame_at = |n: usize| FieldFrame {
        n: n as u64,
        p: (0..q).map(|i| ((n * 7 + i * 13) as f64 * 0.011).sin()).collect(),
        v: (0..q).map(|i| ((n * 5 + i * 3) as f64 * 0.017).cos() * 1e-3).collect(),
    };
    let warm = sep.tap_count() * 2;
    let frames: Vec<FieldFrame> = (0..warm + steps).map(frame_at).collect();
    let mut out = sfsep_core::CoefficientFrame::zeros(sep_cfg.order);
    for f in &frames[..warm] {
        sep.step_into(f, &mut out)?;
    }
    let mut ns = Vec::with_capacity(steps);
    for f in &frames[warm..] {
        let t = Instant::now();
        sep.step_into(f, &mut out)?;
        ns.push(t.elapsed().as_nanos() as f64);
    }
    std::hint::black_box(&out);
    ns.sort_by(f64::total_cmp);
    let pick = |p: f64| ns[((ns.len() - 1) as f64 * p).round() as usize];
    Ok(StepStats {
        order: sep_cfg.order,
        sensors: q,
        taps: sep.tap_count(),
        steps,
        mean_ns: ns.iter().sum::<f64>() / ns.len() as f64,
        p50_ns: pick(0.5),
        p99_ns: pick(0.99),
        max_ns: pick(1.0),
        budget_ns: 1e9 / sep_cfg.fs,
    })
}

pub fn bench(cfg: &ExperimentConfig, out: &Path) -> CmdResult {
    let b = &cfg.bench;
    if b.steps == 0 {
        return Err(Error::Config("bench.steps must be positive".into()));
    }
    let full = time_steps(b.separator, b.scheme_order, b.steps)?;
    let zero = time_steps(sfsep_core::SeparatorConfig { order: 0, ..b.separator }, b.scheme_order, b.steps)?;
    let checks = vec![(
        format!("p99 step {:.0} ns against the {:.0} ns sample period", full.p99_ns, full.budget_ns),
        full.p99_ns < full.budget_ns,
    )];
    let mut lines = Vec::new();
    for s in [&full, &zero] {
        lines.push(format!(
            "order {} ({} sensors, {} taps): mean {:.0} ns, p50 {:.0} ns, p99 {:.0} ns, max {:.0} ns, {:.1}x real time",
            s.order,
            s.sensors,
            s.taps,
            s.mean_ns,
            s.p50_ns,
            s.p99_ns,
            s.max_ns,
            s.budget_ns / s.mean_ns
        ));
    }
    lines.extend(checks.iter().map(|(l, _)| l.clone()));
    write_summary(out, &lines)?;
    write_json(out, "bench.json", &json!({ "config": cfg.bench, "order_n": full, "order_0": zero }))?;
    Ok(Outcome { checks })
}
