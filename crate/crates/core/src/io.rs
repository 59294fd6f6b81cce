//! Frame streams and CSV tables.
//!
//! Binary frames are little-endian: a header of `u32` sensor count, `f64`
//! sampling rate and `u32` layout id, then per sample the `f32` channel
//! values (`2Q` for the two-channel layouts, `Q` for pressure only).

use std::io::{BufRead, Read, Write};

use crate::error::{Error, Result};
use crate::freqref::FreqCoefficients;
use crate::harmonics::HarmonicIndex;
use crate::scenesim::Measurements;
use crate::separator::CoefficientFrame;

/// Channel layout of a frame stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameLayout {
    /// `p[0..Q]` then `v[0..Q]`.
    PressureVelocity = 0,
    /// `p_out[0..Q]` then `p_in[0..Q]`.
    TwoSphere = 1,
    PressureOnly = 2,
}

impl FrameLayout {
    pub fn from_id(id: u32) -> Result<Self> {
        match id {
            0 => Ok(Self::PressureVelocity),
            1 => Ok(Self::TwoSphere),
            2 => Ok(Self::PressureOnly),
            _ => Err(Error::Parse(format!("unknown layout id {id}"))),
        }
    }

    pub fn channels(self, sensors: usize) -> usize {
        match self {
            Self::PressureOnly => sensors,
            _ => 2 * sensors,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameHeader {
    pub sensors: u32,
    pub fs: f64,
    pub layout: FrameLayout,
}

/// Channel-major samples `channels[c][n]` with their header.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStream {
    pub header: FrameHeader,
    pub channels: Vec<Vec<f64>>,
}

impl FrameStream {
    pub fn from_measurements(m: &Measurements, fs: f64) -> Self {
        let (layout, a, b) = match m {
            Measurements::PressureVelocity { p, v } => (FrameLayout::PressureVelocity, p, v),
            Measurements::TwoSphere { p_out, p_in } => (FrameLayout::TwoSphere, p_out, p_in),
        };
        Self {
            header: FrameHeader { sensors: a.len() as u32, fs, layout },
            channels: a.iter().chain(b).cloned().collect(),
        }
    }

    /// Engine input; pressure-only streams cannot be separated.
    pub fn into_measurements(self) -> Result<Measurements> {
        let q = self.header.sensors as usize;
        let mut ch = self.channels;
        let second = ch.split_off(q.min(ch.len()));
        match self.header.layout {
            FrameLayout::PressureVelocity => Ok(Measurements::PressureVelocity { p: ch, v: second }),
            FrameLayout::TwoSphere => Ok(Measurements::TwoSphere { p_out: ch, p_in: second }),
            FrameLayout::PressureOnly => Err(Error::Config("pressure-only frames carry no velocity".into())),
        }
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        let h = &self.header;
        out.write_all(&h.sensors.to_le_bytes())?;
        out.write_all(&h.fs.to_le_bytes())?;
        out.write_all(&(h.layout as u32).to_le_bytes())?;
        for n in 0..self.len() {
            for c in &self.channels {
                out.write_all(&(c[n] as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        input.read_exact(&mut b4)?;
        let sensors = u32::from_le_bytes(b4);
        input.read_exact(&mut b8)?;
        let fs = f64::from_le_bytes(b8);
        input.read_exact(&mut b4)?;
        let layout = FrameLayout::from_id(u32::from_le_bytes(b4))?;
        if !(fs > 0.0) {
            return Err(Error::Parse(format!("sampling rate {fs} in header")));
        }
        let nch = layout.channels(sensors as usize);
        let mut body = Vec::new();
        input.read_to_end(&mut body)?;
        let width = 4 * nch;
        if nch == 0 || body.len() % width != 0 {
            return Err(Error::Parse(format!("{} payload bytes do not form whole {nch}-channel frames", body.len())));
        }
        let mut channels = vec![Vec::with_capacity(body.len() / width); nch];
        for frame in body.chunks_exact(width) {
            for (c, v) in channels.iter_mut().zip(frame.chunks_exact(4)) {
                c.push(f32::from_le_bytes([v[0], v[1], v[2], v[3]]) as f64);
            }
        }
        Ok(Self { header: FrameHeader { sensors, fs, layout }, channels })
    }

    /// CSV with header `n,p_0,…,v_0,…` (or `p_out_*`/`p_in_*`, or `p_*`
    /// only); the sampling rate is not stored.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let q = self.header.sensors as usize;
        let (a, b) = match self.header.layout {
            FrameLayout::PressureVelocity => ("p", Some("v")),
            FrameLayout::TwoSphere => ("p_out", Some("p_in")),
            FrameLayout::PressureOnly => ("p", None),
        };
        let mut names = vec!["n".to_string()];
        names.extend((0..q).map(|i| format!("{a}_{i}")));
        if let Some(b) = b {
            names.extend((0..q).map(|i| format!("{b}_{i}")));
        }
        writeln!(out, "{}", names.join(","))?;
        for n in 0..self.len() {
            write!(out, "{n}")?;
            for c in &self.channels {
                write!(out, ",{}", c[n])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R, fs: f64) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty frame CSV".into()))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.first() != Some(&"n") {
            return Err(Error::Parse("frame CSV must start with an `n` column".into()));
        }
        let count = |prefix: &str| cols.iter().filter(|c| c.rsplit_once('_').is_some_and(|(p, i)| p == prefix && i.parse::<usize>().is_ok())).count();
        let (layout, q) = if count("p_out") > 0 {
            (FrameLayout::TwoSphere, count("p_out"))
        } else if count("v") > 0 {
            (FrameLayout::PressureVelocity, count("p"))
        } else {
            (FrameLayout::PressureOnly, count("p"))
        };
        let nch = layout.channels(q);
        if cols.len() != nch + 1 {
            return Err(Error::Parse(format!("expected {} columns for {q} sensors, found {}", nch + 1, cols.len())));
        }
        let mut channels = vec![Vec::new(); nch];
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<&str> = line.trim().split(',').collect();
            if vals.len() != nch + 1 {
                return Err(Error::Parse(format!("row {}: {} fields, expected {}", row + 2, vals.len(), nch + 1)));
            }
            let n: usize = vals[0].parse().map_err(|_| Error::Parse(format!("row {}: bad sample index", row + 2)))?;
            if n != channels[0].len() {
                return Err(Error::Parse(format!("row {}: sample {n} out of sequence", row + 2)));
            }
            for (c, v) in channels.iter_mut().zip(&vals[1..]) {
                c.push(v.parse().map_err(|_| Error::Parse(format!("row {}: bad value {v:?}", row + 2)))?);
            }
        }
        Ok(Self { header: FrameHeader { sensors: q as u32, fs, layout }, channels })
    }
}

/// `n,mu,nu,a_out,a_in` rows for every coefficient of every frame.
pub fn write_coefficients_csv<W: Write>(frames: &[CoefficientFrame], mut out: W) -> Result<()> {
    writeln!(out, "n,mu,nu,a_out,a_in")?;
    for f in frames {
        for idx in HarmonicIndex::iter(f.order) {
            writeln!(out, "{},{},{},{},{}", f.n, idx.mu, idx.nu, f.out(idx), f.inc(idx))?;
        }
    }
    Ok(())
}

/// `omega,mu,nu,re/im` of the outgoing and incoming bin coefficients.
pub fn write_freq_coefficients_csv<W: Write>(bins: &[FreqCoefficients], mut out: W) -> Result<()> {
    writeln!(out, "omega,mu,nu,a_out_re,a_out_im,a_in_re,a_in_im")?;
    for b in bins {
        for (k, (o, i)) in b.a_out.iter().zip(&b.a_in).enumerate() {
            let idx = HarmonicIndex::from_flat(k);
            writeln!(out, "{},{},{},{},{},{},{}", b.omega, idx.mu, idx.nu, o.re, o.im, i.re, i.im)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Measurements {
        Measurements::PressureVelocity {
            p: vec![vec![0.5, -1.25, 2.0], vec![1.0, 0.0, 3.5]],
            v: vec![vec![0.25, 0.125, -0.5], vec![-2.0, 4.0, 0.0]],
        }
    }

    #[test]
    fn binary_round_trip() {
        let s = FrameStream::from_measurements(&sample(), 48_000.0);
        let mut buf = Vec::new();
        s.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 3 * 4 * 4);
        let back = FrameStream::read_binary(buf.as_slice()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.into_measurements().unwrap(), sample());
    }

    #[test]
    fn csv_round_trip() {
        let m = Measurements::TwoSphere { p_out: vec![vec![1.0, 2.0]], p_in: vec![vec![3.0, 4.0]] };
        let s = FrameStream::from_measurements(&m, 8000.0);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("n,p_out_0,p_in_0\n"));
        let back = FrameStream::read_csv(buf.as_slice(), 8000.0).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn malformed_input_rejected() {
        let s = FrameStream::from_measurements(&sample(), 48_000.0);
        let mut buf = Vec::new();
        s.write_binary(&mut buf).unwrap();
        buf.pop();
        assert!(matches!(FrameStream::read_binary(buf.as_slice()), Err(Error::Parse(_))));
        let mut bad_layout = Vec::new();
        bad_layout.extend(1u32.to_le_bytes());
        bad_layout.extend(48_000f64.to_le_bytes());
        bad_layout.extend(9u32.to_le_bytes());
        assert!(matches!(FrameStream::read_binary(bad_layout.as_slice()), Err(Error::Parse(_))));
        assert!(FrameStream::read_csv("n,p_0,v_0\n0,1\n".as_bytes(), 1.0).is_err());
        assert!(FrameStream::read_csv("n,p_0,v_0\n1,1,2\n".as_bytes(), 1.0).is_err());
        let p_only = FrameStream::read_csv("n,p_0,p_1\n0,1,2\n".as_bytes(), 1.0).unwrap();
        assert_eq!(p_only.header.layout, FrameLayout::PressureOnly);
        assert!(p_only.into_measurements().is_err());
    }

    #[test]
    fn coefficient_rows() {
        let mut f = CoefficientFrame::zeros(1);
        f.n = 7;
        f.a_out[2] = 1.5;
        let mut buf = Vec::new();
        write_coefficients_csv(&[f], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[3], "7,1,0,1.5,0");
    }
}
