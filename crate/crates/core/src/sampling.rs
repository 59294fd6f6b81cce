//! Sphere sampling schemes and the discrete spherical harmonic transforms.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::harmonics::{sh_basis, sh_basis_into, HarmonicIndex};

/// A direction on the unit sphere, colatitude `theta ∈ [0, π]` and azimuth `phi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub theta: f64,
    pub phi: f64,
}

impl Direction {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self { theta, phi }
    }

    pub fn unit_vector(self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    pub fn from_vector(v: [f64; 3]) -> Self {
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let theta = (v[2] / r).clamp(-1.0, 1.0).acos();
        let phi = v[1].atan2(v[0]);
        Self { theta, phi }
    }

    /// Mirror image through the `z = 0` plane.
    pub fn mirrored(self) -> Self {
        Self { theta: PI - self.theta, phi: self.phi }
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending nodes.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            if n == 0 {
                break;
            }
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Sampling points on the sphere with quadrature weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingScheme {
    pub points: Vec<Direction>,
    /// Weights in steradians; they sum to `4π`.
    pub weights: Vec<f64>,
    /// Highest harmonic order that is integrated exactly.
    pub order: usize,
}

impl SamplingScheme {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points on or above the `z = 0` plane.
    pub fn upper_hemisphere(&self) -> Vec<usize> {
        (0..self.len()).filter(|&q| self.points[q].theta <= PI / 2.0 + 1e-12).collect()
    }

    /// For each point, the index of the upper-hemisphere point whose
    /// measurement it takes when a half-space array is duplicated about the
    /// floor. Upper points map to themselves.
    pub fn floor_mirror_map(&self) -> Result<Vec<usize>> {
        let upper = self.upper_hemisphere();
        (0..self.len())
            .map(|q| {
                let d = self.points[q];
                if d.theta <= PI / 2.0 + 1e-12 {
                    return Ok(q);
                }
                let m = d.mirrored().unit_vector();
                upper
                    .iter()
                    .copied()
                    .find(|&u| {
                        let v = self.points[u].unit_vector();
                        (0..3).all(|i| (v[i] - m[i]).abs() < 1e-9)
                    })
                    .ok_or_else(|| Error::Geometry(format!("scheme point {q} has no mirror partner")))
            })
            .collect()
    }

    /// CSV with columns `q, theta, phi, gamma`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "q,theta,phi,gamma")?;
        for (q, (d, w)) in self.points.iter().zip(&self.weights).enumerate() {
            writeln!(out, "{q},{:.17e},{:.17e},{:.17e}", d.theta, d.phi, w)?;
        }
        Ok(())
    }
}

/// `L`-th order Gauss scheme: `L+1` Gauss–Legendre colatitudes by `2(L+1)`
/// equispaced azimuths, `Q = 2(L+1)²`. Points are ordered colatitude-major,
/// starting nearest the north pole.
pub fn gauss_scheme(order: usize) -> SamplingScheme {
    let n_theta = order + 1;
    let n_phi = 2 * (order + 1);
    let (nodes, w) = gauss_legendre(n_theta);
    let mut points = Vec::with_capacity(n_theta * n_phi);
    let mut weights = Vec::with_capacity(n_theta * n_phi);
    // descending cos θ = ascending θ
    for i in (0..n_theta).rev() {
        let theta = nodes[i].clamp(-1.0, 1.0).acos();
        for j in 0..n_phi {
            points.push(Direction::new(theta, 2.0 * PI * j as f64 / n_phi as f64));
            weights.push(PI / (order + 1) as f64 * w[i]);
        }
    }
    let total: f64 = weights.iter().sum();
    let fix = 4.0 * PI / total;
    weights.iter_mut().for_each(|w| *w *= fix);
    SamplingScheme { points, weights, order }
}

/// Equal-angle grid `θ_i = iπ/n_θ`, `φ_j = 2πj/n_φ`; used only for
/// evaluation and rendering.
pub fn equal_angle_grid(n_theta: usize, n_phi: usize) -> Vec<Direction> {
    let mut out = Vec::with_capacity(n_theta * n_phi);
    for i in 0..n_theta {
        for j in 0..n_phi {
            out.push(Direction::new(
                PI * i as f64 / n_theta as f64,
                2.0 * PI * j as f64 / n_phi as f64,
            ));
        }
    }
    out
}

/// Real spherical harmonic coefficients up to `order`, flat `μ² + μ + ν` layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShCoefficients {
    pub order: usize,
    pub data: Vec<f64>,
}

impl ShCoefficients {
    pub fn zeros(order: usize) -> Self {
        Self { order, data: vec![0.0; HarmonicIndex::count(order)] }
    }

    pub fn get(&self, idx: HarmonicIndex) -> f64 {
        self.data[idx.flat()]
    }

    pub fn set(&mut self, idx: HarmonicIndex, v: f64) {
        self.data[idx.flat()] = v;
    }
}

/// `coeff[μν] = Σ_q γ_q f(Θ_q) Y_{μν}(Θ_q)`.
pub fn forward_sht(values: &[f64], scheme: &SamplingScheme, order: usize) -> Result<ShCoefficients> {
    ShtMatrix::new(scheme, order)?.forward(values)
}

/// Truncated synthesis `Σ_{μ≤N} Σ_ν coeff[μν] Y_{μν}(direction)`.
pub fn inverse_sht(coeffs: &ShCoefficients, direction: Direction) -> f64 {
    inverse_sht_order(coeffs, direction, coeffs.order)
}

/// As [`inverse_sht`] but truncated at `order ≤ coeffs.order`.
pub fn inverse_sht_order(coeffs: &ShCoefficients, direction: Direction, order: usize) -> f64 {
    let order = order.min(coeffs.order);
    let basis = sh_basis(order, direction.theta, direction.phi);
    basis.iter().zip(&coeffs.data).map(|(y, c)| y * c).sum()
}

/// Precomputed analysis matrix `γ_q Y_{μν}(Θ_q)` for repeated transforms.
#[derive(Debug, Clone)]
pub struct ShtMatrix {
    order: usize,
    points: usize,
    /// Row per harmonic, column per point.
    rows: Vec<f64>,
}

impl ShtMatrix {
    pub fn new(scheme: &SamplingScheme, order: usize) -> Result<Self> {
        if order > scheme.order {
            return Err(Error::Order { requested: order, available: scheme.order });
        }
        let k = HarmonicIndex::count(order);
        let q = scheme.len();
        let mut rows = vec![0.0; k * q];
        let mut basis = vec![0.0; k];
        for (j, (d, w)) in scheme.points.iter().zip(&scheme.weights).enumerate() {
            sh_basis_into(order, d.theta, d.phi, &mut basis);
            for (i, y) in basis.iter().enumerate() {
                rows[i * q + j] = w * y;
            }
        }
        Ok(Self { order, points: q, rows })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn harmonics(&self) -> usize {
        HarmonicIndex::count(self.order)
    }

    pub fn forward_into(&self, values: &[f64], out: &mut [f64]) -> Result<()> {
        check_len(self.points, values.len())?;
        check_len(self.harmonics(), out.len())?;
        for (o, row) in out.iter_mut().zip(self.rows.chunks_exact(self.points)) {
            *o = dot4(row, values);
        }
        Ok(())
    }

    pub fn forward(&self, values: &[f64]) -> Result<ShCoefficients> {
        let mut c = ShCoefficients::zeros(self.order);
        self.forward_into(values, &mut c.data)?;
        Ok(c)
    }
}

// four independent partial sums so the reduction is not latency bound
fn dot4(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for j in 0..4 {
            acc[j] += x[j] * y[j];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Precomputed synthesis matrix `Y_{μν}(Θ_j)` for a fixed set of directions.
#[derive(Debug, Clone)]
pub struct SynthesisMatrix {
    order: usize,
    /// Row per direction.
    rows: Vec<f64>,
}

impl SynthesisMatrix {
    pub fn new(directions: &[Direction], order: usize) -> Self {
        let k = HarmonicIndex::count(order);
        let mut rows = vec![0.0; k * directions.len()];
        for (d, row) in directions.iter().zip(rows.chunks_exact_mut(k)) {
            sh_basis_into(order, d.theta, d.phi, row);
        }
        Self { order, rows }
    }

    pub fn directions(&self) -> usize {
        self.rows.len() / HarmonicIndex::count(self.order)
    }

    /// Synthesis at direction `j` truncated at `order`.
    pub fn eval(&self, j: usize, coeffs: &[f64], order: usize) -> f64 {
        let k = HarmonicIndex::count(self.order);
        let used = HarmonicIndex::count(order.min(self.order)).min(coeffs.len());
        let row = &self.rows[j * k..j * k + used];
        row.iter().zip(coeffs).map(|(a, b)| a * b).sum()
    }

    pub fn eval_all(&self, coeffs: &[f64], order: usize) -> Vec<f64> {
        (0..self.directions()).map(|j| self.eval(j, coeffs, order)).collect()
    }
}
