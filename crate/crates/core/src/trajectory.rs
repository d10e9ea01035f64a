//! Truncated Fourier loops in 3-space and the constraint projections.
//!
//! A path is `x(t) = a_0 + sum_{k=1..K} a_k cos(kt) + b_k sin(kt)` on a period of
//! `2 pi`. Real storage keeps the loop real-valued by construction. The zero-mean
//! projection kills `a_0`; the antiperiodic projection (`x(t) = -x(t + pi)`)
//! kills every even harmonic.

use std::f64::consts::{PI, TAU};

use nalgebra::Matrix3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, SeparationKind};
use crate::params::{Point, ProblemParams};

/// Default truncation order.
pub const DEFAULT_ORDER: usize = 16;
/// Default number of sampling nodes for separation checks.
pub const DEFAULT_SAMPLES: usize = 1024;

/// A truncated Fourier series describing one `2 pi`-periodic loop.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierPath {
    order: usize,
    /// `a_0 ..= a_K`; `a_0` is the mean of the loop.
    cos: Vec<Point>,
    /// `b_1 ..= b_K`, stored at index `k - 1`.
    sin: Vec<Point>,
}

impl FourierPath {
    /// The zero loop of the given order.
    pub fn zeros(order: usize) -> Self {
        assert!(order >= 1, "truncation order must be at least 1");
        Self {
            order,
            cos: vec![Point::zeros(); order + 1],
            sin: vec![Point::zeros(); order],
        }
    }

    /// Builds a path from raw coefficients. `cos` has `K + 1` entries, `sin` has `K`.
    pub fn from_coeffs(cos: Vec<Point>, sin: Vec<Point>) -> Result<Self> {
        let order = sin.len();
        if order == 0 {
            return Err(Error::domain("truncation order must be at least 1"));
        }
        if cos.len() != order + 1 {
            return Err(Error::domain(format!(
                "expected {} cosine coefficients for order {order}, got {}",
                order + 1,
                cos.len()
            )));
        }
        if cos
            .iter()
            .chain(sin.iter())
            .any(|v| !v.iter().all(|c| c.is_finite()))
        {
            return Err(Error::domain("coefficients must be finite"));
        }
        Ok(Self { order, cos, sin })
    }

    /// `x(t) = (0, R cos(t + phase), R sin(t + phase))`: a uniform circle in the yoz-plane.
    pub fn circle(order: usize, radius: f64, phase: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::domain("circle radius must be positive"));
        }
        let mut path = Self::zeros(order);
        let (s, c) = phase.sin_cos();
        // R cos(t + p) = R cos p cos t - R sin p sin t
        // R sin(t + p) = R sin p cos t + R cos p sin t
        path.cos[1] = Point::new(0.0, radius * c, radius * s);
        path.sin[0] = Point::new(0.0, -radius * s, radius * c);
        Ok(path)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `a_k`, `k = 0 ..= K`.
    pub fn cos_coeff(&self, k: usize) -> Point {
        self.cos[k]
    }

    /// `b_k`, `k = 1 ..= K`; `b_0` is identically zero.
    pub fn sin_coeff(&self, k: usize) -> Point {
        if k == 0 {
            Point::zeros()
        } else {
            self.sin[k - 1]
        }
    }

    pub fn set_cos(&mut self, k: usize, v: Point) {
        self.cos[k] = v;
    }

    pub fn set_sin(&mut self, k: usize, v: Point) {
        assert!(k >= 1, "there is no sine coefficient for k = 0");
        self.sin[k - 1] = v;
    }

    pub fn mean(&self) -> Point {
        self.cos[0]
    }

    pub fn evaluate(&self, t: f64) -> Point {
        let mut x = self.cos[0];
        for k in 1..=self.order {
            let (s, c) = (k as f64 * t).sin_cos();
            x += self.cos[k] * c + self.sin[k - 1] * s;
        }
        x
    }

    /// The loop `t -> x(t + theta)`, by exact phase rotation of each harmonic.
    pub fn shift(&self, theta: f64) -> Self {
        let mut out = self.clone();
        for k in 1..=self.order {
            let (s, c) = (k as f64 * theta).sin_cos();
            let a = self.cos[k];
            let b = self.sin[k - 1];
            out.cos[k] = a * c + b * s;
            out.sin[k - 1] = b * c - a * s;
        }
        out
    }

    /// Term-wise time derivative.
    pub fn derivative(&self) -> Self {
        let mut out = Self::zeros(self.order);
        for k in 1..=self.order {
            let kf = k as f64;
            out.cos[k] = self.sin[k - 1] * kf;
            out.sin[k - 1] = -self.cos[k] * kf;
        }
        out
    }

    pub fn project_zero_mean(&self) -> Self {
        let mut out = self.clone();
        out.cos[0] = Point::zeros();
        out
    }

    pub fn project_antiperiodic(&self) -> Self {
        let mut out = self.clone();
        out.cos[0] = Point::zeros();
        for k in (2..=self.order).step_by(2) {
            out.cos[k] = Point::zeros();
            out.sin[k - 1] = Point::zeros();
        }
        out
    }

    /// `true` when no even harmonic (including the mean) is present.
    pub fn is_antiperiodic(&self) -> bool {
        self.cos[0] == Point::zeros()
            && (2..=self.order)
                .step_by(2)
                .all(|k| self.cos[k] == Point::zeros() && self.sin[k - 1] == Point::zeros())
    }

    /// `true` when only the first harmonic is nonzero.
    pub fn is_first_harmonic(&self) -> bool {
        self.cos[0] == Point::zeros()
            && (2..=self.order)
                .all(|k| self.cos[k] == Point::zeros() && self.sin[k - 1] == Point::zeros())
    }

    /// Keeps only harmonics up to `order`, or pads with zeros.
    pub fn with_order(&self, order: usize) -> Self {
        let mut out = Self::zeros(order);
        for k in 0..=order.min(self.order) {
            out.cos[k] = self.cos[k];
            if k >= 1 {
                out.sin[k - 1] = self.sin[k - 1];
            }
        }
        out
    }

    /// Applies a linear map to every coefficient (the loop `t -> A x(t)`).
    pub fn transform(&self, map: &Matrix3<f64>) -> Self {
        Self {
            order: self.order,
            cos: self.cos.iter().map(|v| map * v).collect(),
            sin: self.sin.iter().map(|v| map * v).collect(),
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            order: self.order,
            cos: self.cos.iter().map(|v| v * factor).collect(),
            sin: self.sin.iter().map(|v| v * factor).collect(),
        }
    }

    /// Coefficient-wise `self + factor * other`. Orders must match.
    pub fn add_scaled(&self, other: &Self, factor: f64) -> Self {
        assert_eq!(self.order, other.order, "order mismatch");
        Self {
            order: self.order,
            cos: self
                .cos
                .iter()
                .zip(&other.cos)
                .map(|(a, b)| a + b * factor)
                .collect(),
            sin: self
                .sin
                .iter()
                .zip(&other.sin)
                .map(|(a, b)| a + b * factor)
                .collect(),
        }
    }

    /// Euclidean norm of the flattened coefficient vector.
    pub fn coeff_norm(&self) -> f64 {
        self.cos
            .iter()
            .chain(&self.sin)
            .map(|v| v.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    /// `(1 / 2 pi) int |x|^2 dt` by Parseval.
    pub fn mean_square(&self) -> f64 {
        let harmonics: f64 = (1..=self.order)
            .map(|k| self.cos[k].norm_squared() + self.sin[k - 1].norm_squared())
            .sum();
        self.cos[0].norm_squared() + 0.5 * harmonics
    }

    /// `int_0^{2 pi} |x|^2 dt` by Parseval.
    pub fn l2_squared(&self) -> f64 {
        TAU * self.mean_square()
    }

    /// `int_0^{2 pi} |x'|^2 dt = pi sum k^2 (|a_k|^2 + |b_k|^2)`.
    pub fn kinetic_integral(&self) -> f64 {
        PI * (1..=self.order)
            .map(|k| {
                let kf = k as f64;
                kf * kf * (self.cos[k].norm_squared() + self.sin[k - 1].norm_squared())
            })
            .sum::<f64>()
    }

    /// `int_0^{2 pi} |x(t) - x(t + theta)|^2 dt` by Parseval on the shifted difference.
    pub fn chord_integral(&self, theta: f64) -> f64 {
        self.add_scaled(&self.shift(theta), -1.0).l2_squared()
    }

    /// Flattened coefficients: `a_0`, then `a_k, b_k` for `k = 1..=K`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 + 6 * self.order);
        out.extend(self.cos[0].iter());
        for k in 1..=self.order {
            out.extend(self.cos[k].iter());
            out.extend(self.sin[k - 1].iter());
        }
        out
    }

    /// Inverse of [`FourierPath::to_vec`].
    pub fn from_vec(order: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), 3 + 6 * order, "coefficient vector length");
        let mut out = Self::zeros(order);
        let pt = |i: usize| Point::new(data[i], data[i + 1], data[i + 2]);
        out.cos[0] = pt(0);
        for k in 1..=order {
            let base = 3 + 6 * (k - 1);
            out.cos[k] = pt(base);
            out.sin[k - 1] = pt(base + 3);
        }
        out
    }

    /// Random coefficients with amplitude `amplitude / k^2` on harmonics `1..=max_harmonic`.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        order: usize,
        max_harmonic: usize,
        amplitude: f64,
    ) -> Self {
        let mut out = Self::zeros(order);
        for k in 1..=max_harmonic.min(order) {
            let w = amplitude / (k * k) as f64;
            out.cos[k] = random_vector(rng) * w;
            out.sin[k - 1] = random_vector(rng) * w;
        }
        out
    }

    pub fn to_json(&self) -> PathJson {
        PathJson {
            order: self.order,
            cos: self.cos.iter().map(|v| [v.x, v.y, v.z]).collect(),
            sin: self.sin.iter().map(|v| [v.x, v.y, v.z]).collect(),
        }
    }

    pub fn from_json(json: &PathJson) -> Result<Self> {
        let path = Self::from_coeffs(
            json.cos.iter().map(|c| Point::from(*c)).collect(),
            json.sin.iter().map(|c| Point::from(*c)).collect(),
        )?;
        if path.order != json.order {
            return Err(Error::domain(format!(
                "declared order {} does not match {} sine coefficients",
                json.order, path.order
            )));
        }
        Ok(path)
    }

    /// CSV rows `t,x,y,z` at `samples` uniform nodes, with a header line.
    pub fn to_csv(&self, samples: usize) -> String {
        let mut out = String::from("t,x,y,z\n");
        for t in uniform_nodes(samples) {
            let p = self.evaluate(t);
            out.push_str(&format!(
                "{t:.17e},{:.17e},{:.17e},{:.17e}\n",
                p.x, p.y, p.z
            ));
        }
        out
    }
}

/// Components uniform on `[-1, 1]`.
pub(crate) fn random_vector<R: Rng + ?Sized>(rng: &mut R) -> Point {
    Point::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    )
}

/// Raw coefficient layout used for JSON interchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathJson {
    pub order: usize,
    pub cos: Vec<[f64; 3]>,
    pub sin: Vec<[f64; 3]>,
}

/// `t_i = 2 pi i / n` for `i = 0..n`.
pub fn uniform_nodes(n: usize) -> impl ExactSizeIterator<Item = f64> + Clone {
    (0..n).map(move |i| TAU * i as f64 / n as f64)
}

/// Precomputed `cos(k t_i)`, `sin(k t_i)` on a uniform grid.
#[derive(Debug, Clone)]
pub struct SampleGrid {
    nodes: usize,
    order: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl SampleGrid {
    pub fn new(nodes: usize, order: usize) -> Self {
        let mut cos = Vec::with_capacity((order + 1) * nodes);
        let mut sin = Vec::with_capacity((order + 1) * nodes);
        for k in 0..=order {
            for i in 0..nodes {
                // Reduce k*i mod n first so large k stays accurate.
                let phase = TAU * ((k * i) % nodes) as f64 / nodes as f64;
                let (s, c) = phase.sin_cos();
                cos.push(c);
                sin.push(s);
            }
        }
        Self {
            nodes,
            order,
            cos,
            sin,
        }
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn step(&self) -> f64 {
        TAU / self.nodes as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        TAU * i as f64 / self.nodes as f64
    }

    #[inline]
    pub fn cos(&self, k: usize, i: usize) -> f64 {
        self.cos[k * self.nodes + i]
    }

    #[inline]
    pub fn sin(&self, k: usize, i: usize) -> f64 {
        self.sin[k * self.nodes + i]
    }

    /// `x(t_i)` for every node.
    pub fn sample(&self, path: &FourierPath) -> Vec<Point> {
        assert!(path.order() <= self.order, "grid order too small for path");
        let mut out = vec![path.mean(); self.nodes];
        for k in 1..=path.order() {
            let a = path.cos[k];
            let b = path.sin[k - 1];
            if a == Point::zeros() && b == Point::zeros() {
                continue;
            }
            let c = &self.cos[k * self.nodes..(k + 1) * self.nodes];
            let s = &self.sin[k * self.nodes..(k + 1) * self.nodes];
            for (x, (ci, si)) in out.iter_mut().zip(c.iter().zip(s)) {
                *x += a * *ci + b * *si;
            }
        }
        out
    }

    /// Projects node values onto harmonics: returns `sum_i w_i cos(k t_i)` and
    /// `sum_i w_i sin(k t_i)` as the cosine and sine coefficients of a path of
    /// order `order`. The mean slot receives `sum_i w_i`.
    pub fn project(&self, weights: &[Point], order: usize) -> FourierPath {
        assert_eq!(weights.len(), self.nodes);
        assert!(order <= self.order);
        let mut out = FourierPath::zeros(order);
        out.cos[0] = weights.iter().sum();
        for k in 1..=order {
            let c = &self.cos[k * self.nodes..(k + 1) * self.nodes];
            let s = &self.sin[k * self.nodes..(k + 1) * self.nodes];
            let mut ac = Point::zeros();
            let mut bs = Point::zeros();
            for (w, (ci, si)) in weights.iter().zip(c.iter().zip(s)) {
                ac += w * *ci;
                bs += w * *si;
            }
            out.cos[k] = ac;
            out.sin[k - 1] = bs;
        }
        out
    }
}

/// `n` bodies on one loop, body `i` delayed by `i * 2 pi / n` (zero-based).
#[derive(Debug, Clone, PartialEq)]
pub struct ChoreographySystem {
    pub base: FourierPath,
    pub n: usize,
}

impl ChoreographySystem {
    pub fn new(base: FourierPath, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain("n must be at least 2"));
        }
        Ok(Self { base, n })
    }

    /// Shift separating body `i` from body 0.
    pub fn phase(&self, i: usize) -> f64 {
        TAU * i as f64 / self.n as f64
    }

    /// The loop travelled by body `i` (zero-based).
    pub fn body(&self, i: usize) -> FourierPath {
        self.base.shift(self.phase(i))
    }

    pub fn bodies(&self) -> Vec<FourierPath> {
        (0..self.n).map(|i| self.body(i)).collect()
    }

    /// CSV rows `body_index,t,x,y,z` for all bodies.
    pub fn to_csv(&self, samples: usize) -> String {
        let mut out = String::from("body_index,t,x,y,z\n");
        for (i, body) in self.bodies().iter().enumerate() {
            for t in uniform_nodes(samples) {
                let p = body.evaluate(t);
                out.push_str(&format!(
                    "{i},{t:.17e},{:.17e},{:.17e},{:.17e}\n",
                    p.x, p.y, p.z
                ));
            }
        }
        out
    }
}

/// Smallest sampled distance and where it occurred.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    pub distance: f64,
    pub kind: SeparationKind,
    pub t: f64,
}

/// Minimum over uniform samples of the body-body distances
/// `|x(t) - x(t + 2 pi j / n)|` and the body-center distances.
///
/// Sampling at `>= 8K` nodes keeps the sampled minimum close to the true one
/// for a loop of order `K`; the exact minimum is not searched for.
pub fn min_separation(
    sys: &ChoreographySystem,
    centers: &[Point; 2],
    samples: usize,
) -> Separation {
    assert!(samples >= 1, "need at least one sample");
    let grid = SampleGrid::new(samples, sys.base.order());
    separation_on_grid(&grid, sys, centers)
}

pub(crate) fn separation_on_grid(
    grid: &SampleGrid,
    sys: &ChoreographySystem,
    centers: &[Point; 2],
) -> Separation {
    let base = grid.sample(&sys.base);
    let mut best = Separation {
        distance: f64::INFINITY,
        kind: SeparationKind::Center,
        t: 0.0,
    };
    for (i, x) in base.iter().enumerate() {
        for c in centers {
            let d = (x - c).norm();
            if d < best.distance {
                best = Separation {
                    distance: d,
                    kind: SeparationKind::Center,
                    t: grid.time(i),
                };
            }
        }
    }
    for j in 1..sys.n {
        let shifted = grid.sample(&sys.body(j));
        for (i, (x, y)) in base.iter().zip(&shifted).enumerate() {
            let d = (x - y).norm();
            if d < best.distance {
                best = Separation {
                    distance: d,
                    kind: SeparationKind::Mutual,
                    t: grid.time(i),
                };
            }
        }
    }
    best
}

/// Convenience: [`min_separation`] for the choreography generated by `path`.
pub fn path_min_separation(
    path: &FourierPath,
    params: &ProblemParams,
    samples: usize,
) -> Separation {
    let sys = ChoreographySystem {
        base: path.clone(),
        n: params.n,
    };
    min_separation(&sys, &params.centers(), samples)
}
