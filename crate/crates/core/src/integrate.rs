//! Normalized means over `[-a, a]^d`: tensor-product Gauss–Legendre for the
//! 2D and 4D position integrals, and block-seeded Monte Carlo for the
//! high-dimensional ones.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::Position;
use crate::streams::{substream, Domain};

pub const DEFAULT_ORDER_2D: usize = 32;
pub const DEFAULT_ORDER_4D: usize = 16;

/// Samples per Monte Carlo block. Each block owns one keyed substream.
const MC_BLOCK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Gauss–Legendre points per dimension.
    pub order: usize,
    pub domain_half_width: f64,
}

impl QuadratureSpec {
    pub fn new(order: usize, domain_half_width: f64) -> Result<Self> {
        let spec = QuadratureSpec {
            order,
            domain_half_width,
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn doubled(&self) -> Self {
        QuadratureSpec {
            order: self.order * 2,
            ..*self
        }
    }

    fn check(&self) -> Result<()> {
        if self.order < 2 {
            return Err(Error::invalid("order", format!("must be at least 2, got {}", self.order)));
        }
        let a = self.domain_half_width;
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::invalid("domain_half_width", format!("must be finite and > 0, got {a}")));
        }
        Ok(())
    }

    /// Nodes scaled to `[-a, a]` and weights normalized to sum to one.
    fn scaled_rule(&self) -> (Vec<f64>, Vec<f64>) {
        let (nodes, weights) = gauss_legendre(self.order);
        let a = self.domain_half_width;
        let total: f64 = weights.iter().sum();
        (
            nodes.iter().map(|x| a * x).collect(),
            weights.iter().map(|w| w / total).collect(),
        )
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on
/// the Legendre recurrence. Nodes are returned in ascending order.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi's initial guess for the i-th largest root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `(1/(2a)²) ∬ f` over the square.
pub fn integrate_mean_2d<F>(f: F, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(Position) -> f64,
{
    spec.check()?;
    let (xs, ws) = spec.scaled_rule();
    let mut total = 0.0;
    for (x, wx) in xs.iter().zip(&ws) {
        let mut row = 0.0;
        for (y, wy) in xs.iter().zip(&ws) {
            row += wy * f(Position::new(*x, *y));
        }
        total += wx * row;
    }
    Ok(total)
}

/// `(1/(2a)⁴) ∫ f(r, r₁)` over the square squared.
pub fn integrate_mean_4d<F>(f: F, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(Position, Position) -> f64,
{
    spec.check()?;
    let (xs, ws) = spec.scaled_rule();
    let mut total = 0.0;
    for (x, wx) in xs.iter().zip(&ws) {
        let mut over_y = 0.0;
        for (y, wy) in xs.iter().zip(&ws) {
            let r = Position::new(*x, *y);
            let mut over_x1 = 0.0;
            for (x1, wx1) in xs.iter().zip(&ws) {
                let mut over_y1 = 0.0;
                for (y1, wy1) in xs.iter().zip(&ws) {
                    over_y1 += wy1 * f(r, Position::new(*x1, *y1));
                }
                over_x1 += wx1 * over_y1;
            }
            over_y += wy * over_x1;
        }
        total += wx * over_y;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McIntegrationResult {
    pub estimate: f64,
    /// Sample standard deviation over `sqrt(samples)`.
    pub std_error: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Running mean and sum of squared deviations, merged with Chan's formula.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1.0;
        let delta = v - self.mean;
        self.mean += delta / self.n;
        self.m2 += delta * (v - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if other.n == 0.0 {
            return self;
        }
        if self.n == 0.0 {
            return other;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + delta * other.n / n,
            m2: self.m2 + other.m2 + delta * delta * self.n * other.n / n,
        }
    }
}

/// Monte Carlo mean of `f` under the uniform law on `[-a, a]^dim`.
///
/// Samples are drawn in fixed-size blocks, each from its own substream of
/// `seed`, and block moments are merged in block order, so the result is
/// bit-identical for any rayon pool size.
pub fn mc_mean<F>(f: F, dim: usize, half_width: f64, samples: usize, seed: u64) -> Result<McIntegrationResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if samples < 2 {
        return Err(Error::invalid("samples", format!("must be at least 2, got {samples}")));
    }
    if dim == 0 {
        return Err(Error::invalid("dim", "must be at least 1"));
    }
    if !(half_width.is_finite() && half_width > 0.0) {
        return Err(Error::invalid("domain_half_width", format!("must be finite and > 0, got {half_width}")));
    }

    let blocks = samples.div_ceil(MC_BLOCK);
    let per_block: Vec<Moments> = (0..blocks)
        .into_par_iter()
        .map(|block| {
            let mut rng = substream(seed, Domain::McBlock, block as u64, dim as u64);
            let len = MC_BLOCK.min(samples - block * MC_BLOCK);
            let mut point = vec![0.0; dim];
            let mut m = Moments::default();
            for _ in 0..len {
                for c in point.iter_mut() {
                    *c = half_width * (2.0 * rng.random::<f64>() - 1.0);
                }
                m.push(f(&point));
            }
            m
        })
        .collect();
    let total = per_block.into_iter().fold(Moments::default(), Moments::merge);

    let variance = (total.m2 / (total.n - 1.0)).max(0.0);
    Ok(McIntegrationResult {
        estimate: total.mean,
        std_error: (variance / total.n).sqrt(),
        samples,
        seed,
    })
}

/// Reads point coordinates `2k, 2k+1` as a position.
pub fn position_at(point: &[f64], k: usize) -> Position {
    Position::new(point[2 * k], point[2 * k + 1])
}
