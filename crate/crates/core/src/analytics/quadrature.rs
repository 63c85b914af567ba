//! Globally adaptive Gauss–Kronrod (7/15) integration of Gaussian expectations.
//!
//! Used as an independent oracle for the closed-form expectations: it only
//! evaluates the normal density directly and never touches Φ or the Mills ratio.

// Tabulated to full published precision.
#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::NormalParams;
use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Segment {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = half * XGK[i];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    Segment {
        lo,
        hi,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Adaptive integrator for E[f(Z)], Z ∼ N(μ, σ), over the truncated range μ ± `half_width`·σ.
#[derive(Debug, Clone)]
pub struct GaussianQuadrature {
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    pub half_width: f64,
    breakpoints: Vec<f64>,
}

impl Default for GaussianQuadrature {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            max_subdivisions: 5_000,
            half_width: 12.0,
            breakpoints: Vec::new(),
        }
    }
}

impl GaussianQuadrature {
    /// Points where the integrand has a kink or jump. Splitting there up front
    /// keeps the error estimate honest and the subdivision count small.
    pub fn with_breakpoints(mut self, points: impl IntoIterator<Item = f64>) -> Self {
        self.breakpoints.extend(points);
        self
    }

    pub fn expectation<F: Fn(f64) -> f64>(&self, f: F, p: NormalParams) -> Result<f64> {
        let (mu, sigma) = (p.mu(), p.sigma());
        let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        let weighted = |z: f64| {
            let u = (z - mu) / sigma;
            f(z) * norm * (-0.5 * u * u).exp()
        };
        let lo = mu - self.half_width * sigma;
        let hi = mu + self.half_width * sigma;
        // Seed with one-σ panels so a feature narrower than a single GK15 panel
        // over the whole range cannot hide between the nodes.
        let whole = self.half_width.floor() as i64;
        let seeds = (-whole..=whole).map(|i| mu + i as f64 * sigma);
        self.integrate(&weighted, lo, hi, seeds)
    }

    fn integrate<F: Fn(f64) -> f64>(&self, f: &F, lo: f64, hi: f64, seeds: impl Iterator<Item = f64>) -> Result<f64> {
        let mut cuts: Vec<f64> = self
            .breakpoints
            .iter()
            .copied()
            .chain(seeds)
            .filter(|x| x.is_finite() && *x > lo && *x < hi)
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();

        let mut heap = BinaryHeap::new();
        let mut edges = Vec::with_capacity(cuts.len() + 2);
        edges.push(lo);
        edges.extend(cuts);
        edges.push(hi);
        for w in edges.windows(2) {
            heap.push(gauss_kronrod(f, w[0], w[1]));
        }

        let mut subdivisions = 0;
        loop {
            let total_err: f64 = heap.iter().map(|s| s.error).sum();
            if total_err <= self.abs_tol {
                // Sum smallest first to limit rounding.
                let mut values: Vec<f64> = heap.iter().map(|s| s.value).collect();
                values.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
                return Ok(values.into_iter().sum());
            }
            if subdivisions >= self.max_subdivisions {
                return Err(Error::QuadratureNotConverged {
                    estimate: total_err,
                    subdivisions,
                });
            }
            let worst = heap.pop().expect("heap is never empty");
            let mid = 0.5 * (worst.lo + worst.hi);
            if mid <= worst.lo || mid >= worst.hi {
                // Interval can no longer be split in floating point.
                return Err(Error::QuadratureNotConverged {
                    estimate: total_err,
                    subdivisions,
                });
            }
            heap.push(gauss_kronrod(f, worst.lo, mid));
            heap.push(gauss_kronrod(f, mid, worst.hi));
            subdivisions += 1;
        }
    }
}

/// E[f(Z)] for Z ∼ N(μ, σ) with the default tolerance and no breakpoints.
pub fn gaussian_quadrature_expectation<F: Fn(f64) -> f64>(f: F, p: NormalParams) -> Result<f64> {
    GaussianQuadrature::default().expectation(f, p)
}
