//! Proportional transaction-cost structures Υ(v) = v·k(v), where v = S|ν| is
//! the currency value of a rehedging trade.
//!
//! At a grid node the trade value is random: v = β|φ| with φ ∼ N(0,1) and
//! β = σS²|Γ|√δt. The pricing equation only needs E[|φ|·k(β|φ|)], which every
//! family here evaluates in closed form.

use serde::{Deserialize, Serialize};

use crate::analytics::{expectation_abs_phi_exp, SQRT_2_OVER_PI};
use crate::error::{Error, Result};

/// How a piecewise-constant structure turns the random trade value into a PDE coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PiecewiseMode {
    /// Pick the single band containing the expected trade value β√(2/π).
    #[default]
    RegimeSelect,
    /// Integrate the banded proportion against the law of β|φ|.
    ExactExpectation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CostStructure {
    Constant {
        k: f64,
    },
    /// Rates `rates[i]` apply on `[breakpoints[i-1], breakpoints[i])` with
    /// implicit outer edges 0 and ∞, so `rates.len() == breakpoints.len() + 1`.
    PiecewiseConstant {
        breakpoints: Vec<f64>,
        rates: Vec<f64>,
        #[serde(default)]
        mode: PiecewiseMode,
    },
    /// k(v) = a − k·v. Goes negative past v = a/k.
    LinearDecreasing {
        a: f64,
        k: f64,
    },
    /// k(v) = e^{−(a + v)}.
    ExponentialDecreasing {
        a: f64,
    },
}

/// β in v = β|φ|: the deterministic part of the rehedge trade value.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct TransactionScale(f64);

impl TransactionScale {
    pub fn new(beta: f64) -> Result<Self> {
        if beta >= 0.0 {
            Ok(Self(beta))
        } else {
            Err(Error::InvalidParams(format!(
                "transaction scale must be >= 0, got {beta}"
            )))
        }
    }

    /// β = σ·S²·|Γ|·√δt.
    pub fn from_node(sigma: f64, spot: f64, gamma: f64, rehedge_dt: f64) -> Self {
        Self(sigma * spot * spot * gamma.abs() * rehedge_dt.sqrt())
    }

    pub fn beta(self) -> f64 {
        self.0
    }
}

/// E[|φ|·k(β|φ|)] together with whether it came out negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectationTerm {
    pub value: f64,
    pub negative: bool,
}

fn non_negative(name: &str, x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidCost(format!("{name} must be finite and >= 0, got {x}")))
    }
}

impl CostStructure {
    pub fn constant(k: f64) -> Result<Self> {
        let cs = CostStructure::Constant { k };
        cs.validate()?;
        Ok(cs)
    }

    pub fn piecewise(breakpoints: Vec<f64>, rates: Vec<f64>, mode: PiecewiseMode) -> Result<Self> {
        let cs = CostStructure::PiecewiseConstant {
            breakpoints,
            rates,
            mode,
        };
        cs.validate()?;
        Ok(cs)
    }

    pub fn linear(a: f64, k: f64) -> Result<Self> {
        let cs = CostStructure::LinearDecreasing { a, k };
        cs.validate()?;
        Ok(cs)
    }

    pub fn exponential(a: f64) -> Result<Self> {
        let cs = CostStructure::ExponentialDecreasing { a };
        cs.validate()?;
        Ok(cs)
    }

    /// Checks the parameter invariants. Structures built through the
    /// constructors are already valid; deserialized ones are not.
    pub fn validate(&self) -> Result<()> {
        match self {
            CostStructure::Constant { k } => non_negative("k", *k),
            CostStructure::PiecewiseConstant { breakpoints, rates, .. } => {
                if rates.len() != breakpoints.len() + 1 {
                    return Err(Error::InvalidCost(format!(
                        "{} breakpoints need {} rates, got {}",
                        breakpoints.len(),
                        breakpoints.len() + 1,
                        rates.len()
                    )));
                }
                for &r in rates {
                    non_negative("rate", r)?;
                }
                if rates.windows(2).any(|w| w[1] > w[0]) {
                    return Err(Error::InvalidCost(format!(
                        "rates must be nonincreasing, got {rates:?}"
                    )));
                }
                if breakpoints.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                    return Err(Error::InvalidCost(format!(
                        "breakpoints must be finite and > 0, got {breakpoints:?}"
                    )));
                }
                if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidCost(format!(
                        "breakpoints must be strictly increasing, got {breakpoints:?}"
                    )));
                }
                Ok(())
            }
            CostStructure::LinearDecreasing { a, k } => {
                non_negative("a", *a)?;
                non_negative("k", *k)
            }
            CostStructure::ExponentialDecreasing { a } => non_negative("a", *a),
        }
    }

    /// Proportion k(v) at trade value v ≥ 0.
    pub fn proportion(&self, v: f64) -> f64 {
        match self {
            CostStructure::Constant { k } => *k,
            CostStructure::PiecewiseConstant { breakpoints, rates, .. } => {
                // half-open bands: the cheaper rate applies exactly at a breakpoint
                let band = breakpoints.partition_point(|&x| x <= v);
                rates[band]
            }
            CostStructure::LinearDecreasing { a, k } => a - k * v,
            CostStructure::ExponentialDecreasing { a } => (-(a + v)).exp(),
        }
    }

    /// Υ(v) = v·k(v).
    pub fn total_cost(&self, v: f64) -> f64 {
        v * self.proportion(v)
    }

    /// k(0), the proportion charged on an infinitesimal trade.
    pub fn proportion_at_zero(&self) -> f64 {
        self.proportion(0.0)
    }

    /// sup_v k(v) over v ≥ 0. Every family is nonincreasing, so this is k(0).
    pub fn max_proportion(&self) -> f64 {
        self.proportion_at_zero()
    }

    /// E[|φ|·k(β|φ|)] for φ ∼ N(0,1).
    pub fn expectation_term(&self, scale: TransactionScale) -> ExpectationTerm {
        let beta = scale.beta();
        let value = match self {
            CostStructure::Constant { k } => k * SQRT_2_OVER_PI,
            CostStructure::PiecewiseConstant {
                breakpoints,
                rates,
                mode,
            } => match mode {
                PiecewiseMode::RegimeSelect => self.proportion(beta * SQRT_2_OVER_PI) * SQRT_2_OVER_PI,
                PiecewiseMode::ExactExpectation => {
                    if beta == 0.0 {
                        rates[0] * SQRT_2_OVER_PI
                    } else {
                        exact_banded_expectation(breakpoints, rates, beta)
                    }
                }
            },
            // E[|φ|(a − kβ|φ|)] = a·E|φ| − kβ·E[φ²]
            CostStructure::LinearDecreasing { a, k } => a * SQRT_2_OVER_PI - k * beta,
            CostStructure::ExponentialDecreasing { a } => (-a).exp() * expectation_abs_phi_exp(beta),
        };
        ExpectationTerm {
            value,
            negative: value < 0.0,
        }
    }

    /// Returns a copy rescaled so that k(0) equals `k0`.
    ///
    /// Constant: k = k0. Linear: a = k0 with the slope kept. Exponential:
    /// a = −ln k0. Piecewise: every rate multiplied by k0/k₁, which keeps the
    /// relative step shape.
    pub fn calibrated_to(&self, k0: f64) -> Result<Self> {
        if !(k0 > 0.0 && k0 < 1.0) {
            return Err(Error::InvalidCost(format!(
                "calibration target must lie in (0, 1), got {k0}"
            )));
        }
        let cs = match self {
            CostStructure::Constant { .. } => CostStructure::Constant { k: k0 },
            CostStructure::PiecewiseConstant {
                breakpoints,
                rates,
                mode,
            } => {
                let first = rates[0];
                if first <= 0.0 {
                    return Err(Error::InvalidCost(
                        "cannot rescale a piecewise structure with k_1 = 0".into(),
                    ));
                }
                CostStructure::PiecewiseConstant {
                    breakpoints: breakpoints.clone(),
                    rates: rates.iter().map(|r| r / first * k0).collect(),
                    mode: *mode,
                }
            }
            CostStructure::LinearDecreasing { k, .. } => CostStructure::LinearDecreasing { a: k0, k: *k },
            CostStructure::ExponentialDecreasing { .. } => CostStructure::ExponentialDecreasing { a: -k0.ln() },
        };
        cs.validate()?;
        Ok(cs)
    }

    pub fn family(&self) -> &'static str {
        match self {
            CostStructure::Constant { .. } => "constant",
            CostStructure::PiecewiseConstant { .. } => "piecewise_constant",
            CostStructure::LinearDecreasing { .. } => "linear_decreasing",
            CostStructure::ExponentialDecreasing { .. } => "exponential_decreasing",
        }
    }
}

/// Σ kᵢ·√(2/π)·(e^{−lᵢ²/2} − e^{−uᵢ²/2}), lᵢ = x_{i−1}/β, uᵢ = xᵢ/β.
fn exact_banded_expectation(breakpoints: &[f64], rates: &[f64], beta: f64) -> f64 {
    let tail = |x: f64| {
        let u = x / beta;
        (-0.5 * u * u).exp()
    };
    let mut lower = 1.0; // e^{0}
    let mut sum = 0.0;
    for (i, &rate) in rates.iter().enumerate() {
        let upper = breakpoints.get(i).map_or(0.0, |&x| tail(x));
        sum += rate * (lower - upper);
        lower = upper;
    }
    sum * SQRT_2_OVER_PI
}
