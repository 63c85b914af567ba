//! Closed-form Gaussian expectations, the Black-Scholes baseline and the
//! constant-proportion adjusted volatility.

mod normal;
mod quadrature;

pub use normal::{scaled_mills, std_normal_cdf, std_normal_pdf, INV_SQRT_2PI, SQRT_2_OVER_PI};
pub use quadrature::{gaussian_quadrature_expectation, GaussianQuadrature};

use crate::error::{Error, Result};

/// Mean and standard deviation of a Gaussian Z ∼ N(μ, σ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalParams {
    mu: f64,
    sigma: f64,
}

impl NormalParams {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() || !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParams(format!(
                "normal parameters need finite mu and sigma > 0, got mu = {mu}, sigma = {sigma}"
            )));
        }
        Ok(Self { mu, sigma })
    }

    pub fn standard() -> Self {
        Self { mu: 0.0, sigma: 1.0 }
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// E[|φ|·e^{−α|φ|}] for φ ∼ N(0,1), α ≥ 0:
///
/// ```text
/// √(2/π) − 2α·Φ(−α)·e^{α²/2}
/// ```
///
/// The product Φ(−α)e^{α²/2} goes through [`scaled_mills`]. For large α the
/// subtraction cancels almost completely, so it is rewritten as
/// √(2/π)·(1 − α·R(α)) with 1 − αR taken straight from the continued fraction.
pub fn expectation_abs_phi_exp(alpha: f64) -> f64 {
    SQRT_2_OVER_PI * normal::one_minus_x_mills(alpha)
}

/// E[|Z|·e^{−a|Z|}] for Z ∼ N(μ, σ), a ≥ 0.
///
/// Differentiating the Laplace transform
/// `E[e^{−a|Z|}] = e^{a²σ²/2}·(A + B)` with
/// `A = e^{aμ}Φ(−(μ+aσ²)/σ)` and `B = e^{−aμ}Φ((μ−aσ²)/σ)` in `a` gives
///
/// ```text
/// −aσ²·e^{a²σ²/2}(A + B) − μ·e^{a²σ²/2}(A − B) + σ√(2/π)·e^{−μ²/(2σ²)}
/// ```
///
/// The exponential prefactors are folded into the Φ terms so nothing overflows:
/// `e^{a²σ²/2}A = e^{−m²/2}·Φ(−d₁)e^{d₁²/2}` with `m = μ/σ`, `d₁ = m + aσ`,
/// and likewise for B with `d₂ = m − aσ`.
pub fn expectation_abs_z_exp(p: NormalParams, a: f64) -> f64 {
    let (mu, sigma) = (p.mu, p.sigma);
    let m = mu / sigma;
    let d1 = m + a * sigma;
    let d2 = m - a * sigma;
    let ga = weighted_cdf(-d1, m);
    let gb = weighted_cdf(d2, m);
    -a * sigma * sigma * (ga + gb) - mu * (ga - gb) + sigma * SQRT_2_OVER_PI * (-0.5 * m * m).exp()
}

/// Φ(y)·e^{(y² − m²)/2}; callers guarantee y² ≤ m² whenever y > 0.
fn weighted_cdf(y: f64, m: f64) -> f64 {
    if y <= 0.0 {
        scaled_mills(-y) * (-0.5 * m * m).exp()
    } else {
        std_normal_cdf(y) * (0.5 * (y - m) * (y + m)).exp()
    }
}

/// European call under Black-Scholes with no dividends.
pub fn black_scholes_call(spot: f64, strike: f64, rate: f64, sigma: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return (spot - strike).max(0.0);
    }
    if spot <= 0.0 {
        return 0.0;
    }
    let vol_sqrt = sigma * tau.sqrt();
    let d1 = ((spot / strike).ln() + (rate + 0.5 * sigma * sigma) * tau) / vol_sqrt;
    let d2 = d1 - vol_sqrt;
    spot * std_normal_cdf(d1) - strike * (-rate * tau).exp() * std_normal_cdf(d2)
}

/// Sign of Γ assumed when folding the proportional cost into the diffusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaSign {
    Positive,
    Negative,
}

impl GammaSign {
    pub fn as_f64(self) -> f64 {
        match self {
            GammaSign::Positive => 1.0,
            GammaSign::Negative => -1.0,
        }
    }
}

impl TryFrom<i32> for GammaSign {
    type Error = Error;

    fn try_from(v: i32) -> Result<Self> {
        match v {
            1 => Ok(GammaSign::Positive),
            -1 => Ok(GammaSign::Negative),
            _ => Err(Error::InvalidParams(format!("gamma sign must be +1 or -1, got {v}"))),
        }
    }
}

/// Volatility σ̂ with σ̂² = σ² − sign(Γ)·2kσ√(2/(πδt)).
///
/// With constant proportion k and Γ of fixed sign the nonlinear pricing
/// equation is plain Black-Scholes at σ̂. A non-positive radicand means the
/// diffusion has turned backward and the problem is ill-posed.
pub fn leland_adjusted_sigma(sigma: f64, k: f64, rehedge_dt: f64, gamma_sign: GammaSign) -> Result<f64> {
    if !(sigma > 0.0) || !(k >= 0.0) || !(rehedge_dt > 0.0) {
        return Err(Error::InvalidParams(format!(
            "need sigma > 0, k >= 0, dt > 0; got sigma = {sigma}, k = {k}, dt = {rehedge_dt}"
        )));
    }
    let radicand = sigma * sigma - gamma_sign.as_f64() * 2.0 * k * sigma * SQRT_2_OVER_PI / rehedge_dt.sqrt();
    if radicand <= 0.0 {
        return Err(Error::IllPosed { radicand });
    }
    Ok(radicand.sqrt())
}
