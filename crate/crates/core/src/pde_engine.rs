//! Explicit backward-in-time finite differences for the nonlinear pricing equation
//!
//! ```text
//! C_t + ½σ²S²Γ − (σS²/√δt)·|Γ|·E[|φ|k(β|φ|)] + rSΔ − rC = 0,   β = σS²|Γ|√δt
//! ```
//!
//! on `[0, s_max] × [0, T]`. The cost coefficient is lagged: Γ is taken from the
//! already known later time level, which makes each step a plain explicit update.

use serde::{Deserialize, Serialize};

use crate::cost_model::{CostStructure, TransactionScale};
use crate::error::{Error, Result};

/// Violation records kept per solve; the count is always exact.
pub const MAX_RECORDED_VIOLATIONS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    pub strike: f64,
    pub rate: f64,
    #[serde(alias = "volatility")]
    pub sigma: f64,
    pub maturity: f64,
    /// Rehedging interval δt in years. A model input, unrelated to the numerical time step.
    pub rehedge_dt: f64,
}

impl MarketParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.strike > 0.0
            && self.sigma > 0.0
            && self.maturity > 0.0
            && self.rehedge_dt > 0.0
            && self.rate >= 0.0
            && [self.strike, self.rate, self.sigma, self.maturity, self.rehedge_dt]
                .iter()
                .all(|x| x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "market needs K, sigma, T, rehedge_dt > 0 and r >= 0: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// C(s_max, t) = s_max.
    #[default]
    Literal,
    /// C(s_max, t) = s_max − K·e^{−r(T−t)}.
    DiscountedIntrinsic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub s_max: f64,
    pub n_space: usize,
    pub n_time: usize,
    #[serde(default)]
    pub boundary: BoundaryMode,
}

impl GridSpec {
    pub fn ds(&self) -> f64 {
        self.s_max / self.n_space as f64
    }

    pub fn validate(&self, mp: &MarketParams) -> Result<()> {
        if !(self.s_max > mp.strike) || !self.s_max.is_finite() {
            return Err(Error::InvalidParams(format!(
                "s_max = {} must exceed the strike {}",
                self.s_max, mp.strike
            )));
        }
        if self.n_space < 50 {
            return Err(Error::InvalidParams(format!("n_space = {} is below 50", self.n_space)));
        }
        if self.n_time == 0 {
            return Err(Error::InvalidParams("n_time must be positive".into()));
        }
        Ok(())
    }

    /// Same grid with `n_time` raised to the smallest count passing the a-priori
    /// stability bound (see [`min_stable_n_time`]).
    pub fn with_stable_n_time(self, mp: &MarketParams, cs: Option<&CostStructure>) -> Self {
        Self {
            n_time: min_stable_n_time(mp, &self, cs),
            ..self
        }
    }
}

/// Smallest n_time with T/n_time ≤ Δs² / max|2D|, where D bounds the diffusion
/// coefficient per unit Γ over the grid:
/// `|D| ≤ (½σ² + σ/√δt · k(0)·√(2/π))·s_max²`.
///
/// Every family's expectation term lies in `[0, k(0)√(2/π)]` except the linear
/// one once its proportion turns negative; that case is caught during the solve.
pub fn min_stable_n_time(mp: &MarketParams, gs: &GridSpec, cs: Option<&CostStructure>) -> usize {
    let cost = cs.map_or(0.0, |c| c.max_proportion().max(0.0) * crate::analytics::SQRT_2_OVER_PI);
    let per_s2 = 0.5 * mp.sigma * mp.sigma + mp.sigma / mp.rehedge_dt.sqrt() * cost;
    let max_two_d = 2.0 * per_s2 * gs.s_max * gs.s_max;
    required_steps(mp.maturity, gs.ds(), max_two_d)
}

/// Relative slack on the step bound so that rounding in σ² and friends does
/// not demand one extra step.
const STABILITY_SLACK: f64 = 1e-12;

fn step_is_stable(dt: f64, ds: f64, max_two_d: f64) -> bool {
    dt * max_two_d <= ds * ds * (1.0 + STABILITY_SLACK)
}

fn required_steps(maturity: f64, ds: f64, max_two_d: f64) -> usize {
    let mut n = ((maturity * max_two_d / (ds * ds)) * (1.0 - STABILITY_SLACK))
        .ceil()
        .max(1.0) as usize;
    while !step_is_stable(maturity / n as f64, ds, max_two_d) {
        n += 1;
    }
    n
}

/// Terminal payoff and Dirichlet data on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub spots: Vec<f64>,
    pub times: Vec<f64>,
    pub terminal: Vec<f64>,
    /// C(0, t_n) for every time index (all zero).
    pub lower: Vec<f64>,
    /// C(s_max, t_n) for every time index.
    pub upper: Vec<f64>,
}

pub fn terminal_and_boundary(mp: &MarketParams, gs: &GridSpec) -> BoundaryData {
    let ds = gs.ds();
    let dt = mp.maturity / gs.n_time as f64;
    let spots: Vec<f64> = (0..=gs.n_space).map(|j| j as f64 * ds).collect();
    let times: Vec<f64> = (0..=gs.n_time).map(|n| n as f64 * dt).collect();
    let terminal = spots.iter().map(|&s| (s - mp.strike).max(0.0)).collect();
    let upper = times
        .iter()
        .map(|&t| match gs.boundary {
            BoundaryMode::Literal => gs.s_max,
            BoundaryMode::DiscountedIntrinsic => gs.s_max - mp.strike * (-mp.rate * (mp.maturity - t)).exp(),
        })
        .collect();
    BoundaryData {
        spots,
        lower: vec![0.0; times.len()],
        times,
        terminal,
        upper,
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Per-node pieces of the second-order term.
#[derive(Debug, Clone, Copy)]
struct NodeTerms {
    /// D with the second-order term equal to D·Γ.
    diffusion: f64,
    expectation: f64,
    negative: bool,
}

#[inline]
fn node_terms(mp: &MarketParams, cs: Option<&CostStructure>, spot: f64, gamma: f64) -> NodeTerms {
    let s2 = spot * spot;
    let bs = 0.5 * mp.sigma * mp.sigma * s2;
    match cs {
        None => NodeTerms {
            diffusion: bs,
            expectation: 0.0,
            negative: false,
        },
        Some(cs) => {
            let scale = TransactionScale::from_node(mp.sigma, spot, gamma, mp.rehedge_dt);
            let e = cs.expectation_term(scale);
            NodeTerms {
                diffusion: bs - sign(gamma) * mp.sigma * s2 / mp.rehedge_dt.sqrt() * e.value,
                expectation: e.value,
                negative: e.negative,
            }
        }
    }
}

/// ½σ²S²Γ − (σS²/√δt)·|Γ|·E[|φ|k(β|φ|)] at one node; `None` means no costs.
pub fn effective_diffusion(mp: &MarketParams, cs: Option<&CostStructure>, spot: f64, gamma: f64) -> f64 {
    let bs = 0.5 * mp.sigma * mp.sigma * spot * spot * gamma;
    match cs {
        None => bs,
        Some(_) => {
            let e = node_terms(mp, cs, spot, gamma).expectation;
            bs - mp.sigma * spot * spot / mp.rehedge_dt.sqrt() * gamma.abs() * e
        }
    }
}

/// ½ − sign(Γ)/(σ√δt)·E[|φ|k(β|φ|)]. The equation is well-posed where this is positive.
pub fn wellposedness_lhs(mp: &MarketParams, cs: Option<&CostStructure>, spot: f64, gamma: f64) -> f64 {
    let e = node_terms(mp, cs, spot, gamma).expectation;
    0.5 - sign(gamma) / (mp.sigma * mp.rehedge_dt.sqrt()) * e
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub node: usize,
    pub time_index: usize,
    pub spot: f64,
    pub time: f64,
    pub lhs: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WellPosednessReport {
    pub count: usize,
    /// Smallest left-hand side seen.
    pub worst: Option<Violation>,
    /// The first [`MAX_RECORDED_VIOLATIONS`] violations in visiting order.
    pub recorded: Vec<Violation>,
}

impl WellPosednessReport {
    fn record(&mut self, v: Violation) {
        self.count += 1;
        if self.worst.is_none_or(|w| v.lhs < w.lhs) {
            self.worst = Some(v);
        }
        if self.recorded.len() < MAX_RECORDED_VIOLATIONS {
            self.recorded.push(v);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinPrice {
    pub value: f64,
    pub spot: f64,
    pub time: f64,
}

/// Priced surface C(S_j, t_n) with solve diagnostics.
#[derive(Debug, Clone)]
pub struct Solution {
    market: MarketParams,
    grid: GridSpec,
    /// Row-major, row n holds t_n = n·T/n_time.
    values: Vec<f64>,
    pub wellposedness: WellPosednessReport,
    pub negative_proportion: bool,
    pub min_price: MinPrice,
}

impl Solution {
    pub fn market(&self) -> &MarketParams {
        &self.market
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn n_space(&self) -> usize {
        self.grid.n_space
    }

    pub fn n_time(&self) -> usize {
        self.grid.n_time
    }

    pub fn ds(&self) -> f64 {
        self.grid.ds()
    }

    pub fn dt(&self) -> f64 {
        self.market.maturity / self.grid.n_time as f64
    }

    pub fn spot(&self, node: usize) -> f64 {
        node as f64 * self.ds()
    }

    pub fn time(&self, time_index: usize) -> f64 {
        time_index as f64 * self.dt()
    }

    pub fn spots(&self) -> Vec<f64> {
        (0..=self.grid.n_space).map(|j| self.spot(j)).collect()
    }

    /// Prices at time index n, nodes 0..=n_space.
    pub fn slice(&self, time_index: usize) -> &[f64] {
        let w = self.grid.n_space + 1;
        &self.values[time_index * w..(time_index + 1) * w]
    }

    pub fn value(&self, time_index: usize, node: usize) -> f64 {
        self.slice(time_index)[node]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Time index whose grid time equals `t` (within rounding), if any.
    pub fn time_index(&self, t: f64) -> Option<usize> {
        let x = t / self.dt();
        let n = x.round();
        if n < 0.0 || n > self.grid.n_time as f64 {
            return None;
        }
        let tol = 1e-9 * (1.0 + x.abs());
        ((x - n).abs() <= tol).then_some(n as usize)
    }

    pub fn same_grid(&self, other: &Solution) -> bool {
        self.grid == other.grid && self.market.maturity == other.market.maturity
    }
}

/// Marches the surface from t = T down to t = 0.
///
/// `cs = None` solves the cost-free Black-Scholes equation. The solve refuses
/// to start (or stops) with [`Error::Unstable`] when the time step exceeds
/// Δs²/max|2D|, reporting the smallest admissible `n_time`.
pub fn solve(mp: &MarketParams, gs: &GridSpec, cs: Option<&CostStructure>) -> Result<Solution> {
    mp.validate()?;
    gs.validate(mp)?;
    if let Some(cs) = cs {
        cs.validate()?;
    }
    let required = min_stable_n_time(mp, gs, cs);
    if gs.n_time < required {
        return Err(Error::Unstable {
            requested: gs.n_time,
            required,
        });
    }

    let n = gs.n_space;
    let w = n + 1;
    let ds = gs.ds();
    let dt = mp.maturity / gs.n_time as f64;
    let inv_ds2 = 1.0 / (ds * ds);
    let bd = terminal_and_boundary(mp, gs);

    let mut values = vec![0.0; w * (gs.n_time + 1)];
    values[gs.n_time * w..].copy_from_slice(&bd.terminal);

    let mut report = WellPosednessReport::default();
    let mut negative_proportion = false;
    let sqrt_dt_model = mp.rehedge_dt.sqrt();

    for step in (1..=gs.n_time).rev() {
        let (head, tail) = values.split_at_mut(step * w);
        let next = &tail[..w];
        let cur = &mut head[(step - 1) * w..];
        let time_index = step - 1;

        cur[0] = bd.lower[time_index];
        cur[n] = bd.upper[time_index];
        let mut max_two_d: f64 = 0.0;
        for j in 1..n {
            let spot = j as f64 * ds;
            let (lo, mid, hi) = (next[j - 1], next[j], next[j + 1]);
            let gamma = (hi - 2.0 * mid + lo) * inv_ds2;
            let delta = (hi - lo) / (2.0 * ds);
            let terms = node_terms(mp, cs, spot, gamma);
            if cs.is_some() {
                negative_proportion |= terms.negative;
                let lhs = 0.5 - sign(gamma) / (mp.sigma * sqrt_dt_model) * terms.expectation;
                if lhs <= 0.0 {
                    report.record(Violation {
                        node: j,
                        time_index: step,
                        spot,
                        time: step as f64 * dt,
                        lhs,
                    });
                }
            }
            max_two_d = max_two_d.max(2.0 * terms.diffusion.abs());
            let updated = mid + dt * (terms.diffusion * gamma + mp.rate * spot * delta - mp.rate * mid);
            if !updated.is_finite() {
                return Err(Error::NonFinite {
                    node: j,
                    spot,
                    time_index,
                    violations: report.count,
                });
            }
            cur[j] = updated;
        }
        if !step_is_stable(dt, ds, max_two_d) {
            return Err(Error::Unstable {
                requested: gs.n_time,
                required: required_steps(mp.maturity, ds, max_two_d),
            });
        }
    }

    let mut min_price = MinPrice {
        value: f64::INFINITY,
        spot: 0.0,
        time: 0.0,
    };
    for (idx, &v) in values.iter().enumerate() {
        if v < min_price.value {
            min_price = MinPrice {
                value: v,
                spot: (idx % w) as f64 * ds,
                time: (idx / w) as f64 * dt,
            };
        }
    }

    Ok(Solution {
        market: *mp,
        grid: *gs,
        values,
        wellposedness: report,
        negative_proportion,
        min_price,
    })
}
