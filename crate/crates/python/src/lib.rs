//! Python bindings: `import txcost`.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use txcost_core::analytics::{self, GammaSign, NormalParams};
use txcost_core::cost_model::{self, PiecewiseMode, TransactionScale};
use txcost_core::pde_engine::{self, BoundaryMode};
use txcost_core::postproc;

create_exception!(txcost, PricingError, PyException);
create_exception!(txcost, IllPosedError, PricingError);
create_exception!(txcost, UnstableError, PricingError);

fn to_py(e: txcost_core::Error) -> PyErr {
    use txcost_core::Error as E;
    let msg = e.to_string();
    match e {
        E::InvalidCost(_) | E::InvalidParams(_) | E::OutOfDomain(_) | E::GridMismatch(_) => PyValueError::new_err(msg),
        E::IllPosed { .. } => IllPosedError::new_err(msg),
        E::NonFinite { violations, .. } if violations > 0 => IllPosedError::new_err(msg),
        E::Unstable { .. } | E::NonFinite { .. } => UnstableError::new_err(msg),
        E::QuadratureNotConverged { .. } => PricingError::new_err(msg),
    }
}

#[pyclass(name = "MarketParams", module = "txcost", skip_from_py_object)]
#[derive(Clone)]
pub struct PyMarketParams {
    inner: pde_engine::MarketParams,
}

#[pymethods]
impl PyMarketParams {
    #[new]
    #[pyo3(signature = (strike, rate, sigma, maturity, rehedge_dt))]
    fn new(strike: f64, rate: f64, sigma: f64, maturity: f64, rehedge_dt: f64) -> PyResult<Self> {
        let inner = pde_engine::MarketParams {
            strike,
            rate,
            sigma,
            maturity,
            rehedge_dt,
        };
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn strike(&self) -> f64 {
        self.inner.strike
    }
    #[getter]
    fn rate(&self) -> f64 {
        self.inner.rate
    }
    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma
    }
    #[getter]
    fn maturity(&self) -> f64 {
        self.inner.maturity
    }
    #[getter]
    fn rehedge_dt(&self) -> f64 {
        self.inner.rehedge_dt
    }

    fn __repr__(&self) -> String {
        let m = &self.inner;
        format!(
            "MarketParams(strike={}, rate={}, sigma={}, maturity={}, rehedge_dt={})",
            m.strike, m.rate, m.sigma, m.maturity, m.rehedge_dt
        )
    }
}

fn parse_boundary(s: &str) -> PyResult<BoundaryMode> {
    match s {
        "literal" => Ok(BoundaryMode::Literal),
        "discounted_intrinsic" => Ok(BoundaryMode::DiscountedIntrinsic),
        _ => Err(PyValueError::new_err(format!(
            "boundary must be 'literal' or 'discounted_intrinsic', got {s:?}"
        ))),
    }
}

#[pyclass(name = "GridSpec", module = "txcost", skip_from_py_object)]
#[derive(Clone)]
pub struct PyGridSpec {
    inner: pde_engine::GridSpec,
}

#[pymethods]
impl PyGridSpec {
    /// `n_time=None` picks the smallest stable count for `market` and `cost`.
    #[new]
    #[pyo3(signature = (s_max, n_space, n_time=None, boundary="literal", market=None, cost=None))]
    fn new(
        s_max: f64,
        n_space: usize,
        n_time: Option<usize>,
        boundary: &str,
        market: Option<&PyMarketParams>,
        cost: Option<&PyCostStructure>,
    ) -> PyResult<Self> {
        let mut inner = pde_engine::GridSpec {
            s_max,
            n_space,
            n_time: n_time.unwrap_or(1),
            boundary: parse_boundary(boundary)?,
        };
        if n_time.is_none() {
            let m = market.ok_or_else(|| PyValueError::new_err("automatic n_time needs market"))?;
            inner = inner.with_stable_n_time(&m.inner, cost.map(|c| &c.inner));
        }
        Ok(Self { inner })
    }

    #[getter]
    fn s_max(&self) -> f64 {
        self.inner.s_max
    }
    #[getter]
    fn n_space(&self) -> usize {
        self.inner.n_space
    }
    #[getter]
    fn n_time(&self) -> usize {
        self.inner.n_time
    }
    #[getter]
    fn boundary(&self) -> &'static str {
        match self.inner.boundary {
            BoundaryMode::Literal => "literal",
            BoundaryMode::DiscountedIntrinsic => "discounted_intrinsic",
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "GridSpec(s_max={}, n_space={}, n_time={}, boundary='{}')",
            self.inner.s_max,
            self.inner.n_space,
            self.inner.n_time,
            self.boundary()
        )
    }
}

#[pyclass(name = "CostStructure", module = "txcost", skip_from_py_object)]
#[derive(Clone)]
pub struct PyCostStructure {
    inner: cost_model::CostStructure,
}

#[pymethods]
impl PyCostStructure {
    #[staticmethod]
    fn constant(k: f64) -> PyResult<Self> {
        cost_model::CostStructure::constant(k)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    /// `rates[i]` applies between `breakpoints[i-1]` and `breakpoints[i]`.
    #[staticmethod]
    #[pyo3(signature = (breakpoints, rates, exact=false))]
    fn piecewise(breakpoints: Vec<f64>, rates: Vec<f64>, exact: bool) -> PyResult<Self> {
        let mode = if exact {
            PiecewiseMode::ExactExpectation
        } else {
            PiecewiseMode::RegimeSelect
        };
        cost_model::CostStructure::piecewise(breakpoints, rates, mode)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    fn linear(a: f64, k: f64) -> PyResult<Self> {
        cost_model::CostStructure::linear(a, k)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    fn exponential(a: f64) -> PyResult<Self> {
        cost_model::CostStructure::exponential(a)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.inner.family()
    }

    fn proportion(&self, v: f64) -> f64 {
        self.inner.proportion(v)
    }

    fn total_cost(&self, v: f64) -> f64 {
        self.inner.total_cost(v)
    }

    /// E[|φ|k(β|φ|)] for φ ∼ N(0,1).
    fn expectation_term(&self, beta: f64) -> PyResult<f64> {
        let scale = TransactionScale::new(beta).map_err(to_py)?;
        Ok(self.inner.expectation_term(scale).value)
    }

    fn calibrated(&self, k0: f64) -> PyResult<Self> {
        self.inner.calibrated_to(k0).map(|inner| Self { inner }).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("CostStructure({:?})", self.inner)
    }
}

#[pyclass(name = "Solution", module = "txcost", frozen)]
pub struct PySolution {
    inner: pde_engine::Solution,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn n_space(&self) -> usize {
        self.inner.n_space()
    }
    #[getter]
    fn n_time(&self) -> usize {
        self.inner.n_time()
    }
    #[getter]
    fn spots(&self) -> Vec<f64> {
        self.inner.spots()
    }
    #[getter]
    fn violations(&self) -> usize {
        self.inner.wellposedness.count
    }
    #[getter]
    fn negative_proportion(&self) -> bool {
        self.inner.negative_proportion
    }
    /// (value, S, t) of the smallest price on the surface.
    #[getter]
    fn min_price(&self) -> (f64, f64, f64) {
        let m = self.inner.min_price;
        (m.value, m.spot, m.time)
    }

    /// Prices at time index `n` (0 is t = 0).
    fn slice(&self, n: usize) -> PyResult<Vec<f64>> {
        if n > self.inner.n_time() {
            return Err(PyValueError::new_err(format!(
                "time index {n} > {}",
                self.inner.n_time()
            )));
        }
        Ok(self.inner.slice(n).to_vec())
    }

    #[pyo3(signature = (spot, t=0.0))]
    fn price_at(&self, spot: f64, t: f64) -> PyResult<f64> {
        postproc::price_at(&self.inner, spot, t).map_err(to_py)
    }

    /// (spots, delta, gamma) on the interior nodes at grid time `t`.
    #[pyo3(signature = (t=0.0))]
    fn greeks(&self, t: f64) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let g = postproc::greeks_at(&self.inner, t).map_err(to_py)?;
        Ok((g.spots, g.delta, g.gamma))
    }
}

#[pyclass(name = "CurveReport", module = "txcost", frozen)]
pub struct PyCurveReport {
    inner: postproc::CurveReport,
}

#[pymethods]
impl PyCurveReport {
    /// Rows as (S, price_costed, price_baseline, difference, delta, gamma).
    #[getter]
    fn rows(&self) -> Vec<(f64, f64, f64, f64, f64, f64)> {
        self.inner
            .rows
            .iter()
            .map(|r| (r.spot, r.price_costed, r.price_baseline, r.difference, r.delta, r.gamma))
            .collect()
    }

    /// (S, difference) at the largest difference.
    #[getter]
    fn peak(&self) -> (f64, f64) {
        let r = self.inner.peak_row();
        (r.spot, r.difference)
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }
}

#[pyfunction]
#[pyo3(signature = (market, grid, cost=None))]
fn solve(
    py: Python<'_>,
    market: &PyMarketParams,
    grid: &PyGridSpec,
    cost: Option<&PyCostStructure>,
) -> PyResult<PySolution> {
    let (mp, gs, cs) = (market.inner, grid.inner, cost.map(|c| c.inner.clone()));
    py.detach(|| pde_engine::solve(&mp, &gs, cs.as_ref()))
        .map(|inner| PySolution { inner })
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (costed, baseline, t=0.0))]
fn difference_curve(costed: &PySolution, baseline: &PySolution, t: f64) -> PyResult<PyCurveReport> {
    postproc::difference_curve(&costed.inner, &baseline.inner, t)
        .map(|inner| PyCurveReport { inner })
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (market, grid, cost=None))]
fn min_stable_n_time(market: &PyMarketParams, grid: &PyGridSpec, cost: Option<&PyCostStructure>) -> usize {
    pde_engine::min_stable_n_time(&market.inner, &grid.inner, cost.map(|c| &c.inner))
}

#[pyfunction]
fn expectation_abs_phi_exp(alpha: f64) -> f64 {
    analytics::expectation_abs_phi_exp(alpha)
}

#[pyfunction]
fn expectation_abs_z_exp(mu: f64, sigma: f64, a: f64) -> PyResult<f64> {
    let p = NormalParams::new(mu, sigma).map_err(to_py)?;
    Ok(analytics::expectation_abs_z_exp(p, a))
}

#[pyfunction]
fn scaled_mills(alpha: f64) -> f64 {
    analytics::scaled_mills(alpha)
}

#[pyfunction]
fn black_scholes_call(spot: f64, strike: f64, rate: f64, sigma: f64, tau: f64) -> f64 {
    analytics::black_scholes_call(spot, strike, rate, sigma, tau)
}

#[pyfunction]
#[pyo3(signature = (sigma, k, rehedge_dt, gamma_sign=1))]
fn leland_adjusted_sigma(sigma: f64, k: f64, rehedge_dt: f64, gamma_sign: i32) -> PyResult<f64> {
    let sign = GammaSign::try_from(gamma_sign).map_err(to_py)?;
    analytics::leland_adjusted_sigma(sigma, k, rehedge_dt, sign).map_err(to_py)
}

#[pymodule]
pub fn txcost(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("PricingError", py.get_type::<PricingError>())?;
    m.add("IllPosedError", py.get_type::<IllPosedError>())?;
    m.add("UnstableError", py.get_type::<UnstableError>())?;
    m.add("CSV_HEADER", postproc::CSV_HEADER)?;
    m.add_class::<PyMarketParams>()?;
    m.add_class::<PyGridSpec>()?;
    m.add_class::<PyCostStructure>()?;
    m.add_class::<PySolution>()?;
    m.add_class::<PyCurveReport>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(difference_curve, m)?)?;
    m.add_function(wrap_pyfunction!(min_stable_n_time, m)?)?;
    m.add_function(wrap_pyfunction!(expectation_abs_phi_exp, m)?)?;
    m.add_function(wrap_pyfunction!(expectation_abs_z_exp, m)?)?;
    m.add_function(wrap_pyfunction!(scaled_mills, m)?)?;
    m.add_function(wrap_pyfunction!(black_scholes_call, m)?)?;
    m.add_function(wrap_pyfunction!(leland_adjusted_sigma, m)?)?;
    Ok(())
}
