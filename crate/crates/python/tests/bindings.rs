use std::ffi::CString;

use pyo3::prelude::*;
use pyo3::types::PyDict;

/// Runs `code` with the module bound to `txcost` in its globals.
fn run(code: &str) -> PyResult<()> {
    Python::initialize();
    Python::attach(|py| {
        let module = pyo3::wrap_pymodule!(txcost::txcost)(py);
        let globals = PyDict::new(py);
        globals.set_item("txcost", module)?;
        let code = CString::new(code).unwrap();
        py.run(&code, Some(&globals), None)
    })
}

#[test]
fn analytics_roundtrip() {
    run(r#"
import math
assert abs(txcost.expectation_abs_phi_exp(0.0) - math.sqrt(2 / math.pi)) < 1e-15
assert abs(txcost.expectation_abs_phi_exp(1.0) - 0.2747279770726187) < 1e-15
assert abs(txcost.expectation_abs_z_exp(0.0, 1.0, 1.0) - txcost.expectation_abs_phi_exp(1.0)) < 1e-15
assert abs(txcost.black_scholes_call(100, 100, 0.05, 0.2, 1.0) - 10.450583572185565) < 1e-10
assert math.isfinite(txcost.scaled_mills(1e3))
s = txcost.leland_adjusted_sigma(0.2, 0.01, 1 / 52)
assert 0.13 < s < 0.131
try:
    txcost.leland_adjusted_sigma(0.2, 0.02, 1 / 52)
    raise AssertionError("expected IllPosedError")
except txcost.IllPosedError:
    pass
try:
    txcost.leland_adjusted_sigma(0.2, 0.01, 1 / 52, gamma_sign=0)
    raise AssertionError("expected ValueError")
except ValueError:
    pass
"#)
    .unwrap();
}

#[test]
fn cost_structures() {
    run(r#"
c = txcost.CostStructure.constant(0.05)
assert c.family == "constant" and c.proportion(123.0) == 0.05
p = txcost.CostStructure.piecewise([10.0], [2.0, 1.0]).calibrated(0.05)
assert abs(p.proportion(0.0) - 0.05) < 1e-15 and abs(p.proportion(20.0) - 0.025) < 1e-15
e = txcost.CostStructure.exponential(0.0)
assert abs(e.expectation_term(1.0) - txcost.expectation_abs_phi_exp(1.0)) < 1e-15
assert txcost.CostStructure.linear(0.05, 0.01).total_cost(1.0) == 0.04
for bad in (lambda: txcost.CostStructure.constant(-1.0), lambda: c.expectation_term(-1.0)):
    try:
        bad()
        raise AssertionError("expected ValueError")
    except ValueError:
        pass
"#)
    .unwrap();
}

#[test]
fn solve_and_compare() {
    run(r#"
m = txcost.MarketParams(100.0, 0.05, 0.2, 1.0, 0.25)
c = txcost.CostStructure.constant(0.03)
g = txcost.GridSpec(400.0, 100, boundary="discounted_intrinsic", market=m, cost=c)
assert g.n_time == txcost.min_stable_n_time(m, g, c)
base = txcost.solve(m, g)
costed = txcost.solve(m, g, c)
assert costed.violations == 0 and not costed.negative_proportion
assert len(base.slice(0)) == 101 and base.slice(g.n_time)[100] == 300.0
bs = txcost.black_scholes_call(100, 100, 0.05, 0.2, 1.0)
assert abs(base.price_at(100.0) - bs) < 0.1
report = txcost.difference_curve(costed, base)
s, d = report.peak
assert 80 <= s <= 120 and d > 0
assert report.to_csv().splitlines()[0] == txcost.CSV_HEADER
assert len(report.rows) == 99
spots, delta, gamma = base.greeks(0.0)
assert min(gamma) > -1e-5
try:
    txcost.solve(m, txcost.GridSpec(400.0, 100, n_time=5), c)
    raise AssertionError("expected UnstableError")
except txcost.UnstableError as err:
    assert "at least" in str(err)
"#)
    .unwrap();
}
