//! Greeks, cost-vs-baseline difference curves and off-grid price lookup on a solved surface.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::pde_engine::Solution;

pub const CSV_HEADER: &str = "S,price_costed,price_baseline,difference,delta,gamma";
const SIGNIFICANT_DIGITS: usize = 12;

/// Centered-difference Δ and Γ on the interior nodes of one time slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Greeks {
    pub time: f64,
    pub spots: Vec<f64>,
    pub delta: Vec<f64>,
    pub gamma: Vec<f64>,
}

fn time_index_of(sol: &Solution, t: f64) -> Result<usize> {
    sol.time_index(t)
        .ok_or_else(|| Error::OutOfDomain(format!("t = {t} is not on the time grid (dt = {})", sol.dt())))
}

pub fn greeks_at(sol: &Solution, t: f64) -> Result<Greeks> {
    let n = time_index_of(sol, t)?;
    let c = sol.slice(n);
    let ds = sol.ds();
    let interior = 1..sol.n_space();
    Ok(Greeks {
        time: sol.time(n),
        spots: interior.clone().map(|j| sol.spot(j)).collect(),
        delta: interior.clone().map(|j| (c[j + 1] - c[j - 1]) / (2.0 * ds)).collect(),
        gamma: interior
            .map(|j| (c[j + 1] - 2.0 * c[j] + c[j - 1]) / (ds * ds))
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub spot: f64,
    pub price_costed: f64,
    pub price_baseline: f64,
    /// price_baseline − price_costed
    pub difference: f64,
    pub delta: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveReport {
    pub time: f64,
    pub rows: Vec<CurveRow>,
    /// Row index of the largest difference.
    pub peak: usize,
}

impl CurveReport {
    pub fn peak_row(&self) -> &CurveRow {
        &self.rows[self.peak]
    }

    /// Row whose spot is closest to `spot`.
    pub fn nearest(&self, spot: f64) -> &CurveRow {
        self.rows
            .iter()
            .min_by(|a, b| (a.spot - spot).abs().total_cmp(&(b.spot - spot).abs()))
            .expect("reports always carry rows")
    }

    /// CSV with [`CSV_HEADER`], 12 significant digits per value.
    ///
    /// The difference column is recomputed from the two printed prices so that
    /// it matches their difference to the last printed digit.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let costed = format_sig(r.price_costed);
            let baseline = format_sig(r.price_baseline);
            let difference = printed_difference(&baseline, &costed);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                format_sig(r.spot),
                costed,
                baseline,
                difference,
                format_sig(r.delta),
                format_sig(r.gamma)
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv())
    }
}

/// Row-wise comparison of a costed solve against a baseline on the same grid.
/// Endpoint nodes are dropped; Δ and Γ come from the costed surface.
pub fn difference_curve(costed: &Solution, baseline: &Solution, t: f64) -> Result<CurveReport> {
    if !costed.same_grid(baseline) {
        return Err(Error::GridMismatch(format!(
            "{:?} (T = {}) vs {:?} (T = {})",
            costed.grid(),
            costed.market().maturity,
            baseline.grid(),
            baseline.market().maturity
        )));
    }
    let greeks = greeks_at(costed, t)?;
    let n = time_index_of(costed, t)?;
    let (c, b) = (costed.slice(n), baseline.slice(n));
    let rows: Vec<CurveRow> = greeks
        .spots
        .iter()
        .enumerate()
        .map(|(i, &spot)| {
            let j = i + 1;
            CurveRow {
                spot,
                price_costed: c[j],
                price_baseline: b[j],
                difference: b[j] - c[j],
                delta: greeks.delta[i],
                gamma: greeks.gamma[i],
            }
        })
        .collect();
    let peak = rows
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.difference.total_cmp(&b.1.difference))
        .map(|(i, _)| i)
        .expect("grids have interior nodes");
    Ok(CurveReport {
        time: greeks.time,
        rows,
        peak,
    })
}

/// Bilinear interpolation on the stored surface.
pub fn price_at(sol: &Solution, spot: f64, t: f64) -> Result<f64> {
    let s_max = sol.grid().s_max;
    let maturity = sol.market().maturity;
    if !(0.0..=s_max).contains(&spot) || !(0.0..=maturity).contains(&t) {
        return Err(Error::OutOfDomain(format!(
            "(S, t) = ({spot}, {t}) outside [0, {s_max}] x [0, {maturity}]"
        )));
    }
    let (x, y) = (spot / sol.ds(), t / sol.dt());
    let j = (x.floor() as usize).min(sol.n_space() - 1);
    let n = (y.floor() as usize).min(sol.n_time() - 1);
    let (fx, fy) = (x - j as f64, y - n as f64);
    let lerp = |row: usize| {
        let c = sol.slice(row);
        if fx == 0.0 {
            c[j]
        } else {
            c[j] + fx * (c[j + 1] - c[j])
        }
    };
    let (lo, hi) = (lerp(n), lerp(n + 1));
    Ok(if fy == 0.0 { lo } else { lo + fy * (hi - lo) })
}

/// `%.12g`-style formatting: 12 significant digits, trailing zeros trimmed,
/// exponent form outside 1e-5 ≤ |x| < 1e12.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let (mantissa, exp) = split_scientific(x);
    if !(-5..SIGNIFICANT_DIGITS as i32).contains(&exp) {
        return format!("{}e{}", trim_fraction(&mantissa), exp);
    }
    let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp) as usize;
    trim_fraction(&format!("{x:.decimals$}")).to_string()
}

fn split_scientific(x: f64) -> (String, i32) {
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (m, e) = sci.split_once('e').expect("scientific format has an exponent");
    (m.to_string(), e.parse().expect("integer exponent"))
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// baseline − costed on the printed decimals, snapped to their common resolution.
fn printed_difference(baseline: &str, costed: &str) -> String {
    let b: f64 = baseline.parse().expect("formatted number");
    let c: f64 = costed.parse().expect("formatted number");
    let exp = [b, c]
        .iter()
        .filter(|v| **v != 0.0)
        .map(|&v| split_scientific(v).1)
        .max();
    let d = b - c;
    match exp {
        None => "0".to_string(),
        Some(e) => {
            let quantum_exp = e - (SIGNIFICANT_DIGITS as i32 - 1);
            let scaled = (d * 10f64.powi(-quantum_exp)).round();
            let snapped = scaled * 10f64.powi(quantum_exp);
            format_sig(snapped)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost_model::CostStructure;
    use crate::pde_engine::{solve, BoundaryMode, GridSpec, MarketParams};

    fn market() -> MarketParams {
        MarketParams {
            strike: 100.0,
            rate: 0.05,
            sigma: 0.2,
            maturity: 1.0,
            rehedge_dt: 0.25,
        }
    }

    fn small_grid(mp: &MarketParams, cs: Option<&CostStructure>) -> GridSpec {
        GridSpec {
            s_max: 300.0,
            n_space: 150,
            n_time: 1,
            boundary: BoundaryMode::DiscountedIntrinsic,
        }
        .with_stable_n_time(mp, cs)
    }

    #[test]
    fn format_sig_cases() {
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(-0.0), "0");
        assert_eq!(format_sig(100.0), "100");
        assert_eq!(format_sig(10.450583572185565), "10.4505835722");
        assert_eq!(format_sig(-0.000123456789012345), "-0.000123456789012");
        assert_eq!(format_sig(1.5e-7), "1.5e-7");
        assert_eq!(format_sig(9.9999999999999995), "10");
        assert_eq!(format_sig(123456789012345.0), "1.23456789012e14");
        assert_eq!(format_sig(0.1 + 0.2), "0.3");
    }

    #[test]
    fn printed_difference_is_exact_in_print() {
        assert_eq!(printed_difference("10.4505835722", "10.4505835721"), "1e-10");
        assert_eq!(printed_difference("5", "5"), "0");
        assert_eq!(printed_difference("0", "0"), "0");
        assert_eq!(printed_difference("0.3", "-1.25"), "1.55");
    }

    #[test]
    fn zero_cost_greeks() {
        let mp = market();
        let gs = small_grid(&mp, None);
        let sol = solve(&mp, &gs, None).unwrap();
        let g = greeks_at(&sol, 0.0).unwrap();
        assert_eq!(g.spots.len(), gs.n_space - 1);
        for ((s, d), gm) in g.spots.iter().zip(&g.delta).zip(&g.gamma) {
            if *s <= 20.0 {
                assert!(gm.abs() <= 1e-3 / 100.0, "S = {s}: gamma {gm}");
            }
            if (50.0..=150.0).contains(s) {
                assert!(*d >= -1e-3 && *d <= 1.0 + 1e-3);
            }
        }
        // one step before expiry Γ peaks at the strike node
        let g = greeks_at(&sol, sol.time(gs.n_time - 1)).unwrap();
        let peak = g.gamma.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(g.spots[peak], 100.0);
        assert!(greeks_at(&sol, 0.5 * sol.dt()).is_err());
    }

    #[test]
    fn gamma_integrates_to_delta_change() {
        let mp = market();
        let sol = solve(&mp, &small_grid(&mp, None), None).unwrap();
        let g = greeks_at(&sol, 0.0).unwrap();
        let ds = sol.ds();
        let (lo, hi) = (20, 90);
        let integral: f64 = (lo..hi).map(|i| 0.5 * ds * (g.gamma[i] + g.gamma[i + 1])).sum();
        assert!((integral - (g.delta[hi] - g.delta[lo])).abs() < 1e-3);
    }

    #[test]
    fn self_difference_is_zero() {
        let mp = market();
        let cs = CostStructure::constant(0.01).unwrap();
        let sol = solve(&mp, &small_grid(&mp, Some(&cs)), Some(&cs)).unwrap();
        let rep = difference_curve(&sol, &sol, 0.0).unwrap();
        assert!(rep.rows.iter().all(|r| r.difference == 0.0));
        assert!(rep.to_csv().lines().skip(1).all(|l| l.split(',').nth(3) == Some("0")));
    }

    #[test]
    fn constant_cost_difference_peaks_near_strike() {
        let mp = market();
        let cs = CostStructure::constant(0.05).unwrap();
        let gs = small_grid(&mp, Some(&cs));
        let base = solve(&mp, &gs, None).unwrap();
        let costed = solve(&mp, &gs, Some(&cs)).unwrap();
        let rep = difference_curve(&costed, &base, 0.0).unwrap();
        let peak = rep.peak_row();
        assert!(peak.spot >= 80.0 && peak.spot <= 120.0, "{peak:?}");
        assert!(peak.difference > 0.0);
        assert_eq!(rep.rows.first().unwrap().spot, 2.0);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let mp = market();
        let a = solve(&mp, &small_grid(&mp, None), None).unwrap();
        let gs = GridSpec {
            n_space: 100,
            ..small_grid(&mp, None)
        };
        let b = solve(&mp, &gs.with_stable_n_time(&mp, None), None).unwrap();
        assert!(matches!(difference_curve(&a, &b, 0.0), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn interpolation() {
        let mp = market();
        let sol = solve(&mp, &small_grid(&mp, None), None).unwrap();
        assert_eq!(price_at(&sol, 100.0, 0.0).unwrap(), sol.value(0, 50));
        assert_eq!(price_at(&sol, sol.spot(7), sol.time(3)).unwrap(), sol.value(3, 7));
        assert_eq!(price_at(&sol, 0.0, 0.37).unwrap(), 0.0);
        assert_eq!(price_at(&sol, 300.0, 1.0).unwrap(), 200.0);
        // terminal payoff is linear between 120 and 124
        assert!((price_at(&sol, 121.0, 1.0).unwrap() - 21.0).abs() < 1e-12);
        let mid = price_at(&sol, 101.0, 0.0).unwrap();
        assert!((mid - 0.5 * (sol.value(0, 50) + sol.value(0, 51))).abs() < 1e-12);
        assert!(price_at(&sol, -1.0, 0.0).is_err());
        assert!(price_at(&sol, 10.0, 1.5).is_err());
    }
}
