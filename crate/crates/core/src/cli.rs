//! `txcost` command-line front end: `price`, `validate` and `table`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::config::{ConfigError, NamedStructure, RunConfig};
use crate::cost_model::CostStructure;
use crate::error::Error;
use crate::pde_engine::{solve, wellposedness_lhs, GridSpec, Solution};
use crate::postproc::{difference_curve, format_sig, greeks_at, price_at};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_UNSTABLE: u8 = 3;
pub const EXIT_ILL_POSED: u8 = 4;
pub const EXIT_IO: u8 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "txcost",
    version,
    about = "Price European calls under transaction-cost models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve every structure plus the zero-cost baseline and write one CSV per structure.
    Price(RunArgs),
    /// Check the well-posedness condition over the Γ range of the zero-cost solution.
    Validate(RunArgs),
    /// At-the-money prices and differences per structure.
    Table {
        #[command(flatten)]
        run: RunArgs,
        /// Print CSV instead of an aligned table.
        #[arg(long)]
        csv: bool,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory for `price`, overriding `output_path` from the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("{name}: {source}")]
    Solve { name: String, source: Error },

    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io { .. } => EXIT_IO,
            CliError::Solve { source, .. } => match source {
                Error::NonFinite { violations, .. } if *violations > 0 => EXIT_ILL_POSED,
                Error::IllPosed { .. } => EXIT_ILL_POSED,
                Error::InvalidCost(_) | Error::InvalidParams(_) | Error::OutOfDomain(_) | Error::GridMismatch(_) => {
                    EXIT_CONFIG
                }
                _ => EXIT_UNSTABLE,
            },
        }
    }

    fn ill_posed(&self) -> bool {
        self.exit_code() == EXIT_ILL_POSED
    }
}

/// Completed command: either clean or with well-posedness violations reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Clean,
    IllPosed,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Clean => EXIT_OK,
            Status::IllPosed => EXIT_ILL_POSED,
        }
    }
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<Status, CliError> {
    match &cli.command {
        Command::Price(args) => cmd_price(&RunConfig::load(&args.config)?, args.out.clone(), out),
        Command::Validate(args) => cmd_validate(&RunConfig::load(&args.config)?, out),
        Command::Table { run, csv } => cmd_table(&RunConfig::load(&run.config)?, *csv, out),
    }
}

/// Runs the parsed command, reporting errors on stderr, and returns the process exit code.
pub fn main_exit_code(cli: &Cli) -> u8 {
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(cli, &mut lock) {
        Ok(status) => status.exit_code(),
        Err(e) => {
            let _ = lock.flush();
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

struct Solved {
    grid: GridSpec,
    baseline: Solution,
    structures: Vec<(NamedStructure, crate::Result<Solution>)>,
}

/// Baseline and per-structure solves on one shared grid, one thread each.
fn solve_all(cfg: &RunConfig) -> Result<Solved, CliError> {
    let structures = cfg.resolved_structures()?;
    let grid = cfg.grid_spec(&structures);
    let (baseline, results) = std::thread::scope(|scope| {
        let handles: Vec<_> = structures
            .iter()
            .map(|s| scope.spawn(|| solve(&cfg.market, &grid, Some(&s.structure))))
            .collect();
        let baseline = solve(&cfg.market, &grid, None);
        let results: Vec<_> = handles
            .into_iter()
            .map(|h| h.join().expect("solver thread panicked"))
            .collect();
        (baseline, results)
    });
    let baseline = baseline.map_err(|source| CliError::Solve {
        name: "baseline".into(),
        source,
    })?;
    baseline.time_index(cfg.evaluation_time).ok_or_else(|| {
        ConfigError::Invalid(format!(
            "evaluation_time = {} is not on the time grid (dt = {})",
            cfg.evaluation_time,
            baseline.dt()
        ))
    })?;
    Ok(Solved {
        grid,
        baseline,
        structures: structures.into_iter().zip(results).collect(),
    })
}

/// Keeps the most severe failure: I/O, then stability refusals, then ill-posed blow-ups.
fn worse(current: Option<CliError>, new: CliError) -> Option<CliError> {
    let rank = |e: &CliError| match e.exit_code() {
        EXIT_IO => 0,
        EXIT_CONFIG => 1,
        EXIT_UNSTABLE => 2,
        _ => 3,
    };
    match current {
        Some(c) if rank(&c) <= rank(&new) => Some(c),
        _ => Some(new),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn finish(failure: Option<CliError>, violations: bool) -> Result<Status, CliError> {
    match failure {
        Some(e) if !e.ill_posed() => Err(e),
        Some(_) => Ok(Status::IllPosed),
        None if violations => Ok(Status::IllPosed),
        None => Ok(Status::Clean),
    }
}

fn write_grid_line(out: &mut dyn Write, cfg: &RunConfig, grid: &GridSpec) -> std::io::Result<()> {
    writeln!(
        out,
        "grid: s_max={} n_space={} n_time={} boundary={:?} t={}",
        format_sig(grid.s_max),
        grid.n_space,
        grid.n_time,
        grid.boundary,
        format_sig(cfg.evaluation_time)
    )
}

pub fn cmd_price(cfg: &RunConfig, out_dir: Option<PathBuf>, out: &mut dyn Write) -> Result<Status, CliError> {
    let solved = solve_all(cfg)?;
    let dir = out_dir
        .or_else(|| cfg.output_path.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let stdout_path = PathBuf::from("<stdout>");
    write_grid_line(out, cfg, &solved.grid).map_err(io_err(&stdout_path))?;

    if solved.structures.is_empty() {
        let report = difference_curve(&solved.baseline, &solved.baseline, cfg.evaluation_time).map_err(|source| {
            CliError::Solve {
                name: "baseline".into(),
                source,
            }
        })?;
        let path = dir.join("baseline.csv");
        report.write_csv(&path).map_err(io_err(&path))?;
        writeln!(
            out,
            "baseline: min_price={} violations=0 negative_proportion=false -> {}",
            format_sig(solved.baseline.min_price.value),
            path.display()
        )
        .map_err(io_err(&stdout_path))?;
        return Ok(Status::Clean);
    }

    let mut failure = None;
    let mut violations = false;
    for (named, result) in &solved.structures {
        let sol = match result {
            Ok(sol) => sol,
            Err(source) => {
                let e = CliError::Solve {
                    name: named.name.clone(),
                    source: source.clone(),
                };
                writeln!(out, "{}: failed: {source}", named.name).map_err(io_err(&stdout_path))?;
                failure = worse(failure, e);
                continue;
            }
        };
        let report =
            difference_curve(sol, &solved.baseline, cfg.evaluation_time).map_err(|source| CliError::Solve {
                name: named.name.clone(),
                source,
            })?;
        let path = dir.join(format!("{}.csv", named.name));
        report.write_csv(&path).map_err(io_err(&path))?;
        let peak = report.peak_row();
        let min = sol.min_price;
        writeln!(
            out,
            "{}: min_price={} at S={} t={} violations={} negative_proportion={} peak_difference={} at S={} -> {}",
            named.name,
            format_sig(min.value),
            format_sig(min.spot),
            format_sig(min.time),
            sol.wellposedness.count,
            sol.negative_proportion,
            format_sig(peak.difference),
            format_sig(peak.spot),
            path.display()
        )
        .map_err(io_err(&stdout_path))?;
        violations |= sol.wellposedness.count > 0;
    }
    finish(failure, violations)
}

/// k above which the constant structure is ill-posed wherever Γ > 0: k√(2/π) = σ√δt/2.
pub fn constant_k_limit(sigma: f64, rehedge_dt: f64) -> f64 {
    0.5 * sigma * rehedge_dt.sqrt() / crate::analytics::SQRT_2_OVER_PI
}

/// Result of scanning the well-posedness condition over a set of (S, Γ) samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WellPosednessScan {
    pub nodes: usize,
    pub violations: usize,
    pub min_lhs: f64,
    pub min_spot: f64,
    pub min_gamma: f64,
}

/// Evaluates the condition at every interior node of every slice of `reference`,
/// using that surface's Γ. Nothing is re-solved.
pub fn scan_wellposedness(reference: &Solution, cs: Option<&CostStructure>) -> WellPosednessScan {
    let mp = reference.market();
    let mut scan = WellPosednessScan {
        nodes: 0,
        violations: 0,
        min_lhs: f64::INFINITY,
        min_spot: f64::NAN,
        min_gamma: f64::NAN,
    };
    for n in 0..=reference.n_time() {
        let greeks = greeks_at(reference, reference.time(n)).expect("slice times lie on the grid");
        for (&spot, &gamma) in greeks.spots.iter().zip(&greeks.gamma) {
            let lhs = wellposedness_lhs(mp, cs, spot, gamma);
            scan.nodes += 1;
            if lhs <= 0.0 {
                scan.violations += 1;
            }
            if lhs < scan.min_lhs {
                scan.min_lhs = lhs;
                scan.min_spot = spot;
                scan.min_gamma = gamma;
            }
        }
    }
    scan
}

pub fn cmd_validate(cfg: &RunConfig, out: &mut dyn Write) -> Result<Status, CliError> {
    let structures = cfg.resolved_structures()?;
    let grid = cfg.grid_spec(&[]);
    let baseline = solve(&cfg.market, &grid, None).map_err(|source| CliError::Solve {
        name: "baseline".into(),
        source,
    })?;
    let limit = constant_k_limit(cfg.market.sigma, cfg.market.rehedge_dt);
    let (gmin, gmax) = baseline
        .values()
        .chunks(grid.n_space + 1)
        .flat_map(|c| {
            c.windows(3)
                .map(|w| (w[2] - 2.0 * w[1] + w[0]) / (grid.ds() * grid.ds()))
        })
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), g| (lo.min(g), hi.max(g)));

    let mut w = |line: String| writeln!(out, "{line}").map_err(io_err(Path::new("<stdout>")));
    w(format!(
        "scanned zero-cost Gamma range [{}, {}] over {} x {} nodes",
        format_sig(gmin),
        format_sig(gmax),
        grid.n_time + 1,
        grid.n_space - 1
    ))?;
    w(format!(
        "constant-k limit: well-posed for Gamma > 0 iff k < sigma*sqrt(pi*dt/8) = {}",
        format_sig(limit)
    ))?;
    w("baseline: well-posed everywhere, LHS = 0.5".into())?;

    let mut any = false;
    for named in &structures {
        let cs = &named.structure;
        let scan = scan_wellposedness(&baseline, Some(cs));
        let guaranteed = cs.max_proportion() < limit;
        let closed_form = match cs {
            CostStructure::Constant { k } if *k >= limit => {
                format!(
                    "; closed form: k = {} >= {}, ill-posed for Gamma>0",
                    format_sig(*k),
                    format_sig(limit)
                )
            }
            CostStructure::Constant { k } => {
                format!(
                    "; closed form: k = {} < {}, well-posed",
                    format_sig(*k),
                    format_sig(limit)
                )
            }
            _ if guaranteed => format!(
                "; max proportion {} < {}, well-posed for every Gamma",
                format_sig(cs.max_proportion()),
                format_sig(limit)
            ),
            _ => String::new(),
        };
        if scan.violations > 0 {
            any = true;
            w(format!(
                "{}: ill-posed for Gamma>0 at {} of {} scanned nodes (min LHS {} at S={} Gamma={}){}",
                named.name,
                scan.violations,
                scan.nodes,
                format_sig(scan.min_lhs),
                format_sig(scan.min_spot),
                format_sig(scan.min_gamma),
                closed_form
            ))?;
        } else {
            w(format!(
                "{}: well-posed on scanned range (min LHS {} at S={} Gamma={}){}",
                named.name,
                format_sig(scan.min_lhs),
                format_sig(scan.min_spot),
                format_sig(scan.min_gamma),
                closed_form
            ))?;
        }
    }
    Ok(if any { Status::IllPosed } else { Status::Clean })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub name: String,
    pub atm_price: f64,
    pub atm_baseline: f64,
    pub atm_difference: f64,
}

pub fn cmd_table(cfg: &RunConfig, csv: bool, out: &mut dyn Write) -> Result<Status, CliError> {
    let solved = solve_all(cfg)?;
    let (k, t) = (cfg.market.strike, cfg.evaluation_time);
    let at = |name: &str, sol: &Solution| {
        price_at(sol, k, t).map_err(|source| CliError::Solve {
            name: name.to_string(),
            source,
        })
    };
    let baseline = at("baseline", &solved.baseline)?;

    let mut rows = Vec::new();
    let mut failure = None;
    let mut violations = false;
    if solved.structures.is_empty() {
        rows.push(TableRow {
            name: "baseline".into(),
            atm_price: baseline,
            atm_baseline: baseline,
            atm_difference: 0.0,
        });
    }
    for (named, result) in &solved.structures {
        match result {
            Ok(sol) => {
                let price = at(&named.name, sol)?;
                violations |= sol.wellposedness.count > 0;
                rows.push(TableRow {
                    name: named.name.clone(),
                    atm_price: price,
                    atm_baseline: baseline,
                    atm_difference: baseline - price,
                });
            }
            Err(source) => {
                eprintln!("{}: failed: {source}", named.name);
                failure = worse(
                    failure,
                    CliError::Solve {
                        name: named.name.clone(),
                        source: source.clone(),
                    },
                );
            }
        }
    }
    rows.sort_by(|a, b| {
        b.atm_difference
            .total_cmp(&a.atm_difference)
            .then_with(|| a.name.cmp(&b.name))
    });

    let stdout_path = PathBuf::from("<stdout>");
    let text = render_table(&rows, csv);
    out.write_all(text.as_bytes()).map_err(io_err(&stdout_path))?;
    finish(failure, violations)
}

fn render_table(rows: &[TableRow], csv: bool) -> String {
    let cells = |r: &TableRow| {
        [
            r.name.clone(),
            format_sig(r.atm_price),
            format_sig(r.atm_baseline),
            format_sig(r.atm_difference),
        ]
    };
    let header = ["structure", "atm_price", "atm_baseline", "atm_difference"].map(String::from);
    let body: Vec<[String; 4]> = std::iter::once(header).chain(rows.iter().map(cells)).collect();
    if csv {
        return body.iter().map(|r| r.join(",") + "\n").collect();
    }
    let widths: Vec<usize> = (0..4)
        .map(|c| body.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    body.iter()
        .map(|r| {
            let line: Vec<String> = r.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect();
            line.join("  ").trim_end().to_string() + "\n"
        })
        .collect()
}
