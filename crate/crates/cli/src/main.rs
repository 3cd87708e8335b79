//! `geold`: landscapes, phase-space maps, temporal LD lines and rate reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use geold::io::{fmt17, read_grid_csv, write_grid_csv, write_landscape_csv, write_pgm, IoError};
use geold::rates::rate_report_for;
use geold::temporal::{ld_landscape_line, Axis, FlowStatus, LineSpec};
use geold::{
    b_map, ell_map, energy_map, landscape, temporal_map, Critical, EllMode, GridSpec,
    HamiltonianModel, IntegratorConfig, LdError, MapError, ModelError, QuadratureConfig,
    QuadratureError, Quantity, Side, TemporalError, Truncation,
};

#[derive(Parser, Debug)]
#[command(name = "geold", version, about = "Geometric and temporal Lagrangian descriptors")]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample ℓ(E) over an energy range.
    Landscape(LandscapeArgs),
    /// Energy, ℓ or temporal LD on a uniform (q, p) grid.
    Map(MapArgs),
    /// Gradient-norm map of an ℓ grid written by `map --quantity ell`.
    Bmap(BmapArgs),
    /// Temporal LD along a line of initial conditions.
    Temporal(TemporalArgs),
    /// Power-law fits of |dℓ/dE| near critical energies, as JSON.
    Rates(RatesArgs),
    /// List built-in models.
    Models,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ModelName {
    Pendulum,
    Duffing,
    Fishtail,
    #[value(alias = "oscillator")]
    HarmonicOscillator,
    #[value(alias = "repulsor")]
    HarmonicRepulsor,
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long, value_enum)]
    model: ModelName,
    /// Left cut `q >= a` for models with unbounded level curves.
    #[arg(long, allow_hyphen_values = true)]
    trunc: Option<f64>,
    /// Fish-tail only: trace just the closed loops with q >= -4.
    #[arg(long)]
    bounded_librations: bool,
    /// Harmonic repulsor only: hyperbolic-angle cut.
    #[arg(long, default_value_t = 1.0)]
    t_star: f64,
    /// Return the best quadrature estimate instead of failing.
    #[arg(long)]
    best_effort: bool,
}

#[derive(Args, Debug)]
struct LandscapeArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, allow_hyphen_values = true)]
    emin: f64,
    #[arg(long, allow_hyphen_values = true)]
    emax: f64,
    #[arg(long)]
    n: usize,
    /// Add a dℓ/dE column.
    #[arg(long)]
    derivs: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum MapQuantity {
    Ell,
    Energy,
    Temporal,
}

#[derive(Args, Debug)]
struct MapArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// `qlo,qhi,plo,phi`
    #[arg(long, value_parser = parse_bounds, allow_hyphen_values = true)]
    bounds: [f64; 4],
    /// `NQxNP`
    #[arg(long, value_parser = parse_grid)]
    grid: (usize, usize),
    #[arg(long, value_enum)]
    quantity: MapQuantity,
    /// Time horizon for `--quantity temporal`.
    #[arg(long, default_value_t = 20.0)]
    t: f64,
    /// Interpolate ℓ from a dense table instead of evaluating every level set.
    #[arg(long)]
    table_mode: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    pgm: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BmapArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    pgm: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TemporalArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    t: f64,
    /// `fixed=p|q:VALUE,range=LO:HI:N`
    #[arg(long, value_parser = parse_line, allow_hyphen_values = true)]
    line: LineSpec,
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum SideArg {
    Below,
    Above,
    Both,
}

#[derive(Args, Debug)]
struct RatesArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum)]
    critical: Option<CriticalArg>,
    #[arg(long, value_enum, default_value = "both")]
    side: SideArg,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum CriticalArg {
    Separatrix,
    Elliptic,
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let x: f64 = s.trim().parse().map_err(|_| format!("not a number: {s:?}"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("not a finite number: {s:?}"))
    }
}

fn parse_bounds(s: &str) -> Result<[f64; 4], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 4 {
        return Err("expected qlo,qhi,plo,phi".into());
    }
    let mut b = [0.0; 4];
    for (dst, part) in b.iter_mut().zip(parts) {
        *dst = parse_f64(part)?;
    }
    if !(b[0] < b[1] && b[2] < b[3]) {
        return Err("bounds must satisfy qlo < qhi and plo < phi".into());
    }
    Ok(b)
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or("expected NQxNP")?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|_| format!("not a count: {v:?}"));
    let (nq, np) = (parse(a)?, parse(b)?);
    if nq < 2 || np < 2 {
        return Err("each grid dimension needs at least 2 nodes".into());
    }
    Ok((nq, np))
}

fn parse_line(s: &str) -> Result<LineSpec, String> {
    let mut fixed = None;
    let mut range = None;
    for part in s.split(',') {
        match part.split_once('=') {
            Some(("fixed", v)) => fixed = Some(v),
            Some(("range", v)) => range = Some(v),
            _ => return Err(format!("unexpected line component {part:?}")),
        }
    }
    let fixed = fixed.ok_or("missing fixed=p|q:VALUE")?;
    let range = range.ok_or("missing range=LO:HI:N")?;
    let (axis, value) = fixed.split_once(':').ok_or("fixed needs the form p:VALUE or q:VALUE")?;
    let fixed = match axis {
        "q" => Axis::Q,
        "p" => Axis::P,
        _ => return Err(format!("fixed axis must be p or q, got {axis:?}")),
    };
    let r: Vec<&str> = range.split(':').collect();
    if r.len() != 3 {
        return Err("range needs the form LO:HI:N".into());
    }
    let (lo, hi) = (parse_f64(r[0])?, parse_f64(r[1])?);
    let n: usize = r[2].parse().map_err(|_| format!("not a count: {:?}", r[2]))?;
    if !(lo < hi) || n < 2 {
        return Err("range needs LO < HI and N >= 2".into());
    }
    Ok(LineSpec { fixed, value: parse_f64(value)?, lo, hi, n })
}

/// Exit code 1 for bad input, 2 for numerical failures.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Numeric(String),
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<LdError> for Failure {
    fn from(e: LdError) -> Self {
        match e {
            LdError::Model(_) | LdError::InvalidRange | LdError::Quadrature(QuadratureError::Model(_)) => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Numeric(e.to_string()),
        }
    }
}

impl From<MapError> for Failure {
    fn from(e: MapError) -> Self {
        match e {
            MapError::Ld(inner) => inner.into(),
            MapError::EmptyTable => Failure::Numeric(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl ModelArgs {
    fn build(&self) -> Result<(HamiltonianModel, Option<Truncation>), Failure> {
        if self.bounded_librations && self.model != ModelName::Fishtail {
            return Err(Failure::Usage("--bounded-librations applies only to the fishtail model".into()));
        }
        if !(self.t_star > 0.0 && self.t_star.is_finite()) {
            return Err(Failure::Usage("--t-star must be positive".into()));
        }
        let model = match self.model {
            ModelName::Pendulum => HamiltonianModel::pendulum(),
            ModelName::Duffing => HamiltonianModel::duffing(),
            ModelName::Fishtail if self.bounded_librations => HamiltonianModel::fishtail_bounded_librations(),
            ModelName::Fishtail => HamiltonianModel::fishtail(),
            ModelName::HarmonicOscillator => HamiltonianModel::harmonic_oscillator(),
            ModelName::HarmonicRepulsor => HamiltonianModel::harmonic_repulsor(self.t_star),
        };
        Ok((model, self.trunc.map(Truncation::new)))
    }

    fn quadrature(&self) -> QuadratureConfig {
        QuadratureConfig { best_effort: self.best_effort, ..QuadratureConfig::default() }
    }
}

/// Rejects a missing truncation before any sweep, so it is not buried in a masked grid.
fn require_truncation(model: &HamiltonianModel, trunc: Option<Truncation>) -> Result<(), Failure> {
    if trunc.is_some() {
        return Ok(());
    }
    let probe = if model.e_sx().is_finite() { model.e_sx() } else { model.e_min() };
    match model.domain(probe, None) {
        Err(e @ ModelError::TruncationRequired { .. }) => {
            Err(Failure::Usage(format!("{e}; pass --trunc A")))
        }
        _ => Ok(()),
    }
}

fn run_landscape(args: &LandscapeArgs) -> Result<(), Failure> {
    let (model, trunc) = args.model.build()?;
    require_truncation(&model, trunc)?;
    let land = landscape(&model, args.emin, args.emax, args.n, trunc, args.derivs, &args.model.quadrature())?;
    write_landscape_csv(&land, &args.out)?;
    Ok(())
}

fn run_map(args: &MapArgs) -> Result<(), Failure> {
    let (model, trunc) = args.model.build()?;
    let [q_lo, q_hi, p_lo, p_hi] = args.bounds;
    let spec = GridSpec { q_lo, q_hi, p_lo, p_hi, nq: args.grid.0, np: args.grid.1 };
    let grid = match args.quantity {
        MapQuantity::Energy => energy_map(&model, &spec)?,
        MapQuantity::Ell => {
            require_truncation(&model, trunc)?;
            let mode = if args.table_mode { EllMode::Table } else { EllMode::Exact };
            ell_map(&model, &spec, trunc, &args.model.quadrature(), mode)?
        }
        MapQuantity::Temporal => {
            if !(args.t > 0.0 && args.t.is_finite()) {
                return Err(Failure::Usage("--t must be positive".into()));
            }
            temporal_map(&model, &spec, args.t, &IntegratorConfig::default())?
        }
    };
    write_outputs(&grid, &args.out, args.pgm.as_deref())
}

fn write_outputs(grid: &geold::GridMap, out: &Path, pgm: Option<&Path>) -> Result<(), Failure> {
    write_grid_csv(grid, out)?;
    if let Some(pgm) = pgm {
        write_pgm(grid, pgm)?;
    }
    Ok(())
}

fn run_bmap(args: &BmapArgs) -> Result<(), Failure> {
    let ell_grid = read_grid_csv(&args.input, Quantity::Ell)?;
    let b = b_map(&ell_grid)?;
    write_outputs(&b, &args.out, args.pgm.as_deref())
}

fn status_name(s: FlowStatus) -> &'static str {
    match s {
        FlowStatus::Complete => "complete",
        FlowStatus::BlowUp => "blowup",
        FlowStatus::StepLimit => "steplimit",
    }
}

fn run_temporal(args: &TemporalArgs) -> Result<(), Failure> {
    let (model, _) = args.model.build()?;
    if !(args.t > 0.0 && args.t.is_finite()) {
        return Err(Failure::Usage("--t must be positive".into()));
    }
    let points = ld_landscape_line(&model, &args.line, args.t, &IntegratorConfig::default())
        .map_err(|e| match e {
            TemporalError::InvalidInput | TemporalError::InvalidConfig => Failure::Usage(e.to_string()),
            _ => Failure::Numeric(e.to_string()),
        })?;
    let mut out = String::from("q,p,ld_total,status\n");
    for (i, pt) in points.iter().enumerate() {
        let (q, p) = args.line.point(i);
        let _ = writeln!(out, "{},{},{},{}", fmt17(q), fmt17(p), fmt17(pt.ld_total), status_name(pt.status));
    }
    fs::write(&args.out, out).map_err(|e| Failure::Usage(format!("{}: {e}", args.out.display())))
}

fn run_rates(args: &RatesArgs) -> Result<(), Failure> {
    let (model, trunc) = args.model.build()?;
    require_truncation(&model, trunc)?;
    let criticals = match args.critical {
        Some(CriticalArg::Separatrix) => vec![Critical::Separatrix],
        Some(CriticalArg::Elliptic) => vec![Critical::Elliptic],
        None => vec![Critical::Separatrix, Critical::Elliptic],
    };
    let mut targets = Vec::new();
    for c in criticals {
        let finite = match c {
            Critical::Separatrix => model.e_sx().is_finite(),
            Critical::Elliptic => model.e_min().is_finite(),
        };
        // Without an explicit --critical, approaches the model lacks are skipped.
        if !finite && args.critical.is_none() {
            continue;
        }
        let sides = match (args.side, c) {
            (SideArg::Below, _) => vec![Side::Below],
            (SideArg::Above, _) => vec![Side::Above],
            (SideArg::Both, Critical::Elliptic) => vec![Side::Above],
            (SideArg::Both, Critical::Separatrix) => vec![Side::Below, Side::Above],
        };
        targets.extend(sides.into_iter().map(|s| (c, s)));
    }
    let report = rate_report_for(&model, &targets, trunc, &args.model.quadrature());
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    match &args.out {
        Some(path) => fs::write(path, &json).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?,
        None => print!("{json}"),
    }
    let failed: Vec<String> = report
        .fits
        .iter()
        .filter_map(|f| f.error.as_ref().map(|e| format!("{:?} {:?}: {e}", f.critical, f.side)))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Numeric(format!("some fits failed: {}", failed.join("; "))))
    }
}

fn run_models() {
    let show = |x: f64| if x.is_finite() { fmt17(x) } else { format!("{x}") };
    println!("{:<22}{:>8}{:>8}{:>12}", "model", "e_min", "e_sx", "multiplier");
    for model in [
        HamiltonianModel::pendulum(),
        HamiltonianModel::duffing(),
        HamiltonianModel::fishtail(),
        HamiltonianModel::fishtail_bounded_librations(),
        HamiltonianModel::harmonic_oscillator(),
        HamiltonianModel::harmonic_repulsor(1.0),
    ] {
        println!(
            "{:<22}{:>8}{:>8}{:>12}",
            model.name(),
            show(model.e_min()),
            show(model.e_sx()),
            model.multiplier()
        );
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    match &cli.command {
        Command::Landscape(a) => run_landscape(a),
        Command::Map(a) => run_map(a),
        Command::Bmap(a) => run_bmap(a),
        Command::Temporal(a) => run_temporal(a),
        Command::Rates(a) => run_rates(a),
        Command::Models => {
            run_models();
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
