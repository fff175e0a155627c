use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fracprec::experiments::{self, ExperimentConfig, OutputFormat, ResultGrid, Table, Workspace};
use fracprec::krylov::ResidualMeasure;
use fracprec::verify::{self, VerifyConfig};
use fracprec::Execution;

/// Fractional H(div) and auxiliary-space preconditioner experiments.
#[derive(Parser, Debug)]
#[command(name = "fracprec", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Λ^s, s in [0, 1], with additive multigrid (sizes are RT0 dimensions).
    Table1(TableArgs),
    /// Exact auxiliary-space condition numbers (sizes are cell counts).
    Table2(TableArgs),
    /// A^s, s in [-1, 0], with the multigrid auxiliary-space preconditioner.
    Table3(TableArgs),
    /// Operator-inequality and identity checks.
    Props(PropsArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// Random seed for right-hand sides, initial guesses and random matrices.
    #[arg(long, default_value_t = 20190101)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Markdown)]
    format: Format,
    /// Write the result here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args, Debug)]
struct TableArgs {
    /// Comma-separated exponents (default: the full table row set).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    s_list: Option<Vec<f64>>,
    /// Comma-separated problem sizes N (default: the three smallest columns).
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Include the largest column (N = 12416 or 8192).
    #[arg(long)]
    large: bool,
    /// Number of mesh levels J.
    #[arg(long, default_value_t = 4)]
    levels: usize,
    /// Relative preconditioned residual tolerance (default depends on the table).
    #[arg(long)]
    tol: Option<f64>,
    /// Residual measure compared against the tolerance.
    #[arg(long, value_enum, default_value_t = Measure::Norm)]
    measure: Measure,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct PropsArgs {
    /// Random trials per matrix-level check.
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Largest random matrix dimension.
    #[arg(long, default_value_t = 40)]
    max_dim: usize,
    /// Exponent grid steps on [0, 1].
    #[arg(long, default_value_t = 10)]
    grid_steps: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Markdown,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Measure {
    /// sqrt(<B r, r> / <B r0, r0>)
    Norm,
    /// <B r, r> / <B r0, r0>
    Energy,
}

impl From<Measure> for ResidualMeasure {
    fn from(m: Measure) -> Self {
        match m {
            Measure::Norm => ResidualMeasure::NormRatio,
            Measure::Energy => ResidualMeasure::EnergyRatio,
        }
    }
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Markdown => OutputFormat::Markdown,
            Format::Csv => OutputFormat::Csv,
        }
    }
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<(), String> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| format!("writing {}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_table(table: Table, args: TableArgs) -> Result<bool, String> {
    let exec = Execution::with_workers(args.common.workers).map_err(|e| e.to_string())?;
    let mut config = ExperimentConfig::new(table);
    if let Some(s) = args.s_list {
        config.s_list = s;
    }
    if let Some(sizes) = args.sizes {
        config.sizes = sizes;
    }
    if args.large {
        let extra = table.size_for(64);
        if !config.sizes.contains(&extra) {
            config.sizes.push(extra);
        }
    }
    if let Some(tol) = args.tol {
        config.tol = tol;
    }
    config.measure = args.measure.into();
    config.levels = args.levels;
    config.max_iter = args.max_iter;
    config.seed = args.common.seed;
    config.exec = exec;
    config.validate().map_err(|e| e.to_string())?;

    let ws = Workspace::new();
    let grid: ResultGrid = match table {
        Table::Hdiv => experiments::run_table1(&config, &ws),
        Table::AuxExact => experiments::run_table2(&config, &ws),
        Table::AuxMultigrid => experiments::run_table3(&config, &ws),
    }
    .map_err(|e| e.to_string())?;
    let text = grid.render(args.common.format.into()).map_err(|e| e.to_string())?;
    emit(&text, &args.common.out)?;
    for c in grid.cells.iter().flatten() {
        if let Some(err) = &c.error {
            eprintln!("s = {:.1}, N = {}: {err}", c.s, c.size);
        } else if !c.converged {
            eprintln!("s = {:.1}, N = {}: no convergence within {} iterations", c.s, c.size, config.max_iter);
        }
    }
    Ok(grid.all_converged())
}

fn run_props(args: PropsArgs) -> Result<bool, String> {
    let exec = Execution::with_workers(args.common.workers).map_err(|e| e.to_string())?;
    if args.trials == 0 || args.max_dim == 0 || args.grid_steps == 0 {
        return Err("trials, max-dim and grid-steps must be positive".into());
    }
    let config = VerifyConfig {
        trials: args.trials,
        max_dim: args.max_dim,
        grid: verify::unit_grid(args.grid_steps),
        seed: args.common.seed,
        ..VerifyConfig::default()
    };
    let reports = experiments::run_props(&config, exec).map_err(|e| e.to_string())?;
    let text = match args.common.format {
        Format::Markdown => reports.iter().map(|r| format!("{r}\n")).collect::<String>(),
        Format::Csv => {
            let mut buf = Vec::new();
            verify::write_csv(&reports, &mut buf).map_err(|e| e.to_string())?;
            String::from_utf8(buf).map_err(|e| e.to_string())?
        }
    };
    emit(&text, &args.common.out)?;
    Ok(reports.iter().all(|r| r.passed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Table1(a) => run_table(Table::Hdiv, a),
        Command::Table2(a) => run_table(Table::AuxExact, a),
        Command::Table3(a) => run_table(Table::AuxMultigrid, a),
        Command::Props(a) => run_props(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
