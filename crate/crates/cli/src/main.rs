use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use polaron_cli::{
    cmd_bounds, cmd_dump_shapes, cmd_figure, cmd_moments, cmd_moving, cmd_oracle_check, CliError, Format, Grid,
    Material, Overrides, SweepConfig, Table,
};
use polaron_core::{EvalMode, FChoice};

#[derive(Parser)]
#[command(name = "polaron", version, about = "Upper bounds on the acoustical polaron ground-state energy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rest-frame bounds E_W, E_SC, E_var2 and bound(n) on an alpha x k0 grid
    Bounds(Common),
    /// Bounds of a moving polaron and the effective mass
    Moving(Common),
    /// Vacuum moments M_m and central moments K_m
    Moments {
        #[command(flatten)]
        common: Common,
        /// Print the contraction shapes of <0|L^m|0> instead of the table
        #[arg(long, value_name = "M")]
        dump_shapes: Option<usize>,
        /// Restrict --dump-shapes to connected diagrams
        #[arg(long)]
        connected: bool,
    },
    /// Moment agreement, bound property and monotonicity on seeded finite models
    OracleCheck {
        #[command(flatten)]
        common: Common,
        /// Multiply M_3 by this factor before solving (fault injection)
        #[arg(long, value_name = "FACTOR")]
        tamper_m3: Option<f64>,
    },
    /// `bounds` at the cutoffs 0.5, 1, 2 and 3
    Figure(Common),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML file with [grid], [run] and [output] sections; flags win
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Coupling grid: list `0.5,1,2` or range `start:stop:count`
    #[arg(long, value_name = "GRID")]
    alpha: Option<Grid>,
    /// Cutoff grid
    #[arg(long, value_name = "GRID")]
    k0: Option<Grid>,
    /// Momentum grid
    #[arg(long = "momentum", short = 'P', value_name = "GRID")]
    momentum: Option<Grid>,
    /// Highest variational order
    #[arg(long)]
    orders: Option<usize>,
    /// Highest moment the engine computes
    #[arg(long)]
    moment_cap: Option<usize>,
    /// exact | float
    #[arg(long)]
    mode: Option<EvalMode>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of random models in the oracle battery
    #[arg(long)]
    models: Option<usize>,
    /// Displacement amplitudes: zero | simplest | optimal-rest
    #[arg(long)]
    choice: Option<FChoice>,
    /// Material constants `D,rho,s,m` in SI units; replaces the alpha grid
    #[arg(long, value_name = "D,RHO,S,M")]
    material: Option<Material>,
    /// Output file (stdout if absent)
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// csv | json
    #[arg(long)]
    format: Option<Format>,
}

impl Common {
    fn load(&self) -> Result<SweepConfig, CliError> {
        let o = Overrides {
            alpha: self.alpha.clone(),
            k0: self.k0.clone(),
            momentum: self.momentum.clone(),
            orders: self.orders,
            moment_cap: self.moment_cap,
            mode: self.mode,
            workers: self.workers,
            seed: self.seed,
            models: self.models,
            choice: self.choice,
            material: self.material,
            output: self.output.clone(),
            format: self.format,
        };
        SweepConfig::load(self.config.as_deref(), o)
    }
}

fn write_table(cfg: &SweepConfig, t: &Table) -> Result<(), CliError> {
    match &cfg.output {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            t.write(cfg.format, &mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            t.write(cfg.format, &mut w)?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Bounds(c) => {
            let cfg = c.load()?;
            write_table(&cfg, &cmd_bounds(&cfg)?)
        }
        Command::Figure(c) => {
            let cfg = c.load()?;
            let alpha_given = c.alpha.is_some() || cfg.alpha != SweepConfig::default().alpha;
            write_table(&cfg, &cmd_figure(&cfg, alpha_given)?)
        }
        Command::Moving(c) => {
            let cfg = c.load()?;
            write_table(&cfg, &cmd_moving(&cfg)?)
        }
        Command::Moments { common, dump_shapes, connected } => {
            let cfg = common.load()?;
            match dump_shapes {
                Some(m) => {
                    let stdout = io::stdout();
                    cmd_dump_shapes(&cfg, m, connected, &mut stdout.lock())
                }
                None => write_table(&cfg, &cmd_moments(&cfg)?),
            }
        }
        Command::OracleCheck { common, tamper_m3 } => {
            let cfg = common.load()?;
            let (t, passed) = cmd_oracle_check(&cfg, tamper_m3)?;
            write_table(&cfg, &t)?;
            if passed {
                Ok(())
            } else {
                let failed = t.rows.iter().filter(|r| r[1] == polaron_cli::Cell::Bool(false)).count();
                Err(CliError::Oracle(format!("{failed} of {} checks failed", t.rows.len())))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("polaron: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
