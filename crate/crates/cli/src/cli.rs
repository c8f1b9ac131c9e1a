//! Command-line arguments.

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use nzefg_core::{Form, Initial};

use crate::experiment::{
    default_grid, parse_eta_list, parse_metrics, parse_mode, parse_topology, EtaSpec,
    ExperimentConfig, GameSource, GameSpec,
};

#[derive(Debug, Parser)]
#[command(
    name = "nzefg",
    version,
    about = "Optimistic gradient ascent on network zero-sum extensive form games"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and write its trajectory as CSV.
    Run(RunArgs),
    /// Run a grid of step sizes and tabulate final metrics.
    Sweep(SweepArgs),
    /// Check perfect recall, consistency, zero-sum and antisymmetry of a game.
    Verify(GameArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GameArgs {
    /// kuhn, matching-pennies, random, or a path to a .json game file
    #[arg(long, default_value = "matching-pennies")]
    pub game: String,
    /// ring, complete, or edges:U-V,U-V,...
    #[arg(long, default_value = "ring")]
    pub topology: String,
    /// Number of agents
    #[arg(long, default_value_t = 2)]
    pub nodes: usize,
    /// Depth of random edge games
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    /// Actions per decision node of random edge games
    #[arg(long, default_value_t = 2)]
    pub branching: usize,
    /// Payoffs of random games: pairwise or cycle
    #[arg(long, default_value = "pairwise")]
    pub mode: String,
    /// Seed for random games, random initial points and sampled checks
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitialArg {
    Uniform,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormArg {
    Joint,
    PerAgent,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub game: GameArgs,
    #[arg(long, default_value_t = 10_000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 1)]
    pub record_every: usize,
    /// Comma list of nash_gap, symmetric_gap, dist2, lyapunov; or all / none
    #[arg(long, default_value = "all")]
    pub metrics: String,
    /// Compute dist2 and lyapunov on every n-th record (and the last)
    #[arg(long, default_value_t = 10)]
    pub dist_every: usize,
    #[arg(long, value_enum, default_value_t = InitialArg::Random)]
    pub initial: InitialArg,
    #[arg(long, value_enum, default_value_t = FormArg::Joint)]
    pub form: FormArg,
    /// Output file; standard output when absent
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub solve: SolveArgs,
    /// auto, auto*F, or a positive number
    #[arg(long, default_value = "auto")]
    pub eta: String,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub solve: SolveArgs,
    /// Comma list of step sizes; defaults to auto*2^k for k = -3..3
    #[arg(long)]
    pub eta: Option<String>,
    /// Concurrent runs; defaults to the available parallelism
    #[arg(long)]
    pub workers: Option<usize>,
}

impl GameArgs {
    pub fn spec(&self) -> Result<GameSpec> {
        Ok(GameSpec {
            source: self.game.parse::<GameSource>()?,
            topology: parse_topology(&self.topology)?,
            nodes: self.nodes,
            depth: self.depth,
            branching: self.branching,
            mode: parse_mode(&self.mode)?,
            seed: self.seed,
        })
    }
}

impl SolveArgs {
    pub fn config(&self, eta: EtaSpec) -> Result<ExperimentConfig> {
        let cfg = ExperimentConfig {
            game: self.game.spec()?,
            eta,
            iterations: self.iterations,
            record_every: self.record_every,
            metrics: parse_metrics(&self.metrics)?,
            dist_every: self.dist_every,
            initial: match self.initial {
                InitialArg::Uniform => Initial::Uniform,
                InitialArg::Random => Initial::Random,
            },
            form: match self.form {
                FormArg::Joint => Form::Joint,
                FormArg::PerAgent => Form::PerAgent,
            },
            output: self.output.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunArgs {
    pub fn config(&self) -> Result<ExperimentConfig> {
        self.solve.config(self.eta.parse()?)
    }
}

impl SweepArgs {
    pub fn grid(&self) -> Result<Vec<EtaSpec>> {
        match &self.eta {
            Some(list) => parse_eta_list(list),
            None => Ok(default_grid()),
        }
    }

    pub fn workers(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}
