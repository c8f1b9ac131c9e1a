//! Experiment configuration and single runs.

use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use nzefg_core::diagnostics::{fit_rates, DiagnosticsRecord};
use nzefg_core::library::template;
use nzefg_core::{
    assemble, default_step_size, network_of, random_network_efg, run_diagnosed, DiagnosticsConfig,
    Form, Initial, Metrics, NetworkGame, PayoffMode, RateFit, SolverConfig, Topology, Trajectory,
};

use crate::format::{read_game_file, Loaded};

pub const CSV_HEADER: &str = "t,nash_gap_avg,nash_gap_last,symmetric_gap,dist2_ne,theta,xi";

#[derive(Debug, Clone, PartialEq)]
pub enum GameSource {
    /// `kuhn` or `matching-pennies` on every edge of the topology.
    Fixture(String),
    Random,
    File(PathBuf),
}

impl FromStr for GameSource {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "random" => GameSource::Random,
            _ if template(s).is_some() => GameSource::Fixture(s.to_string()),
            _ if s.ends_with(".json") || s.contains('/') => GameSource::File(PathBuf::from(s)),
            _ => bail!(
                "unknown game `{s}` (expected kuhn, matching-pennies, random or a .json path)"
            ),
        })
    }
}

/// Parses `ring`, `complete` or `edges:0-1,1-2,...`.
pub fn parse_topology(s: &str) -> Result<Topology> {
    match s {
        "ring" => Ok(Topology::Ring),
        "complete" => Ok(Topology::Complete),
        _ => {
            let list = s.strip_prefix("edges:").ok_or_else(|| {
                anyhow!("unknown topology `{s}` (expected ring, complete or edges:U-V,...)")
            })?;
            let edges = list
                .split(',')
                .map(|pair| {
                    let (u, v) = pair
                        .split_once('-')
                        .ok_or_else(|| anyhow!("edge `{pair}` is not of the form U-V"))?;
                    Ok((u.trim().parse()?, v.trim().parse()?))
                })
                .collect::<Result<Vec<(usize, usize)>>>()?;
            Ok(Topology::Edges(edges))
        }
    }
}

pub fn parse_mode(s: &str) -> Result<PayoffMode> {
    match s {
        "pairwise" | "pairwise-zero-sum" => Ok(PayoffMode::PairwiseZeroSum),
        "cycle" | "cycle-redistributed" => Ok(PayoffMode::CycleRedistributed),
        _ => bail!("unknown payoff mode `{s}` (expected pairwise or cycle)"),
    }
}

/// Parses a comma list drawn from `nash_gap`, `symmetric_gap`, `dist2`, `lyapunov`,
/// or `all` / `none`.
pub fn parse_metrics(s: &str) -> Result<Metrics> {
    let mut m = Metrics::NONE;
    for name in s.split(',').map(str::trim).filter(|n| !n.is_empty()) {
        match name {
            "all" => m = Metrics::ALL,
            "none" => {}
            "nash_gap" => m.nash_gap = true,
            "symmetric_gap" => m.symmetric_gap = true,
            "dist2" => m.dist2 = true,
            "lyapunov" => m.lyapunov = true,
            _ => bail!("unknown metric `{name}`"),
        }
    }
    Ok(m)
}

/// A step size: `auto`, `auto*F` (a multiple of the automatic value) or a number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaSpec {
    Auto(f64),
    Value(f64),
}

impl EtaSpec {
    pub fn resolve(self, net: &NetworkGame) -> f64 {
        match self {
            EtaSpec::Auto(f) => f * default_step_size(net),
            EtaSpec::Value(v) => v,
        }
    }
}

impl FromStr for EtaSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let spec = if s == "auto" {
            EtaSpec::Auto(1.0)
        } else if let Some(f) = s.strip_prefix("auto*") {
            EtaSpec::Auto(
                f.parse()
                    .with_context(|| format!("bad step size factor `{f}`"))?,
            )
        } else {
            EtaSpec::Value(s.parse().with_context(|| format!("bad step size `{s}`"))?)
        };
        let v = match spec {
            EtaSpec::Auto(v) | EtaSpec::Value(v) => v,
        };
        if !(v.is_finite() && v > 0.0) {
            bail!("step size `{s}` must be positive");
        }
        Ok(spec)
    }
}

pub fn parse_eta_list(s: &str) -> Result<Vec<EtaSpec>> {
    let grid = s.split(',').map(str::parse).collect::<Result<Vec<_>>>()?;
    if grid.is_empty() {
        bail!("empty step size grid");
    }
    Ok(grid)
}

/// `auto · 2^k` for `k = -3..=3`.
pub fn default_grid() -> Vec<EtaSpec> {
    (-3..=3).map(|k| EtaSpec::Auto(2f64.powi(k))).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    pub source: GameSource,
    pub topology: Topology,
    pub nodes: usize,
    pub depth: usize,
    pub branching: usize,
    pub mode: PayoffMode,
    /// Seeds the random generator and the random initial point.
    pub seed: u64,
}

impl Default for GameSpec {
    fn default() -> Self {
        Self {
            source: GameSource::Fixture("matching-pennies".into()),
            topology: Topology::Ring,
            nodes: 2,
            depth: 2,
            branching: 2,
            mode: PayoffMode::PairwiseZeroSum,
            seed: 0,
        }
    }
}

impl GameSpec {
    /// The description with file node ids, unvalidated.
    pub fn load(&self) -> Result<Loaded> {
        let desc = match &self.source {
            GameSource::File(path) => return read_game_file(path),
            GameSource::Fixture(name) => network_of(
                &self.topology,
                self.nodes,
                template(name).expect("checked at parse"),
            )?,
            GameSource::Random => random_network_efg(
                self.seed,
                self.nodes,
                &self.topology,
                self.depth,
                self.branching,
                self.mode,
            )?,
        };
        Ok(Loaded::from_description(desc))
    }

    pub fn build(&self) -> Result<NetworkGame> {
        let loaded = self.load()?;
        assemble(&loaded.description).map_err(|e| match e {
            nzefg_core::Error::Invalid(report) => {
                let first = report.violations.first().map(|v| v.message.as_str()).unwrap_or("");
                anyhow!("game failed validation ({} violation(s)); first: {first}; run `verify` for details", report.violations.len())
            }
            e => e.into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub game: GameSpec,
    pub eta: EtaSpec,
    pub iterations: usize,
    pub record_every: usize,
    pub metrics: Metrics,
    pub dist_every: usize,
    pub initial: Initial,
    pub form: Form,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            game: GameSpec::default(),
            eta: EtaSpec::Auto(1.0),
            iterations: 10_000,
            record_every: 1,
            metrics: Metrics::ALL,
            dist_every: 10,
            initial: Initial::Random,
            form: Form::Joint,
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            bail!("iterations must be at least 1");
        }
        if self.record_every == 0 {
            bail!("record-every must be at least 1");
        }
        if self.dist_every == 0 {
            bail!("dist-every must be at least 1");
        }
        Ok(())
    }

    pub fn solver(&self, eta: f64) -> SolverConfig {
        SolverConfig {
            eta,
            iterations: self.iterations,
            seed: self.game.seed,
            initial: self.initial.clone(),
            record_every: self.record_every,
            form: self.form,
        }
    }

    pub fn diagnostics(&self) -> DiagnosticsConfig {
        DiagnosticsConfig {
            metrics: self.metrics,
            dist_every: self.dist_every,
            stop_below: None,
        }
    }
}

/// A finished run with its fitted rates.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub eta: f64,
    pub trajectory: Trajectory,
    /// Loglog fit of `nash_gap_avg`.
    pub time_average_fit: Option<RateFit>,
    /// Semilog fit of `dist2_ne`.
    pub last_iterate_fit: Option<RateFit>,
}

impl RunOutcome {
    /// Last recorded value of a metric.
    pub fn last(&self, pick: impl Fn(&DiagnosticsRecord) -> Option<f64>) -> Option<f64> {
        self.trajectory.records.iter().rev().find_map(pick)
    }

    /// One line: step size, final metrics and fitted rates.
    pub fn summary(&self) -> String {
        let val = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"));
        let fit = |f: &Option<RateFit>| {
            f.map_or_else(
                || "-".to_string(),
                |f| format!("slope={:.6e} r2={:.4}", f.slope, f.r_squared),
            )
        };
        format!(
            "eta={:.6e} t={} nash_gap_avg={} nash_gap_last={} symmetric_gap={} dist2_ne={} loglog(nash_gap_avg): {} semilog(dist2_ne): {}",
            self.eta,
            self.trajectory.records.last().map_or(0, |r| r.t),
            val(self.last(|r| r.nash_gap_avg)),
            val(self.last(|r| r.nash_gap_last)),
            val(self.last(|r| r.symmetric_gap)),
            val(self.last(|r| r.dist2_ne)),
            fit(&self.time_average_fit),
            fit(&self.last_iterate_fit),
        )
    }
}

pub fn run_experiment(cfg: &ExperimentConfig, net: &NetworkGame, eta: f64) -> Result<RunOutcome> {
    cfg.validate()?;
    let trajectory = run_diagnosed(net, &cfg.solver(eta), &cfg.diagnostics())?;
    let (avg, last) = fit_rates(&trajectory.records);
    Ok(RunOutcome {
        eta,
        trajectory,
        time_average_fit: avg.ok(),
        last_iterate_fit: last.ok(),
    })
}

pub fn write_csv<W: Write>(records: &[DiagnosticsRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    let cell = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:e}"));
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.t,
            cell(r.nash_gap_avg),
            cell(r.nash_gap_last),
            cell(r.symmetric_gap),
            cell(r.dist2_ne),
            cell(r.theta),
            cell(r.xi)
        )?;
    }
    out.flush()
}
