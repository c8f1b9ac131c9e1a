//! The `run`, `sweep` and `verify` commands.

use std::fs::File;
use std::io::{self, BufWriter, Write};

use anyhow::{Context, Result};
use nzefg_core::network::{ZeroSumReport, EXHAUSTIVE_CAP};
use nzefg_core::{
    assemble, validate_consistency, validate_game_tree, validate_perfect_recall, Seat,
    ValidationReport, ZeroSumMode,
};
use rayon::prelude::*;

use crate::experiment::{
    run_experiment, write_csv, EtaSpec, ExperimentConfig, GameSpec, RunOutcome,
};
use crate::format::Loaded;

/// Samples used by the sampled zero-sum and antisymmetry checks.
pub const VERIFY_SAMPLES: usize = 1000;

fn output_writer(cfg: &ExperimentConfig) -> Result<Box<dyn Write>> {
    Ok(match &cfg.output {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Runs one experiment and writes its CSV. The summary goes to standard output, or to
/// standard error when the CSV itself is going to standard output.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let net = cfg.game.build()?;
    let eta = cfg.eta.resolve(&net);
    let outcome = run_experiment(cfg, &net, eta)?;
    write_csv(&outcome.trajectory.records, output_writer(cfg)?)?;
    if cfg.output.is_some() {
        println!("{}", outcome.summary());
    } else {
        eprintln!("{}", outcome.summary());
    }
    Ok(outcome)
}

#[derive(Debug)]
pub struct SweepCell {
    pub eta: f64,
    pub result: Result<RunOutcome, String>,
}

#[derive(Debug)]
pub struct SweepReport {
    pub cells: Vec<SweepCell>,
    /// Index of the cell with the smallest final `dist2_ne`, ties to the smaller step size.
    pub best: Option<usize>,
}

pub const SWEEP_HEADER: &str = "eta,status,t,nash_gap_avg,nash_gap_last,symmetric_gap,dist2_ne,loglog_slope,loglog_r2,semilog_slope,semilog_r2,best";

impl SweepReport {
    pub fn write_table<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{SWEEP_HEADER}")?;
        let cell = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:e}"));
        for (k, c) in self.cells.iter().enumerate() {
            let best = if self.best == Some(k) { "*" } else { "" };
            match &c.result {
                Ok(o) => {
                    let (a, l) = (o.time_average_fit, o.last_iterate_fit);
                    writeln!(
                        out,
                        "{:e},ok,{},{},{},{},{},{},{},{},{},{best}",
                        c.eta,
                        o.trajectory.records.last().map_or(0, |r| r.t),
                        cell(o.last(|r| r.nash_gap_avg)),
                        cell(o.last(|r| r.nash_gap_last)),
                        cell(o.last(|r| r.symmetric_gap)),
                        cell(o.last(|r| r.dist2_ne)),
                        cell(a.map(|f| f.slope)),
                        cell(a.map(|f| f.r_squared)),
                        cell(l.map(|f| f.slope)),
                        cell(l.map(|f| f.r_squared)),
                    )?;
                }
                Err(e) => {
                    let e = e.replace(',', ";");
                    writeln!(out, "{:e},failed: {e},,,,,,,,,,", c.eta)?;
                }
            }
        }
        out.flush()
    }
}

/// Runs every grid point on a pool of `workers` threads. A failing cell is recorded
/// and the rest carry on; the table keeps grid order.
pub fn sweep(cfg: &ExperimentConfig, grid: &[EtaSpec], workers: usize) -> Result<SweepReport> {
    anyhow::ensure!(!grid.is_empty(), "empty step size grid");
    cfg.validate()?;
    let net = cfg.game.build()?;
    let etas: Vec<f64> = grid.iter().map(|g| g.resolve(&net)).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()?;
    let cells: Vec<SweepCell> = pool.install(|| {
        etas.par_iter()
            .map(|&eta| SweepCell {
                eta,
                result: run_experiment(cfg, &net, eta).map_err(|e| format!("{e:#}")),
            })
            .collect()
    });
    let best = cells
        .iter()
        .enumerate()
        .filter_map(|(k, c)| {
            let d = c.result.as_ref().ok()?.last(|r| r.dist2_ne)?;
            Some((k, d, c.eta))
        })
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.2.total_cmp(&b.2)))
        .map(|(k, _, _)| k);
    Ok(SweepReport { cells, best })
}

pub fn cmd_sweep(cfg: &ExperimentConfig, grid: &[EtaSpec], workers: usize) -> Result<SweepReport> {
    let report = sweep(cfg, grid, workers)?;
    report.write_table(output_writer(cfg)?)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Not evaluated because an earlier check failed.
    Skip,
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub status: Status,
    /// Whether a failure of this check fails the command.
    pub required: bool,
    pub details: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.checks
            .iter()
            .all(|c| !c.required || c.status == Status::Pass)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn write<W: Write>(&self, mut out: W) -> io::Result<()> {
        for c in &self.checks {
            let tag = match c.status {
                Status::Pass => "PASS",
                Status::Fail if c.required => "FAIL",
                Status::Fail => "FAIL (not declared)",
                Status::Skip => "SKIP",
            };
            writeln!(out, "{tag} {}", c.name)?;
            for d in &c.details {
                writeln!(out, "    {d}")?;
            }
        }
        writeln!(
            out,
            "{}",
            if self.ok() {
                "all declared properties hold"
            } else {
                "verification failed"
            }
        )?;
        out.flush()
    }
}

fn describe(report: &ValidationReport, loaded: &Loaded, edge: usize) -> Vec<String> {
    let ids = &loaded.node_ids[edge];
    report
        .violations
        .iter()
        .map(|v| {
            let nodes: Vec<&str> = v
                .nodes
                .iter()
                .map(|&n| ids.get(n).map_or("?", |s| s.as_str()))
                .collect();
            format!(
                "game `{}` on edge {edge}: {}: {} (nodes [{}])",
                loaded.game_ids[edge],
                v.rule,
                v.message,
                nodes.join(", ")
            )
        })
        .collect()
}

fn zero_sum_details(rep: &ZeroSumReport) -> String {
    format!(
        "{:?}: {} profile(s), worst |sum of payoffs| {:e}, tolerance {:e}",
        rep.mode, rep.checked, rep.max_violation, rep.tolerance
    )
}

/// Perfect recall, consistency, zero-sum and restricted antisymmetry of a game source.
pub fn verify(spec: &GameSpec) -> Result<VerifyReport> {
    let loaded = spec.load()?;
    let desc = &loaded.description;
    let expect = &desc.metadata;
    let mut checks = Vec::new();

    let mut structure = Vec::new();
    for (k, e) in desc.edges.iter().enumerate() {
        if e.u >= desc.agents.len() || e.v >= desc.agents.len() || e.u == e.v {
            structure.push(format!("edge {k} joins agents {} and {}", e.u, e.v));
        }
        let mut rep = validate_game_tree(&e.game);
        if rep.is_ok() {
            for seat in [Seat::One, Seat::Two] {
                rep.merge(validate_perfect_recall(&e.game, seat));
            }
        }
        structure.extend(describe(&rep, &loaded, k));
    }
    let structure_ok = structure.is_empty();
    checks.push(Check {
        name: "perfect-recall",
        status: if structure_ok {
            Status::Pass
        } else {
            Status::Fail
        },
        required: true,
        details: if structure_ok {
            vec![format!("{} edge game(s), both seats", desc.edges.len())]
        } else {
            structure
        },
    });

    let mut consistency = Vec::new();
    if structure_ok {
        for a in 0..desc.agents.len() {
            for v in validate_consistency(&desc.games_of(a)).violations {
                consistency.push(format!(
                    "agent `{}`: {}: {}",
                    desc.agents[a], v.rule, v.message
                ));
            }
        }
    }
    let consistent = structure_ok && consistency.is_empty();
    checks.push(Check {
        name: "consistency",
        status: match (structure_ok, consistent) {
            (false, _) => Status::Skip,
            (true, true) => Status::Pass,
            (true, false) => Status::Fail,
        },
        required: expect.consistent,
        details: if consistent {
            vec![format!("{} agent(s)", desc.agents.len())]
        } else {
            consistency
        },
    });

    if !consistent {
        for name in ["zero-sum", "antisymmetry"] {
            checks.push(Check {
                name,
                status: Status::Skip,
                required: expect.zero_sum,
                details: vec!["needs a valid, consistent network".into()],
            });
        }
        return Ok(VerifyReport { checks });
    }

    let net = assemble(desc)?;
    let mode = if net.pure_profile_count() <= EXHAUSTIVE_CAP {
        ZeroSumMode::Exhaustive
    } else {
        ZeroSumMode::Sampled
    };
    let zs = net.check_zero_sum(mode, VERIFY_SAMPLES, spec.seed)?;
    checks.push(Check {
        name: "zero-sum",
        status: if zs.ok { Status::Pass } else { Status::Fail },
        required: expect.zero_sum,
        details: vec![zero_sum_details(&zs)],
    });
    let anti = net.check_antisymmetry(VERIFY_SAMPLES, spec.seed);
    checks.push(Check {
        name: "antisymmetry",
        status: if anti.ok { Status::Pass } else { Status::Fail },
        required: expect.zero_sum,
        details: vec![format!(
            "{} sampled pair(s), worst |xᵀRy + yᵀRx| {:e}, tolerance {:e}",
            anti.checked, anti.max_violation, anti.tolerance
        )],
    });
    Ok(VerifyReport { checks })
}

pub fn cmd_verify(spec: &GameSpec) -> Result<VerifyReport> {
    let report = verify(spec)?;
    report.write(io::stdout().lock())?;
    Ok(report)
}
