//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use nzefg::commands::sweep;
use nzefg::experiment::{default_grid, ExperimentConfig, GameSource, GameSpec};
use nzefg_core::linalg::{dist2, max_abs_diff};
use nzefg_core::{
    behavioral_to_sequence, default_step_size, fit_loglog, fit_semilog, kuhn_poker, nash_gap,
    project, run_diagnosed, sequence_to_behavioral, solve_symmetric_ne, step, step_per_agent,
    BehavioralPlan, DiagnosticsConfig, GameTree, Initial, Metrics, NetworkGame, Seat, SolverConfig,
    SolverState, Topology,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;

/// Name, runtime budget in seconds, check.
type Criterion = (&'static str, u64, fn() -> Verdict);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn max_payoff(net: &NetworkGame) -> f64 {
    net.edges()
        .iter()
        .flat_map(|e| e.game.nodes().iter().filter_map(|n| n.payoffs))
        .fold(0.0, |m, [a, b]| m.max(a.abs()).max(b.abs()))
}

fn agent_games(net: &NetworkGame, u: usize) -> Vec<(&GameTree, Seat)> {
    net.edges()
        .iter()
        .filter_map(|e| e.seat_of(u).map(|s| (e.game.as_ref(), s)))
        .collect()
}

/// Half the draws are interior plans, half are pure plans.
fn draw_plan(tp: &nzefg_core::Treeplex, rng: &mut ChaCha8Rng) -> BehavioralPlan {
    if rng.gen_bool(0.5) {
        return common::random_plan(tp, rng);
    }
    let mut plan = BehavioralPlan::new();
    for inf in tp.infosets() {
        let mut p = vec![0.0; inf.actions.len()];
        let k = rng.gen_range(0..p.len());
        p[k] = 1.0;
        plan.insert(inf.id.clone(), p);
    }
    plan
}

/// Joint sequence-form point built by the path-product oracle.
fn oracle_point(net: &NetworkGame, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let mut x = Vec::with_capacity(net.dim());
    for u in 0..net.n_agents() {
        let plan = draw_plan(net.treeplex(u), rng);
        x.extend(common::sequence_by_paths(
            &agent_games(net, u),
            &plan,
            net.treeplex(u),
        ));
    }
    DVector::from_vec(x)
}

fn bilinear_checks(self_only: bool) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(if self_only { 2 } else { 1 });
    let mut worst_ratio: f64 = 0.0;
    for (name, net) in common::fixtures() {
        let r = common::r_by_leaves(&net);
        let tol = 1e-9 * (1.0 + max_payoff(&net));
        for _ in 0..1000 {
            let x = oracle_point(&net, &mut rng);
            let v = if self_only {
                (x.transpose() * &r * &x)[(0, 0)]
                    .abs()
                    .max(net.r().bilinear(x.as_slice(), x.as_slice()).abs())
            } else {
                let y = oracle_point(&net, &mut rng);
                let oracle = (x.transpose() * &r * &y + y.transpose() * &r * &x)[(0, 0)];
                let lib = net.r().bilinear(x.as_slice(), y.as_slice())
                    + net.r().bilinear(y.as_slice(), x.as_slice());
                oracle.abs().max(lib.abs())
            };
            ensure(v <= tol, || format!("{name}: |value| {v:e} > {tol:e}"))?;
            worst_ratio = worst_ratio.max(v / tol);
        }
    }
    Ok(format!(
        "12 fixtures x 1000, worst |value|/tol {worst_ratio:.1e}"
    ))
}

fn sequence_form_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst, mut worst_rt): (f64, f64) = (0.0, 0.0);
    for (name, net) in common::fixtures() {
        for _ in 0..200 {
            let plans: Vec<BehavioralPlan> = (0..net.n_agents())
                .map(|u| draw_plan(net.treeplex(u), &mut rng))
                .collect();
            let mut x = Vec::new();
            let mut back = Vec::new();
            for (u, plan) in plans.iter().enumerate() {
                let xu = behavioral_to_sequence(plan, net.treeplex(u))
                    .map_err(|e| format!("{name}: {e}"))?
                    .values;
                back.push(sequence_to_behavioral(&xu, net.treeplex(u)));
                x.extend(xu);
            }
            let by_paths = common::network_path_payoffs(&net, &plans);
            let bilinear = net.agent_payoffs(&x);
            let after = common::network_path_payoffs(&net, &back);
            for u in 0..net.n_agents() {
                let d = (by_paths[u] - bilinear[u]).abs();
                let drt = (by_paths[u] - after[u]).abs();
                ensure(d <= 1e-10, || format!("{name} agent {u}: payoff gap {d:e}"))?;
                ensure(drt <= 1e-10, || {
                    format!("{name} agent {u}: round trip {drt:e}")
                })?;
                worst = worst.max(d);
                worst_rt = worst_rt.max(drt);
            }
        }
    }
    Ok(format!(
        "worst payoff gap {worst:.1e}, round trip {worst_rt:.1e}"
    ))
}

fn projection_exactness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let noise = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()
    };
    let tps: Vec<_> = (0..50)
        .map(|_| common::random_treeplex(&mut rng, 8))
        .collect();
    let mut worst: f64 = 0.0;
    for tp in &tps {
        for _ in 0..4 {
            let p = noise(&mut rng, tp.dim());
            let got = project(&p, tp).map_err(|e| e.to_string())?.point;
            let d = dist2(&got, &common::project_bruteforce(tp, &p)).sqrt();
            ensure(d <= 1e-8, || format!("dim {}: |delta| {d:e}", tp.dim()))?;
            worst = worst.max(d);
        }
    }
    let mut pairs = 0;
    for k in 0..1000 {
        let tp = &tps[k % tps.len()];
        let (p, q) = (noise(&mut rng, tp.dim()), noise(&mut rng, tp.dim()));
        let pp = project(&p, tp).map_err(|e| e.to_string())?.point;
        let pq = project(&q, tp).map_err(|e| e.to_string())?.point;
        let again = project(&pp, tp).map_err(|e| e.to_string())?.point;
        ensure(max_abs_diff(&again, &pp) <= 1e-10, || {
            "not idempotent".into()
        })?;
        ensure(
            dist2(&pp, &pq) <= dist2(&p, &q) * (1.0 + 1e-12) + 1e-14,
            || "expansive pair".into(),
        )?;
        pairs += 1;
    }
    Ok(format!(
        "200 points on 50 treeplexes, worst |delta| {worst:.1e}; {pairs} pairs"
    ))
}

fn forms_agree() -> Verdict {
    let mut worst: f64 = 0.0;
    for (name, net) in common::fixtures() {
        let eta = default_step_size(&net);
        let mut cfg = SolverConfig::new(eta, 100);
        cfg.initial = Initial::Random;
        cfg.seed = 5;
        let x0 = cfg.initial_point(&net).map_err(|e| e.to_string())?;
        let (mut a, mut b) = (SolverState::new(x0.clone()), SolverState::new(x0));
        for _ in 0..100 {
            a = step(&a, &net, eta).map_err(|e| e.to_string())?;
            b = step_per_agent(&b, &net, eta).map_err(|e| e.to_string())?;
            let d = max_abs_diff(&a.x, &b.x).max(max_abs_diff(&a.x_hat, &b.x_hat));
            ensure(d <= 1e-10, || format!("{name} t={}: {d:e}", a.t))?;
            worst = worst.max(d);
        }
    }
    Ok(format!(
        "12 fixtures x 100 steps, worst coordinate gap {worst:.1e}"
    ))
}

fn time_average_rate() -> Verdict {
    let mut out = Vec::new();
    for n in [2, 4] {
        let net = common::mp_net(n);
        // the uniform point already is the equilibrium of matching pennies
        let mut cfg = SolverConfig::new(default_step_size(&net), 100_000);
        cfg.initial = Initial::Random;
        cfg.record_every = 100;
        let diag = DiagnosticsConfig {
            metrics: Metrics {
                nash_gap: true,
                ..Metrics::NONE
            },
            dist_every: 1,
            stop_below: None,
        };
        let tr = run_diagnosed(&net, &cfg, &diag).map_err(|e| e.to_string())?;
        let pts: Vec<(f64, f64)> = nzefg_core::diagnostics::fit_window(&tr.records)
            .iter()
            .map(|r| (r.t as f64, r.nash_gap_avg.unwrap()))
            .collect();
        let fit = fit_loglog(&pts).map_err(|e| format!("ring({n}): {e}"))?;
        let last = tr.records.last().unwrap().nash_gap_avg.unwrap();
        ensure(
            (fit.slope + 1.0).abs() <= 0.2 && fit.r_squared >= 0.9,
            || format!("ring({n}): slope {:.3}, r2 {:.3}", fit.slope, fit.r_squared),
        )?;
        ensure(last <= 1e-3, || format!("ring({n}): final gap {last:e}"))?;
        out.push(format!(
            "ring({n}) slope {:.3} r2 {:.4} final {last:.2e}",
            fit.slope, fit.r_squared
        ));
    }
    Ok(out.join("; "))
}

fn last_iterate_decay() -> Verdict {
    let mut out = Vec::new();
    for n in [2, 4] {
        let net = common::mp_net(n);
        let mut cfg = SolverConfig::new(default_step_size(&net), 1_000_000);
        cfg.initial = Initial::Random;
        cfg.seed = 1;
        let diag = DiagnosticsConfig {
            metrics: Metrics {
                dist2: true,
                ..Metrics::NONE
            },
            dist_every: 1,
            stop_below: Some(1e-12),
        };
        let tr = run_diagnosed(&net, &cfg, &diag).map_err(|e| e.to_string())?;
        let series: Vec<(f64, f64)> = tr
            .records
            .iter()
            .map(|r| (r.t as f64, r.dist2_ne.unwrap()))
            .collect();
        let d1 = series[0].1;
        ensure(series[0].0 == 1.0, || "first record is not t = 1".into())?;
        let envelope = series.iter().map(|p| p.1).fold(0.0, f64::max);
        ensure(envelope <= 64.0 * d1, || {
            format!("ring({n}): max dist2 {envelope:e} > 64 x {d1:e}")
        })?;
        let reached = series.iter().find(|p| p.1 <= 1e-8).map(|p| p.0);
        let Some(t_reach) = reached else {
            return Err(format!("ring({n}): dist2 above 1e-8 after 1e6 steps"));
        };
        let fit = fit_semilog(&nzefg_core::diagnostics::fit_window(&series))
            .map_err(|e| format!("ring({n}): {e}"))?;
        ensure(fit.slope < 0.0 && fit.r_squared >= 0.9, || {
            format!("ring({n}): slope {:e}, r2 {:.3}", fit.slope, fit.r_squared)
        })?;
        out.push(format!(
            "ring({n}) dist2 <= 1e-8 at t={t_reach}, slope {:.2e} r2 {:.4}",
            fit.slope, fit.r_squared
        ));
    }
    Ok(out.join("; "))
}

fn lyapunov_recursion() -> Verdict {
    let mut out = Vec::new();
    for n in [2, 4] {
        let net = common::mp_net(n);
        let mut cfg = SolverConfig::new(default_step_size(&net), 10_000);
        cfg.initial = Initial::Random;
        cfg.seed = 8;
        let diag = DiagnosticsConfig {
            metrics: Metrics {
                lyapunov: true,
                ..Metrics::NONE
            },
            dist_every: 1,
            stop_below: None,
        };
        let tr = run_diagnosed(&net, &cfg, &diag).map_err(|e| e.to_string())?;
        ensure(tr.records.len() == 10_000, || "missing records".into())?;
        let excess = nzefg_core::diagnostics::lyapunov_excess(&tr.records)
            .ok_or_else(|| format!("ring({n}): no consecutive records"))?;
        ensure(excess <= 1e-8, || format!("ring({n}): excess {excess:e}"))?;
        out.push(format!("ring({n}) worst excess {excess:.1e}"));
    }
    Ok(out.join("; "))
}

fn kuhn_cross_check() -> Verdict {
    let tree = kuhn_poker();
    let oracle = common::two_player_value(&tree);
    ensure((oracle + 1.0 / 18.0).abs() <= 1e-9, || {
        format!("LP oracle gives {oracle}, not -1/18")
    })?;
    let net = common::kuhn_net(2);
    ensure(net.edges().len() == 1 && net.edges()[0].u == 0, || {
        "unexpected 2-node layout".into()
    })?;
    let x = solve_symmetric_ne(&net).map_err(|e| e.to_string())?.values;
    let gap = nash_gap(&net, &x).max;
    let value = net.agent_payoffs(&x)[0];
    ensure(gap <= 1e-7, || format!("nash gap {gap:e}"))?;
    ensure((value - oracle).abs() <= 1e-8, || {
        format!("value {value} vs oracle {oracle}")
    })?;
    Ok(format!(
        "gap {gap:.1e}, value {value:.12} vs LP {oracle:.12}"
    ))
}

fn kuhn_ring_sweep() -> Verdict {
    let cfg = ExperimentConfig {
        game: GameSpec {
            source: GameSource::Fixture("kuhn".into()),
            topology: Topology::Ring,
            nodes: 5,
            ..GameSpec::default()
        },
        iterations: 100_000,
        record_every: 1000,
        metrics: Metrics {
            nash_gap: true,
            dist2: true,
            ..Metrics::NONE
        },
        dist_every: 1_000_000,
        ..ExperimentConfig::default()
    };
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let report = sweep(&cfg, &default_grid(), workers).map_err(|e| format!("{e:#}"))?;
    let gaps: Vec<(f64, Option<f64>)> = report
        .cells
        .iter()
        .map(|c| {
            let g = c
                .result
                .as_ref()
                .ok()
                .and_then(|o| o.last(|r| r.nash_gap_avg));
            (c.eta, g)
        })
        .collect();
    let table: Vec<String> = gaps
        .iter()
        .map(|(eta, g)| match g {
            Some(g) => format!("{eta:.2e}:{g:.2e}"),
            None => format!("{eta:.2e}:failed"),
        })
        .collect();
    let best = gaps
        .iter()
        .filter_map(|(eta, g)| g.map(|g| (*eta, g)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| "every cell failed".to_string())?;
    ensure(best.1 <= 1e-2, || {
        format!("best gap {:e} [{}]", best.1, table.join(" "))
    })?;
    Ok(format!(
        "best eta {:.3e} gap {:.2e}; eta:gap {}",
        best.0,
        best.1,
        table.join(" ")
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("restricted antisymmetry", 10, || bilinear_checks(false)),
        ("self-annihilation", 5, || bilinear_checks(true)),
        ("sequence-form equivalence", 10, sequence_form_equivalence),
        ("projection exactness", 30, projection_exactness),
        ("per-agent and joint forms agree", 30, forms_agree),
        ("time-average O(1/T) rate", 120, time_average_rate),
        ("geometric last-iterate decay", 300, last_iterate_decay),
        ("Lyapunov recursion", 120, lyapunov_recursion),
        ("Kuhn poker cross-check", 30, kuhn_cross_check),
        ("Kuhn ring(5) sweep", 600, kuhn_ring_sweep),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (k, (name, budget, run)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != k + 1) {
            continue;
        }
        let start = Instant::now();
        let verdict = run();
        let took = start.elapsed();
        let verdict = match verdict {
            Ok(d) if took > Duration::from_secs(*budget) => {
                Err(format!("{d}; over the {budget} s budget"))
            }
            v => v,
        };
        let (tag, detail) = match &verdict {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        if verdict.is_err() {
            failed += 1;
        }
        println!(
            "{tag} {:>2} {name} ({:.1} s / {budget} s): {detail}",
            k + 1,
            took.as_secs_f64()
        );
    }
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
