//! Convergence metrics and rate fits.

use alloc::vec::Vec;
use core::ops::ControlFlow;

use crate::error::{Error, Result};
use crate::linalg::{dist2, dot};
use crate::network::NetworkGame;
use crate::oga::{run_with, SolverConfig, SolverState, Trajectory};
use crate::polytope::{best_response_treeplex, min_response, EquilibriumSet};

/// Values below this are left out of log fits.
pub const FIT_FLOOR: f64 = 1e-12;
/// Minimum number of usable points for a fit.
pub const MIN_FIT_POINTS: usize = 10;
/// Fraction of leading records skipped by [`fit_rates`].
pub const FIT_SKIP: f64 = 0.2;

/// Metrics at one recorded step; `None` where the metric was not computed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiagnosticsRecord {
    pub t: usize,
    /// Largest best-response gain against the time-average profile.
    pub nash_gap_avg: Option<f64>,
    /// Same against the last iterate.
    pub nash_gap_last: Option<f64>,
    /// `-min_{x'} x'ᵀ R x̄` at the time average.
    pub symmetric_gap: Option<f64>,
    /// `dist²(x^t, X*)` of the last iterate.
    pub dist2_ne: Option<f64>,
    pub theta: Option<f64>,
    pub xi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NashGap {
    pub per_agent: Vec<f64>,
    pub max: f64,
}

/// Best-response gain of every agent against the rest of `x`.
pub fn nash_gap(net: &NetworkGame, x: &[f64]) -> NashGap {
    let per_agent: Vec<f64> = (0..net.n_agents())
        .map(|u| {
            let g = net.gradient(u, x);
            let (_, br) = best_response_treeplex(net.treeplex(u), &g);
            br - dot(&x[net.product().range(u)], &g)
        })
        .collect();
    let max = per_agent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    NashGap { per_agent, max }
}

/// `-min_{x' ∈ X} x'ᵀ R x`.
pub fn symmetric_gap(net: &NetworkGame, x: &[f64]) -> f64 {
    -min_response(net, x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lyapunov {
    /// `dist²(x̂^t, X*) + ‖x̂^t - x^{t-1}‖² / 16`
    pub theta: f64,
    /// `‖x̂^{t+1} - x^t‖² + ‖x^t - x̂^t‖²`
    pub xi: f64,
    /// `Θ^{t+1}`, available from the same state.
    pub theta_next: f64,
}

impl Lyapunov {
    /// `Θ^{t+1} - Θ^t + (15/16) ξ^t`; the recursion holds when this is `≤ 0`.
    pub fn excess(&self) -> f64 {
        self.theta_next - self.theta + 15.0 / 16.0 * self.xi
    }
}

/// Potential terms for a state after step `t ≥ 1`.
pub fn lyapunov(eq: &EquilibriumSet, state: &SolverState) -> Result<Lyapunov> {
    let d_now = eq.distance(&state.x_hat_prev)?.dist2;
    let d_next = eq.distance(&state.x_hat)?.dist2;
    Ok(lyapunov_from(state, d_now, d_next))
}

fn lyapunov_from(state: &SolverState, d_now: f64, d_next: f64) -> Lyapunov {
    Lyapunov {
        theta: d_now + dist2(&state.x_hat_prev, &state.x_prev) / 16.0,
        xi: dist2(&state.x_hat, &state.x) + dist2(&state.x, &state.x_hat_prev),
        theta_next: d_next + dist2(&state.x_hat, &state.x) / 16.0,
    }
}

/// Which metrics an instrumented run computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Metrics {
    pub nash_gap: bool,
    pub symmetric_gap: bool,
    pub dist2: bool,
    pub lyapunov: bool,
}

impl Metrics {
    pub const ALL: Metrics = Metrics {
        nash_gap: true,
        symmetric_gap: true,
        dist2: true,
        lyapunov: true,
    };

    pub const NONE: Metrics = Metrics {
        nash_gap: false,
        symmetric_gap: false,
        dist2: false,
        lyapunov: false,
    };

    fn needs_eq(&self) -> bool {
        self.dist2 || self.lyapunov
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsConfig {
    pub metrics: Metrics,
    /// Distance-based metrics are computed on every `dist_every`-th record, starting
    /// with the first, and always on the last.
    pub dist_every: usize,
    /// Stop once a computed `dist2_ne` falls below this.
    pub stop_below: Option<f64>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            metrics: Metrics::ALL,
            dist_every: 10,
            stop_below: None,
        }
    }
}

/// Runs the solver and fills one [`DiagnosticsRecord`] per `record_every` steps.
/// Snapshots are not stored.
pub fn run_diagnosed(
    net: &NetworkGame,
    solver: &SolverConfig,
    diag: &DiagnosticsConfig,
) -> Result<Trajectory> {
    if diag.dist_every == 0 {
        return Err(Error::Parameter("dist_every must be at least 1".into()));
    }
    let eq = diag.metrics.needs_eq().then(|| EquilibriumSet::new(net));
    let mut records = Vec::new();
    // dist²(x̂^{t+1}) from the previous record, reusable when records are consecutive
    let mut cached_hat: Option<(usize, f64)> = None;
    let stopped_at = run_with(net, solver, |s| {
        if s.t % solver.record_every != 0 {
            return Ok(ControlFlow::Continue(()));
        }
        let mut rec = DiagnosticsRecord {
            t: s.t,
            ..Default::default()
        };
        let m = diag.metrics;
        if m.nash_gap || m.symmetric_gap {
            let avg = s.average();
            if m.nash_gap {
                rec.nash_gap_avg = Some(nash_gap(net, &avg).max);
                rec.nash_gap_last = Some(nash_gap(net, &s.x).max);
            }
            if m.symmetric_gap {
                rec.symmetric_gap = Some(symmetric_gap(net, &avg));
            }
        }
        if let Some(eq) = &eq {
            let last = s.t + solver.record_every > solver.iterations;
            if records.len() % diag.dist_every == 0 || last {
                if m.dist2 {
                    rec.dist2_ne = Some(eq.distance(&s.x)?.dist2);
                }
                if m.lyapunov {
                    let d_now = match cached_hat {
                        Some((t, d)) if t + 1 == s.t => d,
                        _ => eq.distance(&s.x_hat_prev)?.dist2,
                    };
                    let d_next = eq.distance(&s.x_hat)?.dist2;
                    cached_hat = Some((s.t, d_next));
                    let l = lyapunov_from(s, d_now, d_next);
                    rec.theta = Some(l.theta);
                    rec.xi = Some(l.xi);
                }
            }
        }
        let stop = matches!((diag.stop_below, rec.dist2_ne), (Some(lim), Some(d)) if d < lim);
        records.push(rec);
        Ok(if stop {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        })
    })?;
    Ok(Trajectory {
        config: solver.clone(),
        snapshots: Vec::new(),
        records,
        stopped_at,
    })
}

/// Worst `Θ^{t+1} - Θ^t + (15/16) ξ^t` over consecutive records carrying both terms.
pub fn lyapunov_excess(records: &[DiagnosticsRecord]) -> Option<f64> {
    records
        .windows(2)
        .filter(|w| w[1].t == w[0].t + 1)
        .filter_map(|w| Some(w[1].theta? - w[0].theta? + 15.0 / 16.0 * w[0].xi?))
        .reduce(f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitKind {
    /// `log y` against `log t`
    LogLog,
    /// `log y` against `t`
    SemiLog,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub kind: FitKind,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `(t_min, t_max)` of the points used.
    pub window: (f64, f64),
}

fn least_squares(kind: FitKind, pts: &[(f64, f64)]) -> Result<RateFit> {
    let usable: Vec<(f64, f64)> = pts
        .iter()
        .filter(|(t, y)| y.is_finite() && *y >= FIT_FLOOR && (kind == FitKind::SemiLog || *t > 0.0))
        .map(|&(t, y)| {
            let x = match kind {
                FitKind::LogLog => libm::log(t),
                FitKind::SemiLog => t,
            };
            (x, libm::log(y))
        })
        .collect();
    if usable.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData {
            usable: usable.len(),
            needed: MIN_FIT_POINTS,
        });
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = usable.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Numerical("rate fit over a single abscissa".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    let ts: Vec<f64> = pts
        .iter()
        .filter(|(t, y)| y.is_finite() && *y >= FIT_FLOOR && (kind == FitKind::SemiLog || *t > 0.0))
        .map(|p| p.0)
        .collect();
    Ok(RateFit {
        kind,
        slope,
        intercept,
        r_squared,
        window: (ts[0], ts[ts.len() - 1]),
    })
}

/// Fits `log y = slope · log t + intercept`.
pub fn fit_loglog(points: &[(f64, f64)]) -> Result<RateFit> {
    least_squares(FitKind::LogLog, points)
}

/// Fits `log y = slope · t + intercept`.
pub fn fit_semilog(points: &[(f64, f64)]) -> Result<RateFit> {
    least_squares(FitKind::SemiLog, points)
}

/// Keeps the trailing part of a series after skipping the leading [`FIT_SKIP`] share.
pub fn fit_window<T: Clone>(series: &[T]) -> Vec<T> {
    let skip = libm::floor(series.len() as f64 * FIT_SKIP) as usize;
    series[skip..].to_vec()
}

/// Loglog fit of `nash_gap_avg` and semilog fit of `dist2_ne` over the default window.
pub fn fit_rates(records: &[DiagnosticsRecord]) -> (Result<RateFit>, Result<RateFit>) {
    let window = fit_window(records);
    let gap: Vec<(f64, f64)> = window
        .iter()
        .filter_map(|r| r.nash_gap_avg.map(|g| (r.t as f64, g)))
        .collect();
    let dist: Vec<(f64, f64)> = window
        .iter()
        .filter_map(|r| r.dist2_ne.map(|d| (r.t as f64, d)))
        .collect();
    (fit_loglog(&gap), fit_semilog(&dist))
}
