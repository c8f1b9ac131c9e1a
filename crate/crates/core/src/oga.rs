//! Optimistic gradient ascent with Euclidean proximal steps.
//!
//! Joint form on the product treeplex:
//! `x^t = Π(x̂^t - η R x^{t-1})`, `x̂^{t+1} = Π(x̂^t - η R x^t)`.
//! Per-agent form: `x_u^t = Π_u(x̂_u^t + η Σ_v A^{uv} x_v^{t-1})`, and likewise for `x̂`.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::ControlFlow;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::network::NetworkGame;
use crate::polytope::{project, Projection};

/// `min(1 / (8 ‖R‖²), 1)`.
pub fn step_size_bound(r_norm: f64) -> f64 {
    if r_norm <= 0.0 {
        return 1.0;
    }
    (1.0 / (8.0 * r_norm * r_norm)).min(1.0)
}

/// [`step_size_bound`] at the game's estimated `‖R‖`.
pub fn default_step_size(net: &NetworkGame) -> f64 {
    step_size_bound(net.r_norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Form {
    Joint,
    PerAgent,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    /// Uniform behavioral plan at every agent.
    Uniform,
    /// Random point of the product treeplex drawn from the run seed.
    Random,
    /// Explicit joint point; must lie in the product treeplex.
    Point(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub eta: f64,
    pub iterations: usize,
    pub seed: u64,
    pub initial: Initial,
    pub record_every: usize,
    pub form: Form,
}

impl SolverConfig {
    pub fn new(eta: f64, iterations: usize) -> Self {
        Self {
            eta,
            iterations,
            seed: 0,
            initial: Initial::Uniform,
            record_every: 1,
            form: Form::Joint,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::Parameter(alloc::format!(
                "step size must be finite and positive, got {}",
                self.eta
            )));
        }
        if self.iterations == 0 {
            return Err(Error::Parameter("iterations must be at least 1".into()));
        }
        if self.record_every == 0 {
            return Err(Error::Parameter("record_every must be at least 1".into()));
        }
        Ok(())
    }

    /// The starting point `x⁰` on `net`.
    pub fn initial_point(&self, net: &NetworkGame) -> Result<Vec<f64>> {
        match &self.initial {
            Initial::Uniform => Ok(net.product().uniform()),
            Initial::Random => Ok(net.sample_point(&mut ChaCha8Rng::seed_from_u64(self.seed))),
            Initial::Point(x) => {
                if x.len() != net.dim() {
                    return Err(Error::Parameter(alloc::format!(
                        "initial point has {} coordinates, game has {}",
                        x.len(),
                        net.dim()
                    )));
                }
                let bad = net.product().infeasibility(x);
                if bad > 1e-10 {
                    return Err(Error::Parameter(alloc::format!(
                        "initial point violates the treeplex by {bad:e}"
                    )));
                }
                Ok(x.clone())
            }
        }
    }
}

/// Iterates after `t` steps: `x = x^t`, `x_hat = x̂^{t+1}`, `x_prev = x^{t-1}`,
/// `x_hat_prev = x̂^t`. At `t = 0` all four equal `x⁰`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub t: usize,
    pub x: Vec<f64>,
    pub x_hat: Vec<f64>,
    pub x_prev: Vec<f64>,
    pub x_hat_prev: Vec<f64>,
    /// `Σ_{s=1}^t x^s`
    pub running_sum: Vec<f64>,
}

impl SolverState {
    pub fn new(x0: Vec<f64>) -> Self {
        Self {
            t: 0,
            x_hat: x0.clone(),
            x_prev: x0.clone(),
            x_hat_prev: x0.clone(),
            running_sum: vec![0.0; x0.len()],
            x: x0,
        }
    }

    /// Time average `running_sum / t`; the current iterate before the first step.
    pub fn average(&self) -> Vec<f64> {
        if self.t == 0 {
            return self.x.clone();
        }
        let t = self.t as f64;
        self.running_sum.iter().map(|v| v / t).collect()
    }

    fn advance(&self, x: Vec<f64>, x_hat: Vec<f64>) -> Result<SolverState> {
        let t = self.t + 1;
        if x.iter().chain(&x_hat).any(|v| !v.is_finite()) {
            return Err(Error::Diverged(t));
        }
        let mut running_sum = self.running_sum.clone();
        running_sum.iter_mut().zip(&x).for_each(|(s, v)| *s += v);
        Ok(SolverState {
            t,
            x_prev: self.x.clone(),
            x_hat_prev: self.x_hat.clone(),
            x,
            x_hat,
            running_sum,
        })
    }
}

fn guard_finite(v: &[f64], t: usize) -> Result<()> {
    if v.iter().any(|a| !a.is_finite()) {
        return Err(Error::Diverged(t));
    }
    Ok(())
}

/// One step of the joint form.
pub fn step(state: &SolverState, net: &NetworkGame, eta: f64) -> Result<SolverState> {
    let prod = net.product();
    let half = |anchor: &[f64], at: &[f64]| -> Result<Vec<f64>> {
        let rx = net.r().mul_vec(at);
        let y: Vec<f64> = anchor.iter().zip(&rx).map(|(a, g)| a - eta * g).collect();
        guard_finite(&y, state.t + 1)?;
        Ok(project(&y, prod)?.point)
    };
    let x = half(&state.x_hat, &state.x)?;
    let x_hat = half(&state.x_hat, &x)?;
    state.advance(x, x_hat)
}

/// One step of the per-agent form; each agent projects onto its own treeplex.
pub fn step_per_agent(state: &SolverState, net: &NetworkGame, eta: f64) -> Result<SolverState> {
    let prod = net.product();
    let half = |anchor: &[f64], at: &[f64]| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(anchor.len());
        for u in 0..net.n_agents() {
            let g = net.gradient(u, at);
            let y: Vec<f64> = anchor[prod.range(u)]
                .iter()
                .zip(&g)
                .map(|(a, gv)| a + eta * gv)
                .collect();
            guard_finite(&y, state.t + 1)?;
            out.extend(Projection::project(net.treeplex(u), &y)?.point);
        }
        Ok(out)
    };
    let x = half(&state.x_hat, &state.x)?;
    let x_hat = half(&state.x_hat, &x)?;
    state.advance(x, x_hat)
}

/// A stored iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: usize,
    pub x: Vec<f64>,
    pub x_hat: Vec<f64>,
    pub average: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub config: SolverConfig,
    pub snapshots: Vec<Snapshot>,
    /// Filled by the diagnostics layer; empty for plain runs.
    pub records: Vec<DiagnosticsRecord>,
    /// Set when an observer stopped the run before `iterations`.
    pub stopped_at: Option<usize>,
}

/// Runs the configured number of steps, storing a snapshot every `record_every`.
pub fn run(net: &NetworkGame, config: &SolverConfig) -> Result<Trajectory> {
    let mut snapshots = Vec::new();
    let stopped_at = run_with(net, config, |s| {
        if s.t % config.record_every == 0 {
            snapshots.push(Snapshot {
                t: s.t,
                x: s.x.clone(),
                x_hat: s.x_hat.clone(),
                average: s.average(),
            });
        }
        Ok(ControlFlow::Continue(()))
    })?;
    Ok(Trajectory {
        config: config.clone(),
        snapshots,
        records: Vec::new(),
        stopped_at,
    })
}

/// Runs the solver and hands every post-step state to `observe`. Returns the step at
/// which the observer asked to stop, if it did.
pub fn run_with<F>(
    net: &NetworkGame,
    config: &SolverConfig,
    mut observe: F,
) -> Result<Option<usize>>
where
    F: FnMut(&SolverState) -> Result<ControlFlow<()>>,
{
    config.validate()?;
    let mut state = SolverState::new(config.initial_point(net)?);
    for _ in 0..config.iterations {
        state = match config.form {
            Form::Joint => step(&state, net, config.eta)?,
            Form::PerAgent => step_per_agent(&state, net, config.eta)?,
        };
        if observe(&state)?.is_break() {
            return Ok(Some(state.t));
        }
    }
    Ok(None)
}
