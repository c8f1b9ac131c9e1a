//! Network games: agents on a graph, one two-player game per edge.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::efg::{
    compare_histories, validate_game_tree, validate_perfect_recall, BehavioralPlan, GameTree, Rule,
    Seat, ValidationReport,
};
use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::sequence_form::{
    build_edge_payoff_matrix, compile_treeplex, PayoffMatrix, ProductTreeplex, Treeplex,
};

/// Default cap on the number of pure profiles an exhaustive zero-sum check visits.
pub const EXHAUSTIVE_CAP: u128 = 1_000_000;

/// Relative tolerance of the zero-sum and antisymmetry checks.
pub const ZERO_SUM_TOL: f64 = 1e-9;

/// An undirected edge. Agent `u` sits in seat one of `game`, agent `v` in seat two.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub game: Arc<GameTree>,
}

impl Edge {
    pub fn seat_of(&self, agent: usize) -> Option<Seat> {
        if agent == self.u {
            Some(Seat::One)
        } else if agent == self.v {
            Some(Seat::Two)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Metadata {
    pub name: String,
    /// Declared properties; `verify` style commands check them.
    pub zero_sum: bool,
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkDescription {
    pub agents: Vec<String>,
    pub edges: Vec<Edge>,
    pub metadata: Metadata,
}

impl NetworkDescription {
    /// `(game, seat)` for every edge the agent plays, in edge order.
    pub fn games_of(&self, agent: usize) -> Vec<(&GameTree, Seat)> {
        self.edges
            .iter()
            .filter_map(|e| e.seat_of(agent).map(|s| (e.game.as_ref(), s)))
            .collect()
    }
}

/// Checks that an agent's information sets line up across all of its edge games:
/// shared ids must carry the same actions and be reached by matching own histories.
/// Own (infoset node, action) steps from the root.
type History = Vec<(usize, usize)>;

pub fn validate_consistency(games: &[(&GameTree, Seat)]) -> ValidationReport {
    let mut report = ValidationReport::default();
    // first occurrence of each id: (game index, node, own history)
    let mut first: BTreeMap<&str, (usize, usize, History)> = BTreeMap::new();
    for (g, &(tree, seat)) in games.iter().enumerate() {
        let parents = tree.parents();
        for (id, members) in tree.infosets(seat) {
            for &m in &members {
                let hist = tree.own_history(&parents, m, seat);
                match first.get(id) {
                    None => {
                        first.insert(id, (g, m, hist));
                    }
                    Some((g0, m0, h0)) => {
                        let t0 = games[*g0].0;
                        let names0: Vec<&str> = t0.node(*m0).action_names().collect();
                        let names: Vec<&str> = tree.node(m).action_names().collect();
                        if names0 != names {
                            report.push(
                                Rule::InfosetActionMismatch,
                                format!("information set `{id}` has actions {names0:?} in game {g0} and {names:?} in game {g}"),
                                vec![*m0, m],
                                vec![id.to_string()],
                            );
                        } else if let Some((rule, why)) = compare_histories((t0, h0), (tree, &hist))
                        {
                            report.push(
                                rule,
                                format!("information set `{id}`, node {m0} of game {g0} and node {m} of game {g}: {why}"),
                                vec![*m0, m],
                                vec![id.to_string()],
                            );
                        }
                    }
                }
            }
        }
    }
    report
}

/// Full structural validation: edges, every edge game, perfect recall in both seats,
/// and per-agent consistency.
pub fn validate_description(desc: &NetworkDescription) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = desc.agents.len();
    for (k, e) in desc.edges.iter().enumerate() {
        if e.u >= n || e.v >= n || e.u == e.v {
            report.push(
                Rule::EdgeEndpoint,
                format!(
                    "edge {k} joins agents {} and {} in a network of {n}",
                    e.u, e.v
                ),
                vec![],
                vec![],
            );
        }
    }
    for (k, e) in desc.edges.iter().enumerate() {
        let tree_report = validate_game_tree(&e.game);
        if !tree_report.is_ok() {
            for mut v in tree_report.violations {
                v.message = format!("edge {k}: {}", v.message);
                report.violations.push(v);
            }
            continue;
        }
        for seat in [Seat::One, Seat::Two] {
            for mut v in validate_perfect_recall(&e.game, seat).violations {
                v.message = format!("edge {k}, {seat:?}: {}", v.message);
                report.violations.push(v);
            }
        }
    }
    if !report.is_ok() {
        return report;
    }
    for a in 0..n {
        for mut v in validate_consistency(&desc.games_of(a)).violations {
            v.message = format!("agent {}: {}", desc.agents[a], v.message);
            report.violations.push(v);
        }
    }
    report
}

/// A directed view of an edge: `from`'s payoff matrix against `to`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedEdge {
    pub from: usize,
    pub to: usize,
    pub matrix: PayoffMatrix,
}

/// A compiled network game.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGame {
    agents: Vec<String>,
    edges: Vec<Edge>,
    product: ProductTreeplex,
    directed: Vec<DirectedEdge>,
    /// Indices into `directed` of the edges leaving each agent.
    outgoing: Vec<Vec<usize>>,
    r: SparseMatrix,
    r_norm: f64,
    payoff_scale: f64,
}

/// Validates and compiles a description.
pub fn assemble(desc: &NetworkDescription) -> Result<NetworkGame> {
    let report = validate_description(desc);
    if !report.is_ok() {
        return Err(Error::Invalid(report));
    }
    let n = desc.agents.len();
    let blocks = (0..n)
        .map(|a| compile_treeplex(&desc.games_of(a)))
        .collect::<Result<Vec<Treeplex>>>()?;
    let product = ProductTreeplex::new(blocks);

    let mut directed = Vec::with_capacity(2 * desc.edges.len());
    let mut outgoing = vec![Vec::new(); n];
    for e in &desc.edges {
        for (from, to, seat) in [(e.u, e.v, Seat::One), (e.v, e.u, Seat::Two)] {
            let matrix =
                build_edge_payoff_matrix(&e.game, seat, product.block(from), product.block(to))?;
            outgoing[from].push(directed.len());
            directed.push(DirectedEdge { from, to, matrix });
        }
    }
    let mut triplets = Vec::new();
    for d in &directed {
        let (ou, ov) = (product.offset(d.from), product.offset(d.to));
        triplets.extend(
            d.matrix
                .matrix()
                .triplets()
                .map(|(r, c, v)| (ou + r, ov + c, -v)),
        );
    }
    let dim = product.dim();
    let r = SparseMatrix::from_triplets(dim, dim, triplets);
    let r_norm = r.spectral_norm(1e-10, 100_000);
    let payoff_scale = desc
        .edges
        .iter()
        .map(|e| e.game.payoff_scale())
        .fold(0.0, f64::max);
    Ok(NetworkGame {
        agents: desc.agents.clone(),
        edges: desc.edges.clone(),
        product,
        directed,
        outgoing,
        r,
        r_norm,
        payoff_scale,
    })
}

impl NetworkGame {
    pub fn agents(&self) -> &[String] {
        &self.agents
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn product(&self) -> &ProductTreeplex {
        &self.product
    }

    pub fn treeplex(&self, u: usize) -> &Treeplex {
        self.product.block(u)
    }

    pub fn dim(&self) -> usize {
        self.product.dim()
    }

    /// The reduced matrix: block `(u, v)` is `-A^{uv}` on edges, zero elsewhere.
    pub fn r(&self) -> &SparseMatrix {
        &self.r
    }

    /// Spectral norm estimate of `R`.
    pub fn r_norm(&self) -> f64 {
        self.r_norm
    }

    /// Largest absolute terminal payoff over all edge games.
    pub fn payoff_scale(&self) -> f64 {
        self.payoff_scale
    }

    pub fn directed_edges(&self) -> &[DirectedEdge] {
        &self.directed
    }

    /// Directed edges leaving agent `u`.
    pub fn outgoing(&self, u: usize) -> impl Iterator<Item = &DirectedEdge> + '_ {
        self.outgoing[u].iter().map(move |&k| &self.directed[k])
    }

    /// Tolerance `1e-9 (1 + max |payoff|)` used by the zero-sum style checks.
    pub fn tolerance(&self) -> f64 {
        ZERO_SUM_TOL * (1.0 + self.payoff_scale)
    }

    /// `Σ_v A^{uv} x_v`, the payoff gradient of agent `u` at joint point `x`.
    pub fn gradient(&self, u: usize, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim());
        let mut g = vec![0.0; self.treeplex(u).dim()];
        for d in self.outgoing(u) {
            let xv = &x[self.product.range(d.to)];
            for (r, gr) in g.iter_mut().enumerate() {
                *gr += d
                    .matrix
                    .matrix()
                    .row(r)
                    .map(|(c, v)| v * xv[c])
                    .sum::<f64>();
            }
        }
        g
    }

    /// Expected payoff of every agent at joint point `x`.
    pub fn agent_payoffs(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_agents())
            .map(|u| crate::linalg::dot(&x[self.product.range(u)], &self.gradient(u, x)))
            .collect()
    }

    /// Random joint point from a seeded generator.
    pub fn sample_point(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.product.random_point(rng)
    }

    /// Exhaustive or sampled zero-sum check.
    pub fn check_zero_sum(
        &self,
        mode: ZeroSumMode,
        samples: usize,
        seed: u64,
    ) -> Result<ZeroSumReport> {
        self.check_zero_sum_capped(mode, samples, seed, EXHAUSTIVE_CAP)
    }

    pub fn check_zero_sum_capped(
        &self,
        mode: ZeroSumMode,
        samples: usize,
        seed: u64,
        cap: u128,
    ) -> Result<ZeroSumReport> {
        let tolerance = self.tolerance();
        let (checked, max_violation) = match mode {
            ZeroSumMode::Exhaustive => self.exhaustive_zero_sum(cap)?,
            ZeroSumMode::Sampled => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut worst: f64 = 0.0;
                for _ in 0..samples {
                    let x = self.sample_point(&mut rng);
                    worst = worst.max(self.r.bilinear(&x, &x).abs());
                }
                (samples as u128, worst)
            }
        };
        Ok(ZeroSumReport {
            mode,
            checked,
            max_violation,
            tolerance,
            ok: max_violation <= tolerance,
        })
    }

    /// Number of pure behavioral profiles of the whole network.
    pub fn pure_profile_count(&self) -> u128 {
        let mut count: u128 = 1;
        for tp in self.product.blocks() {
            for inf in tp.infosets() {
                count = count.saturating_mul(inf.actions.len() as u128);
            }
        }
        count
    }

    /// Enumerates every pure profile and evaluates the payoff sum on the trees.
    fn exhaustive_zero_sum(&self, cap: u128) -> Result<(u128, f64)> {
        let count = self.pure_profile_count();
        if count > cap {
            return Err(Error::ExhaustiveCap { count, cap });
        }
        // odometer over (agent, infoset) choices
        let slots: Vec<(usize, usize)> = (0..self.n_agents())
            .flat_map(|u| (0..self.treeplex(u).infosets().len()).map(move |k| (u, k)))
            .collect();
        let mut choice = vec![0usize; slots.len()];
        let mut worst: f64 = 0.0;
        let mut checked = 0u128;
        loop {
            let mut plans = vec![BehavioralPlan::new(); self.n_agents()];
            for (&(u, k), &a) in slots.iter().zip(&choice) {
                let inf = &self.treeplex(u).infosets()[k];
                let mut d = vec![0.0; inf.actions.len()];
                d[a] = 1.0;
                plans[u].insert(inf.id.clone(), d);
            }
            let mut total = 0.0;
            for e in &self.edges {
                let (pu, pv) = crate::efg::expected_payoff(&e.game, &plans[e.u], &plans[e.v])?;
                total += pu + pv;
            }
            worst = worst.max(total.abs());
            checked += 1;

            let mut i = 0;
            loop {
                if i == slots.len() {
                    return Ok((checked, worst));
                }
                let (u, k) = slots[i];
                choice[i] += 1;
                if choice[i] < self.treeplex(u).infosets()[k].actions.len() {
                    break;
                }
                choice[i] = 0;
                i += 1;
            }
        }
    }

    /// Samples pairs `(x, y)` and reports the worst `|xᵀRy + yᵀRx|`.
    pub fn check_antisymmetry(&self, samples: usize, seed: u64) -> AntisymmetryReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let x = self.sample_point(&mut rng);
            let y = self.sample_point(&mut rng);
            worst = worst.max((self.r.bilinear(&x, &y) + self.r.bilinear(&y, &x)).abs());
        }
        let tolerance = self.tolerance();
        AntisymmetryReport {
            checked: samples,
            max_violation: worst,
            tolerance,
            ok: worst <= tolerance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZeroSumMode {
    Exhaustive,
    Sampled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroSumReport {
    pub mode: ZeroSumMode,
    pub checked: u128,
    pub max_violation: f64,
    pub tolerance: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AntisymmetryReport {
    pub checked: usize,
    pub max_violation: f64,
    pub tolerance: f64,
    pub ok: bool,
}
