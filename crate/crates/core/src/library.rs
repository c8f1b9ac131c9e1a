//! Built-in games and network builders.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::ToString;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::efg::{GameTree, Node, Owner, Seat, TreeBuilder};
use crate::error::{Error, Result};
use crate::network::{Edge, Metadata, NetworkDescription};
use crate::sequence_form::compile_treeplex;

/// Largest treeplex dimension the random generator will produce for one agent.
pub const MAX_RANDOM_DIM: usize = 64;

const CARDS: [&str; 3] = ["J", "Q", "K"];

/// Kuhn poker with ante 1 and bet 1. Payoffs are `(player 1, player 2)`.
///
/// Information set ids carry the seat, the private card and the public betting
/// history: `1:J`, `2:Q:c`, `2:Q:b`, `1:J:cb`.
pub fn kuhn_poker() -> GameTree {
    let mut b = TreeBuilder::new();
    let mut deals = Vec::new();
    for (i, c1) in CARDS.iter().enumerate() {
        for (j, c2) in CARDS.iter().enumerate() {
            if i == j {
                continue;
            }
            // showdown winnings for player 1 when `stake` is in the pot from each side
            let show = |stake: f64| if i > j { stake } else { -stake };
            let z = |b: &mut TreeBuilder, u1: f64| b.terminal(u1, -u1);

            let cc = z(&mut b, show(1.0));
            let cbf = z(&mut b, -1.0);
            let cbc = z(&mut b, show(2.0));
            let p1_after_bet = b.decision(
                Seat::One,
                format!("1:{c1}:cb"),
                &[("fold", cbf), ("call", cbc)],
            );
            let p2_after_check = b.decision(
                Seat::Two,
                format!("2:{c2}:c"),
                &[("check", cc), ("bet", p1_after_bet)],
            );

            let bf = z(&mut b, 1.0);
            let bc = z(&mut b, show(2.0));
            let p2_after_bet = b.decision(
                Seat::Two,
                format!("2:{c2}:b"),
                &[("fold", bf), ("call", bc)],
            );

            let p1 = b.decision(
                Seat::One,
                format!("1:{c1}"),
                &[("check", p2_after_check), ("bet", p2_after_bet)],
            );
            deals.push((format!("{c1}{c2}"), p1));
        }
    }
    let outcomes: Vec<(&str, f64, usize)> = deals
        .iter()
        .map(|(n, c)| (n.as_str(), 1.0 / 6.0, *c))
        .collect();
    let root = b.chance(&outcomes);
    b.finish(root)
}

/// Matching pennies as a sequential game: player 2 moves without seeing player 1's
/// coin. Player 1 wins 1 on a match. Both seats use the information set id `coin`.
pub fn matching_pennies() -> GameTree {
    let mut b = TreeBuilder::new();
    let mut p2 = Vec::new();
    for first in 0..2 {
        let hh = if first == 0 { 1.0 } else { -1.0 };
        let z_heads = b.terminal(hh, -hh);
        let z_tails = b.terminal(-hh, hh);
        p2.push(b.decision(Seat::Two, "coin", &[("heads", z_heads), ("tails", z_tails)]));
    }
    let root = b.decision(Seat::One, "coin", &[("heads", p2[0]), ("tails", p2[1])]);
    b.finish(root)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Topology {
    Ring,
    Complete,
    Edges(Vec<(usize, usize)>),
}

impl Topology {
    /// Normalised undirected edge list `(lower, higher)` without duplicates.
    pub fn edges(&self, n: usize) -> Result<Vec<(usize, usize)>> {
        if n < 2 {
            return Err(Error::Parameter(format!(
                "a network needs at least 2 agents, got {n}"
            )));
        }
        let raw: Vec<(usize, usize)> = match self {
            Topology::Ring => (0..n).map(|i| (i, (i + 1) % n)).collect(),
            Topology::Complete => (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .collect(),
            Topology::Edges(list) => {
                if list.is_empty() {
                    return Err(Error::Parameter("edge list is empty".into()));
                }
                for &(u, v) in list {
                    if u >= n || v >= n {
                        return Err(Error::Parameter(format!(
                            "edge ({u}, {v}) names an agent outside 0..{n}"
                        )));
                    }
                    if u == v {
                        return Err(Error::Parameter(format!("self-loop on agent {u}")));
                    }
                }
                list.clone()
            }
        };
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for (u, v) in raw {
            let e = (u.min(v), u.max(v));
            if !seen.insert(e) {
                if matches!(self, Topology::Edges(_)) {
                    return Err(Error::Parameter(format!(
                        "edge ({}, {}) listed twice",
                        e.0, e.1
                    )));
                }
                continue;
            }
            out.push(e);
        }
        Ok(out)
    }
}

/// Places `template` on every edge; the lower agent id takes seat one.
pub fn network_of(topology: &Topology, n: usize, template: GameTree) -> Result<NetworkDescription> {
    let game = Arc::new(template);
    let edges = topology
        .edges(n)?
        .into_iter()
        .map(|(u, v)| Edge {
            u,
            v,
            game: Arc::clone(&game),
        })
        .collect();
    Ok(NetworkDescription {
        agents: (0..n).map(|i| i.to_string()).collect(),
        edges,
        metadata: Metadata {
            name: format!("{topology:?}({n})").to_lowercase(),
            zero_sum: true,
            consistent: true,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayoffMode {
    /// Every edge game is zero-sum on its own.
    PairwiseZeroSum,
    /// Constant transfers around a cycle make single edges non-zero-sum while the
    /// network stays zero-sum.
    CycleRedistributed,
}

/// Shape of a random edge game: `depth` alternating levels of `branching` actions.
/// Each mover sees the whole history except the opponent's latest move.
fn random_tree(depth: usize, branching: usize, rng: &mut ChaCha8Rng) -> GameTree {
    fn build(
        b: &mut TreeBuilder,
        hist: &mut Vec<usize>,
        depth: usize,
        branching: usize,
        rng: &mut ChaCha8Rng,
    ) -> usize {
        let level = hist.len();
        if level == depth {
            let u: f64 = rng.gen();
            return b.terminal(u, -u);
        }
        let seat = if level.is_multiple_of(2) {
            Seat::One
        } else {
            Seat::Two
        };
        let visible = &hist[..level.saturating_sub(1)];
        let id = format!(
            "{}:{}",
            seat.index() + 1,
            visible
                .iter()
                .map(|a| a.to_string())
                .collect::<Vec<_>>()
                .join(".")
        );
        let mut kids = Vec::with_capacity(branching);
        for a in 0..branching {
            hist.push(a);
            kids.push((format!("a{a}"), build(b, hist, depth, branching, rng)));
            hist.pop();
        }
        let acts: Vec<(&str, usize)> = kids.iter().map(|(n, c)| (n.as_str(), *c)).collect();
        b.decision(seat, id, &acts)
    }
    let mut b = TreeBuilder::new();
    let root = build(&mut b, &mut Vec::new(), depth, branching, rng);
    b.finish(root)
}

/// Finds a simple cycle as an ordered list of agents, if the graph has one.
fn find_cycle(n: usize, edges: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    adj.iter_mut().for_each(|a| a.sort_unstable());
    let mut parent = vec![usize::MAX; n];
    let mut visited = vec![false; n];
    for start in 0..n {
        if visited[start] {
            continue;
        }
        let mut stack = vec![(start, usize::MAX)];
        while let Some((u, from)) = stack.pop() {
            if visited[u] {
                continue;
            }
            visited[u] = true;
            parent[u] = from;
            for &w in &adj[u] {
                if w == from {
                    continue;
                }
                if visited[w] {
                    // back edge u - w closes a cycle through the DFS tree
                    let mut path = vec![u];
                    let mut p = u;
                    while p != w && parent[p] != usize::MAX {
                        p = parent[p];
                        path.push(p);
                    }
                    if p == w {
                        return Some(path);
                    }
                } else {
                    stack.push((w, u));
                }
            }
        }
    }
    None
}

/// Seeded random network game. Seat-one payoffs are uniform on `[0, 1]` and seat two
/// receives the negation; in [`PayoffMode::CycleRedistributed`] each agent on one
/// cycle of the graph additionally gains a constant `c_a ∈ [0.25, 1)` on the edge to
/// its successor and loses it on the edge from its predecessor.
pub fn random_network_efg(
    seed: u64,
    n_agents: usize,
    topology: &Topology,
    depth: usize,
    branching: usize,
    mode: PayoffMode,
) -> Result<NetworkDescription> {
    if depth == 0 || branching < 2 {
        return Err(Error::Parameter(format!(
            "random games need depth >= 1 and branching >= 2, got depth {depth}, branching {branching}"
        )));
    }
    let edges = topology.edges(n_agents)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut games: Vec<GameTree> = edges
        .iter()
        .map(|_| random_tree(depth, branching, &mut rng))
        .collect();

    // every edge shares one shape, so agent dimensions follow from the first tree
    let probe = &games[0];
    let seat_dim = |s: Seat| compile_treeplex(&[(probe, s)]).map(|t| t.dim());
    let (d1, d2) = (seat_dim(Seat::One)?, seat_dim(Seat::Two)?);
    for a in 0..n_agents {
        let first = edges.iter().any(|&(u, _)| u == a);
        let second = edges.iter().any(|&(_, v)| v == a);
        let dim = match (first, second) {
            (true, true) => d1 + d2 - 1,
            (true, false) => d1,
            (false, true) => d2,
            (false, false) => 1,
        };
        if dim > MAX_RANDOM_DIM {
            return Err(Error::Parameter(format!(
                "agent {a} would have treeplex dimension {dim}, above the cap of {MAX_RANDOM_DIM}"
            )));
        }
    }

    if mode == PayoffMode::CycleRedistributed {
        let cycle = find_cycle(n_agents, &edges).ok_or_else(|| {
            Error::Parameter("cycle redistribution needs a graph with a cycle".into())
        })?;
        let shift: Vec<f64> = cycle.iter().map(|_| rng.gen_range(0.25..1.0)).collect();
        for (k, &a) in cycle.iter().enumerate() {
            let next = cycle[(k + 1) % cycle.len()];
            let prev = cycle[(k + cycle.len() - 1) % cycle.len()];
            add_constant(&mut games, &edges, a, next, shift[k]);
            add_constant(&mut games, &edges, a, prev, -shift[k]);
        }
    }

    Ok(NetworkDescription {
        agents: (0..n_agents).map(|i| i.to_string()).collect(),
        edges: edges
            .iter()
            .zip(games)
            .map(|(&(u, v), g)| Edge {
                u,
                v,
                game: Arc::new(g),
            })
            .collect(),
        metadata: Metadata {
            name: format!("random-{mode:?}-{seed}").to_lowercase(),
            zero_sum: true,
            consistent: true,
        },
    })
}

/// Adds `c` to agent `a`'s payoff at every terminal of the edge between `a` and `b`.
fn add_constant(games: &mut [GameTree], edges: &[(usize, usize)], a: usize, b: usize, c: f64) {
    let k = edges
        .iter()
        .position(|&e| e == (a.min(b), a.max(b)))
        .expect("cycle follows graph edges");
    let seat = if a < b { 0 } else { 1 };
    for node in games[k].nodes_mut() {
        if let Node {
            owner: Owner::Terminal,
            payoffs: Some(p),
            ..
        } = node
        {
            p[seat] += c;
        }
    }
}

/// Names of the built-in edge games.
pub fn template(name: &str) -> Option<GameTree> {
    match name {
        "kuhn" => Some(kuhn_poker()),
        "matching-pennies" => Some(matching_pennies()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::efg::{validate_game_tree, validate_perfect_recall};

    #[test]
    fn kuhn_deals_and_payoffs() {
        let t = kuhn_poker();
        let root = t.node(t.root());
        assert_eq!(root.owner, Owner::Chance);
        let probs = root.chance_probs.as_ref().unwrap();
        assert_eq!(probs.len(), 6);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let terminals = t.nodes().iter().filter(|n| n.is_terminal()).count();
        assert_eq!(terminals, 30);
        for n in t.nodes().iter().filter(|n| n.is_terminal()) {
            let [a, b] = n.payoffs.unwrap();
            assert_eq!(a + b, 0.0);
            assert!([1.0, 2.0].contains(&a.abs()));
        }
    }

    #[test]
    fn topologies() {
        assert_eq!(Topology::Ring.edges(20).unwrap().len(), 20);
        assert_eq!(Topology::Ring.edges(2).unwrap(), vec![(0, 1)]);
        assert_eq!(Topology::Complete.edges(4).unwrap().len(), 6);
        assert!(Topology::Ring.edges(1).is_err());
        assert!(Topology::Edges(vec![(0, 0)]).edges(2).is_err());
        assert!(Topology::Edges(vec![(0, 1), (1, 0)]).edges(2).is_err());
        assert_eq!(
            Topology::Edges(vec![(2, 0)]).edges(3).unwrap(),
            vec![(0, 2)]
        );
    }

    #[test]
    fn random_trees_are_valid_and_deterministic() {
        for mode in [PayoffMode::PairwiseZeroSum, PayoffMode::CycleRedistributed] {
            let a = random_network_efg(7, 3, &Topology::Ring, 3, 2, mode).unwrap();
            let b = random_network_efg(7, 3, &Topology::Ring, 3, 2, mode).unwrap();
            assert_eq!(a, b);
            for e in &a.edges {
                assert!(validate_game_tree(&e.game).is_ok());
                assert!(validate_perfect_recall(&e.game, Seat::One).is_ok());
                assert!(validate_perfect_recall(&e.game, Seat::Two).is_ok());
            }
        }
        let c =
            random_network_efg(8, 3, &Topology::Ring, 3, 2, PayoffMode::PairwiseZeroSum).unwrap();
        assert_ne!(
            c,
            random_network_efg(7, 3, &Topology::Ring, 3, 2, PayoffMode::PairwiseZeroSum).unwrap()
        );
    }

    #[test]
    fn cycle_redistribution_breaks_single_edges() {
        let net = random_network_efg(3, 3, &Topology::Ring, 2, 2, PayoffMode::CycleRedistributed)
            .unwrap();
        let unbalanced = net.edges.iter().any(|e| {
            e.game
                .nodes()
                .iter()
                .filter_map(|n| n.payoffs)
                .any(|[a, b]| (a + b).abs() > 1e-3)
        });
        assert!(unbalanced);
        assert!(
            random_network_efg(3, 2, &Topology::Ring, 2, 2, PayoffMode::CycleRedistributed)
                .is_err()
        );
    }

    #[test]
    fn dimension_cap() {
        assert!(
            random_network_efg(1, 3, &Topology::Ring, 6, 3, PayoffMode::PairwiseZeroSum).is_err()
        );
    }
}
