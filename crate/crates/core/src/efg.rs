//! Two-player extensive form games with chance nodes and information sets.
//!
//! A [`GameTree`] is an arena of [`Node`]s addressed by index. Trees are not validated on
//! construction so that malformed games can be built and inspected; run
//! [`validate_game_tree`] and [`validate_perfect_recall`] before compiling one.
//!
//! Information-set ids are scoped to the seat that owns them: a player-one node and a
//! player-two node may carry the same id without being in the same set. Inside a network
//! this lets one agent reuse a single plan regardless of which seat it takes on an edge.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Tolerance on probability vectors summing to one.
pub const PROB_TOL: f64 = 1e-12;

/// One of the two player seats of a two-player game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Seat {
    One,
    Two,
}

impl Seat {
    pub fn index(self) -> usize {
        match self {
            Seat::One => 0,
            Seat::Two => 1,
        }
    }

    pub fn other(self) -> Seat {
        match self {
            Seat::One => Seat::Two,
            Seat::Two => Seat::One,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Owner {
    Player(Seat),
    Chance,
    Terminal,
}

impl fmt::Display for Owner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Owner::Player(Seat::One) => "player1",
            Owner::Player(Seat::Two) => "player2",
            Owner::Chance => "chance",
            Owner::Terminal => "terminal",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub name: String,
    pub child: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub owner: Owner,
    pub infoset: Option<String>,
    pub actions: Vec<Action>,
    /// One probability per action, chance nodes only.
    pub chance_probs: Option<Vec<f64>>,
    /// `(u1, u2)`, terminal nodes only.
    pub payoffs: Option<[f64; 2]>,
}

impl Node {
    pub fn decision(seat: Seat, infoset: impl Into<String>, actions: Vec<Action>) -> Self {
        Self {
            owner: Owner::Player(seat),
            infoset: Some(infoset.into()),
            actions,
            chance_probs: None,
            payoffs: None,
        }
    }

    pub fn chance(actions: Vec<Action>, probs: Vec<f64>) -> Self {
        Self {
            owner: Owner::Chance,
            infoset: None,
            actions,
            chance_probs: Some(probs),
            payoffs: None,
        }
    }

    pub fn terminal(u1: f64, u2: f64) -> Self {
        Self {
            owner: Owner::Terminal,
            infoset: None,
            actions: Vec::new(),
            chance_probs: None,
            payoffs: Some([u1, u2]),
        }
    }

    pub fn seat(&self) -> Option<Seat> {
        match self.owner {
            Owner::Player(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.owner == Owner::Terminal
    }

    pub fn action_names(&self) -> impl Iterator<Item = &str> {
        self.actions.iter().map(|a| a.name.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameTree {
    nodes: Vec<Node>,
    root: usize,
}

impl GameTree {
    pub fn new(nodes: Vec<Node>, root: usize) -> Self {
        Self { nodes, root }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn nodes_mut(&mut self) -> &mut [Node] {
        &mut self.nodes
    }

    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Largest absolute terminal payoff.
    pub fn payoff_scale(&self) -> f64 {
        self.nodes
            .iter()
            .filter_map(|n| n.payoffs)
            .flat_map(|p| p.into_iter())
            .fold(0.0, |m, v| f64::max(m, v.abs()))
    }

    /// Parent pointers `(parent, action index)`. Only meaningful for valid trees.
    pub fn parents(&self) -> Vec<Option<(usize, usize)>> {
        let mut parents = vec![None; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            for (a, act) in n.actions.iter().enumerate() {
                if act.child < parents.len() {
                    parents[act.child] = Some((i, a));
                }
            }
        }
        parents
    }

    /// The seat's own decisions on the path to `node`, root first, as
    /// `(decision node, action index)`. Excludes `node` itself.
    pub fn own_history(
        &self,
        parents: &[Option<(usize, usize)>],
        node: usize,
        seat: Seat,
    ) -> Vec<(usize, usize)> {
        let mut hist = Vec::new();
        let mut cur = node;
        while let Some((p, a)) = parents[cur] {
            if self.nodes[p].seat() == Some(seat) {
                hist.push((p, a));
            }
            cur = p;
        }
        hist.reverse();
        hist
    }

    /// Decision nodes of a seat grouped by information set id, in node order.
    pub fn infosets(&self, seat: Seat) -> BTreeMap<&str, Vec<usize>> {
        let mut map: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if n.seat() == Some(seat) {
                if let Some(id) = n.infoset.as_deref() {
                    map.entry(id).or_default().push(i);
                }
            }
        }
        map
    }
}

/// Incremental construction of a [`GameTree`], children first.
#[derive(Debug, Default)]
pub struct TreeBuilder {
    nodes: Vec<Node>,
}

impl TreeBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, node: Node) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    pub fn terminal(&mut self, u1: f64, u2: f64) -> usize {
        self.push(Node::terminal(u1, u2))
    }

    pub fn decision(
        &mut self,
        seat: Seat,
        infoset: impl Into<String>,
        actions: &[(&str, usize)],
    ) -> usize {
        self.push(Node::decision(seat, infoset, to_actions(actions)))
    }

    pub fn chance(&mut self, outcomes: &[(&str, f64, usize)]) -> usize {
        let actions = outcomes
            .iter()
            .map(|(n, _, c)| Action {
                name: n.to_string(),
                child: *c,
            })
            .collect();
        let probs = outcomes.iter().map(|o| o.1).collect();
        self.push(Node::chance(actions, probs))
    }

    pub fn finish(self, root: usize) -> GameTree {
        GameTree::new(self.nodes, root)
    }
}

fn to_actions(actions: &[(&str, usize)]) -> Vec<Action> {
    actions
        .iter()
        .map(|(n, c)| Action {
            name: n.to_string(),
            child: *c,
        })
        .collect()
}

/// Rule identifiers for [`Violation`]s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Rule {
    RootOutOfRange,
    DanglingChild,
    NotATree,
    TerminalHasActions,
    MissingActions,
    DuplicateAction,
    PayoffPlacement,
    ChanceProbPlacement,
    ChanceDistribution,
    InfosetPlacement,
    InfosetActionMismatch,
    /// First perfect-recall / consistency condition: equal own-history length.
    RecallLength,
    /// Second condition: matching information sets along the own history.
    RecallInfoset,
    /// Third condition: matching actions along the own history.
    RecallAction,
    EdgeEndpoint,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::RootOutOfRange => "root-out-of-range",
            Rule::DanglingChild => "dangling-child",
            Rule::NotATree => "not-a-tree",
            Rule::TerminalHasActions => "terminal-has-actions",
            Rule::MissingActions => "missing-actions",
            Rule::DuplicateAction => "duplicate-action",
            Rule::PayoffPlacement => "payoff-placement",
            Rule::ChanceProbPlacement => "chance-prob-placement",
            Rule::ChanceDistribution => "chance-distribution",
            Rule::InfosetPlacement => "infoset-placement",
            Rule::InfosetActionMismatch => "infoset-action-mismatch",
            Rule::RecallLength => "recall-length",
            Rule::RecallInfoset => "recall-infoset",
            Rule::RecallAction => "recall-action",
            Rule::EdgeEndpoint => "edge-endpoint",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub rule: Rule,
    pub message: String,
    pub nodes: Vec<usize>,
    pub infosets: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, rule: Rule) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    pub fn push(&mut self, rule: Rule, message: String, nodes: Vec<usize>, infosets: Vec<String>) {
        self.violations.push(Violation {
            rule,
            message,
            nodes,
            infosets,
        });
    }

    pub fn merge(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "[{}] {}", v.rule, v.message)?;
        }
        Ok(())
    }
}

/// Checks every structural invariant of a game tree and reports all failures.
pub fn validate_game_tree(tree: &GameTree) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = tree.len();
    if tree.root >= n {
        report.push(
            Rule::RootOutOfRange,
            format!(
                "root {} is not a node index (tree has {n} nodes)",
                tree.root
            ),
            vec![],
            vec![],
        );
        return report;
    }

    let mut in_degree = vec![0usize; n];
    for (i, node) in tree.nodes.iter().enumerate() {
        for act in &node.actions {
            if act.child >= n {
                report.push(
                    Rule::DanglingChild,
                    format!(
                        "node {i} action `{}` points at missing node {}",
                        act.name, act.child
                    ),
                    vec![i],
                    vec![],
                );
            } else {
                in_degree[act.child] += 1;
            }
        }
    }
    if in_degree[tree.root] > 0 {
        report.push(
            Rule::NotATree,
            format!("root {} has a parent", tree.root),
            vec![tree.root],
            vec![],
        );
    }
    for (i, &d) in in_degree.iter().enumerate() {
        if d > 1 {
            report.push(
                Rule::NotATree,
                format!("node {i} has {d} parents"),
                vec![i],
                vec![],
            );
        }
    }
    // reachability; a self-loop or cycle shows up as a revisit
    let mut seen = vec![false; n];
    let mut stack = vec![tree.root];
    seen[tree.root] = true;
    while let Some(i) = stack.pop() {
        for act in &tree.nodes[i].actions {
            if act.child >= n {
                continue;
            }
            if seen[act.child] {
                if act.child == i {
                    report.push(
                        Rule::NotATree,
                        format!("node {i} is its own child"),
                        vec![i],
                        vec![],
                    );
                }
                continue;
            }
            seen[act.child] = true;
            stack.push(act.child);
        }
    }
    for (i, reached) in seen.iter().enumerate() {
        if !reached {
            report.push(
                Rule::NotATree,
                format!("node {i} is not reachable from the root"),
                vec![i],
                vec![],
            );
        }
    }

    for (i, node) in tree.nodes.iter().enumerate() {
        validate_node(i, node, &mut report);
    }

    for seat in [Seat::One, Seat::Two] {
        for (id, members) in tree.infosets(seat) {
            let first = &tree.nodes[members[0]];
            for &m in &members[1..] {
                if !tree.nodes[m].action_names().eq(first.action_names()) {
                    report.push(
                        Rule::InfosetActionMismatch,
                        format!(
                            "nodes {} and {m} share information set `{id}` but have different actions",
                            members[0]
                        ),
                        vec![members[0], m],
                        vec![id.to_string()],
                    );
                }
            }
        }
    }
    report
}

fn validate_node(i: usize, node: &Node, report: &mut ValidationReport) {
    let terminal = node.owner == Owner::Terminal;
    if terminal && !node.actions.is_empty() {
        report.push(
            Rule::TerminalHasActions,
            format!("terminal node {i} has {} action(s)", node.actions.len()),
            vec![i],
            vec![],
        );
    }
    if !terminal && node.actions.is_empty() {
        report.push(
            Rule::MissingActions,
            format!("{} node {i} has no actions", node.owner),
            vec![i],
            vec![],
        );
    }
    for (a, act) in node.actions.iter().enumerate() {
        if node.actions[..a].iter().any(|b| b.name == act.name) {
            report.push(
                Rule::DuplicateAction,
                format!("node {i} repeats action `{}`", act.name),
                vec![i],
                vec![],
            );
        }
    }
    match (terminal, node.payoffs) {
        (true, None) => report.push(
            Rule::PayoffPlacement,
            format!("terminal node {i} has no payoffs"),
            vec![i],
            vec![],
        ),
        (true, Some(p)) if !p.iter().all(|v| v.is_finite()) => report.push(
            Rule::PayoffPlacement,
            format!("terminal node {i} has non-finite payoffs"),
            vec![i],
            vec![],
        ),
        (false, Some(_)) => report.push(
            Rule::PayoffPlacement,
            format!("non-terminal node {i} carries payoffs"),
            vec![i],
            vec![],
        ),
        _ => {}
    }
    let chance = node.owner == Owner::Chance;
    match (&node.chance_probs, chance) {
        (None, true) => report.push(
            Rule::ChanceProbPlacement,
            format!("chance node {i} has no probabilities"),
            vec![i],
            vec![],
        ),
        (Some(_), false) => report.push(
            Rule::ChanceProbPlacement,
            format!("{} node {i} carries chance probabilities", node.owner),
            vec![i],
            vec![],
        ),
        (Some(p), true) => {
            let sum: f64 = p.iter().sum();
            if p.len() != node.actions.len()
                || p.iter().any(|v| !v.is_finite() || *v < 0.0)
                || (sum - 1.0).abs() > PROB_TOL
            {
                report.push(
                    Rule::ChanceDistribution,
                    format!(
                        "chance node {i} probabilities are not a distribution over its actions"
                    ),
                    vec![i],
                    vec![],
                );
            }
        }
        (None, false) => {}
    }
    match (node.owner, &node.infoset) {
        (Owner::Player(_), None) => report.push(
            Rule::InfosetPlacement,
            format!("decision node {i} has no information set"),
            vec![i],
            vec![],
        ),
        (Owner::Chance | Owner::Terminal, Some(id)) => report.push(
            Rule::InfosetPlacement,
            format!("{} node {i} carries information set `{id}`", node.owner),
            vec![i],
            vec![id.clone()],
        ),
        _ => {}
    }
}

/// Compares two own-histories under the three recall conditions. Returns the first
/// failing rule and a description.
pub(crate) fn compare_histories(
    a: (&GameTree, &[(usize, usize)]),
    b: (&GameTree, &[(usize, usize)]),
) -> Option<(Rule, String)> {
    let (ta, ha) = a;
    let (tb, hb) = b;
    if ha.len() != hb.len() {
        return Some((
            Rule::RecallLength,
            format!("own histories have lengths {} and {}", ha.len(), hb.len()),
        ));
    }
    for (l, (&(p, pa), &(q, qa))) in ha.iter().zip(hb).enumerate() {
        let (ip, iq) = (&ta.nodes[p].infoset, &tb.nodes[q].infoset);
        if ip != iq {
            return Some((
                Rule::RecallInfoset,
                format!("step {l} of the own histories passes information sets {ip:?} and {iq:?}"),
            ));
        }
        let (ap, aq) = (&ta.nodes[p].actions[pa].name, &tb.nodes[q].actions[qa].name);
        if ap != aq {
            return Some((
                Rule::RecallAction,
                format!("step {l} of the own histories takes actions `{ap}` and `{aq}`"),
            ));
        }
    }
    None
}

/// Checks that `seat` never forgets its own earlier information sets or actions.
/// Assumes the tree passes [`validate_game_tree`].
pub fn validate_perfect_recall(tree: &GameTree, seat: Seat) -> ValidationReport {
    let mut report = ValidationReport::default();
    let parents = tree.parents();
    for (id, members) in tree.infosets(seat) {
        let first = members[0];
        let h0 = tree.own_history(&parents, first, seat);
        for &m in &members[1..] {
            let hm = tree.own_history(&parents, m, seat);
            if let Some((rule, why)) = compare_histories((tree, &h0), (tree, &hm)) {
                report.push(
                    rule,
                    format!("nodes {first} and {m} in information set `{id}`: {why}"),
                    vec![first, m],
                    vec![id.to_string()],
                );
            }
        }
    }
    report
}

/// Per-information-set action distributions for one seat (or one network agent).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BehavioralPlan {
    dists: BTreeMap<String, Vec<f64>>,
}

impl BehavioralPlan {
    pub fn new() -> Self {
        Self::default()
    }

    /// Uniform play at every information set the seat owns in `tree`.
    pub fn uniform(tree: &GameTree, seat: Seat) -> Self {
        let mut plan = Self::new();
        for (id, members) in tree.infosets(seat) {
            let k = tree.nodes[members[0]].actions.len();
            plan.insert(id, vec![1.0 / k as f64; k]);
        }
        plan
    }

    pub fn insert(&mut self, infoset: impl Into<String>, dist: Vec<f64>) {
        self.dists.insert(infoset.into(), dist);
    }

    pub fn get(&self, infoset: &str) -> Option<&[f64]> {
        self.dists.get(infoset).map(|v| v.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.dists.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.dists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dists.is_empty()
    }

    /// True when every distribution is nonnegative and sums to one within [`PROB_TOL`].
    pub fn is_valid(&self) -> bool {
        self.dists.values().all(|d| {
            d.iter().all(|p| p.is_finite() && *p >= 0.0)
                && (d.iter().sum::<f64>() - 1.0).abs() <= PROB_TOL
        })
    }
}

/// Terminal reach probabilities `(terminal node, probability)` with chance folded in.
/// Zero-probability branches are skipped.
pub fn reach_probabilities(
    tree: &GameTree,
    plan1: &BehavioralPlan,
    plan2: &BehavioralPlan,
) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::new();
    let mut stack = vec![(tree.root, 1.0)];
    while let Some((i, reach)) = stack.pop() {
        let node = &tree.nodes[i];
        let probs: &[f64] = match node.owner {
            Owner::Terminal => {
                out.push((i, reach));
                continue;
            }
            Owner::Chance => node
                .chance_probs
                .as_deref()
                .ok_or_else(|| Error::Structure(format!("chance node {i} has no probabilities")))?,
            Owner::Player(seat) => {
                let plan = if seat == Seat::One { plan1 } else { plan2 };
                let id = node.infoset.as_deref().ok_or_else(|| {
                    Error::Structure(format!("decision node {i} has no information set"))
                })?;
                plan.get(id)
                    .ok_or_else(|| Error::MissingInfoset(id.to_string()))?
            }
        };
        if probs.len() != node.actions.len() {
            return Err(Error::Structure(format!(
                "node {i} has {} actions but {} probabilities",
                node.actions.len(),
                probs.len()
            )));
        }
        for (act, &p) in node.actions.iter().zip(probs) {
            if p > 0.0 {
                stack.push((act.child, reach * p));
            }
        }
    }
    out.sort_by_key(|e| e.0);
    Ok(out)
}

/// Expected payoffs `(U1, U2)` of a plan pair.
pub fn expected_payoff(
    tree: &GameTree,
    plan1: &BehavioralPlan,
    plan2: &BehavioralPlan,
) -> Result<(f64, f64)> {
    let mut u = (0.0, 0.0);
    for (z, p) in reach_probabilities(tree, plan1, plan2)? {
        let [u1, u2] = tree.nodes[z]
            .payoffs
            .ok_or_else(|| Error::Structure(format!("terminal node {z} has no payoffs")))?;
        u.0 += p * u1;
        u.1 += p * u2;
    }
    Ok(u)
}
