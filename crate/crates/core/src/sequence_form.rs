//! Sequence-form strategy spaces (treeplexes) and bilinear payoff matrices.
//!
//! Coordinates are indexed by `(information set, action)` plus one root coordinate for
//! the empty sequence. Information sets that appear in several games of the same agent
//! share coordinates, so tying across games holds by construction.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng;

use crate::efg::{BehavioralPlan, GameTree, Owner, Seat};
use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

/// Coordinate of the empty sequence.
pub const ROOT: usize = 0;

/// Parent values at or below this are treated as unreached.
pub const REACH_TOL: f64 = 1e-12;

/// Treeplexes up to this dimension get an exact diameter by vertex enumeration.
pub const EXACT_DIAMETER_MAX_DIM: usize = 16;

/// An information set as seen by the treeplex builder.
#[derive(Debug, Clone, PartialEq)]
pub struct InfosetSpec {
    pub id: String,
    pub actions: Vec<String>,
    /// Parent sequence as `(information set, action)`; `None` hangs the set off the root.
    pub parent: Option<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Infoset {
    pub id: String,
    pub actions: Vec<String>,
    /// Coordinate of the parent sequence.
    pub parent: usize,
    /// Coordinate of the first action; actions occupy `first..first + actions.len()`.
    pub first: usize,
}

impl Infoset {
    pub fn coords(&self) -> Range<usize> {
        self.first..self.first + self.actions.len()
    }
}

/// The polytope `{x >= 0, C x = d}` of sequence-form strategies of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Treeplex {
    infosets: Vec<Infoset>,
    seq_index: BTreeMap<(String, String), usize>,
    /// Child information sets of each coordinate.
    children: Vec<Vec<usize>>,
    diameter: f64,
}

impl Treeplex {
    /// Builds a treeplex from information-set descriptions. Repeated ids must agree on
    /// actions and parent.
    pub fn from_infosets(specs: Vec<InfosetSpec>) -> Result<Self> {
        let mut by_id: BTreeMap<String, InfosetSpec> = BTreeMap::new();
        for spec in specs {
            if spec.actions.is_empty() {
                return Err(Error::Structure(format!(
                    "information set `{}` has no actions",
                    spec.id
                )));
            }
            match by_id.get(&spec.id) {
                Some(prev) if prev.actions != spec.actions => {
                    return Err(Error::Structure(format!(
                        "information set `{}` appears with different action sets",
                        spec.id
                    )))
                }
                Some(prev) if prev.parent != spec.parent => {
                    return Err(Error::Structure(format!(
                        "information set `{}` is reached through different own histories",
                        spec.id
                    )))
                }
                Some(_) => {}
                None => {
                    by_id.insert(spec.id.clone(), spec);
                }
            }
        }

        let mut depth: BTreeMap<&str, usize> = BTreeMap::new();
        for id in by_id.keys() {
            infoset_depth(id, &by_id, &mut depth, 0)?;
        }

        let mut order: Vec<&InfosetSpec> = by_id.values().collect();
        order.sort_by(|a, b| (depth[a.id.as_str()], &a.id).cmp(&(depth[b.id.as_str()], &b.id)));

        let mut seq_index = BTreeMap::new();
        let mut infosets = Vec::with_capacity(order.len());
        let mut next = 1;
        for spec in order {
            let parent = match &spec.parent {
                None => ROOT,
                Some(key) => seq_index[key],
            };
            for (k, a) in spec.actions.iter().enumerate() {
                seq_index.insert((spec.id.clone(), a.clone()), next + k);
            }
            infosets.push(Infoset {
                id: spec.id.clone(),
                actions: spec.actions.clone(),
                parent,
                first: next,
            });
            next += spec.actions.len();
        }
        let mut children = vec![Vec::new(); next];
        for (i, inf) in infosets.iter().enumerate() {
            children[inf.parent].push(i);
        }
        let mut tp = Self {
            infosets,
            seq_index,
            children,
            diameter: 0.0,
        };
        tp.diameter = tp.compute_diameter();
        Ok(tp)
    }

    pub fn dim(&self) -> usize {
        self.children.len()
    }

    pub fn infosets(&self) -> &[Infoset] {
        &self.infosets
    }

    pub fn infoset_index(&self, id: &str) -> Option<usize> {
        self.infosets.iter().position(|i| i.id == id)
    }

    /// Child information sets of a sequence coordinate.
    pub fn children(&self, coord: usize) -> &[usize] {
        &self.children[coord]
    }

    pub fn coord(&self, infoset: &str, action: &str) -> Option<usize> {
        self.seq_index
            .get(&(infoset.to_string(), action.to_string()))
            .copied()
    }

    /// Upper bound on the euclidean diameter; exact for small dimensions.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Constraint system `C x = d`: row 0 fixes the root, then one flow row per
    /// information set in coordinate order.
    pub fn constraints(&self) -> (SparseMatrix, Vec<f64>) {
        let mut t = vec![(0, ROOT, 1.0)];
        for (k, inf) in self.infosets.iter().enumerate() {
            for c in inf.coords() {
                t.push((k + 1, c, 1.0));
            }
            t.push((k + 1, inf.parent, -1.0));
        }
        let mut d = vec![0.0; self.infosets.len() + 1];
        d[0] = 1.0;
        (
            SparseMatrix::from_triplets(self.infosets.len() + 1, self.dim(), t),
            d,
        )
    }

    /// Largest violation of `C x = d` and `x >= 0`.
    pub fn infeasibility(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim());
        let mut worst = (x[ROOT] - 1.0).abs();
        for inf in &self.infosets {
            let s: f64 = x[inf.coords()].iter().sum();
            worst = worst.max((s - x[inf.parent]).abs());
        }
        x.iter().fold(worst, |w, v| w.max(-v))
    }

    /// Sequence form of the uniform behavioral plan.
    pub fn uniform(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        x[ROOT] = 1.0;
        for inf in &self.infosets {
            let share = x[inf.parent] / inf.actions.len() as f64;
            x[inf.coords()].iter_mut().for_each(|v| *v = share);
        }
        x
    }

    /// A random point: exponential weights normalised per information set, with an
    /// occasional pure choice so faces and vertices get sampled too.
    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        x[ROOT] = 1.0;
        for inf in &self.infosets {
            let k = inf.actions.len();
            let mut w: Vec<f64> = if rng.gen_bool(0.1) {
                let pick = rng.gen_range(0..k);
                (0..k).map(|a| if a == pick { 1.0 } else { 0.0 }).collect()
            } else {
                (0..k).map(|_| -libm::log(1.0 - rng.gen::<f64>())).collect()
            };
            let s: f64 = w.iter().sum();
            if s <= 0.0 {
                w = vec![1.0 / k as f64; k];
            } else {
                w.iter_mut().for_each(|v| *v /= s);
            }
            let parent = x[inf.parent];
            for (c, p) in inf.coords().zip(w) {
                x[c] = parent * p;
            }
        }
        x
    }

    /// All vertices (pure sequence-form strategies), deduplicated and sorted.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        let mut x = vec![0.0; self.dim()];
        x[ROOT] = 1.0;
        self.enumerate_vertices(0, &mut x, &mut out);
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.dedup();
        out
    }

    fn enumerate_vertices(&self, k: usize, x: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
        if k == self.infosets.len() {
            out.push(x.clone());
            return;
        }
        let inf = &self.infosets[k];
        let parent = x[inf.parent];
        for pick in 0..inf.actions.len() {
            for (a, c) in inf.coords().enumerate() {
                x[c] = if a == pick { parent } else { 0.0 };
            }
            self.enumerate_vertices(k + 1, x, out);
            if parent == 0.0 {
                break;
            }
        }
    }

    fn compute_diameter(&self) -> f64 {
        let n = self.dim();
        if n > EXACT_DIAMETER_MAX_DIM {
            return libm::sqrt(n as f64);
        }
        let verts = self.vertices();
        let mut best: f64 = 0.0;
        for i in 0..verts.len() {
            for j in i + 1..verts.len() {
                best = best.max(crate::linalg::dist2(&verts[i], &verts[j]));
            }
        }
        libm::sqrt(best)
    }
}

fn infoset_depth<'a>(
    id: &'a str,
    by_id: &'a BTreeMap<String, InfosetSpec>,
    memo: &mut BTreeMap<&'a str, usize>,
    guard: usize,
) -> Result<usize> {
    if let Some(&d) = memo.get(id) {
        return Ok(d);
    }
    if guard > by_id.len() {
        return Err(Error::Structure(format!(
            "information set `{id}` is its own ancestor"
        )));
    }
    let d = match &by_id[id].parent {
        None => 0,
        Some((pid, pa)) => {
            let parent = by_id.get(pid).ok_or_else(|| {
                Error::Structure(format!("information set `{id}` has unknown parent `{pid}`"))
            })?;
            if !parent.actions.contains(pa) {
                return Err(Error::Structure(format!(
                    "information set `{id}` hangs off missing action `{pa}` of `{pid}`"
                )));
            }
            infoset_depth(pid.as_str(), by_id, memo, guard + 1)? + 1
        }
    };
    memo.insert(id, d);
    Ok(d)
}

/// Collects the information sets `seat` owns in `tree`, with their parent sequences.
/// Zero-probability chance branches are pruned.
pub fn collect_infosets(tree: &GameTree, seat: Seat) -> Result<Vec<InfosetSpec>> {
    let mut out = Vec::new();
    let mut stack: Vec<(usize, Option<(String, String)>)> = vec![(tree.root(), None)];
    while let Some((i, last)) = stack.pop() {
        let node = tree.node(i);
        match node.owner {
            Owner::Terminal => {}
            Owner::Chance => {
                let probs = node.chance_probs.as_deref().ok_or_else(|| {
                    Error::Structure(format!("chance node {i} has no probabilities"))
                })?;
                for (act, &p) in node.actions.iter().zip(probs) {
                    if p > 0.0 {
                        stack.push((act.child, last.clone()));
                    }
                }
            }
            Owner::Player(s) if s == seat => {
                let id = node.infoset.clone().ok_or_else(|| {
                    Error::Structure(format!("decision node {i} has no information set"))
                })?;
                out.push(InfosetSpec {
                    id: id.clone(),
                    actions: node.action_names().map(String::from).collect(),
                    parent: last.clone(),
                });
                for act in &node.actions {
                    stack.push((act.child, Some((id.clone(), act.name.clone()))));
                }
            }
            Owner::Player(_) => {
                for act in &node.actions {
                    stack.push((act.child, last.clone()));
                }
            }
        }
    }
    Ok(out)
}

/// Compiles the treeplex of one agent from every game it plays, given its seat in each.
pub fn compile_treeplex(games: &[(&GameTree, Seat)]) -> Result<Treeplex> {
    let mut specs = Vec::new();
    for (tree, seat) in games {
        specs.extend(collect_infosets(tree, *seat)?);
    }
    Treeplex::from_infosets(specs)
}

/// A sequence-form strategy of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceStrategy {
    pub values: Vec<f64>,
}

/// Realisation probabilities of a behavioral plan: products of the plan's
/// probabilities along the agent's own action path.
pub fn behavioral_to_sequence(plan: &BehavioralPlan, tp: &Treeplex) -> Result<SequenceStrategy> {
    let mut x = vec![0.0; tp.dim()];
    x[ROOT] = 1.0;
    for inf in tp.infosets() {
        let dist = plan
            .get(&inf.id)
            .ok_or_else(|| Error::MissingInfoset(inf.id.clone()))?;
        if dist.len() != inf.actions.len() {
            return Err(Error::Structure(format!(
                "plan for `{}` has {} probabilities, expected {}",
                inf.id,
                dist.len(),
                inf.actions.len()
            )));
        }
        let parent = x[inf.parent];
        for (c, p) in inf.coords().zip(dist) {
            x[c] = parent * p;
        }
    }
    Ok(SequenceStrategy { values: x })
}

/// Behavioral plan of a sequence-form strategy. Information sets whose parent value is
/// at most [`REACH_TOL`] get the uniform distribution.
pub fn sequence_to_behavioral(x: &[f64], tp: &Treeplex) -> BehavioralPlan {
    assert_eq!(x.len(), tp.dim());
    let mut plan = BehavioralPlan::new();
    for inf in tp.infosets() {
        let k = inf.actions.len();
        let parent = x[inf.parent];
        let mut dist: Vec<f64> = if parent > REACH_TOL {
            x[inf.coords()]
                .iter()
                .map(|v| v.max(0.0) / parent)
                .collect()
        } else {
            vec![1.0 / k as f64; k]
        };
        let s: f64 = dist.iter().sum();
        if s > 0.0 {
            dist.iter_mut().for_each(|v| *v /= s);
        } else {
            dist = vec![1.0 / k as f64; k];
        }
        plan.insert(inf.id.clone(), dist);
    }
    plan
}

/// Bilinear payoff matrix between two agents' treeplexes.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffMatrix {
    matrix: SparseMatrix,
}

impl PayoffMatrix {
    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }

    /// `x_u^T A x_v`
    pub fn value(&self, xu: &[f64], xv: &[f64]) -> f64 {
        self.matrix.bilinear(xu, xv)
    }
}

/// Builds `A^{uv}` for the agent in `seat_u` of `game`. Each terminal contributes its
/// chance-weighted payoff at the pair of last sequences leading to it.
pub fn build_edge_payoff_matrix(
    game: &GameTree,
    seat_u: Seat,
    tp_u: &Treeplex,
    tp_v: &Treeplex,
) -> Result<PayoffMatrix> {
    let tps = match seat_u {
        Seat::One => [tp_u, tp_v],
        Seat::Two => [tp_v, tp_u],
    };
    let mut triplets = Vec::new();
    // (node, chance reach, last sequence per seat)
    let mut stack = vec![(game.root(), 1.0, [ROOT, ROOT])];
    while let Some((i, reach, seqs)) = stack.pop() {
        let node = game.node(i);
        match node.owner {
            Owner::Terminal => {
                let pay = node
                    .payoffs
                    .ok_or_else(|| Error::Structure(format!("terminal node {i} has no payoffs")))?;
                let (r, c) = match seat_u {
                    Seat::One => (seqs[0], seqs[1]),
                    Seat::Two => (seqs[1], seqs[0]),
                };
                triplets.push((r, c, reach * pay[seat_u.index()]));
            }
            Owner::Chance => {
                let probs = node.chance_probs.as_deref().ok_or_else(|| {
                    Error::Structure(format!("chance node {i} has no probabilities"))
                })?;
                for (act, &p) in node.actions.iter().zip(probs) {
                    if p > 0.0 {
                        stack.push((act.child, reach * p, seqs));
                    }
                }
            }
            Owner::Player(s) => {
                let id = node.infoset.as_deref().ok_or_else(|| {
                    Error::Structure(format!("decision node {i} has no information set"))
                })?;
                for act in &node.actions {
                    let coord = tps[s.index()].coord(id, &act.name).ok_or_else(|| {
                        Error::Structure(format!(
                            "sequence (`{id}`, `{}`) is not in the {s:?} treeplex",
                            act.name
                        ))
                    })?;
                    let mut next = seqs;
                    next[s.index()] = coord;
                    stack.push((act.child, reach, next));
                }
            }
        }
    }
    Ok(PayoffMatrix {
        matrix: SparseMatrix::from_triplets(tp_u.dim(), tp_v.dim(), triplets),
    })
}

/// Cartesian product of per-agent treeplexes, laid out block after block.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductTreeplex {
    blocks: Vec<Treeplex>,
    offsets: Vec<usize>,
}

impl ProductTreeplex {
    pub fn new(blocks: Vec<Treeplex>) -> Self {
        let mut offsets = vec![0];
        for b in &blocks {
            offsets.push(offsets.last().unwrap() + b.dim());
        }
        Self { blocks, offsets }
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[Treeplex] {
        &self.blocks
    }

    pub fn block(&self, u: usize) -> &Treeplex {
        &self.blocks[u]
    }

    pub fn range(&self, u: usize) -> Range<usize> {
        self.offsets[u]..self.offsets[u + 1]
    }

    pub fn offset(&self, u: usize) -> usize {
        self.offsets[u]
    }

    pub fn uniform(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| b.uniform()).collect()
    }

    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.blocks
            .iter()
            .flat_map(|b| b.random_point(rng))
            .collect()
    }

    pub fn infeasibility(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim());
        (0..self.len())
            .map(|u| self.blocks[u].infeasibility(&x[self.range(u)]))
            .fold(0.0, f64::max)
    }

    /// Block-diagonal constraint system of the product.
    pub fn constraints(&self) -> (SparseMatrix, Vec<f64>) {
        let mut t = Vec::new();
        let mut d = Vec::new();
        for (u, b) in self.blocks.iter().enumerate() {
            let (c, du) = b.constraints();
            let row0 = d.len();
            t.extend(
                c.triplets()
                    .map(|(r, col, v)| (row0 + r, self.offsets[u] + col, v)),
            );
            d.extend(du);
        }
        (SparseMatrix::from_triplets(d.len(), self.dim(), t), d)
    }

    /// Diameter bound of the product.
    pub fn diameter(&self) -> f64 {
        libm::sqrt(
            self.blocks
                .iter()
                .map(|b| b.diameter() * b.diameter())
                .sum(),
        )
    }
}
