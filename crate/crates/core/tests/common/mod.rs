//! Independent oracles and fixtures shared by the integration tests.
//!
//! Nothing here calls the library's payoff, sequence-form or projection code; the
//! oracles work straight from the game trees and information-set lists.

#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use nzefg_core::sequence_form::InfosetSpec;
use nzefg_core::{
    assemble, kuhn_poker, matching_pennies, network_of, random_network_efg, BehavioralPlan,
    GameTree, NetworkGame, Owner, PayoffMode, Seat, Topology, Treeplex,
};
use rand::Rng;

pub fn mp_net(n: usize) -> NetworkGame {
    assemble(&network_of(&Topology::Ring, n, matching_pennies()).unwrap()).unwrap()
}

pub fn kuhn_net(n: usize) -> NetworkGame {
    assemble(&network_of(&Topology::Ring, n, kuhn_poker()).unwrap()).unwrap()
}

/// Ten seeded random zero-sum networks of mixed shape.
pub fn random_nets() -> Vec<(String, NetworkGame)> {
    (0..10u64)
        .map(|seed| {
            let n = 3 + (seed as usize % 2);
            let topo = if seed % 3 == 2 {
                Topology::Complete
            } else {
                Topology::Ring
            };
            let depth = 2 + (seed as usize % 2);
            let mode = if seed % 4 == 3 {
                PayoffMode::CycleRedistributed
            } else {
                PayoffMode::PairwiseZeroSum
            };
            let desc = random_network_efg(seed, n, &topo, depth, 2, mode).unwrap();
            (format!("random-{seed}"), assemble(&desc).unwrap())
        })
        .collect()
}

/// Matching pennies ring(4), Kuhn ring(5) and the ten random networks.
pub fn fixtures() -> Vec<(String, NetworkGame)> {
    let mut out = vec![
        ("mp-ring4".to_string(), mp_net(4)),
        ("kuhn-ring5".to_string(), kuhn_net(5)),
    ];
    out.extend(random_nets());
    out
}

fn parents(tree: &GameTree) -> Vec<Option<(usize, usize)>> {
    let mut p = vec![None; tree.len()];
    for (i, node) in tree.nodes().iter().enumerate() {
        for (k, a) in node.actions.iter().enumerate() {
            p[a.child] = Some((i, k));
        }
    }
    p
}

/// Expected payoffs by walking every root-to-leaf path.
pub fn path_payoff(tree: &GameTree, plan1: &BehavioralPlan, plan2: &BehavioralPlan) -> [f64; 2] {
    fn walk(
        tree: &GameTree,
        i: usize,
        reach: f64,
        plans: [&BehavioralPlan; 2],
        acc: &mut [f64; 2],
    ) {
        let node = tree.node(i);
        match node.owner {
            Owner::Terminal => {
                let u = node.payoffs.unwrap();
                acc[0] += reach * u[0];
                acc[1] += reach * u[1];
            }
            Owner::Chance => {
                let probs = node.chance_probs.as_ref().unwrap();
                for (a, p) in node.actions.iter().zip(probs) {
                    walk(tree, a.child, reach * p, plans, acc);
                }
            }
            Owner::Player(seat) => {
                let dist = plans[seat.index()]
                    .get(node.infoset.as_ref().unwrap())
                    .unwrap();
                for (a, p) in node.actions.iter().zip(dist) {
                    walk(tree, a.child, reach * p, plans, acc);
                }
            }
        }
    }
    let mut acc = [0.0; 2];
    walk(tree, tree.root(), 1.0, [plan1, plan2], &mut acc);
    acc
}

/// Agent payoffs of a network, summing path payoffs over the incident edges.
pub fn network_path_payoffs(net: &NetworkGame, plans: &[BehavioralPlan]) -> Vec<f64> {
    let mut out = vec![0.0; net.n_agents()];
    for e in net.edges() {
        let u = path_payoff(&e.game, &plans[e.u], &plans[e.v]);
        out[e.u] += u[0];
        out[e.v] += u[1];
    }
    out
}

/// Sequence form of `plan` built from products of own action probabilities along
/// the path to each decision node.
pub fn sequence_by_paths(
    games: &[(&GameTree, Seat)],
    plan: &BehavioralPlan,
    tp: &Treeplex,
) -> Vec<f64> {
    let mut x = vec![f64::NAN; tp.dim()];
    x[0] = 1.0;
    for &(tree, seat) in games {
        let par = parents(tree);
        for (i, node) in tree.nodes().iter().enumerate() {
            if node.owner != Owner::Player(seat) {
                continue;
            }
            let mut reach = 1.0;
            let mut c = i;
            while let Some((p, k)) = par[c] {
                let pn = tree.node(p);
                if pn.owner == Owner::Player(seat) {
                    reach *= plan.get(pn.infoset.as_ref().unwrap()).unwrap()[k];
                }
                c = p;
            }
            let id = node.infoset.as_ref().unwrap();
            for (k, a) in node.actions.iter().enumerate() {
                x[tp.coord(id, &a.name).unwrap()] = reach * plan.get(id).unwrap()[k];
            }
        }
    }
    x
}

/// Uniformly random distribution at every information set of `tp`, bounded away from 0.
pub fn random_plan<R: Rng>(tp: &Treeplex, rng: &mut R) -> BehavioralPlan {
    let mut plan = BehavioralPlan::new();
    for inf in tp.infosets() {
        let w: Vec<f64> = (0..inf.actions.len())
            .map(|_| rng.gen_range(0.05..1.0))
            .collect();
        let s: f64 = w.iter().sum();
        plan.insert(inf.id.clone(), w.into_iter().map(|v| v / s).collect());
    }
    plan
}

/// Flow constraints `C x = d` rebuilt from the information-set list.
pub fn flow_constraints(tp: &Treeplex) -> (DMatrix<f64>, DVector<f64>) {
    let n = tp.dim();
    let m = 1 + tp.infosets().len();
    let mut c = DMatrix::zeros(m, n);
    let mut d = DVector::zeros(m);
    c[(0, 0)] = 1.0;
    d[0] = 1.0;
    for (r, inf) in tp.infosets().iter().enumerate() {
        c[(r + 1, inf.parent)] -= 1.0;
        for k in inf.coords() {
            c[(r + 1, k)] += 1.0;
        }
    }
    (c, d)
}

/// Euclidean projection onto the treeplex by enumerating every zero pattern of the
/// non-root coordinates and solving the equality-constrained KKT system on each face.
pub fn project_bruteforce(tp: &Treeplex, p: &[f64]) -> Vec<f64> {
    let n = tp.dim();
    assert!(n <= 12, "brute force is exponential in the dimension");
    let (c, d) = flow_constraints(tp);
    let m = c.nrows();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << (n - 1)) {
        let free: Vec<usize> = (0..n)
            .filter(|&i| i == 0 || mask & (1 << (i - 1)) == 0)
            .collect();
        let f = free.len();
        let mut k = DMatrix::zeros(f + m, f + m);
        let mut rhs = DVector::zeros(f + m);
        for (a, &i) in free.iter().enumerate() {
            k[(a, a)] = 1.0;
            rhs[a] = p[i];
            for r in 0..m {
                k[(a, f + r)] = c[(r, i)];
                k[(f + r, a)] = c[(r, i)];
            }
        }
        for r in 0..m {
            rhs[f + r] = d[r];
        }
        let Ok(sol) = k.svd(true, true).solve(&rhs, 1e-12) else {
            continue;
        };
        let mut x = vec![0.0; n];
        for (a, &i) in free.iter().enumerate() {
            x[i] = sol[a];
        }
        let xv = DVector::from_column_slice(&x);
        if (&c * &xv - &d).amax() > 1e-9 || x.iter().any(|&v| v < -1e-12) {
            continue;
        }
        let obj: f64 = x.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(o, _)| obj < *o - 1e-15) {
            best = Some((obj, x));
        }
    }
    best.expect("some face is feasible").1
}

/// Random treeplex of dimension at most `max_dim`, grown by hanging information sets
/// of two or three actions under random existing sequences.
pub fn random_treeplex<R: Rng>(rng: &mut R, max_dim: usize) -> Treeplex {
    let mut specs: Vec<InfosetSpec> = Vec::new();
    let mut seqs: Vec<Option<(String, String)>> = vec![None];
    let mut dim = 1;
    loop {
        let k = rng.gen_range(2..=3);
        if dim + k > max_dim {
            if dim + 2 > max_dim || !specs.is_empty() && rng.gen_bool(0.5) {
                break;
            }
            continue;
        }
        let id = format!("I{}", specs.len());
        let parent = seqs[rng.gen_range(0..seqs.len())].clone();
        let actions: Vec<String> = (0..k).map(|a| format!("a{a}")).collect();
        for a in &actions {
            seqs.push(Some((id.clone(), a.clone())));
        }
        specs.push(InfosetSpec {
            id,
            actions,
            parent,
        });
        dim += k;
        if rng.gen_bool(0.2) {
            break;
        }
    }
    Treeplex::from_infosets(specs).unwrap()
}

/// Payoff matrices of both seats over (seat-one sequence, seat-two sequence) pairs,
/// accumulated leaf by leaf from chance-weighted terminal payoffs.
pub fn payoff_by_leaves(tree: &GameTree, tp1: &Treeplex, tp2: &Treeplex) -> [DMatrix<f64>; 2] {
    let par = parents(tree);
    let mut a = [
        DMatrix::zeros(tp1.dim(), tp2.dim()),
        DMatrix::zeros(tp1.dim(), tp2.dim()),
    ];
    for (i, node) in tree.nodes().iter().enumerate() {
        if node.owner != Owner::Terminal {
            continue;
        }
        let mut last = [0usize, 0usize];
        let mut seen = [false, false];
        let mut chance = 1.0;
        let mut c = i;
        while let Some((p, k)) = par[c] {
            let pn = tree.node(p);
            match pn.owner {
                Owner::Chance => chance *= pn.chance_probs.as_ref().unwrap()[k],
                Owner::Player(s) if !seen[s.index()] => {
                    seen[s.index()] = true;
                    let tp = if s == Seat::One { tp1 } else { tp2 };
                    last[s.index()] = tp
                        .coord(pn.infoset.as_ref().unwrap(), &pn.actions[k].name)
                        .unwrap();
                }
                _ => {}
            }
            c = p;
        }
        let u = node.payoffs.unwrap();
        a[0][(last[0], last[1])] += chance * u[0];
        a[1][(last[0], last[1])] += chance * u[1];
    }
    a
}

/// Dense `R` assembled from leaf-by-leaf edge matrices.
pub fn r_by_leaves(net: &NetworkGame) -> DMatrix<f64> {
    let n = net.dim();
    let mut r = DMatrix::zeros(n, n);
    for e in net.edges() {
        let [a1, a2] = payoff_by_leaves(&e.game, net.treeplex(e.u), net.treeplex(e.v));
        let (ou, ov) = (net.product().offset(e.u), net.product().offset(e.v));
        for i in 0..a1.nrows() {
            for j in 0..a1.ncols() {
                r[(ou + i, ov + j)] -= a1[(i, j)];
                r[(ov + j, ou + i)] -= a2[(i, j)];
            }
        }
    }
    r
}

/// Dense two-phase simplex for `max cᵀz s.t. A z = b, z >= 0`. Dantzig pricing with a
/// switch to Bland's rule after a run of degenerate pivots.
pub fn simplex_max(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &DVector<f64>,
) -> Option<(f64, DVector<f64>)> {
    const EPS: f64 = 1e-10;
    const PIV: f64 = 1e-9;
    let (m, n) = (a.nrows(), a.ncols());
    let w = n + m + 1;
    // tableau columns: n structural, m artificial, rhs
    let mut t = DMatrix::zeros(m, w);
    for r in 0..m {
        let s = if b[r] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[(r, j)] = s * a[(r, j)];
        }
        t[(r, n + r)] = 1.0;
        t[(r, w - 1)] = s * b[r];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    fn pivot(t: &mut DMatrix<f64>, basis: &mut [usize], r: usize, j: usize) {
        let pv = t[(r, j)];
        let prow: Vec<f64> = (0..t.ncols()).map(|k| t[(r, k)] / pv).collect();
        for k in 0..t.ncols() {
            t[(r, k)] = prow[k];
        }
        for i in 0..t.nrows() {
            let f = t[(i, j)];
            if i != r && f != 0.0 {
                for k in 0..t.ncols() {
                    t[(i, k)] -= f * prow[k];
                }
                t[(i, j)] = 0.0;
            }
        }
        basis[r] = j;
    }

    // maximizes `cost` over the first `allowed` columns; false when unbounded
    let optimize =
        |t: &mut DMatrix<f64>, basis: &mut Vec<usize>, cost: &[f64], allowed: usize| -> bool {
            let mut stalled = 0;
            for _ in 0..100_000 {
                let reduced = |j: usize, t: &DMatrix<f64>| {
                    cost[j] - (0..m).map(|r| cost[basis[r]] * t[(r, j)]).sum::<f64>()
                };
                let candidates = (0..allowed).filter(|j| !basis.contains(j));
                let enter = if stalled > 50 {
                    candidates.into_iter().find(|&j| reduced(j, t) > EPS)
                } else {
                    candidates
                        .map(|j| (j, reduced(j, t)))
                        .filter(|&(_, d)| d > EPS)
                        .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
                        .map(|(j, _)| j)
                };
                let Some(j) = enter else { return true };
                let mut leave: Option<(usize, f64)> = None;
                for r in 0..m {
                    let p = t[(r, j)];
                    if p <= PIV {
                        continue;
                    }
                    let ratio = t[(r, w - 1)].max(0.0) / p;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((_, lv)) if ratio < lv - 1e-12 => Some((r, ratio)),
                        Some((lr, lv)) if ratio <= lv + 1e-12 => {
                            let better = if stalled > 50 {
                                basis[r] < basis[lr]
                            } else {
                                p > t[(lr, j)]
                            };
                            Some(if better { (r, ratio) } else { (lr, lv) })
                        }
                        keep => keep,
                    };
                }
                let Some((r, ratio)) = leave else {
                    return false;
                };
                stalled = if ratio < 1e-12 { stalled + 1 } else { 0 };
                pivot(t, basis, r, j);
            }
            panic!("simplex iteration limit");
        };

    let mut phase1 = vec![0.0; n + m];
    phase1[n..].iter_mut().for_each(|v| *v = -1.0);
    optimize(&mut t, &mut basis, &phase1, n + m);
    let infeas: f64 = (0..m)
        .filter(|&r| basis[r] >= n)
        .map(|r| t[(r, w - 1)])
        .sum();
    if infeas > 1e-8 {
        return None;
    }
    // drive remaining artificials out of the basis where possible
    for r in 0..m {
        if basis[r] >= n {
            if let Some(j) = (0..n).find(|&j| !basis.contains(&j) && t[(r, j)].abs() > 1e-9) {
                pivot(&mut t, &mut basis, r, j);
            }
        }
    }
    let mut cost = vec![0.0; n + m];
    cost[..n].copy_from_slice(c.as_slice());
    if !optimize(&mut t, &mut basis, &cost, n) {
        return None;
    }
    let mut z = DVector::zeros(n);
    for r in 0..m {
        if basis[r] < n {
            z[basis[r]] = t[(r, w - 1)];
        }
    }
    Some((c.dot(&z), z))
}

/// Seat-one value of a two-player zero-sum game from the sequence-form LP
/// `max fᵀq s.t. E x = e, x >= 0, Fᵀq <= Aᵀx`, with `q` split into two nonnegative parts.
pub fn two_player_value(tree: &GameTree) -> f64 {
    let tp1 = nzefg_core::compile_treeplex(&[(tree, Seat::One)]).unwrap();
    let tp2 = nzefg_core::compile_treeplex(&[(tree, Seat::Two)]).unwrap();
    let [a, _] = payoff_by_leaves(tree, &tp1, &tp2);
    let (e, ev) = flow_constraints(&tp1);
    let (f, fv) = flow_constraints(&tp2);
    let (n1, n2, m1, m2) = (tp1.dim(), tp2.dim(), e.nrows(), f.nrows());
    // z = [x (n1), q+ (m2), q- (m2), slack (n2)]
    let cols = n1 + 2 * m2 + n2;
    let rows = m1 + n2;
    let mut big = DMatrix::zeros(rows, cols);
    let mut rhs = DVector::zeros(rows);
    for r in 0..m1 {
        for j in 0..n1 {
            big[(r, j)] = e[(r, j)];
        }
        rhs[r] = ev[r];
    }
    for j2 in 0..n2 {
        let r = m1 + j2;
        for i in 0..n1 {
            big[(r, i)] = -a[(i, j2)];
        }
        for k in 0..m2 {
            big[(r, n1 + k)] = f[(k, j2)];
            big[(r, n1 + m2 + k)] = -f[(k, j2)];
        }
        big[(r, n1 + 2 * m2 + j2)] = 1.0;
    }
    let mut cost = DVector::zeros(cols);
    for k in 0..m2 {
        cost[n1 + k] = fv[k];
        cost[n1 + m2 + k] = -fv[k];
    }
    simplex_max(&big, &rhs, &cost)
        .expect("sequence-form LP is feasible and bounded")
        .0
}

/// Keys of an information-set map, for quick structural comparisons.
pub fn infoset_ids(tree: &GameTree, seat: Seat) -> Vec<String> {
    let mut ids: BTreeMap<String, ()> = BTreeMap::new();
    for node in tree.nodes() {
        if node.owner == Owner::Player(seat) {
            ids.insert(node.infoset.clone().unwrap(), ());
        }
    }
    ids.into_keys().collect()
}

/// A vertex of the symmetric equilibrium set maximizing `objᵀy`, from the LP
/// `y ∈ X, Cᵀλ ≤ R y, dᵀλ ≥ 0` with `R` rebuilt from the leaves.
pub fn ne_vertex(net: &NetworkGame, obj: &[f64]) -> Vec<f64> {
    let n = net.dim();
    let r = r_by_leaves(net);
    let mut c = DMatrix::zeros(0, n);
    let mut d: Vec<f64> = Vec::new();
    for u in 0..net.n_agents() {
        let (cu, du) = flow_constraints(net.treeplex(u));
        let off = net.product().offset(u);
        let old = c.nrows();
        c = c.resize_vertically(old + cu.nrows(), 0.0);
        for i in 0..cu.nrows() {
            for j in 0..cu.ncols() {
                c[(old + i, off + j)] = cu[(i, j)];
            }
        }
        d.extend(du.iter());
    }
    let m = c.nrows();
    // z = [y (n), λ⁺ (m), λ⁻ (m), s (n), s' (1)]
    let cols = n + 2 * m + n + 1;
    let rows = m + n + 1;
    let mut a = DMatrix::zeros(rows, cols);
    let mut b = DVector::zeros(rows);
    for i in 0..m {
        for j in 0..n {
            a[(i, j)] = c[(i, j)];
        }
        b[i] = d[i];
    }
    for j in 0..n {
        let row = m + j;
        for k in 0..m {
            a[(row, n + k)] = c[(k, j)];
            a[(row, n + m + k)] = -c[(k, j)];
        }
        for k in 0..n {
            a[(row, k)] = -r[(j, k)];
        }
        a[(row, n + 2 * m + j)] = 1.0;
    }
    for k in 0..m {
        a[(rows - 1, n + k)] = d[k];
        a[(rows - 1, n + m + k)] = -d[k];
    }
    a[(rows - 1, cols - 1)] = -1.0;
    let mut cost = DVector::zeros(cols);
    for j in 0..n {
        cost[j] = obj[j];
    }
    let (_, z) = simplex_max(&a, &b, &cost).expect("equilibrium set is nonempty");
    z.as_slice()[..n].to_vec()
}
