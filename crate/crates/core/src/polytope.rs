//! Projection onto treeplexes, best responses, and the equilibrium set `X*`.
//!
//! Projection works bottom-up on the information-set tree. For a sequence `s` with
//! value `t`, the optimal subtree multipliers depend on `t` only, and the map
//! `t ↦ t - p_s + Σ_I μ_I(t)` is piecewise linear and strictly increasing. Each
//! information set's multiplier is the inverse of the summed inverse maps of its
//! actions, clipped at zero. Carrying these breakpoint lists up the tree gives the
//! exact projection in one pass down.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lcp::QuadraticProgram;
use crate::linalg::{dist2, DenseMatrix, SparseMatrix};
use crate::lp::{Bound, LinearProgram, Sense};
use crate::network::NetworkGame;
use crate::sequence_form::{ProductTreeplex, SequenceStrategy, Treeplex, ROOT};

/// Result of a quadratic program over a polytope.
#[derive(Debug, Clone, PartialEq)]
pub struct QPSolution {
    pub point: Vec<f64>,
    /// Coordinates held at their lower bound of zero.
    pub active_set: Vec<usize>,
    pub kkt_residual: f64,
}

/// Sets that support exact Euclidean projection.
pub trait Projection {
    fn dim(&self) -> usize;
    fn project(&self, point: &[f64]) -> Result<QPSolution>;
}

/// Euclidean projection of `point` onto `set`.
pub fn project<P: Projection + ?Sized>(point: &[f64], set: &P) -> Result<QPSolution> {
    if point.len() != set.dim() {
        return Err(Error::Structure(alloc::format!(
            "point has {} coordinates, set has dimension {}",
            point.len(),
            set.dim()
        )));
    }
    if point.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("projection of a non-finite point".into()));
    }
    set.project(point)
}

/// Increasing piecewise-linear map on `[xs[0], ∞)`.
#[derive(Debug, Clone)]
struct Pwl {
    xs: Vec<f64>,
    ys: Vec<f64>,
    tail: f64,
}

impl Pwl {
    fn eval(&self, x: f64) -> f64 {
        let last = self.xs.len() - 1;
        let k = self.xs.partition_point(|&v| v <= x);
        if k == 0 {
            // left of the domain: extend the first piece
            let slope = if last == 0 {
                self.tail
            } else {
                (self.ys[1] - self.ys[0]) / (self.xs[1] - self.xs[0])
            };
            return self.ys[0] + slope * (x - self.xs[0]);
        }
        let i = k - 1;
        if i == last {
            return self.ys[last] + self.tail * (x - self.xs[last]);
        }
        let (x0, x1, y0, y1) = (self.xs[i], self.xs[i + 1], self.ys[i], self.ys[i + 1]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    fn inverse(&self) -> Pwl {
        Pwl {
            xs: self.ys.clone(),
            ys: self.xs.clone(),
            tail: 1.0 / self.tail,
        }
    }
}

/// Merges sorted breakpoints, dropping points not strictly above the previous one.
fn strictly_increasing(mut pts: Vec<f64>) -> Vec<f64> {
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup_by(|a, b| *a <= *b);
    pts
}

impl Projection for Treeplex {
    fn dim(&self) -> usize {
        Treeplex::dim(self)
    }

    fn project(&self, p: &[f64]) -> Result<QPSolution> {
        let n = Treeplex::dim(self);
        let infosets = self.infosets();
        // f[c]: value of sequence c ↦ stationarity residual; g[i]: set i's multiplier as a
        // function of its parent value
        let mut f: Vec<Option<Pwl>> = vec![None; n];
        let mut g: Vec<Option<Pwl>> = vec![None; infosets.len()];
        let mut h: Vec<Option<Pwl>> = vec![None; n];
        let mut set_starting_at = vec![None; n];
        for (i, inf) in infosets.iter().enumerate() {
            set_starting_at[inf.first] = Some(i);
        }
        for c in (0..n).rev() {
            let kids = self.children(c);
            let mut knots = vec![0.0];
            for &i in kids {
                knots.extend_from_slice(&g[i].as_ref().unwrap().xs);
            }
            let knots = strictly_increasing(knots);
            let ys = knots
                .iter()
                .map(|&t| {
                    t - p[c]
                        + kids
                            .iter()
                            .map(|&i| g[i].as_ref().unwrap().eval(t))
                            .sum::<f64>()
                })
                .collect();
            let tail = 1.0
                + kids
                    .iter()
                    .map(|&i| g[i].as_ref().unwrap().tail)
                    .sum::<f64>();
            let fc = Pwl {
                xs: knots,
                ys,
                tail,
            };
            if c != ROOT {
                h[c] = Some(fc.inverse());
            }
            f[c] = Some(fc);

            // once c is the first action of a set, all its siblings are done
            if let Some(i) = set_starting_at[c] {
                g[i] = Some(self.multiplier_map(infosets[i].coords(), &f, &h));
            }
        }

        let mut x = vec![0.0; n];
        let mut mu = vec![0.0; infosets.len()];
        x[ROOT] = 1.0;
        for (i, inf) in infosets.iter().enumerate() {
            let t = x[inf.parent];
            let m = g[i].as_ref().unwrap().eval(t);
            mu[i] = m;
            for c in inf.coords() {
                let fc = f[c].as_ref().unwrap();
                x[c] = if m > fc.ys[0] {
                    h[c].as_ref().unwrap().eval(m).max(0.0)
                } else {
                    0.0
                };
            }
        }

        let kkt_residual = self.kkt_residual(p, &x, &mu);
        let active_set = (0..n).filter(|&c| c != ROOT && x[c] == 0.0).collect();
        Ok(QPSolution {
            point: x,
            active_set,
            kkt_residual,
        })
    }
}

impl Treeplex {
    /// Multiplier of an information set as a function of its parent value: the inverse
    /// of `μ ↦ Σ_a max(0, f_a⁻¹(μ))`.
    fn multiplier_map(
        &self,
        coords: core::ops::Range<usize>,
        f: &[Option<Pwl>],
        h: &[Option<Pwl>],
    ) -> Pwl {
        let start = coords
            .clone()
            .map(|c| f[c].as_ref().unwrap().ys[0])
            .fold(f64::INFINITY, f64::min);
        let mut knots = Vec::new();
        for c in coords.clone() {
            knots.extend_from_slice(&h[c].as_ref().unwrap().xs);
        }
        let knots = strictly_increasing(knots);
        let sum_at = |mu: f64| -> f64 {
            coords
                .clone()
                .filter(|&c| mu > f[c].as_ref().unwrap().ys[0])
                .map(|c| h[c].as_ref().unwrap().eval(mu).max(0.0))
                .sum()
        };
        let mut xs = vec![0.0];
        let mut ys = vec![start];
        for &mu in knots.iter().filter(|&&mu| mu > start) {
            let s = sum_at(mu);
            if s > *xs.last().unwrap() {
                xs.push(s);
                ys.push(mu);
            }
        }
        let tail = 1.0
            / coords
                .map(|c| 1.0 / f[c].as_ref().unwrap().tail)
                .sum::<f64>();
        Pwl { xs, ys, tail }
    }

    /// Stationarity and complementarity residual of `x` with set multipliers `mu`
    /// (the equality multipliers are `-mu`).
    fn kkt_residual(&self, p: &[f64], x: &[f64], mu: &[f64]) -> f64 {
        let mut worst = self.infeasibility(x);
        for (i, inf) in self.infosets().iter().enumerate() {
            for c in inf.coords() {
                let nu = x[c] - p[c] + self.children(c).iter().map(|&j| mu[j]).sum::<f64>() - mu[i];
                worst = worst.max(if x[c] > 0.0 { nu.abs() } else { (-nu).max(0.0) });
            }
        }
        worst
    }
}

impl Projection for ProductTreeplex {
    fn dim(&self) -> usize {
        ProductTreeplex::dim(self)
    }

    fn project(&self, p: &[f64]) -> Result<QPSolution> {
        let mut point = Vec::with_capacity(p.len());
        let mut active_set = Vec::new();
        let mut kkt_residual: f64 = 0.0;
        for (u, tp) in self.blocks().iter().enumerate() {
            let s = Projection::project(tp, &p[self.range(u)])?;
            point.extend(s.point);
            active_set.extend(s.active_set.into_iter().map(|c| c + self.offset(u)));
            kkt_residual = kkt_residual.max(s.kkt_residual);
        }
        Ok(QPSolution {
            point,
            active_set,
            kkt_residual,
        })
    }
}

/// `argmax_{x ∈ tp} gᵀx` by dynamic programming over the information sets, ties to
/// the lowest action index. Returns the pure maximiser and the value.
pub fn best_response_treeplex(tp: &Treeplex, g: &[f64]) -> (Vec<f64>, f64) {
    let n = tp.dim();
    assert_eq!(g.len(), n);
    let infosets = tp.infosets();
    let mut value = g.to_vec();
    let mut best_value = vec![0.0; infosets.len()];
    let mut best_action = vec![0usize; infosets.len()];
    // infosets are ordered parents first, so reverse order is bottom-up
    for (i, inf) in infosets.iter().enumerate().rev() {
        let (mut ba, mut bv) = (0, f64::NEG_INFINITY);
        for (a, c) in inf.coords().enumerate() {
            if value[c] > bv {
                ba = a;
                bv = value[c];
            }
        }
        best_value[i] = bv;
        best_action[i] = ba;
        value[inf.parent] += bv;
    }
    let mut x = vec![0.0; n];
    x[ROOT] = 1.0;
    for (i, inf) in infosets.iter().enumerate() {
        if x[inf.parent] > 0.0 {
            x[inf.first + best_action[i]] = x[inf.parent];
        }
    }
    (x, value[ROOT])
}

/// `max_{x ∈ tp} gᵀx` by linear programming.
pub fn best_response_treeplex_lp(tp: &Treeplex, g: &[f64]) -> Result<f64> {
    let (c, d) = tp.constraints();
    let mut lp = LinearProgram::new(g.to_vec(), vec![Bound::NonNegative; tp.dim()]);
    for (r, rhs) in d.iter().enumerate() {
        lp.constrain(c.row(r).collect(), Sense::Eq, *rhs);
    }
    Ok(lp.maximize()?.objective)
}

/// Best response of agent `u` against the other blocks of joint point `x`.
pub fn best_response(net: &NetworkGame, u: usize, x: &[f64]) -> (SequenceStrategy, f64) {
    let (values, v) = best_response_treeplex(net.treeplex(u), &net.gradient(u, x));
    (SequenceStrategy { values }, v)
}

/// Same value as [`best_response`], from an LP.
pub fn best_response_lp(net: &NetworkGame, u: usize, x: &[f64]) -> Result<f64> {
    best_response_treeplex_lp(net.treeplex(u), &net.gradient(u, x))
}

/// The symmetric equilibria `X* = {x ∈ X : min_{x' ∈ X} x'ᵀRx = 0}`, encoded through
/// LP duality as `{x ∈ X : ∃λ, Cᵀλ ≤ Rx, dᵀλ ≥ 0}`.
#[derive(Debug, Clone)]
pub struct EquilibriumSet {
    c: SparseMatrix,
    d: Vec<f64>,
    r: SparseMatrix,
}

/// Output of [`EquilibriumSet::distance`].
#[derive(Debug, Clone, PartialEq)]
pub struct NeDistance {
    pub dist2: f64,
    pub point: Vec<f64>,
    /// Largest violation of the lifted constraints at the returned point.
    pub residual: f64,
}

impl EquilibriumSet {
    pub fn new(net: &NetworkGame) -> Self {
        let (c, d) = net.product().constraints();
        Self {
            c,
            d,
            r: net.r().clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.c.cols()
    }

    /// `min_{x' ∈ X} x'ᵀRx`, evaluated as the dual LP `max dᵀλ s.t. Cᵀλ ≤ Rx`.
    pub fn lift_value(&self, x: &[f64]) -> Result<f64> {
        let rx = self.r.mul_vec(x);
        let m = self.c.rows();
        let mut lp = LinearProgram::new(self.d.clone(), vec![Bound::Free; m]);
        let ct = self.c.transpose();
        for (j, rxj) in rx.iter().enumerate() {
            lp.constrain(ct.row(j).collect(), Sense::Le, *rxj);
        }
        Ok(lp.maximize()?.objective)
    }

    /// One point of `X*`, from the LP `max dᵀλ s.t. Cx = d, x ≥ 0, Cᵀλ ≤ Rx`, whose
    /// optimum is zero exactly when the game is zero-sum.
    pub fn solve(&self) -> Result<Vec<f64>> {
        let n = self.dim();
        let m = self.c.rows();
        let mut objective = vec![0.0; n];
        objective.extend_from_slice(&self.d);
        let mut bounds = vec![Bound::NonNegative; n];
        bounds.extend(core::iter::repeat_n(Bound::Free, m));
        let mut lp = LinearProgram::new(objective, bounds);
        for (r, rhs) in self.d.iter().enumerate() {
            lp.constrain(self.c.row(r).collect(), Sense::Eq, *rhs);
        }
        let ct = self.c.transpose();
        for j in 0..n {
            let mut row: Vec<(usize, f64)> = ct.row(j).map(|(r, v)| (n + r, v)).collect();
            row.extend(self.r.row(j).map(|(c, v)| (c, -v)));
            lp.constrain(row, Sense::Le, 0.0);
        }
        let sol = lp.maximize()?;
        if sol.objective.abs() > 1e-7 {
            return Err(Error::Numerical(alloc::format!(
                "equilibrium LP optimum is {:e}, expected 0; the game is not zero-sum",
                sol.objective
            )));
        }
        Ok(sol.x[..n].iter().map(|v| v.max(0.0)).collect())
    }

    /// Squared distance from `x` to `X*` and the nearest point, from the convex QP
    /// `min ½‖y‖² - xᵀy` over the lifted polytope in `(y, λ⁺, λ⁻)`.
    pub fn distance(&self, x: &[f64]) -> Result<NeDistance> {
        let n = self.dim();
        let m = self.c.rows();
        assert_eq!(x.len(), n);
        let nz = n + 2 * m;
        let rows = 2 * m + n + 1;
        let mut q = DenseMatrix::zeros(nz, nz);
        for i in 0..n {
            q[(i, i)] = 1.0;
        }
        let mut c = vec![0.0; nz];
        for i in 0..n {
            c[i] = -x[i];
        }
        let mut a = DenseMatrix::zeros(rows, nz);
        let mut b = vec![0.0; rows];
        for (r, col, v) in self.c.triplets() {
            a[(r, col)] = v;
            a[(m + r, col)] = -v;
        }
        for r in 0..m {
            b[r] = self.d[r];
            b[m + r] = -self.d[r];
        }
        // R y - Cᵀ(λ⁺ - λ⁻) ≥ 0
        for (j, col, v) in self.r.triplets() {
            a[(2 * m + j, col)] = v;
        }
        for (r, col, v) in self.c.triplets() {
            a[(2 * m + col, n + r)] = -v;
            a[(2 * m + col, n + m + r)] = v;
        }
        // dᵀ(λ⁺ - λ⁻) ≥ 0
        for r in 0..m {
            a[(rows - 1, n + r)] = self.d[r];
            a[(rows - 1, n + m + r)] = -self.d[r];
        }
        let sol = QuadraticProgram {
            q,
            c,
            a: a.clone(),
            b: b.clone(),
        }
        .solve()?;
        let point = sol.z[..n].to_vec();
        let lhs = a.mul_vec(&sol.z);
        let mut residual = lhs.iter().zip(&b).fold(0.0f64, |w, (l, r)| w.max(r - l));
        // stationarity in y: y - x - Aᵀ_y μ = 0 over the free block
        for i in 0..n {
            let grad = point[i] - x[i] - (0..rows).map(|k| a[(k, i)] * sol.y[k]).sum::<f64>();
            residual = residual.max(if point[i] > 0.0 {
                grad.abs()
            } else {
                (-grad).max(0.0)
            });
        }
        Ok(NeDistance {
            dist2: dist2(x, &point),
            point,
            residual,
        })
    }

    /// Whether `x` is in `X*` up to `tol` on the lift value.
    pub fn contains(&self, x: &[f64], tol: f64) -> Result<bool> {
        Ok(self.lift_value(x)? >= -tol)
    }
}

/// One symmetric equilibrium of a zero-sum network game.
pub fn solve_symmetric_ne(net: &NetworkGame) -> Result<SequenceStrategy> {
    Ok(SequenceStrategy {
        values: EquilibriumSet::new(net).solve()?,
    })
}

/// `dist²(x, X*)` and the nearest point of `X*`.
pub fn distance_to_ne_set(x: &[f64], eq: &EquilibriumSet) -> Result<(f64, Vec<f64>)> {
    let d = eq.distance(x)?;
    Ok((d.dist2, d.point))
}

/// `x'ᵀRx` minimised over the product treeplex, evaluated block by block.
pub fn min_response(net: &NetworkGame, x: &[f64]) -> f64 {
    let rx = net.r().mul_vec(x);
    (0..net.n_agents())
        .map(|u| {
            let neg: Vec<f64> = rx[net.product().range(u)].iter().map(|v| -v).collect();
            -best_response_treeplex(net.treeplex(u), &neg).1
        })
        .sum()
}
