//! Dense two-phase simplex with Bland's rule. Sized for treeplex problems of a few
//! hundred variables; deterministic for a given input.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-10;
const COST_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Bound {
    NonNegative,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Sense {
    Le,
    #[cfg_attr(not(test), allow(dead_code))]
    Ge,
    Eq,
}

/// Sparse coefficients, sense and right-hand side of one constraint.
type Row = (Vec<(usize, f64)>, Sense, f64);

/// `maximize c^T x` subject to sparse rows and per-variable bounds.
#[derive(Debug, Clone)]
pub(crate) struct LinearProgram {
    bounds: Vec<Bound>,
    objective: Vec<f64>,
    rows: Vec<Row>,
}

#[derive(Debug, Clone)]
pub(crate) struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, bounds: Vec<Bound>) -> Self {
        assert_eq!(objective.len(), bounds.len());
        Self {
            bounds,
            objective,
            rows: Vec::new(),
        }
    }

    pub fn constrain(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        debug_assert!(coeffs.iter().all(|&(j, _)| j < self.bounds.len()));
        self.rows.push((coeffs, sense, rhs));
    }

    pub fn maximize(&self) -> Result<LpSolution> {
        // column layout: split variables, then slacks, then artificials
        let mut col_of = Vec::with_capacity(self.bounds.len());
        let mut ncols = 0;
        for b in &self.bounds {
            col_of.push(ncols);
            ncols += if *b == Bound::Free { 2 } else { 1 };
        }
        let nstruct = ncols;
        let nslack = self.rows.iter().filter(|r| r.1 != Sense::Eq).count();
        let m = self.rows.len();
        let art0 = nstruct + nslack;
        let width = art0 + m + 1;
        let rhs_col = width - 1;

        let mut t = vec![0.0; m * width];
        let mut slack = nstruct;
        for (i, (coeffs, sense, rhs)) in self.rows.iter().enumerate() {
            let row = &mut t[i * width..(i + 1) * width];
            for &(j, v) in coeffs {
                row[col_of[j]] += v;
                if self.bounds[j] == Bound::Free {
                    row[col_of[j] + 1] -= v;
                }
            }
            match sense {
                Sense::Le => {
                    row[slack] = 1.0;
                    slack += 1;
                }
                Sense::Ge => {
                    row[slack] = -1.0;
                    slack += 1;
                }
                Sense::Eq => {}
            }
            row[rhs_col] = *rhs;
            if *rhs < 0.0 {
                row[..rhs_col].iter_mut().for_each(|v| *v = -*v);
                row[rhs_col] = -*rhs;
            }
            row[art0 + i] = 1.0;
        }
        let mut tab = Tableau {
            t,
            width,
            m,
            basis: (art0..art0 + m).collect(),
            active_rows: vec![true; m],
        };

        // phase one: maximise -sum(artificials)
        let mut cost = vec![0.0; width - 1];
        cost[art0..art0 + m].iter_mut().for_each(|c| *c = -1.0);
        tab.optimize(&cost, width - 1)?;
        let infeasibility: f64 = (0..m)
            .filter(|&i| tab.basis[i] >= art0)
            .map(|i| tab.t[i * width + rhs_col])
            .sum();
        if infeasibility > FEAS_TOL {
            return Err(Error::Infeasible);
        }
        // drive zero-level artificials out, dropping redundant rows
        for i in 0..m {
            if tab.basis[i] < art0 {
                continue;
            }
            let row = &tab.t[i * width..(i + 1) * width];
            match (0..art0).find(|&j| row[j].abs() > PIVOT_TOL) {
                Some(j) => tab.pivot(i, j),
                None => tab.active_rows[i] = false,
            }
        }

        // phase two on structural and slack columns only
        let mut cost = vec![0.0; width - 1];
        for (j, b) in self.bounds.iter().enumerate() {
            cost[col_of[j]] = self.objective[j];
            if *b == Bound::Free {
                cost[col_of[j] + 1] = -self.objective[j];
            }
        }
        tab.optimize(&cost, art0)?;

        let mut z = vec![0.0; nstruct];
        for i in 0..m {
            if tab.active_rows[i] && tab.basis[i] < nstruct {
                z[tab.basis[i]] = tab.t[i * width + rhs_col].max(0.0);
            }
        }
        let x: Vec<f64> = self
            .bounds
            .iter()
            .enumerate()
            .map(|(j, b)| match b {
                Bound::NonNegative => z[col_of[j]],
                Bound::Free => z[col_of[j]] - z[col_of[j] + 1],
            })
            .collect();
        let objective = x.iter().zip(&self.objective).map(|(a, b)| a * b).sum();
        Ok(LpSolution { x, objective })
    }
}

struct Tableau {
    t: Vec<f64>,
    width: usize,
    m: usize,
    basis: Vec<usize>,
    active_rows: Vec<bool>,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.t[r * w + c];
        for v in &mut self.t[r * w..(r + 1) * w] {
            *v /= p;
        }
        let (before, rest) = self.t.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Maximises `cost` over columns `< allowed` with Bland's rule.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> Result<()> {
        let w = self.width;
        let rhs = w - 1;
        for _ in 0..MAX_PIVOTS {
            // reduced costs: c_B B^-1 A_j - c_j; enter the first negative one
            let entering = (0..allowed).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let zj: f64 = (0..self.m)
                    .filter(|&i| self.active_rows[i])
                    .map(|i| cost[self.basis[i]] * self.t[i * w + j])
                    .sum();
                zj - cost[j] < -COST_TOL
            });
            let Some(c) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                if !self.active_rows[i] {
                    continue;
                }
                let a = self.t[i * w + c];
                if a > PIVOT_TOL {
                    let ratio = self.t[i * w + rhs] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-12
                                || (ratio <= br + 1e-12 && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::Unbounded);
            };
            self.pivot(r, c);
        }
        Err(Error::Numerical("simplex pivot limit reached".into()))
    }
}
