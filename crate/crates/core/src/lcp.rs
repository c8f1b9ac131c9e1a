//! Lemke's complementary pivoting for convex quadratic programs.
//!
//! `min ½ zᵀQz + cᵀz  s.t.  Az ≥ b, z ≥ 0` with `Q` positive semidefinite maps to the
//! LCP `w = Mζ + q, w, ζ ≥ 0, wᵀζ = 0` with `M = [[Q, -Aᵀ], [A, 0]]`, `q = [c; -b]`.
//! `M` is then copositive-plus, so a lexicographic Lemke run terminates with a solution
//! whenever the program is feasible.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::linalg::{solve_dense, DenseMatrix};

const PIVOT_TOL: f64 = 1e-11;

#[derive(Debug, Clone)]
pub(crate) struct QuadraticProgram {
    pub q: DenseMatrix,
    pub c: Vec<f64>,
    pub a: DenseMatrix,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct QpSolution {
    pub z: Vec<f64>,
    /// Multipliers of `Az ≥ b`.
    pub y: Vec<f64>,
}

impl QuadraticProgram {
    pub fn solve(&self) -> Result<QpSolution> {
        let nz = self.c.len();
        let m = self.b.len();
        assert_eq!(self.q.rows(), nz);
        assert_eq!(self.a.rows(), m);
        assert!(m == 0 || self.a.cols() == nz);
        let n = nz + m;
        let mut mm = DenseMatrix::zeros(n, n);
        for i in 0..nz {
            for j in 0..nz {
                mm[(i, j)] = self.q[(i, j)];
            }
        }
        for r in 0..m {
            for j in 0..nz {
                let v = self.a[(r, j)];
                mm[(nz + r, j)] = v;
                mm[(j, nz + r)] = -v;
            }
        }
        let mut q = self.c.clone();
        q.extend(self.b.iter().map(|v| -v));
        let zeta = lemke(&mm, &q)?;
        Ok(QpSolution {
            z: zeta[..nz].to_vec(),
            y: zeta[nz..].to_vec(),
        })
    }
}

/// Solves `w = Mζ + q`, `w, ζ ≥ 0`, `wᵀζ = 0` and returns `ζ`.
///
/// Variables are numbered `w_0..w_{n-1}`, `ζ_0..ζ_{n-1}`, then the artificial `z0`.
pub(crate) fn lemke(m: &DenseMatrix, q: &[f64]) -> Result<Vec<f64>> {
    let n = q.len();
    if q.iter().all(|&v| v >= 0.0) {
        return Ok(vec![0.0; n]);
    }
    let z0 = 2 * n;
    let width = 2 * n + 2;
    let rhs = width - 1;
    // tableau rows: I w - M ζ - 1 z0 = q
    let mut t = vec![0.0; n * width];
    for i in 0..n {
        let row = &mut t[i * width..(i + 1) * width];
        row[i] = 1.0;
        for j in 0..n {
            row[n + j] = -m[(i, j)];
        }
        row[z0] = -1.0;
        row[rhs] = q[i];
    }
    let mut basis: Vec<usize> = (0..n).collect();

    let pivot = |t: &mut [f64], r: usize, c: usize| {
        let p = t[r * width + c];
        for v in &mut t[r * width..(r + 1) * width] {
            *v /= p;
        }
        let (before, rest) = t.split_at_mut(r * width);
        let (prow, after) = rest.split_at_mut(width);
        for row in before
            .chunks_exact_mut(width)
            .chain(after.chunks_exact_mut(width))
        {
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
    };

    // z0 enters at the most negative q (lexicographically smallest row of [q | I])
    let r0 = (0..n)
        .min_by(|&a, &b| {
            q[a].partial_cmp(&q[b])
                .unwrap_or(Ordering::Equal)
                .then(b.cmp(&a))
        })
        .expect("n > 0");
    pivot(&mut t, r0, z0);
    let mut entering = n + r0; // complement of w_r0
    basis[r0] = z0;

    let zero_tol = 1e-12 * (1.0 + q.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    let max_pivots = 50 * n + 1000;
    for _ in 0..max_pivots {
        // lexicographic minimum ratio over rows with a positive column entry
        let mut best: Option<usize> = None;
        for i in 0..n {
            let a = t[i * width + entering];
            if a <= PIVOT_TOL {
                continue;
            }
            best = Some(match best {
                None => i,
                Some(bi) => {
                    let ab = t[bi * width + entering];
                    if lex_less(&t, width, n, i, a, bi, ab, rhs, basis[i] == z0) {
                        i
                    } else {
                        bi
                    }
                }
            });
        }
        let Some(r) = best else {
            // rounding can leave the artificial marginally positive at the end of the path
            if let Some(k) = basis.iter().position(|&b| b == z0) {
                if t[k * width + rhs] <= 1e4 * zero_tol {
                    return Ok(refine(m, q, &basis, &t, width));
                }
            }
            return Err(Error::Numerical(
                "Lemke terminated on a secondary ray".into(),
            ));
        };
        let leaving = basis[r];
        pivot(&mut t, r, entering);
        basis[r] = entering;
        if leaving == z0 {
            return Ok(refine(m, q, &basis, &t, width));
        }
        // a basic artificial at zero already makes the basis complementary
        if let Some(k) = basis.iter().position(|&b| b == z0) {
            if t[k * width + rhs] <= zero_tol {
                return Ok(refine(m, q, &basis, &t, width));
            }
        }
        entering = if leaving < n {
            leaving + n
        } else {
            leaving - n
        };
    }
    Err(Error::Numerical("Lemke pivot limit reached".into()))
}

/// Whether row `i` beats row `bi` in the lexicographic ratio test on `[rhs | B⁻¹]`.
#[allow(clippy::too_many_arguments)]
fn lex_less(
    t: &[f64],
    width: usize,
    n: usize,
    i: usize,
    a: f64,
    bi: usize,
    ab: f64,
    rhs: usize,
    i_is_z0: bool,
) -> bool {
    let scale = |row: usize, col: usize, div: f64| t[row * width + col] / div;
    let ri = scale(i, rhs, a);
    let rb = scale(bi, rhs, ab);
    let tol = 1e-12 * (1.0 + ri.abs().max(rb.abs()));
    if ri < rb - tol {
        return true;
    }
    if ri > rb + tol {
        return false;
    }
    // a tie on the ratio lets the artificial leave first
    if i_is_z0 {
        return true;
    }
    for col in 0..n {
        let (vi, vb) = (scale(i, col, a), scale(bi, col, ab));
        if (vi - vb).abs() > 1e-12 * (1.0 + vi.abs().max(vb.abs())) {
            return vi < vb;
        }
    }
    false
}

/// Re-solves the final basis directly to strip accumulated pivoting error.
fn refine(m: &DenseMatrix, q: &[f64], basis: &[usize], t: &[f64], width: usize) -> Vec<f64> {
    let n = q.len();
    let z0 = 2 * n;
    let rhs = width - 1;
    let mut from_tableau = vec![0.0; n];
    for (i, &b) in basis.iter().enumerate() {
        if b >= n && b < 2 * n {
            from_tableau[b - n] = t[i * width + rhs].max(0.0);
        }
    }
    // columns of [I | -M | -1] for the basic variables
    let mut bm = DenseMatrix::zeros(n, n);
    for (k, &b) in basis.iter().enumerate() {
        for i in 0..n {
            bm[(i, k)] = if b == z0 {
                -1.0
            } else if b < n {
                if i == b {
                    1.0
                } else {
                    0.0
                }
            } else {
                -m[(i, b - n)]
            };
        }
    }
    let Some(vals) = solve_dense(bm, q.to_vec(), 1e-13) else {
        return from_tableau;
    };
    if vals.iter().any(|v| !v.is_finite() || *v < -1e-8) {
        return from_tableau;
    }
    let mut zeta = vec![0.0; n];
    for (k, &b) in basis.iter().enumerate() {
        if b >= n && b < z0 {
            zeta[b - n] = vals[k].max(0.0);
        }
    }
    zeta
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_onto_simplex() {
        // min ½|z - p|² st z0 + z1 = 1, p = (2, 0) -> (1, 0)
        let mut q = DenseMatrix::zeros(2, 2);
        q[(0, 0)] = 1.0;
        q[(1, 1)] = 1.0;
        let mut a = DenseMatrix::zeros(2, 2);
        a.row_mut(0).copy_from_slice(&[1.0, 1.0]);
        a.row_mut(1).copy_from_slice(&[-1.0, -1.0]);
        let qp = QuadraticProgram {
            q,
            c: vec![-2.0, 0.0],
            a,
            b: vec![1.0, -1.0],
        };
        let s = qp.solve().unwrap();
        assert!((s.z[0] - 1.0).abs() < 1e-12 && s.z[1].abs() < 1e-12);
    }

    #[test]
    fn degenerate_lcp() {
        // q has ties; lexicographic rule must not cycle
        let mut m = DenseMatrix::zeros(3, 3);
        for i in 0..3 {
            m[(i, i)] = 1.0;
        }
        m[(0, 1)] = 1.0;
        m[(1, 0)] = -1.0;
        let zeta = lemke(&m, &[-1.0, -1.0, -1.0]).unwrap();
        let w: Vec<f64> = (0..3)
            .map(|i| (0..3).map(|j| m[(i, j)] * zeta[j]).sum::<f64>() - 1.0)
            .collect();
        for i in 0..3 {
            assert!(w[i] > -1e-10 && zeta[i] > -1e-10);
            assert!((w[i] * zeta[i]).abs() < 1e-10);
        }
    }
}
