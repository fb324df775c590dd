//! Small dense simplex solver and a matrix-game wrapper on top of it.
//!
//! Problems here are tiny (tens of variables), so a dense tableau with
//! Bland's rule is both simple and safe against cycling.

use alloc::vec;
use alloc::vec::Vec;

const EPS: f64 = 1e-12;
const MAX_CELLS: usize = 4_000_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LpError {
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex exceeded {0} pivots")]
    IterationLimit(usize),
    #[error("linear program too large: {rows} rows x {cols} columns")]
    TooLarge { rows: usize, cols: usize },
    #[error("right-hand side entry {0} is negative; the origin must be feasible")]
    NegativeRhs(usize),
    #[error("malformed problem: {0}")]
    Malformed(&'static str),
}

/// Optimal primal/dual pair of `max c.x s.t. Ax <= b, x >= 0`.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub duals: Vec<f64>,
    pub objective: f64,
}

/// Maximize `c.x` subject to `a x <= b` and `x >= 0`, where `b >= 0`.
pub fn maximize(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Result<LpSolution, LpError> {
    let m = a.len();
    let n = c.len();
    if b.len() != m {
        return Err(LpError::Malformed("rhs length differs from row count"));
    }
    if a.iter().any(|row| row.len() != n) {
        return Err(LpError::Malformed("row length differs from objective length"));
    }
    let width = n + m + 1;
    if (m + 1).saturating_mul(width) > MAX_CELLS {
        return Err(LpError::TooLarge { rows: m, cols: n });
    }
    if let Some(r) = b.iter().position(|&v| v < 0.0) {
        return Err(LpError::NegativeRhs(r));
    }

    // Row-major tableau; the last column is the rhs, the last row holds
    // z_j - c_j.
    let mut t = vec![0.0; (m + 1) * width];
    for r in 0..m {
        let row = &mut t[r * width..(r + 1) * width];
        row[..n].copy_from_slice(&a[r]);
        row[n + r] = 1.0;
        row[width - 1] = b[r];
    }
    {
        let obj = &mut t[m * width..];
        for j in 0..n {
            obj[j] = -c[j];
        }
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    let limit = 50 * (n + m) + 1000;
    let mut pivots = 0;
    loop {
        let obj = &t[m * width..];
        let Some(enter) = (0..n + m).find(|&j| obj[j] < -EPS) else {
            break;
        };
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for r in 0..m {
            let coef = t[r * width + enter];
            if coef > EPS {
                let ratio = t[r * width + width - 1] / coef;
                let better = match leave {
                    None => true,
                    Some(l) => ratio < best - EPS || (ratio <= best + EPS && basis[r] < basis[l]),
                };
                if better {
                    best = ratio;
                    leave = Some(r);
                }
            }
        }
        let Some(pr) = leave else {
            return Err(LpError::Unbounded);
        };
        pivot(&mut t, width, m + 1, pr, enter);
        basis[pr] = enter;
        pivots += 1;
        if pivots > limit {
            return Err(LpError::IterationLimit(limit));
        }
    }

    let mut x = vec![0.0; n];
    for (r, &var) in basis.iter().enumerate() {
        if var < n {
            x[var] = t[r * width + width - 1];
        }
    }
    let obj = &t[m * width..];
    let duals = (0..m).map(|r| obj[n + r]).collect();
    let objective = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    Ok(LpSolution { x, duals, objective })
}

fn pivot(t: &mut [f64], width: usize, rows: usize, pr: usize, pc: usize) {
    let p = t[pr * width + pc];
    for k in 0..width {
        t[pr * width + k] /= p;
    }
    for r in 0..rows {
        if r == pr {
            continue;
        }
        let f = t[r * width + pc];
        if f == 0.0 {
            continue;
        }
        for k in 0..width {
            let v = t[pr * width + k];
            if v != 0.0 {
                t[r * width + k] -= f * v;
            }
        }
        t[r * width + pc] = 0.0;
    }
}

/// Solution of a finite two-player zero-sum game.
#[derive(Debug, Clone)]
pub struct GameSolution {
    /// `max_alpha min_row sum_i alpha_i payoff[row][i]`.
    pub value: f64,
    /// Optimal mixed strategy of the column (maximizing) player.
    pub column_strategy: Vec<f64>,
    /// Optimal mixed strategy of the row (minimizing) player.
    pub row_strategy: Vec<f64>,
}

/// The column player picks a distribution over columns and receives
/// `payoff[row][col]` from the row player, who minimizes.
pub fn solve_zero_sum(payoff: &[Vec<f64>]) -> Result<GameSolution, LpError> {
    let rows = payoff.len();
    if rows == 0 {
        return Err(LpError::Malformed("game without rows"));
    }
    let cols = payoff[0].len();
    if cols == 0 || payoff.iter().any(|r| r.len() != cols) {
        return Err(LpError::Malformed("ragged or empty payoff matrix"));
    }
    let lo = payoff
        .iter()
        .flat_map(|r| r.iter().copied())
        .fold(f64::INFINITY, f64::min);
    let shift = 1.0 - lo;

    // Row player's LP in <= form: max sum y  s.t.  sum_q P'[q][i] y_q <= 1.
    let a: Vec<Vec<f64>> = (0..cols)
        .map(|i| (0..rows).map(|q| payoff[q][i] + shift).collect())
        .collect();
    let b = vec![1.0; cols];
    let c = vec![1.0; rows];
    let sol = maximize(&a, &b, &c)?;
    let total = sol.objective;
    if total <= 0.0 {
        return Err(LpError::Malformed("degenerate game"));
    }
    let v = 1.0 / total;
    let column_strategy = normalized(sol.duals.iter().map(|d| d.max(0.0) * v).collect());
    let row_strategy = normalized(sol.x.iter().map(|y| y * v).collect());
    Ok(GameSolution { value: v - shift, column_strategy, row_strategy })
}

fn normalized(mut p: Vec<f64>) -> Vec<f64> {
    let s: f64 = p.iter().sum();
    if s > 0.0 {
        for v in &mut p {
            *v /= s;
        }
    }
    p
}
