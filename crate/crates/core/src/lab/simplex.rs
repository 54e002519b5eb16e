//! Dense-tableau phase-1 simplex with Bland's rule for `{y ≥ 0 : Ay ≤ b}`.

/// Entries at or below this are not used as pivots.
const PIVOT_TOL: f64 = 1e-9;
/// Reduced costs above `−COST_TOL` are treated as nonnegative.
const COST_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum PhaseOne {
    /// Optimal phase-1 point.
    Done { residual: f64, y: Vec<f64>, pivots: usize },
    BudgetExceeded { residual: f64, pivots: usize },
}

/// Minimizes the sum of artificials for `Ay ≤ b`, `y ≥ 0`; rows with
/// `b < 0` are negated and get an artificial, the rest start on their
/// slack. Artificials that leave the basis are never priced again.
pub(crate) fn phase_one(a: &[Vec<f64>], b: &[f64], budget: usize) -> PhaseOne {
    let m = a.len();
    let p = a.first().map_or(0, |r| r.len());
    let art_rows: Vec<usize> = (0..m).filter(|&i| b[i] < 0.0).collect();
    let r = art_rows.len();
    let width = p + m + r + 1;
    let rhs = width - 1;
    let mut t = vec![0.0; m * width];
    let mut basis = vec![0usize; m];
    let mut k = 0;
    for i in 0..m {
        let row = &mut t[i * width..(i + 1) * width];
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..p {
            row[j] = sign * a[i][j];
        }
        row[p + i] = sign;
        row[rhs] = sign * b[i];
        if b[i] < 0.0 {
            row[p + m + k] = 1.0;
            basis[i] = p + m + k;
            k += 1;
        } else {
            basis[i] = p + i;
        }
    }
    // Phase-1 reduced costs: z_j = −Σ_{artificial rows} t_ij.
    let mut z = vec![0.0; width];
    for &i in &art_rows {
        for j in 0..width {
            if j < p + m || j == rhs {
                z[j] -= t[i * width + j];
            }
        }
    }
    let entering_limit = p + m;
    let mut pivots = 0;
    loop {
        let residual = -z[rhs];
        if residual <= 0.0 {
            break;
        }
        let Some(col) = (0..entering_limit).find(|&j| z[j] < -COST_TOL) else {
            break;
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let e = t[i * width + col];
            if e > PIVOT_TOL {
                let ratio = t[i * width + rhs] / e;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((li, lr)) => {
                        let tie = (ratio - lr).abs() <= 1e-12 * lr.abs().max(1e-300);
                        if ratio < lr && !tie || tie && basis[i] < basis[li] {
                            Some((i, ratio))
                        } else {
                            Some((li, lr))
                        }
                    }
                };
            }
        }
        let Some((row, _)) = leave else {
            // Phase 1 is bounded below; a column with no positive entry
            // cannot improve it. Treat the cost as numerically zero.
            z[col] = 0.0;
            continue;
        };
        if pivots >= budget {
            return PhaseOne::BudgetExceeded { residual, pivots };
        }
        pivot(&mut t, width, m, row, col);
        let f = z[col];
        if f != 0.0 {
            for j in 0..width {
                z[j] -= f * t[row * width + j];
            }
        }
        basis[row] = col;
        pivots += 1;
    }
    let mut y = vec![0.0; p];
    for i in 0..m {
        if basis[i] < p {
            y[basis[i]] = t[i * width + rhs].max(0.0);
        }
    }
    PhaseOne::Done {
        residual: (-z[rhs]).max(0.0),
        y,
        pivots,
    }
}

fn pivot(t: &mut [f64], width: usize, m: usize, row: usize, col: usize) {
    let inv = 1.0 / t[row * width + col];
    for j in 0..width {
        t[row * width + j] *= inv;
    }
    t[row * width + col] = 1.0;
    let (before, rest) = t.split_at_mut(row * width);
    let (prow, after) = rest.split_at_mut(width);
    let eliminate = |r: &mut [f64]| {
        let f = r[col];
        if f != 0.0 {
            for (x, pv) in r.iter_mut().zip(prow.iter()) {
                *x -= f * pv;
            }
            r[col] = 0.0;
        }
    };
    before.chunks_mut(width).for_each(eliminate);
    after.chunks_mut(width).take(m - row - 1).for_each(eliminate);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feasible_without_artificials() {
        let out = phase_one(&[vec![1.0, 1.0]], &[2.0], 100);
        assert_eq!(out, PhaseOne::Done { residual: 0.0, y: vec![0.0, 0.0], pivots: 0 });
    }

    #[test]
    fn finds_feasible_point() {
        // y1 + y2 ≥ 1, y1 ≤ 0.25
        let a = vec![vec![-1.0, -1.0], vec![1.0, 0.0]];
        let PhaseOne::Done { residual, y, .. } = phase_one(&a, &[-1.0, 0.25], 100) else {
            panic!("budget");
        };
        assert_eq!(residual, 0.0);
        assert!(y[0] + y[1] >= 1.0 - 1e-12 && y[0] <= 0.25 + 1e-12);
    }

    #[test]
    fn inconsistent_residual() {
        // y ≥ 1 and y ≤ −1: the artificials sum to (1 − y)⁺ + (1 + y) ≥ 2.
        let a = vec![vec![-1.0], vec![1.0]];
        let PhaseOne::Done { residual, .. } = phase_one(&a, &[-1.0, -1.0], 100) else {
            panic!("budget");
        };
        assert!((residual - 2.0).abs() < 1e-12);
    }

    #[test]
    fn budget_reported() {
        let a = vec![vec![-1.0, 0.0], vec![0.0, -1.0]];
        assert!(matches!(phase_one(&a, &[-1.0, -1.0], 1), PhaseOne::BudgetExceeded { .. }));
    }
}
