//! Minimum-cost linear assignment (Hungarian method with potentials).

use crate::error::{Error, Result};
use crate::num::{RMat, Real};

/// Row `i` is assigned to column `permutation[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment<T: Real> {
    pub permutation: Vec<usize>,
    pub cost: T,
}

/// Minimum-cost assignment of rows to columns.
///
/// Rectangular matrices are padded to square with a constant larger than
/// any achievable real cost; padded pairs are dropped from the result, so a
/// tall matrix leaves some rows unassigned (`usize::MAX`).
pub fn hungarian<T: Real>(cost: &RMat<T>) -> Result<Assignment<T>> {
    if cost.iter().any(|v| v.partial_cmp(v).is_none()) {
        return Err(Error::NanCost);
    }
    if cost.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("cost entries must be finite".into()));
    }
    let (rows, cols) = cost.shape();
    let n = rows.max(cols);
    if n == 0 {
        return Ok(Assignment {
            permutation: Vec::new(),
            cost: T::zero(),
        });
    }
    let a = if rows == cols {
        cost.clone()
    } else {
        let hi = cost.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let pad = (hi + T::one()) * T::lit(2.0 * n as f64);
        RMat::from_fn(n, n, |i, j| if i < rows && j < cols { cost[(i, j)] } else { pad })
    };

    let inf = T::max_value().expect("bounded float");
    // 1-based potentials, column owners and back-pointers
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = a[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut permutation = vec![usize::MAX; rows];
    for j in 1..=n {
        let i = owner[j] - 1;
        if i < rows && j - 1 < cols {
            permutation[i] = j - 1;
        }
    }
    let total = permutation
        .iter()
        .enumerate()
        .filter(|(_, &j)| j != usize::MAX)
        .fold(T::zero(), |acc, (i, &j)| acc + cost[(i, j)]);
    Ok(Assignment {
        permutation,
        cost: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(cost: &RMat<f64>) -> f64 {
        fn go(c: &RMat<f64>, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if row == c.nrows() {
                *best = best.min(acc);
                return;
            }
            for j in 0..c.ncols() {
                if !used[j] {
                    used[j] = true;
                    go(c, row + 1, used, acc + c[(row, j)], best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        go(cost, 0, &mut vec![false; cost.ncols()], 0.0, &mut best);
        best
    }

    #[test]
    fn small_examples() {
        let a = hungarian(&RMat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).unwrap();
        assert_eq!(a.permutation, vec![0, 1]);
        assert_eq!(a.cost, 2.0);
        assert_eq!(hungarian(&RMat::from_element(1, 1, -3.5)).unwrap().cost, -3.5);
        let eq = hungarian(&RMat::from_element(3, 3, 0.7f64)).unwrap();
        assert!((eq.cost - 2.1).abs() < 1e-15);
        let mut seen = eq.permutation.clone();
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2]);
    }

    #[test]
    fn nan_rejected() {
        let m = RMat::from_row_slice(2, 2, &[1.0, f64::NAN, 0.0, 1.0]);
        assert_eq!(hungarian(&m), Err(Error::NanCost));
    }

    #[test]
    fn rectangular_padding() {
        let wide = RMat::from_row_slice(2, 3, &[5.0, 1.0, 9.0, 4.0, 2.0, 0.5]);
        let a = hungarian(&wide).unwrap();
        assert_eq!(a.cost, 1.5);
        assert_eq!(a.permutation, vec![1, 2]);
        let tall = wide.transpose();
        let b = hungarian(&tall).unwrap();
        assert_eq!(b.cost, 1.5);
        assert_eq!(b.permutation.iter().filter(|&&j| j == usize::MAX).count(), 1);
    }

    #[test]
    fn matches_brute_force_on_integers() {
        let mut state = 12345u64;
        for n in 2..=6 {
            for _ in 0..30 {
                let m = RMat::from_fn(n, n, |_, _| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    ((state >> 33) % 10) as f64
                });
                assert_eq!(hungarian(&m).unwrap().cost, brute(&m));
            }
        }
    }
}
