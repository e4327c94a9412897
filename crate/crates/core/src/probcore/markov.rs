use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarkovError {
    #[error("row {row} sums to {sum}, expected 1")]
    RowSum { row: usize, sum: f64 },
    #[error("entry ({row}, {col}) = {value} is not a probability")]
    BadEntry { row: usize, col: usize, value: f64 },
    #[error("matrix is not square ({rows} rows, row of length {len})")]
    NotSquare { rows: usize, len: usize },
    #[error("chain has no unique stationary distribution (singular system)")]
    Singular,
}

const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// Row-stochastic matrix, row-indexed by source state.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix {
    size: usize,
    data: Vec<f64>,
}

impl TransitionMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, MarkovError> {
        let size = rows.len();
        let mut data = Vec::with_capacity(size * size);
        for (row, r) in rows.iter().enumerate() {
            if r.len() != size {
                return Err(MarkovError::NotSquare {
                    rows: size,
                    len: r.len(),
                });
            }
            for (col, &value) in r.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) {
                    return Err(MarkovError::BadEntry { row, col, value });
                }
            }
            let sum: f64 = r.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(MarkovError::RowSum { row, sum });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { size, data })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.data[from * self.size + to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.data[from * self.size..(from + 1) * self.size]
    }

    /// `x P` for a row vector `x`.
    pub fn left_mul(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.size];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &p) in out.iter_mut().zip(self.row(i)) {
                *o += xi * p;
            }
        }
        out
    }
}

/// Stationary distribution `pi` with `pi (I - P) = 0` and `sum(pi) = 1`.
///
/// Solves the transposed balance equations with the last one replaced by the
/// normalization, using Gaussian elimination with partial pivoting and one
/// step of iterative refinement.
pub fn steady_state(p: &TransitionMatrix) -> Result<Vec<f64>, MarkovError> {
    let n = p.size();
    if n == 0 {
        return Err(MarkovError::Singular);
    }
    // a[i][j] = (I - P)^T with the last row set to ones.
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let delta = if i == j { 1.0 } else { 0.0 };
            a[i * n + j] = delta - p.get(j, i);
        }
    }
    for j in 0..n {
        a[(n - 1) * n + j] = 1.0;
    }
    let mut rhs = vec![0.0; n];
    rhs[n - 1] = 1.0;

    let lu = Lu::factor(a.clone(), n)?;
    let mut x = lu.solve(&rhs);
    // One refinement step.
    let mut resid = rhs.clone();
    for i in 0..n {
        let ax: f64 = (0..n).map(|j| a[i * n + j] * x[j]).sum();
        resid[i] -= ax;
    }
    let dx = lu.solve(&resid);
    for (xi, d) in x.iter_mut().zip(dx) {
        *xi += d;
    }
    for xi in x.iter_mut() {
        if *xi < 0.0 {
            if *xi < -1e-9 {
                return Err(MarkovError::Singular);
            }
            *xi = 0.0;
        }
    }
    let total: f64 = x.iter().sum();
    x.iter_mut().for_each(|xi| *xi /= total);
    Ok(x)
}

struct Lu {
    n: usize,
    a: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(mut a: Vec<f64>, n: usize) -> Result<Self, MarkovError> {
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let (pivot, max) =
                (col..n)
                    .map(|r| (r, a[r * n + col].abs()))
                    .fold(
                        (col, -1.0),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if max < 1e-13 {
                return Err(MarkovError::Singular);
            }
            if pivot != col {
                for j in 0..n {
                    a.swap(col * n + j, pivot * n + j);
                }
                perm.swap(col, pivot);
            }
            let d = a[col * n + col];
            for r in col + 1..n {
                let f = a[r * n + col] / d;
                a[r * n + col] = f;
                if f != 0.0 {
                    for j in col + 1..n {
                        a[r * n + j] -= f * a[col * n + j];
                    }
                }
            }
        }
        Ok(Self { n, a, perm })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        for i in 0..n {
            for j in 0..i {
                y[i] -= self.a[i * n + j] * y[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                y[i] -= self.a[i * n + j] * y[j];
            }
            y[i] /= self.a[i * n + i];
        }
        y
    }
}
