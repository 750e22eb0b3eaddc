//! Small dense linear-algebra helpers: least squares, nullspace by row
//! reduction, and a seeded splitmix64 generator for internal sampling.

use crate::error::{Error, Result};

/// Deterministic 64-bit generator for internal sample points.
pub struct SplitMix64(pub u64);

impl SplitMix64 {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        lo + (hi - lo) * u
    }
}

/// Least-squares solution of A x = b via normal equations with partial
/// pivoting. Returns the coefficients and the maximum absolute residual.
/// Errors if the normal system is numerically singular.
pub fn lstsq(a: &[Vec<f64>], b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let rows = a.len();
    assert_eq!(rows, b.len());
    let cols = if rows == 0 { 0 } else { a[0].len() };
    if cols == 0 {
        return Ok((vec![], b.iter().fold(0.0f64, |m, v| m.max(v.abs()))));
    }
    // Gram matrix and right-hand side
    let mut g = vec![vec![0.0; cols + 1]; cols];
    for i in 0..cols {
        for j in 0..cols {
            g[i][j] = (0..rows).map(|r| a[r][i] * a[r][j]).sum();
        }
        g[i][cols] = (0..rows).map(|r| a[r][i] * b[r]).sum();
    }
    let scale: f64 = (0..cols)
        .map(|i| g[i][i].abs())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    // Gaussian elimination
    for k in 0..cols {
        let (pivot_row, pivot) = (k..cols)
            .map(|r| (r, g[r][k].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if pivot <= 1e-12 * scale {
            return Err(Error::DegenerateSamples(1));
        }
        g.swap(k, pivot_row);
        for r in (k + 1)..cols {
            let f = g[r][k] / g[k][k];
            for c in k..=cols {
                g[r][c] -= f * g[k][c];
            }
        }
    }
    let mut x = vec![0.0; cols];
    for k in (0..cols).rev() {
        let mut v = g[k][cols];
        for c in (k + 1)..cols {
            v -= g[k][c] * x[c];
        }
        x[k] = v / g[k][k];
    }
    let mut max_res = 0.0f64;
    for r in 0..rows {
        let fit: f64 = (0..cols).map(|c| a[r][c] * x[c]).sum();
        max_res = max_res.max((fit - b[r]).abs());
    }
    Ok((x, max_res))
}

/// Reduced row echelon form in place; returns pivot column indices.
pub fn rref(m: &mut Vec<Vec<f64>>, tol: f64) -> Vec<usize> {
    let rows = m.len();
    if rows == 0 {
        return vec![];
    }
    let cols = m[0].len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r >= rows {
            break;
        }
        let (best, mag) = (r..rows)
            .map(|i| (i, m[i][c].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if mag <= tol {
            continue;
        }
        m.swap(r, best);
        let p = m[r][c];
        for v in m[r].iter_mut() {
            *v /= p;
        }
        for i in 0..rows {
            if i != r && m[i][c].abs() > 0.0 {
                let f = m[i][c];
                for cc in 0..cols {
                    let upd = m[r][cc] * f;
                    m[i][cc] -= upd;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    m.truncate(r);
    pivots
}

/// Orthonormal basis of the nullspace of the row system `rows` (n columns),
/// together with the rref constraint rows. Free columns keep unit entries.
pub struct Nullspace {
    /// Basis vectors, one per free column, in column order.
    pub basis: Vec<Vec<f64>>,
    /// Indices of free columns (the basis vector i has a 1 at free_cols[i]).
    pub free_cols: Vec<usize>,
    /// The reduced constraint rows (each sums to zero on the nullspace).
    pub constraints: Vec<Vec<f64>>,
}

pub fn nullspace(rows: Vec<Vec<f64>>, n: usize, tol: f64) -> Nullspace {
    let mut m = rows;
    let pivots = rref(&mut m, tol);
    let free_cols: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
    let mut basis = Vec::new();
    for &fc in &free_cols {
        let mut v = vec![0.0; n];
        v[fc] = 1.0;
        for (ri, &pc) in pivots.iter().enumerate() {
            v[pc] = -m[ri][fc];
        }
        basis.push(v);
    }
    Nullspace {
        basis,
        free_cols,
        constraints: m,
    }
}

/// Modified Gram-Schmidt orthonormalization (drops near-null vectors).
pub fn orthonormalize(vecs: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in vecs {
        let mut w = v.clone();
        for u in &out {
            let d: f64 = w.iter().zip(u).map(|(a, b)| a * b).sum();
            for (wi, ui) in w.iter_mut().zip(u) {
                *wi -= d * ui;
            }
        }
        let norm: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > tol {
            for wi in w.iter_mut() {
                *wi /= norm;
            }
            out.push(w);
        }
    }
    out
}
