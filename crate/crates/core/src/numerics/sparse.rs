use std::collections::HashSet;

use super::{dot, norm, SolveError};

/// Symmetric sparse matrix stored as its upper triangle.
///
/// A full-row CSR copy is kept for mat-vec products.
#[derive(Debug, Clone)]
pub struct SparseSymmetric {
    dim: usize,
    entries: Vec<(usize, usize, f64)>,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymmetric {
    /// `entries` must be upper-triangular (`row <= col`) without duplicates.
    pub fn new(dim: usize, entries: Vec<(usize, usize, f64)>) -> Result<Self, SolveError> {
        let mut seen = HashSet::with_capacity(entries.len());
        for &(r, c, v) in &entries {
            if r > c {
                return Err(SolveError::InvalidMatrix(format!(
                    "entry ({r}, {c}) is below the diagonal"
                )));
            }
            if c >= dim {
                return Err(SolveError::InvalidMatrix(format!(
                    "entry ({r}, {c}) out of range for dimension {dim}"
                )));
            }
            if !v.is_finite() {
                return Err(SolveError::InvalidMatrix(format!("entry ({r}, {c}) is not finite")));
            }
            if !seen.insert((r, c)) {
                return Err(SolveError::InvalidMatrix(format!("duplicate entry ({r}, {c})")));
            }
        }
        let mut counts = vec![0usize; dim + 1];
        for &(r, c, _) in &entries {
            counts[r + 1] += 1;
            if r != c {
                counts[c + 1] += 1;
            }
        }
        for i in 0..dim {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let nnz = row_ptr[dim];
        let mut col_idx = vec![0; nnz];
        let mut values = vec![0.0; nnz];
        let mut fill = counts;
        let mut sorted = entries.clone();
        sorted.sort_by_key(|&(r, c, _)| (r, c));
        for &(r, c, v) in &sorted {
            col_idx[fill[r]] = c;
            values[fill[r]] = v;
            fill[r] += 1;
            if r != c {
                col_idx[fill[c]] = r;
                values[fill[c]] = v;
                fill[c] += 1;
            }
        }
        Ok(SparseSymmetric {
            dim,
            entries: sorted,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Sums duplicate coordinates and mirrors lower-triangle entries into
    /// the upper triangle before building.
    pub fn from_triplets(
        dim: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, SolveError> {
        let mut t: Vec<(usize, usize, f64)> = triplets
            .into_iter()
            .map(|(r, c, v)| (r.min(c), r.max(c), v))
            .collect();
        t.sort_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(t.len());
        for (r, c, v) in t {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        SparseSymmetric::new(dim, merged)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim];
        for &(r, c, v) in &self.entries {
            if r == c {
                d[r] = v;
            }
        }
        d
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.mul_vec_into(x, &mut y);
        y
    }

    fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.dim]; self.dim];
        for &(r, c, v) in &self.entries {
            a[r][c] = v;
            a[c][r] = v;
        }
        a
    }
}

/// Removes the mean of each group from `x` in place.
fn project(x: &mut [f64], groups: &[usize], group_count: usize) {
    let mut sum = vec![0.0; group_count];
    let mut cnt = vec![0usize; group_count];
    for (v, &g) in x.iter().zip(groups) {
        sum[g] += v;
        cnt[g] += 1;
    }
    for (v, &g) in x.iter_mut().zip(groups) {
        *v -= sum[g] / cnt[g] as f64;
    }
}

/// Solves `A x = b` for a positive semidefinite `A` whose nullspace is the
/// constant vector, fixing the gauge `mean(x) = 0`. The right-hand side is
/// projected onto the range first (`b' = b − mean(b)`).
pub fn solve_singular_spd(
    a: &SparseSymmetric,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>, SolveError> {
    let groups = vec![0; b.len()];
    solve_singular_spd_grouped(a, b, &groups, 1, tol, max_iter)
}

/// As [`solve_singular_spd`] for block-diagonal `A` whose nullspace is
/// spanned by the indicator vectors of `groups` (e.g. the connected
/// components of a mesh Laplacian). Each group of `x` is zero-mean.
///
/// Jacobi-preconditioned conjugate gradient; the residual is recomputed
/// from scratch every 64 iterations.
pub fn solve_singular_spd_grouped(
    a: &SparseSymmetric,
    b: &[f64],
    groups: &[usize],
    group_count: usize,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>, SolveError> {
    let n = a.dim();
    if b.len() != n {
        return Err(SolveError::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    if groups.len() != n {
        return Err(SolveError::DimensionMismatch {
            expected: n,
            got: groups.len(),
        });
    }
    if groups.iter().any(|&g| g >= group_count) {
        return Err(SolveError::InvalidArgument("group id out of range".into()));
    }
    let mut rhs = b.to_vec();
    project(&mut rhs, groups, group_count);
    let rhs_norm = norm(&rhs);
    let mut x = vec![0.0; n];
    if rhs_norm == 0.0 || n == 0 {
        return Ok(x);
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let precondition = |r: &[f64]| {
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, m)| r * m).collect();
        project(&mut z, groups, group_count);
        z
    };

    let mut r = rhs.clone();
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let target = tol * rhs_norm;
    let mut residual = norm(&r);
    for iter in 0..max_iter {
        if residual <= target {
            break;
        }
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        if (iter + 1) % 64 == 0 {
            project(&mut x, groups, group_count);
            let ax = a.mul_vec(&x);
            for i in 0..n {
                r[i] = rhs[i] - ax[i];
            }
            project(&mut r, groups, group_count);
        }
        residual = norm(&r);
        z = precondition(&r);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    project(&mut x, groups, group_count);
    let ax = a.mul_vec(&x);
    let mut true_r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, y)| b - y).collect();
    project(&mut true_r, groups, group_count);
    let rel = norm(&true_r) / rhs_norm;
    if rel > tol {
        return Err(SolveError::NotConverged {
            iterations: max_iter,
            residual: rel,
        });
    }
    Ok(x)
}
