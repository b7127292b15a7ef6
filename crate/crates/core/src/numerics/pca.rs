use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::SolveError;

/// Principal components of a sample set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// `k` orthonormal basis vectors of length `d`, by descending variance.
    pub basis: Vec<Vec<f64>>,
    pub variances: Vec<f64>,
}

impl Pca {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn components(&self) -> usize {
        self.basis.len()
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.basis
            .iter()
            .map(|b| b.iter().zip(x).zip(&self.mean).map(|((b, x), m)| b * (x - m)).sum())
            .collect()
    }

    pub fn reconstruct(&self, code: &[f64]) -> Vec<f64> {
        let mut x = self.mean.clone();
        for (b, c) in self.basis.iter().zip(code) {
            for (xi, bi) in x.iter_mut().zip(b) {
                *xi += c * bi;
            }
        }
        x
    }
}

/// Fits the top-`k` principal components of `samples` (rows of length `d`)
/// from the sample covariance (n − 1 denominator).
pub fn pca_fit(samples: &[Vec<f64>], k: usize) -> Result<Pca, SolveError> {
    let n = samples.len();
    if n < 2 {
        return Err(SolveError::InvalidArgument(format!("PCA needs at least 2 samples, got {n}")));
    }
    let d = samples[0].len();
    if let Some(bad) = samples.iter().find(|s| s.len() != d) {
        return Err(SolveError::DimensionMismatch {
            expected: d,
            got: bad.len(),
        });
    }
    if k > d {
        return Err(SolveError::InvalidArgument(format!(
            "cannot keep {k} components of {d}-dimensional data"
        )));
    }
    let mut mean = vec![0.0; d];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut centered = vec![0.0; d];
    for s in samples {
        for j in 0..d {
            centered[j] = s[j] - mean[j];
        }
        for i in 0..d {
            for j in i..d {
                cov[(i, j)] += centered[i] * centered[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / (n - 1) as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut basis = Vec::with_capacity(k);
    let mut variances = Vec::with_capacity(k);
    for &j in order.iter().take(k) {
        let mut v: Vec<f64> = eig.eigenvectors.column(j).iter().copied().collect();
        // Sign convention: largest-magnitude entry positive.
        let pivot = v
            .iter()
            .copied()
            .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        basis.push(v);
        variances.push(eig.eigenvalues[j].max(0.0));
    }
    Ok(Pca {
        mean,
        basis,
        variances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    /// Cyclic Jacobi eigenvalue iteration, independent of nalgebra.
    fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
        let n = a.len();
        for _ in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i][j] * a[i][j])
                .sum();
            if off < 1e-24 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[k][p], a[k][q]);
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
        ev.sort_by(|x, y| y.total_cmp(x));
        ev
    }

    fn covariance(samples: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = samples.len() as f64;
        let d = samples[0].len();
        let mean: Vec<f64> = (0..d).map(|j| samples.iter().map(|s| s[j]).sum::<f64>() / n).collect();
        let mut c = vec![vec![0.0; d]; d];
        for s in samples {
            for i in 0..d {
                for j in 0..d {
                    c[i][j] += (s[i] - mean[i]) * (s[j] - mean[j]) / (n - 1.0);
                }
            }
        }
        c
    }

    #[test]
    fn axis_aligned_data() {
        let xs = [1.0, 2.0, 4.0, 7.0];
        let samples: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x, 0.0, 0.0]).collect();
        let p = pca_fit(&samples, 1).unwrap();
        let mx = 3.5;
        let var = xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>() / 3.0;
        assert!((p.variances[0] - var).abs() < 1e-12);
        assert!((p.basis[0][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn isotropic_matches_brute_force_eigenvalues() {
        let mut rng = Rng::new(2, "pca/iso");
        let samples: Vec<Vec<f64>> = (0..2000).map(|_| (0..4).map(|_| rng.gaussian()).collect()).collect();
        let p = pca_fit(&samples, 4).unwrap();
        let oracle = jacobi_eigenvalues(covariance(&samples));
        for (a, b) in p.variances.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        assert!((p.variances[0] - p.variances[1]).abs() < 0.15);
    }

    #[test]
    fn degenerate_identical_points() {
        let samples = vec![vec![1.0, 2.0, 3.0]; 2];
        let p = pca_fit(&samples, 2).unwrap();
        assert!(p.variances.iter().all(|&v| v.abs() < 1e-15));
        for s in &samples {
            assert!(p.project(s).iter().all(|&c| c.abs() < 1e-15));
        }
    }

    #[test]
    fn errors() {
        assert!(pca_fit(&[vec![1.0]], 1).is_err());
        assert!(pca_fit(&[vec![1.0, 2.0], vec![0.0, 1.0]], 3).is_err());
    }

    #[test]
    fn orthonormal_basis_and_monotone_reconstruction() {
        let mut rng = Rng::new(4, "pca/recon");
        let samples: Vec<Vec<f64>> = (0..300)
            .map(|_| {
                let a = rng.gaussian();
                let b = rng.gaussian() * 0.5;
                vec![a + b, a - b, 0.1 * rng.gaussian(), 2.0 * a, b]
            })
            .collect();
        let mut last = f64::INFINITY;
        for k in 0..=5 {
            let p = pca_fit(&samples, k).unwrap();
            for i in 0..k {
                for j in 0..k {
                    let d: f64 = p.basis[i].iter().zip(&p.basis[j]).map(|(a, b)| a * b).sum();
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((d - e).abs() < 1e-10);
                }
            }
            let err: f64 = samples
                .iter()
                .map(|s| {
                    let r = p.reconstruct(&p.project(s));
                    r.iter().zip(s).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
                })
                .sum();
            assert!(err <= last + 1e-9);
            last = err;
        }
        assert!(last < 1e-18 * samples.len() as f64 + 1e-9);
    }

    #[test]
    fn projection_of_mean_is_zero() {
        let mut rng = Rng::new(6, "pca/mean");
        let samples: Vec<Vec<f64>> = (0..50).map(|_| (0..3).map(|_| rng.gaussian()).collect()).collect();
        let p = pca_fit(&samples, 2).unwrap();
        assert!(p.project(&p.mean).iter().all(|c| c.abs() < 1e-15));
    }
}
