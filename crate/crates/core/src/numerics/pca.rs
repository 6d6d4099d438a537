use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::linalg::{dot, symmetric_eigen};
use super::Matrix;
use crate::{Error, Result};

/// Principal directions of a sample matrix (one sample per row).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    mean: Vec<f64>,
    /// `d' x D`, rows orthonormal, ordered by descending explained variance.
    basis: Matrix,
    explained_variance: Vec<f64>,
    /// Set when fewer than `d'` directions carry nonzero variance.
    rank_deficient: bool,
}

impl PcaModel {
    /// Fits by eigendecomposition of the population covariance. Each basis row
    /// is signed so its largest-magnitude entry is positive (first such entry
    /// on ties).
    pub fn fit(samples: &Matrix, components: usize) -> Result<Self> {
        let (n, dim) = (samples.rows(), samples.cols());
        if n < 2 {
            return Err(Error::invalid("PCA needs at least two samples"));
        }
        if components == 0 || components > dim {
            return Err(Error::invalid(format!(
                "cannot retain {components} components of a {dim}-dimensional space"
            )));
        }
        let mut mean = vec![0.0; dim];
        for r in 0..n {
            for (m, x) in mean.iter_mut().zip(samples.row(r)) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut cov = vec![0.0; dim * dim];
        let mut centered = vec![0.0; dim];
        for r in 0..n {
            for (c, (x, m)) in centered.iter_mut().zip(samples.row(r).iter().zip(&mean)) {
                *c = x - m;
            }
            for i in 0..dim {
                let ci = centered[i];
                if ci == 0.0 {
                    continue;
                }
                for j in i..dim {
                    cov[i * dim + j] += ci * centered[j];
                }
            }
        }
        for i in 0..dim {
            for j in i..dim {
                let v = cov[i * dim + j] / n as f64;
                cov[i * dim + j] = v;
                cov[j * dim + i] = v;
            }
        }
        let (values, vectors) = symmetric_eigen(&cov, dim);
        let top = values.first().copied().unwrap_or(0.0).max(0.0);
        let rank = values.iter().filter(|&&v| v > 1e-12 * top.max(1e-300)).count();
        let rank = if top <= 0.0 { 0 } else { rank };

        let mut basis = Vec::with_capacity(components * dim);
        let mut explained = Vec::with_capacity(components);
        for (value, mut vector) in values.into_iter().zip(vectors).take(components) {
            let mut pivot = 0;
            for (i, x) in vector.iter().enumerate() {
                if libm::fabs(*x) > libm::fabs(vector[pivot]) {
                    pivot = i;
                }
            }
            if vector[pivot] < 0.0 {
                vector.iter_mut().for_each(|x| *x = -*x);
            }
            basis.extend(vector);
            explained.push(value.max(0.0));
        }
        if components > rank {
            log::warn!("PCA: requested {components} components but data rank is {rank}");
        }
        Ok(PcaModel {
            mean,
            basis: Matrix::new(components, dim, basis)?,
            explained_variance: explained,
            rank_deficient: components > rank,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn components(&self) -> usize {
        self.basis.rows()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    pub fn is_rank_deficient(&self) -> bool {
        self.rank_deficient
    }

    /// Projects `(h - mean)` onto the basis.
    pub fn transform(&self, h: &[f64]) -> Result<Vec<f64>> {
        if h.len() != self.input_dim() {
            return Err(Error::invalid(format!(
                "PCA input of dimension {} for a model fitted on {}",
                h.len(),
                self.input_dim()
            )));
        }
        let centered: Vec<f64> = h.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        Ok((0..self.components())
            .map(|k| dot(self.basis.row(k), &centered))
            .collect())
    }

    /// `mean + basis^T * coords`.
    pub fn inverse_transform(&self, coords: &[f64]) -> Result<Vec<f64>> {
        if coords.len() != self.components() {
            return Err(Error::invalid("coordinate count does not match component count"));
        }
        let mut out = self.mean.clone();
        for (k, &c) in coords.iter().enumerate() {
            for (o, b) in out.iter_mut().zip(self.basis.row(k)) {
                *o += c * b;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rng;

    fn fit(rows: &[Vec<f64>], k: usize) -> PcaModel {
        PcaModel::fit(&Matrix::from_rows(rows).unwrap(), k).unwrap()
    }

    #[test]
    fn axis_aligned_line() {
        let m = fit(&[vec![1.0, 0.0], vec![-1.0, 0.0]], 1);
        assert_eq!(m.basis().row(0), &[1.0, 0.0]);
        assert_eq!(m.transform(&[1.0, 0.0]).unwrap(), vec![1.0]);
        assert_eq!(m.transform(&[-1.0, 0.0]).unwrap(), vec![-1.0]);
    }

    #[test]
    fn diagonal_line() {
        let m = fit(&[vec![1.0, 1.0], vec![-1.0, -1.0]], 1);
        let s = 1.0 / 2f64.sqrt();
        assert!((m.basis().get(0, 0) - s).abs() < 1e-12);
        assert!((m.basis().get(0, 1) - s).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_projects_to_zero_and_flags() {
        let m = fit(&[vec![2.0, 3.0], vec![2.0, 3.0], vec![2.0, 3.0]], 2);
        assert!(m.is_rank_deficient());
        assert!(m.transform(&[2.0, 3.0]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mean_maps_to_origin_and_full_rank_reconstructs() {
        let mut rng = Rng::new(4);
        let rows: Vec<Vec<f64>> = (0..20).map(|_| (0..4).map(|_| rng.normal()).collect()).collect();
        let m = fit(&rows, 4);
        assert!(m.transform(m.mean()).unwrap().iter().all(|v| v.abs() < 1e-12));
        for r in &rows {
            let back = m.inverse_transform(&m.transform(r).unwrap()).unwrap();
            for (a, b) in back.iter().zip(r) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        let m = fit(&[vec![1.0, 0.0], vec![-1.0, 0.0]], 1);
        assert!(m.transform(&[1.0, 0.0, 0.0]).is_err());
        assert!(PcaModel::fit(&Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap(), 1).is_err());
    }
}
