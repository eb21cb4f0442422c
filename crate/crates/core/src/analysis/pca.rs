use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;

/// Fitted principal-component basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// `out_dims × cols`, one unit-norm component per row.
    pub components: Matrix,
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
}

impl Pca {
    /// Eigen-decomposition of the sample covariance. Components are ordered by
    /// decreasing variance and signed so their largest-magnitude coordinate is
    /// positive.
    pub fn fit(points: &Matrix, out_dims: usize) -> Result<Pca> {
        let (n, d) = points.shape();
        if out_dims > d {
            return Err(Error::invalid(format!(
                "cannot project {d} columns onto {out_dims} components"
            )));
        }
        if n < 2 {
            return Err(Error::invalid("PCA needs at least 2 samples"));
        }
        let mean = points.col_means();
        let mut cov = DMatrix::<f64>::zeros(d, d);
        for row in points.iter_rows() {
            for a in 0..d {
                let da = row[a] - mean[a];
                for b in a..d {
                    cov[(a, b)] += da * (row[b] - mean[b]);
                }
            }
        }
        for a in 0..d {
            for b in a..d {
                let v = cov[(a, b)] / (n - 1) as f64;
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
        let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();

        let mut components = Matrix::zeros(out_dims, d);
        let mut explained_variance = Vec::with_capacity(out_dims);
        for (r, &c) in order.iter().take(out_dims).enumerate() {
            let v = eig.eigenvectors.column(c);
            let mut pivot = 0;
            for i in 1..d {
                if v[i].abs() > v[pivot].abs() {
                    pivot = i;
                }
            }
            let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
            for i in 0..d {
                components[(r, i)] = sign * v[i];
            }
            explained_variance.push(eig.eigenvalues[c].max(0.0));
        }
        let explained_variance_ratio = explained_variance
            .iter()
            .map(|v| if total > 0.0 { v / total } else { 0.0 })
            .collect();
        Ok(Pca {
            mean,
            components,
            explained_variance,
            explained_variance_ratio,
        })
    }

    /// Mean-centred projection onto the fitted components.
    pub fn transform(&self, points: &Matrix) -> Result<Matrix> {
        if points.cols() != self.mean.len() {
            return Err(Error::shape("pca_transform", points.shape(), self.components.shape()));
        }
        let mut centred = points.clone();
        for i in 0..centred.rows() {
            for (v, m) in centred.row_mut(i).iter_mut().zip(&self.mean) {
                *v -= m;
            }
        }
        centred.matmul_t(&self.components)
    }
}

/// Fits and projects in one call.
pub fn pca(points: &Matrix, out_dims: usize) -> Result<(Matrix, Pca)> {
    let fit = Pca::fit(points, out_dims)?;
    let proj = fit.transform(points)?;
    Ok((proj, fit))
}
