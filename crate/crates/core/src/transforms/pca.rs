use nalgebra::{DMatrix, SymmetricEigen};

use super::block::{padded_value, BlockSpec};
use super::{TransformKind, TransformMatrix};
use crate::error::{Error, Result};

/// PCA basis for flattened `n × n` blocks. Rows of the returned analysis matrix
/// are unit eigenvectors of the sample covariance, ordered by non-increasing
/// eigenvalue. Each eigenvector's largest-magnitude entry is made positive.
pub fn pca_matrix(samples: &[Vec<f64>], n: usize) -> Result<TransformMatrix> {
    if n == 0 {
        return Err(Error::invalid("block size must be at least 1"));
    }
    let d = n * n;
    if samples.len() < d {
        return Err(Error::IllConditioned(format!(
            "PCA on {d}-dimensional blocks needs at least {d} samples, got {}",
            samples.len()
        )));
    }
    if let Some(i) = samples.iter().position(|s| s.len() != d) {
        return Err(Error::invalid(format!(
            "sample {i} has length {}, expected {d}",
            samples[i].len()
        )));
    }
    if samples.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("PCA samples contain non-finite values"));
    }

    let count = samples.len() as f64;
    let mut mean = vec![0.0; d];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);

    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut centered = vec![0.0; d];
    for s in samples {
        for ((c, v), m) in centered.iter_mut().zip(s).zip(&mean) {
            *c = v - m;
        }
        for i in 0..d {
            let ci = centered[i];
            if ci == 0.0 {
                continue;
            }
            for j in i..d {
                cov[(i, j)] += ci * centered[j];
            }
        }
    }
    let denom = (count - 1.0).max(1.0);
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut analysis = DMatrix::<f64>::zeros(d, d);
    let mut eigenvalues = Vec::with_capacity(d);
    for (row, &k) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let mut pivot = 0;
        for i in 1..d {
            if v[i].abs() > v[pivot].abs() + 1e-12 {
                pivot = i;
            }
        }
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..d {
            analysis[(row, i)] = sign * v[i];
        }
        eigenvalues.push(eig.eigenvalues[k]);
    }
    Ok(TransformMatrix::new(TransformKind::Pca, analysis)?.with_eigenvalues(eigenvalues))
}

/// Flattened (row-major) blocks of a channel at the grid positions of `spec`.
pub fn extract_block_samples(channel: &DMatrix<f64>, spec: &BlockSpec) -> Result<Vec<Vec<f64>>> {
    let (h, w) = channel.shape();
    let (rows, cols) = spec.grid(h, w)?;
    let n = spec.block_size;
    let mut out = Vec::with_capacity(rows * cols);
    for br in 0..rows {
        for bc in 0..cols {
            let mut block = Vec::with_capacity(n * n);
            for y in 0..n {
                for x in 0..n {
                    block.push(padded_value(
                        channel,
                        spec,
                        br * spec.stride + y,
                        bc * spec.stride + x,
                    ));
                }
            }
            out.push(block);
        }
    }
    Ok(out)
}
