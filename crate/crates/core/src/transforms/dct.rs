use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::{TransformKind, TransformMatrix};
use crate::encoder::zigzag_order;
use crate::error::{Error, Result};

/// Orthonormal DCT-II matrix; row `k` is the `k`-th cosine basis, row 0 the
/// constant one.
pub fn dct_matrix_1d(n: usize) -> Result<TransformMatrix> {
    if n == 0 {
        return Err(Error::invalid("DCT size must be at least 1"));
    }
    let nf = n as f64;
    let m = DMatrix::from_fn(n, n, |k, i| {
        let scale = if k == 0 {
            (1.0 / nf).sqrt()
        } else {
            (2.0 / nf).sqrt()
        };
        scale * (PI / nf * (i as f64 + 0.5) * k as f64).cos()
    });
    TransformMatrix::new(TransformKind::Dct, m)
}

/// The `n²` 2-D DCT basis images in zigzag order. Image `(v, u)` is the outer
/// product of 1-D rows `v` and `u`.
pub fn dct_basis_images(n: usize) -> Result<Vec<DMatrix<f64>>> {
    let t = dct_matrix_1d(n)?;
    let c = t.entries();
    Ok(zigzag_order(n)
        .into_iter()
        .map(|(v, u)| DMatrix::from_fn(n, n, |y, x| c[(v, y)] * c[(u, x)]))
        .collect())
}

/// The flattened `n² × n²` analysis matrix of the 2-D DCT with rows in zigzag
/// order, i.e. row `k` is the `k`-th zigzag basis image in row-major layout.
pub fn dct_matrix_2d(n: usize) -> Result<TransformMatrix> {
    let images = dct_basis_images(n)?;
    let d = n * n;
    let m = DMatrix::from_fn(d, d, |k, p| images[k][(p / n, p % n)]);
    TransformMatrix::new(TransformKind::Dct, m)
}
