//! Change-of-basis matrices and block transforms.
//!
//! A [`TransformMatrix`] is stored as an *analysis* matrix `A`: coefficients
//! are `A · x` and the signal is recovered as `A⁻¹ · y`, so the basis vectors
//! are the columns of `A⁻¹` (the rows of `A` when `A` is orthonormal).
//!
//! Two shapes are accepted by the block transforms:
//! * separable, `dim == n`: a block `X` maps to `A · X · Aᵀ` (the 2-D DCT);
//! * flattened, `dim == n²`: the row-major block vector maps to `A · vec(X)`
//!   (PCA and the random baselines, which have no separable structure).

mod block;
mod color;
mod dct;
mod pca;
mod random;

pub use block::{
    forward_block_transform, inverse_block_transform, tile_blocks, BlockBasis, BlockSpec,
    CoefficientGrid,
};
pub use color::{rgb_to_ycbcr, ycbcr_pixel};
pub use dct::{dct_basis_images, dct_matrix_1d, dct_matrix_2d};
pub use pca::{extract_block_samples, pca_matrix};
pub use random::{random_matrix, random_orthonormal_matrix};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransformKind {
    Dct,
    Pca,
    RandomOrthonormal,
    Random,
}

impl TransformKind {
    pub fn is_orthonormal(self) -> bool {
        !matches!(self, TransformKind::Random)
    }

    /// Whether the basis order carries a significance ranking.
    pub fn is_ranked(self) -> bool {
        matches!(self, TransformKind::Dct | TransformKind::Pca)
    }

    pub fn name(self) -> &'static str {
        match self {
            TransformKind::Dct => "dct",
            TransformKind::Pca => "pca",
            TransformKind::RandomOrthonormal => "rand-ortho",
            TransformKind::Random => "rand",
        }
    }
}

impl std::str::FromStr for TransformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dct" => Ok(TransformKind::Dct),
            "pca" => Ok(TransformKind::Pca),
            "rand-ortho" => Ok(TransformKind::RandomOrthonormal),
            "rand" => Ok(TransformKind::Random),
            other => Err(Error::invalid(format!("unknown transform kind `{other}`"))),
        }
    }
}

/// A square change-of-basis matrix together with its inverse.
#[derive(Debug, Clone)]
pub struct TransformMatrix {
    kind: TransformKind,
    entries: DMatrix<f64>,
    inverse: DMatrix<f64>,
    eigenvalues: Option<Vec<f64>>,
}

impl TransformMatrix {
    /// Wraps an analysis matrix. Orthonormal kinds use the transpose as the
    /// inverse; `Random` is inverted explicitly.
    pub fn new(kind: TransformKind, entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.nrows() != entries.ncols() {
            return Err(Error::invalid(format!(
                "transform matrix must be square and non-empty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("transform matrix has non-finite entries"));
        }
        let inverse = if kind.is_orthonormal() {
            let err = orthonormality_error(&entries);
            if err > 1e-9 {
                return Err(Error::invalid(format!(
                    "{} matrix is not orthonormal (max |AᵀA − I| = {err:e})",
                    kind.name()
                )));
            }
            entries.transpose()
        } else {
            entries
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::IllConditioned("transform matrix is singular".into()))?
        };
        Ok(TransformMatrix {
            kind,
            entries,
            inverse,
            eigenvalues: None,
        })
    }

    pub(crate) fn with_eigenvalues(mut self, eigenvalues: Vec<f64>) -> Self {
        self.eigenvalues = Some(eigenvalues);
        self
    }

    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ranked(&self) -> bool {
        self.kind.is_ranked()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    /// Basis vector `k`: column `k` of the inverse.
    pub fn basis(&self, k: usize) -> Vec<f64> {
        self.inverse.column(k).iter().copied().collect()
    }

    /// PCA eigenvalues, non-increasing.
    pub fn eigenvalues(&self) -> Option<&[f64]> {
        self.eigenvalues.as_deref()
    }
}

/// `max |AᵀA − I|`.
pub fn orthonormality_error(a: &DMatrix<f64>) -> f64 {
    let gram = a.transpose() * a;
    let n = gram.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

/// Builds the transform a run is configured for. `pca_samples` are flattened
/// training blocks and are only consulted for [`TransformKind::Pca`].
pub fn build_transform(
    kind: TransformKind,
    block_size: usize,
    seed: u64,
    pca_samples: Option<&[Vec<f64>]>,
) -> Result<TransformMatrix> {
    match kind {
        TransformKind::Dct => dct_matrix_1d(block_size),
        TransformKind::Pca => {
            let samples = pca_samples.ok_or_else(|| {
                Error::config("PCA transform requires training blocks to estimate covariance")
            })?;
            pca_matrix(samples, block_size)
        }
        TransformKind::RandomOrthonormal => {
            random_orthonormal_matrix(block_size * block_size, seed)
        }
        TransformKind::Random => random_matrix(block_size * block_size, seed),
    }
}
