use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{TransformKind, TransformMatrix};
use crate::error::{Error, Result};
use crate::rng::substream;

fn gaussian(dim: usize, seed: u64, label: &str) -> DMatrix<f64> {
    let mut rng = substream(seed, label, 0);
    // column-major fill keeps the draw order independent of nalgebra internals
    let values: Vec<f64> = (0..dim * dim).map(|_| rng.sample(StandardNormal)).collect();
    DMatrix::from_column_slice(dim, dim, &values)
}

/// Orthonormalizes the columns of a seeded Gaussian matrix with modified
/// Gram–Schmidt, run twice for numerical orthogonality.
pub fn random_orthonormal_matrix(dim: usize, seed: u64) -> Result<TransformMatrix> {
    if dim == 0 {
        return Err(Error::invalid("transform dimension must be at least 1"));
    }
    let mut attempt = 0u64;
    loop {
        let mut q = gaussian(dim, seed.wrapping_add(attempt), "transform-orthonormal");
        if modified_gram_schmidt(&mut q) {
            return TransformMatrix::new(TransformKind::RandomOrthonormal, q);
        }
        attempt += 1;
    }
}

fn modified_gram_schmidt(q: &mut DMatrix<f64>) -> bool {
    let n = q.ncols();
    for j in 0..n {
        for _pass in 0..2 {
            for i in 0..j {
                let proj = q.column(i).dot(&q.column(j));
                let qi = q.column(i).clone_owned();
                q.column_mut(j).axpy(-proj, &qi, 1.0);
            }
        }
        let norm = q.column(j).norm();
        if norm < 1e-8 {
            return false;
        }
        q.column_mut(j).scale_mut(1.0 / norm);
    }
    true
}

/// Seeded Gaussian matrix with no orthonormality; reconstruction uses its
/// explicit inverse. Draws with a condition estimate above 1e8 are discarded
/// and redrawn from the next seed.
pub fn random_matrix(dim: usize, seed: u64) -> Result<TransformMatrix> {
    if dim == 0 {
        return Err(Error::invalid("transform dimension must be at least 1"));
    }
    let mut s = seed;
    loop {
        let a = gaussian(dim, s, "transform-random");
        if let Some(inv) = a.clone().try_inverse() {
            let cond = a.norm() * inv.norm();
            if cond.is_finite() && cond < 1e8 {
                return TransformMatrix::new(TransformKind::Random, a);
            }
        }
        s = s.wrapping_add(1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::orthonormality_error;

    #[test]
    fn orthonormal_and_deterministic() {
        for dim in [1, 2, 4, 16, 64] {
            let a = random_orthonormal_matrix(dim, 42).unwrap();
            let b = random_orthonormal_matrix(dim, 42).unwrap();
            assert!(orthonormality_error(a.entries()) <= 1e-10);
            assert_eq!(a.entries().as_slice(), b.entries().as_slice());
            assert!((a.entries().determinant().abs() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn random_inverse_holds() {
        let t = random_matrix(16, 5).unwrap();
        let prod = t.entries() * t.inverse();
        let id = DMatrix::<f64>::identity(16, 16);
        assert!((prod - id).amax() < 1e-8);
        assert!(orthonormality_error(t.entries()) > 1e-3);
        let again = random_matrix(16, 5).unwrap();
        assert_eq!(t.entries().as_slice(), again.entries().as_slice());
    }

    #[test]
    fn seeds_differ() {
        let a = random_matrix(4, 1).unwrap();
        let b = random_matrix(4, 2).unwrap();
        assert_ne!(a.entries().as_slice(), b.entries().as_slice());
    }

    #[test]
    fn zero_dim_rejected() {
        assert!(random_matrix(0, 1).is_err());
        assert!(random_orthonormal_matrix(0, 1).is_err());
    }
}
