use crate::error::{invalid, Result};

/// Scale of the piecewise-linear spike pseudo-derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateParams {
    pub gamma: f64,
}

impl SurrogateParams {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma > 0.0 && gamma.is_finite() {
            Ok(SurrogateParams { gamma })
        } else {
            Err(invalid(format!(
                "surrogate scale must be positive, got {gamma}"
            )))
        }
    }
}

impl Default for SurrogateParams {
    fn default() -> Self {
        SurrogateParams { gamma: 0.3 }
    }
}

/// `γ · max(0, 1 − |u − v_th| / v_th)`: a hat of height γ centred on the
/// threshold, supported on `(0, 2·v_th)`.
pub fn surrogate_grad(u: f64, v_th: f64, params: &SurrogateParams) -> f64 {
    params.gamma * (1.0 - ((u - v_th) / v_th).abs()).max(0.0)
}

#[inline]
pub(crate) fn surrogate_f32(u: f32, v_th: f32, gamma: f32) -> f32 {
    gamma * (1.0 - ((u - v_th) / v_th).abs()).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let p = SurrogateParams::default();
        assert_eq!(surrogate_grad(2.0, 2.0, &p), 0.3);
        assert_eq!(surrogate_grad(0.0, 2.0, &p), 0.0);
        assert!((surrogate_grad(3.0, 2.0, &p) - 0.15).abs() < 1e-15);
        assert!(SurrogateParams::new(0.0).is_err());
    }

    proptest! {
        #[test]
        fn symmetric_and_supported(d in 0.0f64..3.0, v in 0.1f64..5.0) {
            let p = SurrogateParams::default();
            let a = surrogate_grad(v + d * v, v, &p);
            let b = surrogate_grad(v - d * v, v, &p);
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!(a <= p.gamma);
            if d >= 1.0 {
                prop_assert_eq!(a, 0.0);
            } else {
                prop_assert!(a > 0.0);
            }
        }
    }
}
