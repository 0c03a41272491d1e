//! Scalar abstraction shared by every numeric routine in the crate.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar: `f64` for production use, `f32` where memory
/// matters more than the last digits.
///
/// Tolerances quoted in `f64` terms are lifted through [`Scalar::tol`], which
/// never returns less than a small multiple of the type's machine epsilon.
pub trait Scalar:
    RealField + Copy + FromPrimitive + ToPrimitive + std::fmt::Display + Send + Sync + 'static
{
    const INFINITY: Self;
    const NEG_INFINITY: Self;
    const EPSILON: Self;

    /// Converts an `f64` literal. Panics only on types that cannot hold it.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("scalar literal out of range")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("integer not representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `base` tolerance, floored at 256 ulps of one.
    #[inline]
    fn tol(base: f64) -> Self {
        let floor = Self::EPSILON * Self::lit(256.0);
        let b = Self::lit(base);
        if b > floor {
            b
        } else {
            floor
        }
    }

    #[inline]
    #[allow(clippy::eq_op)]
    fn is_nan_value(self) -> bool {
        self != self
    }
}

impl Scalar for f64 {
    const INFINITY: Self = f64::INFINITY;
    const NEG_INFINITY: Self = f64::NEG_INFINITY;
    const EPSILON: Self = f64::EPSILON;
}

impl Scalar for f32 {
    const INFINITY: Self = f32::INFINITY;
    const NEG_INFINITY: Self = f32::NEG_INFINITY;
    const EPSILON: Self = f32::EPSILON;
}

/// Numerically stable `log Σ exp(x_i)`; empty or all `-inf` input gives `-inf`.
pub fn log_sum_exp<T: Scalar>(xs: impl IntoIterator<Item = T> + Clone) -> T {
    let mut max = T::NEG_INFINITY;
    for x in xs.clone() {
        if x > max {
            max = x;
        }
    }
    if max == T::NEG_INFINITY {
        return max;
    }
    if max == T::INFINITY {
        return max;
    }
    let s = xs.into_iter().fold(T::zero(), |acc, x| acc + (x - max).exp());
    max + s.ln()
}

/// Pairwise (cascade) summation. Result depends only on the order of `xs`.
pub fn pairwise_sum<T: Scalar>(xs: &[T]) -> T {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().fold(T::zero(), |a, &b| a + b);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Mean and standard error of the mean (sample std / √n) with pairwise sums.
pub fn mean_and_std_error<T: Scalar>(xs: &[T]) -> (T, T) {
    let n = xs.len();
    if n == 0 {
        return (T::zero(), T::zero());
    }
    let nf = T::from_usize_lossy(n);
    let mean = pairwise_sum(xs) / nf;
    if n < 2 {
        return (mean, T::zero());
    }
    let dev: Vec<T> = xs.iter().map(|&x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / T::from_usize_lossy(n - 1);
    (mean, (var / nf).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_matches_naive() {
        let xs = [0.1f64, -2.0, 3.5];
        let naive = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(xs.iter().copied()) - naive).abs() < 1e-14);
        assert_eq!(log_sum_exp(std::iter::empty::<f64>()), f64::NEG_INFINITY);
    }

    #[test]
    fn lse_survives_large_arguments() {
        let v = log_sum_exp([1000.0f64, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn pairwise_is_exact_on_integers() {
        let xs: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 500500.0);
    }

    #[test]
    fn tolerance_floor_tracks_precision() {
        assert_eq!(f64::tol(1e-12), 1e-12);
        assert!(f32::tol(1e-12) > 1e-6);
    }
}
