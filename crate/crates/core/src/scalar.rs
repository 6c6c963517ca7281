//! Scalar field abstraction shared by every engine.
//!
//! All numerical code is written once over [`Scalar`], which is implemented
//! for `f64` and `Complex<f64>`.

use nalgebra::{ComplexField, Complex};
use rand::Rng;

pub type Complex64 = Complex<f64>;

pub trait Scalar: ComplexField<RealField = f64> + Copy + Send + Sync + 'static {
    /// Storage width in bytes.
    const BYTES: usize;

    /// Uniform sample; real and imaginary parts each in [-1, 1).
    fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self;

    #[inline]
    fn abs_val(self) -> f64 {
        self.modulus()
    }
}

impl Scalar for f64 {
    const BYTES: usize = 8;

    fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random_range(-1.0..1.0)
    }
}

impl Scalar for Complex64 {
    const BYTES: usize = 16;

    fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }
}

/// Euclidean norm of a slice.
pub fn norm2<T: Scalar>(x: &[T]) -> f64 {
    x.iter().map(|v| v.modulus_squared()).sum::<f64>().sqrt()
}

/// `‖a - b‖ / ‖b‖`, or the absolute difference when `b` is zero.
pub fn relative_error<T: Scalar>(approx: &[T], exact: &[T]) -> f64 {
    assert_eq!(approx.len(), exact.len());
    let diff: f64 = approx
        .iter()
        .zip(exact)
        .map(|(a, b)| (*a - *b).modulus_squared())
        .sum::<f64>()
        .sqrt();
    let den = norm2(exact);
    if den == 0.0 {
        diff
    } else {
        diff / den
    }
}

/// Random vector with a fixed seed.
pub fn random_vector<T: Scalar>(n: usize, seed: u64) -> Vec<T> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| T::sample(&mut rng)).collect()
}
