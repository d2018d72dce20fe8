//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All of the linear algebra runs over `Complex<T>` for a real field `T`.
//! `f64` is the working precision used by the simulator and the tolerance
//! checks; `f32` is supported for throughput experiments.

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar usable as the field of the complex matrices.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive {
    /// Converts an `f64` literal. Infallible for IEEE floats.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_usize_exact(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }
}

impl<T> Real for T where T: RealField + Copy + FromPrimitive + ToPrimitive {}

/// `exp(j·2π·t)` with `t` given in cycles.
///
/// The integer part of `t` is removed before scaling so that large chirp
/// arguments such as `c·m²` keep full precision in the phase.
#[inline]
pub fn cis_cycles<T: Real>(t: T) -> Complex<T> {
    let frac = t - t.floor();
    let angle = T::two_pi() * frac;
    Complex::new(angle.cos(), angle.sin())
}

/// `exp(j·2π·k/n)` for integers, reduced exactly modulo `n`.
#[inline]
pub fn cis_ratio<T: Real>(k: i64, n: usize) -> Complex<T> {
    let n_i = n as i64;
    let r = k.rem_euclid(n_i);
    let angle = T::two_pi() * T::from_i64(r).unwrap() / T::from_usize_exact(n);
    Complex::new(angle.cos(), angle.sin())
}

/// Fractional part of `c·k` for an integer `k`, computed in `f64`.
#[inline]
pub fn frac_mul(c: f64, k: i64) -> f64 {
    let t = c * k as f64;
    t - t.floor()
}
