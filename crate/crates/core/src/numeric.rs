//! Working-precision scalars shared by every module.
//!
//! Lengths and points are MPFR floats at a configurable significand width.
//! A *separation floor* `2^-floor_bits` bounds how close two distinct
//! breakpoints (or two competing lengths) may be before a computation is
//! refused with [`Error::PrecisionExhausted`](crate::Error) or
//! [`Error::TieBreakUndefined`](crate::Error). Points closer than
//! `2^-(bits-16)` are treated as the same point (they differ by rounding only).

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rug::float::Constant;
use rug::integer::Order;
use rug::{Float, Integer};
use serde::{Deserialize, Serialize};

/// Default significand width in bits.
pub const DEFAULT_BITS: u32 = 128;
/// Default separation floor exponent (`2^-90`).
pub const DEFAULT_FLOOR_BITS: u32 = 90;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Precision {
    pub bits: u32,
    pub floor_bits: u32,
}

impl Default for Precision {
    fn default() -> Self {
        Precision { bits: DEFAULT_BITS, floor_bits: DEFAULT_FLOOR_BITS }
    }
}

impl Precision {
    /// Precision with the floor placed 38 bits above the rounding level,
    /// which reproduces the default pair (128, 90).
    pub fn with_bits(bits: u32) -> Self {
        let bits = bits.max(64);
        Precision { bits, floor_bits: bits - 38 }
    }

    pub fn float(&self, v: f64) -> Float {
        Float::with_val(self.bits, v)
    }

    pub fn zero(&self) -> Float {
        Float::new(self.bits)
    }

    pub fn floor(&self) -> Float {
        Float::with_val(self.bits, 1u32) >> self.floor_bits
    }

    /// Gap below which two computed points are considered identical.
    pub fn merge_tolerance(&self) -> Float {
        Float::with_val(self.bits, 1u32) >> (self.bits - 16)
    }
}

/// Uniform sample in `[0, 1)` carrying `prec` random bits.
pub fn uniform_float<R: RngCore + ?Sized>(rng: &mut R, prec: u32) -> Float {
    let words = (prec as usize).div_ceil(64) + 1;
    loop {
        let digits: Vec<u64> = (0..words).map(|_| rng.next_u64()).collect();
        let int = Integer::from_digits(&digits, Order::Lsf);
        let mut f = Float::with_val(prec, int);
        f >>= (64 * words) as u32;
        if f < 1u32 {
            return f;
        }
    }
}

/// Sample from the uniform (Dirichlet(1,...,1)) law on the open simplex.
pub fn sample_simplex<R: RngCore + ?Sized>(rng: &mut R, d: usize, prec: u32) -> Vec<Float> {
    let mut exps: Vec<Float> = Vec::with_capacity(d);
    for _ in 0..d {
        let mut u = uniform_float(rng, prec);
        while u == 0u32 {
            u = uniform_float(rng, prec);
        }
        let e = -u.ln();
        exps.push(e);
    }
    let total = Float::with_val(prec, Float::sum(exps.iter()));
    exps.into_iter().map(|e| e / &total).collect()
}

/// [`sample_simplex`] driven by a ChaCha8 stream seeded with `seed`.
pub fn seeded_simplex(seed: u64, d: usize, prec: u32) -> Vec<Float> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    sample_simplex(&mut rng, d, prec)
}

pub fn sum_floats(prec: u32, xs: &[Float]) -> Float {
    Float::with_val(prec, Float::sum(xs.iter()))
}

/// Reduce into `[0, 1)`.
pub fn frac(x: &Float) -> Float {
    let mut r = x.clone() - x.clone().floor();
    if r >= 1u32 {
        r -= 1u32;
    }
    r
}

pub fn two_pi(prec: u32) -> Float {
    Float::with_val(prec, Constant::Pi) * 2u32
}

/// `exp(2 pi i t)` in double precision, with `t` reduced modulo 1 first.
pub fn cis_turns(t: f64) -> Complex64 {
    let r = t - t.floor();
    let a = 2.0 * PI * r;
    Complex64::new(a.cos(), a.sin())
}

/// Complex number with MPFR real and imaginary parts.
#[derive(Clone, Debug, PartialEq)]
pub struct HiComplex {
    pub re: Float,
    pub im: Float,
}

impl HiComplex {
    pub fn zero(prec: u32) -> Self {
        HiComplex { re: Float::new(prec), im: Float::new(prec) }
    }

    pub fn real<T>(prec: u32, v: T) -> Self
    where
        Float: rug::Assign<T>,
    {
        HiComplex { re: Float::with_val(prec, v), im: Float::new(prec) }
    }

    /// `exp(2 pi i t)` at the precision of `t`.
    pub fn cis_turns(t: &Float) -> Self {
        let prec = t.prec();
        let angle = frac(t) * two_pi(prec);
        let (s, c) = angle.sin_cos(Float::new(prec));
        HiComplex { re: c, im: s }
    }

    pub fn prec(&self) -> u32 {
        self.re.prec()
    }

    pub fn abs(&self) -> Float {
        Float::with_val(self.prec(), self.re.clone().hypot(&self.im))
    }

    pub fn norm_sqr(&self) -> Float {
        Float::with_val(self.prec(), self.re.clone().square() + self.im.clone().square())
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn div(&self, other: &HiComplex) -> HiComplex {
        let prec = self.prec();
        let den = other.norm_sqr();
        let re = Float::with_val(prec, &self.re * &other.re) + Float::with_val(prec, &self.im * &other.im);
        let im = Float::with_val(prec, &self.im * &other.re) - Float::with_val(prec, &self.re * &other.im);
        HiComplex { re: re / &den, im: im / &den }
    }

    pub fn scale_int(&self, k: &Integer) -> HiComplex {
        HiComplex { re: self.re.clone() * k, im: self.im.clone() * k }
    }

    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }
}

impl Add for &HiComplex {
    type Output = HiComplex;
    fn add(self, o: &HiComplex) -> HiComplex {
        HiComplex { re: self.re.clone() + &o.re, im: self.im.clone() + &o.im }
    }
}

impl Sub for &HiComplex {
    type Output = HiComplex;
    fn sub(self, o: &HiComplex) -> HiComplex {
        HiComplex { re: self.re.clone() - &o.re, im: self.im.clone() - &o.im }
    }
}

impl Mul for &HiComplex {
    type Output = HiComplex;
    fn mul(self, o: &HiComplex) -> HiComplex {
        let prec = self.prec();
        let re = Float::with_val(prec, &self.re * &o.re) - Float::with_val(prec, &self.im * &o.im);
        let im = Float::with_val(prec, &self.re * &o.im) + Float::with_val(prec, &self.im * &o.re);
        HiComplex { re, im }
    }
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut k = 2u64;
    while k * k <= n {
        if n.is_multiple_of(k) {
            return false;
        }
        k += 1;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_samples_are_in_unit_interval_with_full_precision() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let u = uniform_float(&mut rng, 200);
            assert!((0u32..1u32).contains(&u));
            assert_eq!(u.prec(), 200);
        }
    }

    #[test]
    fn simplex_sample_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let lam = sample_simplex(&mut rng, 5, 128);
        let s = sum_floats(128, &lam);
        let err = (s - 1u32).abs();
        assert!(err < Float::with_val(128, 1u32) >> 120u32);
        assert!(lam.iter().all(|x| x.is_sign_positive() && !x.is_zero()));
    }

    #[test]
    fn cis_has_unit_modulus() {
        let t = Float::with_val(128, 0.3719);
        let z = HiComplex::cis_turns(&t);
        let err = (z.abs() - 1u32).abs();
        assert!(err < Float::with_val(128, 1u32) >> 120u32);
        let half = HiComplex::cis_turns(&Float::with_val(128, 0.5));
        assert!((half.re.to_f64() + 1.0).abs() < 1e-30);
    }

    #[test]
    fn complex_division_inverts_multiplication() {
        let a = HiComplex { re: Float::with_val(128, 1.5), im: Float::with_val(128, -2.0) };
        let b = HiComplex { re: Float::with_val(128, 0.25), im: Float::with_val(128, 3.0) };
        let q = (&a * &b).div(&b);
        assert!((q.re.to_f64() - 1.5).abs() < 1e-30);
        assert!((q.im.to_f64() + 2.0).abs() < 1e-30);
    }

    #[test]
    fn primes() {
        let ps: Vec<u64> = (0..20).filter(|&n| is_prime(n)).collect();
        assert_eq!(ps, vec![2, 3, 5, 7, 11, 13, 17, 19]);
    }
}
