//! Exact arithmetic in `Z[ω]`, `ω = exp(2πi/p)` for a prime `p`.
//!
//! Elements are kept in the power basis `1, ω, ..., ω^{p-2}` after reducing
//! by `1 + ω + ... + ω^{p-1} = 0`. Ranks over `Q(ω)` are computed through the
//! regular representation: a matrix over `Q(ω)` of rank `r` becomes a rational
//! block matrix of rank `r (p - 1)`.

use num_complex::Complex64;
use rug::Integer;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::IntMatrix;
use crate::numeric::{cis_turns, is_prime};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CycloInt {
    p: u64,
    /// Coordinates on `1, ω, ..., ω^{p-2}`.
    coeffs: Vec<i64>,
}

impl CycloInt {
    pub fn zero(p: u64) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        Ok(CycloInt { p, coeffs: vec![0; p as usize - 1] })
    }

    pub fn from_int(p: u64, c: i64) -> Result<Self> {
        let mut z = Self::zero(p)?;
        z.coeffs[0] = c;
        Ok(z)
    }

    /// `ω^r`.
    pub fn root(p: u64, r: i64) -> Result<Self> {
        let mut z = Self::zero(p)?;
        z.add_root(r, 1);
        Ok(z)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn coeffs(&self) -> &[i64] {
        &self.coeffs
    }

    /// `self += c ω^r`.
    pub fn add_root(&mut self, r: i64, c: i64) {
        let r = r.rem_euclid(self.p as i64) as usize;
        if r + 1 == self.p as usize {
            for x in self.coeffs.iter_mut() {
                *x -= c;
            }
        } else {
            self.coeffs[r] += c;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }

    /// The integer `c` if the element lies in `Z`.
    pub fn as_integer(&self) -> Option<i64> {
        self.coeffs[1..].iter().all(|&c| c == 0).then_some(self.coeffs[0])
    }

    pub fn add(&self, other: &CycloInt) -> CycloInt {
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        CycloInt { p: self.p, coeffs }
    }

    pub fn neg(&self) -> CycloInt {
        CycloInt { p: self.p, coeffs: self.coeffs.iter().map(|c| -c).collect() }
    }

    pub fn mul(&self, other: &CycloInt) -> CycloInt {
        let mut out = CycloInt { p: self.p, coeffs: vec![0; self.coeffs.len()] };
        for (i, a) in self.coeffs.iter().enumerate() {
            if *a == 0 {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out.add_root((i + j) as i64, a * b);
            }
        }
        out
    }

    pub fn to_complex(&self) -> Complex64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(r, &c)| cis_turns(r as f64 / self.p as f64) * c as f64)
            .sum()
    }

    /// Matrix of multiplication by `self` on the power basis.
    pub fn regular_matrix(&self) -> Vec<Vec<i64>> {
        let n = self.coeffs.len();
        let mut m = vec![vec![0i64; n]; n];
        for j in 0..n {
            let mut e = CycloInt { p: self.p, coeffs: vec![0; n] };
            e.coeffs[j] = 1;
            let col = self.mul(&e);
            for i in 0..n {
                m[i][j] = col.coeffs[i];
            }
        }
        m
    }
}

/// Rank over `Q(ω)` of a rectangular matrix with entries in `Z[ω]`.
///
/// A reduction modulo a prime `q ≡ 1 (mod p)` gives a lower bound. It is
/// exact when it reaches `min(rows, cols)`, or when it is `cols - 1` and the
/// signed maximal minors of an independent row set give an exact kernel
/// vector. Otherwise the rational block rank decides.
pub fn rank_over_cyclotomic(rows: &[Vec<CycloInt>]) -> Result<usize> {
    let Some(first) = rows.first().and_then(|r| r.first()) else {
        return Ok(0);
    };
    let p = first.p;
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::DimensionMismatch { expected: cols, got: rows.iter().map(|r| r.len()).find(|&l| l != cols).unwrap() });
    }
    if rows.iter().flatten().any(|z| z.p != p) {
        return Err(Error::InvalidConfig("mixed cyclotomic fields".into()));
    }
    let (r, pivot_rows) = modular_rank(rows, p);
    if r == rows.len().min(cols) {
        return Ok(r);
    }
    if r + 1 == cols && cols <= 6 {
        let sub: Vec<&Vec<CycloInt>> = pivot_rows.iter().map(|&i| &rows[i]).collect();
        let v: Vec<CycloInt> = (0..cols)
            .map(|j| {
                let minor: Vec<Vec<CycloInt>> = sub
                    .iter()
                    .map(|row| row.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, z)| z.clone()).collect())
                    .collect();
                let det = cyclo_det(&minor, p);
                if j % 2 == 1 {
                    det.neg()
                } else {
                    det
                }
            })
            .collect();
        let in_kernel = rows.iter().all(|row| {
            row.iter().zip(&v).fold(CycloInt { p, coeffs: vec![0; p as usize - 1] }, |acc, (a, b)| acc.add(&a.mul(b))).is_zero()
        });
        if v.iter().any(|z| !z.is_zero()) && in_kernel {
            return Ok(r);
        }
    }
    block_rank(rows)
}

/// Smallest prime `q ≡ 1 (mod p)` above `2^30` and an element of order `p` in `F_q`.
fn modular_field(p: u64) -> (u64, u64) {
    let mut q = (1u64 << 30) / p * p + 1;
    loop {
        if is_prime(q) {
            for g in 2..q {
                let w = pow_mod(g, (q - 1) / p, q);
                if w != 1 {
                    return (q, w);
                }
            }
        }
        q += p;
    }
}

fn pow_mod(mut b: u64, mut e: u64, q: u64) -> u64 {
    let mut r = 1u64;
    b %= q;
    while e > 0 {
        if e & 1 == 1 {
            r = ((r as u128 * b as u128) % q as u128) as u64;
        }
        b = ((b as u128 * b as u128) % q as u128) as u64;
        e >>= 1;
    }
    r
}

/// Rank of the image in `F_q` and the original indices of an independent row set.
fn modular_rank(rows: &[Vec<CycloInt>], p: u64) -> (usize, Vec<usize>) {
    let (q, w) = modular_field(p);
    let powers: Vec<u64> = (0..p).map(|r| pow_mod(w, r, q)).collect();
    let reduce = |z: &CycloInt| -> u64 {
        z.coeffs.iter().enumerate().fold(0u64, |acc, (r, &c)| {
            let c = c.rem_euclid(q as i64) as u64;
            ((acc as u128 + c as u128 * powers[r] as u128) % q as u128) as u64
        })
    };
    let mut a: Vec<(usize, Vec<u64>)> = rows.iter().enumerate().map(|(i, r)| (i, r.iter().map(reduce).collect())).collect();
    let cols = rows[0].len();
    let mut rank = 0;
    let mut picked = Vec::new();
    for c in 0..cols {
        let Some(piv) = (rank..a.len()).find(|&i| a[i].1[c] != 0) else { continue };
        a.swap(rank, piv);
        let inv = pow_mod(a[rank].1[c], q - 2, q);
        let prow = a[rank].1.clone();
        for (_, row) in a.iter_mut().skip(rank + 1) {
            if row[c] == 0 {
                continue;
            }
            let f = (row[c] as u128 * inv as u128 % q as u128) as u64;
            for (x, y) in row.iter_mut().zip(&prow).skip(c) {
                let sub = (f as u128 * *y as u128 % q as u128) as u64;
                *x = (*x + q - sub) % q;
            }
        }
        picked.push(a[rank].0);
        rank += 1;
    }
    (rank, picked)
}

/// Determinant by cofactor expansion; for the small minors above.
fn cyclo_det(m: &[Vec<CycloInt>], p: u64) -> CycloInt {
    let n = m.len();
    if n == 0 {
        return CycloInt { p, coeffs: { let mut c = vec![0; p as usize - 1]; c[0] = 1; c } };
    }
    let mut acc = CycloInt { p, coeffs: vec![0; p as usize - 1] };
    for j in 0..n {
        if m[0][j].is_zero() {
            continue;
        }
        let minor: Vec<Vec<CycloInt>> =
            m[1..].iter().map(|row| row.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, z)| z.clone()).collect()).collect();
        let term = m[0][j].mul(&cyclo_det(&minor, p));
        acc = if j % 2 == 0 { acc.add(&term) } else { acc.add(&term.neg()) };
    }
    acc
}

/// Rank through the rational regular representation.
pub fn block_rank(rows: &[Vec<CycloInt>]) -> Result<usize> {
    let Some(first) = rows.first().and_then(|r| r.first()) else {
        return Ok(0);
    };
    let p = first.p;
    let n = p as usize - 1;
    let cols = rows[0].len();
    let mut big = IntMatrix::zeros(rows.len() * n, cols * n);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::DimensionMismatch { expected: cols, got: row.len() });
        }
        for (j, z) in row.iter().enumerate() {
            if z.p != p {
                return Err(Error::InvalidConfig("mixed cyclotomic fields".into()));
            }
            if z.is_zero() {
                continue;
            }
            let m = z.regular_matrix();
            for (a, mrow) in m.iter().enumerate() {
                for (b, &v) in mrow.iter().enumerate() {
                    if v != 0 {
                        big[(i * n + a, j * n + b)] = Integer::from(v);
                    }
                }
            }
        }
    }
    let r = big.rank();
    debug_assert_eq!(r % n, 0);
    Ok(r / n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_roots_vanishes() {
        let mut z = CycloInt::zero(5).unwrap();
        for r in 0..5 {
            z.add_root(r, 1);
        }
        assert!(z.is_zero());
    }

    #[test]
    fn multiplication_matches_complex() {
        let a = CycloInt::root(7, 3).unwrap().add(&CycloInt::from_int(7, 2).unwrap());
        let b = CycloInt::root(7, 5).unwrap().add(&CycloInt::root(7, 6).unwrap());
        let exact = a.mul(&b).to_complex();
        let approx = a.to_complex() * b.to_complex();
        assert!((exact - approx).norm() < 1e-12);
    }

    #[test]
    fn vandermonde_rank() {
        let p = 5;
        let rows: Vec<Vec<CycloInt>> =
            (0..p).map(|j| (0..p).map(|k| CycloInt::root(p, (j * k) as i64).unwrap()).collect()).collect();
        assert_eq!(rank_over_cyclotomic(&rows).unwrap(), 5);
        let dup = vec![rows[1].clone(), rows[1].clone(), rows[2].clone()];
        assert_eq!(rank_over_cyclotomic(&dup).unwrap(), 2);
    }

    #[test]
    fn rank_detects_field_dependence() {
        let p = 3;
        let w = CycloInt::root(p, 1).unwrap();
        let one = CycloInt::from_int(p, 1).unwrap();
        let rows = vec![vec![one.clone(), w.clone()], vec![w.clone(), w.mul(&w)]];
        assert_eq!(rank_over_cyclotomic(&rows).unwrap(), 1);
        assert_eq!(block_rank(&rows).unwrap(), 1);
    }

    #[test]
    fn certified_rank_agrees_with_block_rank() {
        let p = 5;
        let mut seed = 7u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 33) as i64
        };
        for trial in 0..40 {
            let (m, n) = (3 + trial % 3, 3 + trial % 2);
            let mut rows: Vec<Vec<CycloInt>> = (0..m)
                .map(|_| {
                    (0..n)
                        .map(|_| {
                            let mut z = CycloInt::zero(p).unwrap();
                            for _ in 0..2 {
                                z.add_root(next() % 5, next() % 3 - 1);
                            }
                            z
                        })
                        .collect()
                })
                .collect();
            if trial % 4 == 0 {
                // force a kernel vector: last column = ω · first column
                let w = CycloInt::root(p, 1).unwrap();
                for row in rows.iter_mut() {
                    let v = row[0].mul(&w);
                    row[n - 1] = v;
                }
            }
            assert_eq!(rank_over_cyclotomic(&rows).unwrap(), block_rank(&rows).unwrap(), "trial {trial}");
        }
    }

    #[test]
    fn non_prime_rejected() {
        assert!(matches!(CycloInt::zero(6), Err(Error::NotPrime(6))));
    }
}
