//! Interval exchange maps, Birkhoff sums (plain and twisted), orbit partitions
//! and discrepancy.
//!
//! Sup-norms over `x` are exact: `n`-step sums are locally constant on the
//! common refinement of the pulled-back partitions, and the refinement is
//! built by pulling breakpoints back one step at a time together with the
//! running sum (`F_k(x) = g(x) + c(x) F_{k-1}(Tx)`).

use std::cmp::Ordering;

use num_complex::Complex64;
use rug::ops::RemRounding;
use rug::{Assign, Float, Integer};
use serde::ser::{Serialize, SerializeSeq, Serializer};

use crate::combinatorics::Permutation;
use crate::error::{Error, Result};
use crate::linalg::{IntMatrix, IntegerExt};
use crate::numeric::{cis_turns, frac, Precision};

#[derive(Clone, Debug)]
pub struct IetMap {
    perm: Permutation,
    lengths: Vec<Float>,
    total: Float,
    prec: Precision,
    /// Left endpoint of `I_α`, by letter.
    starts: Vec<Float>,
    /// Left endpoint of `T(I_α)`, by letter.
    image_starts: Vec<Float>,
    delta: Vec<Float>,
}

pub fn build_iet(lengths: Vec<Float>, perm: &Permutation, prec: Precision) -> Result<IetMap> {
    IetMap::new(perm.clone(), lengths, prec)
}

impl IetMap {
    pub fn new(perm: Permutation, lengths: Vec<Float>, prec: Precision) -> Result<Self> {
        let d = perm.d();
        if lengths.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: lengths.len() });
        }
        let lengths: Vec<Float> = lengths.into_iter().map(|l| Float::with_val(prec.bits, l)).collect();
        for (a, l) in lengths.iter().enumerate() {
            if !(l.is_finite() && *l > 0u32) {
                return Err(Error::NonPositiveLength { letter: a });
            }
        }
        let mut starts = vec![prec.zero(); d];
        let mut acc = prec.zero();
        for &a in perm.top() {
            starts[a].assign(&acc);
            acc += &lengths[a];
        }
        let total = acc;
        let mut image_starts = vec![prec.zero(); d];
        let mut acc = prec.zero();
        for &a in perm.bottom() {
            image_starts[a].assign(&acc);
            acc += &lengths[a];
        }
        let delta = (0..d).map(|a| Float::with_val(prec.bits, &image_starts[a] - &starts[a])).collect();
        Ok(IetMap { perm, lengths, total, prec, starts, image_starts, delta })
    }

    pub fn from_f64(perm: &Permutation, lengths: &[f64], prec: Precision) -> Result<Self> {
        Self::new(perm.clone(), lengths.iter().map(|&l| prec.float(l)).collect(), prec)
    }

    pub fn perm(&self) -> &Permutation {
        &self.perm
    }

    pub fn d(&self) -> usize {
        self.perm.d()
    }

    pub fn lengths(&self) -> &[Float] {
        &self.lengths
    }

    pub fn total(&self) -> &Float {
        &self.total
    }

    pub fn precision(&self) -> Precision {
        self.prec
    }

    pub fn delta(&self) -> &[Float] {
        &self.delta
    }

    pub fn start(&self, letter: usize) -> &Float {
        &self.starts[letter]
    }

    pub fn image_start(&self, letter: usize) -> &Float {
        &self.image_starts[letter]
    }

    /// Left endpoints of the domain intervals in increasing order (starts with 0).
    pub fn discontinuities(&self) -> Vec<Float> {
        self.perm.top().iter().map(|&a| self.starts[a].clone()).collect()
    }

    /// Letter whose interval contains `x`; a breakpoint belongs to the interval on its right.
    pub fn letter_at(&self, x: &Float) -> Letter {
        let top = self.perm.top();
        let i = top.partition_point(|&a| self.starts[a] <= *x);
        top[i.saturating_sub(1)]
    }

    pub fn apply(&self, x: &Float) -> Float {
        let a = self.letter_at(x);
        Float::with_val(self.prec.bits, x + &self.delta[a])
    }

    pub fn apply_assign(&self, x: &mut Float) -> Letter {
        let a = self.letter_at(x);
        *x += &self.delta[a];
        a
    }

    pub fn in_domain(&self, x: &Float) -> bool {
        !x.is_sign_negative() && *x < self.total
    }

    /// The map as sorted domain cells with their shifts.
    pub fn to_piecewise(&self) -> PiecewiseTranslation {
        let top = self.perm.top();
        PiecewiseTranslation {
            starts: top.iter().map(|&a| self.starts[a].clone()).collect(),
            shifts: top.iter().map(|&a| self.delta[a].clone()).collect(),
            letters: top.to_vec(),
            total: self.total.clone(),
            prec: self.prec,
        }
    }
}

pub type Letter = usize;

/// Complex values indexed by letter.
#[derive(Clone, Debug, PartialEq)]
pub struct LocallyConstantFunction {
    pub values: Vec<Complex64>,
}

impl LocallyConstantFunction {
    pub fn new(values: Vec<Complex64>) -> Self {
        LocallyConstantFunction { values }
    }

    pub fn real(values: &[f64]) -> Self {
        Self::new(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn indicator(d: usize, letter: usize) -> Self {
        let mut v = vec![Complex64::new(0.0, 0.0); d];
        v[letter] = Complex64::new(1.0, 0.0);
        Self::new(v)
    }

    pub fn constant(d: usize, c: f64) -> Self {
        Self::new(vec![Complex64::new(c, 0.0); d])
    }

    pub fn d(&self) -> usize {
        self.values.len()
    }

    pub fn eval(&self, t: &IetMap, x: &Float) -> Complex64 {
        self.values[t.letter_at(x)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `Σ λ_α f_α`.
    pub fn integral(&self, t: &IetMap) -> Complex64 {
        self.values.iter().zip(t.lengths()).map(|(v, l)| v * l.to_f64()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.norm() == 0.0)
    }
}

/// JSON shape: array of `[re, im]` pairs.
impl Serialize for LocallyConstantFunction {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.values.len()))?;
        for v in &self.values {
            seq.serialize_element(&[v.re, v.im])?;
        }
        seq.end()
    }
}

/// A point of the torus `R^d / Z^d`, kept as its representative in `[0,1)^d`.
#[derive(Clone, Debug, PartialEq)]
pub enum TwistParameter {
    Real(Vec<Float>),
    /// `num_α / den` with `0 ≤ num_α < den`.
    Rational { num: Vec<Integer>, den: Integer },
}

impl TwistParameter {
    pub fn zero(d: usize) -> Self {
        TwistParameter::Rational { num: vec![Integer::new(); d], den: Integer::from(1) }
    }

    pub fn real(values: Vec<Float>) -> Self {
        TwistParameter::Real(values.iter().map(frac).collect())
    }

    pub fn from_f64(values: &[f64], prec: Precision) -> Self {
        Self::real(values.iter().map(|&v| prec.float(v)).collect())
    }

    pub fn rational(num: &[i64], den: u64) -> Self {
        assert!(den > 0, "denominator must be positive");
        let den = Integer::from(den);
        let num = num.iter().map(|&n| Integer::from(n).rem_euc(&den)).collect();
        TwistParameter::Rational { num, den }
    }

    pub fn rational_from(num: Vec<Integer>, den: Integer) -> Self {
        let num = num.into_iter().map(|n| n.rem_euc(&den)).collect();
        TwistParameter::Rational { num, den }
    }

    pub fn d(&self) -> usize {
        match self {
            TwistParameter::Real(v) => v.len(),
            TwistParameter::Rational { num, .. } => num.len(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            TwistParameter::Real(v) => v.iter().all(|x| x.is_zero()),
            TwistParameter::Rational { num, .. } => num.iter().all(|x| x.is_zero()),
        }
    }

    /// Coordinate `α` in turns, in `[0, 1)`.
    pub fn turns(&self, a: usize) -> f64 {
        match self {
            TwistParameter::Real(v) => v[a].to_f64(),
            TwistParameter::Rational { num, den } => {
                let q = rug::Rational::from((num[a].clone(), den.clone()));
                q.to_f64()
            }
        }
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        (0..self.d()).map(|a| self.turns(a)).collect()
    }

    /// `exp(2πi ζ_α)` for each letter.
    pub fn phases(&self) -> Vec<Complex64> {
        (0..self.d()).map(|a| cis_turns(self.turns(a))).collect()
    }

    /// `B ζ mod Z^d`.
    pub fn apply_integer_matrix(&self, b: &IntMatrix) -> TwistParameter {
        match self {
            TwistParameter::Rational { num, den } => {
                TwistParameter::rational_from(b.mul_vec(num), den.clone())
            }
            TwistParameter::Real(v) => {
                let prec = v.first().map_or(crate::numeric::DEFAULT_BITS, |x| x.prec());
                let out = (0..b.rows())
                    .map(|i| {
                        let mut acc = Float::new(prec);
                        for (c, z) in b.row(i).iter().zip(v) {
                            if !c.is_zero() {
                                // Reduce the integer coefficient first: only c mod 1-periods matter
                                // up to the representative, but c·z must be formed exactly enough.
                                acc += Float::with_val(prec, z * c);
                                acc = frac(&acc);
                            }
                        }
                        acc
                    })
                    .collect();
                TwistParameter::Real(out)
            }
        }
    }

    /// Denominator of the reduced coordinates (1 for the zero vector); `None` for real twists.
    pub fn reduced_denominator(&self) -> Option<Integer> {
        match self {
            TwistParameter::Real(_) => None,
            TwistParameter::Rational { num, den } => {
                let g = num.iter().fold(den.clone(), |g, n| g.gcd(n));
                Some(Integer::from(den / &g))
            }
        }
    }
}

/// Running phase `S_k(ζ, x) mod 1`.
enum Phase {
    Real(Float),
    Rational(Integer),
}

impl Phase {
    fn new(z: &TwistParameter, prec: Precision) -> Self {
        match z {
            TwistParameter::Real(_) => Phase::Real(prec.zero()),
            TwistParameter::Rational { .. } => Phase::Rational(Integer::new()),
        }
    }

    fn turns(&self, z: &TwistParameter) -> f64 {
        match (self, z) {
            (Phase::Real(x), _) => x.to_f64(),
            (Phase::Rational(n), TwistParameter::Rational { den, .. }) => {
                rug::Rational::from((n.clone(), den.clone())).to_f64()
            }
            _ => unreachable!(),
        }
    }

    fn advance(&mut self, z: &TwistParameter, a: usize) {
        match (self, z) {
            (Phase::Real(x), TwistParameter::Real(v)) => {
                *x += &v[a];
                if *x >= 1u32 {
                    *x -= 1u32;
                }
            }
            (Phase::Rational(n), TwistParameter::Rational { num, den }) => {
                *n += &num[a];
                if *n >= *den {
                    *n -= den;
                }
            }
            _ => unreachable!(),
        }
    }
}

/// `Σ_{k<n} f(T^k x)` by direct iteration.
pub fn birkhoff_sum(t: &IetMap, f: &LocallyConstantFunction, x: &Float, n: usize) -> Complex64 {
    let mut y = Float::with_val(t.prec.bits, x);
    let mut s = Complex64::new(0.0, 0.0);
    for _ in 0..n {
        let a = t.apply_assign(&mut y);
        s += f.values[a];
    }
    s
}

/// `Σ_{k<n} exp(2πi S_k(ζ, x)) f(T^k x)`, phases accumulated modulo 1.
pub fn twisted_birkhoff_sum(
    t: &IetMap,
    f: &LocallyConstantFunction,
    zeta: &TwistParameter,
    x: &Float,
    n: usize,
) -> Complex64 {
    let mut y = Float::with_val(t.prec.bits, x);
    let mut phase = Phase::new(zeta, t.prec);
    let mut s = Complex64::new(0.0, 0.0);
    for _ in 0..n {
        let a = t.apply_assign(&mut y);
        s += cis_turns(phase.turns(zeta)) * f.values[a];
        phase.advance(zeta, a);
    }
    s
}

/// A bijective piecewise translation of `[0, total)`: cell `i` is
/// `[starts[i], starts[i+1])` and moves by `shifts[i]`.
#[derive(Clone, Debug)]
pub struct PiecewiseTranslation {
    pub starts: Vec<Float>,
    pub shifts: Vec<Float>,
    /// Letter of the base map on each cell (first letter visited for compositions).
    pub letters: Vec<Letter>,
    pub total: Float,
    pub prec: Precision,
}

impl PiecewiseTranslation {
    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn end(&self, i: usize) -> &Float {
        self.starts.get(i + 1).unwrap_or(&self.total)
    }

    pub fn cell_at(&self, x: &Float) -> usize {
        self.starts.partition_point(|s| s <= x).saturating_sub(1)
    }

    pub fn apply(&self, x: &Float) -> Float {
        let i = self.cell_at(x);
        Float::with_val(self.prec.bits, x + &self.shifts[i])
    }

    /// Split cells at the given points (points outside `(0, total)` are ignored).
    pub fn refine(&self, extra: &[Float]) -> PiecewiseTranslation {
        let tol = self.prec.merge_tolerance();
        let mut extra: Vec<&Float> = extra.iter().collect();
        extra.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        let mut out = PiecewiseTranslation {
            starts: Vec::new(),
            shifts: Vec::new(),
            letters: Vec::new(),
            total: self.total.clone(),
            prec: self.prec,
        };
        let mut e = 0usize;
        for i in 0..self.len() {
            out.starts.push(self.starts[i].clone());
            out.shifts.push(self.shifts[i].clone());
            out.letters.push(self.letters[i]);
            let end = self.end(i);
            while e < extra.len() && *extra[e] < *end {
                let p = extra[e];
                let lo = Float::with_val(self.prec.bits, &self.starts[i] + &tol);
                let hi = Float::with_val(self.prec.bits, end - &tol);
                if *p > lo && *p < hi {
                    out.starts.push(p.clone());
                    out.shifts.push(self.shifts[i].clone());
                    out.letters.push(self.letters[i]);
                }
                e += 1;
            }
        }
        out
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn after(&self, first: &PiecewiseTranslation) -> PiecewiseTranslation {
        let tol = self.prec.merge_tolerance();
        let bits = self.prec.bits;
        let mut starts = Vec::new();
        let mut shifts: Vec<Float> = Vec::new();
        let mut letters = Vec::new();
        for i in 0..first.len() {
            let lo = Float::with_val(bits, &first.starts[i] + &first.shifts[i]);
            let hi = Float::with_val(bits, first.end(i) + &first.shifts[i]);
            let probe = Float::with_val(bits, &lo + &tol);
            let mut j = self.cell_at(&probe);
            let mut cur = first.starts[i].clone();
            loop {
                let shift = Float::with_val(bits, &first.shifts[i] + &self.shifts[j]);
                let mergeable = shifts
                    .last()
                    .is_some_and(|s: &Float| Float::with_val(bits, s - &shift).abs() <= tol);
                if !mergeable {
                    starts.push(cur.clone());
                    shifts.push(shift);
                    letters.push(first.letters[i]);
                }
                j += 1;
                if j >= self.len() {
                    break;
                }
                let next = &self.starts[j];
                if *next >= Float::with_val(bits, &hi - &tol) {
                    break;
                }
                cur = Float::with_val(bits, next - &first.shifts[i]);
            }
        }
        PiecewiseTranslation { starts, shifts, letters, total: self.total.clone(), prec: self.prec }
    }

    /// `self^p` for `p ≥ 1`.
    pub fn power(&self, p: usize) -> PiecewiseTranslation {
        assert!(p >= 1);
        let mut acc = self.clone();
        for _ in 1..p {
            acc = self.after(&acc);
        }
        acc
    }
}

/// Piecewise-constant function on `[0, total)`: `vals[i]` on `[pts[i], pts[i+1])`.
#[derive(Clone, Debug)]
pub struct Cells<V> {
    pub pts: Vec<Float>,
    pub vals: Vec<V>,
}

impl<V: Clone> Cells<V> {
    pub fn constant(prec: Precision, v: V) -> Self {
        Cells { pts: vec![prec.zero()], vals: vec![v] }
    }

    pub fn len(&self) -> usize {
        self.pts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pts.is_empty()
    }

    pub fn value_at(&self, x: &Float) -> &V {
        &self.vals[self.pts.partition_point(|s| s <= x).saturating_sub(1)]
    }
}

/// One pull-back step: returns `G` with `G(x) = combine(i, F(M x))` on cell `i` of `m`.
/// Adjacent cells whose values satisfy `same` are merged. Fails when two
/// surviving breakpoints are closer than the separation floor.
pub fn pull_back<V: Clone>(
    m: &PiecewiseTranslation,
    f: &Cells<V>,
    out: &mut Cells<V>,
    mut combine: impl FnMut(usize, &V) -> V,
    same: impl Fn(&V, &V) -> bool,
) -> Result<()> {
    let bits = m.prec.bits;
    let tol = m.prec.merge_tolerance();
    let floor = m.prec.floor();
    let mut n = 0usize;
    let mut lo = Float::new(bits);
    let mut hi = Float::new(bits);
    let mut gap = Float::new(bits);
    let mut push = |out: &mut Cells<V>, n: &mut usize, p: &Float, shift: Option<&Float>, v: V| -> Result<()> {
        if *n > 0 && same(&out.vals[*n - 1], &v) {
            return Ok(());
        }
        if *n < out.pts.len() {
            match shift {
                Some(s) => out.pts[*n].assign(p - s),
                None => out.pts[*n].assign(p),
            }
            out.vals[*n] = v;
        } else {
            let x = match shift {
                Some(s) => Float::with_val(bits, p - s),
                None => Float::with_val(bits, p),
            };
            out.pts.push(x);
            out.vals.push(v);
        }
        if *n > 0 {
            gap.assign(&out.pts[*n] - &out.pts[*n - 1]);
            if gap < floor {
                return Err(Error::PrecisionExhausted { floor_bits: m.prec.floor_bits });
            }
        }
        *n += 1;
        Ok(())
    };
    for i in 0..m.len() {
        let s = &m.shifts[i];
        lo.assign(&m.starts[i] + s);
        lo += &tol;
        hi.assign(m.end(i) + s);
        hi -= &tol;
        let mut j = f.pts.partition_point(|p| *p <= lo).saturating_sub(1);
        let v = combine(i, &f.vals[j]);
        push(out, &mut n, &m.starts[i], None, v)?;
        j += 1;
        while j < f.pts.len() && f.pts[j] < hi {
            let v = combine(i, &f.vals[j]);
            push(out, &mut n, &f.pts[j], Some(s), v)?;
            j += 1;
        }
    }
    out.pts.truncate(n);
    out.vals.truncate(n);
    Ok(())
}

/// Breakpoints of `⋁_{k<n} T^{-k}(base partition ∪ extra)`, starting with 0.
pub fn orbit_partition(t: &IetMap, n: usize, extra: &[Float]) -> Result<Vec<Float>> {
    let m = t.to_piecewise().refine(extra);
    let mut cur = Cells::constant(t.prec, ());
    let mut next = Cells::constant(t.prec, ());
    for _ in 0..n {
        pull_back(&m, &cur, &mut next, |_, _| (), |_, _| false)?;
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(cur.pts)
}

/// `[a, b)` as a sub-interval of the domain.
#[derive(Clone, Debug)]
pub struct Subinterval {
    pub a: Float,
    pub b: Float,
}

impl Subinterval {
    pub fn new(a: Float, b: Float) -> Self {
        Subinterval { a, b }
    }

    pub fn from_f64(a: f64, b: f64, prec: Precision) -> Self {
        Subinterval { a: prec.float(a), b: prec.float(b) }
    }
}

/// Discrepancy `sup_x |S_n(1_J, x) - n |J| / total|` of the map `m` for each `n` in
/// `schedule`, one pull-back per step. Quadratic in `n`; see [`discrepancy_series`].
pub fn discrepancy_series_stepwise(m: &PiecewiseTranslation, j: &Subinterval, schedule: &[usize]) -> Result<Vec<(usize, f64)>> {
    let bits = m.prec.bits;
    let rel = Float::with_val(bits, &j.b - &j.a) / &m.total;
    let rel = rel.to_f64();
    let refined = m.refine(&[j.a.clone(), j.b.clone()]);
    let inside: Vec<i64> = (0..refined.len())
        .map(|i| (refined.starts[i] >= j.a && refined.starts[i] < j.b) as i64)
        .collect();
    let n_max = schedule.iter().copied().max().unwrap_or(0);
    let mut cur = Cells::constant(m.prec, 0i64);
    let mut next = Cells::constant(m.prec, 0i64);
    let mut out = Vec::with_capacity(schedule.len());
    let mut sched: Vec<usize> = schedule.to_vec();
    sched.sort_unstable();
    let mut si = 0usize;
    while si < sched.len() && sched[si] == 0 {
        out.push((0, 0.0));
        si += 1;
    }
    for k in 1..=n_max {
        pull_back(&refined, &cur, &mut next, |i, v| v + inside[i], |a, b| a == b)?;
        std::mem::swap(&mut cur, &mut next);
        while si < sched.len() && sched[si] == k {
            let target = k as f64 * rel;
            let d = cur.vals.iter().map(|&c| (c as f64 - target).abs()).fold(0.0, f64::max);
            out.push((k, d));
            si += 1;
        }
    }
    Ok(out)
}

pub fn discrepancy(t: &IetMap, j: &Subinterval, n: usize) -> Result<f64> {
    let s = discrepancy_series(&t.to_piecewise(), j, &[n])?;
    Ok(s[0].1)
}

/// `sup_x |S_N(f, ζ, x)|` for each `N` in `schedule`, with the sup taken over
/// the exact orbit partition, one pull-back per step.
pub fn twisted_sup_series_stepwise(
    t: &IetMap,
    f: &LocallyConstantFunction,
    zeta: &TwistParameter,
    schedule: &[usize],
) -> Result<Vec<(usize, f64)>> {
    let m = t.to_piecewise();
    let fv: Vec<Complex64> = m.letters.iter().map(|&a| f.values[a]).collect();
    let ph = zeta.phases();
    let pv: Vec<Complex64> = m.letters.iter().map(|&a| ph[a]).collect();
    let zero = Complex64::new(0.0, 0.0);
    let mut cur = Cells::constant(t.prec, zero);
    let mut next = Cells::constant(t.prec, zero);
    let n_max = schedule.iter().copied().max().unwrap_or(0);
    let mut sched: Vec<usize> = schedule.to_vec();
    sched.sort_unstable();
    let mut out = Vec::with_capacity(sched.len());
    let mut si = 0usize;
    while si < sched.len() && sched[si] == 0 {
        out.push((0, 0.0));
        si += 1;
    }
    for k in 1..=n_max {
        pull_back(&m, &cur, &mut next, |i, v| fv[i] + pv[i] * v, |a, b| a == b)?;
        std::mem::swap(&mut cur, &mut next);
        while si < sched.len() && sched[si] == k {
            let s = cur.vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
            out.push((k, s));
            si += 1;
        }
    }
    Ok(out)
}

impl<V: Clone> Cells<V> {
    /// `op(self(x), other(x))` on the common refinement. Breakpoints closer than
    /// the merge tolerance are identified; equal neighbours are merged.
    pub fn zip_with<W: Clone, U: Clone>(
        &self,
        other: &Cells<W>,
        prec: Precision,
        mut op: impl FnMut(&V, &W) -> U,
        same: impl Fn(&U, &U) -> bool,
    ) -> Result<Cells<U>> {
        let tol = prec.merge_tolerance();
        let floor = prec.floor();
        let bits = prec.bits;
        let (mut i, mut j) = (0usize, 0usize);
        let mut out: Cells<U> = Cells { pts: Vec::with_capacity(self.len() + other.len()), vals: Vec::new() };
        let push = |out: &mut Cells<U>, x: &Float, v: U| -> Result<()> {
            if let Some(last) = out.vals.last() {
                if same(last, &v) {
                    return Ok(());
                }
                let gap = Float::with_val(bits, x - out.pts.last().unwrap());
                if gap < floor {
                    return Err(Error::PrecisionExhausted { floor_bits: prec.floor_bits });
                }
            }
            out.pts.push(x.clone());
            out.vals.push(v);
            Ok(())
        };
        // Both start at 0.
        push(&mut out, &self.pts[0], op(&self.vals[0], &other.vals[0]))?;
        loop {
            let a = self.pts.get(i + 1);
            let b = other.pts.get(j + 1);
            let x = match (a, b) {
                (None, None) => break,
                (Some(a), None) => {
                    i += 1;
                    a
                }
                (None, Some(b)) => {
                    j += 1;
                    b
                }
                (Some(a), Some(b)) => {
                    let diff = Float::with_val(bits, a - b);
                    if diff.clone().abs() <= tol {
                        i += 1;
                        j += 1;
                        a
                    } else if diff.is_sign_negative() {
                        i += 1;
                        a
                    } else {
                        j += 1;
                        b
                    }
                }
            };
            let x = x.clone();
            push(&mut out, &x, op(&self.vals[i], &other.vals[j]))?;
        }
        Ok(out)
    }
}

/// A cocycle-like observable along orbit segments: `value` is constant on the
/// cells of `cells`, `map` is `T^n`.
#[derive(Clone, Debug)]
struct Segment<V> {
    n: usize,
    cells: Cells<V>,
    map: PiecewiseTranslation,
}

/// `(F_{a+b}, T^{a+b})` with `F_{a+b}(x) = join(F_a(x), F_b(T^a x))`.
fn concat<V: Clone>(
    first: &Segment<V>,
    second: &Segment<V>,
    join: &impl Fn(&V, &V) -> V,
    same: &impl Fn(&V, &V) -> bool,
) -> Result<Segment<V>> {
    let prec = first.map.prec;
    let mut moved = Cells { pts: Vec::new(), vals: Vec::new() };
    pull_back(&first.map, &second.cells, &mut moved, |_, v| v.clone(), |a, b| same(a, b))?;
    let cells = first.cells.zip_with(&moved, prec, |a, b| join(a, b), |a, b| same(a, b))?;
    let map = second.map.after(&first.map);
    Ok(Segment { n: first.n + second.n, cells, map })
}

/// Evaluate `measure(F_N)` for each `N` in `schedule` by binary splitting:
/// `F_{2^k}` is built by doubling and `F_N` from the binary digits of `N`.
fn doubling_series<V: Clone>(
    unit: Segment<V>,
    schedule: &[usize],
    join: impl Fn(&V, &V) -> V,
    same: impl Fn(&V, &V) -> bool,
    measure: impl Fn(usize, &Cells<V>) -> f64,
) -> Result<Vec<(usize, f64)>> {
    let n_max = schedule.iter().copied().max().unwrap_or(0);
    let mut powers = vec![unit];
    while powers.last().unwrap().n * 2 <= n_max {
        let last = powers.last().unwrap();
        let next = concat(last, last, &join, &same)?;
        powers.push(next);
    }
    let mut out = Vec::with_capacity(schedule.len());
    for &n in schedule {
        if n == 0 {
            out.push((0, 0.0));
            continue;
        }
        let mut acc: Option<Segment<V>> = None;
        for (k, pw) in powers.iter().enumerate() {
            if n >> k & 1 == 1 {
                acc = Some(match acc {
                    None => pw.clone(),
                    Some(a) => concat(&a, pw, &join, &same)?,
                });
            }
        }
        out.push((n, measure(n, &acc.unwrap().cells)));
    }
    Ok(out)
}

/// Discrepancy `sup_x |S_n(1_J, x) - n |J| / total|` of the map `m` for each `n` in
/// `schedule`, by binary splitting of the orbit (cost linear in `n`).
pub fn discrepancy_series(m: &PiecewiseTranslation, j: &Subinterval, schedule: &[usize]) -> Result<Vec<(usize, f64)>> {
    let bits = m.prec.bits;
    let rel = (Float::with_val(bits, &j.b - &j.a) / &m.total).to_f64();
    let refined = m.refine(&[j.a.clone(), j.b.clone()]);
    let mut cells = Cells { pts: Vec::new(), vals: Vec::new() };
    for i in 0..refined.len() {
        let v = (refined.starts[i] >= j.a && refined.starts[i] < j.b) as i64;
        if cells.vals.last() != Some(&v) {
            cells.pts.push(refined.starts[i].clone());
            cells.vals.push(v);
        }
    }
    let unit = Segment { n: 1, cells, map: refined };
    doubling_series(unit, schedule, |a, b| a + b, |a, b| a == b, |n, c| {
        let target = n as f64 * rel;
        c.vals.iter().map(|&v| (v as f64 - target).abs()).fold(0.0, f64::max)
    })
}

/// `sup_x |S_N(f, ζ, x)|` for each `N` in `schedule`, with the sup taken over
/// the exact orbit partition, by binary splitting of the orbit.
pub fn twisted_sup_series(
    t: &IetMap,
    f: &LocallyConstantFunction,
    zeta: &TwistParameter,
    schedule: &[usize],
) -> Result<Vec<(usize, f64)>> {
    let m = t.to_piecewise();
    let ph = zeta.phases();
    let cells = Cells {
        pts: m.starts.clone(),
        vals: m.letters.iter().map(|&a| (f.values[a], ph[a])).collect::<Vec<(Complex64, Complex64)>>(),
    };
    let unit = Segment { n: 1, cells, map: m };
    doubling_series(
        unit,
        schedule,
        |a, b| (a.0 + a.1 * b.0, a.1 * b.1),
        |a, b| a == b,
        |_, c| c.vals.iter().map(|v| v.0.norm()).fold(0.0, f64::max),
    )
}
