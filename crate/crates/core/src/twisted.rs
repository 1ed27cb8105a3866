//! Twisted Rauzy-Veech and Zorich matrices.
//!
//! A top step contributes `I + e(ζ_{α_b}) E_{α_b α_t}`, a bottom step
//! `I + E_{α_t α_b} + (e(ζ_{α_b}) - 1) E_{α_t α_t}`, each evaluated at the toral
//! state reached just before it. Along a Zorich run the factors commute, so
//! the product collapses to geometric sums of phases:
//!
//! * top run, loser `b` losing `c` times: entry `(b, α_t)` is `Σ_{j<c} e(ζ_b + j ζ_{α_t})`;
//! * bottom run, loser `t` losing `c` times: entry `(t, t)` is `e(ζ_{α_b})^c` and
//!   entry `(t, α_b)` is `Σ_{j<c} e(ζ_{α_b})^j`.

use num_complex::Complex64;
use rug::float::Constant;
use rug::{Float, Integer};
use serde::ser::{Serialize, SerializeStruct, Serializer};

use crate::combinatorics::{MoveKind, Permutation};
use crate::error::{Error, Result};
use crate::iet::TwistParameter;
use crate::linalg::IntMatrix;
use crate::numeric::{cis_turns, frac, HiComplex, Precision};
use crate::renorm::{rauzy_step, zorich_step, ZorichRun};

#[derive(Clone, Debug, PartialEq)]
pub struct TwistedMatrix {
    d: usize,
    entries: Vec<HiComplex>,
}

impl TwistedMatrix {
    pub fn identity(d: usize, prec: u32) -> Self {
        let mut m = TwistedMatrix { d, entries: vec![HiComplex::zero(prec); d * d] };
        for i in 0..d {
            m.entries[i * d + i] = HiComplex::real(prec, 1u32);
        }
        m
    }

    pub fn from_int(b: &IntMatrix, prec: u32) -> Self {
        let d = b.rows();
        let entries = (0..d * d).map(|k| HiComplex::real(prec, &b[(k / d, k % d)])).collect();
        TwistedMatrix { d, entries }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> &HiComplex {
        &self.entries[i * self.d + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: HiComplex) {
        self.entries[i * self.d + j] = v;
    }

    pub fn mul(&self, other: &TwistedMatrix) -> TwistedMatrix {
        let d = self.d;
        let prec = self.entries[0].prec();
        let mut out = TwistedMatrix { d, entries: vec![HiComplex::zero(prec); d * d] };
        for i in 0..d {
            for k in 0..d {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..d {
                    let b = other.get(k, j);
                    if b.is_zero() {
                        continue;
                    }
                    let p = a * b;
                    out.entries[i * d + j] = &out.entries[i * d + j] + &p;
                }
            }
        }
        out
    }

    /// True when every entry is real and equals the integer entry of `b` exactly.
    pub fn equals_int(&self, b: &IntMatrix) -> bool {
        (0..self.d).all(|i| {
            (0..self.d).all(|j| {
                let e = self.get(i, j);
                e.im.is_zero() && e.re == b[(i, j)]
            })
        })
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn det(&self) -> HiComplex {
        let d = self.d;
        let prec = self.entries[0].prec();
        let mut a = self.entries.clone();
        let mut det = HiComplex::real(prec, 1u32);
        for k in 0..d {
            let piv = (k..d)
                .max_by(|&x, &y| a[x * d + k].norm_sqr().partial_cmp(&a[y * d + k].norm_sqr()).unwrap())
                .unwrap();
            if a[piv * d + k].is_zero() {
                return HiComplex::zero(prec);
            }
            if piv != k {
                for j in 0..d {
                    a.swap(piv * d + j, k * d + j);
                }
                det = &HiComplex::zero(prec) - &det;
            }
            let p = a[k * d + k].clone();
            det = &det * &p;
            for i in k + 1..d {
                let factor = a[i * d + k].div(&p);
                if factor.is_zero() {
                    continue;
                }
                for j in k..d {
                    let t = &factor * &a[k * d + j];
                    a[i * d + j] = &a[i * d + j] - &t;
                }
            }
        }
        det
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|e| e.abs().to_f64()).fold(0.0, f64::max)
    }

    pub fn to_c64_rows(&self) -> Vec<Vec<Complex64>> {
        (0..self.d).map(|i| (0..self.d).map(|j| self.get(i, j).to_c64()).collect()).collect()
    }
}

/// JSON shape: `{"d": d, "entries": [[[re, im], ...], ...]}` in row-major order.
impl Serialize for TwistedMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = self
            .to_c64_rows()
            .into_iter()
            .map(|r| r.into_iter().map(|z| [z.re, z.im]).collect())
            .collect();
        let mut st = serializer.serialize_struct("TwistedMatrix", 2)?;
        st.serialize_field("d", &self.d)?;
        st.serialize_field("entries", &rows)?;
        st.end()
    }
}

fn turns_float(z: &TwistParameter, a: usize, prec: u32) -> Float {
    match z {
        TwistParameter::Real(v) => Float::with_val(prec, &v[a]),
        TwistParameter::Rational { num, den } => {
            Float::with_val(prec, rug::Rational::from((num[a].clone(), den.clone())))
        }
    }
}

/// `(sign, r)` with `sin(π x) = sign · sin(π r)` and `r ∈ [0, 1/2]`.
fn reduce_sin_arg(x: &Float) -> (i32, Float) {
    let prec = x.prec();
    let half = Float::with_val(prec, x / 2u32);
    let mut r = Float::with_val(prec, frac(&half) * 2u32);
    let mut sign = 1;
    if r >= 1u32 {
        r -= 1u32;
        sign = -1;
    }
    let alt = Float::with_val(prec, 1u32 - &r);
    if alt < r {
        r = alt;
    }
    (sign, r)
}

fn sin_pi(x: &Float) -> Float {
    let (sign, r) = reduce_sin_arg(x);
    let s = (r * Float::with_val(x.prec(), Constant::Pi)).sin();
    s * sign
}

/// `Σ_{j<c} e(θ0 + j θ)` at the precision of `theta`.
pub fn phase_sum(theta0: &Float, theta: &Float, c: u64) -> HiComplex {
    let prec = theta.prec();
    if c == 0 {
        return HiComplex::zero(prec);
    }
    let t = frac(theta);
    if t.is_zero() {
        return HiComplex::cis_turns(theta0).scale_int(&Integer::from(c));
    }
    let ct = Float::with_val(prec, &t * c);
    let ratio = sin_pi(&ct) / sin_pi(&t);
    let mid = Float::with_val(prec, &t * (c - 1)) / 2u32 + theta0;
    let w = HiComplex::cis_turns(&mid);
    HiComplex { re: w.re * &ratio, im: w.im * &ratio }
}

fn sin_pi_f64(x: &Float) -> f64 {
    let (sign, r) = reduce_sin_arg(x);
    sign as f64 * (std::f64::consts::PI * r.to_f64()).sin()
}

/// Double-precision `Σ_{j<c} e(θ0 + j θ)`; the reductions modulo 1 are done in high precision.
pub fn phase_sum_f64(theta0: &Float, theta: &Float, c: u64) -> Complex64 {
    if c == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let prec = theta.prec();
    let t = frac(theta);
    if t.is_zero() {
        return cis_turns(theta0.to_f64()) * c as f64;
    }
    let ct = Float::with_val(prec, &t * c);
    let ratio = sin_pi_f64(&ct) / sin_pi_f64(&t);
    let mid = frac(&(Float::with_val(prec, &t * (c - 1)) / 2u32 + theta0));
    cis_turns(mid.to_f64()) * ratio
}

/// Cached `e(k / den)` for a rational twist.
#[derive(Clone, Debug)]
pub struct PhaseTable {
    pub den: u64,
    pub roots: Vec<Complex64>,
}

impl PhaseTable {
    pub fn new(den: u64) -> Self {
        let roots = (0..den)
            .map(|k| {
                let t = Float::with_val(128, k) / den;
                HiComplex::cis_turns(&t).to_c64()
            })
            .collect();
        PhaseTable { den, roots }
    }

    pub fn root(&self, k: u64) -> Complex64 {
        self.roots[(k % self.den) as usize]
    }

    /// `Σ_{j<c} e((a0 + j a) / den)`, using that a full period of a nontrivial root sums to zero.
    pub fn sum(&self, a0: u64, a: u64, c: u64) -> Complex64 {
        let a = a % self.den;
        if a == 0 {
            return self.root(a0) * c as f64;
        }
        let ord = self.den / gcd(a, self.den);
        let r = c % ord;
        let mut s = Complex64::new(0.0, 0.0);
        let mut k = a0 % self.den;
        for _ in 0..r {
            s += self.roots[k as usize];
            k = (k + a) % self.den;
        }
        s
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Row `loser` of a twisted Zorich matrix: `(loser, diagonal, entry in the winner column)`.
pub type RunCoefficient = (usize, Complex64, Complex64);

/// Coefficients of the twisted Zorich matrix of `run`, evaluated at the toral
/// state `zeta` at the start of the run.
pub fn run_coefficients(run: &ZorichRun, zeta: &TwistParameter, table: Option<&PhaseTable>) -> Vec<RunCoefficient> {
    let w = run.winner;
    let one = Complex64::new(1.0, 0.0);
    if let (Some(tab), TwistParameter::Rational { num, .. }) = (table, zeta) {
        let n = |a: usize| num[a].to_u64().expect("reduced numerator");
        let zw = n(w);
        return run
            .losers
            .iter()
            .map(|&(b, c)| match run.kind {
                MoveKind::Top => (b, one, tab.sum(n(b), zw, c)),
                MoveKind::Bottom => (b, tab.root((zw % tab.den) * (c % tab.den)), tab.sum(0, zw, c)),
            })
            .collect();
    }
    let prec = match zeta {
        TwistParameter::Real(v) => v[0].prec(),
        TwistParameter::Rational { .. } => 128,
    };
    let zw = turns_float(zeta, w, prec);
    run.losers
        .iter()
        .map(|&(b, c)| match run.kind {
            MoveKind::Top => (b, one, phase_sum_f64(&turns_float(zeta, b, prec), &zw, c)),
            MoveKind::Bottom => {
                let diag = frac(&Float::with_val(prec, &zw * c));
                (b, cis_turns(diag.to_f64()), phase_sum_f64(&Float::new(prec), &zw, c))
            }
        })
        .collect()
}

/// `f ← ℬ f` from run coefficients; the winner coordinate is read before any update.
pub fn apply_coefficients(coeffs: &[RunCoefficient], winner: usize, f: &mut [Complex64]) {
    let fw = f[winner];
    for &(b, diag, off) in coeffs {
        f[b] = diag * f[b] + off * fw;
    }
}

pub fn twisted_rauzy_matrix(
    lambda: &[Float],
    pi: &Permutation,
    zeta: &TwistParameter,
    prec: Precision,
) -> Result<TwistedMatrix> {
    let step = rauzy_step(lambda, pi, prec)?;
    let d = pi.d();
    let (at, ab) = (pi.alpha_t(), pi.alpha_b());
    let e = HiComplex::cis_turns(&turns_float(zeta, ab, prec.bits));
    let mut m = TwistedMatrix::identity(d, prec.bits);
    match step.kind {
        MoveKind::Top => m.set(ab, at, e),
        MoveKind::Bottom => {
            m.set(at, ab, HiComplex::real(prec.bits, 1u32));
            m.set(at, at, e);
        }
    }
    Ok(m)
}

/// Toral state after a step.
pub type ToralState = (Vec<Float>, Permutation, TwistParameter);

/// Twisted Zorich matrix in closed form, with the next toral state.
pub fn twisted_zorich_matrix(
    lambda: &[Float],
    pi: &Permutation,
    zeta: &TwistParameter,
    prec: Precision,
) -> Result<(TwistedMatrix, ToralState)> {
    let step = zorich_step(lambda, pi, prec)?;
    let d = pi.d();
    let run = &step.run;
    let w = run.winner;
    let zw = turns_float(zeta, w, prec.bits);
    let mut m = TwistedMatrix::identity(d, prec.bits);
    for &(b, c) in &run.losers {
        match run.kind {
            MoveKind::Top => m.set(b, w, phase_sum(&turns_float(zeta, b, prec.bits), &zw, c)),
            MoveKind::Bottom => {
                let diag = frac(&Float::with_val(prec.bits, &zw * c));
                m.set(b, b, HiComplex::cis_turns(&diag));
                m.set(b, w, phase_sum(&Float::new(prec.bits), &zw, c));
            }
        }
    }
    let mut z = zeta.clone();
    run.apply_twist(&mut z);
    Ok((m, (step.next_lambda, step.next_perm, z)))
}

/// Twisted Zorich matrix as the ordered product of twisted Rauzy matrices
/// along the toral Rauzy orbit.
pub fn twisted_zorich_matrix_naive(
    lambda: &[Float],
    pi: &Permutation,
    zeta: &TwistParameter,
    prec: Precision,
) -> Result<(TwistedMatrix, ToralState)> {
    let first = rauzy_step(lambda, pi, prec)?.kind;
    let d = pi.d();
    let mut lam = lambda.to_vec();
    let mut perm = pi.clone();
    let mut z = zeta.clone();
    let mut m = TwistedMatrix::identity(d, prec.bits);
    loop {
        let step = rauzy_step(&lam, &perm, prec)?;
        if step.kind != first {
            break;
        }
        let factor = twisted_rauzy_matrix(&lam, &perm, &z, prec)?;
        m = factor.mul(&m);
        z = z.apply_integer_matrix(&step.matrix);
        lam = step.next_lambda;
        perm = step.next_perm;
    }
    crate::renorm::normalize(&mut lam);
    Ok((m, (lam, perm, z)))
}

pub fn apply_twisted(m: &TwistedMatrix, f: &[Complex64]) -> Result<Vec<Complex64>> {
    if f.len() != m.d {
        return Err(Error::DimensionMismatch { expected: m.d, got: f.len() });
    }
    let rows = m.to_c64_rows();
    Ok(rows.iter().map(|r| r.iter().zip(f).map(|(a, b)| a * b).sum()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::renorm::zorich_step;

    fn prec() -> Precision {
        Precision::default()
    }

    fn fl(v: &[f64]) -> Vec<Float> {
        v.iter().map(|&x| prec().float(x)).collect()
    }

    fn rot() -> Permutation {
        Permutation::parse("A B / B A").unwrap()
    }

    #[test]
    fn zero_twist_is_untwisted() {
        for lam in [[0.3, 0.7], [0.7, 0.3]] {
            let m = twisted_rauzy_matrix(&fl(&lam), &rot(), &TwistParameter::zero(2), prec()).unwrap();
            let b = rauzy_step(&fl(&lam), &rot(), prec()).unwrap().matrix;
            assert!(m.equals_int(&b));
        }
    }

    #[test]
    fn half_twist_top_and_bottom() {
        let z = TwistParameter::rational(&[1, 0], 2);
        let m = twisted_rauzy_matrix(&fl(&[0.3, 0.7]), &rot(), &z, prec()).unwrap();
        assert_eq!(m.get(0, 1).re, -1);
        assert!(m.get(0, 1).im.clone().abs() < 1e-30);
        let m = twisted_rauzy_matrix(&fl(&[0.7, 0.3]), &rot(), &z, prec()).unwrap();
        let det = m.det();
        assert!((det.re.to_f64() + 1.0).abs() < 1e-30 && det.im.to_f64().abs() < 1e-30);
    }

    #[test]
    fn two_step_example() {
        let z = TwistParameter::rational(&[1, 0], 2);
        let (m, (_, _, z2)) = twisted_zorich_matrix(&fl(&[0.3, 0.7]), &rot(), &z, prec()).unwrap();
        assert!((m.get(0, 1).re.to_f64() + 2.0).abs() < 1e-30);
        assert!(m.get(0, 1).im.to_f64().abs() < 1e-30);
        assert_eq!(z2, z);
        let f = vec![Complex64::new(1.0, 0.0); 2];
        let one_minus = TwistedMatrix::from_int(&IntMatrix::from_rows(&[vec![1, -1], vec![0, 1]]), 128);
        assert_eq!(apply_twisted(&one_minus, &f).unwrap(), vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]);
        assert!(apply_twisted(&one_minus, &f[..1]).is_err());
    }

    #[test]
    fn closed_form_matches_product() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let p = Permutation::reversal(4).unwrap();
        let mut lam = crate::numeric::sample_simplex(&mut rng, 4, 128);
        let mut perm = p;
        let mut z = TwistParameter::from_f64(&[0.123, 0.77, 0.5, 0.031], prec());
        for _ in 0..25 {
            let (a, sa) = twisted_zorich_matrix(&lam, &perm, &z, prec()).unwrap();
            let (b, sb) = twisted_zorich_matrix_naive(&lam, &perm, &z, prec()).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    let diff = (a.get(i, j) - b.get(i, j)).abs().to_f64();
                    assert!(diff < 1e-25, "entry ({i},{j}) differs by {diff}");
                }
            }
            assert_eq!(sa.1, sb.1);
            for (x, y) in sa.2.to_f64_vec().iter().zip(sb.2.to_f64_vec()) {
                let d = (x - y).abs();
                assert!(d.min(1.0 - d) < 1e-25);
            }
            // Fast coefficients agree with the matrix.
            let run = zorich_step(&lam, &perm, prec()).unwrap().run;
            let mut f: Vec<Complex64> = (0..4).map(|k| Complex64::new(k as f64 - 1.5, 0.5)).collect();
            let expect = apply_twisted(&a, &f).unwrap();
            apply_coefficients(&run_coefficients(&run, &z, None), run.winner, &mut f);
            for (x, y) in f.iter().zip(&expect) {
                assert!((x - y).norm() <= 1e-9 * (1.0 + y.norm()));
            }
            (lam, perm, z) = sa;
        }
    }

    #[test]
    fn phase_table_sums() {
        let t = PhaseTable::new(5);
        let direct: Complex64 = (0..13).map(|j| t.root(2 + 3 * j)).sum();
        assert!((t.sum(2, 3, 13) - direct).norm() < 1e-12);
        assert_eq!(t.sum(1, 0, 4), t.root(1) * 4.0);
        let th = Float::with_val(128, 3) / 5u32;
        let th0 = Float::with_val(128, 2) / 5u32;
        assert!((phase_sum_f64(&th0, &th, 13) - direct).norm() < 1e-12);
    }
}
